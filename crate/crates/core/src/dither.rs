//! Parallel dither.
//!
//! An input is replicated `replicates` times and independent uniform noise on
//! `[-amplitude, +amplitude]` is added to every replicate. At inference the
//! network outputs of the replicates are averaged; during training the
//! per-replicate loss gradients are averaged instead.
//!
//! Noise for replicate `r` of stream `s` comes from a generator keyed by
//! `(seed, s, r)`, so any replicate can be regenerated on its own and the
//! results never depend on evaluation order or worker count.
//!
//! Averages are taken around the first replicate: `mean = x₀ + Σ(xᵣ - x₀)/n`,
//! summed in replicate-index order. With zero amplitude every difference is
//! exactly zero, so the dithered result is bit-identical to the clean one.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mlp::{backprop, Gradients, LossKind, Mlp};
use crate::rng;

/// Default half-range of the uniform noise (unit range on the [0, 1] pixel scale).
pub const DEFAULT_AMPLITUDE: f64 = 0.5;

pub const DEFAULT_REPLICATES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DitherConfig {
    pub replicates: usize,
    /// Half-range of the uniform noise.
    pub amplitude: f64,
    pub seed: u64,
}

impl Default for DitherConfig {
    fn default() -> Self {
        DitherConfig {
            replicates: DEFAULT_REPLICATES,
            amplitude: DEFAULT_AMPLITUDE,
            seed: 0,
        }
    }
}

impl DitherConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::InvalidConfig(
                "dither needs at least one replicate".into(),
            ));
        }
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "dither amplitude must be finite and non-negative, got {}",
                self.amplitude
            )));
        }
        Ok(())
    }

    /// Writes replicate `index` of `image` into `out`.
    pub(crate) fn replicate_into(
        &self,
        image: &[f64],
        stream_id: u64,
        index: usize,
        out: &mut Vec<f64>,
    ) {
        let mut noise = rng::keyed(self.seed, stream_id, index as u64);
        let a = self.amplitude;
        out.clear();
        out.extend(
            image
                .iter()
                .map(|&x| x + (2.0 * noise.gen::<f64>() - 1.0) * a),
        );
    }
}

/// Returns `cfg.replicates` noisy copies of `image`. Values are not clipped.
pub fn make_replicates(image: &[f64], cfg: &DitherConfig, stream_id: u64) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    if let Some(bad) = image.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite pixel {bad}")));
    }
    Ok((0..cfg.replicates)
        .map(|r| {
            let mut out = Vec::with_capacity(image.len());
            cfg.replicate_into(image, stream_id, r, &mut out);
            out
        })
        .collect())
}

/// Mean network output over the dithered replicates of `image`.
pub fn dithered_output(
    net: &Mlp,
    image: &[f64],
    cfg: &DitherConfig,
    stream_id: u64,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let mut replicate = Vec::with_capacity(image.len());
    cfg.replicate_into(image, stream_id, 0, &mut replicate);
    let anchor = net.output(&replicate)?;
    let mut acc = vec![0.0; anchor.len()];
    for r in 1..cfg.replicates {
        cfg.replicate_into(image, stream_id, r, &mut replicate);
        let out = net.output_unchecked(&replicate);
        for ((a, o), z) in acc.iter_mut().zip(&out).zip(&anchor) {
            *a += o - z;
        }
    }
    let n = cfg.replicates as f64;
    Ok(anchor.iter().zip(&acc).map(|(z, a)| z + a / n).collect())
}

/// Mean loss gradient over the dithered replicates of `image`.
pub fn dithered_gradient(
    net: &Mlp,
    image: &[f64],
    target: &[f64],
    kind: LossKind,
    cfg: &DitherConfig,
    stream_id: u64,
) -> Result<Gradients> {
    cfg.validate()?;
    let mut anchor_input = Vec::with_capacity(image.len());
    cfg.replicate_into(image, stream_id, 0, &mut anchor_input);
    // Validates shapes and the loss/activation pairing.
    let mut mean = backprop(net, &anchor_input, target, kind)?;
    if cfg.replicates == 1 {
        return Ok(mean);
    }
    let (anchor_acts, anchor_deltas) = net.forward_and_deltas(&anchor_input, target, kind);
    let mut acc = Gradients::zeros_like(net);
    let mut replicate = Vec::with_capacity(image.len());
    for r in 1..cfg.replicates {
        cfg.replicate_into(image, stream_id, r, &mut replicate);
        net.accumulate_gradient_difference(
            &replicate,
            &anchor_acts,
            &anchor_deltas,
            &anchor_input,
            target,
            kind,
            &mut acc,
        );
    }
    let n = cfg.replicates as f64;
    for (m, a) in mean.iter_mut().zip(acc.iter()) {
        *m += a / n;
    }
    Ok(mean)
}
