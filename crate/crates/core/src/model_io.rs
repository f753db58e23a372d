//! Versioned JSON serialization of [`Mlp`] networks.
//!
//! ```json
//! {
//!   "format_version": 1,
//!   "layer_sizes": [784, 100, 1],
//!   "activations": [{"kind": "biased_sigmoid", "beta": 5.0}, ...],
//!   "weights": [[...row-major...], ...],
//!   "biases": [[...], ...],
//!   "seed": 42
//! }
//! ```
//!
//! Floats are written with the shortest representation that parses back to
//! the same bits, so save→load reproduces parameters exactly.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mlp::{Activation, Layer, Mlp};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub format_version: u32,
    pub layer_sizes: Vec<usize>,
    pub activations: Vec<Activation>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    /// Seed the initial parameters were drawn from, when known.
    pub seed: Option<u64>,
}

impl From<&Mlp> for ModelDocument {
    fn from(net: &Mlp) -> Self {
        ModelDocument {
            format_version: MODEL_FORMAT_VERSION,
            layer_sizes: net.layer_sizes(),
            activations: net.layers().iter().map(Layer::activation).collect(),
            weights: net.layers().iter().map(|l| l.weights().to_vec()).collect(),
            biases: net.layers().iter().map(|l| l.biases().to_vec()).collect(),
            seed: net.seed(),
        }
    }
}

impl ModelDocument {
    pub fn into_mlp(self) -> Result<Mlp> {
        if self.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported model format version {}",
                self.format_version
            )));
        }
        let n = self.layer_sizes.len().saturating_sub(1);
        if n == 0
            || self.activations.len() != n
            || self.weights.len() != n
            || self.biases.len() != n
        {
            return Err(Error::Shape(format!(
                "model document has {} sizes, {} activations, {} weight arrays, {} bias arrays",
                self.layer_sizes.len(),
                self.activations.len(),
                self.weights.len(),
                self.biases.len()
            )));
        }
        let layers = self
            .layer_sizes
            .windows(2)
            .zip(self.activations)
            .zip(self.weights.into_iter().zip(self.biases))
            .map(|((w, act), (weights, biases))| Layer::new(w[0], w[1], weights, biases, act))
            .collect::<Result<Vec<_>>>()?;
        Ok(Mlp::from_layers(self.layer_sizes[0], layers)?.with_seed(self.seed))
    }
}

pub fn to_json(net: &Mlp) -> Result<String> {
    Ok(serde_json::to_string(&ModelDocument::from(net))?)
}

pub fn from_json(text: &str) -> Result<Mlp> {
    serde_json::from_str::<ModelDocument>(text)?.into_mlp()
}

pub fn save(net: &Mlp, path: &Path) -> Result<()> {
    fs::write(path, to_json(net)?).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<Mlp> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_json(&text).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlp::init_network;
    use proptest::prelude::*;

    #[test]
    fn document_shape() {
        let net = init_network(
            &[4, 3, 2],
            &[Activation::BiasedSigmoid { beta: 5.0 }, Activation::Softmax],
            9,
        )
        .unwrap();
        let json: serde_json::Value = serde_json::from_str(&to_json(&net).unwrap()).unwrap();
        assert_eq!(json["format_version"], 1);
        assert_eq!(json["layer_sizes"], serde_json::json!([4, 3, 2]));
        assert_eq!(
            json["activations"][0],
            serde_json::json!({"kind": "biased_sigmoid", "beta": 5.0})
        );
        assert_eq!(
            json["activations"][1],
            serde_json::json!({"kind": "softmax"})
        );
        assert_eq!(json["weights"][0].as_array().unwrap().len(), 12);
        assert_eq!(json["seed"], 9);
    }

    #[test]
    fn rejects_inconsistent_documents() {
        let net = init_network(&[4, 3], &[Activation::Linear], 1).unwrap();
        let mut doc = ModelDocument::from(&net);
        doc.weights[0].pop();
        assert!(matches!(doc.clone().into_mlp(), Err(Error::Shape(_))));
        let mut doc = ModelDocument::from(&net);
        doc.format_version = 7;
        assert!(doc.into_mlp().is_err());
        assert!(from_json(r#"{"format_version":1}"#).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let net = init_network(
            &[784, 100, 1],
            &[Activation::BiasedSigmoid { beta: 5.0 }; 2],
            77,
        )
        .unwrap();
        save(&net, &path).unwrap();
        assert_eq!(load(&path).unwrap(), net);
    }

    proptest! {
        #[test]
        fn save_load_reproduces_parameters(seed in any::<u64>(), scale in 1e-6f64..1e6) {
            let mut net = init_network(&[5, 4, 3], &[Activation::PlainSigmoid, Activation::Softmax], seed).unwrap();
            let mut grads = crate::mlp::Gradients::zeros_like(&net);
            for (i, g) in grads.iter_mut().enumerate() {
                *g = (i as f64 + 0.37) * scale / 7.0;
            }
            net.apply_gradients(&grads, 1.0).unwrap();
            let back = from_json(&to_json(&net).unwrap()).unwrap();
            prop_assert_eq!(back, net);
        }
    }
}
