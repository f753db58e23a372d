fn main() {
    std::process::exit(qualproj::cli::dispatch(std::env::args_os()));
}
