//! Writes the synthetic stand-in corpus as one CSV per project version.
//!
//! ```text
//! cargo run --release --example surrogate_corpus -- <dir> [scale] [seed]
//! ```

use std::path::PathBuf;
use std::process::ExitCode;

use faultforge::corpus::surrogate::{write_corpus, SurrogateConfig};

fn main() -> ExitCode {
    let mut args = std::env::args().skip(1);
    let Some(dir) = args.next().map(PathBuf::from) else {
        eprintln!("usage: surrogate_corpus <dir> [scale] [seed]");
        return ExitCode::from(2);
    };
    let mut cfg = SurrogateConfig::default();
    if let Some(s) = args.next() {
        match s.parse() {
            Ok(v) => cfg.scale = v,
            Err(_) => {
                eprintln!("scale must be a number, got '{s}'");
                return ExitCode::from(2);
            }
        }
    }
    if let Some(s) = args.next() {
        match s.parse() {
            Ok(v) => cfg.seed = v,
            Err(_) => {
                eprintln!("seed must be an integer, got '{s}'");
                return ExitCode::from(2);
            }
        }
    }
    match write_corpus(&dir, &cfg) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}: {e}", dir.display());
            ExitCode::FAILURE
        }
    }
}
