//! Runs a scenario file in memory and prints its summary; pass a path to
//! use your own, and an output directory to also write the CSV/JSON files.
//!
//!     cargo run --example scenario_runner -- scenarios/electron_image_m2.toml /tmp/out

use std::path::{Path, PathBuf};

use matterwave::config::{load_config, OutputFormat};
use matterwave::runner::{run_experiment, write_outputs, RunError, Summary};

pub fn run_example(path: &Path, out_dir: Option<&Path>) -> Result<Summary, RunError> {
    let cfg = load_config(path)?;
    let out = run_experiment(&cfg)?;
    match out_dir {
        Some(dir) => write_outputs(&out, &cfg, dir, OutputFormat::Both),
        None => Ok(out.summary),
    }
}

pub fn default_scenario() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/electron_image_m2.toml")
}

fn main() {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(default_scenario);
    let out_dir = args.next().map(PathBuf::from);
    match run_example(&path, out_dir.as_deref()) {
        Ok(summary) => {
            println!("{} ({})", summary.experiment, path.display());
            for (name, q) in &summary.quantities {
                println!("  {name:<32} {:>14.6e} {}", q.si, q.unit);
            }
            for w in &summary.warnings {
                println!("  warning: {w}");
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
