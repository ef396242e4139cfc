use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use matterwave::config::{load_config, ConfigError, OutputFormat, ScenarioConfig};
use matterwave::runner::{run_sweep, run_to_dir, RunError};

#[derive(Parser)]
#[command(
    name = "matterwave",
    version,
    about = "Matter-wave dispersion, lens and imaging experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
    Both,
}

#[derive(clap::Args)]
struct OutputArgs {
    /// Output directory (overrides the config and MATTERWAVE_OUT_DIR).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Only print errors.
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a scenario file.
    Run {
        config: PathBuf,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Validate a scenario file and print the derived quantities.
    Check {
        config: PathBuf,
        #[arg(long)]
        quiet: bool,
    },
    /// Run a scenario once per value of one config key.
    Sweep {
        config: PathBuf,
        /// Dotted key, e.g. `lens.e0`.
        #[arg(long)]
        param: String,
        /// Comma-separated values, e.g. `1e5 V/m,2e5 V/m`.
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
        #[command(flatten)]
        out: OutputArgs,
    },
}

fn out_dir(flag: &Option<PathBuf>, cfg_dir: &Path) -> PathBuf {
    flag.clone()
        .or_else(|| std::env::var_os("MATTERWAVE_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| cfg_dir.to_path_buf())
}

fn format(flag: Option<Format>, cfg: OutputFormat) -> OutputFormat {
    match flag {
        Some(Format::Csv) => OutputFormat::Csv,
        Some(Format::Json) => OutputFormat::Json,
        Some(Format::Both) => OutputFormat::Both,
        None => cfg,
    }
}

fn init_logging(quiet: bool) {
    let level = if quiet { "error" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
}

fn load(path: &Path) -> Result<ScenarioConfig, RunError> {
    Ok(load_config(path)?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config, out } => {
            init_logging(out.quiet);
            load(config).and_then(|cfg| {
                let dir = out_dir(&out.out_dir, &cfg.output.dir);
                let summary = run_to_dir(&cfg, &dir, format(out.format, cfg.output.format))?;
                if !out.quiet {
                    println!(
                        "{}: wrote {} files to {}",
                        summary.experiment,
                        summary.files.len(),
                        dir.display()
                    );
                    for (name, q) in &summary.quantities {
                        println!("  {name} = {:.6e} {}", q.si, q.unit);
                    }
                }
                Ok(())
            })
        }
        Command::Check { config, quiet } => {
            init_logging(*quiet);
            load(config).map(|cfg| {
                if !quiet {
                    println!("ok: {} experiment", cfg.experiment.name());
                    for (name, e) in &cfg.provenance {
                        println!("  {name} = {:.9e} (internal {:.9e})", e.si, e.natural);
                    }
                }
            })
        }
        Command::Sweep {
            config,
            param,
            values,
            out,
        } => {
            init_logging(out.quiet);
            sweep(config, param, values, out)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn sweep(config: &Path, param: &str, values: &[String], out: &OutputArgs) -> Result<(), RunError> {
    let text = std::fs::read_to_string(config).map_err(|source| ConfigError::Io {
        path: config.to_path_buf(),
        source,
    })?;
    let base: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::Syntax(e.message().to_string()))?;
    // Validate the unmodified file first so that structural errors surface once.
    let cfg = matterwave::config::from_table(base.clone())?;
    let dir = out_dir(&out.out_dir, &cfg.output.dir);
    let mut first_err = None;
    for (value, result) in run_sweep(
        &base,
        param,
        values,
        &dir,
        format(out.format, cfg.output.format),
    ) {
        match result {
            Ok(summary) if !out.quiet => println!("{param}={value}: {} files", summary.files.len()),
            Ok(_) => {}
            Err(e) => {
                eprintln!("{param}={value}: {e}");
                first_err.get_or_insert(e);
            }
        }
    }
    first_err.map_or(Ok(()), Err)
}
