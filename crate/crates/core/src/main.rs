use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use compreg::io::check::{run_equivalence, summarize};
use compreg::io::output::to_json;
use compreg::io::{run_fit, run_report, run_synth, Backend, Overrides};
use compreg::{Error, Result};

#[derive(Parser)]
#[command(
    name = "compreg",
    version,
    about = "Log-contrast regression with totals and moderation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON configuration (for `synth`, a synthetic-data spec).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to the one named in the configuration.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model and write coefficient tables, elasticities and a manifest.
    Fit {
        #[command(flatten)]
        common: Common,
        /// freq, bayes_soft, bayes_hard or zinb.
        #[arg(long, value_parser = parse_backend)]
        backend: Option<Backend>,
    },
    /// Generate a synthetic dataset with its truth record.
    Synth {
        #[command(flatten)]
        common: Common,
    },
    /// Rebuild the elasticity report from a coefficient table.
    Report {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_backend)]
        backend: Option<Backend>,
        /// Coefficient CSV; defaults to coefficients.csv in the output directory.
        #[arg(long)]
        coefficients: Option<PathBuf>,
    },
    /// Cross-check the KKT, alr and penalty-oracle least-squares routes.
    Check {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        instances: usize,
        #[arg(long, default_value_t = 200)]
        n: usize,
        /// Also write check.json here.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

fn parse_backend(s: &str) -> std::result::Result<Backend, String> {
    Backend::parse(s).map_err(|e| e.to_string())
}

fn overrides(c: &Common, backend: Option<Backend>) -> Overrides {
    Overrides {
        seed: c.seed,
        out_dir: c.out_dir.clone(),
        backend,
    }
}

/// Exit code for a failed `check`.
const CHECK_FAILED: u8 = 1;

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Fit { common, backend } => {
            let out = run_fit(&common.config, &overrides(&common, backend))?;
            println!("wrote {} files to {}", out.files.len(), out.out_dir.display());
        }
        Command::Synth { common } => {
            let out = run_synth(&common.config, &overrides(&common, None))?;
            println!("wrote {} files to {}", out.files.len(), out.out_dir.display());
        }
        Command::Report {
            common,
            backend,
            coefficients,
        } => {
            let out = run_report(&common.config, coefficients.as_deref(), &overrides(&common, backend))?;
            print!("{}", std::fs::read_to_string(out.out_dir.join("elasticity.txt"))?);
        }
        Command::Check {
            seed,
            instances,
            n,
            out_dir,
        } => {
            let results = run_equivalence(seed, instances, n)?;
            let (text, ok) = summarize(&results);
            print!("{text}");
            if let Some(dir) = out_dir {
                std::fs::create_dir_all(&dir)?;
                std::fs::write(dir.join("check.json"), to_json(&results)?)?;
            }
            if !ok {
                return Ok(CHECK_FAILED);
            }
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    e.exit_code() as u8
}
