//! `omniact`: fisheye unwrapping and MIML action recognition from the
//! command line.

mod ablate;
mod config;
mod eval;
mod localize;
mod synth;
mod train;
mod unwrap;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use config::{BadConfig, Config};

#[derive(Debug, Parser)]
#[command(name = "omniact", version, about = "Top-view fisheye unwrapping and weakly-supervised action recognition")]
struct Cli {
    /// JSON config file. Unknown keys are rejected; command-line flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every random choice of the run (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate the fisheye center from spine keypoints and unwrap frames into panoramas.
    Unwrap(unwrap::UnwrapArgs),
    /// Generate a synthetic planted-actor dataset.
    Synth(synth::SynthArgs),
    /// Train a MIML head on a dataset manifest.
    Train(train::TrainArgs),
    /// Score a dataset with a trained head, or score an existing prediction CSV.
    #[command(long_about = eval::LONG_ABOUT)]
    Eval(eval::EvalArgs),
    /// Write Grad-CAM heatmaps for predicted (or all) classes.
    Localize(localize::LocalizeArgs),
    /// Run the ablation presets over several seeds and summarize test mAP.
    Ablate(ablate::AblateArgs),
}

const EXIT_CONFIG: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_NUMERIC: u8 = 4;

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<BadConfig>() {
            return EXIT_CONFIG;
        }
        if let Some(e) = cause.downcast_ref::<omniact::Error>() {
            use omniact::Error as E;
            return match e {
                E::Domain(_) | E::DimensionMismatch(_) => EXIT_CONFIG,
                E::Degenerate(_) | E::Underdetermined(_) | E::UndefinedClass(_) | E::Numeric(_) => EXIT_NUMERIC,
                E::Format(_) | E::Io(_) | E::Json(_) => EXIT_IO,
            };
        }
        if cause.is::<std::io::Error>() || cause.is::<serde_json::Error>() {
            return EXIT_IO;
        }
    }
    1
}

fn init_threads() -> anyhow::Result<()> {
    let Ok(v) = std::env::var("OMNI_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| config::bad_config(format!("OMNI_THREADS must be a non-negative integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| config::bad_config(format!("cannot size the thread pool: {e}")))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    init_threads()?;
    let mut cfg = Config::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    match cli.command {
        Command::Unwrap(a) => unwrap::run(&cfg, a),
        Command::Synth(a) => synth::run(&cfg, a),
        Command::Train(a) => train::run(&cfg, a),
        Command::Eval(a) => eval::run(&cfg, a),
        Command::Localize(a) => localize::run(&cfg, a),
        Command::Ablate(a) => ablate::run(&cfg, a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_the_error_kind() {
        assert_eq!(exit_code(&config::bad_config("x")), EXIT_CONFIG);
        let io = anyhow::Error::new(omniact::Error::Io(std::io::Error::other("gone"))).context("reading");
        assert_eq!(exit_code(&io), EXIT_IO);
        let num = anyhow::Error::new(omniact::Error::Underdetermined("one line".into()));
        assert_eq!(exit_code(&num), EXIT_NUMERIC);
        assert_eq!(exit_code(&anyhow::anyhow!("other")), 1);
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
