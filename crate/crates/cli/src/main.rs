use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use phonon_bs_cli::{execute, CliError, RunConfig, ScenarioKind};

/// Run a phonon beam-splitter scenario and write its CSV tables.
#[derive(Debug, Parser)]
#[command(name = "phonon-bs", version)]
struct Args {
    /// Must match the `scenario` field of the config.
    scenario: ScenarioKind,
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `master_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path; overrides `output_path`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all available cores).
    #[arg(long, env = "PHONON_BS_THREADS")]
    threads: Option<usize>,
}

fn run(args: &Args) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.config).map_err(|e| CliError::Io {
        path: args.config.clone(),
        source: e,
    })?;
    let mut cfg = RunConfig::parse(&text)?;
    if cfg.scenario() != args.scenario {
        return Err(CliError::Config(format!(
            "scenario: config says {} but {} was requested",
            cfg.scenario().name(),
            args.scenario.name()
        )));
    }
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(CliError::Config("threads: must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("threads: {e}")))?;
    }
    for path in execute(&cfg, args.out.as_deref())? {
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.record());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
