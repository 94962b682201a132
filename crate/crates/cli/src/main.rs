use clap::Parser;
use fas_cli::{load, run, CliError, Command};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(name = "fas", version, about = "Flux-across-surfaces experiments")]
struct Args {
    #[command(subcommand)]
    command: Command,
    /// experiment config (JSON)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// output directory, overrides `outputs.directory`
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// worker threads, overrides `workers`
    #[arg(long, global = true)]
    workers: Option<usize>,
}

fn init_logging() {
    let level = std::env::var("FAS_LOG_LEVEL").unwrap_or_else(|_| "warn".into());
    let known = ["error", "warn", "info", "debug"];
    let chosen = if known.contains(&level.as_str()) { level.as_str() } else { "warn" };
    env_logger::Builder::new().parse_filters(chosen).format_timestamp(None).init();
    if chosen != level {
        log::warn!("FAS_LOG_LEVEL={level} not one of {known:?}; using warn");
    }
}

fn execute(args: &Args) -> Result<(), CliError> {
    let Some(path) = &args.config else {
        return Err(CliError::Config(fas_cli::config::ConfigError { key: "--config".into(), message: "a config file is required".into() }));
    };
    let mut cfg = load(path)?;
    if let Some(w) = args.workers {
        cfg.workers = Some(w);
    }
    if let Some(out) = &args.out {
        cfg.outputs.directory = out.clone();
    }
    cfg.validate()?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.workers {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::Io(anyhow::anyhow!("worker pool: {e}")))?;
    let out = cfg.outputs.directory.clone();
    let written = pool.install(|| run(args.command, &cfg, &out))?;
    log::info!("wrote {} file(s) to {}", written.len(), out.display());
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    init_logging();
    match execute(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
