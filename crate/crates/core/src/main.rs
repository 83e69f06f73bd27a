use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use nlilab::config::{load_config, Overrides, RunConfig, PRESET_NAMES};
use nlilab::report::{execute, RunRequest};
use nlilab::Error;

/// Split-step simulation of nonlinear interference accumulation in a WDM
/// optical line system, decomposed into self- and cross-channel contributions.
#[derive(Parser, Debug)]
#[command(name = "nlilab", version)]
struct Cli {
    /// JSON configuration file (a previous run's campaign.json also works)
    #[arg(long, value_name = "PATH", conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in scenario: widespread-32g or highrate-64g
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
    /// Number of fiber spans
    #[arg(long, value_name = "N")]
    spans: Option<usize>,
    /// Number of WDM channels, including the channel under test
    #[arg(long, value_name = "K")]
    channels: Option<usize>,
    /// Symbols per polarization (power of two)
    #[arg(long, value_name = "M")]
    symbols: Option<usize>,
    /// Base seed for symbol generation
    #[arg(long, value_name = "S")]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, value_name = "DIR", default_value = "nlilab-out")]
    out: PathBuf,
    /// Verify every span against a run at doubled step resolution
    #[arg(long)]
    strict: bool,
    /// Worker threads; results do not depend on this
    #[arg(long, value_name = "J", default_value_t = default_jobs())]
    jobs: usize,
    /// Print the resolved configuration and exit without running
    #[arg(long)]
    dry_run: bool,
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn run(cli: Cli) -> nlilab::Result<()> {
    let (mut config, preset) = match (&cli.config, &cli.preset) {
        (Some(path), _) => (load_config(path)?, None),
        (None, Some(name)) => (RunConfig::preset(name)?, Some(name.clone())),
        (None, None) => {
            return Err(Error::Config(format!(
                "either --config or --preset is required (presets: {})",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    let overrides = Overrides {
        spans: cli.spans,
        channels: cli.channels,
        symbols: cli.symbols,
        seed: cli.seed,
        strict: cli.strict,
    };
    config.apply(&overrides);
    config.campaigns()?;
    if cli.dry_run {
        println!("{}", serde_json::to_string_pretty(&config)?);
        return Ok(());
    }
    let report = execute(&RunRequest {
        config,
        preset,
        overrides,
        jobs: cli.jobs.max(1),
        out_dir: cli.out,
    })?;
    for r in &report.results {
        let crossing = r
            .dominance_crossing
            .map(|i| format!("span {i}"))
            .unwrap_or_else(|| "none".into());
        println!("{}: SPM dominance crossing {crossing}", r.label);
        for d in &r.diagnostics {
            println!("  note: {d}");
        }
    }
    for f in &report.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let report = serde_json::json!({
                "status": "FAILED",
                "kind": e.kind(),
                "exit_code": e.exit_code(),
                "message": e.to_string(),
            });
            eprintln!("{report}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
