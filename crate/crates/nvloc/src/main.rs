use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nvloc::{Options, Run, Verb};
use nvloc_core::coherence::EngineKind;

/// Nanoscale electron-spin localisation with NV sensor ensembles.
#[derive(Parser, Debug)]
#[command(name = "nvloc", version)]
struct Cli {
    #[command(subcommand)]
    verb: VerbArg,
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// magnus, exact or semiclassical; applies to curves and libraries.
    #[arg(long, global = true, value_parser = parse_engine)]
    engine: Option<EngineKind>,
    /// Overwrite existing libraries.
    #[arg(long, global = true)]
    force: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum VerbArg {
    /// Coherence curve per sensor.
    Simulate,
    /// Fingerprint library per sensor.
    Library,
    /// Match curves against libraries and intersect.
    Locate,
    /// 13C bath coherence (CCE-2).
    Bath,
}

fn parse_engine(s: &str) -> Result<EngineKind, String> {
    s.parse().map_err(|_| format!("unknown engine '{s}' (magnus, exact, semiclassical)"))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let Some(config) = cli.config else {
        eprintln!("error: --config is required");
        return ExitCode::from(2);
    };
    let verb = match cli.verb {
        VerbArg::Simulate => Verb::Simulate,
        VerbArg::Library => Verb::Library,
        VerbArg::Locate => Verb::Locate,
        VerbArg::Bath => Verb::Bath,
    };
    let opts = Options { config, out: cli.out, seed: cli.seed, threads: cli.threads, engine: cli.engine, force: cli.force };
    match Run::new(&opts).and_then(|run| run.execute(verb)) {
        Ok(summary) => {
            print!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
