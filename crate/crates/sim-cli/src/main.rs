//! `cumulus-sim --workload script.txt [--config cluster.conf] [--seed N] [--metrics-out m.csv]`

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use cumulus_core::sim::{run_workload, Script, SimConfig};

#[derive(Debug, Parser)]
#[command(version, about = "Run a workload on the simulated thin-client cluster")]
struct Args {
    /// Cluster parameters as `key = value` lines. Defaults apply to anything left out.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Workload script of `AT <tick> <directive>` lines.
    #[arg(long)]
    workload: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Where to write the metrics as `name,value,unit` CSV.
    #[arg(long)]
    metrics_out: Option<PathBuf>,
}

fn read(path: &PathBuf) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn run(args: &Args) -> Result<(), String> {
    let mut config = match &args.config {
        Some(p) => SimConfig::parse(&read(p)?).map_err(|e| format!("{}: {e}", p.display()))?,
        None => SimConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let script = Script::parse(&read(&args.workload)?)
        .map_err(|e| format!("{}: {e}", args.workload.display()))?;
    let report = run_workload(&config, &script).map_err(|e| e.to_string())?;
    print!("{}", report.summary());
    if let Some(out) = &args.metrics_out {
        std::fs::write(out, report.to_csv()).map_err(|e| format!("{}: {e}", out.display()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(&Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cumulus-sim: {e}");
            ExitCode::from(2)
        }
    }
}
