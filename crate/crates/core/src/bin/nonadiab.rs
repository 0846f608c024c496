use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nonadiab::compare::compare_dirs;
use nonadiab::output::ErrorRecord;
use nonadiab::runner::{run, scan, RunData};
use nonadiab::{parse_config, Error, Result, RunConfig};

/// Non-adiabatic dynamics of one-dimensional two-state models.
#[derive(Parser)]
#[command(name = "nonadiab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the method described by a configuration file.
    Run {
        config: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Run every point of the configuration's [scan] section.
    Scan {
        config: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Compare finished runs against the exact one (or the first).
    Compare {
        #[arg(required = true, num_args = 2..)]
        dirs: Vec<PathBuf>,
        /// Also write compare.csv into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunOpts {
    /// Worker threads (falls back to NONADIAB_THREADS, then all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn threads(opt: Option<usize>) -> Result<usize> {
    if let Some(n) = opt {
        return Ok(n.max(1));
    }
    match std::env::var("NONADIAB_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(|n| n.max(1))
            .map_err(|_| Error::config(format!("NONADIAB_THREADS must be a positive integer, got '{v}'"))),
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn load(path: &Path, opts: &RunOpts) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut cfg = parse_config(&text)?;
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &opts.out {
        cfg.output.dir = out.clone();
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, opts } => {
            let cfg = load(&config, &opts)?;
            let outcome = run(&cfg, threads(opts.threads)?)?;
            let ch = outcome.data.channels();
            let pops = outcome.data.final_populations();
            let t = match &outcome.data {
                RunData::Exact(r) => r.final_time,
                RunData::Trajectories(r) => r.final_time,
            };
            println!(
                "{} {} k0={} t={t}: pop1={:.6} pop2={:.6} T1={:.6} T2={:.6} R1={:.6} R2={:.6} -> {}",
                cfg.method,
                cfg.model,
                cfg.k0,
                pops[0],
                pops[1],
                ch.t1,
                ch.t2,
                ch.r1,
                ch.r2,
                outcome.dir.display()
            );
            Ok(())
        }
        Command::Scan { config, opts } => {
            let cfg = load(&config, &opts)?;
            let rows = scan(&cfg, threads(opts.threads)?)?;
            let failed = rows.iter().filter(|r| r.error.is_some()).count();
            println!(
                "{} scan points written to {} ({failed} failed)",
                rows.len(),
                cfg.output.dir.join("scan.csv").display()
            );
            Ok(())
        }
        Command::Compare { dirs, out } => {
            let cmp = compare_dirs(&dirs)?;
            let table = cmp.table();
            print!("{}", table.render());
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
                table.write(&dir.join("compare.csv"))?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let record = ErrorRecord::from(&e);
            eprintln!("error: {e}");
            eprintln!("{}", serde_json::json!({ "error": record }));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
