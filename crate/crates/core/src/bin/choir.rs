use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use choir_core::runner::{find_run_dirs, parse_vary, report_dir, run_scenario, sweep, write_metrics, write_outputs};
use choir_core::scenario::Scenario;
use choir_core::Error;

/// Trace-driven 5G downlink simulator with base-station guided video rate
/// control.
#[derive(Parser)]
#[command(name = "choir", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one scenario and write metrics, frame series and event log.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run a scenario once per value of one parameter, in parallel.
    Sweep {
        scenario: PathBuf,
        /// `key=v1,v2,...`, e.g. `wired_nd=1,10,20`.
        #[arg(long)]
        vary: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Recompute metrics of run directories from their event logs.
    Report { out_dir: PathBuf },
}

fn load(path: &PathBuf, seed: Option<u64>) -> Result<Scenario, Error> {
    let mut s = Scenario::from_path(path)?;
    if let Some(seed) = seed {
        s.seed = seed;
    }
    Ok(s)
}

fn print_metrics(label: &str, m: &choir_core::metrics::RunMetrics) {
    if !label.is_empty() {
        println!("# {label}");
    }
    let mut buf = Vec::new();
    m.write_csv(&mut buf).expect("in-memory write");
    print!("{}", String::from_utf8_lossy(&buf));
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.cmd {
        Cmd::Run { scenario, seed, out } => {
            let scn = load(&scenario, seed)?;
            let result = run_scenario(&scn)?;
            write_outputs(&scn, &result, &out)?;
            print_metrics("", &result.metrics);
        }
        Cmd::Sweep {
            scenario,
            vary,
            seed,
            out,
        } => {
            let scn = load(&scenario, seed)?;
            let (key, values) = parse_vary(&vary)?;
            for r in sweep(&scn, &key, &values)? {
                let dir = out.join(format!("{}={}", r.key, r.value));
                write_outputs(&r.scenario, &r.result, &dir)?;
                print_metrics(&format!("{}={}", r.key, r.value), &r.result.metrics);
            }
        }
        Cmd::Report { out_dir } => {
            let dirs = find_run_dirs(&out_dir)?;
            if dirs.is_empty() {
                return Err(Error::Config(format!("no run directories under {}", out_dir.display())));
            }
            for d in dirs {
                let m = report_dir(&d)?;
                write_metrics(&m, &d)?;
                print_metrics(&d.display().to_string(), &m);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config_error() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
