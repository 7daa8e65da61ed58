use std::io::Write;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use vorocell_cli::config::{build_config, tokenize, Command, Entry, Source};
use vorocell_cli::output::{write_csv, write_csv_path};
use vorocell_cli::runner::{run, union_agreement};

const CONFIG_ERROR: u8 = 2;
const RUNTIME_ERROR: u8 = 3;

#[derive(Parser)]
#[command(name = "vorocell", version, about = "Voronoi cell measure experiments, emitted as CSV")]
struct Cli {
    #[command(subcommand)]
    command: Option<Sub>,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand, Clone, Copy)]
enum Sub {
    /// Estimate α(d) = E[2/W²]
    Alpha,
    /// Estimate E[Z^k] for k = 1..=k-max
    Zmoments,
    /// Empirical moments of n μ(S_1) for a conditioned center
    Cell,
    /// Scaled diameter brackets over an n grid
    Diam,
    /// Monte Carlo union volumes against exact oracles
    #[command(name = "unionvol-check")]
    UnionvolCheck,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::Alpha => Command::Alpha,
            Sub::Zmoments => Command::ZMoments,
            Sub::Cell => Command::Cell,
            Sub::Diam => Command::Diam,
            Sub::UnionvolCheck => Command::UnionVolCheck,
        }
    }
}

// Values stay strings here so that flags and config files share one validator.
#[derive(clap::Args)]
struct Flags {
    #[arg(long, global = true)]
    dim: Option<String>,
    #[arg(long, global = true)]
    samples: Option<String>,
    #[arg(long, global = true)]
    inner_samples: Option<String>,
    #[arg(long, global = true)]
    k_max: Option<String>,
    #[arg(long, global = true)]
    n: Option<String>,
    /// Comma-separated, strictly increasing
    #[arg(long, global = true)]
    n_grid: Option<String>,
    /// Comma-separated thresholds
    #[arg(long, global = true)]
    t_grid: Option<String>,
    #[arg(long, global = true)]
    replicates: Option<String>,
    #[arg(long, global = true)]
    probes: Option<String>,
    /// uniform-ball:r=<real> | gaussian | uniform-cube:side=<real>
    #[arg(long, global = true)]
    density: Option<String>,
    /// `origin` or comma-separated coordinates
    #[arg(long, global = true, allow_hyphen_values = true)]
    x: Option<String>,
    #[arg(long, global = true)]
    seed: Option<String>,
    #[arg(long, global = true)]
    workers: Option<String>,
    /// CSV destination; stdout when absent
    #[arg(long, global = true)]
    output: Option<String>,
    /// Flat key=value file; flags override its entries
    #[arg(long, global = true)]
    config: Option<String>,
}

impl Flags {
    fn entries(&self) -> Vec<Entry> {
        let pairs = [
            ("dim", &self.dim),
            ("samples", &self.samples),
            ("inner_samples", &self.inner_samples),
            ("k_max", &self.k_max),
            ("n", &self.n),
            ("n_grid", &self.n_grid),
            ("t_grid", &self.t_grid),
            ("replicates", &self.replicates),
            ("probes", &self.probes),
            ("density", &self.density),
            ("x", &self.x),
            ("seed", &self.seed),
            ("workers", &self.workers),
            ("output", &self.output),
        ];
        pairs
            .into_iter()
            .filter_map(|(key, v)| {
                v.as_ref().map(|v| Entry { key: key.to_string(), value: v.clone(), source: Source::Flag })
            })
            .collect()
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(CONFIG_ERROR) } else { ExitCode::SUCCESS };
        }
    };
    let mut entries = Vec::new();
    if let Some(path) = &cli.flags.config {
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: cannot read config `{path}`: {e}");
                return ExitCode::from(CONFIG_ERROR);
            }
        };
        match tokenize(&text) {
            Ok(file_entries) => entries = file_entries,
            Err(e) => {
                eprintln!("error: {path}: {e}");
                return ExitCode::from(CONFIG_ERROR);
            }
        }
    }
    entries.extend(cli.flags.entries());
    let cfg = match build_config(entries, cli.command.map(Command::from)) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(CONFIG_ERROR);
        }
    };
    let rows = match run(&cfg) {
        Ok(rows) => rows,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(RUNTIME_ERROR);
        }
    };
    if cfg.command == Command::UnionVolCheck {
        let (ok, total) = union_agreement(&rows);
        eprintln!("agreement within 4 sigma: {ok}/{total}");
    }
    let written = match &cfg.output {
        Some(path) => write_csv_path(&rows, path),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write_csv(&rows, &mut lock).and_then(|()| lock.flush().map_err(Into::into))
        }
    };
    if let Err(e) = written {
        eprintln!("error: writing output: {e}");
        return ExitCode::from(RUNTIME_ERROR);
    }
    ExitCode::SUCCESS
}
