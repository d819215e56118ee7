use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dualfas::channel::CouplingKind;
use dualfas::experiment::{
    run, run_validate, ExperimentConfig, ExperimentKind, RunOutput, ValidateOptions,
};
use dualfas::Error;

/// Capacity curves and power allocation for dual-side fluid antenna links.
#[derive(Parser)]
#[command(name = "dualfas", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Capacity against SNR.
    SnrSweep(Common),
    /// Capacity against the number of ports at a fixed aperture and SNR.
    PortSweep(Common),
    /// Capacity with and without a line-of-sight component.
    LosCompare(Common),
    /// Optimized eigenmode power allocation per SNR.
    Allocate(Common),
    /// Run the numerical oracle suites.
    Validate(Common),
}

#[derive(Args)]
struct Common {
    /// JSON experiment configuration; built-in defaults otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Monte-Carlo trials per estimate.
    #[arg(long)]
    trials: Option<usize>,
    /// Output CSV path; standard output if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Aperture in wavelengths, both sides.
    #[arg(long)]
    w: Option<f64>,
    /// Port count, both sides.
    #[arg(long)]
    n: Option<usize>,
    /// Rician K-factor in dB.
    #[arg(long, allow_hyphen_values = true)]
    k_db: Option<f64>,
    /// SNR grid in dB: `a,b,c` or `start:step:stop`.
    #[arg(long, allow_hyphen_values = true)]
    snr_grid: Option<String>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, hide = true)]
    inject_ryser_fault: bool,
}

fn parse_grid(text: &str) -> Result<Vec<f64>, Error> {
    let bad = || Error::Config(format!("cannot parse SNR grid '{text}'"));
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() == 3 {
        let v: Vec<f64> = parts
            .iter()
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad())?;
        let (start, step, stop) = (v[0], v[1], v[2]);
        if !(step > 0.0) || stop < start {
            return Err(bad());
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        return Ok((0..=n).map(|k| start + k as f64 * step).collect());
    }
    text.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect()
}

fn build_config(kind: ExperimentKind, args: &Common) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &args.config {
        Some(path) => {
            let cfg = ExperimentConfig::load(path)?;
            if cfg.kind != kind {
                return Err(Error::Config(format!(
                    "config is for {}, not {}",
                    cfg.kind.name(),
                    kind.name()
                )));
            }
            cfg
        }
        None => ExperimentConfig::default_for(kind),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(t) = args.trials {
        cfg.n_trials = t;
    }
    if let Some(w) = args.w {
        cfg.geometry.wt = w;
        cfg.geometry.wr = w;
    }
    if let Some(n) = args.n {
        cfg.geometry.nt = n;
        cfg.geometry.nr = n;
    }
    if let Some(k) = args.k_db {
        cfg.coupling.k_factor_db = Some(k);
        if kind != ExperimentKind::LosCompare {
            cfg.coupling.kind = CouplingKind::SeparableRician;
        }
    }
    if let Some(g) = &args.snr_grid {
        cfg.snr_grid_db = parse_grid(g)?;
    }
    if let Some(out) = &args.out {
        cfg.output_path = Some(out.to_string_lossy().into_owned());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(kind: ExperimentKind, args: &Common) -> Result<bool, Error> {
    if let Some(t) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    let cfg = build_config(kind, args)?;
    let output = if kind == ExperimentKind::Validate {
        let mut opts = ValidateOptions::from(&cfg);
        opts.perturb_ryser = args.inject_ryser_fault;
        RunOutput::Report(run_validate(&opts))
    } else {
        run(&cfg)?
    };
    match output {
        RunOutput::Table(table) => {
            table.write(cfg.output_path.as_deref().map(std::path::Path::new))?;
            Ok(true)
        }
        RunOutput::Report(report) => {
            println!("{report}");
            Ok(report.all_passed())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match &cli.command {
        Command::SnrSweep(a) => (ExperimentKind::SnrSweep, a),
        Command::PortSweep(a) => (ExperimentKind::PortSweep, a),
        Command::LosCompare(a) => (ExperimentKind::LosCompare, a),
        Command::Allocate(a) => (ExperimentKind::Allocate, a),
        Command::Validate(a) => (ExperimentKind::Validate, a),
    };
    match execute(kind, args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
