use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Parser, ValueEnum};
use gdalign::bench::{self, ExperimentConfig, Mode, TauPolicy};
use gdalign::theory::BoundaryCurve;
use gdalign::{Algorithm, Error};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Database,
    Planted,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AlgoArg {
    Ml,
    MaxRow,
    Threshold,
}

/// Monte Carlo sweeps for Gaussian database alignment and planted matching.
#[derive(Debug, Parser)]
#[command(name = "gdalign", version)]
struct Cli {
    #[arg(long, value_enum, default_value = "planted")]
    mode: ModeArg,
    /// Users on the left side.
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Right side has n + round(n^alpha) users.
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    /// Equal side sizes; overrides --alpha.
    #[arg(long)]
    balanced: bool,
    /// Feature dimension in database mode.
    #[arg(long, default_value_t = 1)]
    dims: usize,
    /// Signal strengths zeta/log n: a comma list or a:b:step.
    #[arg(long = "x", default_value = "0.5:3:0.5")]
    x: String,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "algo", value_enum, action = ArgAction::Append)]
    algo: Vec<AlgoArg>,
    /// Explicit threshold; defaults to log(n_v).
    #[arg(long)]
    tau: Option<f64>,
    /// Summary CSV; the JSON sidecar goes next to it.
    #[arg(long, default_value = "sweep.csv")]
    out: PathBuf,
    /// Fill boundary_x and write achievability/converse curves to <out>.curves.csv.
    #[arg(long)]
    overlay: bool,
    /// Cross-check ML against exhaustive search (n <= 7).
    #[arg(long)]
    oracle: bool,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    threads: Option<usize>,
}

impl Cli {
    fn config(&self) -> Result<ExperimentConfig, Error> {
        let mut algorithms: Vec<Algorithm> = Vec::new();
        for a in &self.algo {
            let alg = match a {
                AlgoArg::Ml => Algorithm::Ml,
                AlgoArg::MaxRow => Algorithm::MaxRow,
                AlgoArg::Threshold => Algorithm::Threshold,
            };
            if !algorithms.contains(&alg) {
                algorithms.push(alg);
            }
        }
        if algorithms.is_empty() {
            algorithms.push(Algorithm::Ml);
        }
        let cfg = ExperimentConfig {
            mode: match self.mode {
                ModeArg::Database => Mode::Database,
                ModeArg::Planted => Mode::Planted,
            },
            n: self.n,
            alpha: self.alpha,
            balanced: self.balanced,
            dims: self.dims,
            x_grid: bench::parse_x_grid(&self.x)?,
            trials: self.trials,
            master_seed: self.seed,
            algorithms,
            tau_policy: self.tau.map_or(TauPolicy::Default, TauPolicy::Value),
            oracle: self.oracle,
            threads: self.threads,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: &Cli) -> Result<(), Error> {
    let cfg = cli.config()?;
    if cfg.n > bench::COMFORTABLE_N {
        eprintln!(
            "warning: n = {} is above {}; cubic-time assignment will be slow",
            cfg.n,
            bench::COMFORTABLE_N
        );
    }
    if cfg.oracle && cfg.n > bench::ORACLE_MAX_N {
        eprintln!("warning: --oracle only checks n <= {}", bench::ORACLE_MAX_N);
    }
    let records = bench::run_sweep(&cfg)?;
    let summary = bench::aggregate(&cfg, &records)?;
    let mut curves: Vec<BoundaryCurve> = Vec::new();
    if cli.overlay {
        let regime = cfg.regime();
        curves = cfg
            .algorithms
            .iter()
            .map(|&a| BoundaryCurve::achievability(a, regime))
            .collect();
        let mut all = curves.clone();
        all.push(BoundaryCurve::converse(regime));
        let betas: Vec<f64> = (1..=100).map(|i| i as f64 / 50.0).collect();
        let path = cli.out.with_extension("curves.csv");
        gdalign::theory::write_curves_csv(std::fs::File::create(&path)?, &all, &betas)?;
    }
    bench::emit(&summary, &curves, &cfg, &cli.out)?;
    for row in &summary {
        eprintln!(
            "{:>9} x={:<6} mean_errors={:<10.4} exact_rate={:.3}",
            row.algorithm.name(),
            row.x,
            row.mean_errors,
            row.exact_rate
        );
    }
    eprintln!(
        "wrote {} and {}",
        cli.out.display(),
        bench::sidecar_path(&cli.out).display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InfeasibleRho { .. } => ExitCode::from(3),
                Error::Config(_) | Error::Domain(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
