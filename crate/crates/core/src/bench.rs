//! Seeded Monte Carlo sweeps over signal strength, summary statistics and
//! CSV/JSON output.
//!
//! Signal strength is measured as `x = ζ / log n`. Every `(x, trial)` cell
//! draws one instance from its own substream and runs all requested
//! algorithms on it, so results are identical for any thread count.

use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{brute_force_ml, default_threshold, max_likelihood, max_row, threshold_test, Algorithm};
use crate::estimators::{BRUTE_FORCE_MAX_COLS, BRUTE_FORCE_MAX_ROWS};
use crate::mismatch::count_errors;
use crate::rng::Seed;
use crate::score::{info_density_canonical, planted_score, ScoreMatrix};
use crate::synth::{sample_database_pair, sample_mapping, sample_planted};
use crate::theory::{BoundaryCurve, Regime};

pub const CSV_HEADER: [&str; 10] = [
    "mode",
    "algorithm",
    "n",
    "alpha",
    "x",
    "mean_errors",
    "log_ratio",
    "exact_rate",
    "ci",
    "boundary_x",
];

/// Largest `n` the CLI runs without a warning.
pub const COMFORTABLE_N: usize = 3000;

/// Largest `n` at which `oracle` cross-checks ML against exhaustive search.
pub const ORACLE_MAX_N: usize = 7;

const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Database,
    Planted,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Database => "database",
            Mode::Planted => "planted",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "database" => Ok(Mode::Database),
            "planted" => Ok(Mode::Planted),
            _ => Err(Error::Config(format!("unknown mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TauPolicy {
    /// `log(n_u n_v / n)`.
    Default,
    Value(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub n: usize,
    /// Right side has `n + round(n^alpha)` users unless `balanced`.
    pub alpha: f64,
    pub balanced: bool,
    /// Feature dimension, database mode only.
    pub dims: usize,
    pub x_grid: Vec<f64>,
    pub trials: usize,
    pub master_seed: u64,
    pub algorithms: Vec<Algorithm>,
    pub tau_policy: TauPolicy,
    /// Cross-check ML against exhaustive search when `n <= 7`.
    pub oracle: bool,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    pub fn planted(n: usize, x_grid: Vec<f64>, trials: usize, master_seed: u64) -> Self {
        ExperimentConfig {
            mode: Mode::Planted,
            n,
            alpha: 0.0,
            balanced: true,
            dims: 1,
            x_grid,
            trials,
            master_seed,
            algorithms: vec![Algorithm::Ml],
            tau_policy: TauPolicy::Default,
            oracle: false,
            threads: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.n < 2 {
            return fail(format!("n = {} must be at least 2", self.n));
        }
        if self.trials < 1 {
            return fail("trials must be at least 1".into());
        }
        if self.x_grid.is_empty() {
            return fail("empty x grid".into());
        }
        if let Some(x) = self.x_grid.iter().find(|x| !(**x > 0.0) || !x.is_finite()) {
            return fail(format!("x = {x} must be positive and finite"));
        }
        if !self.balanced && !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return fail(format!("alpha = {} must be finite and nonnegative", self.alpha));
        }
        if self.mode == Mode::Database && self.dims < 1 {
            return fail("database mode needs dims >= 1".into());
        }
        if self.algorithms.is_empty() {
            return fail("no algorithms selected".into());
        }
        if let TauPolicy::Value(t) = self.tau_policy {
            if !t.is_finite() {
                return fail(format!("tau = {t} must be finite"));
            }
        }
        if self.threads == Some(0) {
            return fail("threads must be at least 1".into());
        }
        self.n_v()?;
        Ok(())
    }

    pub fn n_v(&self) -> Result<usize> {
        if self.balanced {
            return Ok(self.n);
        }
        let extra = (self.n as f64).powf(self.alpha).round();
        if extra > 1e9 {
            return Err(Error::Config(format!("n^alpha = {extra} is too large")));
        }
        Ok(self.n + extra as usize)
    }

    /// The regime implied by the configured `alpha`, not by the rounded size.
    pub fn regime(&self) -> Regime {
        if self.balanced {
            Regime::Balanced
        } else {
            Regime::Unbalanced { alpha: self.alpha }
        }
    }

    pub fn tau(&self) -> Result<f64> {
        match self.tau_policy {
            TauPolicy::Default => default_threshold(self.n, self.n_v()?, self.n),
            TauPolicy::Value(t) => Ok(t),
        }
    }
}

/// Instance parameters for one grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    pub x: f64,
    /// Planted mean `μ = √(2 x log n)`.
    pub mu: Option<f64>,
    /// Per-dimension correlation with `-(D/2) log(1-ρ²) = x log n`; also the
    /// largest canonical correlation.
    pub rho: Option<f64>,
}

pub fn signal(mode: Mode, n: usize, dims: usize, x: f64) -> Result<Signal> {
    let zeta = x * (n as f64).ln();
    match mode {
        Mode::Planted => {
            let mu = (2.0 * zeta).sqrt();
            if !(mu > 0.0) {
                return Err(Error::Config(format!("x = {x} gives planted mean {mu}")));
            }
            Ok(Signal {
                x,
                mu: Some(mu),
                rho: None,
            })
        }
        Mode::Database => {
            if dims == 0 {
                return Err(Error::Config("database mode needs dims >= 1".into()));
            }
            let rho2 = -(-2.0 * zeta / dims as f64).exp_m1();
            let rho = rho2.sqrt();
            if !(rho < 1.0) {
                return Err(Error::InfeasibleRho { x, rho, dims });
            }
            Ok(Signal {
                x,
                mu: None,
                rho: Some(rho),
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub x: f64,
    pub x_index: usize,
    pub algorithm: Algorithm,
    pub trial: usize,
    /// Misaligned users; false positives plus false negatives for threshold.
    pub errors: usize,
    pub exact: bool,
    pub wall_seconds: f64,
}

fn instance_scores(
    cfg: &ExperimentConfig,
    sig: &Signal,
    n_v: usize,
    seed: Seed,
) -> Result<(ScoreMatrix<f64>, crate::synth::PartialMapping)> {
    let n = cfg.n;
    let truth = sample_mapping(n, n_v, n, seed.child(0))?;
    let scores = match cfg.mode {
        Mode::Planted => {
            let inst = sample_planted(sig.mu.unwrap_or_default(), &truth, n, n_v, seed.child(1))?;
            planted_score(&inst)?
        }
        Mode::Database => {
            let rho = vec![sig.rho.unwrap_or_default(); cfg.dims];
            let db = sample_database_pair(&rho, &truth, n, n_v, seed.child(1))?;
            info_density_canonical(&db, &rho)?
        }
    };
    Ok((scores, truth))
}

fn run_cell(
    cfg: &ExperimentConfig,
    sig: &Signal,
    x_index: usize,
    trial: usize,
    n_v: usize,
    tau: f64,
) -> Result<Vec<TrialRecord>> {
    let seed = Seed::new(cfg.master_seed).child(x_index as u64).child(trial as u64);
    let (scores, truth) = instance_scores(cfg, sig, n_v, seed)?;
    let mut out = Vec::with_capacity(cfg.algorithms.len());
    for &algorithm in &cfg.algorithms {
        let start = Instant::now();
        let est = match algorithm {
            Algorithm::Ml => {
                let est = max_likelihood(&scores, cfg.n)?;
                if cfg.oracle && cfg.n <= ORACLE_MAX_N.min(BRUTE_FORCE_MAX_ROWS) && n_v <= BRUTE_FORCE_MAX_COLS {
                    let brute = brute_force_ml(&scores, cfg.n)?;
                    if (brute.objective - est.objective).abs() > 1e-9 {
                        return Err(Error::OracleMismatch(format!(
                            "x = {}, trial {trial}: ml {} vs exhaustive {}",
                            sig.x, est.objective, brute.objective
                        )));
                    }
                }
                est
            }
            Algorithm::MaxRow => max_row(&scores),
            Algorithm::Threshold => threshold_test(&scores, tau),
        };
        let report = count_errors(&est, &truth)?;
        out.push(TrialRecord {
            x: sig.x,
            x_index,
            algorithm,
            trial,
            errors: report.errors,
            exact: report.errors == 0,
            wall_seconds: start.elapsed().as_secs_f64(),
        });
    }
    Ok(out)
}

/// Runs every `(x, trial)` cell and returns records ordered by x, then
/// algorithm (in config order), then trial.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    match cfg.threads {
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::Config(e.to_string()))?;
            pool.install(|| sweep(cfg))
        }
        None => sweep(cfg),
    }
}

fn sweep(cfg: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    let n_v = cfg.n_v()?;
    let tau = cfg.tau()?;
    let signals = cfg
        .x_grid
        .iter()
        .map(|&x| signal(cfg.mode, cfg.n, cfg.dims, x))
        .collect::<Result<Vec<_>>>()?;
    let cells: Vec<(usize, usize)> = (0..signals.len())
        .flat_map(|xi| (0..cfg.trials).map(move |t| (xi, t)))
        .collect();
    let per_cell = cells
        .par_iter()
        .map(|&(xi, t)| run_cell(cfg, &signals[xi], xi, t, n_v, tau))
        .collect::<Result<Vec<_>>>()?;
    let mut records: Vec<TrialRecord> = per_cell.into_iter().flatten().collect();
    let alg_rank = |a: Algorithm| cfg.algorithms.iter().position(|&b| b == a).unwrap_or(usize::MAX);
    records.sort_by_key(|r| (r.x_index, alg_rank(r.algorithm), r.trial));
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub mode: Mode,
    pub algorithm: Algorithm,
    pub n: usize,
    /// Empty in CSV for balanced runs.
    pub alpha: Option<f64>,
    pub x: f64,
    pub mean_errors: f64,
    /// `log(mean_errors) / log n`; `-inf` when no errors occurred.
    pub log_ratio: f64,
    pub exact_rate: f64,
    /// 95% half-width for `mean_errors` from the trial standard error.
    pub ci: f64,
    /// 95% normal-approximation half-width for `exact_rate`.
    pub exact_ci: f64,
    pub trials: usize,
    /// Theory value of `x` at the observed error exponent, when requested.
    pub boundary_x: Option<f64>,
}

/// Per-(x, algorithm) statistics, in order of first appearance.
pub fn aggregate(cfg: &ExperimentConfig, records: &[TrialRecord]) -> Result<Vec<SummaryRow>> {
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut keys: Vec<(usize, Algorithm)> = Vec::new();
    for r in records {
        if !keys.contains(&(r.x_index, r.algorithm)) {
            keys.push((r.x_index, r.algorithm));
        }
    }
    let alpha = if cfg.balanced { None } else { Some(cfg.alpha) };
    let rows = keys
        .into_iter()
        .map(|(xi, algorithm)| {
            let group: Vec<&TrialRecord> = records
                .iter()
                .filter(|r| r.x_index == xi && r.algorithm == algorithm)
                .collect();
            let t = group.len() as f64;
            let mean = group.iter().map(|r| r.errors as f64).sum::<f64>() / t;
            let var = if group.len() > 1 {
                group.iter().map(|r| (r.errors as f64 - mean).powi(2)).sum::<f64>() / (t - 1.0)
            } else {
                0.0
            };
            let exact_rate = group.iter().filter(|r| r.exact).count() as f64 / t;
            SummaryRow {
                mode: cfg.mode,
                algorithm,
                n: cfg.n,
                alpha,
                x: group[0].x,
                mean_errors: mean,
                log_ratio: if mean > 0.0 {
                    mean.ln() / (cfg.n as f64).ln()
                } else {
                    f64::NEG_INFINITY
                },
                exact_rate,
                ci: Z95 * (var / t).sqrt(),
                exact_ci: Z95 * (exact_rate * (1.0 - exact_rate) / t).sqrt(),
                trials: group.len(),
                boundary_x: None,
            }
        })
        .collect();
    Ok(rows)
}

/// Fills `boundary_x` from the achievability curve of each row's algorithm,
/// evaluated at `β = 1 - log_ratio`. Rows without errors have no finite β and
/// are left empty.
pub fn attach_overlay(rows: &mut [SummaryRow], curves: &[BoundaryCurve]) {
    for row in rows.iter_mut() {
        let beta = 1.0 - row.log_ratio;
        row.boundary_x = curves
            .iter()
            .find(|c| c.algorithm == Some(row.algorithm))
            .filter(|_| beta > 0.0 && beta.is_finite())
            .and_then(|c| c.eval(beta).ok())
            .map(|p| p.x);
    }
}

pub fn write_summary_csv<W: Write>(out: W, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.mode.name().to_string(),
            r.algorithm.name().to_string(),
            r.n.to_string(),
            opt(r.alpha),
            r.x.to_string(),
            r.mean_errors.to_string(),
            r.log_ratio.to_string(),
            r.exact_rate.to_string(),
            r.ci.to_string(),
            opt(r.boundary_x),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Parses rows written by [`write_summary_csv`]. Columns absent from the CSV
/// (`exact_ci`, `trials`) come back as zero.
pub fn read_summary_csv<R: Read>(input: R) -> Result<Vec<SummaryRow>> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers()?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Parse(format!("unexpected header {header:?}")));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("{s:?}: {e}")));
    let opt = |s: &str| if s.is_empty() { Ok(None) } else { num(s).map(Some) };
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        rows.push(SummaryRow {
            mode: rec[0].parse()?,
            algorithm: rec[1]
                .parse()
                .map_err(|_| Error::Parse(format!("algorithm {:?}", &rec[1])))?,
            n: rec[2].parse().map_err(|e| Error::Parse(format!("n: {e}")))?,
            alpha: opt(&rec[3])?,
            x: num(&rec[4])?,
            mean_errors: num(&rec[5])?,
            log_ratio: num(&rec[6])?,
            exact_rate: num(&rec[7])?,
            ci: num(&rec[8])?,
            exact_ci: 0.0,
            trials: 0,
            boundary_x: opt(&rec[9])?,
        });
    }
    Ok(rows)
}

#[derive(Debug, Serialize)]
struct Sidecar<'a> {
    version: String,
    timestamp_unix: u64,
    config: &'a ExperimentConfig,
    n_v: usize,
    tau: Option<f64>,
    signals: Vec<Signal>,
    summary: &'a [SummaryRow],
}

fn version_string() -> String {
    let pkg = env!("CARGO_PKG_VERSION");
    let described = std::process::Command::new("git")
        .args(["describe", "--always", "--dirty"])
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty());
    match described {
        Some(d) => format!("{pkg} ({d})"),
        None => pkg.to_string(),
    }
}

/// The JSON sidecar path for a CSV path: same stem, `.json` extension.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

/// Writes the summary CSV to `path` (with `boundary_x` from `overlay`) and the
/// configuration, version, timestamp and full summary to the sidecar.
pub fn emit(summary: &[SummaryRow], overlay: &[BoundaryCurve], cfg: &ExperimentConfig, path: &Path) -> Result<()> {
    let mut rows = summary.to_vec();
    if !overlay.is_empty() {
        attach_overlay(&mut rows, overlay);
    }
    write_summary_csv(File::create(path)?, &rows)?;
    let signals = cfg
        .x_grid
        .iter()
        .filter_map(|&x| signal(cfg.mode, cfg.n, cfg.dims, x).ok())
        .collect();
    let sidecar = Sidecar {
        version: version_string(),
        timestamp_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        config: cfg,
        n_v: cfg.n_v()?,
        tau: cfg
            .algorithms
            .contains(&Algorithm::Threshold)
            .then(|| cfg.tau())
            .transpose()?,
        signals,
        summary: &rows,
    };
    let mut f = File::create(sidecar_path(path))?;
    serde_json::to_writer_pretty(&mut f, &sidecar)?;
    writeln!(f)?;
    Ok(())
}

/// Parses `0.5,1,2` or an inclusive range `a:b:step`.
pub fn parse_x_grid(text: &str) -> Result<Vec<f64>> {
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Error::Config(format!("bad number {s:?} in x grid")))
    };
    let parts: Vec<&str> = text.split(':').collect();
    let grid = match parts.as_slice() {
        [list] => list.split(',').map(num).collect::<Result<Vec<_>>>()?,
        [a, b, step] => {
            let (a, b, step) = (num(a)?, num(b)?, num(step)?);
            if !(step > 0.0) || !(b >= a) {
                return Err(Error::Config(format!("range {text:?} needs a <= b and step > 0")));
            }
            let count = ((b - a) / step + 1e-9).floor() as usize + 1;
            (0..count).map(|i| a + i as f64 * step).collect()
        }
        _ => return Err(Error::Config(format!("cannot parse x grid {text:?}"))),
    };
    if grid.is_empty() {
        return Err(Error::Config("empty x grid".into()));
    }
    Ok(grid)
}
