//! Closed-form phase boundaries, tail bounds, the Gaussian generating function
//! of information-density sums, and the covering bound on MAP success.
//!
//! Signal strength is measured as `x = ζ / log n`, where `ζ` is the mutual
//! information per pair for databases and `μ²/2` for planted matching.

use std::fmt;
use std::io::Write;

use libm::{erfc, lgamma as ln_gamma};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::Algorithm;
use crate::linalg;
use crate::synth::PartialMapping;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// `|V| = n`.
    Balanced,
    /// `|V| = n + n^alpha`.
    Unbalanced { alpha: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SizeClass {
    Equal,
    SublinearExcess,
    LinearExcess,
}

impl Regime {
    pub fn unbalanced(alpha: f64) -> Result<Self> {
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::Domain(format!(
                "alpha = {alpha} must be a finite nonnegative number"
            )));
        }
        Ok(Regime::Unbalanced { alpha })
    }

    /// `α = log(n_v - n)/log n`, or balanced when the sides are equal.
    pub fn from_sizes(n: usize, n_v: usize) -> Result<Self> {
        match n_v.checked_sub(n) {
            None => Err(Error::Domain(format!("right side {n_v} smaller than {n}"))),
            Some(0) => Ok(Regime::Balanced),
            Some(extra) if n >= 2 => Regime::unbalanced((extra as f64).ln() / (n as f64).ln()),
            Some(_) => Err(Error::Domain("regime needs n >= 2".into())),
        }
    }

    pub fn alpha(self) -> Option<f64> {
        match self {
            Regime::Balanced => None,
            Regime::Unbalanced { alpha } => Some(alpha),
        }
    }

    /// `max{α, 1}`, with 1 for the balanced case.
    pub fn nu(self) -> f64 {
        self.alpha().map_or(1.0, |a| a.max(1.0))
    }

    pub fn size_class(self) -> SizeClass {
        match self {
            Regime::Balanced => SizeClass::Equal,
            Regime::Unbalanced { alpha } if alpha < 1.0 => SizeClass::SublinearExcess,
            Regime::Unbalanced { .. } => SizeClass::LinearExcess,
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Regime::Balanced => f.write_str("balanced"),
            Regime::Unbalanced { alpha } => write!(f, "{alpha}"),
        }
    }
}

/// Required `x` for exact recovery: `ζ ≥ c log n`.
pub fn exact_threshold_coefficient(algorithm: Algorithm, regime: Regime) -> f64 {
    let nu = regime.nu();
    match (algorithm, regime.size_class()) {
        (Algorithm::Threshold, _) => (1.0 + (nu + 1.0).sqrt()).powi(2),
        (Algorithm::MaxRow, _) => (1.0 + nu.sqrt()).powi(2),
        (Algorithm::Ml, SizeClass::Equal) => 2.0,
        (Algorithm::Ml, SizeClass::SublinearExcess) => 2.0 * (regime.alpha().unwrap_or(0.0) + 1.0),
        (Algorithm::Ml, SizeClass::LinearExcess) => (1.0 + regime.nu().sqrt()).powi(2),
    }
}

/// Required `x` for almost-exact recovery, shared by all three estimators.
pub fn almost_exact_threshold(regime: Regime) -> f64 {
    regime.nu()
}

/// Additive constant (nats) on the vertical ML segment, `ζ = 2 log n + offset`.
pub fn vertical_segment_offset(regime: Regime) -> f64 {
    let root5 = 5f64.sqrt();
    match regime {
        Regime::Balanced => 2.0 * ((root5 - 1.0) / 2.0).ln(),
        Regime::Unbalanced { .. } => 2.0 * ((3.0 + root5) / 2.0).ln(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SegmentLabel {
    Elliptic,
    Parabolic,
    Vertical,
    Linear,
}

impl fmt::Display for SegmentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SegmentLabel::Elliptic => "elliptic",
            SegmentLabel::Parabolic => "parabolic",
            SegmentLabel::Vertical => "vertical",
            SegmentLabel::Linear => "linear",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint {
    pub x: f64,
    pub segment: SegmentLabel,
}

/// Half-open β interval `(lo, hi]` carrying one closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub lo: f64,
    pub hi: f64,
    pub label: SegmentLabel,
}

fn elliptic(beta: f64) -> f64 {
    1.0 + 2.0 * (beta * (1.0 - beta)).sqrt()
}

fn sq_sum(a: f64, b: f64) -> f64 {
    (a.sqrt() + b.sqrt()).powi(2)
}

fn achievability_segments(algorithm: Algorithm, regime: Regime) -> Vec<Segment> {
    let seg = |lo: f64, hi: f64, label| Segment { lo, hi, label };
    let nu = regime.nu();
    match (algorithm, regime) {
        (Algorithm::Threshold, _) => vec![seg(0.0, f64::INFINITY, SegmentLabel::Parabolic)],
        (Algorithm::MaxRow, _) => vec![
            seg(0.0, nu, SegmentLabel::Parabolic),
            seg(nu, f64::INFINITY, SegmentLabel::Linear),
        ],
        (Algorithm::Ml, Regime::Balanced) => vec![
            seg(0.0, 0.5, SegmentLabel::Elliptic),
            seg(0.5, 1.0, SegmentLabel::Vertical),
            seg(1.0, f64::INFINITY, SegmentLabel::Linear),
        ],
        (Algorithm::Ml, Regime::Unbalanced { alpha }) => {
            let mut out = Vec::new();
            let elliptic_hi = (1.0 - alpha).min(0.5);
            if elliptic_hi > 0.0 {
                out.push(seg(0.0, elliptic_hi, SegmentLabel::Elliptic));
            }
            if alpha > 1.0 - alpha {
                out.push(seg((1.0 - alpha).max(0.0), alpha, SegmentLabel::Parabolic));
            }
            if 1.0 - alpha > 0.5 {
                out.push(seg(0.5, 1.0 - alpha, SegmentLabel::Vertical));
            }
            out.push(seg(alpha.max(1.0 - alpha), f64::INFINITY, SegmentLabel::Linear));
            out
        }
    }
}

fn achievability_value(algorithm: Algorithm, regime: Regime, label: SegmentLabel, beta: f64) -> f64 {
    let nu = regime.nu();
    match (label, algorithm) {
        (SegmentLabel::Elliptic, _) => elliptic(beta),
        (SegmentLabel::Vertical, _) => 2.0,
        (SegmentLabel::Parabolic, Algorithm::Threshold) => sq_sum(nu + beta, beta),
        (SegmentLabel::Parabolic, Algorithm::MaxRow) => sq_sum(nu, beta),
        (SegmentLabel::Parabolic, Algorithm::Ml) => sq_sum(regime.alpha().unwrap_or(0.0), beta),
        (SegmentLabel::Linear, Algorithm::Ml) if regime == Regime::Balanced => 1.0 + beta,
        (SegmentLabel::Linear, Algorithm::Ml) => 2.0 * (regime.alpha().unwrap_or(0.0) + beta),
        (SegmentLabel::Linear, _) => 2.0 * (nu + beta),
    }
}

fn locate(segments: &[Segment], beta: f64) -> Option<Segment> {
    segments.iter().copied().find(|s| beta > s.lo && beta <= s.hi)
}

/// Smallest `x` at which the estimator makes at most `n^{1-β}` errors (to
/// leading order).
pub fn achievability_boundary(algorithm: Algorithm, regime: Regime, beta: f64) -> Result<BoundaryPoint> {
    if !(beta > 0.0) {
        return Err(Error::Domain(format!("beta = {beta} must be positive")));
    }
    let seg = locate(&achievability_segments(algorithm, regime), beta).expect("segments cover (0, inf)");
    Ok(BoundaryPoint {
        x: achievability_value(algorithm, regime, seg.label, beta),
        segment: seg.label,
    })
}

/// Largest of the necessary conditions for making fewer than `n^{1-β}`
/// errors. The balanced case uses `α = 0` in the parabolic condition.
pub fn converse_boundary(regime: Regime, beta: f64) -> Result<BoundaryPoint> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::Domain(format!("beta = {beta} outside (0, 1]")));
    }
    let alpha = regime.alpha().unwrap_or(0.0);
    let mut best = BoundaryPoint {
        x: sq_sum(alpha, beta),
        segment: SegmentLabel::Parabolic,
    };
    if beta <= 0.5 && elliptic(beta) > best.x {
        best = BoundaryPoint {
            x: elliptic(beta),
            segment: SegmentLabel::Elliptic,
        };
    }
    if beta >= 0.5 && 2.0 > best.x {
        best = BoundaryPoint {
            x: 2.0,
            segment: SegmentLabel::Vertical,
        };
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryKind {
    Exact,
    AlmostExact,
    ErrorExponent,
    Converse,
}

/// A piecewise closed-form curve `x(β)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryCurve {
    /// `None` for the converse, which holds for every estimator.
    pub algorithm: Option<Algorithm>,
    pub kind: BoundaryKind,
    pub regime: Regime,
    pub segments: Vec<Segment>,
}

impl BoundaryCurve {
    pub fn achievability(algorithm: Algorithm, regime: Regime) -> Self {
        BoundaryCurve {
            algorithm: Some(algorithm),
            kind: BoundaryKind::ErrorExponent,
            regime,
            segments: achievability_segments(algorithm, regime),
        }
    }

    pub fn converse(regime: Regime) -> Self {
        BoundaryCurve {
            algorithm: None,
            kind: BoundaryKind::Converse,
            regime,
            segments: vec![Segment {
                lo: 0.0,
                hi: 1.0,
                label: SegmentLabel::Parabolic,
            }],
        }
    }

    pub fn eval(&self, beta: f64) -> Result<BoundaryPoint> {
        match self.algorithm {
            Some(a) => achievability_boundary(a, self.regime, beta),
            None => converse_boundary(self.regime, beta),
        }
    }

    /// `(β, x, label)` samples at the given β values inside the curve's domain.
    pub fn sample(&self, betas: &[f64]) -> Vec<(f64, f64, SegmentLabel)> {
        betas
            .iter()
            .filter_map(|&b| self.eval(b).ok().map(|p| (b, p.x, p.segment)))
            .collect()
    }
}

/// Writes sampled curves as CSV with header `curve,algorithm,regime,beta,x,segment`.
pub fn write_curves_csv<W: Write>(out: W, curves: &[BoundaryCurve], betas: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["curve", "algorithm", "regime", "beta", "x", "segment"])?;
    for c in curves {
        let kind = match c.kind {
            BoundaryKind::Exact => "exact",
            BoundaryKind::AlmostExact => "almost-exact",
            BoundaryKind::ErrorExponent => "error-exponent",
            BoundaryKind::Converse => "converse",
        };
        let alg = c.algorithm.map_or("any", Algorithm::name);
        for (b, x, label) in c.sample(betas) {
            w.write_record([
                kind,
                alg,
                &c.regime.to_string(),
                &b.to_string(),
                &x.to_string(),
                &label.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailEvent {
    /// The planted pairs of a `δ`-pair mapping score at most `τ δ` in total.
    Atypicality,
    /// A single unplanted pair scores at least `τ`.
    FalsePositive,
    /// A mapping differing from the truth in `δ` pairs scores at least as high.
    Misalignment,
    /// As `Misalignment`, jointly with the truth scoring at least `τ δ`.
    CondMisalignment,
}

fn tail(kind: TailEvent, zeta: f64, tau: f64, delta: f64) -> f64 {
    match kind {
        TailEvent::Atypicality => (-delta * (zeta - tau).powi(2) / (4.0 * zeta)).exp(),
        TailEvent::FalsePositive => (-(zeta + tau).powi(2) / (4.0 * zeta)).exp(),
        TailEvent::Misalignment => (-delta * zeta / 2.0).exp(),
        TailEvent::CondMisalignment => (-delta * (tau * tau + zeta * zeta) / (2.0 * zeta)).exp(),
    }
}

/// Tail bounds for planted matching with exactly Gaussian scores.
pub fn planted_tail_bound(kind: TailEvent, zeta: f64, tau_g: f64, delta: usize) -> Result<f64> {
    if !(zeta > 0.0) || delta == 0 {
        return Err(Error::Domain(format!(
            "need zeta > 0 and delta >= 1, got {zeta}, {delta}"
        )));
    }
    let ok = match kind {
        TailEvent::Atypicality => tau_g <= zeta,
        TailEvent::FalsePositive => tau_g >= -zeta,
        TailEvent::Misalignment => true,
        TailEvent::CondMisalignment => tau_g >= 0.0,
    };
    if !ok || !tau_g.is_finite() {
        return Err(Error::Domain(format!(
            "tau = {tau_g} outside the range for {kind:?} at zeta = {zeta}"
        )));
    }
    Ok(tail(kind, zeta, tau_g, delta as f64))
}

/// Tail bounds for database alignment; the conditional bound carries an
/// extra `exp(6 ρ_max² δ τ)`.
pub fn database_tail_bound(kind: TailEvent, i_xy: f64, rho_max: f64, tau: f64, delta: usize) -> Result<f64> {
    if !(i_xy > 0.0) || delta == 0 || !(0.0..1.0).contains(&rho_max) {
        return Err(Error::Domain(format!(
            "need I > 0, delta >= 1, 0 <= rho_max < 1; got {i_xy}, {delta}, {rho_max}"
        )));
    }
    let ok = match kind {
        TailEvent::Atypicality | TailEvent::FalsePositive => tau.abs() <= i_xy,
        TailEvent::Misalignment => true,
        TailEvent::CondMisalignment => (0.0..=i_xy).contains(&tau),
    };
    if !ok || !tau.is_finite() {
        return Err(Error::Domain(format!(
            "tau = {tau} outside the range for {kind:?} at I = {i_xy}"
        )));
    }
    let d = delta as f64;
    let base = tail(kind, i_xy, tau, d);
    Ok(match kind {
        TailEvent::CondMisalignment => base * (6.0 * rho_max * rho_max * d * tau).exp(),
        _ => base,
    })
}

/// Exponent weights for the generating function.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaMatrix {
    pub theta: Array2<f64>,
}

impl ThetaMatrix {
    pub fn new(theta: Array2<f64>) -> Result<Self> {
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite theta entry".into()));
        }
        Ok(ThetaMatrix { theta })
    }

    /// `Σ_k c_k · indicator(m_k)`.
    pub fn combination(terms: &[(f64, &PartialMapping)]) -> Result<Self> {
        let (n_u, n_v) = terms.first().map_or((0, 0), |(_, m)| (m.n_u(), m.n_v()));
        let mut theta = Array2::zeros((n_u, n_v));
        for (c, m) in terms {
            if (m.n_u(), m.n_v()) != (n_u, n_v) {
                return Err(Error::Shape("mappings over different user sets".into()));
            }
            for &(u, v) in m.pairs() {
                theta[[u, v]] += c;
            }
        }
        Self::new(theta)
    }
}

/// `(1-ρ²) I + [[ρ² diag(Θ1), -ρΘ], [-ρΘᵀ, ρ² diag(Θᵀ1)]]`.
pub fn p_matrix(theta: &ThetaMatrix, rho: f64) -> Array2<f64> {
    let t = &theta.theta;
    let (n_u, n_v) = t.dim();
    let r2 = rho * rho;
    let mut p = Array2::<f64>::eye(n_u + n_v).mapv(|x| x * (1.0 - r2));
    for u in 0..n_u {
        p[[u, u]] += r2 * t.row(u).sum();
    }
    for v in 0..n_v {
        p[[n_u + v, n_u + v]] += r2 * t.column(v).sum();
    }
    for u in 0..n_u {
        for v in 0..n_v {
            p[[u, n_u + v]] = -rho * t[[u, v]];
            p[[n_u + v, u]] = -rho * t[[u, v]];
        }
    }
    p
}

/// `log R(Θ) = ½ Σ_i [(n_u + n_v - ΣΘ) log(1-ρᵢ²) - log det P(Θ, ρᵢ)]`.
pub fn log_generating_function_r(theta: &ThetaMatrix, rho: &[f64]) -> Result<f64> {
    let (n_u, n_v) = theta.theta.dim();
    let weight = (n_u + n_v) as f64 - theta.theta.sum();
    let mut total = 0.0;
    for &r in rho {
        if !(r.abs() < 1.0) {
            return Err(Error::Domain(format!("correlation {r} outside (-1, 1)")));
        }
        let p = p_matrix(theta, r);
        let l = linalg::cholesky(p.view()).map_err(|e| Error::OutsideConvergenceRegion(format!("rho = {r}: {e}")))?;
        total += 0.5 * (weight * (-r * r).ln_1p() - linalg::log_det_from_cholesky(l.view()));
    }
    Ok(total)
}

/// `R(Θ) = E[exp⟨G, Θ⟩]` with the two databases independent.
pub fn generating_function_r(theta: &ThetaMatrix, rho: &[f64]) -> Result<f64> {
    log_generating_function_r(theta, rho).map(f64::exp)
}

/// `R` of the block-diagonal assembly of `blocks`, and the product of the
/// per-block values.
pub fn r_block_product_check(blocks: &[ThetaMatrix], rho: &[f64]) -> Result<(f64, f64)> {
    let rows: usize = blocks.iter().map(|b| b.theta.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.theta.ncols()).sum();
    let mut full = Array2::zeros((rows, cols));
    let (mut r0, mut c0) = (0, 0);
    let mut product = 0.0;
    for b in blocks {
        let (h, w) = b.theta.dim();
        full.slice_mut(ndarray::s![r0..r0 + h, c0..c0 + w]).assign(&b.theta);
        r0 += h;
        c0 += w;
        product += log_generating_function_r(b, rho)?;
    }
    let whole = log_generating_function_r(&ThetaMatrix::new(full)?, rho)?;
    Ok((whole.exp(), product.exp()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    Cycle,
    EvenPath,
}

/// `Θ = (ν/2)(m₁ + m₂)` where `m₁` is the identity and `m₂` the cyclic shift
/// on `n` users.
pub fn cycle_theta(n: usize, nu: f64) -> Result<ThetaMatrix> {
    if n < 2 {
        return Err(Error::Domain("a cycle needs at least two users".into()));
    }
    let m1 = PartialMapping::identity(n, n)?;
    let m2 = PartialMapping::new((0..n).map(|u| (u, (u + 1) % n)).collect(), n, n)?;
    ThetaMatrix::combination(&[(nu / 2.0, &m1), (nu / 2.0, &m2)])
}

/// `Θ = (ν/2)(m₁ + m₂)` on `n` left and `n + 1` right users, with `m₁ = u ↦ u`
/// and `m₂ = u ↦ u + 1`.
pub fn even_path_theta(n: usize, nu: f64) -> Result<ThetaMatrix> {
    if n < 1 {
        return Err(Error::Domain("a path needs at least one user".into()));
    }
    let m1 = PartialMapping::identity(n, n + 1)?;
    let m2 = PartialMapping::new((0..n).map(|u| (u, u + 1)).collect(), n, n + 1)?;
    ThetaMatrix::combination(&[(nu / 2.0, &m1), (nu / 2.0, &m2)])
}

/// Upper bound on `log R` for a cycle or even path of `n_block` users.
pub fn elementary_block_r_bound(kind: BlockKind, n_block: usize, nu: f64, i_xy: f64, rho_max: f64) -> Result<f64> {
    let n = n_block as f64;
    let lead = -(n / 2.0) * nu * (2.0 - nu);
    let r2 = rho_max * rho_max;
    match kind {
        BlockKind::Cycle if (0.0..=2.0).contains(&nu) && n_block >= 2 => Ok(i_xy * (lead + n * r2 * (nu - 1.0))),
        BlockKind::EvenPath if (1.0..=2.0).contains(&nu) && n_block >= 1 => {
            Ok(i_xy * (lead - (nu - 1.0).powi(2) * nu * nu + 6.0 * n * r2 * (nu - 1.0)))
        }
        _ => Err(Error::Domain(format!(
            "nu = {nu}, n = {n_block} outside the range for {kind:?}"
        ))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChernoffEvent {
    Atypicality,
    Misalignment,
    CondMisalignment,
}

/// Chernoff bounds expressed through `R`: for atypicality
/// `exp(θτ|m₁|) R((1-θ)m₁)`, for misalignment `R((1-θ)m₁ + θm₂)`, and for the
/// conditional event `exp(-τ|m₁|(ν-1)) R(ν(1-θ)m₁ + νθm₂)`.
pub fn chernoff_event_bound(
    event: ChernoffEvent,
    m1: &PartialMapping,
    m2: &PartialMapping,
    theta: f64,
    nu: f64,
    tau: f64,
    rho: &[f64],
) -> Result<f64> {
    if !(theta > 0.0) {
        return Err(Error::Domain(format!("theta = {theta} must be positive")));
    }
    let size = m1.len() as f64;
    let log = match event {
        ChernoffEvent::Atypicality => {
            theta * tau * size + log_generating_function_r(&ThetaMatrix::combination(&[(1.0 - theta, m1)])?, rho)?
        }
        ChernoffEvent::Misalignment => {
            log_generating_function_r(&ThetaMatrix::combination(&[(1.0 - theta, m1), (theta, m2)])?, rho)?
        }
        ChernoffEvent::CondMisalignment => {
            if !(nu > 1.0) {
                return Err(Error::Domain(format!("nu = {nu} must exceed 1")));
            }
            let t = ThetaMatrix::combination(&[(nu * (1.0 - theta), m1), (nu * theta, m2)])?;
            -tau * size * (nu - 1.0) + log_generating_function_r(&t, rho)?
        }
    };
    Ok(log.exp())
}

/// Standard normal upper tail.
pub fn normal_tail(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

fn log_normal_tail(z: f64) -> f64 {
    if z < 30.0 {
        normal_tail(z).ln()
    } else {
        let z2 = z * z;
        -z2 / 2.0 - z.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() + (1.0 - 1.0 / z2 + 3.0 / (z2 * z2)).ln()
    }
}

fn ln_factorial(k: usize) -> f64 {
    ln_gamma(k as f64 + 1.0)
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let top = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return top;
    }
    top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln()
}

/// Logarithm of the covering sum at a single `γ`, before clamping.
pub fn log_covering_sum(n: usize, s: usize, mu: f64, gamma: f64) -> f64 {
    let miss = (-normal_tail((1.0 - gamma) * mu)).ln_1p();
    let stay = (-normal_tail(gamma * mu)).ln_1p();
    let terms: Vec<f64> = (0..=n)
        .map(|k| {
            let kf = k as f64;
            ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k) + ln_factorial(s) - ln_factorial(k + s)
                + (n - k) as f64 * miss
                + kf * (kf + s as f64) * stay
                + kf * (2.0 * gamma - 1.0) * mu * mu / 2.0
        })
        .collect();
    log_sum_exp(&terms)
}

/// 101 evenly spaced points on `[0, 1]`.
pub fn default_gamma_grid() -> Vec<f64> {
    (0..=100).map(|i| i as f64 / 100.0).collect()
}

/// The two `γ` values suggested by the converse argument, when they are real
/// and inside `[0, 1]`.
pub fn covering_gamma_candidates(n: usize, s: usize, mu: f64) -> Vec<f64> {
    let mut out = Vec::new();
    if n < 2 || !(mu > 0.0) {
        return out;
    }
    let log_n = (n as f64).ln();
    let log_q = -mu * mu / 2.0 - log_normal_tail(mu);
    let log_3q = 3f64.ln() + log_q;
    let inner = mu * mu / 4.0 + log_3q / 2.0;
    if inner > 0.0 {
        let eps = (2.0 * inner.ln() + 3f64.ln() + 2.0 * log_q) / log_n;
        if eps < 1.0 {
            let a = mu * mu / (4.0 * (1.0 - eps) * log_n);
            if (0.5..=1.0).contains(&a) {
                out.push((1.0 + (1.0 / a - 1.0).sqrt()) / 2.0);
            }
        }
    }
    let inner = mu * mu / 2.0 + log_3q;
    if s >= 1 && inner > 0.0 {
        let eps = (log_q + inner.ln()) / log_n;
        let alpha = (s as f64).ln() / log_n;
        if alpha >= eps {
            let g = (2.0 * (alpha - eps) * log_n / (mu * mu)).sqrt();
            if (0.0..=1.0).contains(&g) {
                out.push(g);
            }
        }
    }
    out
}

/// Upper bound on the probability that any estimator recovers a planted
/// matching of `n` users with `s` spare right users exactly.
///
/// Minimizes the covering sum over `gamma_grid` plus the analytic candidates,
/// and clamps to `[0, 1]`.
pub fn map_success_upper_bound(n: usize, s: usize, mu: f64, gamma_grid: &[f64]) -> f64 {
    if n == 0 || !(mu > 0.0) {
        return 1.0;
    }
    let best = gamma_grid
        .iter()
        .copied()
        .chain(covering_gamma_candidates(n, s, mu))
        .filter(|g| (0.0..=1.0).contains(g))
        .map(|g| log_covering_sum(n, s, mu, g))
        .fold(f64::INFINITY, f64::min);
    best.exp().clamp(0.0, 1.0)
}
