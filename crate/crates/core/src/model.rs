//! Correlation statistics, the canonical-form transform and closed-form
//! moments of the information density.

use std::path::Path;

use ndarray::{s, Array1, Array2, ArrayView2};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::real::Real;

/// Relative cutoff below which a singular value counts as zero.
pub const RANK_TOLERANCE: f64 = 1e-12;
/// Smallest joint eigenvalue accepted, relative to the trace.
pub const PSD_TOLERANCE: f64 = 1e-10;

/// Means and covariances of two jointly Gaussian feature vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationModel<T> {
    pub mu_a: Vec<T>,
    pub mu_b: Vec<T>,
    pub sigma_a: Array2<T>,
    pub sigma_b: Array2<T>,
    pub sigma_ab: Array2<T>,
}

/// On-disk schema. Matrices are row-major with dimensions declared up front.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    d_a: usize,
    d_b: usize,
    #[serde(default)]
    mu_a: Option<Vec<f64>>,
    #[serde(default)]
    mu_b: Option<Vec<f64>>,
    sigma_a: Vec<f64>,
    sigma_b: Vec<f64>,
    sigma_ab: Vec<f64>,
}

fn from_row_major<T: Real>(name: &str, rows: usize, cols: usize, data: &[f64]) -> Result<Array2<T>> {
    if data.len() != rows * cols {
        return Err(Error::DimensionMismatch(format!(
            "{name} has {} entries, expected {rows}x{cols}",
            data.len()
        )));
    }
    Ok(Array2::from_shape_fn((rows, cols), |(i, j)| T::lit(data[i * cols + j])))
}

impl<T: Real> CorrelationModel<T> {
    pub fn new(
        mu_a: Vec<T>,
        mu_b: Vec<T>,
        sigma_a: Array2<T>,
        sigma_b: Array2<T>,
        sigma_ab: Array2<T>,
    ) -> Result<Self> {
        let (d_a, d_b) = (mu_a.len(), mu_b.len());
        if sigma_a.dim() != (d_a, d_a) || sigma_b.dim() != (d_b, d_b) || sigma_ab.dim() != (d_a, d_b) {
            return Err(Error::DimensionMismatch(format!(
                "means of length {d_a}, {d_b} against covariances {:?}, {:?}, {:?}",
                sigma_a.dim(),
                sigma_b.dim(),
                sigma_ab.dim()
            )));
        }
        let all = mu_a
            .iter()
            .chain(&mu_b)
            .chain(&sigma_a)
            .chain(&sigma_b)
            .chain(&sigma_ab);
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite model entry".into()));
        }
        let tol = if T::epsilon().wide() > 1e-10 { 1e-5 } else { 1e-12 };
        if !linalg::is_symmetric(sigma_a.view(), tol) || !linalg::is_symmetric(sigma_b.view(), tol) {
            return Err(Error::Domain("marginal covariance is not symmetric".into()));
        }
        Ok(CorrelationModel {
            mu_a,
            mu_b,
            sigma_a,
            sigma_b,
            sigma_ab,
        })
    }

    /// Zero-mean model from covariance blocks.
    pub fn centered(sigma_a: Array2<T>, sigma_b: Array2<T>, sigma_ab: Array2<T>) -> Result<Self> {
        let mu_a = vec![T::zero(); sigma_a.nrows()];
        let mu_b = vec![T::zero(); sigma_b.nrows()];
        Self::new(mu_a, mu_b, sigma_a, sigma_b, sigma_ab)
    }

    /// Parses the TOML schema:
    ///
    /// ```toml
    /// d_a = 2
    /// d_b = 1
    /// mu_a = [0.0, 1.0]          # optional, defaults to zeros
    /// mu_b = [0.0]               # optional
    /// sigma_a = [1.0, 0.2, 0.2, 1.0]
    /// sigma_b = [2.0]
    /// sigma_ab = [0.3, 0.1]      # d_a rows of d_b entries
    /// ```
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let f: ModelFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let mu_a = f.mu_a.unwrap_or_else(|| vec![0.0; f.d_a]);
        let mu_b = f.mu_b.unwrap_or_else(|| vec![0.0; f.d_b]);
        if mu_a.len() != f.d_a || mu_b.len() != f.d_b {
            return Err(Error::DimensionMismatch(
                "mean length differs from declared dimension".into(),
            ));
        }
        Self::new(
            mu_a.into_iter().map(T::lit).collect(),
            mu_b.into_iter().map(T::lit).collect(),
            from_row_major("sigma_a", f.d_a, f.d_a, &f.sigma_a)?,
            from_row_major("sigma_b", f.d_b, f.d_b, &f.sigma_b)?,
            from_row_major("sigma_ab", f.d_a, f.d_b, &f.sigma_ab)?,
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn d_a(&self) -> usize {
        self.mu_a.len()
    }

    pub fn d_b(&self) -> usize {
        self.mu_b.len()
    }

    /// The full `(d_a + d_b)` square covariance.
    pub fn joint(&self) -> Array2<T> {
        let (da, db) = (self.d_a(), self.d_b());
        let mut j = Array2::zeros((da + db, da + db));
        j.slice_mut(s![..da, ..da]).assign(&self.sigma_a);
        j.slice_mut(s![da.., da..]).assign(&self.sigma_b);
        j.slice_mut(s![..da, da..]).assign(&self.sigma_ab);
        j.slice_mut(s![da.., ..da]).assign(&self.sigma_ab.t());
        j
    }

    fn check_joint(&self) -> Result<()> {
        let joint = self.joint();
        if joint.nrows() == 0 {
            return Ok(());
        }
        let trace: f64 = (0..joint.nrows()).map(|i| joint[[i, i]].wide()).sum();
        let (values, _) = linalg::symmetric_eigen(joint.view());
        let min = values[0].wide();
        let tolerance = PSD_TOLERANCE * trace.abs();
        if min < -tolerance {
            return Err(Error::NotValidJoint {
                eigenvalue: min,
                tolerance,
            });
        }
        Ok(())
    }

    /// Canonical correlations and the affine maps that produce them.
    pub fn canonicalize(&self) -> Result<(CanonicalCorrelation<T>, CanonicalTransformPair<T>)> {
        self.check_joint()?;
        let la = linalg::cholesky(self.sigma_a.view())?;
        let lb = linalg::cholesky(self.sigma_b.view())?;
        let la_inv = linalg::inverse_lower(la.view());
        let lb_inv = linalg::inverse_lower(lb.view());
        let whitened = linalg::matmul(linalg::matmul(la_inv.view(), self.sigma_ab.view()).view(), lb_inv.t());
        let svd = linalg::svd(whitened.view());
        let top = svd.s.first().map_or(0.0, |v| v.wide());
        let keep: Vec<usize> = (0..svd.s.len())
            .filter(|&i| top > 0.0 && svd.s[i].wide() > RANK_TOLERANCE * top)
            .collect();
        let rho: Vec<T> = keep.iter().map(|&i| svd.s[i]).collect();
        if let Some(r) = rho.iter().find(|r| r.wide() >= 1.0) {
            return Err(Error::Domain(format!("canonical correlation {r} is not below 1")));
        }
        let u_kept = Array2::from_shape_fn((self.d_a(), keep.len()), |(i, c)| svd.u[[i, keep[c]]]);
        let v_kept = Array2::from_shape_fn((self.d_b(), keep.len()), |(i, c)| svd.v[[i, keep[c]]]);
        let t_a = AffineMap::whitening(linalg::matmul(u_kept.t(), la_inv.view()), &self.mu_a);
        let t_b = AffineMap::whitening(linalg::matmul(v_kept.t(), lb_inv.view()), &self.mu_b);
        Ok((CanonicalCorrelation { rho }, CanonicalTransformPair { t_a, t_b }))
    }

    /// Spectral norm of `Σa^{-1/2} Σab Σb^{-1/2}`, computed without the
    /// Cholesky/SVD path so it can cross-check `rho_max`.
    pub fn condition1_margin(&self) -> Result<T> {
        self.check_joint()?;
        let ra = linalg::symmetric_power(self.sigma_a.view(), -0.5)?;
        let rb = linalg::symmetric_power(self.sigma_b.view(), -0.5)?;
        let core = linalg::matmul(linalg::matmul(ra.view(), self.sigma_ab.view()).view(), rb.view());
        if core.is_empty() {
            return Ok(T::zero());
        }
        let gram = linalg::matmul(core.t(), core.view());
        let (values, _) = linalg::symmetric_eigen(gram.view());
        let top = values.last().map_or(0.0, |v| v.wide()).max(0.0);
        Ok(T::lit(top.sqrt()))
    }
}

/// `x ↦ matrix · x + offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap<T> {
    pub matrix: Array2<T>,
    pub offset: Vec<T>,
}

impl<T: Real> AffineMap<T> {
    fn whitening(matrix: Array2<T>, mean: &[T]) -> Self {
        let offset = (0..matrix.nrows())
            .map(|i| {
                let s: f64 = (0..matrix.ncols())
                    .map(|j| matrix[[i, j]].wide() * mean[j].wide())
                    .sum();
                T::lit(-s)
            })
            .collect();
        AffineMap { matrix, offset }
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        (0..self.matrix.nrows())
            .map(|i| {
                let s: f64 = (0..self.matrix.ncols())
                    .map(|j| self.matrix[[i, j]].wide() * x[j].wide())
                    .sum();
                T::lit(s + self.offset[i].wide())
            })
            .collect()
    }

    /// Applies the map to every row of `rows`.
    pub fn apply_rows(&self, rows: ArrayView2<T>) -> Array2<T> {
        let mut out = Array2::zeros((rows.nrows(), self.matrix.nrows()));
        for (r, row) in rows.outer_iter().enumerate() {
            let y = self.apply(&row.to_vec());
            out.row_mut(r).assign(&Array1::from(y));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalTransformPair<T> {
    pub t_a: AffineMap<T>,
    pub t_b: AffineMap<T>,
}

/// Per-dimension canonical correlations, nonnegative and sorted descending.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalCorrelation<T> {
    rho: Vec<T>,
}

impl<T: Real> CanonicalCorrelation<T> {
    pub fn new(rho: &[T]) -> Result<Self> {
        check_rho(rho)?;
        let mut rho: Vec<T> = rho.iter().map(|r| r.abs()).collect();
        rho.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
        Ok(CanonicalCorrelation { rho })
    }

    pub fn rho(&self) -> &[T] {
        &self.rho
    }

    pub fn dims(&self) -> usize {
        self.rho.len()
    }

    pub fn i_xy(&self) -> T {
        mutual_information(&self.rho).expect("validated on construction")
    }

    pub fn rho_max(&self) -> T {
        self.rho.first().copied().unwrap_or_else(T::zero)
    }
}

fn check_rho<T: Real>(rho: &[T]) -> Result<()> {
    match rho.iter().find(|r| !(r.abs() < T::one())) {
        Some(r) => Err(Error::Domain(format!("correlation {r} outside (-1, 1)"))),
        None => Ok(()),
    }
}

/// `-½ Σ log(1 - ρᵢ²)` in nats.
pub fn mutual_information<T: Real>(rho: &[T]) -> Result<T> {
    check_rho(rho)?;
    let s: f64 = rho.iter().map(|r| -0.5 * (-r.wide().powi(2)).ln_1p()).sum();
    Ok(T::lit(s))
}

/// Mean and variance of a single information-density entry, for true and
/// false pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScorePairMoments<T> {
    pub true_mean: T,
    pub true_var: T,
    pub false_mean: T,
    pub false_var: T,
}

pub fn score_moments<T: Real>(rho: &[T]) -> Result<ScorePairMoments<T>> {
    let i = mutual_information(rho)?.wide();
    let (mut sq, mut shift, mut fvar) = (0.0, 0.0, 0.0);
    for r in rho {
        let r2 = r.wide().powi(2);
        sq += r2;
        shift += r2 / (1.0 - r2);
        fvar += r2 * (1.0 + r2) / (1.0 - r2).powi(2);
    }
    Ok(ScorePairMoments {
        true_mean: T::lit(i),
        true_var: T::lit(sq),
        false_mean: T::lit(i - shift),
        false_var: T::lit(fvar),
    })
}
