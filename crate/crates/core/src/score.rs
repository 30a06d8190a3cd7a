//! Score matrices consumed by the estimators: information densities for
//! database pairs and shifted weights for planted matching.

use ndarray::{s, Array2, ArrayView2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{mutual_information, CorrelationModel};
use crate::real::Real;
use crate::synth::{DatabasePair, PlantedInstance};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreKind {
    InfoDensity,
    PlantedShifted,
    /// Caller-supplied scores, e.g. for testing estimators directly.
    Custom,
}

/// `n_u × n_v` matrix of pairwise scores in nats.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix<T> {
    pub s: Array2<T>,
    pub kind: ScoreKind,
}

impl<T: Real> ScoreMatrix<T> {
    pub fn new(s: Array2<T>, kind: ScoreKind) -> Result<Self> {
        if let Some(((u, v), x)) = s.indexed_iter().find(|(_, x)| !x.is_finite()) {
            return Err(Error::Domain(format!("score ({u}, {v}) is {x}")));
        }
        Ok(ScoreMatrix { s, kind })
    }

    pub fn custom(s: Array2<T>) -> Result<Self> {
        Self::new(s, ScoreKind::Custom)
    }

    pub fn n_u(&self) -> usize {
        self.s.nrows()
    }

    pub fn n_v(&self) -> usize {
        self.s.ncols()
    }
}

fn from_rows<T: Real>(rows: Vec<Vec<f64>>, n_v: usize, kind: ScoreKind) -> Result<ScoreMatrix<T>> {
    let n_u = rows.len();
    let flat = rows.into_iter().flatten().map(T::lit).collect();
    let s = Array2::from_shape_vec((n_u, n_v), flat).expect("row lengths");
    ScoreMatrix::new(s, kind)
}

/// Information density `G[u][v]` of canonical-form features.
pub fn info_density_canonical<T: Real>(db: &DatabasePair<T>, rho: &[T]) -> Result<ScoreMatrix<T>> {
    let d = rho.len();
    if db.a.ncols() != d || db.b.ncols() != d {
        return Err(Error::DimensionMismatch(format!(
            "features have {} and {} columns, correlation has {d}",
            db.a.ncols(),
            db.b.ncols()
        )));
    }
    let base = mutual_information(rho)?.wide();
    let r: Vec<f64> = rho.iter().map(|x| x.wide()).collect();
    let cross: Vec<f64> = r.iter().map(|x| x / (1.0 - x * x)).collect();
    let quad: Vec<f64> = r.iter().map(|x| x * x / (2.0 * (1.0 - x * x))).collect();
    let a = db.a.mapv(|x| x.wide());
    let b = db.b.mapv(|x| x.wide());
    let row_term = |m: &Array2<f64>, i: usize| -> f64 { (0..d).map(|k| quad[k] * m[[i, k]].powi(2)).sum() };
    let b_terms: Vec<f64> = (0..b.nrows()).map(|v| row_term(&b, v)).collect();
    let rows: Vec<Vec<f64>> = (0..a.nrows())
        .into_par_iter()
        .map(|u| {
            let xw: Vec<f64> = (0..d).map(|k| a[[u, k]] * cross[k]).collect();
            let head = base - row_term(&a, u);
            (0..b.nrows())
                .map(|v| {
                    let dot: f64 = (0..d).map(|k| xw[k] * b[[v, k]]).sum();
                    head - b_terms[v] + dot
                })
                .collect()
        })
        .collect();
    from_rows(rows, db.b.nrows(), ScoreKind::InfoDensity)
}

fn quadratic(m: &Array2<f64>, x: &[f64], y: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..x.len() {
        for j in 0..y.len() {
            s += x[i] * m[[i, j]] * y[j];
        }
    }
    s
}

fn precision(l: &Array2<f64>) -> Array2<f64> {
    let inv = linalg::inverse_lower(l.view());
    linalg::matmul(inv.t(), inv.view())
}

/// Information density from raw features, by evaluating the joint and
/// marginal Gaussian log-densities directly.
pub fn info_density_raw<T: Real>(
    a_raw: ArrayView2<T>,
    b_raw: ArrayView2<T>,
    model: &CorrelationModel<T>,
) -> Result<ScoreMatrix<T>> {
    let (da, db) = (model.d_a(), model.d_b());
    if a_raw.ncols() != da || b_raw.ncols() != db {
        return Err(Error::DimensionMismatch(format!(
            "raw features have {} and {} columns, model has {da} and {db}",
            a_raw.ncols(),
            b_raw.ncols()
        )));
    }
    let joint = model.joint().mapv(|x| x.wide());
    let sa = model.sigma_a.mapv(|x| x.wide());
    let sb = model.sigma_b.mapv(|x| x.wide());
    let lj = linalg::cholesky(joint.view())?;
    let la = linalg::cholesky(sa.view())?;
    let lb = linalg::cholesky(sb.view())?;
    let half_logdet = -0.5
        * (linalg::log_det_from_cholesky(lj.view())
            - linalg::log_det_from_cholesky(la.view())
            - linalg::log_det_from_cholesky(lb.view()));
    let k = precision(&lj);
    let qa = &k.slice(s![..da, ..da]).to_owned() - &precision(&la);
    let qb = &k.slice(s![da.., da..]).to_owned() - &precision(&lb);
    let kab = k.slice(s![..da, da..]).to_owned();
    let centered = |m: ArrayView2<T>, mu: &[T], i: usize| -> Vec<f64> {
        m.row(i).iter().zip(mu).map(|(x, c)| x.wide() - c.wide()).collect()
    };
    let ys: Vec<Vec<f64>> = (0..b_raw.nrows()).map(|v| centered(b_raw, &model.mu_b, v)).collect();
    let y_terms: Vec<f64> = ys.iter().map(|y| quadratic(&qb, y, y)).collect();
    let rows: Vec<Vec<f64>> = (0..a_raw.nrows())
        .into_par_iter()
        .map(|u| {
            let x = centered(a_raw, &model.mu_a, u);
            let x_term = quadratic(&qa, &x, &x);
            ys.iter()
                .zip(&y_terms)
                .map(|(y, yt)| half_logdet - 0.5 * (x_term + yt + 2.0 * quadratic(&kab, &x, y)))
                .collect()
        })
        .collect();
    from_rows(rows, b_raw.nrows(), ScoreKind::InfoDensity)
}

/// `μ W - μ²/2`.
pub fn planted_score<T: Real>(inst: &PlantedInstance<T>) -> Result<ScoreMatrix<T>> {
    let mu = inst.mu;
    let half = mu * mu / T::lit(2.0);
    ScoreMatrix::new(inst.w.mapv(|w| mu * w - half), ScoreKind::PlantedShifted)
}
