//! Small dense kernels: Cholesky, triangular solves, Jacobi eigen and SVD.
//!
//! Matrices here are at most a few dozen rows, so plain cyclic Jacobi is
//! accurate and fast enough.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::real::Real;

const MAX_SWEEPS: usize = 100;

/// Lower-triangular `L` with `a = L Lᵀ`.
pub fn cholesky<T: Real>(a: ArrayView2<T>) -> Result<Array2<T>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Shape(format!("cholesky of {}x{}", n, a.ncols())));
    }
    let mut l = Array2::<T>::zeros((n, n));
    for j in 0..n {
        let mut d = a[[j, j]].wide();
        for k in 0..j {
            d -= l[[j, k]].wide().powi(2);
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite(format!("pivot {j} is {d:e}")));
        }
        let djj = d.sqrt();
        l[[j, j]] = T::lit(djj);
        for i in (j + 1)..n {
            let mut s = a[[i, j]].wide();
            for k in 0..j {
                s -= l[[i, k]].wide() * l[[j, k]].wide();
            }
            l[[i, j]] = T::lit(s / djj);
        }
    }
    Ok(l)
}

/// Solves `L X = B` for lower-triangular `L`.
pub fn solve_lower<T: Real>(l: ArrayView2<T>, b: ArrayView2<T>) -> Array2<T> {
    let n = l.nrows();
    let mut x = Array2::<T>::zeros(b.raw_dim());
    for c in 0..b.ncols() {
        for i in 0..n {
            let mut s = b[[i, c]].wide();
            for k in 0..i {
                s -= l[[i, k]].wide() * x[[k, c]].wide();
            }
            x[[i, c]] = T::lit(s / l[[i, i]].wide());
        }
    }
    x
}

pub fn inverse_lower<T: Real>(l: ArrayView2<T>) -> Array2<T> {
    solve_lower(l, Array2::<T>::eye(l.nrows()).view())
}

/// `log det(L Lᵀ)` from a Cholesky factor.
pub fn log_det_from_cholesky<T: Real>(l: ArrayView2<T>) -> f64 {
    (0..l.nrows()).map(|i| 2.0 * l[[i, i]].wide().ln()).sum()
}

pub fn matmul<T: Real>(a: ArrayView2<T>, b: ArrayView2<T>) -> Array2<T> {
    assert_eq!(a.ncols(), b.nrows(), "matmul shape");
    let mut out = Array2::<T>::zeros((a.nrows(), b.ncols()));
    for i in 0..a.nrows() {
        for j in 0..b.ncols() {
            let mut s = 0.0;
            for k in 0..a.ncols() {
                s += a[[i, k]].wide() * b[[k, j]].wide();
            }
            out[[i, j]] = T::lit(s);
        }
    }
    out
}

pub fn is_symmetric<T: Real>(a: ArrayView2<T>, tol: f64) -> bool {
    if a.nrows() != a.ncols() {
        return false;
    }
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.wide().abs())).max(1.0);
    (0..a.nrows()).all(|i| (0..i).all(|j| (a[[i, j]].wide() - a[[j, i]].wide()).abs() <= tol * scale))
}

/// Symmetric eigendecomposition: eigenvalues ascending, eigenvectors as columns.
pub fn symmetric_eigen<T: Real>(a: ArrayView2<T>) -> (Vec<T>, Array2<T>) {
    let n = a.nrows();
    let mut m = a.mapv(|v| v.wide());
    let mut v = Array2::<f64>::eye(n);
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n).map(|i| (0..i).map(|j| m[[i, j]].powi(2)).sum::<f64>()).sum();
        let diag: f64 = (0..n).map(|i| m[[i, i]].powi(2)).sum();
        if off <= 1e-32 * diag.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[[i, i]].total_cmp(&m[[j, j]]));
    let values = order.iter().map(|&i| T::lit(m[[i, i]])).collect();
    let mut vectors = Array2::<T>::zeros((n, n));
    for (col, &i) in order.iter().enumerate() {
        for k in 0..n {
            vectors[[k, col]] = T::lit(v[[k, i]]);
        }
    }
    (values, vectors)
}

/// `a^p` for symmetric positive definite `a`, via its eigendecomposition.
pub fn symmetric_power<T: Real>(a: ArrayView2<T>, p: f64) -> Result<Array2<T>> {
    let (values, vectors) = symmetric_eigen(a);
    let n = a.nrows();
    if let Some(min) = values.first() {
        if !(min.wide() > 0.0) {
            return Err(Error::NotPositiveDefinite(format!("smallest eigenvalue {min}")));
        }
    }
    let mut out = Array2::<T>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let s: f64 = (0..n)
                .map(|k| vectors[[i, k]].wide() * values[k].wide().powf(p) * vectors[[j, k]].wide())
                .sum();
            out[[i, j]] = T::lit(s);
        }
    }
    Ok(out)
}

/// Thin singular value decomposition `a = U diag(s) Vᵀ` by one-sided Jacobi.
///
/// Returns `min(m, n)` triples sorted by descending singular value.
pub struct Svd<T> {
    pub u: Array2<T>,
    pub s: Vec<T>,
    pub v: Array2<T>,
}

pub fn svd<T: Real>(a: ArrayView2<T>) -> Svd<T> {
    if a.nrows() < a.ncols() {
        let t = svd(a.t());
        return Svd { u: t.v, s: t.s, v: t.u };
    }
    let (m, n) = a.dim();
    let mut w = a.mapv(|x| x.wide());
    let mut v = Array2::<f64>::eye(n);
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for i in 0..m {
                    alpha += w[[i, p]] * w[[i, p]];
                    beta += w[[i, q]] * w[[i, q]];
                    gamma += w[[i, p]] * w[[i, q]];
                }
                if gamma == 0.0 || gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = if zeta == 0.0 {
                    1.0
                } else {
                    zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let wp = w[[i, p]];
                    let wq = w[[i, q]];
                    w[[i, p]] = c * wp - s * wq;
                    w[[i, q]] = s * wp + c * wq;
                }
                for i in 0..n {
                    let vp = v[[i, p]];
                    let vq = v[[i, q]];
                    v[[i, p]] = c * vp - s * vq;
                    v[[i, q]] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..n)
        .map(|j| (0..m).map(|i| w[[i, j]].powi(2)).sum::<f64>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let mut u = Array2::<T>::zeros((m, n));
    let mut vv = Array2::<T>::zeros((n, n));
    let mut s = Vec::with_capacity(n);
    for (col, &j) in order.iter().enumerate() {
        let sigma = norms[j];
        s.push(T::lit(sigma));
        for i in 0..m {
            u[[i, col]] = T::lit(if sigma > 0.0 { w[[i, j]] / sigma } else { 0.0 });
        }
        for i in 0..n {
            vv[[i, col]] = T::lit(v[[i, j]]);
        }
    }
    Svd { u, s, v: vv }
}
