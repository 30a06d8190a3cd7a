//! Seeded samplers for ground-truth mappings, canonical database pairs and
//! planted weight matrices, plus a plain-text matrix dump format.

use std::io::{BufRead, Write};

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::real::Real;
use crate::rng::Seed;

/// Injective partial map from left users `0..n_u` to right users `0..n_v`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PartialMapping {
    pairs: Vec<(usize, usize)>,
    n_u: usize,
    n_v: usize,
}

impl PartialMapping {
    /// Validates injectivity and ranges; pairs are stored sorted by `u`.
    pub fn new(mut pairs: Vec<(usize, usize)>, n_u: usize, n_v: usize) -> Result<Self> {
        pairs.sort_unstable();
        let mut seen_v = vec![false; n_v];
        for (i, &(u, v)) in pairs.iter().enumerate() {
            if u >= n_u || v >= n_v {
                return Err(Error::Shape(format!("pair ({u}, {v}) outside {n_u}x{n_v}")));
            }
            if i > 0 && pairs[i - 1].0 == u {
                return Err(Error::Domain(format!("left user {u} mapped twice")));
            }
            if std::mem::replace(&mut seen_v[v], true) {
                return Err(Error::Domain(format!("right user {v} mapped twice")));
            }
        }
        Ok(PartialMapping { pairs, n_u, n_v })
    }

    /// `u ↦ u` for every `u < n_u`.
    pub fn identity(n_u: usize, n_v: usize) -> Result<Self> {
        Self::new((0..n_u).map(|u| (u, u)).collect(), n_u, n_v)
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn n_u(&self) -> usize {
        self.n_u
    }

    pub fn n_v(&self) -> usize {
        self.n_v
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn image(&self, u: usize) -> Option<usize> {
        self.pairs
            .binary_search_by_key(&u, |p| p.0)
            .ok()
            .map(|i| self.pairs[i].1)
    }

    pub fn contains(&self, u: usize, v: usize) -> bool {
        self.image(u) == Some(v)
    }

    /// `lookup[u]` is the image of `u`, if any.
    pub fn lookup(&self) -> Vec<Option<usize>> {
        let mut out = vec![None; self.n_u];
        for &(u, v) in &self.pairs {
            out[u] = Some(v);
        }
        out
    }
}

/// Uniform injective partial map of the given size.
pub fn sample_mapping(n_u: usize, n_v: usize, size: usize, seed: Seed) -> Result<PartialMapping> {
    if size > n_u.min(n_v) {
        return Err(Error::Size { size, n_u, n_v });
    }
    let mut rng = seed.rng();
    let mut us: Vec<usize> = (0..n_u).collect();
    let mut vs: Vec<usize> = (0..n_v).collect();
    let (us, _) = us.partial_shuffle(&mut rng, size);
    let (vs, _) = vs.partial_shuffle(&mut rng, size);
    PartialMapping::new(us.iter().copied().zip(vs.iter().copied()).collect(), n_u, n_v)
}

/// Canonical-form feature matrices, one row per user.
#[derive(Debug, Clone, PartialEq)]
pub struct DatabasePair<T> {
    pub a: Array2<T>,
    pub b: Array2<T>,
}

fn normal<T: Real, R: Rng>(rng: &mut R) -> T {
    T::lit(rng.sample::<f64, _>(StandardNormal))
}

fn check_mapping(mapping: &PartialMapping, n_u: usize, n_v: usize) -> Result<()> {
    if mapping.n_u() != n_u || mapping.n_v() != n_v {
        return Err(Error::Shape(format!(
            "mapping over {}x{} used for {n_u}x{n_v}",
            mapping.n_u(),
            mapping.n_v()
        )));
    }
    Ok(())
}

/// Independent standard normal features, except that matched rows satisfy
/// `b = ρ a + √(1-ρ²) z` coordinatewise.
pub fn sample_database_pair<T: Real>(
    rho: &[T],
    mapping: &PartialMapping,
    n_u: usize,
    n_v: usize,
    seed: Seed,
) -> Result<DatabasePair<T>> {
    check_mapping(mapping, n_u, n_v)?;
    if let Some(r) = rho.iter().find(|r| !(r.abs() <= T::one())) {
        return Err(Error::Domain(format!("correlation {r} outside [-1, 1]")));
    }
    let d = rho.len();
    let mut rng = seed.rng();
    let a = Array2::from_shape_simple_fn((n_u, d), || normal::<T, _>(&mut rng));
    let mut b = Array2::from_shape_simple_fn((n_v, d), || normal::<T, _>(&mut rng));
    for &(u, v) in mapping.pairs() {
        for i in 0..d {
            let r = rho[i].wide();
            let mixed = r * a[[u, i]].wide() + (1.0 - r * r).sqrt() * b[[v, i]].wide();
            b[[v, i]] = T::lit(mixed);
        }
    }
    Ok(DatabasePair { a, b })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedInstance<T> {
    pub w: Array2<T>,
    pub mu: T,
    pub truth: PartialMapping,
}

/// Unit-variance Gaussian weights, shifted by `mu` on the planted pairs.
pub fn sample_planted<T: Real>(
    mu: T,
    mapping: &PartialMapping,
    n_u: usize,
    n_v: usize,
    seed: Seed,
) -> Result<PlantedInstance<T>> {
    if !(mu > T::zero()) || !mu.is_finite() {
        return Err(Error::Domain(format!("planted mean {mu} must be positive")));
    }
    check_mapping(mapping, n_u, n_v)?;
    let mut rng = seed.rng();
    let mut w = Array2::from_shape_simple_fn((n_u, n_v), || normal::<T, _>(&mut rng));
    for &(u, v) in mapping.pairs() {
        w[[u, v]] += mu;
    }
    Ok(PlantedInstance {
        w,
        mu,
        truth: mapping.clone(),
    })
}

/// Writes `matrix <rows> <cols>` followed by one whitespace-separated line per
/// row. Values use the shortest representation that parses back exactly.
pub fn write_matrix<T: Real, W: Write>(out: &mut W, m: &Array2<T>) -> Result<()> {
    writeln!(out, "matrix {} {}", m.nrows(), m.ncols())?;
    for row in m.outer_iter() {
        let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

pub fn read_matrix<T: Real, R: BufRead>(input: R) -> Result<Array2<T>> {
    let mut lines = input.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty input".into()))??;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let dims: Option<(usize, usize)> = match fields.as_slice() {
        ["matrix", r, c] => r.parse().ok().zip(c.parse().ok()),
        _ => None,
    };
    let (rows, cols) = dims.ok_or_else(|| Error::Parse(format!("bad header {header:?}")))?;
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows {
        let line = lines.next().ok_or_else(|| Error::Parse("missing row".into()))??;
        let before = data.len();
        for tok in line.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| Error::Parse(format!("bad number {tok:?}")))?;
            data.push(T::lit(v));
        }
        if data.len() - before != cols {
            return Err(Error::Parse(format!(
                "row has {} values, expected {cols}",
                data.len() - before
            )));
        }
    }
    Array2::from_shape_vec((rows, cols), data).map_err(|e| Error::Parse(e.to_string()))
}
