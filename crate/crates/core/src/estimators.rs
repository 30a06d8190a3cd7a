//! Maximum-likelihood assignment, max-row and threshold estimators, and an
//! exhaustive ML oracle for small instances.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;
use crate::score::ScoreMatrix;
use crate::synth::PartialMapping;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Ml,
    MaxRow,
    Threshold,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Ml, Algorithm::MaxRow, Algorithm::Threshold];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Ml => "ml",
            Algorithm::MaxRow => "max-row",
            Algorithm::Threshold => "threshold",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ml" => Ok(Algorithm::Ml),
            "max-row" | "maxrow" => Ok(Algorithm::MaxRow),
            "threshold" => Ok(Algorithm::Threshold),
            other => Err(Error::Parse(format!("unknown algorithm {other:?}"))),
        }
    }
}

/// Estimated pairs with the score they collect.
///
/// `ml` output is injective on both sides; `max-row` gives one pair per row
/// with repeats allowed on the right; `threshold` is an arbitrary relation.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentEstimate<T> {
    pub kind: Algorithm,
    pub pairs: Vec<(usize, usize)>,
    pub objective: T,
    pub n_u: usize,
    pub n_v: usize,
}

impl<T: Real> AlignmentEstimate<T> {
    fn collect(kind: Algorithm, s: &ScoreMatrix<T>, pairs: Vec<(usize, usize)>) -> Self {
        let objective: f64 = pairs.iter().map(|&(u, v)| s.s[[u, v]].wide()).sum();
        AlignmentEstimate {
            kind,
            pairs,
            objective: T::lit(objective),
            n_u: s.n_u(),
            n_v: s.n_v(),
        }
    }

    /// The estimate as an injective mapping; fails for relations that reuse a
    /// user on either side.
    pub fn to_mapping(&self) -> Result<PartialMapping> {
        PartialMapping::new(self.pairs.clone(), self.n_u, self.n_v)
    }
}

/// Best injective assignment of every row, by shortest augmenting paths with
/// dual potentials. Rows are added one at a time against all columns, which
/// handles `n_u < n_v` directly in `O(n_u² n_v)`.
pub fn max_likelihood<T: Real>(s: &ScoreMatrix<T>, size: usize) -> Result<AlignmentEstimate<T>> {
    let (n, m) = (s.n_u(), s.n_v());
    if size != n || n > m {
        return Err(Error::Shape(format!(
            "ml needs size = n_u <= n_v, got size {size} on {n}x{m}"
        )));
    }
    let cost = |i: usize, j: usize| -s.s[[i - 1, j - 1]].wide();
    let mut row_pot = vec![0.0f64; n + 1];
    let mut col_pot = vec![0.0f64; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    let mut minv = vec![0.0f64; m + 1];
    let mut used = vec![false; m + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        minv.iter_mut().for_each(|x| *x = f64::INFINITY);
        used.iter_mut().for_each(|x| *x = false);
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let reduced = cost(i0, j) - row_pot[i0] - col_pot[j];
                if reduced < minv[j] {
                    minv[j] = reduced;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    row_pot[owner[j]] += delta;
                    col_pot[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut pairs: Vec<(usize, usize)> = (1..=m)
        .filter(|&j| owner[j] != 0)
        .map(|j| (owner[j] - 1, j - 1))
        .collect();
    pairs.sort_unstable();
    Ok(AlignmentEstimate::collect(Algorithm::Ml, s, pairs))
}

/// Each row paired with its best column; ties go to the smaller column.
pub fn max_row<T: Real>(s: &ScoreMatrix<T>) -> AlignmentEstimate<T> {
    let pairs =
        s.s.outer_iter()
            .enumerate()
            .filter_map(|(u, row)| {
                let mut best: Option<(usize, T)> = None;
                for (v, &x) in row.iter().enumerate() {
                    if best.is_none_or(|(_, b)| x > b) {
                        best = Some((v, x));
                    }
                }
                best.map(|(v, _)| (u, v))
            })
            .collect();
    AlignmentEstimate::collect(Algorithm::MaxRow, s, pairs)
}

/// Every pair scoring strictly above `tau`.
pub fn threshold_test<T: Real>(s: &ScoreMatrix<T>, tau: T) -> AlignmentEstimate<T> {
    let pairs = s.s.indexed_iter().filter(|(_, &x)| x > tau).map(|(p, _)| p).collect();
    AlignmentEstimate::collect(Algorithm::Threshold, s, pairs)
}

/// `log(n_u n_v / size)`, the threshold that balances the two error kinds.
pub fn default_threshold(n_u: usize, n_v: usize, size: usize) -> Result<f64> {
    if size == 0 || n_u == 0 || n_v == 0 {
        return Err(Error::Domain(format!("threshold undefined for ({n_u}, {n_v}, {size})")));
    }
    Ok((n_u as f64).ln() + (n_v as f64).ln() - (size as f64).ln())
}

pub const BRUTE_FORCE_MAX_ROWS: usize = 8;
pub const BRUTE_FORCE_MAX_COLS: usize = 10;

/// Exhaustive search over injective full maps of the rows. The first optimum
/// in lexicographic order wins.
pub fn brute_force_ml<T: Real>(s: &ScoreMatrix<T>, size: usize) -> Result<AlignmentEstimate<T>> {
    let (n, m) = (s.n_u(), s.n_v());
    if n > BRUTE_FORCE_MAX_ROWS || m > BRUTE_FORCE_MAX_COLS {
        return Err(Error::TooLarge(format!(
            "{n}x{m} exceeds {BRUTE_FORCE_MAX_ROWS}x{BRUTE_FORCE_MAX_COLS}"
        )));
    }
    if size != n || n > m {
        return Err(Error::Shape(format!(
            "ml needs size = n_u <= n_v, got size {size} on {n}x{m}"
        )));
    }
    struct Search<'a> {
        w: &'a [Vec<f64>],
        current: Vec<usize>,
        best: Option<(f64, Vec<usize>)>,
    }
    impl Search<'_> {
        fn go(&mut self, row: usize, used: u32) {
            if row == self.w.len() {
                // same summation order as `AlignmentEstimate::collect`
                let total: f64 = self.current.iter().enumerate().map(|(u, &v)| self.w[u][v]).sum();
                if self.best.as_ref().is_none_or(|(b, _)| total > *b) {
                    self.best = Some((total, self.current.clone()));
                }
                return;
            }
            for v in 0..self.w[row].len() {
                if used & (1 << v) == 0 {
                    self.current.push(v);
                    self.go(row + 1, used | (1 << v));
                    self.current.pop();
                }
            }
        }
    }
    let w: Vec<Vec<f64>> = s.s.outer_iter().map(|r| r.iter().map(|x| x.wide()).collect()).collect();
    let mut search = Search {
        w: &w,
        current: Vec::with_capacity(n),
        best: None,
    };
    search.go(0, 0);
    let (_, cols) = search.best.unwrap_or_default();
    let pairs = cols.into_iter().enumerate().collect();
    Ok(AlignmentEstimate::collect(Algorithm::Ml, s, pairs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Seed;
    use ndarray::{array, Array2};
    use proptest::prelude::*;
    use rand::Rng;

    fn sm(a: Array2<f64>) -> ScoreMatrix<f64> {
        ScoreMatrix::custom(a).unwrap()
    }

    #[test]
    fn ml_small_cases() {
        let e = max_likelihood(&sm(array![[5.0]]), 1).unwrap();
        assert_eq!((e.pairs.clone(), e.objective), (vec![(0, 0)], 5.0));
        let e = max_likelihood(&sm(array![[2.0, 1.0], [1.0, 2.0]]), 2).unwrap();
        assert_eq!((e.pairs.clone(), e.objective), (vec![(0, 0), (1, 1)], 4.0));
        let e = max_likelihood(&sm(array![[0.0, 3.0], [3.0, 0.0]]), 2).unwrap();
        assert_eq!((e.pairs.clone(), e.objective), (vec![(0, 1), (1, 0)], 6.0));
        assert!(matches!(
            max_likelihood(&sm(array![[1.0], [2.0]]), 2),
            Err(Error::Shape(_))
        ));
        assert!(max_likelihood(&sm(array![[1.0, 2.0]]), 0).is_err());
        let e = max_likelihood(&sm(Array2::zeros((0, 3))), 0).unwrap();
        assert!(e.pairs.is_empty());
    }

    #[test]
    fn ml_rectangular_prefers_free_column() {
        let e = max_likelihood(&sm(array![[1.0, 5.0, 0.0], [0.0, 4.0, 3.5]]), 2).unwrap();
        assert_eq!(e.pairs, vec![(0, 1), (1, 2)]);
        assert_eq!(e.objective, 8.5);
    }

    #[test]
    fn max_row_cases() {
        assert_eq!(max_row(&sm(array![[0.0, 3.0], [3.0, 0.0]])).pairs, vec![(0, 1), (1, 0)]);
        assert_eq!(max_row(&sm(array![[1.0, 1.0]])).pairs, vec![(0, 0)]);
        assert_eq!(max_row(&sm(array![[5.0, 0.0], [5.0, 0.0]])).pairs, vec![(0, 0), (1, 0)]);
    }

    #[test]
    fn threshold_cases() {
        let s = sm(array![[2.0, -1.0], [-3.0, 4.0]]);
        assert!(threshold_test(&s, 4.0).pairs.is_empty());
        assert_eq!(threshold_test(&s, 0.0).pairs, vec![(0, 0), (1, 1)]);
        assert!((default_threshold(100, 100, 100).unwrap() - 4.6051702).abs() < 1e-7);
        assert!((default_threshold(100, 1000, 100).unwrap() - 6.9077553).abs() < 1e-7);
        assert!((default_threshold(37, 37, 37).unwrap() - 37f64.ln()).abs() < 1e-12);
        assert!(default_threshold(3, 3, 0).is_err());
    }

    #[test]
    fn brute_force_agrees_on_random_six_by_eight() {
        for t in 0..200 {
            let mut rng = Seed::new(31).child(t).rng();
            let s = sm(Array2::from_shape_simple_fn((6, 8), || rng.random_range(-3.0..3.0)));
            let a = max_likelihood(&s, 6).unwrap();
            let b = brute_force_ml(&s, 6).unwrap();
            assert!((a.objective - b.objective).abs() <= 1e-9);
        }
        assert!(matches!(
            brute_force_ml(&sm(Array2::zeros((9, 9))), 9),
            Err(Error::TooLarge(_))
        ));
        let one = brute_force_ml(&sm(array![[-2.0]]), 1).unwrap();
        assert_eq!(one.pairs, vec![(0, 0)]);
    }

    #[test]
    fn single_precision_scores() {
        let s = ScoreMatrix::<f32>::custom(array![[0.0f32, 3.0], [3.0, 0.0]]).unwrap();
        assert_eq!(max_likelihood(&s, 2).unwrap().pairs, vec![(0, 1), (1, 0)]);
    }

    fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Array2<f64>> {
        proptest::collection::vec(-10.0f64..10.0, rows * cols)
            .prop_map(move |v| Array2::from_shape_vec((rows, cols), v).unwrap())
    }

    fn shapes() -> impl Strategy<Value = Array2<f64>> {
        (1usize..6, 0usize..4).prop_flat_map(|(n, extra)| matrix(n, n + extra))
    }

    proptest! {
        #[test]
        fn ml_matches_oracle(a in shapes()) {
            let s = sm(a);
            let n = s.n_u();
            let fast = max_likelihood(&s, n).unwrap();
            let slow = brute_force_ml(&s, n).unwrap();
            prop_assert!((fast.objective - slow.objective).abs() <= 1e-9);
            prop_assert!(fast.to_mapping().is_ok());
            prop_assert_eq!(fast.pairs.len(), n);
        }

        #[test]
        fn relaxation_never_scores_lower(a in shapes()) {
            let s = sm(a);
            let ml = max_likelihood(&s, s.n_u()).unwrap();
            let mr = max_row(&s);
            prop_assert!(mr.objective >= ml.objective - 1e-9);
            for &(u, v) in &mr.pairs {
                prop_assert!(s.s.row(u).iter().all(|&x| x <= s.s[[u, v]]));
            }
        }

        #[test]
        fn ml_argmax_is_shift_invariant(a in shapes(), c in -50i32..50) {
            let s = sm(a.clone());
            let shifted = sm(a.mapv(|x| x + c as f64));
            let n = s.n_u();
            prop_assert_eq!(max_likelihood(&s, n).unwrap().pairs, max_likelihood(&shifted, n).unwrap().pairs);
        }

        #[test]
        fn threshold_is_monotone(a in shapes(), t1 in -10.0f64..10.0, gap in 0.0f64..5.0) {
            let s = sm(a);
            let low = threshold_test(&s, t1).pairs;
            let high = threshold_test(&s, t1 + gap).pairs;
            prop_assert!(high.iter().all(|p| low.contains(p)));
        }
    }
}
