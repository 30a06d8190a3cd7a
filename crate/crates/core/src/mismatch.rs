//! Error counts, the cycle/path decomposition of two matchings, and the
//! counting bounds on how many matchings sit at a given distance.

use crate::error::{Error, Result};
use crate::estimators::{Algorithm, AlignmentEstimate};
use crate::real::Real;
use crate::synth::PartialMapping;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MisalignmentKind {
    Cycle,
    EvenPath,
    OddPathPair,
}

/// One component of the disagreement between two matchings.
///
/// `size` counts the pairs of the first matching that the component disturbs.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ElementaryMisalignment {
    pub kind: MisalignmentKind,
    pub u_vertices: Vec<usize>,
    pub v_vertices: Vec<usize>,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MisalignmentReport {
    pub errors: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub components: Vec<ElementaryMisalignment>,
}

fn check_shapes(n_u: usize, n_v: usize, truth: &PartialMapping) -> Result<()> {
    if (n_u, n_v) != (truth.n_u(), truth.n_v()) {
        return Err(Error::Shape(format!(
            "estimate over {n_u}x{n_v}, truth over {}x{}",
            truth.n_u(),
            truth.n_v()
        )));
    }
    Ok(())
}

/// Misaligned users for `ml`/`max-row`, false positives plus false
/// negatives for `threshold`.
pub fn count_errors<T: Real>(est: &AlignmentEstimate<T>, truth: &PartialMapping) -> Result<MisalignmentReport> {
    check_shapes(est.n_u, est.n_v, truth)?;
    if est.kind == Algorithm::Threshold {
        let false_negatives = truth.pairs().iter().filter(|p| !est.pairs.contains(p)).count();
        let false_positives = est.pairs.iter().filter(|&&(u, v)| !truth.contains(u, v)).count();
        return Ok(MisalignmentReport {
            errors: false_positives + false_negatives,
            false_positives,
            false_negatives,
            components: Vec::new(),
        });
    }
    let mut guess = vec![None; est.n_u];
    for &(u, v) in &est.pairs {
        if u >= est.n_u || v >= est.n_v || guess[u].replace(v).is_some() {
            return Err(Error::Shape(format!(
                "estimate pair ({u}, {v}) is invalid or repeats a row"
            )));
        }
    }
    let errors = guess.iter().zip(truth.lookup()).filter(|(g, t)| **g != *t).count();
    let components = match est.to_mapping() {
        Ok(m) if m.len() == truth.len() => decompose(truth, &m)?,
        _ => Vec::new(),
    };
    Ok(MisalignmentReport {
        errors,
        components,
        ..Default::default()
    })
}

struct Walk {
    nodes: Vec<usize>,
    first: usize,
    second: usize,
    closed: bool,
}

/// Components of the symmetric difference of two equal-size matchings.
///
/// Odd paths (one more edge from one matching than the other) are paired in
/// order of their smallest left vertex. Components come out sorted by their
/// smallest left vertex.
pub fn decompose(m1: &PartialMapping, m2: &PartialMapping) -> Result<Vec<ElementaryMisalignment>> {
    if m1.len() != m2.len() {
        return Err(Error::SizeMismatch(m1.len(), m2.len()));
    }
    check_shapes(m2.n_u(), m2.n_v(), m1)?;
    let n_u = m1.n_u();
    let nodes = n_u + m1.n_v();
    // adjacency[node] = [(neighbour, from_first)]
    let mut adjacency: Vec<Vec<(usize, bool)>> = vec![Vec::new(); nodes];
    let mut add = |u: usize, v: usize, first: bool| {
        adjacency[u].push((n_u + v, first));
        adjacency[n_u + v].push((u, first));
    };
    for &(u, v) in m1.pairs().iter().filter(|&&(u, v)| !m2.contains(u, v)) {
        add(u, v, true);
    }
    for &(u, v) in m2.pairs().iter().filter(|&&(u, v)| !m1.contains(u, v)) {
        add(u, v, false);
    }
    let mut seen = vec![false; nodes];
    let mut walks = Vec::new();
    let walk_from = |start: usize, seen: &mut Vec<bool>| {
        let mut w = Walk {
            nodes: vec![start],
            first: 0,
            second: 0,
            closed: false,
        };
        seen[start] = true;
        let (mut prev, mut cur) = (usize::MAX, start);
        // neighbours are distinct because shared pairs were removed
        while let Some(&(next, first)) = adjacency[cur].iter().find(|&&(n, _)| n != prev) {
            if first {
                w.first += 1;
            } else {
                w.second += 1;
            }
            if next == start {
                w.closed = true;
                break;
            }
            seen[next] = true;
            w.nodes.push(next);
            prev = cur;
            cur = next;
        }
        w
    };
    for start in 0..nodes {
        if !seen[start] && adjacency[start].len() == 1 {
            walks.push(walk_from(start, &mut seen));
        }
    }
    for start in 0..nodes {
        if !seen[start] && adjacency[start].len() == 2 {
            walks.push(walk_from(start, &mut seen));
        }
    }
    let split = |w: &Walk| -> (Vec<usize>, Vec<usize>) {
        let mut us: Vec<usize> = w.nodes.iter().copied().filter(|&x| x < n_u).collect();
        let mut vs: Vec<usize> = w.nodes.iter().copied().filter(|&x| x >= n_u).map(|x| x - n_u).collect();
        us.sort_unstable();
        vs.sort_unstable();
        (us, vs)
    };
    let mut out = Vec::new();
    let (mut plus, mut minus) = (Vec::new(), Vec::new());
    for w in walks {
        let (us, vs) = split(&w);
        let kind = match (w.closed, w.first.cmp(&w.second)) {
            (true, _) => MisalignmentKind::Cycle,
            (false, std::cmp::Ordering::Equal) => MisalignmentKind::EvenPath,
            (false, std::cmp::Ordering::Greater) => {
                plus.push((us, vs, w.first));
                continue;
            }
            (false, std::cmp::Ordering::Less) => {
                minus.push((us, vs, w.first));
                continue;
            }
        };
        out.push(ElementaryMisalignment {
            kind,
            u_vertices: us,
            v_vertices: vs,
            size: w.first,
        });
    }
    plus.sort();
    minus.sort();
    for ((mut u1, mut v1, s1), (u2, v2, s2)) in plus.into_iter().zip(minus) {
        u1.extend(u2);
        v1.extend(v2);
        u1.sort_unstable();
        v1.sort_unstable();
        out.push(ElementaryMisalignment {
            kind: MisalignmentKind::OddPathPair,
            u_vertices: u1,
            v_vertices: v1,
            size: s1 + s2,
        });
    }
    out.sort_by(|a, b| (&a.u_vertices, a.kind).cmp(&(&b.u_vertices, b.kind)));
    Ok(out)
}

/// Upper bounds on the number of elementary misalignments of size `delta`
/// around a full matching of `n` users with `s` spare right users.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementaryCountBounds {
    /// Cycles: `n^δ/δ`, or 0 when `δ = 1`.
    pub type_i: f64,
    /// Even paths: `s n^δ`.
    pub type_ii: f64,
    /// Paired odd paths cannot occur when every left user is matched.
    pub type_iii: f64,
}

pub fn elementary_count_bounds(n: usize, s: usize, delta: usize) -> Result<ElementaryCountBounds> {
    if delta == 0 {
        return Err(Error::Domain("misalignment size must be at least 1".into()));
    }
    let power = (n as f64).powi(delta as i32);
    Ok(ElementaryCountBounds {
        type_i: if delta == 1 { 0.0 } else { power / delta as f64 },
        type_ii: s as f64 * power,
        type_iii: 0.0,
    })
}

/// Bound on the number of full matchings at misalignment size `delta`.
pub fn misalignment_count_bound(n: usize, s: usize, delta: usize, c: f64) -> Result<f64> {
    if delta == 0 || !(c > 0.0) || n == 0 {
        return Err(Error::Domain(format!(
            "need n >= 1, delta >= 1, c > 0; got {n}, {delta}, {c}"
        )));
    }
    let d = delta as f64;
    let exponent = if d >= c * s as f64 {
        d * (1.0 + (n as f64).ln() + (1.0 + 1.0 / c).ln())
    } else {
        d * (1.0 + (n as f64 * s as f64 / d).ln() + (1.0 + c).ln())
    };
    Ok(exponent.exp())
}

/// Exact tallies from enumerating every full matching of `n` users into
/// `n + s` right users, measured against the identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MisalignmentTally {
    /// Matchings whose disagreement has total size `delta`.
    pub mappings: u64,
    /// Of those, the ones forming a single cycle.
    pub type_i: u64,
    /// Of those, the ones forming a single even path.
    pub type_ii: u64,
    /// Paired-odd-path components seen among those matchings.
    pub type_iii: u64,
}

pub const ENUMERATION_LIMIT: usize = 8;

pub fn enumerate_misalignments(n: usize, s: usize, delta: usize) -> Result<MisalignmentTally> {
    if n + s > ENUMERATION_LIMIT {
        return Err(Error::TooLarge(format!(
            "n + s = {} exceeds {ENUMERATION_LIMIT}",
            n + s
        )));
    }
    let n_v = n + s;
    let truth = PartialMapping::identity(n, n_v)?;
    let mut tally = MisalignmentTally::default();
    let mut current = Vec::with_capacity(n);
    let mut visit = |images: &[usize]| -> Result<()> {
        let moved = images.iter().enumerate().filter(|(u, v)| *u != **v).count();
        if moved != delta {
            return Ok(());
        }
        let other = PartialMapping::new(images.iter().copied().enumerate().collect(), n, n_v)?;
        let parts = decompose(&truth, &other)?;
        tally.mappings += 1;
        if let [only] = parts.as_slice() {
            match only.kind {
                MisalignmentKind::Cycle => tally.type_i += 1,
                MisalignmentKind::EvenPath => tally.type_ii += 1,
                MisalignmentKind::OddPathPair => {}
            }
        }
        tally.type_iii += parts.iter().filter(|p| p.kind == MisalignmentKind::OddPathPair).count() as u64;
        Ok(())
    };
    fn injections(
        row: usize,
        n: usize,
        n_v: usize,
        used: u32,
        current: &mut Vec<usize>,
        visit: &mut dyn FnMut(&[usize]) -> Result<()>,
    ) -> Result<()> {
        if row == n {
            return visit(current);
        }
        for v in 0..n_v {
            if used & (1 << v) == 0 {
                current.push(v);
                injections(row + 1, n, n_v, used | (1 << v), current, visit)?;
                current.pop();
            }
        }
        Ok(())
    }
    injections(0, n, n_v, 0, &mut current, &mut visit)?;
    Ok(tally)
}
