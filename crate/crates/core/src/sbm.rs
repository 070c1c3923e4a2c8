//! Stochastic blockmodel parameterization, simulation and edge budgets.

use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::pairs::{pair_count, PairSet};
use crate::rng::{rng_from_seed, SeededRng};

/// Tolerance on `sum(pi) == 1`.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// `(K, B, pi)`: block connectivity matrix and block assignment probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockModel {
    b: DMatrix<f64>,
    pi: Vec<f64>,
}

impl BlockModel {
    /// Validates and wraps `(B, pi)`.
    pub fn new(b: DMatrix<f64>, pi: Vec<f64>) -> Result<Self> {
        let k = b.nrows();
        if k == 0 {
            return Err(Error::TooFewValues { required: 1, found: 0 });
        }
        if b.ncols() != k {
            return Err(Error::DimensionMismatch { expected: k, found: b.ncols() });
        }
        if pi.len() != k {
            return Err(Error::DimensionMismatch { expected: k, found: pi.len() });
        }
        for r in 0..k {
            for c in 0..k {
                let v = b[(r, c)];
                if !(v > 0.0 && v < 1.0) {
                    return Err(Error::EntryOutOfRange { row: r, col: c, value: v });
                }
                if c > r && b[(c, r)] != v {
                    return Err(Error::AsymmetricB { row: r, col: c });
                }
            }
        }
        for (i, &p) in pi.iter().enumerate() {
            if !(p > 0.0 && p < 1.0) && !(k == 1 && p == 1.0) {
                return Err(Error::PiNotSimplex { index: Some(i), value: p });
            }
        }
        let total: f64 = pi.iter().sum();
        if libm::fabs(total - 1.0) > SIMPLEX_TOL {
            return Err(Error::PiNotSimplex { index: None, value: total });
        }
        Ok(BlockModel { b, pi })
    }

    pub fn k(&self) -> usize {
        self.pi.len()
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    /// Same assignment probabilities with a different connectivity matrix.
    pub fn with_b(&self, b: DMatrix<f64>) -> Result<Self> {
        BlockModel::new(b, self.pi.clone())
    }

    /// `(pB, pi)`.
    pub fn scaled(&self, p: f64) -> Result<Self> {
        self.with_b(&self.b * p)
    }
}

/// Validating constructor.
pub fn make_block_model(b: DMatrix<f64>, pi: Vec<f64>) -> Result<BlockModel> {
    BlockModel::new(b, pi)
}

/// An undirected simple graph with optional 0-based block labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedGraph {
    edges: PairSet,
    labels: Option<Vec<usize>>,
}

impl ObservedGraph {
    pub fn new(edges: PairSet, labels: Option<Vec<usize>>) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != edges.vertex_count() {
                return Err(Error::DimensionMismatch { expected: edges.vertex_count(), found: l.len() });
            }
        }
        Ok(ObservedGraph { edges, labels })
    }

    pub fn from_edges<I: IntoIterator<Item = (usize, usize)>>(n: usize, edges: I) -> Self {
        ObservedGraph { edges: PairSet::from_pairs(n, edges), labels: None }
    }

    pub fn n(&self) -> usize {
        self.edges.vertex_count()
    }

    pub fn edges(&self) -> &PairSet {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn without_labels(&self) -> ObservedGraph {
        ObservedGraph { edges: self.edges.clone(), labels: None }
    }
}

/// Draw `(A, tau)` from `SBM(n, B, pi)`. Labels are 0-based.
pub fn sample_sbm(model: &BlockModel, n: usize, seed: u64) -> Result<(ObservedGraph, Vec<usize>)> {
    let k = model.k();
    if n < k.max(2) {
        return Err(Error::TooFewVertices { n, required: k.max(2) });
    }
    let mut rng = rng_from_seed(seed);
    let cumulative: Vec<f64> = model
        .pi()
        .iter()
        .scan(0.0, |acc, &p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    let tau: Vec<usize> = (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            cumulative.iter().position(|&c| u < c).unwrap_or(k - 1)
        })
        .collect();
    let mut edges = PairSet::empty(n);
    let b = model.b();
    let mut idx = 0;
    for i in 0..n {
        let bi = tau[i];
        for j in i + 1..n {
            let u: f64 = rng.random();
            if u < b[(bi, tau[j])] {
                edges.insert_index(idx);
            }
            idx += 1;
        }
    }
    Ok((ObservedGraph { edges, labels: Some(tau.clone()) }, tau))
}

/// The potential edge set `E`: every unordered pair `i < j`.
pub fn potential_edge_set(n: usize) -> Result<PairSet> {
    if n < 2 {
        return Err(Error::TooFewVertices { n, required: 2 });
    }
    Ok(PairSet::full(n))
}

/// Uniform without-replacement subset of `count` pairs from `pool`.
pub fn sample_edge_subset(pool: &PairSet, count: usize, seed: u64) -> Result<PairSet> {
    let mut rng = rng_from_seed(seed);
    sample_pool(pool, count, &mut rng)
}

/// Pairs of `graph` that were purchased in `kept`.
pub fn restrict_graph(graph: &ObservedGraph, kept: &PairSet) -> ObservedGraph {
    ObservedGraph { edges: graph.edges.intersection(kept), labels: graph.labels.clone() }
}

/// Round half away from zero, as a count.
pub fn round_count(x: f64) -> usize {
    libm::round(x).max(0.0) as usize
}

pub(crate) fn sample_pool(pool: &PairSet, count: usize, rng: &mut SeededRng) -> Result<PairSet> {
    let n = pool.vertex_count();
    if count > pool.len() {
        return Err(Error::CountExceedsPool { count, pool: pool.len() });
    }
    let universe = pool.universe();
    if count == pool.len() {
        return Ok(pool.clone());
    }
    // Sparse pools: rejection over the universe would waste draws.
    if pool.len() * 16 < universe {
        let members: Vec<usize> = pool.iter_indices().collect();
        let mut out = PairSet::empty(n);
        for k in index::sample(rng, members.len(), count) {
            out.insert_index(members[k]);
        }
        return Ok(out);
    }
    Ok(rejection_subset(
        n,
        pool.len(),
        count,
        rng,
        |rng| rng.random_range(0..universe),
        |idx| pool.contains_index(idx),
        |emit| pool.iter_indices().for_each(emit),
    ))
}

/// Uniform `count`-subset of an eligible pair population of size `available`.
///
/// `draw` proposes pair indices uniformly from a superset of the population
/// and `eligible` filters them. For `count > available / 2` the complement is
/// drawn instead and the population is enumerated with `enumerate`.
pub(crate) fn rejection_subset<D, F, E>(
    n: usize,
    available: usize,
    count: usize,
    rng: &mut SeededRng,
    mut draw: D,
    eligible: F,
    enumerate: E,
) -> PairSet
where
    D: FnMut(&mut SeededRng) -> usize,
    F: Fn(usize) -> bool,
    E: FnOnce(&mut dyn FnMut(usize)),
{
    debug_assert!(count <= available);
    let mut picked = PairSet::empty(n);
    let target = if count * 2 <= available { count } else { available - count };
    while picked.len() < target {
        let idx = draw(rng);
        if eligible(idx) {
            picked.insert_index(idx);
        }
    }
    if target == count {
        return picked;
    }
    let mut out = PairSet::empty(n);
    enumerate(&mut |idx| {
        if !picked.contains_index(idx) {
            out.insert_index(idx);
        }
    });
    debug_assert_eq!(out.len(), count);
    out
}

/// Sets of pairs purchased by a sampling run.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeBudget {
    /// Initial uniform sample.
    pub e0: PairSet,
    /// Dynamic sample.
    pub e1: PairSet,
    /// Uniform remainder (Chernoff-optimal scheme only).
    pub e11: PairSet,
    pub p0: f64,
    pub p1: f64,
}

impl EdgeBudget {
    pub fn n(&self) -> usize {
        self.e0.vertex_count()
    }

    /// `|E|`.
    pub fn potential(&self) -> usize {
        pair_count(self.n())
    }

    pub fn observed(&self) -> PairSet {
        let mut all = self.e0.union(&self.e1);
        all.union_with(&self.e11);
        all
    }

    pub fn spent(&self) -> usize {
        self.e0.len() + self.e1.len() + self.e11.len()
    }

    pub fn increment(&self) -> usize {
        self.e1.len() + self.e11.len()
    }

    pub fn is_disjoint(&self) -> bool {
        self.e0.is_disjoint(&self.e1) && self.e0.is_disjoint(&self.e11) && self.e1.is_disjoint(&self.e11)
    }
}

/// `E0`: `round(p0 |E|)` pairs drawn uniformly from all pairs.
pub fn initial_sample(n: usize, p0: f64, seed: u64) -> Result<PairSet> {
    if !(p0 > 0.0 && p0 < 1.0) {
        return Err(Error::InvalidParameter { name: "p0", value: p0 });
    }
    let all = potential_edge_set(n)?;
    sample_edge_subset(&all, round_count(p0 * all.len() as f64), seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    pub(crate) fn example_b() -> DMatrix<f64> {
        let nu = [0.2, 0.4, 0.5, 0.9];
        DMatrix::from_fn(4, 4, |i, j| nu[i] * nu[j])
    }

    #[test]
    fn example_model_is_valid() {
        let m = make_block_model(example_b(), vec![0.25; 4]).unwrap();
        assert_eq!(m.k(), 4);
        assert!((m.b()[(0, 3)] - 0.18).abs() < 1e-15);
    }

    #[test]
    fn zero_entry_rejected() {
        let mut b = example_b();
        b[(0, 1)] = 0.0;
        b[(1, 0)] = 0.0;
        assert_eq!(make_block_model(b, vec![0.25; 4]), Err(Error::EntryOutOfRange { row: 0, col: 1, value: 0.0 }));
    }

    #[test]
    fn asymmetric_rejected() {
        let b = DMatrix::from_row_slice(2, 2, &[0.5, 0.2, 0.3, 0.5]);
        assert_eq!(make_block_model(b, vec![0.5, 0.5]), Err(Error::AsymmetricB { row: 0, col: 1 }));
    }

    #[test]
    fn pi_must_be_simplex() {
        let b = DMatrix::from_element(2, 2, 0.3);
        assert!(matches!(make_block_model(b.clone(), vec![0.5, 0.6]), Err(Error::PiNotSimplex { index: None, .. })));
        assert!(matches!(make_block_model(b, vec![1.0, 0.0]), Err(Error::PiNotSimplex { index: Some(0), .. })));
    }

    #[test]
    fn potential_sets() {
        assert_eq!(potential_edge_set(3).unwrap().iter().collect::<Vec<_>>(), [(0, 1), (0, 2), (1, 2)]);
        assert_eq!(potential_edge_set(2).unwrap().iter().collect::<Vec<_>>(), [(0, 1)]);
        assert_eq!(potential_edge_set(100).unwrap().len(), 4950);
        assert!(potential_edge_set(1).is_err());
    }

    #[test]
    fn subset_edge_cases() {
        let all = potential_edge_set(100).unwrap();
        assert!(sample_edge_subset(&all, 0, 1).unwrap().is_empty());
        let pool =
            PairSet::from_pairs(5, [(0, 1), (0, 2), (0, 3), (0, 4), (1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4)]);
        assert_eq!(sample_edge_subset(&pool, 10, 3).unwrap(), pool);
        assert_eq!(sample_edge_subset(&pool, 11, 3), Err(Error::CountExceedsPool { count: 11, pool: 10 }));
    }

    #[test]
    fn subset_sizes_and_membership_every_branch() {
        let all = potential_edge_set(60).unwrap();
        let half = sample_edge_subset(&all, all.len() / 2, 9).unwrap();
        let sparse = sample_edge_subset(&all, 40, 9).unwrap();
        for count in [0, 1, 17, 40, half.len() / 2 + 3, half.len() - 1] {
            let s = sample_edge_subset(&half, count, 11).unwrap();
            assert_eq!(s.len(), count);
            assert!(s.is_subset(&half));
        }
        for count in [0, 5, 39] {
            let s = sample_edge_subset(&sparse, count, 11).unwrap();
            assert_eq!(s.len(), count);
            assert!(s.is_subset(&sparse));
        }
    }

    #[test]
    fn restrict_examples() {
        let g = ObservedGraph::from_edges(3, [(0, 1), (1, 2)]);
        let kept = PairSet::from_pairs(3, [(1, 2), (0, 2)]);
        assert_eq!(restrict_graph(&g, &kept).edges().iter().collect::<Vec<_>>(), [(1, 2)]);
        assert_eq!(restrict_graph(&g, &PairSet::full(3)), g);
        assert_eq!(restrict_graph(&g, &PairSet::empty(3)).edge_count(), 0);
    }

    #[test]
    fn rounding_is_half_away_from_zero() {
        assert_eq!(round_count(2.5), 3);
        assert_eq!(round_count(3.5), 4);
        assert_eq!(round_count(0.49), 0);
    }
}
