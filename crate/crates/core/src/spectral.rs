//! Adjacency spectral embedding, scree-plot elbows and block-model latent positions.

use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::eigen::{fix_sign, top_eigenpairs, top_eigenpairs_mixed, CsrAdjacency, EigenOptions, EigenPairs};
use crate::error::{Error, Result};
use crate::sbm::{BlockModel, ObservedGraph};

/// Eigenvalues with magnitude at or below this are treated as zero.
pub const ZERO_EIGENVALUE: f64 = 1e-10;

/// Counts of positive and negative eigenvalues retained; defines `I_{d+ d-}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Signature {
    pub positive: usize,
    pub negative: usize,
}

impl Signature {
    pub fn dim(&self) -> usize {
        self.positive + self.negative
    }

    /// Diagonal entry `i` of `I_{d+ d-}`.
    pub fn sign(&self, i: usize) -> f64 {
        if i < self.positive {
            1.0
        } else {
            -1.0
        }
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim(), self.dim(), |i, j| if i == j { self.sign(i) } else { 0.0 })
    }

    /// `x^T I_{d+ d-} y`.
    pub fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter().zip(y).enumerate().map(|(i, (a, b))| self.sign(i) * a * b).sum()
    }
}

/// Rows are latent-position estimates, columns ordered by descending `|lambda|`.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub coords: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
    pub signature: Signature,
    /// Zero eigenvalues removed from the requested dimension.
    pub dropped_zero: usize,
}

impl Embedding {
    pub fn dim(&self) -> usize {
        self.coords.ncols()
    }

    /// Same coordinates with the columns permuted so positive-eigenvalue
    /// directions come first, matching `I_{d+ d-}`.
    pub fn signature_ordered(&self) -> DMatrix<f64> {
        let order = signature_order(&self.eigenvalues);
        self.coords.select_columns(&order)
    }
}

/// Column order putting positive eigenvalues first, each group by descending magnitude.
pub fn signature_order(values: &[f64]) -> Vec<usize> {
    let mut pos: Vec<usize> = (0..values.len()).filter(|&i| values[i] > 0.0).collect();
    let neg: Vec<usize> = (0..values.len()).filter(|&i| values[i] < 0.0).collect();
    pos.extend(neg);
    pos
}

/// Latent positions `nu` (K x d) with `nu I nu^T = B`; columns ordered positive first.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentConfig {
    pub nu: DMatrix<f64>,
    pub signature: Signature,
}

impl LatentConfig {
    pub fn k(&self) -> usize {
        self.nu.nrows()
    }

    pub fn d(&self) -> usize {
        self.nu.ncols()
    }

    pub fn row(&self, k: usize) -> Vec<f64> {
        self.nu.row(k).iter().copied().collect()
    }

    /// `nu I nu^T`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.nu * self.signature.matrix() * self.nu.transpose()
    }
}

fn embedding_from_pairs(pairs: &EigenPairs, d: usize) -> Embedding {
    let n = pairs.vectors.nrows();
    let mut cols = Vec::new();
    let mut values = Vec::new();
    let mut dropped = 0;
    for c in 0..d {
        if libm::fabs(pairs.values[c]) <= ZERO_EIGENVALUE {
            dropped += 1;
        } else {
            cols.push(c);
            values.push(pairs.values[c]);
        }
    }
    let mut coords = DMatrix::zeros(n, cols.len());
    for (out, &c) in cols.iter().enumerate() {
        let scale = libm::sqrt(libm::fabs(pairs.values[c]));
        for i in 0..n {
            coords[(i, out)] = pairs.vectors[(i, c)] * scale;
        }
    }
    let positive = values.iter().filter(|v| **v > 0.0).count();
    Embedding {
        coords,
        signature: Signature { positive, negative: values.len() - positive },
        eigenvalues: values,
        dropped_zero: dropped,
    }
}

fn check_graph(graph: &ObservedGraph, d: usize) -> Result<()> {
    let n = graph.n();
    if d == 0 || d >= n {
        return Err(Error::DimensionTooLarge { d, n });
    }
    if graph.edge_count() == 0 {
        return Err(Error::EmptyGraph);
    }
    Ok(())
}

/// `X = U |S|^{1/2}` from the `d` largest-magnitude eigenpairs of the adjacency matrix.
///
/// Zero eigenvalues among the top `d` are dropped and counted in
/// [`Embedding::dropped_zero`]; if every one is zero the graph is treated as empty.
pub fn ase(graph: &ObservedGraph, d: usize, opts: &EigenOptions) -> Result<Embedding> {
    check_graph(graph, d)?;
    let adj = CsrAdjacency::from_pairs(graph.edges());
    let pairs = top_eigenpairs(&adj, d, opts)?;
    let emb = embedding_from_pairs(&pairs, d);
    if emb.dim() == 0 {
        return Err(Error::EmptyGraph);
    }
    Ok(emb)
}

/// Which scree elbow selects the embedding dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralConfig {
    /// Upper bound on the number of eigenvalues scanned; the effective bound is `min(n - 1, max_rank)`.
    pub max_rank: usize,
    /// 1 for the first elbow, 2 for the second, ...
    pub elbow: usize,
    /// Residual target for scree values beyond the retained dimension, relative to `|lambda_1|`.
    pub scree_tol: f64,
    pub eigen: EigenOptions,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        SpectralConfig { max_rank: 100, elbow: 1, scree_tol: 1e-3, eigen: EigenOptions::default() }
    }
}

/// ASE with the dimension chosen by the profile-likelihood elbow of the scree plot.
/// Returns the embedding and the scree values (`|lambda|`, descending) it was chosen from.
pub fn ase_auto(graph: &ObservedGraph, cfg: &SpectralConfig) -> Result<(Embedding, Vec<f64>)> {
    let n = graph.n();
    let rank = cfg.max_rank.min(n.saturating_sub(1)).max(1);
    check_graph(graph, 1)?;
    let adj = CsrAdjacency::from_pairs(graph.edges());
    // The leading few pairs are almost always the retained ones; refine them
    // tightly up front and fall back to a second pass if the elbow lands deeper.
    let strict_guess = rank.min(8);
    let mut pairs = top_eigenpairs_mixed(&adj, rank, strict_guess, cfg.scree_tol, &cfg.eigen)?;
    let scree: Vec<f64> = pairs.values.iter().map(|v| libm::fabs(*v)).collect();
    let d_hat = if scree.len() >= 2 { select_dimension(&scree, rank, cfg.elbow)? } else { 1 };
    if d_hat > strict_guess {
        let sharp = top_eigenpairs(&adj, d_hat, &cfg.eigen)?;
        for c in 0..d_hat {
            pairs.values[c] = sharp.values[c];
            pairs.vectors.set_column(c, &sharp.vectors.column(c));
        }
    }
    let emb = embedding_from_pairs(&pairs, d_hat);
    if emb.dim() == 0 {
        return Err(Error::EmptyGraph);
    }
    Ok((emb, scree))
}

/// Profile log-likelihood of splitting sorted values after position `q` (1-based).
///
/// Both segments are Gaussian with a shared variance estimated with
/// `p - 2` degrees of freedom (`p - 1` when the second segment is empty).
/// A zero pooled variance yields `+inf`.
pub fn profile_log_likelihood(values: &[f64], q: usize) -> f64 {
    let p = values.len();
    let (head, tail) = values.split_at(q);
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let mu1 = mean(head);
    let ss1: f64 = head.iter().map(|x| (x - mu1) * (x - mu1)).sum();
    let ss2: f64 = if tail.is_empty() {
        0.0
    } else {
        let mu2 = mean(tail);
        tail.iter().map(|x| (x - mu2) * (x - mu2)).sum()
    };
    let dof = if q < p { p - 2 } else { p - 1 };
    let var = (ss1 + ss2) / dof as f64;
    if !(var > 0.0) {
        return f64::INFINITY;
    }
    let norm = -0.5 * libm::log(2.0 * core::f64::consts::PI * var);
    (ss1 + ss2) * (-0.5 / var) + p as f64 * norm
}

fn first_elbow(values: &[f64]) -> usize {
    let mut best_q = 1;
    let mut best = f64::NEG_INFINITY;
    for q in 1..=values.len() {
        let l = profile_log_likelihood(values, q);
        if l > best {
            best = l;
            best_q = q;
        }
    }
    best_q
}

/// Successive profile-likelihood elbows of a descending scree sequence.
///
/// After an elbow at `q` the scan recurses on the values after `q`;
/// positions are reported in the original indexing (1-based).
pub fn elbows(values: &[f64], count: usize) -> Result<Vec<usize>> {
    if values.len() < 2 {
        return Err(Error::TooFewValues { required: 2, found: values.len() });
    }
    let mut out = Vec::new();
    let mut offset = 0;
    let mut rest = values;
    while out.len() < count && rest.len() >= 2 {
        let q = first_elbow(rest);
        out.push(offset + q);
        if q + 1 >= rest.len() {
            break;
        }
        offset += q;
        rest = &rest[q..];
    }
    Ok(out)
}

/// Embedding dimension from the `which`-th elbow (1-based) of the first
/// `max_rank` scree values. When fewer elbows exist the deepest one is used.
pub fn select_dimension(values: &[f64], max_rank: usize, which: usize) -> Result<usize> {
    if values.len() < 2 || max_rank < 2 {
        return Err(Error::TooFewValues { required: 2, found: values.len().min(max_rank) });
    }
    let scan = &values[..max_rank.min(values.len())];
    let found = elbows(scan, which.max(1))?;
    Ok(found.last().copied().unwrap_or(1).max(1))
}

/// `nu = U_B |S_B|^{1/2}` after dropping zero eigenvalues; positive-eigenvalue
/// columns first, each group ordered by descending magnitude.
pub fn latent_from_block_model(model: &BlockModel) -> LatentConfig {
    latent_from_matrix(model.b())
}

pub(crate) fn latent_from_matrix(b: &DMatrix<f64>) -> LatentConfig {
    let k = b.nrows();
    let eig = SymmetricEigen::new(b.clone());
    let values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let mut pos: Vec<usize> = (0..k).filter(|&i| values[i] > ZERO_EIGENVALUE).collect();
    let mut neg: Vec<usize> = (0..k).filter(|&i| values[i] < -ZERO_EIGENVALUE).collect();
    let by_mag = |a: &usize, b: &usize| {
        libm::fabs(values[*b]).partial_cmp(&libm::fabs(values[*a])).unwrap_or(core::cmp::Ordering::Equal)
    };
    pos.sort_by(by_mag);
    neg.sort_by(by_mag);
    let signature = Signature { positive: pos.len(), negative: neg.len() };
    pos.extend(neg);
    let mut nu = DMatrix::zeros(k, pos.len());
    for (c, &idx) in pos.iter().enumerate() {
        let mut col: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();
        fix_sign(&mut col);
        let scale = libm::sqrt(libm::fabs(values[idx]));
        for r in 0..k {
            nu[(r, c)] = col[r] * scale;
        }
    }
    LatentConfig { nu, signature }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pairs::PairSet;
    use crate::sbm::make_block_model;
    use alloc::vec;

    fn example_b() -> DMatrix<f64> {
        let nu = [0.2, 0.4, 0.5, 0.9];
        DMatrix::from_fn(4, 4, |i, j| nu[i] * nu[j])
    }

    #[test]
    fn elbow_examples() {
        assert_eq!(select_dimension(&[10.0, 9.5, 0.1, 0.09, 0.08], 5, 1).unwrap(), 2);
        assert_eq!(select_dimension(&[3.0; 6], 6, 1).unwrap(), 1);
        assert_eq!(select_dimension(&[100.0, 1.0, 1.0, 1.0, 1.0, 1.0], 6, 1).unwrap(), 1);
        assert!(matches!(select_dimension(&[1.0], 1, 1), Err(Error::TooFewValues { .. })));
    }

    #[test]
    fn second_elbow_is_deeper() {
        let v = [50.0, 49.0, 20.0, 19.5, 19.0, 1.0, 0.9, 0.8, 0.7, 0.6];
        let e = elbows(&v, 2).unwrap();
        assert_eq!(e[0], 2);
        assert!(e[1] > e[0]);
        assert_eq!(select_dimension(&v, 10, 2).unwrap(), e[1]);
    }

    #[test]
    fn example_block_matrix_is_rank_one() {
        let m = make_block_model(example_b(), vec![0.25; 4]).unwrap();
        let lat = latent_from_block_model(&m);
        assert_eq!(lat.signature, Signature { positive: 1, negative: 0 });
        for (got, want) in lat.nu.column(0).iter().zip([0.2, 0.4, 0.5, 0.9]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!((lat.reconstruct() - example_b()).amax() < 1e-12);
    }

    #[test]
    fn two_by_two_closed_form() {
        let b = DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.1, 0.5]);
        let m = make_block_model(b.clone(), vec![0.5, 0.5]).unwrap();
        let lat = latent_from_block_model(&m);
        assert_eq!(lat.signature, Signature { positive: 2, negative: 0 });
        assert!((lat.reconstruct() - b).amax() < 1e-10);
        // Disassortative: one negative direction.
        let b = DMatrix::from_row_slice(2, 2, &[0.1, 0.5, 0.5, 0.1]);
        let lat = latent_from_matrix(&b);
        assert_eq!(lat.signature, Signature { positive: 1, negative: 1 });
        assert!((lat.reconstruct() - b).amax() < 1e-10);
    }

    #[test]
    fn scaling_b_scales_latent_positions_by_sqrt_p() {
        let lat = latent_from_matrix(&example_b());
        let p = 0.37;
        let scaled = latent_from_matrix(&(example_b() * p));
        assert!((scaled.nu - lat.nu * libm::sqrt(p)).amax() < 1e-14);
    }

    #[test]
    fn ase_rejects_bad_inputs() {
        let g = ObservedGraph::from_edges(5, []);
        assert_eq!(ase(&g, 1, &EigenOptions::default()), Err(Error::EmptyGraph));
        let g = ObservedGraph::from_edges(5, [(0, 1)]);
        assert_eq!(ase(&g, 5, &EigenOptions::default()), Err(Error::DimensionTooLarge { d: 5, n: 5 }));
    }

    #[test]
    fn ase_of_complete_graph() {
        let n = 12;
        let g = ObservedGraph::new(PairSet::full(n), None).unwrap();
        let e = ase(&g, 1, &EigenOptions::default()).unwrap();
        let expect = libm::sqrt((n - 1) as f64) / libm::sqrt(n as f64);
        assert!(e.coords.iter().all(|x| (x - expect).abs() < 1e-10));
        assert_eq!(e.signature, Signature { positive: 1, negative: 0 });
    }
}
