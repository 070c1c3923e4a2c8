//! Truncated symmetric eigendecomposition.
//!
//! Small problems go through a dense solver. Larger ones use a thick-restart
//! Lanczos iteration with full reorthogonalization that targets the
//! eigenpairs of largest magnitude, which is what adjacency spectral
//! embedding needs from both ends of the spectrum.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;

use crate::error::{Error, Result};
use crate::pairs::PairSet;
use crate::rng::rng_from_seed;

/// A real symmetric linear operator.
pub trait SymmetricOperator {
    fn dim(&self) -> usize;
    /// `y = A x`.
    fn apply(&self, x: &[f64], y: &mut [f64]);
    /// Dense copy, used by the direct solver.
    fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            self.apply(&e, &mut col);
            m.column_mut(j).copy_from_slice(&col);
            e[j] = 0.0;
        }
        m
    }
}

impl SymmetricOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = (0..self.ncols()).map(|j| self[(i, j)] * x[j]).sum();
        }
    }

    fn to_dense(&self) -> DMatrix<f64> {
        self.clone()
    }
}

/// Hollow 0/1 adjacency matrix in compressed sparse row form.
#[derive(Debug, Clone)]
pub struct CsrAdjacency {
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
}

impl CsrAdjacency {
    pub fn from_pairs(edges: &PairSet) -> Self {
        let n = edges.vertex_count();
        let deg = edges.degrees();
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &deg {
            offsets.push(offsets.last().copied().unwrap_or(0) + d);
        }
        let mut fill = offsets[..n].to_vec();
        let mut neighbors = vec![0u32; offsets[n]];
        for (i, j) in edges.iter() {
            neighbors[fill[i]] = j as u32;
            fill[i] += 1;
            neighbors[fill[j]] = i as u32;
            fill[j] += 1;
        }
        CsrAdjacency { offsets, neighbors }
    }

    pub fn nnz(&self) -> usize {
        self.neighbors.len()
    }

    /// Frobenius norm, an upper bound on the spectral norm.
    pub fn frobenius_norm(&self) -> f64 {
        libm::sqrt(self.nnz() as f64)
    }
}

impl SymmetricOperator for CsrAdjacency {
    fn dim(&self) -> usize {
        self.offsets.len() - 1
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let row = &self.neighbors[self.offsets[i]..self.offsets[i + 1]];
            *yi = row.iter().map(|&j| x[j as usize]).sum();
        }
    }
}

/// Leading eigenpairs ordered by descending `|lambda|`.
#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    /// `n x count`, unit columns; the largest-magnitude entry of each column is positive.
    pub vectors: DMatrix<f64>,
    /// `||A v - lambda v||` per pair as certified by the solver.
    pub residuals: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenOptions {
    /// Residual target relative to the largest Ritz value magnitude.
    pub tol: f64,
    /// Operators up to this size are solved densely.
    pub dense_threshold: usize,
    pub max_restarts: usize,
    /// Seed of the Lanczos start vector.
    pub seed: u64,
    /// Krylov basis size; `0` picks `max(2 count + 24, count + 32)`.
    pub basis_size: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions { tol: 1e-8, dense_threshold: 300, max_restarts: 500, seed: 0x5EED, basis_size: 0 }
    }
}

/// Top `count` eigenpairs by magnitude.
pub fn top_eigenpairs<A: SymmetricOperator + ?Sized>(op: &A, count: usize, opts: &EigenOptions) -> Result<EigenPairs> {
    let n = op.dim();
    if count == 0 || count > n {
        return Err(Error::DimensionTooLarge { d: count, n });
    }
    if n <= opts.dense_threshold || count * 3 > n {
        dense_top(op, count)
    } else {
        lanczos_top(op, count, opts)
    }
}

/// Like [`top_eigenpairs`] but only the leading `strict` pairs must meet
/// `opts.tol`; the rest only need `loose_tol`. Used for scree plots where the
/// tail values feed a dimension heuristic and only the retained pairs matter.
pub fn top_eigenpairs_mixed<A: SymmetricOperator + ?Sized>(
    op: &A,
    count: usize,
    strict: usize,
    loose_tol: f64,
    opts: &EigenOptions,
) -> Result<EigenPairs> {
    let n = op.dim();
    if count == 0 || count > n {
        return Err(Error::DimensionTooLarge { d: count, n });
    }
    if n <= opts.dense_threshold || count * 3 > n {
        return dense_top(op, count);
    }
    let loose = EigenOptions { tol: loose_tol.max(opts.tol), ..*opts };
    let mut pairs = lanczos_top(op, count, &loose)?;
    let anorm = pairs.values.first().map(|v| libm::fabs(*v)).unwrap_or(0.0);
    let strict = strict.min(count);
    if pairs.residuals[..strict].iter().any(|&r| r > opts.tol * anorm) {
        let sharp = lanczos_top(op, strict, opts)?;
        for c in 0..strict {
            pairs.values[c] = sharp.values[c];
            pairs.residuals[c] = sharp.residuals[c];
            pairs.vectors.set_column(c, &sharp.vectors.column(c));
        }
    }
    Ok(pairs)
}

fn magnitude_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        libm::fabs(values[b])
            .partial_cmp(&libm::fabs(values[a]))
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(values[b].partial_cmp(&values[a]).unwrap_or(core::cmp::Ordering::Equal))
    });
    order
}

/// Flip the column so its largest-magnitude entry (first on ties) is positive.
pub fn fix_sign(col: &mut [f64]) {
    let mut best = 0;
    for (i, v) in col.iter().enumerate() {
        if libm::fabs(*v) > libm::fabs(col[best]) {
            best = i;
        }
    }
    if col.get(best).is_some_and(|v| *v < 0.0) {
        col.iter_mut().for_each(|v| *v = -*v);
    }
}

fn dense_top<A: SymmetricOperator + ?Sized>(op: &A, count: usize) -> Result<EigenPairs> {
    let dense = op.to_dense();
    let n = dense.nrows();
    let eig = SymmetricEigen::new(dense.clone());
    let vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let order = magnitude_order(&vals);
    let mut vectors = DMatrix::zeros(n, count);
    let mut values = Vec::with_capacity(count);
    for (c, &idx) in order.iter().take(count).enumerate() {
        let mut col: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();
        fix_sign(&mut col);
        vectors.column_mut(c).copy_from_slice(&col);
        values.push(vals[idx]);
    }
    let residuals = residual_norms(op, &values, &vectors);
    Ok(EigenPairs { values, vectors, residuals })
}

/// `||A v_c - lambda_c v_c||` for every column.
pub fn residual_norms<A: SymmetricOperator + ?Sized>(op: &A, values: &[f64], vectors: &DMatrix<f64>) -> Vec<f64> {
    let n = op.dim();
    let mut y = vec![0.0; n];
    values
        .iter()
        .enumerate()
        .map(|(c, &lambda)| {
            let v = vectors.column(c);
            op.apply(v.as_slice(), &mut y);
            libm::sqrt(y.iter().zip(v.iter()).map(|(a, b)| (a - lambda * b) * (a - lambda * b)).sum())
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    acc.iter().sum::<f64>() + tail
}

fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

/// Two passes of classical Gram-Schmidt against the first `cols` columns of `basis`.
/// Returns the accumulated coefficients.
fn orthogonalize(basis: &DMatrix<f64>, cols: usize, w: &mut DVector<f64>) -> DVector<f64> {
    let mut coeffs = DVector::zeros(cols);
    if cols == 0 {
        return coeffs;
    }
    let v = basis.columns(0, cols);
    for _ in 0..2 {
        let h = DVector::from_iterator(cols, (0..cols).map(|c| dot(v.column(c).as_slice(), w.as_slice())));
        w.gemv(-1.0, &v, &h, 1.0);
        coeffs += h;
    }
    coeffs
}

fn lanczos_top<A: SymmetricOperator + ?Sized>(op: &A, want: usize, opts: &EigenOptions) -> Result<EigenPairs> {
    let n = op.dim();
    let auto = (2 * want + 24).max(want + 32);
    let m = n.min(if opts.basis_size > want + 2 { opts.basis_size } else { auto });
    let keep = (want + (m - want) / 2).min(m - 2);
    let mut rng = rng_from_seed(opts.seed);
    let mut random_unit = |basis: &DMatrix<f64>, cols: usize| -> DVector<f64> {
        loop {
            let mut v = DVector::from_iterator(n, (0..n).map(|_| rng.random::<f64>() - 0.5));
            orthogonalize(basis, cols, &mut v);
            let nv = norm(v.as_slice());
            if nv > 1e-8 {
                return v / nv;
            }
        }
    };

    let mut basis = DMatrix::<f64>::zeros(n, m);
    let v0 = random_unit(&basis, 0);
    basis.set_column(0, &v0);
    let mut h = DMatrix::<f64>::zeros(m, m);
    let mut kept = 0;
    let mut w = DVector::<f64>::zeros(n);
    let mut residual = DVector::<f64>::zeros(n);
    let mut worst = f64::INFINITY;

    for restart in 0..=opts.max_restarts {
        let mut beta_last = 0.0;
        for j in kept..m {
            op.apply(basis.column(j).as_slice(), w.as_mut_slice());
            let coeffs = orthogonalize(&basis, j + 1, &mut w);
            h[(j, j)] = coeffs[j];
            let beta = norm(w.as_slice());
            let scale = libm::fabs(h[(j, j)]).max(beta).max(1.0);
            if j + 1 < m {
                if beta <= 1e-12 * scale {
                    // Invariant subspace: continue with a fresh orthogonal direction.
                    let v = random_unit(&basis, j + 1);
                    basis.set_column(j + 1, &v);
                } else {
                    h[(j, j + 1)] = beta;
                    h[(j + 1, j)] = beta;
                    basis.set_column(j + 1, &(&w / beta));
                }
            } else {
                beta_last = beta;
                residual.copy_from(&w);
            }
        }

        let eig = SymmetricEigen::new(h.clone());
        let theta: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        let order = magnitude_order(&theta);
        let anorm = libm::fabs(theta[order[0]]);
        let res: Vec<f64> = order.iter().map(|&i| libm::fabs(beta_last * eig.eigenvectors[(m - 1, i)])).collect();
        worst = res[..want].iter().copied().fold(0.0, f64::max);
        let converged = worst <= opts.tol * anorm.max(f64::MIN_POSITIVE);

        if converged {
            let selected = eig.eigenvectors.select_columns(&order[..want]);
            let mut vectors = &basis * selected;
            let mut values = Vec::with_capacity(want);
            for c in 0..want {
                let mut col = vectors.column_mut(c);
                let nc = col.norm();
                col /= nc;
                fix_sign(col.as_mut_slice());
                values.push(theta[order[c]]);
            }
            return Ok(EigenPairs { values, vectors, residuals: res[..want].to_vec() });
        }
        if restart == opts.max_restarts {
            break;
        }

        // Thick restart: keep the leading Ritz vectors plus the residual direction.
        let selected = eig.eigenvectors.select_columns(&order[..keep]);
        let ritz = &basis * selected;
        basis.columns_mut(0, keep).copy_from(&ritz);
        h.fill(0.0);
        for (c, &idx) in order[..keep].iter().enumerate() {
            h[(c, c)] = theta[idx];
            let coupling = beta_last * eig.eigenvectors[(m - 1, idx)];
            h[(c, keep)] = coupling;
            h[(keep, c)] = coupling;
        }
        if beta_last > 1e-12 * anorm {
            basis.set_column(keep, &(&residual / beta_last));
        } else {
            for c in 0..keep {
                h[(c, keep)] = 0.0;
                h[(keep, c)] = 0.0;
            }
            let v = random_unit(&basis, keep);
            basis.set_column(keep, &v);
        }
        kept = keep;
    }
    Err(Error::EigenNotConverged { residual: worst, restarts: opts.max_restarts })
}
