//! Chernoff information of the limiting ASE block distributions and the
//! sampling-scheme algebra built on it.
//!
//! Every entry point takes `(B, pi)` and derives the latent positions itself,
//! so signature handling lives in one place.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};
use crate::sbm::BlockModel;
use crate::spectral::{latent_from_block_model, latent_from_matrix, LatentConfig};

/// Which objective is maximised over `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Statistic {
    /// `t(1-t) d^T Sigma_t^{-1} d`, free of `n`.
    Approximate,
    /// `n t(1-t) d^T Sigma_t^{-1} d / 2` plus half the log-determinant ratio.
    Exact { n: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChernoffOptions {
    /// Interior grid points `t = i / (grid + 1)`.
    pub grid: usize,
    /// Golden-section stopping width.
    pub tol: f64,
    /// Pairs within this of the minimum count as tied.
    pub tie_tol: f64,
    pub statistic: Statistic,
}

impl Default for ChernoffOptions {
    fn default() -> Self {
        ChernoffOptions { grid: 999, tol: 1e-8, tie_tol: 1e-9, statistic: Statistic::Approximate }
    }
}

/// Pairwise statistics and the minimising ("Chernoff-active") pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ChernoffReport {
    pub rho: f64,
    /// Symmetric, zero diagonal.
    pub c: DMatrix<f64>,
    /// `t_star[(k, l)]` maximises the pair objective; `t_star[(l, k)] = 1 - t_star[(k, l)]`.
    pub t_star: DMatrix<f64>,
    /// `(k, l)` with `k < l`; lexicographically first among near-ties.
    pub active: (usize, usize),
    /// Another pair lies within `tie_tol` of `rho`.
    pub tie: bool,
}

/// `Delta = sum_k pi_k nu_k nu_k^T`, checked for invertibility.
pub fn delta(latent: &LatentConfig, pi: &[f64]) -> Result<DMatrix<f64>> {
    if pi.len() != latent.k() {
        return Err(Error::DimensionMismatch { expected: latent.k(), found: pi.len() });
    }
    let nu = &latent.nu;
    let d = latent.d();
    let mut delta = DMatrix::zeros(d, d);
    for (k, &p) in pi.iter().enumerate() {
        let row = nu.row(k).transpose();
        delta += &row * row.transpose() * p;
    }
    let eig = SymmetricEigen::new(delta.clone());
    let max = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(libm::fabs(*v)));
    let min = eig.eigenvalues.iter().fold(f64::INFINITY, |m, v| m.min(*v));
    if d == 0 || !(min > 1e-12 * max) {
        return Err(Error::SingularDelta);
    }
    Ok(delta)
}

fn spd_inverse(m: DMatrix<f64>, k: usize, l: usize) -> Result<DMatrix<f64>> {
    Cholesky::new(m).map(|c| c.inverse()).ok_or(Error::SingularSigma { k, l })
}

/// Latent positions, `Delta^{-1}` and every block's limiting covariance.
#[derive(Debug, Clone)]
pub struct Limits {
    pub latent: LatentConfig,
    pub delta: DMatrix<f64>,
    pub delta_inv: DMatrix<f64>,
    pub sigma: Vec<DMatrix<f64>>,
}

impl Limits {
    pub fn new(b: &DMatrix<f64>, pi: &[f64]) -> Result<Self> {
        let latent = latent_from_matrix(b);
        Self::from_latent(latent, b, pi)
    }

    fn from_latent(latent: LatentConfig, b: &DMatrix<f64>, pi: &[f64]) -> Result<Self> {
        let delta = delta(&latent, pi)?;
        let delta_inv = spd_inverse(delta.clone(), 0, 0).map_err(|_| Error::SingularDelta)?;
        let sig = latent.signature.matrix();
        let outer = &sig * &delta_inv;
        let k = latent.k();
        let mut sigma = Vec::with_capacity(k);
        for a in 0..k {
            let mut mid = DMatrix::zeros(latent.d(), latent.d());
            for (l, &p) in pi.iter().enumerate() {
                let v = latent.nu.row(l).transpose();
                let w = p * b[(a, l)] * (1.0 - b[(a, l)]);
                mid += &v * v.transpose() * w;
            }
            sigma.push(&outer * mid * outer.transpose());
        }
        Ok(Limits { latent, delta, delta_inv, sigma })
    }

    pub fn k(&self) -> usize {
        self.sigma.len()
    }

    fn diff(&self, k: usize, l: usize) -> DVector<f64> {
        (self.latent.nu.row(k) - self.latent.nu.row(l)).transpose()
    }
}

/// `Sigma_k` for block `k` of the model.
pub fn sigma_k(model: &BlockModel, k: usize) -> Result<DMatrix<f64>> {
    if k >= model.k() {
        return Err(Error::DimensionMismatch { expected: model.k(), found: k });
    }
    let limits = Limits::new(model.b(), model.pi())?;
    Ok(limits.sigma[k].clone())
}

/// Pair objective at `t`.
fn objective(limits: &Limits, k: usize, l: usize, diff: &DVector<f64>, t: f64, stat: Statistic) -> Result<f64> {
    let st = &limits.sigma[k] * t + &limits.sigma[l] * (1.0 - t);
    let chol = Cholesky::new(st).ok_or(Error::SingularSigma { k, l })?;
    let quad = diff.dot(&chol.solve(diff));
    Ok(match stat {
        Statistic::Approximate => t * (1.0 - t) * quad,
        Statistic::Exact { n } => {
            let logdet = |m: &DMatrix<f64>| -> Result<f64> {
                let c = Cholesky::new(m.clone()).ok_or(Error::SingularSigma { k, l })?;
                Ok(2.0 * c.l().diagonal().iter().map(|x| libm::log(*x)).sum::<f64>())
            };
            let lt = 2.0 * chol.l().diagonal().iter().map(|x| libm::log(*x)).sum::<f64>();
            let lk = logdet(&limits.sigma[k])?;
            let ll = logdet(&limits.sigma[l])?;
            0.5 * n * t * (1.0 - t) * quad + 0.5 * (lt - t * lk - (1.0 - t) * ll)
        }
    })
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// `sup_t` of the pair objective: grid scan, then golden-section search in
/// the bracket around the best grid point. Returns `(value, t)`.
fn maximise(limits: &Limits, k: usize, l: usize, opts: &ChernoffOptions) -> Result<(f64, f64)> {
    let diff = limits.diff(k, l);
    let steps = opts.grid + 1;
    let h = 1.0 / steps as f64;
    let mut best = f64::NEG_INFINITY;
    let mut best_i = 1;
    for i in 1..steps {
        let v = objective(limits, k, l, &diff, i as f64 * h, opts.statistic)?;
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let mut a = (best_i - 1) as f64 * h;
    let mut b = (best_i + 1) as f64 * h;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = objective(limits, k, l, &diff, c, opts.statistic)?;
    let mut fd = objective(limits, k, l, &diff, d, opts.statistic)?;
    while b - a > opts.tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = objective(limits, k, l, &diff, c, opts.statistic)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = objective(limits, k, l, &diff, d, opts.statistic)?;
        }
    }
    let t = 0.5 * (a + b);
    let v = objective(limits, k, l, &diff, t, opts.statistic)?;
    Ok(if v >= best { (v, t) } else { (best, best_i as f64 * h) })
}

/// `C_{k,l}(B, pi)` and its maximising `t`.
pub fn chernoff_pair(model: &BlockModel, k: usize, l: usize, opts: &ChernoffOptions) -> Result<(f64, f64)> {
    if k == l || k >= model.k() || l >= model.k() {
        return Err(Error::InvalidParameter { name: "pair", value: l as f64 });
    }
    let limits = Limits::new(model.b(), model.pi())?;
    maximise(&limits, k, l, opts)
}

fn report_from_limits(limits: &Limits, opts: &ChernoffOptions) -> Result<ChernoffReport> {
    let k = limits.k();
    if k < 2 {
        return Err(Error::NoBlockPairs);
    }
    let mut c = DMatrix::zeros(k, k);
    let mut t_star = DMatrix::from_element(k, k, 0.5);
    let mut rho = f64::INFINITY;
    let mut active = (0, 1);
    for a in 0..k {
        for b in a + 1..k {
            let (v, t) = maximise(limits, a, b, opts)?;
            c[(a, b)] = v;
            c[(b, a)] = v;
            t_star[(a, b)] = t;
            t_star[(b, a)] = 1.0 - t;
            if v < rho {
                rho = v;
                active = (a, b);
            }
        }
    }
    // Lexicographically first pair within the tie tolerance; flag any other.
    let mut near = Vec::new();
    for a in 0..k {
        for b in a + 1..k {
            if c[(a, b)] - rho <= opts.tie_tol {
                near.push((a, b));
            }
        }
    }
    let active = near.first().copied().unwrap_or(active);
    Ok(ChernoffReport { rho, c, t_star, active, tie: near.len() > 1 })
}

/// All pairwise statistics, `rho` and the Chernoff-active pair.
pub fn chernoff_info(model: &BlockModel, opts: &ChernoffOptions) -> Result<ChernoffReport> {
    chernoff_info_raw(model.b(), model.pi(), opts)
}

/// [`chernoff_info`] on an unvalidated block matrix (entries must still lie in `(0, 1)`).
pub fn chernoff_info_raw(b: &DMatrix<f64>, pi: &[f64], opts: &ChernoffOptions) -> Result<ChernoffReport> {
    report_from_limits(&Limits::new(b, pi)?, opts)
}

pub fn rho(b: &DMatrix<f64>, pi: &[f64], opts: &ChernoffOptions) -> Result<f64> {
    chernoff_info_raw(b, pi, opts).map(|r| r.rho)
}

/// `rho(B_a) > rho(B_b)` under the same `pi`.
pub fn is_superior(b_a: &DMatrix<f64>, b_b: &DMatrix<f64>, pi: &[f64], opts: &ChernoffOptions) -> Result<bool> {
    if b_a.shape() != b_b.shape() {
        return Err(Error::DimensionMismatch { expected: b_a.nrows(), found: b_b.nrows() });
    }
    Ok(rho(b_a, pi, opts)? > rho(b_b, pi, opts)?)
}

/// `rho(pB)` over a grid of scales.
pub fn scale_curve(model: &BlockModel, scales: &[f64], opts: &ChernoffOptions) -> Result<Vec<f64>> {
    scales
        .iter()
        .map(|&p| {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::InvalidParameter { name: "p", value: p });
            }
            rho(&(model.b() * p), model.pi(), opts)
        })
        .collect()
}

/// `1_{k,l}`: ones on the `{k, l} x {k, l}` block pattern.
pub fn indicator(k_blocks: usize, pair: (usize, usize)) -> DMatrix<f64> {
    DMatrix::from_fn(k_blocks, k_blocks, |i, j| {
        let hit = |x: usize| x == pair.0 || x == pair.1;
        if hit(i) && hit(j) {
            1.0
        } else {
            0.0
        }
    })
}

/// Block matrices of the uniform and Chernoff-optimal schemes at one `p1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeMatrices {
    pub b0: DMatrix<f64>,
    pub b1: DMatrix<f64>,
    /// The targeted scheme: the pure form below `p1_star`, the saturated form from `p1_star` on.
    pub optimal: DMatrix<f64>,
    pub saturated: bool,
}

/// The quantities that depend only on `(B, pi, p0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeContext {
    pub b: DMatrix<f64>,
    pub pi: Vec<f64>,
    pub p0: f64,
    /// Chernoff-active pair of `p0 B`.
    pub active: (usize, usize),
    /// `(pi_k + pi_l)^2` for the active pair.
    pub mass: f64,
    pub p1_max: f64,
    pub p1_star: f64,
    /// Active pair just above `p1_star`, when it changes before `p1_max`.
    pub pair_after: Option<(usize, usize)>,
    pub p11_max: f64,
    /// The active pair of `p0 B` was not unique; `p1_star` then defaults to `p1_max`.
    pub non_unique: bool,
}

fn check_p(name: &'static str, p: f64) -> Result<()> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter { name, value: p });
    }
    Ok(())
}

fn targeted(b: &DMatrix<f64>, p0: f64, uniform: f64, focused: f64, mass: f64, pair: (usize, usize)) -> DMatrix<f64> {
    let mask = indicator(b.nrows(), pair);
    b * (p0 + uniform) + b.component_mul(&mask) * (focused / mass)
}

impl SchemeContext {
    pub fn new(model: &BlockModel, p0: f64, opts: &ChernoffOptions) -> Result<Self> {
        check_p("p0", p0)?;
        let b = model.b().clone();
        let pi = model.pi().to_vec();
        let report = chernoff_info_raw(&(&b * p0), &pi, opts)?;
        let active = report.active;
        let s = pi[active.0] + pi[active.1];
        let mass = s * s;
        let p1_max = (1.0 - p0) * mass;
        let (p1_star, pair_after, non_unique) = if report.tie {
            (p1_max, None, true)
        } else {
            let (star, _, after) = p1_star_search(&b, &pi, p0, active, mass, p1_max, 400, opts)?;
            (star, after, false)
        };
        let p11_max = 1.0 - p0 - p1_star / mass + p1_star;
        Ok(SchemeContext { b, pi, p0, active, mass, p1_max, p1_star, pair_after, p11_max, non_unique })
    }

    /// `p0 B + p1 / (pi_k + pi_l)^2 B o 1_{k,l}`.
    pub fn b_tilde(&self, p1: f64) -> DMatrix<f64> {
        targeted(&self.b, self.p0, 0.0, p1, self.mass, self.active)
    }

    /// `p0 B + (p1 - p1*) B + p1* / (pi_k + pi_l)^2 B o 1_{k,l}`.
    pub fn b_tilde_star(&self, p1: f64) -> DMatrix<f64> {
        targeted(&self.b, self.p0, p1 - self.p1_star, self.p1_star, self.mass, self.active)
    }

    pub fn matrices(&self, p1: f64) -> Result<SchemeMatrices> {
        if !(p1 > 0.0) {
            return Err(Error::InvalidParameter { name: "p1", value: p1 });
        }
        // Relative slack for bounds computed in floating point.
        let slack = 1e-12;
        if p1 > self.p11_max * (1.0 + slack) {
            return Err(Error::OverSampling { p1, bound: self.p11_max });
        }
        let saturated = p1 >= self.p1_star;
        let optimal = if saturated { self.b_tilde_star(p1) } else { self.b_tilde(p1) };
        let b0 = &self.b * self.p0;
        let b1 = &self.b * (self.p0 + p1);
        for m in [&b0, &b1, &optimal] {
            if m.iter().zip(self.b.iter()).any(|(x, y)| *x > y * (1.0 + slack)) {
                return Err(Error::OverSampling { p1, bound: if saturated { self.p11_max } else { self.p1_max } });
            }
        }
        Ok(SchemeMatrices { b0, b1, optimal, saturated })
    }
}

/// `(B0, B1, optimal)` for one `p1`.
pub fn scheme_matrices(
    model: &BlockModel,
    p0: f64,
    p1: f64,
    opts: &ChernoffOptions,
) -> Result<(SchemeContext, SchemeMatrices)> {
    let ctx = SchemeContext::new(model, p0, opts)?;
    let m = ctx.matrices(p1)?;
    Ok((ctx, m))
}

#[allow(clippy::too_many_arguments)]
fn p1_star_search(
    b: &DMatrix<f64>,
    pi: &[f64],
    p0: f64,
    pair0: (usize, usize),
    mass: f64,
    p1_max: f64,
    grid: usize,
    opts: &ChernoffOptions,
) -> Result<(f64, (usize, usize), Option<(usize, usize)>)> {
    let pair_at = |p1: f64| -> Result<(usize, usize)> {
        chernoff_info_raw(&targeted(b, p0, 0.0, p1, mass, pair0), pi, opts).map(|r| r.active)
    };
    let mut lo = 0.0;
    for j in 1..=grid {
        let p1 = p1_max * j as f64 / grid as f64;
        let pair = pair_at(p1)?;
        if pair != pair0 {
            let mut hi = p1;
            let mut after = pair;
            while hi - lo > 1e-6 {
                let mid = 0.5 * (lo + hi);
                let pm = pair_at(mid)?;
                if pm == pair0 {
                    lo = mid;
                } else {
                    hi = mid;
                    after = pm;
                }
            }
            return Ok((0.5 * (lo + hi), pair0, Some(after)));
        }
        lo = p1;
    }
    Ok((p1_max, pair0, None))
}

/// Smallest `p1` in `(0, p1_max]` at which the active pair of the pure
/// targeted scheme changes, or `p1_max` when it never does.
///
/// Returns `(p1_star, pair_before, pair_after)`.
pub fn find_p1_star(
    model: &BlockModel,
    p0: f64,
    opts: &ChernoffOptions,
) -> Result<(f64, (usize, usize), Option<(usize, usize)>)> {
    check_p("p0", p0)?;
    let b = model.b();
    let pi = model.pi();
    let report = chernoff_info_raw(&(b * p0), pi, opts)?;
    if report.tie {
        return Err(Error::NonUniqueActivePairAtZero);
    }
    let s = pi[report.active.0] + pi[report.active.1];
    p1_star_search(b, pi, p0, report.active, s * s, (1.0 - p0) * s * s, 400, opts)
}

/// `rho` of the uniform and targeted schemes over a `p1` grid spanning `(0, p11_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeCurve {
    pub p1_grid: Vec<f64>,
    pub rho_baseline: Vec<f64>,
    pub rho_optimal: Vec<f64>,
    /// Active pair of the targeted matrix at each grid point.
    pub active_optimal: Vec<(usize, usize)>,
    pub rho_b: f64,
    pub rho_b0: f64,
    pub p1_star: f64,
    pub p1_max: f64,
    pub p11_max: f64,
    pub active_initial: (usize, usize),
    pub non_unique: bool,
}

pub fn scheme_curve(model: &BlockModel, p0: f64, grid_size: usize, opts: &ChernoffOptions) -> Result<SchemeCurve> {
    if grid_size == 0 {
        return Err(Error::InvalidParameter { name: "grid_size", value: 0.0 });
    }
    let ctx = SchemeContext::new(model, p0, opts)?;
    let p1_grid: Vec<f64> = (1..=grid_size).map(|j| ctx.p11_max * j as f64 / grid_size as f64).collect();
    curve_on_grid(&ctx, model, p1_grid, opts)
}

/// [`scheme_curve`] on caller-chosen `p1` values.
pub fn curve_on_grid(
    ctx: &SchemeContext,
    model: &BlockModel,
    p1_grid: Vec<f64>,
    opts: &ChernoffOptions,
) -> Result<SchemeCurve> {
    let mut rho_baseline = Vec::with_capacity(p1_grid.len());
    let mut rho_optimal = Vec::with_capacity(p1_grid.len());
    let mut active_optimal = Vec::with_capacity(p1_grid.len());
    for &p1 in &p1_grid {
        let m = ctx.matrices(p1)?;
        rho_baseline.push(rho(&m.b1, &ctx.pi, opts)?);
        let report = chernoff_info_raw(&m.optimal, &ctx.pi, opts)?;
        rho_optimal.push(report.rho);
        active_optimal.push(report.active);
    }
    Ok(SchemeCurve {
        rho_b: rho(model.b(), model.pi(), opts)?,
        rho_b0: rho(&(model.b() * ctx.p0), model.pi(), opts)?,
        p1_grid,
        rho_baseline,
        rho_optimal,
        active_optimal,
        p1_star: ctx.p1_star,
        p1_max: ctx.p1_max,
        p11_max: ctx.p11_max,
        active_initial: ctx.active,
        non_unique: ctx.non_unique,
    })
}

/// Terms of the scaled-model decomposition for one block pair.
///
/// With `V = nu Delta^{-1} I` and `D_k(p) = (1 - p) diag(pi_l B_{kl})`,
/// the covariance of the scaled model satisfies
/// `Sigma'_k = p Sigma_k + V^T D_k V`, and inverting the mixture
/// `Sigma'_{kl}(t)` by Sherman-Morrison-Woodbury isolates the nonnegative
/// loss `h = x^T M^{-1} x / p`.
#[derive(Debug, Clone)]
pub struct ScaledPairTerms {
    /// `Sigma'_{kl}(t)` computed from the scaled model directly.
    pub sigma_scaled: DMatrix<f64>,
    /// `p Sigma_{kl}(t) + V^T D_{kl} V`.
    pub sigma_decomposed: DMatrix<f64>,
    /// Direct inverse of `sigma_scaled`.
    pub inverse_direct: DMatrix<f64>,
    /// `Sigma^{-1}/p - Sigma^{-1} V^T M^{-1} V Sigma^{-1} / p^2`.
    pub inverse_woodbury: DMatrix<f64>,
    pub h: f64,
    /// `p t(1-t) d^T Sigma'^{-1} d` and `t(1-t) d^T Sigma^{-1} d` for the unscaled difference `d`.
    pub objective_scaled: f64,
    pub objective_unscaled: f64,
}

pub fn scaled_pair_terms(model: &BlockModel, p: f64, t: f64, k: usize, l: usize) -> Result<ScaledPairTerms> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter { name: "p", value: p });
    }
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::InvalidParameter { name: "t", value: t });
    }
    let kb = model.k();
    if k == l || k >= kb || l >= kb {
        return Err(Error::InvalidParameter { name: "pair", value: l as f64 });
    }
    let b = model.b();
    let pi = model.pi();
    let base = Limits::new(b, pi)?;
    // The scaled model's latent positions are exactly sqrt(p) nu.
    let scaled_latent = LatentConfig { nu: &base.latent.nu * libm::sqrt(p), signature: base.latent.signature };
    let scaled = Limits::from_latent(scaled_latent, &(b * p), pi)?;

    let mix = |s: &[DMatrix<f64>]| &s[k] * t + &s[l] * (1.0 - t);
    let sigma_t = mix(&base.sigma);
    let sigma_scaled = mix(&scaled.sigma);

    let v = &base.latent.nu * &base.delta_inv * base.latent.signature.matrix();
    let dvec: Vec<f64> = (0..kb).map(|j| (1.0 - p) * pi[j] * (t * b[(k, j)] + (1.0 - t) * b[(l, j)])).collect();
    let dmat = DMatrix::from_diagonal(&DVector::from_vec(dvec.clone()));
    let sigma_decomposed = &sigma_t * p + v.transpose() * &dmat * &v;

    let inverse_direct = spd_inverse(sigma_scaled.clone(), k, l)?;
    let sigma_inv = spd_inverse(sigma_t.clone(), k, l)?;
    let d_inv = DMatrix::from_diagonal(&DVector::from_iterator(kb, dvec.iter().map(|x| 1.0 / x)));
    let m = d_inv + &v * &sigma_inv * v.transpose() / p;
    let m_inv = m.clone().try_inverse().ok_or(Error::SingularSigma { k, l })?;
    let inverse_woodbury = &sigma_inv / p - &sigma_inv * v.transpose() * &m_inv * &v * &sigma_inv / (p * p);

    let diff = base.diff(k, l);
    let x = &v * &sigma_inv * &diff;
    let h = x.dot(&(Cholesky::<f64, Dyn>::new(m).ok_or(Error::SingularSigma { k, l })?.solve(&x))) / p;
    let objective_unscaled = t * (1.0 - t) * diff.dot(&(&sigma_inv * &diff));
    let objective_scaled = p * t * (1.0 - t) * diff.dot(&(&inverse_direct * &diff));
    Ok(ScaledPairTerms {
        sigma_scaled,
        sigma_decomposed,
        inverse_direct,
        inverse_woodbury,
        h,
        objective_scaled,
        objective_unscaled,
    })
}

/// Latent configuration of a model, re-exported for callers that only hold `(B, pi)`.
pub fn latent(model: &BlockModel) -> LatentConfig {
    latent_from_block_model(model)
}

/// Indices `(k, l)`, `k < l`, in lexicographic order.
pub fn block_pairs(k: usize) -> Vec<(usize, usize)> {
    let mut out = vec![];
    for a in 0..k {
        for b in a + 1..k {
            out.push((a, b));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sbm::make_block_model;

    fn example_model(pi: [f64; 4]) -> BlockModel {
        let nu = [0.2, 0.4, 0.5, 0.9];
        make_block_model(DMatrix::from_fn(4, 4, |i, j| nu[i] * nu[j]), pi.to_vec()).unwrap()
    }

    const BALANCED: [f64; 4] = [0.25; 4];
    const SKEWED: [f64; 4] = [0.125, 0.125, 0.375, 0.375];

    // Independent oracle: scalar closed forms for the rank-one model,
    // maximised over a 1e5-point grid in t.
    fn oracle_pair(pi: [f64; 4], k: usize, l: usize) -> f64 {
        let nu = [0.2, 0.4, 0.5, 0.9];
        let delta: f64 = (0..4).map(|j| pi[j] * nu[j] * nu[j]).sum();
        let sig = |a: usize| -> f64 {
            (0..4)
                .map(|j| {
                    let b = nu[a] * nu[j];
                    pi[j] * b * (1.0 - b) * nu[j] * nu[j]
                })
                .sum::<f64>()
                / (delta * delta)
        };
        let (sk, sl) = (sig(k), sig(l));
        let dd = (nu[k] - nu[l]) * (nu[k] - nu[l]);
        (1..100_000)
            .map(|i| {
                let t = i as f64 / 1e5;
                t * (1.0 - t) * dd / (t * sk + (1.0 - t) * sl)
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    // Oracle output, frozen.
    const GOLDEN_BALANCED: [f64; 6] = [
        0.019809054781422218,
        0.04219907470263428,
        0.25516813746803624,
        0.0037634105436781945,
        0.1033319865567614,
        0.06290684929045433,
    ];
    const GOLDEN_SKEWED: [f64; 6] = [
        0.02531423885674341,
        0.05411292575169927,
        0.33789594295301567,
        0.004841468990065034,
        0.13681801968887997,
        0.08348670552833236,
    ];

    #[test]
    fn oracle_reproduces_frozen_goldens() {
        for (pi, gold) in [(BALANCED, GOLDEN_BALANCED), (SKEWED, GOLDEN_SKEWED)] {
            for ((k, l), g) in block_pairs(4).into_iter().zip(gold) {
                assert!((oracle_pair(pi, k, l) - g).abs() <= 1e-15 * g);
            }
        }
    }

    #[test]
    fn optimizer_matches_goldens() {
        for (pi, gold) in [(BALANCED, GOLDEN_BALANCED), (SKEWED, GOLDEN_SKEWED)] {
            let r = chernoff_info(&example_model(pi), &ChernoffOptions::default()).unwrap();
            for ((k, l), g) in block_pairs(4).into_iter().zip(gold) {
                let rel = (r.c[(k, l)] - g) / g;
                assert!(rel.abs() < 1e-7, "pair ({k},{l}): {} vs {g}", r.c[(k, l)]);
            }
            assert_eq!(r.active, (1, 2));
            assert!(!r.tie);
        }
    }

    #[test]
    fn delta_examples() {
        let m = example_model(BALANCED);
        let lat = latent(&m);
        let d = delta(&lat, m.pi()).unwrap();
        assert!((d[(0, 0)] - 0.315).abs() < 1e-15);
        let p: f64 = 0.3;
        let scaled = LatentConfig { nu: &lat.nu * libm::sqrt(p), signature: lat.signature };
        assert!((delta(&scaled, m.pi()).unwrap()[(0, 0)] - 0.315 * p).abs() < 1e-15);
        let one = make_block_model(DMatrix::from_element(1, 1, 0.5), vec![1.0]).unwrap();
        let lat = latent(&one);
        let lat = LatentConfig { nu: DMatrix::from_element(1, 1, 1.0), ..lat };
        assert_eq!(delta(&lat, &[1.0]).unwrap()[(0, 0)], 1.0);
    }

    #[test]
    fn sigma_scalar_case_and_symmetry() {
        let m = example_model(BALANCED);
        let nu = [0.2, 0.4, 0.5, 0.9];
        let direct: f64 =
            (0..4).map(|j| 0.25 * nu[0] * nu[j] * (1.0 - nu[0] * nu[j]) * nu[j] * nu[j]).sum::<f64>() / (0.315 * 0.315);
        assert!((sigma_k(&m, 0).unwrap()[(0, 0)] - direct).abs() < 1e-14);
        let c = make_block_model(DMatrix::from_element(2, 2, 0.3), vec![0.4, 0.6]).unwrap();
        assert!((sigma_k(&c, 0).unwrap() - sigma_k(&c, 1).unwrap()).amax() < 1e-14);
    }

    #[test]
    fn scaled_sigma_decomposition() {
        let m = make_block_model(
            DMatrix::from_row_slice(3, 3, &[0.6, 0.2, 0.3, 0.2, 0.5, 0.1, 0.3, 0.1, 0.7]),
            vec![0.2, 0.5, 0.3],
        )
        .unwrap();
        let terms = scaled_pair_terms(&m, 0.4, 0.37, 0, 2).unwrap();
        assert!((terms.sigma_scaled - terms.sigma_decomposed).amax() < 1e-9);
        assert!(terms.h > 0.0);
        assert!((terms.objective_unscaled - terms.objective_scaled - 0.37 * 0.63 * terms.h).abs() < 1e-10);
    }

    #[test]
    fn equal_covariances_give_quarter_quadratic() {
        let m = make_block_model(DMatrix::from_row_slice(2, 2, &[0.5, 0.2, 0.2, 0.5]), vec![0.5, 0.5]).unwrap();
        let mut lim = Limits::new(m.b(), m.pi()).unwrap();
        let shared = DMatrix::from_row_slice(2, 2, &[0.7, 0.1, 0.1, 0.3]);
        lim.sigma = vec![shared.clone(), shared.clone()];
        let d = lim.diff(0, 1);
        let q = d.dot(&(shared.try_inverse().unwrap() * &d));
        let (c, t) = maximise(&lim, 0, 1, &ChernoffOptions::default()).unwrap();
        assert!((c - q / 4.0).abs() < 1e-12 * q);
        assert!((t - 0.5).abs() < 1e-6);
    }

    #[test]
    fn pair_is_symmetric_in_its_arguments() {
        let m = example_model(SKEWED);
        let opts = ChernoffOptions::default();
        for (k, l) in block_pairs(4) {
            let (c1, t1) = chernoff_pair(&m, k, l, &opts).unwrap();
            let (c2, t2) = chernoff_pair(&m, l, k, &opts).unwrap();
            assert!((c1 - c2).abs() <= 1e-12 * c1);
            assert!((t1 + t2 - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn identical_blocks_have_zero_statistic() {
        let b = DMatrix::from_row_slice(3, 3, &[0.5, 0.5, 0.2, 0.5, 0.5, 0.2, 0.2, 0.2, 0.6]);
        let m = make_block_model(b, vec![0.3, 0.3, 0.4]).unwrap();
        let r = chernoff_info(&m, &ChernoffOptions::default()).unwrap();
        assert!(r.c[(0, 1)].abs() < 1e-12);
        assert_eq!(r.active, (0, 1));
    }

    #[test]
    fn scaling_examples() {
        let m = example_model(BALANCED);
        let opts = ChernoffOptions::default();
        let r = rho(m.b(), m.pi(), &opts).unwrap();
        assert!(r > rho(&(m.b() * 0.5), m.pi(), &opts).unwrap());
        assert_eq!(scale_curve(&m, &[1.0], &opts).unwrap()[0], r);
        assert!(!is_superior(m.b(), m.b(), m.pi(), &opts).unwrap());
        for i in 1..10 {
            let p = i as f64 / 10.0;
            assert!(is_superior(m.b(), &(m.b() * p), m.pi(), &opts).unwrap());
        }
        let two = make_block_model(DMatrix::from_row_slice(2, 2, &[0.5, 0.2, 0.2, 0.4]), vec![0.5, 0.5]).unwrap();
        let r2 = chernoff_info(&two, &opts).unwrap();
        assert_eq!(r2.rho, r2.c[(0, 1)]);
    }

    #[test]
    fn single_block_has_no_pairs() {
        let one = make_block_model(DMatrix::from_element(1, 1, 0.5), vec![1.0]).unwrap();
        assert_eq!(chernoff_info(&one, &ChernoffOptions::default()), Err(Error::NoBlockPairs));
    }

    #[test]
    fn scheme_basics() {
        let m = example_model(BALANCED);
        let opts = ChernoffOptions::default();
        let ctx = SchemeContext::new(&m, 0.01, &opts).unwrap();
        assert!((ctx.p1_max - 0.2475).abs() < 1e-15);
        let s = ctx.matrices(0.05).unwrap();
        assert!((s.b0[(0, 0)] - 0.0004).abs() < 1e-18);
        let mask = indicator(4, ctx.active);
        for i in 0..4 {
            for j in 0..4 {
                if mask[(i, j)] == 0.0 {
                    assert_eq!(s.optimal[(i, j)], s.b0[(i, j)]);
                }
                assert!(s.optimal[(i, j)] <= m.b()[(i, j)]);
            }
        }
        assert!(matches!(ctx.matrices(ctx.p11_max * 1.01), Err(Error::OverSampling { .. })));
        assert!((ctx.p11_max - (1.0 - 0.01 - ctx.p1_star / 0.25 + ctx.p1_star)).abs() < 1e-15);
    }

    #[test]
    fn p1_star_matches_dense_rescan() {
        let opts = ChernoffOptions::default();
        for pi in [BALANCED, SKEWED] {
            let m = example_model(pi);
            let (star, before, after) = find_p1_star(&m, 0.01, &opts).unwrap();
            let ctx = SchemeContext::new(&m, 0.01, &opts).unwrap();
            assert_eq!(ctx.p1_star, star);
            let pair_at = |p1: f64| chernoff_info_raw(&ctx.b_tilde(p1), m.pi(), &opts).unwrap().active;
            // Dense re-scan at ten times the search resolution.
            let limit = if after.is_some() { star - 1e-6 } else { ctx.p1_max };
            for j in 1..=4000 {
                let p1 = limit * j as f64 / 4000.0;
                assert_eq!(pair_at(p1), before, "p1 = {p1}");
            }
            if let Some(after) = after {
                assert!(star < ctx.p1_max);
                assert_eq!(pair_at(star + 1e-6), after);
            }
        }
    }

    #[test]
    fn two_blocks_never_switch() {
        let m = make_block_model(DMatrix::from_row_slice(2, 2, &[0.5, 0.2, 0.2, 0.4]), vec![0.3, 0.7]).unwrap();
        let (star, _, after) = find_p1_star(&m, 0.1, &ChernoffOptions::default()).unwrap();
        assert_eq!(after, None);
        assert_eq!(star, 0.9 * 1.0);
    }

    #[test]
    fn zero_budget_limits() {
        let m = example_model(BALANCED);
        let opts = ChernoffOptions::default();
        let ctx = SchemeContext::new(&m, 0.01, &opts).unwrap();
        let c = curve_on_grid(&ctx, &m, vec![1e-6, 1e-8, 1e-10], &opts).unwrap();
        assert!((c.rho_baseline[0] - c.rho_b0).abs() < 1e-6);
        // The targeted perturbation raises the rank of p0 B, and the
        // approximate statistic jumps: its limit as p1 -> 0 sits strictly
        // above rho(B0) (about 2.613e-5 against 2.397e-5 here).
        assert!((c.rho_optimal[1] - c.rho_optimal[2]).abs() < 1e-9);
        assert!(c.rho_optimal[2] > c.rho_b0 * 1.05);
    }

    #[test]
    fn exact_statistic_adds_log_det_term() {
        let m = example_model(BALANCED);
        let approx = chernoff_info(&m, &ChernoffOptions::default()).unwrap();
        let opts = ChernoffOptions { statistic: Statistic::Exact { n: 1000.0 }, ..ChernoffOptions::default() };
        let exact = chernoff_info(&m, &opts).unwrap();
        // The quadratic term dominates for large n.
        let ratio = exact.rho / (500.0 * approx.rho);
        assert!((ratio - 1.0).abs() < 0.05, "{ratio}");
    }
}
