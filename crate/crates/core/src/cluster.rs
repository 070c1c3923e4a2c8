//! Full-covariance Gaussian mixtures fitted by EM with BIC model selection,
//! the adjusted Rand index, and block-model re-estimation from a clustering.
//!
//! Labels are 0-based throughout the crate.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::RangeInclusive;

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, SeededRng};
use crate::spectral::Signature;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Clamp applied to estimated block probabilities.
pub const B_CLAMP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GmmConfig {
    pub k_range: RangeInclusive<usize>,
    pub restarts: usize,
    /// Relative log-likelihood change that stops EM.
    pub tol: f64,
    pub max_iter: usize,
    /// Ridge `ridge * trace / d` added to a covariance that fails to factor.
    pub ridge: f64,
}

impl Default for GmmConfig {
    fn default() -> Self {
        GmmConfig { k_range: 1..=9, restarts: 10, tol: 1e-6, max_iter: 300, ridge: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureFit {
    pub weights: Vec<f64>,
    /// `K x d`.
    pub means: DMatrix<f64>,
    pub covariances: Vec<DMatrix<f64>>,
    /// Argmax of the responsibilities, in `0..k()`.
    pub labels: Vec<usize>,
    pub log_likelihood: f64,
    pub bic: f64,
}

impl MixtureFit {
    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means.ncols()
    }
}

/// One EM run at fixed `K`.
#[derive(Debug, Clone)]
pub struct EmRun {
    pub fit: MixtureFit,
    /// Log-likelihood after each E-step since the last reseed.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub reseeds: usize,
}

/// Number of free parameters of a full-covariance mixture.
pub fn parameter_count(k: usize, d: usize) -> usize {
    k - 1 + k * d + k * d * (d + 1) / 2
}

pub fn bic(log_likelihood: f64, k: usize, d: usize, n: usize) -> f64 {
    -2.0 * log_likelihood + parameter_count(k, d) as f64 * libm::log(n as f64)
}

/// Row-major copy of the data, shifted to zero mean so second moments stay well conditioned.
struct Data {
    n: usize,
    d: usize,
    x: Vec<f64>,
    shift: Vec<f64>,
}

impl Data {
    fn new(m: &DMatrix<f64>) -> Self {
        let (n, d) = m.shape();
        let shift: Vec<f64> = (0..d).map(|a| m.column(a).sum() / n.max(1) as f64).collect();
        let mut x = Vec::with_capacity(n * d);
        for i in 0..n {
            x.extend((0..d).map(|a| m[(i, a)] - shift[a]));
        }
        Data { n, d, x, shift }
    }

    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    fn total_variance(&self) -> f64 {
        self.x.iter().map(|v| v * v).sum::<f64>() / self.n as f64
    }
}

/// Lower Cholesky factor of a row-major `d x d` matrix. Returns `ln det`.
fn cholesky(a: &[f64], d: usize, out: &mut [f64]) -> Option<f64> {
    out.iter_mut().for_each(|v| *v = 0.0);
    let mut logdet = 0.0;
    for j in 0..d {
        let mut s = a[j * d + j];
        for k in 0..j {
            s -= out[j * d + k] * out[j * d + k];
        }
        if !(s > 0.0) || !s.is_finite() {
            return None;
        }
        let l = libm::sqrt(s);
        out[j * d + j] = l;
        logdet += 2.0 * libm::log(l);
        for i in j + 1..d {
            let mut s = a[i * d + j];
            for k in 0..j {
                s -= out[i * d + k] * out[j * d + k];
            }
            out[i * d + j] = s / l;
        }
    }
    Some(logdet)
}

/// Component parameters with the covariance held as a lower Cholesky factor.
#[derive(Clone)]
struct Component {
    weight: f64,
    mean: Vec<f64>,
    cov: Vec<f64>,
    chol: Vec<f64>,
    /// Reciprocal diagonal of `chol`.
    inv_diag: Vec<f64>,
    /// `ln weight - (d ln 2pi + ln det) / 2`.
    log_norm: f64,
}

impl Component {
    fn blank(d: usize) -> Self {
        Component {
            weight: 0.0,
            mean: vec![0.0; d],
            cov: vec![0.0; d * d],
            chol: vec![0.0; d * d],
            inv_diag: vec![0.0; d],
            log_norm: 0.0,
        }
    }

    /// Factor `cov`, adding a ridge when it is not numerically positive definite.
    fn factor(&mut self, d: usize, ridge: f64, fallback_scale: f64, index: usize) -> Result<()> {
        let trace: f64 = (0..d).map(|i| self.cov[i * d + i]).sum();
        let max_diag = (0..d).map(|i| self.cov[i * d + i]).fold(0.0, f64::max);
        let mut logdet = cholesky(&self.cov, d, &mut self.chol);
        let pivots_ok = |chol: &[f64]| (0..d).all(|i| chol[i * d + i] * chol[i * d + i] > 1e-12 * max_diag);
        if logdet.is_none() || !pivots_ok(&self.chol) {
            let scale = if trace > 0.0 { trace / d as f64 } else { fallback_scale };
            let eps = ridge * scale;
            for i in 0..d {
                self.cov[i * d + i] += eps;
            }
            logdet = cholesky(&self.cov, d, &mut self.chol);
            if logdet.is_none() {
                return Err(Error::SingularCovariance { component: index });
            }
        }
        for i in 0..d {
            self.inv_diag[i] = 1.0 / self.chol[i * d + i];
        }
        self.log_norm = libm::log(self.weight) - 0.5 * (d as f64 * LN_2PI + logdet.unwrap_or(0.0));
        Ok(())
    }

    #[inline]
    fn log_density(&self, x: &[f64], z: &mut [f64]) -> f64 {
        let d = x.len();
        let mut maha = 0.0;
        for i in 0..d {
            let mut s = x[i] - self.mean[i];
            for k in 0..i {
                s -= self.chol[i * d + k] * z[k];
            }
            z[i] = s * self.inv_diag[i];
            maha += z[i] * z[i];
        }
        self.log_norm - 0.5 * maha
    }
}

/// Responsibility-weighted sufficient statistics.
struct Stats {
    d: usize,
    mass: Vec<f64>,
    /// `k x d`.
    first: Vec<f64>,
    /// `k x d x d`, lower triangle only.
    second: Vec<f64>,
}

impl Stats {
    fn new(k: usize, d: usize) -> Self {
        Stats { d, mass: vec![0.0; k], first: vec![0.0; k * d], second: vec![0.0; k * d * d] }
    }

    fn clear(&mut self) {
        self.mass.iter_mut().for_each(|v| *v = 0.0);
        self.first.iter_mut().for_each(|v| *v = 0.0);
        self.second.iter_mut().for_each(|v| *v = 0.0);
    }

    #[inline]
    fn add(&mut self, c: usize, r: f64, x: &[f64]) {
        let d = self.d;
        self.mass[c] += r;
        let first = &mut self.first[c * d..(c + 1) * d];
        let second = &mut self.second[c * d * d..(c + 1) * d * d];
        for a in 0..d {
            let ra = r * x[a];
            first[a] += ra;
            for b in 0..=a {
                second[a * d + b] += ra * x[b];
            }
        }
    }
}

enum Step {
    Ok,
    Dead(usize),
}

/// Terms this far below the row maximum vanish against it in double precision.
const NEGLIGIBLE_LOG: f64 = -40.0;

struct Em<'a> {
    data: &'a Data,
    cfg: &'a GmmConfig,
    scale: f64,
    comps: Vec<Component>,
    stats: Stats,
    lv: Vec<f64>,
    z: Vec<f64>,
}

impl<'a> Em<'a> {
    fn new(data: &'a Data, k: usize, cfg: &'a GmmConfig, scale: f64) -> Self {
        let d = data.d;
        Em {
            data,
            cfg,
            scale,
            comps: vec![Component::blank(d); k],
            stats: Stats::new(k, d),
            lv: vec![0.0; k],
            z: vec![0.0; d],
        }
    }

    /// Statistics of a hard assignment of every point to its nearest centre.
    fn assign_nearest(&mut self, centers: &[Vec<f64>]) {
        self.stats.clear();
        for i in 0..self.data.n {
            let x = self.data.row(i);
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, ctr) in centers.iter().enumerate() {
                let dist = sq_dist(x, ctr);
                if dist < best_d {
                    best_d = dist;
                    best = c;
                }
            }
            self.stats.add(best, 1.0, x);
        }
    }

    fn m_step(&mut self) -> Result<Step> {
        let (n, d) = (self.data.n, self.data.d);
        let min_mass = (d + 1) as f64;
        for (c, comp) in self.comps.iter_mut().enumerate() {
            let mass = self.stats.mass[c];
            if !(mass >= min_mass) {
                return Ok(Step::Dead(c));
            }
            let first = &self.stats.first[c * d..(c + 1) * d];
            let second = &self.stats.second[c * d * d..(c + 1) * d * d];
            for a in 0..d {
                comp.mean[a] = first[a] / mass;
            }
            for a in 0..d {
                for b in 0..=a {
                    let v = second[a * d + b] / mass - comp.mean[a] * comp.mean[b];
                    comp.cov[a * d + b] = v;
                    comp.cov[b * d + a] = v;
                }
            }
            comp.weight = mass / n as f64;
            comp.factor(d, self.cfg.ridge, self.scale, c)?;
        }
        Ok(Step::Ok)
    }

    /// Log mixture density of point `i`, leaving normalised responsibilities in `lv`.
    #[inline]
    fn responsibilities(&mut self, i: usize) -> f64 {
        let x = self.data.row(i);
        let mut max = f64::NEG_INFINITY;
        for (v, comp) in self.lv.iter_mut().zip(&self.comps) {
            *v = comp.log_density(x, &mut self.z);
            max = max.max(*v);
        }
        let mut sum = 0.0;
        for v in self.lv.iter_mut() {
            let t = *v - max;
            *v = if t < NEGLIGIBLE_LOG { 0.0 } else { libm::exp(t) };
            sum += *v;
        }
        let inv = 1.0 / sum;
        self.lv.iter_mut().for_each(|v| *v *= inv);
        max + libm::log(sum)
    }

    /// E-step fused with accumulation of the next M-step's statistics.
    fn e_step(&mut self) -> f64 {
        // Small dimensions get a fully unrolled kernel.
        match self.data.d {
            1 => self.e_step_kernel(1),
            2 => self.e_step_kernel(2),
            3 => self.e_step_kernel(3),
            4 => self.e_step_kernel(4),
            d => self.e_step_kernel(d),
        }
    }

    #[inline(always)]
    fn e_step_kernel(&mut self, d: usize) -> f64 {
        let k = self.comps.len();
        let mut mean = vec![0.0; k * d];
        let mut chol = vec![0.0; k * d * d];
        let mut norm = vec![0.0; k];
        for (c, comp) in self.comps.iter().enumerate() {
            mean[c * d..(c + 1) * d].copy_from_slice(&comp.mean);
            for a in 0..d {
                for b in 0..a {
                    chol[c * d * d + a * d + b] = comp.chol[a * d + b];
                }
                chol[c * d * d + a * d + a] = comp.inv_diag[a];
            }
            norm[c] = comp.log_norm;
        }
        self.stats.clear();
        let stats = &mut self.stats;
        let lv = &mut self.lv[..k];
        let mut z = [0.0f64; 8];
        let mut zv = vec![0.0; d];
        let mut ll = 0.0;
        for x in self.data.x.chunks_exact(d) {
            let mut max = f64::NEG_INFINITY;
            for c in 0..k {
                let mu = &mean[c * d..(c + 1) * d];
                let l = &chol[c * d * d..(c + 1) * d * d];
                let zs: &mut [f64] = if d <= 8 { &mut z[..d] } else { &mut zv };
                let mut maha = 0.0;
                for a in 0..d {
                    let mut s = x[a] - mu[a];
                    for b in 0..a {
                        s -= l[a * d + b] * zs[b];
                    }
                    let za = s * l[a * d + a];
                    zs[a] = za;
                    maha += za * za;
                }
                let v = norm[c] - 0.5 * maha;
                lv[c] = v;
                max = max.max(v);
            }
            let mut sum = 0.0;
            for v in lv.iter_mut() {
                let t = *v - max;
                *v = if t < NEGLIGIBLE_LOG { 0.0 } else { exp(t) };
                sum += *v;
            }
            ll += max + libm::log(sum);
            let inv = 1.0 / sum;
            for (c, v) in lv.iter().enumerate() {
                let r = v * inv;
                if r == 0.0 {
                    continue;
                }
                stats.mass[c] += r;
                let first = &mut stats.first[c * d..(c + 1) * d];
                let second = &mut stats.second[c * d * d..(c + 1) * d * d];
                for a in 0..d {
                    let ra = r * x[a];
                    first[a] += ra;
                    for b in 0..=a {
                        second[a * d + b] += ra * x[b];
                    }
                }
            }
        }
        ll
    }

    /// Index of the point with the lowest likelihood under the live components.
    fn worst_point(&mut self) -> usize {
        let live: Vec<Component> = self.comps.iter().filter(|c| c.weight > 0.0).cloned().collect();
        if live.is_empty() {
            return 0;
        }
        let mut vals = vec![0.0; live.len()];
        let mut worst = 0;
        let mut worst_ll = f64::INFINITY;
        for i in 0..self.data.n {
            let x = self.data.row(i);
            let mut max = f64::NEG_INFINITY;
            for (v, comp) in vals.iter_mut().zip(&live) {
                *v = comp.log_density(x, &mut self.z);
                max = max.max(*v);
            }
            let ll = max + libm::log(vals.iter().map(|v| libm::exp(v - max)).sum::<f64>());
            if ll < worst_ll {
                worst_ll = ll;
                worst = i;
            }
        }
        worst
    }

    fn labels(&mut self) -> Vec<usize> {
        (0..self.data.n)
            .map(|i| {
                self.responsibilities(i);
                let mut best = 0;
                for c in 1..self.lv.len() {
                    if self.lv[c] > self.lv[best] {
                        best = c;
                    }
                }
                best
            })
            .collect()
    }
}

#[cfg(feature = "std")]
#[inline]
fn exp(x: f64) -> f64 {
    x.exp()
}

#[cfg(not(feature = "std"))]
#[inline]
fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++ centres.
fn kmeans_pp(data: &Data, k: usize, rng: &mut SeededRng) -> Vec<Vec<f64>> {
    let n = data.n;
    let mut centers = Vec::with_capacity(k);
    centers.push(data.row(rng.random_range(0..n)).to_vec());
    let mut dist: Vec<f64> = (0..n).map(|i| sq_dist(data.row(i), &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let u = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = n - 1;
            for (i, w) in dist.iter().enumerate() {
                acc += w;
                if acc > u {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        let c = data.row(pick).to_vec();
        for (i, dd) in dist.iter_mut().enumerate() {
            *dd = dd.min(sq_dist(data.row(i), &c));
        }
        centers.push(c);
    }
    centers
}

fn run_em(data: &Data, k: usize, seed: u64, cfg: &GmmConfig, scale: f64) -> Result<Option<EmRun>> {
    let mut rng = rng_from_seed(seed);
    let centers = kmeans_pp(data, k, &mut rng);
    let mut em = Em::new(data, k, cfg, scale);
    em.assign_nearest(&centers);
    let mut dead_once = vec![false; k];
    let mut reseeds = 0;
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut ll = f64::NEG_INFINITY;
    // Parameters whose E-step produced `ll`.
    let mut current = em.comps.clone();
    loop {
        match em.m_step()? {
            Step::Ok => {}
            Step::Dead(c) => {
                if dead_once[c] {
                    return Ok(None);
                }
                dead_once[c] = true;
                reseeds += 1;
                // Restart the dead component at the worst-explained point.
                em.comps[c].weight = 0.0;
                let p = em.worst_point();
                let mut centers: Vec<Vec<f64>> = em.comps.iter().map(|cm| cm.mean.clone()).collect();
                centers[c] = data.row(p).to_vec();
                em.assign_nearest(&centers);
                trace.clear();
                ll = f64::NEG_INFINITY;
                continue;
            }
        }
        let next = em.e_step();
        iterations += 1;
        trace.push(next);
        current.clone_from(&em.comps);
        let converged = libm::fabs(next - ll) <= cfg.tol * libm::fabs(next);
        ll = next;
        if converged || iterations >= cfg.max_iter {
            break;
        }
    }
    em.comps = current;
    let labels = em.labels();
    let d = data.d;
    let comps = &em.comps;
    let fit = MixtureFit {
        weights: comps.iter().map(|c| c.weight).collect(),
        means: DMatrix::from_fn(k, d, |r, c| comps[r].mean[c] + data.shift[c]),
        covariances: comps.iter().map(|c| DMatrix::from_row_slice(d, d, &c.cov)).collect(),
        labels,
        log_likelihood: ll,
        bic: bic(ll, k, d, data.n),
    };
    Ok(Some(EmRun { fit, trace, iterations, reseeds }))
}

fn check_points(n: usize, d: usize, k_max: usize) -> Result<()> {
    let required = k_max * (d + 1) + 1;
    if n < required {
        return Err(Error::TooFewPoints { n, required });
    }
    Ok(())
}

/// EM at a single `K` from the `restart`-th seeding under `seed`.
///
/// Returns `Ok(None)` when a component dies twice.
pub fn fit_em(x: &DMatrix<f64>, k: usize, seed: u64, restart: usize, cfg: &GmmConfig) -> Result<Option<EmRun>> {
    if k == 0 {
        return Err(Error::InvalidParameter { name: "k", value: 0.0 });
    }
    check_points(x.nrows(), x.ncols(), k)?;
    let data = Data::new(x);
    let scale = data.total_variance().max(f64::MIN_POSITIVE);
    run_em(&data, k, derive_seed(seed, &[k as u64, restart as u64]), cfg, scale)
}

/// Best BIC fit over `cfg.k_range`, each `K` fitted from `cfg.restarts` seedings.
///
/// Within a `K` the highest log-likelihood wins (lowest restart index on
/// ties); across `K` the lowest BIC wins (smallest `K` on ties). A restart
/// abandoned after a double component death is replaced by a fresh seeding,
/// up to `3 * restarts` attempts per `K`. Components left without points are
/// pruned from the returned fit.
pub fn fit_gmm(x: &DMatrix<f64>, seed: u64, cfg: &GmmConfig) -> Result<MixtureFit> {
    let (n, d) = x.shape();
    let (k_min, k_max) = (*cfg.k_range.start(), *cfg.k_range.end());
    if k_min == 0 || k_min > k_max {
        return Err(Error::InvalidParameter { name: "k_range", value: k_min as f64 });
    }
    if cfg.restarts == 0 {
        return Err(Error::InvalidParameter { name: "restarts", value: 0.0 });
    }
    check_points(n, d, k_max)?;
    let data = Data::new(x);
    let scale = data.total_variance().max(f64::MIN_POSITIVE);
    let mut best: Option<MixtureFit> = None;
    for k in cfg.k_range.clone() {
        let mut best_k: Option<MixtureFit> = None;
        let mut done = 0;
        let mut attempt = 0;
        while done < cfg.restarts && attempt < 3 * cfg.restarts {
            let run = run_em(&data, k, derive_seed(seed, &[k as u64, attempt as u64]), cfg, scale)?;
            attempt += 1;
            let Some(run) = run else { continue };
            done += 1;
            if best_k.as_ref().map_or(true, |b| run.fit.log_likelihood > b.log_likelihood) {
                best_k = Some(run.fit);
            }
        }
        if let Some(fit) = best_k {
            if best.as_ref().map_or(true, |b| fit.bic < b.bic) {
                best = Some(fit);
            }
        }
    }
    best.map(prune).ok_or(Error::SingularCovariance { component: 0 })
}

fn prune(fit: MixtureFit) -> MixtureFit {
    let k = fit.k();
    let mut counts = vec![0usize; k];
    for &l in &fit.labels {
        counts[l] += 1;
    }
    if counts.iter().all(|&c| c > 0) {
        return fit;
    }
    let keep: Vec<usize> = (0..k).filter(|&c| counts[c] > 0).collect();
    let mut remap = vec![usize::MAX; k];
    for (new, &old) in keep.iter().enumerate() {
        remap[old] = new;
    }
    let total: f64 = keep.iter().map(|&c| fit.weights[c]).sum();
    MixtureFit {
        weights: keep.iter().map(|&c| fit.weights[c] / total).collect(),
        means: fit.means.select_rows(&keep),
        covariances: keep.iter().map(|&c| fit.covariances[c].clone()).collect(),
        labels: fit.labels.iter().map(|&l| remap[l]).collect(),
        log_likelihood: fit.log_likelihood,
        bic: fit.bic,
    }
}

fn choose2(x: u64) -> i128 {
    (x as i128) * (x as i128 - 1) / 2
}

/// Adjusted Rand index from the contingency table.
///
/// Evaluated in integer arithmetic with a single final division, so
/// equal partitions pairs give bit-identical results. A degenerate
/// denominator (both labelings trivial) yields 1.
pub fn ari(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { left: a.len(), right: b.len() });
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::TooFewPoints { n, required: 2 });
    }
    let mut table: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut rows: BTreeMap<usize, u64> = BTreeMap::new();
    let mut cols: BTreeMap<usize, u64> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: i128 = table.values().map(|&c| choose2(c)).sum();
    let sa: i128 = rows.values().map(|&c| choose2(c)).sum();
    let sb: i128 = cols.values().map(|&c| choose2(c)).sum();
    let total = choose2(n as u64);
    // (index - sa sb / total) / ((sa + sb) / 2 - sa sb / total), scaled by 2 total.
    let num = 2 * (index * total - sa * sb);
    let den = (sa + sb) * total - 2 * sa * sb;
    if den == 0 {
        return Ok(1.0);
    }
    Ok(num as f64 / den as f64)
}

/// `B = mu I mu^T` clamped to `[1e-6, 1 - 1e-6]` and label fractions.
///
/// The columns of `fit.means` must be in signature order (positive directions first).
pub fn estimate_block_model(fit: &MixtureFit, signature: Signature) -> Result<(DMatrix<f64>, Vec<f64>)> {
    if fit.dim() != signature.dim() {
        return Err(Error::DimensionMismatch { expected: signature.dim(), found: fit.dim() });
    }
    let k = fit.k();
    let b = block_from_means(&fit.means, signature);
    let mut pi = vec![0.0; k];
    for &l in &fit.labels {
        pi[l] += 1.0;
    }
    let n = fit.labels.len().max(1) as f64;
    pi.iter_mut().for_each(|p| *p /= n);
    Ok((b, pi))
}

pub(crate) fn block_from_means(means: &DMatrix<f64>, signature: Signature) -> DMatrix<f64> {
    let k = means.nrows();
    DMatrix::from_fn(k, k, |r, c| {
        let x: Vec<f64> = means.row(r).iter().copied().collect();
        let y: Vec<f64> = means.row(c).iter().copied().collect();
        signature.inner(&x, &y).clamp(B_CLAMP, 1.0 - B_CLAMP)
    })
}
