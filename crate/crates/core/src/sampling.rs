//! The uniform (baseline) and Chernoff-optimal dynamic sampling algorithms.
//!
//! Both spend the same increment `round(p1 |E|)` on top of an initial sample
//! `E0` and return block labels estimated by ASE followed by GMM. Neither
//! ever reads the true labels carried by the input graph.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::chernoff::{chernoff_info_raw, ChernoffOptions};
use crate::cluster::{estimate_block_model, fit_gmm, GmmConfig, MixtureFit};
use crate::error::{Error, Result};
use crate::pairs::{pair_count, pair_index, PairSet};
use crate::rng::{derive_seed, rng_from_seed};
use crate::sbm::{rejection_subset, restrict_graph, round_count, EdgeBudget, ObservedGraph};
use crate::spectral::{ase_auto, Signature, SpectralConfig};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PipelineConfig {
    pub spectral: SpectralConfig,
    pub gmm: GmmConfig,
    pub chernoff: ChernoffOptions,
}

/// Labels from ASE with an elbow-selected dimension followed by GMM with BIC.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub labels: Vec<usize>,
    pub k_hat: usize,
    pub d_hat: usize,
    pub signature: Signature,
    pub fit: MixtureFit,
}

/// Embed and cluster an observed graph.
///
/// The upper end of the mixture range is lowered when the embedding
/// dimension leaves too few points per parameter block.
pub fn cluster_graph(graph: &ObservedGraph, seed: u64, cfg: &PipelineConfig) -> Result<Clustering> {
    let (emb, _) = ase_auto(graph, &cfg.spectral)?;
    let x = emb.signature_ordered();
    let (n, d) = x.shape();
    let k_min = *cfg.gmm.k_range.start();
    let feasible = n.saturating_sub(1) / (d + 1);
    let k_max = (*cfg.gmm.k_range.end()).min(feasible).max(k_min);
    let gmm = GmmConfig { k_range: k_min..=k_max, ..cfg.gmm.clone() };
    let fit = fit_gmm(&x, seed, &gmm)?;
    Ok(Clustering { labels: fit.labels.clone(), k_hat: fit.k(), d_hat: d, signature: emb.signature, fit })
}

/// Why Algorithm 2 sampled uniformly instead.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fallback {
    /// The initial clustering found a single block.
    SingleCluster,
    /// The Chernoff computation on the estimated model failed numerically.
    ChernoffFailure,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Diagnostics {
    /// Active pair of the estimated initial model, in initial-label indices.
    pub active_pair: Option<(usize, usize)>,
    pub initial_k_hat: Option<usize>,
    pub initial_d_hat: Option<usize>,
    /// `round(p1 |E| (pi_k + pi_l)^2)`.
    pub target_e1: usize,
    /// `|E*|`: unobserved pairs inside the active blocks.
    pub e_star: usize,
    /// Remainder pairs that could not be drawn.
    pub shortfall: usize,
    pub fallback: Option<Fallback>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplingOutcome {
    pub tau_hat: Vec<usize>,
    pub k_hat: usize,
    pub d_hat: usize,
    pub observed: PairSet,
    pub budget: EdgeBudget,
    pub diagnostics: Diagnostics,
}

// Stream coordinates under the run seed.
const STREAM_E1: u64 = 1;
const STREAM_E11: u64 = 2;
const STREAM_FINAL_GMM: u64 = 3;
const STREAM_INITIAL_GMM: u64 = 4;

fn increment(e0: &PairSet, p1: f64) -> Result<usize> {
    if !(p1 >= 0.0 && p1 < 1.0) {
        return Err(Error::InvalidParameter { name: "p1", value: p1 });
    }
    let total = e0.universe();
    let inc = round_count(p1 * total as f64);
    let available = total - e0.len();
    if inc > available {
        return Err(Error::BudgetExceeded { requested: inc, available });
    }
    Ok(inc)
}

fn check_inputs(truth: &ObservedGraph, e0: &PairSet) -> Result<()> {
    if truth.n() != e0.vertex_count() {
        return Err(Error::DimensionMismatch { expected: truth.n(), found: e0.vertex_count() });
    }
    Ok(())
}

/// `count` pairs drawn uniformly from the pairs outside `exclude`.
fn uniform_outside(exclude: &[&PairSet], n: usize, count: usize, seed: u64) -> PairSet {
    let universe = pair_count(n);
    let mut taken = 0;
    for e in exclude {
        taken += e.len();
    }
    let available = universe - taken;
    let mut rng = rng_from_seed(seed);
    let outside = |idx: usize| exclude.iter().all(|e| !e.contains_index(idx));
    rejection_subset(
        n,
        available,
        count,
        &mut rng,
        |r| r.random_range(0..universe),
        outside,
        |emit| (0..universe).filter(|&i| outside(i)).for_each(emit),
    )
}

fn finish(
    truth: &ObservedGraph,
    budget: EdgeBudget,
    seed: u64,
    cfg: &PipelineConfig,
    diagnostics: Diagnostics,
) -> Result<SamplingOutcome> {
    debug_assert!(budget.is_disjoint());
    let observed = budget.observed();
    let graph = restrict_graph(truth, &observed).without_labels();
    let c = cluster_graph(&graph, derive_seed(seed, &[STREAM_FINAL_GMM]), cfg)?;
    Ok(SamplingOutcome { tau_hat: c.labels, k_hat: c.k_hat, d_hat: c.d_hat, observed, budget, diagnostics })
}

/// Uniform dynamic sampling: `E1` is `round(p1 |E|)` pairs drawn uniformly
/// from the pairs outside `E0`.
pub fn algorithm1_uniform(
    truth: &ObservedGraph,
    e0: &PairSet,
    p1: f64,
    seed: u64,
    cfg: &PipelineConfig,
) -> Result<SamplingOutcome> {
    check_inputs(truth, e0)?;
    let truth = truth.without_labels();
    let inc = increment(e0, p1)?;
    let n = truth.n();
    let e1 = uniform_outside(&[e0], n, inc, derive_seed(seed, &[STREAM_E1]));
    let budget =
        EdgeBudget { e0: e0.clone(), e1, e11: PairSet::empty(n), p0: e0.len() as f64 / pair_count(n) as f64, p1 };
    finish(&truth, budget, seed, cfg, Diagnostics::default())
}

/// Output of Algorithm 2 before any increment is spent: clustering of the
/// `E0` graph and the Chernoff-active pair of the estimated model.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialStage {
    pub clustering: Clustering,
    pub pi_hat: Vec<f64>,
    pub active: core::result::Result<(usize, usize), Fallback>,
}

/// Steps up to the choice of active blocks. Depends only on `(truth, E0)`,
/// so callers sweeping `p1` may compute it once.
pub fn initial_stage(truth: &ObservedGraph, e0: &PairSet, seed: u64, cfg: &PipelineConfig) -> Result<InitialStage> {
    check_inputs(truth, e0)?;
    let g0 = restrict_graph(&truth.without_labels(), e0);
    let clustering = cluster_graph(&g0, derive_seed(seed, &[STREAM_INITIAL_GMM]), cfg)?;
    let (b_hat, pi_hat) = estimate_block_model(&clustering.fit, clustering.signature)?;
    let active = if clustering.k_hat < 2 {
        Err(Fallback::SingleCluster)
    } else {
        match chernoff_info_raw(&b_hat, &pi_hat, &cfg.chernoff) {
            Ok(report) if report.rho.is_finite() => Ok(report.active),
            _ => Err(Fallback::ChernoffFailure),
        }
    };
    Ok(InitialStage { clustering, pi_hat, active })
}

/// Chernoff-optimal dynamic sampling.
///
/// The increment is spent first on unobserved pairs whose endpoints both
/// carry an initial label in the active pair, up to
/// `round(p1 |E| (pi_k + pi_l)^2)`, and the remainder uniformly elsewhere.
pub fn algorithm2_chernoff(
    truth: &ObservedGraph,
    e0: &PairSet,
    p1: f64,
    seed: u64,
    cfg: &PipelineConfig,
) -> Result<SamplingOutcome> {
    let initial = initial_stage(truth, e0, seed, cfg)?;
    algorithm2_with_initial(truth, e0, &initial, p1, seed, cfg)
}

/// [`algorithm2_chernoff`] from a precomputed [`InitialStage`].
pub fn algorithm2_with_initial(
    truth: &ObservedGraph,
    e0: &PairSet,
    initial: &InitialStage,
    p1: f64,
    seed: u64,
    cfg: &PipelineConfig,
) -> Result<SamplingOutcome> {
    check_inputs(truth, e0)?;
    let truth = truth.without_labels();
    let inc = increment(e0, p1)?;
    let n = truth.n();
    let total = pair_count(n);
    let mut diag = Diagnostics {
        initial_k_hat: Some(initial.clustering.k_hat),
        initial_d_hat: Some(initial.clustering.d_hat),
        ..Diagnostics::default()
    };
    let p0 = e0.len() as f64 / total as f64;

    let (k, l) = match initial.active {
        Ok(pair) => pair,
        Err(why) => {
            diag.fallback = Some(why);
            let e1 = uniform_outside(&[e0], n, inc, derive_seed(seed, &[STREAM_E1]));
            let budget = EdgeBudget { e0: e0.clone(), e1, e11: PairSet::empty(n), p0, p1 };
            return finish(&truth, budget, seed, cfg, diag);
        }
    };
    diag.active_pair = Some((k, l));

    let labels = &initial.clustering.labels;
    let members: Vec<usize> = (0..n).filter(|&v| labels[v] == k || labels[v] == l).collect();
    let m = members.len();
    let in_active = {
        let mut mask = vec![false; n];
        members.iter().for_each(|&v| mask[v] = true);
        mask
    };
    let observed_inside = e0.iter().filter(|&(i, j)| in_active[i] && in_active[j]).count();
    let e_star = pair_count(m) - observed_inside;
    diag.e_star = e_star;
    let s = initial.pi_hat[k] + initial.pi_hat[l];
    diag.target_e1 = round_count(p1 * total as f64 * s * s);
    let n_e1 = diag.target_e1.min(e_star).min(inc);

    let mut rng = rng_from_seed(derive_seed(seed, &[STREAM_E1]));
    let e1 = if m < 2 {
        PairSet::empty(n)
    } else {
        let draw = |r: &mut crate::rng::SeededRng| {
            let a = r.random_range(0..m);
            let mut b = r.random_range(0..m - 1);
            if b >= a {
                b += 1;
            }
            let (i, j) = (members[a.min(b)], members[a.max(b)]);
            pair_index(n, i, j)
        };
        rejection_subset(
            n,
            e_star,
            n_e1,
            &mut rng,
            draw,
            |idx| !e0.contains_index(idx),
            |emit| {
                for (a, &i) in members.iter().enumerate() {
                    for &j in &members[a + 1..] {
                        let idx = pair_index(n, i, j);
                        if !e0.contains_index(idx) {
                            emit(idx);
                        }
                    }
                }
            },
        )
    };

    let remainder = inc - e1.len();
    let pool = total - e0.len() - e1.len();
    let n_e11 = remainder.min(pool);
    diag.shortfall = remainder - n_e11;
    let e11 = uniform_outside(&[e0, &e1], n, n_e11, derive_seed(seed, &[STREAM_E11]));
    let budget = EdgeBudget { e0: e0.clone(), e1, e11, p0, p1 };
    finish(&truth, budget, seed, cfg, diag)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::ari;
    use crate::sbm::{initial_sample, make_block_model, sample_sbm};
    use nalgebra::DMatrix;

    fn planted(n: usize, seed: u64) -> (ObservedGraph, Vec<usize>) {
        let b = DMatrix::from_row_slice(2, 2, &[0.8, 0.1, 0.1, 0.7]);
        let m = make_block_model(b, vec![0.5, 0.5]).unwrap();
        sample_sbm(&m, n, seed).unwrap()
    }

    fn small_cfg() -> PipelineConfig {
        // A short scree: the noise bulk of a small graph would swamp a 100-value scan.
        PipelineConfig {
            spectral: SpectralConfig { max_rank: 12, ..SpectralConfig::default() },
            gmm: GmmConfig { k_range: 1..=4, restarts: 3, ..GmmConfig::default() },
            ..PipelineConfig::default()
        }
    }

    #[test]
    fn budgets_match_and_are_disjoint() {
        let (g, _) = planted(120, 1);
        let e0 = initial_sample(120, 0.3, 2).unwrap();
        let cfg = small_cfg();
        let inc = round_count(0.25 * pair_count(120) as f64);
        let a = algorithm1_uniform(&g, &e0, 0.25, 3, &cfg).unwrap();
        let b = algorithm2_chernoff(&g, &e0, 0.25, 3, &cfg).unwrap();
        for o in [&a, &b] {
            assert!(o.budget.is_disjoint());
            assert_eq!(o.budget.increment(), inc);
            assert_eq!(o.observed.len(), e0.len() + inc);
            assert!(e0.is_subset(&o.observed));
        }
        assert!(b.diagnostics.active_pair.is_some(), "{:?}", b.diagnostics);
        assert_eq!(b.budget.e1.len(), b.diagnostics.target_e1.min(b.diagnostics.e_star).min(inc));
    }

    #[test]
    fn runs_are_deterministic_and_ignore_true_labels() {
        let (g, _) = planted(100, 4);
        let e0 = initial_sample(100, 0.3, 5).unwrap();
        let cfg = small_cfg();
        let stripped = g.without_labels();
        for f in [algorithm1_uniform, algorithm2_chernoff] {
            let x = f(&g, &e0, 0.2, 6, &cfg).unwrap();
            assert_eq!(x, f(&g, &e0, 0.2, 6, &cfg).unwrap());
            assert_eq!(x, f(&stripped, &e0, 0.2, 6, &cfg).unwrap());
        }
    }

    #[test]
    fn zero_increment_clusters_initial_graph() {
        let (g, _) = planted(80, 7);
        let e0 = initial_sample(80, 0.5, 8).unwrap();
        let cfg = small_cfg();
        let out = algorithm1_uniform(&g, &e0, 0.0, 9, &cfg).unwrap();
        assert_eq!(out.observed, e0);
        let g0 = restrict_graph(&g, &e0).without_labels();
        let direct = cluster_graph(&g0, derive_seed(9, &[STREAM_FINAL_GMM]), &cfg).unwrap();
        assert_eq!(out.tau_hat, direct.labels);
    }

    #[test]
    fn over_budget_is_rejected() {
        let (g, _) = planted(30, 1);
        let e0 = initial_sample(30, 0.6, 1).unwrap();
        let err = algorithm1_uniform(&g, &e0, 0.5, 1, &small_cfg()).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { .. }));
    }

    #[test]
    fn small_active_region_takes_all_of_e_star() {
        // Shrink the active region by hand so the target exceeds |E*|.
        let (g, _) = planted(100, 11);
        let e0 = initial_sample(100, 0.2, 12).unwrap();
        let cfg = small_cfg();
        let mut stage = initial_stage(&g, &e0, 13, &cfg).unwrap();
        let (k, l) = stage.active.unwrap();
        let spare = stage.clustering.k_hat;
        for (v, lab) in stage.clustering.labels.iter_mut().enumerate() {
            if v >= 12 {
                *lab = spare;
            } else if v % 2 == 0 {
                *lab = k;
            } else {
                *lab = l;
            }
        }
        let out = algorithm2_with_initial(&g, &e0, &stage, 0.5, 13, &cfg).unwrap();
        let d = &out.diagnostics;
        let observed_inside = e0.iter().filter(|&(i, j)| i < 12 && j < 12).count();
        assert_eq!(d.e_star, 66 - observed_inside);
        assert!(d.target_e1 > d.e_star, "{d:?}");
        assert_eq!(out.budget.e1.len(), d.e_star);
        assert!(out.budget.e1.iter().all(|(i, j)| i < 12 && j < 12));
        assert_eq!(out.budget.increment(), round_count(0.5 * pair_count(100) as f64));
        assert_eq!(d.shortfall, 0);
    }

    #[test]
    fn single_block_falls_back_to_uniform() {
        let m = make_block_model(DMatrix::from_element(1, 1, 0.3), vec![1.0]).unwrap();
        let (g, _) = sample_sbm(&m, 150, 3).unwrap();
        let e0 = initial_sample(150, 0.3, 4).unwrap();
        let out = algorithm2_chernoff(&g, &e0, 0.2, 5, &small_cfg()).unwrap();
        assert_eq!(out.diagnostics.fallback, Some(Fallback::SingleCluster));
        assert!(out.budget.e11.is_empty());
        assert_eq!(out.budget.increment(), round_count(0.2 * pair_count(150) as f64));
    }

    #[test]
    fn dense_observation_recovers_planted_blocks() {
        let (g, tau) = planted(200, 21);
        let e0 = initial_sample(200, 0.3, 22).unwrap();
        let out = algorithm2_chernoff(&g, &e0, 0.4, 23, &small_cfg()).unwrap();
        assert!(ari(&out.tau_hat, &tau).unwrap() > 0.95);
    }
}
