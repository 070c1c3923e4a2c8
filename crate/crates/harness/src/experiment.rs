//! Experiment drivers behind the CLI subcommands.

use std::path::{Path, PathBuf};
use std::time::Instant;

use dynsample_core::chernoff::{scale_curve, scheme_curve, ChernoffOptions};
use dynsample_core::cluster::ari;
use dynsample_core::pairs::PairSet;
use dynsample_core::rng::derive_seed;
use dynsample_core::sampling::{
    algorithm1_uniform, algorithm2_with_initial, cluster_graph, initial_stage, Fallback, InitialStage, PipelineConfig,
    SamplingOutcome,
};
use dynsample_core::sbm::{initial_sample, sample_sbm, ObservedGraph};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::io::{ensure_dir, load_edge_list, load_labels, write_labels, write_vertex_map};
use crate::report::{paired, summarize, timings, write_csv, PairedRow, SummaryRow, TrialRecord, CHERNOFF, UNIFORM};

pub const DEFAULT_OUT: &str = "dynsample-out";

// Seed coordinates under the master seed.
const TRIAL: u64 = 0;
const RUN: u64 = 1;
const TRUTH: u64 = 2;
// Coordinates under a trial seed.
const GRAPH: u64 = 0;
const INITIAL: u64 = 1;
const STAGE: u64 = 2;

/// Seeds for one trial. Graph, `E0` and the initial clustering depend on the
/// trial only, so every `p1` and both algorithms see the same inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialSeeds {
    pub graph: u64,
    pub initial: u64,
    pub stage: u64,
}

pub fn trial_seeds(master: u64, trial: usize) -> TrialSeeds {
    let t = derive_seed(master, &[TRIAL, trial as u64]);
    TrialSeeds { graph: derive_seed(t, &[GRAPH]), initial: derive_seed(t, &[INITIAL]), stage: derive_seed(t, &[STAGE]) }
}

/// Seed of one algorithm run: increment draws and final clustering.
pub fn run_seed(master: u64, trial: usize, p1_index: usize, algorithm: u8) -> u64 {
    derive_seed(master, &[RUN, trial as u64, p1_index as u64, algorithm as u64])
}

fn output_dir(cfg: &ExperimentConfig) -> Result<PathBuf> {
    ensure_dir(cfg.out.as_deref().unwrap_or(Path::new(DEFAULT_OUT)))
}

fn chernoff_options(cfg: &ExperimentConfig) -> ChernoffOptions {
    cfg.pipeline().chernoff
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveRow {
    pub p1: f64,
    pub rho_b: f64,
    pub rho_b0: f64,
    pub rho_baseline: f64,
    pub rho_optimal: f64,
    pub p1_star: f64,
    pub p1_max: f64,
    pub p11_max: f64,
    pub active_k: usize,
    pub active_ell: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleRow {
    pub p: f64,
    pub rho: f64,
}

#[derive(Debug, Clone)]
pub struct TheoryOutput {
    pub curve: Vec<CurveRow>,
    pub scale: Vec<ScaleRow>,
    pub dir: PathBuf,
}

/// `theory_curve.csv` (uniform vs targeted over `(0, p11_max]`) and
/// `scale_curve.csv` (`rho(pB)` for `p = j / grid`, `j = 1..=grid`).
pub fn run_theory_curve(cfg: &ExperimentConfig) -> Result<TheoryOutput> {
    let model = cfg.model.block_model()?;
    let opts = chernoff_options(cfg);
    let c = scheme_curve(&model, cfg.p0, cfg.grid, &opts)?;
    let curve: Vec<CurveRow> = (0..c.p1_grid.len())
        .map(|i| CurveRow {
            p1: c.p1_grid[i],
            rho_b: c.rho_b,
            rho_b0: c.rho_b0,
            rho_baseline: c.rho_baseline[i],
            rho_optimal: c.rho_optimal[i],
            p1_star: c.p1_star,
            p1_max: c.p1_max,
            p11_max: c.p11_max,
            active_k: c.active_optimal[i].0,
            active_ell: c.active_optimal[i].1,
        })
        .collect();
    let scales: Vec<f64> = (1..=cfg.grid).map(|j| j as f64 / cfg.grid as f64).collect();
    let rhos = scale_curve(&model, &scales, &opts)?;
    let scale = scales.into_iter().zip(rhos).map(|(p, rho)| ScaleRow { p, rho }).collect::<Vec<_>>();
    let dir = output_dir(cfg)?;
    write_csv(&dir.join("theory_curve.csv"), &curve)?;
    write_csv(&dir.join("scale_curve.csv"), &scale)?;
    Ok(TheoryOutput { curve, scale, dir })
}

fn flags(out: &SamplingOutcome) -> String {
    let d = &out.diagnostics;
    let mut f = Vec::new();
    match d.fallback {
        Some(Fallback::SingleCluster) => f.push("fallback=single-cluster".to_string()),
        Some(Fallback::ChernoffFailure) => f.push("fallback=chernoff-failure".to_string()),
        None => {}
    }
    if let Some((k, l)) = d.active_pair {
        f.push(format!("active={k}-{l}"));
    }
    if d.shortfall > 0 {
        f.push(format!("shortfall={}", d.shortfall));
    }
    f.join(";")
}

/// Both algorithms at every `p1` for one `(truth, E0)` pair.
#[allow(clippy::too_many_arguments)]
fn run_pair(
    truth: &ObservedGraph,
    tau: &[usize],
    e0: &PairSet,
    stage: &InitialStage,
    stage_ms: f64,
    trial: usize,
    cfg: &ExperimentConfig,
    pipeline: &PipelineConfig,
) -> Result<Vec<TrialRecord>> {
    let master = cfg.master_seed();
    let mut rows = Vec::with_capacity(2 * cfg.p1.len());
    for (i, &p1) in cfg.p1.iter().enumerate() {
        for algorithm in [UNIFORM, CHERNOFF] {
            let seed = run_seed(master, trial, i, algorithm);
            let clock = Instant::now();
            let out = if algorithm == UNIFORM {
                algorithm1_uniform(truth, e0, p1, seed, pipeline)?
            } else {
                algorithm2_with_initial(truth, e0, stage, p1, seed, pipeline)?
            };
            let mut runtime_ms = clock.elapsed().as_secs_f64() * 1e3;
            if algorithm == CHERNOFF {
                runtime_ms += stage_ms;
            }
            rows.push(TrialRecord {
                trial,
                p1,
                algorithm,
                seed,
                p0: cfg.p0,
                ari: ari(&out.tau_hat, tau)?,
                k_hat: out.k_hat,
                d_hat: out.d_hat,
                e1: out.budget.e1.len(),
                e11: out.budget.e11.len(),
                flags: flags(&out),
                runtime_ms,
            });
        }
    }
    Ok(rows)
}

fn one_trial(
    truth: &ObservedGraph,
    tau: &[usize],
    trial: usize,
    seeds: TrialSeeds,
    cfg: &ExperimentConfig,
    pipeline: &PipelineConfig,
) -> Result<Vec<TrialRecord>> {
    let e0 = initial_sample(truth.n(), cfg.p0, seeds.initial)?;
    let clock = Instant::now();
    let stage = initial_stage(truth, &e0, seeds.stage, pipeline)?;
    let stage_ms = clock.elapsed().as_secs_f64() * 1e3;
    run_pair(truth, tau, &e0, &stage, stage_ms, trial, cfg, pipeline)
}

fn in_pool<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| HarnessError::Config(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(job))
}

/// Rows sorted by `(p1 position, trial, algorithm)` so worker count never changes output.
fn sort_records(records: &mut [TrialRecord], p1: &[f64]) {
    let pos = |x: f64| p1.iter().position(|&p| p.to_bits() == x.to_bits()).unwrap_or(usize::MAX);
    records.sort_by_key(|r| (pos(r.p1), r.trial, r.algorithm));
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<TrialRecord>,
    pub summary: Vec<SummaryRow>,
    pub paired: Vec<PairedRow>,
    pub dir: PathBuf,
}

fn write_run(dir: PathBuf, mut records: Vec<TrialRecord>, p1: &[f64]) -> Result<RunOutput> {
    sort_records(&mut records, p1);
    let summary = summarize(&records);
    let paired = paired(&records);
    write_csv(&dir.join("trials.csv"), &records)?;
    write_csv(&dir.join("summary.csv"), &summary)?;
    write_csv(&dir.join("paired.csv"), &paired)?;
    write_csv(&dir.join("timings.csv"), &timings(&records))?;
    Ok(RunOutput { records, summary, paired, dir })
}

/// Monte Carlo comparison on SBM draws.
///
/// Writes `trials.csv`, `summary.csv`, `paired.csv` and `timings.csv`; all
/// but the last are byte-identical for a fixed config and seed, whatever
/// the worker count. `progress` is called with each finished trial index.
pub fn run_simulation(cfg: &ExperimentConfig, progress: &(dyn Fn(usize) + Sync)) -> Result<RunOutput> {
    let model = cfg.model.block_model()?;
    let pipeline = cfg.pipeline();
    let master = cfg.master_seed();
    let dir = output_dir(cfg)?;
    let trials = in_pool(cfg.workers, || {
        (0..cfg.trials)
            .into_par_iter()
            .map(|t| {
                let seeds = trial_seeds(master, t);
                let (graph, tau) = sample_sbm(&model, cfg.n, seeds.graph)?;
                let rows = one_trial(&graph, &tau, t, seeds, cfg, &pipeline);
                progress(t);
                rows
            })
            .collect::<Result<Vec<_>>>()
    })??;
    write_run(dir, trials.into_iter().flatten().collect(), &cfg.p1)
}

#[derive(Debug, Clone)]
pub struct RealOutput {
    pub run: RunOutput,
    pub n: usize,
    pub edges: usize,
    pub duplicates: usize,
    pub self_loops: usize,
    pub truth_from_full_graph: bool,
}

/// Both algorithms on a loaded graph, against given labels or, when none
/// are given, against the clustering of the complete graph (computed once
/// and written to `truth_labels.tsv`).
pub fn run_real(cfg: &ExperimentConfig, progress: &(dyn Fn(usize) + Sync)) -> Result<RealOutput> {
    let edges = cfg.data.edges.as_deref().ok_or_else(|| HarnessError::Config("missing edge list".into()))?;
    let list = load_edge_list(edges)?;
    let pipeline = cfg.pipeline();
    let master = cfg.master_seed();
    let dir = output_dir(cfg)?;
    write_vertex_map(&dir.join("vertices.map"), &list)?;
    let (tau, from_full) = match cfg.data.labels.as_deref() {
        Some(path) => (load_labels(path, &list)?, false),
        None => {
            let c = cluster_graph(&list.graph, derive_seed(master, &[TRUTH]), &pipeline)?;
            write_labels(&dir.join("truth_labels.tsv"), &list.ids, &c.labels)?;
            (c.labels, true)
        }
    };
    let truth = &list.graph;
    let trials = in_pool(cfg.workers, || {
        (0..cfg.trials)
            .into_par_iter()
            .map(|t| {
                let rows = one_trial(truth, &tau, t, trial_seeds(master, t), cfg, &pipeline);
                progress(t);
                rows
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let run = write_run(dir, trials.into_iter().flatten().collect(), &cfg.p1)?;
    Ok(RealOutput {
        run,
        n: truth.n(),
        edges: truth.edge_count(),
        duplicates: list.duplicates,
        self_loops: list.self_loops,
        truth_from_full_graph: from_full,
    })
}
