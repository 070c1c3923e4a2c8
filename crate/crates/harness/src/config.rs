//! Experiment configuration: one JSON document, with CLI flags layered on top.

use std::fs;
use std::path::{Path, PathBuf};

use dynsample_core::chernoff::{ChernoffOptions, Statistic};
use dynsample_core::cluster::GmmConfig;
use dynsample_core::nalgebra::DMatrix;
use dynsample_core::sampling::PipelineConfig;
use dynsample_core::sbm::{make_block_model, BlockModel};
use dynsample_core::spectral::SpectralConfig;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

pub const SIMULATION_K_MAX: usize = 9;
/// Real graphs may carry many more blocks (18 locations in LastFM Asia).
pub const REAL_DATA_K_MAX: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    TheoryCurve,
    Simulation,
    RealData,
}

/// Block matrix rows and assignment probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub b: Vec<Vec<f64>>,
    pub pi: Vec<f64>,
}

impl ModelSpec {
    /// Rank-one four-block example with `nu = (0.2, 0.4, 0.5, 0.9)`.
    pub fn rank_one_example(pi: Vec<f64>) -> Self {
        let nu = [0.2, 0.4, 0.5, 0.9];
        ModelSpec { b: nu.iter().map(|a| nu.iter().map(|b| a * b).collect()).collect(), pi }
    }

    pub fn block_model(&self) -> Result<BlockModel> {
        let k = self.b.len();
        if k == 0 || self.b.iter().any(|row| row.len() != k) {
            return Err(HarnessError::Config("model.b must be a non-empty square matrix".into()));
        }
        let b = DMatrix::from_fn(k, k, |i, j| self.b[i][j]);
        make_block_model(b, self.pi.clone()).map_err(|e| HarnessError::Config(format!("model: {e}")))
    }
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::rank_one_example(vec![0.25; 4])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GmmSettings {
    pub k_min: usize,
    /// Defaults to 9 for simulations and 20 for real data.
    pub k_max: Option<usize>,
    pub restarts: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for GmmSettings {
    fn default() -> Self {
        let d = GmmConfig::default();
        GmmSettings { k_min: *d.k_range.start(), k_max: None, restarts: d.restarts, tol: d.tol, max_iter: d.max_iter }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralSettings {
    /// Scree length scanned for the elbow, capped at `n - 1`.
    pub max_rank: usize,
    /// Which profile-likelihood elbow picks the dimension (1 = first).
    pub elbow: usize,
}

impl Default for SpectralSettings {
    fn default() -> Self {
        let d = SpectralConfig::default();
        SpectralSettings { max_rank: d.max_rank, elbow: d.elbow }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChernoffSettings {
    pub grid: usize,
    pub tol: f64,
    /// Use the log-determinant statistic at this `n` instead of the approximate one.
    pub exact_n: Option<f64>,
}

impl Default for ChernoffSettings {
    fn default() -> Self {
        let d = ChernoffOptions::default();
        ChernoffSettings { grid: d.grid, tol: d.tol, exact_n: None }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSpec {
    pub edges: Option<PathBuf>,
    /// Without labels the truth is the clustering of the complete graph.
    pub labels: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Option<Mode>,
    pub model: ModelSpec,
    pub n: usize,
    pub p0: f64,
    pub p1: Vec<f64>,
    /// Theory curves: number of `p1` points up to `p11_max` and of `p` points in `(0, 1]`.
    pub grid: usize,
    pub trials: usize,
    pub seed: Option<u64>,
    pub workers: usize,
    pub gmm: GmmSettings,
    pub spectral: SpectralSettings,
    pub chernoff: ChernoffSettings,
    pub data: DataSpec,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            mode: None,
            model: ModelSpec::default(),
            n: 2000,
            p0: 0.15,
            p1: vec![0.1, 0.2, 0.3, 0.4, 0.5],
            grid: 100,
            trials: 50,
            seed: None,
            workers: 1,
            gmm: GmmSettings::default(),
            spectral: SpectralSettings::default(),
            chernoff: ChernoffSettings::default(),
            data: DataSpec::default(),
            out: None,
        }
    }
}

/// Command-line values that replace config fields when present.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub p0: Option<f64>,
    pub p1: Option<Vec<f64>>,
    pub trials: Option<usize>,
    pub edges: Option<PathBuf>,
    pub labels: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn apply(&mut self, o: Overrides) {
        let Overrides { out, seed, workers, p0, p1, trials, edges, labels } = o;
        self.out = out.or(self.out.take());
        self.seed = seed.or(self.seed);
        self.workers = workers.unwrap_or(self.workers);
        self.p0 = p0.unwrap_or(self.p0);
        self.p1 = p1.unwrap_or(std::mem::take(&mut self.p1));
        self.trials = trials.unwrap_or(self.trials);
        self.data.edges = edges.or(self.data.edges.take());
        self.data.labels = labels.or(self.data.labels.take());
    }

    /// Check the fields `mode` needs and fix `self.mode` to it.
    pub fn validate(&mut self, mode: Mode) -> Result<()> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if let Some(m) = self.mode {
            if m != mode {
                return bad(format!("config mode {m:?} does not match the {mode:?} command"));
            }
        }
        self.mode = Some(mode);
        if self.seed.is_none() {
            return bad("a master seed is required (config `seed` or --seed)".into());
        }
        if !(self.p0 > 0.0 && self.p0 < 1.0) {
            return bad(format!("p0 = {} must lie in (0, 1)", self.p0));
        }
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        let k_max =
            *self.gmm.k_max.get_or_insert(if mode == Mode::RealData { REAL_DATA_K_MAX } else { SIMULATION_K_MAX });
        let g = &self.gmm;
        if g.k_min == 0 || g.k_min > k_max || g.restarts == 0 || g.max_iter == 0 || !(g.tol > 0.0) {
            return bad("gmm settings need 1 <= k_min <= k_max, restarts >= 1, max_iter >= 1, tol > 0".into());
        }
        if self.spectral.max_rank < 2 || self.spectral.elbow == 0 {
            return bad("spectral settings need max_rank >= 2 and elbow >= 1".into());
        }
        if self.chernoff.grid == 0 || !(self.chernoff.tol > 0.0) {
            return bad("chernoff settings need grid >= 1 and tol > 0".into());
        }
        match mode {
            Mode::TheoryCurve => {
                self.model.block_model()?;
                if self.grid == 0 {
                    return bad("grid must be at least 1".into());
                }
            }
            Mode::Simulation | Mode::RealData => {
                if self.trials == 0 {
                    return bad("trials must be at least 1".into());
                }
                if self.p1.is_empty() {
                    return bad("p1 list is empty".into());
                }
                // p1 = 0 is allowed as the no-increment reference point.
                if let Some(p) = self.p1.iter().find(|&&p| !(p >= 0.0 && p < 1.0 - self.p0)) {
                    return bad(format!("p1 = {p} must lie in [0, 1 - p0)"));
                }
                if mode == Mode::Simulation {
                    let model = self.model.block_model()?;
                    if self.n < model.k().max(2) {
                        return bad(format!("n = {} is smaller than the number of blocks", self.n));
                    }
                } else if self.data.edges.is_none() {
                    return bad("real-data mode needs an edge list (config data.edges or --edges)".into());
                }
            }
        }
        Ok(())
    }

    pub fn master_seed(&self) -> u64 {
        self.seed.expect("validated config has a seed")
    }

    pub fn pipeline(&self) -> PipelineConfig {
        let g = &self.gmm;
        let statistic = match self.chernoff.exact_n {
            Some(n) => Statistic::Exact { n },
            None => Statistic::Approximate,
        };
        PipelineConfig {
            spectral: SpectralConfig {
                max_rank: self.spectral.max_rank,
                elbow: self.spectral.elbow,
                ..SpectralConfig::default()
            },
            gmm: GmmConfig {
                k_range: g.k_min..=g.k_max.unwrap_or(SIMULATION_K_MAX),
                restarts: g.restarts,
                tol: g.tol,
                max_iter: g.max_iter,
                ..GmmConfig::default()
            },
            chernoff: ChernoffOptions {
                grid: self.chernoff.grid,
                tol: self.chernoff.tol,
                statistic,
                ..ChernoffOptions::default()
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_missing_fields() {
        let mut c = ExperimentConfig::from_json(r#"{"seed": 7, "n": 300, "gmm": {"restarts": 3}}"#).unwrap();
        c.validate(Mode::Simulation).unwrap();
        assert_eq!(c.n, 300);
        assert_eq!(c.gmm.restarts, 3);
        assert_eq!(c.gmm.k_max, Some(9));
        let mut r = ExperimentConfig {
            seed: Some(1),
            data: DataSpec { edges: Some("g".into()), labels: None },
            ..ExperimentConfig::default()
        };
        r.validate(Mode::RealData).unwrap();
        assert_eq!(r.pipeline().gmm.k_range, 1..=20);
        assert_eq!(c.model, ModelSpec::default());
    }

    #[test]
    fn rejects_unknown_fields_and_missing_seed() {
        assert!(ExperimentConfig::from_json(r#"{"sed": 1}"#).is_err());
        let mut c = ExperimentConfig::default();
        assert!(c.validate(Mode::TheoryCurve).is_err());
        c.apply(Overrides { seed: Some(1), ..Overrides::default() });
        c.validate(Mode::TheoryCurve).unwrap();
    }

    #[test]
    fn p1_range_and_mode_are_checked() {
        let mut c = ExperimentConfig { seed: Some(1), p0: 0.6, p1: vec![0.5], ..ExperimentConfig::default() };
        assert!(c.validate(Mode::Simulation).is_err());
        let mut c = ExperimentConfig { seed: Some(1), mode: Some(Mode::TheoryCurve), ..ExperimentConfig::default() };
        assert!(c.validate(Mode::Simulation).is_err());
        let mut c = ExperimentConfig { seed: Some(1), ..ExperimentConfig::default() };
        assert!(c.validate(Mode::RealData).is_err());
    }
}
