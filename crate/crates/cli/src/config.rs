//! Run configuration: one JSON document with a section per stage.
//!
//! Precedence: command-line flags override config values, which override
//! built-in defaults. Unknown keys are rejected so typos fail loudly.

use anyhow::{anyhow, Context};
use envtrack::clusterstats::Tail;
use envtrack::model::Band;
use envtrack::synthcohort::SynthSpec;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    /// Master seed; every stage derives its RNG streams from it.
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    /// Defaults to `run-<seed>`.
    #[serde(default)]
    pub run_id: Option<String>,
    /// Worker threads (default: available cores). Results do not depend on
    /// this.
    #[serde(default)]
    pub jobs: Option<usize>,
    #[serde(default)]
    pub grid: GridConfig,
    /// Bands to analyze where a stage does not dictate its own set.
    #[serde(default = "all_bands")]
    pub bands: Vec<Band>,
    #[serde(default)]
    pub dataset: Option<DatasetConfig>,
    #[serde(default)]
    pub envelope: Option<EnvelopeConfig>,
    #[serde(default)]
    pub preprocess: Option<PreprocessConfig>,
    #[serde(default)]
    pub tmif: Option<TmifConfig>,
    #[serde(default)]
    pub null: Option<NullConfig>,
    #[serde(default)]
    pub cluster: Option<ClusterStageConfig>,
    #[serde(default)]
    pub classify: Option<ClassifyConfig>,
    #[serde(default)]
    pub duration: Option<DurationConfig>,
    #[serde(default)]
    pub synth: Option<SynthSpec>,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn all_bands() -> Vec<Band> {
    Band::ALL.to_vec()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub fs: f64,
    pub t_min_ms: f64,
    pub t_max_ms: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            fs: 128.0,
            t_min_ms: -200.0,
            t_max_ms: 500.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    /// Cohort manifest path (see docs/formats.md).
    pub manifest: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeConfig {
    /// Mono WAV (PCM16 or IEEE float32).
    pub audio: PathBuf,
    /// Intermediate envelope rate where band filters run.
    #[serde(default = "default_env_fs")]
    pub env_fs: f64,
}

fn default_env_fs() -> f64 {
    512.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessConfig {
    /// Rate at which the EEG band filters run.
    pub filter_fs: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self { filter_fs: 512.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct TmifConfig {
    /// Channel selection override (defaults to the manifest's list).
    pub selection: Option<Vec<String>>,
    /// Also compute per-channel (single-channel) TMIFs.
    pub single_channel: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NullConfig {
    pub n_perm: usize,
    /// Bands to compute significance levels for (defaults to `bands`).
    pub bands: Option<Vec<Band>>,
}

impl Default for NullConfig {
    fn default() -> Self {
        Self {
            n_perm: 1000,
            bands: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusterStageConfig {
    pub n_perm: usize,
    pub cluster_alpha: f64,
    pub tail: Tail,
    /// Spatio-temporal test on single-channel TMIFs (needs a layout).
    pub spatiotemporal: bool,
    /// k for the k-nearest-neighbor adjacency.
    pub adjacency_k: usize,
}

impl Default for ClusterStageConfig {
    fn default() -> Self {
        Self {
            n_perm: 5000,
            cluster_alpha: 0.05,
            tail: Tail::TwoSided,
            spatiotemporal: false,
            adjacency_k: 4,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifyConfig {
    pub c_grid: Vec<f64>,
    pub prune_ms: Vec<f64>,
    pub inner_folds: usize,
    /// Also run the leave-one-band-out ablation study.
    pub ablation: bool,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        let cv = envtrack::classifier::CvConfig::default();
        Self {
            c_grid: cv.c_grid,
            prune_ms: cv.prune_ms,
            inner_folds: cv.inner_folds,
            ablation: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DurationConfig {
    /// Durations in minutes (e.g. `[1, 3, 5, ..., 25]`).
    pub minutes: Vec<f64>,
}

impl Config {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let config: Config = serde_json::from_str(&text)
            .with_context(|| format!("invalid config {}", path.display()))?;
        Ok(config)
    }

    pub fn run_id(&self) -> String {
        self.run_id
            .clone()
            .unwrap_or_else(|| format!("run-{}", self.seed))
    }

    pub fn lag_grid(&self) -> anyhow::Result<envtrack::LagGrid> {
        Ok(envtrack::LagGrid::new(
            self.grid.fs,
            self.grid.t_min_ms,
            self.grid.t_max_ms,
        )?)
    }

    pub fn cv_config(&self) -> envtrack::classifier::CvConfig {
        let stage = self.classify.clone().unwrap_or_default();
        envtrack::classifier::CvConfig {
            c_grid: stage.c_grid,
            prune_ms: stage.prune_ms,
            inner_folds: stage.inner_folds,
            seed: self.seed,
            ..Default::default()
        }
    }

    pub fn dataset_manifest(&self) -> anyhow::Result<&Path> {
        Ok(&self
            .dataset
            .as_ref()
            .ok_or_else(|| anyhow!("config section `dataset` (with `manifest`) is required"))?
            .manifest)
    }
}
