//! The run configuration: a single flat key-value file (TOML syntax, no
//! nesting) holding every knob of the pipeline. Unknown keys are rejected by
//! name. Command-line flags override file values.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use toml::Value;

use tseg_core::boundary::AgnesOptions;
use tseg_core::encoder::EncoderConfig;
use tseg_core::ensemble::EnsembleSpec;
use tseg_core::ic::TrainSchedule;
use tseg_core::losses::{LossWeights, SmoothingVariant};
use tseg_core::synth::{SynthConfig, TimestampMode};

/// Every configuration key with its default. See the README for the schema.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub manifest: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,

    pub ensemble: String,
    pub kmedoids_max_iters: usize,
    pub agnes_max_frames: usize,
    pub agnes_downsample: usize,

    pub hidden_dim: usize,
    pub layers: usize,
    pub kernel: usize,

    pub warmup_epochs: usize,
    pub ic_epochs: usize,
    pub learning_rate: f64,

    pub lambda: f64,
    pub beta: f64,
    pub gamma: f64,
    pub theta: f64,
    pub smoothing: String,

    pub synth_videos: usize,
    pub synth_frames_min: usize,
    pub synth_frames_max: usize,
    pub synth_segments_min: usize,
    pub synth_segments_max: usize,
    pub synth_dim: usize,
    pub synth_classes: usize,
    pub synth_mean_scale: f64,
    pub synth_noise_sigma: f64,
    pub synth_min_segment: usize,
    pub timestamp_mode: String,

    pub checkpoint: Option<PathBuf>,
    pub ple_dir: Option<PathBuf>,
    pub pred_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            manifest: None,
            out: PathBuf::from("out"),
            seed: 7,
            ensemble: "energy,kmedoids,agnes".into(),
            kmedoids_max_iters: 50,
            agnes_max_frames: 20_000,
            agnes_downsample: 0,
            hidden_dim: 64,
            layers: 4,
            kernel: 3,
            warmup_epochs: 50,
            ic_epochs: 20,
            learning_rate: 5e-4,
            lambda: 0.15,
            beta: 0.075,
            gamma: 0.15,
            theta: 4.0,
            smoothing: "clamp".into(),
            synth_videos: 20,
            synth_frames_min: 400,
            synth_frames_max: 800,
            synth_segments_min: 6,
            synth_segments_max: 12,
            synth_dim: 16,
            synth_classes: 8,
            synth_mean_scale: 4.0,
            synth_noise_sigma: 1.0,
            synth_min_segment: 10,
            timestamp_mode: "middle".into(),
            checkpoint: None,
            ple_dir: None,
            pred_dir: None,
        }
    }
}

fn as_usize(key: &str, value: &Value) -> Result<usize> {
    value
        .as_integer()
        .filter(|&v| v >= 0)
        .map(|v| v as usize)
        .ok_or_else(|| anyhow!("config key '{key}' must be a non-negative integer"))
}

fn as_u64(key: &str, value: &Value) -> Result<u64> {
    value
        .as_integer()
        .filter(|&v| v >= 0)
        .map(|v| v as u64)
        .ok_or_else(|| anyhow!("config key '{key}' must be a non-negative integer"))
}

fn as_f64(key: &str, value: &Value) -> Result<f64> {
    match value {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        _ => bail!("config key '{key}' must be a number"),
    }
}

fn as_string(key: &str, value: &Value) -> Result<String> {
    value
        .as_str()
        .map(str::to_string)
        .ok_or_else(|| anyhow!("config key '{key}' must be a string"))
}

impl RunConfig {
    /// Parses a config file over the defaults, rejecting unknown keys.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let table: toml::Table = text
            .parse()
            .with_context(|| format!("parsing config {}", path.display()))?;
        let mut cfg = Self::default();
        for (key, value) in &table {
            match key.as_str() {
                "manifest" => cfg.manifest = Some(PathBuf::from(as_string(key, value)?)),
                "out" => cfg.out = PathBuf::from(as_string(key, value)?),
                "seed" => cfg.seed = as_u64(key, value)?,
                "ensemble" => cfg.ensemble = as_string(key, value)?,
                "kmedoids_max_iters" => cfg.kmedoids_max_iters = as_usize(key, value)?,
                "agnes_max_frames" => cfg.agnes_max_frames = as_usize(key, value)?,
                "agnes_downsample" => cfg.agnes_downsample = as_usize(key, value)?,
                "hidden_dim" => cfg.hidden_dim = as_usize(key, value)?,
                "layers" => cfg.layers = as_usize(key, value)?,
                "kernel" => cfg.kernel = as_usize(key, value)?,
                "warmup_epochs" => cfg.warmup_epochs = as_usize(key, value)?,
                "ic_epochs" => cfg.ic_epochs = as_usize(key, value)?,
                "learning_rate" => cfg.learning_rate = as_f64(key, value)?,
                "lambda" => cfg.lambda = as_f64(key, value)?,
                "beta" => cfg.beta = as_f64(key, value)?,
                "gamma" => cfg.gamma = as_f64(key, value)?,
                "theta" => cfg.theta = as_f64(key, value)?,
                "smoothing" => cfg.smoothing = as_string(key, value)?,
                "synth_videos" => cfg.synth_videos = as_usize(key, value)?,
                "synth_frames_min" => cfg.synth_frames_min = as_usize(key, value)?,
                "synth_frames_max" => cfg.synth_frames_max = as_usize(key, value)?,
                "synth_segments_min" => cfg.synth_segments_min = as_usize(key, value)?,
                "synth_segments_max" => cfg.synth_segments_max = as_usize(key, value)?,
                "synth_dim" => cfg.synth_dim = as_usize(key, value)?,
                "synth_classes" => cfg.synth_classes = as_usize(key, value)?,
                "synth_mean_scale" => cfg.synth_mean_scale = as_f64(key, value)?,
                "synth_noise_sigma" => cfg.synth_noise_sigma = as_f64(key, value)?,
                "synth_min_segment" => cfg.synth_min_segment = as_usize(key, value)?,
                "timestamp_mode" => cfg.timestamp_mode = as_string(key, value)?,
                "checkpoint" => cfg.checkpoint = Some(PathBuf::from(as_string(key, value)?)),
                "ple_dir" => cfg.ple_dir = Some(PathBuf::from(as_string(key, value)?)),
                "pred_dir" => cfg.pred_dir = Some(PathBuf::from(as_string(key, value)?)),
                other => bail!("unknown config key '{other}'"),
            }
        }
        Ok(cfg)
    }

    pub fn ensemble_spec(&self) -> Result<EnsembleSpec> {
        let mut spec = EnsembleSpec::parse(&self.ensemble)?;
        spec.kmedoids_max_iters = self.kmedoids_max_iters;
        spec.agnes = AgnesOptions {
            max_frames: self.agnes_max_frames,
            downsample: (self.agnes_downsample > 1).then_some(self.agnes_downsample),
        };
        Ok(spec)
    }

    pub fn loss_weights(&self) -> Result<LossWeights> {
        let weights = LossWeights {
            lambda: self.lambda,
            beta: self.beta,
            gamma: self.gamma,
            theta: self.theta,
            smoothing: self.smoothing.parse::<SmoothingVariant>()?,
        };
        weights.validate()?;
        Ok(weights)
    }

    pub fn schedule(&self) -> Result<TrainSchedule> {
        Ok(TrainSchedule {
            warmup_epochs: self.warmup_epochs,
            ic_epochs: self.ic_epochs,
            learning_rate: self.learning_rate,
            weights: self.loss_weights()?,
            seed: self.seed,
        })
    }

    pub fn encoder_config(&self, input_dim: usize, classes: usize) -> Result<EncoderConfig> {
        let cfg = EncoderConfig {
            input_dim,
            hidden_dim: self.hidden_dim,
            layers: self.layers,
            kernel: self.kernel,
            classes,
            seed: self.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn synth_config(&self) -> Result<SynthConfig> {
        let cfg = SynthConfig {
            videos: self.synth_videos,
            frames: (self.synth_frames_min, self.synth_frames_max),
            segments: (self.synth_segments_min, self.synth_segments_max),
            feature_dim: self.synth_dim,
            classes: self.synth_classes,
            mean_scale: self.synth_mean_scale,
            noise_sigma: self.synth_noise_sigma,
            min_segment_len: self.synth_min_segment,
            timestamp_mode: self.timestamp_mode.parse::<TimestampMode>()?,
            seed: self.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn manifest_path(&self) -> Result<&Path> {
        self.manifest
            .as_deref()
            .ok_or_else(|| anyhow!("config key 'manifest' is required for this command"))
    }
}
