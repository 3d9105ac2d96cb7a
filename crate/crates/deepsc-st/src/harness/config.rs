//! Experiment configuration: a flat key-value TOML file.

use std::path::Path;

use serde::Deserialize;

use crate::channel::{ChannelConfig, ChannelKind, FadingMode};
use crate::codec::ModelConfig;
use crate::dsp::FrontendConfig;
use crate::nn::TrainConfig;

use super::HarnessError;

/// Environment variable that overrides the configured seed.
pub const SEED_ENV_VAR: &str = "DEEPSC_ST_SEED";

/// Loss-plateau stop: relative epoch-to-epoch improvement below this for
/// [`PLATEAU_PATIENCE`] consecutive epochs ends training early.
pub const PLATEAU_REL_EPS: f64 = 1e-4;
pub const PLATEAU_PATIENCE: usize = 10;

/// Everything one experiment needs, in one flat file.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Dataset manifest path, or `synthetic:N` for an N-utterance toy corpus.
    pub manifest: String,
    pub out_dir: String,
    /// Checkpoint file, relative to `out_dir` unless absolute.
    pub checkpoint: String,
    pub seed: u64,

    pub sample_rate: u32,
    pub frame_len_ms: u32,
    pub hop_ms: u32,
    pub fft_size: usize,

    pub conv_modules: usize,
    pub conv_filters: usize,
    pub kernel_size: usize,
    pub time_stride: usize,
    pub freq_stride: usize,
    pub brnn_modules: usize,
    pub gru_units: usize,
    pub encoder_hidden: usize,

    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,

    pub train_channel: String,
    pub train_snr_db: f64,
    pub rician_k: f64,

    pub eval_channels: Vec<String>,
    pub snr_min_db: f64,
    pub snr_max_db: f64,
    pub snr_step_db: f64,

    /// Also report feature-distribution distances per sweep row.
    pub compute_distances: bool,
    /// Dump per-utterance reference/hypothesis transcripts during sweeps.
    pub dump_transcripts: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            manifest: "synthetic:5".to_string(),
            out_dir: "results".to_string(),
            checkpoint: "model.ckpt".to_string(),
            seed: 0,
            sample_rate: 16_000,
            frame_len_ms: 20,
            hop_ms: 10,
            fft_size: 512,
            conv_modules: 2,
            conv_filters: 32,
            kernel_size: 3,
            time_stride: 2,
            freq_stride: 2,
            brnn_modules: 6,
            gru_units: 64,
            encoder_hidden: 64,
            batch_size: 24,
            learning_rate: 1e-4,
            epochs: 100,
            train_channel: "rician".to_string(),
            train_snr_db: 8.0,
            rician_k: 4.0,
            eval_channels: vec![
                "awgn".to_string(),
                "rayleigh".to_string(),
                "rician".to_string(),
            ],
            snr_min_db: -12.0,
            snr_max_db: 18.0,
            snr_step_db: 2.0,
            compute_distances: false,
            dump_transcripts: false,
        }
    }
}

impl ExperimentConfig {
    /// Parses a TOML config file; `DEEPSC_ST_SEED` overrides the seed.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: Self =
            toml::from_str(&text).map_err(|e| HarnessError::Config(e.to_string()))?;
        if let Ok(seed) = std::env::var(SEED_ENV_VAR) {
            cfg.seed = seed
                .parse()
                .map_err(|_| HarnessError::Config(format!("{SEED_ENV_VAR}={seed} is not a u64")))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.snr_grid().is_empty() {
            return Err(HarnessError::Config("empty SNR grid".into()));
        }
        if self.eval_channels.is_empty() {
            return Err(HarnessError::Config("no evaluation channels".into()));
        }
        self.channels()?;
        if self.batch_size == 0 {
            return Err(HarnessError::Config("batch_size must be >= 1".into()));
        }
        if self.learning_rate < 0.0 {
            return Err(HarnessError::Config("learning_rate must be >= 0".into()));
        }
        Ok(())
    }

    pub fn frontend(&self) -> FrontendConfig {
        FrontendConfig {
            frame_len_ms: self.frame_len_ms,
            hop_ms: self.hop_ms,
            fft_size: self.fft_size,
        }
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            input_bins: self.frontend().freq_bins(),
            conv_modules: self.conv_modules,
            conv_filters: self.conv_filters,
            kernel_size: self.kernel_size,
            time_stride: self.time_stride,
            freq_stride: self.freq_stride,
            brnn_modules: self.brnn_modules,
            gru_units: self.gru_units,
            encoder_hidden: self.encoder_hidden,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            seed: self.seed,
        }
    }

    pub fn train_channel_config(&self) -> Result<ChannelConfig, HarnessError> {
        Ok(ChannelConfig {
            kind: self
                .train_channel
                .parse()
                .map_err(HarnessError::Config)?,
            snr_db: self.train_snr_db,
            rician_k: self.rician_k,
            fading: FadingMode::Block,
        })
    }

    pub fn channels(&self) -> Result<Vec<ChannelKind>, HarnessError> {
        self.eval_channels
            .iter()
            .map(|s| s.parse().map_err(HarnessError::Config))
            .collect()
    }

    pub fn snr_grid(&self) -> Vec<f64> {
        let mut grid = Vec::new();
        if self.snr_step_db <= 0.0 {
            return grid;
        }
        let mut snr = self.snr_min_db;
        while snr <= self.snr_max_db + 1e-9 {
            grid.push(snr);
            snr += self.snr_step_db;
        }
        grid
    }

    pub fn checkpoint_path(&self) -> std::path::PathBuf {
        let p = Path::new(&self.checkpoint);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            Path::new(&self.out_dir).join(p)
        }
    }
}
