//! Experiment harness: configuration, dataset ingestion, training,
//! checkpointing, and sweep evaluation.

mod checkpoint;
mod config;
mod dataset;
mod sweep;
mod synth;
mod train;

pub use checkpoint::{checkpoint_load, checkpoint_save, CheckpointError, CHECKPOINT_MAGIC};
pub use config::{ExperimentConfig, PLATEAU_PATIENCE, PLATEAU_REL_EPS, SEED_ENV_VAR};
pub use dataset::{load_corpus, load_dataset, normalize_transcript, RecordError, Utterance};
pub use sweep::{
    evaluate, evaluate_sweep, write_distances_csv, write_plot_data, write_results_csv,
    write_transcripts, EvaluationRow, SweepOutput, TranscriptPair,
};
pub use synth::{synth_utterance, toy_corpus};
pub use train::{train, train_on, TrainOutcome};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("all {0} dataset records failed to load")]
    AllRecordsFailed(usize),
    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64 },
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Codec(#[from] crate::codec::CodecError),
    #[error(transparent)]
    Channel(#[from] crate::channel::ChannelError),
    #[error(transparent)]
    Metric(#[from] crate::metrics::MetricError),
    #[error(transparent)]
    Dsp(#[from] crate::dsp::DspError),
    #[error(transparent)]
    Nn(#[from] crate::nn::NnError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
