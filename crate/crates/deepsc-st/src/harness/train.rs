//! Training loop: batched end-to-end SGD through the simulated channel.

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::channel::{sample_link, ChannelConfig, ChannelRealization};
use crate::codec::{training_loss, Model, TrainingExample, CHANNEL_WIDTH, REALS_PER_SYMBOL};
use crate::nn::{sgd_step, Tensor};

use super::config::{ExperimentConfig, PLATEAU_PATIENCE, PLATEAU_REL_EPS};
use super::dataset::{load_corpus, Utterance};
use super::HarnessError;

/// A finished training run.
pub struct TrainOutcome {
    pub model: Model,
    /// Mean loss per epoch.
    pub epoch_losses: Vec<f64>,
    pub stopped_early: bool,
}

/// Additive noise the receiver sees after zero-forcing: `w conj(h) / |h|^2`
/// interleaved into the `[steps, 40]` real layout of the codec.
fn equalized_noise<R: Rng>(cfg: &ChannelConfig, steps: usize, rng: &mut R) -> Tensor {
    let n_syms = steps * CHANNEL_WIDTH / REALS_PER_SYMBOL;
    loop {
        let (h, noise) = sample_link(cfg, n_syms, rng);
        let ChannelRealization::Block(h) = h else {
            unreachable!("training uses block fading");
        };
        // redraw on an astronomically unlikely dead fade
        if h.norm() <= 1e-9 {
            continue;
        }
        let scale = h.conj() / h.norm_sqr();
        let mut reals = Vec::with_capacity(n_syms * REALS_PER_SYMBOL);
        for w in noise {
            let e: Complex64 = w * scale;
            reals.push(e.re);
            reals.push(e.im);
        }
        return Tensor::from_vec(vec![steps, CHANNEL_WIDTH], reals).expect("finite noise");
    }
}

fn plateaued(losses: &[f64]) -> bool {
    if losses.len() < PLATEAU_PATIENCE + 1 {
        return false;
    }
    let tail = &losses[losses.len() - PLATEAU_PATIENCE - 1..];
    tail.windows(2).all(|w| {
        let improvement = (w[0] - w[1]) / w[0].abs().max(1e-12);
        improvement < PLATEAU_REL_EPS
    })
}

/// Trains a freshly initialized model on the configured corpus.
pub fn train(cfg: &ExperimentConfig) -> Result<TrainOutcome, HarnessError> {
    let corpus = load_corpus(cfg)?;
    train_on(cfg, &corpus)
}

/// Trains on an already-loaded corpus. Per batch: spectrogram in, semantic
/// and channel encoding, fading channel with fresh coefficient and noise,
/// zero-forcing equalization, channel decoding, CTC loss, one SGD step.
pub fn train_on(cfg: &ExperimentConfig, corpus: &[Utterance]) -> Result<TrainOutcome, HarnessError> {
    if corpus.is_empty() {
        return Err(HarnessError::Config("empty dataset".into()));
    }
    let channel = cfg.train_channel_config()?;
    let mut model = Model::init(cfg.model_config(), cfg.seed);
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut stopped_early = false;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let examples: Vec<TrainingExample<'_>> = chunk
                .iter()
                .map(|&i| {
                    let u = &corpus[i];
                    let steps = model.config.output_steps(u.spec.frames());
                    TrainingExample {
                        spec: &u.spec,
                        target: &u.target,
                        equalized_noise: equalized_noise(&channel, steps, &mut rng),
                    }
                })
                .collect();
            let recording = training_loss(&model, &examples)?;
            let loss = recording.loss_value();
            if !loss.is_finite() {
                return Err(HarnessError::Diverged { epoch, loss });
            }
            let grads = recording.gradients()?;
            sgd_step(&mut model.params, &grads, cfg.learning_rate)?;
            epoch_loss += loss;
            batches += 1;
        }
        epoch_losses.push(epoch_loss / batches as f64);
        if plateaued(&epoch_losses) {
            stopped_early = true;
            break;
        }
    }
    Ok(TrainOutcome {
        model,
        epoch_losses,
        stopped_early,
    })
}
