//! Joint semantic-channel codec: the trainable transmitter (spectrogram to
//! power-normalized complex symbols) and receiver (equalized symbols back to
//! a token probability matrix), plus symbol accounting.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::ctc::{self, TextSequence, ALPHABET_SIZE};
use crate::dsp::Spectrogram;
use crate::nn::{
    emit_bigru, emit_dense, Activation, BiGruParams, Graph, GruDirection, ModelParams, NnError,
    NodeId, Tensor,
};

pub use crate::ctc::ProbabilityMatrix;

/// Pre-transmission features are the same row-stochastic matrix shape as the
/// recovered ones.
pub type SemanticFeatures = ProbabilityMatrix;

/// Width of the channel-facing dense layers; 40 reals per step pair into 20
/// complex symbols.
pub const CHANNEL_WIDTH: usize = 40;

/// Real values per complex symbol.
pub const REALS_PER_SYMBOL: usize = 2;

#[derive(Debug, thiserror::Error)]
pub enum CodecError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Ctc(#[from] ctc::CtcError),
    #[error("pre-normalization symbol vector has no power")]
    DegeneratePower,
    #[error("symbol count {0} is not divisible by {1}")]
    BadSymbolCount(usize, usize),
    #[error("missing parameter {0}")]
    MissingParam(String),
    #[error("spectrogram bin count {0} does not match model input bins {1}")]
    BinMismatch(usize, usize),
}

/// Complex transmit/receive symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolVector {
    symbols: Vec<Complex64>,
}

impl SymbolVector {
    pub fn new(symbols: Vec<Complex64>) -> Self {
        Self { symbols }
    }

    /// Pairs consecutive reals as (real, imaginary).
    pub fn from_reals(reals: &[f64]) -> Result<Self, CodecError> {
        if reals.len() % REALS_PER_SYMBOL != 0 {
            return Err(CodecError::BadSymbolCount(reals.len(), REALS_PER_SYMBOL));
        }
        Ok(Self {
            symbols: reals
                .chunks(REALS_PER_SYMBOL)
                .map(|c| Complex64::new(c[0], c[1]))
                .collect(),
        })
    }

    pub fn to_reals(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.symbols.len() * REALS_PER_SYMBOL);
        for s in &self.symbols {
            out.push(s.re);
            out.push(s.im);
        }
        out
    }

    pub fn symbols(&self) -> &[Complex64] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn mean_power(&self) -> f64 {
        crate::channel::mean_power(&self.symbols)
    }
}

/// Architecture hyperparameters of the codec.
///
/// The channel-facing widths (40/40/29) are fixed by the wire format; hidden
/// sizes are free and default to desk-scale values.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// Frequency bins of the input spectrogram (fft_size/2 + 1).
    pub input_bins: usize,
    pub conv_modules: usize,
    pub conv_filters: usize,
    pub kernel_size: usize,
    pub time_stride: usize,
    pub freq_stride: usize,
    pub brnn_modules: usize,
    pub gru_units: usize,
    pub encoder_hidden: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            input_bins: 257,
            conv_modules: 2,
            conv_filters: 32,
            kernel_size: 3,
            time_stride: 2,
            freq_stride: 2,
            brnn_modules: 6,
            gru_units: 64,
            encoder_hidden: 64,
        }
    }
}

impl ModelConfig {
    /// Output steps produced from `n_frames` input frames.
    pub fn output_steps(&self, n_frames: usize) -> usize {
        let mut t = n_frames;
        for _ in 0..self.conv_modules {
            t = t.div_ceil(self.time_stride);
        }
        t
    }

    /// Frequency extent after the conv stack.
    fn reduced_bins(&self) -> usize {
        let mut f = self.input_bins;
        for _ in 0..self.conv_modules {
            f = f.div_ceil(self.freq_stride);
        }
        f
    }

    /// Feature width fed to the first recurrent layer.
    fn brnn_input(&self) -> usize {
        self.conv_filters * self.reduced_bins()
    }

    /// Complex symbols transmitted for `n_frames` input frames.
    pub fn symbols_for_frames(&self, n_frames: usize) -> usize {
        self.output_steps(n_frames) * CHANNEL_WIDTH / REALS_PER_SYMBOL
    }

    /// Field list used to persist the hyperparameters in checkpoints.
    pub fn to_fields(&self) -> Vec<(&'static str, usize)> {
        vec![
            ("input_bins", self.input_bins),
            ("conv_modules", self.conv_modules),
            ("conv_filters", self.conv_filters),
            ("kernel_size", self.kernel_size),
            ("time_stride", self.time_stride),
            ("freq_stride", self.freq_stride),
            ("brnn_modules", self.brnn_modules),
            ("gru_units", self.gru_units),
            ("encoder_hidden", self.encoder_hidden),
        ]
    }

    pub fn from_fields(fields: &BTreeMap<String, usize>) -> Option<Self> {
        Some(Self {
            input_bins: *fields.get("input_bins")?,
            conv_modules: *fields.get("conv_modules")?,
            conv_filters: *fields.get("conv_filters")?,
            kernel_size: *fields.get("kernel_size")?,
            time_stride: *fields.get("time_stride")?,
            freq_stride: *fields.get("freq_stride")?,
            brnn_modules: *fields.get("brnn_modules")?,
            gru_units: *fields.get("gru_units")?,
            encoder_hidden: *fields.get("encoder_hidden")?,
        })
    }
}

/// Closed-form transmitted-symbol count for an utterance of `samples_len`
/// samples under the given frontend, for the default architecture
/// (`ceil(N/4) * 20`).
pub fn count_symbols(
    samples_len: usize,
    frontend: &crate::dsp::FrontendConfig,
    sample_rate: u32,
) -> usize {
    let n = frontend.frame_count(samples_len, sample_rate);
    ModelConfig::default().symbols_for_frames(n)
}

/// The codec networks: hyperparameters plus named weights.
#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ModelParams,
}

fn xavier(rng: &mut ChaCha20Rng, shape: Vec<usize>, fan_in: usize, fan_out: usize) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let n: usize = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(-limit..limit)).collect())
        .expect("finite init")
}

fn init_gru(rng: &mut ChaCha20Rng, nin: usize, h: usize) -> GruDirection<Tensor> {
    let w = |rng: &mut ChaCha20Rng| xavier(rng, vec![nin, h], nin, h);
    let u = |rng: &mut ChaCha20Rng| xavier(rng, vec![h, h], h, h);
    GruDirection {
        wz: w(rng),
        uz: u(rng),
        bz: Tensor::zeros(vec![h]),
        wr: w(rng),
        ur: u(rng),
        br: Tensor::zeros(vec![h]),
        wh: w(rng),
        uh: u(rng),
        bh: Tensor::zeros(vec![h]),
    }
}

impl Model {
    /// Xavier-uniform initialization, deterministic in `seed`.
    pub fn init(config: ModelConfig, seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut params = ModelParams::new();
        let k = config.kernel_size;
        let mut cin = 1;
        for i in 0..config.conv_modules {
            let cout = config.conv_filters;
            params.insert(
                format!("alpha.conv{i}.kernel"),
                xavier(&mut rng, vec![cout, cin, k, k], cin * k * k, cout * k * k),
            );
            cin = cout;
        }
        let mut nin = config.brnn_input();
        for i in 0..config.brnn_modules {
            for (dir, tag) in [("fwd", 0u8), ("bwd", 1u8)] {
                let _ = tag;
                let g = init_gru(&mut rng, nin, config.gru_units);
                for (field, t) in g.fields() {
                    params.insert(format!("alpha.brnn{i}.{dir}.{field}"), t.clone());
                }
            }
            nin = 2 * config.gru_units;
        }
        params.insert(
            "alpha.dense0.w".to_string(),
            xavier(&mut rng, vec![nin, config.encoder_hidden], nin, config.encoder_hidden),
        );
        params.insert("alpha.dense0.b".to_string(), Tensor::zeros(vec![config.encoder_hidden]));
        params.insert(
            "alpha.dense1.w".to_string(),
            xavier(
                &mut rng,
                vec![config.encoder_hidden, ALPHABET_SIZE],
                config.encoder_hidden,
                ALPHABET_SIZE,
            ),
        );
        params.insert("alpha.dense1.b".to_string(), Tensor::zeros(vec![ALPHABET_SIZE]));

        params.insert(
            "beta.dense0.w".to_string(),
            xavier(&mut rng, vec![ALPHABET_SIZE, CHANNEL_WIDTH], ALPHABET_SIZE, CHANNEL_WIDTH),
        );
        params.insert("beta.dense0.b".to_string(), Tensor::zeros(vec![CHANNEL_WIDTH]));
        params.insert(
            "beta.dense1.w".to_string(),
            xavier(&mut rng, vec![CHANNEL_WIDTH, CHANNEL_WIDTH], CHANNEL_WIDTH, CHANNEL_WIDTH),
        );
        params.insert("beta.dense1.b".to_string(), Tensor::zeros(vec![CHANNEL_WIDTH]));

        for (i, (nin, nout)) in [
            (CHANNEL_WIDTH, CHANNEL_WIDTH),
            (CHANNEL_WIDTH, CHANNEL_WIDTH),
            (CHANNEL_WIDTH, ALPHABET_SIZE),
        ]
        .into_iter()
        .enumerate()
        {
            params.insert(
                format!("thetar.dense{i}.w"),
                xavier(&mut rng, vec![nin, nout], nin, nout),
            );
            params.insert(format!("thetar.dense{i}.b"), Tensor::zeros(vec![nout]));
        }

        params.validate_partition().expect("prefixes are fixed");
        Self { config, params }
    }

    fn node_of(
        &self,
        g: &mut Graph,
        loaded: &mut BTreeMap<String, NodeId>,
        name: &str,
        trainable: bool,
    ) -> Result<NodeId, CodecError> {
        if let Some(&id) = loaded.get(name) {
            return Ok(id);
        }
        let t = self
            .params
            .get(name)
            .ok_or_else(|| CodecError::MissingParam(name.to_string()))?
            .clone();
        let id = if trainable { g.leaf(t) } else { g.constant(t) };
        loaded.insert(name.to_string(), id);
        Ok(id)
    }

    fn gru_nodes(
        &self,
        g: &mut Graph,
        loaded: &mut BTreeMap<String, NodeId>,
        prefix: &str,
        trainable: bool,
    ) -> Result<GruDirection<NodeId>, CodecError> {
        Ok(GruDirection {
            wz: self.node_of(g, loaded, &format!("{prefix}.wz"), trainable)?,
            uz: self.node_of(g, loaded, &format!("{prefix}.uz"), trainable)?,
            bz: self.node_of(g, loaded, &format!("{prefix}.bz"), trainable)?,
            wr: self.node_of(g, loaded, &format!("{prefix}.wr"), trainable)?,
            ur: self.node_of(g, loaded, &format!("{prefix}.ur"), trainable)?,
            br: self.node_of(g, loaded, &format!("{prefix}.br"), trainable)?,
            wh: self.node_of(g, loaded, &format!("{prefix}.wh"), trainable)?,
            uh: self.node_of(g, loaded, &format!("{prefix}.uh"), trainable)?,
            bh: self.node_of(g, loaded, &format!("{prefix}.bh"), trainable)?,
        })
    }

    /// Emits the semantic encoder and returns pre-softmax logits `[L, 29]`.
    fn emit_encoder_logits(
        &self,
        g: &mut Graph,
        loaded: &mut BTreeMap<String, NodeId>,
        spec: &Tensor,
        trainable: bool,
    ) -> Result<NodeId, CodecError> {
        let cfg = &self.config;
        if spec.cols() != cfg.input_bins {
            return Err(CodecError::BinMismatch(spec.cols(), cfg.input_bins));
        }
        let (n, f) = (spec.rows(), spec.cols());
        let mut x = g.constant(spec.reshaped(vec![1, 1, n, f])?);
        for i in 0..cfg.conv_modules {
            let kernel = self.node_of(g, loaded, &format!("alpha.conv{i}.kernel"), trainable)?;
            let y = g.conv2d(x, kernel, (cfg.time_stride, cfg.freq_stride))?;
            x = g.relu(y);
        }
        let mut h = g.chw_to_time_major(x)?;
        for i in 0..cfg.brnn_modules {
            let fwd = self.gru_nodes(g, loaded, &format!("alpha.brnn{i}.fwd"), trainable)?;
            let bwd = self.gru_nodes(g, loaded, &format!("alpha.brnn{i}.bwd"), trainable)?;
            let params = BiGruParams { fwd, bwd };
            h = emit_bigru(g, &params, h)?;
        }
        let w0 = self.node_of(g, loaded, "alpha.dense0.w", trainable)?;
        let b0 = self.node_of(g, loaded, "alpha.dense0.b", trainable)?;
        let hidden = emit_dense(g, h, w0, b0, Activation::Relu)?;
        let w1 = self.node_of(g, loaded, "alpha.dense1.w", trainable)?;
        let b1 = self.node_of(g, loaded, "alpha.dense1.b", trainable)?;
        Ok(emit_dense(g, hidden, w1, b1, Activation::None)?)
    }

    /// Emits the channel encoder over features `[L, 29]`, returning the
    /// power-normalized real symbol matrix `[L, 40]`.
    fn emit_channel_encoder(
        &self,
        g: &mut Graph,
        loaded: &mut BTreeMap<String, NodeId>,
        features: NodeId,
        trainable: bool,
    ) -> Result<NodeId, CodecError> {
        let w0 = self.node_of(g, loaded, "beta.dense0.w", trainable)?;
        let b0 = self.node_of(g, loaded, "beta.dense0.b", trainable)?;
        let h = emit_dense(g, features, w0, b0, Activation::Relu)?;
        let w1 = self.node_of(g, loaded, "beta.dense1.w", trainable)?;
        let b1 = self.node_of(g, loaded, "beta.dense1.b", trainable)?;
        let u = emit_dense(g, h, w1, b1, Activation::None)?;
        // exact per-utterance power normalization: mean |symbol|^2 = 1
        let total_reals = g.value(u).len();
        let sq = g.mul(u, u)?;
        let s = g.sum_all(sq);
        let ms = g.scale(s, REALS_PER_SYMBOL as f64 / total_reals as f64);
        let gain = g.sqrt(ms);
        Ok(g.div_by_scalar(u, gain)?)
    }

    /// Emits the channel decoder over equalized reals `[L, 40]`, returning
    /// pre-softmax logits `[L, 29]`.
    fn emit_channel_decoder(
        &self,
        g: &mut Graph,
        loaded: &mut BTreeMap<String, NodeId>,
        received: NodeId,
        trainable: bool,
    ) -> Result<NodeId, CodecError> {
        let mut h = received;
        for (i, act) in [Activation::Relu, Activation::Relu, Activation::None]
            .into_iter()
            .enumerate()
        {
            let w = self.node_of(g, loaded, &format!("thetar.dense{i}.w"), trainable)?;
            let b = self.node_of(g, loaded, &format!("thetar.dense{i}.b"), trainable)?;
            h = emit_dense(g, h, w, b, act)?;
        }
        Ok(h)
    }

    /// Text-related semantic features of one utterance (softmax rows).
    pub fn semantic_encode(&self, spec: &Spectrogram) -> Result<SemanticFeatures, CodecError> {
        let mut g = Graph::new();
        let mut loaded = BTreeMap::new();
        let logits = self.emit_encoder_logits(&mut g, &mut loaded, &spec.values, false)?;
        let p = g.softmax_rows(logits);
        Ok(ProbabilityMatrix::new(g.value(p).clone())?)
    }

    /// Pre-softmax encoder activations, the stand-in feature map for the
    /// distribution distances.
    pub fn encoder_logits(&self, spec: &Spectrogram) -> Result<Tensor, CodecError> {
        let mut g = Graph::new();
        let mut loaded = BTreeMap::new();
        let logits = self.emit_encoder_logits(&mut g, &mut loaded, &spec.values, false)?;
        Ok(g.value(logits).clone())
    }

    /// Maps features to power-normalized complex channel symbols.
    pub fn channel_encode(&self, features: &SemanticFeatures) -> Result<SymbolVector, CodecError> {
        let mut g = Graph::new();
        let mut loaded = BTreeMap::new();
        let f = g.constant(features.values().clone());
        // emit up to the pre-normalization output to check for degeneracy
        let w0 = self.node_of(&mut g, &mut loaded, "beta.dense0.w", false)?;
        let b0 = self.node_of(&mut g, &mut loaded, "beta.dense0.b", false)?;
        let h = emit_dense(&mut g, f, w0, b0, Activation::Relu)?;
        let w1 = self.node_of(&mut g, &mut loaded, "beta.dense1.w", false)?;
        let b1 = self.node_of(&mut g, &mut loaded, "beta.dense1.b", false)?;
        let u = emit_dense(&mut g, h, w1, b1, Activation::None)?;
        let raw = g.value(u);
        let power: f64 = raw.data().iter().map(|v| v * v).sum();
        if power <= 0.0 {
            return Err(CodecError::DegeneratePower);
        }
        let gain = (power * REALS_PER_SYMBOL as f64 / raw.len() as f64).sqrt();
        let reals: Vec<f64> = raw.data().iter().map(|v| v / gain).collect();
        SymbolVector::from_reals(&reals)
    }

    /// Recovers the token probability matrix from equalized symbols.
    pub fn channel_decode(&self, received: &SymbolVector) -> Result<ProbabilityMatrix, CodecError> {
        let logits = self.decoder_logits(received)?;
        Ok(ProbabilityMatrix::new(crate::nn::softmax(&logits))?)
    }

    /// Pre-softmax decoder activations for the received side of the
    /// distribution distances.
    pub fn decoder_logits(&self, received: &SymbolVector) -> Result<Tensor, CodecError> {
        let reals = received.to_reals();
        let per_step = CHANNEL_WIDTH / REALS_PER_SYMBOL;
        if received.len() % per_step != 0 || received.is_empty() {
            return Err(CodecError::BadSymbolCount(received.len(), per_step));
        }
        let steps = received.len() / per_step;
        let mut g = Graph::new();
        let mut loaded = BTreeMap::new();
        let y = g.constant(Tensor::from_vec(vec![steps, CHANNEL_WIDTH], reals)?);
        let logits = self.emit_channel_decoder(&mut g, &mut loaded, y, false)?;
        Ok(g.value(logits).clone())
    }
}

/// A recorded training forward pass over one batch.
pub struct TrainingGraph {
    pub graph: Graph,
    pub loss: NodeId,
    pub param_nodes: BTreeMap<String, NodeId>,
}

impl TrainingGraph {
    pub fn loss_value(&self) -> f64 {
        self.graph.value(self.loss).data()[0]
    }

    /// Runs the reverse sweep and collects gradients keyed like the model
    /// parameters.
    pub fn gradients(&self) -> Result<crate::nn::NamedGradients, CodecError> {
        let grads = self.graph.backward(self.loss)?;
        let mut out = crate::nn::NamedGradients::new();
        for (name, &id) in &self.param_nodes {
            let g = grads
                .get(id)
                .cloned()
                .unwrap_or_else(|| Tensor::zeros(self.graph.value(id).shape().to_vec()));
            out.insert(name.clone(), g);
        }
        Ok(out)
    }
}

/// One training utterance: spectrogram, transcript, and the additive noise
/// the equalized channel contributes (`w * conj(h) / |h|^2`, interleaved
/// re/im, shaped `[L, 40]`).
pub struct TrainingExample<'a> {
    pub spec: &'a Spectrogram,
    pub target: &'a TextSequence,
    pub equalized_noise: Tensor,
}

/// Builds the end-to-end differentiable loss for a batch: encoder, channel
/// encoder, additive equalized channel, channel decoder, CTC loss, averaged
/// over the batch.
pub fn training_loss(model: &Model, batch: &[TrainingExample<'_>]) -> Result<TrainingGraph, CodecError> {
    assert!(!batch.is_empty());
    let mut g = Graph::new();
    let mut loaded = BTreeMap::new();
    let mut total: Option<NodeId> = None;
    for ex in batch {
        let enc_logits = model.emit_encoder_logits(&mut g, &mut loaded, &ex.spec.values, true)?;
        let p = g.softmax_rows(enc_logits);
        let x = model.emit_channel_encoder(&mut g, &mut loaded, p, true)?;
        let noise = g.constant(ex.equalized_noise.clone());
        let y = g.add(x, noise)?;
        let dec_logits = model.emit_channel_decoder(&mut g, &mut loaded, y, true)?;
        let (loss, grad) = ctc::loss_and_grad_from_logits(g.value(dec_logits), ex.target)?;
        let loss_node = g.scalar_with_grad(dec_logits, loss, grad)?;
        total = Some(match total {
            None => loss_node,
            Some(t) => g.add(t, loss_node)?,
        });
    }
    let loss = g.scale(total.expect("nonempty batch"), 1.0 / batch.len() as f64);
    Ok(TrainingGraph {
        graph: g,
        loss,
        param_nodes: loaded,
    })
}

/// Exact power normalization of an interleaved real symbol vector.
pub fn normalize_power(reals: &[f64]) -> Result<Vec<f64>, CodecError> {
    let power: f64 = reals.iter().map(|v| v * v).sum();
    if power <= 0.0 {
        return Err(CodecError::DegeneratePower);
    }
    let gain = (power * REALS_PER_SYMBOL as f64 / reals.len() as f64).sqrt();
    Ok(reals.iter().map(|v| v / gain).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{make_spectrogram, FrontendConfig, SpeechSamples};

    fn tiny_config() -> ModelConfig {
        ModelConfig {
            input_bins: 257,
            conv_modules: 2,
            conv_filters: 2,
            kernel_size: 3,
            time_stride: 2,
            freq_stride: 2,
            brnn_modules: 1,
            gru_units: 4,
            encoder_hidden: 8,
        }
    }

    fn one_second_spectrogram() -> Spectrogram {
        let samples: Vec<f64> = (0..16_000)
            .map(|i| {
                0.3 * (2.0 * std::f64::consts::PI * 523.0 * i as f64 / 16_000.0).sin()
                    + 0.1 * ((i as f64 * 0.37).sin() * (i as f64 * 0.011).cos())
            })
            .collect();
        let speech = SpeechSamples::new(samples, 16_000).unwrap();
        make_spectrogram(&speech, &FrontendConfig::default()).unwrap()
    }

    #[test]
    fn output_steps_quarter_input_frames() {
        let cfg = ModelConfig::default();
        assert_eq!(cfg.output_steps(99), 25);
        assert_eq!(cfg.output_steps(1), 1);
        assert_eq!(cfg.output_steps(4), 1);
        assert_eq!(cfg.output_steps(5), 2);
    }

    #[test]
    fn one_second_utterance_symbol_budget() {
        let frontend = FrontendConfig::default();
        let n = count_symbols(16_000, &frontend, 16_000);
        assert_eq!(n, 500);
        // within 10% of the reference budget of 520 symbols per second
        assert!((n as f64 - 520.0).abs() / 520.0 <= 0.10);
        assert_eq!(count_symbols(32_000, &frontend, 16_000), 1000);
        assert_eq!(count_symbols(320, &frontend, 16_000), 20);
    }

    #[test]
    fn encode_produces_stochastic_rows_and_expected_length() {
        let model = Model::init(tiny_config(), 7);
        let spec = one_second_spectrogram();
        assert_eq!(spec.frames(), 99);
        let p = model.semantic_encode(&spec).unwrap();
        assert_eq!(p.steps(), 25);
        for row in p.values().data().chunks(ALPHABET_SIZE) {
            let s: f64 = row.iter().sum();
            assert!((s - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn channel_encode_symbol_count_and_power() {
        let model = Model::init(tiny_config(), 8);
        let spec = one_second_spectrogram();
        let p = model.semantic_encode(&spec).unwrap();
        let x = model.channel_encode(&p).unwrap();
        assert_eq!(x.len(), 25 * CHANNEL_WIDTH / REALS_PER_SYMBOL);
        assert!((x.mean_power() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn normalization_is_scale_invariant() {
        let reals: Vec<f64> = (1..=40).map(|i| (i as f64 * 0.37).sin()).collect();
        let a = normalize_power(&reals).unwrap();
        let scaled: Vec<f64> = reals.iter().map(|v| v * 17.3).collect();
        let b = normalize_power(&scaled).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
        let power: f64 =
            a.iter().map(|v| v * v).sum::<f64>() * REALS_PER_SYMBOL as f64 / a.len() as f64;
        assert!((power - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_power_is_an_error() {
        let mut model = Model::init(tiny_config(), 9);
        // zero the channel encoder so its output vanishes
        let names: Vec<String> = model
            .params
            .names()
            .filter(|n| n.starts_with("beta."))
            .cloned()
            .collect();
        for n in names {
            let shape = model.params.get(&n).unwrap().shape().to_vec();
            model.params.insert(n, Tensor::zeros(shape));
        }
        let spec = one_second_spectrogram();
        let p = model.semantic_encode(&spec).unwrap();
        assert!(matches!(
            model.channel_encode(&p),
            Err(CodecError::DegeneratePower)
        ));
    }

    #[test]
    fn decode_shape_and_determinism() {
        let model = Model::init(tiny_config(), 10);
        let spec = one_second_spectrogram();
        let p = model.semantic_encode(&spec).unwrap();
        let x = model.channel_encode(&p).unwrap();
        let d1 = model.channel_decode(&x).unwrap();
        let d2 = model.channel_decode(&x).unwrap();
        assert_eq!(d1.values().shape(), &[25, ALPHABET_SIZE]);
        assert_eq!(d1, d2);
        for row in d1.values().data().chunks(ALPHABET_SIZE) {
            let s: f64 = row.iter().sum();
            assert!((s - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn decode_rejects_indivisible_symbol_count() {
        let model = Model::init(tiny_config(), 11);
        let bad = SymbolVector::new(vec![Complex64::new(0.1, 0.0); 21]);
        assert!(matches!(
            model.channel_decode(&bad),
            Err(CodecError::BadSymbolCount(21, 20))
        ));
    }

    #[test]
    fn training_loss_gradient_spot_check() {
        // small spectrogram, tiny model: compare a few analytic derivatives
        // with central finite differences through the entire pipeline
        let cfg = ModelConfig {
            input_bins: 9,
            conv_modules: 2,
            conv_filters: 2,
            kernel_size: 3,
            time_stride: 2,
            freq_stride: 2,
            brnn_modules: 1,
            gru_units: 3,
            encoder_hidden: 5,
        };
        let mut model = Model::init(cfg, 12);
        let mut rng = ChaCha20Rng::seed_from_u64(13);
        let spec = Spectrogram {
            values: Tensor::from_vec(
                vec![8, 9],
                (0..72).map(|_| rng.random_range(-1.0..1.0)).collect(),
            )
            .unwrap(),
            config: FrontendConfig::default(),
        };
        let target = TextSequence::from_text("ab").unwrap();
        let steps = model.config.output_steps(8);
        let noise = Tensor::from_vec(
            vec![steps, CHANNEL_WIDTH],
            (0..steps * CHANNEL_WIDTH)
                .map(|_| rng.random_range(-0.05..0.05))
                .collect(),
        )
        .unwrap();
        let build = |m: &Model| {
            training_loss(
                m,
                &[TrainingExample {
                    spec: &spec,
                    target: &target,
                    equalized_noise: noise.clone(),
                }],
            )
            .unwrap()
        };
        let tg = build(&model);
        let grads = tg.gradients().unwrap();
        let picks = [
            ("alpha.conv0.kernel", 3usize),
            ("alpha.brnn0.fwd.wh", 5),
            ("alpha.dense1.w", 17),
            ("beta.dense0.w", 11),
            ("thetar.dense2.w", 23),
        ];
        for (name, idx) in picks {
            let h = 1e-5;
            let base = model.params.get(name).unwrap().clone();
            let mut plus = base.clone();
            plus.data_mut()[idx] += h;
            model.params.insert(name.to_string(), plus);
            let lp = build(&model).loss_value();
            let mut minus = base.clone();
            minus.data_mut()[idx] -= h;
            model.params.insert(name.to_string(), minus);
            let lm = build(&model).loss_value();
            model.params.insert(name.to_string(), base);
            let fd = (lp - lm) / (2.0 * h);
            let a = grads.get(name).unwrap().data()[idx];
            let denom = a.abs().max(fd.abs()).max(1e-3);
            assert!(
                (a - fd).abs() / denom <= 1e-4,
                "{name}[{idx}]: analytic {a} vs fd {fd}"
            );
        }
    }

    #[test]
    fn hyperparameter_fields_roundtrip() {
        let cfg = tiny_config();
        let fields: BTreeMap<String, usize> = cfg
            .to_fields()
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        assert_eq!(ModelConfig::from_fields(&fields).unwrap(), cfg);
    }
}
