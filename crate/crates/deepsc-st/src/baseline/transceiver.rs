//! Assembled conventional transceivers: Huffman/polar/64-QAM for text, and
//! binary32/polar/64-QAM for semantic features.

use rand::Rng;

use crate::channel::{equalize, transmit_unchecked, ChannelConfig};
use crate::codec::{ProbabilityMatrix, SemanticFeatures};
use crate::ctc::ALPHABET_SIZE;
use crate::nn::Tensor;

use super::bits::{float_deserialize, float_serialize, BitVector};
use super::huffman::HuffmanCodebook;
use super::polar::{polar_encode, polar_scl_decode, PolarConfig};
use super::qam::{qam64_llr, qam64_map, BITS_PER_SYMBOL};
use super::BaselineError;

/// Result of one transceiver run.
#[derive(Debug, Clone)]
pub struct TextTransceiverOutput {
    pub text: String,
    pub symbol_count: usize,
    /// False when the Huffman stream stopped decoding cleanly after channel
    /// errors; `text` is then the best-effort prefix.
    pub clean: bool,
}

#[derive(Debug, Clone)]
pub struct FeatureTransceiverOutput {
    pub features: ProbabilityMatrix,
    pub symbol_count: usize,
    /// False when any recovered float was non-finite or any row needed the
    /// uniform fallback.
    pub clean: bool,
}

/// Sends a bit stream through polar coding, 64-QAM, the fading channel, and
/// list decoding; returns the recovered payload bits (length preserved) and
/// the transmitted symbol count.
fn phy_roundtrip<R: Rng>(
    payload: &[bool],
    polar: &PolarConfig,
    channel: &ChannelConfig,
    rng: &mut R,
) -> Result<(BitVector, usize), BaselineError> {
    let k = polar.info_len;
    let blocks = payload.len().div_ceil(k).max(1);
    let mut coded = Vec::with_capacity(blocks * polar.block_len);
    for b in 0..blocks {
        let mut info = vec![false; k];
        for (i, slot) in info.iter_mut().enumerate() {
            if let Some(&bit) = payload.get(b * k + i) {
                *slot = bit;
            }
        }
        coded.extend(polar_encode(&info, polar)?);
    }
    let mut padded = coded.clone();
    while padded.len() % BITS_PER_SYMBOL != 0 {
        padded.push(false);
    }
    let symbols = qam64_map(&padded)?;
    let (received, state) = transmit_unchecked(symbols.symbols(), channel, rng);
    let equalized = equalize(&received, &state.h)?;
    let llrs = qam64_llr(&equalized, &state.h, state.sigma2);
    let mut decoded = Vec::with_capacity(payload.len());
    for b in 0..blocks {
        let block_llrs = &llrs[b * polar.block_len..(b + 1) * polar.block_len];
        decoded.extend(polar_scl_decode(block_llrs, polar)?);
    }
    decoded.truncate(payload.len());
    Ok((decoded, symbols.len()))
}

/// Text pipeline: Huffman source coding, rate-1/2 polar coding with list
/// decoding, Gray 64-QAM, zero-forcing equalization.
pub fn run_text_transceiver<R: Rng>(
    text: &str,
    codebook: &HuffmanCodebook,
    polar: &PolarConfig,
    channel: &ChannelConfig,
    rng: &mut R,
) -> Result<TextTransceiverOutput, BaselineError> {
    let payload = codebook.encode(text)?;
    let (decoded, symbol_count) = phy_roundtrip(&payload, polar, channel, rng)?;
    let (recovered, clean) = codebook.decode(&decoded);
    Ok(TextTransceiverOutput {
        text: recovered,
        symbol_count,
        clean,
    })
}

/// Feature pipeline: binary32 serialization of the `[L, 29]` features through
/// the same physical layer, then row sanitation back into a probability
/// matrix for the greedy decoder.
pub fn run_feature_transceiver<R: Rng>(
    features: &SemanticFeatures,
    polar: &PolarConfig,
    channel: &ChannelConfig,
    rng: &mut R,
) -> Result<FeatureTransceiverOutput, BaselineError> {
    let floats: Vec<f32> = features.values().data().iter().map(|&v| v as f32).collect();
    let payload = float_serialize(&floats);
    let (decoded, symbol_count) = phy_roundtrip(&payload, polar, channel, rng)?;
    let recovered = float_deserialize(&decoded)?;
    let steps = features.steps();
    let mut clean = true;
    let mut data = Vec::with_capacity(steps * ALPHABET_SIZE);
    for row in recovered.chunks(ALPHABET_SIZE) {
        let mut vals: Vec<f64> = row
            .iter()
            .map(|&v| {
                let v = v as f64;
                if v.is_finite() {
                    v.max(0.0)
                } else {
                    clean = false;
                    0.0
                }
            })
            .collect();
        let sum: f64 = vals.iter().sum();
        if sum > 0.0 {
            for v in &mut vals {
                *v /= sum;
            }
        } else {
            clean = false;
            vals = vec![1.0 / ALPHABET_SIZE as f64; ALPHABET_SIZE];
        }
        data.extend(vals);
    }
    let matrix = ProbabilityMatrix::new(Tensor::from_vec(vec![steps, ALPHABET_SIZE], data)?)?;
    Ok(FeatureTransceiverOutput {
        features: matrix,
        symbol_count,
        clean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baseline::huffman::english_frequencies;
    use crate::channel::ChannelKind;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn default_polar() -> PolarConfig {
        PolarConfig::new(512, 256, 2.0, 4).unwrap()
    }

    #[test]
    fn noiseless_text_roundtrip_is_exact() {
        let cb = HuffmanCodebook::build(&english_frequencies()).unwrap();
        let polar = default_polar();
        let channel = ChannelConfig::new(ChannelKind::Awgn, 200.0);
        let mut rng = ChaCha20Rng::seed_from_u64(91);
        let text = "the quick brown fox jumps over the lazy dog";
        let out = run_text_transceiver(text, &cb, &polar, &channel, &mut rng).unwrap();
        assert!(out.clean);
        assert_eq!(out.text, text);
    }

    #[test]
    fn one_second_sentence_symbol_budget() {
        let cb = HuffmanCodebook::build(&english_frequencies()).unwrap();
        let polar = default_polar();
        let channel = ChannelConfig::new(ChannelKind::Awgn, 200.0);
        let mut rng = ChaCha20Rng::seed_from_u64(92);
        // a ~50-character sentence, about one second of speech
        let text = "he concluded that school had nothing to offer him";
        let out = run_text_transceiver(text, &cb, &polar, &channel, &mut rng).unwrap();
        // within a factor of two of the 60-symbol reference budget
        assert!(out.symbol_count as f64 <= 60.0 * 2.0, "{}", out.symbol_count);
        assert!(out.symbol_count as f64 >= 60.0 / 2.0, "{}", out.symbol_count);
    }

    #[test]
    fn noiseless_feature_roundtrip_preserves_argmax() {
        use crate::ctc::{greedy_decode, ALPHABET_SIZE};
        let mut rng = ChaCha20Rng::seed_from_u64(93);
        let steps = 25; // one second of speech after the codec
        let p = {
            let mut data = Vec::new();
            for _ in 0..steps {
                let row: Vec<f64> = (0..ALPHABET_SIZE)
                    .map(|_| -(rng.random_range(1e-6..1.0f64)).ln())
                    .collect();
                let z: f64 = row.iter().sum();
                data.extend(row.iter().map(|v| v / z));
            }
            ProbabilityMatrix::new(
                Tensor::from_vec(vec![steps, ALPHABET_SIZE], data).unwrap(),
            )
            .unwrap()
        };
        let polar = default_polar();
        let channel = ChannelConfig::new(ChannelKind::Awgn, 200.0);
        let out = run_feature_transceiver(&p, &polar, &channel, &mut rng).unwrap();
        assert!(out.clean);
        assert_eq!(greedy_decode(&out.features), greedy_decode(&p));
        // binary32 round-off only
        let diff = out.features.values().max_abs_diff(p.values());
        assert!(diff < 1e-6, "max diff {diff}");
        // within a factor of 1.5 of the 6,264-symbol reference budget
        assert!(out.symbol_count as f64 <= 6264.0 * 1.5, "{}", out.symbol_count);
        assert!(out.symbol_count as f64 >= 6264.0 / 1.5, "{}", out.symbol_count);
    }

    #[test]
    fn seeded_runs_are_reproducible() {
        let cb = HuffmanCodebook::build(&english_frequencies()).unwrap();
        let polar = default_polar();
        let channel = ChannelConfig::new(ChannelKind::Rayleigh, 4.0);
        let text = "reproducibility check";
        let out1 = run_text_transceiver(
            text,
            &cb,
            &polar,
            &channel,
            &mut ChaCha20Rng::seed_from_u64(94),
        )
        .unwrap();
        let out2 = run_text_transceiver(
            text,
            &cb,
            &polar,
            &channel,
            &mut ChaCha20Rng::seed_from_u64(94),
        )
        .unwrap();
        assert_eq!(out1.text, out2.text);
        assert_eq!(out1.clean, out2.clean);
    }
}
