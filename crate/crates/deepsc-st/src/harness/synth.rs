//! Synthetic toy corpus: each token is rendered as a distinct tone, so a
//! small model can learn the spectrogram-to-text mapping in minutes.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::ctc::char_to_token;
use crate::dsp::SpeechSamples;

/// Samples per rendered token at 16 kHz (60 ms).
const TOKEN_SAMPLES: usize = 960;
const SAMPLE_RATE: u32 = 16_000;

/// Phrases cycled to build the corpus; short enough that one utterance is
/// under half a second.
const PHRASES: [&str; 8] = [
    "we won", "go on", "call me", "said so", "hold it", "be kind", "not yet", "all in",
];

/// Tone frequency for a token index.
fn tone_hz(token: u8) -> f64 {
    300.0 + 120.0 * token as f64
}

/// Renders one phrase: a sequence of per-token tones with a little
/// deterministic jitter so spectrogram bins are not exactly constant.
pub fn synth_utterance(text: &str, rng: &mut ChaCha20Rng) -> SpeechSamples {
    let mut samples = Vec::with_capacity(text.chars().count() * TOKEN_SAMPLES);
    let mut phase = 0.0f64;
    for c in text.chars() {
        let token = char_to_token(c).expect("phrases stay in-alphabet");
        let freq = tone_hz(token);
        let step = 2.0 * std::f64::consts::PI * freq / SAMPLE_RATE as f64;
        for _ in 0..TOKEN_SAMPLES {
            let jitter: f64 = rng.random_range(-0.02..0.02);
            samples.push((0.55 * phase.sin() + jitter).clamp(-0.99, 0.99));
            phase += step;
        }
    }
    SpeechSamples::new(samples, SAMPLE_RATE).expect("amplitudes bounded")
}

/// Builds an `n`-utterance corpus of (samples, transcript) pairs.
pub fn toy_corpus(n: usize, seed: u64) -> Vec<(SpeechSamples, String)> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let text = PHRASES[i % PHRASES.len()].to_string();
            let speech = synth_utterance(&text, &mut rng);
            (speech, text)
        })
        .collect()
}
