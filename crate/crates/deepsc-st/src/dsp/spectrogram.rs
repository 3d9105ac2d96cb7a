//! Spectrogram extraction and sample-rate conversion.

use crate::nn::Tensor;

use super::fft::fft_real;
use super::DspError;

/// Floor applied before taking the log of a magnitude.
pub const LOG_FLOOR: f64 = 1e-10;

/// A speech waveform with its sample rate.
#[derive(Debug, Clone)]
pub struct SpeechSamples {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl SpeechSamples {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self, DspError> {
        if sample_rate == 0 {
            return Err(DspError::BadSampleRate);
        }
        if samples.iter().any(|v| !(-1.0..1.0).contains(v)) {
            return Err(DspError::AmplitudeRange);
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// Framing and FFT settings for spectrogram extraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontendConfig {
    pub frame_len_ms: u32,
    pub hop_ms: u32,
    pub fft_size: usize,
}

impl Default for FrontendConfig {
    fn default() -> Self {
        Self {
            frame_len_ms: 20,
            hop_ms: 10,
            fft_size: 512,
        }
    }
}

impl FrontendConfig {
    pub fn frame_samples(&self, sample_rate: u32) -> usize {
        (sample_rate as usize * self.frame_len_ms as usize) / 1000
    }

    pub fn hop_samples(&self, sample_rate: u32) -> usize {
        (sample_rate as usize * self.hop_ms as usize) / 1000
    }

    /// Number of frequency bins kept from the one-sided spectrum.
    pub fn freq_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Closed-form frame count for `q` samples, valid for `q >= frame`.
    pub fn frame_count(&self, q: usize, sample_rate: u32) -> usize {
        (q - self.frame_samples(sample_rate)) / self.hop_samples(sample_rate) + 1
    }
}

/// Normalized log-magnitude time-frequency matrix of one utterance.
#[derive(Debug, Clone)]
pub struct Spectrogram {
    /// `[frames, freq_bins]`
    pub values: Tensor,
    pub config: FrontendConfig,
}

impl Spectrogram {
    pub fn frames(&self) -> usize {
        self.values.rows()
    }

    pub fn freq_bins(&self) -> usize {
        self.values.cols()
    }
}

fn hamming(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    (0..len)
        .map(|i| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * i as f64 / (len - 1) as f64).cos())
        .collect()
}

/// Per-frame log magnitudes before normalization: Hamming window, zero-pad to
/// `fft_size`, one-sided magnitude, `ln(max(v, LOG_FLOOR))`.
pub fn log_magnitude_frames(
    speech: &SpeechSamples,
    cfg: &FrontendConfig,
) -> Result<Tensor, DspError> {
    let frame = cfg.frame_samples(speech.sample_rate);
    let hop = cfg.hop_samples(speech.sample_rate);
    if frame == 0 || hop == 0 {
        return Err(DspError::BadSampleRate);
    }
    if speech.samples.len() < frame {
        return Err(DspError::TooShort {
            have: speech.samples.len(),
            need: frame,
        });
    }
    if !cfg.fft_size.is_power_of_two() || cfg.fft_size < frame {
        return Err(DspError::BadFftSize {
            fft_size: cfg.fft_size,
            frame,
        });
    }
    let n_frames = cfg.frame_count(speech.samples.len(), speech.sample_rate);
    let bins = cfg.freq_bins();
    let window = hamming(frame);
    let mut out = Vec::with_capacity(n_frames * bins);
    let mut buf = vec![0.0; frame];
    for f in 0..n_frames {
        let start = f * hop;
        for (b, (&s, &w)) in buf
            .iter_mut()
            .zip(speech.samples[start..start + frame].iter().zip(&window))
        {
            *b = s * w;
        }
        let spec = fft_real(&buf, cfg.fft_size)?;
        out.extend(spec[..bins].iter().map(|c| c.norm().max(LOG_FLOOR).ln()));
    }
    Tensor::from_vec(vec![n_frames, bins], out).map_err(DspError::from)
}

/// Full frontend: log magnitudes followed by per-utterance per-bin
/// standardization. Bins whose variance vanishes map to all-zero columns.
pub fn make_spectrogram(
    speech: &SpeechSamples,
    cfg: &FrontendConfig,
) -> Result<Spectrogram, DspError> {
    let mut values = log_magnitude_frames(speech, cfg)?;
    let (n, bins) = (values.rows(), values.cols());
    for b in 0..bins {
        let mut mean = 0.0;
        for f in 0..n {
            mean += values.at(f, b);
        }
        mean /= n as f64;
        let mut var = 0.0;
        for f in 0..n {
            let d = values.at(f, b) - mean;
            var += d * d;
        }
        var /= n as f64;
        if var < 1e-12 {
            for f in 0..n {
                values.set(f, b, 0.0);
            }
        } else {
            let inv = 1.0 / var.sqrt();
            for f in 0..n {
                let v = (values.at(f, b) - mean) * inv;
                values.set(f, b, v);
            }
        }
    }
    Ok(Spectrogram {
        values,
        config: *cfg,
    })
}

/// Linear-interpolation resampling to `target_rate`.
///
/// Output length is `round(len * target/source)`.
pub fn resample(speech: &SpeechSamples, target_rate: u32) -> Result<SpeechSamples, DspError> {
    if target_rate == 0 {
        return Err(DspError::BadSampleRate);
    }
    if target_rate == speech.sample_rate {
        return Ok(speech.clone());
    }
    let src = &speech.samples;
    let out_len =
        ((src.len() as f64) * target_rate as f64 / speech.sample_rate as f64).round() as usize;
    let ratio = speech.sample_rate as f64 / target_rate as f64;
    let mut out = Vec::with_capacity(out_len);
    for i in 0..out_len {
        let pos = i as f64 * ratio;
        let idx = pos.floor() as usize;
        let frac = pos - idx as f64;
        let a = src.get(idx).copied().unwrap_or(0.0);
        let b = src.get(idx + 1).copied().unwrap_or(a);
        let v = a + frac * (b - a);
        // linear interpolation stays within [min, max] of the endpoints, but
        // clamp against the half-open amplitude range anyway
        out.push(v.clamp(-1.0, 1.0 - f64::EPSILON));
    }
    Ok(SpeechSamples {
        samples: out,
        sample_rate: target_rate,
    })
}
