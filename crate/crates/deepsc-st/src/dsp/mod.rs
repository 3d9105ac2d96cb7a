//! Speech frontend: FFT, spectrogram extraction, resampling, WAV ingestion.

mod fft;
mod spectrogram;
mod wav;

pub use fft::{fft, fft_real};
pub use spectrogram::{
    log_magnitude_frames, make_spectrogram, resample, FrontendConfig, SpeechSamples, Spectrogram,
    LOG_FLOOR,
};
pub use wav::{read_wav, write_wav};

#[derive(Debug, thiserror::Error)]
pub enum DspError {
    #[error("FFT length {0} is not a power of two")]
    FftLength(usize),
    #[error("utterance too short: {have} samples, need at least {need}")]
    TooShort { have: usize, need: usize },
    #[error("fft_size {fft_size} must be a power of two and >= frame length {frame}")]
    BadFftSize { fft_size: usize, frame: usize },
    #[error("sample rate and framing must be positive")]
    BadSampleRate,
    #[error("amplitude outside [-1, 1)")]
    AmplitudeRange,
    #[error("unsupported WAV encoding: {0}")]
    WavFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Nn(#[from] crate::nn::NnError),
}
