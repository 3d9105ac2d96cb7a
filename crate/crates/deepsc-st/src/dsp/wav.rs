//! WAV ingestion: RIFF PCM, 16-bit signed little-endian, mono.

use std::path::Path;

use super::spectrogram::SpeechSamples;
use super::DspError;

/// Reads a mono 16-bit PCM WAV file, scaling amplitudes by 1/32768.
pub fn read_wav(path: &Path) -> Result<SpeechSamples, DspError> {
    let reader = hound::WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) => DspError::Io(io),
        other => DspError::WavFormat(other.to_string()),
    })?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(DspError::WavFormat(format!(
            "expected mono, got {} channels",
            spec.channels
        )));
    }
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(DspError::WavFormat(format!(
            "expected 16-bit PCM, got {:?} {} bits",
            spec.sample_format, spec.bits_per_sample
        )));
    }
    let mut samples = Vec::with_capacity(reader.len() as usize);
    for s in reader.into_samples::<i16>() {
        let v = s.map_err(|e| DspError::WavFormat(e.to_string()))?;
        samples.push(v as f64 / 32768.0);
    }
    SpeechSamples::new(samples, spec.sample_rate)
}

/// Writes a mono 16-bit PCM WAV (test and tooling helper).
pub fn write_wav(path: &Path, speech: &SpeechSamples) -> Result<(), DspError> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: speech.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer =
        hound::WavWriter::create(path, spec).map_err(|e| DspError::WavFormat(e.to_string()))?;
    for &v in &speech.samples {
        let q = (v * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        writer
            .write_sample(q)
            .map_err(|e| DspError::WavFormat(e.to_string()))?;
    }
    writer
        .finalize()
        .map_err(|e| DspError::WavFormat(e.to_string()))?;
    Ok(())
}
