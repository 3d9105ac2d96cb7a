//! Dataset ingestion: pipe-separated manifests, WAV loading, resampling,
//! transcript normalization, and the synthetic corpus scheme.

use std::path::{Path, PathBuf};

use crate::ctc::TextSequence;
use crate::dsp::{make_spectrogram, read_wav, resample, FrontendConfig, Spectrogram};

use super::config::ExperimentConfig;
use super::synth::toy_corpus;
use super::HarnessError;

/// One training/evaluation utterance.
#[derive(Debug, Clone)]
pub struct Utterance {
    pub spec: Spectrogram,
    pub target: TextSequence,
    pub transcript: String,
}

/// A record that failed to load, kept for reporting.
#[derive(Debug)]
pub struct RecordError {
    pub line: usize,
    pub id: String,
    pub reason: String,
}

/// Lowercases and restricts a transcript to the token alphabet: characters
/// outside `[a-z']` become spaces, runs of spaces collapse, ends trim.
pub fn normalize_transcript(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut last_space = true;
    for c in raw.to_lowercase().chars() {
        let keep = c.is_ascii_lowercase() || c == '\'';
        if keep {
            out.push(c);
            last_space = false;
        } else if !last_space {
            out.push(' ');
            last_space = true;
        }
    }
    while out.ends_with(' ') {
        out.pop();
    }
    out
}

fn wav_path(manifest_dir: &Path, id: &str) -> PathBuf {
    if id.ends_with(".wav") {
        manifest_dir.join(id)
    } else {
        manifest_dir.join("wavs").join(format!("{id}.wav"))
    }
}

/// Reads a pipe-separated manifest (`id|raw|normalized`), loads and resamples
/// each WAV, and extracts spectrograms. Per-record failures are collected;
/// the call fails only when nothing loads.
pub fn load_dataset(
    manifest: &Path,
    frontend: &FrontendConfig,
    target_rate: u32,
) -> Result<(Vec<Utterance>, Vec<RecordError>), HarnessError> {
    let text = std::fs::read_to_string(manifest)
        .map_err(|e| HarnessError::Config(format!("{}: {e}", manifest.display())))?;
    let dir = manifest.parent().unwrap_or(Path::new("."));
    let mut utterances = Vec::new();
    let mut errors = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('|').collect();
        if fields.len() < 2 {
            errors.push(RecordError {
                line: lineno + 1,
                id: line.chars().take(40).collect(),
                reason: "expected id|transcript[|normalized]".into(),
            });
            continue;
        }
        let id = fields[0];
        let raw = fields
            .iter()
            .skip(1)
            .rev()
            .find(|f| !f.trim().is_empty())
            .copied()
            .unwrap_or("");
        match load_record(dir, id, raw, frontend, target_rate) {
            Ok(u) => utterances.push(u),
            Err(reason) => errors.push(RecordError {
                line: lineno + 1,
                id: id.to_string(),
                reason,
            }),
        }
    }
    if utterances.is_empty() {
        return Err(HarnessError::AllRecordsFailed(errors.len()));
    }
    Ok((utterances, errors))
}

fn load_record(
    dir: &Path,
    id: &str,
    raw: &str,
    frontend: &FrontendConfig,
    target_rate: u32,
) -> Result<Utterance, String> {
    let transcript = normalize_transcript(raw);
    let target = TextSequence::from_text(&transcript).map_err(|e| e.to_string())?;
    if target.is_empty() {
        return Err("empty transcript after normalization".into());
    }
    let speech = read_wav(&wav_path(dir, id)).map_err(|e| e.to_string())?;
    let speech = if speech.sample_rate != target_rate {
        resample(&speech, target_rate).map_err(|e| e.to_string())?
    } else {
        speech
    };
    let spec = make_spectrogram(&speech, frontend).map_err(|e| e.to_string())?;
    Ok(Utterance {
        spec,
        target,
        transcript,
    })
}

/// Loads the configured corpus: a manifest path or `synthetic:N`.
pub fn load_corpus(cfg: &ExperimentConfig) -> Result<Vec<Utterance>, HarnessError> {
    if let Some(n) = cfg.manifest.strip_prefix("synthetic:") {
        let n: usize = n
            .parse()
            .map_err(|_| HarnessError::Config(format!("bad synthetic count {n:?}")))?;
        if n == 0 {
            return Err(HarnessError::Config("synthetic corpus needs >= 1".into()));
        }
        let frontend = cfg.frontend();
        return toy_corpus(n, cfg.seed)
            .into_iter()
            .map(|(speech, text)| {
                let spec = make_spectrogram(&speech, &frontend)?;
                let target = TextSequence::from_text(&text).map_err(crate::codec::CodecError::from)?;
                Ok(Utterance {
                    spec,
                    target,
                    transcript: text,
                })
            })
            .collect();
    }
    let (utts, errors) = load_dataset(Path::new(&cfg.manifest), &cfg.frontend(), cfg.sample_rate)?;
    for e in &errors {
        eprintln!("warning: skipped record {} (line {}): {}", e.id, e.line, e.reason);
    }
    Ok(utts)
}
