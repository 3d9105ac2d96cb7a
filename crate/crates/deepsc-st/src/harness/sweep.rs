//! Frozen-model evaluation: single-point scoring and the channel x SNR
//! sweep with CSV and plot-data emission.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::channel::{equalize, transmit, ChannelConfig, ChannelKind, FadingMode};
use crate::codec::Model;
use crate::ctc::greedy_decode;
use crate::metrics::{edit_ops, fdsd, kdsd};
use crate::nn::Tensor;

use super::config::ExperimentConfig;
use super::dataset::Utterance;
use super::HarnessError;

/// One `(channel, snr)` evaluation: corpus-level error rates and optional
/// feature-distribution distances between clean encoder activations and
/// received decoder activations.
#[derive(Debug, Clone)]
pub struct EvaluationRow {
    pub channel: ChannelKind,
    pub snr_db: f64,
    pub cer: f64,
    pub wer: f64,
    pub n_utts: usize,
    pub fdsd: Option<f64>,
    pub kdsd: Option<f64>,
}

/// Reference/hypothesis transcript pair from one utterance.
pub type TranscriptPair = (String, String);

/// Runs the frozen pipeline over the corpus at one channel condition.
/// Corpus-level rates: total edit operations over total reference length.
pub fn evaluate<R: Rng>(
    model: &Model,
    corpus: &[Utterance],
    channel: &ChannelConfig,
    rng: &mut R,
    compute_distances: bool,
) -> Result<(EvaluationRow, Vec<TranscriptPair>), HarnessError> {
    let mut char_edits = 0usize;
    let mut char_total = 0usize;
    let mut word_edits = 0usize;
    let mut word_total = 0usize;
    let mut pairs = Vec::with_capacity(corpus.len());
    let mut clean_rows: Vec<f64> = Vec::new();
    let mut received_rows: Vec<f64> = Vec::new();
    let mut feature_cols = 0usize;
    for utt in corpus {
        let features = model.semantic_encode(&utt.spec)?;
        let x = model.channel_encode(&features)?;
        let (y, state) = transmit(x.symbols(), channel, rng)?;
        let y_eq = crate::codec::SymbolVector::new(equalize(&y, &state.h)?);
        let recovered = model.channel_decode(&y_eq)?;
        let hyp = greedy_decode(&recovered).to_string();
        let r: Vec<char> = utt.transcript.chars().collect();
        let h: Vec<char> = hyp.chars().collect();
        let ops = edit_ops(&r, &h);
        char_edits += ops.distance();
        char_total += r.len();
        let rw: Vec<&str> = utt.transcript.split_whitespace().collect();
        let hw: Vec<&str> = hyp.split_whitespace().collect();
        let wops = edit_ops(&rw, &hw);
        word_edits += wops.distance();
        word_total += rw.len();
        if compute_distances {
            let clean = model.encoder_logits(&utt.spec)?;
            let received = model.decoder_logits(&y_eq)?;
            feature_cols = clean.cols();
            clean_rows.extend_from_slice(clean.data());
            received_rows.extend_from_slice(received.data());
        }
        pairs.push((utt.transcript.clone(), hyp));
    }
    let (fdsd_v, kdsd_v) = if compute_distances && feature_cols > 0 {
        let d = Tensor::from_vec(vec![clean_rows.len() / feature_cols, feature_cols], clean_rows)
            .map_err(crate::codec::CodecError::from)?;
        let d_hat = Tensor::from_vec(
            vec![received_rows.len() / feature_cols, feature_cols],
            received_rows,
        )
        .map_err(crate::codec::CodecError::from)?;
        (Some(fdsd(&d, &d_hat)?), Some(kdsd(&d, &d_hat)?))
    } else {
        (None, None)
    };
    Ok((
        EvaluationRow {
            channel: channel.kind,
            snr_db: channel.snr_db,
            cer: char_edits as f64 / char_total as f64,
            wer: word_edits as f64 / word_total as f64,
            n_utts: corpus.len(),
            fdsd: fdsd_v,
            kdsd: kdsd_v,
        },
        pairs,
    ))
}

/// Full sweep output: one row per `(channel, snr)` plus optional transcript
/// dumps keyed the same way.
pub struct SweepOutput {
    pub rows: Vec<EvaluationRow>,
    pub transcripts: Vec<(ChannelKind, f64, Vec<TranscriptPair>)>,
}

/// Evaluates every configured channel kind over the SNR grid. Each row uses
/// an independent stream derived from the config seed, so results do not
/// depend on evaluation order.
pub fn evaluate_sweep(
    model: &Model,
    corpus: &[Utterance],
    cfg: &ExperimentConfig,
) -> Result<SweepOutput, HarnessError> {
    let mut rows = Vec::new();
    let mut transcripts = Vec::new();
    for (ci, kind) in cfg.channels()?.into_iter().enumerate() {
        for (si, snr_db) in cfg.snr_grid().into_iter().enumerate() {
            let channel = ChannelConfig {
                kind,
                snr_db,
                rician_k: cfg.rician_k,
                fading: FadingMode::Block,
            };
            let stream = cfg
                .seed
                .wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul((ci as u64) << 20 | si as u64 + 1));
            let mut rng = ChaCha20Rng::seed_from_u64(stream);
            let (row, pairs) = evaluate(model, corpus, &channel, &mut rng, cfg.compute_distances)?;
            rows.push(row);
            if cfg.dump_transcripts {
                transcripts.push((kind, snr_db, pairs));
            }
        }
    }
    Ok(SweepOutput { rows, transcripts })
}

/// `results.csv`: `channel,snr_db,cer,wer,n_utts` with fixed formatting and
/// UNIX newlines, byte-stable for a fixed config and seed.
pub fn write_results_csv(rows: &[EvaluationRow], path: &Path) -> Result<(), HarnessError> {
    let mut out = String::from("channel,snr_db,cer,wer,n_utts\n");
    for r in rows {
        out.push_str(&format!(
            "{},{:.1},{:.6},{:.6},{}\n",
            r.channel.name(),
            r.snr_db,
            r.cer,
            r.wer,
            r.n_utts
        ));
    }
    write_file(path, out.as_bytes())
}

/// `distances.csv`: `channel,snr_db,fdsd,kdsd` for rows that carry them.
pub fn write_distances_csv(rows: &[EvaluationRow], path: &Path) -> Result<(), HarnessError> {
    let mut out = String::from("channel,snr_db,fdsd,kdsd\n");
    for r in rows {
        if let (Some(f), Some(k)) = (r.fdsd, r.kdsd) {
            out.push_str(&format!(
                "{},{:.1},{:.6},{:.6}\n",
                r.channel.name(),
                r.snr_db,
                f,
                k
            ));
        }
    }
    write_file(path, out.as_bytes())
}

/// Plot-ready data: one `(snr, cer)` series per channel, tab-separated.
pub fn write_plot_data(rows: &[EvaluationRow], path: &Path) -> Result<(), HarnessError> {
    let mut channels: Vec<ChannelKind> = Vec::new();
    let mut grid: Vec<f64> = Vec::new();
    for r in rows {
        if !channels.contains(&r.channel) {
            channels.push(r.channel);
        }
        if !grid.iter().any(|&s| (s - r.snr_db).abs() < 1e-9) {
            grid.push(r.snr_db);
        }
    }
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut out = String::from("snr_db");
    for c in &channels {
        out.push('\t');
        out.push_str(c.name());
    }
    out.push('\n');
    for &snr in &grid {
        out.push_str(&format!("{snr:.1}"));
        for c in &channels {
            let cell = rows
                .iter()
                .find(|r| r.channel == *c && (r.snr_db - snr).abs() < 1e-9)
                .map(|r| format!("{:.6}", r.cer))
                .unwrap_or_default();
            out.push('\t');
            out.push_str(&cell);
        }
        out.push('\n');
    }
    write_file(path, out.as_bytes())
}

/// Per-utterance dump: `channel<TAB>snr_db<TAB>index<TAB>ref<TAB>hyp`.
pub fn write_transcripts(
    transcripts: &[(ChannelKind, f64, Vec<TranscriptPair>)],
    path: &Path,
) -> Result<(), HarnessError> {
    let mut out = String::from("channel\tsnr_db\tutt\tref\thyp\n");
    for (kind, snr, pairs) in transcripts {
        for (i, (r, h)) in pairs.iter().enumerate() {
            out.push_str(&format!("{}\t{snr:.1}\t{i}\t{r}\t{h}\n", kind.name()));
        }
    }
    write_file(path, out.as_bytes())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(HarnessError::Io)?;
        }
    }
    let mut f = std::fs::File::create(path).map_err(HarnessError::Io)?;
    f.write_all(bytes).map_err(HarnessError::Io)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::dataset::load_corpus;
    use crate::harness::train::train_on;

    fn toy_cfg() -> ExperimentConfig {
        ExperimentConfig {
            manifest: "synthetic:2".into(),
            frame_len_ms: 8,
            hop_ms: 4,
            fft_size: 128,
            conv_filters: 4,
            brnn_modules: 1,
            gru_units: 8,
            encoder_hidden: 16,
            batch_size: 2,
            learning_rate: 0.05,
            epochs: 2,
            train_channel: "awgn".into(),
            train_snr_db: 200.0,
            eval_channels: vec!["awgn".into(), "rician".into()],
            snr_min_db: 0.0,
            snr_max_db: 4.0,
            snr_step_db: 4.0,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn sweep_shape_and_determinism() {
        let cfg = toy_cfg();
        let corpus = load_corpus(&cfg).unwrap();
        let model = train_on(&cfg, &corpus).unwrap().model;
        let a = evaluate_sweep(&model, &corpus, &cfg).unwrap();
        let b = evaluate_sweep(&model, &corpus, &cfg).unwrap();
        assert_eq!(a.rows.len(), 2 * 2);
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            assert_eq!(ra.cer, rb.cer);
            assert_eq!(ra.wer, rb.wer);
        }
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("r1.csv");
        let p2 = dir.path().join("r2.csv");
        write_results_csv(&a.rows, &p1).unwrap();
        write_results_csv(&b.rows, &p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
        let first = std::fs::read_to_string(&p1).unwrap();
        assert!(first.starts_with("channel,snr_db,cer,wer,n_utts\n"));
        assert_eq!(first.lines().count(), 5);
    }

    #[test]
    fn transparent_channel_matches_noiseless_pipeline() {
        let mut cfg = toy_cfg();
        cfg.eval_channels = vec!["awgn".into()];
        cfg.snr_min_db = 200.0;
        cfg.snr_max_db = 200.0;
        cfg.snr_step_db = 1.0;
        let corpus = load_corpus(&cfg).unwrap();
        let model = train_on(&cfg, &corpus).unwrap().model;
        let sweep = evaluate_sweep(&model, &corpus, &cfg).unwrap();
        // direct noiseless pipeline: encode -> decode without a channel
        let mut edits = 0usize;
        let mut total = 0usize;
        for utt in &corpus {
            let p = model.semantic_encode(&utt.spec).unwrap();
            let x = model.channel_encode(&p).unwrap();
            let d = model.channel_decode(&x).unwrap();
            let hyp = greedy_decode(&d).to_string();
            let r: Vec<char> = utt.transcript.chars().collect();
            let h: Vec<char> = hyp.chars().collect();
            edits += edit_ops(&r, &h).distance();
            total += r.len();
        }
        let direct = edits as f64 / total as f64;
        assert_eq!(sweep.rows[0].cer, direct);
    }

    #[test]
    fn distances_are_emitted_when_requested() {
        let mut cfg = toy_cfg();
        cfg.compute_distances = true;
        cfg.eval_channels = vec!["awgn".into()];
        cfg.snr_min_db = 8.0;
        cfg.snr_max_db = 8.0;
        let corpus = load_corpus(&cfg).unwrap();
        let model = train_on(&cfg, &corpus).unwrap().model;
        let sweep = evaluate_sweep(&model, &corpus, &cfg).unwrap();
        let row = &sweep.rows[0];
        assert!(row.fdsd.unwrap() >= 0.0);
        assert!(row.kdsd.is_some());
    }
}
