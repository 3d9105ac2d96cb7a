//! Connectionist temporal classification: the 29-token alphabet, alignment
//! collapse, exact log-space loss and gradient via the forward-backward
//! recursion, greedy decoding, and an exhaustive alignment enumerator used
//! as a test oracle.

use crate::nn::Tensor;

/// Number of tokens: a-z, apostrophe, space, blank.
pub const ALPHABET_SIZE: usize = 29;

/// Index of the blank token (the 29th token, 0-based).
pub const BLANK: u8 = 28;

#[derive(Debug, thiserror::Error)]
pub enum CtcError {
    /// The target cannot be aligned in the available steps; the mathematical
    /// loss is positive infinity.
    #[error("no valid alignment: target needs {needed} steps, matrix has {have}")]
    ImpossibleAlignment { needed: usize, have: usize },
    #[error("matrix rows must be stochastic: {0}")]
    NotStochastic(String),
    #[error("blank token is not allowed in a text sequence")]
    BlankInText,
    #[error("character {0:?} is outside the token alphabet")]
    BadChar(char),
    #[error("expected an [L, 29] matrix, got {0:?}")]
    BadShape(Vec<usize>),
}

/// Maps a token index to its character; blank has no character.
pub fn token_to_char(token: u8) -> Option<char> {
    match token {
        0..=25 => Some((b'a' + token) as char),
        26 => Some('\''),
        27 => Some(' '),
        _ => None,
    }
}

/// Maps a character to its token index.
pub fn char_to_token(c: char) -> Option<u8> {
    match c {
        'a'..='z' => Some(c as u8 - b'a'),
        '\'' => Some(26),
        ' ' => Some(27),
        _ => None,
    }
}

/// A token sequence over the non-blank alphabet.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TextSequence {
    tokens: Vec<u8>,
}

impl TextSequence {
    pub fn from_tokens(tokens: Vec<u8>) -> Result<Self, CtcError> {
        if tokens.iter().any(|&t| t >= BLANK) {
            return Err(CtcError::BlankInText);
        }
        Ok(Self { tokens })
    }

    pub fn from_text(text: &str) -> Result<Self, CtcError> {
        let tokens = text
            .chars()
            .map(|c| char_to_token(c).ok_or(CtcError::BadChar(c)))
            .collect::<Result<_, _>>()?;
        Ok(Self { tokens })
    }

    pub fn tokens(&self) -> &[u8] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Minimum number of steps any valid alignment needs: one per token plus
    /// a separating blank between adjacent repeats.
    pub fn min_alignment_len(&self) -> usize {
        let repeats = self.tokens.windows(2).filter(|w| w[0] == w[1]).count();
        self.tokens.len() + repeats
    }
}

impl std::fmt::Display for TextSequence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        use std::fmt::Write;
        for &t in &self.tokens {
            f.write_char(token_to_char(t).expect("no blanks"))?;
        }
        Ok(())
    }
}

/// A length-L path over the full 29-token alphabet.
pub type Alignment = Vec<u8>;

/// Row-stochastic `[L, 29]` matrix over the token alphabet.
///
/// This is the wire format of the semantic features: each row is a
/// distribution over tokens for one output step.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMatrix {
    values: Tensor,
}

impl ProbabilityMatrix {
    /// Validates shape `[L, 29]`, entries in `[0, 1]`, rows summing to 1
    /// within 1e-6.
    pub fn new(values: Tensor) -> Result<Self, CtcError> {
        if values.shape().len() != 2 || values.cols() != ALPHABET_SIZE {
            return Err(CtcError::BadShape(values.shape().to_vec()));
        }
        for (i, row) in values.data().chunks(ALPHABET_SIZE).enumerate() {
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-6 {
                return Err(CtcError::NotStochastic(format!("row {i} sums to {sum}")));
            }
            if row.iter().any(|&p| !(0.0..=1.0 + 1e-12).contains(&p)) {
                return Err(CtcError::NotStochastic(format!(
                    "row {i} has entries outside [0, 1]"
                )));
            }
        }
        Ok(Self { values })
    }

    pub fn steps(&self) -> usize {
        self.values.rows()
    }

    pub fn values(&self) -> &Tensor {
        &self.values
    }

    pub fn prob(&self, step: usize, token: u8) -> f64 {
        self.values.at(step, token as usize)
    }
}

/// Merges consecutive duplicates, then removes blanks.
pub fn collapse_alignment(alignment: &[u8]) -> TextSequence {
    let mut tokens = Vec::new();
    let mut prev: Option<u8> = None;
    for &a in alignment {
        if prev != Some(a) && a != BLANK {
            tokens.push(a);
        }
        prev = Some(a);
    }
    TextSequence { tokens }
}

/// Lattice of the blank-interleaved target: blank, t1, blank, t2, ..., blank.
fn extended_target(t: &TextSequence) -> Vec<u8> {
    let mut ext = Vec::with_capacity(2 * t.len() + 1);
    ext.push(BLANK);
    for &tok in &t.tokens {
        ext.push(tok);
        ext.push(BLANK);
    }
    ext
}

/// Whether the lattice allows a direct jump from state `s-2` to `s`.
fn skip_allowed(ext: &[u8], s: usize) -> bool {
    s >= 2 && ext[s] != BLANK && ext[s] != ext[s - 2]
}

/// Exhaustively enumerates every alignment of length `steps` that collapses
/// to `t`. Intended for small `steps` only; the cost is proportional to the
/// number of valid alignments.
pub fn enumerate_alignments(t: &TextSequence, steps: usize) -> Vec<Alignment> {
    let ext = extended_target(t);
    let last = ext.len() - 1;
    let mut out = Vec::new();
    if steps == 0 || steps < t.min_alignment_len() {
        return out;
    }
    // depth-first over lattice states; each state path maps to exactly one
    // token path
    let mut path = Vec::with_capacity(steps);
    fn recurse(
        ext: &[u8],
        last: usize,
        steps: usize,
        s: usize,
        path: &mut Vec<u8>,
        out: &mut Vec<Alignment>,
    ) {
        path.push(ext[s]);
        if path.len() == steps {
            if s == last || (last >= 1 && s == last - 1) {
                out.push(path.clone());
            }
        } else {
            recurse(ext, last, steps, s, path, out);
            if s + 1 <= last {
                recurse(ext, last, steps, s + 1, path, out);
            }
            if s + 2 <= last && skip_allowed(ext, s + 2) {
                recurse(ext, last, steps, s + 2, path, out);
            }
        }
        path.pop();
    }
    recurse(&ext, last, steps, 0, &mut path, &mut out);
    if last >= 1 {
        recurse(&ext, last, steps, 1, &mut path, &mut out);
    }
    out
}

/// Number of lattice paths of length `steps`, by dynamic programming.
pub fn alignment_count(t: &TextSequence, steps: usize) -> u128 {
    let ext = extended_target(t);
    let states = ext.len();
    if steps == 0 {
        return 0;
    }
    let mut count = vec![0u128; states];
    count[0] = 1;
    if states > 1 {
        count[1] = 1;
    }
    for _ in 1..steps {
        let mut next = vec![0u128; states];
        for s in 0..states {
            let mut c = count[s];
            if s >= 1 {
                c += count[s - 1];
            }
            if skip_allowed(&ext, s) {
                c += count[s - 2];
            }
            next[s] = c;
        }
        count = next;
    }
    let mut total = count[states - 1];
    if states >= 2 {
        total += count[states - 2];
    }
    total
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Forward recursion over the lattice in log space. Returns per-step alphas.
fn forward_log(logp: &Tensor, ext: &[u8]) -> Vec<Vec<f64>> {
    let steps = logp.rows();
    let states = ext.len();
    let mut alphas = vec![vec![f64::NEG_INFINITY; states]; steps];
    alphas[0][0] = logp.at(0, ext[0] as usize);
    if states > 1 {
        alphas[0][1] = logp.at(0, ext[1] as usize);
    }
    for l in 1..steps {
        for s in 0..states {
            let mut incoming = [f64::NEG_INFINITY; 3];
            incoming[0] = alphas[l - 1][s];
            if s >= 1 {
                incoming[1] = alphas[l - 1][s - 1];
            }
            if skip_allowed(ext, s) {
                incoming[2] = alphas[l - 1][s - 2];
            }
            let inc = log_sum_exp(&incoming);
            alphas[l][s] = if inc == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                inc + logp.at(l, ext[s] as usize)
            };
        }
    }
    alphas
}

/// Backward recursion; `betas[l][s]` excludes the emission at step `l`.
fn backward_log(logp: &Tensor, ext: &[u8]) -> Vec<Vec<f64>> {
    let steps = logp.rows();
    let states = ext.len();
    let mut betas = vec![vec![f64::NEG_INFINITY; states]; steps];
    betas[steps - 1][states - 1] = 0.0;
    if states >= 2 {
        betas[steps - 1][states - 2] = 0.0;
    }
    for l in (0..steps - 1).rev() {
        for s in 0..states {
            let mut outgoing = [f64::NEG_INFINITY; 3];
            outgoing[0] = logp.at(l + 1, ext[s] as usize) + betas[l + 1][s];
            if s + 1 < states {
                outgoing[1] = logp.at(l + 1, ext[s + 1] as usize) + betas[l + 1][s + 1];
            }
            if s + 2 < states && skip_allowed(ext, s + 2) {
                outgoing[2] = logp.at(l + 1, ext[s + 2] as usize) + betas[l + 1][s + 2];
            }
            betas[l][s] = log_sum_exp(&outgoing);
        }
    }
    betas
}

fn check_steps(steps: usize, t: &TextSequence) -> Result<(), CtcError> {
    let needed = t.min_alignment_len().max(1);
    if steps < needed {
        return Err(CtcError::ImpossibleAlignment {
            needed,
            have: steps,
        });
    }
    Ok(())
}

/// Loss and gradient with respect to pre-softmax logits, computed from the
/// log-probability matrix `logp` (rows are log distributions).
fn loss_and_logit_grad(
    logp: &Tensor,
    t: &TextSequence,
) -> Result<(f64, Tensor), CtcError> {
    check_steps(logp.rows(), t)?;
    let ext = extended_target(t);
    let states = ext.len();
    let steps = logp.rows();
    let alphas = forward_log(logp, &ext);
    let betas = backward_log(logp, &ext);
    let mut total = vec![alphas[steps - 1][states - 1]];
    if states >= 2 {
        total.push(alphas[steps - 1][states - 2]);
    }
    let log_p = log_sum_exp(&total);
    let loss = -log_p;
    let mut grad = Tensor::zeros(vec![steps, ALPHABET_SIZE]);
    if log_p == f64::NEG_INFINITY {
        // probability-zero event: the loss is infinite and the gradient is
        // left at zero (and unused by callers that see the infinite loss)
        return Ok((f64::INFINITY, grad));
    }
    for l in 0..steps {
        // log of the posterior mass per token at this step
        let mut occupancy = vec![f64::NEG_INFINITY; ALPHABET_SIZE];
        for s in 0..states {
            let g = alphas[l][s] + betas[l][s];
            let k = ext[s] as usize;
            occupancy[k] = log_sum_exp(&[occupancy[k], g]);
        }
        for k in 0..ALPHABET_SIZE {
            let y = logp.at(l, k).exp();
            let post = if occupancy[k] == f64::NEG_INFINITY {
                0.0
            } else {
                (occupancy[k] - log_p).exp()
            };
            grad.set(l, k, y - post);
        }
    }
    Ok((loss, grad))
}

fn log_probs(p: &ProbabilityMatrix) -> Tensor {
    p.values().map(f64::ln)
}

/// Negative log probability of the target under all valid alignments.
pub fn ctc_loss(p: &ProbabilityMatrix, t: &TextSequence) -> Result<f64, CtcError> {
    loss_and_logit_grad(&log_probs(p), t).map(|(loss, _)| loss)
}

/// Gradient of [`ctc_loss`] with respect to the pre-softmax logits that
/// produced `p` (rows sum to zero).
pub fn ctc_grad(p: &ProbabilityMatrix, t: &TextSequence) -> Result<Tensor, CtcError> {
    loss_and_logit_grad(&log_probs(p), t).map(|(_, grad)| grad)
}

/// Loss and logit gradient straight from logits, using a stable log-softmax.
/// This is the entry point the training graph uses.
pub fn loss_and_grad_from_logits(
    logits: &Tensor,
    t: &TextSequence,
) -> Result<(f64, Tensor), CtcError> {
    if logits.shape().len() != 2 || logits.cols() != ALPHABET_SIZE {
        return Err(CtcError::BadShape(logits.shape().to_vec()));
    }
    let mut logp = logits.clone();
    for row in logp.data_mut().chunks_mut(ALPHABET_SIZE) {
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = row.iter().map(|v| (v - m).exp()).sum();
        let lz = m + z.ln();
        for v in row.iter_mut() {
            *v -= lz;
        }
    }
    loss_and_logit_grad(&logp, t)
}

/// Per-step argmax (ties to the lowest token index) followed by collapse.
pub fn greedy_decode(p: &ProbabilityMatrix) -> TextSequence {
    let mut alignment = Vec::with_capacity(p.steps());
    for l in 0..p.steps() {
        let mut best = 0u8;
        let mut best_p = p.prob(l, 0);
        for k in 1..ALPHABET_SIZE as u8 {
            let v = p.prob(l, k);
            if v > best_p {
                best = k;
                best_p = v;
            }
        }
        alignment.push(best);
    }
    collapse_alignment(&alignment)
}
