//! Flat-fading channel simulation: block or per-symbol fading, additive
//! complex Gaussian noise at a target SNR, zero-forcing equalization under
//! known channel state, and an SNR estimator for calibration tests.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ChannelError {
    #[error("input power {0} deviates from 1 by more than 1e-3")]
    NotNormalized(f64),
    #[error("channel coefficient magnitude below 1e-12; cannot equalize")]
    NearSingular,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
}

/// Fading family of the simulated link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelKind {
    Awgn,
    Rayleigh,
    Rician,
}

impl ChannelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ChannelKind::Awgn => "awgn",
            ChannelKind::Rayleigh => "rayleigh",
            ChannelKind::Rician => "rician",
        }
    }
}

impl std::str::FromStr for ChannelKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "awgn" => Ok(ChannelKind::Awgn),
            "rayleigh" => Ok(ChannelKind::Rayleigh),
            "rician" => Ok(ChannelKind::Rician),
            other => Err(format!("unknown channel kind {other:?}")),
        }
    }
}

/// How often a new fading coefficient is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FadingMode {
    /// One coefficient per transmitted vector (per utterance).
    #[default]
    Block,
    /// An independent coefficient per symbol.
    PerSymbol,
}

/// Channel configuration: kind, target SNR, Rician K-factor, fading grain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelConfig {
    pub kind: ChannelKind,
    pub snr_db: f64,
    pub rician_k: f64,
    pub fading: FadingMode,
}

impl ChannelConfig {
    pub fn new(kind: ChannelKind, snr_db: f64) -> Self {
        Self {
            kind,
            snr_db,
            rician_k: 4.0,
            fading: FadingMode::Block,
        }
    }

    /// Noise variance per complex symbol for unit signal power.
    pub fn sigma2(&self) -> f64 {
        10f64.powf(-self.snr_db / 10.0)
    }
}

/// The fading realization a transmission saw.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelRealization {
    Block(Complex64),
    PerSymbol(Vec<Complex64>),
}

impl ChannelRealization {
    pub fn coefficient(&self, i: usize) -> Complex64 {
        match self {
            ChannelRealization::Block(h) => *h,
            ChannelRealization::PerSymbol(hs) => hs[i],
        }
    }

    pub fn min_magnitude(&self) -> f64 {
        match self {
            ChannelRealization::Block(h) => h.norm(),
            ChannelRealization::PerSymbol(hs) => {
                hs.iter().map(|h| h.norm()).fold(f64::INFINITY, f64::min)
            }
        }
    }
}

/// Everything the receiver knows about the link for one transmission.
#[derive(Debug, Clone)]
pub struct ChannelState {
    pub kind: ChannelKind,
    pub snr_db: f64,
    pub rician_k: f64,
    pub h: ChannelRealization,
    pub sigma2: f64,
}

fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Unit-variance circular complex Gaussian sample.
fn complex_normal<R: Rng>(rng: &mut R) -> Complex64 {
    Complex64::new(standard_normal(rng), standard_normal(rng)) / 2f64.sqrt()
}

/// Draws one fading coefficient for the configured kind.
/// `E|h|^2 = 1` for every kind.
pub fn draw_coefficient<R: Rng>(cfg: &ChannelConfig, rng: &mut R) -> Complex64 {
    match cfg.kind {
        ChannelKind::Awgn => Complex64::new(1.0, 0.0),
        ChannelKind::Rayleigh => complex_normal(rng),
        ChannelKind::Rician => {
            let k = cfg.rician_k;
            let los = (k / (k + 1.0)).sqrt();
            let scatter = (1.0 / (k + 1.0)).sqrt();
            Complex64::new(los, 0.0) + scatter * complex_normal(rng)
        }
    }
}

/// Draws the fading realization and noise vector for `n` symbols.
pub fn sample_link<R: Rng>(
    cfg: &ChannelConfig,
    n: usize,
    rng: &mut R,
) -> (ChannelRealization, Vec<Complex64>) {
    let h = match cfg.fading {
        FadingMode::Block => ChannelRealization::Block(draw_coefficient(cfg, rng)),
        FadingMode::PerSymbol => {
            ChannelRealization::PerSymbol((0..n).map(|_| draw_coefficient(cfg, rng)).collect())
        }
    };
    let sigma = cfg.sigma2().sqrt();
    let noise = (0..n).map(|_| sigma * complex_normal(rng)).collect();
    (h, noise)
}

pub fn mean_power(x: &[Complex64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|v| v.norm_sqr()).sum::<f64>() / x.len() as f64
}

/// Applies fading and noise without the power precondition. Used for
/// constellation inputs that are normalized in expectation rather than per
/// block.
pub fn transmit_unchecked<R: Rng>(
    x: &[Complex64],
    cfg: &ChannelConfig,
    rng: &mut R,
) -> (Vec<Complex64>, ChannelState) {
    let (h, noise) = sample_link(cfg, x.len(), rng);
    let y = x
        .iter()
        .enumerate()
        .map(|(i, &v)| h.coefficient(i) * v + noise[i])
        .collect();
    (
        y,
        ChannelState {
            kind: cfg.kind,
            snr_db: cfg.snr_db,
            rician_k: cfg.rician_k,
            h,
            sigma2: cfg.sigma2(),
        },
    )
}

/// `y = h*x + w`: fading plus complex Gaussian noise with per-component
/// variance `sigma2/2`. Requires `x` power-normalized (mean |x|^2 within
/// 1e-3 of 1).
pub fn transmit<R: Rng>(
    x: &[Complex64],
    cfg: &ChannelConfig,
    rng: &mut R,
) -> Result<(Vec<Complex64>, ChannelState), ChannelError> {
    let p = mean_power(x);
    if (p - 1.0).abs() > 1e-3 {
        return Err(ChannelError::NotNormalized(p));
    }
    Ok(transmit_unchecked(x, cfg, rng))
}

/// Zero-forcing equalization with known fading: `y * conj(h) / |h|^2`.
pub fn equalize(y: &[Complex64], h: &ChannelRealization) -> Result<Vec<Complex64>, ChannelError> {
    if h.min_magnitude() <= 1e-12 {
        return Err(ChannelError::NearSingular);
    }
    if let ChannelRealization::PerSymbol(hs) = h {
        if hs.len() != y.len() {
            return Err(ChannelError::LengthMismatch(hs.len(), y.len()));
        }
    }
    Ok(y.iter()
        .enumerate()
        .map(|(i, &v)| {
            let hi = h.coefficient(i);
            v * hi.conj() / hi.norm_sqr()
        })
        .collect())
}

/// `10*log10(||h*x||^2 / ||y - h*x||^2)`; positive infinity when the
/// residual vanishes.
pub fn estimate_snr(
    x: &[Complex64],
    y: &[Complex64],
    h: &ChannelRealization,
) -> Result<f64, ChannelError> {
    if x.len() != y.len() {
        return Err(ChannelError::LengthMismatch(x.len(), y.len()));
    }
    let mut signal = 0.0;
    let mut residual = 0.0;
    for i in 0..x.len() {
        let hx = h.coefficient(i) * x[i];
        signal += hx.norm_sqr();
        residual += (y[i] - hx).norm_sqr();
    }
    if residual == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (signal / residual).log10())
}
