//! Gray-mapped square 64-QAM with max-log soft demapping.

use num_complex::Complex64;

use crate::channel::ChannelRealization;
use crate::codec::SymbolVector;

use super::bits::BitVector;
use super::BaselineError;

/// Bits per 64-QAM symbol.
pub const BITS_PER_SYMBOL: usize = 6;

/// Amplitude levels divided by sqrt(42) give unit average symbol energy.
const LEVELS: [f64; 8] = [-7.0, -5.0, -3.0, -1.0, 1.0, 3.0, 5.0, 7.0];

/// Binary-reflected Gray labels of [`LEVELS`], index-aligned:
/// 000 -> -7, 001 -> -5, 011 -> -3, 010 -> -1, 110 -> +1, 111 -> +3,
/// 101 -> +5, 100 -> +7.
const GRAY: [u8; 8] = [0b000, 0b001, 0b011, 0b010, 0b110, 0b111, 0b101, 0b100];

fn norm() -> f64 {
    1.0 / 42f64.sqrt()
}

fn gray_to_level(g: u8) -> f64 {
    let idx = GRAY.iter().position(|&x| x == g).expect("3-bit label");
    LEVELS[idx]
}

/// Maps bits (multiples of 6) onto 64-QAM symbols: the first three bits of
/// each group select the in-phase level, the last three the quadrature.
pub fn qam64_map(bits: &[bool]) -> Result<SymbolVector, BaselineError> {
    if bits.len() % BITS_PER_SYMBOL != 0 {
        return Err(BaselineError::BitLength {
            len: bits.len(),
            multiple: BITS_PER_SYMBOL,
        });
    }
    let s = norm();
    let symbols = bits
        .chunks(BITS_PER_SYMBOL)
        .map(|c| {
            let gi = (u8::from(c[0]) << 2) | (u8::from(c[1]) << 1) | u8::from(c[2]);
            let gq = (u8::from(c[3]) << 2) | (u8::from(c[4]) << 1) | u8::from(c[5]);
            Complex64::new(gray_to_level(gi) * s, gray_to_level(gq) * s)
        })
        .collect();
    Ok(SymbolVector::new(symbols))
}

/// Max-log LLR of one axis value for the three Gray bits of that axis.
fn axis_llrs(v: f64, inv_sigma2: f64, out: &mut Vec<f64>) {
    let s = norm();
    for bit in 0..3 {
        let mut d0 = f64::INFINITY;
        let mut d1 = f64::INFINITY;
        for (idx, &level) in LEVELS.iter().enumerate() {
            let d = (v - level * s) * (v - level * s);
            if (GRAY[idx] >> (2 - bit)) & 1 == 0 {
                d0 = d0.min(d);
            } else {
                d1 = d1.min(d);
            }
        }
        out.push((d1 - d0) * inv_sigma2);
    }
}

/// Per-bit log-likelihood ratios (positive favors bit 0) for equalized
/// symbols. The effective noise variance after zero-forcing is
/// `sigma2 / |h|^2` per symbol.
pub fn qam64_llr(
    equalized: &[Complex64],
    h: &ChannelRealization,
    sigma2: f64,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(equalized.len() * BITS_PER_SYMBOL);
    for (i, y) in equalized.iter().enumerate() {
        let h2 = h.coefficient(i).norm_sqr();
        let inv = h2 / sigma2;
        axis_llrs(y.re, inv, &mut out);
        axis_llrs(y.im, inv, &mut out);
    }
    out
}
