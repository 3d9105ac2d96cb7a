//! Radix-2 discrete Fourier transform.

use num_complex::Complex64;

use super::DspError;

/// In-place iterative Cooley-Tukey FFT of a power-of-two-length sequence.
///
/// Returns the unnormalized DFT: `X[k] = sum_n x[n] exp(-2*pi*i*n*k/N)`.
pub fn fft(input: &[Complex64]) -> Result<Vec<Complex64>, DspError> {
    let n = input.len();
    if n == 0 || !n.is_power_of_two() {
        return Err(DspError::FftLength(n));
    }
    let mut data = input.to_vec();
    if n == 1 {
        return Ok(data);
    }
    // bit-reversal permutation
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = (i.reverse_bits() >> (usize::BITS - bits)) & (n - 1);
        if j > i {
            data.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let ang = -2.0 * std::f64::consts::PI / len as f64;
        let wlen = Complex64::new(ang.cos(), ang.sin());
        for start in (0..n).step_by(len) {
            let mut w = Complex64::new(1.0, 0.0);
            for k in 0..len / 2 {
                let a = data[start + k];
                let b = data[start + k + len / 2] * w;
                data[start + k] = a + b;
                data[start + k + len / 2] = a - b;
                w *= wlen;
            }
        }
        len <<= 1;
    }
    Ok(data)
}

/// FFT of a real sequence zero-padded to `fft_size`.
pub fn fft_real(input: &[f64], fft_size: usize) -> Result<Vec<Complex64>, DspError> {
    let mut buf = vec![Complex64::new(0.0, 0.0); fft_size];
    for (b, &v) in buf.iter_mut().zip(input) {
        b.re = v;
    }
    fft(&buf)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    /// Naive O(n^2) DFT oracle.
    fn naive_dft(x: &[Complex64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (i, &v) in x.iter().enumerate() {
                    let ang = -2.0 * std::f64::consts::PI * (i * k) as f64 / n as f64;
                    acc += v * Complex64::new(ang.cos(), ang.sin());
                }
                acc
            })
            .collect()
    }

    /// Naive inverse DFT oracle.
    fn naive_idft(x: &[Complex64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (i, &v) in x.iter().enumerate() {
                    let ang = 2.0 * std::f64::consts::PI * (i * k) as f64 / n as f64;
                    acc += v * Complex64::new(ang.cos(), ang.sin());
                }
                acc / n as f64
            })
            .collect()
    }

    #[test]
    fn impulse_transforms_to_constant() {
        let y = fft(&[c(1.0), c(0.0), c(0.0), c(0.0)]).unwrap();
        for v in y {
            assert!((v - c(1.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn constant_transforms_to_impulse() {
        let y = fft(&[c(1.0); 4]).unwrap();
        assert!((y[0] - c(4.0)).norm() < 1e-12);
        for v in &y[1..] {
            assert!(v.norm() < 1e-12);
        }
    }

    #[test]
    fn matches_naive_dft_oracle() {
        let mut seed = 0xabcdefu64;
        let mut next = move || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
            (seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let x: Vec<Complex64> = (0..8).map(|_| Complex64::new(next(), next())).collect();
        let y = fft(&x).unwrap();
        let oracle = naive_dft(&x);
        for (a, b) in y.iter().zip(&oracle) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn inverse_dft_recovers_input() {
        let mut seed = 99u64;
        let mut next = move || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
            (seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let x: Vec<Complex64> = (0..16).map(|_| Complex64::new(next(), next())).collect();
        let back = naive_idft(&fft(&x).unwrap());
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn non_power_of_two_is_an_error() {
        let x = vec![c(1.0); 6];
        assert!(matches!(fft(&x), Err(DspError::FftLength(6))));
    }

    #[test]
    fn length_one_is_identity() {
        let y = fft(&[c(2.5)]).unwrap();
        assert_eq!(y.len(), 1);
        assert!((y[0] - c(2.5)).norm() < 1e-15);
    }
}
