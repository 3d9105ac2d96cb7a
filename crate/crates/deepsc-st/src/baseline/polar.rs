//! Polar coding: Bhattacharyya frozen-set construction, the butterfly
//! transform, and successive cancellation (list) decoding in the LLR domain
//! with exact path metrics.

use super::bits::BitVector;
use super::BaselineError;

/// Code parameters plus the frozen-index mask.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarConfig {
    pub block_len: usize,
    pub info_len: usize,
    /// `true` marks a frozen input index; exactly `block_len - info_len` set.
    pub frozen: Vec<bool>,
    pub list_size: usize,
}

impl PolarConfig {
    /// Builds the frozen set with the Bhattacharyya-parameter recursion at
    /// the given design SNR (Es/N0 in dB).
    pub fn new(
        block_len: usize,
        info_len: usize,
        design_snr_db: f64,
        list_size: usize,
    ) -> Result<Self, BaselineError> {
        if !block_len.is_power_of_two() || block_len < 2 {
            return Err(BaselineError::BadBlockLength(block_len));
        }
        if info_len == 0 || info_len > block_len {
            return Err(BaselineError::BadInfoLength {
                info: info_len,
                block: block_len,
            });
        }
        if list_size == 0 {
            return Err(BaselineError::BadListSize);
        }
        let es_n0 = 10f64.powf(design_snr_db / 10.0);
        let mut z = vec![(-es_n0).exp()];
        while z.len() < block_len {
            let mut next = Vec::with_capacity(z.len() * 2);
            next.resize(z.len() * 2, 0.0);
            for (i, &zi) in z.iter().enumerate() {
                next[i] = 2.0 * zi - zi * zi; // degraded (decoded first)
                next[i + z.len()] = zi * zi; // upgraded
            }
            z = next;
        }
        let mut order: Vec<usize> = (0..block_len).collect();
        order.sort_by(|&a, &b| z[a].partial_cmp(&z[b]).unwrap().then(a.cmp(&b)));
        let mut frozen = vec![true; block_len];
        for &i in order.iter().take(info_len) {
            frozen[i] = false;
        }
        Ok(Self {
            block_len,
            info_len,
            frozen,
            list_size,
        })
    }
}

/// In-place butterfly `x = u F^{(x) log2 n}` over GF(2); self-inverse.
pub fn polar_transform(bits: &mut [bool]) {
    let n = bits.len();
    debug_assert!(n.is_power_of_two());
    let mut step = 1;
    while step < n {
        for start in (0..n).step_by(2 * step) {
            for j in 0..step {
                bits[start + j] ^= bits[start + j + step];
            }
        }
        step *= 2;
    }
}

/// Places info bits on the non-frozen indices (zeros elsewhere) and applies
/// the transform.
pub fn polar_encode(info: &[bool], cfg: &PolarConfig) -> Result<BitVector, BaselineError> {
    if info.len() != cfg.info_len {
        return Err(BaselineError::BadInfoLength {
            info: info.len(),
            block: cfg.block_len,
        });
    }
    let mut u = vec![false; cfg.block_len];
    let mut it = info.iter();
    for (ui, &fz) in u.iter_mut().zip(&cfg.frozen) {
        if !fz {
            *ui = *it.next().expect("count checked");
        }
    }
    polar_transform(&mut u);
    Ok(u)
}

/// Exact boxplus: `2 atanh(tanh(a/2) tanh(b/2))` in a stable form.
fn boxplus(a: f64, b: f64) -> f64 {
    let (aa, ab) = (a.abs(), b.abs());
    let sign = if (a >= 0.0) == (b >= 0.0) { 1.0 } else { -1.0 };
    let magnitude =
        aa.min(ab) + ((-(aa + ab)).exp().ln_1p() - (-(aa - ab).abs()).exp().ln_1p());
    sign * magnitude
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

/// LLR of the next input bit given the channel LLRs and the path's past
/// decisions, by the f/g recursion of successive cancellation.
fn next_bit_llr(llrs: &[f64], past: &[bool]) -> f64 {
    let m = llrs.len();
    if m == 1 {
        return llrs[0];
    }
    let half = m / 2;
    if past.len() < half {
        let left: Vec<f64> = (0..half)
            .map(|j| boxplus(llrs[j], llrs[j + half]))
            .collect();
        next_bit_llr(&left, past)
    } else {
        let mut partial = past[..half].to_vec();
        polar_transform(&mut partial);
        let right: Vec<f64> = (0..half)
            .map(|j| {
                let a = if partial[j] { -llrs[j] } else { llrs[j] };
                a + llrs[j + half]
            })
            .collect();
        next_bit_llr(&right, &past[half..])
    }
}

fn extract_info(u: &[bool], cfg: &PolarConfig) -> BitVector {
    u.iter()
        .zip(&cfg.frozen)
        .filter(|(_, &fz)| !fz)
        .map(|(&b, _)| b)
        .collect()
}

/// Plain successive cancellation, kept as an independent reference path.
pub fn polar_sc_decode(llrs: &[f64], cfg: &PolarConfig) -> Result<BitVector, BaselineError> {
    if llrs.len() != cfg.block_len {
        return Err(BaselineError::BadBlockLength(llrs.len()));
    }
    fn recurse(llrs: &[f64], frozen: &[bool]) -> (Vec<bool>, Vec<bool>) {
        let m = llrs.len();
        if m == 1 {
            let u = if frozen[0] { false } else { llrs[0] < 0.0 };
            return (vec![u], vec![u]);
        }
        let half = m / 2;
        let left_llrs: Vec<f64> = (0..half)
            .map(|j| boxplus(llrs[j], llrs[j + half]))
            .collect();
        let (u_left, x_left) = recurse(&left_llrs, &frozen[..half]);
        let right_llrs: Vec<f64> = (0..half)
            .map(|j| {
                let a = if x_left[j] { -llrs[j] } else { llrs[j] };
                a + llrs[j + half]
            })
            .collect();
        let (u_right, x_right) = recurse(&right_llrs, &frozen[half..]);
        let mut u = u_left;
        u.extend_from_slice(&u_right);
        let mut x = vec![false; m];
        for j in 0..half {
            x[j] = x_left[j] ^ x_right[j];
            x[j + half] = x_right[j];
        }
        (u, x)
    }
    let (u, _) = recurse(llrs, &cfg.frozen);
    Ok(extract_info(&u, cfg))
}

/// Successive cancellation list decoding with exact path metrics; returns
/// the info bits of the best surviving path.
pub fn polar_scl_decode(llrs: &[f64], cfg: &PolarConfig) -> Result<BitVector, BaselineError> {
    if llrs.len() != cfg.block_len {
        return Err(BaselineError::BadBlockLength(llrs.len()));
    }
    struct Path {
        u: Vec<bool>,
        metric: f64,
    }
    let mut paths = vec![Path {
        u: Vec::with_capacity(cfg.block_len),
        metric: 0.0,
    }];
    for i in 0..cfg.block_len {
        if cfg.frozen[i] {
            for p in &mut paths {
                let l = next_bit_llr(llrs, &p.u);
                p.metric += softplus(-l);
                p.u.push(false);
            }
        } else {
            let mut candidates = Vec::with_capacity(paths.len() * 2);
            for p in paths {
                let l = next_bit_llr(llrs, &p.u);
                // bit value 0 first so stable sorting prefers it on ties
                let mut u0 = p.u.clone();
                u0.push(false);
                candidates.push(Path {
                    u: u0,
                    metric: p.metric + softplus(-l),
                });
                let mut u1 = p.u;
                u1.push(true);
                candidates.push(Path {
                    u: u1,
                    metric: p.metric + softplus(l),
                });
            }
            candidates.sort_by(|a, b| a.metric.partial_cmp(&b.metric).unwrap());
            candidates.truncate(cfg.list_size);
            paths = candidates;
        }
    }
    let best = paths
        .into_iter()
        .min_by(|a, b| a.metric.partial_cmp(&b.metric).unwrap())
        .expect("at least one path");
    Ok(extract_info(&best.u, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_bits(rng: &mut ChaCha20Rng, n: usize) -> Vec<bool> {
        (0..n).map(|_| rng.random_bool(0.5)).collect()
    }

    /// BPSK over AWGN: llr = 2y/sigma^2 for y = (1-2x) + noise.
    fn bpsk_llrs(code: &[bool], sigma2: f64, rng: &mut ChaCha20Rng) -> Vec<f64> {
        code.iter()
            .map(|&b| {
                let s = if b { -1.0 } else { 1.0 };
                let n: f64 = <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng);
                let y = s + sigma2.sqrt() * n;
                2.0 * y / sigma2
            })
            .collect()
    }

    #[test]
    fn two_bit_butterfly() {
        let mut u = vec![true, false];
        polar_transform(&mut u);
        assert_eq!(u, vec![true, false]); // [u1^u2, u2]
        let mut u = vec![true, true];
        polar_transform(&mut u);
        assert_eq!(u, vec![false, true]);
    }

    #[test]
    fn all_zero_info_encodes_to_all_zero() {
        let cfg = PolarConfig::new(16, 8, 2.0, 1).unwrap();
        let x = polar_encode(&vec![false; 8], &cfg).unwrap();
        assert!(x.iter().all(|&b| !b));
    }

    #[test]
    fn encoder_matches_generator_matrix_oracle() {
        // generator built as the explicit Kronecker power of [[1,0],[1,1]]
        let n = 8;
        let mut g = vec![vec![true]];
        while g.len() < n {
            let m = g.len();
            let mut next = vec![vec![false; 2 * m]; 2 * m];
            for r in 0..m {
                for c in 0..m {
                    if g[r][c] {
                        next[r][c] = true; // F[0][0] = 1
                        next[r + m][c] = true; // F[1][0] = 1
                        next[r + m][c + m] = true; // F[1][1] = 1
                    }
                }
            }
            g = next;
        }
        let mut rng = ChaCha20Rng::seed_from_u64(71);
        let cfg = PolarConfig::new(n, n, 2.0, 1).unwrap(); // no frozen bits
        for _ in 0..50 {
            let u = random_bits(&mut rng, n);
            let x = polar_encode(&u, &cfg).unwrap();
            for j in 0..n {
                let mut acc = false;
                for i in 0..n {
                    acc ^= u[i] && g[i][j];
                }
                assert_eq!(x[j], acc, "column {j}");
            }
        }
    }

    #[test]
    fn transform_is_self_inverse() {
        let mut rng = ChaCha20Rng::seed_from_u64(72);
        for &n in &[2usize, 4, 8, 16, 32, 64] {
            let u = random_bits(&mut rng, n);
            let mut x = u.clone();
            polar_transform(&mut x);
            polar_transform(&mut x);
            assert_eq!(x, u);
        }
    }

    #[test]
    fn bit_llr_matches_exhaustive_posterior() {
        // enumerate all completions of the remaining input bits (uniform)
        // and compare the exact posterior LLR with the f/g recursion
        let n = 8;
        let mut rng = ChaCha20Rng::seed_from_u64(73);
        for _ in 0..30 {
            let llrs: Vec<f64> = (0..n).map(|_| rng.random_range(-4.0..4.0)).collect();
            let past_len = rng.random_range(0..n);
            let past = random_bits(&mut rng, past_len);
            let got = next_bit_llr(&llrs, &past);
            let mut w0 = f64::NEG_INFINITY;
            let mut w1 = f64::NEG_INFINITY;
            let free = n - past_len - 1;
            for bit in [false, true] {
                for completion in 0..(1u32 << free) {
                    let mut u = past.clone();
                    u.push(bit);
                    for k in 0..free {
                        u.push((completion >> k) & 1 == 1);
                    }
                    polar_transform(&mut u);
                    // log P(y|x) up to a constant: sum of -softplus(-(1-2x) l)
                    let w: f64 = u
                        .iter()
                        .zip(&llrs)
                        .map(|(&x, &l)| {
                            let s = if x { -l } else { l };
                            -softplus(-s)
                        })
                        .sum();
                    let target = if bit { &mut w1 } else { &mut w0 };
                    let m = target.max(w);
                    *target = m + ((*target - m).exp() + (w - m).exp()).ln();
                }
            }
            let oracle = w0 - w1;
            assert!(
                (got - oracle).abs() < 1e-9,
                "past {past_len}: {got} vs {oracle}"
            );
        }
    }

    #[test]
    fn noiseless_roundtrip_large_block() {
        let cfg = PolarConfig::new(512, 256, 2.0, 4).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(74);
        for _ in 0..3 {
            let info = random_bits(&mut rng, 256);
            let code = polar_encode(&info, &cfg).unwrap();
            let llrs: Vec<f64> = code.iter().map(|&b| if b { -200.0 } else { 200.0 }).collect();
            assert_eq!(polar_scl_decode(&llrs, &cfg).unwrap(), info);
        }
    }

    #[test]
    fn full_list_equals_maximum_likelihood() {
        let cfg = PolarConfig::new(8, 4, 2.0, 16).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(75);
        let sigma2 = 0.5;
        for _ in 0..300 {
            let info = random_bits(&mut rng, 4);
            let code = polar_encode(&info, &cfg).unwrap();
            let llrs = bpsk_llrs(&code, sigma2, &mut rng);
            let got = polar_scl_decode(&llrs, &cfg).unwrap();
            // brute-force ML over all 16 codewords
            let mut best = (f64::INFINITY, vec![]);
            for w in 0..16u32 {
                let cand: Vec<bool> = (0..4).map(|k| (w >> k) & 1 == 1).collect();
                let cw = polar_encode(&cand, &cfg).unwrap();
                let metric: f64 = cw
                    .iter()
                    .zip(&llrs)
                    .map(|(&x, &l)| softplus(if x { l } else { -l }))
                    .sum();
                if metric < best.0 {
                    best = (metric, cand);
                }
            }
            assert_eq!(got, best.1);
        }
    }

    #[test]
    fn list_one_equals_plain_sc() {
        let cfg = PolarConfig::new(16, 8, 2.0, 1).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(76);
        for _ in 0..1000 {
            let info = random_bits(&mut rng, 8);
            let code = polar_encode(&info, &cfg).unwrap();
            let llrs = bpsk_llrs(&code, 1.0, &mut rng);
            assert_eq!(
                polar_scl_decode(&llrs, &cfg).unwrap(),
                polar_sc_decode(&llrs, &cfg).unwrap()
            );
        }
    }

    #[test]
    fn larger_list_does_not_hurt_block_error_rate() {
        let cfg1 = PolarConfig::new(8, 4, 2.0, 1).unwrap();
        let cfg4 = PolarConfig::new(8, 4, 2.0, 4).unwrap();
        let sigma2 = 10f64.powf(-0.3); // 3 dB
        let mut rng = ChaCha20Rng::seed_from_u64(77);
        let mut errs1 = 0u32;
        let mut errs4 = 0u32;
        let trials = 20_000;
        for _ in 0..trials {
            let info = random_bits(&mut rng, 4);
            let code = polar_encode(&info, &cfg1).unwrap();
            let llrs = bpsk_llrs(&code, sigma2, &mut rng);
            if polar_scl_decode(&llrs, &cfg1).unwrap() != info {
                errs1 += 1;
            }
            if polar_scl_decode(&llrs, &cfg4).unwrap() != info {
                errs4 += 1;
            }
        }
        assert!(errs4 <= errs1, "list4 {errs4} vs list1 {errs1}");
        assert!(errs1 > 0, "noise level should cause some errors");
    }

    #[test]
    fn frozen_count_matches_rate() {
        let cfg = PolarConfig::new(512, 256, 2.0, 4).unwrap();
        assert_eq!(cfg.frozen.iter().filter(|&&f| f).count(), 256);
    }
}
