//! Bit-vector plumbing and IEEE 754 binary32 serialization.

use super::BaselineError;

/// Ordered bits, most significant first within each serialized unit.
pub type BitVector = Vec<bool>;

/// Serializes each value as IEEE 754 binary32, most significant bit first.
pub fn float_serialize(values: &[f32]) -> BitVector {
    let mut bits = Vec::with_capacity(values.len() * 32);
    for &v in values {
        let raw = v.to_bits();
        for i in (0..32).rev() {
            bits.push((raw >> i) & 1 == 1);
        }
    }
    bits
}

/// Inverse of [`float_serialize`]; the bit count must be a multiple of 32.
pub fn float_deserialize(bits: &[bool]) -> Result<Vec<f32>, BaselineError> {
    if bits.len() % 32 != 0 {
        return Err(BaselineError::BitLength {
            len: bits.len(),
            multiple: 32,
        });
    }
    Ok(bits
        .chunks(32)
        .map(|c| {
            let mut raw = 0u32;
            for &b in c {
                raw = (raw << 1) | u32::from(b);
            }
            f32::from_bits(raw)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn bits_of(pattern: u32) -> BitVector {
        (0..32).rev().map(|i| (pattern >> i) & 1 == 1).collect()
    }

    #[test]
    fn one_is_3f800000() {
        assert_eq!(float_serialize(&[1.0]), bits_of(0x3F80_0000));
    }

    #[test]
    fn negative_zero_is_80000000() {
        assert_eq!(float_serialize(&[-0.0]), bits_of(0x8000_0000));
    }

    #[test]
    fn roundtrip_is_exact() {
        let mut rng = ChaCha20Rng::seed_from_u64(61);
        let values: Vec<f32> = (0..10_000)
            .map(|_| rng.random_range(-1.0e6f32..1.0e6))
            .collect();
        let back = float_deserialize(&float_serialize(&values)).unwrap();
        assert_eq!(back, values);
    }

    #[test]
    fn ragged_bit_length_is_an_error() {
        assert!(matches!(
            float_deserialize(&[true; 33]),
            Err(BaselineError::BitLength { len: 33, .. })
        ));
    }
}
