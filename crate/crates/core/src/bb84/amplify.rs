//! Privacy amplification by Toeplitz hashing.

use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::rng::RandomSource;

/// Binary Shannon entropy in bits. `h2(0) = h2(1) = 0`.
pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyPolicy {
    EntropyBound,
    FixedLength(usize),
}

/// `max(0, floor(n * (1 - h2(qber))) - leakage - margin)`.
pub fn entropy_bound_length(n: usize, qber: f64, leakage_bits: usize, margin: usize) -> usize {
    let secure = (n as f64 * (1.0 - binary_entropy(qber))).floor() as usize;
    secure.saturating_sub(leakage_bits).saturating_sub(margin)
}

/// Output length under `policy`. A fixed length the entropy bound cannot
/// support yields zero.
pub fn final_key_length(
    n: usize,
    qber: f64,
    leakage_bits: usize,
    margin: usize,
    policy: KeyPolicy,
) -> usize {
    let bound = entropy_bound_length(n, qber, leakage_bits, margin);
    match policy {
        KeyPolicy::EntropyBound => bound,
        KeyPolicy::FixedLength(l) if l <= bound => l,
        KeyPolicy::FixedLength(_) => 0,
    }
}

/// A member of the Toeplitz universal family mapping `input_len` bits to
/// `output_len` bits, fixed by its `input_len + output_len - 1` diagonal bits.
///
/// Entry `(i, j)` of the matrix is `diagonal[i + input_len - 1 - j]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ToeplitzHash {
    input_len: usize,
    output_len: usize,
    diagonal: BitString,
}

impl ToeplitzHash {
    pub fn new(input_len: usize, output_len: usize, diagonal: BitString) -> Self {
        assert_eq!(
            diagonal.len(),
            (input_len + output_len).saturating_sub(1),
            "diagonal length must be input_len + output_len - 1"
        );
        Self {
            input_len,
            output_len,
            diagonal,
        }
    }

    pub fn from_rng(input_len: usize, output_len: usize, rng: &mut RandomSource) -> Self {
        let diag = (0..(input_len + output_len).saturating_sub(1))
            .map(|_| rng.bit())
            .collect();
        Self::new(input_len, output_len, diag)
    }

    pub fn input_len(&self) -> usize {
        self.input_len
    }

    pub fn output_len(&self) -> usize {
        self.output_len
    }

    pub fn diagonal(&self) -> &BitString {
        &self.diagonal
    }

    /// Matrix-vector product over GF(2).
    ///
    /// Output bit `i` is the parity of `diagonal[i..i + n] & reverse(key)`,
    /// evaluated 64 bits at a time.
    pub fn apply(&self, key: &[u8]) -> BitString {
        assert_eq!(key.len(), self.input_len);
        let n = self.input_len;
        if self.output_len == 0 || n == 0 {
            return BitString::zeros(self.output_len);
        }
        let rev: Vec<u8> = key.iter().rev().copied().collect();
        let key_words = pack(&rev);
        // One zero word of padding keeps the `hi` read in bounds. Bits of the
        // window past `n` meet the zero padding of the last key word.
        let mut diag_words = pack(self.diagonal.as_slice());
        diag_words.push(0);
        let nw = key_words.len();
        let mut out = Vec::with_capacity(self.output_len);
        for i in 0..self.output_len {
            let (w0, sh) = (i / 64, (i % 64) as u32);
            let diag = &diag_words[w0..w0 + nw + 1];
            let acc = if sh == 0 {
                diag.iter().zip(&key_words).fold(0u64, |acc, (d, k)| acc ^ (d & k))
            } else {
                diag.windows(2)
                    .zip(&key_words)
                    .fold(0u64, |acc, (d, k)| acc ^ (((d[0] >> sh) | (d[1] << (64 - sh))) & k))
            };
            out.push((acc.count_ones() & 1) as u8);
        }
        BitString::from_vec(out)
    }
}

/// Packs bits LSB-first into 64-bit words.
fn pack(bits: &[u8]) -> Vec<u64> {
    let mut words = vec![0u64; bits.len().div_ceil(64)];
    for (i, &b) in bits.iter().enumerate() {
        words[i / 64] |= (b as u64) << (i % 64);
    }
    words
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinalKey {
    pub bits: BitString,
    pub length: usize,
    pub qber_at_acceptance: f64,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum AmplifyError {
    #[error("privacy amplification needs a nonempty key")]
    EmptyKey,
    #[error("qber {0} outside [0, 0.5]")]
    QberOutOfRange(f64),
}

/// Compresses `key` with a Toeplitz hash seeded from `rng`.
///
/// Both parties obtain identical output by feeding identical keys and a clone
/// of the same public seed stream.
pub fn privacy_amplify(
    key: &[u8],
    qber: f64,
    leakage_bits: usize,
    margin: usize,
    policy: KeyPolicy,
    rng: &mut RandomSource,
) -> Result<FinalKey, AmplifyError> {
    if key.is_empty() {
        return Err(AmplifyError::EmptyKey);
    }
    if !(0.0..=0.5).contains(&qber) {
        return Err(AmplifyError::QberOutOfRange(qber));
    }
    let out_len = final_key_length(key.len(), qber, leakage_bits, margin, policy);
    let hash = ToeplitzHash::from_rng(key.len(), out_len, rng);
    let bits = hash.apply(key);
    Ok(FinalKey {
        length: bits.len(),
        bits,
        qber_at_acceptance: qber,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Dense reference product straight from the matrix definition.
    fn toeplitz_reference(diag: &[u8], key: &[u8], m: usize) -> Vec<u8> {
        let n = key.len();
        (0..m)
            .map(|i| (0..n).fold(0u8, |acc, j| acc ^ (diag[i + n - 1 - j] & key[j])))
            .collect()
    }

    #[test]
    fn entropy_endpoints() {
        assert_eq!(binary_entropy(0.0), 0.0);
        assert!((binary_entropy(0.5) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn length_examples() {
        assert_eq!(entropy_bound_length(128, 0.0, 0, 0), 128);
        assert_eq!(entropy_bound_length(128, 0.5, 0, 0), 0);
        // 1000 * (1 - h2(0.11)) = 500.08..., floor 500, minus 120 + 40.
        assert_eq!(entropy_bound_length(1000, 0.11, 120, 40), 340);
        assert_eq!(entropy_bound_length(100, 0.0, 90, 40), 0);
    }

    #[test]
    fn fixed_length_policy() {
        assert_eq!(final_key_length(1000, 0.0, 0, 32, KeyPolicy::FixedLength(256)), 256);
        assert_eq!(final_key_length(100, 0.0, 0, 32, KeyPolicy::FixedLength(256)), 0);
    }

    #[test]
    fn amplify_rejects_bad_inputs() {
        let mut rng = RandomSource::new(0, 0);
        assert_eq!(
            privacy_amplify(&[], 0.0, 0, 0, KeyPolicy::EntropyBound, &mut rng),
            Err(AmplifyError::EmptyKey)
        );
        assert!(privacy_amplify(&[1, 0], 0.6, 0, 0, KeyPolicy::EntropyBound, &mut rng).is_err());
    }

    #[test]
    fn zero_length_output_is_valid() {
        let mut rng = RandomSource::new(0, 0);
        let k = privacy_amplify(&[1, 0, 1], 0.5, 0, 0, KeyPolicy::EntropyBound, &mut rng).unwrap();
        assert_eq!(k.length, 0);
    }

    #[test]
    fn both_parties_agree() {
        let key: Vec<u8> = (0..300).map(|i| (i * 7 % 3 == 0) as u8).collect();
        let seed = RandomSource::new(5, 5);
        let a = privacy_amplify(&key, 0.02, 10, 32, KeyPolicy::EntropyBound, &mut seed.clone()).unwrap();
        let b = privacy_amplify(&key, 0.02, 10, 32, KeyPolicy::EntropyBound, &mut seed.clone()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.length, a.bits.len());
    }

    proptest! {
        #[test]
        fn packed_product_matches_dense(
            key in proptest::collection::vec(0u8..2, 1..200),
            m in 0usize..150,
            seed in any::<u64>(),
        ) {
            let mut rng = RandomSource::new(seed, 0);
            let h = ToeplitzHash::from_rng(key.len(), m, &mut rng);
            let want = toeplitz_reference(h.diagonal().as_slice(), &key, m);
            prop_assert_eq!(h.apply(&key).into_vec(), want);
        }
    }
}
