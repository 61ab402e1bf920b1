//! Toy Regev-style LWE bit encryption.
//!
//! Key: `b = A·s + e (mod q)` with `A` uniform `m x n`, `s` uniform and every
//! `|e_i| <= error_bound`. Encryption sums a random subset of the `m` samples
//! and adds `floor(q/2)` for a one bit. Decryption computes the phase
//! `v - <u, s>` and returns 1 iff `q/4 < phase < 3q/4`; the boundaries round
//! to 0.

use qrt_core::RandomSource;
use serde::{Deserialize, Serialize};

use crate::PqcError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LweParams {
    pub n: usize,
    pub q: u32,
    pub error_bound: u32,
    pub m: usize,
}

impl LweParams {
    /// Desk-scale default: brute force is far out of reach.
    pub const DEFAULT: LweParams = LweParams {
        n: 8,
        q: 3329,
        error_bound: 3,
        m: 64,
    };

    /// Deliberately breakable: 17^2 = 289 candidate secrets, noise-free
    /// samples so the consistent secret is unique.
    pub const DEMO: LweParams = LweParams {
        n: 2,
        q: 17,
        error_bound: 0,
        m: 8,
    };

    pub fn validate(&self) -> Result<(), PqcError> {
        let fail = |m: String| Err(PqcError::ParameterViolation(m));
        if self.n == 0 || self.m == 0 {
            return fail(format!("n and m must be positive (n={}, m={})", self.n, self.m));
        }
        if self.q > u16::MAX as u32 || !is_odd_prime(self.q) {
            return fail(format!("q must be an odd prime below 2^16, got {}", self.q));
        }
        let noise = 8 * self.error_bound as u64 * self.m as u64;
        if self.q as u64 <= noise {
            return fail(format!(
                "q = {} must exceed 8 * error_bound * m = {noise}",
                self.q
            ));
        }
        Ok(())
    }

    /// `q^n`, saturating.
    pub fn search_space(&self) -> u128 {
        (0..self.n).fold(1u128, |acc, _| acc.saturating_mul(self.q as u128))
    }
}

fn is_odd_prime(q: u32) -> bool {
    if q < 3 || q % 2 == 0 {
        return false;
    }
    let mut d = 3;
    while d * d <= q {
        if q % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LwePublicKey {
    pub params: LweParams,
    /// Row-major `m x n`.
    pub a: Vec<Vec<u32>>,
    pub b: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LweSecretKey {
    pub params: LweParams,
    pub s: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LweKeyPair {
    pub public: LwePublicKey,
    pub secret: LweSecretKey,
    /// The centered noise used at key generation.
    pub errors: Vec<i64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LweCiphertext {
    pub u: Vec<u32>,
    pub v: u32,
}

impl LwePublicKey {
    /// Row-major little-endian u16 entries of `A`, then of `b`.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.a
            .iter()
            .flatten()
            .chain(&self.b)
            .flat_map(|&x| (x as u16).to_le_bytes())
            .collect()
    }
}

impl LweCiphertext {
    /// Little-endian u16 entries of `u`, then `v`.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.u
            .iter()
            .chain(std::iter::once(&self.v))
            .flat_map(|&x| (x as u16).to_le_bytes())
            .collect()
    }
}

fn reduce(x: i64, q: u32) -> u32 {
    x.rem_euclid(q as i64) as u32
}

/// Inner product `<row, s> mod q`.
pub fn dot_mod(row: &[u32], s: &[u32], q: u32) -> u32 {
    let acc = row
        .iter()
        .zip(s)
        .fold(0u64, |acc, (&x, &y)| (acc + x as u64 * y as u64) % q as u64);
    acc as u32
}

pub fn lwe_keygen(params: LweParams, rng: &mut RandomSource) -> Result<LweKeyPair, PqcError> {
    params.validate()?;
    let q = params.q;
    let s: Vec<u32> = (0..params.n).map(|_| rng.below(q as u64) as u32).collect();
    let a: Vec<Vec<u32>> = (0..params.m)
        .map(|_| (0..params.n).map(|_| rng.below(q as u64) as u32).collect())
        .collect();
    let span = 2 * params.error_bound as u64 + 1;
    let errors: Vec<i64> = (0..params.m)
        .map(|_| rng.below(span) as i64 - params.error_bound as i64)
        .collect();
    let b = a
        .iter()
        .zip(&errors)
        .map(|(row, &e)| reduce(dot_mod(row, &s, q) as i64 + e, q))
        .collect();
    Ok(LweKeyPair {
        public: LwePublicKey { params, a, b },
        secret: LweSecretKey { params, s },
        errors,
    })
}

/// Encrypts one bit. Each sample joins the subset on a fair coin.
pub fn lwe_encrypt(pk: &LwePublicKey, bit: u8, rng: &mut RandomSource) -> LweCiphertext {
    assert!(bit <= 1);
    let p = pk.params;
    let q = p.q as u64;
    let mut u = vec![0u64; p.n];
    let mut v = 0u64;
    for (row, &bi) in pk.a.iter().zip(&pk.b) {
        if rng.bit() == 1 {
            for (acc, &x) in u.iter_mut().zip(row) {
                *acc = (*acc + x as u64) % q;
            }
            v = (v + bi as u64) % q;
        }
    }
    v = (v + bit as u64 * (q / 2)) % q;
    let ct = LweCiphertext {
        u: u.into_iter().map(|x| x as u32).collect(),
        v: v as u32,
    };
    debug_assert!(ct.u.iter().chain([&ct.v]).all(|&x| x < p.q));
    ct
}

/// Decodes a phase in `[0, q)`: 1 iff `q < 4·phase < 3q`.
pub fn decode_phase(phase: u32, q: u32) -> u8 {
    let four = 4 * phase as u64;
    (four > q as u64 && four < 3 * q as u64) as u8
}

pub fn lwe_decrypt(sk: &LweSecretKey, ct: &LweCiphertext) -> u8 {
    let q = sk.params.q;
    let phase = reduce(ct.v as i64 - dot_mod(&ct.u, &sk.s, q) as i64, q);
    decode_phase(phase, q)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_params_roundtrip_many_bits() {
        let mut rng = RandomSource::new(1, 0);
        let kp = lwe_keygen(LweParams::DEFAULT, &mut rng).unwrap();
        assert!(kp.errors.iter().all(|e| e.abs() <= 3));
        assert!(kp.public.b.iter().all(|&x| x < 3329));
        let mut failures = 0;
        for _ in 0..10_000 {
            let bit = rng.bit();
            if lwe_decrypt(&kp.secret, &lwe_encrypt(&kp.public, bit, &mut rng)) != bit {
                failures += 1;
            }
        }
        assert_eq!(failures, 0);
    }

    #[test]
    fn noise_free_decryption_is_exact() {
        let p = LweParams {
            error_bound: 0,
            ..LweParams::DEFAULT
        };
        let mut rng = RandomSource::new(2, 0);
        let kp = lwe_keygen(p, &mut rng).unwrap();
        assert!(kp.errors.iter().all(|&e| e == 0));
        for bit in [0u8, 1] {
            for _ in 0..500 {
                let ct = lwe_encrypt(&kp.public, bit, &mut rng);
                let q = p.q;
                let phase = reduce(ct.v as i64 - dot_mod(&ct.u, &kp.secret.s, q) as i64, q);
                assert_eq!(phase, bit as u32 * (q / 2));
                assert_eq!(lwe_decrypt(&kp.secret, &ct), bit);
            }
        }
    }

    #[test]
    fn quarter_phase_ties_round_to_zero() {
        // Ties need q divisible by 4, which no valid modulus is; exercise the
        // decoder directly.
        assert_eq!(decode_phase(25, 100), 0);
        assert_eq!(decode_phase(75, 100), 0);
        assert_eq!(decode_phase(26, 100), 1);
        assert_eq!(decode_phase(74, 100), 1);
        assert_eq!(decode_phase(0, 100), 0);
        // Odd q: nearest-quarter phases on either side.
        assert_eq!(decode_phase(832, 3329), 0);
        assert_eq!(decode_phase(833, 3329), 1);
        assert_eq!(decode_phase(2496, 3329), 1);
        assert_eq!(decode_phase(2497, 3329), 0);
    }

    #[test]
    fn parameter_checks() {
        assert!(LweParams::DEFAULT.validate().is_ok());
        assert!(LweParams::DEMO.validate().is_ok());
        let too_noisy = LweParams {
            error_bound: 7,
            ..LweParams::DEFAULT
        };
        // 8 * 7 * 64 = 3584 >= 3329
        assert!(matches!(too_noisy.validate(), Err(PqcError::ParameterViolation(_))));
        let composite = LweParams {
            q: 3328,
            ..LweParams::DEFAULT
        };
        assert!(composite.validate().is_err());
        assert!(lwe_keygen(too_noisy, &mut RandomSource::new(0, 0)).is_err());
    }

    #[test]
    fn search_space_arithmetic() {
        assert_eq!(LweParams::DEMO.search_space(), 289);
        assert_eq!(LweParams::DEFAULT.search_space(), 3329u128.pow(8));
    }
}
