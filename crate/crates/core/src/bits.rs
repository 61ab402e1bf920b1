//! Bit strings with a hex wire form.
//!
//! On the wire a bit string is `{"len": <bits>, "hex": "<digits>"}`. Bit `i`
//! lives in byte `i / 8` at position `7 - i % 8` (most significant bit first);
//! padding bits in the final byte are zero.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Sequence of bits, one `u8` per bit holding 0 or 1.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct BitString(Vec<u8>);

impl BitString {
    pub fn new() -> Self {
        Self(Vec::new())
    }

    pub fn with_capacity(n: usize) -> Self {
        Self(Vec::with_capacity(n))
    }

    /// Builds from a slice of 0/1 values. Panics on any other value.
    pub fn from_bits(bits: &[u8]) -> Self {
        assert!(bits.iter().all(|&b| b <= 1), "bit values must be 0 or 1");
        Self(bits.to_vec())
    }

    pub fn from_vec(bits: Vec<u8>) -> Self {
        assert!(bits.iter().all(|&b| b <= 1), "bit values must be 0 or 1");
        Self(bits)
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        Self(bits.iter().map(|&b| b as u8).collect())
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> u8 {
        self.0[i]
    }

    pub fn set(&mut self, i: usize, bit: u8) {
        assert!(bit <= 1);
        self.0[i] = bit;
    }

    pub fn push(&mut self, bit: u8) {
        assert!(bit <= 1);
        self.0.push(bit);
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<u8> {
        self.0
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b == 1).count()
    }

    /// Number of positions where the two strings differ. Panics on length mismatch.
    pub fn hamming(&self, other: &BitString) -> usize {
        assert_eq!(self.len(), other.len());
        self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.0.len().div_ceil(8)];
        for (i, &b) in self.0.iter().enumerate() {
            out[i / 8] |= b << (7 - i % 8);
        }
        out
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.to_bytes())
    }

    /// Inverse of [`to_hex`](Self::to_hex). Rejects wrong digit counts and
    /// nonzero padding.
    pub fn from_hex(len: usize, digits: &str) -> Result<Self, String> {
        let bytes = hex::decode(digits).map_err(|e| e.to_string())?;
        if bytes.len() != len.div_ceil(8) {
            return Err(format!(
                "expected {} bytes for {len} bits, got {}",
                len.div_ceil(8),
                bytes.len()
            ));
        }
        let bits: Vec<u8> = (0..len).map(|i| (bytes[i / 8] >> (7 - i % 8)) & 1).collect();
        let back = BitString(bits);
        if back.to_bytes() != bytes {
            return Err("nonzero padding bits".into());
        }
        Ok(back)
    }
}

impl FromIterator<u8> for BitString {
    fn from_iter<I: IntoIterator<Item = u8>>(iter: I) -> Self {
        BitString::from_vec(iter.into_iter().collect())
    }
}

#[derive(Serialize, Deserialize)]
struct Wire {
    len: usize,
    hex: String,
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        Wire {
            len: self.len(),
            hex: self.to_hex(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let w = Wire::deserialize(d)?;
        BitString::from_hex(w.len, &w.hex).map_err(D::Error::custom)
    }
}
