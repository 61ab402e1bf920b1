//! Exact rational threshold τ, parsed from a decimal literal.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::StateProofError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Threshold {
    num: u64,
    den: u64,
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl Threshold {
    pub const DEFAULT: Threshold = Threshold { num: 3, den: 4 };

    /// `num/den`, which must lie in `(1/2, 1]`.
    pub fn new(num: u64, den: u64) -> Result<Self, StateProofError> {
        if den == 0 || num as u128 * 2 <= den as u128 || num > den {
            return Err(StateProofError::InvalidThreshold(format!(
                "{num}/{den} is outside (0.5, 1]"
            )));
        }
        let g = gcd(num, den);
        Ok(Self {
            num: num / g,
            den: den / g,
        })
    }

    pub fn num(&self) -> u64 {
        self.num
    }

    pub fn den(&self) -> u64 {
        self.den
    }

    /// `attested / total >= τ`, compared exactly.
    pub fn is_met(&self, attested: u64, total: u64) -> bool {
        attested as u128 * self.den as u128 >= self.num as u128 * total as u128
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Warning text when τ leaves the recommended band `[0.7, 0.8]`.
    pub fn lint(&self) -> Option<String> {
        let (n, d) = (self.num as u128, self.den as u128);
        if n * 10 < 7 * d || n * 10 > 8 * d {
            Some(format!("threshold {self} is outside the recommended band [0.7, 0.8]"))
        } else {
            None
        }
    }
}

impl Default for Threshold {
    fn default() -> Self {
        Self::DEFAULT
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_f64())
    }
}

impl FromStr for Threshold {
    type Err = StateProofError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || StateProofError::InvalidThreshold(format!("{s:?} is not a decimal in (0.5, 1]"));
        let s = s.trim();
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if int.is_empty() && frac.is_empty()
            || !int.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit())
            || int.len() > 1
            || frac.len() > 18
        {
            return Err(bad());
        }
        let den = 10u64.pow(frac.len() as u32);
        let int: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
        let frac: u64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
        let num = int
            .checked_mul(den)
            .and_then(|x| x.checked_add(frac))
            .ok_or_else(bad)?;
        Threshold::new(num, den)
    }
}

impl TryFrom<f64> for Threshold {
    type Error = StateProofError;

    /// Uses the shortest decimal that round-trips, so `0.75` is exactly 3/4.
    fn try_from(x: f64) -> Result<Self, Self::Error> {
        if !x.is_finite() {
            return Err(StateProofError::InvalidThreshold(format!("{x} is not finite")));
        }
        format!("{x}").parse()
    }
}

impl Serialize for Threshold {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.as_f64())
    }
}

impl<'de> Deserialize<'de> for Threshold {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Threshold::try_from(x),
            Raw::Text(s) => s.parse(),
        }
        .map_err(serde::de::Error::custom)
    }
}
