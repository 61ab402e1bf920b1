//! Two-basis qubit model: preparation, measurement and a noisy, lossy channel.
//!
//! Only measurement statistics are modeled. Measuring in the preparation basis
//! returns the encoded bit; measuring in the conjugate basis returns a fair
//! coin. Either way the state collapses into the measuring basis.

use serde::{Deserialize, Serialize};

use crate::rng::RandomSource;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    Rectilinear,
    Diagonal,
}

impl Basis {
    pub const ALL: [Basis; 2] = [Basis::Rectilinear, Basis::Diagonal];

    /// Rectilinear encodes as 0, Diagonal as 1.
    pub fn as_bit(self) -> u8 {
        match self {
            Basis::Rectilinear => 0,
            Basis::Diagonal => 1,
        }
    }

    pub fn from_bit(bit: u8) -> Basis {
        if bit & 1 == 0 {
            Basis::Rectilinear
        } else {
            Basis::Diagonal
        }
    }

    pub fn random(rng: &mut RandomSource) -> Basis {
        Basis::from_bit(rng.bit())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QubitState {
    pub bit: u8,
    pub basis: Basis,
}

/// Encodes `bit` in `basis`. Panics if `bit > 1`.
pub fn prepare(bit: u8, basis: Basis) -> QubitState {
    assert!(bit <= 1, "qubit bit must be 0 or 1, got {bit}");
    QubitState { bit, basis }
}

/// Measures `q` in `basis`, returning the outcome and the collapsed state.
///
/// Draws from `rng` only when the bases differ.
pub fn measure(q: QubitState, basis: Basis, rng: &mut RandomSource) -> (u8, QubitState) {
    if q.basis == basis {
        (q.bit, q)
    } else {
        let outcome = rng.bit();
        (outcome, prepare(outcome, basis))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelModel {
    #[serde(default)]
    pub flip_probability: f64,
    #[serde(default)]
    pub loss_probability: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{field} must lie in [0, 1], got {value}")]
pub struct ChannelError {
    pub field: &'static str,
    pub value: f64,
}

impl ChannelModel {
    pub const NOISELESS: ChannelModel = ChannelModel {
        flip_probability: 0.0,
        loss_probability: 0.0,
    };

    pub fn new(flip_probability: f64, loss_probability: f64) -> Result<Self, ChannelError> {
        let ch = ChannelModel {
            flip_probability,
            loss_probability,
        };
        ch.validate()?;
        Ok(ch)
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        for (field, value) in [
            ("flip_probability", self.flip_probability),
            ("loss_probability", self.loss_probability),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(ChannelError { field, value });
            }
        }
        Ok(())
    }
}

impl Default for ChannelModel {
    fn default() -> Self {
        Self::NOISELESS
    }
}

/// Sends `q` through `ch`. Loss is sampled first; survivors may have their bit
/// flipped. The basis is never altered.
pub fn transmit(q: QubitState, ch: &ChannelModel, rng: &mut RandomSource) -> Option<QubitState> {
    if rng.chance(ch.loss_probability) {
        return None;
    }
    if rng.chance(ch.flip_probability) {
        Some(QubitState {
            bit: q.bit ^ 1,
            basis: q.basis,
        })
    } else {
        Some(q)
    }
}
