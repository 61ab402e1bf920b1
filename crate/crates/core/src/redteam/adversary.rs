use serde::{Deserialize, Serialize};

use super::intercept::{InterceptResend, InterceptResendParams};
use crate::quantum::{Basis, QubitState};
use crate::rng::RandomSource;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EveAction {
    Passthrough,
    MeasuredResent,
    Suppressed,
}

/// What the eavesdropper did to one qubit.
///
/// `measured_basis` and `measured_bit` are present exactly when the action is
/// [`EveAction::MeasuredResent`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EveRecord {
    pub qubit_index: usize,
    pub measured_basis: Option<Basis>,
    pub measured_bit: Option<u8>,
    pub action: EveAction,
}

impl EveRecord {
    pub fn passthrough(qubit_index: usize) -> Self {
        Self {
            qubit_index,
            measured_basis: None,
            measured_bit: None,
            action: EveAction::Passthrough,
        }
    }

    pub fn measured(qubit_index: usize, basis: Basis, bit: u8) -> Self {
        Self {
            qubit_index,
            measured_basis: Some(basis),
            measured_bit: Some(bit),
            action: EveAction::MeasuredResent,
        }
    }

    pub fn suppressed(qubit_index: usize) -> Self {
        Self {
            qubit_index,
            measured_basis: None,
            measured_bit: None,
            action: EveAction::Suppressed,
        }
    }

    pub fn is_well_formed(&self) -> bool {
        let measured = self.action == EveAction::MeasuredResent;
        measured == self.measured_basis.is_some() && measured == self.measured_bit.is_some()
    }
}

/// Public classical traffic an eavesdropper gets to see.
#[derive(Clone, Copy, Debug)]
pub enum ClassicalMessage<'a> {
    /// Both parties' basis choices, one entry per transmitted qubit.
    BasesAnnounced {
        alice_bases: &'a [u8],
        bob_bases: &'a [u8],
    },
    /// Sifted positions sacrificed for error estimation, with both parties' bits.
    CheckBitsRevealed {
        indices: &'a [usize],
        alice_bits: &'a [u8],
        bob_bits: &'a [u8],
    },
    ParitiesDisclosed { round: u32, count: usize },
    HashSeedAnnounced { seed_bits: usize },
}

/// A pluggable eavesdropper.
///
/// An instance belongs to one session at a time. `reset` is called at the start
/// of every session; the ledger only grows in between.
pub trait Adversary: Send {
    fn name(&self) -> &str;

    /// Parameters as a JSON object, for reports.
    fn params(&self) -> serde_json::Value;

    /// Acts on qubit `index` in flight. Returning `None` suppresses it.
    fn on_qubit(&mut self, index: usize, q: QubitState, rng: &mut RandomSource) -> Option<QubitState>;

    fn on_classical(&mut self, _msg: &ClassicalMessage<'_>) {}

    fn ledger(&self) -> &[EveRecord];

    fn reset(&mut self);
}

/// The adversary that is not there.
#[derive(Debug, Default, Clone)]
pub struct NullAdversary;

impl Adversary for NullAdversary {
    fn name(&self) -> &str {
        "null"
    }

    fn params(&self) -> serde_json::Value {
        serde_json::json!({})
    }

    fn on_qubit(&mut self, _index: usize, q: QubitState, _rng: &mut RandomSource) -> Option<QubitState> {
        Some(q)
    }

    fn ledger(&self) -> &[EveRecord] {
        &[]
    }

    fn reset(&mut self) {}
}

/// Serializable description of a non-learning strategy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StrategySpec {
    Null,
    InterceptResend(InterceptResendParams),
}

impl StrategySpec {
    pub fn build(&self) -> Box<dyn Adversary> {
        match self {
            StrategySpec::Null => Box::new(NullAdversary),
            StrategySpec::InterceptResend(p) => Box::new(InterceptResend::new(*p)),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match self {
            StrategySpec::Null => Ok(()),
            StrategySpec::InterceptResend(p) => p.validate(),
        }
    }
}
