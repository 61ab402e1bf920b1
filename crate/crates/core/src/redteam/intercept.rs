use serde::{Deserialize, Serialize};

use super::adversary::{Adversary, EveRecord};
use crate::quantum::{measure, Basis, QubitState};
use crate::rng::RandomSource;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisPolicy {
    Random,
    Fixed(Basis),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterceptResendParams {
    pub fraction: f64,
    #[serde(default = "default_policy")]
    pub basis_policy: BasisPolicy,
}

fn default_policy() -> BasisPolicy {
    BasisPolicy::Random
}

impl InterceptResendParams {
    pub fn full() -> Self {
        Self {
            fraction: 1.0,
            basis_policy: BasisPolicy::Random,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if (0.0..=1.0).contains(&self.fraction) {
            Ok(())
        } else {
            Err(format!("fraction must lie in [0, 1], got {}", self.fraction))
        }
    }
}

/// One intercept-resend step on qubit `index`.
///
/// Consumes one draw for the interception decision, then (if intercepting)
/// one for a random basis and one more when Eve's basis mismatches.
pub fn apply_intercept_resend(
    index: usize,
    q: QubitState,
    p: &InterceptResendParams,
    rng: &mut RandomSource,
) -> (QubitState, EveRecord) {
    if !rng.chance(p.fraction) {
        return (q, EveRecord::passthrough(index));
    }
    let basis = match p.basis_policy {
        BasisPolicy::Random => Basis::random(rng),
        BasisPolicy::Fixed(b) => b,
    };
    let (bit, collapsed) = measure(q, basis, rng);
    (collapsed, EveRecord::measured(index, basis, bit))
}

#[derive(Debug, Clone)]
pub struct InterceptResend {
    params: InterceptResendParams,
    ledger: Vec<EveRecord>,
}

impl InterceptResend {
    pub fn new(params: InterceptResendParams) -> Self {
        Self {
            params,
            ledger: Vec::new(),
        }
    }

    pub fn params(&self) -> &InterceptResendParams {
        &self.params
    }
}

impl Adversary for InterceptResend {
    fn name(&self) -> &str {
        "intercept_resend"
    }

    fn params(&self) -> serde_json::Value {
        serde_json::to_value(self.params).expect("params serialize")
    }

    fn on_qubit(&mut self, index: usize, q: QubitState, rng: &mut RandomSource) -> Option<QubitState> {
        let (out, rec) = apply_intercept_resend(index, q, &self.params, rng);
        self.ledger.push(rec);
        Some(out)
    }

    fn ledger(&self) -> &[EveRecord] {
        &self.ledger
    }

    fn reset(&mut self) {
        self.ledger.clear();
    }
}
