//! Stake-weighted state proofs.
//!
//! Validators attest to epoch digests with Merkle (hash-based) signatures. An
//! untrusted aggregator bundles the attestations into a [`StateProof`], and a
//! verifier re-checks everything against the [`ValidatorRegistry`] alone,
//! either from genesis or from a previously verified checkpoint.

pub mod chain;
pub mod epoch;
pub mod proof;
pub mod registry;
pub mod threshold;
pub mod timetravel;

pub use chain::{verify_chain, ChainInvalid, VerifiedHead, VerifierCheckpoint};
pub use epoch::{make_attestation, Attestation, EpochState};
pub use proof::{aggregate, proof_size_metric, verify_proof, ProofVerdict, Reason, StateProof};
pub use registry::{Committee, Validator, ValidatorRegistry};
pub use threshold::Threshold;
pub use timetravel::{simulate_time_travel_attack, TimeTravelReport};

use qrt_pqc::PqcError;

pub const DEFAULT_CADENCE: u64 = 100;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StateProofError {
    #[error("unknown validator {0}")]
    UnknownValidator(u64),
    #[error("keyset root does not match registered key of validator {0}")]
    KeyMismatch(u64),
    #[error(transparent)]
    Keys(#[from] PqcError),
    #[error("invalid registry: {0}")]
    InvalidRegistry(String),
    #[error("invalid threshold: {0}")]
    InvalidThreshold(String),
    #[error("insufficient stake: {attested_stake}/{total_stake}")]
    InsufficientStake { attested_stake: u64, total_stake: u64 },
    #[error("decode error: {0}")]
    Decode(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}

pub(crate) mod hexser {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub mod digest {
        use super::*;

        pub fn serialize<S: Serializer>(d: &[u8; 32], s: S) -> Result<S::Ok, S::Error> {
            s.serialize_str(&hex::encode(d))
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[u8; 32], D::Error> {
            let s = String::deserialize(d)?;
            let v = hex::decode(&s).map_err(D::Error::custom)?;
            v.try_into()
                .map_err(|v: Vec<u8>| D::Error::custom(format!("expected 32 bytes, got {}", v.len())))
        }
    }
}
