//! Desk-scale quantum-resistant primitives and the attacks that probe them.
//!
//! Hash-based signatures (Lamport one-time keys, Merkle trees of them) and a
//! toy Regev-style LWE bit encryption, all behind one injected 256-bit hash.
//! The [`kat`] module replays known-answer records against any scheme in a
//! [`registry::SchemeRegistry`].

pub mod attacks;
pub mod hash;
pub mod kat;
pub mod lamport;
pub mod lwe;
pub mod merkle;
pub mod registry;

pub use attacks::{AttackOutcome, Evidence, Verdict};
pub use hash::{Digest, HashFunction, Sha256Hash};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PqcError {
    #[error("one-time key already used")]
    KeyReuseRefused,
    #[error("all Merkle leaves used")]
    KeysExhausted,
    #[error("parameter violation: {0}")]
    ParameterViolation(String),
    #[error("decode error: {0}")]
    Decode(String),
    #[error("invalid attack inputs: {0}")]
    InvalidInputs(String),
    #[error("malformed KAT record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("unknown scheme {0:?}")]
    UnknownScheme(String),
    #[error("scheme {0:?} already registered")]
    DuplicateScheme(String),
}
