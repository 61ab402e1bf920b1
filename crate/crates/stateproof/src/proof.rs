//! State proofs: aggregation by an untrusted party, standalone verification.
//!
//! Canonical bytes (little-endian integers):
//!
//! ```text
//! "QRTSP1" | round u64 | state_digest | prev_proof_digest
//!          | attested_stake u64 | total_stake u64 | count u32
//!          | count x (len u32 | attestation bytes)
//! ```
//!
//! The aggregator note is not part of the canonical form.

use std::collections::{BTreeMap, BTreeSet};

use qrt_pqc::hash::{Digest, HashFunction};
use serde::{Deserialize, Serialize};

use crate::epoch::{Attestation, EpochState};
use crate::registry::ValidatorRegistry;
use crate::threshold::Threshold;
use crate::StateProofError;

const MAGIC: &[u8; 6] = b"QRTSP1";
/// Bytes before the first attestation.
pub const HEADER_BYTES: usize = 6 + 8 + 32 + 32 + 8 + 8 + 4;

/// `attested_stake / total_stake`, kept as integers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StakeFraction {
    pub attested_stake: u64,
    pub total_stake: u64,
}

impl StakeFraction {
    pub fn as_f64(&self) -> f64 {
        self.attested_stake as f64 / self.total_stake as f64
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateProof {
    pub epoch: EpochState,
    pub attestations: Vec<Attestation>,
    pub attested_fraction: StakeFraction,
    #[serde(default)]
    pub aggregator_note: String,
}

impl StateProof {
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_BYTES);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&self.epoch.round.to_le_bytes());
        out.extend_from_slice(&self.epoch.state_digest);
        out.extend_from_slice(&self.epoch.prev_proof_digest);
        out.extend_from_slice(&self.attested_fraction.attested_stake.to_le_bytes());
        out.extend_from_slice(&self.attested_fraction.total_stake.to_le_bytes());
        out.extend_from_slice(&(self.attestations.len() as u32).to_le_bytes());
        for a in &self.attestations {
            let b = a.to_bytes();
            out.extend_from_slice(&(b.len() as u32).to_le_bytes());
            out.extend_from_slice(&b);
        }
        out
    }

    pub fn from_canonical_bytes(bytes: &[u8]) -> Result<Self, StateProofError> {
        let bad = |m: &str| StateProofError::Decode(format!("state proof: {m}"));
        if bytes.len() < HEADER_BYTES || &bytes[..6] != MAGIC {
            return Err(bad("missing header"));
        }
        let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let epoch = EpochState {
            round: u64_at(6),
            state_digest: bytes[14..46].try_into().unwrap(),
            prev_proof_digest: bytes[46..78].try_into().unwrap(),
        };
        let attested_fraction = StakeFraction {
            attested_stake: u64_at(78),
            total_stake: u64_at(86),
        };
        let count = u32::from_le_bytes(bytes[94..98].try_into().unwrap()) as usize;
        let mut rest = &bytes[HEADER_BYTES..];
        let mut attestations = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            if rest.len() < 4 {
                return Err(bad("truncated length prefix"));
            }
            let len = u32::from_le_bytes(rest[..4].try_into().unwrap()) as usize;
            rest = &rest[4..];
            if rest.len() < len {
                return Err(bad("truncated attestation"));
            }
            attestations.push(Attestation::from_bytes(&rest[..len])?);
            rest = &rest[len..];
        }
        if !rest.is_empty() {
            return Err(bad("trailing bytes"));
        }
        Ok(Self {
            epoch,
            attestations,
            attested_fraction,
            aggregator_note: String::new(),
        })
    }

    /// `H("qrt.proof" || canonical bytes)`; links the next epoch to this one.
    pub fn digest(&self, h: &dyn HashFunction) -> Digest {
        h.hash_parts(&[b"qrt.proof", &self.canonical_bytes()])
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "code", rename_all = "snake_case")]
pub enum Reason {
    LinkageBroken { expected: String, found: String },
    CadenceViolation { round: u64, cadence: u64 },
    RoundNotIncreasing { round: u64, previous: u64 },
    UnknownValidator { validator_id: u64 },
    DuplicateAttestation { validator_id: u64 },
    PayloadMismatch { validator_id: u64 },
    InvalidSignature { validator_id: u64, position: usize },
    LeafReuse { validator_id: u64, leaf_index: u32 },
    FractionMismatch { claimed: StakeFraction, recomputed: StakeFraction },
    InsufficientStake { attested_stake: u64, total_stake: u64 },
}

impl Reason {
    pub fn code(&self) -> &'static str {
        match self {
            Reason::LinkageBroken { .. } => "linkage_broken",
            Reason::CadenceViolation { .. } => "cadence_violation",
            Reason::RoundNotIncreasing { .. } => "round_not_increasing",
            Reason::UnknownValidator { .. } => "unknown_validator",
            Reason::DuplicateAttestation { .. } => "duplicate_attestation",
            Reason::PayloadMismatch { .. } => "payload_mismatch",
            Reason::InvalidSignature { .. } => "invalid_signature",
            Reason::LeafReuse { .. } => "leaf_reuse",
            Reason::FractionMismatch { .. } => "fraction_mismatch",
            Reason::InsufficientStake { .. } => "insufficient_stake",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProofVerdict {
    pub valid: bool,
    pub recomputed: StakeFraction,
    pub reasons: Vec<Reason>,
}

impl ProofVerdict {
    pub fn has(&self, code: &str) -> bool {
        self.reasons.iter().any(|r| r.code() == code)
    }
}

/// Bundles the acceptable attestations for `epoch`.
///
/// Unknown validators, other epochs' payloads, bad signatures and repeats of
/// an already accepted validator are dropped. Output is ordered by validator
/// id.
pub fn aggregate(
    attestations: &[Attestation],
    registry: &ValidatorRegistry,
    epoch: &EpochState,
    tau: Threshold,
    h: &dyn HashFunction,
) -> Result<StateProof, StateProofError> {
    let payload = epoch.payload_digest(h);
    let (mut foreign, mut invalid, mut duplicate) = (0, 0, 0);
    let mut kept: BTreeMap<u64, &Attestation> = BTreeMap::new();
    for a in attestations {
        if registry.get(a.validator_id).is_none() || a.round != epoch.round || a.payload != payload {
            foreign += 1;
        } else if !a.signature_valid(registry, h) {
            invalid += 1;
        } else if kept.contains_key(&a.validator_id) {
            duplicate += 1;
        } else {
            kept.insert(a.validator_id, a);
        }
    }
    let attested_stake: u64 = kept
        .keys()
        .map(|id| registry.get(*id).unwrap().stake)
        .sum();
    let total_stake = registry.total_stake();
    if !tau.is_met(attested_stake, total_stake) {
        return Err(StateProofError::InsufficientStake {
            attested_stake,
            total_stake,
        });
    }
    Ok(StateProof {
        epoch: *epoch,
        attestations: kept.into_values().cloned().collect(),
        attested_fraction: StakeFraction {
            attested_stake,
            total_stake,
        },
        aggregator_note: format!(
            "kept {} of {}; dropped foreign={foreign} invalid={invalid} duplicate={duplicate}",
            attestations.len() - foreign - invalid - duplicate,
            attestations.len()
        ),
    })
}

/// Re-checks a proof using only its contents, the registry and the digest of
/// the previous proof. Any bad attestation invalidates the proof.
pub fn verify_proof(
    proof: &StateProof,
    registry: &ValidatorRegistry,
    expected_prev_digest: &Digest,
    tau: Threshold,
    cadence: u64,
    h: &dyn HashFunction,
) -> ProofVerdict {
    let mut reasons = Vec::new();
    let epoch = &proof.epoch;
    if &epoch.prev_proof_digest != expected_prev_digest {
        reasons.push(Reason::LinkageBroken {
            expected: hex::encode(expected_prev_digest),
            found: hex::encode(epoch.prev_proof_digest),
        });
    }
    if cadence == 0 || epoch.round % cadence != 0 {
        reasons.push(Reason::CadenceViolation {
            round: epoch.round,
            cadence,
        });
    }
    let payload = epoch.payload_digest(h);
    let mut seen = BTreeSet::new();
    let mut attested_stake = 0u64;
    for (position, a) in proof.attestations.iter().enumerate() {
        let Some(v) = registry.get(a.validator_id) else {
            reasons.push(Reason::UnknownValidator {
                validator_id: a.validator_id,
            });
            continue;
        };
        if !seen.insert(a.validator_id) {
            reasons.push(Reason::DuplicateAttestation {
                validator_id: a.validator_id,
            });
            continue;
        }
        if a.round != epoch.round || a.payload != payload {
            reasons.push(Reason::PayloadMismatch {
                validator_id: a.validator_id,
            });
            continue;
        }
        if !a.signature_valid(registry, h) {
            reasons.push(Reason::InvalidSignature {
                validator_id: a.validator_id,
                position,
            });
            continue;
        }
        attested_stake += v.stake;
    }
    let recomputed = StakeFraction {
        attested_stake,
        total_stake: registry.total_stake(),
    };
    if proof.attested_fraction != recomputed {
        reasons.push(Reason::FractionMismatch {
            claimed: proof.attested_fraction,
            recomputed,
        });
    }
    if !tau.is_met(attested_stake, recomputed.total_stake) {
        reasons.push(Reason::InsufficientStake {
            attested_stake,
            total_stake: recomputed.total_stake,
        });
    }
    ProofVerdict {
        valid: reasons.is_empty(),
        recomputed,
        reasons,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProofSize {
    pub bytes: usize,
    /// Amortized bytes per attestation; 0 for an empty proof.
    pub per_validator_bytes: usize,
}

pub fn proof_size_metric(proof: &StateProof) -> ProofSize {
    let bytes = proof.canonical_bytes().len();
    let n = proof.attestations.len();
    ProofSize {
        bytes,
        per_validator_bytes: if n == 0 { 0 } else { (bytes - HEADER_BYTES) / n },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::epoch::{make_attestation, GENESIS_DIGEST};
    use crate::registry::Committee;
    use qrt_core::RandomSource;
    use qrt_pqc::hash::Sha256Hash;

    fn setup(stakes: &[u64]) -> (Committee, EpochState) {
        let c = Committee::generate(stakes, 3, &RandomSource::new(5, 0), &Sha256Hash).unwrap();
        let e = EpochState {
            round: 100,
            state_digest: [7; 32],
            prev_proof_digest: GENESIS_DIGEST,
        };
        (c, e)
    }

    fn attest(c: &mut Committee, ids: &[u64], e: &EpochState) -> Vec<Attestation> {
        let reg = c.registry.clone();
        ids.iter()
            .map(|&id| make_attestation(id, e, c.keys_mut(id).unwrap(), &reg, &Sha256Hash).unwrap())
            .collect()
    }

    #[test]
    fn stake_arithmetic_examples() {
        let h = Sha256Hash;
        let (mut c, e) = setup(&[40, 30, 20, 10]);
        let tau = Threshold::DEFAULT;
        let atts = attest(&mut c, &[0, 1, 3], &e);
        let p = aggregate(&atts, &c.registry, &e, tau, &h).unwrap();
        assert_eq!(p.attested_fraction.attested_stake, 80);
        assert_eq!(p.attested_fraction.as_f64(), 0.8);
        assert!(verify_proof(&p, &c.registry, &GENESIS_DIGEST, tau, 100, &h).valid);

        assert_eq!(
            aggregate(&atts[..2], &c.registry, &e, tau, &h),
            Err(StateProofError::InsufficientStake {
                attested_stake: 70,
                total_stake: 100
            })
        );
        assert_eq!(
            aggregate(&[], &c.registry, &e, tau, &h),
            Err(StateProofError::InsufficientStake {
                attested_stake: 0,
                total_stake: 100
            })
        );
    }

    #[test]
    fn aggregator_drops_junk() {
        let h = Sha256Hash;
        let (mut c, e) = setup(&[40, 30, 20, 10]);
        let mut atts = attest(&mut c, &[0, 1, 2], &e);
        atts.push(atts[0].clone());
        let mut other = e;
        other.round = 200;
        atts.extend(attest(&mut c, &[3], &other));
        let mut forged = atts[2].clone();
        forged.signature.ots.preimages[0][0] ^= 1;
        atts.push(forged);
        let p = aggregate(&atts, &c.registry, &e, Threshold::DEFAULT, &h).unwrap();
        assert_eq!(p.attestations.len(), 3);
        assert_eq!(p.attested_fraction.attested_stake, 90);
        assert!(p.aggregator_note.contains("foreign=1 invalid=1 duplicate=1"));
    }

    #[test]
    fn tampered_signature_is_caught_at_every_position() {
        let h = Sha256Hash;
        let (mut c, e) = setup(&[25, 25, 25, 25]);
        let atts = attest(&mut c, &[0, 1, 2, 3], &e);
        let p = aggregate(&atts, &c.registry, &e, Threshold::DEFAULT, &h).unwrap();
        for i in 0..p.attestations.len() {
            let mut bad = p.clone();
            bad.attestations[i].signature.auth_path[0][5] ^= 0x80;
            let v = verify_proof(&bad, &c.registry, &GENESIS_DIGEST, Threshold::DEFAULT, 100, &h);
            assert!(!v.valid);
            assert!(v.has("invalid_signature"), "{:?}", v.reasons);
        }
    }

    #[test]
    fn cadence_and_linkage() {
        let h = Sha256Hash;
        let (mut c, mut e) = setup(&[1, 1, 1, 1]);
        e.round = 150;
        let atts = attest(&mut c, &[0, 1, 2, 3], &e);
        let p = aggregate(&atts, &c.registry, &e, Threshold::DEFAULT, &h).unwrap();
        let v = verify_proof(&p, &c.registry, &GENESIS_DIGEST, Threshold::DEFAULT, 100, &h);
        assert_eq!(v.reasons.iter().map(Reason::code).collect::<Vec<_>>(), ["cadence_violation"]);
        let v = verify_proof(&p, &c.registry, &[1; 32], Threshold::DEFAULT, 50, &h);
        assert_eq!(v.reasons.iter().map(Reason::code).collect::<Vec<_>>(), ["linkage_broken"]);
    }

    #[test]
    fn inflated_claim_is_rejected() {
        let h = Sha256Hash;
        let (mut c, e) = setup(&[40, 30, 20, 10]);
        let atts = attest(&mut c, &[0, 1, 3], &e);
        let mut p = aggregate(&atts, &c.registry, &e, Threshold::DEFAULT, &h).unwrap();
        p.attested_fraction.attested_stake = 100;
        let v = verify_proof(&p, &c.registry, &GENESIS_DIGEST, Threshold::DEFAULT, 100, &h);
        assert!(v.has("fraction_mismatch"));
        // Duplicates cannot inflate the recomputed stake either.
        let mut p = aggregate(&atts[..2], &c.registry, &e, Threshold::new(7, 10).unwrap(), &h).unwrap();
        p.attestations.push(p.attestations[0].clone());
        let v = verify_proof(&p, &c.registry, &GENESIS_DIGEST, Threshold::DEFAULT, 100, &h);
        assert_eq!(v.recomputed.attested_stake, 70);
        assert!(v.has("duplicate_attestation") && v.has("insufficient_stake"));
    }

    #[test]
    fn canonical_bytes_roundtrip_ignores_note() {
        let h = Sha256Hash;
        let (mut c, e) = setup(&[5, 5, 5]);
        let atts = attest(&mut c, &[0, 1, 2], &e);
        let p = aggregate(&atts, &c.registry, &e, Threshold::DEFAULT, &h).unwrap();
        let bytes = p.canonical_bytes();
        let back = StateProof::from_canonical_bytes(&bytes).unwrap();
        assert_eq!(back.canonical_bytes(), bytes);
        assert_eq!(back.digest(&h), p.digest(&h));
        let mut noted = p.clone();
        noted.aggregator_note = "anything".into();
        assert_eq!(noted.digest(&h), p.digest(&h));
        assert!(StateProof::from_canonical_bytes(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn size_metric_shape() {
        let (mut c, e) = setup(&[1; 10]);
        let atts = attest(&mut c, &(0..10).collect::<Vec<_>>(), &e);
        let sizes: Vec<usize> = (0..=10)
            .map(|k| {
                let p = StateProof {
                    epoch: e,
                    attestations: atts[..k].to_vec(),
                    attested_fraction: StakeFraction {
                        attested_stake: k as u64,
                        total_stake: 10,
                    },
                    aggregator_note: String::new(),
                };
                proof_size_metric(&p).bytes
            })
            .collect();
        assert_eq!(sizes[0], HEADER_BYTES);
        let step = sizes[1] - sizes[0];
        // len prefix + ids/round/payload + sig header + 512 digests + 3 path nodes
        assert_eq!(step, 4 + 48 + 5 + 32 * (512 + 3));
        assert!(sizes.windows(2).all(|w| w[1] - w[0] == step));
    }
}
