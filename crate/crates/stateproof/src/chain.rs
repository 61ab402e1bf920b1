//! Chain verification from genesis or from a trusted checkpoint.

use std::collections::BTreeMap;

use qrt_pqc::hash::{Digest, HashFunction};
use serde::{Deserialize, Serialize};

use crate::epoch::{EpochState, GENESIS_DIGEST};
use crate::hexser;
use crate::proof::{verify_proof, Reason, StateProof};
use crate::registry::ValidatorRegistry;
use crate::threshold::Threshold;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrustOrigin {
    Genesis,
    Checkpoint,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifiedPoint {
    pub round: u64,
    #[serde(with = "hexser::digest")]
    pub proof_digest: Digest,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifierCheckpoint {
    pub trust_origin: TrustOrigin,
    pub last_verified: Option<VerifiedPoint>,
}

impl VerifierCheckpoint {
    pub const GENESIS: VerifierCheckpoint = VerifierCheckpoint {
        trust_origin: TrustOrigin::Genesis,
        last_verified: None,
    };

    pub fn at(round: u64, proof_digest: Digest) -> Self {
        Self {
            trust_origin: TrustOrigin::Checkpoint,
            last_verified: Some(VerifiedPoint {
                round,
                proof_digest,
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct VerifiedHead {
    /// `None` when nothing after the origin was verified.
    pub epoch: Option<EpochState>,
    /// Checkpoint for resuming after the head; only built from verified proofs.
    pub checkpoint: VerifierCheckpoint,
    pub proofs_verified: usize,
    pub proofs_skipped: usize,
}

impl VerifiedHead {
    pub fn round(&self) -> Option<u64> {
        self.checkpoint.last_verified.map(|p| p.round)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, thiserror::Error)]
#[error("chain invalid at round {at_round}: {}", codes(.reasons))]
pub struct ChainInvalid {
    pub at_round: u64,
    pub reasons: Vec<Reason>,
}

fn codes(r: &[Reason]) -> String {
    r.iter().map(Reason::code).collect::<Vec<_>>().join(", ")
}

/// Folds [`verify_proof`] along the chain from `origin`.
///
/// A checkpoint origin skips every proof at or below its round without
/// inspecting it. Also rejects non-increasing rounds and any validator leaf
/// that signs two different payloads.
pub fn verify_chain(
    proofs: &[StateProof],
    registry: &ValidatorRegistry,
    origin: VerifierCheckpoint,
    tau: Threshold,
    cadence: u64,
    h: &dyn HashFunction,
) -> Result<VerifiedHead, ChainInvalid> {
    let (mut last_round, mut expected_prev) = match origin.last_verified {
        Some(p) => (Some(p.round), p.proof_digest),
        None => (None, GENESIS_DIGEST),
    };
    let start = match last_round {
        Some(r) => proofs.partition_point(|p| p.epoch.round <= r),
        None => 0,
    };
    let mut leaves: BTreeMap<(u64, u32), Digest> = BTreeMap::new();
    let mut head = VerifiedHead {
        epoch: None,
        checkpoint: origin,
        proofs_verified: 0,
        proofs_skipped: start,
    };
    for proof in &proofs[start..] {
        let round = proof.epoch.round;
        let verdict = verify_proof(proof, registry, &expected_prev, tau, cadence, h);
        let mut reasons = verdict.reasons;
        if let Some(prev) = last_round.filter(|&prev| round <= prev) {
            reasons.push(Reason::RoundNotIncreasing {
                round,
                previous: prev,
            });
        }
        for a in &proof.attestations {
            let key = (a.validator_id, a.signature.leaf_index);
            match leaves.get(&key) {
                Some(p) if p != &a.payload => reasons.push(Reason::LeafReuse {
                    validator_id: a.validator_id,
                    leaf_index: a.signature.leaf_index,
                }),
                _ => {
                    leaves.insert(key, a.payload);
                }
            }
        }
        if !reasons.is_empty() {
            return Err(ChainInvalid {
                at_round: round,
                reasons,
            });
        }
        expected_prev = proof.digest(h);
        last_round = Some(round);
        head.epoch = Some(proof.epoch);
        head.proofs_verified += 1;
        head.checkpoint = VerifierCheckpoint::at(round, expected_prev);
    }
    Ok(head)
}

/// Honest chain of `epochs` proofs at rounds `R, 2R, ...`, attested by every
/// validator. State digests are derived from `label` and the round.
pub fn build_honest_chain(
    committee: &mut crate::registry::Committee,
    epochs: usize,
    cadence: u64,
    label: &[u8],
    tau: Threshold,
    h: &dyn HashFunction,
) -> Result<Vec<StateProof>, crate::StateProofError> {
    let registry = committee.registry.clone();
    let mut prev = GENESIS_DIGEST;
    let mut chain = Vec::with_capacity(epochs);
    for k in 1..=epochs as u64 {
        let round = k * cadence;
        let epoch = EpochState {
            round,
            state_digest: h.hash_parts(&[b"qrt.state", label, &round.to_le_bytes()]),
            prev_proof_digest: prev,
        };
        let atts = registry
            .validators()
            .iter()
            .map(|v| {
                crate::epoch::make_attestation(v.id, &epoch, committee.keys_mut(v.id).unwrap(), &registry, h)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let proof = crate::proof::aggregate(&atts, &registry, &epoch, tau, h)?;
        prev = proof.digest(h);
        chain.push(proof);
    }
    Ok(chain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry::Committee;
    use qrt_core::RandomSource;
    use qrt_pqc::hash::Sha256Hash;

    fn honest(epochs: usize) -> (Committee, Vec<StateProof>) {
        let h = Sha256Hash;
        let mut c = Committee::generate(&[10, 20, 30, 40], 4, &RandomSource::new(8, 0), &h).unwrap();
        let chain = build_honest_chain(&mut c, epochs, 100, b"test", Threshold::DEFAULT, &h).unwrap();
        (c, chain)
    }

    #[test]
    fn genesis_and_checkpoint() {
        let h = Sha256Hash;
        let (c, chain) = honest(10);
        let t = Threshold::DEFAULT;
        let head = verify_chain(&chain, &c.registry, VerifierCheckpoint::GENESIS, t, 100, &h).unwrap();
        assert_eq!(head.round(), Some(1000));
        assert_eq!(head.proofs_verified, 10);

        let cp = VerifierCheckpoint::at(500, chain[4].digest(&h));
        // Corrupt the skipped prefix: a checkpoint verifier never looks at it.
        let mut tampered = chain.clone();
        for p in &mut tampered[..5] {
            p.attestations.clear();
        }
        let head = verify_chain(&tampered, &c.registry, cp, t, 100, &h).unwrap();
        assert_eq!(head.round(), Some(1000));
        assert_eq!(head.proofs_verified, 5);
        assert_eq!(head.proofs_skipped, 5);
        assert_eq!(head.epoch.unwrap(), chain[9].epoch);
    }

    #[test]
    fn missing_proof_breaks_linkage() {
        let h = Sha256Hash;
        let (c, mut chain) = honest(10);
        chain.remove(5);
        let err = verify_chain(&chain, &c.registry, VerifierCheckpoint::GENESIS, Threshold::DEFAULT, 100, &h)
            .unwrap_err();
        assert_eq!(err.at_round, 700);
        assert_eq!(err.reasons.iter().map(Reason::code).collect::<Vec<_>>(), ["linkage_broken"]);
    }

    #[test]
    fn state_digest_mutation_invalidates_from_there() {
        let h = Sha256Hash;
        let (c, chain) = honest(6);
        for i in 0..chain.len() {
            let mut bad = chain.clone();
            bad[i].epoch.state_digest[0] ^= 1;
            let err = verify_chain(&bad, &c.registry, VerifierCheckpoint::GENESIS, Threshold::DEFAULT, 100, &h)
                .unwrap_err();
            assert_eq!(err.at_round, chain[i].epoch.round);
            // The successor no longer links to the altered proof, so nothing
            // after it can be reached either.
            if i + 1 < chain.len() {
                let prev = bad[i].digest(&h);
                let v = verify_proof(&bad[i + 1], &c.registry, &prev, Threshold::DEFAULT, 100, &h);
                assert!(v.has("linkage_broken"));
            }
        }
    }

    #[test]
    fn empty_tail_from_checkpoint() {
        let h = Sha256Hash;
        let (c, chain) = honest(2);
        let cp = VerifierCheckpoint::at(200, chain[1].digest(&h));
        let head = verify_chain(&chain, &c.registry, cp, Threshold::DEFAULT, 100, &h).unwrap();
        assert_eq!(head.epoch, None);
        assert_eq!(head.checkpoint, cp);
    }
}
