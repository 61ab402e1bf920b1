//! History-rewrite simulation.
//!
//! The adversary controls some validators outright and, with
//! `classical_forgery`, can forge any classical signature for free. The
//! attestation signatures are hash-based, so classical forgery only yields
//! attestation-shaped bytes that fail verification: replayed honest
//! signatures re-pointed at the forged payload.

use qrt_pqc::hash::{Digest, HashFunction};
use serde::{Deserialize, Serialize};

use crate::chain::{verify_chain, VerifierCheckpoint};
use crate::epoch::{make_attestation, Attestation, EpochState, GENESIS_DIGEST};
use crate::proof::{aggregate, Reason, StakeFraction, StateProof};
use crate::registry::Committee;
use crate::threshold::Threshold;
use crate::StateProofError;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeTravelReport {
    pub target_round: u64,
    pub tau: Threshold,
    pub classical_forgery: bool,
    pub adversary_validators: Vec<u64>,
    pub adversary_stake: StakeFraction,
    /// Forged (classically signed) attestations injected per rewritten epoch.
    pub forged_attestations: usize,
    /// Whether an honest aggregator would have produced the forged proof.
    pub aggregate_succeeded: bool,
    pub rewrite_accepted: bool,
    pub rejected_at: Option<u64>,
    pub rejection_reasons: Vec<String>,
    pub honest_chain_verifies: bool,
    /// The adversary holds at least τ of the stake, so the model's security
    /// assumption no longer holds.
    pub threshold_assumption_breached: bool,
}

/// Validators taken in id order while their cumulative stake stays within
/// `fraction` of the total, compared exactly.
pub fn select_adversary(committee: &Committee, fraction: f64) -> Result<Vec<u64>, StateProofError> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(StateProofError::InvalidScenario(format!(
            "adversary stake fraction {fraction} outside [0, 1]"
        )));
    }
    // Shortest round-trip decimal, as for thresholds.
    let text = format!("{fraction}");
    let (int, frac) = text.split_once('.').unwrap_or((&text, ""));
    let den = 10u128.pow(frac.len() as u32);
    let num = int.parse::<u128>().unwrap_or(0) * den + frac.parse::<u128>().unwrap_or(0);
    let total = committee.registry.total_stake() as u128;
    let mut ids: Vec<u64> = committee.registry.validators().iter().map(|v| v.id).collect();
    ids.sort_unstable();
    let mut cum = 0u128;
    let mut out = Vec::new();
    for id in ids {
        let s = committee.registry.get(id).unwrap().stake as u128;
        if (cum + s) * den <= num * total {
            cum += s;
            out.push(id);
        }
    }
    Ok(out)
}

/// Rewrites `history` from `target_round` onward and asks a genesis verifier
/// to accept the result. The honest chain is then checked from genesis and
/// from a mid-chain checkpoint.
#[allow(clippy::too_many_arguments)]
pub fn simulate_time_travel_attack(
    committee: &mut Committee,
    history: &[StateProof],
    adversary_stake_fraction: f64,
    classical_forgery: bool,
    target_round: u64,
    tau: Threshold,
    cadence: u64,
    h: &dyn HashFunction,
) -> Result<TimeTravelReport, StateProofError> {
    let idx = history
        .iter()
        .position(|p| p.epoch.round == target_round)
        .ok_or_else(|| {
            StateProofError::InvalidScenario(format!("no proof at round {target_round} in history"))
        })?;
    let adversary = select_adversary(committee, adversary_stake_fraction)?;
    let registry = committee.registry.clone();
    let adversary_stake = StakeFraction {
        attested_stake: adversary.iter().map(|id| registry.get(*id).unwrap().stake).sum(),
        total_stake: registry.total_stake(),
    };

    let mut branch: Vec<StateProof> = history[..idx].to_vec();
    let mut prev: Digest = match idx {
        0 => GENESIS_DIGEST,
        i => history[i - 1].digest(h),
    };
    let mut forged_attestations = 0;
    let mut aggregate_succeeded = true;
    for (k, honest) in history[idx..].iter().enumerate() {
        let epoch = EpochState {
            round: honest.epoch.round,
            state_digest: h.hash_parts(&[
                b"qrt.rewrite",
                &honest.epoch.state_digest,
                &(k as u64).to_le_bytes(),
            ]),
            prev_proof_digest: prev,
        };
        let payload = epoch.payload_digest(h);
        let mut atts: Vec<Attestation> = adversary
            .iter()
            .map(|&id| make_attestation(id, &epoch, committee.keys_mut(id).unwrap(), &registry, h))
            .collect::<Result<_, _>>()?;
        if classical_forgery {
            let forged: Vec<Attestation> = honest
                .attestations
                .iter()
                .filter(|a| !adversary.contains(&a.validator_id))
                .map(|a| Attestation {
                    round: epoch.round,
                    payload,
                    ..a.clone()
                })
                .collect();
            forged_attestations = forged.len();
            atts.extend(forged);
        }
        let proof = match aggregate(&atts, &registry, &epoch, tau, h) {
            Ok(p) => p,
            Err(StateProofError::InsufficientStake { .. }) => {
                aggregate_succeeded = false;
                // The adversary is its own aggregator and claims full stake.
                atts.sort_by_key(|a| a.validator_id);
                StateProof {
                    epoch,
                    attestations: atts,
                    attested_fraction: StakeFraction {
                        attested_stake: registry.total_stake(),
                        total_stake: registry.total_stake(),
                    },
                    aggregator_note: "assembled by adversary".into(),
                }
            }
            Err(e) => return Err(e),
        };
        prev = proof.digest(h);
        branch.push(proof);
    }

    let rewrite = verify_chain(&branch, &registry, VerifierCheckpoint::GENESIS, tau, cadence, h);
    let mid = history.len() / 2;
    let from_checkpoint = match mid {
        0 => VerifierCheckpoint::GENESIS,
        m => VerifierCheckpoint::at(history[m - 1].epoch.round, history[m - 1].digest(h)),
    };
    let honest_chain_verifies =
        verify_chain(history, &registry, VerifierCheckpoint::GENESIS, tau, cadence, h).is_ok()
            && verify_chain(history, &registry, from_checkpoint, tau, cadence, h).is_ok();

    let (rejected_at, rejection_reasons) = match &rewrite {
        Ok(_) => (None, Vec::new()),
        Err(e) => (
            Some(e.at_round),
            e.reasons.iter().map(Reason::code).map(String::from).collect(),
        ),
    };
    Ok(TimeTravelReport {
        target_round,
        tau,
        classical_forgery,
        adversary_validators: adversary,
        adversary_stake,
        forged_attestations,
        aggregate_succeeded,
        rewrite_accepted: rewrite.is_ok(),
        rejected_at,
        rejection_reasons,
        honest_chain_verifies,
        threshold_assumption_breached: tau
            .is_met(adversary_stake.attested_stake, adversary_stake.total_stake),
    })
}
