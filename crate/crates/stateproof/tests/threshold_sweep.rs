use proptest::prelude::*;
use qrt_core::RandomSource;
use qrt_pqc::hash::Sha256Hash;
use qrt_stateproof::chain::build_honest_chain;
use qrt_stateproof::epoch::GENESIS_DIGEST;
use qrt_stateproof::proof::{StakeFraction, HEADER_BYTES};
use qrt_stateproof::{
    aggregate, make_attestation, proof_size_metric, verify_chain, verify_proof, Attestation,
    Committee, EpochState, StateProof, StateProofError, Threshold, VerifierCheckpoint,
};

const STAKES: [u64; 8] = [1, 2, 3, 5, 8, 13, 21, 27];

fn epoch() -> EpochState {
    EpochState {
        round: 100,
        state_digest: [0x11; 32],
        prev_proof_digest: GENESIS_DIGEST,
    }
}

fn all_attestations(c: &mut Committee, e: &EpochState) -> Vec<Attestation> {
    let reg = c.registry.clone();
    (0..reg.validators().len() as u64)
        .map(|id| make_attestation(id, e, c.keys_mut(id).unwrap(), &reg, &Sha256Hash).unwrap())
        .collect()
}

/// Exact reference rule: stake * den >= num * total in integers.
fn oracle(stake: u64, total: u64, num: u64, den: u64) -> bool {
    stake as u128 * den as u128 >= num as u128 * total as u128
}

#[test]
fn exhaustive_subset_sweep_matches_exact_rule() {
    let h = Sha256Hash;
    let mut c = Committee::generate(&STAKES, 1, &RandomSource::new(1, 0), &h).unwrap();
    let e = epoch();
    let atts = all_attestations(&mut c, &e);
    let total: u64 = STAKES.iter().sum();
    let mut discrepancies = 0;
    for (num, den) in [(3, 4), (7, 10), (4, 5), (2, 3), (1, 1)] {
        let tau = Threshold::new(num, den).unwrap();
        for mask in 0u32..256 {
            let subset: Vec<Attestation> =
                (0..8).filter(|i| mask >> i & 1 == 1).map(|i| atts[i].clone()).collect();
            let stake: u64 = (0..8).filter(|i| mask >> i & 1 == 1).map(|i| STAKES[i]).sum();
            let want = oracle(stake, total, num, den);
            let got = match aggregate(&subset, &c.registry, &e, tau, &h) {
                Ok(p) => {
                    assert!(verify_proof(&p, &c.registry, &GENESIS_DIGEST, tau, 100, &h).valid);
                    true
                }
                Err(StateProofError::InsufficientStake { attested_stake, .. }) => {
                    assert_eq!(attested_stake, stake);
                    false
                }
                Err(e) => panic!("{e}"),
            };
            discrepancies += (got != want) as u32;
        }
    }
    assert_eq!(discrepancies, 0);
}

#[test]
fn serialization_roundtrip_preserves_verdicts() {
    let h = Sha256Hash;
    let mut c = Committee::generate(&STAKES, 1, &RandomSource::new(2, 0), &h).unwrap();
    let e = epoch();
    let atts = all_attestations(&mut c, &e);
    let tau = Threshold::DEFAULT;
    for mask in (0u32..256).step_by(7) {
        let subset: Vec<Attestation> =
            (0..8).filter(|i| mask >> i & 1 == 1).map(|i| atts[i].clone()).collect();
        let stake = (0..8).filter(|i| mask >> i & 1 == 1).map(|i| STAKES[i]).sum();
        // A claimed proof exists either way; the aggregator is not trusted.
        let proof = StateProof {
            epoch: e,
            attestations: subset,
            attested_fraction: StakeFraction {
                attested_stake: stake,
                total_stake: c.registry.total_stake(),
            },
            aggregator_note: "x".into(),
        };
        let v = verify_proof(&proof, &c.registry, &GENESIS_DIGEST, tau, 100, &h);
        let bytes = proof.canonical_bytes();
        let back = StateProof::from_canonical_bytes(&bytes).unwrap();
        assert_eq!(back.canonical_bytes(), bytes);
        let json = serde_json::to_string(&proof).unwrap();
        let from_json: StateProof = serde_json::from_str(&json).unwrap();
        assert_eq!(from_json.canonical_bytes(), bytes);
        let reg2 = qrt_stateproof::ValidatorRegistry::from_json(&c.registry.to_json()).unwrap();
        assert_eq!(verify_proof(&back, &reg2, &GENESIS_DIGEST, tau, 100, &h), v);
        assert_eq!(verify_proof(&from_json, &reg2, &GENESIS_DIGEST, tau, 100, &h), v);
    }
}

#[test]
fn per_attestation_size_tracks_depth() {
    let h = Sha256Hash;
    let per = |depth: u32| {
        let mut c = Committee::generate(&[1, 1], depth, &RandomSource::new(3, 0), &h).unwrap();
        let e = epoch();
        let atts = all_attestations(&mut c, &e);
        let p = aggregate(&atts, &c.registry, &e, Threshold::new(1, 1).unwrap(), &h).unwrap();
        proof_size_metric(&p)
    };
    let (a, b) = (per(3), per(6));
    assert_eq!(b.per_validator_bytes - a.per_validator_bytes, 32 * 3);
    assert_eq!(a.bytes, HEADER_BYTES + 2 * a.per_validator_bytes);
}

#[test]
fn leaves_never_sign_two_payloads() {
    let h = Sha256Hash;
    let mut c = Committee::generate(&[10; 6], 4, &RandomSource::new(4, 0), &h).unwrap();
    let chain = build_honest_chain(&mut c, 12, 100, b"ledger", Threshold::DEFAULT, &h).unwrap();
    let mut ledger = std::collections::BTreeMap::new();
    for p in &chain {
        for a in &p.attestations {
            let prev = ledger.insert((a.validator_id, a.signature.leaf_index), a.payload);
            assert!(prev.is_none(), "leaf reused");
        }
    }
    assert_eq!(ledger.len(), 72);
    assert!(verify_chain(&chain, &c.registry, VerifierCheckpoint::GENESIS, Threshold::DEFAULT, 100, &h).is_ok());
}

#[test]
fn replayed_leaf_on_new_payload_is_caught_by_chain() {
    let h = Sha256Hash;
    let mut c = Committee::generate(&[10; 4], 3, &RandomSource::new(5, 0), &h).unwrap();
    let mut chain = build_honest_chain(&mut c, 3, 100, b"replay", Threshold::DEFAULT, &h).unwrap();
    // Swap one attestation in epoch 2 for validator 0's epoch-1 signature.
    let old = chain[0].attestations[0].clone();
    chain[1].attestations[0].signature = old.signature;
    let err = verify_chain(&chain, &c.registry, VerifierCheckpoint::GENESIS, Threshold::DEFAULT, 100, &h)
        .unwrap_err();
    assert_eq!(err.at_round, 200);
    assert!(err.reasons.iter().any(|r| r.code() == "invalid_signature"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// No aggregator behavior lifts a minority subset past verification:
    /// duplicates, replays onto the payload and inflated claims all fail.
    #[test]
    fn minority_proofs_never_verify(mask in 0u32..256, dup in 0usize..8, claim in 0u64..=80) {
        let h = Sha256Hash;
        let mut c = Committee::generate(&STAKES, 2, &RandomSource::new(6, 0), &h).unwrap();
        let e = epoch();
        let atts = all_attestations(&mut c, &e);
        let total: u64 = STAKES.iter().sum();
        let honest_stake: u64 = (0..8).filter(|i| mask >> i & 1 == 1).map(|i| STAKES[i]).sum();
        prop_assume!(!oracle(honest_stake, total, 3, 4));
        let mut forged: Vec<Attestation> =
            (0..8).filter(|i| mask >> i & 1 == 1).map(|i| atts[i].clone()).collect();
        if !forged.is_empty() {
            forged.push(forged[dup % forged.len()].clone());
        }
        for i in (0..8).filter(|i| mask >> i & 1 == 0) {
            // Classical forgery: a signature from another validator relabeled.
            let mut f = atts[(i + 1) % 8].clone();
            f.validator_id = i as u64;
            forged.push(f);
        }
        let proof = StateProof {
            epoch: e,
            attestations: forged,
            attested_fraction: StakeFraction { attested_stake: claim, total_stake: total },
            aggregator_note: String::new(),
        };
        let v = verify_proof(&proof, &c.registry, &GENESIS_DIGEST, Threshold::DEFAULT, 100, &h);
        prop_assert!(!v.valid);
        prop_assert!(v.recomputed.attested_stake <= honest_stake);
    }
}
