//! Attack battery. A `Broken` verdict is only returned after the evidence has
//! been re-checked by the attacked scheme's own verify or decrypt.

use qrt_core::RandomSource;
use serde::{Deserialize, Serialize};

use crate::hash::{Digest, HashFunction};
use crate::lamport::{lamport_verify, msg_bit, LamportPublicKey, LamportSignature, MSG_BITS};
use crate::lwe::{dot_mod, lwe_decrypt, lwe_encrypt, LweParams, LwePublicKey, LweSecretKey};
use crate::merkle::{merkle_verify, reconstruct_leaf_key, MerkleSignature};
use crate::PqcError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Broken,
    Resisted,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Evidence {
    ForgedLamport { msg: Digest, sig: LamportSignature },
    ForgedMerkle { msg: Digest, sig: MerkleSignature },
    RecoveredSecret { s: Vec<u32> },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttackOutcome {
    pub verdict: Verdict,
    pub evidence: Option<Evidence>,
    /// Operations spent: hash evaluations or candidate checks.
    pub effort: u64,
    pub detail: String,
}

impl AttackOutcome {
    fn resisted(effort: u64, detail: impl Into<String>) -> Self {
        Self {
            verdict: Verdict::Resisted,
            evidence: None,
            effort,
            detail: detail.into(),
        }
    }
}

/// Forges a Lamport signature on `target` from two signatures made with the
/// same key.
///
/// Succeeds iff at every bit position some observed message agrees with
/// `target`, so the matching preimage has been revealed.
pub fn attack_ots_reuse(
    public: &LamportPublicKey,
    first: (&Digest, &LamportSignature),
    second: (&Digest, &LamportSignature),
    target: &Digest,
    h: &dyn HashFunction,
) -> Result<AttackOutcome, PqcError> {
    for (m, s) in [first, second] {
        if !lamport_verify(public, m, s, h) {
            return Err(PqcError::InvalidInputs(
                "observed signature does not verify".into(),
            ));
        }
    }
    let mut effort = 2 * MSG_BITS as u64;
    let mut preimages = Vec::with_capacity(MSG_BITS);
    for i in 0..MSG_BITS {
        effort += 1;
        let want = msg_bit(target, i);
        let found = [first, second]
            .into_iter()
            .find(|(m, _)| msg_bit(m, i) == want)
            .map(|(_, s)| s.preimages[i]);
        match found {
            Some(p) => preimages.push(p),
            None => {
                return Ok(AttackOutcome::resisted(
                    effort,
                    format!("bit {i} of target not covered by revealed preimages"),
                ))
            }
        }
    }
    let sig = LamportSignature { preimages };
    effort += MSG_BITS as u64;
    if !lamport_verify(public, target, &sig, h) {
        return Ok(AttackOutcome::resisted(effort, "assembled signature failed verification"));
    }
    Ok(AttackOutcome {
        verdict: Verdict::Broken,
        evidence: Some(Evidence::ForgedLamport { msg: *target, sig }),
        effort,
        detail: "full preimage coverage".into(),
    })
}

/// Tries to forge a Merkle signature on `target` from observed signatures by
/// pooling revealed preimages per leaf.
pub fn attack_merkle_forgery(
    root: &Digest,
    observed: &[(Digest, MerkleSignature)],
    target: &Digest,
    h: &dyn HashFunction,
) -> Result<AttackOutcome, PqcError> {
    let mut effort = 0u64;
    for (m, s) in observed {
        effort += (MSG_BITS + s.auth_path.len()) as u64;
        if !merkle_verify(root, m, s, h) {
            return Err(PqcError::InvalidInputs(
                "observed signature does not verify".into(),
            ));
        }
    }
    let mut leaves: Vec<u32> = observed.iter().map(|(_, s)| s.leaf_index).collect();
    leaves.sort_unstable();
    leaves.dedup();
    for leaf in leaves {
        let group: Vec<&(Digest, MerkleSignature)> =
            observed.iter().filter(|(_, s)| s.leaf_index == leaf).collect();
        let (m0, s0) = group[0];
        let Some(pk) = reconstruct_leaf_key(m0, s0, h) else {
            continue;
        };
        let mut preimages = Vec::with_capacity(MSG_BITS);
        for i in 0..MSG_BITS {
            effort += 1;
            let want = msg_bit(target, i);
            match group.iter().find(|(m, _)| msg_bit(m, i) == want) {
                Some((_, s)) => preimages.push(s.ots.preimages[i]),
                None => break,
            }
        }
        if preimages.len() < MSG_BITS {
            continue;
        }
        let sig = MerkleSignature {
            leaf_index: leaf,
            ots: LamportSignature { preimages },
            complement: (0..MSG_BITS)
                .map(|i| pk.hashes[1 - msg_bit(target, i)][i])
                .collect(),
            auth_path: s0.auth_path.clone(),
        };
        effort += (MSG_BITS + sig.auth_path.len()) as u64;
        if merkle_verify(root, target, &sig, h) {
            return Ok(AttackOutcome {
                verdict: Verdict::Broken,
                evidence: Some(Evidence::ForgedMerkle { msg: *target, sig }),
                effort,
                detail: format!("leaf {leaf} signed more than once"),
            });
        }
    }
    Ok(AttackOutcome::resisted(effort, "no leaf has covering signatures"))
}

/// Row-consistency of a candidate secret: every residual `b - <a, s>`,
/// centered in `(-q/2, q/2]`, stays within the error bound.
fn consistent(pk: &LwePublicKey, s: &[u32]) -> bool {
    let q = pk.params.q as i64;
    let bound = pk.params.error_bound as i64;
    pk.a.iter().zip(&pk.b).all(|(row, &b)| {
        let mut r = (b as i64 - dot_mod(row, s, pk.params.q) as i64).rem_euclid(q);
        if r > q / 2 {
            r -= q;
        }
        r.abs() <= bound
    })
}

/// Exhaustive secret search over `Z_q^n`, at most `budget` candidates.
///
/// Broken only when the whole space fits in the budget, exactly one candidate
/// is consistent with the public samples, and that candidate decrypts fresh
/// ciphertexts correctly.
pub fn attack_lwe_bruteforce(pk: &LwePublicKey, params: &LweParams, budget: u64) -> AttackOutcome {
    let space = params.search_space();
    let limit = (budget as u128).min(space) as u64;
    let q = params.q;
    let mut cand = vec![0u32; params.n];
    let mut hits: Vec<Vec<u32>> = Vec::new();
    let mut effort = 0u64;
    while effort < limit {
        effort += 1;
        if consistent(pk, &cand) {
            hits.push(cand.clone());
        }
        for digit in cand.iter_mut() {
            *digit += 1;
            if *digit < q {
                break;
            }
            *digit = 0;
        }
    }
    if space > budget as u128 {
        return AttackOutcome::resisted(
            effort,
            format!("search space {space} exceeds budget {budget}"),
        );
    }
    match hits.len() {
        1 => {
            let s = hits.pop().unwrap();
            let sk = LweSecretKey { params: *params, s };
            let mut rng = RandomSource::new(0, 0).derive("lwe-evidence", 0);
            let ok = (0..64).all(|_| {
                let bit = rng.bit();
                lwe_decrypt(&sk, &lwe_encrypt(pk, bit, &mut rng)) == bit
            });
            if ok {
                AttackOutcome {
                    verdict: Verdict::Broken,
                    evidence: Some(Evidence::RecoveredSecret { s: sk.s }),
                    effort,
                    detail: "unique consistent secret".into(),
                }
            } else {
                AttackOutcome::resisted(effort, "candidate failed decryption check")
            }
        }
        0 => AttackOutcome::resisted(effort, "no consistent secret"),
        k => AttackOutcome::resisted(effort, format!("{k} consistent secrets, ambiguous")),
    }
}
