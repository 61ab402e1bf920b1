//! Block-parity error reconciliation (a fixed-round Cascade).
//!
//! Round `r` partitions the key into blocks of `block_init << r` positions
//! under a public permutation (identity for round 0, a fresh shuffle after).
//! Alice discloses each block parity; a mismatched block is bisected, with one
//! disclosed parity per bisection step, until the error is located and Bob
//! flips it. Every flip also toggles the parity of the blocks holding that
//! position in earlier rounds, and any block that becomes mismatched is
//! bisected in turn. Each disclosed parity counts as one leaked bit.

use serde::{Deserialize, Serialize};

use crate::rng::RandomSource;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundStats {
    pub round: u32,
    pub block_size: usize,
    pub blocks: usize,
    pub parities_disclosed: usize,
    pub corrections: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Reconciled {
    pub corrected: Vec<u8>,
    pub leakage_bits: usize,
    pub rounds: Vec<RoundStats>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("reconciliation failed: {residual} mismatched bits after {} rounds", rounds.len())]
pub struct ReconcileFailure {
    pub residual: usize,
    pub leakage_bits: usize,
    pub rounds: Vec<RoundStats>,
}

struct Pass {
    order: Vec<usize>,
    /// position -> block index
    block_of: Vec<usize>,
    block_size: usize,
    alice_parity: Vec<u8>,
    bob_parity: Vec<u8>,
}

impl Pass {
    fn range(&self, block: usize) -> &[usize] {
        let start = block * self.block_size;
        let end = (start + self.block_size).min(self.order.len());
        &self.order[start..end]
    }
}

fn parity(bits: &[u8], positions: &[usize]) -> u8 {
    positions.iter().fold(0, |acc, &p| acc ^ bits[p])
}

/// Bisects a block known to hold an odd number of errors. Returns the located
/// position and the number of parities disclosed on the way.
fn bisect(alice: &[u8], bob: &[u8], mut positions: &[usize]) -> (usize, usize) {
    let mut disclosed = 0;
    while positions.len() > 1 {
        let (left, right) = positions.split_at(positions.len() / 2);
        disclosed += 1;
        positions = if parity(alice, left) != parity(bob, left) {
            left
        } else {
            right
        };
    }
    (positions[0], disclosed)
}

/// Reconciles `bob` towards `alice`.
///
/// `alice` is only ever read through disclosed parities; the final equality
/// check stands in for the confirmation step a deployed system would run.
pub fn reconcile(
    alice: &[u8],
    bob: &[u8],
    rounds: u32,
    block_init: usize,
    rng: &mut RandomSource,
) -> Result<Reconciled, ReconcileFailure> {
    assert_eq!(alice.len(), bob.len(), "reconcile requires equal-length keys");
    assert!(block_init > 0);
    let n = alice.len();
    let mut bob = bob.to_vec();
    let mut passes: Vec<Pass> = Vec::with_capacity(rounds as usize);
    let mut stats = Vec::with_capacity(rounds as usize);
    let mut leakage = 0usize;

    for round in 0..rounds {
        let mut order: Vec<usize> = (0..n).collect();
        if round > 0 {
            rng.shuffle(&mut order);
        }
        let block_size = block_init
            .checked_shl(round)
            .unwrap_or(usize::MAX)
            .min(n.max(1));
        let blocks = n.div_ceil(block_size);
        let mut block_of = vec![0usize; n];
        for (slot, &p) in order.iter().enumerate() {
            block_of[p] = slot / block_size;
        }
        let mut pass = Pass {
            order,
            block_of,
            block_size,
            alice_parity: Vec::with_capacity(blocks),
            bob_parity: Vec::with_capacity(blocks),
        };
        for b in 0..blocks {
            let r = pass.range(b);
            let (a, bb) = (parity(alice, r), parity(&bob, r));
            pass.alice_parity.push(a);
            pass.bob_parity.push(bb);
        }
        passes.push(pass);
        let mut st = RoundStats {
            round,
            block_size,
            blocks,
            parities_disclosed: blocks,
            corrections: 0,
        };

        let cur = round as usize;
        for b in 0..blocks {
            let p = &passes[cur];
            if p.alice_parity[b] == p.bob_parity[b] {
                continue;
            }
            // Work list of (pass, block) pairs with odd error parity.
            let mut pending = vec![(cur, b)];
            while let Some((pi, bi)) = pending.pop() {
                let pass = &passes[pi];
                if pass.alice_parity[bi] == pass.bob_parity[bi] {
                    continue;
                }
                let (pos, disclosed) = bisect(alice, &bob, pass.range(bi));
                st.parities_disclosed += disclosed;
                st.corrections += 1;
                bob[pos] ^= 1;
                for (qi, q) in passes.iter_mut().enumerate() {
                    let blk = q.block_of[pos];
                    q.bob_parity[blk] ^= 1;
                    // Blocks of the current pass not yet visited are handled
                    // by the outer loop.
                    if q.alice_parity[blk] != q.bob_parity[blk] && (qi < cur || blk <= b) {
                        pending.push((qi, blk));
                    }
                }
            }
        }
        leakage += st.parities_disclosed;
        stats.push(st);
    }

    let residual = alice.iter().zip(&bob).filter(|(a, b)| a != b).count();
    if residual == 0 {
        Ok(Reconciled {
            corrected: bob,
            leakage_bits: leakage,
            rounds: stats,
        })
    } else {
        Err(ReconcileFailure {
            residual,
            leakage_bits: leakage,
            rounds: stats,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_key(n: usize, rng: &mut RandomSource) -> Vec<u8> {
        (0..n).map(|_| rng.bit()).collect()
    }

    #[test]
    fn identical_keys_leak_only_block_parities() {
        let mut rng = RandomSource::new(1, 0);
        let a = random_key(1024, &mut rng);
        let out = reconcile(&a, &a, 4, 16, &mut rng).unwrap();
        assert_eq!(out.corrected, a);
        assert!(out.rounds.iter().all(|r| r.corrections == 0));
        assert_eq!(out.leakage_bits, 64 + 32 + 16 + 8);
    }

    #[test]
    fn single_error_fixed_in_first_round() {
        let mut rng = RandomSource::new(2, 0);
        for flip in [0usize, 17, 500, 1023] {
            let a = random_key(1024, &mut rng);
            let mut b = a.clone();
            b[flip] ^= 1;
            let out = reconcile(&a, &b, 4, 16, &mut rng).unwrap();
            assert_eq!(out.corrected, a);
            assert_eq!(out.rounds[0].corrections, 1);
            assert!(out.rounds[1..].iter().all(|r| r.corrections == 0));
            let block_parities: usize = out.rounds.iter().map(|r| r.blocks).sum();
            assert!(out.leakage_bits <= 2 * 4 + block_parities);
        }
    }

    #[test]
    fn leakage_is_sum_of_round_disclosures() {
        let mut rng = RandomSource::new(3, 0);
        let a = random_key(4096, &mut rng);
        let b: Vec<u8> = a.iter().map(|&x| x ^ rng.chance(0.05) as u8).collect();
        match reconcile(&a, &b, 4, 16, &mut rng) {
            Ok(out) => {
                let sum: usize = out.rounds.iter().map(|r| r.parities_disclosed).sum();
                assert_eq!(sum, out.leakage_bits);
            }
            Err(f) => {
                let sum: usize = f.rounds.iter().map(|r| r.parities_disclosed).sum();
                assert_eq!(sum, f.leakage_bits);
            }
        }
    }

    #[test]
    fn short_and_ragged_keys() {
        let mut rng = RandomSource::new(4, 0);
        let a = random_key(37, &mut rng);
        let mut b = a.clone();
        b[36] ^= 1;
        let out = reconcile(&a, &b, 4, 16, &mut rng).unwrap();
        assert_eq!(out.corrected, a);
        let out = reconcile(&[], &[], 4, 16, &mut rng).unwrap();
        assert!(out.corrected.is_empty());
    }

    #[test]
    fn five_percent_errors_reconcile_reliably() {
        let trials = 100;
        let mut ok = 0;
        for seed in 0..trials {
            let mut rng = RandomSource::new(seed, 77);
            let a = random_key(4096, &mut rng);
            let b: Vec<u8> = a.iter().map(|&x| x ^ rng.chance(0.05) as u8).collect();
            if let Ok(out) = reconcile(&a, &b, 4, 16, &mut rng) {
                assert_eq!(out.corrected, a);
                ok += 1;
            }
        }
        assert!(ok as f64 / trials as f64 >= 0.99, "success {ok}/{trials}");
    }
}
