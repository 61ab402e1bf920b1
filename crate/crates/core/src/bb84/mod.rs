//! BB84 key distribution: preparation, transmission, sifting, QBER
//! estimation, reconciliation, privacy amplification and the abort policy.
//!
//! A session draws from named sub-streams of its [`RandomSource`]: `alice`
//! (bits and bases), `bob` (bases and conjugate-basis outcomes), `channel`,
//! `eve` (handed to the adversary) and `public` (check-bit selection,
//! reconciliation shuffles and the hash seed). An adversary therefore never
//! shifts anyone else's draws.

pub mod amplify;
pub mod reconcile;

use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::quantum::{measure, prepare, transmit, Basis, ChannelModel};
use crate::redteam::adversary::{Adversary, ClassicalMessage};
use crate::rng::RandomSource;

pub use amplify::{
    binary_entropy, entropy_bound_length, final_key_length, privacy_amplify, FinalKey, KeyPolicy,
    ToeplitzHash,
};
pub use reconcile::{reconcile, ReconcileFailure, Reconciled, RoundStats};

/// Minimum number of disclosed check bits for a QBER estimate.
pub const MIN_CHECK_BITS: usize = 16;
/// Minimum number of sifted bits left after checking.
pub const MIN_KEY_BITS: usize = 160;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionConfig {
    pub n_qubits: usize,
    pub check_fraction: f64,
    pub qber_abort_threshold: f64,
    pub reconciliation_rounds: u32,
    pub reconciliation_block_init: usize,
    pub pa_safety_margin: usize,
    pub target_key_policy: KeyPolicy,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            n_qubits: 10_000,
            check_fraction: 0.1,
            qber_abort_threshold: 0.11,
            reconciliation_rounds: 4,
            reconciliation_block_init: 16,
            pa_safety_margin: 32,
            target_key_policy: KeyPolicy::EntropyBound,
        }
    }
}

impl SessionConfig {
    pub fn with_qubits(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            ..Self::default()
        }
    }

    /// Every violated invariant as `(field, message)`.
    pub fn violations(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        if self.n_qubits == 0 {
            out.push(("n_qubits", "must be positive".to_string()));
        }
        if !(self.check_fraction > 0.0 && self.check_fraction < 1.0) {
            out.push((
                "check_fraction",
                format!("must lie in (0, 1), got {}", self.check_fraction),
            ));
        } else if self.check_fraction * (self.n_qubits as f64) < MIN_CHECK_BITS as f64 {
            out.push((
                "check_fraction",
                format!(
                    "check_fraction * n_qubits must be at least {MIN_CHECK_BITS}, got {}",
                    self.check_fraction * self.n_qubits as f64
                ),
            ));
        }
        if !(self.qber_abort_threshold > 0.0 && self.qber_abort_threshold < 0.5) {
            out.push((
                "qber_abort_threshold",
                format!("must lie in (0, 0.5), got {}", self.qber_abort_threshold),
            ));
        }
        if self.reconciliation_rounds == 0 {
            out.push(("reconciliation_rounds", "must be positive".to_string()));
        }
        if self.reconciliation_block_init == 0 {
            out.push(("reconciliation_block_init", "must be positive".to_string()));
        }
        out
    }

    pub fn validate(&self) -> Result<(), Bb84Error> {
        match self.violations().into_iter().next() {
            None => Ok(()),
            Some((field, msg)) => Err(Bb84Error::InvalidConfig(format!("{field}: {msg}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Bb84Error {
    #[error("invalid session config: {0}")]
    InvalidConfig(String),
    #[error("sequence length mismatch: {0}")]
    LengthMismatch(String),
    #[error("insufficient sifted bits: {check_bits} check bits from {available} sifted pairs")]
    InsufficientSiftedBits { available: usize, check_bits: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbortReason {
    QberThresholdExceeded,
    InsufficientSiftedBits,
    ReconciliationFailure,
}

impl AbortReason {
    pub fn as_str(self) -> &'static str {
        match self {
            AbortReason::QberThresholdExceeded => "qber_threshold_exceeded",
            AbortReason::InsufficientSiftedBits => "insufficient_sifted_bits",
            AbortReason::ReconciliationFailure => "reconciliation_failure",
        }
    }
}

/// One entry of the session's phase log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "phase", rename_all = "snake_case")]
pub enum PhaseEvent {
    Transmitted { qubits: usize, lost: usize },
    Sifted { sifted: usize },
    QberEstimated { check_bits: usize, errors: usize, qber: f64 },
    Reconciliation(RoundStats),
    Amplified { input_bits: usize, output_bits: usize },
    Aborted { reason: AbortReason },
}

/// Complete record of one session.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionTranscript {
    pub n_qubits: usize,
    pub alice_bits: BitString,
    /// Basis per qubit, Rectilinear = 0, Diagonal = 1.
    pub alice_bases: BitString,
    pub bob_bases: BitString,
    /// Bob's outcome per qubit; 0 where the qubit was lost.
    pub bob_outcomes: BitString,
    pub lost_mask: BitString,
    pub sift_mask: BitString,
    /// Qubit indices sacrificed for QBER estimation, ascending.
    pub disclosed_indices: Vec<usize>,
    /// `None` when too few sifted bits existed to estimate.
    pub qber_estimate: Option<f64>,
    pub leakage_bits: usize,
    pub alice_final_key: BitString,
    pub bob_final_key: BitString,
    pub aborted: bool,
    pub abort_reason: Option<AbortReason>,
    pub phase_log: Vec<PhaseEvent>,
}

impl SessionTranscript {
    pub fn sifted_count(&self) -> usize {
        self.sift_mask.count_ones()
    }

    /// Sifted, undisclosed qubit indices in order: the positions that make up
    /// the key before reconciliation and amplification.
    pub fn key_indices(&self) -> Vec<usize> {
        let mut disclosed = self.disclosed_indices.iter().peekable();
        let mut out = Vec::new();
        for i in 0..self.sift_mask.len() {
            if self.sift_mask.get(i) == 0 {
                continue;
            }
            if disclosed.peek() == Some(&&i) {
                disclosed.next();
                continue;
            }
            out.push(i);
        }
        out
    }

    pub fn final_key_length(&self) -> usize {
        self.alice_final_key.len()
    }

    /// Sum of disclosed parities recorded in the phase log.
    pub fn logged_parities(&self) -> usize {
        self.phase_log
            .iter()
            .map(|e| match e {
                PhaseEvent::Reconciliation(r) => r.parities_disclosed,
                _ => 0,
            })
            .sum()
    }
}

/// Positions where the qubit arrived and both bases agree.
pub fn sift(alice_bases: &[u8], bob_bases: &[u8], lost_mask: &[u8]) -> Result<Vec<u8>, Bb84Error> {
    if alice_bases.len() != bob_bases.len() || alice_bases.len() != lost_mask.len() {
        return Err(Bb84Error::LengthMismatch(format!(
            "alice_bases {}, bob_bases {}, lost_mask {}",
            alice_bases.len(),
            bob_bases.len(),
            lost_mask.len()
        )));
    }
    Ok(alice_bases
        .iter()
        .zip(bob_bases)
        .zip(lost_mask)
        .map(|((a, b), lost)| (a == b && *lost == 0) as u8)
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SiftedPair {
    pub index: usize,
    pub alice: u8,
    pub bob: u8,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QberEstimate {
    pub qber: f64,
    pub errors: usize,
    pub remaining: Vec<SiftedPair>,
    /// Qubit indices of the disclosed pairs, ascending.
    pub disclosed: Vec<usize>,
}

/// Discloses a uniformly random `floor(check_fraction * len)` subset of the
/// sifted pairs and measures their disagreement rate.
pub fn estimate_qber(
    pairs: &[SiftedPair],
    check_fraction: f64,
    rng: &mut RandomSource,
) -> Result<QberEstimate, Bb84Error> {
    assert!(check_fraction > 0.0 && check_fraction <= 1.0);
    let k = (check_fraction * pairs.len() as f64).floor() as usize;
    if k < MIN_CHECK_BITS {
        return Err(Bb84Error::InsufficientSiftedBits {
            available: pairs.len(),
            check_bits: k,
        });
    }
    // Partial Fisher-Yates: the first k slots become the sample.
    let mut slots: Vec<usize> = (0..pairs.len()).collect();
    for i in 0..k {
        let j = i + rng.below((pairs.len() - i) as u64) as usize;
        slots.swap(i, j);
    }
    let mut chosen = vec![false; pairs.len()];
    for &s in &slots[..k] {
        chosen[s] = true;
    }
    let mut errors = 0;
    let mut disclosed = Vec::with_capacity(k);
    let mut remaining = Vec::with_capacity(pairs.len() - k);
    for (p, &c) in pairs.iter().zip(&chosen) {
        if c {
            disclosed.push(p.index);
            errors += (p.alice != p.bob) as usize;
        } else {
            remaining.push(*p);
        }
    }
    Ok(QberEstimate {
        qber: errors as f64 / k as f64,
        errors,
        remaining,
        disclosed,
    })
}

/// Runs one session end to end. Aborts are reported in the transcript; only an
/// invalid config is an error.
pub fn run_session(
    cfg: &SessionConfig,
    ch: &ChannelModel,
    adv: &mut dyn Adversary,
    rng: &RandomSource,
) -> Result<SessionTranscript, Bb84Error> {
    cfg.validate()?;
    ch.validate()
        .map_err(|e| Bb84Error::InvalidConfig(e.to_string()))?;
    adv.reset();

    let mut alice_rng = rng.derive("alice", 0);
    let mut bob_rng = rng.derive("bob", 0);
    let mut channel_rng = rng.derive("channel", 0);
    let mut eve_rng = rng.derive("eve", 0);
    let mut public_rng = rng.derive("public", 0);

    let n = cfg.n_qubits;
    let mut alice_bits = Vec::with_capacity(n);
    let mut alice_bases = Vec::with_capacity(n);
    let mut bob_bases = Vec::with_capacity(n);
    let mut bob_outcomes = Vec::with_capacity(n);
    let mut lost_mask = Vec::with_capacity(n);

    for i in 0..n {
        let bit = alice_rng.bit();
        let basis = Basis::random(&mut alice_rng);
        let bob_basis = Basis::random(&mut bob_rng);
        let arrived = adv
            .on_qubit(i, prepare(bit, basis), &mut eve_rng)
            .and_then(|q| transmit(q, ch, &mut channel_rng));
        let outcome = match arrived {
            Some(q) => Some(measure(q, bob_basis, &mut bob_rng).0),
            None => None,
        };
        alice_bits.push(bit);
        alice_bases.push(basis.as_bit());
        bob_bases.push(bob_basis.as_bit());
        bob_outcomes.push(outcome.unwrap_or(0));
        lost_mask.push(outcome.is_none() as u8);
    }

    let lost = lost_mask.iter().filter(|&&l| l == 1).count();
    let mut t = SessionTranscript {
        n_qubits: n,
        alice_bits: BitString::from_vec(alice_bits),
        alice_bases: BitString::from_vec(alice_bases),
        bob_bases: BitString::from_vec(bob_bases),
        bob_outcomes: BitString::from_vec(bob_outcomes),
        lost_mask: BitString::from_vec(lost_mask),
        sift_mask: BitString::new(),
        disclosed_indices: Vec::new(),
        qber_estimate: None,
        leakage_bits: 0,
        alice_final_key: BitString::new(),
        bob_final_key: BitString::new(),
        aborted: false,
        abort_reason: None,
        phase_log: vec![PhaseEvent::Transmitted { qubits: n, lost }],
    };

    adv.on_classical(&ClassicalMessage::BasesAnnounced {
        alice_bases: t.alice_bases.as_slice(),
        bob_bases: t.bob_bases.as_slice(),
    });
    t.sift_mask = BitString::from_vec(sift(
        t.alice_bases.as_slice(),
        t.bob_bases.as_slice(),
        t.lost_mask.as_slice(),
    )?);
    let pairs: Vec<SiftedPair> = (0..n)
        .filter(|&i| t.sift_mask.get(i) == 1)
        .map(|i| SiftedPair {
            index: i,
            alice: t.alice_bits.get(i),
            bob: t.bob_outcomes.get(i),
        })
        .collect();
    t.phase_log.push(PhaseEvent::Sifted {
        sifted: pairs.len(),
    });

    let est = match estimate_qber(&pairs, cfg.check_fraction, &mut public_rng) {
        Ok(est) => est,
        Err(Bb84Error::InsufficientSiftedBits { .. }) => {
            return Ok(abort(t, AbortReason::InsufficientSiftedBits));
        }
        Err(e) => return Err(e),
    };
    t.disclosed_indices = est.disclosed.clone();
    t.qber_estimate = Some(est.qber);
    t.phase_log.push(PhaseEvent::QberEstimated {
        check_bits: est.disclosed.len(),
        errors: est.errors,
        qber: est.qber,
    });
    {
        let alice_check: Vec<u8> = est.disclosed.iter().map(|&i| t.alice_bits.get(i)).collect();
        let bob_check: Vec<u8> = est.disclosed.iter().map(|&i| t.bob_outcomes.get(i)).collect();
        adv.on_classical(&ClassicalMessage::CheckBitsRevealed {
            indices: &est.disclosed,
            alice_bits: &alice_check,
            bob_bits: &bob_check,
        });
    }

    if est.remaining.len() < MIN_KEY_BITS {
        return Ok(abort(t, AbortReason::InsufficientSiftedBits));
    }
    if est.qber > cfg.qber_abort_threshold {
        return Ok(abort(t, AbortReason::QberThresholdExceeded));
    }

    let alice_key: Vec<u8> = est.remaining.iter().map(|p| p.alice).collect();
    let bob_key: Vec<u8> = est.remaining.iter().map(|p| p.bob).collect();
    let rec = reconcile(
        &alice_key,
        &bob_key,
        cfg.reconciliation_rounds,
        cfg.reconciliation_block_init,
        &mut public_rng,
    );
    let (corrected, leakage, rounds) = match rec {
        Ok(r) => (Some(r.corrected), r.leakage_bits, r.rounds),
        Err(f) => (None, f.leakage_bits, f.rounds),
    };
    for r in rounds {
        adv.on_classical(&ClassicalMessage::ParitiesDisclosed {
            round: r.round,
            count: r.parities_disclosed,
        });
        t.phase_log.push(PhaseEvent::Reconciliation(r));
    }
    t.leakage_bits = leakage;
    let Some(bob_corrected) = corrected else {
        return Ok(abort(t, AbortReason::ReconciliationFailure));
    };

    let out_len = final_key_length(
        alice_key.len(),
        est.qber,
        leakage,
        cfg.pa_safety_margin,
        cfg.target_key_policy,
    );
    let hash = ToeplitzHash::from_rng(alice_key.len(), out_len, &mut public_rng);
    adv.on_classical(&ClassicalMessage::HashSeedAnnounced {
        seed_bits: hash.diagonal().len(),
    });
    t.alice_final_key = hash.apply(&alice_key);
    t.bob_final_key = hash.apply(&bob_corrected);
    t.phase_log.push(PhaseEvent::Amplified {
        input_bits: alice_key.len(),
        output_bits: out_len,
    });
    Ok(t)
}

fn abort(mut t: SessionTranscript, reason: AbortReason) -> SessionTranscript {
    t.aborted = true;
    t.abort_reason = Some(reason);
    t.alice_final_key = BitString::new();
    t.bob_final_key = BitString::new();
    t.phase_log.push(PhaseEvent::Aborted { reason });
    t
}

impl SessionTranscript {
    /// The accepted key, if the session completed.
    pub fn final_key(&self) -> Option<FinalKey> {
        if self.aborted {
            return None;
        }
        Some(FinalKey {
            bits: self.alice_final_key.clone(),
            length: self.alice_final_key.len(),
            qber_at_acceptance: self.qber_estimate.unwrap_or(0.0),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::redteam::adversary::NullAdversary;
    use crate::redteam::intercept::{InterceptResend, InterceptResendParams};

    #[test]
    fn sift_examples() {
        let r = Basis::Rectilinear.as_bit();
        let d = Basis::Diagonal.as_bit();
        assert_eq!(sift(&[r, d, r, d], &[r, d, r, d], &[0; 4]).unwrap(), vec![1; 4]);
        assert_eq!(
            sift(&[r, d, r, d], &[r, r, d, d], &[0; 4]).unwrap(),
            vec![1, 0, 0, 1]
        );
        assert_eq!(
            sift(&[r, d, r, d], &[r, d, r, d], &[0, 1, 0, 0]).unwrap(),
            vec![1, 0, 1, 1]
        );
        assert!(matches!(
            sift(&[r], &[r, d], &[0]),
            Err(Bb84Error::LengthMismatch(_))
        ));
    }

    #[test]
    fn sift_fraction_for_random_bases() {
        let mut rng = RandomSource::new(8, 8);
        let n = 100_000;
        let a: Vec<u8> = (0..n).map(|_| rng.bit()).collect();
        let b: Vec<u8> = (0..n).map(|_| rng.bit()).collect();
        let mask = sift(&a, &b, &vec![0; n]).unwrap();
        let frac = mask.iter().map(|&m| m as usize).sum::<usize>() as f64 / n as f64;
        assert!((frac - 0.5).abs() <= 0.005, "{frac}");
    }

    fn pairs(alice: &[u8], bob: &[u8]) -> Vec<SiftedPair> {
        alice
            .iter()
            .zip(bob)
            .enumerate()
            .map(|(i, (&a, &b))| SiftedPair { index: i * 3, alice: a, bob: b })
            .collect()
    }

    #[test]
    fn qber_examples() {
        let mut rng = RandomSource::new(1, 1);
        let a: Vec<u8> = (0..1000).map(|_| rng.bit()).collect();
        let est = estimate_qber(&pairs(&a, &a), 0.1, &mut rng).unwrap();
        assert_eq!(est.qber, 0.0);
        assert_eq!(est.disclosed.len(), 100);
        assert_eq!(est.remaining.len(), 900);
        for r in &est.remaining {
            assert!(est.disclosed.binary_search(&r.index).is_err());
        }

        let comp: Vec<u8> = a.iter().map(|x| x ^ 1).collect();
        let est = estimate_qber(&pairs(&a, &comp), 0.1, &mut rng).unwrap();
        assert_eq!(est.qber, 1.0);

        let mut b = vec![0u8; 100];
        for x in b.iter_mut().take(25) {
            *x = 1;
        }
        let est = estimate_qber(&pairs(&[0; 100], &b), 1.0, &mut rng).unwrap();
        assert_eq!(est.errors, 25);
        assert_eq!(est.qber, 0.25);
    }

    #[test]
    fn qber_needs_sixteen_check_bits() {
        let mut rng = RandomSource::new(1, 1);
        let p = pairs(&[0; 159], &[0; 159]);
        assert!(matches!(
            estimate_qber(&p, 0.1, &mut rng),
            Err(Bb84Error::InsufficientSiftedBits { check_bits: 15, .. })
        ));
        let p = pairs(&[0; 160], &[0; 160]);
        assert!(estimate_qber(&p, 0.1, &mut rng).is_ok());
    }

    #[test]
    fn config_validation() {
        assert!(SessionConfig::default().validate().is_ok());
        let bad = SessionConfig {
            n_qubits: 100,
            ..SessionConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = SessionConfig {
            qber_abort_threshold: 0.5,
            ..SessionConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn noiseless_session_agrees() {
        let cfg = SessionConfig::with_qubits(10_000);
        let t = run_session(&cfg, &ChannelModel::NOISELESS, &mut NullAdversary, &RandomSource::new(4, 0))
            .unwrap();
        assert!(!t.aborted);
        assert_eq!(t.qber_estimate, Some(0.0));
        assert_eq!(t.alice_final_key, t.bob_final_key);
        assert!(t.final_key_length() > 0);
        assert_eq!(t.logged_parities(), t.leakage_bits);
        let fk = t.final_key().unwrap();
        assert_eq!(fk.length, fk.bits.len());
    }

    #[test]
    fn transcript_invariants_hold() {
        let cfg = SessionConfig::with_qubits(4000);
        let ch = ChannelModel::new(0.03, 0.2).unwrap();
        for seed in 0..10 {
            let t = run_session(&cfg, &ch, &mut NullAdversary, &RandomSource::new(seed, 9)).unwrap();
            for i in 0..t.n_qubits {
                let want = t.lost_mask.get(i) == 0 && t.alice_bases.get(i) == t.bob_bases.get(i);
                assert_eq!(t.sift_mask.get(i) == 1, want);
            }
            for &d in &t.disclosed_indices {
                assert_eq!(t.sift_mask.get(d), 1);
            }
            assert!(t.final_key_length() <= t.sifted_count() - t.disclosed_indices.len());
            if !t.aborted {
                assert_eq!(t.alice_final_key, t.bob_final_key);
            }
            assert_eq!(t.logged_parities(), t.leakage_bits);
        }
    }

    #[test]
    fn heavy_noise_aborts_on_threshold() {
        let cfg = SessionConfig::with_qubits(10_000);
        let ch = ChannelModel::new(0.15, 0.0).unwrap();
        let t = run_session(&cfg, &ch, &mut NullAdversary, &RandomSource::new(1, 0)).unwrap();
        assert!(t.aborted);
        assert_eq!(t.abort_reason, Some(AbortReason::QberThresholdExceeded));
        assert!(t.alice_final_key.is_empty());
    }

    #[test]
    fn too_few_qubits_abort() {
        let cfg = SessionConfig {
            n_qubits: 300,
            check_fraction: 0.1,
            ..SessionConfig::default()
        };
        let t = run_session(&cfg, &ChannelModel::NOISELESS, &mut NullAdversary, &RandomSource::new(1, 0))
            .unwrap();
        assert_eq!(t.abort_reason, Some(AbortReason::InsufficientSiftedBits));
    }

    #[test]
    fn zero_fraction_attacker_is_bitwise_neutral() {
        let cfg = SessionConfig::with_qubits(5000);
        let ch = ChannelModel::new(0.02, 0.05).unwrap();
        let rng = RandomSource::new(12, 3);
        let clean = run_session(&cfg, &ch, &mut NullAdversary, &rng).unwrap();
        let mut idle = InterceptResend::new(InterceptResendParams {
            fraction: 0.0,
            ..InterceptResendParams::full()
        });
        let watched = run_session(&cfg, &ch, &mut idle, &rng).unwrap();
        assert_eq!(clean, watched);
    }

    #[test]
    fn monotone_abort_in_threshold() {
        let ch = ChannelModel::new(0.08, 0.0).unwrap();
        for seed in 0..10 {
            let rng = RandomSource::new(seed, 0);
            let mut prev_aborted = false;
            // Descending thresholds: once aborted, stays aborted.
            for t in [0.2, 0.12, 0.1, 0.09, 0.08, 0.07, 0.05, 0.01] {
                let cfg = SessionConfig {
                    n_qubits: 4000,
                    qber_abort_threshold: t,
                    ..SessionConfig::default()
                };
                let tr = run_session(&cfg, &ch, &mut NullAdversary, &rng).unwrap();
                if prev_aborted {
                    assert!(tr.aborted, "seed {seed} threshold {t}");
                }
                prev_aborted = tr.aborted;
            }
        }
    }
}
