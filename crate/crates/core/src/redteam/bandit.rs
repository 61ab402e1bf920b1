//! Epsilon-greedy arm selection over adversary parameterizations.
//!
//! Arm estimates are running means:
//!
//! ```text
//! mean[i] <- mean[i] + (reward - mean[i]) / pulls[i]
//! ```

use serde::{Deserialize, Serialize};

use super::adversary::StrategySpec;
use crate::bb84::SessionTranscript;
use crate::rng::RandomSource;

/// Per-arm statistics; persisted across campaigns by `--resume-bandit`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BanditState {
    pub means: Vec<f64>,
    pub pulls: Vec<u64>,
}

impl BanditState {
    pub fn new(arms: usize) -> Self {
        Self {
            means: vec![0.0; arms],
            pulls: vec![0; arms],
        }
    }

    pub fn total_pulls(&self) -> u64 {
        self.pulls.iter().sum()
    }
}

/// Index of the largest mean; ties go to the lowest index.
pub fn greedy_arm(means: &[f64]) -> usize {
    let mut best = 0;
    for (i, &m) in means.iter().enumerate().skip(1) {
        if m > means[best] {
            best = i;
        }
    }
    best
}

/// Explores uniformly with probability `epsilon`, otherwise exploits.
///
/// Always consumes one draw for the explore decision and one more when
/// exploring. Panics when there are no arms.
pub fn bandit_select(state: &BanditState, epsilon: f64, rng: &mut RandomSource) -> usize {
    assert!(!state.means.is_empty(), "bandit needs at least one arm");
    if rng.chance(epsilon) {
        rng.below(state.means.len() as u64) as usize
    } else {
        greedy_arm(&state.means)
    }
}

pub fn bandit_update(state: &mut BanditState, arm: usize, reward: f64) {
    state.pulls[arm] += 1;
    let n = state.pulls[arm] as f64;
    state.means[arm] += (reward - state.means[arm]) / n;
}

/// Red-team reward: key knowledge times key yield, zero when the session
/// aborted (the attacker was caught).
pub fn session_reward(t: &SessionTranscript, eve_information: f64) -> f64 {
    if t.aborted || t.n_qubits == 0 {
        return 0.0;
    }
    eve_information * t.final_key_length() as f64 / t.n_qubits as f64
}

/// A learning adversary choosing among fixed strategies session by session.
#[derive(Clone, Debug)]
pub struct AdaptiveAdversary {
    arms: Vec<StrategySpec>,
    epsilon: f64,
    state: BanditState,
    rng: RandomSource,
}

impl AdaptiveAdversary {
    pub fn new(arms: Vec<StrategySpec>, epsilon: f64, rng: RandomSource) -> Self {
        assert!(!arms.is_empty(), "bandit needs at least one arm");
        let state = BanditState::new(arms.len());
        Self {
            arms,
            epsilon,
            state,
            rng,
        }
    }

    /// Replaces the arm statistics, e.g. with a state saved by an earlier run.
    pub fn with_state(mut self, state: BanditState) -> Result<Self, String> {
        if state.means.len() != self.arms.len() || state.pulls.len() != self.arms.len() {
            return Err(format!(
                "bandit state has {} means / {} pulls for {} arms",
                state.means.len(),
                state.pulls.len(),
                self.arms.len()
            ));
        }
        self.state = state;
        Ok(self)
    }

    pub fn select(&mut self) -> usize {
        bandit_select(&self.state, self.epsilon, &mut self.rng)
    }

    pub fn update(&mut self, arm: usize, reward: f64) {
        bandit_update(&mut self.state, arm, reward);
    }

    pub fn arm(&self, i: usize) -> &StrategySpec {
        &self.arms[i]
    }

    pub fn arms(&self) -> &[StrategySpec] {
        &self.arms
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn state(&self) -> &BanditState {
        &self.state
    }
}
