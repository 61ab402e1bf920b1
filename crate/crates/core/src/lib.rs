//! Simulation core of the quantum red-team lab: the qubit and channel model,
//! BB84 sessions, adversaries and campaigns, and the QBER monitor.

pub mod bb84;
pub mod bits;
pub mod monitor;
pub mod quantum;
pub mod redteam;
pub mod rng;

pub use bits::BitString;
pub use quantum::{Basis, ChannelModel, QubitState};
pub use rng::RandomSource;
