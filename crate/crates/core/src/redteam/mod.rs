//! Adversary strategies, eavesdropper accounting, the learning adversary and
//! the campaign runner.

pub mod adversary;
pub mod bandit;
pub mod campaign;
pub mod info;
pub mod intercept;

pub use adversary::{Adversary, ClassicalMessage, EveAction, EveRecord, NullAdversary, StrategySpec};
pub use bandit::{bandit_select, bandit_update, session_reward, AdaptiveAdversary, BanditState};
pub use campaign::{
    run_campaign, AdversarySpec, Campaign, CampaignReport, MonitorSettings, Scenario,
    ScenarioReport,
};
pub use info::eve_information;
pub use intercept::{apply_intercept_resend, BasisPolicy, InterceptResend, InterceptResendParams};

use crate::bb84::Bb84Error;
use crate::monitor::MonitorError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RedTeamError {
    #[error("structural error: {0}")]
    Structural(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("calibration of scenario {0} failed: {1}")]
    Calibration(String, MonitorError),
    #[error(transparent)]
    Session(#[from] Bb84Error),
}
