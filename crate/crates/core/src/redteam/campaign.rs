//! Campaigns: scenarios of repeated sessions, aggregated into a report with
//! the defender's alerts attached.
//!
//! Streams derive from `(master_seed, scenario name, session index)`, so a
//! report is a pure function of its [`Campaign`] and a scenario's results do
//! not depend on which other scenarios run beside it. Scenarios and the sessions of
//! non-learning scenarios run in parallel; results merge in index order.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adversary::{Adversary, EveRecord, StrategySpec};
use super::bandit::{session_reward, AdaptiveAdversary, BanditState};
use super::info::eve_information;
use super::RedTeamError;
use crate::bb84::{run_session, SessionConfig, SessionTranscript};
use crate::monitor::{calibrate, Alert, BaselineModel, DetectorSettings, Monitor, Severity};
use crate::quantum::ChannelModel;
use crate::rng::RandomSource;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AdversarySpec {
    Null,
    InterceptResend(super::intercept::InterceptResendParams),
    Adaptive { epsilon: f64, arms: Vec<StrategySpec> },
}

impl AdversarySpec {
    pub fn validate(&self) -> Result<(), String> {
        match self {
            AdversarySpec::Null => Ok(()),
            AdversarySpec::InterceptResend(p) => p.validate(),
            AdversarySpec::Adaptive { epsilon, arms } => {
                if !(0.0..=1.0).contains(epsilon) {
                    return Err(format!("epsilon must lie in [0, 1], got {epsilon}"));
                }
                if arms.is_empty() {
                    return Err("adaptive adversary needs at least one arm".into());
                }
                arms.iter().try_for_each(StrategySpec::validate)
            }
        }
    }

    fn fixed(&self) -> Option<StrategySpec> {
        match self {
            AdversarySpec::Null => Some(StrategySpec::Null),
            AdversarySpec::InterceptResend(p) => Some(StrategySpec::InterceptResend(*p)),
            AdversarySpec::Adaptive { .. } => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AdversarySpec::Null => "null",
            AdversarySpec::InterceptResend(_) => "intercept_resend",
            AdversarySpec::Adaptive { .. } => "adaptive",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub channel: ChannelModel,
    pub adversary: AdversarySpec,
    pub session: SessionConfig,
    pub sessions: usize,
}

/// How each scenario's baseline is fitted: `calibration_sessions` clean runs
/// (null adversary) on `calibration_channel`, or on the scenario's own channel
/// when unset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitorSettings {
    pub calibration_sessions: usize,
    pub calibration_channel: Option<ChannelModel>,
    pub detectors: DetectorSettings,
}

impl Default for MonitorSettings {
    fn default() -> Self {
        Self {
            calibration_sessions: 30,
            calibration_channel: None,
            detectors: DetectorSettings::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Campaign {
    pub master_seed: u64,
    pub scenarios: Vec<Scenario>,
    pub monitor: MonitorSettings,
    pub full_transcripts: bool,
    /// Starting arm statistics for adaptive scenarios, keyed by scenario name.
    pub bandit_resume: BTreeMap<String, BanditState>,
}

impl Campaign {
    pub fn new(master_seed: u64, scenarios: Vec<Scenario>) -> Self {
        Self {
            master_seed,
            scenarios,
            monitor: MonitorSettings::default(),
            full_transcripts: false,
            bandit_resume: BTreeMap::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub index: usize,
    pub qber: Option<f64>,
    pub sifted: usize,
    pub aborted: bool,
    pub abort_reason: Option<String>,
    pub leakage_bits: usize,
    pub final_key_length: usize,
    pub keys_agree: bool,
    pub eve_information: f64,
    pub alert: Option<Severity>,
    /// Arm played, for adaptive scenarios.
    pub arm: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionDetail {
    pub transcript: SessionTranscript,
    pub ledger: Vec<EveRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub strategy: StrategySpec,
    pub pulls: u64,
    pub mean_reward: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BanditSummary {
    pub epsilon: f64,
    pub arms: Vec<ArmSummary>,
    pub state: BanditState,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub name: String,
    pub adversary: String,
    pub sessions: usize,
    pub n_qubits: usize,
    pub abort_rate: f64,
    pub abort_reasons: BTreeMap<String, usize>,
    pub qber_mean: Option<f64>,
    pub qber_var: Option<f64>,
    pub mean_sifted_fraction: f64,
    pub mean_leakage_bits: f64,
    /// Averaged over completed sessions; `None` when every session aborted.
    pub mean_final_key_length: Option<f64>,
    /// Final key bits per transmitted qubit across all sessions.
    pub key_rate: f64,
    pub eve_information_mean: f64,
    pub key_agreement_failures: usize,
    pub baseline: BaselineModel,
    pub detection_rate: f64,
    pub detections: Vec<Alert>,
    pub per_session: Vec<SessionSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandit: Option<BanditSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcripts: Option<Vec<SessionDetail>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub master_seed: u64,
    pub scenarios: Vec<ScenarioReport>,
}

impl CampaignReport {
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

struct Played {
    transcript: SessionTranscript,
    ledger: Vec<EveRecord>,
    eve_information: f64,
    arm: Option<usize>,
}

fn play(
    cfg: &SessionConfig,
    ch: &ChannelModel,
    adv: &mut dyn Adversary,
    rng: &RandomSource,
) -> Result<Played, RedTeamError> {
    let transcript = run_session(cfg, ch, adv, rng)?;
    let eve = eve_information(&transcript, adv.ledger())?;
    Ok(Played {
        transcript,
        ledger: adv.ledger().to_vec(),
        eve_information: eve,
        arm: None,
    })
}

fn fit_baseline(
    sc: &Scenario,
    settings: &MonitorSettings,
    rng: &RandomSource,
) -> Result<BaselineModel, RedTeamError> {
    let ch = settings.calibration_channel.unwrap_or(sc.channel);
    let clean: Vec<(Option<f64>, usize)> = (0..settings.calibration_sessions)
        .into_par_iter()
        .map(|j| {
            let mut null = super::adversary::NullAdversary;
            let t = run_session(&sc.session, &ch, &mut null, &rng.derive("calibration", j as u64))?;
            Ok((t.qber_estimate, t.disclosed_indices.len()))
        })
        .collect::<Result<_, RedTeamError>>()?;
    let samples: Vec<f64> = clean.iter().filter_map(|(q, _)| *q).collect();
    let checks: Vec<usize> = clean.iter().filter(|(q, _)| q.is_some()).map(|c| c.1).collect();
    let n_check = if checks.is_empty() {
        0
    } else {
        (checks.iter().sum::<usize>() as f64 / checks.len() as f64).round() as usize
    };
    calibrate(&samples, n_check, &settings.detectors)
        .map_err(|e| RedTeamError::Calibration(sc.name.clone(), e))
}

fn run_scenario(sc: &Scenario, c: &Campaign) -> Result<ScenarioReport, RedTeamError> {
    if sc.sessions == 0 {
        return Err(RedTeamError::InvalidScenario(format!(
            "{}: sessions must be at least 1",
            sc.name
        )));
    }
    sc.adversary
        .validate()
        .map_err(|e| RedTeamError::InvalidScenario(format!("{}: {e}", sc.name)))?;
    sc.session.validate()?;
    let root = RandomSource::new(c.master_seed, 0).derive(&format!("scenario/{}", sc.name), 0);
    let baseline = fit_baseline(sc, &c.monitor, &root)?;

    let mut bandit_summary = None;
    let played: Vec<Played> = match sc.adversary.fixed() {
        Some(spec) => (0..sc.sessions)
            .into_par_iter()
            .map(|j| {
                let mut adv = spec.build();
                play(&sc.session, &sc.channel, adv.as_mut(), &root.derive("session", j as u64))
            })
            .collect::<Result<_, _>>()?,
        None => {
            let AdversarySpec::Adaptive { epsilon, arms } = &sc.adversary else {
                unreachable!()
            };
            let mut learner = AdaptiveAdversary::new(arms.clone(), *epsilon, root.derive("bandit", 0));
            if let Some(st) = c.bandit_resume.get(&sc.name) {
                learner = learner
                    .with_state(st.clone())
                    .map_err(|e| RedTeamError::InvalidScenario(format!("{}: {e}", sc.name)))?;
            }
            let mut out = Vec::with_capacity(sc.sessions);
            for j in 0..sc.sessions {
                let arm = learner.select();
                let mut adv = learner.arm(arm).build();
                let mut p = play(&sc.session, &sc.channel, adv.as_mut(), &root.derive("session", j as u64))?;
                learner.update(arm, session_reward(&p.transcript, p.eve_information));
                p.arm = Some(arm);
                out.push(p);
            }
            let st = learner.state().clone();
            bandit_summary = Some(BanditSummary {
                epsilon: *epsilon,
                arms: arms
                    .iter()
                    .zip(st.pulls.iter().zip(&st.means))
                    .map(|(s, (&pulls, &mean))| ArmSummary {
                        strategy: s.clone(),
                        pulls,
                        mean_reward: mean,
                    })
                    .collect(),
                state: st,
            });
            out
        }
    };

    let mut monitor = Monitor::new(baseline.clone());
    let mut per_session = Vec::with_capacity(played.len());
    for (j, p) in played.iter().enumerate() {
        let t = &p.transcript;
        let alert = t
            .qber_estimate
            .and_then(|q| monitor.observe(j, q).map(|a| a.severity));
        per_session.push(SessionSummary {
            index: j,
            qber: t.qber_estimate,
            sifted: t.sifted_count(),
            aborted: t.aborted,
            abort_reason: t.abort_reason.map(|r| r.as_str().to_string()),
            leakage_bits: t.leakage_bits,
            final_key_length: t.final_key_length(),
            keys_agree: t.alice_final_key == t.bob_final_key,
            eve_information: p.eve_information,
            alert,
            arm: p.arm,
        });
    }

    let n = played.len() as f64;
    let qbers: Vec<f64> = per_session.iter().filter_map(|s| s.qber).collect();
    let (qber_mean, qber_var) = if qbers.is_empty() {
        (None, None)
    } else {
        let m = qbers.iter().sum::<f64>() / qbers.len() as f64;
        let v = qbers.iter().map(|q| (q - m).powi(2)).sum::<f64>() / qbers.len() as f64;
        (Some(m), Some(v))
    };
    let mut abort_reasons = BTreeMap::new();
    for s in &per_session {
        if let Some(r) = &s.abort_reason {
            *abort_reasons.entry(r.clone()).or_insert(0) += 1;
        }
    }
    let completed: Vec<&SessionSummary> = per_session.iter().filter(|s| !s.aborted).collect();
    let total_key_bits: usize = per_session.iter().map(|s| s.final_key_length).sum();
    let detections = monitor.into_alerts();
    let alerted = per_session.iter().filter(|s| s.alert.is_some()).count();

    Ok(ScenarioReport {
        name: sc.name.clone(),
        adversary: sc.adversary.name().to_string(),
        sessions: played.len(),
        n_qubits: sc.session.n_qubits,
        abort_rate: (played.len() - completed.len()) as f64 / n,
        abort_reasons,
        qber_mean,
        qber_var,
        mean_sifted_fraction: per_session.iter().map(|s| s.sifted as f64).sum::<f64>()
            / (n * sc.session.n_qubits as f64),
        mean_leakage_bits: per_session.iter().map(|s| s.leakage_bits as f64).sum::<f64>() / n,
        mean_final_key_length: if completed.is_empty() {
            None
        } else {
            Some(
                completed.iter().map(|s| s.final_key_length as f64).sum::<f64>()
                    / completed.len() as f64,
            )
        },
        key_rate: total_key_bits as f64 / (n * sc.session.n_qubits as f64),
        eve_information_mean: per_session.iter().map(|s| s.eve_information).sum::<f64>() / n,
        key_agreement_failures: completed.iter().filter(|s| !s.keys_agree).count(),
        baseline,
        detection_rate: alerted as f64 / n,
        detections,
        per_session,
        bandit: bandit_summary,
        transcripts: c.full_transcripts.then(|| {
            played
                .into_iter()
                .map(|p| SessionDetail {
                    transcript: p.transcript,
                    ledger: p.ledger,
                })
                .collect()
        }),
    })
}

/// Plays every scenario and aggregates the results. Session aborts are data;
/// only structural problems are errors.
pub fn run_campaign(c: &Campaign) -> Result<CampaignReport, RedTeamError> {
    if c.scenarios.is_empty() {
        return Err(RedTeamError::InvalidScenario("campaign has no scenarios".into()));
    }
    let mut names = std::collections::BTreeSet::new();
    if let Some(dup) = c.scenarios.iter().find(|s| !names.insert(s.name.as_str())) {
        return Err(RedTeamError::InvalidScenario(format!(
            "duplicate scenario name {:?}",
            dup.name
        )));
    }
    let scenarios = c
        .scenarios
        .par_iter()
        .map(|sc| run_scenario(sc, c))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CampaignReport {
        master_seed: c.master_seed,
        scenarios,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::redteam::intercept::InterceptResendParams;

    fn scenario(name: &str, adversary: AdversarySpec, n: usize, sessions: usize) -> Scenario {
        Scenario {
            name: name.into(),
            channel: ChannelModel::NOISELESS,
            adversary,
            session: SessionConfig::with_qubits(n),
            sessions,
        }
    }

    #[test]
    fn clean_campaign_is_quiet() {
        let c = Campaign::new(1, vec![scenario("clean", AdversarySpec::Null, 4000, 10)]);
        let r = run_campaign(&c).unwrap();
        let s = &r.scenarios[0];
        assert_eq!(s.abort_rate, 0.0);
        assert_eq!(s.eve_information_mean, 0.0);
        assert_eq!(s.detection_rate, 0.0);
        assert_eq!(s.key_agreement_failures, 0);
        assert!(s.detections.is_empty());
    }

    #[test]
    fn replay_is_byte_identical() {
        let c = Campaign::new(
            9,
            vec![
                scenario("a", AdversarySpec::Null, 3000, 5),
                scenario(
                    "b",
                    AdversarySpec::Adaptive {
                        epsilon: 0.2,
                        arms: vec![
                            StrategySpec::Null,
                            StrategySpec::InterceptResend(InterceptResendParams {
                                fraction: 0.2,
                                ..InterceptResendParams::full()
                            }),
                        ],
                    },
                    3000,
                    6,
                ),
            ],
        );
        let a = run_campaign(&c).unwrap().to_canonical_json();
        let b = run_campaign(&c).unwrap().to_canonical_json();
        assert_eq!(a, b);
    }

    #[test]
    fn full_attack_is_seen() {
        let c = Campaign::new(
            5,
            vec![
                scenario("clean", AdversarySpec::Null, 10_000, 20),
                scenario(
                    "eve",
                    AdversarySpec::InterceptResend(InterceptResendParams::full()),
                    10_000,
                    20,
                ),
            ],
        );
        let r = run_campaign(&c).unwrap();
        let eve = &r.scenarios[1];
        assert!((eve.qber_mean.unwrap() - 0.25).abs() <= 0.02);
        assert_eq!(eve.detection_rate, 1.0);
        assert_eq!(eve.abort_rate, 1.0);
        assert_eq!(r.scenarios[0].detection_rate, 0.0);
    }

    #[test]
    fn rejects_bad_scenarios() {
        let c = Campaign::new(1, vec![scenario("x", AdversarySpec::Null, 4000, 0)]);
        assert!(run_campaign(&c).is_err());
        assert!(run_campaign(&Campaign::new(1, vec![])).is_err());
        let c = Campaign::new(
            1,
            vec![scenario(
                "x",
                AdversarySpec::Adaptive {
                    epsilon: 0.1,
                    arms: vec![],
                },
                4000,
                2,
            )],
        );
        assert!(run_campaign(&c).is_err());
        let c = Campaign::new(
            1,
            vec![
                scenario("x", AdversarySpec::Null, 4000, 1),
                scenario("x", AdversarySpec::Null, 4000, 1),
            ],
        );
        assert!(run_campaign(&c).is_err());
    }

    #[test]
    fn scenario_results_ignore_their_neighbours() {
        let a = scenario("a", AdversarySpec::Null, 2000, 3);
        let b = scenario("b", AdversarySpec::InterceptResend(InterceptResendParams::full()), 2000, 3);
        let both = run_campaign(&Campaign::new(4, vec![a.clone(), b.clone()])).unwrap();
        let alone = run_campaign(&Campaign::new(4, vec![b])).unwrap();
        assert_eq!(both.scenarios[1], alone.scenarios[0]);
    }

    #[test]
    fn full_transcripts_are_attached_on_request() {
        let mut c = Campaign::new(
            3,
            vec![scenario(
                "eve",
                AdversarySpec::InterceptResend(InterceptResendParams::full()),
                2000,
                2,
            )],
        );
        assert!(run_campaign(&c).unwrap().scenarios[0].transcripts.is_none());
        c.full_transcripts = true;
        let r = run_campaign(&c).unwrap();
        let ts = r.scenarios[0].transcripts.as_ref().unwrap();
        assert_eq!(ts.len(), 2);
        assert_eq!(ts[0].ledger.len(), 2000);
    }
}
