//! Lab configuration: JSON in, fully defaulted and validated config out.

use std::collections::BTreeMap;
use std::path::Path;

use qrt_core::bb84::SessionConfig;
use qrt_core::monitor::{DetectorSettings, MIN_CALIBRATION_SESSIONS};
use qrt_core::redteam::campaign::{AdversarySpec, MonitorSettings, Scenario};
use qrt_core::ChannelModel;
use qrt_pqc::lwe::LweParams;
use qrt_pqc::registry::builtin;
use qrt_stateproof::Threshold;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;
pub const OUTPUT_DIR_ENV: &str = "QRT_OUTPUT_DIR";

fn schema_version() -> u32 {
    SCHEMA_VERSION
}
fn default_output_dir() -> String {
    "qrt-output".into()
}
fn default_hash() -> String {
    "sha256".into()
}
fn default_sessions() -> usize {
    100
}
fn default_calibration_sessions() -> usize {
    30
}
fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabConfig {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub master_seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
    #[serde(default)]
    pub full_transcripts: bool,
    /// Name of the 256-bit hash behind every post-quantum digest.
    #[serde(default = "default_hash")]
    pub hash: String,
    #[serde(default)]
    pub monitor: MonitorConfig,
    #[serde(default)]
    pub scenarios: Vec<ScenarioConfig>,
    #[serde(default)]
    pub pqc: Option<PqcConfig>,
    #[serde(default)]
    pub stateproof: Option<StateProofConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonitorConfig {
    #[serde(default = "default_calibration_sessions")]
    pub calibration_sessions: usize,
    #[serde(default)]
    pub calibration_channel: Option<ChannelModel>,
    #[serde(default)]
    pub detectors: DetectorSettings,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        Self {
            calibration_sessions: default_calibration_sessions(),
            calibration_channel: None,
            detectors: DetectorSettings::default(),
        }
    }
}

impl MonitorConfig {
    pub fn settings(&self) -> MonitorSettings {
        MonitorSettings {
            calibration_sessions: self.calibration_sessions,
            calibration_channel: self.calibration_channel,
            detectors: self.detectors,
        }
    }
}

fn null_adversary() -> AdversarySpec {
    AdversarySpec::Null
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub channel: ChannelModel,
    #[serde(default = "null_adversary")]
    pub adversary: AdversarySpec,
    #[serde(default)]
    pub session: SessionConfig,
    #[serde(default = "default_sessions")]
    pub sessions: usize,
}

impl ScenarioConfig {
    pub fn scenario(&self) -> Scenario {
        Scenario {
            name: self.name.clone(),
            channel: self.channel,
            adversary: self.adversary.clone(),
            session: self.session.clone(),
            sessions: self.sessions,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PqcConfig {
    /// Self-generated KATs, written to the output directory and replayed.
    #[serde(default)]
    pub kat: Vec<KatGenConfig>,
    /// Existing KAT files replayed against a scheme.
    #[serde(default)]
    pub kat_files: Vec<KatFileConfig>,
    #[serde(default)]
    pub attacks: Vec<AttackConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KatGenConfig {
    pub scheme: String,
    pub records: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KatFileConfig {
    pub scheme: String,
    pub path: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessagePair {
    /// All-zero and all-one digests: every target is covered.
    Complementary,
    /// The same random digest twice.
    Identical,
    /// Two independent random digests.
    Random,
}

fn complementary() -> MessagePair {
    MessagePair::Complementary
}
fn default_merkle_depth() -> u32 {
    3
}
fn default_merkle_signatures() -> usize {
    3
}
fn demo_lwe() -> LweParams {
    LweParams::DEMO
}
fn default_budget() -> u64 {
    1_000_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AttackConfig {
    OtsReuse {
        #[serde(default = "complementary")]
        messages: MessagePair,
    },
    MerkleForgery {
        #[serde(default = "default_merkle_depth")]
        depth: u32,
        #[serde(default = "default_merkle_signatures")]
        signatures: usize,
    },
    LweBruteforce {
        #[serde(default = "demo_lwe")]
        params: LweParams,
        #[serde(default = "default_budget")]
        budget: u64,
    },
}

fn default_stakes() -> Vec<u64> {
    vec![10; 10]
}
fn default_sp_depth() -> u32 {
    5
}
fn default_epochs() -> usize {
    10
}
fn default_cadence() -> u64 {
    qrt_stateproof::DEFAULT_CADENCE
}
fn default_tau() -> f64 {
    0.75
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateProofConfig {
    #[serde(default = "default_stakes")]
    pub stakes: Vec<u64>,
    #[serde(default = "default_sp_depth")]
    pub merkle_depth: u32,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_cadence")]
    pub cadence: u64,
    #[serde(default = "default_tau")]
    pub tau: f64,
    /// Write `chain.json` and `registry.json` next to the report.
    #[serde(default = "yes")]
    pub write_files: bool,
    #[serde(default)]
    pub time_travel: Vec<TimeTravelConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeTravelConfig {
    pub adversary_stake_fraction: f64,
    #[serde(default = "yes")]
    pub classical_forgery: bool,
    pub target_round: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FieldError {
    pub path: String,
    pub message: String,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error at {path} (line {line}, column {column}): {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{} validation error(s):\n{}", .0.len(), render_errors(.0))]
    Invalid(Vec<FieldError>),
}

fn render_errors(errs: &[FieldError]) -> String {
    errs.iter()
        .map(|e| format!("  {}: {}", e.path, e.message))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn parse_config(text: &str) -> Result<LabConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        ConfigError::Parse {
            path,
            line: inner.line(),
            column: inner.column(),
            message: inner.to_string(),
        }
    })
}

/// Reads, applies the output-directory override and validates.
pub fn load_config(path: &Path) -> Result<LabConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut cfg = parse_config(&text)?;
    if let Ok(dir) = std::env::var(OUTPUT_DIR_ENV) {
        if !dir.is_empty() {
            cfg.output_dir = dir;
        }
    }
    let errs = validate(&cfg);
    if errs.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError::Invalid(errs))
    }
}

/// Every violation, not just the first.
pub fn validate(cfg: &LabConfig) -> Vec<FieldError> {
    let mut errs = Vec::new();
    let mut err = |path: String, message: String| errs.push(FieldError { path, message });

    if cfg.schema_version != SCHEMA_VERSION {
        err(
            "schema_version".into(),
            format!("unsupported version {} (expected {SCHEMA_VERSION})", cfg.schema_version),
        );
    }
    if qrt_pqc::hash::hash_by_name(&cfg.hash).is_none() {
        err("hash".into(), format!("unknown hash function {:?}", cfg.hash));
    }
    if cfg.output_dir.is_empty() {
        err("output_dir".into(), "must not be empty".into());
    }

    let m = &cfg.monitor;
    if m.calibration_sessions < MIN_CALIBRATION_SESSIONS {
        err(
            "monitor.calibration_sessions".into(),
            format!("must be at least {MIN_CALIBRATION_SESSIONS}, got {}", m.calibration_sessions),
        );
    }
    if let Some(ch) = &m.calibration_channel {
        if let Err(e) = ch.validate() {
            err(format!("monitor.calibration_channel.{}", e.field), e.to_string());
        }
    }
    for (name, v) in [
        ("z_threshold", m.detectors.z_threshold),
        ("cusum_k", m.detectors.cusum_k),
        ("cusum_h", m.detectors.cusum_h),
    ] {
        if let Some(x) = v {
            if !(x.is_finite() && x > 0.0) {
                err(format!("monitor.detectors.{name}"), format!("must be positive, got {x}"));
            }
        }
    }

    let mut first_by_name: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, s) in cfg.scenarios.iter().enumerate() {
        let at = |f: &str| format!("scenarios[{i}].{f}");
        if s.name.trim().is_empty() {
            err(at("name"), "must not be empty".into());
        } else if let Some(j) = first_by_name.get(s.name.as_str()) {
            err(
                at("name"),
                format!("duplicate scenario name {:?} (also scenarios[{j}].name)", s.name),
            );
        } else {
            first_by_name.insert(&s.name, i);
        }
        if let Err(e) = s.channel.validate() {
            err(at(&format!("channel.{}", e.field)), e.to_string());
        }
        if let Err(e) = s.adversary.validate() {
            err(at("adversary"), e);
        }
        for (field, msg) in s.session.violations() {
            err(at(&format!("session.{field}")), msg);
        }
        if s.sessions == 0 {
            err(at("sessions"), "must be positive".into());
        }
    }

    if let Some(p) = &cfg.pqc {
        for (i, k) in p.kat.iter().enumerate() {
            if let Err(e) = builtin(&k.scheme) {
                err(format!("pqc.kat[{i}].scheme"), e.to_string());
            }
            if k.records > 10_000 {
                err(format!("pqc.kat[{i}].records"), format!("at most 10000, got {}", k.records));
            }
        }
        for (i, k) in p.kat_files.iter().enumerate() {
            if let Err(e) = builtin(&k.scheme) {
                err(format!("pqc.kat_files[{i}].scheme"), e.to_string());
            }
        }
        for (i, a) in p.attacks.iter().enumerate() {
            let at = |f: &str| format!("pqc.attacks[{i}].{f}");
            match a {
                AttackConfig::OtsReuse { .. } => {}
                AttackConfig::MerkleForgery { depth, signatures } => {
                    if !(1..=qrt_pqc::merkle::MAX_DEPTH).contains(depth) {
                        err(at("depth"), format!("must lie in [1, 16], got {depth}"));
                    } else if *signatures == 0 || *signatures as u64 > 1u64 << depth {
                        err(at("signatures"), format!("must lie in [1, {}]", 1u64 << depth));
                    }
                }
                AttackConfig::LweBruteforce { params, .. } => {
                    if let Err(e) = params.validate() {
                        err(at("params"), e.to_string());
                    }
                }
            }
        }
    }

    if let Some(sp) = &cfg.stateproof {
        let at = |f: &str| format!("stateproof.{f}");
        if sp.stakes.is_empty() || sp.stakes.iter().all(|&s| s == 0) {
            err(at("stakes"), "need at least one positive stake".into());
        }
        if !(1..=qrt_pqc::merkle::MAX_DEPTH).contains(&sp.merkle_depth) {
            err(at("merkle_depth"), format!("must lie in [1, 16], got {}", sp.merkle_depth));
        } else if sp.epochs as u64 * 2 > 1u64 << sp.merkle_depth {
            err(
                at("epochs"),
                format!(
                    "{} epochs plus a full rewrite need {} leaves; depth {} has {}",
                    sp.epochs,
                    2 * sp.epochs,
                    sp.merkle_depth,
                    1u64 << sp.merkle_depth
                ),
            );
        }
        if sp.epochs == 0 {
            err(at("epochs"), "must be positive".into());
        }
        if sp.cadence == 0 {
            err(at("cadence"), "must be positive".into());
        }
        if let Err(e) = Threshold::try_from(sp.tau) {
            err(at("tau"), e.to_string());
        }
        for (i, t) in sp.time_travel.iter().enumerate() {
            if !(0.0..=1.0).contains(&t.adversary_stake_fraction) {
                err(
                    at(&format!("time_travel[{i}].adversary_stake_fraction")),
                    format!("must lie in [0, 1], got {}", t.adversary_stake_fraction),
                );
            }
            let last = sp.epochs as u64 * sp.cadence;
            if sp.cadence == 0 || t.target_round % sp.cadence != 0 || t.target_round == 0 || t.target_round > last {
                err(
                    at(&format!("time_travel[{i}].target_round")),
                    format!("must be a multiple of the cadence in [{}, {last}]", sp.cadence),
                );
            }
        }
    }
    errs
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config(r#"{"master_seed": 7, "scenarios": [{"name": "a"}]}"#).unwrap();
        assert!(validate(&cfg).is_empty());
        let s = &cfg.scenarios[0];
        assert_eq!(s.sessions, 100);
        assert_eq!(s.session, SessionConfig::default());
        assert_eq!(s.channel, ChannelModel::NOISELESS);
        assert_eq!(s.adversary, AdversarySpec::Null);
        assert_eq!(cfg.output_dir, "qrt-output");
        assert_eq!(cfg.monitor.calibration_sessions, 30);
        assert!(cfg.pqc.is_none() && cfg.stateproof.is_none());
    }

    #[test]
    fn range_error_names_field_path() {
        let cfg = parse_config(
            r#"{"master_seed": 1, "scenarios": [{"name": "a", "channel": {"flip_probability": 1.5}}]}"#,
        )
        .unwrap();
        let errs = validate(&cfg);
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].path, "scenarios[0].channel.flip_probability");
    }

    #[test]
    fn duplicates_and_multiple_errors_all_reported() {
        let cfg = parse_config(
            r#"{"master_seed": 1, "hash": "md5", "scenarios": [
                {"name": "a"}, {"name": "a", "sessions": 0, "session": {"check_fraction": 2.0}}]}"#,
        )
        .unwrap();
        let paths: Vec<String> = validate(&cfg).into_iter().map(|e| e.path).collect();
        assert_eq!(
            paths,
            [
                "hash",
                "scenarios[1].name",
                "scenarios[1].session.check_fraction",
                "scenarios[1].sessions"
            ]
        );
        let e = validate(&cfg);
        assert!(e[1].message.contains("scenarios[0].name"));
    }

    #[test]
    fn parse_errors_carry_location() {
        let err = parse_config(r#"{"master_seed": 1, "scenarios": [{"name": "a", "bogus": 1}]}"#)
            .unwrap_err();
        match err {
            ConfigError::Parse { path, line, .. } => {
                assert_eq!(path, "scenarios[0].bogus");
                assert_eq!(line, 1);
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn adversary_specs_parse() {
        let cfg = parse_config(
            r#"{"master_seed": 1, "scenarios": [
                {"name": "ir", "adversary": {"kind": "intercept_resend", "fraction": 1.0}},
                {"name": "ad", "adversary": {"kind": "adaptive", "epsilon": 0.1,
                  "arms": [{"kind": "null"}, {"kind": "intercept_resend", "fraction": 0.5, "basis_policy": "random"}]}}]}"#,
        )
        .unwrap();
        assert!(validate(&cfg).is_empty(), "{:?}", validate(&cfg));
    }

    #[test]
    fn stateproof_section_checks() {
        let cfg = parse_config(
            r#"{"master_seed": 1, "stateproof": {"tau": 0.4, "epochs": 20, "merkle_depth": 5,
                "time_travel": [{"adversary_stake_fraction": 0.3, "target_round": 150}]}}"#,
        )
        .unwrap();
        let paths: Vec<String> = validate(&cfg).into_iter().map(|e| e.path).collect();
        assert_eq!(
            paths,
            ["stateproof.epochs", "stateproof.tau", "stateproof.time_travel[0].target_round"]
        );
    }
}
