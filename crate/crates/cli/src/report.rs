//! Lab report: the JSON artifact and its Markdown rendering.

use std::fmt::Write as _;

use qrt_core::redteam::CampaignReport;
use qrt_pqc::kat::KatSummary;
use qrt_pqc::registry::SchemeDescriptor;
use qrt_pqc::Verdict;
use qrt_stateproof::proof::ProofSize;
use qrt_stateproof::{Threshold, TimeTravelReport};
use serde::{Deserialize, Serialize};

use crate::config::LabConfig;
use crate::preflight::PreflightReport;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub master_seed: Option<u64>,
    /// Set when a structural failure stopped the run before every section ran.
    pub partial: bool,
    pub errors: Vec<String>,
    pub effective_config: Option<LabConfig>,
    pub preflight: Option<PreflightReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bb84: Option<CampaignReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pqc: Option<PqcReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stateproof: Option<StateProofReport>,
    pub not_applicable: Vec<NotApplicable>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NotApplicable {
    pub item: String,
    pub reason: String,
}

pub fn not_applicable() -> Vec<NotApplicable> {
    vec![
        NotApplicable {
            item: "model_training".into(),
            reason: "every adversary is a fixed or bandit-driven strategy; nothing is trained".into(),
        },
        NotApplicable {
            item: "reverse_engineering".into(),
            reason: "all attacks run against simulated components built by this tool".into(),
        },
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PqcReport {
    pub hash: String,
    pub schemes: Vec<SchemeDescriptor>,
    pub kat: Vec<KatReport>,
    pub attacks: Vec<AttackRow>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KatReport {
    /// `generated` or the KAT file path as configured.
    pub source: String,
    /// Written KAT file, relative to the output directory.
    pub file: Option<String>,
    pub summary: KatSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackRow {
    pub attack: String,
    pub scheme: String,
    pub parameters: serde_json::Value,
    pub verdict: Verdict,
    pub effort: u64,
    pub detail: String,
    /// Human-readable evidence, re-verified before the verdict was issued.
    pub evidence: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainCheck {
    pub origin: String,
    pub ok: bool,
    pub head_round: Option<u64>,
    pub proofs_verified: usize,
    pub proofs_skipped: usize,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateProofReport {
    pub validators: usize,
    pub total_stake: u64,
    pub merkle_depth: u32,
    pub epochs: usize,
    pub cadence: u64,
    pub tau: Threshold,
    pub tau_lint: Option<String>,
    pub chain_file: Option<String>,
    pub registry_file: Option<String>,
    pub chain_checks: Vec<ChainCheck>,
    pub proof_size: ProofSize,
    pub time_travel: Vec<TimeTravelReport>,
}

impl LabReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

fn opt(x: Option<f64>, digits: usize) -> String {
    x.map_or_else(|| "n/a".into(), |v| format!("{v:.digits$}"))
}

fn yn(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn cell(s: &str) -> String {
    s.replace('|', "\\|").replace('\n', " ")
}

/// Deterministic Markdown view of a report.
pub fn render_markdown(r: &LabReport) -> String {
    let mut s = String::new();
    let w = &mut s;
    writeln!(w, "# Lab report").unwrap();
    writeln!(w).unwrap();
    writeln!(w, "- Tool version: {}", r.tool_version).unwrap();
    writeln!(w, "- Report schema: {}", r.schema_version).unwrap();
    match r.master_seed {
        Some(seed) => writeln!(w, "- Master seed: {seed}").unwrap(),
        None => writeln!(w, "- Master seed: n/a").unwrap(),
    }
    writeln!(w, "- Status: {}", if r.partial { "PARTIAL" } else { "complete" }).unwrap();

    if !r.errors.is_empty() {
        writeln!(w, "\n## Errors\n").unwrap();
        for e in &r.errors {
            writeln!(w, "- {}", e.replace('\n', " ")).unwrap();
        }
    }

    if let Some(p) = &r.preflight {
        writeln!(w, "\n## Preflight\n").unwrap();
        writeln!(w, "| Check | Result | Detail |").unwrap();
        writeln!(w, "|---|---|---|").unwrap();
        for c in &p.checks {
            let res = if c.passed { "pass" } else { "FAIL" };
            writeln!(w, "| {} | {res} | {} |", c.name, cell(&c.detail)).unwrap();
        }
    }

    writeln!(w, "\n## BB84 campaign\n").unwrap();
    match r.bb84.as_ref().filter(|b| !b.scenarios.is_empty()) {
        None => writeln!(w, "No scenarios.").unwrap(),
        Some(b) => {
            writeln!(
                w,
                "| Scenario | Adversary | Sessions | QBER mean | QBER σ | Abort rate | Key rate | Eve info | Detections | Detection rate |"
            )
            .unwrap();
            writeln!(w, "|---|---|---|---|---|---|---|---|---|---|").unwrap();
            for sc in &b.scenarios {
                writeln!(
                    w,
                    "| {} | {} | {} | {} | {} | {:.4} | {:.4} | {:.4} | {} | {:.4} |",
                    cell(&sc.name),
                    sc.adversary,
                    sc.sessions,
                    opt(sc.qber_mean, 4),
                    opt(sc.qber_var.map(f64::sqrt), 4),
                    sc.abort_rate,
                    sc.key_rate,
                    sc.eve_information_mean,
                    sc.detections.len(),
                    sc.detection_rate,
                )
                .unwrap();
            }
            for sc in b.scenarios.iter().filter(|sc| sc.bandit.is_some()) {
                let bandit = sc.bandit.as_ref().unwrap();
                writeln!(w, "\n### Bandit arms: {}\n", sc.name).unwrap();
                writeln!(w, "| Arm | Strategy | Pulls | Mean reward |").unwrap();
                writeln!(w, "|---|---|---|---|").unwrap();
                for (i, a) in bandit.arms.iter().enumerate() {
                    let strategy = serde_json::to_string(&a.strategy).unwrap();
                    writeln!(w, "| {i} | `{}` | {} | {:.4} |", cell(&strategy), a.pulls, a.mean_reward)
                        .unwrap();
                }
            }
        }
    }

    writeln!(w, "\n## Post-quantum primitives\n").unwrap();
    match &r.pqc {
        None => writeln!(w, "Not configured.").unwrap(),
        Some(p) => {
            writeln!(w, "Hash: {}\n", p.hash).unwrap();
            writeln!(w, "| Scheme | Kind | Parameters | Note |").unwrap();
            writeln!(w, "|---|---|---|---|").unwrap();
            for d in &p.schemes {
                writeln!(
                    w,
                    "| {} | {} | `{}` | {} |",
                    d.name,
                    serde_json::to_value(d.kind).unwrap().as_str().unwrap_or(""),
                    cell(&d.parameter_set.to_string()),
                    cell(&d.security_note)
                )
                .unwrap();
            }
            if !p.kat.is_empty() {
                writeln!(w, "\n### Known-answer tests\n").unwrap();
                writeln!(w, "| Scheme | Source | Records | Passed | Result |").unwrap();
                writeln!(w, "|---|---|---|---|---|").unwrap();
                for k in &p.kat {
                    let res = if k.summary.all_passed() { "pass" } else { "FAIL" };
                    writeln!(
                        w,
                        "| {} | {} | {} | {} | {res} |",
                        k.summary.scheme,
                        cell(&k.source),
                        k.summary.records,
                        k.summary.passed
                    )
                    .unwrap();
                }
                for k in &p.kat {
                    for o in k.summary.outcomes.iter().filter(|o| !o.passed) {
                        let what = match &o.error {
                            Some(e) => e.clone(),
                            None => o
                                .diffs
                                .iter()
                                .map(|d| format!("{} differs", d.field))
                                .collect::<Vec<_>>()
                                .join(", "),
                        };
                        writeln!(w, "- {} record at line {}: {}", k.summary.scheme, o.line, what).unwrap();
                    }
                }
            }
            if !p.attacks.is_empty() {
                writeln!(w, "\n### Attacks\n").unwrap();
                writeln!(w, "| Attack | Scheme | Verdict | Effort | Detail |").unwrap();
                writeln!(w, "|---|---|---|---|---|").unwrap();
                for a in &p.attacks {
                    let v = match a.verdict {
                        Verdict::Broken => "BROKEN",
                        Verdict::Resisted => "resisted",
                    };
                    writeln!(w, "| {} | {} | {v} | {} | {} |", a.attack, a.scheme, a.effort, cell(&a.detail))
                        .unwrap();
                }
            }
        }
    }

    writeln!(w, "\n## State proofs\n").unwrap();
    match &r.stateproof {
        None => writeln!(w, "Not configured.").unwrap(),
        Some(sp) => {
            writeln!(
                w,
                "- Validators: {} (total stake {})",
                sp.validators, sp.total_stake
            )
            .unwrap();
            writeln!(w, "- Epochs: {} at cadence {}", sp.epochs, sp.cadence).unwrap();
            writeln!(w, "- Threshold: {}/{}", sp.tau.num(), sp.tau.den()).unwrap();
            if let Some(l) = &sp.tau_lint {
                writeln!(w, "- Threshold warning: {l}").unwrap();
            }
            writeln!(
                w,
                "- Proof size: {} bytes ({} per validator)",
                sp.proof_size.bytes, sp.proof_size.per_validator_bytes
            )
            .unwrap();
            writeln!(w, "\n| Verifier origin | Valid | Head round | Verified | Skipped |").unwrap();
            writeln!(w, "|---|---|---|---|---|").unwrap();
            for c in &sp.chain_checks {
                writeln!(
                    w,
                    "| {} | {} | {} | {} | {} |",
                    c.origin,
                    yn(c.ok),
                    c.head_round.map_or_else(|| "n/a".into(), |x| x.to_string()),
                    c.proofs_verified,
                    c.proofs_skipped
                )
                .unwrap();
            }
            if !sp.time_travel.is_empty() {
                writeln!(w, "\n### History rewrites\n").unwrap();
                writeln!(
                    w,
                    "| Target round | Adversary stake | Classical forgery | Accepted | Rejected at | Reasons | Assumption breached |"
                )
                .unwrap();
                writeln!(w, "|---|---|---|---|---|---|---|").unwrap();
                for t in &sp.time_travel {
                    writeln!(
                        w,
                        "| {} | {}/{} | {} | {} | {} | {} | {} |",
                        t.target_round,
                        t.adversary_stake.attested_stake,
                        t.adversary_stake.total_stake,
                        yn(t.classical_forgery),
                        yn(t.rewrite_accepted),
                        t.rejected_at.map_or_else(|| "n/a".into(), |x| x.to_string()),
                        if t.rejection_reasons.is_empty() {
                            "none".into()
                        } else {
                            t.rejection_reasons.join(", ")
                        },
                        yn(t.threshold_assumption_breached)
                    )
                    .unwrap();
                }
            }
        }
    }

    writeln!(w, "\n## Not applicable\n").unwrap();
    for n in &r.not_applicable {
        writeln!(w, "- {}: {}", n.item, n.reason).unwrap();
    }
    s
}

#[derive(Debug, thiserror::Error)]
#[error("report schema mismatch at {path}: {message}")]
pub struct ReportParseError {
    pub path: String,
    pub message: String,
}

pub fn parse_report(text: &str) -> Result<LabReport, ReportParseError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| ReportParseError {
        path: e.path().to_string(),
        message: e.into_inner().to_string(),
    })
}
