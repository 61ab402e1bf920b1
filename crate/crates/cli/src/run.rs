//! End-to-end lab run: preflight, campaign, primitives, state proofs, report.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use qrt_core::redteam::{run_campaign, BanditState, Campaign, CampaignReport};
use qrt_core::RandomSource;
use qrt_pqc::attacks::{attack_lwe_bruteforce, attack_merkle_forgery, attack_ots_reuse, AttackOutcome, Evidence};
use qrt_pqc::hash::{Digest, HashFunction};
use qrt_pqc::kat::{format_kat, generate_kat, parse_kat, run_kat};
use qrt_pqc::lamport::{lamport_keygen, lamport_sign};
use qrt_pqc::lwe::lwe_keygen;
use qrt_pqc::merkle::{merkle_keygen, merkle_sign};
use qrt_pqc::registry::SchemeRegistry;
use qrt_stateproof::chain::build_honest_chain;
use qrt_stateproof::{
    proof_size_metric, simulate_time_travel_attack, verify_chain, Committee, StateProof, Threshold,
    VerifierCheckpoint,
};

use crate::config::{AttackConfig, LabConfig, MessagePair, PqcConfig, StateProofConfig, OUTPUT_DIR_ENV};
use crate::preflight::preflight_with;
use crate::report::{
    not_applicable, render_markdown, AttackRow, ChainCheck, KatReport, LabReport, PqcReport, StateProofReport,
};

pub const EXIT_OK: u8 = 0;
/// Verification mismatch, e.g. a failing KAT record or an invalid chain.
pub const EXIT_MISMATCH: u8 = 1;
/// Structural failure: bad config, failed preflight, unreadable input.
pub const EXIT_STRUCTURAL: u8 = 2;

/// Seed streams per report section, so sections never share randomness.
const PQC_STREAM: u64 = 1;
const STATEPROOF_STREAM: u64 = 2;

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_MD: &str = "report.md";

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub full_transcripts: bool,
    pub resume_bandit: Option<PathBuf>,
    /// Overrides the RNG self-test reference; `None` uses the built-in vector.
    pub rng_vector: Option<[u64; 8]>,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub exit_code: u8,
    pub report: LabReport,
    /// Where the report files were written, if anywhere.
    pub output_dir: Option<PathBuf>,
}

fn empty_report() -> LabReport {
    LabReport {
        schema_version: crate::config::SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").into(),
        master_seed: None,
        partial: false,
        errors: Vec::new(),
        effective_config: None,
        preflight: None,
        bb84: None,
        pqc: None,
        stateproof: None,
        not_applicable: not_applicable(),
    }
}

pub fn run(config_path: &Path, opts: &RunOptions) -> RunOutcome {
    let vector = opts.rng_vector.unwrap_or(qrt_core::rng::SELF_TEST_VECTOR);
    let pf = preflight_with(config_path, &vector);
    let mut report = empty_report();
    report.preflight = Some(pf.report.clone());

    let mut cfg = match pf.config {
        Ok(c) => c,
        Err(e) => {
            report.partial = true;
            report.errors.push(format!("config: {e}"));
            let dir = std::env::var(OUTPUT_DIR_ENV).ok().filter(|d| !d.is_empty()).map(PathBuf::from);
            return finish(report, dir, EXIT_STRUCTURAL);
        }
    };
    if opts.full_transcripts {
        cfg.full_transcripts = true;
    }
    report.master_seed = Some(cfg.master_seed);
    report.effective_config = Some(cfg.clone());
    let out = PathBuf::from(&cfg.output_dir);

    if !pf.report.passed {
        report.partial = true;
        for c in pf.report.failures() {
            report.errors.push(format!("preflight {}: {}", c.name, c.detail));
        }
        return finish(report, Some(out), EXIT_STRUCTURAL);
    }

    let h = qrt_pqc::hash::hash_by_name(&cfg.hash).expect("validated hash name");
    let mut exit = EXIT_OK;

    match run_bb84(&cfg, opts.resume_bandit.as_deref()) {
        Ok(Some(b)) => report.bb84 = Some(b),
        Ok(None) => {}
        Err(e) => {
            report.partial = true;
            report.errors.push(format!("bb84: {e}"));
            exit = EXIT_STRUCTURAL;
        }
    }

    if let Some(p) = &cfg.pqc {
        let base = config_path.parent().unwrap_or(Path::new("."));
        match run_pqc(p, cfg.master_seed, &cfg.hash, h.as_ref(), &out, base) {
            Ok(r) => {
                if r.kat.iter().any(|k| !k.summary.all_passed()) {
                    report.errors.push("pqc: known-answer test mismatch".into());
                    exit = exit.max(EXIT_MISMATCH);
                }
                report.pqc = Some(r);
            }
            Err(e) => {
                report.partial = true;
                report.errors.push(format!("pqc: {e}"));
                exit = EXIT_STRUCTURAL;
            }
        }
    }

    if let Some(sp) = &cfg.stateproof {
        match run_stateproof(sp, cfg.master_seed, h.as_ref(), &out) {
            Ok(r) => {
                if r.chain_checks.iter().any(|c| !c.ok) || r.time_travel.iter().any(|t| !t.honest_chain_verifies) {
                    report.errors.push("stateproof: honest chain failed verification".into());
                    exit = exit.max(EXIT_MISMATCH);
                }
                report.stateproof = Some(r);
            }
            Err(e) => {
                report.partial = true;
                report.errors.push(format!("stateproof: {e}"));
                exit = EXIT_STRUCTURAL;
            }
        }
    }

    finish(report, Some(out), exit)
}

fn finish(mut report: LabReport, dir: Option<PathBuf>, mut exit: u8) -> RunOutcome {
    let written = dir.and_then(|d| match write_report(&report, &d) {
        Ok(()) => Some(d),
        Err(e) => {
            report.errors.push(format!("cannot write report to {}: {e}", d.display()));
            exit = EXIT_STRUCTURAL;
            None
        }
    });
    RunOutcome {
        exit_code: exit,
        report,
        output_dir: written,
    }
}

fn write_report(report: &LabReport, dir: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(REPORT_JSON), report.to_json())?;
    std::fs::write(dir.join(REPORT_MD), render_markdown(report))
}

type BanditFile = BTreeMap<String, BanditState>;

fn run_bb84(cfg: &LabConfig, resume: Option<&Path>) -> Result<Option<CampaignReport>, String> {
    if cfg.scenarios.is_empty() {
        return Ok(None);
    }
    let bandit_resume: BanditFile = match resume {
        Some(p) if p.exists() => {
            let text = std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
            serde_json::from_str(&text).map_err(|e| format!("bandit state {}: {e}", p.display()))?
        }
        _ => BTreeMap::new(),
    };
    let campaign = Campaign {
        master_seed: cfg.master_seed,
        scenarios: cfg.scenarios.iter().map(|s| s.scenario()).collect(),
        monitor: cfg.monitor.settings(),
        full_transcripts: cfg.full_transcripts,
        bandit_resume,
    };
    let rep = run_campaign(&campaign).map_err(|e| e.to_string())?;
    if let Some(p) = resume {
        let states: BanditFile = rep
            .scenarios
            .iter()
            .filter_map(|s| s.bandit.as_ref().map(|b| (s.name.clone(), b.state.clone())))
            .collect();
        let text = serde_json::to_string_pretty(&states).expect("bandit state serializes");
        std::fs::write(p, text).map_err(|e| format!("{}: {e}", p.display()))?;
    }
    Ok(Some(rep))
}

fn run_pqc(
    p: &PqcConfig,
    master_seed: u64,
    hash_name: &str,
    h: &dyn HashFunction,
    out: &Path,
    config_dir: &Path,
) -> Result<PqcReport, String> {
    let root = RandomSource::new(master_seed, PQC_STREAM);
    let registry = SchemeRegistry::with_builtins();
    let mut kat = Vec::new();
    for (i, k) in p.kat.iter().enumerate() {
        let scheme = registry.resolve(&k.scheme).map_err(|e| e.to_string())?;
        let seed = u64::from_le_bytes(root.derive("kat", i as u64).bytes());
        let records = generate_kat(scheme.as_ref(), k.records, seed, h).map_err(|e| e.to_string())?;
        let rel = format!("kat/{}-{i}.rsp", k.scheme);
        let path = out.join(&rel);
        std::fs::create_dir_all(path.parent().unwrap()).map_err(|e| e.to_string())?;
        let text = format!("# {} known-answer tests\n\n{}", k.scheme, format_kat(&records));
        std::fs::write(&path, &text).map_err(|e| format!("{}: {e}", path.display()))?;
        // Replay from the written bytes, not the in-memory records.
        let back = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
        let parsed = parse_kat(&back).map_err(|e| e.to_string())?;
        kat.push(KatReport {
            source: "generated".into(),
            file: Some(rel),
            summary: run_kat(scheme.as_ref(), &parsed, h),
        });
    }
    for k in &p.kat_files {
        let scheme = registry.resolve(&k.scheme).map_err(|e| e.to_string())?;
        let path = config_dir.join(&k.path);
        let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        let parsed = parse_kat(&text).map_err(|e| format!("{}: {e}", k.path))?;
        kat.push(KatReport {
            source: k.path.clone(),
            file: None,
            summary: run_kat(scheme.as_ref(), &parsed, h),
        });
    }
    let attacks = p
        .attacks
        .iter()
        .enumerate()
        .map(|(i, a)| run_attack(a, &root.derive("attack", i as u64), h))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PqcReport {
        hash: hash_name.into(),
        schemes: registry.descriptors(),
        kat,
        attacks,
    })
}

fn evidence_text(e: &Evidence) -> String {
    match e {
        Evidence::ForgedLamport { msg, .. } => format!("Lamport signature on {} verifies", hex::encode(msg)),
        Evidence::ForgedMerkle { msg, .. } => format!("Merkle signature on {} verifies", hex::encode(msg)),
        Evidence::RecoveredSecret { s } => format!("secret {s:?} decrypts fresh ciphertexts"),
    }
}

/// Runs one configured attack against freshly generated keys.
pub fn run_attack(a: &AttackConfig, rng: &RandomSource, h: &dyn HashFunction) -> Result<AttackRow, String> {
    let mut rng = rng.clone();
    let parameters = serde_json::to_value(a).expect("attack config serializes");
    let (attack, scheme, outcome): (&str, String, AttackOutcome) = match a {
        AttackConfig::OtsReuse { messages } => {
            // Two signers restored from the same key material: a rollback.
            let key_rng = rng.derive("lamport", 0);
            let mut k1 = lamport_keygen(&mut key_rng.clone(), h);
            let mut k2 = lamport_keygen(&mut key_rng.clone(), h);
            let (m1, m2): (Digest, Digest) = match messages {
                MessagePair::Complementary => ([0; 32], [0xff; 32]),
                MessagePair::Identical => {
                    let m = rng.bytes();
                    (m, m)
                }
                MessagePair::Random => (rng.bytes(), rng.bytes()),
            };
            let s1 = lamport_sign(&mut k1, &m1).map_err(|e| e.to_string())?;
            let s2 = lamport_sign(&mut k2, &m2).map_err(|e| e.to_string())?;
            let target: Digest = rng.bytes();
            let out = attack_ots_reuse(k1.public(), (&m1, &s1), (&m2, &s2), &target, h).map_err(|e| e.to_string())?;
            ("ots_reuse", "lamport".into(), out)
        }
        AttackConfig::MerkleForgery { depth, signatures } => {
            let mut ks = merkle_keygen(*depth, &mut rng.derive("merkle", 0), h).map_err(|e| e.to_string())?;
            let observed = (0..*signatures)
                .map(|_| {
                    let m: Digest = rng.bytes();
                    merkle_sign(&mut ks, &m, h).map(|s| (m, s))
                })
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| e.to_string())?;
            let target: Digest = rng.bytes();
            let out = attack_merkle_forgery(&ks.root(), &observed, &target, h).map_err(|e| e.to_string())?;
            ("merkle_forgery", format!("merkle-d{depth}"), out)
        }
        AttackConfig::LweBruteforce { params, budget } => {
            let kp = lwe_keygen(*params, &mut rng.derive("lwe", 0)).map_err(|e| e.to_string())?;
            let out = attack_lwe_bruteforce(&kp.public, params, *budget);
            ("lwe_bruteforce", "toy-lwe".into(), out)
        }
    };
    Ok(AttackRow {
        attack: attack.into(),
        scheme,
        parameters,
        verdict: outcome.verdict,
        effort: outcome.effort,
        detail: outcome.detail,
        evidence: outcome.evidence.as_ref().map(evidence_text),
    })
}

fn world(
    sp: &StateProofConfig,
    master_seed: u64,
    tau: Threshold,
    h: &dyn HashFunction,
) -> Result<(Committee, Vec<StateProof>), String> {
    let rng = RandomSource::new(master_seed, STATEPROOF_STREAM);
    let mut c = Committee::generate(&sp.stakes, sp.merkle_depth, &rng, h).map_err(|e| e.to_string())?;
    let chain = build_honest_chain(&mut c, sp.epochs, sp.cadence, b"honest", tau, h).map_err(|e| e.to_string())?;
    Ok((c, chain))
}

fn chain_check(origin: &str, r: Result<qrt_stateproof::VerifiedHead, qrt_stateproof::ChainInvalid>) -> ChainCheck {
    match r {
        Ok(head) => ChainCheck {
            origin: origin.into(),
            ok: true,
            head_round: head.round(),
            proofs_verified: head.proofs_verified,
            proofs_skipped: head.proofs_skipped,
            error: None,
        },
        Err(e) => ChainCheck {
            origin: origin.into(),
            ok: false,
            head_round: None,
            proofs_verified: 0,
            proofs_skipped: 0,
            error: Some(e.to_string()),
        },
    }
}

fn run_stateproof(
    sp: &StateProofConfig,
    master_seed: u64,
    h: &dyn HashFunction,
    out: &Path,
) -> Result<StateProofReport, String> {
    let tau = Threshold::try_from(sp.tau).map_err(|e| e.to_string())?;
    let (committee, chain) = world(sp, master_seed, tau, h)?;
    let reg = &committee.registry;

    let (chain_file, registry_file) = if sp.write_files {
        let cf = "chain.json";
        let rf = "registry.json";
        let text = serde_json::to_string_pretty(&chain).expect("chain serializes");
        std::fs::write(out.join(cf), text).map_err(|e| e.to_string())?;
        std::fs::write(out.join(rf), reg.to_json()).map_err(|e| e.to_string())?;
        (Some(cf.to_string()), Some(rf.to_string()))
    } else {
        (None, None)
    };

    let mid = chain.len() / 2;
    let checkpoint = match mid {
        0 => VerifierCheckpoint::GENESIS,
        m => VerifierCheckpoint::at(chain[m - 1].epoch.round, chain[m - 1].digest(h)),
    };
    let chain_checks = vec![
        chain_check("genesis", verify_chain(&chain, reg, VerifierCheckpoint::GENESIS, tau, sp.cadence, h)),
        chain_check("checkpoint", verify_chain(&chain, reg, checkpoint, tau, sp.cadence, h)),
    ];
    let proof_size = proof_size_metric(chain.last().expect("at least one epoch"));

    let mut time_travel = Vec::new();
    for t in &sp.time_travel {
        // Fresh keys per scenario: earlier rewrites must not consume leaves.
        let (mut c, hist) = world(sp, master_seed, tau, h)?;
        let r = simulate_time_travel_attack(
            &mut c,
            &hist,
            t.adversary_stake_fraction,
            t.classical_forgery,
            t.target_round,
            tau,
            sp.cadence,
            h,
        )
        .map_err(|e| e.to_string())?;
        time_travel.push(r);
    }

    Ok(StateProofReport {
        validators: reg.validators().len(),
        total_stake: reg.total_stake(),
        merkle_depth: sp.merkle_depth,
        epochs: sp.epochs,
        cadence: sp.cadence,
        tau,
        tau_lint: tau.lint(),
        chain_file,
        registry_file,
        chain_checks,
        proof_size,
        time_travel,
    })
}
