use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qrt_cli::config::AttackConfig;
use qrt_cli::run::{run_attack, EXIT_MISMATCH, EXIT_OK, EXIT_STRUCTURAL};
use qrt_cli::{parse_report, preflight, render_markdown, run, RunOptions};
use qrt_core::RandomSource;
use qrt_pqc::Sha256Hash;
use qrt_stateproof::{verify_chain, StateProof, Threshold, ValidatorRegistry, VerifierCheckpoint};

/// Quantum red-team lab.
#[derive(Parser)]
#[command(name = "qrt", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check config, RNG, hash and output directory without running anything.
    Preflight { config: PathBuf },
    /// Run every configured section and write report.json and report.md.
    Run {
        config: PathBuf,
        /// Keep every session transcript and Eve ledger in the report.
        #[arg(long)]
        full_transcripts: bool,
        /// Bandit state file, read if present and rewritten after the run.
        #[arg(long, value_name = "FILE")]
        resume_bandit: Option<PathBuf>,
    },
    /// Post-quantum primitive tools.
    Pqc {
        #[command(subcommand)]
        command: PqcCommand,
    },
    /// State-proof tools.
    Stateproof {
        #[command(subcommand)]
        command: StateProofCommand,
    },
    /// Report tools.
    Report {
        #[command(subcommand)]
        command: ReportCommand,
    },
}

#[derive(Subcommand)]
enum PqcCommand {
    /// Run one attack: ots-reuse, merkle-forgery or lwe-bruteforce.
    ///
    /// Parameters are `key=value` pairs, e.g. `messages=identical`,
    /// `depth=4 signatures=2`, `n=2 q=17 error_bound=0 m=8 budget=1000000`.
    /// `seed=N` picks the key material.
    Attack { scheme: String, params: Vec<String> },
}

#[derive(Subcommand)]
enum StateProofCommand {
    /// Verify a JSON array of proofs from genesis against a registry.
    Verify {
        chain: PathBuf,
        registry: PathBuf,
        #[arg(long, default_value = "0.75")]
        tau: Threshold,
        #[arg(long, default_value_t = qrt_stateproof::DEFAULT_CADENCE)]
        cadence: u64,
    },
}

#[derive(Subcommand)]
enum ReportCommand {
    /// Render a report.json as Markdown on stdout.
    Render { report: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    ExitCode::from(match cli.command {
        Command::Preflight { config } => {
            let pf = preflight(&config);
            for c in &pf.report.checks {
                println!("{:<20} {}  {}", c.name, if c.passed { "ok  " } else { "FAIL" }, c.detail);
            }
            if pf.report.passed {
                EXIT_OK
            } else {
                EXIT_STRUCTURAL
            }
        }
        Command::Run {
            config,
            full_transcripts,
            resume_bandit,
        } => {
            let opts = RunOptions {
                full_transcripts,
                resume_bandit,
                rng_vector: None,
            };
            let out = run(&config, &opts);
            for e in &out.report.errors {
                eprintln!("error: {e}");
            }
            if let Some(d) = &out.output_dir {
                println!("report written to {}", d.join(qrt_cli::run::REPORT_JSON).display());
            }
            out.exit_code
        }
        Command::Pqc {
            command: PqcCommand::Attack { scheme, params },
        } => pqc_attack(&scheme, &params),
        Command::Stateproof {
            command: StateProofCommand::Verify {
                chain,
                registry,
                tau,
                cadence,
            },
        } => stateproof_verify(&chain, &registry, tau, cadence),
        Command::Report {
            command: ReportCommand::Render { report },
        } => {
            let text = match std::fs::read_to_string(&report) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: {}: {e}", report.display());
                    return ExitCode::from(EXIT_STRUCTURAL);
                }
            };
            match parse_report(&text) {
                Ok(r) => {
                    print!("{}", render_markdown(&r));
                    EXIT_OK
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    EXIT_STRUCTURAL
                }
            }
        }
    })
}

fn pqc_attack(scheme: &str, params: &[String]) -> u8 {
    let kind = match scheme {
        "ots-reuse" | "ots_reuse" => "ots_reuse",
        "merkle-forgery" | "merkle_forgery" => "merkle_forgery",
        "lwe-bruteforce" | "lwe_bruteforce" => "lwe_bruteforce",
        other => {
            eprintln!("error: unknown attack {other:?} (expected ots-reuse, merkle-forgery or lwe-bruteforce)");
            return EXIT_STRUCTURAL;
        }
    };
    let mut obj = serde_json::Map::new();
    let mut lwe = serde_json::Map::new();
    let mut seed = 0u64;
    obj.insert("kind".into(), kind.into());
    for p in params {
        let Some((k, v)) = p.split_once('=') else {
            eprintln!("error: parameter {p:?} is not key=value");
            return EXIT_STRUCTURAL;
        };
        let value = serde_json::from_str(v).unwrap_or_else(|_| serde_json::Value::String(v.into()));
        match k {
            "seed" => match v.parse() {
                Ok(s) => seed = s,
                Err(_) => {
                    eprintln!("error: seed {v:?} is not an integer");
                    return EXIT_STRUCTURAL;
                }
            },
            "n" | "q" | "error_bound" | "m" if kind == "lwe_bruteforce" => {
                lwe.insert(k.into(), value);
            }
            _ => {
                obj.insert(k.into(), value);
            }
        }
    }
    if !lwe.is_empty() {
        let mut base = serde_json::to_value(qrt_pqc::lwe::LweParams::DEMO).unwrap();
        base.as_object_mut().unwrap().extend(lwe);
        obj.insert("params".into(), base);
    }
    let cfg: AttackConfig = match serde_json::from_value(obj.into()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_STRUCTURAL;
        }
    };
    let invalid = match &cfg {
        AttackConfig::LweBruteforce { params, .. } => params.validate().err().map(|e| e.to_string()),
        _ => None,
    };
    if let Some(e) = invalid {
        eprintln!("error: {e}");
        return EXIT_STRUCTURAL;
    }
    match run_attack(&cfg, &RandomSource::new(seed, 0), &Sha256Hash) {
        Ok(row) => {
            println!("{}", serde_json::to_string_pretty(&row).unwrap());
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_STRUCTURAL
        }
    }
}

fn stateproof_verify(chain: &PathBuf, registry: &PathBuf, tau: Threshold, cadence: u64) -> u8 {
    let read = |p: &PathBuf| std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()));
    let proofs: Result<Vec<StateProof>, String> = read(chain).and_then(|t| {
        let de = &mut serde_json::Deserializer::from_str(&t);
        serde_path_to_error::deserialize(de).map_err(|e| format!("{}: at {}: {}", chain.display(), e.path(), e.inner()))
    });
    let reg = read(registry).and_then(|t| ValidatorRegistry::from_json(&t).map_err(|e| e.to_string()));
    let (proofs, reg) = match (proofs, reg) {
        (Ok(p), Ok(r)) => (p, r),
        (p, r) => {
            for e in [p.err(), r.err()].into_iter().flatten() {
                eprintln!("error: {e}");
            }
            return EXIT_STRUCTURAL;
        }
    };
    if let Some(l) = tau.lint() {
        eprintln!("warning: {l}");
    }
    match verify_chain(&proofs, &reg, VerifierCheckpoint::GENESIS, tau, cadence, &Sha256Hash) {
        Ok(head) => {
            println!("{}", serde_json::to_string_pretty(&head).unwrap());
            EXIT_OK
        }
        Err(e) => {
            println!("{}", serde_json::to_string_pretty(&e).unwrap());
            eprintln!("invalid: {e}");
            EXIT_MISMATCH
        }
    }
}
