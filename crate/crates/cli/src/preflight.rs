//! Environment checks run before any simulation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{load_config, ConfigError, LabConfig, SCHEMA_VERSION};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreflightReport {
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

impl PreflightReport {
    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

pub struct Preflight {
    pub report: PreflightReport,
    pub config: Result<LabConfig, ConfigError>,
}

pub fn preflight(config_path: &Path) -> Preflight {
    preflight_with(config_path, &qrt_core::rng::SELF_TEST_VECTOR)
}

/// Runs every check regardless of earlier failures.
pub fn preflight_with(config_path: &Path, rng_vector: &[u64; 8]) -> Preflight {
    let mut checks = Vec::new();
    let mut check = |name: &str, r: Result<String, String>| {
        let (passed, detail) = match r {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        checks.push(CheckResult {
            name: name.into(),
            passed,
            detail,
        });
    };

    let config = load_config(config_path);
    check(
        "config_schema",
        match &config {
            Ok(c) => Ok(format!("{} scenario(s), schema version {}", c.scenarios.len(), c.schema_version)),
            Err(e) => Err(e.to_string()),
        },
    );

    check(
        "rng_self_test",
        qrt_core::rng::self_test(rng_vector).map(|_| "ChaCha20 stream matches the reference vector".into()),
    );

    let hash_name = config.as_ref().map(|c| c.hash.as_str()).unwrap_or("sha256");
    check(
        "hash_self_test",
        match qrt_pqc::hash::hash_by_name(hash_name) {
            None => Err(format!("unknown hash function {hash_name:?}")),
            Some(h) => qrt_pqc::hash::self_test(h.as_ref()).map(|_| format!("{} known answer ok", h.name())),
        },
    );

    check(
        "output_dir_writable",
        match &config {
            Ok(c) => probe_dir(&PathBuf::from(&c.output_dir)),
            Err(_) => Err("not checked: configuration did not load".into()),
        },
    );

    check("versions", versions(config_path));

    let passed = checks.iter().all(|c| c.passed);
    Preflight {
        report: PreflightReport { passed, checks },
        config,
    }
}

fn probe_dir(dir: &Path) -> Result<String, String> {
    std::fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    let probe = dir.join(".qrt-write-probe");
    std::fs::write(&probe, b"probe").map_err(|e| format!("cannot write in {}: {e}", dir.display()))?;
    std::fs::remove_file(&probe).map_err(|e| format!("cannot clean up probe: {e}"))?;
    Ok(format!("{} is writable", dir.display()))
}

/// Compares the config's declared schema version with this build's, reading
/// the raw JSON so the check still runs when the config itself is invalid.
fn versions(config_path: &Path) -> Result<String, String> {
    let tool = env!("CARGO_PKG_VERSION");
    let declared = std::fs::read_to_string(config_path)
        .ok()
        .and_then(|t| serde_json::from_str::<serde_json::Value>(&t).ok())
        .and_then(|v| v.get("schema_version").cloned());
    match declared {
        None => Ok(format!("tool {tool}, config schema {SCHEMA_VERSION} (implied)")),
        Some(v) if v.as_u64() == Some(SCHEMA_VERSION as u64) => {
            Ok(format!("tool {tool}, config schema {SCHEMA_VERSION}"))
        }
        Some(v) => Err(format!("tool {tool} reads config schema {SCHEMA_VERSION}, config declares {v}")),
    }
}
