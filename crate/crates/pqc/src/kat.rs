//! Known-answer test files.
//!
//! Line-oriented: `field = hexvalue`, records separated by blank lines, each
//! usually opened by a decimal `count = N`. Lines starting with `#` and
//! bracketed section headers are skipped.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::hash::HashFunction;
use crate::registry::KatScheme;
use crate::PqcError;

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct KatRecord {
    /// Line of the record's first field.
    pub line: usize,
    pub count: Option<u64>,
    /// Fields in file order.
    pub fields: Vec<(String, Vec<u8>)>,
}

impl KatRecord {
    pub fn get(&self, field: &str) -> Option<&[u8]> {
        self.fields
            .iter()
            .find(|(k, _)| k == field)
            .map(|(_, v)| v.as_slice())
    }
}

pub fn parse_kat(text: &str) -> Result<Vec<KatRecord>, PqcError> {
    let mut out = Vec::new();
    let mut cur: Option<KatRecord> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = raw.trim();
        if s.is_empty() {
            out.extend(cur.take());
            continue;
        }
        if s.starts_with('#') || (s.starts_with('[') && s.ends_with(']')) {
            continue;
        }
        let bad = |reason: String| PqcError::MalformedRecord { line, reason };
        let (key, value) = s
            .split_once('=')
            .ok_or_else(|| bad("expected `field = value`".into()))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(bad("empty field name".into()));
        }
        let rec = cur.get_or_insert_with(|| KatRecord {
            line,
            ..Default::default()
        });
        if key == "count" {
            if rec.count.is_some() {
                return Err(bad("duplicate count".into()));
            }
            rec.count = Some(
                value
                    .parse()
                    .map_err(|_| bad(format!("count {value:?} is not a decimal integer")))?,
            );
            continue;
        }
        if rec.get(key).is_some() {
            return Err(bad(format!("duplicate field {key:?}")));
        }
        let bytes = hex::decode(value).map_err(|e| bad(format!("field {key:?}: {e}")))?;
        rec.fields.push((key.to_string(), bytes));
    }
    out.extend(cur);
    Ok(out)
}

pub fn format_kat(records: &[KatRecord]) -> String {
    let mut s = String::new();
    for (i, r) in records.iter().enumerate() {
        if i > 0 {
            s.push('\n');
        }
        if let Some(c) = r.count {
            writeln!(s, "count = {c}").unwrap();
        }
        for (k, v) in &r.fields {
            writeln!(s, "{k} = {}", hex::encode_upper(v)).unwrap();
        }
    }
    s
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldDiff {
    pub field: String,
    /// `None` when the record omits a field the scheme produces.
    pub expected: Option<String>,
    pub actual: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KatOutcome {
    pub line: usize,
    pub count: Option<u64>,
    pub passed: bool,
    pub diffs: Vec<FieldDiff>,
    /// Set when the inputs could not be evaluated at all.
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KatSummary {
    pub scheme: String,
    pub records: usize,
    pub passed: usize,
    pub outcomes: Vec<KatOutcome>,
}

impl KatSummary {
    pub fn all_passed(&self) -> bool {
        self.passed == self.records
    }
}

/// Evaluates each record independently against `scheme`.
pub fn run_kat(scheme: &dyn KatScheme, records: &[KatRecord], h: &dyn HashFunction) -> KatSummary {
    let outcomes: Vec<KatOutcome> = records
        .iter()
        .map(|r| {
            let inputs: BTreeMap<&str, &[u8]> = scheme
                .input_fields()
                .iter()
                .filter_map(|&f| r.get(f).map(|v| (f, v)))
                .collect();
            let base = KatOutcome {
                line: r.line,
                count: r.count,
                passed: false,
                diffs: Vec::new(),
                error: None,
            };
            match scheme.compute(&inputs, h) {
                Err(e) => KatOutcome {
                    error: Some(e.to_string()),
                    ..base
                },
                Ok(outputs) => {
                    let diffs: Vec<FieldDiff> = outputs
                        .into_iter()
                        .filter(|(k, v)| r.get(k) != Some(v.as_slice()))
                        .map(|(k, v)| FieldDiff {
                            expected: r.get(&k).map(hex::encode_upper),
                            field: k,
                            actual: hex::encode_upper(v),
                        })
                        .collect();
                    KatOutcome {
                        passed: diffs.is_empty(),
                        diffs,
                        ..base
                    }
                }
            }
        })
        .collect();
    KatSummary {
        scheme: scheme.descriptor().name,
        records: outcomes.len(),
        passed: outcomes.iter().filter(|o| o.passed).count(),
        outcomes,
    }
}

/// Builds `n` self-consistent records from seeds derived from `master_seed`.
pub fn generate_kat(
    scheme: &dyn KatScheme,
    n: usize,
    master_seed: u64,
    h: &dyn HashFunction,
) -> Result<Vec<KatRecord>, PqcError> {
    let mut rng = qrt_core::RandomSource::new(master_seed, 0).derive("kat", 0);
    (0..n)
        .map(|i| {
            let inputs = scheme.sample_inputs(&mut rng);
            let view: BTreeMap<&str, &[u8]> =
                inputs.iter().map(|(k, v)| (k.as_str(), v.as_slice())).collect();
            let outputs = scheme.compute(&view, h)?;
            let mut fields = inputs;
            fields.extend(outputs);
            Ok(KatRecord {
                line: 0,
                count: Some(i as u64),
                fields,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_response_layout() {
        let text = "# toy\n[lamport]\n\ncount = 0\nseed = 00ff\nmsg = \n\n\ncount = 1\nseed=AB\n";
        let recs = parse_kat(text).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].line, 4);
        assert_eq!(recs[0].count, Some(0));
        assert_eq!(recs[0].get("seed"), Some(&[0x00, 0xff][..]));
        assert_eq!(recs[0].get("msg"), Some(&[][..]));
        assert_eq!(recs[1].get("seed"), Some(&[0xab][..]));
    }

    #[test]
    fn empty_file_has_no_records() {
        assert!(parse_kat("").unwrap().is_empty());
        assert!(parse_kat("# only comments\n\n").unwrap().is_empty());
    }

    #[test]
    fn malformed_lines_report_line_numbers() {
        let err = parse_kat("count = 0\nseed = 0g\n").unwrap_err();
        assert!(matches!(err, PqcError::MalformedRecord { line: 2, .. }), "{err}");
        let err = parse_kat("count = 0\n\ncount = x\n").unwrap_err();
        assert!(matches!(err, PqcError::MalformedRecord { line: 3, .. }));
        let err = parse_kat("seed 00\n").unwrap_err();
        assert!(matches!(err, PqcError::MalformedRecord { line: 1, .. }));
        let err = parse_kat("a = 00\na = 01\n").unwrap_err();
        assert!(matches!(err, PqcError::MalformedRecord { line: 2, .. }));
    }

    #[test]
    fn format_then_parse_roundtrip() {
        let recs = vec![
            KatRecord {
                line: 1,
                count: Some(0),
                fields: vec![("a".into(), vec![1, 2]), ("b".into(), vec![])],
            },
            KatRecord {
                line: 5,
                count: Some(1),
                fields: vec![("a".into(), vec![0xfe])],
            },
        ];
        assert_eq!(parse_kat(&format_kat(&recs)).unwrap(), recs);
    }
}
