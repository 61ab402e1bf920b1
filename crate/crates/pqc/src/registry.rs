//! Uniform scheme interface for the KAT harness and the CLI.
//!
//! Built-in names: `lamport`, `merkle-d<depth>` (depth 1..=16) and `toy-lwe`.
//! External implementations can be added with [`SchemeRegistry::register`].

use std::collections::BTreeMap;
use std::sync::Arc;

use qrt_core::RandomSource;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::hash::{Digest, HashFunction};
use crate::lamport::{lamport_sign, lamport_verify, LamportKeyPair, MSG_BITS};
use crate::lwe::{lwe_decrypt, lwe_encrypt, lwe_keygen, LweParams};
use crate::merkle::{merkle_sign, merkle_verify, MerkleKeySet, MAX_DEPTH};
use crate::PqcError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    Signature,
    Kem,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeDescriptor {
    pub name: String,
    pub kind: SchemeKind,
    pub parameter_set: serde_json::Value,
    pub security_note: String,
}

pub type KatInputs<'a> = BTreeMap<&'a str, &'a [u8]>;
pub type KatFields = Vec<(String, Vec<u8>)>;

/// A scheme whose deterministic operations can be replayed from KAT inputs.
pub trait KatScheme: Send + Sync {
    fn descriptor(&self) -> SchemeDescriptor;

    fn input_fields(&self) -> &'static [&'static str];

    /// Fresh inputs for KAT generation.
    fn sample_inputs(&self, rng: &mut RandomSource) -> KatFields;

    /// Expected-output fields computed from the inputs.
    fn compute(&self, inputs: &KatInputs<'_>, h: &dyn HashFunction) -> Result<KatFields, PqcError>;
}

fn field<const N: usize>(inputs: &KatInputs<'_>, name: &str) -> Result<[u8; N], PqcError> {
    let v = inputs
        .get(name)
        .ok_or_else(|| PqcError::InvalidInputs(format!("missing field {name:?}")))?;
    (*v).try_into().map_err(|_| {
        PqcError::InvalidInputs(format!("field {name:?} must be {N} bytes, got {}", v.len()))
    })
}

/// Lamport key whose preimages are expanded from a 32-byte seed.
pub fn lamport_from_seed(seed: &Digest, h: &dyn HashFunction) -> LamportKeyPair {
    let half = |b: u8| {
        (0..MSG_BITS)
            .map(|i| h.hash_parts(&[b"qrt.lamport.seed", seed, &[b], &(i as u16).to_be_bytes()]))
            .collect()
    };
    LamportKeyPair::from_secret([half(0), half(1)], h)
}

pub struct LamportScheme;

impl KatScheme for LamportScheme {
    fn descriptor(&self) -> SchemeDescriptor {
        SchemeDescriptor {
            name: "lamport".into(),
            kind: SchemeKind::Signature,
            parameter_set: json!({ "message_bits": MSG_BITS, "digest_bytes": 32 }),
            security_note: "one-time: a second signature under the same key leaks forgery material"
                .into(),
        }
    }

    fn input_fields(&self) -> &'static [&'static str] {
        &["seed", "msg"]
    }

    fn sample_inputs(&self, rng: &mut RandomSource) -> KatFields {
        vec![
            ("seed".into(), rng.bytes::<32>().to_vec()),
            ("msg".into(), rng.bytes::<32>().to_vec()),
        ]
    }

    fn compute(&self, inputs: &KatInputs<'_>, h: &dyn HashFunction) -> Result<KatFields, PqcError> {
        let seed = field::<32>(inputs, "seed")?;
        let msg = field::<32>(inputs, "msg")?;
        let mut kp = lamport_from_seed(&seed, h);
        let sig = lamport_sign(&mut kp, &msg)?;
        let ok = lamport_verify(kp.public(), &msg, &sig, h);
        Ok(vec![
            ("pk".into(), kp.public().digest(h).to_vec()),
            ("sig".into(), h.hash(&sig.to_bytes()).to_vec()),
            ("verify".into(), vec![ok as u8]),
        ])
    }
}

/// Signs with leaf 0 of a tree expanded from the seed.
pub struct MerkleScheme {
    pub depth: u32,
}

impl KatScheme for MerkleScheme {
    fn descriptor(&self) -> SchemeDescriptor {
        SchemeDescriptor {
            name: format!("merkle-d{}", self.depth),
            kind: SchemeKind::Signature,
            parameter_set: json!({ "depth": self.depth, "capacity": 1u64 << self.depth }),
            security_note: "stateful: each leaf signs once; the signer must never roll back its index"
                .into(),
        }
    }

    fn input_fields(&self) -> &'static [&'static str] {
        &["seed", "msg"]
    }

    fn sample_inputs(&self, rng: &mut RandomSource) -> KatFields {
        LamportScheme.sample_inputs(rng)
    }

    fn compute(&self, inputs: &KatInputs<'_>, h: &dyn HashFunction) -> Result<KatFields, PqcError> {
        let seed = field::<32>(inputs, "seed")?;
        let msg = field::<32>(inputs, "msg")?;
        let mut ks = MerkleKeySet::from_seed(self.depth, seed, h)?;
        let sig = merkle_sign(&mut ks, &msg, h)?;
        let ok = merkle_verify(&ks.root(), &msg, &sig, h);
        Ok(vec![
            ("root".into(), ks.root().to_vec()),
            ("sig".into(), h.hash(&sig.to_bytes()).to_vec()),
            ("verify".into(), vec![ok as u8]),
        ])
    }
}

/// Key generation and encryption coins both come from the 8-byte seed.
pub struct ToyLweScheme {
    pub params: LweParams,
}

impl KatScheme for ToyLweScheme {
    fn descriptor(&self) -> SchemeDescriptor {
        let p = self.params;
        SchemeDescriptor {
            name: "toy-lwe".into(),
            kind: SchemeKind::Kem,
            parameter_set: json!({ "n": p.n, "q": p.q, "error_bound": p.error_bound, "m": p.m }),
            security_note: format!("toy parameters: secret space q^n = {}", p.search_space()),
        }
    }

    fn input_fields(&self) -> &'static [&'static str] {
        &["seed", "msg"]
    }

    fn sample_inputs(&self, rng: &mut RandomSource) -> KatFields {
        vec![
            ("seed".into(), rng.bytes::<8>().to_vec()),
            ("msg".into(), vec![rng.bit()]),
        ]
    }

    fn compute(&self, inputs: &KatInputs<'_>, h: &dyn HashFunction) -> Result<KatFields, PqcError> {
        let seed = u64::from_be_bytes(field::<8>(inputs, "seed")?);
        let [bit] = field::<1>(inputs, "msg")?;
        if bit > 1 {
            return Err(PqcError::InvalidInputs(format!("msg must be 00 or 01, got {bit:02X}")));
        }
        let root = RandomSource::new(seed, 0);
        let kp = lwe_keygen(self.params, &mut root.derive("keygen", 0))?;
        let ct = lwe_encrypt(&kp.public, bit, &mut root.derive("encrypt", 0));
        Ok(vec![
            ("pk".into(), h.hash(&kp.public.to_bytes()).to_vec()),
            ("ct".into(), ct.to_bytes()),
            ("dec".into(), vec![lwe_decrypt(&kp.secret, &ct)]),
        ])
    }
}

/// Resolves a built-in scheme name.
pub fn builtin(name: &str) -> Result<Arc<dyn KatScheme>, PqcError> {
    match name {
        "lamport" => Ok(Arc::new(LamportScheme)),
        "toy-lwe" => Ok(Arc::new(ToyLweScheme {
            params: LweParams::DEFAULT,
        })),
        _ => {
            let depth = name
                .strip_prefix("merkle-d")
                .and_then(|d| d.parse::<u32>().ok())
                .ok_or_else(|| PqcError::UnknownScheme(name.into()))?;
            if !(1..=MAX_DEPTH).contains(&depth) {
                return Err(PqcError::ParameterViolation(format!(
                    "merkle depth must lie in [1, {MAX_DEPTH}], got {depth}"
                )));
            }
            Ok(Arc::new(MerkleScheme { depth }))
        }
    }
}

#[derive(Default)]
pub struct SchemeRegistry {
    schemes: Vec<Arc<dyn KatScheme>>,
}

impl SchemeRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// `lamport`, `merkle-d4` and `toy-lwe`.
    pub fn with_builtins() -> Self {
        let mut r = Self::new();
        for name in ["lamport", "merkle-d4", "toy-lwe"] {
            r.register(builtin(name).unwrap()).unwrap();
        }
        r
    }

    pub fn register(&mut self, scheme: Arc<dyn KatScheme>) -> Result<(), PqcError> {
        let name = scheme.descriptor().name;
        if self.schemes.iter().any(|s| s.descriptor().name == name) {
            return Err(PqcError::DuplicateScheme(name));
        }
        self.schemes.push(scheme);
        Ok(())
    }

    /// A registered scheme, else a built-in name such as `merkle-d7`.
    pub fn resolve(&self, name: &str) -> Result<Arc<dyn KatScheme>, PqcError> {
        match self.schemes.iter().find(|s| s.descriptor().name == name) {
            Some(s) => Ok(s.clone()),
            None => builtin(name),
        }
    }

    pub fn descriptors(&self) -> Vec<SchemeDescriptor> {
        self.schemes.iter().map(|s| s.descriptor()).collect()
    }
}
