use std::collections::BTreeSet;

use qrt_core::RandomSource;
use qrt_pqc::hash::{Digest, HashFunction};
use qrt_pqc::merkle::MerkleKeySet;
use serde::{Deserialize, Serialize};

use crate::hexser;
use crate::StateProofError;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Validator {
    pub id: u64,
    pub stake: u64,
    /// Merkle root of the validator's attestation keys.
    #[serde(with = "hexser::digest")]
    pub root: Digest,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ValidatorRegistry {
    validators: Vec<Validator>,
    total_stake: u64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RegistryFile {
    validators: Vec<Validator>,
    total_stake: Option<u64>,
}

impl<'de> Deserialize<'de> for ValidatorRegistry {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let f = RegistryFile::deserialize(d)?;
        let reg = ValidatorRegistry::new(f.validators).map_err(serde::de::Error::custom)?;
        match f.total_stake {
            Some(t) if t != reg.total_stake => Err(serde::de::Error::custom(format!(
                "total_stake {t} does not equal the sum of stakes {}",
                reg.total_stake
            ))),
            _ => Ok(reg),
        }
    }
}

impl ValidatorRegistry {
    pub fn new(validators: Vec<Validator>) -> Result<Self, StateProofError> {
        let mut seen = BTreeSet::new();
        for v in &validators {
            if !seen.insert(v.id) {
                return Err(StateProofError::InvalidRegistry(format!("duplicate id {}", v.id)));
            }
        }
        let total: u128 = validators.iter().map(|v| v.stake as u128).sum();
        let total_stake = u64::try_from(total)
            .map_err(|_| StateProofError::InvalidRegistry("total stake overflows u64".into()))?;
        if total_stake == 0 {
            return Err(StateProofError::InvalidRegistry("total stake must be positive".into()));
        }
        Ok(Self {
            validators,
            total_stake,
        })
    }

    pub fn validators(&self) -> &[Validator] {
        &self.validators
    }

    pub fn total_stake(&self) -> u64 {
        self.total_stake
    }

    pub fn get(&self, id: u64) -> Option<&Validator> {
        self.validators.iter().find(|v| v.id == id)
    }

    pub fn from_json(text: &str) -> Result<Self, StateProofError> {
        serde_json::from_str(text).map_err(|e| StateProofError::InvalidRegistry(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("registry serializes")
    }
}

/// A registry together with every validator's signing keys; the simulation
/// side of the protocol.
#[derive(Debug)]
pub struct Committee {
    pub registry: ValidatorRegistry,
    /// `keys[i]` belongs to `registry.validators()[i]`.
    pub keys: Vec<MerkleKeySet>,
}

impl Committee {
    /// Validators get ids `0..stakes.len()` and keys from sub-streams of `rng`.
    pub fn generate(
        stakes: &[u64],
        depth: u32,
        rng: &RandomSource,
        h: &dyn HashFunction,
    ) -> Result<Self, StateProofError> {
        let keys = stakes
            .iter()
            .enumerate()
            .map(|(i, _)| MerkleKeySet::from_seed(depth, rng.derive("validator", i as u64).bytes(), h))
            .collect::<Result<Vec<_>, _>>()?;
        let validators = stakes
            .iter()
            .zip(&keys)
            .enumerate()
            .map(|(i, (&stake, k))| Validator {
                id: i as u64,
                stake,
                root: k.root(),
            })
            .collect();
        Ok(Self {
            registry: ValidatorRegistry::new(validators)?,
            keys,
        })
    }

    pub fn keys_mut(&mut self, id: u64) -> Option<&mut MerkleKeySet> {
        let pos = self.registry.validators().iter().position(|v| v.id == id)?;
        self.keys.get_mut(pos)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(id: u64, stake: u64) -> Validator {
        Validator {
            id,
            stake,
            root: [id as u8; 32],
        }
    }

    #[test]
    fn rejects_duplicates_and_zero_total() {
        assert!(ValidatorRegistry::new(vec![v(1, 5), v(1, 6)]).is_err());
        assert!(ValidatorRegistry::new(vec![v(1, 0)]).is_err());
        assert!(ValidatorRegistry::new(vec![]).is_err());
        assert_eq!(ValidatorRegistry::new(vec![v(1, 5), v(2, 6)]).unwrap().total_stake(), 11);
    }

    #[test]
    fn json_roundtrip_and_total_check() {
        let reg = ValidatorRegistry::new(vec![v(1, 40), v(2, 60)]).unwrap();
        let text = reg.to_json();
        assert_eq!(ValidatorRegistry::from_json(&text).unwrap(), reg);
        let bad = text.replace("100", "99");
        assert!(ValidatorRegistry::from_json(&bad).is_err());
        let short_root = r#"{"validators":[{"id":1,"stake":1,"root":"00"}]}"#;
        assert!(ValidatorRegistry::from_json(short_root).is_err());
    }
}
