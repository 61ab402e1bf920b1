use qrt_pqc::hash::{Digest, HashFunction};
use qrt_pqc::merkle::{merkle_sign, merkle_verify, MerkleKeySet, MerkleSignature};
use serde::{de::Error, Deserialize, Deserializer, Serialize, Serializer};

use crate::hexser;
use crate::registry::ValidatorRegistry;
use crate::StateProofError;

pub const GENESIS_DIGEST: Digest = [0; 32];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpochState {
    pub round: u64,
    #[serde(with = "hexser::digest")]
    pub state_digest: Digest,
    #[serde(with = "hexser::digest")]
    pub prev_proof_digest: Digest,
}

impl EpochState {
    /// `H("qrt.epoch" || round LE || state_digest || prev_proof_digest)`.
    pub fn payload_digest(&self, h: &dyn HashFunction) -> Digest {
        h.hash_parts(&[
            b"qrt.epoch",
            &self.round.to_le_bytes(),
            &self.state_digest,
            &self.prev_proof_digest,
        ])
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Attestation {
    pub validator_id: u64,
    pub round: u64,
    #[serde(with = "hexser::digest")]
    pub payload: Digest,
    #[serde(with = "sig_hex")]
    pub signature: MerkleSignature,
}

mod sig_hex {
    use super::*;

    pub fn serialize<S: Serializer>(sig: &MerkleSignature, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(sig.to_bytes()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<MerkleSignature, D::Error> {
        let s = String::deserialize(d)?;
        let bytes = hex::decode(&s).map_err(D::Error::custom)?;
        MerkleSignature::from_bytes(&bytes).map_err(D::Error::custom)
    }
}

impl Attestation {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(48 + self.signature.encoded_len());
        out.extend_from_slice(&self.validator_id.to_le_bytes());
        out.extend_from_slice(&self.round.to_le_bytes());
        out.extend_from_slice(&self.payload);
        out.extend_from_slice(&self.signature.to_bytes());
        out
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self, StateProofError> {
        if b.len() < 48 {
            return Err(StateProofError::Decode("attestation shorter than header".into()));
        }
        Ok(Self {
            validator_id: u64::from_le_bytes(b[..8].try_into().unwrap()),
            round: u64::from_le_bytes(b[8..16].try_into().unwrap()),
            payload: b[16..48].try_into().unwrap(),
            signature: MerkleSignature::from_bytes(&b[48..])
                .map_err(|e| StateProofError::Decode(e.to_string()))?,
        })
    }

    /// Signature check against the registered root.
    pub fn signature_valid(&self, registry: &ValidatorRegistry, h: &dyn HashFunction) -> bool {
        registry
            .get(self.validator_id)
            .is_some_and(|v| merkle_verify(&v.root, &self.payload, &self.signature, h))
    }
}

/// Signs the epoch payload with the validator's next unused leaf.
pub fn make_attestation(
    validator_id: u64,
    epoch: &EpochState,
    keyset: &mut MerkleKeySet,
    registry: &ValidatorRegistry,
    h: &dyn HashFunction,
) -> Result<Attestation, StateProofError> {
    let v = registry
        .get(validator_id)
        .ok_or(StateProofError::UnknownValidator(validator_id))?;
    if v.root != keyset.root() {
        return Err(StateProofError::KeyMismatch(validator_id));
    }
    let payload = epoch.payload_digest(h);
    let signature = merkle_sign(keyset, &payload, h)?;
    Ok(Attestation {
        validator_id,
        round: epoch.round,
        payload,
        signature,
    })
}
