//! Merkle signature scheme: `2^depth` Lamport leaves under one root.
//!
//! Leaf secrets are derived from a 32-byte seed through the injected hash, so
//! a key set stores only the seed and the tree. Internal nodes are
//! `H(0x01 || left || right)`; leaves are Lamport public-key digests.
//!
//! A signature carries the revealed preimages plus the hashes of the
//! unrevealed half, which lets the verifier rebuild the leaf public key and
//! fold the authentication path up to the root.

use qrt_core::RandomSource;

use crate::hash::{Digest, HashFunction};
use crate::lamport::{
    lamport_sign, msg_bit, LamportKeyPair, LamportPublicKey, LamportSignature, MSG_BITS,
};
use crate::PqcError;

pub const MAX_DEPTH: u32 = 16;
const NODE_TAG: [u8; 1] = [0x01];

fn node(h: &dyn HashFunction, left: &Digest, right: &Digest) -> Digest {
    h.hash_parts(&[&NODE_TAG, left, right])
}

#[derive(Debug)]
pub struct MerkleKeySet {
    depth: u32,
    seed: Digest,
    /// `levels[0]` are the leaves, `levels[depth]` holds the root.
    levels: Vec<Vec<Digest>>,
    next_index: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MerkleSignature {
    pub leaf_index: u32,
    pub ots: LamportSignature,
    /// `public[1 - bit_i][i]` for every message bit.
    pub complement: Vec<Digest>,
    pub auth_path: Vec<Digest>,
}

fn leaf_keypair(seed: &Digest, leaf: u32, h: &dyn HashFunction) -> LamportKeyPair {
    let derive = |b: u8, i: usize| {
        h.hash_parts(&[
            b"qrt.merkle.leaf",
            seed,
            &leaf.to_be_bytes(),
            &[b],
            &(i as u16).to_be_bytes(),
        ])
    };
    let zero = (0..MSG_BITS).map(|i| derive(0, i)).collect();
    let one = (0..MSG_BITS).map(|i| derive(1, i)).collect();
    LamportKeyPair::from_secret([zero, one], h)
}

pub fn merkle_keygen(
    depth: u32,
    rng: &mut RandomSource,
    h: &dyn HashFunction,
) -> Result<MerkleKeySet, PqcError> {
    MerkleKeySet::from_seed(depth, rng.bytes(), h)
}

impl MerkleKeySet {
    pub fn from_seed(depth: u32, seed: Digest, h: &dyn HashFunction) -> Result<Self, PqcError> {
        if !(1..=MAX_DEPTH).contains(&depth) {
            return Err(PqcError::ParameterViolation(format!(
                "merkle depth must lie in [1, {MAX_DEPTH}], got {depth}"
            )));
        }
        let leaves: Vec<Digest> = (0..1u32 << depth)
            .map(|i| leaf_keypair(&seed, i, h).public().digest(h))
            .collect();
        let mut levels = vec![leaves];
        while levels.last().unwrap().len() > 1 {
            let next = levels
                .last()
                .unwrap()
                .chunks(2)
                .map(|p| node(h, &p[0], &p[1]))
                .collect();
            levels.push(next);
        }
        Ok(Self {
            depth,
            seed,
            levels,
            next_index: 0,
        })
    }

    pub fn root(&self) -> Digest {
        self.levels[self.depth as usize][0]
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn capacity(&self) -> u32 {
        1 << self.depth
    }

    pub fn next_index(&self) -> u32 {
        self.next_index
    }

    pub fn remaining(&self) -> u32 {
        self.capacity() - self.next_index
    }

    fn auth_path(&self, leaf: u32) -> Vec<Digest> {
        (0..self.depth as usize)
            .map(|lvl| self.levels[lvl][((leaf >> lvl) ^ 1) as usize])
            .collect()
    }
}

/// Signs with the next unused leaf and advances the index.
pub fn merkle_sign(
    ks: &mut MerkleKeySet,
    msg: &Digest,
    h: &dyn HashFunction,
) -> Result<MerkleSignature, PqcError> {
    if ks.next_index >= ks.capacity() {
        return Err(PqcError::KeysExhausted);
    }
    let leaf = ks.next_index;
    ks.next_index += 1;
    let mut kp = leaf_keypair(&ks.seed, leaf, h);
    let ots = lamport_sign(&mut kp, msg)?;
    let complement = (0..MSG_BITS)
        .map(|i| kp.public().hashes[1 - msg_bit(msg, i)][i])
        .collect();
    Ok(MerkleSignature {
        leaf_index: leaf,
        ots,
        complement,
        auth_path: ks.auth_path(leaf),
    })
}

/// Rebuilds the signing leaf's public key from a signature.
pub fn reconstruct_leaf_key(
    msg: &Digest,
    sig: &MerkleSignature,
    h: &dyn HashFunction,
) -> Option<LamportPublicKey> {
    if sig.ots.preimages.len() != MSG_BITS || sig.complement.len() != MSG_BITS {
        return None;
    }
    let mut hashes = [vec![[0u8; 32]; MSG_BITS], vec![[0u8; 32]; MSG_BITS]];
    for i in 0..MSG_BITS {
        let b = msg_bit(msg, i);
        hashes[b][i] = h.hash(&sig.ots.preimages[i]);
        hashes[1 - b][i] = sig.complement[i];
    }
    Some(LamportPublicKey { hashes })
}

pub fn merkle_verify(root: &Digest, msg: &Digest, sig: &MerkleSignature, h: &dyn HashFunction) -> bool {
    let depth = sig.auth_path.len();
    if depth == 0 || depth > MAX_DEPTH as usize || (sig.leaf_index as u64) >= (1u64 << depth) {
        return false;
    }
    let Some(pk) = reconstruct_leaf_key(msg, sig, h) else {
        return false;
    };
    let mut cur = pk.digest(h);
    for (lvl, sib) in sig.auth_path.iter().enumerate() {
        cur = if (sig.leaf_index >> lvl) & 1 == 0 {
            node(h, &cur, sib)
        } else {
            node(h, sib, &cur)
        };
    }
    &cur == root
}

impl MerkleSignature {
    /// Flat encoding: leaf index (u32 LE), path length (u8), preimages,
    /// complement hashes, then the path, 32 bytes per entry.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(&self.leaf_index.to_le_bytes());
        out.push(self.auth_path.len() as u8);
        for d in self.ots.preimages.iter().chain(&self.complement).chain(&self.auth_path) {
            out.extend_from_slice(d);
        }
        out
    }

    pub fn encoded_len(&self) -> usize {
        5 + 32 * (self.ots.preimages.len() + self.complement.len() + self.auth_path.len())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, PqcError> {
        let bad = |m: &str| PqcError::Decode(format!("merkle signature: {m}"));
        if bytes.len() < 5 {
            return Err(bad("truncated header"));
        }
        let leaf_index = u32::from_le_bytes(bytes[..4].try_into().unwrap());
        let depth = bytes[4] as usize;
        let want = 5 + 32 * (2 * MSG_BITS + depth);
        if bytes.len() != want {
            return Err(bad(&format!("expected {want} bytes, got {}", bytes.len())));
        }
        let digests: Vec<Digest> = bytes[5..]
            .chunks_exact(32)
            .map(|c| c.try_into().unwrap())
            .collect();
        Ok(Self {
            leaf_index,
            ots: LamportSignature {
                preimages: digests[..MSG_BITS].to_vec(),
            },
            complement: digests[MSG_BITS..2 * MSG_BITS].to_vec(),
            auth_path: digests[2 * MSG_BITS..].to_vec(),
        })
    }
}
