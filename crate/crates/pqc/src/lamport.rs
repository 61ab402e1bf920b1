//! Lamport one-time signatures over 256-bit message digests.
//!
//! The secret key is 2 x 256 random 32-byte preimages; the public key their
//! hashes. Signing bit `i` of the message reveals `secret[bit_i][i]`. Message
//! bits are read most significant bit first.

use qrt_core::RandomSource;

use crate::hash::{Digest, HashFunction};
use crate::PqcError;

pub const MSG_BITS: usize = 256;

/// Bit `i` of a digest, MSB first.
pub fn msg_bit(msg: &Digest, i: usize) -> usize {
    ((msg[i / 8] >> (7 - i % 8)) & 1) as usize
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LamportPublicKey {
    /// `hashes[b][i] = H(secret[b][i])`.
    pub hashes: [Vec<Digest>; 2],
}

impl LamportPublicKey {
    pub fn to_bytes(&self) -> Vec<u8> {
        self.hashes.iter().flatten().flatten().copied().collect()
    }

    /// Digest committing to the whole public key; used as a Merkle leaf.
    pub fn digest(&self, h: &dyn HashFunction) -> Digest {
        h.hash(&self.to_bytes())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LamportSignature {
    pub preimages: Vec<Digest>,
}

impl LamportSignature {
    pub fn to_bytes(&self) -> Vec<u8> {
        self.preimages.iter().flatten().copied().collect()
    }
}

/// A one-time key pair. Deliberately not `Clone`: a key object can sign once.
#[derive(Debug)]
pub struct LamportKeyPair {
    secret: [Vec<Digest>; 2],
    public: LamportPublicKey,
    used: bool,
}

impl LamportKeyPair {
    /// Builds a key pair from explicit preimages (`secret[b][i]`).
    pub fn from_secret(secret: [Vec<Digest>; 2], h: &dyn HashFunction) -> Self {
        assert!(secret.iter().all(|half| half.len() == MSG_BITS));
        let public = LamportPublicKey {
            hashes: [
                secret[0].iter().map(|s| h.hash(s)).collect(),
                secret[1].iter().map(|s| h.hash(s)).collect(),
            ],
        };
        Self {
            secret,
            public,
            used: false,
        }
    }

    pub fn public(&self) -> &LamportPublicKey {
        &self.public
    }

    pub fn is_used(&self) -> bool {
        self.used
    }
}

pub fn lamport_keygen(rng: &mut RandomSource, h: &dyn HashFunction) -> LamportKeyPair {
    let mut half = || (0..MSG_BITS).map(|_| rng.bytes::<32>()).collect::<Vec<_>>();
    let zero = half();
    let one = half();
    LamportKeyPair::from_secret([zero, one], h)
}

/// Signs `msg`, consuming the key. Refuses a second use.
pub fn lamport_sign(kp: &mut LamportKeyPair, msg: &Digest) -> Result<LamportSignature, PqcError> {
    if kp.used {
        return Err(PqcError::KeyReuseRefused);
    }
    kp.used = true;
    Ok(LamportSignature {
        preimages: (0..MSG_BITS)
            .map(|i| kp.secret[msg_bit(msg, i)][i])
            .collect(),
    })
}

pub fn lamport_verify(
    public: &LamportPublicKey,
    msg: &Digest,
    sig: &LamportSignature,
    h: &dyn HashFunction,
) -> bool {
    sig.preimages.len() == MSG_BITS
        && public.hashes.iter().all(|half| half.len() == MSG_BITS)
        && (0..MSG_BITS).all(|i| h.hash(&sig.preimages[i]) == public.hashes[msg_bit(msg, i)][i])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hash::Sha256Hash;

    #[test]
    fn roundtrip_on_zero_digest() {
        let h = Sha256Hash;
        let mut kp = lamport_keygen(&mut RandomSource::new(1, 0), &h);
        let msg = [0u8; 32];
        let sig = lamport_sign(&mut kp, &msg).unwrap();
        assert!(lamport_verify(kp.public(), &msg, &sig, &h));
        assert!(kp.is_used());
    }

    #[test]
    fn every_single_bit_flip_fails() {
        let h = Sha256Hash;
        let mut kp = lamport_keygen(&mut RandomSource::new(2, 0), &h);
        let msg: Digest = RandomSource::new(3, 0).bytes();
        let sig = lamport_sign(&mut kp, &msg).unwrap();
        for i in 0..MSG_BITS {
            let mut m = msg;
            m[i / 8] ^= 0x80 >> (i % 8);
            assert!(!lamport_verify(kp.public(), &m, &sig, &h), "flip {i}");
        }
    }

    #[test]
    fn second_signature_refused() {
        let h = Sha256Hash;
        let mut kp = lamport_keygen(&mut RandomSource::new(1, 0), &h);
        lamport_sign(&mut kp, &[1; 32]).unwrap();
        assert_eq!(lamport_sign(&mut kp, &[1; 32]), Err(PqcError::KeyReuseRefused));
        assert_eq!(lamport_sign(&mut kp, &[2; 32]), Err(PqcError::KeyReuseRefused));
    }

    #[test]
    fn public_key_commits_to_secret() {
        let h = Sha256Hash;
        let mut rng = RandomSource::new(4, 0);
        let secret = [
            (0..MSG_BITS).map(|_| rng.bytes::<32>()).collect::<Vec<_>>(),
            (0..MSG_BITS).map(|_| rng.bytes::<32>()).collect::<Vec<_>>(),
        ];
        let kp = LamportKeyPair::from_secret(secret.clone(), &h);
        for b in 0..2 {
            for i in 0..MSG_BITS {
                assert_eq!(kp.public().hashes[b][i], h.hash(&secret[b][i]));
            }
        }
    }

    #[test]
    fn truncated_signature_rejected() {
        let h = Sha256Hash;
        let mut kp = lamport_keygen(&mut RandomSource::new(1, 0), &h);
        let mut sig = lamport_sign(&mut kp, &[0; 32]).unwrap();
        sig.preimages.pop();
        assert!(!lamport_verify(kp.public(), &[0; 32], &sig, &h));
    }
}
