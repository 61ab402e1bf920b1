use sha2::{Digest as _, Sha256};

pub type Digest = [u8; 32];

/// The single 256-bit hash every scheme in this crate is built on.
pub trait HashFunction: Send + Sync {
    fn name(&self) -> &str;

    fn hash(&self, data: &[u8]) -> Digest;

    /// Hash of the concatenation of `parts`.
    fn hash_parts(&self, parts: &[&[u8]]) -> Digest {
        self.hash(&parts.concat())
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Sha256Hash;

impl HashFunction for Sha256Hash {
    fn name(&self) -> &str {
        "sha256"
    }

    fn hash(&self, data: &[u8]) -> Digest {
        Sha256::digest(data).into()
    }

    fn hash_parts(&self, parts: &[&[u8]]) -> Digest {
        let mut h = Sha256::new();
        for p in parts {
            h.update(p);
        }
        h.finalize().into()
    }
}

/// Resolves a hash function by its configured name.
pub fn hash_by_name(name: &str) -> Option<Box<dyn HashFunction>> {
    match name {
        "sha256" | "sha-256" => Some(Box::new(Sha256Hash)),
        _ => None,
    }
}

/// SHA-256("abc") from FIPS 180-2, used by the preflight self-test.
pub const SHA256_ABC: &str = "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad";

pub fn self_test(h: &dyn HashFunction) -> Result<(), String> {
    let got = hex::encode(h.hash(b"abc"));
    if got == SHA256_ABC {
        Ok(())
    } else {
        Err(format!("{}(\"abc\") = {got}, expected {SHA256_ABC}", h.name()))
    }
}
