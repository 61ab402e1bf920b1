use std::sync::atomic::{AtomicU64, Ordering};

use qrt_core::RandomSource;
use qrt_pqc::attacks::{attack_ots_reuse, Verdict};
use qrt_pqc::hash::{Digest, HashFunction, Sha256Hash};
use qrt_pqc::lamport::{lamport_keygen, lamport_sign, lamport_verify};
use qrt_pqc::merkle::{merkle_keygen, merkle_sign, merkle_verify};

/// SHA-256 with a domain prefix, counting every call.
#[derive(Default)]
struct CountingStub {
    calls: AtomicU64,
}

impl HashFunction for CountingStub {
    fn name(&self) -> &str {
        "counting-stub"
    }

    fn hash(&self, data: &[u8]) -> Digest {
        self.calls.fetch_add(1, Ordering::Relaxed);
        Sha256Hash.hash_parts(&[b"stub", data])
    }
}

#[test]
fn swapping_hash_changes_digests_not_logic() {
    let stub = CountingStub::default();
    let real = Sha256Hash;
    let msg = [0x42; 32];

    let mut a = lamport_keygen(&mut RandomSource::new(1, 0), &stub);
    let keygen_calls = stub.calls.load(Ordering::Relaxed);
    assert_eq!(keygen_calls, 512);
    let mut b = lamport_keygen(&mut RandomSource::new(1, 0), &real);
    assert_ne!(a.public().hashes, b.public().hashes);

    let sa = lamport_sign(&mut a, &msg).unwrap();
    let sb = lamport_sign(&mut b, &msg).unwrap();
    assert_eq!(sa, sb, "same preimages are revealed regardless of hash");
    assert!(lamport_verify(a.public(), &msg, &sa, &stub));
    assert_eq!(stub.calls.load(Ordering::Relaxed), keygen_calls + 256);
    assert!(!lamport_verify(a.public(), &msg, &sa, &real));

    let mut ks = merkle_keygen(2, &mut RandomSource::new(2, 0), &stub).unwrap();
    let ks_real = merkle_keygen(2, &mut RandomSource::new(2, 0), &real).unwrap();
    assert_ne!(ks.root(), ks_real.root());
    let sig = merkle_sign(&mut ks, &msg, &stub).unwrap();
    assert!(merkle_verify(&ks.root(), &msg, &sig, &stub));
    assert!(!merkle_verify(&ks.root(), &msg, &sig, &real));
}

#[test]
fn attack_battery_runs_under_stub() {
    let stub = CountingStub::default();
    let seed = 9;
    let mut k1 = lamport_keygen(&mut RandomSource::new(seed, 0), &stub);
    let mut k2 = lamport_keygen(&mut RandomSource::new(seed, 0), &stub);
    let s1 = lamport_sign(&mut k1, &[0; 32]).unwrap();
    let s2 = lamport_sign(&mut k2, &[0xff; 32]).unwrap();
    let out = attack_ots_reuse(k1.public(), (&[0; 32], &s1), (&[0xff; 32], &s2), &[0x3c; 32], &stub)
        .unwrap();
    assert_eq!(out.verdict, Verdict::Broken);
}
