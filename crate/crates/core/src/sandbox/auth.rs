//! Session identity. A session carries `uid_h = H(uid ‖ funit ‖ sk)`; the
//! secret key `sk` never leaves the monitor, so a component cannot mint a
//! digest for a uid or component it was not given.

use std::fmt;
use std::time::Instant;

use rand::RngCore;
use sha2::{Digest, Sha256};

/// Separator between digest inputs. Rejected inside uids so concatenations
/// stay unambiguous.
pub const SEPARATOR: u8 = 0x1F;

pub fn digest(uid: &str, funit: &str, sk: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(uid.as_bytes());
    h.update([SEPARATOR]);
    h.update(funit.as_bytes());
    h.update([SEPARATOR]);
    h.update(sk);
    hex::encode(h.finalize())
}

/// 256-bit monitor secret. `Debug` never prints the bytes.
#[derive(Clone, PartialEq, Eq)]
pub struct SecretKey([u8; 32]);

impl SecretKey {
    pub fn generate() -> Self {
        let mut b = [0u8; 32];
        rand::rngs::OsRng.fill_bytes(&mut b);
        Self(b)
    }

    pub fn from_bytes(b: [u8; 32]) -> Self {
        Self(b)
    }

    pub(crate) fn from_hex(s: &str) -> Option<Self> {
        let v = hex::decode(s).ok()?;
        Some(Self(v.try_into().ok()?))
    }

    pub(crate) fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub(crate) fn digest(&self, uid: &str, funit: &str) -> String {
        digest(uid, funit, &self.0)
    }
}

impl fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SecretKey(..)")
    }
}

pub fn valid_uid(uid: &str) -> bool {
    !uid.is_empty() && !uid.chars().any(|c| c.is_control())
}

/// An authenticated channel between one component and the monitor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Session {
    id: u64,
    funit: String,
    uid: String,
    uid_h: String,
    opened_at: Instant,
}

impl Session {
    pub(crate) fn open(id: u64, funit: &str, uid: &str, sk: &SecretKey) -> Self {
        Self { id, funit: funit.to_owned(), uid: uid.to_owned(), uid_h: sk.digest(uid, funit), opened_at: Instant::now() }
    }

    /// A session assembled outside the monitor, as a misbehaving component
    /// would present it. The monitor rejects it unless `uid_h` verifies.
    pub fn from_parts(funit: &str, uid: &str, uid_h: &str) -> Self {
        Self { id: 0, funit: funit.to_owned(), uid: uid.to_owned(), uid_h: uid_h.to_owned(), opened_at: Instant::now() }
    }

    pub fn id(&self) -> u64 {
        self.id
    }
    pub fn funit(&self) -> &str {
        &self.funit
    }
    pub fn uid(&self) -> &str {
        &self.uid
    }
    pub fn uid_h(&self) -> &str {
        &self.uid_h
    }
    pub fn opened_at(&self) -> Instant {
        self.opened_at
    }

    /// Replaces the claimed uid, keeping the digest.
    pub fn with_uid(&self, uid: &str) -> Self {
        Self { uid: uid.to_owned(), ..self.clone() }
    }
}

/// Constant-time check of `session.uid_h` against `H(uid ‖ funit ‖ sk)`.
pub(crate) fn verify(sk: &SecretKey, session: &Session, funit: &str) -> bool {
    let expected = sk.digest(&session.uid, funit);
    let (a, b) = (expected.as_bytes(), session.uid_h.as_bytes());
    if a.len() != b.len() {
        return false;
    }
    a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fixed() -> SecretKey {
        let mut b = [0u8; 32];
        for (i, x) in b.iter_mut().enumerate() {
            *x = i as u8;
        }
        SecretKey::from_bytes(b)
    }

    #[test]
    fn digest_matches_reference() {
        // SHA-256 over b"alice\x1fLiveSearch\x1f" + bytes(range(32)), computed with hashlib.
        assert_eq!(fixed().digest("alice", "LiveSearch"), "bd35d8f249b2180cf801930538aa372a638413949d0a4850e43184657a19e9cb");
        assert_eq!(fixed().digest("alice", "Groups"), "240b5a387593a31a4fa669f9a97e0ca9cb55bdd00c54f3b6d308b572929b9699");
    }

    #[test]
    fn debug_hides_key() {
        assert_eq!(format!("{:?}", fixed()), "SecretKey(..)");
        assert_eq!(SecretKey::from_hex(&fixed().to_hex()), Some(fixed()));
    }

    #[test]
    fn verify_binds_uid_and_component() {
        let sk = fixed();
        let s = Session::open(1, "Groups", "alice", &sk);
        assert!(verify(&sk, &s, "Groups"));
        assert!(!verify(&sk, &s, "Messaging"));
        assert!(!verify(&sk, &s.with_uid("bob"), "Groups"));
        assert!(!verify(&sk, &Session::from_parts("Groups", "alice", "00"), "Groups"));
    }

    proptest! {
        #[test]
        fn forged_identity_never_verifies(uid in "[a-z]{1,6}", other in "[a-z]{1,6}", funit in "[A-Z][a-z]{0,5}", junk in "[0-9a-f]{64}") {
            let sk = fixed();
            let s = Session::open(1, &funit, &uid, &sk);
            prop_assert!(verify(&sk, &s, &funit));
            if other != uid {
                prop_assert!(!verify(&sk, &s.with_uid(&other), &funit));
            }
            if junk != s.uid_h() {
                prop_assert!(!verify(&sk, &Session::from_parts(&funit, &uid, &junk), &funit));
            }
        }
    }
}
