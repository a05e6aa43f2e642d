//! Node identities: Ed25519 keypairs whose NodeId is the double SHA-256 of the
//! public key, generated under a static proof-of-work puzzle.

use std::fmt;

use chacha20poly1305::aead::{Aead, KeyInit};
use chacha20poly1305::{ChaCha20Poly1305, Key, Nonce};
use ed25519_dalek::{Signer, SigningKey, Verifier, VerifyingKey};
use rand::RngCore;
use sha2::{Digest, Sha256};

use crate::multiformats::varint::{self, Reader};
use crate::multiformats::{FormatError, Multihash};

/// Highest puzzle difficulty accepted by [`generate_identity`].
pub const MAX_DIFFICULTY: u32 = 24;
const FILE_VERSION: u8 = 1;
const KDF_ROUNDS: u32 = 10_000;

#[derive(Debug, thiserror::Error)]
pub enum IdentityError {
    #[error("difficulty {0} exceeds the limit of {MAX_DIFFICULTY}")]
    DifficultyTooHigh(u32),
    #[error("malformed key: {0}")]
    Key(String),
    #[error("identity file: {0}")]
    File(String),
    #[error("wrong passphrase or corrupted private key")]
    Passphrase,
    #[error(transparent)]
    Format(#[from] FormatError),
}

/// Hash of the hash of a public key.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(Multihash);

impl NodeId {
    pub fn from_public_key(public_key: &[u8]) -> Self {
        let inner = Sha256::digest(public_key);
        NodeId(Multihash::sha256(&inner))
    }

    pub fn from_multihash(mh: Multihash) -> Self {
        NodeId(mh)
    }

    pub fn as_multihash(&self) -> &Multihash {
        &self.0
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.0.to_bytes()
    }

    pub fn xor_key(&self) -> [u8; 32] {
        self.0.xor_key()
    }

    /// Leading zero bits of the digest, header bytes excluded.
    pub fn leading_zero_bits(&self) -> u32 {
        leading_zero_bits(self.0.digest())
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

impl fmt::Debug for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = self.0.to_base58();
        write!(f, "NodeId({})", &s[s.len().saturating_sub(8)..])
    }
}

pub fn leading_zero_bits(bytes: &[u8]) -> u32 {
    let mut count = 0;
    for &b in bytes {
        if b == 0 {
            count += 8;
        } else {
            count += b.leading_zeros();
            break;
        }
    }
    count
}

/// A node's keypair together with its derived NodeId.
#[derive(Clone)]
pub struct NodeIdentity {
    node_id: NodeId,
    signing_key: SigningKey,
}

impl fmt::Debug for NodeIdentity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NodeIdentity").field("node_id", &self.node_id).finish_non_exhaustive()
    }
}

/// Generates keypairs from `rng` until `hash(hash(pubkey))` has at least
/// `difficulty` leading zero bits.
pub fn generate_identity<R: RngCore + ?Sized>(difficulty: u32, rng: &mut R) -> Result<NodeIdentity, IdentityError> {
    if difficulty > MAX_DIFFICULTY {
        return Err(IdentityError::DifficultyTooHigh(difficulty));
    }
    loop {
        let mut seed = [0u8; 32];
        rng.fill_bytes(&mut seed);
        let identity = NodeIdentity::from_secret(seed);
        if identity.node_id.leading_zero_bits() >= difficulty {
            return Ok(identity);
        }
    }
}

impl NodeIdentity {
    pub fn from_secret(secret: [u8; 32]) -> Self {
        let signing_key = SigningKey::from_bytes(&secret);
        let node_id = NodeId::from_public_key(signing_key.verifying_key().as_bytes());
        NodeIdentity { node_id, signing_key }
    }

    pub fn node_id(&self) -> &NodeId {
        &self.node_id
    }

    pub fn public_key(&self) -> [u8; 32] {
        self.signing_key.verifying_key().to_bytes()
    }

    pub fn sign(&self, payload: &[u8]) -> Signature {
        let payload_hash = Multihash::sha256(payload);
        let sig = self.signing_key.sign(&payload_hash.to_bytes());
        Signature { signer: self.node_id.clone(), payload_hash, sig_bytes: sig.to_bytes().to_vec() }
    }

    /// Serializes to the identity file format, with the private key sealed
    /// under a key derived from `passphrase` (may be empty).
    pub fn to_file_bytes<R: RngCore + ?Sized>(&self, passphrase: &str, rng: &mut R) -> Vec<u8> {
        let mut salt = [0u8; 16];
        let mut nonce = [0u8; 12];
        rng.fill_bytes(&mut salt);
        rng.fill_bytes(&mut nonce);
        let cipher = ChaCha20Poly1305::new(&passphrase_key(passphrase, &salt));
        let sealed = cipher
            .encrypt(Nonce::from_slice(&nonce), self.signing_key.to_bytes().as_slice())
            .expect("encrypting 32 bytes cannot fail");
        let mut blob = Vec::with_capacity(16 + 12 + sealed.len());
        blob.extend_from_slice(&salt);
        blob.extend_from_slice(&nonce);
        blob.extend_from_slice(&sealed);

        let mut out = vec![FILE_VERSION];
        out.extend_from_slice(&self.node_id.to_bytes());
        varint::write_prefixed(&self.public_key(), &mut out);
        varint::write_prefixed(&blob, &mut out);
        out
    }

    pub fn from_file_bytes(raw: &[u8], passphrase: &str) -> Result<Self, IdentityError> {
        let mut reader = Reader::new(raw);
        let version = reader.byte()?;
        if version != FILE_VERSION {
            return Err(IdentityError::File(format!("unsupported version {version}")));
        }
        let node_id = NodeId(Multihash::read(&mut reader)?);
        let public_key = reader.prefixed()?.to_vec();
        let blob = reader.prefixed()?;
        if !reader.is_empty() {
            return Err(IdentityError::File("trailing bytes".into()));
        }
        if blob.len() < 28 {
            return Err(IdentityError::File("private key blob too short".into()));
        }
        let (salt, rest) = blob.split_at(16);
        let (nonce, sealed) = rest.split_at(12);
        let cipher = ChaCha20Poly1305::new(&passphrase_key(passphrase, salt));
        let secret = cipher.decrypt(Nonce::from_slice(nonce), sealed).map_err(|_| IdentityError::Passphrase)?;
        let secret: [u8; 32] = secret.try_into().map_err(|_| IdentityError::Key("private key length".into()))?;
        let identity = NodeIdentity::from_secret(secret);
        if identity.public_key().as_slice() != public_key || identity.node_id != node_id {
            return Err(IdentityError::File("stored node id or public key does not match private key".into()));
        }
        Ok(identity)
    }
}

fn passphrase_key(passphrase: &str, salt: &[u8]) -> Key {
    let mut key = [0u8; 32];
    pbkdf2::pbkdf2_hmac::<Sha256>(passphrase.as_bytes(), salt, KDF_ROUNDS, &mut key);
    Key::from(key)
}

/// Handshake check: the presented key must hash to the claimed id and the id
/// must satisfy the puzzle. A reject means the connection must be dropped.
pub fn verify_peer(claimed_id: &NodeId, presented_pubkey: &[u8], difficulty: u32) -> bool {
    NodeId::from_public_key(presented_pubkey) == *claimed_id && claimed_id.leading_zero_bits() >= difficulty
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Signature {
    pub signer: NodeId,
    pub payload_hash: Multihash,
    pub sig_bytes: Vec<u8>,
}

impl Signature {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.signer.to_bytes();
        out.extend_from_slice(&self.payload_hash.to_bytes());
        varint::write_prefixed(&self.sig_bytes, &mut out);
        out
    }

    pub fn read(reader: &mut Reader<'_>) -> Result<Self, FormatError> {
        let signer = NodeId(Multihash::read(reader)?);
        let payload_hash = Multihash::read(reader)?;
        let sig_bytes = reader.prefixed()?.to_vec();
        Ok(Signature { signer, payload_hash, sig_bytes })
    }
}

/// Verifies `signature` over `payload` with `public_key`. Returns `Ok(false)`
/// for any mismatch and an error only when the key bytes are malformed.
pub fn verify_sig(public_key: &[u8], payload: &[u8], signature: &Signature) -> Result<bool, IdentityError> {
    let key_bytes: [u8; 32] =
        public_key.try_into().map_err(|_| IdentityError::Key(format!("expected 32 bytes, got {}", public_key.len())))?;
    let key = VerifyingKey::from_bytes(&key_bytes).map_err(|e| IdentityError::Key(e.to_string()))?;
    if NodeId::from_public_key(public_key) != signature.signer {
        return Ok(false);
    }
    if signature.payload_hash != Multihash::sha256(payload) {
        return Ok(false);
    }
    let Ok(sig_bytes) = <[u8; 64]>::try_from(signature.sig_bytes.as_slice()) else {
        return Ok(false);
    };
    let sig = ed25519_dalek::Signature::from_bytes(&sig_bytes);
    Ok(key.verify(&signature.payload_hash.to_bytes(), &sig).is_ok())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn rng(seed: u64) -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(seed)
    }

    #[test]
    fn zero_difficulty_accepts_first_keypair() {
        let mut a = rng(1);
        let mut b = rng(1);
        let id = generate_identity(0, &mut a).unwrap();
        let mut seed = [0u8; 32];
        b.fill_bytes(&mut seed);
        assert_eq!(id.public_key(), NodeIdentity::from_secret(seed).public_key());
    }

    #[test]
    fn difficulty_eight_gives_zero_leading_byte() {
        let id = generate_identity(8, &mut rng(7)).unwrap();
        let recomputed = Sha256::digest(Sha256::digest(id.public_key()));
        assert_eq!(recomputed[0], 0);
        assert_eq!(id.node_id().as_multihash().digest(), recomputed.as_slice());
        assert!(verify_peer(id.node_id(), &id.public_key(), 8));
    }

    #[test]
    fn difficulty_guard() {
        assert!(matches!(generate_identity(30, &mut rng(0)), Err(IdentityError::DifficultyTooHigh(30))));
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_identity(4, &mut rng(99)).unwrap();
        let b = generate_identity(4, &mut rng(99)).unwrap();
        assert_eq!(a.node_id(), b.node_id());
    }

    #[test]
    fn verify_peer_rejections() {
        let a = generate_identity(0, &mut rng(2)).unwrap();
        let b = generate_identity(0, &mut rng(3)).unwrap();
        assert!(verify_peer(a.node_id(), &a.public_key(), 0));
        assert!(!verify_peer(a.node_id(), &b.public_key(), 0));
        // find an identity that fails the difficulty-8 puzzle
        let mut r = rng(4);
        let weak = loop {
            let id = generate_identity(0, &mut r).unwrap();
            if id.node_id().leading_zero_bits() < 8 {
                break id;
            }
        };
        assert!(!verify_peer(weak.node_id(), &weak.public_key(), 8));
    }

    #[test]
    fn puzzle_is_monotone() {
        let id = generate_identity(10, &mut rng(5)).unwrap();
        for d in 0..=10 {
            assert!(verify_peer(id.node_id(), &id.public_key(), d));
        }
    }

    #[test]
    fn sign_and_verify() {
        let a = generate_identity(0, &mut rng(10)).unwrap();
        let b = generate_identity(0, &mut rng(11)).unwrap();
        let sig = a.sign(b"hello");
        assert!(verify_sig(&a.public_key(), b"hello", &sig).unwrap());
        assert!(!verify_sig(&a.public_key(), b"hellp", &sig).unwrap());
        assert!(!verify_sig(&b.public_key(), b"hello", &sig).unwrap());
        assert!(matches!(verify_sig(&[1, 2, 3], b"hello", &sig), Err(IdentityError::Key(_))));
    }

    #[test]
    fn single_bit_flips_never_verify() {
        let id = generate_identity(0, &mut rng(12)).unwrap();
        let mut r = rng(13);
        for _ in 0..1000 {
            let mut payload = vec![0u8; 1 + (r.next_u32() % 64) as usize];
            r.fill_bytes(&mut payload);
            let sig = id.sign(&payload);
            let mut flipped = payload.clone();
            let bit = r.next_u32() as usize % (flipped.len() * 8);
            flipped[bit / 8] ^= 1 << (bit % 8);
            assert!(!verify_sig(&id.public_key(), &flipped, &sig).unwrap());
            let mut bad_sig = sig.clone();
            let bit = r.next_u32() as usize % (bad_sig.sig_bytes.len() * 8);
            bad_sig.sig_bytes[bit / 8] ^= 1 << (bit % 8);
            assert!(!verify_sig(&id.public_key(), &payload, &bad_sig).unwrap());
        }
    }

    #[test]
    fn identity_file_round_trip() {
        let id = generate_identity(2, &mut rng(20)).unwrap();
        let bytes = id.to_file_bytes("hunter2", &mut rng(21));
        assert_eq!(bytes[0], FILE_VERSION);
        let back = NodeIdentity::from_file_bytes(&bytes, "hunter2").unwrap();
        assert_eq!(back.node_id(), id.node_id());
        assert!(matches!(NodeIdentity::from_file_bytes(&bytes, "wrong"), Err(IdentityError::Passphrase)));
        let plain = id.to_file_bytes("", &mut rng(22));
        assert!(NodeIdentity::from_file_bytes(&plain, "").is_ok());
    }
}
