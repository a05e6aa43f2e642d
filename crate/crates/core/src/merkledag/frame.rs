//! Wrapper frames around canonical object bytes. A frame is itself stored as
//! a link-less object whose data starts with a magic prefix, so the inner
//! object's links stay hidden until the frame is opened.

use std::collections::BTreeMap;

use chacha20poly1305::aead::{Aead, KeyInit};
use chacha20poly1305::{ChaCha20Poly1305, Key, Nonce};
use sha2::{Digest, Sha256};

use super::{DagError, DagObject};
use crate::identity::{verify_sig, NodeIdentity, Signature};
use crate::multiformats::varint::{self, Reader};
use crate::multiformats::Multihash;

const SIGNED_MAGIC: &[u8] = b"\0ipfs/signed\0";
const ENCRYPTED_MAGIC: &[u8] = b"\0ipfs/encrypted\0";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignedObject {
    /// Canonical bytes of the wrapped object.
    pub object: Vec<u8>,
    pub signature: Vec<u8>,
    /// Key of the block holding the signer's raw public key.
    pub public_key: Multihash,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncryptedObject {
    /// Nonce followed by the authenticated ciphertext of the canonical bytes.
    pub object: Vec<u8>,
    pub tag: Vec<u8>,
}

/// Maps group tags to 32-byte symmetric keys.
#[derive(Debug, Clone, Default)]
pub struct Keychain {
    keys: BTreeMap<Vec<u8>, [u8; 32]>,
}

impl Keychain {
    pub fn insert(&mut self, tag: impl Into<Vec<u8>>, key: [u8; 32]) {
        self.keys.insert(tag.into(), key);
    }

    pub fn get(&self, tag: &[u8]) -> Option<&[u8; 32]> {
        self.keys.get(tag)
    }
}

pub enum Frame {
    Plain,
    Signed(SignedObject),
    Encrypted(EncryptedObject),
}

impl Frame {
    pub fn detect(object: &DagObject) -> Result<Frame, DagError> {
        if !object.links.is_empty() {
            return Ok(Frame::Plain);
        }
        let malformed = |e: crate::multiformats::FormatError| DagError::Decode { offset: 0, reason: format!("frame: {e}") };
        if let Some(rest) = object.data.strip_prefix(SIGNED_MAGIC) {
            let mut r = Reader::new(rest);
            let inner = r.prefixed().map_err(malformed)?.to_vec();
            let signature = r.prefixed().map_err(malformed)?.to_vec();
            let public_key = Multihash::read(&mut r).map_err(malformed)?;
            return Ok(Frame::Signed(SignedObject { object: inner, signature, public_key }));
        }
        if let Some(rest) = object.data.strip_prefix(ENCRYPTED_MAGIC) {
            let mut r = Reader::new(rest);
            let tag = r.prefixed().map_err(malformed)?.to_vec();
            let ciphertext = r.remaining().to_vec();
            return Ok(Frame::Encrypted(EncryptedObject { object: ciphertext, tag }));
        }
        Ok(Frame::Plain)
    }
}

impl SignedObject {
    pub fn to_dag(&self) -> DagObject {
        let mut data = SIGNED_MAGIC.to_vec();
        varint::write_prefixed(&self.object, &mut data);
        varint::write_prefixed(&self.signature, &mut data);
        data.extend_from_slice(&self.public_key.to_bytes());
        DagObject::leaf(data)
    }
}

impl EncryptedObject {
    pub fn to_dag(&self) -> DagObject {
        let mut data = ENCRYPTED_MAGIC.to_vec();
        varint::write_prefixed(&self.tag, &mut data);
        data.extend_from_slice(&self.object);
        DagObject::leaf(data)
    }
}

/// Signs the canonical bytes of `object`. The caller stores the public key
/// block (`identity.public_key()`) so verifiers can resolve it.
pub fn sign_object(object: &DagObject, identity: &NodeIdentity) -> SignedObject {
    let bytes = object.encode();
    let signature = identity.sign(&bytes).to_bytes();
    SignedObject { object: bytes, signature, public_key: Multihash::sha256(&identity.public_key()) }
}

pub fn verify_object(
    signed: &SignedObject,
    fetch_block: &dyn Fn(&Multihash) -> Option<Vec<u8>>,
) -> Result<DagObject, DagError> {
    let public_key = fetch_block(&signed.public_key).ok_or_else(|| DagError::KeyNotFound(signed.public_key.clone()))?;
    if !signed.public_key.verify(&public_key).unwrap_or(false) {
        return Err(DagError::KeyNotFound(signed.public_key.clone()));
    }
    let signature = Signature::read(&mut Reader::new(&signed.signature)).map_err(|_| DagError::Signature)?;
    match verify_sig(&public_key, &signed.object, &signature) {
        Ok(true) => DagObject::decode(&signed.object),
        _ => Err(DagError::Signature),
    }
}

fn nonce_for(key: &[u8; 32], plaintext: &[u8]) -> [u8; 12] {
    // deterministic nonce keeps encrypted frames content addressed
    let mut h = Sha256::new();
    h.update(key);
    h.update(plaintext);
    let digest = h.finalize();
    digest[..12].try_into().expect("12 of 32 bytes")
}

pub fn encrypt_object(object: &DagObject, key: &[u8; 32], tag: &[u8]) -> EncryptedObject {
    let plaintext = object.encode();
    let nonce = nonce_for(key, &plaintext);
    let cipher = ChaCha20Poly1305::new(Key::from_slice(key));
    let ciphertext = cipher.encrypt(Nonce::from_slice(&nonce), plaintext.as_slice()).expect("in-memory encryption");
    let mut out = nonce.to_vec();
    out.extend_from_slice(&ciphertext);
    EncryptedObject { object: out, tag: tag.to_vec() }
}

pub fn decrypt_object(encrypted: &EncryptedObject, keychain: &Keychain) -> Result<DagObject, DagError> {
    let key = keychain.get(&encrypted.tag).ok_or_else(|| DagError::NoKey(hex::encode(&encrypted.tag)))?;
    if encrypted.object.len() < 12 {
        return Err(DagError::Decrypt);
    }
    let (nonce, ciphertext) = encrypted.object.split_at(12);
    let cipher = ChaCha20Poly1305::new(Key::from_slice(key));
    let plaintext = cipher.decrypt(Nonce::from_slice(nonce), ciphertext).map_err(|_| DagError::Decrypt)?;
    DagObject::decode(&plaintext)
}
