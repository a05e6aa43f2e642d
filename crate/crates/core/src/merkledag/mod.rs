//! Content-addressed objects: canonical encoding, path resolution, reference
//! walks, publishing, and signed or encrypted object frames.

mod codec;
mod frame;
mod text;

use std::collections::BTreeSet;

pub use codec::{DagLink, DagObject};
pub use frame::{
    decrypt_object, encrypt_object, sign_object, verify_object, EncryptedObject, Frame, Keychain, SignedObject,
};
pub use text::{from_text, to_text};

use crate::blockstore::{BlockStore, BlockstoreError};
use crate::identity::NodeIdentity;
use crate::multiformats::Multihash;
use crate::routing::{Routing, RoutingError};

#[derive(Debug, thiserror::Error)]
pub enum DagError {
    #[error("malformed object at byte {offset}: {reason}")]
    Decode { offset: usize, reason: String },
    #[error("path component {index} ({component:?}) not found")]
    PathNotFound { index: usize, component: String },
    #[error("could not fetch {key}: {reason}")]
    Fetch { key: Multihash, reason: String },
    #[error("signature does not verify")]
    Signature,
    #[error("public key {0} not found")]
    KeyNotFound(Multihash),
    #[error("no key in keychain for tag {0}")]
    NoKey(String),
    #[error("decryption failed")]
    Decrypt,
    #[error("link {name:?} declares size {declared}, target has {actual}")]
    SizeMismatch { name: String, declared: u64, actual: u64 },
    #[error("publish failed: {0}")]
    Publish(#[from] RoutingError),
    #[error("text form: {0}")]
    Text(String),
    #[error(transparent)]
    Store(#[from] BlockstoreError),
}

impl DagError {
    pub fn class(&self) -> &'static str {
        match self {
            DagError::Decode { .. } => "DecodeError",
            DagError::PathNotFound { .. } => "PathNotFound",
            DagError::Fetch { .. } => "FetchError",
            DagError::Signature => "SignatureError",
            DagError::KeyNotFound(_) => "KeyNotFound",
            DagError::NoKey(_) => "NoKey",
            DagError::Decrypt => "DecryptError",
            DagError::SizeMismatch { .. } => "SizeMismatch",
            DagError::Publish(_) => "PublishError",
            DagError::Text(_) => "TextError",
            DagError::Store(e) => e.class(),
        }
    }
}

/// Source of decoded objects for traversal.
pub trait Fetch {
    fn fetch(&mut self, key: &Multihash) -> Result<DagObject, DagError>;
}

impl<F: FnMut(&Multihash) -> Result<DagObject, DagError>> Fetch for F {
    fn fetch(&mut self, key: &Multihash) -> Result<DagObject, DagError> {
        self(key)
    }
}

/// Fetches objects from a block store, unwrapping signed frames (verified
/// against public key blocks held in the same store) and encrypted frames
/// (opened with the keychain, if any).
pub struct StoreFetcher<'a, S: BlockStore + ?Sized> {
    store: &'a S,
    keychain: Option<&'a Keychain>,
    fetched: usize,
}

impl<'a, S: BlockStore + ?Sized> StoreFetcher<'a, S> {
    pub fn new(store: &'a S) -> Self {
        StoreFetcher { store, keychain: None, fetched: 0 }
    }

    pub fn with_keychain(store: &'a S, keychain: &'a Keychain) -> Self {
        StoreFetcher { store, keychain: Some(keychain), fetched: 0 }
    }

    /// Number of objects fetched so far.
    pub fn fetch_count(&self) -> usize {
        self.fetched
    }
}

impl<S: BlockStore + ?Sized> Fetch for StoreFetcher<'_, S> {
    fn fetch(&mut self, key: &Multihash) -> Result<DagObject, DagError> {
        self.fetched += 1;
        let bytes = self
            .store
            .get(key)?
            .ok_or_else(|| DagError::Fetch { key: key.clone(), reason: "not in local store".into() })?;
        let object = DagObject::decode(&bytes)?;
        match Frame::detect(&object)? {
            Frame::Plain => Ok(object),
            Frame::Signed(signed) => verify_object(&signed, &|k: &Multihash| self.store.get(k).ok().flatten()),
            Frame::Encrypted(enc) => {
                let empty = Keychain::default();
                decrypt_object(&enc, self.keychain.unwrap_or(&empty))
            }
        }
    }
}

/// Stores `object` and returns its key.
pub fn put_object<S: BlockStore + ?Sized>(store: &S, object: &DagObject) -> Result<Multihash, DagError> {
    Ok(store.put(&object.encode())?)
}

/// Child keys of a stored block, for pinning, gc and fetching. A signed
/// frame contributes its inner object's links and the signer's key block;
/// encrypted frames and undecodable blocks have none.
pub fn block_links(_key: &Multihash, bytes: &[u8]) -> Vec<Multihash> {
    let Ok(object) = DagObject::decode(bytes) else {
        return Vec::new();
    };
    match Frame::detect(&object) {
        Ok(Frame::Signed(signed)) => {
            let mut out: Vec<Multihash> = DagObject::decode(&signed.object)
                .map(|o| o.links.into_iter().map(|l| l.hash).collect())
                .unwrap_or_default();
            out.push(signed.public_key);
            out
        }
        Ok(Frame::Plain) => object.links.into_iter().map(|l| l.hash).collect(),
        _ => Vec::new(),
    }
}

/// Follows `path` from `root` by link name; the empty path resolves to `root`.
pub fn resolve_path<F: Fetch + ?Sized>(root: &Multihash, path: &[&str], fetch: &mut F) -> Result<Multihash, DagError> {
    let mut current = root.clone();
    for (index, component) in path.iter().enumerate() {
        let object = fetch.fetch(&current)?;
        current = object
            .link(component)
            .ok_or_else(|| DagError::PathNotFound { index, component: component.to_string() })?
            .hash
            .clone();
    }
    Ok(current)
}

/// Splits a slash path into components, ignoring empty segments.
pub fn split_path(path: &str) -> Vec<&str> {
    path.split('/').filter(|c| !c.is_empty()).collect()
}

/// One row of `ls`: `<hash> <size> <name>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkRow {
    pub hash: Multihash,
    pub size: u64,
    pub name: String,
}

pub fn list_links<F: Fetch + ?Sized>(key: &Multihash, fetch: &mut F) -> Result<Vec<LinkRow>, DagError> {
    let object = fetch.fetch(key)?;
    Ok(object.links.into_iter().map(|l| LinkRow { hash: l.hash, size: l.size, name: l.name }).collect())
}

#[derive(Debug)]
pub struct Refs {
    /// Reachable keys in depth-first preorder, each once, root excluded.
    pub keys: Vec<Multihash>,
    /// Set when some object could not be fetched; `keys` is then partial.
    pub error: Option<DagError>,
}

pub fn refs_recursive<F: Fetch + ?Sized>(key: &Multihash, fetch: &mut F) -> Refs {
    let mut seen = BTreeSet::from([key.clone()]);
    let mut keys = Vec::new();
    // stack of pending children, reversed so the first link is visited first
    let mut stack = Vec::new();
    match fetch.fetch(key) {
        Ok(root) => stack.extend(root.links.into_iter().rev().map(|l| l.hash)),
        Err(e) => return Refs { keys, error: Some(e) },
    }
    let mut error = None;
    while let Some(next) = stack.pop() {
        if !seen.insert(next.clone()) {
            continue;
        }
        keys.push(next.clone());
        match fetch.fetch(&next) {
            Ok(obj) => stack.extend(obj.links.into_iter().rev().map(|l| l.hash)),
            Err(e) => {
                error.get_or_insert(e);
            }
        }
    }
    Refs { keys, error }
}

/// Checks every link's declared size against its fetched target.
pub fn verify_link_sizes<F: Fetch + ?Sized>(object: &DagObject, fetch: &mut F) -> Result<(), DagError> {
    for link in &object.links {
        let target = fetch.fetch(&link.hash)?;
        let actual = target.cumulative_size();
        if actual != link.size {
            return Err(DagError::SizeMismatch { name: link.name.clone(), declared: link.size, actual });
        }
    }
    Ok(())
}

/// Makes a stored object findable: announces its key as provided by this node.
pub fn publish<S: BlockStore + ?Sized, R: Routing + ?Sized>(
    store: &S,
    object: &DagObject,
    identity: &NodeIdentity,
    routing: &mut R,
) -> Result<Multihash, DagError> {
    let key = object.key();
    if !store.has(&key) {
        return Err(DagError::Fetch { key, reason: "publish requires the object to be stored locally".into() });
    }
    routing.provide(&key, identity)?;
    Ok(key)
}
