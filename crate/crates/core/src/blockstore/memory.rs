use std::collections::BTreeMap;
use std::sync::{Mutex, MutexGuard};

use super::{Block, BlockStore, BlockstoreError, PinOp, PinSet, DEFAULT_MAX_BLOCK_SIZE};
use crate::multiformats::Multihash;

#[derive(Default)]
struct Inner {
    blocks: BTreeMap<Multihash, Vec<u8>>,
    access: BTreeMap<Multihash, u64>,
    clock: u64,
    pins: PinSet,
}

/// Purely in-memory store used by simulations.
pub struct MemoryStore {
    inner: Mutex<Inner>,
    maintenance: Mutex<()>,
    max_block_size: usize,
}

impl Default for MemoryStore {
    fn default() -> Self {
        Self::new()
    }
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::with_max_block_size(DEFAULT_MAX_BLOCK_SIZE)
    }

    pub fn with_max_block_size(max_block_size: usize) -> Self {
        MemoryStore { inner: Mutex::new(Inner::default()), maintenance: Mutex::new(()), max_block_size }
    }

    /// Overwrites stored bytes without re-keying. Test hook for corruption.
    pub fn tamper(&self, key: &Multihash, f: impl FnOnce(&mut Vec<u8>)) -> bool {
        let mut inner = self.inner.lock().unwrap();
        inner.blocks.get_mut(key).map(f).is_some()
    }

    fn touch(inner: &mut Inner, key: &Multihash) {
        inner.clock += 1;
        let now = inner.clock;
        inner.access.insert(key.clone(), now);
    }
}

impl BlockStore for MemoryStore {
    fn max_block_size(&self) -> usize {
        self.max_block_size
    }

    fn put_block(&self, block: Block) -> Result<(), BlockstoreError> {
        if block.bytes.len() > self.max_block_size {
            return Err(BlockstoreError::BlockTooLarge { size: block.bytes.len(), max: self.max_block_size });
        }
        let mut inner = self.inner.lock().unwrap();
        Self::touch(&mut inner, &block.key);
        inner.blocks.entry(block.key).or_insert(block.bytes);
        Ok(())
    }

    fn get(&self, key: &Multihash) -> Result<Option<Vec<u8>>, BlockstoreError> {
        let mut inner = self.inner.lock().unwrap();
        let Some(bytes) = inner.blocks.get(key).cloned() else {
            return Ok(None);
        };
        if !key.verify(&bytes)? {
            inner.blocks.remove(key);
            inner.access.remove(key);
            return Err(BlockstoreError::Integrity(key.clone()));
        }
        Self::touch(&mut inner, key);
        Ok(Some(bytes))
    }

    fn has(&self, key: &Multihash) -> bool {
        self.inner.lock().unwrap().blocks.contains_key(key)
    }

    fn remove(&self, key: &Multihash) -> Result<bool, BlockstoreError> {
        let mut inner = self.inner.lock().unwrap();
        inner.access.remove(key);
        Ok(inner.blocks.remove(key).is_some())
    }

    fn keys(&self) -> Vec<Multihash> {
        self.inner.lock().unwrap().blocks.keys().cloned().collect()
    }

    fn last_access(&self, key: &Multihash) -> Option<u64> {
        self.inner.lock().unwrap().access.get(key).copied()
    }

    fn pins(&self) -> PinSet {
        self.inner.lock().unwrap().pins.clone()
    }

    fn apply_pin(&self, op: PinOp) -> Result<(), BlockstoreError> {
        self.inner.lock().unwrap().pins.apply(&op);
        Ok(())
    }

    fn maintenance(&self) -> MutexGuard<'_, ()> {
        self.maintenance.lock().unwrap()
    }

    fn len(&self) -> usize {
        self.inner.lock().unwrap().blocks.len()
    }

    fn total_bytes(&self) -> Result<u64, BlockstoreError> {
        Ok(self.inner.lock().unwrap().blocks.values().map(|b| b.len() as u64).sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn put_is_idempotent() {
        let store = MemoryStore::new();
        let a = store.put(b"hello").unwrap();
        let b = store.put(b"hello").unwrap();
        assert_eq!(a, b);
        assert_eq!(store.len(), 1);
    }

    #[test]
    fn empty_block() {
        let store = MemoryStore::new();
        let key = store.put(b"").unwrap();
        assert_eq!(key, Multihash::sha256(b""));
        assert_eq!(store.get(&key).unwrap(), Some(vec![]));
    }

    #[test]
    fn size_guard() {
        let store = MemoryStore::with_max_block_size(256 * 1024);
        let err = store.put(&vec![0u8; 256 * 1024 + 1]).unwrap_err();
        assert!(matches!(err, BlockstoreError::BlockTooLarge { .. }));
        assert!(store.put(&vec![0u8; 256 * 1024]).is_ok());
    }

    #[test]
    fn unknown_and_tampered() {
        let store = MemoryStore::new();
        assert_eq!(store.get(&Multihash::sha256(b"nope")).unwrap(), None);
        let key = store.put(b"data").unwrap();
        store.tamper(&key, |b| b[0] ^= 1);
        assert!(matches!(store.get(&key), Err(BlockstoreError::Integrity(_))));
        assert!(!store.has(&key), "corrupt block is quarantined");
    }
}
