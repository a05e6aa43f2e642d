//! Local block storage keyed by multihash, with direct and recursive pins and
//! low-water garbage collection.

mod fs;
mod memory;
mod pin;

use std::sync::MutexGuard;

pub use fs::FsStore;
pub use memory::MemoryStore;
pub use pin::{gc, pin, pin_closure, unpin, PinKind, PinOp, PinSet};

use crate::multiformats::{FormatError, Multihash};

pub const DEFAULT_MAX_BLOCK_SIZE: usize = 1 << 20;

#[derive(Debug, thiserror::Error)]
pub enum BlockstoreError {
    #[error("block of {size} bytes exceeds the {max} byte limit")]
    BlockTooLarge { size: usize, max: usize },
    #[error("stored block {0} failed its integrity check and was quarantined")]
    Integrity(Multihash),
    #[error("block does not hash to {0}")]
    HashMismatch(Multihash),
    #[error("pin incomplete, missing {} block(s)", .0.len())]
    PartialPin(Vec<Multihash>),
    #[error("store error: {0}")]
    Store(#[from] std::io::Error),
    #[error(transparent)]
    Format(#[from] FormatError),
}

impl BlockstoreError {
    pub fn class(&self) -> &'static str {
        match self {
            BlockstoreError::BlockTooLarge { .. } => "BlockTooLarge",
            BlockstoreError::Integrity(_) | BlockstoreError::HashMismatch(_) => "IntegrityError",
            BlockstoreError::PartialPin(_) => "PartialPinError",
            BlockstoreError::Store(_) => "StoreError",
            BlockstoreError::Format(e) => e.class(),
        }
    }
}

/// A block whose key has been checked against its bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    key: Multihash,
    bytes: Vec<u8>,
}

impl Block {
    pub fn new(bytes: Vec<u8>) -> Self {
        Block { key: Multihash::sha256(&bytes), bytes }
    }

    pub fn verified(key: Multihash, bytes: Vec<u8>) -> Result<Self, BlockstoreError> {
        if key.verify(&bytes)? {
            Ok(Block { key, bytes })
        } else {
            Err(BlockstoreError::HashMismatch(key))
        }
    }

    pub fn key(&self) -> &Multihash {
        &self.key
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }
}

/// Storage contract shared by the in-memory and on-disk stores. All methods
/// take `&self`; stores synchronize internally so concurrent puts and gets
/// are allowed. Pinning and gc serialize on [`BlockStore::maintenance`].
pub trait BlockStore: Send + Sync {
    fn max_block_size(&self) -> usize;

    /// Stores an already verified block. Idempotent.
    fn put_block(&self, block: Block) -> Result<(), BlockstoreError>;

    /// Returns the stored bytes after re-verifying their hash.
    fn get(&self, key: &Multihash) -> Result<Option<Vec<u8>>, BlockstoreError>;

    fn has(&self, key: &Multihash) -> bool;

    fn remove(&self, key: &Multihash) -> Result<bool, BlockstoreError>;

    fn keys(&self) -> Vec<Multihash>;

    /// Logical access counter value of the last put or get, for gc ordering.
    fn last_access(&self, key: &Multihash) -> Option<u64>;

    fn pins(&self) -> PinSet;

    fn apply_pin(&self, op: PinOp) -> Result<(), BlockstoreError>;

    fn maintenance(&self) -> MutexGuard<'_, ()>;

    fn put(&self, bytes: &[u8]) -> Result<Multihash, BlockstoreError> {
        if bytes.len() > self.max_block_size() {
            return Err(BlockstoreError::BlockTooLarge { size: bytes.len(), max: self.max_block_size() });
        }
        let block = Block::new(bytes.to_vec());
        let key = block.key.clone();
        self.put_block(block)?;
        Ok(key)
    }

    fn len(&self) -> usize {
        self.keys().len()
    }

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Sum of stored block sizes.
    fn total_bytes(&self) -> Result<u64, BlockstoreError> {
        let mut total = 0;
        for key in self.keys() {
            total += self.get(&key)?.map_or(0, |b| b.len() as u64);
        }
        Ok(total)
    }
}

impl<T: BlockStore + ?Sized> BlockStore for std::sync::Arc<T> {
    fn max_block_size(&self) -> usize {
        (**self).max_block_size()
    }
    fn put_block(&self, block: Block) -> Result<(), BlockstoreError> {
        (**self).put_block(block)
    }
    fn get(&self, key: &Multihash) -> Result<Option<Vec<u8>>, BlockstoreError> {
        (**self).get(key)
    }
    fn has(&self, key: &Multihash) -> bool {
        (**self).has(key)
    }
    fn remove(&self, key: &Multihash) -> Result<bool, BlockstoreError> {
        (**self).remove(key)
    }
    fn keys(&self) -> Vec<Multihash> {
        (**self).keys()
    }
    fn last_access(&self, key: &Multihash) -> Option<u64> {
        (**self).last_access(key)
    }
    fn pins(&self) -> PinSet {
        (**self).pins()
    }
    fn apply_pin(&self, op: PinOp) -> Result<(), BlockstoreError> {
        (**self).apply_pin(op)
    }
    fn maintenance(&self) -> MutexGuard<'_, ()> {
        (**self).maintenance()
    }
}

/// Link enumeration used for recursive pins: given a block, its child keys.
pub type LinkResolver<'a> = dyn Fn(&Multihash, &[u8]) -> Vec<Multihash> + 'a;

