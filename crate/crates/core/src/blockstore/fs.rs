use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, MutexGuard};

use super::{Block, BlockStore, BlockstoreError, PinOp, PinSet, DEFAULT_MAX_BLOCK_SIZE};
use crate::multiformats::Multihash;

const BLOCKS_DIR: &str = "blocks";
const TMP_DIR: &str = "tmp";
const QUARANTINE_DIR: &str = "quarantine";
const PIN_JOURNAL: &str = "pins";
const ACCESS_FILE: &str = "atime";

struct Inner {
    index: BTreeSet<Multihash>,
    access: BTreeMap<Multihash, u64>,
    clock: u64,
    pins: PinSet,
    tmp_seq: u64,
}

/// One file per block under `blocks/<first two chars>/<base58 key>`.
///
/// Blocks are written to `tmp/` and renamed into place, so a reopened store
/// only ever sees complete blocks. Pins live in an append-only journal.
pub struct FsStore {
    root: PathBuf,
    inner: Mutex<Inner>,
    maintenance: Mutex<()>,
    max_block_size: usize,
}

impl FsStore {
    pub fn open(root: impl AsRef<Path>) -> Result<Self, BlockstoreError> {
        Self::open_with_max_block_size(root, DEFAULT_MAX_BLOCK_SIZE)
    }

    pub fn open_with_max_block_size(root: impl AsRef<Path>, max_block_size: usize) -> Result<Self, BlockstoreError> {
        let root = root.as_ref().to_path_buf();
        for dir in [BLOCKS_DIR, TMP_DIR, QUARANTINE_DIR] {
            fs::create_dir_all(root.join(dir))?;
        }
        // leftovers from an interrupted put were never acknowledged
        for entry in fs::read_dir(root.join(TMP_DIR))? {
            fs::remove_file(entry?.path())?;
        }

        let mut index = BTreeSet::new();
        for shard in fs::read_dir(root.join(BLOCKS_DIR))? {
            let shard = shard?;
            if !shard.file_type()?.is_dir() {
                continue;
            }
            for entry in fs::read_dir(shard.path())? {
                let name = entry?.file_name();
                if let Some(key) = name.to_str().and_then(|n| n.parse::<Multihash>().ok()) {
                    index.insert(key);
                }
            }
        }

        let mut pins = PinSet::default();
        let journal = root.join(PIN_JOURNAL);
        if journal.exists() {
            for line in BufReader::new(File::open(&journal)?).lines() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let op = PinOp::parse_line(&line)
                    .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidData, format!("bad pin journal line {line:?}")))?;
                pins.apply(&op);
            }
        }

        let mut access = BTreeMap::new();
        let mut clock = 0;
        if let Ok(text) = fs::read_to_string(root.join(ACCESS_FILE)) {
            for line in text.lines() {
                let mut parts = line.split(' ');
                if let (Some(t), Some(k)) = (parts.next(), parts.next()) {
                    if let (Ok(t), Ok(k)) = (t.parse::<u64>(), k.parse::<Multihash>()) {
                        if index.contains(&k) {
                            clock = clock.max(t);
                            access.insert(k, t);
                        }
                    }
                }
            }
        }

        Ok(FsStore {
            root,
            inner: Mutex::new(Inner { index, access, clock, pins, tmp_seq: 0 }),
            maintenance: Mutex::new(()),
            max_block_size,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn block_path(&self, key: &Multihash) -> PathBuf {
        let name = key.to_base58();
        let shard: String = name.chars().take(2).collect();
        self.root.join(BLOCKS_DIR).join(shard).join(name)
    }

    /// Best-effort persistence of gc access ordering.
    pub fn save_access_times(&self) -> Result<(), BlockstoreError> {
        let inner = self.inner.lock().unwrap();
        let mut text = String::new();
        for (k, t) in &inner.access {
            text.push_str(&format!("{t} {k}\n"));
        }
        let tmp = self.root.join(TMP_DIR).join("atime.tmp");
        fs::write(&tmp, text)?;
        fs::rename(tmp, self.root.join(ACCESS_FILE))?;
        Ok(())
    }

    fn touch(inner: &mut Inner, key: &Multihash) {
        inner.clock += 1;
        let now = inner.clock;
        inner.access.insert(key.clone(), now);
    }
}

impl BlockStore for FsStore {
    fn max_block_size(&self) -> usize {
        self.max_block_size
    }

    fn put_block(&self, block: Block) -> Result<(), BlockstoreError> {
        if block.bytes.len() > self.max_block_size {
            return Err(BlockstoreError::BlockTooLarge { size: block.bytes.len(), max: self.max_block_size });
        }
        let mut inner = self.inner.lock().unwrap();
        Self::touch(&mut inner, &block.key);
        if inner.index.contains(&block.key) {
            return Ok(());
        }
        inner.tmp_seq += 1;
        let tmp = self.root.join(TMP_DIR).join(format!("put-{}", inner.tmp_seq));
        {
            let mut f = File::create(&tmp)?;
            f.write_all(&block.bytes)?;
            f.sync_all()?;
        }
        let dest = self.block_path(&block.key);
        fs::create_dir_all(dest.parent().expect("block path has a shard dir"))?;
        fs::rename(&tmp, &dest)?;
        inner.index.insert(block.key);
        Ok(())
    }

    fn get(&self, key: &Multihash) -> Result<Option<Vec<u8>>, BlockstoreError> {
        let mut inner = self.inner.lock().unwrap();
        if !inner.index.contains(key) {
            return Ok(None);
        }
        let path = self.block_path(key);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                inner.index.remove(key);
                return Ok(None);
            }
            Err(e) => return Err(e.into()),
        };
        if !key.verify(&bytes)? {
            fs::rename(&path, self.root.join(QUARANTINE_DIR).join(key.to_base58()))?;
            inner.index.remove(key);
            inner.access.remove(key);
            return Err(BlockstoreError::Integrity(key.clone()));
        }
        Self::touch(&mut inner, key);
        Ok(Some(bytes))
    }

    fn has(&self, key: &Multihash) -> bool {
        self.inner.lock().unwrap().index.contains(key)
    }

    fn remove(&self, key: &Multihash) -> Result<bool, BlockstoreError> {
        let mut inner = self.inner.lock().unwrap();
        if !inner.index.remove(key) {
            return Ok(false);
        }
        inner.access.remove(key);
        match fs::remove_file(self.block_path(key)) {
            Ok(()) => Ok(true),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(true),
            Err(e) => Err(e.into()),
        }
    }

    fn keys(&self) -> Vec<Multihash> {
        self.inner.lock().unwrap().index.iter().cloned().collect()
    }

    fn last_access(&self, key: &Multihash) -> Option<u64> {
        self.inner.lock().unwrap().access.get(key).copied()
    }

    fn pins(&self) -> PinSet {
        self.inner.lock().unwrap().pins.clone()
    }

    fn apply_pin(&self, op: PinOp) -> Result<(), BlockstoreError> {
        let mut inner = self.inner.lock().unwrap();
        let mut journal = OpenOptions::new().create(true).append(true).open(self.root.join(PIN_JOURNAL))?;
        journal.write_all(format!("{}\n", op.to_line()).as_bytes())?;
        journal.sync_all()?;
        inner.pins.apply(&op);
        Ok(())
    }

    fn maintenance(&self) -> MutexGuard<'_, ()> {
        self.maintenance.lock().unwrap()
    }

    fn len(&self) -> usize {
        self.inner.lock().unwrap().index.len()
    }
}
