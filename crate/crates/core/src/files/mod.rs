//! Versioned file objects over the Merkle DAG: blobs, lists, trees, commits.
//!
//! Every file object stores a kind byte first in its data field. Lists and
//! trees follow it with a varint count and one kind byte per link; commits
//! follow it with the target's kind, a length-prefixed date and message.

mod chunker;
mod history;
mod view;

use std::collections::BTreeSet;

pub use chunker::{Chunker, Chunking, Rabin, RabinParams, DEFAULT_POLYNOMIAL};
pub use history::{diff_commits, flatten_tree, log, Change, DiffRow, LogEntry};
pub use view::to_json;

use crate::blockstore::{BlockStore, BlockstoreError};
use crate::identity::NodeId;
use crate::merkledag::{put_object, DagError, DagLink, DagObject, Fetch};
use crate::multiformats::varint::{self, Reader};
use crate::multiformats::Multihash;

/// Most links a single list object holds; longer files nest lists.
pub const LIST_FANOUT: usize = 4096;

pub const DATE_FORMAT: &str = "%Y-%m-%d %H:%M:%SZ";

#[derive(Debug, thiserror::Error)]
pub enum FileError {
    #[error("expected {expected}, found {found}")]
    Kind { expected: &'static str, found: String },
    #[error("{} missing{}", .key, match .gap {
        Some((start, Some(end))) => format!(", bytes {start}..{end} unavailable"),
        Some((start, None)) => format!(", bytes from {start} unavailable"),
        None => String::new(),
    })]
    Fetch { key: Multihash, gap: Option<(u64, Option<u64>)> },
    #[error("bad name {0:?}")]
    Name(String),
    #[error("bad parameter: {0}")]
    Param(String),
    #[error("malformed file object: {0}")]
    Decode(String),
    #[error(transparent)]
    Dag(DagError),
    #[error(transparent)]
    Store(#[from] BlockstoreError),
}

impl FileError {
    pub fn class(&self) -> &'static str {
        match self {
            FileError::Kind { .. } => "KindError",
            FileError::Fetch { .. } => "FetchError",
            FileError::Name(_) => "NameError",
            FileError::Param(_) => "ParamError",
            FileError::Decode(_) => "DecodeError",
            FileError::Dag(e) => e.class(),
            FileError::Store(e) => e.class(),
        }
    }
}

impl From<DagError> for FileError {
    fn from(e: DagError) -> Self {
        match e {
            DagError::Fetch { key, .. } => FileError::Fetch { key, gap: None },
            DagError::Store(s) => FileError::Store(s),
            other => FileError::Dag(other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum Kind {
    Blob = 1,
    List = 2,
    Tree = 3,
    Commit = 4,
    /// Tree entry pointing into another node's name space.
    PeerLink = 5,
    /// Derived index of a tree's reachable objects by slash path.
    Flat = 6,
}

impl Kind {
    pub fn from_byte(b: u8) -> Result<Kind, FileError> {
        Ok(match b {
            1 => Kind::Blob,
            2 => Kind::List,
            3 => Kind::Tree,
            4 => Kind::Commit,
            5 => Kind::PeerLink,
            6 => Kind::Flat,
            _ => return Err(FileError::Decode(format!("unknown kind byte {b}"))),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Kind::Blob => "blob",
            Kind::List => "list",
            Kind::Tree => "tree",
            Kind::Commit => "commit",
            Kind::PeerLink => "peer",
            Kind::Flat => "flat",
        }
    }

    pub fn from_name(name: &str) -> Option<Kind> {
        [Kind::Blob, Kind::List, Kind::Tree, Kind::Commit, Kind::PeerLink, Kind::Flat]
            .into_iter()
            .find(|k| k.name() == name)
    }
}

impl std::fmt::Display for Kind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A link together with the kind of object it points to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub kind: Kind,
    pub link: DagLink,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Commit {
    /// Kind of the `object` target.
    pub target: Kind,
    pub date: String,
    pub message: String,
    pub parents: Vec<DagLink>,
    pub object: DagLink,
    pub author: Option<DagLink>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FileNode {
    Blob(Vec<u8>),
    List(Vec<Entry>),
    Tree(Vec<Entry>),
    Commit(Commit),
    PeerLink(NodeId),
    Flat(Vec<Entry>),
}

fn check_tree_name(name: &str) -> Result<(), FileError> {
    if name.is_empty() || name.contains('/') {
        return Err(FileError::Name(name.to_string()));
    }
    Ok(())
}

fn write_kinds(kind: Kind, entries: &[Entry]) -> Vec<u8> {
    let mut data = vec![kind as u8];
    varint::encode(entries.len() as u64, &mut data);
    data.extend(entries.iter().map(|e| e.kind as u8));
    data
}

impl FileNode {
    pub fn kind(&self) -> Kind {
        match self {
            FileNode::Blob(_) => Kind::Blob,
            FileNode::List(_) => Kind::List,
            FileNode::Tree(_) => Kind::Tree,
            FileNode::Commit(_) => Kind::Commit,
            FileNode::PeerLink(_) => Kind::PeerLink,
            FileNode::Flat(_) => Kind::Flat,
        }
    }

    pub fn to_object(&self) -> DagObject {
        match self {
            FileNode::Blob(bytes) => {
                let mut data = Vec::with_capacity(bytes.len() + 1);
                data.push(Kind::Blob as u8);
                data.extend_from_slice(bytes);
                DagObject::leaf(data)
            }
            FileNode::List(entries) | FileNode::Tree(entries) | FileNode::Flat(entries) => DagObject::new(
                entries.iter().map(|e| e.link.clone()).collect(),
                write_kinds(self.kind(), entries),
            ),
            FileNode::Commit(c) => {
                let mut data = vec![Kind::Commit as u8, c.target as u8];
                varint::write_prefixed(c.date.as_bytes(), &mut data);
                varint::write_prefixed(c.message.as_bytes(), &mut data);
                let mut links = c.parents.clone();
                links.push(c.object.clone());
                links.extend(c.author.clone());
                DagObject::new(links, data)
            }
            FileNode::PeerLink(id) => {
                let mut data = vec![Kind::PeerLink as u8];
                data.extend_from_slice(&id.to_bytes());
                DagObject::leaf(data)
            }
        }
    }

    pub fn from_object(object: &DagObject) -> Result<FileNode, FileError> {
        let (&kind_byte, rest) =
            object.data.split_first().ok_or_else(|| FileError::Decode("empty data field".into()))?;
        let kind = Kind::from_byte(kind_byte)?;
        let malformed = |e: crate::multiformats::FormatError| FileError::Decode(format!("{kind}: {e}"));
        match kind {
            Kind::Blob => {
                if !object.links.is_empty() {
                    return Err(FileError::Decode("blob with links".into()));
                }
                Ok(FileNode::Blob(rest.to_vec()))
            }
            Kind::List | Kind::Tree | Kind::Flat => {
                let mut r = Reader::new(rest);
                let n = r.varint().map_err(malformed)? as usize;
                let kinds = r.bytes(n).map_err(malformed)?;
                if !r.is_empty() || n != object.links.len() {
                    return Err(FileError::Decode(format!("{kind} kind array does not match its links")));
                }
                let entries = kinds
                    .iter()
                    .zip(&object.links)
                    .map(|(&k, link)| Ok(Entry { kind: Kind::from_byte(k)?, link: link.clone() }))
                    .collect::<Result<Vec<_>, FileError>>()?;
                match kind {
                    Kind::List => {
                        if let Some(bad) = entries.iter().find(|e| !matches!(e.kind, Kind::Blob | Kind::List)) {
                            return Err(FileError::Decode(format!("list child of kind {}", bad.kind)));
                        }
                        Ok(FileNode::List(entries))
                    }
                    Kind::Tree => {
                        for e in &entries {
                            check_tree_name(&e.link.name).map_err(|_| FileError::Decode(format!("tree entry {:?}", e.link.name)))?;
                        }
                        if entries.windows(2).any(|w| w[0].link.name >= w[1].link.name) {
                            return Err(FileError::Decode("tree entries not sorted and unique".into()));
                        }
                        Ok(FileNode::Tree(entries))
                    }
                    _ => Ok(FileNode::Flat(entries)),
                }
            }
            Kind::Commit => {
                let mut r = Reader::new(rest);
                let target = Kind::from_byte(r.byte().map_err(malformed)?)?;
                let text = |b: &[u8]| String::from_utf8(b.to_vec()).map_err(|_| FileError::Decode("commit text not UTF-8".into()));
                let date = text(r.prefixed().map_err(malformed)?)?;
                let message = text(r.prefixed().map_err(malformed)?)?;
                if !r.is_empty() {
                    return Err(FileError::Decode("trailing commit data".into()));
                }
                let mut parents = Vec::new();
                let mut object_link = None;
                let mut author = None;
                for link in &object.links {
                    match (link.name.as_str(), &object_link, &author) {
                        ("parent", None, None) => parents.push(link.clone()),
                        ("object", None, None) => object_link = Some(link.clone()),
                        ("author", Some(_), None) => author = Some(link.clone()),
                        _ => return Err(FileError::Decode(format!("unexpected commit link {:?}", link.name))),
                    }
                }
                let object = object_link.ok_or_else(|| FileError::Decode("commit without object link".into()))?;
                Ok(FileNode::Commit(Commit { target, date, message, parents, object, author }))
            }
            Kind::PeerLink => {
                let mh = Multihash::from_bytes(rest).map_err(malformed)?;
                if !object.links.is_empty() {
                    return Err(FileError::Decode("peer link with links".into()));
                }
                Ok(FileNode::PeerLink(NodeId::from_multihash(mh)))
            }
        }
    }

    /// File bytes a list or blob stands for; the declared size of a list link.
    fn file_len(&self) -> u64 {
        match self {
            FileNode::Blob(b) => b.len() as u64,
            FileNode::List(entries) => entries.iter().map(|e| e.link.size).sum(),
            _ => 0,
        }
    }
}

pub fn fetch_node<F: Fetch + ?Sized>(fetch: &mut F, key: &Multihash) -> Result<FileNode, FileError> {
    FileNode::from_object(&fetch.fetch(key)?)
}

fn put_node<S: BlockStore + ?Sized>(store: &S, node: &FileNode) -> Result<Multihash, FileError> {
    Ok(put_object(store, &node.to_object())?)
}

/// Chunks `data`, stores each chunk as a blob, and returns the root: the blob
/// itself for a single chunk, otherwise a list (nested past [`LIST_FANOUT`]).
pub fn add_file<S: BlockStore + ?Sized, C: Chunking + ?Sized>(
    store: &S,
    data: &[u8],
    chunker: &C,
) -> Result<Multihash, FileError> {
    let mut level = Vec::new();
    for chunk in chunker.chunks(data) {
        let key = put_node(store, &FileNode::Blob(chunk.to_vec()))?;
        level.push(Entry { kind: Kind::Blob, link: DagLink::unnamed(key, chunk.len() as u64) });
    }
    while level.len() > 1 {
        let mut next = Vec::new();
        for group in level.chunks(LIST_FANOUT) {
            let node = FileNode::List(group.to_vec());
            let size = node.file_len();
            next.push(Entry { kind: Kind::List, link: DagLink::unnamed(put_node(store, &node)?, size) });
        }
        level = next;
    }
    Ok(level.pop().expect("at least one chunk").link.hash)
}

/// Builds a list from existing blob or list objects; link names are kept, so
/// lists can carry named entries.
pub fn make_list<S: BlockStore + ?Sized>(store: &S, children: &[(String, Multihash)]) -> Result<Multihash, FileError> {
    let mut fetch = crate::merkledag::StoreFetcher::new(store);
    let mut entries = Vec::new();
    for (name, key) in children {
        let node = fetch_node(&mut fetch, key)?;
        if !matches!(node.kind(), Kind::Blob | Kind::List) {
            return Err(FileError::Kind { expected: "blob or list", found: node.kind().to_string() });
        }
        entries.push(Entry { kind: node.kind(), link: DagLink::new(name.clone(), key.clone(), node.file_len()) });
    }
    put_node(store, &FileNode::List(entries))
}

/// Concatenates the leaf blobs under `key`, depth first.
pub fn cat<F: Fetch + ?Sized>(fetch: &mut F, key: &Multihash) -> Result<Vec<u8>, FileError> {
    let mut out = Vec::new();
    // (key, declared length if known)
    let mut stack = vec![(key.clone(), None::<u64>)];
    let mut root = true;
    while let Some((next, declared)) = stack.pop() {
        let node = match fetch_node(fetch, &next) {
            Ok(node) => node,
            Err(FileError::Fetch { key, .. }) => {
                let start = out.len() as u64;
                return Err(FileError::Fetch { key, gap: Some((start, declared.map(|d| start + d))) });
            }
            Err(e) => return Err(e),
        };
        match node {
            FileNode::Blob(bytes) => out.extend_from_slice(&bytes),
            FileNode::List(entries) => {
                stack.extend(entries.into_iter().rev().map(|e| (e.link.hash, Some(e.link.size))));
            }
            other => {
                let expected = if root { "blob or list" } else { "list child" };
                return Err(FileError::Kind { expected, found: other.kind().to_string() });
            }
        }
        root = false;
    }
    Ok(out)
}

/// Stores a tree over `entries` (name, child key). Child kinds and subgraph
/// sizes are read from the store, so children must already be present.
pub fn make_tree<S: BlockStore + ?Sized>(store: &S, entries: &[(String, Multihash)]) -> Result<Multihash, FileError> {
    let mut names = BTreeSet::new();
    for (name, _) in entries {
        check_tree_name(name)?;
        if !names.insert(name.as_str()) {
            return Err(FileError::Name(name.clone()));
        }
    }
    let mut fetch = crate::merkledag::StoreFetcher::new(store);
    let mut out = Vec::with_capacity(entries.len());
    for (name, key) in entries {
        let (kind, size) = describe(&mut fetch, key)?;
        out.push(Entry { kind, link: DagLink::new(name.clone(), key.clone(), size) });
    }
    out.sort_by(|a, b| a.link.name.cmp(&b.link.name));
    put_node(store, &FileNode::Tree(out))
}

/// Kind and subgraph size of a stored file object.
fn describe<F: Fetch + ?Sized>(fetch: &mut F, key: &Multihash) -> Result<(Kind, u64), FileError> {
    let object = fetch.fetch(key)?;
    let node = FileNode::from_object(&object)?;
    Ok((node.kind(), object.cumulative_size()))
}

/// An author object: a tree holding a `name` blob and an `id` blob with the
/// author's NodeId in base58.
pub fn make_author<S: BlockStore + ?Sized>(store: &S, name: &str, id: &NodeId) -> Result<Multihash, FileError> {
    let name_blob = put_node(store, &FileNode::Blob(name.as_bytes().to_vec()))?;
    let id_blob = put_node(store, &FileNode::Blob(id.to_string().into_bytes()))?;
    make_tree(store, &[("name".into(), name_blob), ("id".into(), id_blob)])
}

pub fn format_date(unix_seconds: i64) -> Result<String, FileError> {
    chrono::DateTime::from_timestamp(unix_seconds, 0)
        .map(|d| d.format(DATE_FORMAT).to_string())
        .ok_or_else(|| FileError::Param(format!("timestamp {unix_seconds} out of range")))
}

pub fn parse_date(date: &str) -> Result<i64, FileError> {
    chrono::NaiveDateTime::parse_from_str(date, DATE_FORMAT)
        .map(|d| d.and_utc().timestamp())
        .map_err(|e| FileError::Param(format!("date {date:?}: {e}")))
}

pub struct CommitSpec<'a> {
    pub target: &'a Multihash,
    pub parents: &'a [Multihash],
    pub author: Option<&'a Multihash>,
    pub date: &'a str,
    pub message: &'a str,
}

pub fn make_commit<S: BlockStore + ?Sized>(store: &S, spec: CommitSpec<'_>) -> Result<Multihash, FileError> {
    parse_date(spec.date)?;
    let mut fetch = crate::merkledag::StoreFetcher::new(store);
    let (target, size) = describe(&mut fetch, spec.target)?;
    let mut parents = Vec::new();
    for p in spec.parents {
        let (kind, size) = describe(&mut fetch, p)?;
        if kind != Kind::Commit {
            return Err(FileError::Kind { expected: "commit", found: kind.to_string() });
        }
        parents.push(DagLink::new("parent", p.clone(), size));
    }
    let author = match spec.author {
        Some(a) => {
            let (_, size) = describe(&mut fetch, a)?;
            Some(DagLink::new("author", a.clone(), size))
        }
        None => None,
    };
    let commit = Commit {
        target,
        date: spec.date.to_string(),
        message: spec.message.to_string(),
        parents,
        object: DagLink::new("object", spec.target.clone(), size),
        author,
    };
    put_node(store, &FileNode::Commit(commit))
}

/// Stores a peer-link marker object for `target`.
pub fn put_peer_link<S: BlockStore + ?Sized>(store: &S, target: &NodeId) -> Result<Multihash, FileError> {
    put_node(store, &FileNode::PeerLink(target.clone()))
}

#[cfg(test)]
mod tests;
