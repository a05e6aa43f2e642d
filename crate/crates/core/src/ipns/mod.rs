//! Mutable names: signed records under `/ipns/<NodeId>`, DNS TXT indirection,
//! proquint names and links into other nodes' name spaces.

pub mod proquint;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use crate::blockstore::BlockStore;
use crate::files::{self, CommitSpec, FileError, FileNode, Kind};
use crate::identity::{verify_sig, NodeId, NodeIdentity, Signature};
use crate::merkledag::{DagError, Fetch, StoreFetcher};
use crate::multiformats::varint::{self, Reader};
use crate::multiformats::{HashFunction, Multihash};
use crate::netsim::SimTime;
use crate::routing::{Routing, RoutingError, MAX_VALUE_SIZE};

pub const DEFAULT_VALIDITY: Duration = Duration::from_secs(24 * 3600);
pub const DEFAULT_DEPTH_LIMIT: usize = 32;

const RECORD_TAG: u8 = 0x20;

#[derive(Debug, thiserror::Error)]
pub enum IpnsError {
    #[error("name record rejected: {0}")]
    NameAuth(String),
    #[error("name not found: {0}")]
    NameNotFound(String),
    #[error("resolution exceeded {0} indirections")]
    RecursionLimit(usize),
    #[error("{0}")]
    Length(String),
    #[error("{0}")]
    Alphabet(String),
    #[error("bad name path {0:?}")]
    Path(String),
    #[error("name {0:?} already taken")]
    Name(String),
    #[error("{0}")]
    Internal(String),
    #[error(transparent)]
    Dag(#[from] DagError),
    #[error(transparent)]
    File(#[from] FileError),
    #[error(transparent)]
    Routing(#[from] RoutingError),
}

impl IpnsError {
    pub fn class(&self) -> &'static str {
        match self {
            IpnsError::NameAuth(_) => "NameAuthError",
            IpnsError::NameNotFound(_) => "NameNotFound",
            IpnsError::RecursionLimit(_) => "RecursionLimit",
            IpnsError::Length(_) => "LengthError",
            IpnsError::Alphabet(_) => "AlphabetError",
            IpnsError::Path(_) => "PathError",
            IpnsError::Name(_) => "NameError",
            IpnsError::Internal(_) => "InternalError",
            IpnsError::Dag(e) => e.class(),
            IpnsError::File(e) => e.class(),
            IpnsError::Routing(e) => e.class(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NameRecord {
    pub publisher: NodeId,
    pub value: Multihash,
    pub sequence: u64,
    /// Virtual time after which the record is stale.
    pub validity: SimTime,
    pub public_key: Vec<u8>,
    pub signature: Signature,
}

fn signing_payload(publisher: &NodeId, value: &Multihash, sequence: u64, validity: SimTime) -> Vec<u8> {
    let mut out = vec![RECORD_TAG];
    out.extend_from_slice(&publisher.to_bytes());
    out.extend_from_slice(&value.to_bytes());
    varint::encode_u64(sequence, &mut out);
    varint::encode_u64(validity.as_micros(), &mut out);
    out
}

impl NameRecord {
    pub fn new(identity: &NodeIdentity, value: &Multihash, sequence: u64, validity: SimTime) -> Self {
        let publisher = identity.node_id().clone();
        let signature = identity.sign(&signing_payload(&publisher, value, sequence, validity));
        NameRecord {
            publisher,
            value: value.clone(),
            sequence,
            validity,
            public_key: identity.public_key().to_vec(),
            signature,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = signing_payload(&self.publisher, &self.value, self.sequence, self.validity);
        varint::write_prefixed(&self.public_key, &mut out);
        out.extend_from_slice(&self.signature.to_bytes());
        out
    }

    pub fn from_bytes(raw: &[u8]) -> Result<Self, IpnsError> {
        let bad = |e: crate::multiformats::FormatError| IpnsError::NameAuth(format!("malformed record: {e}"));
        let mut r = Reader::new(raw);
        if r.byte().map_err(bad)? != RECORD_TAG {
            return Err(IpnsError::NameAuth("not a name record".into()));
        }
        let publisher = NodeId::from_multihash(Multihash::read(&mut r).map_err(bad)?);
        let value = Multihash::read(&mut r).map_err(bad)?;
        let sequence = r.varint_u64().map_err(bad)?;
        let validity = SimTime::from_micros(r.varint_u64().map_err(bad)?);
        let public_key = r.prefixed().map_err(bad)?.to_vec();
        let signature = Signature::read(&mut r).map_err(bad)?;
        if !r.is_empty() {
            return Err(IpnsError::NameAuth("trailing bytes after record".into()));
        }
        Ok(NameRecord { publisher, value, sequence, validity, public_key, signature })
    }

    /// Checks the signature and that publisher, key and `expected` agree.
    pub fn verify(&self, expected: &NodeId) -> Result<(), IpnsError> {
        if &self.publisher != expected {
            return Err(IpnsError::NameAuth(format!("record published by {} under {expected}", self.publisher)));
        }
        if NodeId::from_public_key(&self.public_key) != self.publisher {
            return Err(IpnsError::NameAuth("public key does not hash to the publisher".into()));
        }
        let payload = signing_payload(&self.publisher, &self.value, self.sequence, self.validity);
        match verify_sig(&self.public_key, &payload, &self.signature) {
            Ok(true) => Ok(()),
            _ => Err(IpnsError::NameAuth("signature does not verify".into())),
        }
    }

    /// Past half its lifetime; the publisher should refresh it.
    pub fn needs_republish(&self, now: SimTime) -> bool {
        let half = DEFAULT_VALIDITY / 2;
        self.validity.as_micros().saturating_sub(now.as_micros()) <= half.as_micros() as u64
    }
}

/// Fetches and fully checks the current record for `id`.
pub fn lookup_record<R: Routing + ?Sized>(routing: &mut R, id: &NodeId, now: SimTime) -> Result<NameRecord, IpnsError> {
    let stored = routing.get_value(&id.to_bytes())?.ok_or_else(|| IpnsError::NameNotFound(id.to_string()))?;
    if !stored.verify() || &stored.publisher != id {
        return Err(IpnsError::NameAuth("routing record not signed by the name's owner".into()));
    }
    let record = NameRecord::from_bytes(&stored.value)?;
    record.verify(id)?;
    if record.sequence != stored.sequence {
        return Err(IpnsError::NameAuth("sequence mismatch between record layers".into()));
    }
    if record.validity <= now {
        return Err(IpnsError::NameNotFound(format!("{id} (record expired)")));
    }
    Ok(record)
}

/// Points `/ipns/<identity>` at `value`, one sequence number past whatever
/// record routing currently returns for it.
pub fn publish_name<R: Routing + ?Sized>(
    identity: &NodeIdentity,
    value: &Multihash,
    routing: &mut R,
    now: SimTime,
) -> Result<NameRecord, IpnsError> {
    let id = identity.node_id();
    let previous = match routing.get_value(&id.to_bytes())? {
        Some(v) if v.verify() && &v.publisher == id => v.sequence,
        _ => 0,
    };
    let record = NameRecord::new(identity, value, previous + 1, now + DEFAULT_VALIDITY);
    let bytes = record.to_bytes();
    if bytes.len() > MAX_VALUE_SIZE {
        return Err(IpnsError::Internal(format!("name record of {} bytes exceeds the value limit", bytes.len())));
    }
    routing.set_value(&id.to_bytes(), &bytes, record.sequence, identity)?;
    Ok(record)
}

/// Publishes a commit wrapping `target`, whose parent is the commit the name
/// pointed at before (if it pointed at one). Returns the new commit key.
pub fn publish_with_history<S: BlockStore + ?Sized, R: Routing + ?Sized>(
    store: &S,
    identity: &NodeIdentity,
    target: &Multihash,
    routing: &mut R,
    now: SimTime,
    date: &str,
    message: &str,
) -> Result<(Multihash, NameRecord), IpnsError> {
    let mut parents = Vec::new();
    if let Ok(prev) = lookup_record(routing, identity.node_id(), now) {
        let mut fetch = StoreFetcher::new(store);
        if let Ok(FileNode::Commit(_)) = files::fetch_node(&mut fetch, &prev.value) {
            parents.push(prev.value);
        }
    }
    let id = identity.node_id();
    let author = files::make_author(store, &id.to_string(), id)?;
    let commit = files::make_commit(store, CommitSpec { target, parents: &parents, author: Some(&author), date, message })?;
    let record = publish_name(identity, &commit, routing, now)?;
    Ok((commit, record))
}

/// Adds a tree entry at `path` (slash separated, relative to the owner's
/// published root) that links to `target`'s name space, then republishes.
/// Missing intermediate trees are created. Returns the new root.
pub fn peer_link<S: BlockStore + ?Sized, R: Routing + ?Sized>(
    store: &S,
    routing: &mut R,
    owner: &NodeIdentity,
    path: &str,
    target: &NodeId,
    now: SimTime,
) -> Result<Multihash, IpnsError> {
    let components: Vec<&str> = crate::merkledag::split_path(path);
    if components.is_empty() {
        return Err(IpnsError::Name(path.to_string()));
    }
    let root = match lookup_record(routing, owner.node_id(), now) {
        Ok(record) => Some(record.value),
        Err(IpnsError::NameNotFound(_)) => None,
        Err(e) => return Err(e),
    };
    let marker = files::put_peer_link(store, target)?;
    let new_root = tree_insert(store, root.as_ref(), &components, &marker)?;
    publish_name(owner, &new_root, routing, now)?;
    Ok(new_root)
}

fn tree_insert<S: BlockStore + ?Sized>(
    store: &S,
    root: Option<&Multihash>,
    path: &[&str],
    child: &Multihash,
) -> Result<Multihash, IpnsError> {
    let mut entries: BTreeMap<String, Multihash> = BTreeMap::new();
    if let Some(root) = root {
        match files::fetch_node(&mut StoreFetcher::new(store), root)? {
            FileNode::Tree(existing) => {
                entries.extend(existing.into_iter().map(|e| (e.link.name, e.link.hash)));
            }
            other => return Err(IpnsError::Name(format!("{} is a {}, not a tree", root, other.kind()))),
        }
    }
    let name = path[0].to_string();
    let existing = entries.get(&name).cloned();
    let new_child = if path.len() == 1 {
        if existing.is_some() {
            return Err(IpnsError::Name(name));
        }
        child.clone()
    } else {
        tree_insert(store, existing.as_ref(), &path[1..], child)?
    };
    entries.insert(name, new_child);
    let list: Vec<(String, Multihash)> = entries.into_iter().collect();
    Ok(files::make_tree(store, &list)?)
}

/// DNS TXT lookups.
pub trait TxtResolver {
    fn txt(&self, domain: &str) -> Vec<String>;
}

/// Answers from a fixed table read from `domain<TAB>record` lines.
#[derive(Debug, Clone, Default)]
pub struct TxtFixture {
    records: BTreeMap<String, Vec<String>>,
}

impl TxtFixture {
    pub fn insert(&mut self, domain: &str, record: &str) {
        self.records.entry(domain.trim_end_matches('.').to_string()).or_default().push(record.to_string());
    }
}

impl FromStr for TxtFixture {
    type Err = IpnsError;

    fn from_str(text: &str) -> Result<Self, IpnsError> {
        let mut fixture = TxtFixture::default();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (domain, record) = line.split_once('\t').ok_or_else(|| IpnsError::Path(line.to_string()))?;
            fixture.insert(domain.trim(), record.trim());
        }
        Ok(fixture)
    }
}

impl TxtResolver for TxtFixture {
    fn txt(&self, domain: &str) -> Vec<String> {
        self.records.get(domain.trim_end_matches('.')).cloned().unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Head {
    Ipfs(Multihash),
    Node(NodeId),
    Domain(String),
    Proquint(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NamePath {
    pub head: Head,
    pub rest: Vec<String>,
}

impl NamePath {
    pub fn ipfs(key: Multihash) -> Self {
        NamePath { head: Head::Ipfs(key), rest: Vec::new() }
    }

    pub fn ipns(id: NodeId) -> Self {
        NamePath { head: Head::Node(id), rest: Vec::new() }
    }

    fn with_rest(mut self, rest: &[String]) -> Self {
        self.rest.extend_from_slice(rest);
        self
    }
}

impl FromStr for NamePath {
    type Err = IpnsError;

    fn from_str(s: &str) -> Result<Self, IpnsError> {
        let bad = || IpnsError::Path(s.to_string());
        let mut parts = s.split('/').filter(|c| !c.is_empty());
        let namespace = parts.next().ok_or_else(bad)?;
        let head = parts.next().ok_or_else(bad)?;
        let rest = parts.map(str::to_string).collect();
        let head = match namespace {
            "ipfs" => Head::Ipfs(head.parse().map_err(|_| bad())?),
            "ipns" => {
                if let Ok(mh) = head.parse::<Multihash>() {
                    Head::Node(NodeId::from_multihash(mh))
                } else if head.contains('.') {
                    Head::Domain(head.to_string())
                } else if proquint::looks_like(head) {
                    Head::Proquint(head.to_string())
                } else {
                    return Err(bad());
                }
            }
            _ => return Err(bad()),
        };
        Ok(NamePath { head, rest })
    }
}

impl fmt::Display for NamePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.head {
            Head::Ipfs(k) => write!(f, "/ipfs/{k}")?,
            Head::Node(id) => write!(f, "/ipns/{id}")?,
            Head::Domain(d) | Head::Proquint(d) => write!(f, "/ipns/{d}")?,
        }
        for c in &self.rest {
            write!(f, "/{c}")?;
        }
        Ok(())
    }
}

/// Everything name resolution reads from.
pub struct Resolver<'a> {
    pub routing: &'a mut dyn Routing,
    pub fetch: &'a mut dyn Fetch,
    pub dns: &'a dyn TxtResolver,
    pub now: SimTime,
    pub depth_limit: usize,
}

enum Walk {
    Done(Multihash),
    Peer(NodeId, Vec<String>),
}

impl Resolver<'_> {
    pub fn resolve(&mut self, path: &NamePath) -> Result<Multihash, IpnsError> {
        let mut current = path.clone();
        let mut hops = 0;
        loop {
            current = match &current.head {
                Head::Ipfs(root) => match self.walk(root, &current.rest)? {
                    Walk::Done(key) => return Ok(key),
                    Walk::Peer(id, rest) => NamePath::ipns(id).with_rest(&rest),
                },
                Head::Node(id) => {
                    let record = lookup_record(self.routing, id, self.now)?;
                    NamePath::ipfs(record.value).with_rest(&current.rest)
                }
                Head::Domain(domain) => {
                    let value = self
                        .dns
                        .txt(domain)
                        .into_iter()
                        .find_map(|r| r.strip_prefix("ipfs=").map(str::to_string))
                        .ok_or_else(|| IpnsError::NameNotFound(domain.clone()))?;
                    let target = if value.starts_with('/') {
                        value.parse::<NamePath>()?
                    } else {
                        format!("/ipns/{value}").parse::<NamePath>()?
                    };
                    target.with_rest(&current.rest)
                }
                Head::Proquint(text) => {
                    let digest = proquint::decode(text)?;
                    if digest.len() != 32 {
                        return Err(IpnsError::Length(format!(
                            "proquint names {} bytes, a NodeId digest is 32",
                            digest.len()
                        )));
                    }
                    let mh = Multihash::new(HashFunction::Sha256, digest).map_err(|e| IpnsError::Internal(e.to_string()))?;
                    NamePath::ipns(NodeId::from_multihash(mh)).with_rest(&current.rest)
                }
            };
            if !matches!(current.head, Head::Ipfs(_)) {
                hops += 1;
                if hops > self.depth_limit {
                    return Err(IpnsError::RecursionLimit(self.depth_limit));
                }
            }
        }
    }

    /// Follows link names from `root`, stopping at peer-link markers.
    fn walk(&mut self, root: &Multihash, rest: &[String]) -> Result<Walk, IpnsError> {
        let mut current = root.clone();
        for (index, component) in rest.iter().enumerate() {
            let object = self.fetch.fetch(&current)?;
            if let Ok(FileNode::PeerLink(id)) = FileNode::from_object(&object) {
                return Ok(Walk::Peer(id, rest[index..].to_vec()));
            }
            current = object
                .link(component)
                .ok_or_else(|| DagError::PathNotFound { index, component: component.clone() })?
                .hash
                .clone();
        }
        // a path may end on a marker; objects not available locally are returned as is
        if let Ok(object) = self.fetch.fetch(&current) {
            if object.data.first() == Some(&(Kind::PeerLink as u8)) {
                if let Ok(FileNode::PeerLink(id)) = FileNode::from_object(&object) {
                    return Ok(Walk::Peer(id, Vec::new()));
                }
            }
        }
        Ok(Walk::Done(current))
    }
}
