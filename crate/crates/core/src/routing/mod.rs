//! Peer and content routing: the routing interface, signed small-value
//! records, an in-memory table, and a Kademlia DHT with provider caps and
//! disjoint-path lookups.

mod dht;
mod memory;
mod message;
mod record;
mod table;

pub use dht::{Dht, DhtConfig, DhtHandle, DhtNet, DhtNode, OpId, OpResult, Outcome, DHT_TIMER};
pub use memory::MemoryRouting;
pub use message::{Contact, Message, MessageBody};
pub use record::{value_xor_key, ProviderRecord, ValueRecord, MAX_KEY_SIZE, MAX_VALUE_SIZE};
pub use table::{Entry, RoutingTable};

use crate::identity::{IdentityError, NodeId, NodeIdentity};
use crate::multiformats::{FormatError, Multiaddr, Multihash};

#[derive(Debug, thiserror::Error)]
pub enum RoutingError {
    #[error("value of {size} bytes exceeds the {max} byte limit")]
    ValueTooLarge { size: usize, max: usize },
    #[error("key of {size} bytes exceeds the {max} byte limit")]
    KeyTooLarge { size: usize, max: usize },
    #[error("record signature does not verify")]
    BadSignature,
    #[error("providers can only be announced by the local node")]
    ForeignIdentity,
    #[error("simulation ended before the operation completed")]
    Stalled,
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Identity(#[from] IdentityError),
}

impl RoutingError {
    pub fn class(&self) -> &'static str {
        match self {
            RoutingError::ValueTooLarge { .. } => "ValueTooLarge",
            RoutingError::KeyTooLarge { .. } => "KeyTooLarge",
            RoutingError::BadSignature => "SignatureError",
            RoutingError::ForeignIdentity => "ForeignIdentity",
            RoutingError::Stalled => "Stalled",
            RoutingError::Format(e) => e.class(),
            RoutingError::Identity(_) => "IdentityError",
        }
    }
}

/// Providers found for a key. `shortfall` is how many fewer than the
/// requested minimum were found.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ProviderSet {
    pub peers: Vec<(NodeId, Multiaddr)>,
    pub shortfall: usize,
}

impl ProviderSet {
    pub fn from_peers(peers: Vec<(NodeId, Multiaddr)>, min: usize) -> Self {
        let shortfall = min.saturating_sub(peers.len());
        ProviderSet { peers, shortfall }
    }

    pub fn contains(&self, id: &NodeId) -> bool {
        self.peers.iter().any(|(p, _)| p == id)
    }
}

pub trait Routing {
    /// Address of `target`, or `None` when no route is found.
    fn find_peer(&mut self, target: &NodeId) -> Result<Option<Multiaddr>, RoutingError>;

    /// Stores an already signed record.
    fn put_record(&mut self, record: ValueRecord) -> Result<(), RoutingError>;

    /// The highest-sequence valid record seen for `key`.
    fn get_value(&mut self, key: &[u8]) -> Result<Option<ValueRecord>, RoutingError>;

    fn provide(&mut self, key: &Multihash, identity: &NodeIdentity) -> Result<(), RoutingError>;

    fn find_value_peers(&mut self, key: &Multihash, min: usize) -> Result<ProviderSet, RoutingError>;

    fn set_value(&mut self, key: &[u8], value: &[u8], sequence: u64, identity: &NodeIdentity) -> Result<(), RoutingError> {
        self.put_record(ValueRecord::new(key, value, sequence, identity)?)
    }
}

impl<R: Routing + ?Sized> Routing for &mut R {
    fn find_peer(&mut self, target: &NodeId) -> Result<Option<Multiaddr>, RoutingError> {
        (**self).find_peer(target)
    }

    fn put_record(&mut self, record: ValueRecord) -> Result<(), RoutingError> {
        (**self).put_record(record)
    }

    fn get_value(&mut self, key: &[u8]) -> Result<Option<ValueRecord>, RoutingError> {
        (**self).get_value(key)
    }

    fn provide(&mut self, key: &Multihash, identity: &NodeIdentity) -> Result<(), RoutingError> {
        (**self).provide(key, identity)
    }

    fn find_value_peers(&mut self, key: &Multihash, min: usize) -> Result<ProviderSet, RoutingError> {
        (**self).find_value_peers(key, min)
    }
}
