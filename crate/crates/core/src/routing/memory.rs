use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use super::{ProviderSet, Routing, RoutingError, ValueRecord};
use crate::identity::{NodeId, NodeIdentity};
use crate::multiformats::{Multiaddr, Multihash};

#[derive(Default)]
struct Tables {
    peers: BTreeMap<NodeId, Multiaddr>,
    values: BTreeMap<Vec<u8>, ValueRecord>,
    providers: BTreeMap<Multihash, BTreeMap<NodeId, Multiaddr>>,
}

/// A single shared table. Clones see the same state, so several local nodes
/// can route through one instance.
#[derive(Clone, Default)]
pub struct MemoryRouting {
    tables: Arc<Mutex<Tables>>,
}

impl MemoryRouting {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&self, id: NodeId, addr: Multiaddr) {
        self.lock().peers.insert(id, addr);
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Tables> {
        self.tables.lock().unwrap_or_else(|e| e.into_inner())
    }
}

impl Routing for MemoryRouting {
    fn find_peer(&mut self, target: &NodeId) -> Result<Option<Multiaddr>, RoutingError> {
        Ok(self.lock().peers.get(target).cloned())
    }

    fn put_record(&mut self, record: ValueRecord) -> Result<(), RoutingError> {
        if !record.verify() {
            return Err(RoutingError::BadSignature);
        }
        let mut t = self.lock();
        match t.values.get(&record.key) {
            Some(existing) if !record.supersedes(existing) => {}
            _ => {
                t.values.insert(record.key.clone(), record);
            }
        }
        Ok(())
    }

    fn get_value(&mut self, key: &[u8]) -> Result<Option<ValueRecord>, RoutingError> {
        Ok(self.lock().values.get(key).cloned())
    }

    fn provide(&mut self, key: &Multihash, identity: &NodeIdentity) -> Result<(), RoutingError> {
        let mut t = self.lock();
        let addr = t.peers.get(identity.node_id()).cloned().unwrap_or_default();
        t.providers.entry(key.clone()).or_default().insert(identity.node_id().clone(), addr);
        Ok(())
    }

    fn find_value_peers(&mut self, key: &Multihash, min: usize) -> Result<ProviderSet, RoutingError> {
        let peers = self
            .lock()
            .providers
            .get(key)
            .map(|m| m.iter().map(|(id, a)| (id.clone(), a.clone())).collect())
            .unwrap_or_default();
        Ok(ProviderSet::from_peers(peers, min))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_get_and_sequence() {
        let id = NodeIdentity::from_secret([1; 32]);
        let mut r = MemoryRouting::new();
        r.set_value(b"k", b"one", 1, &id).unwrap();
        assert_eq!(r.get_value(b"k").unwrap().unwrap().value, b"one");
        r.set_value(b"k", b"two", 2, &id).unwrap();
        r.set_value(b"k", b"stale", 1, &id).unwrap();
        assert_eq!(r.get_value(b"k").unwrap().unwrap().value, b"two");
        assert!(matches!(r.set_value(b"k", &[0; 1025], 3, &id), Err(RoutingError::ValueTooLarge { .. })));
        assert!(r.get_value(b"missing").unwrap().is_none());
    }

    #[test]
    fn providers_and_peers_shared_between_clones() {
        let id = NodeIdentity::from_secret([2; 32]);
        let mut a = MemoryRouting::new();
        let mut b = a.clone();
        a.register(id.node_id().clone(), Multiaddr::sim(3));
        let key = Multihash::sha256(b"block");
        a.provide(&key, &id).unwrap();
        let found = b.find_value_peers(&key, 2).unwrap();
        assert_eq!(found.peers, vec![(id.node_id().clone(), Multiaddr::sim(3))]);
        assert_eq!(found.shortfall, 1);
        assert_eq!(b.find_peer(id.node_id()).unwrap(), Some(Multiaddr::sim(3)));
    }
}
