use crate::identity::NodeId;
use crate::multiformats::Multiaddr;
use crate::netsim::SimTime;

pub const BUCKETS: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub id: NodeId,
    pub key: [u8; 32],
    pub addr: Multiaddr,
    pub last_seen: SimTime,
}

pub fn xor(a: &[u8; 32], b: &[u8; 32]) -> [u8; 32] {
    let mut out = [0u8; 32];
    for i in 0..32 {
        out[i] = a[i] ^ b[i];
    }
    out
}

fn common_prefix(a: &[u8; 32], b: &[u8; 32]) -> Option<usize> {
    let d = xor(a, b);
    let lz = crate::identity::leading_zero_bits(&d) as usize;
    (lz < BUCKETS).then_some(lz)
}

/// Kademlia table: bucket `i` holds peers sharing exactly `i` leading bits
/// with the owner, least recently seen first.
#[derive(Debug, Clone)]
pub struct RoutingTable {
    owner: [u8; 32],
    k: usize,
    buckets: Vec<Vec<Entry>>,
}

impl RoutingTable {
    pub fn new(owner: &NodeId, k: usize) -> Self {
        RoutingTable { owner: owner.xor_key(), k, buckets: vec![Vec::new(); BUCKETS] }
    }

    pub fn len(&self) -> usize {
        self.buckets.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn bucket(&self, i: usize) -> &[Entry] {
        &self.buckets[i]
    }

    /// Records contact with a peer. A known peer moves to the tail of its
    /// bucket; a new peer is added only while the bucket has room, so
    /// long-lived entries are preferred. Returns whether the peer is present.
    pub fn update(&mut self, id: &NodeId, addr: &Multiaddr, now: SimTime) -> bool {
        let key = id.xor_key();
        let Some(b) = common_prefix(&self.owner, &key) else {
            return false;
        };
        let bucket = &mut self.buckets[b];
        if let Some(pos) = bucket.iter().position(|e| e.id == *id) {
            let mut e = bucket.remove(pos);
            e.addr = addr.clone();
            e.last_seen = now;
            bucket.push(e);
            return true;
        }
        if bucket.len() < self.k {
            bucket.push(Entry { id: id.clone(), key, addr: addr.clone(), last_seen: now });
            return true;
        }
        false
    }

    pub fn remove(&mut self, id: &NodeId) -> bool {
        let Some(b) = common_prefix(&self.owner, &id.xor_key()) else {
            return false;
        };
        let bucket = &mut self.buckets[b];
        let before = bucket.len();
        bucket.retain(|e| e.id != *id);
        bucket.len() != before
    }

    pub fn get(&self, id: &NodeId) -> Option<&Entry> {
        let b = common_prefix(&self.owner, &id.xor_key())?;
        self.buckets[b].iter().find(|e| e.id == *id)
    }

    pub fn entries(&self) -> impl Iterator<Item = &Entry> {
        self.buckets.iter().flatten()
    }

    /// The `n` entries closest to `target` by XOR distance.
    pub fn closest(&self, target: &[u8; 32], n: usize) -> Vec<Entry> {
        let mut all: Vec<&Entry> = self.entries().collect();
        all.sort_by_key(|e| xor(&e.key, target));
        all.into_iter().take(n).cloned().collect()
    }

    /// Checks the prefix rule, capacity and uniqueness of every bucket.
    pub fn audit(&self) -> bool {
        let mut seen = std::collections::BTreeSet::new();
        self.buckets.iter().enumerate().all(|(i, bucket)| {
            bucket.len() <= self.k
                && bucket.iter().all(|e| {
                    e.key == e.id.xor_key() && common_prefix(&self.owner, &e.key) == Some(i) && seen.insert(e.id.clone())
                })
                && bucket.windows(2).all(|w| w[0].last_seen <= w[1].last_seen)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::identity::NodeIdentity;

    fn ids(n: u8) -> Vec<NodeId> {
        (0..n).map(|i| NodeIdentity::from_secret([i; 32]).node_id().clone()).collect()
    }

    #[test]
    fn prefix_invariant_and_lru_order() {
        let all = ids(120);
        let mut t = RoutingTable::new(&all[0], 4);
        assert!(!t.update(&all[0], &Multiaddr::sim(0), SimTime::ZERO));
        for (i, id) in all.iter().enumerate().skip(1) {
            t.update(id, &Multiaddr::sim(i as u64), SimTime::from_millis(i as u64));
            assert!(t.audit());
        }
        // bucket 0 holds half the id space, so it fills and stays at k
        assert_eq!(t.bucket(0).len(), 4);
        let first = t.bucket(0)[0].id.clone();
        t.update(&first, &Multiaddr::sim(99), SimTime::from_secs(500));
        assert_eq!(t.bucket(0).last().unwrap().id, first);
        assert!(t.audit());
        assert!(t.remove(&first));
        assert!(t.get(&first).is_none());
        assert!(t.audit());
    }

    #[test]
    fn closest_is_sorted_by_xor() {
        let all = ids(50);
        let mut t = RoutingTable::new(&all[0], 20);
        for id in &all[1..] {
            t.update(id, &Multiaddr::sim(0), SimTime::ZERO);
        }
        let target = all[7].xor_key();
        let got = t.closest(&target, 5);
        assert_eq!(got[0].id, all[7]);
        assert!(got.windows(2).all(|w| xor(&w[0].key, &target) <= xor(&w[1].key, &target)));
    }
}
