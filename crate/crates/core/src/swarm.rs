//! A full simulated peer: DHT routing, BitSwap exchange and a local block
//! store, plus Merkle DAG fetching that wants each block's children as the
//! block arrives.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;
use std::time::Duration;

use crate::bitswap::{BitswapConfig, Engine};
use crate::blockstore::{BlockStore, MemoryStore};
use crate::identity::NodeIdentity;
use crate::merkledag::block_links;
use crate::multiformats::{Multiaddr, Multihash};
use crate::netsim::{self, AdversarySpec, Ctx, Frame, NetError, NodeIndex, Scenario, SimNet, SimNode, SimTime, Until};
use crate::routing::{Dht, DhtConfig, OpId, Outcome, RoutingError};

/// Timer tokens owned by the swarm layer carry this bit.
pub const SWARM_TIMER: u64 = 3 << 60;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PeerConfig {
    pub dht: DhtConfig,
    pub bitswap: BitswapConfig,
    /// Blocks fetched on behalf of peers at a time; zero disables it.
    pub work_capacity: usize,
}

#[derive(Debug)]
struct DagFetch {
    root: Multihash,
    missing: BTreeSet<Multihash>,
    finished: Option<SimTime>,
}

pub type FetchId = usize;

pub struct Peer {
    dht: Dht,
    bitswap: Engine,
    store: Arc<dyn BlockStore>,
    config: PeerConfig,
    fetches: Vec<DagFetch>,
    provider_ops: BTreeMap<OpId, Multihash>,
    retry_armed: bool,
}

const PROVIDER_RETRY: Duration = Duration::from_secs(15);
const PROVIDERS_WANTED: usize = 4;

impl Peer {
    pub fn new(identity: NodeIdentity, idx: NodeIndex, store: Arc<dyn BlockStore>, config: PeerConfig) -> Self {
        let dht = Dht::new(identity.clone(), Multiaddr::sim(idx as u64), config.dht.clone());
        let bitswap = Engine::new(identity, store.clone(), config.bitswap.clone());
        Peer { dht, bitswap, store, config, fetches: Vec::new(), provider_ops: BTreeMap::new(), retry_armed: false }
    }

    pub fn dht(&self) -> &Dht {
        &self.dht
    }

    pub fn bitswap(&self) -> &Engine {
        &self.bitswap
    }

    pub fn bitswap_mut(&mut self) -> &mut Engine {
        &mut self.bitswap
    }

    pub fn store(&self) -> &Arc<dyn BlockStore> {
        &self.store
    }

    pub fn provide(&mut self, ctx: &mut Ctx<'_>, key: &Multihash) -> OpId {
        self.dht.start_provide(ctx, key)
    }

    /// Starts fetching the DAG under `root` into the local store.
    pub fn fetch(&mut self, ctx: &mut Ctx<'_>, root: &Multihash) -> FetchId {
        let id = self.fetches.len();
        self.fetches.push(DagFetch { root: root.clone(), missing: BTreeSet::new(), finished: None });
        let missing = self.expand(root);
        self.fetches[id].missing = missing.clone();
        if missing.is_empty() {
            self.fetches[id].finished = Some(ctx.now());
        } else {
            self.bitswap.want(ctx, missing);
            self.find_providers(ctx, root);
            self.arm_retry(ctx);
        }
        id
    }

    pub fn fetch_finished(&self, id: FetchId) -> Option<SimTime> {
        self.fetches.get(id).and_then(|f| f.finished)
    }

    pub fn fetch_missing(&self, id: FetchId) -> usize {
        self.fetches.get(id).map_or(0, |f| f.missing.len())
    }

    /// Keys under `key` (inclusive) absent from the store, walking through
    /// whatever is already present.
    fn expand(&self, key: &Multihash) -> BTreeSet<Multihash> {
        let mut missing = BTreeSet::new();
        let mut seen = BTreeSet::new();
        let mut stack = vec![key.clone()];
        while let Some(k) = stack.pop() {
            if !seen.insert(k.clone()) {
                continue;
            }
            match self.store.get(&k) {
                Ok(Some(bytes)) => stack.extend(block_links(&k, &bytes)),
                _ => {
                    missing.insert(k);
                }
            }
        }
        missing
    }

    fn find_providers(&mut self, ctx: &mut Ctx<'_>, key: &Multihash) {
        if !self.provider_ops.values().any(|k| k == key) {
            let op = self.dht.start_find_providers(ctx, key, PROVIDERS_WANTED);
            self.provider_ops.insert(op, key.clone());
        }
    }

    fn arm_retry(&mut self, ctx: &mut Ctx<'_>) {
        if !self.retry_armed {
            self.retry_armed = true;
            ctx.set_timer(PROVIDER_RETRY, SWARM_TIMER);
        }
    }

    fn poll(&mut self, ctx: &mut Ctx<'_>) {
        let ops: Vec<OpId> = self.provider_ops.keys().copied().collect();
        for op in ops {
            let Some(result) = self.dht.take_result(op) else { continue };
            let key = self.provider_ops.remove(&op).expect("tracked op");
            if let Outcome::Providers(set) = result.outcome {
                let others: Vec<_> = set.peers.into_iter().filter(|(id, _)| id != self.dht.node_id()).collect();
                self.bitswap.set_rarity(key, others.len());
                for (id, addr) in others {
                    if let Some(idx) = addr.sim_node() {
                        self.bitswap.connect(ctx, idx as NodeIndex, &id);
                    }
                }
            }
        }
        let arrived = self.bitswap.take_received();
        if !arrived.is_empty() {
            let mut wanted = BTreeSet::new();
            for key in &arrived {
                let below = self.expand(key);
                for f in self.fetches.iter_mut().filter(|f| f.finished.is_none()) {
                    if f.missing.remove(key) {
                        for k in &below {
                            f.missing.insert(k.clone());
                        }
                        wanted.extend(below.iter().cloned());
                    }
                }
            }
            for f in self.fetches.iter_mut().filter(|f| f.finished.is_none()) {
                f.missing.retain(|k| !self.store.has(k));
                if f.missing.is_empty() {
                    f.finished = Some(ctx.now());
                }
            }
            self.bitswap.want(ctx, wanted);
        }
        if self.config.work_capacity > 0 {
            let relayed = self.bitswap.work_for_peers(ctx, self.config.work_capacity);
            for key in relayed {
                self.find_providers(ctx, &key);
            }
        }
    }
}

impl SimNode for Peer {
    fn on_start(&mut self, ctx: &mut Ctx<'_>, bootstrap: &[NodeIndex]) {
        self.dht.bootstrap(ctx, bootstrap);
    }

    fn on_frame(&mut self, ctx: &mut Ctx<'_>, from: NodeIndex, frame: Frame) {
        if !self.dht.handle_frame(ctx, from, &frame) {
            self.bitswap.handle_frame(ctx, from, &frame);
        }
        self.poll(ctx);
    }

    fn on_timer(&mut self, ctx: &mut Ctx<'_>, token: u64) {
        if token == SWARM_TIMER {
            self.retry_armed = false;
            let open: Vec<Multihash> =
                self.fetches.iter().filter(|f| f.finished.is_none()).map(|f| f.root.clone()).collect();
            for root in &open {
                self.find_providers(ctx, root);
            }
            if !open.is_empty() {
                self.arm_retry(ctx);
            }
        } else if !self.dht.handle_timer(ctx, token) {
            self.bitswap.handle_timer(ctx, token);
        }
        self.poll(ctx);
    }
}

/// A simulated network of full peers with blocking helpers.
pub struct Swarm {
    pub net: SimNet<Peer>,
}

impl Swarm {
    /// Spawns `count` peers, each with an in-memory store and the config
    /// returned by `config` for its index.
    pub fn spawn(
        seed: u64,
        count: usize,
        bootstrap: usize,
        adversary: Option<AdversarySpec>,
        config: impl Fn(NodeIndex) -> PeerConfig,
    ) -> Result<Swarm, NetError> {
        let mut net = SimNet::new(seed);
        let difficulty = config(0).dht.difficulty;
        netsim::spawn(&mut net, count, difficulty, bootstrap, adversary, |idx, identity, _| {
            Peer::new(identity, idx, Arc::new(MemoryStore::new()), config(idx))
        })?;
        let mut swarm = Swarm { net };
        swarm.settle();
        Ok(swarm)
    }

    /// Spawns the peers a scenario describes, with link conditions, horizon
    /// and adversaries applied. `store` supplies each peer's block store.
    pub fn from_scenario(
        scenario: &Scenario,
        store: impl Fn(NodeIndex) -> Arc<dyn BlockStore>,
        config: impl Fn(NodeIndex) -> PeerConfig,
    ) -> Result<Swarm, NetError> {
        let mut net = SimNet::new(scenario.seed);
        scenario.apply(&mut net);
        netsim::spawn(&mut net, scenario.nodes, scenario.difficulty, scenario.bootstrap, scenario.adversary, |idx, identity, _| {
            let mut cfg = config(idx);
            cfg.dht.difficulty = scenario.difficulty;
            cfg.bitswap.difficulty = scenario.difficulty;
            Peer::new(identity, idx, store(idx), cfg)
        })?;
        let mut swarm = Swarm { net };
        swarm.settle();
        Ok(swarm)
    }

    /// Runs until every node has bootstrapped and no DHT work is pending.
    pub fn settle(&mut self) {
        let now = self.net.now();
        self.net.run_until(Until::Time(now));
        self.net.run_while_not(|net| net.nodes().iter().all(|p| p.dht.is_idle()));
    }

    pub fn peer(&self, idx: NodeIndex) -> &Peer {
        self.net.node(idx)
    }

    pub fn store(&self, idx: NodeIndex) -> Arc<dyn BlockStore> {
        self.net.node(idx).store.clone()
    }

    pub fn provide(&mut self, idx: NodeIndex, key: &Multihash) -> Result<(), RoutingError> {
        let op = self.net.with_node(idx, |p, ctx| p.provide(ctx, key)).map_err(|_| RoutingError::Stalled)?;
        self.net.run_while_not(|net| net.node(idx).dht.has_result(op));
        self.net.node_mut(idx).dht.take_result(op).map(|_| ()).ok_or(RoutingError::Stalled)
    }

    pub fn fetch(&mut self, idx: NodeIndex, root: &Multihash) -> Result<FetchId, NetError> {
        self.net.with_node(idx, |p, ctx| p.fetch(ctx, root))
    }

    /// Runs until the fetch completes or `deadline` passes; returns the
    /// completion time.
    pub fn run_fetch(&mut self, idx: NodeIndex, id: FetchId, deadline: SimTime) -> Option<SimTime> {
        self.net.run_while_not(|net| net.node(idx).fetch_finished(id).is_some() || net.now() >= deadline);
        self.net.node(idx).fetch_finished(id)
    }

    pub fn run_for(&mut self, d: Duration) {
        let t = self.net.now() + d;
        self.net.run_until(Until::Time(t));
    }
}
