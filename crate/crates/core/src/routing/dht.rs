use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::time::Duration;

use super::message::{Message, MessageBody, TAG_MAX, TAG_MIN};
use super::record::check_sizes;
use super::table::{xor, RoutingTable};
use super::{value_xor_key, Contact, ProviderRecord, ProviderSet, Routing, RoutingError, ValueRecord};
use crate::identity::{verify_peer, NodeId, NodeIdentity};
use crate::multiformats::{Multiaddr, Multihash};
use crate::netsim::{self, AdversarySpec, Ctx, Frame, NetError, NodeIndex, SimNet, SimNode, SimTime, Until};

/// Timer tokens owned by the DHT carry this bit.
pub const DHT_TIMER: u64 = 1 << 60;
const REPUBLISH_TIMER: u64 = 1 << 56;
const TOKEN_MASK: u64 = (1 << 56) - 1;

#[derive(Debug, Clone, PartialEq)]
pub struct DhtConfig {
    pub k: usize,
    pub alpha: usize,
    pub rpc_timeout: Duration,
    pub provider_ttl: Duration,
    pub republish: Option<Duration>,
    pub provider_cap: usize,
    pub difficulty: u32,
    /// Disjoint paths used by `find_peer`.
    pub paths: usize,
}

impl Default for DhtConfig {
    fn default() -> Self {
        DhtConfig {
            k: 20,
            alpha: 3,
            rpc_timeout: Duration::from_secs(1),
            provider_ttl: Duration::from_secs(24 * 3600),
            republish: Some(Duration::from_secs(12 * 3600)),
            provider_cap: 16,
            difficulty: 0,
            paths: 1,
        }
    }
}

pub type OpId = u64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Nodes(Vec<Contact>),
    Peer(Option<Multiaddr>),
    Value(Option<ValueRecord>),
    /// Number of remote nodes that accepted the record.
    Stored(usize),
    Providers(ProviderSet),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpResult {
    pub outcome: Outcome,
    /// Nodes queried by each lookup path, in query order.
    pub contacted: Vec<Vec<NodeId>>,
}

impl OpResult {
    pub fn contacted_total(&self) -> usize {
        self.contacted.iter().map(Vec::len).sum()
    }
}

#[derive(Debug, Clone)]
enum Goal {
    FindNode,
    FindPeer(NodeId),
    GetValue(Vec<u8>),
    GetProviders { key: Multihash, min: usize },
    PutRecord(ValueRecord),
    Provide(Multihash),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Fresh,
    InFlight,
    Responded,
    Failed,
}

#[derive(Debug, Clone)]
struct Candidate {
    id: NodeId,
    addr: Multiaddr,
    state: State,
}

#[derive(Debug, Default)]
struct Path {
    shortlist: BTreeMap<[u8; 32], Candidate>,
    inflight: usize,
    done: bool,
    contacted: Vec<NodeId>,
}

#[derive(Debug)]
struct StorePhase {
    queue: VecDeque<Contact>,
    inflight: usize,
    accepted: usize,
    wanted: usize,
    spill: bool,
}

#[derive(Debug)]
struct Lookup {
    target: [u8; 32],
    target_bytes: Vec<u8>,
    goal: Goal,
    paths: Vec<Path>,
    claimed: BTreeMap<NodeId, usize>,
    found: Option<Multiaddr>,
    best: Option<ValueRecord>,
    providers: BTreeMap<NodeId, Multiaddr>,
    store: Option<StorePhase>,
    internal: bool,
}

#[derive(Debug, Clone, Copy)]
enum Purpose {
    Bootstrap,
    Lookup { op: OpId, path: usize },
    Store { op: OpId },
}

#[derive(Debug)]
struct Pending {
    peer: NodeIndex,
    id: Option<NodeId>,
    purpose: Purpose,
}

/// One node's DHT actor. All state changes happen inside callbacks that
/// receive the simulator context.
pub struct Dht {
    identity: NodeIdentity,
    addr: Multiaddr,
    config: DhtConfig,
    table: RoutingTable,
    values: BTreeMap<Vec<u8>, ValueRecord>,
    providers: BTreeMap<Multihash, Vec<ProviderRecord>>,
    own_provides: BTreeSet<Multihash>,
    republish: Vec<Multihash>,
    ops: BTreeMap<OpId, Lookup>,
    results: BTreeMap<OpId, OpResult>,
    pending: BTreeMap<u64, Pending>,
    next_op: OpId,
    next_rpc: u64,
    bootstrap_pending: usize,
    requests_sent: u64,
}

impl Dht {
    pub fn new(identity: NodeIdentity, addr: Multiaddr, config: DhtConfig) -> Self {
        let table = RoutingTable::new(identity.node_id(), config.k);
        Dht {
            identity,
            addr,
            config,
            table,
            values: BTreeMap::new(),
            providers: BTreeMap::new(),
            own_provides: BTreeSet::new(),
            republish: Vec::new(),
            ops: BTreeMap::new(),
            results: BTreeMap::new(),
            pending: BTreeMap::new(),
            next_op: 1,
            next_rpc: 1,
            bootstrap_pending: 0,
            requests_sent: 0,
        }
    }

    pub fn node_id(&self) -> &NodeId {
        self.identity.node_id()
    }

    pub fn identity(&self) -> &NodeIdentity {
        &self.identity
    }

    pub fn addr(&self) -> &Multiaddr {
        &self.addr
    }

    pub fn config(&self) -> &DhtConfig {
        &self.config
    }

    pub fn table(&self) -> &RoutingTable {
        &self.table
    }

    pub fn requests_sent(&self) -> u64 {
        self.requests_sent
    }

    pub fn is_bootstrapping(&self) -> bool {
        self.bootstrap_pending > 0
    }

    /// No RPCs in flight and no lookups running.
    pub fn is_idle(&self) -> bool {
        self.pending.is_empty() && self.ops.is_empty() && self.bootstrap_pending == 0
    }

    /// Unexpired provider records this node stores on behalf of others.
    pub fn stored_providers(&self, key: &Multihash, now: SimTime) -> Vec<&ProviderRecord> {
        self.providers.get(key).map(|v| v.iter().filter(|r| r.expiry > now).collect()).unwrap_or_default()
    }

    pub fn stored_value(&self, key: &[u8]) -> Option<&ValueRecord> {
        self.values.get(key)
    }

    pub fn has_result(&self, op: OpId) -> bool {
        self.results.contains_key(&op)
    }

    pub fn take_result(&mut self, op: OpId) -> Option<OpResult> {
        self.results.remove(&op)
    }

    pub fn is_dht_frame(frame: &Frame) -> bool {
        frame.bytes.first().is_some_and(|t| (TAG_MIN..=TAG_MAX).contains(t))
    }

    pub fn bootstrap(&mut self, ctx: &mut Ctx<'_>, peers: &[NodeIndex]) {
        for &p in peers {
            if self.send(ctx, p, None, Purpose::Bootstrap, MessageBody::Ping) {
                self.bootstrap_pending += 1;
            }
        }
    }

    fn bootstrap_step(&mut self, ctx: &mut Ctx<'_>) {
        self.bootstrap_pending -= 1;
        if self.bootstrap_pending == 0 {
            let target = self.node_id().to_bytes();
            self.start(ctx, Goal::FindNode, &target, 1, true);
        }
    }

    // ---- operations ----

    pub fn start_find_node(&mut self, ctx: &mut Ctx<'_>, target: &[u8]) -> OpId {
        self.start(ctx, Goal::FindNode, target, 1, false)
    }

    pub fn start_find_peer(&mut self, ctx: &mut Ctx<'_>, target: &NodeId, paths: usize) -> OpId {
        self.start(ctx, Goal::FindPeer(target.clone()), &target.to_bytes(), paths, false)
    }

    pub fn start_get_value(&mut self, ctx: &mut Ctx<'_>, key: &[u8]) -> OpId {
        self.start(ctx, Goal::GetValue(key.to_vec()), key, 1, false)
    }

    pub fn start_put_record(&mut self, ctx: &mut Ctx<'_>, record: ValueRecord) -> Result<OpId, RoutingError> {
        check_sizes(&record.key, &record.value)?;
        if !record.verify() {
            return Err(RoutingError::BadSignature);
        }
        self.store_value(record.clone());
        let key = record.key.clone();
        Ok(self.start(ctx, Goal::PutRecord(record), &key, 1, false))
    }

    pub fn start_provide(&mut self, ctx: &mut Ctx<'_>, key: &Multihash) -> OpId {
        if self.own_provides.insert(key.clone()) {
            if let Some(every) = self.config.republish {
                self.republish.push(key.clone());
                ctx.set_timer(every, DHT_TIMER | REPUBLISH_TIMER | (self.republish.len() as u64 - 1));
            }
        }
        self.start(ctx, Goal::Provide(key.clone()), &key.to_bytes(), 1, false)
    }

    pub fn start_find_providers(&mut self, ctx: &mut Ctx<'_>, key: &Multihash, min: usize) -> OpId {
        self.start(ctx, Goal::GetProviders { key: key.clone(), min }, &key.to_bytes(), 1, false)
    }

    fn start(&mut self, ctx: &mut Ctx<'_>, goal: Goal, target: &[u8], paths: usize, internal: bool) -> OpId {
        let op = self.next_op;
        self.next_op += 1;
        let target_key = value_xor_key(target);
        let mut lk = Lookup {
            target: target_key,
            target_bytes: target.to_vec(),
            goal,
            paths: Vec::new(),
            claimed: BTreeMap::new(),
            found: None,
            best: None,
            providers: BTreeMap::new(),
            store: None,
            internal,
        };
        match &lk.goal {
            Goal::FindPeer(t) if t == self.node_id() => lk.found = Some(self.addr.clone()),
            Goal::FindPeer(t) => lk.found = self.table.get(t).map(|e| e.addr.clone()),
            Goal::GetValue(key) => lk.best = self.values.get(key).cloned(),
            Goal::GetProviders { key, .. } => lk.providers = self.local_providers(key, ctx.now()),
            _ => {}
        }
        let seeds = self.table.closest(&target_key, self.config.k);
        let n = paths.max(1).min(seeds.len()).max(1);
        lk.paths = (0..n).map(|_| Path::default()).collect();
        for (i, e) in seeds.into_iter().enumerate() {
            let c = Candidate { id: e.id, addr: e.addr, state: State::Fresh };
            lk.paths[i % n].shortlist.insert(xor(&e.key, &target_key), c);
        }
        self.drive(ctx, op, lk);
        op
    }

    fn local_providers(&self, key: &Multihash, now: SimTime) -> BTreeMap<NodeId, Multiaddr> {
        let mut out: BTreeMap<NodeId, Multiaddr> = self
            .stored_providers(key, now)
            .into_iter()
            .map(|r| (r.provider.clone(), r.addr.clone()))
            .collect();
        if self.own_provides.contains(key) {
            out.insert(self.node_id().clone(), self.addr.clone());
        }
        out
    }

    fn search_body(goal: &Goal, target_bytes: Vec<u8>) -> MessageBody {
        match goal {
            Goal::GetValue(key) => MessageBody::FindValue { key: key.clone() },
            Goal::GetProviders { key, .. } => MessageBody::GetProviders { key: key.clone() },
            _ => MessageBody::FindNode { target: target_bytes },
        }
    }

    fn early_stop(lk: &Lookup) -> bool {
        match &lk.goal {
            Goal::FindPeer(_) => lk.found.is_some(),
            Goal::GetProviders { min, .. } => *min > 0 && lk.providers.len() >= *min,
            _ => false,
        }
    }

    fn drive(&mut self, ctx: &mut Ctx<'_>, op: OpId, mut lk: Lookup) {
        if lk.store.is_some() {
            return self.drive_store(ctx, op, lk);
        }
        if !Self::early_stop(&lk) {
            let body = Self::search_body(&lk.goal, lk.target_bytes.clone());
            for p in 0..lk.paths.len() {
                if !lk.paths[p].done {
                    self.fill_path(ctx, op, &mut lk, p, &body);
                }
                if Self::early_stop(&lk) {
                    break;
                }
            }
        }
        if Self::early_stop(&lk) || lk.paths.iter().all(|p| p.done) {
            self.finish_search(ctx, op, lk);
        } else {
            self.ops.insert(op, lk);
        }
    }

    fn fill_path(&mut self, ctx: &mut Ctx<'_>, op: OpId, lk: &mut Lookup, p: usize, body: &MessageBody) {
        loop {
            let mut picks = Vec::new();
            let mut inflight = lk.paths[p].inflight;
            let mut live = 0;
            for (dist, c) in &lk.paths[p].shortlist {
                if c.state == State::Failed || lk.claimed.get(&c.id).is_some_and(|&owner| owner != p) {
                    continue;
                }
                live += 1;
                if live > self.config.k || inflight >= self.config.alpha {
                    break;
                }
                if c.state == State::Fresh {
                    picks.push(*dist);
                    inflight += 1;
                }
            }
            let mut failed_send = false;
            for dist in picks {
                let c = &lk.paths[p].shortlist[&dist];
                let (id, addr) = (c.id.clone(), c.addr.clone());
                lk.claimed.insert(id.clone(), p);
                lk.paths[p].contacted.push(id.clone());
                let sent = match addr.sim_node() {
                    Some(idx) => self.send(ctx, idx as NodeIndex, Some(id), Purpose::Lookup { op, path: p }, body.clone()),
                    None => false,
                };
                let c = lk.paths[p].shortlist.get_mut(&dist).expect("picked candidate");
                if sent {
                    c.state = State::InFlight;
                    lk.paths[p].inflight += 1;
                } else {
                    c.state = State::Failed;
                    failed_send = true;
                }
            }
            if !failed_send {
                break;
            }
        }
        if lk.paths[p].inflight == 0 {
            lk.paths[p].done = true;
        }
    }

    /// Live candidates from every path, closest first, without duplicates.
    fn merged(lk: &Lookup, responded_only: bool) -> Vec<Contact> {
        let mut failed = BTreeSet::new();
        let mut all: BTreeMap<[u8; 32], Contact> = BTreeMap::new();
        for path in &lk.paths {
            for (dist, c) in &path.shortlist {
                match c.state {
                    State::Failed => {
                        failed.insert(*dist);
                    }
                    State::Responded => {
                        all.insert(*dist, Contact { id: c.id.clone(), addr: c.addr.clone() });
                    }
                    _ if !responded_only => {
                        all.entry(*dist).or_insert_with(|| Contact { id: c.id.clone(), addr: c.addr.clone() });
                    }
                    _ => {}
                }
            }
        }
        all.into_iter().filter(|(d, _)| !failed.contains(d)).map(|(_, c)| c).collect()
    }

    fn finish_search(&mut self, ctx: &mut Ctx<'_>, op: OpId, mut lk: Lookup) {
        let outcome = match &lk.goal {
            Goal::FindNode => {
                Outcome::Nodes(Self::merged(&lk, true).into_iter().take(self.config.k).collect())
            }
            Goal::FindPeer(_) => Outcome::Peer(lk.found.clone()),
            Goal::GetValue(_) => Outcome::Value(lk.best.clone()),
            Goal::GetProviders { min, .. } => {
                let peers = std::mem::take(&mut lk.providers).into_iter().collect();
                Outcome::Providers(ProviderSet::from_peers(peers, *min))
            }
            Goal::PutRecord(_) => {
                let queue: VecDeque<Contact> = Self::merged(&lk, true).into_iter().take(self.config.k).collect();
                let wanted = queue.len();
                lk.store = Some(StorePhase { queue, inflight: 0, accepted: 0, wanted, spill: false });
                return self.drive_store(ctx, op, lk);
            }
            Goal::Provide(_) => {
                let queue = Self::merged(&lk, false).into();
                lk.store = Some(StorePhase { queue, inflight: 0, accepted: 0, wanted: self.config.k, spill: true });
                return self.drive_store(ctx, op, lk);
            }
        };
        self.complete(op, lk, outcome);
    }

    fn drive_store(&mut self, ctx: &mut Ctx<'_>, op: OpId, mut lk: Lookup) {
        let body = match &lk.goal {
            Goal::PutRecord(r) => MessageBody::StoreValue { record: r.clone() },
            Goal::Provide(key) => MessageBody::AddProvider { key: key.clone() },
            _ => unreachable!("store phase only follows put or provide"),
        };
        let st = lk.store.as_mut().expect("store phase");
        while st.accepted + st.inflight < st.wanted {
            let Some(c) = st.queue.pop_front() else { break };
            if let Some(idx) = c.addr.sim_node() {
                if self.send(ctx, idx as NodeIndex, Some(c.id), Purpose::Store { op }, body.clone()) {
                    st.inflight += 1;
                }
            }
            if !st.spill && st.queue.is_empty() {
                break;
            }
        }
        if st.inflight == 0 {
            let accepted = st.accepted;
            self.complete(op, lk, Outcome::Stored(accepted));
        } else {
            self.ops.insert(op, lk);
        }
    }

    fn complete(&mut self, op: OpId, lk: Lookup, outcome: Outcome) {
        if !lk.internal {
            let contacted = lk.paths.into_iter().map(|p| p.contacted).collect();
            self.results.insert(op, OpResult { outcome, contacted });
        }
    }

    // ---- local storage ----

    fn store_value(&mut self, record: ValueRecord) -> bool {
        match self.values.get(&record.key) {
            Some(existing) if existing == &record => true,
            Some(existing) if !record.supersedes(existing) => false,
            _ => {
                self.values.insert(record.key.clone(), record);
                true
            }
        }
    }

    fn add_provider(&mut self, key: Multihash, provider: NodeId, addr: Multiaddr, now: SimTime) -> bool {
        let expiry = now + self.config.provider_ttl;
        let records = self.providers.entry(key.clone()).or_default();
        records.retain(|r| r.expiry > now);
        if let Some(r) = records.iter_mut().find(|r| r.provider == provider) {
            r.expiry = expiry;
            r.addr = addr;
            return true;
        }
        if records.len() >= self.config.provider_cap {
            return false;
        }
        records.push(ProviderRecord { key, provider, addr, expiry });
        true
    }

    // ---- wire ----

    fn message(&self, rpc: u64, body: MessageBody) -> Message {
        Message {
            rpc,
            sender: self.node_id().clone(),
            public_key: self.identity.public_key().to_vec(),
            addr: self.addr.clone(),
            body,
        }
    }

    fn emit(&self, ctx: &mut Ctx<'_>, to: NodeIndex, msg: &Message) {
        let frame = Frame { query: msg.body.is_request(), ..Frame::new(msg.body.kind(), msg.encode()) };
        ctx.send(to, frame);
    }

    fn send(&mut self, ctx: &mut Ctx<'_>, to: NodeIndex, id: Option<NodeId>, purpose: Purpose, body: MessageBody) -> bool {
        if to == ctx.me() {
            return false;
        }
        let rpc = self.next_rpc;
        self.next_rpc += 1;
        let msg = self.message(rpc, body);
        self.emit(ctx, to, &msg);
        self.requests_sent += 1;
        self.pending.insert(rpc, Pending { peer: to, id, purpose });
        ctx.set_timer(self.config.rpc_timeout, DHT_TIMER | rpc);
        true
    }

    fn closest_contacts(&self, target: &[u8; 32], exclude: &NodeId) -> Vec<Contact> {
        self.table
            .closest(target, self.config.k + 1)
            .into_iter()
            .filter(|e| e.id != *exclude)
            .take(self.config.k)
            .map(|e| Contact { id: e.id, addr: e.addr })
            .collect()
    }

    /// Handles a frame if it carries a DHT message. Returns false otherwise.
    pub fn handle_frame(&mut self, ctx: &mut Ctx<'_>, from: NodeIndex, frame: &Frame) -> bool {
        if !Self::is_dht_frame(frame) {
            return false;
        }
        let Ok(msg) = Message::decode(&frame.bytes) else {
            return true;
        };
        if msg.addr.sim_node() != Some(from as u64)
            || !verify_peer(&msg.sender, &msg.public_key, self.config.difficulty)
        {
            return true;
        }
        self.table.update(&msg.sender, &msg.addr, ctx.now());
        if msg.body.is_request() {
            self.answer(ctx, from, msg);
        } else {
            self.on_response(ctx, from, msg);
        }
        true
    }

    fn answer(&mut self, ctx: &mut Ctx<'_>, from: NodeIndex, msg: Message) {
        let now = ctx.now();
        let reply = match msg.body {
            MessageBody::Ping => MessageBody::Pong,
            MessageBody::FindNode { target } => {
                MessageBody::Nodes { contacts: self.closest_contacts(&value_xor_key(&target), &msg.sender) }
            }
            MessageBody::FindValue { key } => MessageBody::Value {
                record: self.values.get(&key).cloned(),
                contacts: self.closest_contacts(&value_xor_key(&key), &msg.sender),
            },
            MessageBody::StoreValue { record } => {
                let stored = record.verify() && self.store_value(record);
                MessageBody::StoreAck { stored }
            }
            MessageBody::AddProvider { key } => {
                MessageBody::ProviderAck { stored: self.add_provider(key, msg.sender.clone(), msg.addr.clone(), now) }
            }
            MessageBody::GetProviders { key } => MessageBody::Providers {
                providers: self.local_providers(&key, now).into_iter().map(|(id, addr)| Contact { id, addr }).collect(),
                contacts: self.closest_contacts(&key.xor_key(), &msg.sender),
            },
            _ => return,
        };
        let out = self.message(msg.rpc, reply);
        self.emit(ctx, from, &out);
    }

    fn on_response(&mut self, ctx: &mut Ctx<'_>, from: NodeIndex, msg: Message) {
        let Some(pending) = self.pending.get(&msg.rpc) else {
            return;
        };
        if pending.peer != from || pending.id.as_ref().is_some_and(|id| *id != msg.sender) {
            return;
        }
        let pending = self.pending.remove(&msg.rpc).expect("checked above");
        match pending.purpose {
            Purpose::Bootstrap => self.bootstrap_step(ctx),
            Purpose::Lookup { op, path } => {
                let Some(mut lk) = self.ops.remove(&op) else { return };
                self.absorb(&mut lk, path, msg);
                self.drive(ctx, op, lk);
            }
            Purpose::Store { op } => {
                let Some(mut lk) = self.ops.remove(&op) else { return };
                let ok = matches!(msg.body, MessageBody::StoreAck { stored: true } | MessageBody::ProviderAck { stored: true });
                if let Some(st) = lk.store.as_mut() {
                    st.inflight -= 1;
                    st.accepted += ok as usize;
                }
                self.drive(ctx, op, lk);
            }
        }
    }

    fn absorb(&self, lk: &mut Lookup, p: usize, msg: Message) {
        let dist = xor(&msg.sender.xor_key(), &lk.target);
        if let Some(c) = lk.paths[p].shortlist.get_mut(&dist) {
            if c.state == State::InFlight {
                c.state = State::Responded;
                lk.paths[p].inflight -= 1;
            }
        }
        if let Goal::FindPeer(t) = &lk.goal {
            if *t == msg.sender {
                lk.found = Some(msg.addr.clone());
            }
        }
        let contacts = match msg.body {
            MessageBody::Nodes { contacts } => contacts,
            MessageBody::Value { record, contacts } => {
                if let (Goal::GetValue(key), Some(rec)) = (&lk.goal, record) {
                    if rec.key == *key && rec.verify() && lk.best.as_ref().is_none_or(|b| rec.supersedes(b)) {
                        lk.best = Some(rec);
                    }
                }
                contacts
            }
            MessageBody::Providers { providers, contacts } => {
                for c in providers {
                    lk.providers.entry(c.id).or_insert(c.addr);
                }
                contacts
            }
            _ => Vec::new(),
        };
        for c in contacts {
            if c.id == *self.node_id() {
                continue;
            }
            if let Goal::FindPeer(t) = &lk.goal {
                if *t == c.id && lk.found.is_none() {
                    lk.found = Some(c.addr.clone());
                }
            }
            let d = xor(&c.id.xor_key(), &lk.target);
            lk.paths[p].shortlist.entry(d).or_insert(Candidate { id: c.id, addr: c.addr, state: State::Fresh });
        }
    }

    pub fn handle_timer(&mut self, ctx: &mut Ctx<'_>, token: u64) -> bool {
        if token & DHT_TIMER == 0 {
            return false;
        }
        let token = token & !DHT_TIMER;
        if token & REPUBLISH_TIMER != 0 {
            let i = (token & TOKEN_MASK) as usize;
            if let (Some(key), Some(every)) = (self.republish.get(i).cloned(), self.config.republish) {
                ctx.set_timer(every, DHT_TIMER | REPUBLISH_TIMER | i as u64);
                self.start(ctx, Goal::Provide(key.clone()), &key.to_bytes(), 1, true);
            }
            return true;
        }
        let Some(pending) = self.pending.remove(&token) else {
            return true;
        };
        if let Some(id) = &pending.id {
            self.table.remove(id);
        }
        match pending.purpose {
            Purpose::Bootstrap => self.bootstrap_step(ctx),
            Purpose::Lookup { op, path } => {
                let Some(mut lk) = self.ops.remove(&op) else { return true };
                if let Some(id) = &pending.id {
                    let dist = xor(&id.xor_key(), &lk.target);
                    if let Some(c) = lk.paths[path].shortlist.get_mut(&dist) {
                        if c.state == State::InFlight {
                            c.state = State::Failed;
                            lk.paths[path].inflight -= 1;
                        }
                    }
                }
                self.drive(ctx, op, lk);
            }
            Purpose::Store { op } => {
                let Some(mut lk) = self.ops.remove(&op) else { return true };
                if let Some(st) = lk.store.as_mut() {
                    st.inflight -= 1;
                }
                self.drive(ctx, op, lk);
            }
        }
        true
    }
}

/// A simulator node running only the DHT.
pub struct DhtNode {
    pub dht: Dht,
}

impl SimNode for DhtNode {
    fn on_start(&mut self, ctx: &mut Ctx<'_>, bootstrap: &[NodeIndex]) {
        self.dht.bootstrap(ctx, bootstrap);
    }

    fn on_frame(&mut self, ctx: &mut Ctx<'_>, from: NodeIndex, frame: Frame) {
        self.dht.handle_frame(ctx, from, &frame);
    }

    fn on_timer(&mut self, ctx: &mut Ctx<'_>, token: u64) {
        self.dht.handle_timer(ctx, token);
    }
}

/// A simulated DHT network with blocking helpers that run the simulation
/// until an operation completes.
pub struct DhtNet {
    pub net: SimNet<DhtNode>,
}

impl DhtNet {
    pub fn spawn(
        seed: u64,
        count: usize,
        bootstrap: usize,
        config: DhtConfig,
        adversary: Option<AdversarySpec>,
    ) -> Result<DhtNet, NetError> {
        let mut net = SimNet::new(seed);
        netsim::spawn(&mut net, count, config.difficulty, bootstrap, adversary, |idx, identity, _| DhtNode {
            dht: Dht::new(identity, Multiaddr::sim(idx as u64), config.clone()),
        })?;
        let mut dn = DhtNet { net };
        dn.settle();
        Ok(dn)
    }

    /// Runs until every node has finished bootstrapping and all RPCs of the
    /// moment have resolved or timed out.
    pub fn settle(&mut self) {
        let now = self.net.now();
        self.net.run_until(Until::Time(now));
        self.net.run_while_not(|net| net.nodes().iter().all(|n| n.dht.is_idle()));
    }

    pub fn dht(&self, idx: NodeIndex) -> &Dht {
        &self.net.node(idx).dht
    }

    pub fn run_op(
        &mut self,
        idx: NodeIndex,
        start: impl FnOnce(&mut Dht, &mut Ctx<'_>) -> Result<OpId, RoutingError>,
    ) -> Result<OpResult, RoutingError> {
        let op = self.net.with_node(idx, |n, ctx| start(&mut n.dht, ctx)).map_err(|_| RoutingError::Stalled)??;
        self.net.run_while_not(|net| net.node(idx).dht.has_result(op));
        self.net.node_mut(idx).dht.take_result(op).ok_or(RoutingError::Stalled)
    }

    pub fn find_peer_paths(&mut self, idx: NodeIndex, target: &NodeId, paths: usize) -> Result<OpResult, RoutingError> {
        self.run_op(idx, |d, ctx| Ok(d.start_find_peer(ctx, target, paths)))
    }

    pub fn advance(&mut self, by: Duration) {
        let until = self.net.now() + by;
        self.net.run_until(Until::Time(until));
    }

    pub fn handle(&mut self, idx: NodeIndex) -> DhtHandle<'_> {
        DhtHandle { net: self, idx }
    }
}

/// [`Routing`] view of one node of a [`DhtNet`].
pub struct DhtHandle<'a> {
    net: &'a mut DhtNet,
    idx: NodeIndex,
}

impl Routing for DhtHandle<'_> {
    fn find_peer(&mut self, target: &NodeId) -> Result<Option<Multiaddr>, RoutingError> {
        let paths = self.net.dht(self.idx).config.paths;
        match self.net.find_peer_paths(self.idx, target, paths)?.outcome {
            Outcome::Peer(addr) => Ok(addr),
            _ => Err(RoutingError::Stalled),
        }
    }

    fn put_record(&mut self, record: ValueRecord) -> Result<(), RoutingError> {
        self.net.run_op(self.idx, |d, ctx| d.start_put_record(ctx, record)).map(|_| ())
    }

    fn get_value(&mut self, key: &[u8]) -> Result<Option<ValueRecord>, RoutingError> {
        match self.net.run_op(self.idx, |d, ctx| Ok(d.start_get_value(ctx, key)))?.outcome {
            Outcome::Value(v) => Ok(v),
            _ => Err(RoutingError::Stalled),
        }
    }

    fn provide(&mut self, key: &Multihash, identity: &NodeIdentity) -> Result<(), RoutingError> {
        if identity.node_id() != self.net.dht(self.idx).node_id() {
            return Err(RoutingError::ForeignIdentity);
        }
        self.net.run_op(self.idx, |d, ctx| Ok(d.start_provide(ctx, key))).map(|_| ())
    }

    fn find_value_peers(&mut self, key: &Multihash, min: usize) -> Result<ProviderSet, RoutingError> {
        match self.net.run_op(self.idx, |d, ctx| Ok(d.start_find_providers(ctx, key, min)))?.outcome {
            Outcome::Providers(p) => Ok(p),
            _ => Err(RoutingError::Stalled),
        }
    }
}

#[cfg(test)]
mod tests;
