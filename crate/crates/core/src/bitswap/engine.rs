use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;
use std::time::Duration;

use rand::Rng;

use super::message::{BsMessage, WantEntry, WireLedger};
use super::{Ledger, Sigmoid, Strategy};
use crate::blockstore::{Block, BlockStore};
use crate::identity::{verify_peer, NodeId, NodeIdentity};
use crate::multiformats::Multihash;
use crate::netsim::{Behavior, Ctx, Frame, NodeIndex, SimTime};

/// Timer tokens owned by BitSwap carry this bit.
pub const BITSWAP_TIMER: u64 = 2 << 60;
const SWEEP: u64 = 0;
const COOLDOWN: u64 = 1 << 52;
const READVERTISE: u64 = 2 << 52;
const KIND_MASK: u64 = 0xf << 52;
const PEER_MASK: u64 = (1 << 52) - 1;

#[derive(Debug, Clone, PartialEq)]
pub struct BitswapConfig {
    pub ignore_cooldown: Duration,
    pub silence_wait: Duration,
    pub sweep_interval: Duration,
    pub readvertise: (Duration, Duration),
    /// Refuse peers that present a zeroed ledger while owing us bytes.
    pub refuse_amnesiac: bool,
    /// Stop trading with a peer after it sends a block that fails verification.
    pub refuse_malicious: bool,
    /// Serve without consulting the strategy while this node needs nothing.
    pub seed_when_idle: bool,
    pub difficulty: u32,
}

impl Default for BitswapConfig {
    fn default() -> Self {
        BitswapConfig {
            ignore_cooldown: Duration::from_secs(10),
            silence_wait: Duration::from_secs(30),
            sweep_interval: Duration::from_secs(5),
            readvertise: (Duration::from_secs(25), Duration::from_secs(35)),
            refuse_amnesiac: false,
            refuse_malicious: true,
            seed_when_idle: false,
            difficulty: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionState {
    Opening,
    Open,
    Ignored { until: SimTime },
    Closed,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SessionStats {
    /// Strategy draws for sending blocks.
    pub draws: u64,
    pub ignores: u64,
    pub open_refusals: u64,
    pub blocks_sent: u64,
    pub blocks_recv: u64,
    pub rejected: u64,
    /// Time spent open or ignored.
    pub active: Duration,
    pub ignored: Duration,
}

#[derive(Debug)]
struct Session {
    id: Option<NodeId>,
    state: SessionState,
    since: SimTime,
    last_seen: SimTime,
    /// The session was refused at OPEN; it closes rather than opens when the
    /// cooldown ends.
    refused: bool,
    wants: BTreeMap<Multihash, u8>,
    outstanding: Option<(Multihash, u64)>,
    next_readvertise: Option<SimTime>,
    stats: SessionStats,
}

impl Session {
    fn new(now: SimTime) -> Self {
        Session {
            id: None,
            state: SessionState::Closed,
            since: now,
            last_seen: now,
            refused: false,
            wants: BTreeMap::new(),
            outstanding: None,
            next_readvertise: None,
            stats: SessionStats::default(),
        }
    }

    fn account(&mut self, now: SimTime) {
        let spent = now - self.since;
        match self.state {
            SessionState::Open => self.stats.active += spent,
            SessionState::Ignored { .. } => {
                self.stats.active += spent;
                self.stats.ignored += spent;
            }
            _ => {}
        }
        self.since = now;
    }

    fn set_state(&mut self, state: SessionState, now: SimTime) {
        self.account(now);
        self.state = state;
    }

    fn is_live(&self) -> bool {
        matches!(self.state, SessionState::Open | SessionState::Ignored { .. })
    }
}

/// One node's BitSwap actor.
pub struct Engine {
    identity: NodeIdentity,
    config: BitswapConfig,
    strategy: Box<dyn Strategy>,
    store: Arc<dyn BlockStore>,
    ledgers: BTreeMap<NodeId, Ledger>,
    sessions: BTreeMap<NodeIndex, Session>,
    need: BTreeSet<Multihash>,
    relay: BTreeSet<Multihash>,
    rarity: BTreeMap<Multihash, usize>,
    malicious: BTreeSet<NodeId>,
    received: Vec<Multihash>,
    sweep_armed: bool,
}

impl Engine {
    pub fn new(identity: NodeIdentity, store: Arc<dyn BlockStore>, config: BitswapConfig) -> Self {
        Engine {
            identity,
            config,
            strategy: Box::new(Sigmoid),
            store,
            ledgers: BTreeMap::new(),
            sessions: BTreeMap::new(),
            need: BTreeSet::new(),
            relay: BTreeSet::new(),
            rarity: BTreeMap::new(),
            malicious: BTreeSet::new(),
            received: Vec::new(),
            sweep_armed: false,
        }
    }

    pub fn with_strategy(mut self, strategy: Box<dyn Strategy>) -> Self {
        self.strategy = strategy;
        self
    }

    pub fn config(&self) -> &BitswapConfig {
        &self.config
    }

    pub fn config_mut(&mut self) -> &mut BitswapConfig {
        &mut self.config
    }

    pub fn store(&self) -> &Arc<dyn BlockStore> {
        &self.store
    }

    pub fn ledger(&self, partner: &NodeId) -> Option<&Ledger> {
        self.ledgers.get(partner)
    }

    pub fn ledgers(&self) -> impl Iterator<Item = &Ledger> {
        self.ledgers.values()
    }

    /// Installs a persisted ledger, replacing any held for that partner.
    pub fn restore_ledger(&mut self, ledger: Ledger) {
        self.ledgers.insert(ledger.partner.clone(), ledger);
    }

    /// Bytes received from all partners in their current ledger epochs.
    pub fn bytes_received(&self) -> u64 {
        self.ledgers.values().map(|l| l.bytes_recv).sum()
    }

    pub fn need_list(&self) -> &BTreeSet<Multihash> {
        &self.need
    }

    pub fn relay_list(&self) -> &BTreeSet<Multihash> {
        &self.relay
    }

    pub fn is_malicious(&self, id: &NodeId) -> bool {
        self.malicious.contains(id)
    }

    pub fn session_state(&self, peer: NodeIndex) -> Option<SessionState> {
        self.sessions.get(&peer).map(|s| s.state)
    }

    pub fn session_peer(&self, peer: NodeIndex) -> Option<&NodeId> {
        self.sessions.get(&peer).and_then(|s| s.id.as_ref())
    }

    pub fn peer_wants(&self, peer: NodeIndex) -> Vec<Multihash> {
        self.sessions.get(&peer).map(|s| s.wants.keys().cloned().collect()).unwrap_or_default()
    }

    /// Session statistics with the current interval counted up to `now`.
    pub fn session_stats(&self, peer: NodeIndex, now: SimTime) -> Option<SessionStats> {
        let s = self.sessions.get(&peer)?;
        let mut stats = s.stats.clone();
        let spent = now - s.since;
        match s.state {
            SessionState::Open => stats.active += spent,
            SessionState::Ignored { .. } => {
                stats.active += spent;
                stats.ignored += spent;
            }
            _ => {}
        }
        Some(stats)
    }

    pub fn set_rarity(&mut self, key: Multihash, providers: usize) {
        self.rarity.insert(key, providers);
    }

    /// Newly stored blocks since the last call.
    pub fn take_received(&mut self) -> Vec<Multihash> {
        std::mem::take(&mut self.received)
    }

    // ---- local actions ----

    pub fn want(&mut self, ctx: &mut Ctx<'_>, keys: impl IntoIterator<Item = Multihash>) {
        let mut added = Vec::new();
        for key in keys {
            if !self.store.has(&key) && self.need.insert(key.clone()) {
                self.relay.remove(&key);
                added.push(WantEntry { key, cancel: false, depth: 0 });
            }
        }
        if !added.is_empty() {
            self.broadcast(ctx, added);
            self.arm_sweep(ctx);
        }
    }

    pub fn cancel(&mut self, ctx: &mut Ctx<'_>, keys: impl IntoIterator<Item = Multihash>) {
        let removed: Vec<_> = keys
            .into_iter()
            .filter(|k| self.need.remove(k) | self.relay.remove(k))
            .map(|key| WantEntry { key, cancel: true, depth: 0 })
            .collect();
        if !removed.is_empty() {
            self.broadcast(ctx, removed);
        }
    }

    /// Opens a session unless one is already opening or live.
    pub fn connect(&mut self, ctx: &mut Ctx<'_>, peer: NodeIndex, peer_id: &NodeId) {
        if peer == ctx.me() || peer_id == self.identity.node_id() {
            return;
        }
        if self.config.refuse_malicious && self.malicious.contains(peer_id) {
            return;
        }
        let now = ctx.now();
        let s = self.sessions.entry(peer).or_insert_with(|| Session::new(now));
        if s.state != SessionState::Closed {
            return;
        }
        s.id = Some(peer_id.clone());
        s.refused = false;
        s.last_seen = now;
        s.set_state(SessionState::Opening, now);
        let ledger = self.presented(ctx, peer_id);
        self.send_open(ctx, peer, ledger);
        self.arm_sweep(ctx);
    }

    /// Closes every session for good.
    pub fn shutdown(&mut self, ctx: &mut Ctx<'_>) {
        let now = ctx.now();
        for (&peer, s) in &mut self.sessions {
            if s.state != SessionState::Closed {
                s.set_state(SessionState::Closed, now);
                Self::emit(ctx, peer, &BsMessage::Close { final_: true });
            }
        }
        self.sessions.clear();
    }

    /// Blocks wanted by open peers that this node lacks, fetched on their
    /// behalf only while the node needs nothing itself. Two peers wanting
    /// the same block yield one fetch.
    pub fn work_for_peers(&mut self, ctx: &mut Ctx<'_>, capacity: usize) -> Vec<Multihash> {
        if !self.need.is_empty() || capacity == 0 {
            return Vec::new();
        }
        let wanted: BTreeSet<Multihash> = self
            .sessions
            .values()
            .filter(|s| s.is_live())
            .flat_map(|s| s.wants.iter().filter(|(_, &d)| d == 0).map(|(k, _)| k.clone()))
            .filter(|k| !self.store.has(k) && !self.relay.contains(k))
            .collect();
        let room = capacity.saturating_sub(self.relay.len());
        let picked: Vec<Multihash> = wanted.into_iter().take(room).collect();
        if !picked.is_empty() {
            self.relay.extend(picked.iter().cloned());
            let entries = picked.iter().map(|k| WantEntry { key: k.clone(), cancel: false, depth: 1 }).collect();
            self.broadcast(ctx, entries);
            self.arm_sweep(ctx);
        }
        picked
    }

    // ---- wire helpers ----

    fn emit(ctx: &mut Ctx<'_>, to: NodeIndex, msg: &BsMessage) {
        let (bytes, payload) = msg.encode();
        ctx.send(to, Frame { payload, ..Frame::new(msg.kind(), bytes) });
    }

    fn presented(&self, ctx: &Ctx<'_>, partner: &NodeId) -> WireLedger {
        if ctx.behavior() == Behavior::LedgerAmnesia {
            return WireLedger::default();
        }
        self.ledgers
            .get(partner)
            .map(|l| WireLedger {
                bytes_sent: l.bytes_sent,
                bytes_recv: l.bytes_recv,
                timestamp: l.timestamp.as_micros(),
            })
            .unwrap_or_default()
    }

    fn send_open(&self, ctx: &mut Ctx<'_>, peer: NodeIndex, ledger: WireLedger) {
        let msg = BsMessage::Open {
            id: self.identity.node_id().clone(),
            public_key: self.identity.public_key().to_vec(),
            ledger,
        };
        Self::emit(ctx, peer, &msg);
    }

    fn full_want_list(&self) -> Vec<WantEntry> {
        let own = self.need.iter().map(|k| WantEntry { key: k.clone(), cancel: false, depth: 0 });
        let relayed = self.relay.iter().map(|k| WantEntry { key: k.clone(), cancel: false, depth: 1 });
        own.chain(relayed).collect()
    }

    fn broadcast(&self, ctx: &mut Ctx<'_>, entries: Vec<WantEntry>) {
        let msg = BsMessage::WantList { full: false, entries };
        for (&peer, s) in &self.sessions {
            if s.is_live() {
                Self::emit(ctx, peer, &msg);
            }
        }
    }

    fn arm_sweep(&mut self, ctx: &mut Ctx<'_>) {
        if !self.sweep_armed {
            self.sweep_armed = true;
            ctx.set_timer(self.config.sweep_interval, BITSWAP_TIMER | SWEEP);
        }
    }

    fn schedule_readvertise(&mut self, ctx: &mut Ctx<'_>, peer: NodeIndex) {
        let (lo, hi) = self.config.readvertise;
        let delay = Duration::from_micros(ctx.rng().gen_range(lo.as_micros() as u64..=hi.as_micros() as u64));
        if let Some(s) = self.sessions.get_mut(&peer) {
            s.next_readvertise = Some(ctx.now() + delay);
            ctx.set_timer(delay, BITSWAP_TIMER | READVERTISE | peer as u64);
        }
    }

    fn ledger_mut(&mut self, partner: &NodeId, now: SimTime) -> &mut Ledger {
        let owner = self.identity.node_id().clone();
        self.ledgers.entry(partner.clone()).or_insert_with(|| Ledger::zero(owner, partner.clone(), now))
    }

    fn close(&mut self, ctx: &mut Ctx<'_>, peer: NodeIndex, final_: bool) {
        let now = ctx.now();
        if let Some(s) = self.sessions.get_mut(&peer) {
            s.set_state(SessionState::Closed, now);
            s.wants.clear();
            s.next_readvertise = None;
        }
        Self::emit(ctx, peer, &BsMessage::Close { final_ });
    }

    // ---- inbound ----

    /// Handles a frame if it is a BitSwap frame. Returns false otherwise.
    pub fn handle_frame(&mut self, ctx: &mut Ctx<'_>, from: NodeIndex, frame: &Frame) -> bool {
        if !BsMessage::is_bitswap(&frame.bytes) {
            return false;
        }
        let msg = match BsMessage::decode(&frame.bytes) {
            Ok(m) => m,
            Err(_) => {
                if frame.bytes[0] == super::message::TAG_OPEN {
                    Self::emit(ctx, from, &BsMessage::Close { final_: true });
                }
                return true;
            }
        };
        match msg {
            BsMessage::Open { id, public_key, ledger } => self.on_open(ctx, from, id, &public_key, ledger),
            BsMessage::WantList { full, entries } => self.on_want_list(ctx, from, full, entries),
            BsMessage::Block { key, data } => self.on_block(ctx, from, key, data),
            BsMessage::BlockAck { key, ok } => self.on_ack(ctx, from, key, ok),
            BsMessage::Close { final_ } => self.on_close(ctx, from, final_),
        }
        true
    }

    fn on_open(&mut self, ctx: &mut Ctx<'_>, from: NodeIndex, id: NodeId, public_key: &[u8], theirs: WireLedger) {
        let now = ctx.now();
        if !verify_peer(&id, public_key, self.config.difficulty) || id == *self.identity.node_id() {
            Self::emit(ctx, from, &BsMessage::Close { final_: true });
            return;
        }
        if self.config.refuse_malicious && self.malicious.contains(&id) {
            Self::emit(ctx, from, &BsMessage::Close { final_: false });
            return;
        }
        let before = self.sessions.get(&from).map_or(SessionState::Closed, |s| s.state);
        if matches!(before, SessionState::Ignored { until } if now < until) {
            return;
        }
        let initiated_by_me = before == SessionState::Opening;

        let mine = self.ledger_mut(&id, now).clone();
        let mut reset = false;
        if !mine.mirrors(&theirs) {
            let owed = mine.bytes_sent > mine.bytes_recv;
            if self.config.refuse_amnesiac && theirs.is_zero() && owed && !initiated_by_me {
                self.refuse(ctx, from, &id);
                return;
            }
            *self.ledger_mut(&id, now) = Ledger::zero(self.identity.node_id().clone(), id.clone(), now);
            reset = true;
        }
        if !initiated_by_me && !matches!(before, SessionState::Open) {
            // an untrusted partner is refused with the same odds the strategy
            // would decline to send to it
            let p = self.strategy.send_probability(&self.ledgers[&id]);
            if ctx.rng().gen::<f64>() >= p {
                self.refuse(ctx, from, &id);
                return;
            }
        }
        let s = self.sessions.entry(from).or_insert_with(|| Session::new(now));
        s.id = Some(id.clone());
        s.last_seen = now;
        s.refused = false;
        let reply = !matches!(before, SessionState::Opening | SessionState::Open) || (reset && !theirs.is_zero());
        if reply {
            let ledger = self.presented(ctx, &id);
            self.send_open(ctx, from, ledger);
        }
        if before != SessionState::Open {
            self.sessions.get_mut(&from).expect("session").set_state(SessionState::Open, now);
            self.on_opened(ctx, from);
        }
    }

    fn refuse(&mut self, ctx: &mut Ctx<'_>, from: NodeIndex, id: &NodeId) {
        let now = ctx.now();
        let until = now + self.config.ignore_cooldown;
        let s = self.sessions.entry(from).or_insert_with(|| Session::new(now));
        s.id = Some(id.clone());
        s.stats.open_refusals += 1;
        s.refused = true;
        s.wants.clear();
        s.set_state(SessionState::Ignored { until }, now);
        ctx.set_timer(self.config.ignore_cooldown, BITSWAP_TIMER | COOLDOWN | from as u64);
        Self::emit(ctx, from, &BsMessage::Close { final_: false });
    }

    fn on_opened(&mut self, ctx: &mut Ctx<'_>, peer: NodeIndex) {
        let entries = self.full_want_list();
        if !entries.is_empty() {
            Self::emit(ctx, peer, &BsMessage::WantList { full: true, entries });
        }
        self.schedule_readvertise(ctx, peer);
        self.arm_sweep(ctx);
        self.try_send(ctx, peer);
    }

    fn on_want_list(&mut self, ctx: &mut Ctx<'_>, from: NodeIndex, full: bool, entries: Vec<WantEntry>) {
        let now = ctx.now();
        let Some(s) = self.sessions.get_mut(&from).filter(|s| s.is_live()) else {
            Self::emit(ctx, from, &BsMessage::Close { final_: false });
            return;
        };
        s.last_seen = now;
        if s.refused {
            return;
        }
        if full {
            s.wants.clear();
        }
        for e in entries {
            if e.cancel {
                s.wants.remove(&e.key);
            } else {
                s.wants.insert(e.key, e.depth);
            }
        }
        self.try_send(ctx, from);
    }

    fn on_block(&mut self, ctx: &mut Ctx<'_>, from: NodeIndex, key: Multihash, data: Vec<u8>) {
        let now = ctx.now();
        let verified = key.verify(&data).unwrap_or(false);
        let live = self.sessions.get(&from).is_some_and(|s| s.is_live() && !s.refused);
        if !live {
            // out-of-order block: use it if it is good and needed, then force a close
            if verified && self.needs(&key) {
                self.accept(ctx, key, data);
            }
            Self::emit(ctx, from, &BsMessage::Close { final_: false });
            return;
        }
        let s = self.sessions.get_mut(&from).expect("live session");
        s.last_seen = now;
        let id = s.id.clone().expect("live sessions know their peer");
        if !verified {
            s.stats.rejected += 1;
            Self::emit(ctx, from, &BsMessage::BlockAck { key, ok: false });
            self.malicious.insert(id);
            if self.config.refuse_malicious {
                self.close(ctx, from, false);
            }
            return;
        }
        s.stats.blocks_recv += 1;
        let len = data.len() as u64;
        let ledger = self.ledger_mut(&id, now);
        ledger.bytes_recv += len;
        ledger.timestamp = now;
        Self::emit(ctx, from, &BsMessage::BlockAck { key: key.clone(), ok: true });
        if self.needs(&key) {
            self.accept(ctx, key, data);
        }
    }

    fn needs(&self, key: &Multihash) -> bool {
        self.need.contains(key) || self.relay.contains(key)
    }

    fn accept(&mut self, ctx: &mut Ctx<'_>, key: Multihash, data: Vec<u8>) {
        let Ok(block) = Block::verified(key.clone(), data) else { return };
        if self.store.put_block(block).is_err() {
            return;
        }
        self.need.remove(&key);
        self.relay.remove(&key);
        self.received.push(key.clone());
        self.broadcast(ctx, vec![WantEntry { key: key.clone(), cancel: true, depth: 0 }]);
        let waiting: Vec<NodeIndex> =
            self.sessions.iter().filter(|(_, s)| s.wants.contains_key(&key)).map(|(&p, _)| p).collect();
        for peer in waiting {
            self.try_send(ctx, peer);
        }
    }

    fn on_ack(&mut self, ctx: &mut Ctx<'_>, from: NodeIndex, key: Multihash, ok: bool) {
        let now = ctx.now();
        let Some(s) = self.sessions.get_mut(&from) else { return };
        s.last_seen = now;
        let Some((pending, len)) = s.outstanding.take() else { return };
        if pending != key {
            s.outstanding = Some((pending, len));
            return;
        }
        if ok {
            s.stats.blocks_sent += 1;
            let id = s.id.clone().expect("sent blocks only on identified sessions");
            let ledger = self.ledger_mut(&id, now);
            ledger.bytes_sent += len;
            ledger.timestamp = now;
        }
        self.try_send(ctx, from);
    }

    fn on_close(&mut self, ctx: &mut Ctx<'_>, from: NodeIndex, final_: bool) {
        let now = ctx.now();
        let Some(s) = self.sessions.get_mut(&from) else { return };
        if matches!(s.state, SessionState::Ignored { until } if now < until) && s.refused {
            return;
        }
        s.set_state(SessionState::Closed, now);
        s.outstanding = None;
        s.wants.clear();
        s.next_readvertise = None;
        if final_ {
            self.sessions.remove(&from);
        }
    }

    /// Offers the rarest block the peer wants, subject to the strategy.
    fn try_send(&mut self, ctx: &mut Ctx<'_>, peer: NodeIndex) {
        let now = ctx.now();
        let idle = self.need.is_empty() && self.relay.is_empty();
        let Some(s) = self.sessions.get(&peer) else { return };
        if s.state != SessionState::Open || s.outstanding.is_some() {
            return;
        }
        let Some(key) = s
            .wants
            .keys()
            .filter(|k| self.store.has(k))
            .min_by_key(|k| (self.rarity.get(*k).copied().unwrap_or(0), (*k).clone()))
            .cloned()
        else {
            return;
        };
        let id = s.id.clone().expect("open sessions know their peer");
        if !(self.config.seed_when_idle && idle) {
            self.ledger_mut(&id, now);
            let p = self.strategy.send_probability(&self.ledgers[&id]);
            let draw: f64 = ctx.rng().gen();
            let s = self.sessions.get_mut(&peer).expect("session");
            s.stats.draws += 1;
            if draw >= p {
                s.stats.ignores += 1;
                s.set_state(SessionState::Ignored { until: now + self.config.ignore_cooldown }, now);
                ctx.set_timer(self.config.ignore_cooldown, BITSWAP_TIMER | COOLDOWN | peer as u64);
                return;
            }
        }
        let Ok(Some(data)) = self.store.get(&key) else { return };
        let s = self.sessions.get_mut(&peer).expect("session");
        s.wants.remove(&key);
        s.outstanding = Some((key.clone(), data.len() as u64));
        Self::emit(ctx, peer, &BsMessage::Block { key, data });
    }

    /// Handles a timer if it belongs to BitSwap. Returns false otherwise.
    pub fn handle_timer(&mut self, ctx: &mut Ctx<'_>, token: u64) -> bool {
        if token & (0xf << 60) != BITSWAP_TIMER {
            return false;
        }
        let now = ctx.now();
        let peer = (token & PEER_MASK) as NodeIndex;
        match token & KIND_MASK {
            SWEEP => self.sweep(ctx),
            COOLDOWN => {
                if let Some(s) = self.sessions.get_mut(&peer) {
                    if matches!(s.state, SessionState::Ignored { until } if until <= now) {
                        if s.refused {
                            s.refused = false;
                            s.set_state(SessionState::Closed, now);
                        } else {
                            s.set_state(SessionState::Open, now);
                            self.try_send(ctx, peer);
                        }
                    }
                }
            }
            READVERTISE => {
                let due = self.sessions.get(&peer).is_some_and(|s| s.is_live() && s.next_readvertise == Some(now));
                if due {
                    let entries = self.full_want_list();
                    if !entries.is_empty() {
                        Self::emit(ctx, peer, &BsMessage::WantList { full: true, entries });
                    }
                    self.schedule_readvertise(ctx, peer);
                }
            }
            _ => {}
        }
        true
    }

    fn sweep(&mut self, ctx: &mut Ctx<'_>) {
        self.sweep_armed = false;
        let now = ctx.now();
        let silent: Vec<NodeIndex> = self
            .sessions
            .iter()
            .filter(|(_, s)| {
                matches!(s.state, SessionState::Open | SessionState::Opening) && now - s.last_seen >= self.config.silence_wait
            })
            .map(|(&p, _)| p)
            .collect();
        for peer in silent {
            self.close(ctx, peer, false);
        }
        if !self.need.is_empty() || !self.relay.is_empty() {
            let retry: Vec<(NodeIndex, NodeId)> = self
                .sessions
                .iter()
                .filter(|(_, s)| s.state == SessionState::Closed)
                .filter_map(|(&p, s)| s.id.clone().map(|id| (p, id)))
                .collect();
            for (peer, id) in retry {
                self.connect(ctx, peer, &id);
            }
        }
        let busy = self.sessions.values().any(|s| s.state != SessionState::Closed);
        if busy || ((!self.need.is_empty() || !self.relay.is_empty()) && !self.sessions.is_empty()) {
            self.arm_sweep(ctx);
        }
    }
}
