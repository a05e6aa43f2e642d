//! Deterministic in-process network. Virtual time, one seeded RNG, a
//! time-ordered event queue with sequence-number tie breaking, and per-link
//! latency, drop rate and serialization delay. This is the only place that
//! owns time; protocol code reads the clock through [`Ctx`].

mod scenario;
mod time;

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};
use std::ops::Range;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

pub use scenario::{parse_duration, LatencySpec, Scenario};
pub use time::SimTime;

use crate::identity::{generate_identity, IdentityError, NodeIdentity};

pub type NodeIndex = usize;

#[derive(Debug, thiserror::Error)]
pub enum NetError {
    #[error("unknown node {0}")]
    UnknownNode(NodeIndex),
    #[error("scenario: {0}")]
    Scenario(String),
    #[error(transparent)]
    Identity(#[from] IdentityError),
}

/// A message in flight. `payload` marks the byte range a block-corrupting
/// adversary may tamper with; `query` marks frames that query-dropping
/// adversaries discard.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub kind: &'static str,
    pub bytes: Vec<u8>,
    pub query: bool,
    pub payload: Option<Range<usize>>,
}

impl Frame {
    pub fn new(kind: &'static str, bytes: Vec<u8>) -> Self {
        Frame { kind, bytes, query: false, payload: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Behavior {
    #[default]
    Honest,
    /// Discards every incoming frame.
    DropAll,
    /// Discards incoming frames marked as queries.
    DropQueries,
    /// Flips one byte in the payload of every block frame it sends.
    CorruptBlocks,
    /// Presents a zeroed ledger whenever it opens a session.
    LedgerAmnesia,
}

impl Behavior {
    pub fn parse(s: &str) -> Option<Behavior> {
        Some(match s {
            "honest" => Behavior::Honest,
            "drop_all" => Behavior::DropAll,
            "drop_queries" => Behavior::DropQueries,
            "corrupt_blocks" => Behavior::CorruptBlocks,
            "ledger_amnesia" => Behavior::LedgerAmnesia,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Behavior::Honest => "honest",
            Behavior::DropAll => "drop_all",
            Behavior::DropQueries => "drop_queries",
            Behavior::CorruptBlocks => "corrupt_blocks",
            Behavior::LedgerAmnesia => "ledger_amnesia",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdversarySpec {
    pub behavior: Behavior,
    pub fraction: f64,
}

impl AdversarySpec {
    pub fn new(behavior: Behavior, fraction: f64) -> Result<Self, NetError> {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(NetError::Scenario(format!("adversary fraction {fraction} outside [0, 1]")));
        }
        Ok(AdversarySpec { behavior, fraction })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParams {
    pub latency: LatencySpec,
    pub drop_rate: f64,
    /// Serialization rate; `None` means frames take no time to put on the wire.
    pub bytes_per_ms: Option<u64>,
}

impl Default for LinkParams {
    fn default() -> Self {
        LinkParams { latency: LatencySpec::Fixed(Duration::from_millis(10)), drop_rate: 0.0, bytes_per_ms: None }
    }
}

/// Handle passed to node callbacks: the clock, the RNG, and the outbox.
pub struct Ctx<'a> {
    now: SimTime,
    me: NodeIndex,
    behavior: Behavior,
    rng: &'a mut ChaCha20Rng,
    actions: &'a mut Vec<Action>,
}

enum Action {
    Send(NodeIndex, Frame),
    Timer(Duration, u64),
}

impl Ctx<'_> {
    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn me(&self) -> NodeIndex {
        self.me
    }

    pub fn behavior(&self) -> Behavior {
        self.behavior
    }

    pub fn rng(&mut self) -> &mut ChaCha20Rng {
        self.rng
    }

    pub fn send(&mut self, to: NodeIndex, frame: Frame) {
        self.actions.push(Action::Send(to, frame));
    }

    pub fn set_timer(&mut self, delay: Duration, token: u64) {
        self.actions.push(Action::Timer(delay, token));
    }
}

/// Node logic driven by the simulator. Callbacks must not block.
pub trait SimNode {
    fn on_start(&mut self, _ctx: &mut Ctx<'_>, _bootstrap: &[NodeIndex]) {}
    fn on_frame(&mut self, ctx: &mut Ctx<'_>, from: NodeIndex, frame: Frame);
    fn on_timer(&mut self, ctx: &mut Ctx<'_>, token: u64);
}

enum Event {
    Deliver { from: NodeIndex, to: NodeIndex, frame: Frame },
    Timer { node: NodeIndex, token: u64 },
    Start { node: NodeIndex, bootstrap: Vec<NodeIndex> },
}

struct Queued {
    at: SimTime,
    seq: u64,
    event: Event,
}

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        (self.at, self.seq) == (other.at, other.seq)
    }
}
impl Eq for Queued {}
impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Queued {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.at, self.seq).cmp(&(other.at, other.seq))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NetStats {
    pub sent: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub corrupted: u64,
    pub bytes_delivered: u64,
    pub by_kind: BTreeMap<&'static str, u64>,
}

/// Event trace: `time TAB from TAB to TAB frame-type TAB size` per delivered
/// or dropped frame. The digest is always maintained; lines only on request.
pub struct Trace {
    hasher: Sha256,
    lines: Option<Vec<String>>,
}

impl Trace {
    fn record(&mut self, at: SimTime, from: NodeIndex, to: NodeIndex, kind: &str, size: usize, dropped: bool) {
        let kind = if dropped { format!("{kind}!dropped") } else { kind.to_string() };
        let line = format!("{at}\t{from}\t{to}\t{kind}\t{size}");
        self.hasher.update(line.as_bytes());
        self.hasher.update(b"\n");
        if let Some(lines) = &mut self.lines {
            lines.push(line);
        }
    }
}

pub enum Until {
    Time(SimTime),
    Quiescent,
}

pub struct SimNet<N> {
    now: SimTime,
    seq: u64,
    rng: ChaCha20Rng,
    nodes: Vec<N>,
    behaviors: Vec<Behavior>,
    queue: BinaryHeap<Reverse<Queued>>,
    default_link: LinkParams,
    links: BTreeMap<(NodeIndex, NodeIndex), LinkParams>,
    wire_free_at: BTreeMap<(NodeIndex, NodeIndex), SimTime>,
    last_arrival: BTreeMap<(NodeIndex, NodeIndex), SimTime>,
    trace: Trace,
    stats: NetStats,
    /// Timers due after the horizon are discarded.
    horizon: Option<SimTime>,
}

impl<N: SimNode> SimNet<N> {
    pub fn new(seed: u64) -> Self {
        SimNet {
            now: SimTime::ZERO,
            seq: 0,
            rng: ChaCha20Rng::seed_from_u64(seed),
            nodes: Vec::new(),
            behaviors: Vec::new(),
            queue: BinaryHeap::new(),
            default_link: LinkParams::default(),
            links: BTreeMap::new(),
            wire_free_at: BTreeMap::new(),
            last_arrival: BTreeMap::new(),
            trace: Trace { hasher: Sha256::new(), lines: None },
            stats: NetStats::default(),
            horizon: None,
        }
    }

    pub fn set_default_link(&mut self, params: LinkParams) {
        self.default_link = params;
    }

    /// Overrides the parameters of the directed link `from → to`.
    pub fn set_link(&mut self, from: NodeIndex, to: NodeIndex, params: LinkParams) {
        self.links.insert((from, to), params);
    }

    pub fn set_horizon(&mut self, horizon: Option<SimTime>) {
        self.horizon = horizon;
    }

    pub fn horizon(&self) -> Option<SimTime> {
        self.horizon
    }

    pub fn record_trace(&mut self) {
        self.trace.lines.get_or_insert_with(Vec::new);
    }

    pub fn trace_lines(&self) -> &[String] {
        self.trace.lines.as_deref().unwrap_or(&[])
    }

    pub fn trace_digest(&self) -> [u8; 32] {
        self.trace.hasher.clone().finalize().into()
    }

    pub fn stats(&self) -> &NetStats {
        &self.stats
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn rng(&mut self) -> &mut ChaCha20Rng {
        &mut self.rng
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, idx: NodeIndex) -> &N {
        &self.nodes[idx]
    }

    pub fn node_mut(&mut self, idx: NodeIndex) -> &mut N {
        &mut self.nodes[idx]
    }

    pub fn nodes(&self) -> &[N] {
        &self.nodes
    }

    pub fn behavior(&self, idx: NodeIndex) -> Behavior {
        self.behaviors[idx]
    }

    pub fn pending_events(&self) -> usize {
        self.queue.len()
    }

    pub fn add_node(&mut self, node: N, behavior: Behavior) -> NodeIndex {
        self.nodes.push(node);
        self.behaviors.push(behavior);
        self.nodes.len() - 1
    }

    /// Schedules `on_start` for `node` at the current time.
    pub fn start(&mut self, node: NodeIndex, bootstrap: Vec<NodeIndex>) {
        self.push(self.now, Event::Start { node, bootstrap });
    }

    /// Runs `f` against a node with a live context, as if from inside a callback.
    pub fn with_node<R>(&mut self, idx: NodeIndex, f: impl FnOnce(&mut N, &mut Ctx<'_>) -> R) -> Result<R, NetError> {
        if idx >= self.nodes.len() {
            return Err(NetError::UnknownNode(idx));
        }
        let mut actions = Vec::new();
        let result = {
            let mut ctx =
                Ctx { now: self.now, me: idx, behavior: self.behaviors[idx], rng: &mut self.rng, actions: &mut actions };
            f(&mut self.nodes[idx], &mut ctx)
        };
        self.apply(idx, actions);
        Ok(result)
    }

    /// Injects a frame from `from` to `to` as if `from` had sent it.
    pub fn send(&mut self, from: NodeIndex, to: NodeIndex, frame: Frame) -> Result<(), NetError> {
        if from >= self.nodes.len() {
            return Err(NetError::UnknownNode(from));
        }
        if to >= self.nodes.len() {
            return Err(NetError::UnknownNode(to));
        }
        self.transmit(from, to, frame);
        Ok(())
    }

    fn push(&mut self, at: SimTime, event: Event) {
        self.seq += 1;
        self.queue.push(Reverse(Queued { at, seq: self.seq, event }));
    }

    fn apply(&mut self, from: NodeIndex, actions: Vec<Action>) {
        for action in actions {
            match action {
                Action::Send(to, frame) => {
                    if to < self.nodes.len() {
                        self.transmit(from, to, frame);
                    }
                }
                Action::Timer(delay, token) => {
                    let at = self.now + delay;
                    if self.horizon.is_none_or(|h| at <= h) {
                        self.push(at, Event::Timer { node: from, token });
                    }
                }
            }
        }
    }

    fn transmit(&mut self, from: NodeIndex, to: NodeIndex, mut frame: Frame) {
        self.stats.sent += 1;
        let params = self.links.get(&(from, to)).copied().unwrap_or(self.default_link);
        if self.behaviors[from] == Behavior::CorruptBlocks {
            if let Some(range) = frame.payload.clone().filter(|r| !r.is_empty()) {
                let i = self.rng.gen_range(range);
                frame.bytes[i] ^= 1 << self.rng.gen_range(0..8);
                self.stats.corrupted += 1;
            }
        }
        // the draw happens for every frame so the rng stream does not depend on rates
        let drop_draw: f64 = self.rng.gen();
        let latency = params.latency.sample(&mut self.rng);
        let link = (from, to);
        let wire_start = self.now.max(self.wire_free_at.get(&link).copied().unwrap_or(SimTime::ZERO));
        let serialization = params
            .bytes_per_ms
            .filter(|&r| r > 0)
            .map_or(Duration::ZERO, |r| Duration::from_micros(frame.bytes.len() as u64 * 1000 / r));
        let wire_done = wire_start + serialization;
        self.wire_free_at.insert(link, wire_done);
        let arrival = (wire_done + latency).max(self.last_arrival.get(&link).copied().unwrap_or(SimTime::ZERO));
        self.last_arrival.insert(link, arrival);

        let receiver = self.behaviors[to];
        let dropped = drop_draw < params.drop_rate
            || receiver == Behavior::DropAll
            || (receiver == Behavior::DropQueries && frame.query);
        if dropped {
            self.stats.dropped += 1;
            self.trace.record(self.now, from, to, frame.kind, frame.bytes.len(), true);
            return;
        }
        self.push(arrival, Event::Deliver { from, to, frame });
    }

    /// Processes one event. Returns false when the queue is empty.
    pub fn step(&mut self) -> bool {
        let Some(Reverse(q)) = self.queue.pop() else {
            return false;
        };
        self.now = q.at;
        let mut actions = Vec::new();
        let node = match q.event {
            Event::Deliver { from, to, frame } => {
                self.stats.delivered += 1;
                self.stats.bytes_delivered += frame.bytes.len() as u64;
                *self.stats.by_kind.entry(frame.kind).or_default() += 1;
                self.trace.record(self.now, from, to, frame.kind, frame.bytes.len(), false);
                let mut ctx =
                    Ctx { now: self.now, me: to, behavior: self.behaviors[to], rng: &mut self.rng, actions: &mut actions };
                self.nodes[to].on_frame(&mut ctx, from, frame);
                to
            }
            Event::Timer { node, token } => {
                let mut ctx =
                    Ctx { now: self.now, me: node, behavior: self.behaviors[node], rng: &mut self.rng, actions: &mut actions };
                self.nodes[node].on_timer(&mut ctx, token);
                node
            }
            Event::Start { node, bootstrap } => {
                let mut ctx =
                    Ctx { now: self.now, me: node, behavior: self.behaviors[node], rng: &mut self.rng, actions: &mut actions };
                self.nodes[node].on_start(&mut ctx, &bootstrap);
                node
            }
        };
        self.apply(node, actions);
        true
    }

    pub fn run_until(&mut self, until: Until) -> usize {
        let mut processed = 0;
        loop {
            if let Until::Time(t) = until {
                match self.queue.peek() {
                    Some(Reverse(q)) if q.at <= t => {}
                    _ => {
                        self.now = self.now.max(t);
                        return processed;
                    }
                }
            }
            if !self.step() {
                return processed;
            }
            processed += 1;
        }
    }

    /// Steps until `done` holds or the queue drains. Returns whether `done` held.
    pub fn run_while_not(&mut self, mut done: impl FnMut(&Self) -> bool) -> bool {
        loop {
            if done(self) {
                return true;
            }
            if !self.step() {
                return done(self);
            }
        }
    }
}

/// Creates `count` nodes with seeded identities, marks a `fraction` of them
/// adversarial, and bootstraps each node against up to `bootstrap` randomly
/// chosen earlier nodes.
pub fn spawn<N: SimNode>(
    net: &mut SimNet<N>,
    count: usize,
    difficulty: u32,
    bootstrap: usize,
    adversary: Option<AdversarySpec>,
    mut make: impl FnMut(NodeIndex, NodeIdentity, Behavior) -> N,
) -> Result<Vec<NodeIndex>, NetError> {
    let first = net.len();
    let mut behaviors = vec![Behavior::Honest; count];
    if let Some(spec) = adversary {
        let bad = (spec.fraction * count as f64).round() as usize;
        let mut order: Vec<usize> = (0..count).collect();
        for i in 0..bad.min(count) {
            let j = net.rng.gen_range(i..count);
            order.swap(i, j);
            behaviors[order[i]] = spec.behavior;
        }
    }
    let mut created = Vec::with_capacity(count);
    for (i, behavior) in behaviors.into_iter().enumerate() {
        let identity = generate_identity(difficulty, &mut net.rng)?;
        let idx = net.add_node(make(first + i, identity, behavior), behavior);
        created.push(idx);
    }
    for &idx in &created {
        let mut pool: Vec<NodeIndex> = (0..idx).collect();
        let take = bootstrap.min(pool.len());
        for i in 0..take {
            let j = net.rng.gen_range(i..pool.len());
            pool.swap(i, j);
        }
        pool.truncate(take);
        net.start(idx, pool);
    }
    Ok(created)
}
