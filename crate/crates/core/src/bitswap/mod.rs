//! Block exchange: per-peer ledgers, the debt-ratio sending strategy, want
//! lists, verified block transfer and the session lifecycle.

mod engine;
mod message;

pub use engine::{BitswapConfig, Engine, SessionState, SessionStats, BITSWAP_TIMER};
pub use message::{BsMessage, WantEntry, WireLedger};

use crate::identity::NodeId;
use crate::netsim::SimTime;

/// One side's accounting of the bytes exchanged with a partner.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ledger {
    pub owner: NodeId,
    pub partner: NodeId,
    pub bytes_sent: u64,
    pub bytes_recv: u64,
    pub timestamp: SimTime,
}

impl Ledger {
    pub fn zero(owner: NodeId, partner: NodeId, now: SimTime) -> Self {
        Ledger { owner, partner, bytes_sent: 0, bytes_recv: 0, timestamp: now }
    }

    pub fn debt_ratio(&self) -> f64 {
        debt_ratio(self.bytes_sent, self.bytes_recv)
    }

    /// Mirror equality: my sent is your received and the other way round.
    pub fn mirrors(&self, theirs: &WireLedger) -> bool {
        self.bytes_sent == theirs.bytes_recv && self.bytes_recv == theirs.bytes_sent
    }
}

pub fn debt_ratio(bytes_sent: u64, bytes_recv: u64) -> f64 {
    bytes_sent as f64 / (bytes_recv as f64 + 1.0)
}

/// P(send | r) = 1 − 1/(1 + exp(6 − 3r)).
pub fn send_probability(r: f64) -> f64 {
    1.0 - 1.0 / (1.0 + (6.0 - 3.0 * r).exp())
}

/// Decides how likely a node is to serve a partner given their ledger.
pub trait Strategy: Send {
    fn send_probability(&self, ledger: &Ledger) -> f64;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Sigmoid;

impl Strategy for Sigmoid {
    fn send_probability(&self, ledger: &Ledger) -> f64 {
        send_probability(ledger.debt_ratio())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn debt_ratio_examples() {
        assert_eq!(debt_ratio(0, 0), 0.0);
        assert_eq!(debt_ratio(100, 99), 1.0);
        assert_eq!(debt_ratio(200, 49), 4.0);
    }

    #[test]
    fn sigmoid_shape() {
        assert_eq!(send_probability(2.0), 0.5);
        let mut prev = send_probability(0.0);
        for i in 1..=400 {
            let r = i as f64 / 100.0;
            let p = send_probability(r);
            assert!(p < prev);
            assert!((p + send_probability(4.0 - r) - 1.0).abs() < 1e-12);
            prev = p;
        }
        assert!(send_probability(10.0) < 1e-10);
    }
}
