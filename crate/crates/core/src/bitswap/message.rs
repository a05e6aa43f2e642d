//! BitSwap frames: tag byte then fields. Integers are varints and hashes
//! are multihashes.

use std::ops::Range;

use crate::identity::NodeId;
use crate::multiformats::varint::{self, Reader};
use crate::multiformats::{FormatError, Multihash};

pub const TAG_OPEN: u8 = 0x10;
pub const TAG_WANT_LIST: u8 = 0x11;
pub const TAG_BLOCK: u8 = 0x12;
pub const TAG_BLOCK_ACK: u8 = 0x13;
pub const TAG_CLOSE: u8 = 0x14;

/// The ledger as presented in OPEN, from the sender's point of view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct WireLedger {
    pub bytes_sent: u64,
    pub bytes_recv: u64,
    pub timestamp: u64,
}

impl WireLedger {
    pub fn is_zero(&self) -> bool {
        self.bytes_sent == 0 && self.bytes_recv == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WantEntry {
    pub key: Multihash,
    pub cancel: bool,
    /// 0 for the sender's own needs, 1 for needs relayed from its peers.
    pub depth: u8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BsMessage {
    Open { id: NodeId, public_key: Vec<u8>, ledger: WireLedger },
    WantList { full: bool, entries: Vec<WantEntry> },
    Block { key: Multihash, data: Vec<u8> },
    BlockAck { key: Multihash, ok: bool },
    Close { final_: bool },
}

impl BsMessage {
    pub fn kind(&self) -> &'static str {
        match self {
            BsMessage::Open { .. } => "OPEN",
            BsMessage::WantList { .. } => "WANT_LIST",
            BsMessage::Block { .. } => "BLOCK",
            BsMessage::BlockAck { .. } => "BLOCK_ACK",
            BsMessage::Close { .. } => "CLOSE",
        }
    }

    pub fn is_bitswap(raw: &[u8]) -> bool {
        raw.first().is_some_and(|t| (TAG_OPEN..=TAG_CLOSE).contains(t))
    }

    /// Encoded bytes and, for blocks, the byte range of the block data.
    pub fn encode(&self) -> (Vec<u8>, Option<Range<usize>>) {
        let mut out = Vec::new();
        let mut payload = None;
        match self {
            BsMessage::Open { id, public_key, ledger } => {
                out.push(TAG_OPEN);
                out.extend_from_slice(&id.to_bytes());
                varint::write_prefixed(public_key, &mut out);
                varint::encode_u64(ledger.bytes_sent, &mut out);
                varint::encode_u64(ledger.bytes_recv, &mut out);
                varint::encode_u64(ledger.timestamp, &mut out);
            }
            BsMessage::WantList { full, entries } => {
                out.push(TAG_WANT_LIST);
                varint::encode(entries.len() as u64, &mut out);
                out.push(*full as u8);
                for e in entries {
                    out.push(e.cancel as u8 | (e.depth.min(1) << 1));
                    out.extend_from_slice(&e.key.to_bytes());
                }
            }
            BsMessage::Block { key, data } => {
                out.push(TAG_BLOCK);
                out.extend_from_slice(&key.to_bytes());
                varint::encode(data.len() as u64, &mut out);
                let start = out.len();
                out.extend_from_slice(data);
                payload = Some(start..out.len());
            }
            BsMessage::BlockAck { key, ok } => {
                out.push(TAG_BLOCK_ACK);
                out.extend_from_slice(&key.to_bytes());
                out.push(*ok as u8);
            }
            BsMessage::Close { final_ } => {
                out.push(TAG_CLOSE);
                out.push(*final_ as u8);
            }
        }
        (out, payload)
    }

    pub fn decode(raw: &[u8]) -> Result<BsMessage, FormatError> {
        let mut r = Reader::new(raw);
        let flag = |r: &mut Reader<'_>| match r.byte()? {
            0 => Ok(false),
            1 => Ok(true),
            b => Err(FormatError::Payload(format!("bad flag byte {b}"))),
        };
        let msg = match r.byte()? {
            TAG_OPEN => {
                let id = NodeId::from_multihash(Multihash::read(&mut r)?);
                let public_key = r.prefixed()?.to_vec();
                let ledger =
                    WireLedger { bytes_sent: r.varint_u64()?, bytes_recv: r.varint_u64()?, timestamp: r.varint_u64()? };
                BsMessage::Open { id, public_key, ledger }
            }
            TAG_WANT_LIST => {
                let n = r.varint()? as usize;
                let full = flag(&mut r)?;
                let mut entries = Vec::with_capacity(n.min(1024));
                for _ in 0..n {
                    let bits = r.byte()?;
                    if bits > 3 {
                        return Err(FormatError::Payload(format!("bad want entry flags {bits}")));
                    }
                    entries.push(WantEntry { key: Multihash::read(&mut r)?, cancel: bits & 1 == 1, depth: bits >> 1 });
                }
                BsMessage::WantList { full, entries }
            }
            TAG_BLOCK => {
                let key = Multihash::read(&mut r)?;
                let data = r.prefixed()?.to_vec();
                BsMessage::Block { key, data }
            }
            TAG_BLOCK_ACK => BsMessage::BlockAck { key: Multihash::read(&mut r)?, ok: flag(&mut r)? },
            TAG_CLOSE => BsMessage::Close { final_: flag(&mut r)? },
            t => return Err(FormatError::Payload(format!("unknown bitswap tag {t:#04x}"))),
        };
        if !r.is_empty() {
            return Err(FormatError::Payload("trailing bytes in bitswap frame".into()));
        }
        Ok(msg)
    }
}
