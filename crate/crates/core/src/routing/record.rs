use sha2::{Digest, Sha256};

use super::RoutingError;
use crate::identity::{verify_sig, NodeId, NodeIdentity, Signature};
use crate::multiformats::varint::{self, Reader};
use crate::multiformats::{FormatError, Multiaddr, Multihash};
use crate::netsim::SimTime;

pub const MAX_VALUE_SIZE: usize = 1024;
pub const MAX_KEY_SIZE: usize = 256;

/// XOR-space position of a value key: the digest when the key is a
/// multihash, otherwise the raw bytes zero padded or truncated.
pub fn value_xor_key(key: &[u8]) -> [u8; 32] {
    if let Ok(mh) = Multihash::from_bytes(key) {
        return mh.xor_key();
    }
    let mut out = [0u8; 32];
    let n = key.len().min(32);
    out[..n].copy_from_slice(&key[..n]);
    out
}

/// A signed small value. The publisher's public key travels with the record
/// so any node can check it without a separate key lookup.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValueRecord {
    pub key: Vec<u8>,
    pub value: Vec<u8>,
    pub publisher: NodeId,
    pub public_key: Vec<u8>,
    pub sequence: u64,
    pub signature: Signature,
}

fn signing_payload(key: &[u8], value: &[u8], sequence: u64) -> Vec<u8> {
    let mut out = Vec::with_capacity(key.len() + value.len() + 16);
    varint::write_prefixed(key, &mut out);
    varint::write_prefixed(value, &mut out);
    varint::encode_u64(sequence, &mut out);
    out
}

pub(crate) fn check_sizes(key: &[u8], value: &[u8]) -> Result<(), RoutingError> {
    if key.len() > MAX_KEY_SIZE {
        return Err(RoutingError::KeyTooLarge { size: key.len(), max: MAX_KEY_SIZE });
    }
    if value.len() > MAX_VALUE_SIZE {
        return Err(RoutingError::ValueTooLarge { size: value.len(), max: MAX_VALUE_SIZE });
    }
    Ok(())
}

impl ValueRecord {
    pub fn new(key: &[u8], value: &[u8], sequence: u64, identity: &NodeIdentity) -> Result<Self, RoutingError> {
        check_sizes(key, value)?;
        let signature = identity.sign(&signing_payload(key, value, sequence));
        Ok(ValueRecord {
            key: key.to_vec(),
            value: value.to_vec(),
            publisher: identity.node_id().clone(),
            public_key: identity.public_key().to_vec(),
            sequence,
            signature,
        })
    }

    /// Keys that decode as a multihash name a node's own name space, so
    /// only that node may write them.
    pub fn verify(&self) -> bool {
        let owner_ok = Multihash::from_bytes(&self.key).map_or(true, |_| self.key == self.publisher.to_bytes());
        owner_ok
            && check_sizes(&self.key, &self.value).is_ok()
            && self.signature.signer == self.publisher
            && verify_sig(&self.public_key, &signing_payload(&self.key, &self.value, self.sequence), &self.signature)
                .unwrap_or(false)
    }

    /// Highest sequence wins; ties go to the larger hash of the value bytes.
    pub fn supersedes(&self, other: &ValueRecord) -> bool {
        let rank = |r: &ValueRecord| (r.sequence, <[u8; 32]>::from(Sha256::digest(&r.value)));
        rank(self) > rank(other)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        varint::write_prefixed(&self.key, &mut out);
        varint::write_prefixed(&self.value, &mut out);
        out.extend_from_slice(&self.publisher.to_bytes());
        varint::write_prefixed(&self.public_key, &mut out);
        varint::encode_u64(self.sequence, &mut out);
        out.extend_from_slice(&self.signature.to_bytes());
        out
    }

    pub fn read(reader: &mut Reader<'_>) -> Result<Self, FormatError> {
        let key = reader.prefixed()?.to_vec();
        let value = reader.prefixed()?.to_vec();
        let publisher = NodeId::from_multihash(Multihash::read(reader)?);
        let public_key = reader.prefixed()?.to_vec();
        let sequence = reader.varint_u64()?;
        let signature = Signature::read(reader)?;
        Ok(ValueRecord { key, value, publisher, public_key, sequence, signature })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProviderRecord {
    pub key: Multihash,
    pub provider: NodeId,
    pub addr: Multiaddr,
    pub expiry: SimTime,
}
