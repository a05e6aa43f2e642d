//! DHT wire format: tag byte, varint body length, body. Every body starts
//! with the RPC id and the sender's id, public key and address.

use super::ValueRecord;
use crate::identity::NodeId;
use crate::multiformats::varint::{self, Reader};
use crate::multiformats::{FormatError, Multiaddr, Multihash};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Contact {
    pub id: NodeId,
    pub addr: Multiaddr,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MessageBody {
    Ping,
    Pong,
    FindNode { target: Vec<u8> },
    Nodes { contacts: Vec<Contact> },
    FindValue { key: Vec<u8> },
    Value { record: Option<ValueRecord>, contacts: Vec<Contact> },
    StoreValue { record: ValueRecord },
    StoreAck { stored: bool },
    AddProvider { key: Multihash },
    ProviderAck { stored: bool },
    GetProviders { key: Multihash },
    Providers { providers: Vec<Contact>, contacts: Vec<Contact> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub rpc: u64,
    pub sender: NodeId,
    pub public_key: Vec<u8>,
    pub addr: Multiaddr,
    pub body: MessageBody,
}

pub const TAG_MIN: u8 = 0x01;
pub const TAG_MAX: u8 = 0x0c;

impl MessageBody {
    pub fn tag(&self) -> u8 {
        match self {
            MessageBody::Ping => 0x01,
            MessageBody::Pong => 0x02,
            MessageBody::FindNode { .. } => 0x03,
            MessageBody::Nodes { .. } => 0x04,
            MessageBody::FindValue { .. } => 0x05,
            MessageBody::Value { .. } => 0x06,
            MessageBody::StoreValue { .. } => 0x07,
            MessageBody::StoreAck { .. } => 0x08,
            MessageBody::AddProvider { .. } => 0x09,
            MessageBody::ProviderAck { .. } => 0x0a,
            MessageBody::GetProviders { .. } => 0x0b,
            MessageBody::Providers { .. } => 0x0c,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            MessageBody::Ping => "PING",
            MessageBody::Pong => "PONG",
            MessageBody::FindNode { .. } => "FIND_NODE",
            MessageBody::Nodes { .. } => "NODES",
            MessageBody::FindValue { .. } => "FIND_VALUE",
            MessageBody::Value { .. } => "VALUE",
            MessageBody::StoreValue { .. } => "STORE_VALUE",
            MessageBody::StoreAck { .. } => "STORE_ACK",
            MessageBody::AddProvider { .. } => "ADD_PROVIDER",
            MessageBody::ProviderAck { .. } => "PROVIDER_ACK",
            MessageBody::GetProviders { .. } => "GET_PROVIDERS",
            MessageBody::Providers { .. } => "PROVIDERS",
        }
    }

    /// Requests have odd tags.
    pub fn is_request(&self) -> bool {
        self.tag() % 2 == 1
    }
}

fn write_contacts(contacts: &[Contact], out: &mut Vec<u8>) {
    varint::encode(contacts.len() as u64, out);
    for c in contacts {
        out.extend_from_slice(&c.id.to_bytes());
        varint::write_prefixed(&c.addr.to_bytes(), out);
    }
}

fn read_contacts(r: &mut Reader<'_>) -> Result<Vec<Contact>, FormatError> {
    let n = r.varint()? as usize;
    let mut out = Vec::with_capacity(n.min(64));
    for _ in 0..n {
        let id = NodeId::from_multihash(Multihash::read(r)?);
        let addr = Multiaddr::from_bytes(r.prefixed()?)?;
        out.push(Contact { id, addr });
    }
    Ok(out)
}

fn read_bool(r: &mut Reader<'_>) -> Result<bool, FormatError> {
    match r.byte()? {
        0 => Ok(false),
        1 => Ok(true),
        b => Err(FormatError::Payload(format!("bad flag byte {b}"))),
    }
}

impl Message {
    pub fn encode(&self) -> Vec<u8> {
        let mut body = Vec::new();
        varint::encode_u64(self.rpc, &mut body);
        body.extend_from_slice(&self.sender.to_bytes());
        varint::write_prefixed(&self.public_key, &mut body);
        varint::write_prefixed(&self.addr.to_bytes(), &mut body);
        match &self.body {
            MessageBody::Ping | MessageBody::Pong => {}
            MessageBody::FindNode { target } => varint::write_prefixed(target, &mut body),
            MessageBody::FindValue { key } => varint::write_prefixed(key, &mut body),
            MessageBody::Nodes { contacts } => write_contacts(contacts, &mut body),
            MessageBody::Value { record, contacts } => {
                match record {
                    Some(rec) => {
                        body.push(1);
                        body.extend_from_slice(&rec.to_bytes());
                    }
                    None => body.push(0),
                }
                write_contacts(contacts, &mut body);
            }
            MessageBody::StoreValue { record } => body.extend_from_slice(&record.to_bytes()),
            MessageBody::StoreAck { stored } | MessageBody::ProviderAck { stored } => body.push(*stored as u8),
            MessageBody::AddProvider { key } | MessageBody::GetProviders { key } => {
                body.extend_from_slice(&key.to_bytes())
            }
            MessageBody::Providers { providers, contacts } => {
                write_contacts(providers, &mut body);
                write_contacts(contacts, &mut body);
            }
        }
        let mut out = Vec::with_capacity(body.len() + 5);
        out.push(self.body.tag());
        varint::write_prefixed(&body, &mut out);
        out
    }

    pub fn decode(raw: &[u8]) -> Result<Message, FormatError> {
        let mut outer = Reader::new(raw);
        let tag = outer.byte()?;
        let body = outer.prefixed()?;
        if !outer.is_empty() {
            return Err(FormatError::Payload("trailing bytes after frame".into()));
        }
        let mut r = Reader::new(body);
        let rpc = r.varint_u64()?;
        let sender = NodeId::from_multihash(Multihash::read(&mut r)?);
        let public_key = r.prefixed()?.to_vec();
        let addr = Multiaddr::from_bytes(r.prefixed()?)?;
        let body = match tag {
            0x01 => MessageBody::Ping,
            0x02 => MessageBody::Pong,
            0x03 => MessageBody::FindNode { target: r.prefixed()?.to_vec() },
            0x04 => MessageBody::Nodes { contacts: read_contacts(&mut r)? },
            0x05 => MessageBody::FindValue { key: r.prefixed()?.to_vec() },
            0x06 => {
                let record = if read_bool(&mut r)? { Some(ValueRecord::read(&mut r)?) } else { None };
                MessageBody::Value { record, contacts: read_contacts(&mut r)? }
            }
            0x07 => MessageBody::StoreValue { record: ValueRecord::read(&mut r)? },
            0x08 => MessageBody::StoreAck { stored: read_bool(&mut r)? },
            0x09 => MessageBody::AddProvider { key: Multihash::read(&mut r)? },
            0x0a => MessageBody::ProviderAck { stored: read_bool(&mut r)? },
            0x0b => MessageBody::GetProviders { key: Multihash::read(&mut r)? },
            0x0c => MessageBody::Providers { providers: read_contacts(&mut r)?, contacts: read_contacts(&mut r)? },
            t => return Err(FormatError::Payload(format!("unknown routing tag {t:#04x}"))),
        };
        if !r.is_empty() {
            return Err(FormatError::Payload("trailing bytes in message body".into()));
        }
        Ok(Message { rpc, sender, public_key, addr, body })
    }
}
