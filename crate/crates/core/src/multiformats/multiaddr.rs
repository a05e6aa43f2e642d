use std::fmt;
use std::net::{Ipv4Addr, Ipv6Addr};
use std::str::FromStr;

use super::{varint, FormatError};

/// One address component. Order in a [`Multiaddr`] is outermost first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Protocol {
    Ip4(Ipv4Addr),
    Ip6(Ipv6Addr),
    Tcp(u16),
    Udp(u16),
    Sctp(u16),
    /// Node index on the simulated network.
    Sim(u64),
}

impl Protocol {
    pub fn code(&self) -> u64 {
        match self {
            Protocol::Ip4(_) => 4,
            Protocol::Tcp(_) => 6,
            Protocol::Ip6(_) => 41,
            Protocol::Sctp(_) => 132,
            Protocol::Udp(_) => 273,
            Protocol::Sim(_) => 0x0300,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Protocol::Ip4(_) => "ip4",
            Protocol::Ip6(_) => "ip6",
            Protocol::Tcp(_) => "tcp",
            Protocol::Udp(_) => "udp",
            Protocol::Sctp(_) => "sctp",
            Protocol::Sim(_) => "sim",
        }
    }

    fn parse_text(name: &str, value: Option<&str>) -> Result<Self, FormatError> {
        let value = || value.ok_or_else(|| FormatError::Payload(format!("{name}: missing value")));
        let port = |v: &str| {
            v.parse::<u16>().map_err(|_| FormatError::Payload(format!("{name}: bad port {v:?}")))
        };
        Ok(match name {
            "ip4" => Protocol::Ip4(
                value()?.parse().map_err(|_| FormatError::Payload(format!("ip4: {:?}", value().unwrap_or(""))))?,
            ),
            "ip6" => Protocol::Ip6(
                value()?.parse().map_err(|_| FormatError::Payload(format!("ip6: {:?}", value().unwrap_or(""))))?,
            ),
            "tcp" => Protocol::Tcp(port(value()?)?),
            "udp" => Protocol::Udp(port(value()?)?),
            "sctp" => Protocol::Sctp(port(value()?)?),
            "sim" => {
                let v = value()?;
                let id = v.parse::<u64>().map_err(|_| FormatError::Payload(format!("sim: {v:?}")))?;
                if id > varint::MAX_VARINT {
                    return Err(FormatError::Payload(format!("sim: node id {id} too large")));
                }
                Protocol::Sim(id)
            }
            other => return Err(FormatError::UnknownProtocol(other.to_string())),
        })
    }

    fn write_bytes(&self, out: &mut Vec<u8>) {
        varint::encode(self.code(), out);
        match self {
            Protocol::Ip4(ip) => out.extend_from_slice(&ip.octets()),
            Protocol::Ip6(ip) => out.extend_from_slice(&ip.octets()),
            Protocol::Tcp(p) | Protocol::Udp(p) | Protocol::Sctp(p) => out.extend_from_slice(&p.to_be_bytes()),
            Protocol::Sim(id) => varint::encode(*id, out),
        }
    }

    fn read_bytes(reader: &mut varint::Reader<'_>) -> Result<Self, FormatError> {
        let code = reader.varint()?;
        let port = |r: &mut varint::Reader<'_>| -> Result<u16, FormatError> {
            let b = r.bytes(2)?;
            Ok(u16::from_be_bytes([b[0], b[1]]))
        };
        Ok(match code {
            4 => {
                let b: [u8; 4] = reader.bytes(4)?.try_into().expect("length checked");
                Protocol::Ip4(Ipv4Addr::from(b))
            }
            41 => {
                let b: [u8; 16] = reader.bytes(16)?.try_into().expect("length checked");
                Protocol::Ip6(Ipv6Addr::from(b))
            }
            6 => Protocol::Tcp(port(reader)?),
            273 => Protocol::Udp(port(reader)?),
            132 => Protocol::Sctp(port(reader)?),
            0x0300 => Protocol::Sim(reader.varint()?),
            other => return Err(FormatError::UnknownProtocol(format!("code {other}"))),
        })
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Protocol::Ip4(ip) => write!(f, "/ip4/{ip}"),
            Protocol::Ip6(ip) => write!(f, "/ip6/{ip}"),
            Protocol::Tcp(p) => write!(f, "/tcp/{p}"),
            Protocol::Udp(p) => write!(f, "/udp/{p}"),
            Protocol::Sctp(p) => write!(f, "/sctp/{p}"),
            Protocol::Sim(id) => write!(f, "/sim/{id}"),
        }
    }
}

/// A self-describing, encapsulable network address such as
/// `/ip4/5.6.7.8/tcp/5678/ip4/1.2.3.4/sctp/1234`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Multiaddr {
    components: Vec<Protocol>,
}

impl Multiaddr {
    pub fn new(components: Vec<Protocol>) -> Self {
        Multiaddr { components }
    }

    pub fn sim(node: u64) -> Self {
        Multiaddr { components: vec![Protocol::Sim(node)] }
    }

    pub fn components(&self) -> &[Protocol] {
        &self.components
    }

    /// The simulator node index if this address is a bare `/sim/<n>`.
    pub fn sim_node(&self) -> Option<u64> {
        match self.components.as_slice() {
            [Protocol::Sim(id)] => Some(*id),
            _ => None,
        }
    }

    pub fn encapsulate(&self, inner: &Multiaddr) -> Multiaddr {
        let mut components = self.components.clone();
        components.extend(inner.components.iter().cloned());
        Multiaddr { components }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for c in &self.components {
            c.write_bytes(&mut out);
        }
        out
    }

    pub fn from_bytes(raw: &[u8]) -> Result<Self, FormatError> {
        let mut reader = varint::Reader::new(raw);
        let mut components = Vec::new();
        while !reader.is_empty() {
            components.push(Protocol::read_bytes(&mut reader)?);
        }
        Ok(Multiaddr { components })
    }
}

/// Parses the text form; a single trailing slash is tolerated.
pub fn parse(text: &str) -> Result<Multiaddr, FormatError> {
    let rest = text
        .strip_prefix('/')
        .ok_or_else(|| FormatError::Payload(format!("multiaddr must start with '/': {text:?}")))?;
    let rest = rest.strip_suffix('/').unwrap_or(rest);
    let mut components = Vec::new();
    if rest.is_empty() {
        return Ok(Multiaddr { components });
    }
    let mut parts = rest.split('/');
    while let Some(name) = parts.next() {
        components.push(Protocol::parse_text(name, parts.next())?);
    }
    Ok(Multiaddr { components })
}

impl fmt::Display for Multiaddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.components {
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl FromStr for Multiaddr {
    type Err = FormatError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}
