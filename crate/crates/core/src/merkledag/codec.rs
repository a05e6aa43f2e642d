use crate::multiformats::varint::{self, Reader};
use crate::multiformats::Multihash;

use super::DagError;

/// A named, sized, hashed edge to another object.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DagLink {
    pub name: String,
    pub hash: Multihash,
    /// Cumulative byte size of the target's subgraph.
    pub size: u64,
}

impl DagLink {
    pub fn new(name: impl Into<String>, hash: Multihash, size: u64) -> Self {
        DagLink { name: name.into(), hash, size }
    }

    pub fn unnamed(hash: Multihash, size: u64) -> Self {
        DagLink { name: String::new(), hash, size }
    }
}

/// The universal content-addressed object: opaque data plus an ordered link table.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct DagObject {
    pub links: Vec<DagLink>,
    pub data: Vec<u8>,
}

impl DagObject {
    pub fn new(links: Vec<DagLink>, data: Vec<u8>) -> Self {
        DagObject { links, data }
    }

    pub fn leaf(data: impl Into<Vec<u8>>) -> Self {
        DagObject { links: Vec::new(), data: data.into() }
    }

    /// Canonical bytes:
    /// `varint(link_count) { varint(name_len) name varint(hash_len) hash varint(size) } varint(data_len) data`.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.data.len() + self.links.len() * 48 + 8);
        varint::encode(self.links.len() as u64, &mut out);
        for link in &self.links {
            varint::write_prefixed(link.name.as_bytes(), &mut out);
            varint::write_prefixed(&link.hash.to_bytes(), &mut out);
            varint::encode(link.size, &mut out);
        }
        varint::write_prefixed(&self.data, &mut out);
        out
    }

    pub fn decode(raw: &[u8]) -> Result<Self, DagError> {
        let mut r = Reader::new(raw);
        let at = |r: &Reader<'_>, e: crate::multiformats::FormatError| DagError::Decode {
            offset: r.position(),
            reason: e.to_string(),
        };
        let count = r.varint().map_err(|e| at(&r, e))?;
        let mut links = Vec::with_capacity(count.min(1024) as usize);
        for _ in 0..count {
            let name_start = r.position();
            let name = r.prefixed().map_err(|e| at(&r, e))?;
            let name = std::str::from_utf8(name)
                .map_err(|_| DagError::Decode { offset: name_start, reason: "link name is not UTF-8".into() })?
                .to_string();
            let hash_start = r.position();
            let hash_bytes = r.prefixed().map_err(|e| at(&r, e))?;
            let hash = Multihash::from_bytes(hash_bytes)
                .map_err(|e| DagError::Decode { offset: hash_start, reason: e.to_string() })?;
            let size = r.varint().map_err(|e| at(&r, e))?;
            links.push(DagLink { name, hash, size });
        }
        let data = r.prefixed().map_err(|e| at(&r, e))?.to_vec();
        if !r.is_empty() {
            return Err(DagError::Decode { offset: r.position(), reason: "trailing bytes".into() });
        }
        Ok(DagObject { links, data })
    }

    pub fn key(&self) -> Multihash {
        Multihash::sha256(&self.encode())
    }

    pub fn encoded_len(&self) -> u64 {
        self.encode().len() as u64
    }

    /// First link whose name equals `name` byte for byte.
    pub fn link(&self, name: &str) -> Option<&DagLink> {
        self.links.iter().find(|l| l.name == name)
    }

    /// Size this object contributes when linked: its own bytes plus its links' sizes.
    pub fn cumulative_size(&self) -> u64 {
        self.encoded_len() + self.links.iter().map(|l| l.size).sum::<u64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_two_bytes() {
        let obj = DagObject::default();
        assert_eq!(obj.encode(), vec![0x00, 0x00]);
        assert_eq!(obj.key(), DagObject::default().key());
    }

    #[test]
    fn one_link_layout_by_hand() {
        let target = Multihash::sha256(b"child");
        let obj = DagObject::new(vec![DagLink::new("bar", target.clone(), 300)], b"hi".to_vec());
        let mut expected = vec![0x01, 0x03, b'b', b'a', b'r', 34, 0x12, 0x20];
        expected.extend_from_slice(target.digest());
        expected.extend_from_slice(&[0xac, 0x02, 0x02, b'h', b'i']);
        assert_eq!(obj.encode(), expected);
        assert_eq!(DagObject::decode(&expected).unwrap(), obj);
    }

    #[test]
    fn link_order_is_semantic() {
        let a = DagLink::new("a", Multihash::sha256(b"a"), 1);
        let b = DagLink::new("b", Multihash::sha256(b"b"), 1);
        let x = DagObject::new(vec![a.clone(), b.clone()], vec![]);
        let y = DagObject::new(vec![b, a], vec![]);
        assert_ne!(x.key(), y.key());
    }

    #[test]
    fn decode_errors_carry_offsets() {
        match DagObject::decode(&[0x01, 0x05, b'a']) {
            Err(DagError::Decode { offset, .. }) => assert_eq!(offset, 2),
            other => panic!("{other:?}"),
        }
        match DagObject::decode(&[0x00, 0x00, 0xff]) {
            Err(DagError::Decode { offset, .. }) => assert_eq!(offset, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn first_matching_link_wins() {
        let first = Multihash::sha256(b"1");
        let obj = DagObject::new(
            vec![DagLink::new("x", first.clone(), 0), DagLink::new("x", Multihash::sha256(b"2"), 0)],
            vec![],
        );
        assert_eq!(obj.link("x").unwrap().hash, first);
    }
}
