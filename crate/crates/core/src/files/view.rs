//! JSON view of file objects in the shape `ipfs file-cat --json` prints.

use serde_json::{json, Value};

use super::{Entry, FileNode};
use crate::merkledag::DagLink;

fn link(l: &DagLink) -> Value {
    json!({ "hash": l.hash.to_base58(), "name": l.name, "size": l.size })
}

fn kinds(entries: &[Entry]) -> Value {
    entries.iter().map(|e| Value::from(e.kind.name())).collect()
}

pub fn to_json(node: &FileNode) -> String {
    let (data, links): (Value, Vec<&DagLink>) = match node {
        FileNode::Blob(bytes) => {
            let data = match std::str::from_utf8(bytes) {
                Ok(s) => Value::from(s),
                Err(_) => json!({ "hex": hex::encode(bytes) }),
            };
            (data, Vec::new())
        }
        FileNode::List(entries) | FileNode::Tree(entries) | FileNode::Flat(entries) => {
            (kinds(entries), entries.iter().map(|e| &e.link).collect())
        }
        FileNode::Commit(c) => {
            let data = json!({ "type": c.target.name(), "date": c.date, "message": c.message });
            let links = c.parents.iter().chain(Some(&c.object)).chain(c.author.as_ref()).collect();
            (data, links)
        }
        FileNode::PeerLink(id) => (json!({ "peer": id.to_string() }), Vec::new()),
    };
    let out = json!({ "data": data, "links": links.into_iter().map(link).collect::<Vec<_>>() });
    serde_json::to_string_pretty(&out).expect("json values serialize")
}
