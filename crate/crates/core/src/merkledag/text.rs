//! JSON import/export: `{"data": ..., "links": [{"hash", "name", "size"}]}`.
//! Data that is valid UTF-8 is written as a string, anything else as `{"hex": ...}`.

use serde::{Deserialize, Serialize};

use super::{DagError, DagLink, DagObject};

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum TextData {
    Utf8(String),
    Hex { hex: String },
}

#[derive(Serialize, Deserialize)]
struct TextLink {
    hash: String,
    name: String,
    size: u64,
}

#[derive(Serialize, Deserialize)]
struct TextObject {
    data: TextData,
    links: Vec<TextLink>,
}

pub fn to_text(object: &DagObject) -> String {
    let data = match std::str::from_utf8(&object.data) {
        Ok(s) => TextData::Utf8(s.to_string()),
        Err(_) => TextData::Hex { hex: hex::encode(&object.data) },
    };
    let links = object
        .links
        .iter()
        .map(|l| TextLink { hash: l.hash.to_base58(), name: l.name.clone(), size: l.size })
        .collect();
    serde_json::to_string_pretty(&TextObject { data, links }).expect("plain structs serialize")
}

pub fn from_text(text: &str) -> Result<DagObject, DagError> {
    let parsed: TextObject = serde_json::from_str(text).map_err(|e| DagError::Text(e.to_string()))?;
    let data = match parsed.data {
        TextData::Utf8(s) => s.into_bytes(),
        TextData::Hex { hex } => hex::decode(hex).map_err(|e| DagError::Text(e.to_string()))?,
    };
    let links = parsed
        .links
        .into_iter()
        .map(|l| {
            let hash = l.hash.parse().map_err(|e| DagError::Text(format!("link {:?}: {e}", l.name)))?;
            Ok(DagLink { name: l.name, hash, size: l.size })
        })
        .collect::<Result<_, DagError>>()?;
    Ok(DagObject { links, data })
}
