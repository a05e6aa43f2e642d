//! Golden vectors and round-trip property suites, shared by the `goldens`
//! and `acceptance` test targets.

#![allow(dead_code)]

use std::net::{Ipv4Addr, Ipv6Addr};
use std::path::PathBuf;

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestError, TestRng, TestRunner};
use serde_json::Value;
use sha2::{Digest, Sha256};

use ipfs_core::files::{Chunker, Chunking, RabinParams};
use ipfs_core::ipns::proquint;
use ipfs_core::merkledag::{DagLink, DagObject};
use ipfs_core::multiformats::{base, varint, HashFunction, Multiaddr, Multihash, Protocol};

fn vectors(name: &str) -> Vec<Value> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("test-vectors").join(name);
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    serde_json::from_str::<Value>(&text).unwrap().as_array().unwrap().clone()
}

fn hex_field(v: &Value, key: &str) -> Vec<u8> {
    hex::decode(v[key].as_str().unwrap()).unwrap()
}

fn str_field<'a>(v: &'a Value, key: &str) -> &'a str {
    v[key].as_str().unwrap()
}

/// `sha256(seed || counter_le32)` blocks, as in `gen.py`.
pub fn stream(seed: &str, len: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(len + 32);
    let mut i = 0u32;
    while out.len() < len {
        let mut h = Sha256::new();
        h.update(seed.as_bytes());
        h.update(i.to_le_bytes());
        out.extend_from_slice(&h.finalize());
        i += 1;
    }
    out.truncate(len);
    out
}

/// Outcome per vector file: (file, vectors checked, mismatches).
pub fn check_goldens() -> Vec<(&'static str, usize, Vec<String>)> {
    let mut report = Vec::new();

    let rows = vectors("multihash.json");
    let mut bad = Vec::new();
    for v in &rows {
        let code = v["code"].as_u64().unwrap();
        let input = hex_field(v, "input");
        let expected = hex_field(v, "multihash");
        let function = HashFunction::from_code(code).unwrap();
        let mh = match Multihash::digest_of(function, &input) {
            Ok(mh) => mh,
            // decode-only functions: wrap the oracle's digest
            Err(_) => Multihash::new(function, Multihash::from_bytes(&expected).unwrap().digest().to_vec()).unwrap(),
        };
        if mh.to_bytes() != expected || mh.to_base58() != str_field(v, "base58") {
            bad.push(format!("{} of {}", str_field(v, "function"), str_field(v, "input")));
        }
        let parsed: Result<Multihash, _> = str_field(v, "base58").parse();
        if parsed.as_ref().map(|m| m.to_bytes()) != Ok(expected.clone()) || mh.verify(&input) == Ok(false) {
            bad.push(format!("parse {}", str_field(v, "base58")));
        }
    }
    report.push(("multihash", rows.len(), bad));

    let rows = vectors("multiaddr.json");
    let mut bad = Vec::new();
    for v in &rows {
        let text = str_field(v, "text");
        let expected = hex_field(v, "bytes");
        match text.parse::<Multiaddr>() {
            Ok(ma) => {
                let back = Multiaddr::from_bytes(&expected);
                if ma.to_bytes() != expected || ma.to_string() != str_field(v, "canonical") || back.as_ref() != Ok(&ma) {
                    bad.push(text.to_string());
                }
            }
            Err(e) => bad.push(format!("{text}: {e}")),
        }
    }
    report.push(("multiaddr", rows.len(), bad));

    let rows = vectors("object.json");
    let mut bad = Vec::new();
    for v in &rows {
        let links = v["links"]
            .as_array()
            .unwrap()
            .iter()
            .map(|l| {
                let hash = Multihash::from_bytes(&hex_field(l, "hash")).unwrap();
                DagLink::new(str_field(l, "name"), hash, l["size"].as_u64().unwrap())
            })
            .collect();
        let obj = DagObject::new(links, hex_field(v, "data"));
        let expected = hex_field(v, "encoded");
        if obj.encode() != expected
            || obj.key().to_base58() != str_field(v, "key")
            || DagObject::decode(&expected).ok().as_ref() != Some(&obj)
        {
            bad.push(str_field(v, "label").to_string());
        }
    }
    report.push(("canonical object", rows.len(), bad));

    let rows = vectors("base58.json");
    let mut bad = Vec::new();
    for v in &rows {
        let bytes = hex_field(v, "bytes");
        if base::display(&bytes) != str_field(v, "base58") || base::parse(str_field(v, "base58")) != Ok(bytes) {
            bad.push(str_field(v, "bytes").to_string());
        }
    }
    report.push(("base58", rows.len(), bad));

    let rows = vectors("proquint.json");
    let mut bad = Vec::new();
    for v in &rows {
        let bytes = hex_field(v, "bytes");
        let phrase = str_field(v, "proquint");
        if proquint::encode(&bytes).ok().as_deref() != Some(phrase) || proquint::decode(phrase).ok() != Some(bytes) {
            bad.push(phrase.to_string());
        }
    }
    report.push(("proquint", rows.len(), bad));

    let rows = vectors("rabin.json");
    let mut bad = Vec::new();
    let chunker = Chunker::default();
    for v in &rows {
        let seed = str_field(v, "seed");
        let len = v["length"].as_u64().unwrap() as usize;
        let data = if seed == "zeros" { vec![0; len] } else { stream(seed, len) };
        let expected: Vec<usize> =
            v["boundaries"].as_array().unwrap().iter().map(|b| b.as_u64().unwrap() as usize).collect();
        if chunker.boundaries(&data) != expected {
            bad.push(seed.to_string());
        }
    }
    report.push(("rabin boundaries", rows.len(), bad));

    report
}

fn runner(cases: u32) -> TestRunner {
    let config = Config { cases, failure_persistence: None, ..Config::default() };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn multihash_strategy() -> impl Strategy<Value = Multihash> {
    prop_oneof![
        proptest::collection::vec(any::<u8>(), 1..64).prop_map(|d| Multihash::new(HashFunction::Identity, d).unwrap()),
        proptest::collection::vec(any::<u8>(), 20).prop_map(|d| Multihash::new(HashFunction::Sha1, d).unwrap()),
        proptest::collection::vec(any::<u8>(), 32).prop_map(|d| Multihash::new(HashFunction::Sha256, d).unwrap()),
        proptest::collection::vec(any::<u8>(), 64).prop_map(|d| Multihash::new(HashFunction::Sha512, d).unwrap()),
    ]
}

fn protocol_strategy() -> impl Strategy<Value = Protocol> {
    prop_oneof![
        any::<[u8; 4]>().prop_map(|b| Protocol::Ip4(Ipv4Addr::from(b))),
        any::<[u8; 16]>().prop_map(|b| Protocol::Ip6(Ipv6Addr::from(b))),
        any::<u16>().prop_map(Protocol::Tcp),
        any::<u16>().prop_map(Protocol::Udp),
        any::<u16>().prop_map(Protocol::Sctp),
        (0..=varint::MAX_VARINT).prop_map(Protocol::Sim),
    ]
}

fn object_strategy() -> impl Strategy<Value = DagObject> {
    let link = ("[a-z0-9._-]{0,12}", multihash_strategy(), 0..=varint::MAX_VARINT)
        .prop_map(|(name, hash, size)| DagLink::new(name, hash, size));
    (proptest::collection::vec(link, 0..8), proptest::collection::vec(any::<u8>(), 0..512))
        .prop_map(|(links, data)| DagObject::new(links, data))
}

/// Data with long runs as well as noise, so both the content-defined and the
/// forced max-size cuts occur.
fn file_strategy() -> impl Strategy<Value = Vec<u8>> {
    (proptest::collection::vec((any::<u8>(), 1usize..4096, any::<bool>()), 0..48), any::<u64>()).prop_map(
        |(runs, seed)| {
            let mut out = Vec::new();
            let mut x = seed | 1;
            for (byte, len, noise) in runs {
                for _ in 0..len {
                    x ^= x << 13;
                    x ^= x >> 7;
                    x ^= x << 17;
                    out.push(if noise { x as u8 } else { byte });
                }
            }
            out
        },
    )
}

fn outcome<T: std::fmt::Debug>(r: Result<(), TestError<T>>) -> Result<(), String> {
    r.map_err(|e| match e {
        TestError::Abort(why) => format!("aborted: {why}"),
        TestError::Fail(why, value) => format!("{why} for {value:?}"),
    })
}

/// Runs each round-trip property over `cases` seeded inputs.
pub fn round_trip_suites(cases: u32) -> Vec<(&'static str, Result<(), String>)> {
    let mut out = Vec::new();

    out.push((
        "varint",
        outcome(runner(cases).run(&(0..=varint::MAX_VARINT, any::<u64>()), |(small, big)| {
            let bytes = varint::to_vec(small);
            prop_assert!(bytes.len() <= 4);
            prop_assert_eq!(varint::decode(&bytes), Ok((small, bytes.len())));
            let mut wide = Vec::new();
            varint::encode_u64(big, &mut wide);
            prop_assert_eq!(varint::decode_u64(&wide), Ok((big, wide.len())));
            Ok(())
        })),
    ));

    out.push((
        "multihash",
        outcome(runner(cases).run(&multihash_strategy(), |mh| {
            prop_assert_eq!(Multihash::from_bytes(&mh.to_bytes()), Ok(mh.clone()));
            prop_assert_eq!(mh.to_base58().parse::<Multihash>(), Ok(mh.clone()));
            Ok(())
        })),
    ));

    out.push((
        "multiaddr",
        outcome(runner(cases).run(&proptest::collection::vec(protocol_strategy(), 0..5), |components| {
            let ma = Multiaddr::new(components);
            prop_assert_eq!(Multiaddr::from_bytes(&ma.to_bytes()), Ok(ma.clone()));
            if !ma.components().is_empty() {
                prop_assert_eq!(ma.to_string().parse::<Multiaddr>(), Ok(ma.clone()));
            }
            Ok(())
        })),
    ));

    out.push((
        "canonical object",
        outcome(runner(cases).run(&object_strategy(), |obj| {
            let bytes = obj.encode();
            let back = DagObject::decode(&bytes).map_err(|e| TestCaseError::fail(e.to_string()))?;
            prop_assert_eq!(back.encode(), bytes);
            prop_assert_eq!(back, obj);
            Ok(())
        })),
    ));

    out.push((
        "base58",
        outcome(runner(cases).run(&proptest::collection::vec(any::<u8>(), 0..80), |bytes| {
            prop_assert_eq!(base::parse(&base::display(&bytes)), Ok(bytes));
            Ok(())
        })),
    ));

    out.push((
        "proquint",
        outcome(runner(cases).run(&proptest::collection::vec(any::<[u8; 2]>(), 0..20), |words| {
            let bytes: Vec<u8> = words.concat();
            let phrase = proquint::encode(&bytes).map_err(|e| TestCaseError::fail(e.to_string()))?;
            prop_assert!(proquint::looks_like(&phrase) || bytes.is_empty());
            prop_assert_eq!(proquint::decode(&phrase).ok(), Some(bytes));
            Ok(())
        })),
    ));

    let small = RabinParams { min: 512, avg: 2048, max: 8192, ..RabinParams::default() };
    let chunkers = [Chunker::default(), Chunker::rabin(small).unwrap(), Chunker::fixed(1000).unwrap()];
    out.push((
        "chunk-join",
        outcome(runner(cases).run(&file_strategy(), |data| {
            for chunker in &chunkers {
                let chunks = chunker.chunks(&data);
                prop_assert_eq!(chunks.concat(), data.clone());
                let (min, max) = match chunker {
                    Chunker::Rabin(r) => (r.params().min, r.params().max),
                    Chunker::Fixed { size } => (*size, *size),
                };
                for (i, c) in chunks.iter().enumerate() {
                    prop_assert!(c.len() <= max);
                    prop_assert!(c.len() >= min || i + 1 == chunks.len());
                }
            }
            Ok(())
        })),
    ));

    out
}
