use std::collections::HashSet;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::*;
use crate::blockstore::MemoryStore;
use crate::merkledag::{list_links, resolve_path, split_path, StoreFetcher};

fn random(len: usize, seed: u64) -> Vec<u8> {
    let mut v = vec![0; len];
    ChaCha20Rng::seed_from_u64(seed).fill_bytes(&mut v);
    v
}

fn blob(store: &MemoryStore, data: &[u8]) -> Multihash {
    add_file(store, data, &Chunker::fixed(1 << 16).unwrap()).unwrap()
}

fn tree(store: &MemoryStore, entries: &[(&str, &Multihash)]) -> Multihash {
    let owned: Vec<_> = entries.iter().map(|(n, k)| (n.to_string(), (*k).clone())).collect();
    make_tree(store, &owned).unwrap()
}

#[test]
fn empty_file_is_one_empty_blob() {
    let store = MemoryStore::new();
    let key = add_file(&store, b"", &Chunker::default()).unwrap();
    assert_eq!(store.len(), 1);
    let mut f = StoreFetcher::new(&store);
    assert_eq!(fetch_node(&mut f, &key).unwrap(), FileNode::Blob(Vec::new()));
    assert_eq!(cat(&mut f, &key).unwrap(), b"");
}

#[test]
fn repeated_pattern_dedups_to_one_blob() {
    let store = MemoryStore::new();
    let pattern = random(4096, 1);
    let data = pattern.repeat(256);
    let key = add_file(&store, &data, &Chunker::fixed(4096).unwrap()).unwrap();
    assert_eq!(store.len(), 2);
    let mut f = StoreFetcher::new(&store);
    let FileNode::List(entries) = fetch_node(&mut f, &key).unwrap() else { panic!("expected list") };
    assert_eq!(entries.len(), 256);
    assert!(entries.iter().all(|e| e.link == entries[0].link && e.kind == Kind::Blob));
    assert_eq!(entries.iter().map(|e| e.link.size).sum::<u64>(), data.len() as u64);
    assert_eq!(cat(&mut f, &key).unwrap(), data);
}

#[test]
fn cat_round_trips_both_chunkers() {
    let store = MemoryStore::new();
    for (i, len) in [1usize, 100, 4096, 70_000, 300_000].into_iter().enumerate() {
        let data = random(len, 10 + i as u64);
        for chunker in [Chunker::fixed(1000).unwrap(), Chunker::default()] {
            let key = add_file(&store, &data, &chunker).unwrap();
            assert_eq!(cat(&mut StoreFetcher::new(&store), &key).unwrap(), data);
        }
    }
}

#[test]
fn long_files_nest_lists() {
    let store = MemoryStore::new();
    let data = random(LIST_FANOUT * 3 + 5, 4);
    let key = add_file(&store, &data, &Chunker::fixed(1).unwrap()).unwrap();
    let mut f = StoreFetcher::new(&store);
    let FileNode::List(top) = fetch_node(&mut f, &key).unwrap() else { panic!("expected list") };
    assert_eq!(top.len(), 4);
    assert!(top.iter().all(|e| e.kind == Kind::List));
    assert_eq!(cat(&mut f, &key).unwrap(), data);
}

#[test]
fn nested_list_equals_flat_list() {
    let store = MemoryStore::new();
    let parts: Vec<Multihash> = (0..4).map(|i| blob(&store, &random(10 + i, i as u64))).collect();
    let named = |ks: &[Multihash]| ks.iter().map(|k| (String::new(), k.clone())).collect::<Vec<_>>();
    let flat = make_list(&store, &named(&parts)).unwrap();
    let left = make_list(&store, &named(&parts[..2])).unwrap();
    let right = make_list(&store, &named(&parts[2..])).unwrap();
    let nested = make_list(&store, &named(&[left, right])).unwrap();
    let mut f = StoreFetcher::new(&store);
    assert_eq!(cat(&mut f, &flat).unwrap(), cat(&mut f, &nested).unwrap());
}

#[test]
fn cat_errors() {
    let store = MemoryStore::new();
    let b = blob(&store, b"x");
    let t = tree(&store, &[("x", &b)]);
    let err = cat(&mut StoreFetcher::new(&store), &t).unwrap_err();
    assert_eq!(err.class(), "KindError");

    let data = random(3000, 5);
    let key = add_file(&store, &data, &Chunker::fixed(1000).unwrap()).unwrap();
    let middle = add_file(&MemoryStore::new(), &data[1000..2000], &Chunker::fixed(1000).unwrap()).unwrap();
    store.remove(&middle).unwrap();
    match cat(&mut StoreFetcher::new(&store), &key).unwrap_err() {
        FileError::Fetch { key, gap } => {
            assert_eq!(key, middle);
            assert_eq!(gap, Some((1000, Some(2000))));
        }
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn three_entry_tree_lists_rows_in_any_insertion_order() {
    let store = MemoryStore::new();
    let less = blob(&store, b"less");
    let script = add_file(&store, &random(20_000, 6), &Chunker::fixed(8192).unwrap()).unwrap();
    let template = blob(&store, b"template");
    let a = tree(&store, &[("less", &less), ("script", &script), ("template", &template)]);
    let b = tree(&store, &[("template", &template), ("less", &less), ("script", &script)]);
    assert_eq!(a, b);
    let rows = list_links(&a, &mut StoreFetcher::new(&store)).unwrap();
    assert_eq!(rows.iter().map(|r| r.name.as_str()).collect::<Vec<_>>(), ["less", "script", "template"]);
    let json = to_json(&fetch_node(&mut StoreFetcher::new(&store), &a).unwrap());
    assert!(json.contains(r#""blob",
    "list",
    "blob""#), "{json}");
}

#[test]
fn tree_names_are_checked() {
    let store = MemoryStore::new();
    let b = blob(&store, b"b");
    for entries in [vec![("a/b", &b)], vec![("", &b)], vec![("a", &b), ("a", &b)]] {
        let owned: Vec<_> = entries.iter().map(|(n, k)| (n.to_string(), (*k).clone())).collect();
        assert_eq!(make_tree(&store, &owned).unwrap_err().class(), "NameError");
    }
}

#[test]
fn tree_link_sizes_are_subgraph_sizes() {
    let store = MemoryStore::new();
    let file = add_file(&store, &random(5000, 7), &Chunker::fixed(1000).unwrap()).unwrap();
    let inner = tree(&store, &[("f", &file)]);
    let outer = tree(&store, &[("d", &inner)]);
    let mut f = StoreFetcher::new(&store);
    let inner_obj = f.fetch(&inner).unwrap();
    let outer_obj = f.fetch(&outer).unwrap();
    assert_eq!(outer_obj.links[0].size, inner_obj.cumulative_size());
    let list = f.fetch(&file).unwrap();
    assert_eq!(inner_obj.links[0].size, list.encoded_len() + 5000);
}

#[test]
fn commit_json_layout() {
    let store = MemoryStore::new();
    let id = NodeId::from_public_key(b"author key");
    let author = make_author(&store, "alice", &id).unwrap();
    let root = tree(&store, &[("readme", &blob(&store, b"hello"))]);
    let first = make_commit(
        &store,
        CommitSpec { target: &root, parents: &[], author: Some(&author), date: "2014-09-20 12:00:00Z", message: "first" },
    )
    .unwrap();
    let key = make_commit(
        &store,
        CommitSpec {
            target: &root,
            parents: &[first],
            author: Some(&author),
            date: "2014-09-20 12:44:06Z",
            message: "This is a commit message.",
        },
    )
    .unwrap();
    let node = fetch_node(&mut StoreFetcher::new(&store), &key).unwrap();
    let v: serde_json::Value = serde_json::from_str(&to_json(&node)).unwrap();
    assert_eq!(v["data"]["type"], "tree");
    assert_eq!(v["data"]["date"], "2014-09-20 12:44:06Z");
    assert_eq!(v["data"]["message"], "This is a commit message.");
    let names: Vec<_> = v["links"].as_array().unwrap().iter().map(|l| l["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["parent", "object", "author"]);

    let bad = CommitSpec { target: &root, parents: &[], author: None, date: "2014-09-20T12:44:06", message: "" };
    assert_eq!(make_commit(&store, bad).unwrap_err().class(), "ParamError");
    let missing = Multihash::sha256(b"absent");
    let absent = CommitSpec { target: &missing, parents: &[], author: None, date: "2014-09-20 12:44:06Z", message: "" };
    assert_eq!(make_commit(&store, absent).unwrap_err().class(), "FetchError");
}

#[test]
fn dates_round_trip() {
    assert_eq!(format_date(1_411_217_046).unwrap(), "2014-09-20 12:44:06Z");
    assert_eq!(parse_date("2014-09-20 12:44:06Z").unwrap(), 1_411_217_046);
}

/// The sample graph: ttt111 holds ttt222 (with bbb111), ttt333 and bbb222;
/// ttt333 holds lll111, whose named entry is bbb222.
fn sample_graph(store: &MemoryStore) -> Multihash {
    let bbb111 = blob(store, b"blob111 data");
    let bbb222 = blob(store, b"blob222 data");
    let lll111 = make_list(store, &[("bbb222-name".into(), bbb222.clone())]).unwrap();
    let ttt222 = tree(store, &[("bbb111-name", &bbb111)]);
    let ttt333 = tree(store, &[("lll111-name", &lll111)]);
    tree(store, &[("ttt222-name", &ttt222), ("ttt333-name", &ttt333), ("bbb222-name", &bbb222)])
}

#[test]
fn flatten_nested_example() {
    let store = MemoryStore::new();
    let root = sample_graph(&store);
    let mut f = StoreFetcher::new(&store);
    let FileNode::Flat(rows) = flatten_tree(&mut f, &root).unwrap() else { panic!("expected flat") };
    let names: Vec<_> = rows.iter().map(|r| r.link.name.as_str()).collect();
    assert_eq!(
        names,
        [
            "bbb222-name",
            "ttt222-name",
            "ttt222-name/bbb111-name",
            "ttt333-name",
            "ttt333-name/lll111-name",
            "ttt333-name/lll111-name/bbb222-name",
        ]
    );
    let kinds: Vec<_> = rows.iter().map(|r| r.kind.name()).collect();
    assert_eq!(kinds, ["blob", "tree", "blob", "tree", "list", "blob"]);
    for row in &rows {
        assert_eq!(resolve_path(&root, &split_path(&row.link.name), &mut f).unwrap(), row.link.hash);
    }
    let flat = FileNode::Flat(rows);
    assert_eq!(FileNode::from_object(&flat.to_object()).unwrap(), flat);

    let empty = make_tree(&store, &[]).unwrap();
    assert_eq!(flatten_tree(&mut f, &empty).unwrap(), FileNode::Flat(Vec::new()));
}

fn commit(store: &MemoryStore, root: &Multihash, parents: &[Multihash], msg: &str) -> Multihash {
    make_commit(store, CommitSpec { target: root, parents, author: None, date: "2020-01-01 00:00:00Z", message: msg })
        .unwrap()
}

#[test]
fn diff_prunes_equal_subtrees() {
    let store = MemoryStore::new();
    let mut dirs = Vec::new();
    for d in 0..5 {
        let files: Vec<_> = (0..4).map(|i| (format!("f{i}"), blob(&store, format!("{d}/{i}").as_bytes()))).collect();
        dirs.push((format!("d{d}"), make_tree(&store, &files).unwrap()));
    }
    let root_a = make_tree(&store, &dirs).unwrap();
    let a = commit(&store, &root_a, &[], "a");

    let changed = blob(&store, b"changed");
    let mut files: Vec<_> = (0..4).map(|i| (format!("f{i}"), blob(&store, format!("2/{i}").as_bytes()))).collect();
    let old_f1 = files[1].1.clone();
    files[1].1 = changed.clone();
    let mut dirs_b = dirs.clone();
    dirs_b[2].1 = make_tree(&store, &files).unwrap();
    let b = commit(&store, &make_tree(&store, &dirs_b).unwrap(), std::slice::from_ref(&a), "b");

    let mut f = StoreFetcher::new(&store);
    assert!(diff_commits(&mut f, &a, &a).unwrap().is_empty());
    let rows = diff_commits(&mut f, &a, &b).unwrap();
    assert_eq!(rows, vec![DiffRow { path: "d2/f1".into(), change: Change::Modified, old: Some(old_f1), new: Some(changed) }]);
    // two commits, two roots, two d2 trees; no sibling directory or blob
    assert_eq!(f.fetch_count(), 6);

    let extra = blob(&store, b"new file");
    let mut dirs_c = dirs.clone();
    dirs_c.push(("zz".into(), extra.clone()));
    let c = commit(&store, &make_tree(&store, &dirs_c).unwrap(), std::slice::from_ref(&a), "c");
    assert_eq!(
        diff_commits(&mut f, &a, &c).unwrap(),
        vec![DiffRow { path: "zz".into(), change: Change::Added, old: None, new: Some(extra.clone()) }]
    );
    let removed = diff_commits(&mut f, &c, &a).unwrap();
    assert_eq!(removed[0].change, Change::Removed);
    assert_eq!(removed[0].old, Some(extra));
}

fn log_keys(entries: &[LogEntry]) -> Vec<Multihash> {
    entries
        .iter()
        .map(|e| match e {
            LogEntry::Commit { key, .. } => key.clone(),
            LogEntry::Missing(key) => key.clone(),
        })
        .collect()
}

#[test]
fn log_walks_history() {
    let store = MemoryStore::new();
    let root = make_tree(&store, &[]).unwrap();
    let first = commit(&store, &root, &[], "0");
    assert_eq!(log_keys(&log(&mut StoreFetcher::new(&store), &first).unwrap()), std::slice::from_ref(&first));

    let mut chain = vec![first.clone()];
    for i in 1..5 {
        let next = commit(&store, &root, &[chain[i - 1].clone()], &i.to_string());
        chain.push(next);
    }
    let got = log_keys(&log(&mut StoreFetcher::new(&store), &chain[4]).unwrap());
    assert_eq!(got, chain.iter().rev().cloned().collect::<Vec<_>>());

    let left = commit(&store, &root, std::slice::from_ref(&first), "left");
    let right = commit(&store, &root, std::slice::from_ref(&first), "right");
    let merge = commit(&store, &root, &[left.clone(), right.clone()], "merge");
    let got = log_keys(&log(&mut StoreFetcher::new(&store), &merge).unwrap());
    assert_eq!(got, [merge.clone(), left, right, first.clone()]);
    assert_eq!(got.iter().collect::<HashSet<_>>().len(), 4);

    store.remove(&first).unwrap();
    let entries = log(&mut StoreFetcher::new(&store), &chain[2]).unwrap();
    assert_eq!(entries.len(), 3);
    assert_eq!(entries[2], LogEntry::Missing(first));
}

#[test]
fn malformed_nodes_are_rejected() {
    let l = |n: &str| DagLink::new(n, Multihash::sha256(n.as_bytes()), 1);
    let unsorted = DagObject::new(vec![l("b"), l("a")], vec![3, 2, 1, 1]);
    assert!(FileNode::from_object(&unsorted).is_err());
    let short_kinds = DagObject::new(vec![l(""), l("")], vec![2, 1, 1]);
    assert!(FileNode::from_object(&short_kinds).is_err());
    let tree_in_list = DagObject::new(vec![l("")], vec![2, 1, 3]);
    assert!(FileNode::from_object(&tree_in_list).is_err());
    let no_object = DagObject::new(vec![l("parent")], vec![4, 3, 0, 0]);
    assert!(FileNode::from_object(&no_object).is_err());
    let blob_links = DagObject::new(vec![l("x")], vec![1]);
    assert!(FileNode::from_object(&blob_links).is_err());
    assert!(FileNode::from_object(&DagObject::leaf(vec![9])).is_err());
    let peer = FileNode::PeerLink(NodeId::from_public_key(b"k"));
    assert_eq!(FileNode::from_object(&peer.to_object()).unwrap(), peer);
}
