//! Flattened trees, commit diffs and history walks.

use std::collections::{BTreeMap, HashSet, VecDeque};

use super::{fetch_node, Commit, Entry, FileError, FileNode, Kind};
use crate::merkledag::{DagLink, Fetch};
use crate::multiformats::Multihash;

/// Lists every object reachable from the tree at `root` under its slash path,
/// in depth-first order. Named list entries are descended into; the unnamed
/// chunks of a file are not.
pub fn flatten_tree<F: Fetch + ?Sized>(fetch: &mut F, root: &Multihash) -> Result<FileNode, FileError> {
    let top = match fetch_node(fetch, root)? {
        FileNode::Tree(entries) => entries,
        other => return Err(FileError::Kind { expected: "tree", found: other.kind().to_string() }),
    };
    let mut rows = Vec::new();
    let mut stack: Vec<(String, Entry)> = top.into_iter().rev().map(|e| (String::new(), e)).collect();
    while let Some((prefix, entry)) = stack.pop() {
        let path = if prefix.is_empty() { entry.link.name.clone() } else { format!("{prefix}/{}", entry.link.name) };
        let children = match entry.kind {
            Kind::Tree => match fetch_node(fetch, &entry.link.hash)? {
                FileNode::Tree(children) => children,
                other => return Err(FileError::Kind { expected: "tree", found: other.kind().to_string() }),
            },
            Kind::List => match fetch_node(fetch, &entry.link.hash)? {
                FileNode::List(children) => children.into_iter().filter(|c| !c.link.name.is_empty()).collect(),
                other => return Err(FileError::Kind { expected: "list", found: other.kind().to_string() }),
            },
            _ => Vec::new(),
        };
        stack.extend(children.into_iter().rev().map(|c| (path.clone(), c)));
        rows.push(Entry { kind: entry.kind, link: DagLink::new(path, entry.link.hash, entry.link.size) });
    }
    Ok(FileNode::Flat(rows))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Change {
    Added,
    Removed,
    Modified,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiffRow {
    pub path: String,
    pub change: Change,
    pub old: Option<Multihash>,
    pub new: Option<Multihash>,
}

fn fetch_commit<F: Fetch + ?Sized>(fetch: &mut F, key: &Multihash) -> Result<Commit, FileError> {
    match fetch_node(fetch, key)? {
        FileNode::Commit(c) => Ok(c),
        other => Err(FileError::Kind { expected: "commit", found: other.kind().to_string() }),
    }
}

/// Differences between the snapshots of two commits. Subtrees with equal keys
/// are skipped without being fetched.
pub fn diff_commits<F: Fetch + ?Sized>(fetch: &mut F, a: &Multihash, b: &Multihash) -> Result<Vec<DiffRow>, FileError> {
    if a == b {
        return Ok(Vec::new());
    }
    let old = fetch_commit(fetch, a)?;
    let new = fetch_commit(fetch, b)?;
    let mut rows = Vec::new();
    if old.object.hash == new.object.hash {
        return Ok(rows);
    }
    if old.target == Kind::Tree && new.target == Kind::Tree {
        diff_trees(fetch, String::new(), &old.object.hash, &new.object.hash, &mut rows)?;
    } else {
        rows.push(DiffRow {
            path: String::new(),
            change: Change::Modified,
            old: Some(old.object.hash),
            new: Some(new.object.hash),
        });
    }
    rows.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(rows)
}

fn tree_entries<F: Fetch + ?Sized>(fetch: &mut F, key: &Multihash) -> Result<BTreeMap<String, Entry>, FileError> {
    match fetch_node(fetch, key)? {
        FileNode::Tree(entries) => Ok(entries.into_iter().map(|e| (e.link.name.clone(), e)).collect()),
        other => Err(FileError::Kind { expected: "tree", found: other.kind().to_string() }),
    }
}

fn diff_trees<F: Fetch + ?Sized>(
    fetch: &mut F,
    prefix: String,
    old: &Multihash,
    new: &Multihash,
    rows: &mut Vec<DiffRow>,
) -> Result<(), FileError> {
    let join = |name: &str| if prefix.is_empty() { name.to_string() } else { format!("{prefix}/{name}") };
    let mut before = tree_entries(fetch, old)?;
    let after = tree_entries(fetch, new)?;
    for (name, entry) in after {
        let path = join(&name);
        match before.remove(&name) {
            None => rows.push(DiffRow { path, change: Change::Added, old: None, new: Some(entry.link.hash) }),
            Some(prev) if prev.link.hash == entry.link.hash => {}
            Some(prev) if prev.kind == Kind::Tree && entry.kind == Kind::Tree => {
                diff_trees(fetch, path, &prev.link.hash, &entry.link.hash, rows)?;
            }
            Some(prev) => rows.push(DiffRow {
                path,
                change: Change::Modified,
                old: Some(prev.link.hash),
                new: Some(entry.link.hash),
            }),
        }
    }
    for (name, prev) in before {
        rows.push(DiffRow { path: join(&name), change: Change::Removed, old: Some(prev.link.hash), new: None });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LogEntry {
    Commit { key: Multihash, commit: Commit },
    /// A parent that could not be fetched; history beyond it is cut off.
    Missing(Multihash),
}

/// Ancestors of `head`, breadth first, each listed once, newest first.
pub fn log<F: Fetch + ?Sized>(fetch: &mut F, head: &Multihash) -> Result<Vec<LogEntry>, FileError> {
    let first = fetch_commit(fetch, head)?;
    let mut out = Vec::new();
    let mut seen = HashSet::from([head.clone()]);
    let mut queue = VecDeque::from([(head.clone(), first)]);
    while let Some((key, commit)) = queue.pop_front() {
        let parents = commit.parents.clone();
        out.push(LogEntry::Commit { key, commit });
        for parent in parents {
            if !seen.insert(parent.hash.clone()) {
                continue;
            }
            match fetch_commit(fetch, &parent.hash) {
                Ok(c) => queue.push_back((parent.hash, c)),
                Err(FileError::Fetch { .. }) => out.push(LogEntry::Missing(parent.hash)),
                Err(e) => return Err(e),
            }
        }
    }
    Ok(out)
}
