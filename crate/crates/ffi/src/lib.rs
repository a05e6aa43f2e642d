//! C interface to an in-memory node: add and cat files, publish and resolve
//! names, plus a few pure helpers.
//!
//! Every fallible call returns an [`IpfsStatus`]; on failure the message is
//! available from [`ipfs_last_error_message`] on the same thread. Strings
//! returned through out-pointers are owned by the caller and released with
//! [`ipfs_string_free`]; byte buffers with [`ipfs_bytes_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::time::{SystemTime, UNIX_EPOCH};

use ipfs_core::blockstore::MemoryStore;
use ipfs_core::files::{self, Chunker};
use ipfs_core::identity::NodeIdentity;
use ipfs_core::ipns::{self, proquint, NamePath, Resolver, TxtFixture, DEFAULT_DEPTH_LIMIT};
use ipfs_core::merkledag::StoreFetcher;
use ipfs_core::multiformats::Multihash;
use ipfs_core::netsim::SimTime;
use ipfs_core::routing::MemoryRouting;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IpfsStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    /// Malformed hash, path or encoding.
    InvalidInput = 3,
    /// Block, path or name could not be found.
    NotFound = 4,
    /// Signature or name record failed verification.
    Auth = 5,
    Store = 6,
    Internal = 7,
}

/// Length of a sha2-256 multihash in bytes.
pub const IPFS_MULTIHASH_SHA256_LEN: usize = 34;

/// A node with its own identity, block store and name records, all in memory.
pub struct IpfsNode {
    identity: NodeIdentity,
    store: MemoryStore,
    routing: MemoryRouting,
    chunker: Chunker,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_for(class: &str) -> IpfsStatus {
    match class {
        "FetchError" | "KeyNotFound" | "PathNotFound" | "NameNotFound" => IpfsStatus::NotFound,
        "NameAuthError" | "SignatureError" => IpfsStatus::Auth,
        "StoreError" | "IntegrityError" | "BlockTooLarge" => IpfsStatus::Store,
        "InternalError" => IpfsStatus::Internal,
        _ => IpfsStatus::InvalidInput,
    }
}

struct Failure(IpfsStatus, String);

macro_rules! fail_from {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                Failure(status_for(e.class()), format!("{}: {e}", e.class()))
            }
        }
    )*};
}

fail_from!(
    ipfs_core::files::FileError,
    ipfs_core::ipns::IpnsError,
    ipfs_core::merkledag::DagError,
    ipfs_core::multiformats::FormatError
);

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> IpfsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => IpfsStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            IpfsStatus::Internal
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(IpfsStatus::NullArgument, format!("{what} is null"))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure(IpfsStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn bytes<'a>(p: *const u8, len: usize, what: &str) -> Result<&'a [u8], Failure> {
    match (p.is_null(), len) {
        (_, 0) => Ok(&[]),
        (true, _) => Err(null(what)),
        (false, _) => Ok(std::slice::from_raw_parts(p, len)),
    }
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = CString::new(s).map_err(|_| Failure(IpfsStatus::Internal, "string holds NUL".into()))?.into_raw();
    Ok(())
}

unsafe fn node_ref<'a>(node: *mut IpfsNode) -> Result<&'a mut IpfsNode, Failure> {
    node.as_mut().ok_or_else(|| null("node"))
}

fn now() -> SimTime {
    SimTime::from_micros(SystemTime::now().duration_since(UNIX_EPOCH).unwrap_or_default().as_micros() as u64)
}

fn parse_path(text: &str) -> Result<NamePath, Failure> {
    if text.starts_with('/') {
        return Ok(text.parse()?);
    }
    Ok(format!("/ipfs/{text}").parse()?)
}

fn resolve(node: &mut IpfsNode, path: &str) -> Result<Multihash, Failure> {
    let path = parse_path(path)?;
    let dns = TxtFixture::default();
    let mut fetch = StoreFetcher::new(&node.store);
    let mut resolver = Resolver {
        routing: &mut node.routing,
        fetch: &mut fetch,
        dns: &dns,
        now: now(),
        depth_limit: DEFAULT_DEPTH_LIMIT,
    };
    Ok(resolver.resolve(&path)?)
}

/// Creates a node whose identity is derived from a 32-byte secret.
///
/// # Safety
/// `secret` must point to 32 readable bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ipfs_node_new(secret: *const u8, out: *mut *mut IpfsNode) -> IpfsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let secret: [u8; 32] = bytes(secret, 32, "secret")?.try_into().map_err(|_| null("secret"))?;
        let node = IpfsNode {
            identity: NodeIdentity::from_secret(secret),
            store: MemoryStore::new(),
            routing: MemoryRouting::new(),
            chunker: Chunker::default(),
        };
        *out = Box::into_raw(Box::new(node));
        Ok(())
    })
}

/// Releases a node. Null is ignored.
///
/// # Safety
/// `node` must come from [`ipfs_node_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ipfs_node_free(node: *mut IpfsNode) {
    if !node.is_null() {
        drop(Box::from_raw(node));
    }
}

/// Writes the node's base58 id to `out`.
///
/// # Safety
/// `node` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ipfs_node_id(node: *mut IpfsNode, out: *mut *mut c_char) -> IpfsStatus {
    guard(|| {
        let node = node_ref(node)?;
        put_string(out, node.identity.node_id().to_string())
    })
}

/// Adds `len` bytes as a file and writes its base58 hash to `out`.
///
/// # Safety
/// `data` must point to `len` readable bytes (or be null with `len == 0`).
#[no_mangle]
pub unsafe extern "C" fn ipfs_node_add(
    node: *mut IpfsNode,
    data: *const u8,
    len: usize,
    out: *mut *mut c_char,
) -> IpfsStatus {
    guard(|| {
        let node = node_ref(node)?;
        let key = files::add_file(&node.store, bytes(data, len, "data")?, &node.chunker)?;
        put_string(out, key.to_base58())
    })
}

/// Reads the file at `path` (`/ipfs/...`, `/ipns/...` or `<hash>[/name...]`).
/// The buffer is released with [`ipfs_bytes_free`].
///
/// # Safety
/// `path` must be a NUL-terminated string; `out_data` and `out_len` writable.
#[no_mangle]
pub unsafe extern "C" fn ipfs_node_cat(
    node: *mut IpfsNode,
    path: *const c_char,
    out_data: *mut *mut u8,
    out_len: *mut usize,
) -> IpfsStatus {
    guard(|| {
        let node = node_ref(node)?;
        if out_data.is_null() || out_len.is_null() {
            return Err(null("out"));
        }
        let key = resolve(node, text(path, "path")?)?;
        let data = files::cat(&mut StoreFetcher::new(&node.store), &key)?.into_boxed_slice();
        *out_len = data.len();
        *out_data = if data.is_empty() { ptr::null_mut() } else { Box::into_raw(data) as *mut u8 };
        Ok(())
    })
}

/// Resolves a path to the hash it names, written as `/ipfs/<hash>`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ipfs_node_resolve(node: *mut IpfsNode, path: *const c_char, out: *mut *mut c_char) -> IpfsStatus {
    guard(|| {
        let node = node_ref(node)?;
        let key = resolve(node, text(path, "path")?)?;
        put_string(out, format!("/ipfs/{key}"))
    })
}

/// Points the node's name at `key` and writes the new sequence number.
///
/// # Safety
/// `key` must be a NUL-terminated string; `out_sequence` writable or null.
#[no_mangle]
pub unsafe extern "C" fn ipfs_node_publish(node: *mut IpfsNode, key: *const c_char, out_sequence: *mut u64) -> IpfsStatus {
    guard(|| {
        let node = node_ref(node)?;
        let key: Multihash = text(key, "key")?.trim_start_matches("/ipfs/").parse()?;
        let record = ipns::publish_name(&node.identity, &key, &mut node.routing, now())?;
        if !out_sequence.is_null() {
            *out_sequence = record.sequence;
        }
        Ok(())
    })
}

/// Message for the last failure on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ipfs_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// # Safety
/// `s` must come from this library, or be null.
#[no_mangle]
pub unsafe extern "C" fn ipfs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `data` and `len` must be exactly what [`ipfs_node_cat`] returned.
#[no_mangle]
pub unsafe extern "C" fn ipfs_bytes_free(data: *mut u8, len: usize) {
    if !data.is_null() {
        drop(Box::from_raw(ptr::slice_from_raw_parts_mut(data, len)));
    }
}

/// Probability of sending to a peer with debt ratio `r`.
#[no_mangle]
pub extern "C" fn ipfs_send_probability(r: f64) -> f64 {
    ipfs_core::bitswap::send_probability(r)
}

/// Debt ratio of a peer we have sent `bytes_sent` to and received `bytes_recv` from.
#[no_mangle]
pub extern "C" fn ipfs_debt_ratio(bytes_sent: u64, bytes_recv: u64) -> f64 {
    ipfs_core::bitswap::debt_ratio(bytes_sent, bytes_recv)
}

/// Writes the sha2-256 multihash of `data` (34 bytes) to `out`.
///
/// # Safety
/// `data` must hold `len` bytes; `out` must have room for
/// [`IPFS_MULTIHASH_SHA256_LEN`] bytes.
#[no_mangle]
pub unsafe extern "C" fn ipfs_multihash_sha256(data: *const u8, len: usize, out: *mut u8) -> IpfsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let mh = Multihash::sha256(bytes(data, len, "data")?).to_bytes();
        ptr::copy_nonoverlapping(mh.as_ptr(), out, mh.len());
        Ok(())
    })
}

/// Encodes an even number of bytes as a proquint phrase.
///
/// # Safety
/// `data` must hold `len` bytes; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ipfs_proquint_encode(data: *const u8, len: usize, out: *mut *mut c_char) -> IpfsStatus {
    guard(|| put_string(out, proquint::encode(bytes(data, len, "data")?)?))
}
