//! The `ipfs` command line: a single local node over an on-disk repo.
//!
//! Exit codes: 0 success, 2 repo not initialized, 3 resolution failure,
//! 4 malformed input, 5 store failure, 6 routing or network failure,
//! 7 bad configuration, 8 I/O failure, 9 identity or crypto failure,
//! 10 repo already exists, 64 usage error.

pub mod config;
mod repo;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};

pub use config::{ChunkerSpec, NodeConfig, RoutingBackend};
pub use repo::{Repo, RepoRouting};

use crate::blockstore::{self, BlockStore, BlockstoreError};
use crate::files::{self, FileError};
use crate::identity::IdentityError;
use crate::ipns::{self, IpnsError, NamePath, Resolver, TxtFixture, DEFAULT_DEPTH_LIMIT};
use crate::merkledag::{self, block_links, DagError, StoreFetcher};
use crate::multiformats::{FormatError, Multihash};
use crate::netsim::{NetError, Scenario, SimTime};
use crate::routing::{Routing, RoutingError};
use crate::swarm::{PeerConfig, Swarm};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("no repo at {0} (run `ipfs init`)")]
    Uninitialized(PathBuf),
    #[error("repo already exists at {0}")]
    RepoExists(PathBuf),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Files(#[from] FileError),
    #[error(transparent)]
    Dag(#[from] DagError),
    #[error(transparent)]
    Ipns(#[from] IpnsError),
    #[error(transparent)]
    Store(#[from] BlockstoreError),
    #[error(transparent)]
    Routing(#[from] RoutingError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Identity(#[from] IdentityError),
}

impl CliError {
    pub fn class(&self) -> &'static str {
        match self {
            CliError::Uninitialized(_) => "Uninitialized",
            CliError::RepoExists(_) => "RepoExists",
            CliError::Usage(_) => "UsageError",
            CliError::Config(_) => "ConfigError",
            CliError::Io(_) => "IoError",
            CliError::Format(e) => e.class(),
            CliError::Files(e) => e.class(),
            CliError::Dag(e) => e.class(),
            CliError::Ipns(e) => e.class(),
            CliError::Store(e) => e.class(),
            CliError::Routing(e) => e.class(),
            CliError::Net(_) => "NetError",
            CliError::Identity(_) => "IdentityError",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Uninitialized(_) => 2,
            CliError::RepoExists(_) => 10,
            CliError::Usage(_) => 64,
            CliError::Config(_) => 7,
            CliError::Io(_) => 8,
            CliError::Routing(_) | CliError::Net(_) => 6,
            CliError::Store(_) => 5,
            CliError::Identity(_) => 9,
            _ => match self.class() {
                "PathNotFound" | "NameNotFound" | "NameAuthError" | "RecursionLimit" | "FetchError" | "KeyNotFound"
                | "PathError" => 3,
                "StoreError" | "IntegrityError" | "BlockTooLarge" | "PartialPinError" => 5,
                "SignatureError" | "DecryptError" | "NoKey" | "IdentityError" => 9,
                "Stalled" | "ValueTooLarge" | "KeyTooLarge" | "ForeignIdentity" | "PublishError" => 6,
                _ => 4,
            },
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "ipfs", about = "Content-addressed block store, Merkle DAG files and IPNS names")]
struct Cli {
    /// Repo directory.
    #[arg(long, global = true, env = "IPFS_REPO")]
    repo: Option<PathBuf>,
    /// Print hashes as hex multihash bytes instead of base58.
    #[arg(long, global = true)]
    hex: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Create a repo with a fresh identity.
    Init {
        #[arg(long)]
        difficulty: Option<u32>,
        /// Seed for identity generation (random if absent).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Add a file or directory; prints one `added <hash> <path>` line per object.
    Add {
        path: PathBuf,
        /// fixed:<size>, rabin, or rabin:<min>:<avg>:<max>
        #[arg(long)]
        chunker: Option<String>,
        /// Do not pin the added root.
        #[arg(long)]
        no_pin: bool,
    },
    /// Write the file at a path to standard output.
    Cat { path: String },
    /// List links as `<hash> <size> <name>`.
    Ls { path: String },
    /// List referenced hashes, one per line.
    Refs {
        #[arg(short, long)]
        recursive: bool,
        path: String,
    },
    /// Pin or unpin objects so gc keeps them.
    #[command(subcommand)]
    Pin(PinCommand),
    /// Remove unpinned blocks down to the configured low-water mark.
    Gc,
    /// Point this node's name at an object.
    Publish {
        key: String,
        /// Wrap the object in a commit whose parent is the previous one.
        #[arg(long)]
        with_history: bool,
        #[arg(long, default_value = "")]
        message: String,
    },
    /// Resolve a name path to `/ipfs/<hash>`.
    Resolve { path: String },
    /// Show a file object.
    FileCat {
        key: String,
        #[arg(long)]
        json: bool,
    },
    /// Run a simulated swarm with this repo's blocks on node 0.
    Daemon(DaemonArgs),
    /// Print the effective configuration.
    Config,
}

#[derive(Subcommand, Debug)]
enum PinCommand {
    Add {
        #[arg(short, long)]
        recursive: bool,
        key: String,
    },
    Rm {
        #[arg(short, long)]
        recursive: bool,
        key: String,
    },
}

#[derive(Args, Debug)]
struct DaemonArgs {
    /// Scenario file (key = value lines).
    #[arg(long)]
    sim: PathBuf,
    /// Roots the last node fetches; defaults to the recursive pins.
    #[arg(long)]
    fetch: Vec<String>,
    /// Simulated time limit per fetch.
    #[arg(long, default_value = "10m")]
    timeout: String,
}

/// Runs one command. Output goes to `out`, diagnostics to `err`; returns the
/// exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 64 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {}: {e}", e.class());
            e.exit_code()
        }
    }
}

fn default_repo() -> PathBuf {
    std::env::var_os("HOME").map(PathBuf::from).unwrap_or_default().join(".ipfs")
}

fn now() -> SimTime {
    let since = SystemTime::now().duration_since(UNIX_EPOCH).unwrap_or_default();
    SimTime::from_micros(since.as_micros() as u64)
}

struct Printer {
    hex: bool,
}

impl Printer {
    fn hash(&self, key: &Multihash) -> String {
        if self.hex {
            hex::encode(key.to_bytes())
        } else {
            key.to_base58()
        }
    }
}

fn parse_key(text: &str) -> Result<Multihash, CliError> {
    let trimmed = text.strip_prefix("/ipfs/").unwrap_or(text).trim_end_matches('/');
    if trimmed.len().is_multiple_of(2) && trimmed.bytes().all(|b| b.is_ascii_hexdigit()) {
        if let Ok(bytes) = hex::decode(trimmed) {
            if let Ok(mh) = Multihash::from_bytes(&bytes) {
                return Ok(mh);
            }
        }
    }
    Ok(trimmed.parse()?)
}

/// `/ipfs/...`, `/ipns/...` or a bare `<hash>[/path]`.
fn parse_path(text: &str) -> Result<NamePath, CliError> {
    if text.starts_with("/ipfs/") || text.starts_with("/ipns/") {
        return Ok(text.parse()?);
    }
    let mut parts = text.splitn(2, '/');
    let head = parse_key(parts.next().unwrap_or(""))?;
    let mut path = NamePath::ipfs(head);
    path.rest = parts.next().map(merkledag::split_path).unwrap_or_default().into_iter().map(str::to_string).collect();
    Ok(path)
}

fn load_dns(config: &NodeConfig) -> Result<TxtFixture, CliError> {
    match &config.dns_fixture {
        Some(path) => {
            let path = if path.is_relative() { config.repo.join(path) } else { path.clone() };
            Ok(fs::read_to_string(path)?.parse()?)
        }
        None => Ok(TxtFixture::default()),
    }
}

fn resolve(repo: &Repo, routing: &mut RepoRouting, path: &str) -> Result<Multihash, CliError> {
    let path = parse_path(path)?;
    let dns = load_dns(&repo.config)?;
    let mut fetch = StoreFetcher::new(&repo.store);
    let mut resolver =
        Resolver { routing, fetch: &mut fetch, dns: &dns, now: now(), depth_limit: DEFAULT_DEPTH_LIMIT };
    Ok(resolver.resolve(&path)?)
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let root = cli.repo.clone().unwrap_or_else(default_repo);
    let p = Printer { hex: cli.hex };
    if let Command::Init { difficulty, seed } = cli.command {
        let mut config = NodeConfig::new(root.clone());
        config.apply_env(|k| std::env::var(k).ok()).map_err(CliError::Config)?;
        if let Some(d) = difficulty {
            config.difficulty = d;
        }
        let repo = Repo::init(&root, config, seed)?;
        writeln!(out, "initialized repo at {}", root.display())?;
        writeln!(out, "peer identity: {}", repo.identity.node_id())?;
        return Ok(());
    }
    let repo = Repo::open(&root)?;
    match cli.command {
        Command::Init { .. } => unreachable!("handled above"),
        Command::Add { path, chunker, no_pin } => {
            let spec = match chunker {
                Some(text) => text.parse::<ChunkerSpec>().map_err(CliError::Usage)?,
                None => repo.config.chunker,
            };
            let chunker = spec.build()?;
            let key = add_path(&repo.store, &path, &path_label(&path), &chunker, &p, out)?;
            if !no_pin {
                blockstore::pin(&repo.store, &key, true, &block_links)?;
            }
        }
        Command::Cat { path } => {
            let mut routing = repo.routing()?;
            let key = resolve(&repo, &mut routing, &path)?;
            let bytes = files::cat(&mut StoreFetcher::new(&repo.store), &key)?;
            out.write_all(&bytes)?;
        }
        Command::Ls { path } => {
            let mut routing = repo.routing()?;
            let key = resolve(&repo, &mut routing, &path)?;
            for row in merkledag::list_links(&key, &mut StoreFetcher::new(&repo.store))? {
                writeln!(out, "{} {} {}", p.hash(&row.hash), row.size, row.name)?;
            }
        }
        Command::Refs { recursive, path } => {
            let mut routing = repo.routing()?;
            let key = resolve(&repo, &mut routing, &path)?;
            let mut fetch = StoreFetcher::new(&repo.store);
            if recursive {
                let refs = merkledag::refs_recursive(&key, &mut fetch);
                for k in &refs.keys {
                    writeln!(out, "{}", p.hash(k))?;
                }
                if let Some(e) = refs.error {
                    return Err(e.into());
                }
            } else {
                for row in merkledag::list_links(&key, &mut fetch)? {
                    writeln!(out, "{}", p.hash(&row.hash))?;
                }
            }
        }
        Command::Pin(PinCommand::Add { recursive, key }) => {
            let key = parse_key(&key)?;
            let pinned = blockstore::pin(&repo.store, &key, recursive, &block_links)?;
            writeln!(out, "pinned {} ({} block{})", p.hash(&key), pinned.len(), if pinned.len() == 1 { "" } else { "s" })?;
        }
        Command::Pin(PinCommand::Rm { recursive, key }) => {
            let key = parse_key(&key)?;
            if blockstore::unpin(&repo.store, &key, recursive)? {
                writeln!(out, "unpinned {}", p.hash(&key))?;
            } else {
                return Err(CliError::Usage(format!("{key} is not pinned {}", if recursive { "recursively" } else { "directly" })));
            }
        }
        Command::Gc => {
            for key in blockstore::gc(&repo.store, &block_links, repo.config.gc_low_water)? {
                writeln!(out, "removed {}", p.hash(&key))?;
            }
            repo.store.save_access_times()?;
        }
        Command::Publish { key, with_history, message } => {
            let key = parse_key(&key)?;
            if !repo.store.has(&key) {
                return Err(DagError::Fetch { key, reason: "publish requires the object locally".into() }.into());
            }
            let mut routing = repo.routing()?;
            routing.provide(&key, &repo.identity)?;
            let t = now();
            let record = if with_history {
                let date = files::format_date((t.as_micros() / 1_000_000) as i64)?;
                let (commit, record) =
                    ipns::publish_with_history(&repo.store, &repo.identity, &key, &mut routing, t, &date, &message)?;
                blockstore::pin(&repo.store, &commit, true, &block_links)?;
                record
            } else {
                ipns::publish_name(&repo.identity, &key, &mut routing, t)?
            };
            repo.save_records(&routing)?;
            writeln!(
                out,
                "published /ipns/{} -> /ipfs/{} (sequence {})",
                repo.identity.node_id(),
                p.hash(&record.value),
                record.sequence
            )?;
        }
        Command::Resolve { path } => {
            let mut routing = repo.routing()?;
            let key = resolve(&repo, &mut routing, &path)?;
            writeln!(out, "/ipfs/{}", p.hash(&key))?;
        }
        Command::FileCat { key, json } => {
            let key = parse_key(&key)?;
            let node = files::fetch_node(&mut StoreFetcher::new(&repo.store), &key)?;
            if json {
                writeln!(out, "{}", files::to_json(&node))?;
            } else {
                let object = node.to_object();
                writeln!(out, "{}", node.kind())?;
                for link in &object.links {
                    writeln!(out, "{} {} {}", p.hash(&link.hash), link.size, link.name)?;
                }
            }
        }
        Command::Daemon(args) => daemon(&repo, args, &p, out)?,
        Command::Config => write!(out, "{}", repo.config)?,
    }
    Ok(())
}

fn path_label(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| path.display().to_string())
}

/// Adds a file, or a directory as a tree of its regular files and
/// subdirectories (other entries are skipped).
fn add_path(
    store: &dyn BlockStore,
    path: &Path,
    label: &str,
    chunker: &files::Chunker,
    p: &Printer,
    out: &mut dyn Write,
) -> Result<Multihash, CliError> {
    let meta = fs::metadata(path)?;
    let key = if meta.is_dir() {
        let mut entries = Vec::new();
        let mut names: Vec<_> = fs::read_dir(path)?.collect::<Result<Vec<_>, _>>()?;
        names.sort_by_key(|e| e.file_name());
        for entry in names {
            let name = entry.file_name().to_string_lossy().into_owned();
            let kind = entry.file_type()?;
            if !(kind.is_file() || kind.is_dir()) {
                continue;
            }
            let child = add_path(store, &entry.path(), &format!("{label}/{name}"), chunker, p, out)?;
            entries.push((name, child));
        }
        files::make_tree(store, &entries)?
    } else {
        files::add_file(store, &fs::read(path)?, chunker)?
    };
    writeln!(out, "added {} {label}", p.hash(&key))?;
    Ok(key)
}

fn daemon(repo: &Repo, args: DaemonArgs, p: &Printer, out: &mut dyn Write) -> Result<(), CliError> {
    let scenario = Scenario::parse(&fs::read_to_string(&args.sim)?)?;
    if scenario.nodes < 2 {
        return Err(CliError::Usage("daemon --sim needs a scenario with at least 2 nodes".into()));
    }
    let timeout = crate::netsim::parse_duration(&args.timeout)?;
    let roots: Vec<Multihash> = if args.fetch.is_empty() {
        repo.store.pins().recursive.iter().cloned().collect()
    } else {
        args.fetch.iter().map(|k| parse_key(k)).collect::<Result<_, _>>()?
    };
    let local: Arc<dyn BlockStore> = Arc::new(FsView(&repo.store as *const _));
    let mut swarm = Swarm::from_scenario(
        &scenario,
        |idx| if idx == 0 { local.clone() } else { Arc::new(blockstore::MemoryStore::new()) },
        |idx| {
            let mut cfg = PeerConfig { work_capacity: 0, ..PeerConfig::default() };
            // the local node serves its repo as a seed
            cfg.bitswap.seed_when_idle = idx == 0;
            cfg
        },
    )?;
    let last = scenario.nodes - 1;
    writeln!(out, "swarm of {} nodes up at {}; local node is {}", scenario.nodes, swarm.net.now(), swarm.peer(0).dht().node_id())?;
    for root in &roots {
        swarm.provide(0, root)?;
        let id = swarm.fetch(last, root)?;
        let deadline = swarm.net.now() + timeout;
        match swarm.run_fetch(last, id, deadline) {
            Some(t) => writeln!(out, "node {last} fetched {} at {t}", p.hash(root))?,
            None => writeln!(
                out,
                "node {last} gave up on {} at {} with {} block(s) missing",
                p.hash(root),
                swarm.net.now(),
                swarm.peer(last).fetch_missing(id)
            )?,
        }
    }
    swarm.run_for(Duration::from_secs(1));
    let stats = swarm.net.stats();
    writeln!(
        out,
        "frames sent {} delivered {} dropped {}; trace {}",
        stats.sent,
        stats.delivered,
        stats.dropped,
        hex::encode(swarm.net.trace_digest())
    )?;
    Ok(())
}

/// Shares the repo's store with the simulated node 0 for the duration of a
/// daemon run.
struct FsView(*const crate::blockstore::FsStore);

// SAFETY: the view never outlives `daemon`, which holds the borrow of the
// repo for its whole run, and FsStore synchronizes internally.
unsafe impl Send for FsView {}
unsafe impl Sync for FsView {}

impl FsView {
    fn get(&self) -> &crate::blockstore::FsStore {
        // SAFETY: see the Send/Sync note above
        unsafe { &*self.0 }
    }
}

impl BlockStore for FsView {
    fn max_block_size(&self) -> usize {
        self.get().max_block_size()
    }
    fn put_block(&self, block: blockstore::Block) -> Result<(), BlockstoreError> {
        self.get().put_block(block)
    }
    fn get(&self, key: &Multihash) -> Result<Option<Vec<u8>>, BlockstoreError> {
        self.get().get(key)
    }
    fn has(&self, key: &Multihash) -> bool {
        self.get().has(key)
    }
    fn remove(&self, key: &Multihash) -> Result<bool, BlockstoreError> {
        self.get().remove(key)
    }
    fn keys(&self) -> Vec<Multihash> {
        self.get().keys()
    }
    fn last_access(&self, key: &Multihash) -> Option<u64> {
        self.get().last_access(key)
    }
    fn pins(&self) -> blockstore::PinSet {
        self.get().pins()
    }
    fn apply_pin(&self, op: blockstore::PinOp) -> Result<(), BlockstoreError> {
        self.get().apply_pin(op)
    }
    fn maintenance(&self) -> std::sync::MutexGuard<'_, ()> {
        self.get().maintenance()
    }
}
