//! On-disk repo: config, sealed identity, block store and published name
//! records.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::config::{NodeConfig, RoutingBackend};
use super::CliError;
use crate::blockstore::FsStore;
use crate::identity::{generate_identity, NodeId, NodeIdentity};
use crate::multiformats::varint::Reader;
use crate::multiformats::{Multiaddr, Multihash};
use crate::routing::{DhtConfig, DhtNet, MemoryRouting, ProviderSet, Routing, RoutingError, ValueRecord};

const CONFIG_FILE: &str = "config";
const IDENTITY_FILE: &str = "identity";
const NAMES_FILE: &str = "names";

pub struct Repo {
    pub root: PathBuf,
    pub config: NodeConfig,
    pub store: FsStore,
    pub identity: NodeIdentity,
}

fn passphrase() -> String {
    std::env::var("IPFS_PASSPHRASE").unwrap_or_default()
}

impl Repo {
    pub fn init(root: &Path, mut config: NodeConfig, seed: Option<u64>) -> Result<Repo, CliError> {
        if root.join(CONFIG_FILE).exists() {
            return Err(CliError::RepoExists(root.to_path_buf()));
        }
        fs::create_dir_all(root)?;
        config.repo = root.to_path_buf();
        let mut rng = match seed {
            Some(s) => ChaCha20Rng::seed_from_u64(s),
            None => ChaCha20Rng::from_entropy(),
        };
        let identity = generate_identity(config.difficulty, &mut rng)?;
        fs::write(root.join(IDENTITY_FILE), identity.to_file_bytes(&passphrase(), &mut rng))?;
        fs::write(root.join(CONFIG_FILE), config.to_string())?;
        let store = FsStore::open(root)?;
        Ok(Repo { root: root.to_path_buf(), config, store, identity })
    }

    pub fn open(root: &Path) -> Result<Repo, CliError> {
        let config_path = root.join(CONFIG_FILE);
        if !config_path.exists() {
            return Err(CliError::Uninitialized(root.to_path_buf()));
        }
        let mut config = NodeConfig::parse(&fs::read_to_string(config_path)?, root.to_path_buf()).map_err(CliError::Config)?;
        config.repo = root.to_path_buf();
        config.apply_env(|k| std::env::var(k).ok()).map_err(CliError::Config)?;
        let identity = NodeIdentity::from_file_bytes(&fs::read(root.join(IDENTITY_FILE))?, &passphrase())?;
        let store = FsStore::open(root)?;
        Ok(Repo { root: root.to_path_buf(), config, store, identity })
    }

    fn stored_records(&self) -> Result<Vec<ValueRecord>, CliError> {
        let path = self.root.join(NAMES_FILE);
        if !path.exists() {
            return Ok(Vec::new());
        }
        let mut out = Vec::new();
        for line in fs::read_to_string(path)?.lines().filter(|l| !l.trim().is_empty()) {
            let bytes = hex::decode(line.trim()).map_err(|e| CliError::Config(format!("{NAMES_FILE}: {e}")))?;
            out.push(ValueRecord::read(&mut Reader::new(&bytes)).map_err(RoutingError::from)?);
        }
        Ok(out)
    }

    /// Routing loaded with every record this repo has published or seen.
    pub fn routing(&self) -> Result<RepoRouting, CliError> {
        let backend = match self.config.routing {
            RoutingBackend::Memory => Backend::Memory(MemoryRouting::new()),
            RoutingBackend::DhtSim => {
                let config = DhtConfig { difficulty: 0, ..DhtConfig::default() };
                let net = DhtNet::spawn(self.config.sim_seed, self.config.sim_nodes, 4, config, None)?;
                Backend::Sim(Box::new(net))
            }
        };
        let mut routing = RepoRouting { backend, written: Vec::new() };
        for record in self.stored_records()? {
            // records that no longer verify are skipped, not fatal
            let _ = routing.put_record(record);
        }
        routing.written.clear();
        Ok(routing)
    }

    pub fn save_records(&self, routing: &RepoRouting) -> Result<(), CliError> {
        if routing.written.is_empty() {
            return Ok(());
        }
        let mut file = fs::OpenOptions::new().create(true).append(true).open(self.root.join(NAMES_FILE))?;
        for record in &routing.written {
            writeln!(file, "{}", hex::encode(record.to_bytes()))?;
        }
        Ok(())
    }
}

enum Backend {
    Memory(MemoryRouting),
    Sim(Box<DhtNet>),
}

/// Routing for one command run; remembers the records it stored so they can
/// be persisted.
pub struct RepoRouting {
    backend: Backend,
    written: Vec<ValueRecord>,
}

impl Routing for RepoRouting {
    fn find_peer(&mut self, target: &NodeId) -> Result<Option<Multiaddr>, RoutingError> {
        match &mut self.backend {
            Backend::Memory(m) => m.find_peer(target),
            Backend::Sim(n) => n.handle(0).find_peer(target),
        }
    }

    fn put_record(&mut self, record: ValueRecord) -> Result<(), RoutingError> {
        match &mut self.backend {
            Backend::Memory(m) => m.put_record(record.clone()),
            Backend::Sim(n) => n.handle(0).put_record(record.clone()),
        }?;
        self.written.push(record);
        Ok(())
    }

    fn get_value(&mut self, key: &[u8]) -> Result<Option<ValueRecord>, RoutingError> {
        match &mut self.backend {
            Backend::Memory(m) => m.get_value(key),
            Backend::Sim(n) => {
                let last = n.net.len() - 1;
                n.handle(last).get_value(key)
            }
        }
    }

    fn provide(&mut self, key: &Multihash, identity: &NodeIdentity) -> Result<(), RoutingError> {
        match &mut self.backend {
            Backend::Memory(m) => m.provide(key, identity),
            // sim nodes have their own identities; announcing for the repo
            // identity is left to `daemon --sim`
            Backend::Sim(_) => Ok(()),
        }
    }

    fn find_value_peers(&mut self, key: &Multihash, min: usize) -> Result<ProviderSet, RoutingError> {
        match &mut self.backend {
            Backend::Memory(m) => m.find_value_peers(key, min),
            Backend::Sim(n) => n.handle(0).find_value_peers(key, min),
        }
    }
}
