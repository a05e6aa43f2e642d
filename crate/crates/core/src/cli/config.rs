//! Repo configuration: `key = value` lines at the repo root, overridable
//! through `IPFS_*` environment variables.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::files::{Chunker, RabinParams};
use crate::multiformats::Multiaddr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoutingBackend {
    /// Name records kept in the repo itself.
    Memory,
    /// Name operations run through a simulated DHT seeded from the config.
    DhtSim,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChunkerSpec {
    Fixed(usize),
    Rabin { min: usize, avg: usize, max: usize },
}

impl ChunkerSpec {
    pub fn build(self) -> Result<Chunker, crate::files::FileError> {
        match self {
            ChunkerSpec::Fixed(size) => Chunker::fixed(size),
            ChunkerSpec::Rabin { min, avg, max } => Chunker::rabin(RabinParams { min, avg, max, ..RabinParams::default() }),
        }
    }
}

impl Default for ChunkerSpec {
    fn default() -> Self {
        let d = RabinParams::default();
        ChunkerSpec::Rabin { min: d.min, avg: d.avg, max: d.max }
    }
}

impl fmt::Display for ChunkerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChunkerSpec::Fixed(size) => write!(f, "fixed:{size}"),
            ChunkerSpec::Rabin { min, avg, max } => write!(f, "rabin:{min}:{avg}:{max}"),
        }
    }
}

impl FromStr for ChunkerSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |p: &str| p.parse::<usize>().map_err(|_| format!("bad chunker size {p:?}"));
        let spec = match parts.as_slice() {
            ["fixed", size] => ChunkerSpec::Fixed(num(size)?),
            ["rabin"] => ChunkerSpec::default(),
            ["rabin", min, avg, max] => ChunkerSpec::Rabin { min: num(min)?, avg: num(avg)?, max: num(max)? },
            _ => return Err(format!("chunker {s:?} is not fixed:<size>, rabin or rabin:<min>:<avg>:<max>")),
        };
        spec.build().map_err(|e| e.to_string())?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeConfig {
    pub repo: PathBuf,
    pub difficulty: u32,
    pub chunker: ChunkerSpec,
    pub routing: RoutingBackend,
    pub listen: Multiaddr,
    pub gc_low_water: usize,
    /// TXT fixture used for `/ipns/<domain>` lookups.
    pub dns_fixture: Option<PathBuf>,
    pub sim_nodes: usize,
    pub sim_seed: u64,
}

impl NodeConfig {
    pub fn new(repo: PathBuf) -> Self {
        NodeConfig {
            repo,
            difficulty: 0,
            chunker: ChunkerSpec::default(),
            routing: RoutingBackend::Memory,
            listen: "/ip4/127.0.0.1/tcp/4001".parse().expect("valid default address"),
            gc_low_water: 0,
            dns_fixture: None,
            sim_nodes: 16,
            sim_seed: 0,
        }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let bad = |what: &str| format!("{key}: {what} {value:?}");
        match key {
            "repo" => self.repo = PathBuf::from(value),
            "difficulty" => self.difficulty = value.parse().map_err(|_| bad("bad integer"))?,
            "chunker" => self.chunker = value.parse()?,
            "routing" => {
                self.routing = match value {
                    "memory" => RoutingBackend::Memory,
                    "dht-sim" => RoutingBackend::DhtSim,
                    _ => return Err(bad("expected memory or dht-sim, got")),
                }
            }
            "listen" => self.listen = value.parse().map_err(|e| format!("{key}: {e}"))?,
            "gc.low_water" => self.gc_low_water = value.parse().map_err(|_| bad("bad integer"))?,
            "dns.fixture" => self.dns_fixture = Some(value).filter(|v| !v.is_empty()).map(PathBuf::from),
            "sim.nodes" => {
                self.sim_nodes = value.parse().map_err(|_| bad("bad integer"))?;
                if self.sim_nodes == 0 {
                    return Err(bad("need at least one node, got"));
                }
            }
            "sim.seed" => self.sim_seed = value.parse().map_err(|_| bad("bad integer"))?,
            _ => return Err(format!("unknown config key {key:?}")),
        }
        Ok(())
    }

    pub fn parse(text: &str, repo: PathBuf) -> Result<Self, String> {
        let mut config = NodeConfig::new(repo);
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| format!("line {}: expected key = value", n + 1))?;
            config.set(key.trim(), value.trim()).map_err(|e| format!("line {}: {e}", n + 1))?;
        }
        Ok(config)
    }

    pub const KEYS: [&'static str; 9] =
        ["repo", "difficulty", "chunker", "routing", "listen", "gc.low_water", "dns.fixture", "sim.nodes", "sim.seed"];

    /// `IPFS_` + upper-cased key with dots as underscores, e.g. `IPFS_GC_LOW_WATER`.
    pub fn env_name(key: &str) -> String {
        format!("IPFS_{}", key.replace('.', "_").to_ascii_uppercase())
    }

    pub fn apply_env(&mut self, var: impl Fn(&str) -> Option<String>) -> Result<(), String> {
        for key in Self::KEYS {
            if key == "repo" {
                continue;
            }
            if let Some(value) = var(&Self::env_name(key)) {
                self.set(key, &value).map_err(|e| format!("{}: {e}", Self::env_name(key)))?;
            }
        }
        Ok(())
    }
}

impl fmt::Display for NodeConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "repo = {}", self.repo.display())?;
        writeln!(f, "difficulty = {}", self.difficulty)?;
        writeln!(f, "chunker = {}", self.chunker)?;
        let routing = match self.routing {
            RoutingBackend::Memory => "memory",
            RoutingBackend::DhtSim => "dht-sim",
        };
        writeln!(f, "routing = {routing}")?;
        writeln!(f, "listen = {}", self.listen)?;
        writeln!(f, "gc.low_water = {}", self.gc_low_water)?;
        writeln!(f, "dns.fixture = {}", self.dns_fixture.as_ref().map(|p| p.display().to_string()).unwrap_or_default())?;
        writeln!(f, "sim.nodes = {}", self.sim_nodes)?;
        writeln!(f, "sim.seed = {}", self.sim_seed)
    }
}
