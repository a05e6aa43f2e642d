pub mod bitswap;
pub mod blockstore;
pub mod cli;
pub mod files;
pub mod identity;
pub mod ipns;
pub mod merkledag;
pub mod multiformats;
pub mod netsim;
pub mod routing;
pub mod swarm;
