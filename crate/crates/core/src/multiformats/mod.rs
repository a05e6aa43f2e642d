//! Self-describing encodings: multihash digests, multiaddr network addresses,
//! varints and the base58 text form used to display hashes.

pub mod base;
pub mod multiaddr;
pub mod multihash;
pub mod varint;

pub use multiaddr::{Multiaddr, Protocol};
pub use multihash::{HashFunction, Multihash};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FormatError {
    #[error("unknown multihash function code {0:#x}")]
    UnknownCode(u64),
    #[error("hash function {0:#x} is decode-only")]
    DecodeOnly(u64),
    #[error("unknown multiaddr protocol {0}")]
    UnknownProtocol(String),
    #[error("declared length {declared} does not match {actual}")]
    LengthMismatch { declared: usize, actual: usize },
    #[error("empty digest")]
    EmptyDigest,
    #[error("truncated input")]
    Truncated,
    #[error("varint longer than four bytes")]
    VarintOverflow,
    #[error("non-minimal varint encoding")]
    NonMinimalVarint,
    #[error("invalid payload: {0}")]
    Payload(String),
    #[error("character {0:?} outside the alphabet")]
    Alphabet(char),
}

impl FormatError {
    /// Stable error class name, used in CLI diagnostics.
    pub fn class(&self) -> &'static str {
        match self {
            FormatError::UnknownCode(_) | FormatError::DecodeOnly(_) | FormatError::UnknownProtocol(_) => {
                "RegistryError"
            }
            FormatError::LengthMismatch { .. } | FormatError::EmptyDigest => "LengthMismatch",
            FormatError::Truncated | FormatError::VarintOverflow | FormatError::NonMinimalVarint => "TruncatedError",
            FormatError::Payload(_) => "PayloadError",
            FormatError::Alphabet(_) => "AlphabetError",
        }
    }
}
