use std::fmt;
use std::str::FromStr;

use sha2::{Digest, Sha256, Sha512};

use super::{base, varint, FormatError};

/// Hash functions known to the registry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HashFunction {
    Identity,
    /// Decode-only; digests can be carried but not produced or verified.
    Sha1,
    Sha256,
    Sha512,
}

impl HashFunction {
    pub const ALL: [HashFunction; 4] = [
        HashFunction::Identity,
        HashFunction::Sha1,
        HashFunction::Sha256,
        HashFunction::Sha512,
    ];

    pub fn code(self) -> u64 {
        match self {
            HashFunction::Identity => 0x00,
            HashFunction::Sha1 => 0x11,
            HashFunction::Sha256 => 0x12,
            HashFunction::Sha512 => 0x13,
        }
    }

    pub fn from_code(code: u64) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.code() == code)
    }

    /// Fixed digest length, or `None` for the identity function.
    pub fn digest_len(self) -> Option<usize> {
        match self {
            HashFunction::Identity => None,
            HashFunction::Sha1 => Some(20),
            HashFunction::Sha256 => Some(32),
            HashFunction::Sha512 => Some(64),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            HashFunction::Identity => "identity",
            HashFunction::Sha1 => "sha1",
            HashFunction::Sha256 => "sha2-256",
            HashFunction::Sha512 => "sha2-512",
        }
    }

    fn hash(self, data: &[u8]) -> Option<Vec<u8>> {
        match self {
            HashFunction::Identity => Some(data.to_vec()),
            HashFunction::Sha1 => None,
            HashFunction::Sha256 => Some(Sha256::digest(data).to_vec()),
            HashFunction::Sha512 => Some(Sha512::digest(data).to_vec()),
        }
    }
}

/// A self-describing hash digest: `<function code><digest length><digest>`.
///
/// Values with codes outside the registry can be decoded and carried around,
/// but [`Multihash::function`] returns `None` for them and they cannot be
/// re-encoded through [`encode`].
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Multihash {
    code: u64,
    digest: Vec<u8>,
}

impl Multihash {
    /// Builds a multihash from a registered function and an existing digest.
    pub fn new(function: HashFunction, digest: Vec<u8>) -> Result<Self, FormatError> {
        check_digest(function, &digest)?;
        Ok(Multihash { code: function.code(), digest })
    }

    /// Hashes `data` with `function`.
    pub fn digest_of(function: HashFunction, data: &[u8]) -> Result<Self, FormatError> {
        let digest = function.hash(data).ok_or(FormatError::DecodeOnly(function.code()))?;
        Ok(Multihash { code: function.code(), digest })
    }

    /// SHA-256 multihash, the default key function everywhere.
    pub fn sha256(data: &[u8]) -> Self {
        Multihash { code: HashFunction::Sha256.code(), digest: Sha256::digest(data).to_vec() }
    }

    pub fn code(&self) -> u64 {
        self.code
    }

    pub fn function(&self) -> Option<HashFunction> {
        HashFunction::from_code(self.code)
    }

    pub fn digest(&self) -> &[u8] {
        &self.digest
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.digest.len() + 4);
        varint::encode(self.code, &mut out);
        varint::encode(self.digest.len() as u64, &mut out);
        out.extend_from_slice(&self.digest);
        out
    }

    pub fn from_bytes(raw: &[u8]) -> Result<Self, FormatError> {
        decode(raw)
    }

    /// Reads one multihash from the front of a reader (used inside larger frames).
    pub fn read(reader: &mut varint::Reader<'_>) -> Result<Self, FormatError> {
        let code = reader.varint()?;
        let len = reader.varint()? as usize;
        let digest = reader.bytes(len)?.to_vec();
        Ok(Multihash { code, digest })
    }

    /// Recomputes the digest of `data` under this multihash's function.
    pub fn verify(&self, data: &[u8]) -> Result<bool, FormatError> {
        let function = self.function().ok_or(FormatError::UnknownCode(self.code))?;
        let digest = function.hash(data).ok_or(FormatError::DecodeOnly(self.code))?;
        Ok(digest == self.digest)
    }

    pub fn to_base58(&self) -> String {
        base::display(&self.to_bytes())
    }

    /// The digest as a 256-bit key for XOR distance: zero padded or truncated.
    pub fn xor_key(&self) -> [u8; 32] {
        let mut key = [0u8; 32];
        let n = self.digest.len().min(32);
        key[..n].copy_from_slice(&self.digest[..n]);
        key
    }
}

fn check_digest(function: HashFunction, digest: &[u8]) -> Result<(), FormatError> {
    if digest.is_empty() {
        return Err(FormatError::EmptyDigest);
    }
    if digest.len() as u64 > varint::MAX_VARINT {
        return Err(FormatError::LengthMismatch { declared: digest.len(), actual: digest.len() });
    }
    if let Some(expected) = function.digest_len() {
        if digest.len() > expected {
            return Err(FormatError::LengthMismatch { declared: expected, actual: digest.len() });
        }
    }
    Ok(())
}

/// Encodes `digest` under the registry code `function_code`.
pub fn encode(function_code: u64, digest: &[u8]) -> Result<Vec<u8>, FormatError> {
    let function = HashFunction::from_code(function_code).ok_or(FormatError::UnknownCode(function_code))?;
    check_digest(function, digest)?;
    Ok(Multihash { code: function_code, digest: digest.to_vec() }.to_bytes())
}

/// Decodes a complete multihash; the declared length must consume every remaining byte.
pub fn decode(raw: &[u8]) -> Result<Multihash, FormatError> {
    if raw.len() < 2 {
        return Err(FormatError::Truncated);
    }
    let mut reader = varint::Reader::new(raw);
    let code = reader.varint()?;
    let declared = reader.varint()? as usize;
    let actual = reader.remaining().len();
    if declared != actual {
        return Err(FormatError::LengthMismatch { declared, actual });
    }
    Ok(Multihash { code, digest: reader.remaining().to_vec() })
}

impl fmt::Display for Multihash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_base58())
    }
}

impl fmt::Debug for Multihash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Multihash({})", self.to_base58())
    }
}

impl FromStr for Multihash {
    type Err = FormatError;

    /// Accepts base58 or lowercase hex.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        decode(&base::parse(s)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_layout() {
        assert_eq!(encode(0x00, b"a").unwrap(), vec![0x00, 0x01, 0x61]);
        let mh = decode(&[0x00, 0x01, 0x61]).unwrap();
        assert_eq!(mh.code(), 0);
        assert_eq!(mh.digest(), b"a");
    }

    #[test]
    fn sha256_zero_digest_layout() {
        let out = encode(0x12, &[0u8; 32]).unwrap();
        assert_eq!(&out[..2], &[0x12, 0x20]);
        assert_eq!(&out[2..], &[0u8; 32]);
    }

    #[test]
    fn sha256_of_empty_input() {
        // independent value: coreutils `sha256sum < /dev/null`
        let expected = "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855";
        let mh = Multihash::sha256(b"");
        assert_eq!(hex::encode(&mh.to_bytes()[2..]), expected);
        assert_eq!(&mh.to_bytes()[..3], &[0x12, 0x20, 0xe3]);
    }

    #[test]
    fn declared_length_must_match() {
        let mut raw = vec![0x12, 0x21];
        raw.extend_from_slice(&[7u8; 32]);
        assert_eq!(decode(&raw), Err(FormatError::LengthMismatch { declared: 33, actual: 32 }));
        assert_eq!(decode(&[0x12]), Err(FormatError::Truncated));
    }

    #[test]
    fn registry_errors() {
        assert_eq!(encode(0x99, b"x"), Err(FormatError::UnknownCode(0x99)));
        assert!(matches!(encode(0x12, &[0u8; 33]), Err(FormatError::LengthMismatch { .. })));
        assert_eq!(encode(0x12, &[]), Err(FormatError::EmptyDigest));
    }

    #[test]
    fn unknown_codes_decode_but_are_flagged() {
        let mh = decode(&[0x50, 0x01, 0xaa]).unwrap();
        assert!(mh.function().is_none());
        assert!(mh.verify(b"x").is_err());
    }

    #[test]
    fn sha1_is_decode_only() {
        let mh = Multihash::new(HashFunction::Sha1, vec![1; 20]).unwrap();
        assert_eq!(mh.verify(b"anything"), Err(FormatError::DecodeOnly(0x11)));
        assert!(Multihash::digest_of(HashFunction::Sha1, b"x").is_err());
    }

    #[test]
    fn registry_prefixes_are_distinct() {
        for len in [1usize, 20, 32, 64] {
            let mut seen = std::collections::BTreeSet::new();
            for f in HashFunction::ALL {
                if f.digest_len().is_some_and(|l| l < len) {
                    continue;
                }
                let encoded = encode(f.code(), &vec![0u8; len]).unwrap();
                let header = encoded[..encoded.len() - len].to_vec();
                assert!(seen.insert(header), "prefix clash for {f:?} at {len}");
            }
        }
    }
}
