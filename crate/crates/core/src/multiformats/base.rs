//! Text form for hashes: base58 (Bitcoin alphabet) out, base58 or lowercase hex in.

use super::FormatError;

pub fn display(bytes: &[u8]) -> String {
    bs58::encode(bytes).into_string()
}

/// Parses base58 first and falls back to lowercase hex. Base58 has no `0`,
/// so hex-encoded multihashes (which start `12 20`) never parse as base58.
pub fn parse(text: &str) -> Result<Vec<u8>, FormatError> {
    if let Ok(bytes) = bs58::decode(text).into_vec() {
        return Ok(bytes);
    }
    let is_hex = text.len().is_multiple_of(2) && text.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b));
    if is_hex {
        if let Ok(bytes) = hex::decode(text) {
            return Ok(bytes);
        }
    }
    Err(FormatError::Alphabet(text.chars().find(|c| !c.is_ascii_alphanumeric()).unwrap_or('?')))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_round_trip() {
        assert_eq!(display(&[]), "");
        assert_eq!(parse("").unwrap(), Vec::<u8>::new());
    }

    #[test]
    fn every_single_byte_round_trips() {
        for b in 0..=255u8 {
            let text = display(&[b]);
            assert!(!text.contains('/'));
            assert_eq!(parse(&text).unwrap(), vec![b]);
        }
        assert_eq!(display(&[0]), "1");
    }

    #[test]
    fn hex_fallback_and_bad_alphabet() {
        assert_eq!(parse("1220ab").unwrap(), vec![0x12, 0x20, 0xab]);
        assert!(matches!(parse("abc/def"), Err(FormatError::Alphabet('/'))));
        assert!(parse("0OIl").is_err());
    }
}
