//! Proquints: each 16-bit big-endian word becomes consonant-vowel-consonant-
//! vowel-consonant, words joined by dashes.

use super::IpnsError;

const CONSONANTS: &[u8; 16] = b"bdfghjklmnprstvz";
const VOWELS: &[u8; 4] = b"aiou";

pub fn encode(bytes: &[u8]) -> Result<String, IpnsError> {
    if !bytes.len().is_multiple_of(2) {
        return Err(IpnsError::Length(format!("proquint input of {} bytes is not a whole number of words", bytes.len())));
    }
    let words: Vec<String> = bytes
        .chunks(2)
        .map(|pair| {
            let w = u16::from_be_bytes([pair[0], pair[1]]);
            let c = |shift: u16| CONSONANTS[usize::from((w >> shift) & 0xf)] as char;
            let v = |shift: u16| VOWELS[usize::from((w >> shift) & 0x3)] as char;
            [c(12), v(10), c(6), v(4), c(0)].iter().collect()
        })
        .collect();
    Ok(words.join("-"))
}

pub fn decode(text: &str) -> Result<Vec<u8>, IpnsError> {
    let mut out = Vec::new();
    if text.is_empty() {
        return Ok(out);
    }
    for word in text.split('-') {
        if word.len() != 5 {
            return Err(IpnsError::Length(format!("proquint word {word:?} is not five letters")));
        }
        let mut w: u16 = 0;
        for (i, ch) in word.bytes().enumerate() {
            let (table, bits): (&[u8], u16) = if i % 2 == 0 { (CONSONANTS, 4) } else { (VOWELS, 2) };
            let pos = table
                .iter()
                .position(|&t| t == ch)
                .ok_or_else(|| IpnsError::Alphabet(format!("{:?} in proquint word {word:?}", ch as char)))?;
            w = (w << bits) | pos as u16;
        }
        out.extend_from_slice(&w.to_be_bytes());
    }
    Ok(out)
}

/// Whether `text` has the shape of a proquint (dash-joined five-letter words).
pub fn looks_like(text: &str) -> bool {
    !text.is_empty() && text.split('-').all(|w| w.len() == 5 && w.bytes().all(|b| b.is_ascii_lowercase()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loopback_address() {
        assert_eq!(encode(&[0x7f, 0, 0, 1]).unwrap(), "lusab-babad");
        assert_eq!(decode("lusab-babad").unwrap(), vec![0x7f, 0, 0, 1]);
    }

    #[test]
    fn example_phrase_is_twelve_bytes() {
        let bytes = decode("dahih-dolij-sozuk-vosah-luvar-fuluh").unwrap();
        assert_eq!(bytes.len(), 12);
        assert_eq!(encode(&bytes).unwrap(), "dahih-dolij-sozuk-vosah-luvar-fuluh");
    }

    #[test]
    fn errors() {
        assert!(matches!(encode(&[1, 2, 3]), Err(IpnsError::Length(_))));
        assert!(matches!(decode("lusab-babax"), Err(IpnsError::Alphabet(_))));
        assert!(matches!(decode("lusab-bab"), Err(IpnsError::Length(_))));
        assert!(matches!(decode("aaaaa"), Err(IpnsError::Alphabet(_))));
        assert_eq!(encode(&[]).unwrap(), "");
        assert_eq!(decode("").unwrap(), Vec::<u8>::new());
    }
}
