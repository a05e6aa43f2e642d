//! Unsigned LEB128 varints, capped at four bytes.

use super::FormatError;

/// Largest value that fits the four-byte cap (28 payload bits).
pub const MAX_VARINT: u64 = (1 << 28) - 1;
const MAX_BYTES: usize = 4;

pub fn encode(mut value: u64, out: &mut Vec<u8>) {
    debug_assert!(value <= MAX_VARINT, "varint {value} exceeds 4-byte cap");
    loop {
        let byte = (value & 0x7f) as u8;
        value >>= 7;
        if value == 0 {
            out.push(byte);
            return;
        }
        out.push(byte | 0x80);
    }
}

/// Uncapped LEB128 for protocol counters and timestamps (up to ten bytes).
pub fn encode_u64(mut value: u64, out: &mut Vec<u8>) {
    loop {
        let byte = (value & 0x7f) as u8;
        value >>= 7;
        if value == 0 {
            out.push(byte);
            return;
        }
        out.push(byte | 0x80);
    }
}

pub fn decode_u64(input: &[u8]) -> Result<(u64, usize), FormatError> {
    let mut value = 0u64;
    for (i, &byte) in input.iter().enumerate().take(10) {
        let part = u64::from(byte & 0x7f);
        if i == 9 && part > 1 {
            return Err(FormatError::VarintOverflow);
        }
        value |= part << (7 * i);
        if byte & 0x80 == 0 {
            if i > 0 && byte == 0 {
                return Err(FormatError::NonMinimalVarint);
            }
            return Ok((value, i + 1));
        }
    }
    if input.len() < 10 {
        Err(FormatError::Truncated)
    } else {
        Err(FormatError::VarintOverflow)
    }
}

pub fn to_vec(value: u64) -> Vec<u8> {
    let mut out = Vec::with_capacity(MAX_BYTES);
    encode(value, &mut out);
    out
}

/// Decodes one varint from the front of `input`, returning it and the number
/// of bytes consumed. Non-minimal encodings are rejected so that every value
/// has exactly one byte form.
pub fn decode(input: &[u8]) -> Result<(u64, usize), FormatError> {
    let mut value = 0u64;
    for (i, &byte) in input.iter().enumerate().take(MAX_BYTES) {
        value |= u64::from(byte & 0x7f) << (7 * i);
        if byte & 0x80 == 0 {
            if i > 0 && byte == 0 {
                return Err(FormatError::NonMinimalVarint);
            }
            return Ok((value, i + 1));
        }
    }
    if input.len() < MAX_BYTES {
        Err(FormatError::Truncated)
    } else {
        Err(FormatError::VarintOverflow)
    }
}

/// Cursor over a byte slice for reading varint-framed structures.
#[derive(Debug, Clone)]
pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn is_empty(&self) -> bool {
        self.pos >= self.buf.len()
    }

    pub fn remaining(&self) -> &'a [u8] {
        &self.buf[self.pos..]
    }

    pub fn varint(&mut self) -> Result<u64, FormatError> {
        let (v, n) = decode(self.remaining())?;
        self.pos += n;
        Ok(v)
    }

    pub fn varint_u64(&mut self) -> Result<u64, FormatError> {
        let (v, n) = decode_u64(self.remaining())?;
        self.pos += n;
        Ok(v)
    }

    pub fn byte(&mut self) -> Result<u8, FormatError> {
        let b = *self.buf.get(self.pos).ok_or(FormatError::Truncated)?;
        self.pos += 1;
        Ok(b)
    }

    pub fn bytes(&mut self, len: usize) -> Result<&'a [u8], FormatError> {
        let end = self.pos.checked_add(len).ok_or(FormatError::Truncated)?;
        let out = self.buf.get(self.pos..end).ok_or(FormatError::Truncated)?;
        self.pos = end;
        Ok(out)
    }

    /// Reads a varint length followed by that many bytes.
    pub fn prefixed(&mut self) -> Result<&'a [u8], FormatError> {
        let len = self.varint()? as usize;
        self.bytes(len)
    }
}

pub fn write_prefixed(bytes: &[u8], out: &mut Vec<u8>) {
    encode(bytes.len() as u64, out);
    out.extend_from_slice(bytes);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_values_are_single_bytes() {
        assert_eq!(to_vec(0), vec![0]);
        assert_eq!(to_vec(0x7f), vec![0x7f]);
        assert_eq!(to_vec(0x80), vec![0x80, 0x01]);
        assert_eq!(to_vec(300), vec![0xac, 0x02]);
    }

    #[test]
    fn rejects_fifth_byte_and_non_minimal() {
        assert_eq!(decode(&[0x80, 0x80, 0x80, 0x80, 0x01]), Err(FormatError::VarintOverflow));
        assert_eq!(decode(&[0x80, 0x00]), Err(FormatError::NonMinimalVarint));
        assert_eq!(decode(&[0x80]), Err(FormatError::Truncated));
        assert_eq!(decode(&to_vec(MAX_VARINT)), Ok((MAX_VARINT, 4)));
    }

    #[test]
    fn long_varints() {
        for v in [0u64, 1, 1 << 28, 1 << 40, u64::MAX] {
            let mut out = Vec::new();
            encode_u64(v, &mut out);
            assert_eq!(decode_u64(&out), Ok((v, out.len())));
        }
    }
}
