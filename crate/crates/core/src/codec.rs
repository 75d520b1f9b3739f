//! Little-endian byte encoding shared by the binary snapshot formats.

use alloc::string::String;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DecodeError {
    #[error("bad magic at offset {offset}: expected {expected:?}")]
    BadMagic { offset: usize, expected: &'static str },
    #[error("unsupported format version {found} at offset {offset} (this build reads version {supported})")]
    UnsupportedVersion { offset: usize, found: u32, supported: u32 },
    #[error("truncated input at offset {offset}: needed {needed} more bytes")]
    Truncated { offset: usize, needed: usize },
    #[error("invalid data at offset {offset}: {reason}")]
    Invalid { offset: usize, reason: String },
}

#[derive(Debug, Default)]
pub struct ByteWriter {
    buf: Vec<u8>,
}

impl ByteWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn str(&mut self, s: &str) {
        self.u64(s.len() as u64);
        self.bytes(s.as_bytes());
    }

    pub fn f64s(&mut self, xs: &[f64]) {
        self.u64(xs.len() as u64);
        for &x in xs {
            self.f64(x);
        }
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

pub struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        ByteReader { buf, pos: 0 }
    }

    pub fn offset(&self) -> usize {
        self.pos
    }

    pub fn is_empty(&self) -> bool {
        self.pos >= self.buf.len()
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        let remaining = self.buf.len() - self.pos;
        if n > remaining {
            return Err(DecodeError::Truncated { offset: self.pos, needed: n - remaining });
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn magic(&mut self, expected: &'static str) -> Result<(), DecodeError> {
        let offset = self.pos;
        let got = self.take(expected.len()).map_err(|_| DecodeError::BadMagic { offset, expected })?;
        if got != expected.as_bytes() {
            return Err(DecodeError::BadMagic { offset, expected });
        }
        Ok(())
    }

    pub fn version(&mut self, supported: u32) -> Result<(), DecodeError> {
        let offset = self.pos;
        let found = self.u32()?;
        if found != supported {
            return Err(DecodeError::UnsupportedVersion { offset, found, supported });
        }
        Ok(())
    }

    pub fn u32(&mut self) -> Result<u32, DecodeError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub fn u64(&mut self) -> Result<u64, DecodeError> {
        let b = self.take(8)?;
        let mut a = [0u8; 8];
        a.copy_from_slice(b);
        Ok(u64::from_le_bytes(a))
    }

    /// A length prefix that must fit in the remaining input at `min_item` bytes per element.
    pub fn len(&mut self, min_item: usize) -> Result<usize, DecodeError> {
        let offset = self.pos;
        let n = self.u64()?;
        let remaining = (self.buf.len() - self.pos) as u64;
        if n.saturating_mul(min_item as u64) > remaining {
            return Err(DecodeError::Truncated {
                offset,
                needed: (n.saturating_mul(min_item as u64) - remaining) as usize,
            });
        }
        Ok(n as usize)
    }

    pub fn f64(&mut self) -> Result<f64, DecodeError> {
        let b = self.take(8)?;
        let mut a = [0u8; 8];
        a.copy_from_slice(b);
        Ok(f64::from_le_bytes(a))
    }

    pub fn str(&mut self) -> Result<String, DecodeError> {
        let n = self.len(1)?;
        let offset = self.pos;
        let b = self.take(n)?;
        core::str::from_utf8(b)
            .map(String::from)
            .map_err(|_| DecodeError::Invalid { offset, reason: "string is not UTF-8".into() })
    }

    pub fn f64s(&mut self) -> Result<Vec<f64>, DecodeError> {
        let n = self.len(8)?;
        (0..n).map(|_| self.f64()).collect()
    }

    pub fn invalid(&self, reason: impl Into<String>) -> DecodeError {
        DecodeError::Invalid { offset: self.pos, reason: reason.into() }
    }
}
