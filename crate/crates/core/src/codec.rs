//! Little-endian byte encoding used by the proof and commitment files.

use crate::error::{Error, Result};
use crate::field::{Ext, Fp};
use crate::hash::Digest;

#[derive(Debug, Default, Clone)]
pub struct ByteWriter {
    buf: Vec<u8>,
}

impl ByteWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.buf
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn fp(&mut self, v: Fp) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn ext(&mut self, v: Ext) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn digest(&mut self, d: &Digest) {
        self.buf.extend_from_slice(d.as_bytes());
    }

    /// Length-prefixed (u64) byte string.
    pub fn blob(&mut self, b: &[u8]) {
        self.u64(b.len() as u64);
        self.bytes(b);
    }

    pub fn str(&mut self, s: &str) {
        self.blob(s.as_bytes());
    }

    pub fn fp_vec(&mut self, v: &[Fp]) {
        self.u64(v.len() as u64);
        for x in v {
            self.fp(*x);
        }
    }

    pub fn ext_vec(&mut self, v: &[Ext]) {
        self.u64(v.len() as u64);
        for x in v {
            self.ext(*x);
        }
    }
}

#[derive(Debug, Clone)]
pub struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        ByteReader { buf, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn is_exhausted(&self) -> bool {
        self.remaining() == 0
    }

    pub fn expect_end(&self, what: &str) -> Result<()> {
        if self.remaining() != 0 {
            return Err(Error::Parse(format!("{} trailing bytes after {what}", self.remaining())));
        }
        Ok(())
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::Parse(format!(
                "truncated input: need {n} bytes at offset {}, have {}",
                self.pos,
                self.remaining()
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    /// Reads a u64 length and checks it against a sanity bound.
    pub fn len_prefix(&mut self, max: usize) -> Result<usize> {
        let n = self.u64()?;
        if n > max as u64 {
            return Err(Error::Parse(format!("length {n} exceeds bound {max}")));
        }
        Ok(n as usize)
    }

    pub fn fp(&mut self) -> Result<Fp> {
        Fp::from_le_bytes(self.array()?)
    }

    pub fn ext(&mut self) -> Result<Ext> {
        Ext::from_le_bytes(self.array()?)
    }

    pub fn digest(&mut self) -> Result<Digest> {
        Ok(Digest(self.array()?))
    }

    pub fn blob(&mut self) -> Result<&'a [u8]> {
        let n = self.len_prefix(self.remaining())?;
        self.take(n)
    }

    pub fn str(&mut self) -> Result<String> {
        let b = self.blob()?;
        String::from_utf8(b.to_vec()).map_err(|e| Error::Parse(format!("invalid utf-8: {e}")))
    }

    pub fn fp_vec(&mut self) -> Result<Vec<Fp>> {
        let n = self.len_prefix(self.remaining() / 8)?;
        (0..n).map(|_| self.fp()).collect()
    }

    pub fn ext_vec(&mut self) -> Result<Vec<Ext>> {
        let n = self.len_prefix(self.remaining() / 16)?;
        (0..n).map(|_| self.ext()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_truncation() {
        let mut w = ByteWriter::new();
        w.u32(7);
        w.fp_vec(&[Fp::new(1), Fp::new(2)]);
        w.ext(Ext::new(Fp::new(3), Fp::new(4)));
        w.str("hi");
        let bytes = w.into_bytes();
        let mut r = ByteReader::new(&bytes);
        assert_eq!(r.u32().unwrap(), 7);
        assert_eq!(r.fp_vec().unwrap(), vec![Fp::new(1), Fp::new(2)]);
        assert_eq!(r.ext().unwrap(), Ext::new(Fp::new(3), Fp::new(4)));
        assert_eq!(r.str().unwrap(), "hi");
        r.expect_end("test").unwrap();

        let mut short = ByteReader::new(&bytes[..bytes.len() - 1]);
        short.u32().unwrap();
        short.fp_vec().unwrap();
        short.ext().unwrap();
        assert!(matches!(short.str(), Err(Error::Parse(_))));
    }
}
