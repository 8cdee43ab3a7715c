//! Byte-level reader/writer helpers shared by the VOXG, PGEN and PEGC file
//! formats, plus atomic file output.

use crate::error::{Error, Result};
use std::io::Write;
use std::path::Path;

/// Sequential reader that tracks its offset so corrupt files can be reported
/// with the first invalid byte position.
pub struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    format: &'static str,
}

impl<'a> Cursor<'a> {
    pub fn new(bytes: &'a [u8], format: &'static str) -> Self {
        Cursor {
            bytes,
            pos: 0,
            format,
        }
    }

    pub fn offset(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    pub fn corrupt(&self, message: impl Into<String>) -> Error {
        Error::CorruptFile {
            format: self.format,
            offset: self.pos,
            message: message.into(),
        }
    }

    pub fn corrupt_at(&self, offset: usize, message: impl Into<String>) -> Error {
        Error::CorruptFile {
            format: self.format,
            offset,
            message: message.into(),
        }
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(self.corrupt(format!(
                "truncated: need {n} more bytes, have {}",
                self.remaining()
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u16_le(&mut self) -> Result<u16> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    pub fn u32_le(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub fn u64_le(&mut self) -> Result<u64> {
        let b = self.take(8)?;
        Ok(u64::from_le_bytes(b.try_into().unwrap()))
    }

    pub fn f32_le(&mut self) -> Result<f32> {
        let b = self.take(4)?;
        Ok(f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub fn expect_magic(&mut self, magic: &[u8]) -> Result<()> {
        let start = self.pos;
        let got = self.take(magic.len())?;
        if got != magic {
            return Err(self.corrupt_at(
                start,
                format!("bad magic: expected {magic:?}, got {got:?}"),
            ));
        }
        Ok(())
    }

    pub fn expect_end(&self) -> Result<()> {
        if self.remaining() != 0 {
            return Err(self.corrupt(format!("{} trailing bytes", self.remaining())));
        }
        Ok(())
    }
}

/// Little-endian writer counterpart of [`Cursor`].
#[derive(Default)]
pub struct Builder {
    bytes: Vec<u8>,
}

impl Builder {
    pub fn new() -> Self {
        Builder::default()
    }

    pub fn raw(&mut self, b: &[u8]) -> &mut Self {
        self.bytes.extend_from_slice(b);
        self
    }

    pub fn u8(&mut self, v: u8) -> &mut Self {
        self.bytes.push(v);
        self
    }

    pub fn u16_le(&mut self, v: u16) -> &mut Self {
        self.raw(&v.to_le_bytes())
    }

    pub fn u32_le(&mut self, v: u32) -> &mut Self {
        self.raw(&v.to_le_bytes())
    }

    pub fn u64_le(&mut self, v: u64) -> &mut Self {
        self.raw(&v.to_le_bytes())
    }

    pub fn f32_le(&mut self, v: f32) -> &mut Self {
        self.raw(&v.to_le_bytes())
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.bytes
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }
}

/// Writes `bytes` to `path` via a temp file in the same directory followed by
/// a rename, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let stem = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".to_string());
    let tmp = dir.join(format!(".{stem}.tmp-{}", std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_scalars() {
        let mut b = Builder::new();
        b.u8(7).u16_le(513).u32_le(70_000).u64_le(1 << 40).f32_le(1.5);
        let bytes = b.into_bytes();
        let mut c = Cursor::new(&bytes, "TEST");
        assert_eq!(c.u8().unwrap(), 7);
        assert_eq!(c.u16_le().unwrap(), 513);
        assert_eq!(c.u32_le().unwrap(), 70_000);
        assert_eq!(c.u64_le().unwrap(), 1 << 40);
        assert_eq!(c.f32_le().unwrap(), 1.5);
        c.expect_end().unwrap();
    }

    #[test]
    fn truncation_reports_offset() {
        let bytes = [1u8, 2];
        let mut c = Cursor::new(&bytes, "TEST");
        let err = c.u32_le().unwrap_err();
        match err {
            Error::CorruptFile { offset, .. } => assert_eq!(offset, 0),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn bad_magic_reports_start_offset() {
        let bytes = *b"XXXX";
        let mut c = Cursor::new(&bytes, "TEST");
        let err = c.expect_magic(b"VOXG").unwrap_err();
        match err {
            Error::CorruptFile { offset, .. } => assert_eq!(offset, 0),
            other => panic!("unexpected error {other:?}"),
        }
    }
}
