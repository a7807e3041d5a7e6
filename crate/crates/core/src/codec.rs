//! Little-endian primitives shared by the on-disk formats.
//!
//! Every file starts with an 8-byte magic and a `u32` version. Strings are
//! `u32` length + UTF-8 bytes. Files are written to a temporary sibling and
//! renamed into place, so an aborted write never leaves a partial file.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use tempfile::NamedTempFile;

use crate::error::{Error, Result};

pub(crate) struct Encoder<W: Write> {
    out: W,
}

impl<W: Write> Encoder<W> {
    pub fn new(out: W) -> Self {
        Encoder { out }
    }

    pub fn header(&mut self, magic: &[u8; 8], version: u32) -> io::Result<()> {
        self.out.write_all(magic)?;
        self.u32(version)
    }

    pub fn u8(&mut self, v: u8) -> io::Result<()> {
        self.out.write_all(&[v])
    }

    pub fn u32(&mut self, v: u32) -> io::Result<()> {
        self.out.write_all(&v.to_le_bytes())
    }

    pub fn u64(&mut self, v: u64) -> io::Result<()> {
        self.out.write_all(&v.to_le_bytes())
    }

    pub fn f32(&mut self, v: f32) -> io::Result<()> {
        self.out.write_all(&v.to_le_bytes())
    }

    pub fn f64(&mut self, v: f64) -> io::Result<()> {
        self.out.write_all(&v.to_le_bytes())
    }

    pub fn len(&mut self, n: usize) -> io::Result<()> {
        let n = u64::try_from(n).map_err(|_| io::Error::other("length overflow"))?;
        self.u64(n)
    }

    pub fn str(&mut self, s: &str) -> io::Result<()> {
        let n = u32::try_from(s.len()).map_err(|_| io::Error::other("string longer than 4 GiB"))?;
        self.u32(n)?;
        self.out.write_all(s.as_bytes())
    }

    pub fn opt_str(&mut self, s: Option<&str>) -> io::Result<()> {
        match s {
            Some(s) => {
                self.u8(1)?;
                self.str(s)
            }
            None => self.u8(0),
        }
    }

    pub fn finish(self) -> W {
        self.out
    }
}

pub(crate) struct Decoder<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Decoder { buf, pos: 0 }
    }

    /// Checks magic and returns the stored version.
    pub fn header(&mut self, magic: &[u8; 8], supported: u32) -> Result<u32> {
        let found = self.take(8)?;
        if found != magic {
            return Err(Error::corrupt(format!(
                "bad magic: expected {:?}",
                String::from_utf8_lossy(magic)
            )));
        }
        let version = self.u32()?;
        if version != supported {
            return Err(Error::corrupt(format!("unsupported version {version} (this build reads {supported})")));
        }
        Ok(version)
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::corrupt(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("slice length checked"))
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

    pub fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.array()?))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    /// A length prefix, bounded by the bytes left so a corrupt count cannot
    /// trigger a huge allocation.
    pub fn len(&mut self, min_item_bytes: usize) -> Result<usize> {
        let n = usize::try_from(self.u64()?).map_err(|_| Error::corrupt("length overflow"))?;
        if n.saturating_mul(min_item_bytes.max(1)) > self.buf.len() - self.pos {
            return Err(Error::corrupt(format!("length {n} exceeds remaining data at byte {}", self.pos)));
        }
        Ok(n)
    }

    pub fn str(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        let bytes = self.take(n)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| Error::corrupt("invalid UTF-8 in string"))
    }

    pub fn opt_str(&mut self) -> Result<Option<String>> {
        match self.u8()? {
            0 => Ok(None),
            1 => self.str().map(Some),
            t => Err(Error::corrupt(format!("bad option tag {t}"))),
        }
    }

    pub fn finish(self) -> Result<()> {
        if self.pos == self.buf.len() {
            Ok(())
        } else {
            Err(Error::corrupt(format!("{} trailing bytes", self.buf.len() - self.pos)))
        }
    }
}

/// Writes a file atomically: `body` fills a temp file in the target
/// directory, which is renamed over `path` only on success.
pub(crate) fn write_atomic<F>(path: &Path, body: F) -> Result<()>
where
    F: FnOnce(&mut Encoder<BufWriter<&mut fs::File>>) -> Result<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = NamedTempFile::new_in(dir)?;
    {
        let mut enc = Encoder::new(BufWriter::new(tmp.as_file_mut()));
        body(&mut enc)?;
        enc.finish().flush()?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}
