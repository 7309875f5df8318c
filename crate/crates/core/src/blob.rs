//! Binary container shared by corpus streams and checkpoints.
//!
//! Every file starts with the ASCII magic `AVLM` and a little-endian `u32`
//! version (currently 1). A single-matrix blob then holds `u32 rows`,
//! `u32 cols` and `rows * cols` little-endian `f64` values, row-major. A named
//! container holds `u32 count` followed, per entry, by `u32 name_len`, the UTF-8
//! name, and the same `rows, cols, values` layout.

use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::Matrix;

pub const MAGIC: &[u8; 4] = b"AVLM";
pub const VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_matrix(out: &mut Vec<u8>, m: &Matrix) {
    put_u32(out, m.rows() as u32);
    put_u32(out, m.cols() as u32);
    for v in m.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn header() -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, VERSION);
    out
}

pub fn encode_matrix(m: &Matrix) -> Vec<u8> {
    let mut out = header();
    out.reserve(8 + 8 * m.data().len());
    put_matrix(&mut out, m);
    out
}

pub fn encode_named(entries: &[(String, &Matrix)]) -> Vec<u8> {
    let mut out = header();
    put_u32(&mut out, entries.len() as u32);
    for (name, m) in entries {
        put_u32(&mut out, name.len() as u32);
        out.extend_from_slice(name.as_bytes());
        put_matrix(&mut out, m);
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn fail(&self, reason: impl Into<String>) -> Error {
        Error::Format {
            path: self.path.to_path_buf(),
            offset: self.pos,
            reason: reason.into(),
        }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.fail(format!("truncated {what}")));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().unwrap()))
    }

    fn header(&mut self) -> Result<()> {
        let magic = self.take(4, "magic")?;
        if magic != MAGIC {
            self.pos = 0;
            return Err(self.fail("bad magic"));
        }
        let version = self.u32("version")?;
        if version != VERSION {
            self.pos -= 4;
            return Err(self.fail(format!("unsupported version {version}")));
        }
        Ok(())
    }

    fn matrix(&mut self) -> Result<Matrix> {
        let rows = self.u32("rows")? as usize;
        let cols = self.u32("cols")? as usize;
        let n = rows
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(8))
            .ok_or_else(|| self.fail("matrix size overflow"))?;
        let raw = self.take(n, "matrix data")?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Matrix::from_vec(rows, cols, data)
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(self.fail(format!("{} trailing bytes", self.bytes.len() - self.pos)));
        }
        Ok(())
    }
}

pub fn decode_matrix(bytes: &[u8], path: &Path) -> Result<Matrix> {
    let mut r = Reader { bytes, pos: 0, path };
    r.header()?;
    let m = r.matrix()?;
    r.finish()?;
    Ok(m)
}

pub fn decode_named(bytes: &[u8], path: &Path) -> Result<Vec<(String, Matrix)>> {
    let mut r = Reader { bytes, pos: 0, path };
    r.header()?;
    let count = r.u32("entry count")?;
    let mut out = Vec::new();
    for _ in 0..count {
        let len = r.u32("name length")? as usize;
        let raw = r.take(len, "name")?;
        let name = std::str::from_utf8(raw)
            .map_err(|_| r.fail("name is not UTF-8"))?
            .to_string();
        out.push((name, r.matrix()?));
    }
    r.finish()?;
    Ok(out)
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_bit_exact() {
        let m = Matrix::from_vec(1, 2, vec![1.0, -0.5]).unwrap();
        let bytes = encode_matrix(&m);
        let mut expect = b"AVLM".to_vec();
        expect.extend_from_slice(&[1, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0]);
        expect.extend_from_slice(&1.0f64.to_le_bytes());
        expect.extend_from_slice(&(-0.5f64).to_le_bytes());
        assert_eq!(bytes, expect);
        assert_eq!(decode_matrix(&bytes, Path::new("x")).unwrap(), m);
    }

    #[test]
    fn errors_carry_offsets() {
        let m = Matrix::zeros(2, 2);
        let mut bytes = encode_matrix(&m);
        bytes[0] = b'X';
        let err = decode_matrix(&bytes, Path::new("x")).unwrap_err().to_string();
        assert!(err.contains("bad magic") && err.contains("offset 0"), "{err}");

        let bytes = encode_matrix(&m);
        let err = decode_matrix(&bytes[..bytes.len() - 3], Path::new("x")).unwrap_err().to_string();
        assert!(err.contains("truncated") && err.contains("offset 16"), "{err}");

        let mut bytes = encode_matrix(&m);
        bytes[4] = 9;
        let err = decode_matrix(&bytes, Path::new("x")).unwrap_err().to_string();
        assert!(err.contains("version 9"), "{err}");
    }

    #[test]
    fn named_round_trip() {
        let a = Matrix::filled(2, 3, 0.25);
        let b = Matrix::identity(2);
        let bytes = encode_named(&[("a".into(), &a), ("bee".into(), &b)]);
        let back = decode_named(&bytes, Path::new("x")).unwrap();
        assert_eq!(back, vec![("a".to_string(), a), ("bee".to_string(), b)]);
    }
}
