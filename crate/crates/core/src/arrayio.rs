//! Little-endian binary container for named arrays, with a plain-text index
//! sidecar. Layout: magic `MVRA`, `u32` version, `u32` count, then for each
//! array `u32` name length, name bytes, `u8` dtype (0 = f64, 1 = f32), `u32`
//! rank, `u64` dims and the raw values.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::{Array, Real};

const MAGIC: &[u8; 4] = b"MVRA";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ArrayIoError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("corrupt array file: {0}")]
    Format(String),
}

fn fmt_err<T>(m: impl Into<String>) -> Result<T, ArrayIoError> {
    Err(ArrayIoError::Format(m.into()))
}

#[cfg(not(feature = "f32"))]
const DTYPE: u8 = 0;
#[cfg(feature = "f32")]
const DTYPE: u8 = 1;

pub fn encode(arrays: &[(String, Array)]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(arrays.len() as u32).to_le_bytes());
    for (name, a) in arrays {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(DTYPE);
        out.extend_from_slice(&(a.ndim() as u32).to_le_bytes());
        for &d in a.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &x in a.data() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ArrayIoError> {
        if self.pos + n > self.buf.len() {
            return fmt_err(format!("truncated at byte {}", self.pos));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32, ArrayIoError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64, ArrayIoError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode(buf: &[u8]) -> Result<Vec<(String, Array)>, ArrayIoError> {
    let mut c = Cursor { buf, pos: 0 };
    if c.take(4)? != MAGIC {
        return fmt_err("bad magic");
    }
    let version = c.u32()?;
    if version != VERSION {
        return fmt_err(format!("unsupported version {version}"));
    }
    let count = c.u32()? as usize;
    let mut arrays = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let nlen = c.u32()? as usize;
        let name = String::from_utf8(c.take(nlen)?.to_vec()).map_err(|_| ArrayIoError::Format("non-utf8 name".into()))?;
        let dtype = c.take(1)?[0];
        let ndim = c.u32()? as usize;
        if ndim > 16 {
            return fmt_err(format!("array {name}: rank {ndim} too large"));
        }
        let shape = (0..ndim).map(|_| c.u64().map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
        let n = shape.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
        let Some(n) = n else { return fmt_err(format!("array {name}: size overflow")) };
        let data: Vec<Real> = match dtype {
            0 => c.take(n.saturating_mul(8))?
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().unwrap()) as Real)
                .collect(),
            1 => c.take(n.saturating_mul(4))?
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as Real)
                .collect(),
            d => return fmt_err(format!("array {name}: unknown dtype {d}")),
        };
        let a = Array::new(shape, data).map_err(|e| ArrayIoError::Format(e.to_string()))?;
        arrays.push((name, a));
    }
    if c.pos != buf.len() {
        return fmt_err("trailing bytes");
    }
    Ok(arrays)
}

/// Human-readable listing: one line per array with name, dtype and shape.
pub fn index_text(arrays: &[(String, Array)]) -> String {
    let dtype = if DTYPE == 0 { "f64" } else { "f32" };
    arrays
        .iter()
        .map(|(n, a)| {
            let dims: Vec<String> = a.shape().iter().map(|d| d.to_string()).collect();
            format!("{n} {dtype} [{}]\n", dims.join(","))
        })
        .collect()
}

pub fn write_arrays(path: &Path, arrays: &[(String, Array)]) -> Result<(), ArrayIoError> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode(arrays))?;
    f.sync_all()?;
    Ok(())
}

pub fn read_arrays(path: &Path) -> Result<Vec<(String, Array)>, ArrayIoError> {
    let mut buf = Vec::new();
    fs::File::open(path)?.read_to_end(&mut buf)?;
    decode(&buf)
}

/// Looks up an array by name.
pub fn find<'a>(arrays: &'a [(String, Array)], name: &str) -> Option<&'a Array> {
    arrays.iter().find(|(n, _)| n == name).map(|(_, a)| a)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let arrays = vec![
            ("w".to_string(), Array::new(vec![2, 3], vec![0.1, -2.5, 1e-300, 3.0, Real::MAX, 0.0]).unwrap()),
            ("s".to_string(), Array::scalar(7.25)),
        ];
        let back = decode(&encode(&arrays)).unwrap();
        assert_eq!(back, arrays);
        assert!(index_text(&arrays).contains("w f64 [2,3]"));
    }

    #[test]
    fn rejects_corruption() {
        let mut b = encode(&[("a".into(), Array::zeros(&[4]))]);
        assert!(decode(&b[..b.len() - 1]).is_err());
        b[0] = b'X';
        assert!(decode(&b).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.bin");
        let arrays = vec![("a".to_string(), Array::full(&[2, 2], 1.5))];
        write_arrays(&p, &arrays).unwrap();
        assert_eq!(read_arrays(&p).unwrap(), arrays);
    }
}
