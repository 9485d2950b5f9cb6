//! Binary embedding file format.
//!
//! Little-endian layout:
//!
//! ```text
//! offset  size      field
//! 0       4         magic "MALE"
//! 4       4         version (u32) = 1
//! 8       8         N (u64)
//! 16      4         d (u32)
//! 20      4         K_classes (u32)
//! 24      4*N*d     features, f32, row-major
//! ..      4*N       labels, i32, -1 = unknown
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::data::EmbeddingDataset;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"MALE";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 24;

/// Fixed-size file header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Header {
    pub version: u32,
    pub n: u64,
    pub dim: u32,
    pub k_classes: u32,
}

impl Header {
    pub fn payload_len(&self) -> Option<u64> {
        let features = self.n.checked_mul(self.dim as u64)?.checked_mul(4)?;
        features.checked_add(self.n.checked_mul(4)?)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, len: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let out = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(out)
            }
            None => Err(Error::format(
                self.bytes.len() as u64,
                format!("truncated while reading {what} starting at byte {}", self.pos),
            )),
        }
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

fn parse_header(cur: &mut Cursor<'_>) -> Result<Header> {
    let magic = cur.take(4, "magic")?;
    if magic != MAGIC {
        return Err(Error::format(
            0,
            format!("bad magic {:?}, expected \"MALE\"", String::from_utf8_lossy(magic)),
        ));
    }
    let version = cur.u32("version")?;
    if version != VERSION {
        return Err(Error::format(4, format!("unsupported version {version}")));
    }
    let n = cur.u64("sample count")?;
    let dim = cur.u32("dimension")?;
    let k_classes = cur.u32("class count")?;
    if n == 0 {
        return Err(Error::format(8, "sample count must be at least 1"));
    }
    if dim == 0 {
        return Err(Error::format(16, "dimension must be at least 1"));
    }
    if k_classes == 0 {
        return Err(Error::format(20, "class count must be at least 1"));
    }
    Ok(Header {
        version,
        n,
        dim,
        k_classes,
    })
}

pub fn decode_header(bytes: &[u8]) -> Result<Header> {
    parse_header(&mut Cursor { bytes, pos: 0 })
}

pub fn decode(bytes: &[u8]) -> Result<EmbeddingDataset> {
    let mut cur = Cursor { bytes, pos: 0 };
    let header = parse_header(&mut cur)?;
    let expected = header
        .payload_len()
        .and_then(|p| p.checked_add(HEADER_LEN as u64))
        .ok_or_else(|| Error::format(8, "header sizes overflow"))?;
    if (bytes.len() as u64) < expected {
        return Err(Error::format(
            bytes.len() as u64,
            format!("truncated payload: header implies {expected} bytes"),
        ));
    }
    if (bytes.len() as u64) > expected {
        return Err(Error::format(expected, "trailing bytes after label block"));
    }
    let n = header.n as usize;
    let dim = header.dim as usize;
    let k = header.k_classes as usize;

    let feature_bytes = cur.take(n * dim * 4, "features")?;
    let features = feature_bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();

    let label_start = cur.pos;
    let label_bytes = cur.take(n * 4, "labels")?;
    let mut labels = Vec::with_capacity(n);
    for (i, c) in label_bytes.chunks_exact(4).enumerate() {
        let raw = i32::from_le_bytes(c.try_into().unwrap());
        let offset = (label_start + 4 * i) as u64;
        labels.push(match raw {
            -1 => None,
            l if l >= 0 && (l as usize) < k => Some(l as usize),
            l => {
                return Err(Error::format(
                    offset,
                    format!("label {l} of sample {i} outside [-1, {k})"),
                ))
            }
        });
    }
    EmbeddingDataset::new(features, dim, labels, k)
}

pub fn encode(dataset: &EmbeddingDataset) -> Vec<u8> {
    let n = dataset.len();
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * n * (dataset.dim() + 1));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&(dataset.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(dataset.k_classes() as u32).to_le_bytes());
    for x in dataset.features() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    for l in dataset.labels() {
        let raw: i32 = l.map_or(-1, |c| c as i32);
        out.extend_from_slice(&raw.to_le_bytes());
    }
    out
}

pub fn read_embedding_file(path: impl AsRef<Path>) -> Result<EmbeddingDataset> {
    decode(&fs::read(path)?)
}

pub fn read_header(path: impl AsRef<Path>) -> Result<Header> {
    let mut buf = [0u8; HEADER_LEN];
    let mut file = fs::File::open(path)?;
    let mut filled = 0;
    while filled < HEADER_LEN {
        let got = std::io::Read::read(&mut file, &mut buf[filled..])?;
        if got == 0 {
            break;
        }
        filled += got;
    }
    decode_header(&buf[..filled])
}

pub fn write_embedding_file(dataset: &EmbeddingDataset, path: impl AsRef<Path>) -> Result<()> {
    let mut file = fs::File::create(path)?;
    file.write_all(&encode(dataset))?;
    Ok(())
}
