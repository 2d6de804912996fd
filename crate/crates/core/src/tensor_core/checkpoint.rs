//! Binary parameter checkpoint.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "DVCK" | version: u32 | record*
//! record = name_len: u32 | name: utf-8 | rank: u32 | extents: u64 * rank | values: f32 * Π extents
//! ```
//!
//! Records run to end of file.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use super::Tensor;
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"DVCK";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Checkpoint {
    records: Vec<(String, Tensor<f32>)>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, tensor: Tensor<f32>) {
        self.records.push((name.into(), tensor));
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<f32>> {
        self.records.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn records(&self) -> &[(String, Tensor<f32>)] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn write_to(&self, w: &mut impl Write) -> io::Result<()> {
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        for (name, tensor) in &self.records {
            w.write_all(&(name.len() as u32).to_le_bytes())?;
            w.write_all(name.as_bytes())?;
            w.write_all(&(tensor.rank() as u32).to_le_bytes())?;
            for &d in tensor.shape() {
                w.write_all(&(d as u64).to_le_bytes())?;
            }
            let mut buf = Vec::with_capacity(tensor.len() * 4);
            for v in tensor.data() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to memory");
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = bytes;
        let mut magic = [0u8; 4];
        read_exact(&mut cur, &mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::format("checkpoint", format!("bad magic {magic:?}")));
        }
        let version = read_u32(&mut cur)?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::format("checkpoint", format!("unsupported version {version}")));
        }
        let mut records = Vec::new();
        while !cur.is_empty() {
            let name_len = read_u32(&mut cur)? as usize;
            let mut name = vec![0u8; name_len];
            read_exact(&mut cur, &mut name)?;
            let name = String::from_utf8(name)
                .map_err(|e| Error::format("checkpoint", format!("record name: {e}")))?;
            let rank = read_u32(&mut cur)? as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(read_u64(&mut cur)? as usize);
            }
            let len: usize = shape.iter().product();
            if cur.len() < len * 4 {
                return Err(Error::format("checkpoint", format!("record {name:?} truncated")));
            }
            let (raw, rest) = cur.split_at(len * 4);
            cur = rest;
            let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
            records.push((name, Tensor::new(&shape, data)?));
        }
        Ok(Self { records })
    }

    /// Writes to a sibling temp file, then renames over `path`.
    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}

/// Writes through a sibling temp file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn read_exact(cur: &mut &[u8], out: &mut [u8]) -> Result<()> {
    cur.read_exact(out).map_err(|_| Error::format("checkpoint", "unexpected end of file"))
}

fn read_u32(cur: &mut &[u8]) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(cur, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(cur: &mut &[u8]) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(cur, &mut b)?;
    Ok(u64::from_le_bytes(b))
}
