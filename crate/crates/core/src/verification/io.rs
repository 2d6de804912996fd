use std::fmt::Write as _;
use std::io::Read;
use std::path::{Path, PathBuf};

use super::metrics::{FoldResult, RocCurve};
use crate::error::{Error, Result};

pub const EMBEDDING_MAGIC: &[u8; 4] = b"DVEM";
pub const EMBEDDING_VERSION: u32 = 1;

/// `count × dim` row-major embedding matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    pub dim: usize,
    pub rows: Vec<f32>,
}

impl EmbeddingStore {
    pub fn new(dim: usize, rows: Vec<f32>) -> Result<Self> {
        if dim == 0 || rows.len() % dim != 0 {
            return Err(Error::shape("embedding store", format!("{} values are not rows of {dim}", rows.len())));
        }
        Ok(Self { dim, rows })
    }

    pub fn count(&self) -> usize {
        self.rows.len() / self.dim
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    /// `DVEM`, u32 version, u64 count, u64 dim, then f32 rows; little-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(24 + self.rows.len() * 4);
        out.extend_from_slice(EMBEDDING_MAGIC);
        out.extend_from_slice(&EMBEDDING_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.count() as u64).to_le_bytes());
        out.extend_from_slice(&(self.dim as u64).to_le_bytes());
        for v in &self.rows {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |d: &str| Error::format("embedding store", d.to_string());
        if bytes.len() < 24 {
            return Err(bad("header truncated"));
        }
        if &bytes[..4] != EMBEDDING_MAGIC {
            return Err(bad("bad magic"));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != EMBEDDING_VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let count = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let dim = u64::from_le_bytes(bytes[16..24].try_into().expect("8 bytes")) as usize;
        let expected = count.checked_mul(dim).and_then(|n| n.checked_mul(4)).ok_or_else(|| bad("size overflow"))?;
        let body = &bytes[24..];
        if body.len() != expected {
            return Err(bad(&format!("expected {expected} payload bytes, found {}", body.len())));
        }
        if dim == 0 {
            return Err(bad("zero dimension"));
        }
        let rows = body.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
        Ok(Self { dim, rows })
    }
}

pub fn write_embedding_store(path: &Path, store: &EmbeddingStore) -> Result<()> {
    crate::tensor_core::write_atomic(path, &store.to_bytes())
}

pub fn read_embedding_store(path: &Path) -> Result<EmbeddingStore> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    EmbeddingStore::from_bytes(&bytes)
}

/// Sidecar line `row_index image_path identity_label`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRow {
    pub row: usize,
    pub image_path: PathBuf,
    pub identity: String,
}

pub fn write_embedding_manifest(rows: &[ManifestRow]) -> String {
    let mut out = String::new();
    for r in rows {
        writeln!(out, "{} {} {}", r.row, r.image_path.display(), r.identity).expect("writing to a String");
    }
    out
}

pub fn parse_embedding_manifest(text: &str) -> Result<Vec<ManifestRow>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |d: String| Error::format("embedding manifest", format!("line {}: {d}", i + 1));
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(bad(format!("expected 3 fields, found {}", fields.len())));
        }
        let row = fields[0].parse().map_err(|_| bad(format!("bad row index {:?}", fields[0])))?;
        out.push(ManifestRow { row, image_path: PathBuf::from(fields[1]), identity: fields[2].to_string() });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairEntry {
    pub a: PathBuf,
    pub b: PathBuf,
    pub genuine: bool,
}

/// `path_a,path_b,label` with label 0 or 1.
pub fn parse_pair_list(text: &str) -> Result<Vec<PairEntry>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |d: String| Error::format("pair list", format!("line {}: {d}", i + 1));
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(bad(format!("expected 3 comma-separated fields, found {}", fields.len())));
        }
        let genuine = match fields[2] {
            "1" => true,
            "0" => false,
            other => return Err(bad(format!("label must be 0 or 1, got {other:?}"))),
        };
        out.push(PairEntry { a: PathBuf::from(fields[0]), b: PathBuf::from(fields[1]), genuine });
    }
    Ok(out)
}

/// One fold per non-empty line, whitespace-separated pair indices.
pub fn parse_fold_file(text: &str) -> Result<Vec<Vec<usize>>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, l)| {
            l.split_whitespace()
                .map(|t| t.parse().map_err(|_| Error::format("fold file", format!("line {}: bad index {t:?}", i + 1))))
                .collect()
        })
        .collect()
}

/// `far\ttar\tthreshold` rows with a header.
pub fn roc_to_tsv(curve: &RocCurve) -> String {
    let mut out = String::from("far\ttar\tthreshold\n");
    for p in &curve.points {
        writeln!(out, "{}\t{}\t{}", p.far, p.tar, p.threshold).expect("writing to a String");
    }
    out
}

/// Tab-separated `metric value` table.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub rows: Vec<(String, String)>,
}

impl Report {
    pub fn push(&mut self, metric: impl Into<String>, value: impl ToString) {
        self.rows.push((metric.into(), value.to_string()));
    }

    pub fn push_folds(&mut self, folds: &FoldResult) {
        for (i, (acc, t)) in folds.accuracies.iter().zip(&folds.thresholds).enumerate() {
            self.push(format!("fold{}_accuracy", i + 1), acc);
            self.push(format!("fold{}_threshold", i + 1), t);
        }
        self.push("accuracy_mean", folds.mean);
        self.push("accuracy_std", folds.std);
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("metric\tvalue\n");
        for (k, v) in &self.rows {
            writeln!(out, "{k}\t{v}").expect("writing to a String");
        }
        out
    }
}
