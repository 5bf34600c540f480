use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::data::{Dataset, FeatureMatrix, GrayImage};
use crate::error::{Error, Result};

pub const DEFAULT_EMBEDDING_DIM: usize = 128;

/// Per-scan embedding vectors of one common dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    ids: Vec<String>,
    vectors: Vec<Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize, entries: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut ids = Vec::with_capacity(entries.len());
        let mut vectors = Vec::with_capacity(entries.len());
        for (row, (id, v)) in entries.into_iter().enumerate() {
            if v.len() != dim {
                return Err(Error::RaggedEmbedding {
                    row: row + 1,
                    expected: dim,
                    actual: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidParameter(format!("non-finite embedding value for {id}")));
            }
            if !seen.insert(id.clone()) {
                return Err(Error::DuplicateScanId { scan_id: id, row: row + 1 });
            }
            ids.push(id);
            vectors.push(v);
        }
        Ok(EmbeddingTable { dim, ids, vectors })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn get(&self, scan_id: &str) -> Option<&[f64]> {
        self.ids.iter().position(|i| i == scan_id).map(|k| self.vectors[k].as_slice())
    }

    /// Adds a column; `values` follow [`ids`](Self::ids) order.
    pub fn with_extra_dimension(&self, values: &[f64]) -> Result<Self> {
        if values.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                actual: values.len(),
            });
        }
        let entries = self
            .ids
            .iter()
            .zip(&self.vectors)
            .zip(values)
            .map(|((id, v), x)| {
                let mut v = v.clone();
                v.push(*x);
                (id.clone(), v)
            })
            .collect();
        EmbeddingTable::new(self.dim + 1, entries)
    }

    /// Matrix with columns `emb.0..` and rows in `scan_ids` order.
    pub fn to_matrix(&self, scan_ids: &[String]) -> Result<FeatureMatrix> {
        let index: HashMap<&str, usize> = self.ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let rows = scan_ids
            .iter()
            .map(|id| {
                index
                    .get(id.as_str())
                    .map(|&k| self.vectors[k].clone())
                    .ok_or_else(|| Error::MissingEmbedding(id.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        let names = (0..self.dim).map(|k| format!("emb.{k}")).collect();
        FeatureMatrix::from_rows(scan_ids.to_vec(), names, rows)
    }

    /// One line per scan: `scan_id,v0,v1,...`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (id, v) in self.ids.iter().zip(&self.vectors) {
            out.push_str(id);
            for x in v {
                let _ = write!(out, ",{x}");
            }
            out.push('\n');
        }
        out
    }
}

/// Reads `scan_id,v0,...` lines (comma or whitespace separated). Blank lines,
/// `#` comments and a leading `scan_id` header are skipped. Row numbers in
/// errors are file line numbers.
pub fn load_embeddings(path: &Path, expected_dim: usize) -> Result<EmbeddingTable> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        let row = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("scan_id") {
            continue;
        }
        let mut tokens = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty());
        let id = tokens.next().unwrap_or_default().to_string();
        let values = tokens
            .map(|t| match t.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::MalformedRow {
                    path: path.to_path_buf(),
                    row,
                    reason: format!("bad embedding value {t:?}"),
                }),
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != expected_dim {
            return Err(Error::RaggedEmbedding {
                row,
                expected: expected_dim,
                actual: values.len(),
            });
        }
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateScanId { scan_id: id, row });
        }
        entries.push((id, values));
    }
    if entries.is_empty() {
        return Err(Error::EmptyInput("embedding file"));
    }
    EmbeddingTable::new(expected_dim, entries)
}

/// 2×2 block mean; an odd last row or column is dropped.
fn downsample(image: &GrayImage) -> Vec<f64> {
    let (w, h) = (image.width() / 2, image.height() / 2);
    let mut out = Vec::with_capacity(w * h);
    for r in 0..h {
        for c in 0..w {
            let s = image.get(2 * r, 2 * c)
                + image.get(2 * r, 2 * c + 1)
                + image.get(2 * r + 1, 2 * c)
                + image.get(2 * r + 1, 2 * c + 1);
            out.push(s / (4.0 * 255.0));
        }
    }
    out
}

/// Deterministic placeholder for a CNN feature extractor: each image is
/// halved in both axes and multiplied by a fixed Gaussian projection.
pub fn standin_embedder(dataset: &Dataset, dim: usize, seed: u64) -> Result<EmbeddingTable> {
    let first = dataset.records().first().ok_or(Error::EmptyInput("dataset"))?;
    let (w, h) = (first.scan.image().width(), first.scan.image().height());
    if dim == 0 {
        return Err(Error::InvalidParameter("embedding dimension must be >= 1".into()));
    }
    if let Some(r) = dataset
        .records()
        .iter()
        .find(|r| r.scan.image().width() != w || r.scan.image().height() != h)
    {
        return Err(Error::InvalidImage(format!(
            "{}: stand-in embedder needs uniform image size {w}x{h}",
            r.scan_id
        )));
    }
    let d = (w / 2) * (h / 2);
    let scale = 1.0 / (d as f64).sqrt();
    let projection: Vec<Vec<f64>> = (0..dim)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            (0..d)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    z * scale
                })
                .collect()
        })
        .collect();
    let entries = dataset
        .records()
        .par_iter()
        .map(|r| {
            let x = downsample(r.scan.image());
            let v = projection
                .iter()
                .map(|p| p.iter().zip(&x).map(|(a, b)| a * b).sum())
                .collect();
            (r.scan_id.clone(), v)
        })
        .collect();
    EmbeddingTable::new(dim, entries)
}
