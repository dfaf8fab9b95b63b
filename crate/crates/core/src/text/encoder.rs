//! Frozen chunk encoders. The default is signed feature hashing over token
//! unigrams and bigrams; real embeddings can be supplied as a precomputed file.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::{Path, PathBuf};

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::io::open_lines;
use crate::linalg::normalize;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum EncoderConfig {
    Hash { dim: usize },
    Precomputed { path: PathBuf, dim: usize },
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig::Hash { dim: 128 }
    }
}

impl EncoderConfig {
    pub fn dim(&self) -> usize {
        match self {
            EncoderConfig::Hash { dim } | EncoderConfig::Precomputed { dim, .. } => *dim,
        }
    }

    pub fn build(&self) -> Result<Encoder> {
        match self {
            EncoderConfig::Hash { dim } => {
                if *dim == 0 {
                    return Err(Error::Config("encoder dim must be positive".into()));
                }
                Ok(Encoder::Hash(HashEncoder { dim: *dim }))
            }
            EncoderConfig::Precomputed { path, dim } => Ok(Encoder::Precomputed(PrecomputedEncoder::load(path, *dim)?)),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Encoder {
    Hash(HashEncoder),
    Precomputed(PrecomputedEncoder),
}

impl Encoder {
    pub fn dim(&self) -> usize {
        match self {
            Encoder::Hash(h) => h.dim,
            Encoder::Precomputed(p) => p.dim,
        }
    }

    pub fn fingerprint(&self) -> String {
        match self {
            Encoder::Hash(h) => format!("hash-fnv1a-uni-bi:{}", h.dim),
            Encoder::Precomputed(p) => format!("precomputed:{}:{}:{}", p.source.display(), p.dim, p.table.len()),
        }
    }

    /// Unit-norm embedding of one chunk.
    pub fn encode(&self, node_id: u64, chunk: usize, text: &str) -> Result<Array1<f64>> {
        match self {
            Encoder::Hash(h) => Ok(h.encode(text)),
            Encoder::Precomputed(p) => p.lookup(node_id, chunk),
        }
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[derive(Debug, Clone)]
pub struct HashEncoder {
    pub dim: usize,
}

impl HashEncoder {
    pub fn encode(&self, text: &str) -> Array1<f64> {
        let tokens: Vec<&str> = text.split_whitespace().collect();
        let mut v = Array1::zeros(self.dim);
        let mut add = |feature: &str, signed: bool| {
            let h = fnv1a(feature.as_bytes());
            let bucket = (h % self.dim as u64) as usize;
            let sign = if signed && (h >> 63) == 1 { -1.0 } else { 1.0 };
            v[bucket] += sign;
        };
        for t in &tokens {
            add(t, true);
        }
        for w in tokens.windows(2) {
            add(&format!("{} {}", w[0], w[1]), true);
        }
        if normalize(&mut v) == 0.0 && !tokens.is_empty() {
            // Signed collisions cancelled exactly; fall back to unsigned counts.
            for t in &tokens {
                let h = fnv1a(t.as_bytes());
                v[(h % self.dim as u64) as usize] += 1.0;
            }
            normalize(&mut v);
        }
        v
    }
}

#[derive(Debug, Clone, Deserialize)]
struct EmbeddingRecord {
    node: u64,
    chunk: usize,
    vec: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct PrecomputedEncoder {
    dim: usize,
    source: PathBuf,
    table: HashMap<(u64, usize), Array1<f64>>,
}

impl PrecomputedEncoder {
    pub fn load(path: &Path, dim: usize) -> Result<Self> {
        let mut table = HashMap::new();
        for (i, line) in open_lines(path)?.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: EmbeddingRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })?;
            if rec.vec.len() != dim {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    message: format!("expected {dim} components, found {}", rec.vec.len()),
                });
            }
            let mut v = Array1::from(rec.vec);
            normalize(&mut v);
            table.insert((rec.node, rec.chunk), v);
        }
        Ok(Self {
            dim,
            source: path.to_path_buf(),
            table,
        })
    }

    pub fn lookup(&self, node: u64, chunk: usize) -> Result<Array1<f64>> {
        self.table
            .get(&(node, chunk))
            .cloned()
            .ok_or(Error::MissingEmbedding { node, chunk })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::l2_norm;

    #[test]
    fn hashing_is_deterministic_unit_norm_and_whitespace_insensitive() {
        let e = HashEncoder { dim: 64 };
        let a = e.encode("neural networks");
        assert_eq!(a, e.encode("neural networks"));
        assert!((l2_norm(a.view()) - 1.0).abs() < 1e-12);
        assert_eq!(a, e.encode("neural    networks"));
        assert_ne!(a, e.encode("networks neural"));
    }

    #[test]
    fn precomputed_lookup_and_miss() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("emb.jsonl");
        std::fs::write(&p, "{\"node\": 4, \"chunk\": 0, \"vec\": [3.0, 4.0]}\n").unwrap();
        let enc = EncoderConfig::Precomputed { path: p, dim: 2 }.build().unwrap();
        let v = enc.encode(4, 0, "ignored").unwrap();
        assert!((v[0] - 0.6).abs() < 1e-12 && (v[1] - 0.8).abs() < 1e-12);
        match enc.encode(4, 1, "x") {
            Err(Error::MissingEmbedding { node: 4, chunk: 1 }) => {}
            other => panic!("expected miss, got {other:?}"),
        }
    }
}
