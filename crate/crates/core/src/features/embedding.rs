use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Vocabulary;
use crate::corpus::clause_seed;
use crate::error::{Error, Result};

pub const EMBEDDING_DIM: usize = 300;

/// Half-width of the uniform init used for rows without a pretrained vector.
pub const UNSEEN_INIT_RANGE: f32 = 0.25;

/// One row per vocabulary index, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    data: Vec<f32>,
    pub trainable: bool,
    /// Vocabulary entries (excluding unk) that received a pretrained row.
    pub pretrained_hits: usize,
}

impl EmbeddingTable {
    pub fn from_data(rows: usize, dim: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != rows * dim {
            return Err(Error::Dimension {
                expected: rows * dim,
                found: data.len(),
                context: "embedding table data".into(),
            });
        }
        Ok(EmbeddingTable {
            dim,
            data,
            trainable: true,
            pretrained_hits: 0,
        })
    }

    /// All rows drawn from the seeded uniform init.
    pub fn random(vocab: &Vocabulary, dim: usize, seed: u64) -> Self {
        Self::from_vectors(vocab, dim, seed, &HashMap::new())
    }

    /// Rows from `vectors` where available, seeded uniform init elsewhere.
    pub fn from_vectors(
        vocab: &Vocabulary,
        dim: usize,
        seed: u64,
        vectors: &HashMap<String, Vec<f32>>,
    ) -> Self {
        let mut data = Vec::with_capacity(vocab.len() * dim);
        let mut hits = 0;
        for (i, token) in vocab.tokens().iter().enumerate() {
            match vectors.get(token) {
                Some(v) if i != Vocabulary::UNK_INDEX && v.len() == dim => {
                    data.extend_from_slice(v);
                    hits += 1;
                }
                _ => data.extend(unseen_row(token, dim, seed)),
            }
        }
        EmbeddingTable {
            dim,
            data,
            trainable: true,
            pretrained_hits: hits,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.dim.max(1)
    }

    pub fn row(&self, index: usize) -> &[f32] {
        &self.data[index * self.dim..(index + 1) * self.dim]
    }

    pub fn row_mut(&mut self, index: usize) -> &mut [f32] {
        &mut self.data[index * self.dim..(index + 1) * self.dim]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    /// Share of non-unk vocabulary entries found in the pretrained file.
    pub fn coverage(&self) -> f64 {
        let n = self.rows().saturating_sub(1);
        if n == 0 {
            0.0
        } else {
            self.pretrained_hits as f64 / n as f64
        }
    }
}

/// Deterministic init row for a token absent from the pretrained file.
pub fn unseen_row(token: &str, dim: usize, seed: u64) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(clause_seed(token, seed));
    (0..dim)
        .map(|_| rng.gen_range(-UNSEEN_INIT_RANGE..UNSEEN_INIT_RANGE))
        .collect()
}

/// Reads a whitespace-separated `token v1 .. v_dim` file. When `keep` is
/// given only those (already normalized) tokens are retained; the first
/// occurrence of a token wins. Every line is dimension-checked.
pub fn read_word_vectors(
    path: impl AsRef<Path>,
    dim: usize,
    fold_case: bool,
    keep: Option<&HashSet<String>>,
) -> Result<HashMap<String, Vec<f32>>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = HashMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let token = fields.next().unwrap();
        let values: Vec<&str> = fields.collect();
        if values.len() != dim {
            return Err(Error::schema(
                i + 1,
                "vector",
                format!("expected {dim} values, found {}", values.len()),
            ));
        }
        let token = if fold_case { token.to_lowercase() } else { token.to_string() };
        if out.contains_key(&token) || keep.is_some_and(|k| !k.contains(&token)) {
            continue;
        }
        let vector = values
            .iter()
            .map(|v| v.parse::<f32>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::schema(i + 1, "vector", e.to_string()))?;
        out.insert(token, vector);
    }
    Ok(out)
}

/// Pretrained rows for vocabulary entries found in `path`; uniform init for
/// the rest (and for unk). The table is marked trainable.
pub fn load_embeddings(
    path: impl AsRef<Path>,
    vocab: &Vocabulary,
    dim: usize,
    seed: u64,
) -> Result<EmbeddingTable> {
    let keep: HashSet<String> = vocab.tokens().iter().cloned().collect();
    let vectors = read_word_vectors(path, dim, vocab.fold_case(), Some(&keep))?;
    Ok(EmbeddingTable::from_vectors(vocab, dim, seed, &vectors))
}
