use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::Deserialize;

use crate::corpus::tokenize;
use crate::error::{Error, Result};
use crate::features::{read_word_vectors, EmbeddingTable, Vocabulary};

/// Maps text to a fixed-width vector. Implementations must be deterministic.
pub trait SentenceEncoder: Sync {
    fn name(&self) -> String;

    fn dim(&self) -> usize;

    fn encode(&self, text: &str) -> Result<Vec<f64>>;
}

/// L2-normalized mean of the word vectors of the known tokens in a text.
/// Texts without a known token encode to the zero vector.
#[derive(Debug, Clone)]
pub struct MeanWordVectorEncoder {
    vectors: HashMap<String, Vec<f32>>,
    dim: usize,
    fold_case: bool,
}

impl MeanWordVectorEncoder {
    pub fn new(vectors: HashMap<String, Vec<f32>>, dim: usize, fold_case: bool) -> Result<Self> {
        if let Some((token, v)) = vectors.iter().find(|(_, v)| v.len() != dim) {
            return Err(Error::Dimension {
                expected: dim,
                found: v.len(),
                context: format!("word vector for `{token}`"),
            });
        }
        Ok(MeanWordVectorEncoder { vectors, dim, fold_case })
    }

    pub fn from_file(path: impl AsRef<Path>, dim: usize, fold_case: bool) -> Result<Self> {
        Self::new(read_word_vectors(path, dim, fold_case, None)?, dim, fold_case)
    }

    /// Uses the rows of a (possibly fine-tuned) embedding table; unk is left out.
    pub fn from_embedding(vocab: &Vocabulary, table: &EmbeddingTable) -> Self {
        let vectors = vocab
            .tokens()
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, t)| (t.clone(), table.row(i).to_vec()))
            .collect();
        MeanWordVectorEncoder {
            vectors,
            dim: table.dim(),
            fold_case: vocab.fold_case(),
        }
    }
}

impl SentenceEncoder for MeanWordVectorEncoder {
    fn name(&self) -> String {
        format!("mean-word-vector-{}d", self.dim)
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn encode(&self, text: &str) -> Result<Vec<f64>> {
        let mut sum = vec![0.0f64; self.dim];
        for token in tokenize(text) {
            let key = if self.fold_case { token.to_lowercase() } else { token };
            if let Some(v) = self.vectors.get(&key) {
                for (s, &x) in sum.iter_mut().zip(v) {
                    *s += f64::from(x);
                }
            }
        }
        let norm = sum.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            sum.iter_mut().for_each(|x| *x /= norm);
        }
        Ok(sum)
    }
}

/// Vectors produced offline by an external sentence encoder, keyed by the
/// exact clause text.
#[derive(Debug, Clone)]
pub struct PrecomputedEncoder {
    name: String,
    vectors: HashMap<String, Vec<f64>>,
    dim: usize,
}

#[derive(Deserialize)]
struct VectorLine {
    text: String,
    vector: Vec<f64>,
}

impl PrecomputedEncoder {
    /// Reads JSON lines `{"text": .., "vector": [..]}`; all vectors must share
    /// one width.
    pub fn from_jsonl(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut vectors = HashMap::new();
        let mut dim = None;
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: VectorLine =
                serde_json::from_str(&line).map_err(|e| Error::schema(i + 1, "vector", e.to_string()))?;
            match dim {
                None => dim = Some(rec.vector.len()),
                Some(d) if d != rec.vector.len() => {
                    return Err(Error::schema(
                        i + 1,
                        "vector",
                        format!("expected {d} values, found {}", rec.vector.len()),
                    ))
                }
                _ => {}
            }
            vectors.entry(rec.text).or_insert(rec.vector);
        }
        let dim = dim.ok_or_else(|| Error::Empty(format!("vector file {}", path.display())))?;
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        Ok(PrecomputedEncoder {
            name: format!("precomputed:{stem}"),
            vectors,
            dim,
        })
    }

    pub fn from_map(name: impl Into<String>, vectors: HashMap<String, Vec<f64>>) -> Result<Self> {
        let dim = vectors
            .values()
            .next()
            .map(Vec::len)
            .ok_or_else(|| Error::Empty("precomputed vectors".into()))?;
        if vectors.values().any(|v| v.len() != dim) {
            return Err(Error::InvalidArgument("precomputed vectors differ in width".into()));
        }
        Ok(PrecomputedEncoder {
            name: name.into(),
            vectors,
            dim,
        })
    }
}

impl SentenceEncoder for PrecomputedEncoder {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn encode(&self, text: &str) -> Result<Vec<f64>> {
        self.vectors
            .get(text)
            .cloned()
            .ok_or_else(|| Error::InvalidArgument(format!("no precomputed vector for `{text}`")))
    }
}
