use std::collections::HashMap;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::corpus::Clause;
use crate::error::{Error, Result};

pub const UNK_TOKEN: &str = "<unk>";

/// Closed token -> index map. Index 0 is the unknown-word token; every other
/// entry appeared more than `min_count` times in the training clauses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    min_count: usize,
    fold_case: bool,
}

impl Vocabulary {
    pub const UNK_INDEX: usize = 0;

    fn from_tokens(tokens: Vec<String>, min_count: usize, fold_case: bool) -> Result<Self> {
        if tokens.first().map(String::as_str) != Some(UNK_TOKEN) {
            return Err(Error::InvalidArgument("vocabulary must start with <unk>".into()));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::InvalidArgument(format!("vocabulary lists `{t}` twice")));
            }
        }
        Ok(Vocabulary {
            tokens,
            index,
            min_count,
            fold_case,
        })
    }

    pub fn normalize<'a>(&self, token: &'a str) -> std::borrow::Cow<'a, str> {
        if self.fold_case {
            std::borrow::Cow::Owned(token.to_lowercase())
        } else {
            std::borrow::Cow::Borrowed(token)
        }
    }

    /// Never fails: unknown strings map to [`Vocabulary::UNK_INDEX`].
    pub fn lookup(&self, token: &str) -> usize {
        self.index
            .get(self.normalize(token).as_ref())
            .copied()
            .unwrap_or(Self::UNK_INDEX)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.lookup(token) != Self::UNK_INDEX
    }

    pub fn unk_index(&self) -> usize {
        Self::UNK_INDEX
    }

    pub fn token(&self, index: usize) -> Option<&str> {
        self.tokens.get(index).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn min_count(&self) -> usize {
        self.min_count
    }

    pub fn fold_case(&self) -> bool {
        self.fold_case
    }

    /// Content hash recorded in checkpoints.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(format!("fold_case={} min_count={}\n", self.fold_case, self.min_count));
        for t in &self.tokens {
            h.update(t.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = format!("#vocab fold_case={} min_count={}\n", self.fold_case, self.min_count);
        for t in &self.tokens {
            out.push_str(t);
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::schema(1, "header", "empty vocabulary file"))?;
        let mut fold_case = None;
        let mut min_count = None;
        for field in header.trim_start_matches("#vocab").split_whitespace() {
            match field.split_once('=') {
                Some(("fold_case", v)) => fold_case = v.parse().ok(),
                Some(("min_count", v)) => min_count = v.parse().ok(),
                _ => {}
            }
        }
        let (Some(fold_case), Some(min_count)) = (fold_case, min_count) else {
            return Err(Error::schema(1, "header", format!("malformed header `{header}`")));
        };
        Self::from_tokens(lines.map(str::to_string).collect(), min_count, fold_case)
    }
}

/// Counts (normalized) token frequencies over `clauses`.
pub fn token_counts<'a>(
    clauses: impl IntoIterator<Item = &'a Clause>,
    fold_case: bool,
) -> HashMap<String, usize> {
    let mut counts = HashMap::new();
    for clause in clauses {
        for t in &clause.tokens {
            let key = if fold_case { t.text.to_lowercase() } else { t.text.clone() };
            *counts.entry(key).or_insert(0) += 1;
        }
    }
    counts
}

/// Builds a vocabulary from training clauses only. Entries are ordered by
/// descending frequency, then lexicographically.
pub fn build_vocab<'a>(
    training_clauses: impl IntoIterator<Item = &'a Clause>,
    min_count: usize,
    fold_case: bool,
) -> Result<Vocabulary> {
    let mut n_clauses = 0usize;
    let counts = token_counts(
        training_clauses.into_iter().inspect(|_| n_clauses += 1),
        fold_case,
    );
    if n_clauses == 0 {
        return Err(Error::Empty("training set".into()));
    }
    let mut kept: Vec<(String, usize)> = counts
        .into_iter()
        .filter(|(t, c)| *c > min_count && t != UNK_TOKEN)
        .collect();
    kept.sort_by(|(a, ca), (b, cb)| cb.cmp(ca).then_with(|| a.cmp(b)));
    let tokens = std::iter::once(UNK_TOKEN.to_string())
        .chain(kept.into_iter().map(|(t, _)| t))
        .collect();
    Vocabulary::from_tokens(tokens, min_count, fold_case)
}
