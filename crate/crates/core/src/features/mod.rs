//! Token features: vocabulary, pretrained vectors, POS one-hots, and the
//! POS count / indicator vectors used by the feature baselines.

mod embedding;
mod tagset;
mod vocab;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::corpus::Clause;
use crate::error::{Error, Result};

pub use embedding::{
    load_embeddings, read_word_vectors, unseen_row, EmbeddingTable, EMBEDDING_DIM, UNSEEN_INIT_RANGE,
};
pub use tagset::{PosTagset, PENN_TAGS, PENN_TAGSET_VERSION, POS_DIM};
pub use vocab::{build_vocab, token_counts, Vocabulary, UNK_TOKEN};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub embedding_dim: usize,
    pub pos_dim: usize,
    pub min_count: usize,
    pub max_filter_width: usize,
    pub fold_case: bool,
    pub use_pos: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            embedding_dim: EMBEDDING_DIM,
            pos_dim: POS_DIM,
            min_count: 2,
            max_filter_width: 4,
            fold_case: true,
            use_pos: true,
        }
    }
}

impl FeatureConfig {
    pub fn per_token_dim(&self) -> usize {
        self.embedding_dim + self.pos_dim
    }
}

/// A clause mapped to vocabulary and tagset indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedClause {
    pub token_ids: Vec<usize>,
    /// `None` for tags outside the tagset, or for every token when POS
    /// features are disabled.
    pub pos_ids: Vec<Option<usize>>,
}

impl EncodedClause {
    pub fn len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_ids.is_empty()
    }
}

/// Vocabulary plus tagset: everything needed to index a clause.
#[derive(Debug, Clone)]
pub struct Featurizer {
    pub vocab: Vocabulary,
    pub tagset: PosTagset,
    pub use_pos: bool,
}

impl Featurizer {
    pub fn new(vocab: Vocabulary, tagset: PosTagset, use_pos: bool) -> Self {
        Featurizer { vocab, tagset, use_pos }
    }

    pub fn encode(&self, clause: &Clause) -> Result<EncodedClause> {
        if clause.tokens.is_empty() {
            return Err(Error::Empty(format!("clause `{}`", clause.clause_id)));
        }
        let token_ids = clause.tokens.iter().map(|t| self.vocab.lookup(&t.text)).collect();
        let pos_ids = if self.use_pos {
            clause
                .tokens
                .iter()
                .map(|t| {
                    t.pos
                        .as_deref()
                        .map(|p| self.tagset.index(p))
                        .ok_or_else(|| Error::MissingPos(clause.clause_id.clone()))
                })
                .collect::<Result<Vec<_>>>()?
        } else {
            vec![None; clause.tokens.len()]
        };
        Ok(EncodedClause { token_ids, pos_ids })
    }

    /// `max(len, pad_to)` rows of `embedding ⊕ one-hot(POS)`; pad rows are zero.
    pub fn matrix(&self, encoded: &EncodedClause, table: &EmbeddingTable, pad_to: usize) -> Array2<f32> {
        let dim = table.dim();
        let width = dim + self.tagset.len();
        let rows = encoded.len().max(pad_to);
        let mut m = Array2::<f32>::zeros((rows, width));
        for (t, (&tok, pos)) in encoded.token_ids.iter().zip(&encoded.pos_ids).enumerate() {
            let mut row = m.row_mut(t);
            for (dst, &src) in row.iter_mut().zip(table.row(tok)) {
                *dst = src;
            }
            if let Some(p) = pos {
                row[dim + p] = 1.0;
            }
        }
        m
    }
}

/// Per-token feature matrix for one tagged clause, right-padded with zero rows
/// to at least `pad_to` rows.
pub fn clause_matrix(
    clause: &Clause,
    vocab: &Vocabulary,
    table: &EmbeddingTable,
    tagset: &PosTagset,
    pad_to: usize,
) -> Result<Array2<f32>> {
    let featurizer = Featurizer::new(vocab.clone(), tagset.clone(), true);
    let encoded = featurizer.encode(clause)?;
    Ok(featurizer.matrix(&encoded, table, pad_to))
}

/// 45 tag-presence indicators followed by 45 tag counts normalized by clause
/// length. Tags outside the tagset contribute nothing.
pub fn pos_feature_vector(clause: &Clause, tagset: &PosTagset) -> Result<Vec<f64>> {
    if clause.tokens.is_empty() {
        return Err(Error::Empty(format!("clause `{}`", clause.clause_id)));
    }
    let n = tagset.len();
    let mut v = vec![0.0; 2 * n];
    for token in &clause.tokens {
        let tag = token
            .pos
            .as_deref()
            .ok_or_else(|| Error::MissingPos(clause.clause_id.clone()))?;
        if let Some(i) = tagset.index(tag) {
            v[i] = 1.0;
            v[n + i] += 1.0;
        }
    }
    let len = clause.tokens.len() as f64;
    for c in &mut v[n..] {
        *c /= len;
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Token;

    fn tagged(words: &[(&str, &str)]) -> Clause {
        Clause::new(
            "s",
            0,
            words.iter().map(|(w, t)| Token::new(*w, Some(t.to_string()))).collect(),
        )
    }

    fn setup() -> (Vocabulary, EmbeddingTable, PosTagset) {
        let c = tagged(&[("went", "VBD"), ("went", "VBD"), ("went", "VBD"), ("home", "NN")]);
        let vocab = build_vocab([&c], 0, true).unwrap();
        let table = EmbeddingTable::random(&vocab, EMBEDDING_DIM, 3);
        (vocab, table, PosTagset::penn())
    }

    #[test]
    fn single_token_is_padded_to_four_rows() {
        let (vocab, table, tagset) = setup();
        let m = clause_matrix(&tagged(&[("went", "VBD")]), &vocab, &table, &tagset, 4).unwrap();
        assert_eq!(m.dim(), (4, 345));
        assert!(m.slice(ndarray::s![1.., ..]).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn one_hot_position() {
        let (vocab, table, tagset) = setup();
        let m = clause_matrix(&tagged(&[("went", "VBD")]), &vocab, &table, &tagset, 4).unwrap();
        let block = m.slice(ndarray::s![0, 300..]);
        assert_eq!(block.iter().filter(|&&x| x != 0.0).count(), 1);
        assert_eq!(block[tagset.index("VBD").unwrap()], 1.0);
    }

    #[test]
    fn unknown_tag_is_zero_block_and_missing_tag_is_error() {
        let (vocab, table, tagset) = setup();
        let m = clause_matrix(&tagged(&[("went", "XYZ")]), &vocab, &table, &tagset, 4).unwrap();
        assert!(m.slice(ndarray::s![0, 300..]).iter().all(|&x| x == 0.0));
        let untagged = Clause::new("s", 0, vec![Token::new("went", None)]);
        assert!(matches!(
            clause_matrix(&untagged, &vocab, &table, &tagset, 4),
            Err(Error::MissingPos(_))
        ));
    }

    #[test]
    fn pos_features_hand_computed() {
        let tagset = PosTagset::penn();
        let v = pos_feature_vector(&tagged(&[("went", "VBD")]), &tagset).unwrap();
        let vbd = tagset.index("VBD").unwrap();
        assert_eq!(v.len(), 90);
        assert_eq!((v[vbd], v[45 + vbd]), (1.0, 1.0));
        assert_eq!(v.iter().sum::<f64>(), 2.0);

        let v = pos_feature_vector(&tagged(&[("the", "DT"), ("a", "DT"), ("dog", "NN")]), &tagset).unwrap();
        let (dt, nn) = (tagset.index("DT").unwrap(), tagset.index("NN").unwrap());
        assert_eq!((v[dt], v[nn]), (1.0, 1.0));
        assert!((v[45 + dt] - 2.0 / 3.0).abs() < 1e-15);
        assert!((v[45 + nn] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn feature_config_width() {
        assert_eq!(FeatureConfig::default().per_token_dim(), 345);
    }
}
