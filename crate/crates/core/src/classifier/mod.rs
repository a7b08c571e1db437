//! Clause-type classifiers: the convolutional model, its trainer, POS-feature
//! baselines, and evaluation.

pub mod baseline;
mod checkpoint;
pub mod cnn;
mod eval;
pub mod train;

use std::collections::HashMap;
use std::path::Path;

use rayon::prelude::*;

use crate::corpus::{Clause, ClauseType};
use crate::error::{Error, Result};
use crate::features::{
    build_vocab, load_embeddings, EmbeddingTable, FeatureConfig, Featurizer, PosTagset,
};

pub use baseline::{train_feature_baseline, BaselineKind, FeatureBaseline};
pub use checkpoint::{load_checkpoint, load_checkpoint_with_vocab, save_checkpoint, CHECKPOINT_FORMAT_VERSION};
pub use cnn::{argmax, CnnConfig, CnnModel};
pub use eval::{evaluate, evaluate_predictions, AgreementFilter, ClassMetrics, EvalReport};
pub use train::{train, train_with_progress, EpochRecord, LabeledExample, TrainConfig, TrainLog};

/// Output order of every classifier.
pub const LABEL_ORDER: [ClauseType; 3] = ClauseType::NARRATIVE;

pub fn label_index(label: ClauseType) -> Option<usize> {
    LABEL_ORDER.iter().position(|&l| l == label)
}

/// Gold label of a narrative clause as an index into [`LABEL_ORDER`].
pub fn gold_index(clause: &Clause) -> Result<usize> {
    let gold = clause.gold.ok_or_else(|| Error::MissingGold(clause.clause_id.clone()))?;
    label_index(gold).ok_or_else(|| {
        Error::InvalidArgument(format!("clause `{}` has non-narrative gold label", clause.clause_id))
    })
}

pub trait ClauseClassifier: Sync {
    fn name(&self) -> String;

    fn predict_clause(&self, clause: &Clause) -> Result<ClauseType>;

    fn predict(&self, clauses: &[&Clause]) -> Result<Vec<ClauseType>> {
        clauses.par_iter().map(|c| self.predict_clause(c)).collect()
    }
}

/// Always answers the same label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConstantClassifier(pub ClauseType);

impl ClauseClassifier for ConstantClassifier {
    fn name(&self) -> String {
        format!("constant-{}", self.0)
    }

    fn predict_clause(&self, _clause: &Clause) -> Result<ClauseType> {
        Ok(self.0)
    }
}

/// Where the initial embedding rows come from.
#[derive(Debug, Clone, Copy)]
pub enum EmbeddingSource<'a> {
    /// Seeded uniform init for every row.
    Random,
    Vectors(&'a HashMap<String, Vec<f32>>),
    File(&'a Path),
}

/// A trained network together with the vocabulary and tagset it was built on.
#[derive(Debug, Clone)]
pub struct CnnClassifier {
    pub model: CnnModel,
    pub featurizer: Featurizer,
    pub seed: u64,
}

impl CnnClassifier {
    /// Builds vocabulary and embeddings from `train_clauses` and trains a
    /// fresh network.
    pub fn fit(
        train_clauses: &[&Clause],
        validation_clauses: &[&Clause],
        features: &FeatureConfig,
        cnn: &CnnConfig,
        training: &TrainConfig,
        embeddings: EmbeddingSource<'_>,
    ) -> Result<(Self, TrainLog)> {
        Self::fit_with_progress(train_clauses, validation_clauses, features, cnn, training, embeddings, |_| {})
    }

    pub fn fit_with_progress(
        train_clauses: &[&Clause],
        validation_clauses: &[&Clause],
        features: &FeatureConfig,
        cnn: &CnnConfig,
        training: &TrainConfig,
        embeddings: EmbeddingSource<'_>,
        on_epoch: impl FnMut(&EpochRecord),
    ) -> Result<(Self, TrainLog)> {
        if cnn.embedding_dim != features.embedding_dim || cnn.pos_dim != features.pos_dim {
            return Err(Error::InvalidArgument(
                "cnn and feature configs disagree on embedding or POS width".into(),
            ));
        }
        let seed = training.seed;
        let vocab = build_vocab(train_clauses.iter().copied(), features.min_count, features.fold_case)?;
        let table = match embeddings {
            EmbeddingSource::Random => EmbeddingTable::random(&vocab, features.embedding_dim, seed),
            EmbeddingSource::Vectors(v) => {
                EmbeddingTable::from_vectors(&vocab, features.embedding_dim, seed, v)
            }
            EmbeddingSource::File(p) => load_embeddings(p, &vocab, features.embedding_dim, seed)?,
        };
        let tagset = PosTagset::penn();
        if tagset.len() != features.pos_dim {
            return Err(Error::Dimension {
                expected: features.pos_dim,
                found: tagset.len(),
                context: "tagset size".into(),
            });
        }
        let featurizer = Featurizer::new(vocab, tagset, features.use_pos);
        let model = CnnModel::new(cnn.clone(), table, seed)?;
        let train_set = labeled_examples(&featurizer, train_clauses)?;
        let validation_set = labeled_examples(&featurizer, validation_clauses)?;
        let (model, log) =
            train_with_progress(model, &featurizer, &train_set, &validation_set, training, on_epoch)?;
        Ok((CnnClassifier { model, featurizer, seed }, log))
    }

    /// Class probabilities in [`LABEL_ORDER`].
    pub fn probabilities(&self, clause: &Clause) -> Result<Vec<f64>> {
        let encoded = self.featurizer.encode(clause)?;
        let x = self
            .featurizer
            .matrix(&encoded, &self.model.embedding, self.model.config.max_filter_width());
        self.model.forward(&x)
    }
}

impl ClauseClassifier for CnnClassifier {
    fn name(&self) -> String {
        "cnn".into()
    }

    fn predict_clause(&self, clause: &Clause) -> Result<ClauseType> {
        Ok(LABEL_ORDER[argmax(&self.probabilities(clause)?)])
    }
}

/// Encodes clauses with gold narrative labels for training.
pub fn labeled_examples(featurizer: &Featurizer, clauses: &[&Clause]) -> Result<Vec<LabeledExample>> {
    clauses
        .iter()
        .map(|c| {
            Ok(LabeledExample {
                encoded: featurizer.encode(c)?,
                label: gold_index(c)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_order_contract() {
        assert_eq!(
            LABEL_ORDER,
            [ClauseType::Action, ClauseType::Evaluation, ClauseType::Orientation]
        );
        assert_eq!(label_index(ClauseType::NotStory), None);
        assert_eq!(LABEL_ORDER[argmax(&[1.0 / 3.0; 3])], ClauseType::Action);
    }
}
