//! Baselines over fixed-length POS feature vectors.

pub mod forest;
pub mod svm;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{gold_index, ClauseClassifier, LABEL_ORDER};
use crate::corpus::{Clause, ClauseType};
use crate::error::{Error, Result};
use crate::features::{pos_feature_vector, PosTagset};

pub use forest::{ForestConfig, RandomForest};
pub use svm::{LinearSvm, SvmConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineKind {
    LinearSvmL1,
    RandomForest,
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BaselineKind::LinearSvmL1 => "svm-l1",
            BaselineKind::RandomForest => "rf-100",
        })
    }
}

impl FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "svm" | "svm-l1" | "linear-svm-l1" => Ok(BaselineKind::LinearSvmL1),
            "rf" | "rf-100" | "random-forest" | "random-forest-100" => Ok(BaselineKind::RandomForest),
            other => Err(Error::InvalidArgument(format!("unknown baseline `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BaselineModel {
    Svm(LinearSvm),
    Forest(RandomForest),
}

impl BaselineModel {
    pub fn predict(&self, x: &[f64]) -> usize {
        match self {
            BaselineModel::Svm(m) => m.predict(x),
            BaselineModel::Forest(m) => m.predict(x),
        }
    }
}

pub(crate) fn check_training_data(x: &[Vec<f64>], labels: &[usize], num_classes: usize) -> Result<()> {
    if x.is_empty() {
        return Err(Error::Empty("baseline training set".into()));
    }
    if x.len() != labels.len() {
        return Err(Error::Dimension {
            expected: x.len(),
            found: labels.len(),
            context: "label count".into(),
        });
    }
    let p = x[0].len();
    if p == 0 || x.iter().any(|r| r.len() != p) {
        return Err(Error::InvalidArgument("feature vectors must share a positive length".into()));
    }
    if labels.iter().any(|&l| l >= num_classes) {
        return Err(Error::InvalidArgument("label index out of range".into()));
    }
    if labels.iter().all(|&l| l == labels[0]) {
        return Err(Error::InvalidArgument(
            "baseline training data contains a single class".into(),
        ));
    }
    Ok(())
}

/// Fits a baseline on feature vectors with label indices in `LABEL_ORDER`.
pub fn train_feature_baseline(
    kind: BaselineKind,
    features: &[Vec<f64>],
    labels: &[usize],
    seed: u64,
) -> Result<BaselineModel> {
    let classes = LABEL_ORDER.len();
    Ok(match kind {
        BaselineKind::LinearSvmL1 => {
            BaselineModel::Svm(LinearSvm::fit(features, labels, classes, &SvmConfig::default())?)
        }
        BaselineKind::RandomForest => {
            let cfg = ForestConfig { seed, ..ForestConfig::default() };
            BaselineModel::Forest(RandomForest::fit(features, labels, classes, &cfg)?)
        }
    })
}

/// A baseline model plus the tagset that defines its input vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBaseline {
    pub kind: BaselineKind,
    pub model: BaselineModel,
    pub tagset: PosTagset,
}

impl FeatureBaseline {
    /// Fits on tagged clauses with gold narrative labels.
    pub fn fit(kind: BaselineKind, clauses: &[&Clause], tagset: PosTagset, seed: u64) -> Result<Self> {
        let mut x = Vec::with_capacity(clauses.len());
        let mut y = Vec::with_capacity(clauses.len());
        for c in clauses {
            x.push(pos_feature_vector(c, &tagset)?);
            y.push(gold_index(c)?);
        }
        let model = train_feature_baseline(kind, &x, &y, seed)?;
        Ok(FeatureBaseline { kind, model, tagset })
    }
}

impl ClauseClassifier for FeatureBaseline {
    fn name(&self) -> String {
        self.kind.to_string()
    }

    fn predict_clause(&self, clause: &Clause) -> Result<ClauseType> {
        let x = pos_feature_vector(clause, &self.tagset)?;
        Ok(LABEL_ORDER[self.model.predict(&x)])
    }
}
