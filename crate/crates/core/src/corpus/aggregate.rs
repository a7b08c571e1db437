use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::{all_clauses, AnnotationSet, ClauseType, Story};
use crate::error::{Error, Result};

/// Majority vote over one clause's annotations.
///
/// Returns the strictly modal label, or a uniform draw among the tied modal
/// labels seeded by `rng_seed`, together with the number of annotators that
/// chose the returned label.
pub fn aggregate_gold_label(annotations: &AnnotationSet, rng_seed: u64) -> Result<(ClauseType, u8)> {
    if annotations.is_empty() {
        return Err(Error::Empty("annotation set".into()));
    }
    let counts = ClauseType::ALL.map(|t| annotations.count(t));
    let best = *counts.iter().max().unwrap();
    let tied: Vec<ClauseType> = ClauseType::ALL
        .iter()
        .zip(counts)
        .filter(|&(_, c)| c == best)
        .map(|(&t, _)| t)
        .collect();
    let gold = if tied.len() == 1 {
        tied[0]
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        tied[rng.gen_range(0..tied.len())]
    };
    Ok((gold, best as u8))
}

/// Per-clause tie-breaking seed, stable under corpus reordering.
pub fn clause_seed(clause_id: &str, seed: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(clause_id.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

/// Fills `gold` and `agreement` on every annotated clause. Clauses without
/// annotations are left unlabeled.
pub fn aggregate_corpus(corpus: &mut [Story], seed: u64) -> Result<()> {
    for clause in corpus.iter_mut().flat_map(|s| s.clauses.iter_mut()) {
        if clause.annotations.is_empty() {
            clause.gold = None;
            clause.agreement = None;
            continue;
        }
        let (gold, agreement) =
            aggregate_gold_label(&clause.annotations, clause_seed(&clause.clause_id, seed))?;
        clause.gold = Some(gold);
        clause.agreement = Some(agreement);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelStat {
    pub count: usize,
    pub fraction: f64,
    /// `None` when no clause carries this label.
    pub mean_agreement: Option<f64>,
}

/// Share of each gold label and the mean agreement of clauses carrying it.
pub fn label_distribution(corpus: &[Story]) -> Result<BTreeMap<ClauseType, LabelStat>> {
    let mut counts = [0usize; 4];
    let mut agreement_sums = [0u64; 4];
    let mut total = 0usize;
    for clause in all_clauses(corpus) {
        let gold = clause
            .gold
            .ok_or_else(|| Error::MissingGold(clause.clause_id.clone()))?;
        let slot = ClauseType::ALL.iter().position(|&t| t == gold).unwrap();
        counts[slot] += 1;
        agreement_sums[slot] += u64::from(clause.agreement.unwrap_or(0));
        total += 1;
    }
    if total == 0 {
        return Err(Error::Empty("corpus has no clauses".into()));
    }
    Ok(ClauseType::ALL
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let stat = LabelStat {
                count: counts[i],
                fraction: counts[i] as f64 / total as f64,
                mean_agreement: (counts[i] > 0)
                    .then(|| agreement_sums[i] as f64 / counts[i] as f64),
            };
            (t, stat)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementCounts {
    pub total: usize,
    pub at_least_two: usize,
    pub unanimous: usize,
    /// Mean of the per-clause agreement field.
    pub mean_agreement: f64,
}

pub fn agreement_counts(corpus: &[Story]) -> Result<AgreementCounts> {
    let mut counts = AgreementCounts {
        total: 0,
        at_least_two: 0,
        unanimous: 0,
        mean_agreement: 0.0,
    };
    let mut sum = 0u64;
    for clause in all_clauses(corpus) {
        let agreement = clause
            .agreement
            .ok_or_else(|| Error::MissingGold(clause.clause_id.clone()))?;
        counts.total += 1;
        sum += u64::from(agreement);
        if agreement >= 2 {
            counts.at_least_two += 1;
        }
        if agreement as usize == super::ANNOTATORS_PER_STORY {
            counts.unanimous += 1;
        }
    }
    if counts.total > 0 {
        counts.mean_agreement = sum as f64 / counts.total as f64;
    }
    Ok(counts)
}
