use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{all_clauses, Clause, ClauseType, Story};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitOptions {
    /// Train / validation / test shares of the stories.
    pub fractions: [f64; 3],
    pub min_agreement: u8,
    pub drop_not_story: bool,
    pub seed: u64,
}

impl Default for SplitOptions {
    fn default() -> Self {
        SplitOptions {
            fractions: [0.86, 0.07, 0.07],
            min_agreement: 2,
            drop_not_story: true,
            seed: 0,
        }
    }
}

/// Clause ids per partition. Stories never straddle partitions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
    pub seed: u64,
}

impl DatasetSplit {
    /// Resolves the three id lists against `corpus`, preserving split order.
    pub fn resolve<'a>(&self, corpus: &'a [Story]) -> [Vec<&'a Clause>; 3] {
        let lookup: std::collections::HashMap<&str, &Clause> =
            all_clauses(corpus).map(|c| (c.clause_id.as_str(), c)).collect();
        [&self.train, &self.validation, &self.test].map(|ids| {
            ids.iter()
                .filter_map(|id| lookup.get(id.as_str()).copied())
                .collect()
        })
    }
}

/// Shuffles stories with `seed`, cuts them at the cumulative fractions, then
/// keeps clauses that pass the agreement and not-story filters.
pub fn split_dataset(corpus: &[Story], options: &SplitOptions) -> Result<DatasetSplit> {
    let sum: f64 = options.fractions.iter().sum();
    if (sum - 1.0).abs() > 1e-9 || options.fractions.iter().any(|&f| f < 0.0) {
        return Err(Error::InvalidArgument(format!(
            "split fractions {:?} must be non-negative and sum to 1",
            options.fractions
        )));
    }
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(options.seed));

    let n = corpus.len() as f64;
    let cut1 = (options.fractions[0] * n).round() as usize;
    let cut2 = ((options.fractions[0] + options.fractions[1]) * n).round() as usize;
    let cut2 = cut2.clamp(cut1, corpus.len());
    let ranges = [0..cut1, cut1..cut2, cut2..corpus.len()];

    let keep = |c: &Clause| -> bool {
        let Some(gold) = c.gold else { return false };
        c.agreement.unwrap_or(0) >= options.min_agreement
            && !(options.drop_not_story && gold == ClauseType::NotStory)
    };
    let mut parts = ranges.map(|r| {
        order[r]
            .iter()
            .flat_map(|&i| corpus[i].clauses.iter())
            .filter(|c| keep(c))
            .map(|c| c.clause_id.clone())
            .collect::<Vec<_>>()
    });
    for (name, part) in ["train", "validation", "test"].iter().zip(&parts) {
        if part.is_empty() {
            return Err(Error::Empty(format!("{name} partition after filtering")));
        }
    }
    debug_assert!({
        let mut seen = HashSet::new();
        parts.iter().flatten().all(|id| seen.insert(id))
    });
    let [train, validation, test] = std::mem::take(&mut parts);
    Ok(DatasetSplit {
        train,
        validation,
        test,
        seed: options.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{aggregate_corpus, AnnotationSet, Token};

    fn single_clause_stories(n: usize) -> Vec<Story> {
        let mut corpus: Vec<Story> = (0..n)
            .map(|i| {
                let id = format!("s{i:03}");
                let mut c = Clause::new(&id, 0, vec![Token::new("word", None)]);
                c.annotations = AnnotationSet::from_labels(&[ClauseType::Action; 3]).unwrap();
                Story::new(id, vec![c])
            })
            .collect();
        aggregate_corpus(&mut corpus, 0).unwrap();
        corpus
    }

    #[test]
    fn eighty_ten_ten() {
        let corpus = single_clause_stories(100);
        let split = split_dataset(
            &corpus,
            &SplitOptions {
                fractions: [0.8, 0.1, 0.1],
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!((split.train.len(), split.validation.len(), split.test.len()), (80, 10, 10));
    }

    #[test]
    fn same_seed_same_split() {
        let corpus = single_clause_stories(50);
        let opts = SplitOptions {
            seed: 11,
            ..Default::default()
        };
        assert_eq!(split_dataset(&corpus, &opts).unwrap(), split_dataset(&corpus, &opts).unwrap());
        let other = split_dataset(&corpus, &SplitOptions { seed: 12, ..opts.clone() }).unwrap();
        assert_ne!(other.train, split_dataset(&corpus, &opts).unwrap().train);
    }

    #[test]
    fn bad_fractions_and_empty_partitions() {
        let corpus = single_clause_stories(10);
        let bad = SplitOptions {
            fractions: [0.5, 0.2, 0.2],
            ..Default::default()
        };
        assert!(matches!(split_dataset(&corpus, &bad), Err(Error::InvalidArgument(_))));
        let strict = SplitOptions {
            min_agreement: 4,
            ..Default::default()
        };
        assert!(matches!(split_dataset(&corpus, &strict), Err(Error::Empty(_))));
    }
}
