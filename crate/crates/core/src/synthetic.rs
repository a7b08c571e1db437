//! Seeded generators for tagged, annotated toy corpora whose clause types are
//! recoverable from both their keywords and their POS patterns.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{aggregate_corpus, Annotation, AnnotationSet, Clause, ClauseType, Story, Token};
use crate::error::{Error, Result};

const SUBJECTS: &[&str] = &["i", "we", "he", "she", "they"];
const OBJECTS: &[&str] = &["door", "car", "phone", "bag", "ball", "letter"];

const ACTION_VERBS: &[&str] = &[
    "grabbed", "opened", "kicked", "dropped", "threw", "carried", "pushed", "fixed",
];
const ACTION_INTRANSITIVE: &[&str] = &["ran", "jumped", "left", "drove", "screamed", "swam"];
const EVAL_ADJECTIVES: &[&str] = &[
    "amazing", "terrible", "scary", "funny", "awful", "wonderful", "crazy", "sad",
];
const PLACES: &[&str] = &["chicago", "texas", "boston", "ohio", "denver", "miami"];
const YEARS: &[&str] = &["1995", "2003", "1987", "2010", "1979"];
const RELATIVES: &[&str] = &["uncle", "grandmother", "cousin", "neighbor"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub n_clauses: usize,
    pub clauses_per_story: usize,
    /// Relative frequencies of action, evaluation, orientation.
    pub class_weights: [f64; 3],
    /// Chance that one of the three annotators dissents (agreement 2).
    pub dissent_rate: f64,
    /// Allocate labels in exactly the weighted proportions (rounded) and
    /// shuffle them, instead of sampling each clause independently.
    pub exact_proportions: bool,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_clauses: 600,
            clauses_per_story: 6,
            class_weights: [0.35, 0.40, 0.25],
            dissent_rate: 0.2,
            exact_proportions: false,
            seed: 0,
        }
    }
}

fn pick<'a>(rng: &mut ChaCha8Rng, words: &[&'a str]) -> &'a str {
    words.choose(rng).copied().unwrap()
}

/// Tagged tokens for one clause of the given type.
pub fn synthetic_clause_tokens(label: ClauseType, rng: &mut ChaCha8Rng) -> Vec<Token> {
    let mut out: Vec<(&str, &str)> = Vec::new();
    match label {
        ClauseType::Action => match rng.gen_range(0..3) {
            0 => out.extend([
                (pick(rng, SUBJECTS), "PRP"),
                (pick(rng, ACTION_VERBS), "VBD"),
                ("the", "DT"),
                (pick(rng, OBJECTS), "NN"),
            ]),
            1 => out.extend([
                ("then", "RB"),
                (pick(rng, SUBJECTS), "PRP"),
                (pick(rng, ACTION_INTRANSITIVE), "VBD"),
            ]),
            _ => out.extend([
                (pick(rng, SUBJECTS), "PRP"),
                (pick(rng, ACTION_INTRANSITIVE), "VBD"),
                ("and", "CC"),
                (pick(rng, ACTION_VERBS), "VBD"),
                ("it", "PRP"),
            ]),
        },
        ClauseType::Evaluation => match rng.gen_range(0..3) {
            0 => out.extend([
                ("it", "PRP"),
                ("was", "VBD"),
                ("really", "RB"),
                (pick(rng, EVAL_ADJECTIVES), "JJ"),
            ]),
            1 => out.extend([
                ("that", "DT"),
                ("must", "MD"),
                ("be", "VB"),
                ("so", "RB"),
                (pick(rng, EVAL_ADJECTIVES), "JJ"),
            ]),
            _ => out.extend([
                (pick(rng, SUBJECTS), "PRP"),
                ("felt", "VBD"),
                (pick(rng, EVAL_ADJECTIVES), "JJ"),
                ("and", "CC"),
                (pick(rng, EVAL_ADJECTIVES), "JJ"),
            ]),
        },
        ClauseType::Orientation => match rng.gen_range(0..3) {
            0 => out.extend([
                ("this", "DT"),
                ("was", "VBD"),
                ("in", "IN"),
                (pick(rng, YEARS), "CD"),
            ]),
            1 => out.extend([
                (pick(rng, SUBJECTS), "PRP"),
                ("lived", "VBD"),
                ("in", "IN"),
                (pick(rng, PLACES), "NNP"),
            ]),
            _ => out.extend([
                ("my", "PRP$"),
                (pick(rng, RELATIVES), "NN"),
                ("worked", "VBD"),
                ("at", "IN"),
                (pick(rng, PLACES), "NNP"),
            ]),
        },
        ClauseType::NotStory => out.extend([("um", "UH"), ("yeah", "UH")]),
    }
    out.into_iter().map(|(w, t)| Token::new(w, Some(t.to_string()))).collect()
}

fn annotations(label: ClauseType, dissent: bool, rng: &mut ChaCha8Rng) -> Result<AnnotationSet> {
    let mut labels = [label; 3];
    if dissent {
        let others: Vec<ClauseType> = ClauseType::NARRATIVE.iter().copied().filter(|&l| l != label).collect();
        let who = rng.gen_range(0..3);
        labels[who] = pick_label(rng, &others);
    }
    AnnotationSet::new(
        labels
            .iter()
            .enumerate()
            .map(|(i, &l)| Annotation {
                annotator: format!("a{i}"),
                label: l,
            })
            .collect(),
    )
}

fn pick_label(rng: &mut ChaCha8Rng, labels: &[ClauseType]) -> ClauseType {
    labels.choose(rng).copied().unwrap()
}

/// Annotated, tagged stories with gold labels already aggregated.
pub fn separable_corpus(config: &SyntheticConfig) -> Result<Vec<Story>> {
    if config.n_clauses == 0 || config.clauses_per_story == 0 {
        return Err(Error::InvalidArgument("synthetic corpus needs clauses".into()));
    }
    let total: f64 = config.class_weights.iter().sum();
    if total.is_nan() || total <= 0.0 || config.class_weights.iter().any(|&w| w < 0.0) {
        return Err(Error::InvalidArgument("class weights must be non-negative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let planned: Vec<ClauseType> = if config.exact_proportions {
        let n = config.n_clauses;
        let mut labels = Vec::with_capacity(n);
        for (k, &w) in config.class_weights.iter().enumerate() {
            let count = if k == 2 {
                n - labels.len()
            } else {
                ((w / total * n as f64).round() as usize).min(n - labels.len())
            };
            labels.extend(std::iter::repeat_n(ClauseType::NARRATIVE[k], count));
        }
        labels.shuffle(&mut rng);
        labels
    } else {
        (0..config.n_clauses)
            .map(|_| {
                let mut u = rng.gen::<f64>() * total;
                for (k, &w) in config.class_weights.iter().enumerate() {
                    if u < w {
                        return ClauseType::NARRATIVE[k];
                    }
                    u -= w;
                }
                ClauseType::NARRATIVE[2]
            })
            .collect()
    };
    let mut stories = Vec::new();
    let mut clauses = Vec::new();
    for (i, &label) in planned.iter().enumerate() {
        let story_idx = i / config.clauses_per_story;
        let story_id = format!("syn-{story_idx:04}");
        let tokens = synthetic_clause_tokens(label, &mut rng);
        let mut clause = Clause::new(&story_id, clauses.len(), tokens);
        let dissent = rng.gen::<f64>() < config.dissent_rate;
        clause.annotations = annotations(label, dissent, &mut rng)?;
        clauses.push(clause);
        if clauses.len() == config.clauses_per_story || i + 1 == config.n_clauses {
            stories.push(Story::new(story_id, std::mem::take(&mut clauses)));
        }
    }
    aggregate_corpus(&mut stories, config.seed)?;
    Ok(stories)
}
