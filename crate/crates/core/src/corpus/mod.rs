//! Stories, clauses and their crowd annotations.
//!
//! A corpus is a list of [`Story`] values loaded from JSON lines. Gold labels
//! are never read from disk; [`aggregate_corpus`] derives them from the
//! per-annotator labels by majority vote.

mod aggregate;
mod io;
mod split;
mod stats;
mod tokenize;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

pub use aggregate::{
    aggregate_corpus, aggregate_gold_label, agreement_counts, clause_seed, label_distribution,
    AgreementCounts, LabelStat,
};
pub use io::{load_corpus, read_corpus, write_corpus, ClauseRecord, StoryRecord};
pub use split::{split_dataset, DatasetSplit, SplitOptions};
pub use stats::{corpus_stats, BigramCount, StatsReport};
pub use tokenize::tokenize;

/// Number of annotators assigned to each story.
pub const ANNOTATORS_PER_STORY: usize = 3;

/// Labov clause types, plus the annotators' escape hatch for non-narrative
/// material.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClauseType {
    Action,
    Evaluation,
    Orientation,
    NotStory,
}

impl ClauseType {
    pub const ALL: [ClauseType; 4] = [
        ClauseType::Action,
        ClauseType::Evaluation,
        ClauseType::Orientation,
        ClauseType::NotStory,
    ];

    /// The three narrative types in classifier output order.
    pub const NARRATIVE: [ClauseType; 3] = [
        ClauseType::Action,
        ClauseType::Evaluation,
        ClauseType::Orientation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ClauseType::Action => "action",
            ClauseType::Orientation => "orientation",
            ClauseType::Evaluation => "evaluation",
            ClauseType::NotStory => "not_story",
        }
    }

    pub fn is_narrative(self) -> bool {
        self != ClauseType::NotStory
    }
}

impl fmt::Display for ClauseType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClauseType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace(['-', ' '], "_").as_str() {
            "action" => Ok(ClauseType::Action),
            "orientation" => Ok(ClauseType::Orientation),
            "evaluation" => Ok(ClauseType::Evaluation),
            "not_story" | "notstory" => Ok(ClauseType::NotStory),
            other => Err(Error::InvalidArgument(format!("unknown clause type `{other}`"))),
        }
    }
}

/// A single token with its (optional) Penn Treebank tag.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pos: Option<String>,
}

impl Token {
    /// Panics if `text` is empty or contains whitespace.
    pub fn new(text: impl Into<String>, pos: Option<String>) -> Self {
        let text = text.into();
        assert!(is_valid_token(&text), "invalid token text {text:?}");
        Token { text, pos }
    }
}

pub(crate) fn is_valid_token(text: &str) -> bool {
    !text.is_empty() && !text.chars().any(char::is_whitespace)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub annotator: String,
    pub label: ClauseType,
}

/// Labels from distinct annotators for one clause, in file order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AnnotationSet(Vec<Annotation>);

impl AnnotationSet {
    pub fn new(labels: Vec<Annotation>) -> Result<Self, Error> {
        if labels.len() > ANNOTATORS_PER_STORY {
            return Err(Error::InvalidArgument(format!(
                "{} annotations exceed the {} assigned annotators",
                labels.len(),
                ANNOTATORS_PER_STORY
            )));
        }
        for (i, a) in labels.iter().enumerate() {
            if labels[..i].iter().any(|b| b.annotator == a.annotator) {
                return Err(Error::InvalidArgument(format!(
                    "annotator `{}` appears twice",
                    a.annotator
                )));
            }
        }
        Ok(AnnotationSet(labels))
    }

    /// Builds a set with synthetic annotator ids `a0`, `a1`, ...
    pub fn from_labels(labels: &[ClauseType]) -> Result<Self, Error> {
        AnnotationSet::new(
            labels
                .iter()
                .enumerate()
                .map(|(i, &label)| Annotation {
                    annotator: format!("a{i}"),
                    label,
                })
                .collect(),
        )
    }

    pub fn iter(&self) -> impl Iterator<Item = &Annotation> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn count(&self, label: ClauseType) -> usize {
        self.0.iter().filter(|a| a.label == label).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clause {
    pub clause_id: String,
    pub story_id: String,
    pub index: usize,
    pub tokens: Vec<Token>,
    #[serde(default)]
    pub annotations: AnnotationSet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<ClauseType>,
    /// Number of annotators whose label equals `gold`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agreement: Option<u8>,
    /// Label assigned by a classifier, when the clause has been run through one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted: Option<ClauseType>,
}

impl Clause {
    pub fn make_id(story_id: &str, index: usize) -> String {
        format!("{story_id}:{index}")
    }

    /// Unannotated clause built from whitespace-free tokens.
    pub fn new(story_id: &str, index: usize, tokens: Vec<Token>) -> Self {
        Clause {
            clause_id: Clause::make_id(story_id, index),
            story_id: story_id.to_string(),
            index,
            tokens,
            annotations: AnnotationSet::default(),
            gold: None,
            agreement: None,
            predicted: None,
        }
    }

    pub fn text(&self) -> String {
        self.tokens
            .iter()
            .map(|t| t.text.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn has_pos(&self) -> bool {
        self.tokens.iter().all(|t| t.pos.is_some())
    }

    /// Gold label when present, otherwise the classifier prediction.
    pub fn label(&self) -> Option<ClauseType> {
        self.gold.or(self.predicted)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Story {
    pub story_id: String,
    pub clauses: Vec<Clause>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speaker_gender: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcript: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_seconds: Option<f64>,
}

impl Story {
    pub fn new(story_id: impl Into<String>, clauses: Vec<Clause>) -> Self {
        Story {
            story_id: story_id.into(),
            clauses,
            speaker_gender: None,
            transcript: None,
            duration_seconds: None,
        }
    }

    /// Builds a story from already-tokenized clause texts.
    pub fn from_texts(story_id: &str, texts: &[&str]) -> Self {
        let clauses = texts
            .iter()
            .enumerate()
            .map(|(i, text)| {
                let tokens = tokenize(text).into_iter().map(|t| Token::new(t, None)).collect();
                Clause::new(story_id, i, tokens)
            })
            .collect();
        Story::new(story_id, clauses)
    }

    /// Checks the positional and ownership invariants of the clause list.
    pub fn validate(&self) -> Result<(), Error> {
        for (i, c) in self.clauses.iter().enumerate() {
            if c.index != i {
                return Err(Error::InvalidArgument(format!(
                    "story `{}`: clause at position {i} has index {}",
                    self.story_id, c.index
                )));
            }
            if c.story_id != self.story_id {
                return Err(Error::InvalidArgument(format!(
                    "story `{}`: clause `{}` belongs to `{}`",
                    self.story_id, c.clause_id, c.story_id
                )));
            }
            if c.tokens.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "clause `{}` has no tokens",
                    c.clause_id
                )));
            }
        }
        Ok(())
    }
}

/// Iterates every clause of every story in corpus order.
pub fn all_clauses(corpus: &[Story]) -> impl Iterator<Item = &Clause> {
    corpus.iter().flat_map(|s| s.clauses.iter())
}
