//! Story-pair similarity restricted to one clause type, and the selection and
//! reporting around the forced-choice similarity experiments.

mod encoder;
mod report;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{ClauseType, Story};
use crate::error::{Error, Result};

pub use encoder::{MeanWordVectorEncoder, PrecomputedEncoder, SentenceEncoder};
pub use report::{
    aspect_mention_report, detection_report, load_choice_records, read_choice_records, AspectMentionReport,
    ChoiceRecord, DetectionReport, DetectionRow, Presentation,
};

/// The clause subset a similarity is computed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Aspect {
    Only(ClauseType),
    /// Every narrative clause.
    All,
}

impl Aspect {
    pub fn admits(self, label: ClauseType) -> bool {
        match self {
            Aspect::Only(t) => t == label,
            Aspect::All => label.is_narrative(),
        }
    }
}

impl fmt::Display for Aspect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Aspect::Only(t) => f.write_str(t.as_str()),
            Aspect::All => f.write_str("all"),
        }
    }
}

impl FromStr for Aspect {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("all") {
            return Ok(Aspect::All);
        }
        let t: ClauseType = s
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("unknown aspect `{s}`")))?;
        if !t.is_narrative() {
            return Err(Error::InvalidArgument(format!("`{s}` is not a narrative aspect")));
        }
        Ok(Aspect::Only(t))
    }
}

impl TryFrom<String> for Aspect {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Aspect> for String {
    fn from(a: Aspect) -> String {
        a.to_string()
    }
}

/// Where the clause labels used for filtering came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSource {
    Gold,
    Predicted,
    Mixed,
}

/// `u·v / (|u| |v|)`, or 0 when either vector is zero. Clamped to [-1, 1].
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::Dimension {
            expected: u.len(),
            found: v.len(),
            context: "cosine operands".into(),
        });
    }
    Ok(cosine_unchecked(u, v))
}

fn cosine_unchecked(u: &[f64], v: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut nu = 0.0;
    let mut nv = 0.0;
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return 0.0;
    }
    (dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0)
}

/// For each vector of `s`, its best cosine in `t` (first index wins ties),
/// and the mean of those maxima.
fn directed(s: &[&[f64]], t: &[&[f64]]) -> (f64, Vec<(usize, f64)>) {
    let best: Vec<(usize, f64)> = s
        .iter()
        .map(|u| {
            let mut best = (0, f64::NEG_INFINITY);
            for (j, v) in t.iter().enumerate() {
                let c = cosine_unchecked(u, v);
                if c > best.1 {
                    best = (j, c);
                }
            }
            best
        })
        .collect();
    let mean = best.iter().map(|b| b.1).sum::<f64>() / best.len() as f64;
    (mean, best)
}

fn check_dims(s: &[Vec<f64>], t: &[Vec<f64>]) -> Result<()> {
    let d = s[0].len();
    if let Some(v) = s.iter().chain(t).find(|v| v.len() != d) {
        return Err(Error::Dimension {
            expected: d,
            found: v.len(),
            context: "clause vectors".into(),
        });
    }
    Ok(())
}

/// Mean over `s` of each vector's best cosine against `s_prime`.
pub fn directed_score(s: &[Vec<f64>], s_prime: &[Vec<f64>]) -> Result<f64> {
    if s.is_empty() || s_prime.is_empty() {
        return Err(Error::Empty("clause vector list".into()));
    }
    check_dims(s, s_prime)?;
    let a: Vec<&[f64]> = s.iter().map(Vec::as_slice).collect();
    let b: Vec<&[f64]> = s_prime.iter().map(Vec::as_slice).collect();
    Ok(directed(&a, &b).0)
}

/// Average of the two directed scores.
pub fn symmetric_score(s: &[Vec<f64>], t: &[Vec<f64>]) -> Result<f64> {
    Ok((directed_score(s, t)? + directed_score(t, s)?) / 2.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClauseVector {
    /// Index of the clause within its story.
    pub index: usize,
    pub label: ClauseType,
    pub from_gold: bool,
    pub vector: Vec<f64>,
}

/// A story's labeled narrative clauses with their sentence vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedStory {
    pub story_id: String,
    pub clauses: Vec<ClauseVector>,
}

impl EncodedStory {
    pub fn aspect_clauses(&self, aspect: Aspect) -> Vec<&ClauseVector> {
        self.clauses.iter().filter(|c| aspect.admits(c.label)).collect()
    }

    pub fn has_aspect(&self, aspect: Aspect) -> bool {
        self.clauses.iter().any(|c| aspect.admits(c.label))
    }
}

/// Encodes every clause that has a narrative label (gold, else predicted).
pub fn encode_story(story: &Story, encoder: &dyn SentenceEncoder) -> Result<EncodedStory> {
    let mut clauses = Vec::new();
    for clause in &story.clauses {
        let Some(label) = clause.label() else { continue };
        if !label.is_narrative() {
            continue;
        }
        let vector = encoder.encode(&clause.text())?;
        if vector.len() != encoder.dim() {
            return Err(Error::Dimension {
                expected: encoder.dim(),
                found: vector.len(),
                context: format!("{} output", encoder.name()),
            });
        }
        clauses.push(ClauseVector {
            index: clause.index,
            label,
            from_gold: clause.gold.is_some(),
            vector,
        });
    }
    Ok(EncodedStory {
        story_id: story.story_id.clone(),
        clauses,
    })
}

pub fn encode_corpus(corpus: &[Story], encoder: &dyn SentenceEncoder) -> Result<Vec<EncodedStory>> {
    corpus.par_iter().map(|s| encode_story(s, encoder)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    pub clause: usize,
    pub best_match: usize,
    pub cosine: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub story_a: String,
    pub story_b: String,
    pub aspect: Aspect,
    pub score: f64,
    pub a_to_b: f64,
    pub b_to_a: f64,
    pub alignments_a: Vec<Alignment>,
    pub alignments_b: Vec<Alignment>,
    pub label_source_a: LabelSource,
    pub label_source_b: LabelSource,
}

fn label_source(clauses: &[&ClauseVector]) -> LabelSource {
    let gold = clauses.iter().filter(|c| c.from_gold).count();
    if gold == clauses.len() {
        LabelSource::Gold
    } else if gold == 0 {
        LabelSource::Predicted
    } else {
        LabelSource::Mixed
    }
}

fn undefined(story: &EncodedStory, aspect: Aspect) -> Error {
    Error::UndefinedAspect {
        story: story.story_id.clone(),
        aspect: aspect.to_string(),
    }
}

/// Score with alignments; an error if either story lacks the aspect.
pub fn pair_score_encoded(a: &EncodedStory, b: &EncodedStory, aspect: Aspect) -> Result<PairScore> {
    let ca = a.aspect_clauses(aspect);
    let cb = b.aspect_clauses(aspect);
    if ca.is_empty() {
        return Err(undefined(a, aspect));
    }
    if cb.is_empty() {
        return Err(undefined(b, aspect));
    }
    let va: Vec<&[f64]> = ca.iter().map(|c| c.vector.as_slice()).collect();
    let vb: Vec<&[f64]> = cb.iter().map(|c| c.vector.as_slice()).collect();
    if let Some(v) = va.iter().chain(&vb).find(|v| v.len() != va[0].len()) {
        return Err(Error::Dimension {
            expected: va[0].len(),
            found: v.len(),
            context: "clause vectors".into(),
        });
    }
    let (a_to_b, best_a) = directed(&va, &vb);
    let (b_to_a, best_b) = directed(&vb, &va);
    let align = |from: &[&ClauseVector], to: &[&ClauseVector], best: Vec<(usize, f64)>| {
        from.iter()
            .zip(best)
            .map(|(c, (j, cos))| Alignment {
                clause: c.index,
                best_match: to[j].index,
                cosine: cos,
            })
            .collect()
    };
    Ok(PairScore {
        story_a: a.story_id.clone(),
        story_b: b.story_id.clone(),
        aspect,
        score: (a_to_b + b_to_a) / 2.0,
        a_to_b,
        b_to_a,
        alignments_a: align(&ca, &cb, best_a),
        alignments_b: align(&cb, &ca, best_b),
        label_source_a: label_source(&ca),
        label_source_b: label_source(&cb),
    })
}

/// Encodes both stories and scores them on `aspect`.
pub fn pair_score(a: &Story, b: &Story, aspect: Aspect, encoder: &dyn SentenceEncoder) -> Result<PairScore> {
    pair_score_encoded(&encode_story(a, encoder)?, &encode_story(b, encoder)?, aspect)
}

/// Score on `aspect`, or `None` when either story lacks it.
pub fn aspect_score(a: &EncodedStory, b: &EncodedStory, aspect: Aspect) -> Result<Option<f64>> {
    match pair_score_encoded(a, b, aspect) {
        Ok(p) => Ok(Some(p.score)),
        Err(Error::UndefinedAspect { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

fn narrative_aspect(aspect: ClauseType) -> Result<()> {
    if aspect.is_narrative() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("`{aspect}` is not a narrative aspect")))
    }
}

fn other_aspects(aspect: ClauseType) -> impl Iterator<Item = ClauseType> {
    ClauseType::NARRATIVE.into_iter().filter(move |&t| t != aspect)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSelection {
    pub aspect: ClauseType,
    pub threshold: f64,
    pub n: usize,
    pub seed: u64,
    /// Return an empty list instead of an error when nothing qualifies.
    pub allow_empty: bool,
}

impl PairSelection {
    pub fn new(aspect: ClauseType, n: usize, seed: u64) -> Self {
        PairSelection {
            aspect,
            threshold: 0.5,
            n,
            seed,
            allow_empty: false,
        }
    }
}

/// Whether `(a, b)` reaches the threshold on `aspect` and stays below it on
/// both other aspects. A missing other aspect counts as below threshold.
pub fn is_exclusive_match(
    a: &EncodedStory,
    b: &EncodedStory,
    aspect: ClauseType,
    threshold: f64,
) -> Result<bool> {
    match aspect_score(a, b, Aspect::Only(aspect))? {
        Some(s) if s >= threshold => {}
        _ => return Ok(false),
    }
    for other in other_aspects(aspect) {
        if aspect_score(a, b, Aspect::Only(other))?.is_some_and(|s| s >= threshold) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Story pairs matched only at `selection.aspect`. When more than `n` pairs
/// qualify, `n` are drawn with a seeded generator. Pairs are reported with
/// the lower story id first, in ascending order.
pub fn select_exclusive_pairs(stories: &[EncodedStory], selection: &PairSelection) -> Result<Vec<PairScore>> {
    narrative_aspect(selection.aspect)?;
    let mut order: Vec<&EncodedStory> = stories.iter().collect();
    order.sort_by(|x, y| x.story_id.cmp(&y.story_id));
    let pairs: Vec<(usize, usize)> = (0..order.len())
        .flat_map(|i| (i + 1..order.len()).map(move |j| (i, j)))
        .collect();
    let flags: Vec<bool> = pairs
        .par_iter()
        .map(|&(i, j)| is_exclusive_match(order[i], order[j], selection.aspect, selection.threshold))
        .collect::<Result<_>>()?;
    let eligible: Vec<(usize, usize)> =
        pairs.into_iter().zip(flags).filter(|(_, ok)| *ok).map(|(p, _)| p).collect();
    if eligible.is_empty() {
        if selection.allow_empty {
            return Ok(Vec::new());
        }
        return Err(Error::NoCandidates(format!(
            "no pair reaches {} on {} alone",
            selection.threshold, selection.aspect
        )));
    }
    let chosen: Vec<(usize, usize)> = if eligible.len() > selection.n {
        let mut rng = ChaCha8Rng::seed_from_u64(selection.seed);
        let mut idx = rand::seq::index::sample(&mut rng, eligible.len(), selection.n).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|k| eligible[k]).collect()
    } else {
        eligible
    };
    chosen
        .into_iter()
        .map(|(i, j)| pair_score_encoded(order[i], order[j], Aspect::Only(selection.aspect)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistractorChoice {
    pub story_id: String,
    pub aspect_score: f64,
    /// Largest score on the other two aspects; -1 when neither is defined.
    pub off_aspect_max: f64,
}

/// Among stories scoring at least `threshold` with `anchor` on `aspect`, the
/// one whose best score on the other aspects is lowest. Undefined aspects
/// count as -1; ties go to the lowest story id.
pub fn select_distractor_story(
    stories: &[EncodedStory],
    anchor: &str,
    aspect: ClauseType,
    threshold: f64,
) -> Result<DistractorChoice> {
    narrative_aspect(aspect)?;
    let anchor_story = stories
        .iter()
        .find(|s| s.story_id == anchor)
        .ok_or_else(|| Error::InvalidArgument(format!("anchor story `{anchor}` not in corpus")))?;
    let candidates: Vec<Option<DistractorChoice>> = stories
        .par_iter()
        .filter(|s| s.story_id != anchor)
        .map(|s| {
            let Some(score) = aspect_score(anchor_story, s, Aspect::Only(aspect))? else {
                return Ok(None);
            };
            if score < threshold {
                return Ok(None);
            }
            let mut off = -1.0f64;
            for other in other_aspects(aspect) {
                if let Some(v) = aspect_score(anchor_story, s, Aspect::Only(other))? {
                    off = off.max(v);
                }
            }
            Ok(Some(DistractorChoice {
                story_id: s.story_id.clone(),
                aspect_score: score,
                off_aspect_max: off,
            }))
        })
        .collect::<Result<_>>()?;
    candidates
        .into_iter()
        .flatten()
        .min_by(|x, y| {
            x.off_aspect_max
                .total_cmp(&y.off_aspect_max)
                .then_with(|| x.story_id.cmp(&y.story_id))
        })
        .ok_or_else(|| {
            Error::NoCandidates(format!("no story reaches {threshold} on {aspect} with `{anchor}`"))
        })
}
