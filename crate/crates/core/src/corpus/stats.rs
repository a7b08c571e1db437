use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use super::Story;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BigramCount {
    pub first: String,
    pub second: String,
    pub count: usize,
    /// Share of all within-clause bigrams.
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsReport {
    pub stories: usize,
    pub clauses: usize,
    pub tokens: usize,
    pub mean_clauses_per_story: f64,
    pub mean_tokens_per_clause: f64,
    pub total_bigrams: usize,
    pub top_bigrams: Vec<BigramCount>,
    /// Case-folded query word -> mean occurrences per story.
    pub word_frequency_per_story: BTreeMap<String, f64>,
}

/// Corpus-level counts. Bigrams are case-folded and never cross a clause
/// boundary; ties in the top-k list are ordered lexicographically.
pub fn corpus_stats(corpus: &[Story], top_k: usize, query_words: &[&str]) -> Result<StatsReport> {
    if corpus.is_empty() {
        return Err(Error::Empty("corpus".into()));
    }
    let mut bigrams: HashMap<(String, String), usize> = HashMap::new();
    let mut words: HashMap<String, usize> = HashMap::new();
    let mut clauses = 0usize;
    let mut tokens = 0usize;
    let mut total_bigrams = 0usize;

    for story in corpus {
        for clause in &story.clauses {
            clauses += 1;
            tokens += clause.tokens.len();
            let folded: Vec<String> = clause.tokens.iter().map(|t| t.text.to_lowercase()).collect();
            for w in &folded {
                *words.entry(w.clone()).or_default() += 1;
            }
            for pair in folded.windows(2) {
                *bigrams.entry((pair[0].clone(), pair[1].clone())).or_default() += 1;
                total_bigrams += 1;
            }
        }
    }

    let mut ranked: Vec<_> = bigrams.into_iter().collect();
    ranked.sort_by(|(a, ca), (b, cb)| cb.cmp(ca).then_with(|| a.cmp(b)));
    let top_bigrams = ranked
        .into_iter()
        .take(top_k)
        .map(|((first, second), count)| BigramCount {
            first,
            second,
            count,
            fraction: count as f64 / total_bigrams as f64,
        })
        .collect();

    let word_frequency_per_story = query_words
        .iter()
        .map(|q| {
            let q = q.to_lowercase();
            let n = words.get(&q).copied().unwrap_or(0);
            (q, n as f64 / corpus.len() as f64)
        })
        .collect();

    Ok(StatsReport {
        stories: corpus.len(),
        clauses,
        tokens,
        mean_clauses_per_story: clauses as f64 / corpus.len() as f64,
        mean_tokens_per_clause: if clauses == 0 { 0.0 } else { tokens as f64 / clauses as f64 },
        total_bigrams,
        top_bigrams,
        word_frequency_per_story,
    })
}
