use serde::{Deserialize, Serialize};

use super::tree::{base_label, ParseNode};
use crate::corpus::{Clause, Story, Token};
use crate::error::{Error, Result};

/// Labels that open a new narrative clause when they appear directly under the
/// sentence root. SBAR is clausal too but always attaches to a neighbour.
pub const CLAUSE_LABELS: [&str; 4] = ["S", "SINV", "SBARQ", "SQ"];

/// All clausal labels of the bracketing guidelines.
pub const CLAUSAL_LABELS: [&str; 5] = ["S", "SINV", "SBAR", "SBARQ", "SQ"];

const ROOT_LABELS: [&str; 3] = ["ROOT", "TOP", ""];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClauseSpan {
    pub tokens: Vec<Token>,
    pub source_sentence: usize,
    /// Labels of the root children gathered into this clause, in order.
    pub covered_node_labels: Vec<String>,
}

impl ClauseSpan {
    pub fn text(&self) -> String {
        self.tokens
            .iter()
            .map(|t| t.text.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

fn sentence_root(tree: &ParseNode) -> &ParseNode {
    let mut node = tree;
    while let ParseNode::Phrase { label, children } = node {
        match children.as_slice() {
            [only @ ParseNode::Phrase { .. }] if ROOT_LABELS.contains(&label.as_str()) => node = only,
            _ => break,
        }
    }
    node
}

fn is_clause_initiating(node: &ParseNode) -> bool {
    !node.is_leaf() && CLAUSE_LABELS.contains(&base_label(node.label()))
}

fn tokens_of(node: &ParseNode) -> Vec<Token> {
    node.leaves()
        .into_iter()
        .map(|(word, tag)| Token {
            text: word.to_string(),
            pos: Some(tag.to_string()),
        })
        .collect()
}

/// Splits one sentence into narrative clauses.
///
/// Every clause-initiating child of the sentence root starts a clause. The
/// remaining children are hanging material: anything before a clause joins
/// it, anything after the last clause joins the last one. Without any
/// clause-initiating child the whole sentence is one clause.
pub fn segment_sentence(tree: &ParseNode) -> Result<Vec<ClauseSpan>> {
    segment_indexed(tree, 0)
}

fn segment_indexed(tree: &ParseNode, source_sentence: usize) -> Result<Vec<ClauseSpan>> {
    if tree.leaves().is_empty() {
        return Err(Error::Empty(format!("tree for sentence {source_sentence}")));
    }
    let root = sentence_root(tree);
    let whole = || ClauseSpan {
        tokens: tokens_of(root),
        source_sentence,
        covered_node_labels: vec![root.label().to_string()],
    };
    if !root.children().iter().any(is_clause_initiating) {
        return Ok(vec![whole()]);
    }

    let mut spans: Vec<ClauseSpan> = Vec::new();
    let mut pending = ClauseSpan {
        tokens: Vec::new(),
        source_sentence,
        covered_node_labels: Vec::new(),
    };
    for child in root.children() {
        pending.tokens.extend(tokens_of(child));
        pending.covered_node_labels.push(child.label().to_string());
        if is_clause_initiating(child) {
            spans.push(std::mem::replace(
                &mut pending,
                ClauseSpan {
                    tokens: Vec::new(),
                    source_sentence,
                    covered_node_labels: Vec::new(),
                },
            ));
        }
    }
    if !pending.tokens.is_empty() {
        let last = spans.last_mut().expect("at least one clause-initiating child");
        last.tokens.extend(pending.tokens);
        last.covered_node_labels.extend(pending.covered_node_labels);
    }
    Ok(spans)
}

/// Segments every sentence of a story, recording each clause's sentence index.
pub fn segment_story(trees: &[ParseNode]) -> Result<Vec<ClauseSpan>> {
    let mut out = Vec::new();
    for (i, tree) in trees.iter().enumerate() {
        out.extend(segment_indexed(tree, i)?);
    }
    Ok(out)
}

/// Turns segmented spans into an unannotated story.
pub fn spans_to_story(story_id: &str, spans: &[ClauseSpan]) -> Story {
    let clauses = spans
        .iter()
        .enumerate()
        .map(|(i, span)| Clause::new(story_id, i, span.tokens.clone()))
        .collect();
    Story::new(story_id, clauses)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::treebank::parse_bracketed;

    fn texts(spans: &[ClauseSpan]) -> Vec<String> {
        spans.iter().map(ClauseSpan::text).collect()
    }

    #[test]
    fn coordination_moves_conjunction_forward() {
        let t = parse_bracketed(
            "(S (S (NP (PRP I)) (VP (VBD left))) (CC and) (S (NP (PRP I)) (VP (VBD cried))))",
        )
        .unwrap();
        assert_eq!(texts(&segment_sentence(&t).unwrap()), vec!["I left", "and I cried"]);
    }

    #[test]
    fn simple_sentence_is_one_clause() {
        let t = parse_bracketed("(S (NP (PRP I)) (VP (VBD went)))").unwrap();
        let spans = segment_sentence(&t).unwrap();
        assert_eq!(texts(&spans), vec!["I went"]);
        assert_eq!(spans[0].tokens[1].pos.as_deref(), Some("VBD"));
    }

    #[test]
    fn root_wrapper_and_trailing_punctuation() {
        let t = parse_bracketed(
            "(ROOT (S (S (NP (PRP I)) (VP (VBD went) (PP (TO to) (NP (NN college))))) (CC and) \
             (S (NP (PRP I)) (VP (VBD realized) (SBAR (S (NP (PRP I)) (ADVP (RB actually)) \
             (VP (VBD did) (RB n't) (VP (VB wanna) (VP (VB be) (NP (DT a) (NN doctor))))))))) (. .)))",
        )
        .unwrap();
        assert_eq!(
            texts(&segment_sentence(&t).unwrap()),
            vec!["I went to college", "and I realized I actually did n't wanna be a doctor ."]
        );
    }

    #[test]
    fn top_level_sbar_attaches_to_neighbour() {
        let t = parse_bracketed(
            "(S (SBAR (IN when) (S (NP (PRP I)) (VP (VBD was)))) (, ,) (S (NP (PRP I)) (VP (VBD left))) (. .))",
        )
        .unwrap();
        let spans = segment_sentence(&t).unwrap();
        assert_eq!(texts(&spans), vec!["when I was , I left ."]);
        assert_eq!(spans[0].covered_node_labels, vec!["SBAR", ",", "S", "."]);
    }

    #[test]
    fn story_indices() {
        let a = parse_bracketed("(S (NP (PRP I)) (VP (VBD went)))").unwrap();
        let b = parse_bracketed("(S (NP (PRP I)) (VP (VBD stayed)))").unwrap();
        let spans = segment_story(&[a, b]).unwrap();
        assert_eq!(spans.iter().map(|s| s.source_sentence).collect::<Vec<_>>(), vec![0, 1]);
        assert!(segment_story(&[]).unwrap().is_empty());
        let story = spans_to_story("x", &spans);
        assert!(story.validate().is_ok());
    }

    #[test]
    fn empty_tree_is_an_error() {
        assert!(segment_sentence(&ParseNode::phrase("S", vec![])).is_err());
    }
}
