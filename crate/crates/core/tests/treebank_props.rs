use narrclause::treebank::{parse_bracketed, segment_sentence, segment_story, ParseNode};
use proptest::prelude::*;

const PHRASES: &[&str] = &["S", "SBAR", "SINV", "SQ", "NP", "VP", "PP", "ADJP", "FRAG"];
const TAGS: &[&str] = &["NN", "VBD", "PRP", "DT", "IN", "CC", "RB", "JJ", ",", "."];

fn tree() -> impl Strategy<Value = ParseNode> {
    let leaf = (prop::sample::select(TAGS), "[a-z]{1,6}").prop_map(|(t, w)| ParseNode::leaf(t, w));
    leaf.prop_recursive(5, 60, 4, |inner| {
        (prop::sample::select(PHRASES), prop::collection::vec(inner, 1..4))
            .prop_map(|(label, children)| ParseNode::phrase(label, children))
    })
}

fn sentence() -> impl Strategy<Value = ParseNode> {
    prop::collection::vec(tree(), 1..4).prop_map(|c| ParseNode::phrase("ROOT", vec![ParseNode::phrase("S", c)]))
}

proptest! {
    #[test]
    fn bracketed_round_trip(t in sentence()) {
        prop_assert_eq!(parse_bracketed(&t.to_bracketed()).unwrap(), t);
    }

    #[test]
    fn segmentation_conserves_tokens_in_order(t in sentence()) {
        let spans = segment_sentence(&t).unwrap();
        let covered: Vec<String> = spans.iter().flat_map(|s| s.tokens.iter().map(|k| k.text.clone())).collect();
        let leaves: Vec<String> = t.leaves().into_iter().map(|(w, _)| w.to_string()).collect();
        prop_assert_eq!(covered, leaves);
        prop_assert!(spans.iter().all(|s| !s.tokens.is_empty()));
    }

    #[test]
    fn segmentation_is_deterministic(ts in prop::collection::vec(sentence(), 1..4)) {
        let a = segment_story(&ts).unwrap();
        let b = segment_story(&ts).unwrap();
        prop_assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(x.text(), y.text());
            prop_assert_eq!(x.source_sentence, y.source_sentence);
        }
        let mut last = 0;
        for s in &a {
            prop_assert!(s.source_sentence >= last);
            last = s.source_sentence;
        }
    }
}

#[test]
fn coordinated_clauses_split_and_subordinate_clause_stays() {
    let t = parse_bracketed(
        "(ROOT (S (S (NP (PRP I)) (VP (VBD ran))) (CC and) (S (NP (PRP she)) (VP (VBD left) (SBAR (IN because) (S (NP (PRP it)) (VP (VBD rained)))))) (. .)))",
    )
    .unwrap();
    let spans = segment_sentence(&t).unwrap();
    let texts: Vec<String> = spans.iter().map(|s| s.text()).collect();
    assert_eq!(texts, vec!["I ran", "and she left because it rained ."]);
}

#[test]
fn malformed_brackets_are_rejected() {
    assert!(parse_bracketed("(S (NP (PRP I)) (VP (VBD ran))").is_err());
    assert!(parse_bracketed("(S (NP (PRP I))))").is_err());
    assert!(parse_bracketed("").is_err());
}
