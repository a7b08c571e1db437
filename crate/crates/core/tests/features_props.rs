use narrclause::corpus::{Clause, Story, Token};
use narrclause::features::{
    build_vocab, clause_matrix, pos_feature_vector, EmbeddingTable, PosTagset, EMBEDDING_DIM, PENN_TAGS, POS_DIM,
};
use proptest::prelude::*;

fn tagged_clause() -> impl Strategy<Value = Clause> {
    let tag = prop_oneof![prop::sample::select(PENN_TAGS.to_vec()), Just("XYZ")];
    prop::collection::vec(("[a-zA-Z]{1,8}", tag), 1..20).prop_map(|toks| {
        let tokens = toks.into_iter().map(|(w, t)| Token::new(w, Some(t.to_string()))).collect();
        Clause::new("f", 0, tokens)
    })
}

fn fixture_vocab() -> narrclause::features::Vocabulary {
    let story = Story::from_texts("v", &["the dog ran home", "it was a Good day", "the day ended"]);
    build_vocab(&story.clauses, 0, true).unwrap()
}

proptest! {
    #[test]
    fn vocabulary_is_closed(token in "\\PC{0,12}") {
        let vocab = fixture_vocab();
        prop_assert!(vocab.lookup(&token) < vocab.len());
    }

    #[test]
    fn matrix_width_and_one_hot_rows(clause in tagged_clause(), pad in 0usize..30) {
        let vocab = fixture_vocab();
        let table = EmbeddingTable::random(&vocab, EMBEDDING_DIM, 3);
        let tagset = PosTagset::penn();
        let m = clause_matrix(&clause, &vocab, &table, &tagset, pad).unwrap();
        prop_assert_eq!(m.ncols(), EMBEDDING_DIM + POS_DIM);
        prop_assert_eq!(m.ncols(), 345);
        prop_assert_eq!(m.nrows(), clause.tokens.len().max(pad));
        for (r, row) in m.rows().into_iter().enumerate() {
            let pos = row.slice(ndarray::s![EMBEDDING_DIM..]);
            let hot = pos.iter().filter(|&&v| v != 0.0).count();
            let known = clause.tokens.get(r).and_then(|t| tagset.index(t.pos.as_deref().unwrap()));
            prop_assert_eq!(hot, usize::from(known.is_some()));
            if r >= clause.tokens.len() {
                prop_assert!(row.iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn indicators_match_counts(clause in tagged_clause()) {
        let tagset = PosTagset::penn();
        let v = pos_feature_vector(&clause, &tagset).unwrap();
        prop_assert_eq!(v.len(), 2 * POS_DIM);
        let (ind, counts) = v.split_at(POS_DIM);
        for (i, c) in ind.iter().zip(counts) {
            prop_assert_eq!(*i == 1.0, *c > 0.0);
        }
        prop_assert!(counts.iter().sum::<f64>() <= 1.0 + 1e-12);
    }
}

#[test]
fn penn_tagset_has_45_distinct_tags() {
    let tagset = PosTagset::penn();
    assert_eq!(tagset.len(), 45);
    let distinct: std::collections::HashSet<_> = tagset.tags().iter().collect();
    assert_eq!(distinct.len(), 45);
    assert_eq!(PosTagset::parse(&tagset.to_file_contents()).unwrap(), tagset);
}
