use narrclause::matcher::{cosine, directed_score, symmetric_score};
use proptest::prelude::*;

fn vector() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, 6)
}

fn clauses() -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(vector(), 1..10)
}

proptest! {
    #[test]
    fn cosine_is_bounded_and_symmetric(u in vector(), v in vector()) {
        let c = cosine(&u, &v).unwrap();
        prop_assert!((-1.0..=1.0).contains(&c));
        prop_assert_eq!(c, cosine(&v, &u).unwrap());
    }

    #[test]
    fn symmetric_score_is_exactly_symmetric(a in clauses(), b in clauses()) {
        let ab = symmetric_score(&a, &b).unwrap();
        prop_assert_eq!(ab.to_bits(), symmetric_score(&b, &a).unwrap().to_bits());
        prop_assert!((-1.0..=1.0).contains(&ab));
    }

    #[test]
    fn self_score_is_one(a in clauses()) {
        prop_assume!(a.iter().all(|v| v.iter().any(|&x| x != 0.0)));
        prop_assert!((symmetric_score(&a, &a).unwrap() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn duplicate_target_clause_leaves_directed_score(a in clauses(), mut b in clauses(), k in any::<prop::sample::Index>()) {
        let before = directed_score(&a, &b).unwrap();
        let dup = b[k.index(b.len())].clone();
        b.push(dup);
        prop_assert_eq!(before.to_bits(), directed_score(&a, &b).unwrap().to_bits());
    }
}

#[test]
fn zero_vector_cosine_is_zero() {
    assert_eq!(cosine(&[0.0, 0.0], &[1.0, 2.0]).unwrap(), 0.0);
    assert!(cosine(&[1.0], &[1.0, 2.0]).is_err());
    assert!(directed_score(&[], &[vec![1.0]]).is_err());
}
