use biasprobe::tgbi::{count_sentences, set_score, tgbi, GenderClassCounts, GenderLexicon, Manifest};
use biasprobe::lexicon::WordSetSpec;
use proptest::prelude::*;

fn counts() -> impl Strategy<Value = GenderClassCounts> {
    (0u64..40, 0u64..40, 0u64..40)
        .prop_filter("non-empty", |(a, b, c)| a + b + c > 0)
        .prop_map(|(a, b, c)| GenderClassCounts::new(format!("s{a}_{b}_{c}"), a, b, c))
}

proptest! {
    #[test]
    fn index_ignores_set_order(sets in prop::collection::vec(counts(), 1..8), seed in any::<u64>()) {
        let forward = tgbi(&sets).unwrap();
        let mut shuffled = sets.clone();
        // deterministic shuffle driven by the proptest seed
        let mut s = seed;
        for i in (1..shuffled.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            shuffled.swap(i, (s >> 33) as usize % (i + 1));
        }
        let again = tgbi(&shuffled).unwrap();
        prop_assert_eq!(forward.index, again.index);
        let mean: f64 = forward.per_set.iter().map(|p| p.score).sum::<f64>() / sets.len() as f64;
        prop_assert!((forward.index - mean).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&forward.index));
    }

    #[test]
    fn proportions_sum_to_one(c in counts()) {
        let (h, s, n) = c.proportions().unwrap();
        prop_assert!((h + s + n - 1.0).abs() <= 1e-12);
        let score = set_score(&c).unwrap();
        prop_assert!((score - (h * s + n).sqrt()).abs() < 1e-15);
    }
}

#[test]
fn sentence_counting_uses_first_match() {
    let he = WordSetSpec::new("he", "en", ["he", "him"]).unwrap();
    let she = WordSetSpec::new("she", "en", ["she", "her"]).unwrap();
    let lex = GenderLexicon::new(&he, &she).unwrap();
    let sentences = [
        "He is a doctor.",
        "She said he was late.",
        "The nurse is here.",
        "Her brother met him.",
    ];
    let mut manifest = Manifest::new();
    manifest.insert("all".into(), vec![[1, 4]]);
    manifest.insert("tail".into(), vec![[3, 4]]);
    let out = count_sentences(&sentences, &manifest, &lex).unwrap();
    assert_eq!(out[0], GenderClassCounts { both_present: 2, ..GenderClassCounts::new("all", 1, 2, 1) });
    assert_eq!(out[1], GenderClassCounts { both_present: 1, ..GenderClassCounts::new("tail", 0, 1, 1) });

    manifest.insert("bad".into(), vec![[4, 5]]);
    assert!(count_sentences(&sentences, &manifest, &lex).is_err());
    assert!(GenderLexicon::new(&he, &WordSetSpec::new("x", "en", ["him", "her"]).unwrap()).is_err());
}
