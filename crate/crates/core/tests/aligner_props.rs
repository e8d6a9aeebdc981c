use pivotud::aligner::{train_aligner, train_aligner_traced, viterbi_align, AlignerConfig, AlignmentLink, SentencePair};
use proptest::prelude::*;

fn bitext_strategy() -> impl Strategy<Value = Vec<SentencePair>> {
    let side = || prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "d", "e", "f"]), 1..6);
    prop::collection::vec((side(), side()), 1..30)
        .prop_map(|pairs| pairs.iter().map(|(s, t)| SentencePair::new(s, t)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn rows_stay_normalized(bitext in bitext_strategy(), lambda in 0.0f64..8.0, iters in 1usize..6) {
        for i in 1..=iters {
            let cfg = AlignerConfig { iterations: i, diagonal_tension: lambda, ..AlignerConfig::default() };
            let t = train_aligner(&bitext, &cfg).unwrap();
            for s in t.row_sums() {
                prop_assert!((s - 1.0).abs() <= 1e-9, "row sum {} after {} iterations", s, i);
            }
        }
    }

    #[test]
    fn log_likelihood_never_drops(bitext in bitext_strategy()) {
        let cfg = AlignerConfig { iterations: 10, diagonal_tension: 0.0, ..AlignerConfig::default() };
        let ll = train_aligner_traced(&bitext, &cfg).unwrap().log_likelihood;
        for w in ll.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-9, "{:?}", ll);
        }
    }

    #[test]
    fn links_stay_in_bounds(bitext in bitext_strategy()) {
        let cfg = AlignerConfig::default();
        let t = train_aligner(&bitext, &cfg).unwrap();
        for p in &bitext {
            let links = viterbi_align(p, &t, &cfg);
            let mut targets: Vec<usize> = links.iter().map(|l| l.tgt_index).collect();
            targets.dedup();
            prop_assert_eq!(targets.len(), links.len());
            for l in links {
                prop_assert!(l.src_index < p.source.len() && l.tgt_index < p.target.len());
            }
        }
    }
}

#[test]
fn random_toy_bitext_is_monotone() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(100);
    let vocab = ["a", "b", "c", "d", "e"];
    let bitext: Vec<SentencePair> = (0..100)
        .map(|_| {
            let s: Vec<&str> = (0..rng.random_range(1..5)).map(|_| vocab[rng.random_range(0..5)]).collect();
            let t: Vec<&str> = (0..rng.random_range(1..5)).map(|_| vocab[rng.random_range(0..5)]).collect();
            SentencePair::new(&s, &t)
        })
        .collect();
    let cfg = AlignerConfig {
        iterations: 10,
        ..AlignerConfig::default()
    };
    let ll = train_aligner_traced(&bitext, &cfg).unwrap().log_likelihood;
    assert!(ll.windows(2).all(|w| w[1] >= w[0] - 1e-9), "{ll:?}");
}

#[test]
fn bijective_bitext_aligns_to_identity() {
    let src = ["een", "twee", "drie", "vier"];
    let tgt = ["ien", "twa", "trije", "fjouwer"];
    let mut bitext = Vec::new();
    for len in 1..=4 {
        for start in 0..=4 - len {
            bitext.push(SentencePair::new(&src[start..start + len], &tgt[start..start + len]));
        }
    }
    let cfg = AlignerConfig {
        iterations: 10,
        diagonal_tension: 20.0,
        ..AlignerConfig::default()
    };
    let t = train_aligner(&bitext, &cfg).unwrap();
    for p in &bitext {
        let links = viterbi_align(p, &t, &cfg);
        let identity: Vec<AlignmentLink> = (0..p.source.len()).map(|i| AlignmentLink::new(i, i)).collect();
        assert_eq!(links, identity);
    }
}

#[test]
fn training_is_deterministic() {
    let bitext = vec![
        SentencePair::new(&["de", "man"], &["de", "man"]),
        SentencePair::new(&["it", "hûs"], &["het", "huis"]),
        SentencePair::new(&["de", "hûs"], &["het", "huis"]),
    ];
    let cfg = AlignerConfig::default();
    let a = serde_json::to_string(&train_aligner(&bitext, &cfg).unwrap()).unwrap();
    let b = serde_json::to_string(&train_aligner(&bitext, &cfg).unwrap()).unwrap();
    assert_eq!(a, b);
}
