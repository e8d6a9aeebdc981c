use std::sync::OnceLock;

use pivotud::aligner::AlignmentLink;
use pivotud::corpus_stats::{cooccurrence, genre_table, upos_frequencies, GenreCounts};
use pivotud::pivot::{StaticLexicon, TranslatorClient};
use pivotud::projection::{project_direct, project_via_alignment, project_via_pivot, ProcedureKind};
use pivotud::synth::grammar_corpus;
use pivotud::trainer::train_pipeline;
use pivotud::{parse_conllu, serialize_conllu, Document, PipelineModel, TrainConfig, Upos};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn model() -> &'static PipelineModel {
    static MODEL: OnceLock<PipelineModel> = OnceLock::new();
    MODEL.get_or_init(|| {
        let cfg = TrainConfig {
            tagger_epochs: 2,
            parser_epochs: 2,
            ..TrainConfig::default()
        };
        train_pipeline(&grammar_corpus(120, 50), &Document::new(), &cfg).unwrap()
    })
}

fn every_token_tagged(doc: &Document) -> bool {
    doc.tokens().all(|t| t.upos.is_some() && t.head.is_some() && t.deprel.is_some())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn identity_pivot_equals_direct(seed in any::<u64>()) {
        let doc = grammar_corpus(8, seed);
        let direct = project_direct(&doc, model()).unwrap();
        let pivot = project_via_pivot(&doc, &TranslatorClient::identity(), model()).unwrap();
        prop_assert_eq!(direct.document, pivot.document);
    }

    #[test]
    fn projections_are_total(seed in any::<u64>(), keep in 0.0f64..1.0) {
        let doc = grammar_corpus(6, seed);
        let lexicon = StaticLexicon::new(doc.tokens().map(|t| (t.form.clone(), format!("{}x", t.form))));
        let pivot = project_via_pivot(&doc, &TranslatorClient::new(lexicon), model()).unwrap();
        pivot.check().unwrap();
        prop_assert!(every_token_tagged(&pivot.document));
        for (s, prov) in doc.sentences.iter().zip(&pivot.provenance) {
            for (t, p) in s.tokens.iter().zip(prov) {
                prop_assert_eq!(p.kind, ProcedureKind::PivotTranslation);
                prop_assert_eq!(p.pivot.clone(), Some(format!("{}x", t.form)));
            }
        }

        let annotated = project_direct(&doc, model()).unwrap().document;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let links: Vec<Vec<AlignmentLink>> = doc
            .sentences
            .iter()
            .map(|s| {
                let mut targets: Vec<usize> = (0..s.len()).collect();
                targets.shuffle(&mut rng);
                let n = ((s.len() as f64) * keep) as usize;
                targets[..n].iter().map(|&t| AlignmentLink::new((t + 1) % s.len(), t)).collect()
            })
            .collect();
        let aligned = project_via_alignment(&annotated, &doc, &links).unwrap();
        aligned.check().unwrap();
        prop_assert!(every_token_tagged(&aligned.document));
        let with_misc = aligned.with_provenance_misc();
        let text = serialize_conllu(&with_misc).unwrap();
        prop_assert_eq!(parse_conllu(&text).unwrap(), with_misc);
    }

    #[test]
    fn cooccurrence_ignores_token_order(seed in any::<u64>()) {
        let doc = grammar_corpus(30, seed);
        let mut shuffled = doc.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        for s in &mut shuffled.sentences {
            s.tokens.shuffle(&mut rng);
        }
        for filter in [Upos::Adp, Upos::Noun, Upos::Verb] {
            prop_assert_eq!(cooccurrence(&doc, filter, 1), cooccurrence(&shuffled, filter, 1));
        }
    }

    #[test]
    fn frequencies_sum_to_token_count(seed in any::<u64>()) {
        let doc = grammar_corpus(20, seed);
        let total: u64 = upos_frequencies(&doc).unwrap().iter().map(|(_, c)| c).sum();
        prop_assert_eq!(total as usize, doc.token_count());
    }

    #[test]
    fn percentages_are_within_rounding(rows in prop::collection::vec((1u64..50_000, 0u64..50_000, 1u64..5_000), 1..8)) {
        let counts: Vec<GenreCounts> = rows
            .iter()
            .enumerate()
            .map(|(i, &(t, w, s))| GenreCounts { genre: format!("g{i}"), tokens: t, words: w.min(t), sentences: s })
            .collect();
        let table = genre_table(&counts).unwrap();
        for (r, c) in table.rows.iter().zip(&counts) {
            let exact = |x: u64, total: u64| if total == 0 { 0.0 } else { 100.0 * x as f64 / total as f64 };
            prop_assert!((r.token_pct as f64 - exact(c.tokens, table.total_tokens)).abs() <= 0.5 + 1e-9);
            prop_assert!((r.word_pct as f64 - exact(c.words, table.total_words)).abs() <= 0.5 + 1e-9);
            prop_assert!((r.sentence_pct as f64 - exact(c.sentences, table.total_sentences)).abs() <= 0.5 + 1e-9);
        }
    }
}

#[test]
fn alignment_projection_marks_fallbacks() {
    let doc = grammar_corpus(1, 3);
    let annotated = project_direct(&doc, model()).unwrap().document;
    let n = doc.sentences[0].len();
    let links = vec![(1..n).map(|i| AlignmentLink::new(i, i)).collect::<Vec<_>>()];
    let p = project_via_alignment(&annotated, &doc, &links).unwrap();
    assert_eq!(p.document.sentences[0].tokens[0].upos, Some(Upos::X));
    assert!(p.provenance[0][0].fallback);
    let misc = p.with_provenance_misc();
    assert!(misc.sentences[0].tokens[0].misc.as_deref().unwrap().contains("Fallback=Yes"));
    assert!(misc.sentences[0].tokens[1].misc.as_deref().unwrap().contains("Link=1-1"));
}

#[test]
fn untrained_model_is_rejected() {
    let doc = grammar_corpus(2, 1);
    assert!(project_direct(&doc, &PipelineModel::default()).is_err());
}
