use pivotud::trainer::tagger::upos_accuracy;
use pivotud::trainer::{check_tree, decode_with_scores, train_pipeline};
use pivotud::synth::grammar_corpus;
use pivotud::{AnnotateInput, Document, EvalSetting, PipelineModel, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn thousand_token_fixture() -> Document {
    let corpus = grammar_corpus(400, 12);
    let mut picked = Vec::new();
    let mut n = 0;
    for (i, s) in corpus.sentences.iter().enumerate() {
        if n >= 1000 {
            break;
        }
        n += s.tokens.len();
        picked.push(i);
    }
    corpus.select(&picked)
}

#[test]
fn save_and_load_preserve_predictions() {
    let train = thousand_token_fixture();
    assert!(train.token_count() >= 1000);
    let cfg = TrainConfig {
        tagger_epochs: 3,
        parser_epochs: 3,
        ..TrainConfig::default()
    };
    let model = train_pipeline(&train, &Document::new(), &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.pivotud");
    model.save(&path).unwrap();
    let loaded = PipelineModel::load(&path).unwrap();
    assert_eq!(loaded, model);

    let probe = grammar_corpus(150, 13);
    assert!(probe.token_count() >= 1000);
    let raw = probe.text();
    for setting in EvalSetting::ALL {
        let input = match setting {
            EvalSetting::RawText => AnnotateInput::Raw(&raw),
            _ => AnnotateInput::Tokenized(&probe),
        };
        let a = model.annotate(input, setting).unwrap();
        let b = loaded.annotate(input, setting).unwrap();
        assert_eq!(a, b);
    }
    assert_eq!(model.to_text().unwrap(), loaded.to_text().unwrap());
}

#[test]
fn random_weight_parses_are_trees() {
    let mut rng = ChaCha8Rng::seed_from_u64(10_000);
    for i in 0..10_000 {
        let n = rng.random_range(1..=25);
        let classes = 1 + 2 * rng.random_range(1..=6);
        let heads = decode_with_scores(n, || (0..classes).map(|_| rng.random_range(-1.0..1.0)).collect());
        assert_eq!(heads.len(), n);
        check_tree(&heads).unwrap_or_else(|e| panic!("parse {i}: {e} in {heads:?}"));
    }
}

#[test]
fn unambiguous_corpus_is_memorized() {
    let train = grammar_corpus(200, 31);
    let cfg = TrainConfig::default();
    let model = train_pipeline(&train, &Document::new(), &cfg).unwrap();
    assert_eq!(upos_accuracy(&model.tagger, &train.sentences), 1.0);
    let parsed = model.annotate(AnnotateInput::Tokenized(&train), EvalSetting::GoldTokMorph).unwrap();
    for (g, s) in train.sentences.iter().zip(&parsed.sentences) {
        for (x, y) in g.tokens.iter().zip(&s.tokens) {
            assert_eq!(x.head, y.head, "{:?}", g.sent_id());
        }
    }
}

#[test]
fn training_is_reproducible() {
    let train = grammar_corpus(60, 2);
    let dev = grammar_corpus(10, 3);
    let cfg = TrainConfig {
        tagger_epochs: 2,
        parser_epochs: 2,
        seed: 42,
        ..TrainConfig::default()
    };
    let a = train_pipeline(&train, &dev, &cfg).unwrap();
    let b = train_pipeline(&train, &dev, &cfg).unwrap();
    assert_eq!(a.to_text().unwrap(), b.to_text().unwrap());
}
