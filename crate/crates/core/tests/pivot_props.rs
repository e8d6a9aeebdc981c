use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use pivotud::pivot::{BackendError, LexiconCache, Quoting, StaticLexicon, TranslationBackend, TranslatorClient};
use proptest::prelude::*;

/// Answers from a lexicon but fails on every `period`-th call.
struct Flaky {
    lexicon: StaticLexicon,
    calls: Arc<AtomicUsize>,
    period: usize,
}

impl TranslationBackend for Flaky {
    fn translate(&self, request: &str) -> Result<String, BackendError> {
        let n = self.calls.fetch_add(1, Ordering::SeqCst) + 1;
        if self.period > 0 && n.is_multiple_of(self.period) {
            return Err(BackendError::Transport("connection reset".into()));
        }
        self.lexicon.translate(request)
    }

    fn name(&self) -> &str {
        "flaky"
    }
}

/// Returns phrases so the first-word rule applies.
struct Wordy;

impl TranslationBackend for Wordy {
    fn translate(&self, request: &str) -> Result<String, BackendError> {
        Ok(format!("{request} en sa"))
    }

    fn name(&self) -> &str {
        "wordy"
    }
}

fn lexicon() -> StaticLexicon {
    StaticLexicon::new([("hy", "hij"), ("sliept", "slaapt"), ("yn", "in"), ("it", "het"), ("hûs", "huis")])
}

fn words() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(
        prop_oneof![
            prop::sample::select(vec!["hy", "sliept", "yn", "it", "hûs"]).prop_map(str::to_owned),
            "[a-zûâê]{1,6}",
        ],
        1..12,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn pivot_keeps_length(ws in words(), period in 0usize..4, retries in 0u32..3, quote in any::<bool>()) {
        let backend = Flaky { lexicon: lexicon(), calls: Arc::new(AtomicUsize::new(0)), period };
        let mut client = TranslatorClient::new(backend).with_retries(retries);
        if quote {
            client = client.with_quoting(Quoting::Double);
        }
        let p = client.translate_sentence(&ws).unwrap();
        prop_assert_eq!(p.len(), ws.len());
        prop_assert_eq!(p.fallbacks.len(), ws.len());
        p.check().unwrap();
        let q = TranslatorClient::new(Wordy).translate_sentence(&ws).unwrap();
        prop_assert_eq!(q.pivot_tokens, ws.clone());
    }

    #[test]
    fn warm_cache_makes_no_calls(ws in words()) {
        let calls = Arc::new(AtomicUsize::new(0));
        let cache = LexiconCache::new();
        let cold = TranslatorClient::new(Flaky { lexicon: lexicon(), calls: calls.clone(), period: 0 });
        let first = cold.translate_sentence(&ws).unwrap();
        for (w, t) in ws.iter().zip(&first.pivot_tokens) {
            cache.insert(w.clone(), t.clone());
        }
        let before = calls.load(Ordering::SeqCst);
        let warm = TranslatorClient::new(Flaky { lexicon: lexicon(), calls: calls.clone(), period: 0 }).with_cache(cache);
        let second = warm.translate_sentence(&ws).unwrap();
        prop_assert_eq!(calls.load(Ordering::SeqCst), before);
        prop_assert_eq!(second.pivot_tokens, first.pivot_tokens);
    }

    #[test]
    fn quoting_round_trips(w in "[^'\"‘’‚“”„«»\\s]{1,10}") {
        for q in [Quoting::None, Quoting::Single, Quoting::Double] {
            let wrapped = q.wrap(&w);
            prop_assert_eq!(q.strip(&wrapped), w.as_str());
        }
    }
}

#[test]
fn retries_recover_from_transient_failures() {
    let calls = Arc::new(AtomicUsize::new(0));
    let client = TranslatorClient::new(Flaky {
        lexicon: lexicon(),
        calls: calls.clone(),
        period: 2,
    })
    .with_retries(1);
    let p = client.translate_sentence(&["hy", "sliept"]).unwrap();
    assert_eq!(p.pivot_tokens, ["hij", "slaapt"]);
    assert_eq!(p.fallbacks, [false, false]);
    assert_eq!(calls.load(Ordering::SeqCst), 3);
}

#[test]
fn unknown_words_fall_back_to_source() {
    let client = TranslatorClient::new(lexicon());
    let p = client.translate_sentence(&["hy", "fytst"]).unwrap();
    assert_eq!(p.pivot_tokens, ["hij", "fytst"]);
    assert_eq!(p.fallbacks, [false, true]);
    assert_eq!(client.fallbacks(), 1);
}

#[test]
fn cache_persists_between_runs() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cache.tsv");
    let client = TranslatorClient::new(lexicon()).with_cache(LexiconCache::open(&path).unwrap());
    client.translate_sentence(&["hy", "yn", "it", "hûs"]).unwrap();
    client.cache().save().unwrap();
    let reopened = LexiconCache::open(&path).unwrap();
    assert_eq!(reopened.len(), 4);
    assert_eq!(reopened.get("hûs").as_deref(), Some("huis"));
    assert_eq!(std::fs::read_to_string(&path).unwrap().lines().next(), Some("hy\thij"));
}
