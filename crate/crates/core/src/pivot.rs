//! Literal word-for-word translation through pluggable backends.
//!
//! Every source token maps to exactly one pivot token, so annotations on the
//! pivot side can be copied back position by position. Backends that
//! translate phrases rather than words are asked for one quoted word at a
//! time; the quotes are stripped from the reply.

use std::collections::HashMap;
use std::fmt;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::RwLock;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::conllu::{Features, Upos};
use crate::error::{Error, Result};

/// How a single word is isolated before it is sent to a backend.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quoting {
    #[default]
    None,
    /// `'word'`
    Single,
    /// `"word"`
    Double,
}

impl Quoting {
    pub fn wrap(self, word: &str) -> String {
        match self {
            Quoting::None => word.to_owned(),
            Quoting::Single => format!("'{word}'"),
            Quoting::Double => format!("\"{word}\""),
        }
    }

    /// Removes the quote pair a backend echoes around its answer. Typographic
    /// variants are accepted because MT systems often normalize quotes.
    pub fn strip(self, text: &str) -> &str {
        let text = text.trim();
        let pairs: &[(char, char)] = match self {
            Quoting::None => return text,
            Quoting::Single => &[('\'', '\''), ('‘', '’'), ('‚', '‘')],
            Quoting::Double => &[('"', '"'), ('“', '”'), ('„', '“'), ('«', '»')],
        };
        for &(open, close) in pairs {
            if let Some(inner) = text.strip_prefix(open).and_then(|t| t.strip_suffix(close)) {
                return inner.trim();
            }
        }
        text
    }
}

impl std::str::FromStr for Quoting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Quoting::None),
            "single" => Ok(Quoting::Single),
            "double" => Ok(Quoting::Double),
            other => Err(Error::invalid(format!("unknown quoting mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendError {
    /// The backend has no translation; retrying will not help.
    NotFound,
    Timeout,
    Transport(String),
}

impl fmt::Display for BackendError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackendError::NotFound => f.write_str("no translation"),
            BackendError::Timeout => f.write_str("timed out"),
            BackendError::Transport(m) => write!(f, "transport error: {m}"),
        }
    }
}

/// A translation service answering one request at a time.
pub trait TranslationBackend: Send + Sync {
    /// Translates `request`, which may carry quoting around the word.
    fn translate(&self, request: &str) -> std::result::Result<String, BackendError>;

    fn name(&self) -> &str;
}

/// Returns every word unchanged.
#[derive(Debug, Default, Clone)]
pub struct Identity;

impl TranslationBackend for Identity {
    fn translate(&self, request: &str) -> std::result::Result<String, BackendError> {
        Ok(request.to_owned())
    }

    fn name(&self) -> &str {
        "identity"
    }
}

/// Dictionary lookup; quotes around the request are ignored.
#[derive(Debug, Default, Clone)]
pub struct StaticLexicon {
    entries: HashMap<String, String>,
}

impl StaticLexicon {
    pub fn new<I, K, V>(entries: I) -> Self
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        StaticLexicon {
            entries: entries
                .into_iter()
                .map(|(k, v)| (k.into(), v.into()))
                .collect(),
        }
    }

    /// Reads a `source<TAB>target` file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(StaticLexicon {
            entries: read_lexicon_tsv(path.as_ref())?,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl TranslationBackend for StaticLexicon {
    fn translate(&self, request: &str) -> std::result::Result<String, BackendError> {
        let word = Quoting::Double.strip(Quoting::Single.strip(request));
        self.entries
            .get(word)
            .cloned()
            .ok_or(BackendError::NotFound)
    }

    fn name(&self) -> &str {
        "lexicon"
    }
}

#[derive(Serialize)]
struct RemoteRequest<'a> {
    text: &'a str,
    direction: &'a str,
}

#[derive(Deserialize)]
struct RemoteReply {
    translation: String,
}

/// HTTP service speaking `POST {"text", "direction"}` → `{"translation"}`.
/// Adapters for real MT endpoints sit behind this contract.
pub struct RemoteService {
    endpoint: String,
    direction: String,
    agent: ureq::Agent,
}

impl RemoteService {
    pub fn new(endpoint: impl Into<String>, direction: impl Into<String>, timeout: Duration) -> Result<Self> {
        let endpoint = endpoint.into();
        if !endpoint.starts_with("http://") && !endpoint.starts_with("https://") {
            return Err(Error::invalid(format!("remote endpoint '{endpoint}' is not an http(s) URL")));
        }
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(true)
            .build()
            .into();
        Ok(RemoteService {
            endpoint,
            direction: direction.into(),
            agent,
        })
    }
}

impl TranslationBackend for RemoteService {
    fn translate(&self, request: &str) -> std::result::Result<String, BackendError> {
        let body = RemoteRequest {
            text: request,
            direction: &self.direction,
        };
        let map_err = |e: ureq::Error| match e {
            ureq::Error::Timeout(_) => BackendError::Timeout,
            ureq::Error::Io(io) if io.kind() == std::io::ErrorKind::TimedOut => BackendError::Timeout,
            other => BackendError::Transport(other.to_string()),
        };
        let mut resp = self.agent.post(&self.endpoint).send_json(&body).map_err(map_err)?;
        let reply: RemoteReply = resp.body_mut().read_json().map_err(map_err)?;
        Ok(reply.translation)
    }

    fn name(&self) -> &str {
        "remote"
    }
}

/// Word translations remembered across calls and runs.
#[derive(Debug, Default)]
pub struct LexiconCache {
    entries: RwLock<HashMap<String, String>>,
    hits: AtomicU64,
    misses: AtomicU64,
    path: Option<PathBuf>,
}

impl LexiconCache {
    pub fn new() -> Self {
        LexiconCache::default()
    }

    /// Opens a cache persisted at `path`; a missing file gives an empty cache.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let entries = if path.exists() {
            read_lexicon_tsv(&path)?
        } else {
            HashMap::new()
        };
        Ok(LexiconCache {
            entries: RwLock::new(entries),
            path: Some(path),
            ..LexiconCache::default()
        })
    }

    pub fn get(&self, word: &str) -> Option<String> {
        let found = self.entries.read().expect("cache lock").get(word).cloned();
        match found {
            Some(_) => self.hits.fetch_add(1, Ordering::Relaxed),
            None => self.misses.fetch_add(1, Ordering::Relaxed),
        };
        found
    }

    pub fn insert(&self, word: impl Into<String>, translation: impl Into<String>) {
        self.entries
            .write()
            .expect("cache lock")
            .insert(word.into(), translation.into());
    }

    pub fn hits(&self) -> u64 {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> u64 {
        self.misses.load(Ordering::Relaxed)
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn snapshot(&self) -> HashMap<String, String> {
        self.entries.read().expect("cache lock").clone()
    }

    /// Writes the cache to its path, sorted by source word. No-op for an
    /// in-memory cache.
    pub fn save(&self) -> Result<()> {
        match &self.path {
            Some(p) => self.save_to(p),
            None => Ok(()),
        }
    }

    pub fn save_to(&self, path: &Path) -> Result<()> {
        let entries = self.entries.read().expect("cache lock");
        let mut sorted: Vec<_> = entries.iter().collect();
        sorted.sort();
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        for (k, v) in sorted {
            writeln!(out, "{k}\t{v}")?;
        }
        out.flush()?;
        Ok(())
    }
}

fn read_lexicon_tsv(path: &Path) -> Result<HashMap<String, String>> {
    let text = std::fs::read_to_string(path)?;
    let mut map = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(i + 1, "expected 'source<TAB>target'"))?;
        if k.is_empty() || v.is_empty() || v.contains('\t') {
            return Err(Error::parse(i + 1, "expected 'source<TAB>target'"));
        }
        map.insert(k.to_owned(), v.to_owned());
    }
    Ok(map)
}

/// Outcome of translating one word.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WordTranslation {
    pub word: String,
    pub from_cache: bool,
    /// The backend failed and the source word was kept.
    pub fallback: bool,
    /// The backend returned several words and only the first was kept.
    pub collapsed: bool,
}

/// A backend plus quoting policy, retry budget and cache.
pub struct TranslatorClient {
    backend: Box<dyn TranslationBackend>,
    pub quoting: Quoting,
    pub max_retries: u32,
    cache: LexiconCache,
    calls: AtomicU64,
    fallbacks: AtomicU64,
    collapsed: AtomicU64,
}

impl fmt::Debug for TranslatorClient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TranslatorClient")
            .field("backend", &self.backend.name())
            .field("quoting", &self.quoting)
            .field("max_retries", &self.max_retries)
            .finish()
    }
}

impl TranslatorClient {
    pub fn new(backend: impl TranslationBackend + 'static) -> Self {
        TranslatorClient {
            backend: Box::new(backend),
            quoting: Quoting::None,
            max_retries: 2,
            cache: LexiconCache::new(),
            calls: AtomicU64::new(0),
            fallbacks: AtomicU64::new(0),
            collapsed: AtomicU64::new(0),
        }
    }

    pub fn identity() -> Self {
        TranslatorClient::new(Identity)
    }

    pub fn with_quoting(mut self, quoting: Quoting) -> Self {
        self.quoting = quoting;
        self
    }

    pub fn with_retries(mut self, max_retries: u32) -> Self {
        self.max_retries = max_retries;
        self
    }

    pub fn with_cache(mut self, cache: LexiconCache) -> Self {
        self.cache = cache;
        self
    }

    pub fn backend_name(&self) -> &str {
        self.backend.name()
    }

    pub fn cache(&self) -> &LexiconCache {
        &self.cache
    }

    /// Requests sent to the backend, retries included.
    pub fn backend_calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn fallbacks(&self) -> u64 {
        self.fallbacks.load(Ordering::Relaxed)
    }

    pub fn collapsed(&self) -> u64 {
        self.collapsed.load(Ordering::Relaxed)
    }

    /// Translates one word, consulting the cache first. Backend failures
    /// degrade to the source word after `max_retries` retries.
    pub fn translate_word_detailed(&self, word: &str) -> Result<WordTranslation> {
        if word.is_empty() || word.chars().any(char::is_whitespace) {
            return Err(Error::invalid(format!(
                "'{word}' is not a single non-empty word"
            )));
        }
        if let Some(hit) = self.cache.get(word) {
            return Ok(WordTranslation {
                word: hit,
                from_cache: true,
                fallback: false,
                collapsed: false,
            });
        }
        let request = self.quoting.wrap(word);
        let mut attempts = 0;
        let reply = loop {
            self.calls.fetch_add(1, Ordering::Relaxed);
            match self.backend.translate(&request) {
                Ok(r) => break Some(r),
                Err(BackendError::NotFound) => break None,
                Err(_) if attempts < self.max_retries => attempts += 1,
                Err(_) => break None,
            }
        };
        let translated = reply.and_then(|r| {
            let stripped = self.quoting.strip(&r);
            let mut items = stripped.split_whitespace();
            let first = items.next()?.to_owned();
            Some((first, items.next().is_some()))
        });
        match translated {
            Some((w, collapsed)) => {
                if collapsed {
                    self.collapsed.fetch_add(1, Ordering::Relaxed);
                }
                self.cache.insert(word, w.clone());
                Ok(WordTranslation {
                    word: w,
                    from_cache: false,
                    fallback: false,
                    collapsed,
                })
            }
            None => {
                self.fallbacks.fetch_add(1, Ordering::Relaxed);
                Ok(WordTranslation {
                    word: word.to_owned(),
                    from_cache: false,
                    fallback: true,
                    collapsed: false,
                })
            }
        }
    }

    pub fn translate_word(&self, word: &str) -> Result<String> {
        self.translate_word_detailed(word).map(|t| t.word)
    }

    /// Translates token by token; the pivot always has the source's length.
    pub fn translate_sentence<S: AsRef<str>>(&self, tokens: &[S]) -> Result<PivotSentence> {
        if tokens.is_empty() {
            return Err(Error::invalid("cannot translate an empty sentence"));
        }
        let mut pivot = PivotSentence {
            source_tokens: Vec::with_capacity(tokens.len()),
            pivot_tokens: Vec::with_capacity(tokens.len()),
            fallbacks: Vec::with_capacity(tokens.len()),
            pivot_annotations: None,
        };
        for t in tokens {
            let t = t.as_ref();
            let tr = self.translate_word_detailed(t)?;
            pivot.source_tokens.push(t.to_owned());
            pivot.pivot_tokens.push(tr.word);
            pivot.fallbacks.push(tr.fallback);
        }
        Ok(pivot)
    }
}

/// Annotation of one pivot token.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PivotAnnotation {
    pub upos: Option<Upos>,
    pub xpos: Option<String>,
    pub feats: Features,
    pub lemma: Option<String>,
    pub head: Option<usize>,
    pub deprel: Option<String>,
}

/// A source sentence with its positionally aligned literal translation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PivotSentence {
    pub source_tokens: Vec<String>,
    pub pivot_tokens: Vec<String>,
    /// Positions where the translator fell back to the source word.
    pub fallbacks: Vec<bool>,
    pub pivot_annotations: Option<Vec<PivotAnnotation>>,
}

impl PivotSentence {
    pub fn len(&self) -> usize {
        self.source_tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source_tokens.is_empty()
    }

    pub fn check(&self) -> Result<()> {
        let n = self.source_tokens.len();
        let ok = self.pivot_tokens.len() == n
            && self.fallbacks.len() == n
            && self.pivot_annotations.as_ref().is_none_or(|a| a.len() == n);
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("pivot sentence length differs from its source"))
        }
    }
}

#[cfg(test)]
mod tests {
    use std::sync::atomic::AtomicUsize;
    use std::sync::Arc;

    use super::*;

    /// Counts calls; fails on one chosen word.
    struct Stub {
        calls: Arc<AtomicUsize>,
        fail_on: Option<&'static str>,
        reply: fn(&str) -> String,
    }

    impl TranslationBackend for Stub {
        fn translate(&self, request: &str) -> std::result::Result<String, BackendError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            if self.fail_on.is_some_and(|w| request.contains(w)) {
                return Err(BackendError::Timeout);
            }
            Ok((self.reply)(request))
        }

        fn name(&self) -> &str {
            "stub"
        }
    }

    fn stub(fail_on: Option<&'static str>, reply: fn(&str) -> String) -> (Stub, Arc<AtomicUsize>) {
        let calls = Arc::new(AtomicUsize::new(0));
        (
            Stub {
                calls: calls.clone(),
                fail_on,
                reply,
            },
            calls,
        )
    }

    #[test]
    fn identity_backend() {
        assert_eq!(TranslatorClient::identity().translate_word("hûs").unwrap(), "hûs");
    }

    #[test]
    fn static_lexicon() {
        let client = TranslatorClient::new(StaticLexicon::new([("hûs", "huis")]));
        assert_eq!(client.translate_word("hûs").unwrap(), "huis");
        let p = TranslatorClient::new(StaticLexicon::new([("it", "het"), ("hûs", "huis")]))
            .translate_sentence(&["it", "hûs"])
            .unwrap();
        assert_eq!(p.pivot_tokens, vec!["het", "huis"]);
    }

    #[test]
    fn repeated_word_hits_cache() {
        let (backend, calls) = stub(None, |r| r.to_uppercase());
        let client = TranslatorClient::new(backend);
        let p = client.translate_sentence(&["hûs", "hûs"]).unwrap();
        assert_eq!(p.pivot_tokens, vec!["HÛS", "HÛS"]);
        assert_eq!(calls.load(Ordering::SeqCst), 1);
        assert_eq!(client.cache().hits(), 1);
    }

    #[test]
    fn timeout_falls_back_to_source_word() {
        let (backend, calls) = stub(Some("wurd"), |r| format!("nl_{r}"));
        let client = TranslatorClient::new(backend).with_retries(2);
        let p = client.translate_sentence(&["it", "wurd", "is"]).unwrap();
        assert_eq!(p.pivot_tokens, vec!["nl_it", "wurd", "nl_is"]);
        assert_eq!(p.fallbacks, vec![false, true, false]);
        assert_eq!(client.fallbacks(), 1);
        // two successes plus one initial attempt and two retries
        assert_eq!(calls.load(Ordering::SeqCst), 5);
        // failures are not cached
        assert!(client.cache().get("wurd").is_none());
    }

    #[test]
    fn multiword_reply_keeps_first_item() {
        let (backend, _) = stub(None, |_| "\"het huis\"".to_owned());
        let client = TranslatorClient::new(backend).with_quoting(Quoting::Double);
        let t = client.translate_word_detailed("hûs").unwrap();
        assert_eq!(t.word, "het");
        assert!(t.collapsed);
        assert_eq!(client.collapsed(), 1);
    }

    #[test]
    fn quoting_wrap_strip() {
        for q in [Quoting::None, Quoting::Single, Quoting::Double] {
            assert_eq!(q.strip(&q.wrap("wurd")), "wurd");
        }
        assert_eq!(Quoting::Double.strip("“wurd”"), "wurd");
        assert_eq!(Quoting::Single.strip("'wurd'"), "wurd");
    }

    #[test]
    fn rejects_whitespace_words() {
        let client = TranslatorClient::identity();
        assert!(client.translate_word("twa wurden").is_err());
        assert!(client.translate_word("").is_err());
        assert!(client.translate_sentence::<&str>(&[]).is_err());
    }

    #[test]
    fn cache_persists() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.tsv");
        let cache = LexiconCache::open(&path).unwrap();
        cache.insert("hûs", "huis");
        cache.insert("it", "het");
        cache.save().unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "hûs\thuis\nit\thet\n");
        let again = LexiconCache::open(&path).unwrap();
        assert_eq!(again.snapshot(), cache.snapshot());
    }
}
