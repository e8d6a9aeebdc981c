//! In-memory model of UD-annotated text.
//!
//! A [`Document`] is an ordered list of [`Sentence`]s. Sentences hold their
//! syntactic words as [`Token`]s, optional multiword ranges, and the comment
//! block that precedes them in CoNLL-U. Reading and writing live in [`io`].

mod io;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{parse_conllu, serialize_conllu, serialize_tsv, TSV_HEADER};

/// The seventeen universal part-of-speech tags of UD v2.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Upos {
    Adj,
    Adp,
    Adv,
    Aux,
    Cconj,
    Det,
    Intj,
    Noun,
    Num,
    Part,
    Pron,
    Propn,
    Punct,
    Sconj,
    Sym,
    Verb,
    X,
}

impl Upos {
    pub const ALL: [Upos; 17] = [
        Upos::Adj,
        Upos::Adp,
        Upos::Adv,
        Upos::Aux,
        Upos::Cconj,
        Upos::Det,
        Upos::Intj,
        Upos::Noun,
        Upos::Num,
        Upos::Part,
        Upos::Pron,
        Upos::Propn,
        Upos::Punct,
        Upos::Sconj,
        Upos::Sym,
        Upos::Verb,
        Upos::X,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Upos::Adj => "ADJ",
            Upos::Adp => "ADP",
            Upos::Adv => "ADV",
            Upos::Aux => "AUX",
            Upos::Cconj => "CCONJ",
            Upos::Det => "DET",
            Upos::Intj => "INTJ",
            Upos::Noun => "NOUN",
            Upos::Num => "NUM",
            Upos::Part => "PART",
            Upos::Pron => "PRON",
            Upos::Propn => "PROPN",
            Upos::Punct => "PUNCT",
            Upos::Sconj => "SCONJ",
            Upos::Sym => "SYM",
            Upos::Verb => "VERB",
            Upos::X => "X",
        }
    }
}

impl fmt::Display for Upos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Upos {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Upos::ALL
            .iter()
            .copied()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown UPOS tag '{s}'")))
    }
}

/// Morphological features, kept sorted by key.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Features(BTreeMap<String, String>);

impl Features {
    pub fn new() -> Self {
        Features::default()
    }

    pub fn insert(&mut self, key: impl Into<String>, value: impl Into<String>) -> Option<String> {
        self.0.insert(key.into(), value.into())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

impl<K: Into<String>, V: Into<String>> FromIterator<(K, V)> for Features {
    fn from_iter<I: IntoIterator<Item = (K, V)>>(iter: I) -> Self {
        Features(
            iter.into_iter()
                .map(|(k, v)| (k.into(), v.into()))
                .collect(),
        )
    }
}

/// Renders the CoNLL-U FEATS column; the empty bundle is `_`.
impl fmt::Display for Features {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("_");
        }
        for (i, (k, v)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("|")?;
            }
            write!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

impl FromStr for Features {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut feats = Features::new();
        if s == "_" {
            return Ok(feats);
        }
        for pair in s.split('|') {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("feature '{pair}' lacks '='")))?;
            if k.is_empty() || v.is_empty() {
                return Err(Error::invalid(format!("empty key or value in feature '{pair}'")));
            }
            if feats.insert(k, v).is_some() {
                return Err(Error::invalid(format!("duplicate feature key '{k}'")));
            }
        }
        Ok(feats)
    }
}

/// Half-open character offsets into a sentence's reconstructed text.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CharSpan {
    pub start: usize,
    pub end: usize,
}

/// One syntactic word.
///
/// `span` is derived from the sentence's forms and is not part of equality.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Token {
    pub id: usize,
    pub form: String,
    pub lemma: Option<String>,
    pub upos: Option<Upos>,
    pub xpos: Option<String>,
    pub feats: Features,
    pub head: Option<usize>,
    pub deprel: Option<String>,
    pub deps: Option<String>,
    pub misc: Option<String>,
    #[serde(skip)]
    pub span: Option<CharSpan>,
}

impl PartialEq for Token {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
            && self.form == other.form
            && self.lemma == other.lemma
            && self.upos == other.upos
            && self.xpos == other.xpos
            && self.feats == other.feats
            && self.head == other.head
            && self.deprel == other.deprel
            && self.deps == other.deps
            && self.misc == other.misc
    }
}

impl Eq for Token {}

impl Token {
    pub fn new(id: usize, form: impl Into<String>) -> Self {
        Token {
            id,
            form: form.into(),
            lemma: None,
            upos: None,
            xpos: None,
            feats: Features::new(),
            head: None,
            deprel: None,
            deps: None,
            misc: None,
            span: None,
        }
    }

    /// False when MISC carries `SpaceAfter=No`.
    pub fn space_after(&self) -> bool {
        misc_get(self.misc.as_deref(), "SpaceAfter") != Some("No")
    }

    /// Drops everything but id, form and MISC.
    pub fn clear_annotation(&mut self) {
        self.lemma = None;
        self.upos = None;
        self.xpos = None;
        self.feats = Features::new();
        self.head = None;
        self.deprel = None;
        self.deps = None;
    }
}

/// Looks up `key` in a `|`-separated MISC value.
pub fn misc_get<'a>(misc: Option<&'a str>, key: &str) -> Option<&'a str> {
    misc?.split('|').find_map(|item| match item.split_once('=') {
        Some((k, v)) if k == key => Some(v),
        _ => None,
    })
}

/// Sets `key=value` in a MISC value, replacing an existing entry in place.
pub fn misc_set(misc: &mut Option<String>, key: &str, value: &str) {
    let mut items: Vec<String> = misc
        .as_deref()
        .map(|m| m.split('|').map(str::to_owned).collect())
        .unwrap_or_default();
    let entry = format!("{key}={value}");
    match items
        .iter_mut()
        .find(|item| item.split_once('=').map(|(k, _)| k) == Some(key))
    {
        Some(item) => *item = entry,
        None => items.push(entry),
    }
    *misc = Some(items.join("|"));
}

/// A surface token that spans several syntactic words (`1-2 dat's`).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultiwordRange {
    pub start: usize,
    pub end: usize,
    pub form: String,
    pub misc: Option<String>,
}

impl MultiwordRange {
    pub fn space_after(&self) -> bool {
        misc_get(self.misc.as_deref(), "SpaceAfter") != Some("No")
    }
}

/// A comment line preceding a sentence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comment {
    /// `# key = value`
    Pair { key: String, value: String },
    /// Any other comment, stored without the leading `#` and surrounding whitespace.
    Text(String),
}

/// A contiguous piece of surface text: a multiword range or a plain token.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SurfaceUnit<'a> {
    pub form: &'a str,
    /// Indices into `Sentence::tokens`, inclusive.
    pub first: usize,
    pub last: usize,
    pub space_after: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub tokens: Vec<Token>,
    pub ranges: Vec<MultiwordRange>,
    pub comments: Vec<Comment>,
}

impl Sentence {
    pub fn new() -> Self {
        Sentence::default()
    }

    /// Builds a sentence from bare forms with consecutive ids and no annotation.
    pub fn from_forms<S: AsRef<str>>(forms: &[S]) -> Self {
        Sentence {
            tokens: forms
                .iter()
                .enumerate()
                .map(|(i, f)| Token::new(i + 1, f.as_ref()))
                .collect(),
            ranges: Vec::new(),
            comments: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn comment(&self, key: &str) -> Option<&str> {
        self.comments.iter().find_map(|c| match c {
            Comment::Pair { key: k, value } if k == key => Some(value.as_str()),
            _ => None,
        })
    }

    /// Replaces the first `key = ...` comment, or appends one.
    pub fn set_comment(&mut self, key: &str, value: impl Into<String>) {
        let value = value.into();
        for c in &mut self.comments {
            if let Comment::Pair { key: k, value: v } = c {
                if k == key {
                    *v = value;
                    return;
                }
            }
        }
        self.comments.push(Comment::Pair {
            key: key.to_owned(),
            value,
        });
    }

    pub fn sent_id(&self) -> Option<&str> {
        self.comment("sent_id")
    }

    pub fn text(&self) -> Option<&str> {
        self.comment("text")
    }

    pub fn genre(&self) -> Option<&str> {
        self.comment("genre")
    }

    pub fn forms(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.form.as_str()).collect()
    }

    /// Surface units in order; words covered by a multiword range collapse
    /// into the range.
    pub fn surface_units(&self) -> Vec<SurfaceUnit<'_>> {
        let mut units = Vec::with_capacity(self.tokens.len());
        let mut ranges = self.ranges.iter().peekable();
        let mut i = 0;
        while i < self.tokens.len() {
            let id = self.tokens[i].id;
            if let Some(r) = ranges.peek() {
                if r.start == id {
                    let last = (i + r.end - r.start).min(self.tokens.len() - 1);
                    units.push(SurfaceUnit {
                        form: &r.form,
                        first: i,
                        last,
                        space_after: r.space_after(),
                    });
                    i = last + 1;
                    ranges.next();
                    continue;
                }
            }
            let t = &self.tokens[i];
            units.push(SurfaceUnit {
                form: &t.form,
                first: i,
                last: i,
                space_after: t.space_after(),
            });
            i += 1;
        }
        units
    }

    /// The sentence text implied by the forms and `SpaceAfter=No` marks.
    pub fn reconstruct_text(&self) -> String {
        let units = self.surface_units();
        let mut text = String::new();
        for (i, u) in units.iter().enumerate() {
            text.push_str(u.form);
            if u.space_after && i + 1 < units.len() {
                text.push(' ');
            }
        }
        text
    }

    /// Recomputes every token's `span` against [`Sentence::reconstruct_text`].
    /// Words inside a multiword range share the range's span.
    pub fn recompute_spans(&mut self) {
        let spans: Vec<(usize, usize, CharSpan)> = {
            let units = self.surface_units();
            let mut offset = 0;
            let mut out = Vec::with_capacity(units.len());
            for (i, u) in units.iter().enumerate() {
                let len = u.form.chars().count();
                out.push((
                    u.first,
                    u.last,
                    CharSpan {
                        start: offset,
                        end: offset + len,
                    },
                ));
                offset += len;
                if u.space_after && i + 1 < units.len() {
                    offset += 1;
                }
            }
            out
        };
        for (first, last, span) in spans {
            for t in &mut self.tokens[first..=last] {
                t.span = Some(span);
            }
        }
    }

    fn label(&self, index: usize) -> String {
        self.sent_id()
            .map(str::to_owned)
            .unwrap_or_else(|| format!("#{}", index + 1))
    }

    /// Checks the token, range and comment invariants. `index` is the
    /// sentence's position, used to name it when it has no `sent_id`.
    pub fn validate(&self, index: usize) -> Result<()> {
        let fail = |msg: String| Err(Error::validation(self.label(index), msg));
        if self.tokens.is_empty() {
            return fail("sentence has no tokens".into());
        }
        let n = self.tokens.len();
        for (i, t) in self.tokens.iter().enumerate() {
            if t.id != i + 1 {
                return fail(format!(
                    "token ids must be consecutive from 1; found {} at position {}",
                    t.id,
                    i + 1
                ));
            }
            if t.form.is_empty() {
                return fail(format!("token {} has an empty form", t.id));
            }
            let fields = [
                Some(t.form.as_str()),
                t.lemma.as_deref(),
                t.xpos.as_deref(),
                t.deprel.as_deref(),
                t.deps.as_deref(),
                t.misc.as_deref(),
            ];
            for f in fields.into_iter().flatten() {
                if f.is_empty() || f.contains(['\t', '\n', '\r']) {
                    return fail(format!("token {} has an empty field or a field with tabs/newlines", t.id));
                }
            }
            for (k, v) in t.feats.iter() {
                if k.is_empty() || v.is_empty() || (k.to_owned() + v).contains(['|', '=', '\t', '\n', ' ']) {
                    return fail(format!("token {} has a malformed feature '{k}={v}'", t.id));
                }
            }
            if let Some(h) = t.head {
                if h == t.id {
                    return fail(format!("token {} is its own head", t.id));
                }
                if h > n {
                    return fail(format!("token {} has head {h} but the sentence has {n} tokens", t.id));
                }
            }
        }
        let mut prev_end = 0;
        for r in &self.ranges {
            if r.start >= r.end {
                return fail(format!("range {}-{} is empty or reversed", r.start, r.end));
            }
            if r.start <= prev_end {
                return fail(format!("range {}-{} overlaps or is out of order", r.start, r.end));
            }
            if r.end > n {
                return fail(format!("range {}-{} exceeds the token count {n}", r.start, r.end));
            }
            if r.form.is_empty() || r.form.contains(['\t', '\n', '\r']) {
                return fail(format!("range {}-{} has an invalid form", r.start, r.end));
            }
            if let Some(m) = &r.misc {
                if m.is_empty() || m.contains(['\t', '\n', '\r']) {
                    return fail(format!("range {}-{} has an invalid misc", r.start, r.end));
                }
            }
            prev_end = r.end;
        }
        for c in &self.comments {
            let ok = match c {
                Comment::Pair { key, value } => {
                    !key.is_empty()
                        && !value.is_empty()
                        && !key.contains(" = ")
                        && key.trim() == key
                        && value.trim() == value
                        && !(key.to_owned() + value).contains(['\n', '\r'])
                }
                Comment::Text(t) => {
                    t.trim() == t && !t.contains(['\n', '\r']) && !t.contains(" = ")
                }
            };
            if !ok {
                return fail(format!("comment {c:?} cannot be written losslessly"));
            }
        }
        if let Some(text) = self.text() {
            let rebuilt = self.reconstruct_text();
            if text != rebuilt {
                return fail(format!(
                    "text comment '{text}' does not match the token forms '{rebuilt}'"
                ));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub sentences: Vec<Sentence>,
    pub metadata: BTreeMap<String, String>,
}

impl Document {
    pub fn new() -> Self {
        Document::default()
    }

    pub fn from_sentences(sentences: Vec<Sentence>) -> Self {
        Document {
            sentences,
            metadata: BTreeMap::new(),
        }
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Sentence::len).sum()
    }

    pub fn tokens(&self) -> impl Iterator<Item = &Token> {
        self.sentences.iter().flat_map(|s| s.tokens.iter())
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    /// Checks every sentence plus document-level invariants.
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for (i, s) in self.sentences.iter().enumerate() {
            s.validate(i)?;
            if let Some(id) = s.sent_id() {
                if !seen.insert(id) {
                    return Err(Error::validation(id, "duplicate sent_id"));
                }
            }
        }
        for (k, v) in &self.metadata {
            if k.is_empty() || v.is_empty() || k.contains([' ', '\n', '=']) || v.contains('\n') || v.trim() != v {
                return Err(Error::invalid(format!("metadata entry '{k}' cannot be written")));
            }
        }
        Ok(())
    }

    /// Plain text of the document: sentence texts joined by single spaces.
    pub fn text(&self) -> String {
        self.sentences
            .iter()
            .map(Sentence::reconstruct_text)
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// A copy holding only the given sentences, in the given order.
    pub fn select(&self, indices: &[usize]) -> Document {
        Document {
            sentences: indices.iter().map(|&i| self.sentences[i].clone()).collect(),
            metadata: self.metadata.clone(),
        }
    }
}
