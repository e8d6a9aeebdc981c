//! Scoring of system output against gold annotation.
//!
//! Words are matched by their character span in the document's text with
//! all whitespace removed, so gold and system may tokenize differently.
//! Each attribute score is an F1 over matched words:
//! `2 * correct / (gold words + system words)`. When both sides share the
//! tokenization this is plain accuracy.

pub mod cv;
pub mod stats;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::conllu::{Document, Token};
use crate::error::{Error, Result};
use crate::trainer::EvalSetting;

pub use cv::{cross_validate, evaluate_model, summarize, summarize_values, summary_tsv, CrossValidationPlan, CvOutcome, Fold, FoldSummary, MetricSummary};
pub use stats::{bootstrap_median_compare, fisher_exact, BootstrapResult, ContingencyTable2x2};

pub const METRIC_NAMES: [&str; 9] = [
    "f1 words", "f1 sents", "UPOS", "XPOS", "UFeats", "AllTags", "Lemma", "UAS", "LAS",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub setting: EvalSetting,
    pub f1_words: Option<f64>,
    pub f1_sents: Option<f64>,
    pub upos: Option<f64>,
    pub xpos: Option<f64>,
    pub ufeats: Option<f64>,
    pub alltags: Option<f64>,
    pub lemma: Option<f64>,
    pub uas: f64,
    pub las: f64,
    pub gold_words: usize,
    pub system_words: usize,
    pub matched_words: usize,
    pub gold_sentences: usize,
    pub system_sentences: usize,
    pub matched_sentences: usize,
}

impl EvalReport {
    /// Values in [`METRIC_NAMES`] order; absent metrics are `None`.
    pub fn metrics(&self) -> [Option<f64>; 9] {
        [
            self.f1_words,
            self.f1_sents,
            self.upos,
            self.xpos,
            self.ufeats,
            self.alltags,
            self.lemma,
            Some(self.uas),
            Some(self.las),
        ]
    }
}

/// Rounds a percentage to one decimal, halves away from zero.
pub fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

type Key = (usize, usize, usize);

struct Indexed<'a> {
    /// Whitespace-free text.
    chars: String,
    /// Per sentence, the span key of each word.
    keys: Vec<Vec<Key>>,
    sentence_spans: Vec<(usize, usize)>,
    tokens: Vec<Vec<&'a Token>>,
}

fn index(doc: &Document) -> Indexed<'_> {
    let mut chars = String::new();
    let mut offset = 0;
    let mut keys = Vec::with_capacity(doc.sentences.len());
    let mut sentence_spans = Vec::with_capacity(doc.sentences.len());
    let mut tokens = Vec::with_capacity(doc.sentences.len());
    for s in &doc.sentences {
        let start = offset;
        let mut k = vec![(0, 0, 0); s.tokens.len()];
        for u in s.surface_units() {
            let mut len = 0;
            for c in u.form.chars().filter(|c| !c.is_whitespace()) {
                chars.push(c);
                len += 1;
            }
            for (sub, slot) in k[u.first..=u.last].iter_mut().enumerate() {
                *slot = (offset, offset + len, sub);
            }
            offset += len;
        }
        sentence_spans.push((start, offset));
        keys.push(k);
        tokens.push(s.tokens.iter().collect());
    }
    Indexed {
        chars,
        keys,
        sentence_spans,
        tokens,
    }
}

fn f1(correct: usize, gold: usize, system: usize) -> f64 {
    if gold + system == 0 {
        100.0
    } else {
        100.0 * 2.0 * correct as f64 / (gold + system) as f64
    }
}

fn head_key(idx: &Indexed, sent: usize, head: Option<usize>) -> Option<Option<Key>> {
    match head {
        None => None,
        Some(0) => Some(None),
        Some(h) => idx.keys[sent].get(h - 1).map(|k| Some(*k)),
    }
}

/// Scores `system` against `gold`. Both must spell the same text once
/// whitespace is removed.
pub fn evaluate(gold: &Document, system: &Document, setting: EvalSetting) -> Result<EvalReport> {
    let g = index(gold);
    let s = index(system);
    if g.chars != s.chars {
        let at = g
            .chars
            .chars()
            .zip(s.chars.chars())
            .take_while(|(a, b)| a == b)
            .count();
        return Err(Error::invalid(format!(
            "gold and system texts differ (first difference at non-space character {at})"
        )));
    }

    let mut sys_pos: HashMap<Key, (usize, usize)> = HashMap::new();
    for (si, ks) in s.keys.iter().enumerate() {
        for (ti, k) in ks.iter().enumerate() {
            sys_pos.insert(*k, (si, ti));
        }
    }

    let gold_words: usize = g.keys.iter().map(Vec::len).sum();
    let system_words: usize = s.keys.iter().map(Vec::len).sum();
    let mut matched = 0;
    let mut c = [0usize; 7];
    for (gi, ks) in g.keys.iter().enumerate() {
        for (ti, k) in ks.iter().enumerate() {
            let Some(&(si, sj)) = sys_pos.get(k) else {
                continue;
            };
            matched += 1;
            let gt = g.tokens[gi][ti];
            let st = s.tokens[si][sj];
            let upos = gt.upos == st.upos;
            let xpos = gt.xpos == st.xpos;
            let feats = gt.feats == st.feats;
            let gh = head_key(&g, gi, gt.head);
            let uas = gh.is_some() && gh == head_key(&s, si, st.head);
            c[0] += usize::from(upos);
            c[1] += usize::from(xpos);
            c[2] += usize::from(feats);
            c[3] += usize::from(upos && xpos && feats);
            c[4] += usize::from(gt.lemma == st.lemma);
            c[5] += usize::from(uas);
            c[6] += usize::from(uas && gt.deprel == st.deprel);
        }
    }

    let sys_sents: std::collections::HashSet<(usize, usize)> = s.sentence_spans.iter().copied().collect();
    let matched_sentences = g
        .sentence_spans
        .iter()
        .filter(|sp| sys_sents.contains(sp))
        .count();

    let m = |i: usize| f1(c[i], gold_words, system_words);
    let raw = setting == EvalSetting::RawText;
    let morph = setting != EvalSetting::GoldTokMorph;
    Ok(EvalReport {
        setting,
        f1_words: raw.then(|| f1(matched, gold_words, system_words)),
        f1_sents: raw.then(|| f1(matched_sentences, g.sentence_spans.len(), s.sentence_spans.len())),
        upos: morph.then(|| m(0)),
        xpos: morph.then(|| m(1)),
        ufeats: morph.then(|| m(2)),
        alltags: morph.then(|| m(3)),
        lemma: morph.then(|| m(4)),
        uas: m(5),
        las: m(6),
        gold_words,
        system_words,
        matched_words: matched,
        gold_sentences: g.sentence_spans.len(),
        system_sentences: s.sentence_spans.len(),
        matched_sentences,
    })
}
