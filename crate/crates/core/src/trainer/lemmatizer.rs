//! Edit-script lemmatizer.
//!
//! Each training pair (form, lemma) yields a script: a casing step, then
//! removal of `strip` trailing characters, then an appended string. Scripts
//! are indexed by the exact form and by (suffix, UPOS) for suffixes of length
//! one to four.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::conllu::{Sentence, Upos};

pub const MAX_SUFFIX: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Casing {
    Keep,
    LowerFirst,
    LowerAll,
}

impl Casing {
    const ALL: [Casing; 3] = [Casing::Keep, Casing::LowerFirst, Casing::LowerAll];

    fn apply(self, form: &str) -> String {
        match self {
            Casing::Keep => form.to_owned(),
            Casing::LowerAll => form.to_lowercase(),
            Casing::LowerFirst => {
                let mut chars = form.chars();
                match chars.next() {
                    Some(c) => c.to_lowercase().chain(chars).collect(),
                    None => String::new(),
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EditScript {
    pub casing: Casing,
    pub strip: usize,
    pub append: String,
}

impl EditScript {
    /// The script turning `form` into `lemma`, choosing the casing step that
    /// leaves the shortest edit; earlier casings win ties.
    pub fn derive(form: &str, lemma: &str) -> EditScript {
        let lemma_chars: Vec<char> = lemma.chars().collect();
        let mut best: Option<(usize, EditScript)> = None;
        for casing in Casing::ALL {
            let cased: Vec<char> = casing.apply(form).chars().collect();
            let lcp = cased
                .iter()
                .zip(&lemma_chars)
                .take_while(|(a, b)| a == b)
                .count();
            let strip = cased.len() - lcp;
            let append: String = lemma_chars[lcp..].iter().collect();
            let cost = strip + lemma_chars.len() - lcp;
            if best.as_ref().is_none_or(|(c, _)| cost < *c) {
                best = Some((
                    cost,
                    EditScript {
                        casing,
                        strip,
                        append,
                    },
                ));
            }
        }
        best.expect("three casings").1
    }

    pub fn apply(&self, form: &str) -> Option<String> {
        let cased: Vec<char> = self.casing.apply(form).chars().collect();
        if self.strip > cased.len() || (self.strip == cased.len() && self.append.is_empty()) {
            return None;
        }
        let mut out: String = cased[..cased.len() - self.strip].iter().collect();
        out.push_str(&self.append);
        Some(out)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptCount {
    pub script: EditScript,
    pub count: u32,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lemmatizer {
    /// Keyed by `form \t UPOS`.
    forms: BTreeMap<String, Vec<ScriptCount>>,
    /// Keyed by `suffix \t UPOS`.
    suffixes: BTreeMap<String, Vec<ScriptCount>>,
}

fn key(text: &str, upos: Option<Upos>) -> String {
    format!("{text}\t{}", upos.map_or("_", Upos::as_str))
}

fn bump(map: &mut BTreeMap<String, Vec<ScriptCount>>, k: String, script: &EditScript) {
    let entry = map.entry(k).or_default();
    match entry.iter_mut().find(|sc| &sc.script == script) {
        Some(sc) => sc.count += 1,
        None => entry.push(ScriptCount {
            script: script.clone(),
            count: 1,
        }),
    }
}

fn char_suffix(form: &str, n: usize) -> Option<&str> {
    let count = form.chars().count();
    if n > count {
        return None;
    }
    let start = form.char_indices().nth(count - n).map_or(form.len(), |(b, _)| b);
    Some(&form[start..])
}

impl Lemmatizer {
    pub fn train(sentences: &[Sentence]) -> Lemmatizer {
        let mut lem = Lemmatizer::default();
        for t in sentences.iter().flat_map(|s| &s.tokens) {
            let Some(lemma) = t.lemma.as_deref() else {
                continue;
            };
            let script = EditScript::derive(&t.form, lemma);
            bump(&mut lem.forms, key(&t.form, t.upos), &script);
            let len = t.form.chars().count();
            for n in 1..=MAX_SUFFIX.min(len) {
                if script.strip <= n {
                    let sfx = char_suffix(&t.form, n).expect("n within length");
                    bump(&mut lem.suffixes, key(sfx, t.upos), &script);
                }
            }
        }
        for list in lem.forms.values_mut().chain(lem.suffixes.values_mut()) {
            list.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.script.cmp(&b.script)));
        }
        lem
    }

    pub fn is_empty(&self) -> bool {
        self.forms.is_empty()
    }

    /// Lemma for `form` tagged `upos`: the exact-form script if seen, else the
    /// most frequent script of the longest matching suffix, else the form.
    pub fn lemmatize(&self, form: &str, upos: Option<Upos>) -> String {
        if let Some(list) = self.forms.get(&key(form, upos)) {
            if let Some(l) = list.iter().find_map(|sc| sc.script.apply(form)) {
                return l;
            }
        }
        let len = form.chars().count();
        for n in (1..=MAX_SUFFIX.min(len)).rev() {
            let sfx = char_suffix(form, n).expect("n within length");
            if let Some(list) = self.suffixes.get(&key(sfx, upos)) {
                if let Some(l) = list.iter().find_map(|sc| sc.script.apply(form)) {
                    return l;
                }
            }
        }
        form.to_owned()
    }
}
