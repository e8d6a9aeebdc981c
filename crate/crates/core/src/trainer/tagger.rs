//! Greedy left-to-right tagger for UPOS, XPOS and FEATS.
//!
//! Three averaged perceptrons share one feature template. UPOS is predicted
//! first; XPOS and the feature bundle are predicted next, conditioned on it.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::perceptron::{PerceptronTrainer, Weights};
use crate::conllu::{Features, Sentence, Upos};
use crate::error::{Error, Result};

const NONE: &str = "_";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TaggerModel {
    pub upos: Weights,
    pub xpos: Weights,
    pub feats: Weights,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaggedToken {
    pub upos: Upos,
    pub xpos: Option<String>,
    pub feats: Features,
}

fn prefix(chars: &[char], n: usize) -> Option<String> {
    (chars.len() > n).then(|| chars[..n].iter().collect())
}

fn suffix(chars: &[char], n: usize) -> Option<String> {
    (chars.len() > n).then(|| chars[chars.len() - n..].iter().collect())
}

fn lower(forms: &[&str], i: isize) -> String {
    if i < 0 {
        "<s>".to_owned()
    } else {
        forms
            .get(i as usize)
            .map_or_else(|| "</s>".to_owned(), |f| f.to_lowercase())
    }
}

/// Context features for position `i`; `prev` holds the predicted UPOS of the
/// two preceding words, nearest first.
pub(crate) fn context_features(forms: &[&str], i: usize, prev: [&str; 2]) -> Vec<String> {
    let form = forms[i];
    let lw = form.to_lowercase();
    let chars: Vec<char> = lw.chars().collect();
    let mut f = Vec::with_capacity(24);
    f.push("b".to_owned());
    f.push(format!("w={form}"));
    f.push(format!("lw={lw}"));
    for n in 1..=4 {
        if let Some(p) = prefix(&chars, n) {
            f.push(format!("p{n}={p}"));
        }
        if let Some(s) = suffix(&chars, n) {
            f.push(format!("s{n}={s}"));
        }
    }
    let i = i as isize;
    f.push(format!("w-1={}", lower(forms, i - 1)));
    f.push(format!("w+1={}", lower(forms, i + 1)));
    f.push(format!("w-2={}", lower(forms, i - 2)));
    f.push(format!("w+2={}", lower(forms, i + 2)));
    f.push(format!("t-1={}", prev[0]));
    f.push(format!("t-2t-1={}|{}", prev[1], prev[0]));
    f.push(format!("t-1w={}|{lw}", prev[0]));
    if let Some(next) = forms.get(i as usize + 1) {
        let nc: Vec<char> = next.to_lowercase().chars().collect();
        if let Some(s) = suffix(&nc, 3) {
            f.push(format!("w+1s3={s}"));
        }
    }
    if form.chars().any(|c| c.is_ascii_digit()) {
        f.push("digit".to_owned());
    }
    if form.chars().next().is_some_and(char::is_uppercase) {
        f.push(if i == 0 { "cap0" } else { "cap" }.to_owned());
    }
    if form.chars().all(|c| !c.is_alphanumeric()) {
        f.push("nonalnum".to_owned());
    }
    if form.contains('-') {
        f.push("hyphen".to_owned());
    }
    f
}

fn with_upos(mut base: Vec<String>, upos: &str, lw: &str) -> Vec<String> {
    base.push(format!("u={upos}"));
    base.push(format!("uw={upos}|{lw}"));
    base
}

impl TaggerModel {
    pub fn is_trained(&self) -> bool {
        !self.upos.is_empty()
    }

    pub fn tag(&self, forms: &[&str]) -> Vec<TaggedToken> {
        let mut out = Vec::with_capacity(forms.len());
        let mut prev = [String::from("<s>"), String::from("<s>")];
        for i in 0..forms.len() {
            let base = context_features(forms, i, [&prev[0], &prev[1]]);
            let u = &self.upos.classes()[self.upos.predict(&base)];
            let upos: Upos = u.parse().unwrap_or(Upos::X);
            let f = with_upos(base, upos.as_str(), &forms[i].to_lowercase());
            let xpos = self.xpos.classes().get(self.xpos.predict(&f)).cloned();
            let feats = self
                .feats
                .classes()
                .get(self.feats.predict(&f))
                .and_then(|s| s.parse().ok())
                .unwrap_or_default();
            out.push(TaggedToken {
                upos,
                xpos: xpos.filter(|x| x != NONE),
                feats,
            });
            prev[1] = std::mem::replace(&mut prev[0], upos.as_str().to_owned());
        }
        out
    }
}

struct GoldSentence<'a> {
    forms: Vec<&'a str>,
    upos: Vec<usize>,
    xpos: Vec<usize>,
    feats: Vec<usize>,
}

fn class_index(classes: &mut Vec<String>, name: &str) -> usize {
    match classes.iter().position(|c| c == name) {
        Some(i) => i,
        None => {
            classes.push(name.to_owned());
            classes.len() - 1
        }
    }
}

/// Fraction of tokens whose UPOS the model predicts correctly.
pub fn upos_accuracy(model: &TaggerModel, sentences: &[Sentence]) -> f64 {
    let mut correct = 0usize;
    let mut total = 0usize;
    for s in sentences {
        let tags = model.tag(&s.forms());
        for (t, p) in s.tokens.iter().zip(&tags) {
            total += 1;
            if t.upos == Some(p.upos) {
                correct += 1;
            }
        }
    }
    if total == 0 {
        0.0
    } else {
        correct as f64 / total as f64
    }
}

/// Outcome of training: the kept model and the 1-based epoch it came from.
pub struct TaggerTraining {
    pub model: TaggerModel,
    pub best_epoch: usize,
}

pub fn train_tagger(
    train: &[Sentence],
    dev: &[Sentence],
    epochs: usize,
    seed: u64,
    cutoff: f64,
) -> Result<TaggerTraining> {
    if epochs == 0 {
        return Err(Error::invalid("tagger epochs must be at least 1"));
    }
    let mut upos_classes: Vec<String> = Upos::ALL.iter().map(|u| u.as_str().to_owned()).collect();
    let mut xpos_classes = vec![NONE.to_owned()];
    let mut feats_classes = vec![NONE.to_owned()];
    let mut gold = Vec::with_capacity(train.len());
    for (si, s) in train.iter().enumerate() {
        let mut g = GoldSentence {
            forms: s.forms(),
            upos: Vec::new(),
            xpos: Vec::new(),
            feats: Vec::new(),
        };
        for t in &s.tokens {
            let u = t.upos.ok_or_else(|| {
                Error::validation(
                    s.sent_id().map_or_else(|| format!("#{}", si + 1), str::to_owned),
                    format!("token {} has no UPOS", t.id),
                )
            })?;
            g.upos.push(class_index(&mut upos_classes, u.as_str()));
            g.xpos.push(class_index(&mut xpos_classes, t.xpos.as_deref().unwrap_or(NONE)));
            g.feats.push(class_index(&mut feats_classes, &t.feats.to_string()));
        }
        gold.push(g);
    }

    let mut up = PerceptronTrainer::new(upos_classes);
    let mut xp = PerceptronTrainer::new(xpos_classes);
    let mut fp = PerceptronTrainer::new(feats_classes);
    let mut order: Vec<usize> = (0..gold.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, usize, TaggerModel)> = None;

    for epoch in 1..=epochs {
        order.shuffle(&mut rng);
        for &si in &order {
            let g = &gold[si];
            let mut prev = ["<s>", "<s>"];
            for i in 0..g.forms.len() {
                let base = context_features(&g.forms, i, prev);
                up.tick();
                let scores = up.scores(&base);
                let guess = super::perceptron::argmax(&scores, |_| true).unwrap_or(0);
                up.update(&base, g.upos[i], guess);

                let gold_upos = Upos::ALL
                    .get(g.upos[i])
                    .map_or(Upos::X.as_str(), |u| u.as_str());
                let f = with_upos(base, gold_upos, &g.forms[i].to_lowercase());
                xp.tick();
                let xg = super::perceptron::argmax(&xp.scores(&f), |_| true).unwrap_or(0);
                xp.update(&f, g.xpos[i], xg);
                fp.tick();
                let fg = super::perceptron::argmax(&fp.scores(&f), |_| true).unwrap_or(0);
                fp.update(&f, g.feats[i], fg);

                prev[1] = prev[0];
                prev[0] = Upos::ALL
                    .get(guess)
                    .map_or(Upos::X.as_str(), |u| u.as_str());
            }
        }
        let model = TaggerModel {
            upos: up.averaged(cutoff),
            xpos: xp.averaged(cutoff),
            feats: fp.averaged(cutoff),
        };
        let score = if dev.is_empty() {
            epoch as f64
        } else {
            upos_accuracy(&model, dev)
        };
        if best.as_ref().is_none_or(|(b, _, _)| score > *b) {
            best = Some((score, epoch, model));
        }
    }
    let (_, best_epoch, model) = best.expect("at least one epoch");
    Ok(TaggerTraining { model, best_epoch })
}
