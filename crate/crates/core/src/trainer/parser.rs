//! Greedy arc-standard dependency parser.
//!
//! Training uses a static oracle over projectivized gold trees. Right-arcs
//! from the artificial root are only legal once the buffer is empty, so every
//! transition sequence ends in a single-rooted tree.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::perceptron::{argmax, PerceptronTrainer, Weights};
use crate::conllu::Sentence;
use crate::error::{Error, Result};

pub const ROOT_LABEL: &str = "root";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Move {
    Shift,
    Left(usize),
    Right(usize),
}

impl Move {
    fn class(self) -> usize {
        match self {
            Move::Shift => 0,
            Move::Left(l) => 1 + 2 * l,
            Move::Right(l) => 2 + 2 * l,
        }
    }

    fn from_class(c: usize) -> Move {
        match c {
            0 => Move::Shift,
            c if c % 2 == 1 => Move::Left((c - 1) / 2),
            c => Move::Right((c - 2) / 2),
        }
    }
}

/// Word-level input to the parser. Index 0 is the artificial root.
pub struct ParseInput<'a> {
    pub forms: Vec<String>,
    pub tags: Vec<&'a str>,
}

impl<'a> ParseInput<'a> {
    pub fn new(forms: &[&str], tags: &[&'a str]) -> Self {
        let mut f = Vec::with_capacity(forms.len() + 1);
        f.push("<root>".to_owned());
        f.extend(forms.iter().map(|s| s.to_lowercase()));
        let mut t = Vec::with_capacity(tags.len() + 1);
        t.push("<root>");
        t.extend_from_slice(tags);
        ParseInput { forms: f, tags: t }
    }

    fn n(&self) -> usize {
        self.forms.len() - 1
    }
}

struct State {
    stack: Vec<usize>,
    next: usize,
    n: usize,
    heads: Vec<usize>,
    labels: Vec<usize>,
    left: Vec<Vec<usize>>,
    right: Vec<Vec<usize>>,
}

impl State {
    fn new(n: usize) -> Self {
        State {
            stack: vec![0],
            next: 1,
            n,
            heads: vec![usize::MAX; n + 1],
            labels: vec![usize::MAX; n + 1],
            left: vec![Vec::new(); n + 1],
            right: vec![Vec::new(); n + 1],
        }
    }

    fn done(&self) -> bool {
        self.next > self.n && self.stack.len() == 1
    }

    fn s(&self, k: usize) -> Option<usize> {
        self.stack.len().checked_sub(k + 1).map(|i| self.stack[i])
    }

    fn b(&self, k: usize) -> Option<usize> {
        let i = self.next + k;
        (i <= self.n).then_some(i)
    }

    fn legal(&self, m: Move) -> bool {
        match m {
            Move::Shift => self.next <= self.n,
            Move::Left(_) => self.stack.len() >= 2 && self.s(1) != Some(0),
            Move::Right(_) => {
                self.stack.len() >= 2 && (self.s(1) != Some(0) || self.next > self.n)
            }
        }
    }

    fn apply(&mut self, m: Move) {
        match m {
            Move::Shift => {
                self.stack.push(self.next);
                self.next += 1;
            }
            Move::Left(l) => {
                let s0 = self.stack.pop().expect("legal");
                let s1 = self.stack.pop().expect("legal");
                self.heads[s1] = s0;
                self.labels[s1] = l;
                self.left[s0].push(s1);
                self.stack.push(s0);
            }
            Move::Right(l) => {
                let s0 = self.stack.pop().expect("legal");
                let s1 = *self.stack.last().expect("legal");
                self.heads[s0] = s1;
                self.labels[s0] = l;
                self.right[s1].push(s0);
            }
        }
    }
}

fn features(input: &ParseInput, st: &State, labels: &[String]) -> Vec<String> {
    let w = |i: Option<usize>| i.map_or("-", |i| input.forms[i].as_str());
    let t = |i: Option<usize>| i.map_or("-", |i| input.tags[i]);
    let lab = |i: Option<usize>| {
        i.and_then(|i| labels.get(st.labels[i]))
            .map_or("-", String::as_str)
    };
    let lc = |i: Option<usize>| i.and_then(|i| st.left[i].iter().min().copied());
    let rc = |i: Option<usize>| i.and_then(|i| st.right[i].iter().max().copied());

    let (s0, s1, s2) = (st.s(0), st.s(1), st.s(2));
    let (b0, b1, b2) = (st.b(0), st.b(1), st.b(2));
    let dist = match (s0, s1) {
        (Some(a), Some(b)) => (a - b).min(5).to_string(),
        _ => "-".to_owned(),
    };
    let val = |i: Option<usize>| i.map_or(0, |i| st.left[i].len() + st.right[i].len());

    vec![
        "b".to_owned(),
        format!("s0w={}", w(s0)),
        format!("s0t={}", t(s0)),
        format!("s0wt={}|{}", w(s0), t(s0)),
        format!("s1w={}", w(s1)),
        format!("s1t={}", t(s1)),
        format!("s1wt={}|{}", w(s1), t(s1)),
        format!("s2t={}", t(s2)),
        format!("b0w={}", w(b0)),
        format!("b0t={}", t(b0)),
        format!("b0wt={}|{}", w(b0), t(b0)),
        format!("b1t={}", t(b1)),
        format!("b1w={}", w(b1)),
        format!("b2t={}", t(b2)),
        format!("s1t_s0t={}|{}", t(s1), t(s0)),
        format!("s1w_s0w={}|{}", w(s1), w(s0)),
        format!("s1t_s0w={}|{}", t(s1), w(s0)),
        format!("s1w_s0t={}|{}", w(s1), t(s0)),
        format!("s0t_b0t={}|{}", t(s0), t(b0)),
        format!("s1t_s0t_b0t={}|{}|{}", t(s1), t(s0), t(b0)),
        format!("s2t_s1t_s0t={}|{}|{}", t(s2), t(s1), t(s0)),
        format!("s0t_b0t_b1t={}|{}|{}", t(s0), t(b0), t(b1)),
        format!("d={}|{}|{}", dist, t(s1), t(s0)),
        format!("s0lc={}|{}", t(lc(s0)), lab(lc(s0))),
        format!("s0rc={}|{}", t(rc(s0)), lab(rc(s0))),
        format!("s1lc={}|{}", t(lc(s1)), lab(lc(s1))),
        format!("s1rc={}|{}", t(rc(s1)), lab(rc(s1))),
        format!("s0v={}|{}", t(s0), val(s0).min(4)),
        format!("s1v={}|{}", t(s1), val(s1).min(4)),
        format!("s1t_s0t_s0lc={}|{}|{}", t(s1), t(s0), lab(lc(s0))),
        format!("s1t_s0t_s1rc={}|{}|{}", t(s1), t(s0), lab(rc(s1))),
    ]
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParserModel {
    pub labels: Vec<String>,
    pub weights: Weights,
}

impl ParserModel {
    pub fn is_trained(&self) -> bool {
        !self.weights.is_empty()
    }

    /// Heads (0 = root) and relations for words `1..=n`.
    pub fn parse(&self, input: &ParseInput) -> (Vec<usize>, Vec<String>) {
        let n = input.n();
        if n == 1 {
            return (vec![0], vec![ROOT_LABEL.to_owned()]);
        }
        let st = run_transitions(n, |st| self.weights.scores(&features(input, st, &self.labels)));
        let heads = st.heads[1..].to_vec();
        let labels = (1..=n)
            .map(|i| {
                if st.heads[i] == 0 {
                    ROOT_LABEL.to_owned()
                } else {
                    self.labels
                        .get(st.labels[i])
                        .cloned()
                        .unwrap_or_else(|| "dep".to_owned())
                }
            })
            .collect();
        (heads, labels)
    }
}

fn run_transitions(n: usize, mut score: impl FnMut(&State) -> Vec<f64>) -> State {
    let mut st = State::new(n);
    while !st.done() {
        let mut scores = score(&st);
        if scores.len() < 3 {
            scores.resize(3, 0.0);
        }
        let c = argmax(&scores, |c| st.legal(Move::from_class(c)))
            .expect("some transition is always legal");
        st.apply(Move::from_class(c));
    }
    st
}

/// Runs the transition system over `n` words with arbitrary transition
/// scores (class 0 shift, `1 + 2l` left-arc, `2 + 2l` right-arc) and returns
/// the heads. Whatever the scores, the result is a tree.
pub fn decode_with_scores(n: usize, mut score: impl FnMut() -> Vec<f64>) -> Vec<usize> {
    if n == 1 {
        return vec![0];
    }
    run_transitions(n, |_| score()).heads[1..].to_vec()
}

/// Checks that heads form a single-rooted tree; `heads[i]` is the head of
/// word `i + 1`.
pub fn check_tree(heads: &[usize]) -> std::result::Result<(), String> {
    let n = heads.len();
    let roots = heads.iter().filter(|&&h| h == 0).count();
    if roots != 1 {
        return Err(format!("expected exactly one root, found {roots}"));
    }
    for (i, &h) in heads.iter().enumerate() {
        if h > n {
            return Err(format!("token {} has head {h} out of range", i + 1));
        }
    }
    for start in 1..=n {
        let mut cur = start;
        let mut steps = 0;
        while cur != 0 {
            cur = heads[cur - 1];
            steps += 1;
            if steps > n {
                return Err(format!("token {start} is on a cycle"));
            }
        }
    }
    Ok(())
}

fn dominates(heads: &[usize], h: usize, mut d: usize) -> bool {
    while d != 0 {
        if d == h {
            return true;
        }
        d = heads[d - 1];
    }
    h == 0
}

fn non_projective(heads: &[usize], d: usize) -> bool {
    let h = heads[d - 1];
    let (lo, hi) = if h < d { (h, d) } else { (d, h) };
    (lo + 1..hi).any(|k| !dominates(heads, h, k))
}

/// Lifts non-projective arcs to the grandparent, shortest arc first, until
/// the tree is projective. The input must be a valid tree.
pub fn projectivize(heads: &[usize]) -> Vec<usize> {
    let mut heads = heads.to_vec();
    loop {
        let worst = (1..=heads.len())
            .filter(|&d| heads[d - 1] != 0 && non_projective(&heads, d))
            .min_by_key(|&d| (heads[d - 1].abs_diff(d), d));
        match worst {
            Some(d) => {
                let h = heads[d - 1];
                heads[d - 1] = heads[h - 1];
            }
            None => return heads,
        }
    }
}

fn oracle(st: &State, gold_heads: &[usize], gold_labels: &[usize], attached: &[usize], kids: &[usize]) -> Move {
    if let (Some(s0), Some(s1)) = (st.s(0), st.s(1)) {
        if s1 != 0 && gold_heads[s1 - 1] == s0 {
            return Move::Left(gold_labels[s1 - 1]);
        }
        if gold_heads[s0 - 1] == s1 && attached[s0] == kids[s0] && (s1 != 0 || st.next > st.n) {
            return Move::Right(gold_labels[s0 - 1]);
        }
    }
    Move::Shift
}

struct GoldTree<'a> {
    forms: Vec<&'a str>,
    tags: Vec<&'a str>,
    heads: Vec<usize>,
    labels: Vec<usize>,
}

fn label_index(labels: &mut Vec<String>, name: &str) -> usize {
    match labels.iter().position(|l| l == name) {
        Some(i) => i,
        None => {
            labels.push(name.to_owned());
            labels.len() - 1
        }
    }
}

fn sentence_name(s: &Sentence, i: usize) -> String {
    s.sent_id()
        .map_or_else(|| format!("#{}", i + 1), str::to_owned)
}

fn gold_trees<'a>(sentences: &'a [Sentence], labels: &mut Vec<String>) -> Result<Vec<GoldTree<'a>>> {
    let mut out = Vec::with_capacity(sentences.len());
    for (si, s) in sentences.iter().enumerate() {
        let mut heads = Vec::with_capacity(s.len());
        let mut labs = Vec::with_capacity(s.len());
        let mut tags = Vec::with_capacity(s.len());
        for t in &s.tokens {
            let fail = |m: String| Error::validation(sentence_name(s, si), m);
            heads.push(t.head.ok_or_else(|| fail(format!("token {} has no head", t.id)))?);
            let d = t.deprel.as_deref().ok_or_else(|| fail(format!("token {} has no deprel", t.id)))?;
            labs.push(label_index(labels, d));
            tags.push(t.upos.map_or("_", |u| u.as_str()));
        }
        check_tree(&heads).map_err(|m| Error::validation(sentence_name(s, si), m))?;
        out.push(GoldTree {
            forms: s.forms(),
            tags,
            heads: projectivize(&heads),
            labels: labs,
        });
    }
    Ok(out)
}

/// Unlabeled attachment score of the model on gold-tagged sentences.
pub fn attachment_score(model: &ParserModel, sentences: &[Sentence]) -> f64 {
    let mut correct = 0usize;
    let mut total = 0usize;
    for s in sentences {
        let forms = s.forms();
        let tags: Vec<&str> = s.tokens.iter().map(|t| t.upos.map_or("_", |u| u.as_str())).collect();
        let (heads, _) = model.parse(&ParseInput::new(&forms, &tags));
        for (t, h) in s.tokens.iter().zip(heads) {
            total += 1;
            if t.head == Some(h) {
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

pub struct ParserTraining {
    pub model: ParserModel,
    pub best_epoch: usize,
}

pub fn train_parser(
    train: &[Sentence],
    dev: &[Sentence],
    epochs: usize,
    seed: u64,
    cutoff: f64,
) -> Result<ParserTraining> {
    if epochs == 0 {
        return Err(Error::invalid("parser epochs must be at least 1"));
    }
    let mut labels = vec![ROOT_LABEL.to_owned()];
    let gold = gold_trees(train, &mut labels)?;
    let classes: Vec<String> = (0..1 + 2 * labels.len())
        .map(|c| match Move::from_class(c) {
            Move::Shift => "SHIFT".to_owned(),
            Move::Left(l) => format!("L:{}", labels[l]),
            Move::Right(l) => format!("R:{}", labels[l]),
        })
        .collect();
    let mut p = PerceptronTrainer::new(classes);
    let mut order: Vec<usize> = (0..gold.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x05ee_d0f9_a25e);
    let mut best: Option<(f64, usize, ParserModel)> = None;

    for epoch in 1..=epochs {
        order.shuffle(&mut rng);
        for &gi in &order {
            let g = &gold[gi];
            let n = g.forms.len();
            if n < 2 {
                continue;
            }
            let input = ParseInput::new(&g.forms, &g.tags);
            let mut kids = vec![0usize; n + 1];
            for &h in &g.heads {
                kids[h] += 1;
            }
            let mut attached = vec![0usize; n + 1];
            let mut st = State::new(n);
            while !st.done() {
                let truth = oracle(&st, &g.heads, &g.labels, &attached, &kids);
                let f = features(&input, &st, &labels);
                p.tick();
                let scores = p.scores(&f);
                let guess = argmax(&scores, |c| st.legal(Move::from_class(c))).unwrap_or(0);
                p.update(&f, truth.class(), guess);
                match truth {
                    Move::Left(_) => attached[st.s(0).expect("left needs s0")] += 1,
                    Move::Right(_) => attached[st.s(1).expect("right needs s1")] += 1,
                    Move::Shift => {}
                }
                st.apply(truth);
            }
        }
        let model = ParserModel {
            labels: labels.clone(),
            weights: p.averaged(cutoff),
        };
        let score = if dev.is_empty() {
            epoch as f64
        } else {
            attachment_score(&model, dev)
        };
        if best.as_ref().is_none_or(|(b, _, _)| score > *b) {
            best = Some((score, epoch, model));
        }
    }
    let (_, best_epoch, model) = best.expect("at least one epoch");
    Ok(ParserTraining { model, best_epoch })
}
