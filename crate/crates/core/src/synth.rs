//! Synthetic data: a small deterministic grammar corpus, random valid
//! documents and malformed CoNLL-U inputs.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::conllu::{misc_set, Comment, Document, Features, MultiwordRange, Sentence, Token, Upos};

struct Word {
    form: String,
    lemma: String,
    upos: Upos,
    xpos: &'static str,
    feats: &'static str,
    head: usize,
    deprel: &'static str,
}

#[derive(Default)]
struct Builder {
    words: Vec<Word>,
}

const NOUNS: &[&str] = &["boek", "stoel", "hûn", "tafel", "fisk", "beam", "bern", "frou", "man", "doar", "feint", "skip"];
const PROPNS: &[&str] = &["Jan", "Sjoukje", "Ljouwert", "Piter", "Durk"];
const DETS: &[&str] = &["de", "it", "elke", "gjin"];
const ADJS: &[&str] = &["grut", "lyts", "moai", "âld", "nij"];
const ADVS: &[&str] = &["hjoed", "altyd", "faak", "no", "hjir"];
const ADPS: &[&str] = &["yn", "op", "fan", "mei", "nei"];
const NUMS: &[&str] = &["twa", "trije", "fjouwer"];
const VI: &[&str] = &["sliep", "sjong", "laak", "wurk", "dûns"];
const VT: &[&str] = &["sjoch", "lês", "keap", "mak", "hear", "iet"];
const CCONJS: &[&str] = &["en", "mar"];
const SCONJS: &[&str] = &["omdat", "as"];

#[derive(Clone, Copy, PartialEq, Eq)]
enum Num {
    Sing,
    Plur,
}

impl Builder {
    fn push(&mut self, form: impl Into<String>, lemma: impl Into<String>, upos: Upos, xpos: &'static str, feats: &'static str) -> usize {
        self.words.push(Word {
            form: form.into(),
            lemma: lemma.into(),
            upos,
            xpos,
            feats,
            head: 0,
            deprel: "root",
        });
        self.words.len()
    }

    fn attach(&mut self, dep: usize, head: usize, rel: &'static str) {
        let w = &mut self.words[dep - 1];
        w.head = head;
        w.deprel = rel;
    }

    fn noun(&mut self, rng: &mut impl Rng, num: Num) -> usize {
        let stem = *NOUNS.choose(rng).expect("non-empty");
        match num {
            Num::Sing => self.push(stem, stem, Upos::Noun, "N", "Number=Sing"),
            Num::Plur => self.push(format!("{stem}en"), stem, Upos::Noun, "N", "Number=Plur"),
        }
    }

    /// A noun phrase of the given number; pronouns only when `pron`.
    fn np(&mut self, rng: &mut impl Rng, num: Num, pron: bool) -> usize {
        let roll = rng.random_range(0..100);
        if num == Num::Plur && roll < 15 {
            let n = *NUMS.choose(rng).expect("non-empty");
            let d = self.push(n, n, Upos::Num, "TW", "NumType=Card");
            let h = self.noun(rng, num);
            self.attach(d, h, "nummod");
            return h;
        }
        if num == Num::Sing && roll < 15 {
            let p = *PROPNS.choose(rng).expect("non-empty");
            return self.push(p, p, Upos::Propn, "SPEC", "_");
        }
        if pron && roll < 25 {
            let p = match (num, rng.random_bool(0.5)) {
                (Num::Sing, true) => "hy",
                (Num::Sing, false) => "sy",
                (Num::Plur, true) => "wy",
                (Num::Plur, false) => "jimme",
            };
            let feats = if num == Num::Sing { "Number=Sing|PronType=Prs" } else { "Number=Plur|PronType=Prs" };
            return self.push(p, p, Upos::Pron, "VNW", feats);
        }
        let det = *DETS.choose(rng).expect("non-empty");
        let d = self.push(det, det, Upos::Det, "LID", "_");
        let a = if roll >= 70 {
            let adj = *ADJS.choose(rng).expect("non-empty");
            Some(self.push(adj, adj, Upos::Adj, "ADJ", "Degree=Pos"))
        } else {
            None
        };
        let h = self.noun(rng, num);
        self.attach(d, h, "det");
        if let Some(a) = a {
            self.attach(a, h, "amod");
        }
        h
    }

    fn object(&mut self, rng: &mut impl Rng) -> usize {
        let n = Builder::num(rng);
        self.np(rng, n, false)
    }

    fn num(rng: &mut impl Rng) -> Num {
        if rng.random_bool(0.5) {
            Num::Sing
        } else {
            Num::Plur
        }
    }

    fn finite(&mut self, rng: &mut impl Rng, stems: &[&str], num: Num) -> usize {
        let stem = *stems.choose(rng).expect("non-empty");
        let lemma = format!("{stem}e");
        match num {
            Num::Sing => self.push(format!("{stem}t"), lemma, Upos::Verb, "WW", "Number=Sing|VerbForm=Fin"),
            Num::Plur => self.push(format!("{stem}e"), lemma, Upos::Verb, "WW", "Number=Plur|VerbForm=Fin"),
        }
    }

    fn infinitive(&mut self, rng: &mut impl Rng, stems: &[&str]) -> usize {
        let stem = *stems.choose(rng).expect("non-empty");
        self.push(format!("{stem}en"), format!("{stem}e"), Upos::Verb, "WW", "VerbForm=Inf")
    }

    fn aux(&mut self, num: Num) -> usize {
        match num {
            Num::Sing => self.push("sil", "sille", Upos::Aux, "WW", "Number=Sing|VerbForm=Fin"),
            Num::Plur => self.push("sille", "sille", Upos::Aux, "WW", "Number=Plur|VerbForm=Fin"),
        }
    }

    fn pp(&mut self, rng: &mut impl Rng) -> usize {
        let adp = *ADPS.choose(rng).expect("non-empty");
        let a = self.push(adp, adp, Upos::Adp, "VZ", "_");
        let h = self.object(rng);
        self.attach(a, h, "case");
        h
    }

    fn adv(&mut self, rng: &mut impl Rng) -> usize {
        let w = *ADVS.choose(rng).expect("non-empty");
        self.push(w, w, Upos::Adv, "BW", "_")
    }

    fn punct(&mut self, p: &'static str) -> usize {
        self.push(p, p, Upos::Punct, "LET", "_")
    }

    fn conj(&mut self, rng: &mut impl Rng, list: &[&str], upos: Upos, xpos: &'static str) -> usize {
        let w = *list.choose(rng).expect("non-empty");
        self.push(w, w, upos, xpos, "_")
    }

    /// Subject + intransitive verb; returns the verb.
    fn clause_vi(&mut self, rng: &mut impl Rng) -> usize {
        let n = Builder::num(rng);
        let s = self.np(rng, n, true);
        let v = self.finite(rng, VI, n);
        self.attach(s, v, "nsubj");
        v
    }
}

/// Number of sentence templates in [`grammar_sentence`].
pub const GRAMMAR_RULES: usize = 20;

/// One sentence from template `rule` (0-based, below [`GRAMMAR_RULES`]).
/// Every word form has one UPOS and every template fixes the tree shape.
pub fn grammar_sentence(rule: usize, rng: &mut impl Rng) -> Sentence {
    let mut b = Builder::default();
    let root;
    let mut end = ".";
    match rule % GRAMMAR_RULES {
        0 => root = b.clause_vi(rng),
        1 => {
            let n = Builder::num(rng);
            let s = b.np(rng, n, true);
            root = b.finite(rng, VT, n);
            let o = b.object(rng);
            b.attach(s, root, "nsubj");
            b.attach(o, root, "obj");
        }
        2 => {
            root = b.clause_vi(rng);
            let p = b.pp(rng);
            b.attach(p, root, "obl");
        }
        3 => {
            let n = Builder::num(rng);
            let s = b.np(rng, n, true);
            root = b.finite(rng, VT, n);
            let o = b.object(rng);
            let p = b.pp(rng);
            b.attach(s, root, "nsubj");
            b.attach(o, root, "obj");
            b.attach(p, root, "obl");
        }
        4 => {
            let n = Builder::num(rng);
            let s = b.np(rng, n, true);
            let a = b.aux(n);
            root = b.infinitive(rng, VI);
            b.attach(s, root, "nsubj");
            b.attach(a, root, "aux");
        }
        5 => {
            let n = Builder::num(rng);
            let s = b.np(rng, n, true);
            let a = b.aux(n);
            let o = b.object(rng);
            root = b.infinitive(rng, VT);
            b.attach(s, root, "nsubj");
            b.attach(a, root, "aux");
            b.attach(o, root, "obj");
        }
        6 => {
            root = b.clause_vi(rng);
            let a = b.adv(rng);
            b.attach(a, root, "advmod");
        }
        7 => {
            let a = b.adv(rng);
            let n = Builder::num(rng);
            root = b.finite(rng, VI, n);
            let s = b.np(rng, n, true);
            b.attach(a, root, "advmod");
            b.attach(s, root, "nsubj");
        }
        8 => {
            let p = b.pp(rng);
            let n = Builder::num(rng);
            root = b.finite(rng, VI, n);
            let s = b.np(rng, n, false);
            b.attach(p, root, "obl");
            b.attach(s, root, "nsubj");
        }
        9 => {
            let n = Builder::num(rng);
            let s = b.np(rng, n, true);
            root = b.finite(rng, VT, n);
            let o = b.object(rng);
            let a = b.adv(rng);
            b.attach(s, root, "nsubj");
            b.attach(o, root, "obj");
            b.attach(a, root, "advmod");
        }
        10 => {
            root = b.clause_vi(rng);
            let c = b.conj(rng, CCONJS, Upos::Cconj, "VG");
            let v2 = b.clause_vi(rng);
            b.attach(c, v2, "cc");
            b.attach(v2, root, "conj");
        }
        11 => {
            let n = Builder::num(rng);
            let s = b.np(rng, n, true);
            root = b.finite(rng, VT, n);
            let o = b.object(rng);
            let c = b.conj(rng, CCONJS, Upos::Cconj, "VG");
            let v2 = b.clause_vi(rng);
            b.attach(s, root, "nsubj");
            b.attach(o, root, "obj");
            b.attach(c, v2, "cc");
            b.attach(v2, root, "conj");
        }
        12 => {
            root = b.clause_vi(rng);
            let comma = b.punct(",");
            let m = b.conj(rng, SCONJS, Upos::Sconj, "VG");
            let v2 = b.clause_vi(rng);
            b.attach(comma, v2, "punct");
            b.attach(m, v2, "mark");
            b.attach(v2, root, "advcl");
        }
        13 => {
            let n = Builder::num(rng);
            let s = b.np(rng, n, true);
            root = b.finite(rng, VT, n);
            let o = b.object(rng);
            let comma = b.punct(",");
            let m = b.conj(rng, SCONJS, Upos::Sconj, "VG");
            let n2 = Builder::num(rng);
            let s2 = b.np(rng, n2, true);
            let o2 = b.object(rng);
            let v2 = b.finite(rng, VT, n2);
            b.attach(s, root, "nsubj");
            b.attach(o, root, "obj");
            b.attach(comma, v2, "punct");
            b.attach(m, v2, "mark");
            b.attach(s2, v2, "nsubj");
            b.attach(o2, v2, "obj");
            b.attach(v2, root, "advcl");
        }
        14 => {
            let n = Builder::num(rng);
            let feats = if n == Num::Sing { "Number=Sing|PronType=Prs" } else { "Number=Plur|PronType=Prs" };
            let p = if n == Num::Sing { "hy" } else { "wy" };
            let s = b.push(p, p, Upos::Pron, "VNW", feats);
            root = b.finite(rng, VI, n);
            let pp = b.pp(rng);
            b.attach(s, root, "nsubj");
            b.attach(pp, root, "obl");
        }
        15 => {
            let p1 = *PROPNS.choose(rng).expect("non-empty");
            let s = b.push(p1, p1, Upos::Propn, "SPEC", "_");
            root = b.finite(rng, VT, Num::Sing);
            let p2 = *PROPNS.choose(rng).expect("non-empty");
            let o = b.push(p2, p2, Upos::Propn, "SPEC", "_");
            b.attach(s, root, "nsubj");
            b.attach(o, root, "obj");
        }
        16 => {
            root = b.clause_vi(rng);
            end = "!";
        }
        17 => {
            let n = Builder::num(rng);
            root = b.finite(rng, VT, n);
            let s = b.np(rng, n, false);
            let o = b.object(rng);
            b.attach(s, root, "nsubj");
            b.attach(o, root, "obj");
            end = "?";
        }
        18 => {
            let n = Builder::num(rng);
            let s = b.np(rng, n, true);
            let a = b.aux(n);
            let p = b.pp(rng);
            root = b.infinitive(rng, VI);
            b.attach(s, root, "nsubj");
            b.attach(a, root, "aux");
            b.attach(p, root, "obl");
        }
        _ => {
            let num = *NUMS.choose(rng).expect("non-empty");
            let d = b.push(num, num, Upos::Num, "TW", "NumType=Card");
            let h = b.noun(rng, Num::Plur);
            b.attach(d, h, "nummod");
            root = b.finite(rng, VI, Num::Plur);
            let a = b.adv(rng);
            b.attach(h, root, "nsubj");
            b.attach(a, root, "advmod");
        }
    }
    let p = b.punct(end);
    b.attach(p, root, "punct");
    b.attach(root, 0, "root");

    let n = b.words.len();
    let mut s = Sentence::new();
    for (i, w) in b.words.into_iter().enumerate() {
        let mut t = Token::new(i + 1, w.form);
        if i == 0 && w.upos != Upos::Propn {
            let mut cs = t.form.chars();
            if let Some(c) = cs.next() {
                t.form = c.to_uppercase().chain(cs).collect();
            }
        }
        t.lemma = Some(w.lemma);
        t.upos = Some(w.upos);
        t.xpos = Some(w.xpos.to_owned());
        t.feats = w.feats.parse().expect("grammar feats are well formed");
        t.head = Some(w.head);
        t.deprel = Some(w.deprel.to_owned());
        s.tokens.push(t);
    }
    for i in 0..n.saturating_sub(1) {
        if s.tokens[i + 1].upos == Some(Upos::Punct) {
            misc_set(&mut s.tokens[i].misc, "SpaceAfter", "No");
        }
    }
    s
}

pub const GENRES: [&str; 5] = ["news", "science", "novels", "museum", "Wikipedia"];

/// `n` grammar sentences with `sent_id`, `text` and `genre` comments.
/// Templates are drawn uniformly with a seeded generator.
pub fn grammar_corpus(n: usize, seed: u64) -> Document {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sentences = (0..n)
        .map(|i| {
            let rule = rng.random_range(0..GRAMMAR_RULES);
            let mut s = grammar_sentence(rule, &mut rng);
            s.set_comment("sent_id", format!("g{}", i + 1));
            s.set_comment("genre", GENRES[i % GENRES.len()]);
            s.set_comment("text", s.reconstruct_text());
            s.recompute_spans();
            s
        })
        .collect();
    Document::from_sentences(sentences)
}

const LETTERS: &[char] = &[
    'a', 'b', 'd', 'e', 'f', 'g', 'h', 'i', 'j', 'k', 'l', 'm', 'n', 'o', 'p', 'r', 's', 't', 'u', 'w', 'y',
    'â', 'ê', 'ô', 'û', 'ú', 'ü', 'A', 'F', 'S', '-', '\'', '.', ',', '_', '1', '9', '(', ')', '"',
];

fn word(rng: &mut impl Rng, max: usize) -> String {
    let len = rng.random_range(1..=max);
    (0..len).map(|_| *LETTERS.choose(rng).expect("non-empty")).collect()
}

/// A field that never reads back as the `_` placeholder.
fn field(rng: &mut impl Rng, max: usize) -> String {
    loop {
        let w = word(rng, max);
        if w != "_" && !w.contains('|') && !w.contains('=') {
            return w;
        }
    }
}

fn feats(rng: &mut impl Rng) -> Features {
    const KEYS: &[&str] = &["Case", "Number", "Gender", "Person", "Tense", "VerbForm", "Degree"];
    const VALUES: &[&str] = &["Nom", "Sing", "Plur", "Com", "Neut", "1", "3", "Past", "Fin", "Inf", "Pos"];
    (0..rng.random_range(0..=3))
        .map(|_| (*KEYS.choose(rng).expect("k"), *VALUES.choose(rng).expect("v")))
        .collect()
}

/// A random document that satisfies every invariant checked by
/// [`Document::validate`], exercising all columns, multiword ranges,
/// comments and metadata.
pub fn random_document(rng: &mut impl Rng, max_sentences: usize, max_tokens: usize) -> Document {
    let mut doc = Document::new();
    if rng.random_bool(0.3) {
        doc.metadata.insert("id".into(), field(rng, 8));
        doc.metadata.insert("genre".into(), GENRES.choose(rng).expect("g").to_string());
    }
    let n_sent = rng.random_range(1..=max_sentences.max(1));
    for si in 0..n_sent {
        let n = rng.random_range(1..=max_tokens.max(1));
        let mut s = Sentence::new();
        for i in 0..n {
            let mut t = Token::new(i + 1, word(rng, 7));
            if rng.random_bool(0.8) {
                t.lemma = Some(field(rng, 7));
            }
            if rng.random_bool(0.8) {
                t.upos = Some(*Upos::ALL.choose(rng).expect("tag"));
            }
            if rng.random_bool(0.5) {
                t.xpos = Some(field(rng, 4));
            }
            t.feats = feats(rng);
            if rng.random_bool(0.8) {
                let mut h = rng.random_range(0..=n);
                if h == i + 1 {
                    h = 0;
                }
                t.head = Some(h);
                t.deprel = Some(["root", "nsubj", "obj", "det", "case", "nmod:poss"].choose(rng).expect("r").to_string());
            }
            if rng.random_bool(0.1) {
                t.deps = Some(format!("{}:dep", rng.random_range(0..=n)));
            }
            if rng.random_bool(0.2) {
                misc_set(&mut t.misc, "SpaceAfter", "No");
            }
            if rng.random_bool(0.1) {
                misc_set(&mut t.misc, "Gloss", &field(rng, 5));
            }
            s.tokens.push(t);
        }
        let mut next = 1;
        while next < n {
            if rng.random_bool(0.15) {
                let end = (next + rng.random_range(1..=2)).min(n);
                s.ranges.push(MultiwordRange {
                    start: next,
                    end,
                    form: word(rng, 6),
                    misc: rng.random_bool(0.3).then(|| "SpaceAfter=No".to_owned()),
                });
                next = end + 1;
            } else {
                next += 1;
            }
        }
        s.set_comment("sent_id", format!("r{si}"));
        if rng.random_bool(0.2) {
            s.comments.push(Comment::Text(format!("note {}", field(rng, 5))));
        }
        if rng.random_bool(0.3) {
            s.set_comment("genre", GENRES.choose(rng).expect("g").to_string());
        }
        if rng.random_bool(0.8) {
            s.set_comment("text", s.reconstruct_text());
        }
        s.recompute_spans();
        doc.sentences.push(s);
    }
    doc
}

/// Inputs that [`crate::conllu::parse_conllu`] must reject, with a label each.
pub fn malformed_fixtures() -> Vec<(String, String)> {
    let good = |id: &str, form: &str, head: &str| format!("{id}\t{form}\t{form}\tNOUN\t_\t_\t{head}\tdep\t_\t_");
    let mut out = Vec::new();
    for n in [2usize, 3, 5] {
        let ok_lines: Vec<String> = (1..=n)
            .map(|i| good(&i.to_string(), "wurd", if i == 1 { "0" } else { "1" }))
            .collect();
        let body = |lines: &[String]| format!("# sent_id = m{n}\n{}\n\n", lines.join("\n"));
        let mut variant = |label: &str, f: &dyn Fn(&mut Vec<String>)| {
            let mut lines = ok_lines.clone();
            f(&mut lines);
            out.push((format!("{label} (n={n})"), body(&lines)));
        };
        variant("nine columns", &|l| l[n - 1] = l[n - 1].rsplit_once('\t').unwrap().0.to_owned());
        variant("eleven columns", &|l| l[0].push_str("\textra"));
        variant("space instead of tab", &|l| l[n - 1] = l[n - 1].replacen('\t', " ", 1));
        variant("head out of range", &|l| l[n - 1] = good(&n.to_string(), "x", &(n + 3).to_string()));
        variant("self head", &|l| l[n - 1] = good(&n.to_string(), "x", &n.to_string()));
        variant("non-numeric head", &|l| l[n - 1] = good(&n.to_string(), "x", "h"));
        variant("duplicate id", &|l| l[n - 1] = good(&(n - 1).to_string(), "x", "1"));
        variant("skipped id", &|l| l[n - 1] = good(&(n + 1).to_string(), "x", "1"));
        variant("zero id", &|l| l[0] = good("0", "x", "1"));
        variant("non-numeric id", &|l| l[0] = good("a", "x", "0"));
        variant("unknown upos", &|l| l[0] = l[0].replace("NOUN", "NN"));
        variant("feature without value", &|l| l[0] = l[0].replacen("\t_\t_\t0", "\t_\tCase\t0", 1));
        variant("duplicate feature", &|l| l[0] = l[0].replacen("\t_\t_\t0", "\t_\tCase=Nom|Case=Acc\t0", 1));
        variant("empty node", &|l| l.insert(1, "1.1\tx\tx\tNOUN\t_\t_\t_\t_\t0:dep\t_".into()));
        variant("range after its start", &|l| l.insert(1, format!("1-{n}\tx\t_\t_\t_\t_\t_\t_\t_\t_")));
        variant("range beyond sentence", &|l| l.insert(0, format!("1-{}\tx\t_\t_\t_\t_\t_\t_\t_\t_", n + 2)));
        variant("empty column", &|l| l[0] = l[0].replacen("\twurd\t", "\t\t", 1));
    }
    out.push(("text comment mismatch".into(), format!("# text = oars\n{}\n\n", good("1", "wurd", "0"))));
    out.push(("duplicate sent_id".into(), format!("# sent_id = a\n{}\n\n# sent_id = a\n{}\n\n", good("1", "x", "0"), good("1", "y", "0"))));
    out.push(("comment inside sentence".into(), format!("{}\n# late\n{}\n\n", good("1", "x", "0"), good("2", "y", "1"))));
    out.push(("comment block without tokens".into(), "# sent_id = z\n\n".to_owned()));
    out
}
