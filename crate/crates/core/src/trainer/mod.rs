//! Native annotation pipeline: tagger, lemmatizer and dependency parser.
//!
//! # Model file
//!
//! A model is a UTF-8 text file. The first line is the header
//! `pivotud-model <version>`; the rest is one JSON object with the fields of
//! [`PipelineModel`]. Weight tables are maps from feature string to a list of
//! `[class index, weight]` pairs, written with sorted keys so that saving the
//! same model twice yields identical bytes.

pub mod lemmatizer;
pub mod parser;
pub mod perceptron;
pub mod tagger;

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::conllu::{serialize_conllu, Document, Sentence, Upos};
use crate::error::{Error, Result};
use crate::tokenizer::{tokenize, TokenizerConfig};

pub use lemmatizer::{Casing, EditScript, Lemmatizer};
pub use parser::{check_tree, decode_with_scores, projectivize, ParseInput, ParserModel};
pub use perceptron::{PerceptronTrainer, Weights};
pub use tagger::{TaggedToken, TaggerModel};

pub const MODEL_MAGIC: &str = "pivotud-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EvalSetting {
    RawText,
    GoldTok,
    GoldTokMorph,
}

impl EvalSetting {
    pub const ALL: [EvalSetting; 3] = [
        EvalSetting::RawText,
        EvalSetting::GoldTok,
        EvalSetting::GoldTokMorph,
    ];

    pub fn label(self) -> &'static str {
        match self {
            EvalSetting::RawText => "Raw text",
            EvalSetting::GoldTok => "Gold tok",
            EvalSetting::GoldTokMorph => "Gold tok + morph",
        }
    }
}

impl std::str::FromStr for EvalSetting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_', ' '], "").as_str() {
            "raw" | "rawtext" => Ok(EvalSetting::RawText),
            "goldtok" => Ok(EvalSetting::GoldTok),
            "goldtokmorph" | "goldmorph" => Ok(EvalSetting::GoldTokMorph),
            _ => Err(Error::invalid(format!(
                "unknown setting '{s}' (expected raw, gold-tok or gold-tok-morph)"
            ))),
        }
    }
}

/// Training hyperparameters. Parsing is always greedy (beam 1).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub tagger_epochs: usize,
    pub parser_epochs: usize,
    pub seed: u64,
    /// Averaged weights with magnitude at or below this are dropped.
    pub weight_cutoff: f64,
    pub abbreviations: Vec<String>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            tagger_epochs: 10,
            parser_epochs: 10,
            seed: 1,
            weight_cutoff: 0.0,
            abbreviations: Vec::new(),
        }
    }
}

impl TrainConfig {
    /// Reads a TOML file; missing keys keep their defaults.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: TrainConfig =
            toml::from_str(text).map_err(|e| Error::invalid(format!("bad training config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.tagger_epochs == 0 || self.parser_epochs == 0 {
            return Err(Error::invalid("epochs must be at least 1"));
        }
        if self.weight_cutoff.is_nan() || self.weight_cutoff < 0.0 {
            return Err(Error::invalid("weight_cutoff must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub tagger_epochs: usize,
    pub parser_epochs: usize,
    pub best_tagger_epoch: usize,
    pub best_parser_epoch: usize,
    /// FNV-1a hash of the training corpus in CoNLL-U form, as hex.
    pub corpus_hash: String,
    pub train_sentences: usize,
    pub train_tokens: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PipelineModel {
    pub tagger: TaggerModel,
    pub lemmatizer: Lemmatizer,
    pub parser: ParserModel,
    pub abbreviations: Vec<String>,
    pub meta: TrainingMeta,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Trains all three components. `dev` selects the kept epoch and may be empty,
/// in which case the last epoch is kept.
pub fn train_pipeline(train: &Document, dev: &Document, cfg: &TrainConfig) -> Result<PipelineModel> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::invalid("training data is empty"));
    }
    let tokenizer = TokenizerConfig::default().with_abbreviations(cfg.abbreviations.clone())?;
    let t = tagger::train_tagger(
        &train.sentences,
        &dev.sentences,
        cfg.tagger_epochs,
        cfg.seed,
        cfg.weight_cutoff,
    )?;
    let lemmatizer = Lemmatizer::train(&train.sentences);
    let p = parser::train_parser(
        &train.sentences,
        &dev.sentences,
        cfg.parser_epochs,
        cfg.seed,
        cfg.weight_cutoff,
    )?;
    let hash = fnv1a(serialize_conllu(train).unwrap_or_default().as_bytes());
    Ok(PipelineModel {
        tagger: t.model,
        lemmatizer,
        parser: p.model,
        abbreviations: tokenizer.abbreviations.into_iter().collect(),
        meta: TrainingMeta {
            seed: cfg.seed,
            tagger_epochs: cfg.tagger_epochs,
            parser_epochs: cfg.parser_epochs,
            best_tagger_epoch: t.best_epoch,
            best_parser_epoch: p.best_epoch,
            corpus_hash: format!("{hash:016x}"),
            train_sentences: train.sentences.len(),
            train_tokens: train.token_count(),
        },
    })
}

/// Input to [`PipelineModel::annotate`].
#[derive(Clone, Copy, Debug)]
pub enum AnnotateInput<'a> {
    Raw(&'a str),
    Tokenized(&'a Document),
}

impl PipelineModel {
    pub fn is_trained(&self) -> bool {
        self.tagger.is_trained() && self.parser.is_trained()
    }

    pub fn tokenizer_config(&self) -> TokenizerConfig {
        TokenizerConfig {
            abbreviations: self.abbreviations.iter().cloned().collect(),
            ..TokenizerConfig::default()
        }
    }

    fn require_trained(&self) -> Result<()> {
        if self.is_trained() {
            Ok(())
        } else {
            Err(Error::Model("model is not trained".into()))
        }
    }

    /// Predicts UPOS, XPOS, FEATS and lemma for every token.
    pub fn tag_sentence(&self, s: &mut Sentence) {
        let tags = self.tagger.tag(&s.forms());
        for (t, p) in s.tokens.iter_mut().zip(tags) {
            t.lemma = Some(self.lemmatizer.lemmatize(&t.form, Some(p.upos)));
            t.upos = Some(p.upos);
            t.xpos = p.xpos;
            t.feats = p.feats;
        }
    }

    /// Predicts heads and relations from the forms and current UPOS.
    pub fn parse_sentence(&self, s: &mut Sentence) {
        if s.is_empty() {
            return;
        }
        let forms = s.forms();
        let tags: Vec<&str> = s.tokens.iter().map(|t| t.upos.map_or("_", Upos::as_str)).collect();
        let (heads, labels) = self.parser.parse(&ParseInput::new(&forms, &tags));
        for ((t, h), l) in s.tokens.iter_mut().zip(heads).zip(labels) {
            t.head = Some(h);
            t.deprel = Some(l);
        }
    }

    pub fn annotate(&self, input: AnnotateInput<'_>, setting: EvalSetting) -> Result<Document> {
        self.require_trained()?;
        match (input, setting) {
            (AnnotateInput::Raw(text), EvalSetting::RawText) => {
                let mut doc = tokenize(text, &self.tokenizer_config());
                for s in &mut doc.sentences {
                    self.tag_sentence(s);
                    self.parse_sentence(s);
                }
                Ok(doc)
            }
            (AnnotateInput::Tokenized(doc), EvalSetting::GoldTok) => {
                let mut out = doc.clone();
                for s in &mut out.sentences {
                    for t in &mut s.tokens {
                        t.clear_annotation();
                    }
                    self.tag_sentence(s);
                    self.parse_sentence(s);
                }
                Ok(out)
            }
            (AnnotateInput::Tokenized(doc), EvalSetting::GoldTokMorph) => {
                let mut out = doc.clone();
                for (si, s) in out.sentences.iter_mut().enumerate() {
                    if let Some(t) = s.tokens.iter().find(|t| t.upos.is_none()) {
                        let name = s.sent_id().map_or_else(|| format!("#{}", si + 1), str::to_owned);
                        return Err(Error::validation(
                            name,
                            format!("token {} lacks the gold UPOS needed for gold morphology", t.id),
                        ));
                    }
                    self.parse_sentence(s);
                }
                Ok(out)
            }
            (AnnotateInput::Raw(_), _) => Err(Error::invalid(format!(
                "setting '{}' needs a tokenized document, not raw text",
                setting.label()
            ))),
            (AnnotateInput::Tokenized(_), EvalSetting::RawText) => Err(Error::invalid(
                "setting 'Raw text' needs raw text, not a tokenized document",
            )),
        }
    }

    pub fn to_text(&self) -> Result<String> {
        let mut out = format!("{MODEL_MAGIC} {MODEL_VERSION}\n");
        let value = serde_json::to_value(self)?;
        out.push_str(&serde_json::to_string(&value)?);
        out.push('\n');
        Ok(out)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let (header, body) = text
            .split_once('\n')
            .ok_or_else(|| Error::Model("model file has no header line".into()))?;
        let version = header
            .strip_prefix(MODEL_MAGIC)
            .map(str::trim)
            .ok_or_else(|| Error::Model(format!("not a model file (header '{header}')")))?;
        let version: u32 = version
            .parse()
            .map_err(|_| Error::Model(format!("bad model version '{version}'")))?;
        if version != MODEL_VERSION {
            return Err(Error::Model(format!(
                "model version {version} is not supported (expected {MODEL_VERSION})"
            )));
        }
        serde_json::from_str(body).map_err(|e| Error::Model(format!("corrupt model body: {e}")))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub dev_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(seed: u64) -> Self {
        SplitSpec {
            train_fraction: 0.8,
            dev_fraction: 0.1,
            test_fraction: 0.1,
            seed,
        }
    }
}

pub const MIN_SPLIT_SENTENCES: usize = 10;

/// Shuffles the sentences with a seeded generator and cuts them into train,
/// dev and test parts. Dev and test get `floor(n * fraction)` sentences each.
pub fn split_corpus(doc: &Document, spec: &SplitSpec) -> Result<(Document, Document, Document)> {
    let n = doc.sentences.len();
    if n < MIN_SPLIT_SENTENCES {
        return Err(Error::invalid(format!(
            "splitting needs at least {MIN_SPLIT_SENTENCES} sentences, got {n}"
        )));
    }
    let fractions = [spec.train_fraction, spec.dev_fraction, spec.test_fraction];
    if fractions.iter().any(|f| !(0.0..=1.0).contains(f))
        || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9
    {
        return Err(Error::invalid("split fractions must be in [0, 1] and sum to 1"));
    }
    let cut = |f: f64| ((n as f64) * f + 1e-9).floor() as usize;
    let n_dev = cut(spec.dev_fraction);
    let n_test = cut(spec.test_fraction);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let n_train = n - n_dev - n_test;
    Ok((
        doc.select(&order[..n_train]),
        doc.select(&order[n_train..n_train + n_dev]),
        doc.select(&order[n_train + n_dev..]),
    ))
}

/// Per-batch outcome of [`bootstrap_lemmas`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LemmaRound {
    pub tokens: usize,
    /// Tokens whose predicted lemma the corrector changed.
    pub corrected: usize,
}

/// Grows a lemmatized corpus batch by batch: a lemmatizer trained on all
/// lemmatized text so far pre-fills each new batch, `correct` fixes the
/// batch in place, and the batch joins the training data.
pub fn bootstrap_lemmas(
    seed_corpus: &[Sentence],
    batches: Vec<Vec<Sentence>>,
    mut correct: impl FnMut(&mut Sentence),
) -> (Lemmatizer, Vec<Sentence>, Vec<LemmaRound>) {
    let mut corpus = seed_corpus.to_vec();
    let mut rounds = Vec::with_capacity(batches.len());
    for batch in batches {
        let lem = Lemmatizer::train(&corpus);
        let mut round = LemmaRound {
            tokens: 0,
            corrected: 0,
        };
        for mut s in batch {
            for t in &mut s.tokens {
                t.lemma = Some(lem.lemmatize(&t.form, t.upos));
            }
            let before: Vec<Option<String>> = s.tokens.iter().map(|t| t.lemma.clone()).collect();
            correct(&mut s);
            round.tokens += s.tokens.len();
            round.corrected += s
                .tokens
                .iter()
                .zip(&before)
                .filter(|(t, b)| &t.lemma != *b)
                .count();
            corpus.push(s);
        }
        rounds.push(round);
    }
    (Lemmatizer::train(&corpus), corpus, rounds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conllu::parse_conllu;

    const TINY: &str = "# sent_id = a\n# text = de man sjocht\n1\tde\tde\tDET\t_\t_\t2\tdet\t_\t_\n2\tman\tman\tNOUN\t_\tNumber=Sing\t3\tnsubj\t_\t_\n3\tsjocht\tsjen\tVERB\t_\t_\t0\troot\t_\t_\n\n# sent_id = b\n# text = it hûs falt\n1\tit\tit\tDET\t_\t_\t2\tdet\t_\t_\n2\thûs\thûs\tNOUN\t_\tNumber=Sing\t3\tnsubj\t_\t_\n3\tfalt\tfalle\tVERB\t_\t_\t0\troot\t_\t_\n\n";

    fn tiny_model() -> (Document, PipelineModel) {
        let doc = parse_conllu(TINY).unwrap();
        let model = train_pipeline(&doc, &Document::new(), &TrainConfig::default()).unwrap();
        (doc, model)
    }

    #[test]
    fn split_sizes() {
        let doc = Document::from_sentences((0..10).map(|_| Sentence::from_forms(&["x"])).collect());
        let (tr, dv, te) = split_corpus(&doc, &SplitSpec::new(3)).unwrap();
        assert_eq!((tr.sentences.len(), dv.sentences.len(), te.sentences.len()), (8, 1, 1));
        let small = Document::from_sentences(vec![Sentence::from_forms(&["x"]); 9]);
        assert!(split_corpus(&small, &SplitSpec::new(3)).is_err());
    }

    #[test]
    fn split_is_a_seeded_partition() {
        let doc = Document::from_sentences(
            (0..37)
                .map(|i| {
                    let mut s = Sentence::from_forms(&["x"]);
                    s.set_comment("sent_id", i.to_string());
                    s
                })
                .collect(),
        );
        let a = split_corpus(&doc, &SplitSpec::new(5)).unwrap();
        let b = split_corpus(&doc, &SplitSpec::new(5)).unwrap();
        assert_eq!(a, b);
        let mut ids: Vec<String> = [&a.0, &a.1, &a.2]
            .iter()
            .flat_map(|d| d.sentences.iter().map(|s| s.sent_id().unwrap().to_owned()))
            .collect();
        ids.sort_by_key(|s| s.parse::<usize>().unwrap());
        assert_eq!(ids, (0..37).map(|i| i.to_string()).collect::<Vec<_>>());
        assert_eq!((a.1.sentences.len(), a.2.sentences.len()), (3, 3));
    }

    #[test]
    fn gold_tok_reproduces_memorized_corpus() {
        let (doc, model) = tiny_model();
        let out = model.annotate(AnnotateInput::Tokenized(&doc), EvalSetting::GoldTok).unwrap();
        assert_eq!(out, doc);
    }

    #[test]
    fn gold_tok_morph_only_changes_syntax() {
        let (mut doc, model) = tiny_model();
        doc.sentences[0].tokens[0].xpos = Some("LID".into());
        let out = model
            .annotate(AnnotateInput::Tokenized(&doc), EvalSetting::GoldTokMorph)
            .unwrap();
        for (a, b) in doc.tokens().zip(out.tokens()) {
            assert_eq!((&a.form, &a.lemma, a.upos, &a.xpos, &a.feats), (&b.form, &b.lemma, b.upos, &b.xpos, &b.feats));
        }
    }

    #[test]
    fn setting_mismatch_and_untrained_model_error() {
        let (doc, model) = tiny_model();
        assert!(model.annotate(AnnotateInput::Raw("x"), EvalSetting::GoldTok).is_err());
        assert!(model.annotate(AnnotateInput::Tokenized(&doc), EvalSetting::RawText).is_err());
        assert!(PipelineModel::default()
            .annotate(AnnotateInput::Raw("x"), EvalSetting::RawText)
            .is_err());
        let empty = model.annotate(AnnotateInput::Raw(""), EvalSetting::RawText).unwrap();
        assert!(empty.is_empty());
    }

    #[test]
    fn model_text_round_trip() {
        let (doc, model) = tiny_model();
        let text = model.to_text().unwrap();
        assert!(text.starts_with("pivotud-model 1\n"));
        let back = PipelineModel::from_text(&text).unwrap();
        assert_eq!(back.to_text().unwrap(), text);
        let a = model.annotate(AnnotateInput::Tokenized(&doc), EvalSetting::GoldTok).unwrap();
        let b = back.annotate(AnnotateInput::Tokenized(&doc), EvalSetting::GoldTok).unwrap();
        assert_eq!(a, b);
        assert!(PipelineModel::from_text("pivotud-model 9\n{}").is_err());
        assert!(PipelineModel::from_text("garbage").is_err());
    }

    #[test]
    fn config_from_toml() {
        let cfg = TrainConfig::from_toml("tagger_epochs = 3\nseed = 9\n").unwrap();
        assert_eq!(cfg.tagger_epochs, 3);
        assert_eq!(cfg.parser_epochs, 10);
        assert!(TrainConfig::from_toml("tagger_epochs = 0").is_err());
        assert!(TrainConfig::from_toml("beam = 4").is_err());
    }

    #[test]
    fn lemma_bootstrap_reduces_corrections() {
        let mk = |pairs: &[(&str, &str)]| {
            let mut s = Sentence::from_forms(&pairs.iter().map(|p| p.0).collect::<Vec<_>>());
            for t in &mut s.tokens {
                t.upos = Some(Upos::Noun);
            }
            s
        };
        let gold = |s: &mut Sentence| {
            for t in &mut s.tokens {
                t.lemma = Some(t.form.trim_end_matches("en").to_owned());
            }
        };
        let mut seed = mk(&[("boeken", "")]);
        gold(&mut seed);
        let batches = vec![vec![mk(&[("stoelen", ""), ("doazen", "")])], vec![mk(&[("kaarten", "")])]];
        let (_, corpus, rounds) = bootstrap_lemmas(&[seed], batches, gold);
        assert_eq!(corpus.len(), 3);
        assert_eq!(rounds[0].corrected, 0);
        assert_eq!(rounds[1].corrected, 0);
    }
}
