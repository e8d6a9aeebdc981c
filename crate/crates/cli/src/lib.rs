//! Shared plumbing for the `pivotud` command-line tool and HTTP service:
//! output rendering, statistics reports and the annotation entry point used
//! by both front ends.

pub mod server;

use std::fmt;
use std::str::FromStr;

use pivotud::corpus_stats::{
    cooccurrence, cooccurrence_tsv, genre_distribution, split_by_genre, top_tokens_per_upos, top_tokens_tsv,
    upos_frequencies, upos_frequencies_tsv,
};
use pivotud::{parse_conllu, serialize_conllu, serialize_tsv, AnnotateInput, Document, EvalSetting, PipelineModel, Upos};
use serde_json::{json, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Conllu,
    Tsv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "conllu" => Ok(OutputFormat::Conllu),
            "tsv" => Ok(OutputFormat::Tsv),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!("unknown format '{other}' (expected conllu, tsv or json)")),
        }
    }
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Conllu => "conllu",
            OutputFormat::Tsv => "tsv",
            OutputFormat::Json => "json",
        })
    }
}

/// The structured form of a document: sentences, then tokens with all ten
/// columns. Absent values are `null`.
pub fn document_json(doc: &Document) -> Value {
    let sentences: Vec<Value> = doc
        .sentences
        .iter()
        .map(|s| {
            let tokens: Vec<Value> = s
                .tokens
                .iter()
                .map(|t| {
                    json!({
                        "id": t.id,
                        "form": t.form,
                        "lemma": t.lemma,
                        "upos": t.upos.map(|u| u.as_str()),
                        "xpos": t.xpos,
                        "feats": (!t.feats.is_empty()).then(|| t.feats.to_string()),
                        "head": t.head,
                        "deprel": t.deprel,
                        "deps": t.deps,
                        "misc": t.misc,
                    })
                })
                .collect();
            json!({
                "sent_id": s.sent_id(),
                "text": s.text(),
                "tokens": tokens,
            })
        })
        .collect();
    json!({ "sentences": sentences })
}

pub fn render(doc: &Document, format: OutputFormat) -> pivotud::Result<String> {
    match format {
        OutputFormat::Conllu => serialize_conllu(doc),
        OutputFormat::Tsv => serialize_tsv(doc),
        OutputFormat::Json => {
            let mut s = serde_json::to_string_pretty(&document_json(doc))?;
            s.push('\n');
            Ok(s)
        }
    }
}

/// Annotates `input` and renders it. Raw text is tokenized first; the
/// gold-token settings expect CoNLL-U input.
pub fn annotate_text(model: &PipelineModel, input: &str, setting: EvalSetting, format: OutputFormat) -> pivotud::Result<String> {
    let doc = match setting {
        EvalSetting::RawText => model.annotate(AnnotateInput::Raw(input), setting)?,
        _ => {
            let gold = parse_conllu(input)?;
            model.annotate(AnnotateInput::Tokenized(&gold), setting)?
        }
    };
    render(&doc, format)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StatsReport {
    Genres,
    Upos,
    Top,
    Cooc,
}

impl FromStr for StatsReport {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "genres" => Ok(StatsReport::Genres),
            "upos" => Ok(StatsReport::Upos),
            "top" => Ok(StatsReport::Top),
            "cooc" => Ok(StatsReport::Cooc),
            other => Err(format!("unknown report '{other}' (expected genres, upos, top or cooc)")),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct StatsOptions {
    pub upos_filter: Upos,
    pub top_n: usize,
    pub min_weight: u64,
}

impl Default for StatsOptions {
    fn default() -> Self {
        StatsOptions {
            upos_filter: Upos::Adp,
            top_n: 10,
            min_weight: 1,
        }
    }
}

/// One corpus statistics report as TSV.
pub fn render_stats(doc: &Document, report: StatsReport, opts: &StatsOptions) -> pivotud::Result<String> {
    match report {
        StatsReport::Genres => Ok(genre_distribution(&split_by_genre(doc)?)?.to_tsv()),
        StatsReport::Upos => Ok(upos_frequencies_tsv(&upos_frequencies(doc)?)),
        StatsReport::Top => Ok(top_tokens_tsv(&top_tokens_per_upos(doc, opts.top_n)?)),
        StatsReport::Cooc => Ok(cooccurrence_tsv(&cooccurrence(doc, opts.upos_filter, opts.min_weight))),
    }
}

/// Reads CoNLL-U when the text looks like it (tab-separated token lines),
/// otherwise annotates it as raw text.
pub fn stats_input(model: &PipelineModel, text: &str) -> pivotud::Result<Document> {
    let looks_conllu = text
        .lines()
        .find(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .is_some_and(|l| l.split('\t').count() == 10);
    if looks_conllu {
        parse_conllu(text)
    } else {
        model.annotate(AnnotateInput::Raw(text), EvalSetting::RawText)
    }
}
