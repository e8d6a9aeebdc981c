//! Annotation transfer from a related language.
//!
//! Three procedures produce a [`ProjectedDocument`]: tagging the source text
//! directly with a related-language model, tagging a word-for-word pivot
//! translation and copying the tags back by position, and copying tags from
//! an annotated parallel text along word-alignment links.

use serde::{Deserialize, Serialize};

use crate::aligner::AlignmentLink;
use crate::conllu::{misc_set, Document, Features, Sentence, Upos};
use crate::error::{Error, Result};
use crate::evaluation::stats::{fisher_exact, ContingencyTable2x2};
use crate::evaluation::round1;
use crate::pivot::{PivotAnnotation, PivotSentence, TranslatorClient};
use crate::trainer::{AnnotateInput, EvalSetting, PipelineModel};

pub const FALLBACK_DEPREL: &str = "dep";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProcedureKind {
    Direct,
    PivotTranslation,
    ParallelAlignment,
}

impl ProcedureKind {
    pub fn misc_value(self) -> &'static str {
        match self {
            ProcedureKind::Direct => "direct",
            ProcedureKind::PivotTranslation => "pivot",
            ProcedureKind::ParallelAlignment => "align",
        }
    }
}

impl std::str::FromStr for ProcedureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(ProcedureKind::Direct),
            "pivot" => Ok(ProcedureKind::PivotTranslation),
            "align" => Ok(ProcedureKind::ParallelAlignment),
            _ => Err(Error::invalid(format!(
                "unknown procedure '{s}' (expected direct, pivot or align)"
            ))),
        }
    }
}

/// How one token got its annotation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub kind: ProcedureKind,
    /// The pivot word sent to the model.
    pub pivot: Option<String>,
    /// The alignment link whose source token supplied the tags.
    pub link: Option<AlignmentLink>,
    /// The translator fell back to the source word, or no link reached the token.
    pub fallback: bool,
    /// The head could not be projected and was attached to the root.
    pub head_fallback: bool,
}

impl Provenance {
    fn new(kind: ProcedureKind) -> Self {
        Provenance {
            kind,
            pivot: None,
            link: None,
            fallback: false,
            head_fallback: false,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ProjectedDocument {
    pub document: Document,
    /// One record per token, per sentence.
    pub provenance: Vec<Vec<Provenance>>,
}

impl ProjectedDocument {
    /// The document with provenance added to MISC as `Proj=`, `Pivot=`,
    /// `Link=` and `Fallback=Yes`.
    pub fn with_provenance_misc(&self) -> Document {
        let mut doc = self.document.clone();
        for (s, prov) in doc.sentences.iter_mut().zip(&self.provenance) {
            for (t, p) in s.tokens.iter_mut().zip(prov) {
                misc_set(&mut t.misc, "Proj", p.kind.misc_value());
                if let Some(w) = &p.pivot {
                    if !w.is_empty() && !w.contains(['|', '=', '\t', '\n', ' ']) {
                        misc_set(&mut t.misc, "Pivot", w);
                    }
                }
                if let Some(l) = p.link {
                    misc_set(&mut t.misc, "Link", &l.to_string());
                }
                if p.fallback {
                    misc_set(&mut t.misc, "Fallback", "Yes");
                }
                if p.head_fallback {
                    misc_set(&mut t.misc, "HeadFallback", "Yes");
                }
            }
        }
        doc
    }

    pub fn check(&self) -> Result<()> {
        if self.provenance.len() != self.document.sentences.len()
            || self
                .provenance
                .iter()
                .zip(&self.document.sentences)
                .any(|(p, s)| p.len() != s.len())
        {
            return Err(Error::invalid("provenance does not cover every token"));
        }
        Ok(())
    }
}

fn require_trained(model: &PipelineModel) -> Result<()> {
    if model.is_trained() {
        Ok(())
    } else {
        Err(Error::Model("model is not trained".into()))
    }
}

/// Tags the source tokens directly with the related-language model.
pub fn project_direct(doc: &Document, model: &PipelineModel) -> Result<ProjectedDocument> {
    require_trained(model)?;
    let document = model.annotate(AnnotateInput::Tokenized(doc), EvalSetting::GoldTok)?;
    let provenance = document
        .sentences
        .iter()
        .map(|s| vec![Provenance::new(ProcedureKind::Direct); s.len()])
        .collect();
    Ok(ProjectedDocument {
        document,
        provenance,
    })
}

/// Runs the model over the pivot tokens and stores the result on `pivot`.
pub fn annotate_pivot(pivot: &mut PivotSentence, model: &PipelineModel) -> Result<()> {
    let mut s = Sentence::from_forms(&pivot.pivot_tokens);
    model.tag_sentence(&mut s);
    model.parse_sentence(&mut s);
    pivot.pivot_annotations = Some(
        s.tokens
            .into_iter()
            .map(|t| PivotAnnotation {
                upos: t.upos,
                xpos: t.xpos,
                feats: t.feats,
                lemma: t.lemma,
                head: t.head,
                deprel: t.deprel,
            })
            .collect(),
    );
    pivot.check()
}

/// Translates each sentence word for word, annotates the translation and
/// copies UPOS, XPOS, FEATS, head and relation back by position. Lemmas come
/// from the model's lemmatizer applied to the source form.
pub fn project_via_pivot(
    doc: &Document,
    translator: &TranslatorClient,
    model: &PipelineModel,
) -> Result<ProjectedDocument> {
    require_trained(model)?;
    let mut document = doc.clone();
    let mut provenance = Vec::with_capacity(doc.sentences.len());
    for s in &mut document.sentences {
        if s.is_empty() {
            provenance.push(Vec::new());
            continue;
        }
        let mut pivot = translator.translate_sentence(&s.forms())?;
        annotate_pivot(&mut pivot, model)?;
        let ann = pivot.pivot_annotations.take().expect("just annotated");
        if ann.len() != s.len() {
            return Err(Error::invalid("internal error: pivot length differs from source"));
        }
        let mut prov = Vec::with_capacity(s.len());
        for (i, (t, a)) in s.tokens.iter_mut().zip(ann).enumerate() {
            t.clear_annotation();
            t.upos = a.upos;
            t.xpos = a.xpos;
            t.feats = a.feats;
            t.head = a.head;
            t.deprel = a.deprel;
            t.lemma = Some(model.lemmatizer.lemmatize(&t.form, t.upos));
            let mut p = Provenance::new(ProcedureKind::PivotTranslation);
            p.pivot = Some(pivot.pivot_tokens[i].clone());
            p.fallback = pivot.fallbacks[i];
            prov.push(p);
        }
        provenance.push(prov);
    }
    Ok(ProjectedDocument {
        document,
        provenance,
    })
}

/// Reattaches one token of every head cycle to the root until none remain.
/// Returns the reattached token ids.
fn break_cycles(heads: &mut [usize]) -> Vec<usize> {
    let n = heads.len();
    let mut fixed = Vec::new();
    loop {
        let mut found = None;
        'outer: for start in 1..=n {
            let mut seen = vec![false; n + 1];
            let mut cur = start;
            while cur != 0 {
                if seen[cur] {
                    // `cur` is on a cycle; pick its lowest member.
                    let mut m = cur;
                    let mut x = heads[cur - 1];
                    while x != cur {
                        m = m.min(x);
                        x = heads[x - 1];
                    }
                    found = Some(m);
                    break 'outer;
                }
                seen[cur] = true;
                cur = heads[cur - 1];
            }
        }
        match found {
            Some(m) => {
                heads[m - 1] = 0;
                fixed.push(m);
            }
            None => return fixed,
        }
    }
}

/// Copies annotation from an annotated source text along alignment links.
///
/// `links[k]` are the links of sentence pair `k`, with 0-based
/// `src_index` into `source` and `tgt_index` into `target`. A target token
/// with several links takes the lowest linked source index; a token with no
/// link gets UPOS `X`. A head is projected when the source token's head is
/// linked to a different target token; otherwise the token is attached to
/// the root with relation `dep`. Cycles created by many-to-one links are
/// broken the same way.
pub fn project_via_alignment(
    source: &Document,
    target: &Document,
    links: &[Vec<AlignmentLink>],
) -> Result<ProjectedDocument> {
    if source.sentences.len() != target.sentences.len() || links.len() != target.sentences.len() {
        return Err(Error::invalid(format!(
            "sentence counts differ: {} source, {} target, {} link lines",
            source.sentences.len(),
            target.sentences.len(),
            links.len()
        )));
    }
    let mut document = target.clone();
    let mut provenance = Vec::with_capacity(target.sentences.len());
    for (k, ((src, tgt), ls)) in source
        .sentences
        .iter()
        .zip(document.sentences.iter_mut())
        .zip(links)
        .enumerate()
    {
        let (m, n) = (src.len(), tgt.len());
        for l in ls {
            if l.src_index >= m || l.tgt_index >= n {
                return Err(Error::invalid(format!(
                    "sentence {}: link {l} out of range for lengths {m} and {n}",
                    k + 1
                )));
            }
        }
        // Target position -> lowest linked source position.
        let mut t2s: Vec<Option<usize>> = vec![None; n];
        // Source position -> lowest linked target position.
        let mut s2t: Vec<Option<usize>> = vec![None; m];
        for l in ls {
            let e = &mut t2s[l.tgt_index];
            *e = Some(e.map_or(l.src_index, |s| s.min(l.src_index)));
            let e = &mut s2t[l.src_index];
            *e = Some(e.map_or(l.tgt_index, |t| t.min(l.tgt_index)));
        }
        let mut prov = Vec::with_capacity(n);
        let mut heads = vec![0usize; n];
        for (j, t) in tgt.tokens.iter_mut().enumerate() {
            t.clear_annotation();
            let mut p = Provenance::new(ProcedureKind::ParallelAlignment);
            match t2s[j] {
                Some(i) => {
                    let st = &src.tokens[i];
                    p.link = Some(AlignmentLink::new(i, j));
                    t.upos = Some(st.upos.unwrap_or(Upos::X));
                    t.xpos = st.xpos.clone();
                    t.feats = st.feats.clone();
                    let projected = match st.head {
                        Some(0) => Some(0),
                        Some(h) => s2t
                            .get(h - 1)
                            .copied()
                            .flatten()
                            .map(|tj| tj + 1)
                            .filter(|&tj| tj != j + 1),
                        None => None,
                    };
                    match projected {
                        Some(h) => {
                            heads[j] = h;
                            t.deprel = st.deprel.clone().or_else(|| Some(FALLBACK_DEPREL.into()));
                        }
                        None => p.head_fallback = true,
                    }
                }
                None => {
                    t.upos = Some(Upos::X);
                    t.feats = Features::new();
                    p.fallback = true;
                    p.head_fallback = true;
                }
            }
            prov.push(p);
        }
        for id in break_cycles(&mut heads) {
            prov[id - 1].head_fallback = true;
        }
        for ((t, h), p) in tgt.tokens.iter_mut().zip(&heads).zip(&prov) {
            t.head = Some(*h);
            if p.head_fallback {
                t.deprel = Some(FALLBACK_DEPREL.into());
            }
        }
        provenance.push(prov);
    }
    Ok(ProjectedDocument {
        document,
        provenance,
    })
}

/// Tokens whose projected UPOS equals the gold UPOS, and the token total.
pub fn score_procedure(projected: &ProjectedDocument, gold: &Document) -> Result<(usize, usize)> {
    let sys = &projected.document;
    if sys.sentences.len() != gold.sentences.len() {
        return Err(Error::invalid("projected and gold documents have different sentence counts"));
    }
    let mut correct = 0;
    let mut total = 0;
    for (k, (a, b)) in sys.sentences.iter().zip(&gold.sentences).enumerate() {
        if a.forms() != b.forms() {
            return Err(Error::invalid(format!(
                "sentence {} is tokenized differently in projected and gold text",
                k + 1
            )));
        }
        for (x, y) in a.tokens.iter().zip(&b.tokens) {
            total += 1;
            if x.upos.is_some() && x.upos == y.upos {
                correct += 1;
            }
        }
    }
    Ok((correct, total))
}

pub fn percentage(correct: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        round1(100.0 * correct as f64 / total as f64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProcedureScore {
    pub name: String,
    pub correct: usize,
    pub total: usize,
    pub percent: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairwiseTest {
    /// The procedure with the higher share of correct tags.
    pub better: String,
    pub worse: String,
    pub table: ContingencyTable2x2,
    pub p_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    /// In input order.
    pub scores: Vec<ProcedureScore>,
    /// Every pair of procedures.
    pub pairwise: Vec<PairwiseTest>,
}

/// Scores each named projection against the gold tags and runs Fisher's
/// exact test on the pooled correct/incorrect counts of every pair.
pub fn compare_procedures(gold: &Document, runs: &[(String, ProjectedDocument)]) -> Result<ComparisonReport> {
    let mut scores = Vec::with_capacity(runs.len());
    for (name, p) in runs {
        let (correct, total) = score_procedure(p, gold)?;
        scores.push(ProcedureScore {
            name: name.clone(),
            correct,
            total,
            percent: percentage(correct, total),
        });
    }
    let mut pairwise = Vec::new();
    for i in 0..scores.len() {
        for j in i + 1..scores.len() {
            let (x, y) = (&scores[i], &scores[j]);
            let x_better = x.correct as f64 * y.total as f64 >= y.correct as f64 * x.total as f64;
            let (b, w) = if x_better { (x, y) } else { (y, x) };
            let table = ContingencyTable2x2::new(
                b.correct as u64,
                (b.total - b.correct) as u64,
                w.correct as u64,
                (w.total - w.correct) as u64,
            );
            pairwise.push(PairwiseTest {
                better: b.name.clone(),
                worse: w.name.clone(),
                table,
                p_value: fisher_exact(table)?,
            });
        }
    }
    Ok(ComparisonReport { scores, pairwise })
}

/// `< .0001`, `< .001`, `< .01`, `< .05`, or the rounded value.
pub fn format_p(p: f64) -> String {
    for (limit, label) in [(1e-4, "< .0001"), (1e-3, "< .001"), (1e-2, "< .01"), (0.05, "< .05")] {
        if p < limit {
            return label.to_owned();
        }
    }
    format!("{p:.3}")
}

impl ComparisonReport {
    /// `procedure \t percent_correct`, one row per procedure.
    pub fn percentages_tsv(&self) -> String {
        let mut out = String::from("procedure\tpercent_correct\tcorrect\ttotal\n");
        for s in &self.scores {
            out.push_str(&format!("{}\t{:.1}\t{}\t{}\n", s.name, s.percent, s.correct, s.total));
        }
        out
    }

    /// Procedures ranked by share correct, each compared with the next one
    /// down: `better \t > \t worse \t p`.
    pub fn ranked_comparisons_tsv(&self) -> String {
        let mut ranked: Vec<&ProcedureScore> = self.scores.iter().collect();
        ranked.sort_by(|a, b| {
            (b.correct as f64 * a.total as f64)
                .total_cmp(&(a.correct as f64 * b.total as f64))
        });
        let mut out = String::from("better\t\tworse\tp_value\tp\n");
        for w in ranked.windows(2).rev() {
            let t = self
                .pairwise
                .iter()
                .find(|t| {
                    (t.better == w[0].name && t.worse == w[1].name)
                        || (t.better == w[1].name && t.worse == w[0].name)
                })
                .expect("every pair is tested");
            out.push_str(&format!(
                "{}\t>\t{}\t{}\t{:e}\n",
                t.better,
                t.worse,
                format_p(t.p_value),
                t.p_value
            ));
        }
        out
    }
}
