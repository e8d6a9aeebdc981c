//! Corpus composition and exploration statistics, emitted as plot data.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::conllu::{Document, Upos};
use crate::error::{Error, Result};

/// `round(100 * count / total)` with halves rounded up, in integer arithmetic.
pub fn percent_half_up(count: u64, total: u64) -> u64 {
    if total == 0 {
        0
    } else {
        (200 * count + total) / (2 * total)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenreRow {
    pub genre: String,
    pub tokens: u64,
    pub words: u64,
    pub sentences: u64,
    pub token_pct: u64,
    pub word_pct: u64,
    pub sentence_pct: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenreTable {
    pub rows: Vec<GenreRow>,
    pub total_tokens: u64,
    pub total_words: u64,
    pub total_sentences: u64,
}

/// Raw counts for one genre.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GenreCounts {
    pub genre: String,
    pub tokens: u64,
    pub words: u64,
    pub sentences: u64,
}

/// Builds the percentage table from per-genre counts, keeping input order.
pub fn genre_table(counts: &[GenreCounts]) -> Result<GenreTable> {
    if let Some(c) = counts.iter().find(|c| c.genre.trim().is_empty()) {
        return Err(Error::invalid(format!("empty genre label in {c:?}")));
    }
    let total_tokens = counts.iter().map(|c| c.tokens).sum();
    let total_words = counts.iter().map(|c| c.words).sum();
    let total_sentences = counts.iter().map(|c| c.sentences).sum();
    let rows = counts
        .iter()
        .map(|c| GenreRow {
            genre: c.genre.clone(),
            tokens: c.tokens,
            words: c.words,
            sentences: c.sentences,
            token_pct: percent_half_up(c.tokens, total_tokens),
            word_pct: percent_half_up(c.words, total_words),
            sentence_pct: percent_half_up(c.sentences, total_sentences),
        })
        .collect();
    Ok(GenreTable {
        rows,
        total_tokens,
        total_words,
        total_sentences,
    })
}

/// Counts for one document: surface tokens (a multiword token counts once),
/// words (syntactic words whose UPOS is not in `non_words`) and sentences.
pub fn count_document(genre: &str, doc: &Document, non_words: &[Upos]) -> GenreCounts {
    let mut c = GenreCounts {
        genre: genre.to_owned(),
        tokens: 0,
        words: 0,
        sentences: doc.sentences.len() as u64,
    };
    for s in &doc.sentences {
        c.tokens += s.surface_units().len() as u64;
        c.words += s
            .tokens
            .iter()
            .filter(|t| t.upos.is_none_or(|u| !non_words.contains(&u)))
            .count() as u64;
    }
    c
}

/// Table rows per genre; documents sharing a label are pooled in first-seen
/// order. Punctuation does not count as a word.
pub fn genre_distribution(docs: &[(String, Document)]) -> Result<GenreTable> {
    genre_distribution_with(docs, &[Upos::Punct])
}

pub fn genre_distribution_with(docs: &[(String, Document)], non_words: &[Upos]) -> Result<GenreTable> {
    let mut order: Vec<GenreCounts> = Vec::new();
    for (genre, doc) in docs {
        let c = count_document(genre, doc, non_words);
        match order.iter_mut().find(|o| &o.genre == genre) {
            Some(o) => {
                o.tokens += c.tokens;
                o.words += c.words;
                o.sentences += c.sentences;
            }
            None => order.push(c),
        }
    }
    genre_table(&order)
}

/// Splits a document by each sentence's `genre` comment (or the document's
/// `genre` metadata), for use with [`genre_distribution`].
pub fn split_by_genre(doc: &Document) -> Result<Vec<(String, Document)>> {
    let mut out: Vec<(String, Document)> = Vec::new();
    for (i, s) in doc.sentences.iter().enumerate() {
        let genre = s
            .genre()
            .or_else(|| doc.metadata.get("genre").map(String::as_str))
            .ok_or_else(|| {
                Error::validation(
                    s.sent_id().map_or_else(|| format!("#{}", i + 1), str::to_owned),
                    "sentence has no genre",
                )
            })?;
        match out.iter_mut().find(|(g, _)| g == genre) {
            Some((_, d)) => d.sentences.push(s.clone()),
            None => out.push((genre.to_owned(), Document::from_sentences(vec![s.clone()]))),
        }
    }
    Ok(out)
}

impl GenreTable {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("source\ttokens\tpct_tokens\twords\tpct_words\tsentences\tpct_sentences\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                r.genre, r.tokens, r.token_pct, r.words, r.word_pct, r.sentences, r.sentence_pct
            ));
        }
        out.push_str(&format!(
            "total\t{}\t\t{}\t\t{}\t\n",
            self.total_tokens, self.total_words, self.total_sentences
        ));
        out
    }
}

/// UPOS counts, most frequent first; ties in tag-name order.
pub fn upos_frequencies(doc: &Document) -> Result<Vec<(Upos, u64)>> {
    let mut counts: HashMap<Upos, u64> = HashMap::new();
    for (si, s) in doc.sentences.iter().enumerate() {
        for t in &s.tokens {
            let u = t.upos.ok_or_else(|| {
                Error::validation(
                    s.sent_id().map_or_else(|| format!("#{}", si + 1), str::to_owned),
                    format!("token {} ('{}') has no UPOS", t.id, t.form),
                )
            })?;
            *counts.entry(u).or_default() += 1;
        }
    }
    let mut v: Vec<(Upos, u64)> = counts.into_iter().collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.as_str().cmp(b.0.as_str())));
    Ok(v)
}

pub fn upos_frequencies_tsv(freqs: &[(Upos, u64)]) -> String {
    let mut out = String::from("upos\tcount\n");
    for (u, c) in freqs {
        out.push_str(&format!("{u}\t{c}\n"));
    }
    out
}

/// The `n` most frequent forms per UPOS; ties in form order. Tokens
/// without UPOS are skipped.
pub fn top_tokens_per_upos(doc: &Document, n: usize) -> Result<BTreeMap<Upos, Vec<(String, u64)>>> {
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    let mut counts: BTreeMap<Upos, HashMap<&str, u64>> = BTreeMap::new();
    for t in doc.tokens() {
        if let Some(u) = t.upos {
            *counts.entry(u).or_default().entry(t.form.as_str()).or_default() += 1;
        }
    }
    Ok(counts
        .into_iter()
        .map(|(u, forms)| {
            let mut v: Vec<(String, u64)> = forms.into_iter().map(|(f, c)| (f.to_owned(), c)).collect();
            v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            v.truncate(n);
            (u, v)
        })
        .collect())
}

pub fn top_tokens_tsv(top: &BTreeMap<Upos, Vec<(String, u64)>>) -> String {
    let mut out = String::from("upos\trank\tform\tcount\n");
    for (u, forms) in top {
        for (i, (f, c)) in forms.iter().enumerate() {
            out.push_str(&format!("{u}\t{}\t{f}\t{c}\n", i + 1));
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CooccurrenceEdge {
    pub lemma_a: String,
    pub lemma_b: String,
    pub weight: u64,
}

/// Sentence-level co-occurrence of lemmas tagged `upos_filter`. Each
/// unordered pair of distinct lemmas counts once per sentence; tokens
/// without a lemma use their form. Heaviest edges first, then by name.
pub fn cooccurrence(doc: &Document, upos_filter: Upos, min_weight: u64) -> Vec<CooccurrenceEdge> {
    let mut weights: HashMap<(String, String), u64> = HashMap::new();
    for s in &doc.sentences {
        let lemmas: BTreeSet<&str> = s
            .tokens
            .iter()
            .filter(|t| t.upos == Some(upos_filter))
            .map(|t| t.lemma.as_deref().unwrap_or(&t.form))
            .collect();
        let lemmas: Vec<&str> = lemmas.into_iter().collect();
        for i in 0..lemmas.len() {
            for j in i + 1..lemmas.len() {
                *weights
                    .entry((lemmas[i].to_owned(), lemmas[j].to_owned()))
                    .or_default() += 1;
            }
        }
    }
    let mut edges: Vec<CooccurrenceEdge> = weights
        .into_iter()
        .filter(|&(_, w)| w >= min_weight.max(1))
        .map(|((a, b), weight)| CooccurrenceEdge {
            lemma_a: a,
            lemma_b: b,
            weight,
        })
        .collect();
    edges.sort_by(|x, y| {
        y.weight
            .cmp(&x.weight)
            .then_with(|| x.lemma_a.cmp(&y.lemma_a))
            .then_with(|| x.lemma_b.cmp(&y.lemma_b))
    });
    edges
}

pub fn cooccurrence_tsv(edges: &[CooccurrenceEdge]) -> String {
    let mut out = String::from("lemma_a\tlemma_b\tweight\n");
    for e in edges {
        out.push_str(&format!("{}\t{}\t{}\n", e.lemma_a, e.lemma_b, e.weight));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conllu::Sentence;

    fn counts(genre: &str, tokens: u64, words: u64, sentences: u64) -> GenreCounts {
        GenreCounts {
            genre: genre.into(),
            tokens,
            words,
            sentences,
        }
    }

    #[test]
    fn published_genre_counts() {
        let t = genre_table(&[
            counts("news", 8737, 7998, 582),
            counts("science", 2293, 2069, 107),
            counts("novels", 17176, 14272, 1446),
            counts("museum", 9275, 8335, 486),
            counts("Wikipedia", 13780, 12040, 505),
        ])
        .unwrap();
        assert_eq!((t.total_tokens, t.total_words, t.total_sentences), (51261, 44714, 3126));
        let col = |f: fn(&GenreRow) -> u64| t.rows.iter().map(f).collect::<Vec<_>>();
        assert_eq!(col(|r| r.token_pct), vec![17, 4, 34, 18, 27]);
        assert_eq!(col(|r| r.sentence_pct), vec![19, 3, 46, 16, 16]);
        // 7998 / 44714 = 17.89%, which rounds to 18.
        assert_eq!(col(|r| r.word_pct), vec![18, 5, 32, 19, 27]);
    }

    #[test]
    fn half_up() {
        assert_eq!(percent_half_up(1, 8), 13);
        assert_eq!(percent_half_up(1, 200), 1);
        assert_eq!(percent_half_up(0, 0), 0);
    }

    fn doc(rows: &[&[(&str, &str, Upos)]]) -> Document {
        Document::from_sentences(
            rows.iter()
                .map(|r| {
                    let mut s = Sentence::from_forms(&r.iter().map(|x| x.0).collect::<Vec<_>>());
                    for (t, (_, l, u)) in s.tokens.iter_mut().zip(r.iter()) {
                        t.lemma = Some((*l).into());
                        t.upos = Some(*u);
                    }
                    s
                })
                .collect(),
        )
    }

    #[test]
    fn single_genre_is_all() {
        let d = doc(&[&[("yn", "yn", Upos::Adp), (".", ".", Upos::Punct)]]);
        let t = genre_distribution(&[("news".into(), d)]).unwrap();
        let r = &t.rows[0];
        assert_eq!((r.token_pct, r.word_pct, r.sentence_pct), (100, 100, 100));
        assert_eq!((r.tokens, r.words), (2, 1));
    }

    #[test]
    fn frequencies_and_tops() {
        use Upos::*;
        let d = doc(&[&[("yn", "yn", Adp), ("hûs", "hûs", Noun), ("yn", "yn", Adp), ("op", "op", Adp)]]);
        let f = upos_frequencies(&d).unwrap();
        assert_eq!(f, vec![(Adp, 3), (Noun, 1)]);
        let top = top_tokens_per_upos(&d, 1).unwrap();
        assert_eq!(top[&Adp], vec![("yn".to_owned(), 2)]);
        let all = top_tokens_per_upos(&d, 10).unwrap();
        assert_eq!(all[&Adp], vec![("yn".to_owned(), 2), ("op".to_owned(), 1)]);
        let mut missing = d.clone();
        missing.sentences[0].tokens[1].upos = None;
        assert!(upos_frequencies(&missing).unwrap_err().to_string().contains("hûs"));
    }

    #[test]
    fn cooccurrence_rules() {
        use Upos::*;
        let d = doc(&[
            &[("fan", "fan", Adp), ("yn", "yn", Adp), ("op", "op", Adp)],
            &[("fan", "fan", Adp), ("fan", "fan", Adp), ("yn", "yn", Adp)],
        ]);
        let e = cooccurrence(&d, Adp, 1);
        let triples: Vec<(&str, &str, u64)> = e
            .iter()
            .map(|e| (e.lemma_a.as_str(), e.lemma_b.as_str(), e.weight))
            .collect();
        assert_eq!(triples, vec![("fan", "yn", 2), ("fan", "op", 1), ("op", "yn", 1)]);
        assert_eq!(cooccurrence(&d, Adp, 2).len(), 1);
    }
}
