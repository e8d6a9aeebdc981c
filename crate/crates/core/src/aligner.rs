//! Unsupervised word alignment for sentence-parallel bitext.
//!
//! Lexical translation probabilities are estimated with IBM Model 1 EM.
//! With `favor_diagonal`, the position distribution for target word `j` of
//! `m` over source words `i` of `n` is proportional to
//! `exp(-tension * |j/m - i/n|)` (1-based positions), scaled by `1 - null_prob`;
//! the null word takes `null_prob`. The position model is fixed, so EM over
//! the translation table never decreases the data log-likelihood.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Translation probability assumed for pairs never seen in training.
pub const UNKNOWN_PROB_FLOOR: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentencePair {
    pub source: Vec<String>,
    pub target: Vec<String>,
}

impl SentencePair {
    pub fn new<S: AsRef<str>, T: AsRef<str>>(source: &[S], target: &[T]) -> Self {
        SentencePair {
            source: source.iter().map(|s| s.as_ref().to_owned()).collect(),
            target: target.iter().map(|t| t.as_ref().to_owned()).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignerConfig {
    pub iterations: usize,
    pub diagonal_tension: f64,
    pub null_prob: f64,
    pub favor_diagonal: bool,
    /// EM here is deterministic; the seed is recorded for provenance only.
    pub seed: u64,
}

impl Default for AlignerConfig {
    fn default() -> Self {
        AlignerConfig {
            iterations: 5,
            diagonal_tension: 4.0,
            null_prob: 0.08,
            favor_diagonal: true,
            seed: 0,
        }
    }
}

impl AlignerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::invalid("aligner iterations must be at least 1"));
        }
        if !(self.diagonal_tension.is_finite() && self.diagonal_tension >= 0.0) {
            return Err(Error::invalid("diagonal tension must be a non-negative number"));
        }
        if !(0.0..1.0).contains(&self.null_prob) {
            return Err(Error::invalid("null probability must lie in [0, 1)"));
        }
        Ok(())
    }

    /// Prior probability of aligning target `j` (0-based) of `m` to each
    /// source position of `n`, excluding the null word.
    fn position_probs(&self, j: usize, m: usize, n: usize, out: &mut Vec<f64>) {
        out.clear();
        let mass = 1.0 - self.null_prob;
        if !self.favor_diagonal {
            out.extend(std::iter::repeat_n(mass / n as f64, n));
            return;
        }
        let jr = (j + 1) as f64 / m as f64;
        let mut z = 0.0;
        for i in 0..n {
            let w = (-self.diagonal_tension * (jr - (i + 1) as f64 / n as f64).abs()).exp();
            out.push(w);
            z += w;
        }
        for w in out.iter_mut() {
            *w *= mass / z;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AlignmentLink {
    pub src_index: usize,
    pub tgt_index: usize,
}

impl AlignmentLink {
    pub fn new(src_index: usize, tgt_index: usize) -> Self {
        AlignmentLink {
            src_index,
            tgt_index,
        }
    }
}

impl fmt::Display for AlignmentLink {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.src_index, self.tgt_index)
    }
}

/// Lexical translation distributions t(target | source).
///
/// Row 0 is the null word; rows are sorted by target id so iteration order,
/// and therefore every floating-point sum, is fixed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranslationTable {
    source_vocab: Vec<String>,
    target_vocab: Vec<String>,
    rows: Vec<Vec<(u32, f64)>>,
    pub null_word: bool,
    #[serde(skip)]
    source_index: HashMap<String, u32>,
    #[serde(skip)]
    target_index: HashMap<String, u32>,
}

pub const NULL_WORD: &str = "<null>";

impl TranslationTable {
    fn source_id(&self, w: &str) -> Option<u32> {
        self.source_index.get(w).copied()
    }

    fn target_id(&self, w: &str) -> Option<u32> {
        self.target_index.get(w).copied()
    }

    fn row_prob(&self, row: usize, tgt: Option<u32>) -> f64 {
        tgt.and_then(|t| {
            let r = &self.rows[row];
            r.binary_search_by_key(&t, |&(id, _)| id).ok().map(|k| r[k].1)
        })
        .unwrap_or(UNKNOWN_PROB_FLOOR)
    }

    /// t(target | source); pass [`NULL_WORD`] as source for the null row.
    pub fn prob(&self, source: &str, target: &str) -> f64 {
        let row = if source == NULL_WORD {
            Some(0)
        } else {
            self.source_id(source).map(|s| s as usize + 1)
        };
        match row {
            Some(row) => self.row_prob(row, self.target_id(target)),
            None => UNKNOWN_PROB_FLOOR,
        }
    }

    /// Sum of each source word's distribution, null row first.
    pub fn row_sums(&self) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|&(_, p)| p).sum())
            .collect()
    }

    pub fn source_vocab(&self) -> &[String] {
        &self.source_vocab
    }

    pub fn target_vocab(&self) -> &[String] {
        &self.target_vocab
    }

    /// Rebuilds lookup indices after deserialization.
    pub fn reindex(&mut self) {
        self.source_index = index(&self.source_vocab);
        self.target_index = index(&self.target_vocab);
    }
}

fn index(vocab: &[String]) -> HashMap<String, u32> {
    vocab
        .iter()
        .enumerate()
        .map(|(i, w)| (w.clone(), i as u32))
        .collect()
}

/// A trained table with the per-iteration log-likelihood trace.
#[derive(Clone, Debug)]
pub struct TrainedAligner {
    pub table: TranslationTable,
    /// Log-likelihood of the bitext under the parameters entering each iteration.
    pub log_likelihood: Vec<f64>,
}

fn validate_bitext(bitext: &[SentencePair]) -> Result<()> {
    if bitext.is_empty() {
        return Err(Error::invalid("bitext is empty"));
    }
    for (i, p) in bitext.iter().enumerate() {
        if p.source.is_empty() || p.target.is_empty() {
            return Err(Error::invalid(format!(
                "sentence pair {} has an empty side",
                i + 1
            )));
        }
    }
    Ok(())
}

/// Runs EM and returns the translation table.
pub fn train_aligner(bitext: &[SentencePair], cfg: &AlignerConfig) -> Result<TranslationTable> {
    train_aligner_traced(bitext, cfg).map(|t| t.table)
}

/// Like [`train_aligner`], also reporting the log-likelihood trace.
pub fn train_aligner_traced(bitext: &[SentencePair], cfg: &AlignerConfig) -> Result<TrainedAligner> {
    cfg.validate()?;
    validate_bitext(bitext)?;

    let mut source_vocab: Vec<String> = Vec::new();
    let mut target_vocab: Vec<String> = Vec::new();
    let mut source_index = HashMap::new();
    let mut target_index = HashMap::new();
    let intern = |w: &str, vocab: &mut Vec<String>, idx: &mut HashMap<String, u32>| -> u32 {
        *idx.entry(w.to_owned()).or_insert_with(|| {
            vocab.push(w.to_owned());
            (vocab.len() - 1) as u32
        })
    };
    let encoded: Vec<(Vec<u32>, Vec<u32>)> = bitext
        .iter()
        .map(|p| {
            let s = p
                .source
                .iter()
                .map(|w| intern(w, &mut source_vocab, &mut source_index))
                .collect();
            let t = p
                .target
                .iter()
                .map(|w| intern(w, &mut target_vocab, &mut target_index))
                .collect();
            (s, t)
        })
        .collect();

    // Co-occurrence structure: row 0 is null, row s+1 is source word s.
    let mut cooc: Vec<Vec<u32>> = vec![Vec::new(); source_vocab.len() + 1];
    for (s, t) in &encoded {
        cooc[0].extend_from_slice(t);
        for &sw in s {
            cooc[sw as usize + 1].extend_from_slice(t);
        }
    }
    let uniform = 1.0 / target_vocab.len() as f64;
    let mut rows: Vec<Vec<(u32, f64)>> = cooc
        .into_iter()
        .map(|mut r| {
            r.sort_unstable();
            r.dedup();
            r.into_iter().map(|t| (t, uniform)).collect()
        })
        .collect();
    let slot = |rows: &Vec<Vec<(u32, f64)>>, row: usize, t: u32| -> usize {
        rows[row]
            .binary_search_by_key(&t, |&(id, _)| id)
            .expect("co-occurring pair present")
    };

    let use_null = cfg.null_prob > 0.0;
    let mut counts: Vec<Vec<f64>> = rows.iter().map(|r| vec![0.0; r.len()]).collect();
    let mut log_likelihood = Vec::with_capacity(cfg.iterations);
    let mut pos = Vec::new();
    let mut scores = Vec::new();

    for _ in 0..cfg.iterations {
        for c in counts.iter_mut() {
            c.iter_mut().for_each(|x| *x = 0.0);
        }
        let mut ll = 0.0;
        for (src, tgt) in &encoded {
            let (n, m) = (src.len(), tgt.len());
            for (j, &f) in tgt.iter().enumerate() {
                cfg.position_probs(j, m, n, &mut pos);
                scores.clear();
                let mut denom = 0.0;
                for (i, &e) in src.iter().enumerate() {
                    let row = e as usize + 1;
                    let k = slot(&rows, row, f);
                    let sc = pos[i] * rows[row][k].1;
                    scores.push((row, k, sc));
                    denom += sc;
                }
                let null = if use_null {
                    let k = slot(&rows, 0, f);
                    let sc = cfg.null_prob * rows[0][k].1;
                    denom += sc;
                    Some((k, sc))
                } else {
                    None
                };
                ll += denom.ln();
                for &(row, k, sc) in &scores {
                    counts[row][k] += sc / denom;
                }
                if let Some((k, sc)) = null {
                    counts[0][k] += sc / denom;
                }
            }
        }
        log_likelihood.push(ll);

        for (row, c) in rows.iter_mut().zip(&counts) {
            let total: f64 = c.iter().sum();
            if total > 0.0 {
                for ((_, p), &x) in row.iter_mut().zip(c) {
                    *p = x / total;
                }
            }
        }
    }

    Ok(TrainedAligner {
        table: TranslationTable {
            source_vocab,
            target_vocab,
            rows,
            null_word: use_null,
            source_index,
            target_index,
        },
        log_likelihood,
    })
}

/// Best source position for every target word; a target word aligned to the
/// null word gets no link. Ties go to the smaller source index, and the null
/// word wins ties against real words.
pub fn viterbi_align(pair: &SentencePair, table: &TranslationTable, cfg: &AlignerConfig) -> Vec<AlignmentLink> {
    let (n, m) = (pair.source.len(), pair.target.len());
    let mut links = Vec::with_capacity(m);
    if n == 0 {
        return links;
    }
    let src_rows: Vec<Option<usize>> = pair
        .source
        .iter()
        .map(|w| table.source_id(w).map(|s| s as usize + 1))
        .collect();
    let mut pos = Vec::new();
    for (j, f) in pair.target.iter().enumerate() {
        let tgt = table.target_id(f);
        cfg.position_probs(j, m, n, &mut pos);
        let mut best = (0, f64::NEG_INFINITY);
        for i in 0..n {
            let t = match src_rows[i] {
                Some(row) => table.row_prob(row, tgt),
                None => UNKNOWN_PROB_FLOOR,
            };
            let sc = pos[i] * t;
            if sc > best.1 {
                best = (i, sc);
            }
        }
        let null = if table.null_word && cfg.null_prob > 0.0 {
            cfg.null_prob * table.row_prob(0, tgt)
        } else {
            f64::NEG_INFINITY
        };
        if best.1 > null {
            links.push(AlignmentLink::new(best.0, j));
        }
    }
    links
}

/// Number of link pairs that cross each other, a measure of word-order swaps.
pub fn crossing_links(links: &[AlignmentLink]) -> usize {
    let mut n = 0;
    for (a, la) in links.iter().enumerate() {
        for lb in &links[a + 1..] {
            let ds = la.src_index as isize - lb.src_index as isize;
            let dt = la.tgt_index as isize - lb.tgt_index as isize;
            if ds * dt < 0 {
                n += 1;
            }
        }
    }
    n
}

/// Parses `source ||| target` lines; blank lines are rejected.
pub fn parse_bitext(text: &str) -> Result<Vec<SentencePair>> {
    text.lines()
        .enumerate()
        .map(|(i, line)| {
            let (s, t) = line
                .split_once(" ||| ")
                .ok_or_else(|| Error::parse(i + 1, "expected 'source ||| target'"))?;
            let pair = SentencePair {
                source: s.split_whitespace().map(str::to_owned).collect(),
                target: t.split_whitespace().map(str::to_owned).collect(),
            };
            if pair.source.is_empty() || pair.target.is_empty() {
                return Err(Error::parse(i + 1, "sentence pair has an empty side"));
            }
            Ok(pair)
        })
        .collect()
}

/// Formats links as space-separated `i-j` pairs.
pub fn format_links(links: &[AlignmentLink]) -> String {
    links
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Parses one line of `i-j` pairs.
pub fn parse_links(line: &str) -> Result<Vec<AlignmentLink>> {
    line.split_whitespace()
        .map(|item| {
            let (s, t) = item
                .split_once('-')
                .ok_or_else(|| Error::invalid(format!("malformed link '{item}'")))?;
            let parse = |v: &str| {
                v.parse::<usize>()
                    .map_err(|_| Error::invalid(format!("malformed link '{item}'")))
            };
            Ok(AlignmentLink::new(parse(s)?, parse(t)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_bitext() -> Vec<SentencePair> {
        let mut bt = vec![SentencePair::new(&["a", "b"], &["x", "y"]); 50];
        bt.extend(vec![SentencePair::new(&["a"], &["x"]); 50]);
        bt
    }

    fn flat(lambda: f64, iterations: usize) -> AlignerConfig {
        AlignerConfig {
            iterations,
            diagonal_tension: lambda,
            ..AlignerConfig::default()
        }
    }

    #[test]
    fn toy_bitext_matches_reference_em() {
        // Frozen from an independent dense EM run (same model, p0 = 0.08, λ = 0).
        let trained = train_aligner_traced(&toy_bitext(), &flat(0.0, 20)).unwrap();
        let t = &trained.table;
        assert!((t.prob("a", "x") - 0.9999852065700422).abs() < 1e-9);
        assert!((t.prob("b", "y") - 0.9921811444044838).abs() < 1e-9);
        assert!((trained.log_likelihood[0] - -103.97207708399195).abs() < 1e-9);
        assert!((trained.log_likelihood[19] - -69.73916638125344).abs() < 1e-9);
    }

    #[test]
    fn single_pair_is_certain() {
        for iterations in [1, 3, 10] {
            let t = train_aligner(&[SentencePair::new(&["a"], &["x"])], &flat(4.0, iterations)).unwrap();
            assert_eq!(t.prob("a", "x"), 1.0);
        }
    }

    #[test]
    fn rows_are_normalized() {
        let t = train_aligner(&toy_bitext(), &AlignerConfig::default()).unwrap();
        for s in t.row_sums() {
            assert!((s - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn viterbi_on_toy() {
        let cfg = flat(0.0, 20);
        let t = train_aligner(&toy_bitext(), &cfg).unwrap();
        let links = viterbi_align(&SentencePair::new(&["a", "b"], &["x", "y"]), &t, &cfg);
        assert_eq!(links, vec![AlignmentLink::new(0, 0), AlignmentLink::new(1, 1)]);
        let links = viterbi_align(&SentencePair::new(&["a"], &["x"]), &t, &cfg);
        assert_eq!(links, vec![AlignmentLink::new(0, 0)]);
    }

    #[test]
    fn unknown_target_word_goes_to_null() {
        let cfg = AlignerConfig {
            null_prob: 0.5,
            ..flat(0.0, 5)
        };
        let t = train_aligner(&toy_bitext(), &cfg).unwrap();
        let links = viterbi_align(&SentencePair::new(&["a"], &["zzz"]), &t, &cfg);
        assert!(links.is_empty());
        let links = viterbi_align(&SentencePair::new(&["a", "b"], &["zzz"]), &t, &cfg);
        assert!(links.is_empty());
    }

    #[test]
    fn errors() {
        assert!(train_aligner(&[], &AlignerConfig::default()).is_err());
        let err = train_aligner(
            &[SentencePair::new(&["a"], &["x"]), SentencePair::new::<&str, &str>(&[], &["y"])],
            &AlignerConfig::default(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("pair 2"), "{err}");
        assert!(train_aligner(&toy_bitext(), &flat(0.0, 0)).is_err());
    }

    #[test]
    fn crossing_counts_swaps() {
        let links = parse_links("0-1 1-0 2-2").unwrap();
        assert_eq!(crossing_links(&links), 1);
        assert_eq!(format_links(&links), "0-1 1-0 2-2");
    }

    #[test]
    fn bitext_format() {
        let bt = parse_bitext("it hûs ||| het huis\nja ||| ja\n").unwrap();
        assert_eq!(bt[0], SentencePair::new(&["it", "hûs"], &["het", "huis"]));
        assert!(parse_bitext("no separator").is_err());
    }
}
