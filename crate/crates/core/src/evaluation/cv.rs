//! Rotating k-fold cross-validation.
//!
//! Sentences are shuffled once and dealt round-robin into sets 1..k. Fold i
//! tests on set i, validates on set i+1 (set 1 when i = k) and trains on the
//! remaining k-2 sets.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{evaluate, EvalReport, METRIC_NAMES};
use crate::conllu::Document;
use crate::error::{Error, Result};
use crate::trainer::{AnnotateInput, EvalSetting, PipelineModel};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CrossValidationPlan {
    pub k: usize,
    /// Set number (1..=k) of each sentence.
    pub assignment: Vec<usize>,
}

/// Sentence indices of one fold.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fold {
    pub index: usize,
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

impl CrossValidationPlan {
    pub fn new(n_sentences: usize, k: usize, seed: u64) -> Result<Self> {
        if k < 3 {
            return Err(Error::invalid(format!("k must be at least 3, got {k}")));
        }
        if n_sentences < 2 * k {
            return Err(Error::invalid(format!(
                "{k}-fold cross-validation needs at least {} sentences, got {n_sentences}",
                2 * k
            )));
        }
        let mut order: Vec<usize> = (0..n_sentences).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut assignment = vec![0; n_sentences];
        for (pos, &s) in order.iter().enumerate() {
            assignment[s] = pos % k + 1;
        }
        Ok(CrossValidationPlan { k, assignment })
    }

    pub fn test_set(&self, fold: usize) -> usize {
        fold
    }

    pub fn validation_set(&self, fold: usize) -> usize {
        fold % self.k + 1
    }

    /// Fold `i` for `i` in `1..=k`.
    pub fn fold(&self, i: usize) -> Fold {
        assert!((1..=self.k).contains(&i), "fold index {i} outside 1..={}", self.k);
        let (test, val) = (self.test_set(i), self.validation_set(i));
        let mut fold = Fold {
            index: i,
            train: Vec::new(),
            validation: Vec::new(),
            test: Vec::new(),
        };
        for (s, &set) in self.assignment.iter().enumerate() {
            if set == test {
                fold.test.push(s);
            } else if set == val {
                fold.validation.push(s);
            } else {
                fold.train.push(s);
            }
        }
        fold
    }

    pub fn folds(&self) -> Vec<Fold> {
        (1..=self.k).map(|i| self.fold(i)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator); 0 for a single fold.
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldSummary {
    pub setting: EvalSetting,
    pub folds: usize,
    /// In [`METRIC_NAMES`] order.
    pub metrics: Vec<Option<MetricSummary>>,
}

impl FoldSummary {
    pub fn get(&self, name: &str) -> Option<MetricSummary> {
        let i = METRIC_NAMES.iter().position(|m| *m == name)?;
        self.metrics[i]
    }
}

pub fn summarize_values(values: &[f64]) -> Option<MetricSummary> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    // Shifting by the first value keeps a constant series exact.
    let v0 = values[0];
    let shift = values.iter().map(|v| v - v0).sum::<f64>() / n;
    let mean = v0 + shift;
    let sd = if values.len() > 1 {
        (values.iter().map(|v| (v - v0 - shift).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Some(MetricSummary {
        mean: mean.clamp(min, max),
        sd,
        min,
        max,
    })
}

/// Mean and sample SD of each metric over reports of one setting.
pub fn summarize(setting: EvalSetting, reports: &[EvalReport]) -> FoldSummary {
    let metrics = (0..METRIC_NAMES.len())
        .map(|m| {
            let vals: Vec<f64> = reports.iter().filter_map(|r| r.metrics()[m]).collect();
            summarize_values(&vals)
        })
        .collect();
    FoldSummary {
        setting,
        folds: reports.len(),
        metrics,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvOutcome {
    pub k: usize,
    /// `reports[f]` holds fold `f + 1`'s report for each requested setting.
    pub reports: Vec<Vec<EvalReport>>,
    pub summaries: Vec<FoldSummary>,
}

/// Scores a trained model on `test` under one setting.
pub fn evaluate_model(model: &PipelineModel, test: &Document, setting: EvalSetting) -> Result<EvalReport> {
    let system = match setting {
        EvalSetting::RawText => model.annotate(AnnotateInput::Raw(&test.text()), setting)?,
        _ => model.annotate(AnnotateInput::Tokenized(test), setting)?,
    };
    evaluate(test, &system, setting)
}

/// Runs every fold of a seeded plan. `train_fn(train, validation, fold_seed)`
/// builds the model for a fold, with `fold_seed = seed ^ fold`. Folds run on
/// up to `workers` threads; results do not depend on scheduling.
pub fn cross_validate<F>(
    corpus: &Document,
    k: usize,
    seed: u64,
    settings: &[EvalSetting],
    workers: usize,
    train_fn: F,
) -> Result<CvOutcome>
where
    F: Fn(&Document, &Document, u64) -> Result<PipelineModel> + Sync,
{
    let plan = CrossValidationPlan::new(corpus.sentences.len(), k, seed)?;
    if settings.is_empty() {
        return Err(Error::invalid("no evaluation settings requested"));
    }
    let folds = plan.folds();
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<Vec<EvalReport>>>>> =
        Mutex::new((0..k).map(|_| None).collect());
    let run = |fold: &Fold| -> Result<Vec<EvalReport>> {
        let train = corpus.select(&fold.train);
        let val = corpus.select(&fold.validation);
        let test = corpus.select(&fold.test);
        let model = train_fn(&train, &val, seed ^ fold.index as u64)?;
        settings
            .iter()
            .map(|&s| evaluate_model(&model, &test, s))
            .collect()
    };
    std::thread::scope(|scope| {
        for _ in 0..workers.clamp(1, k) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= k {
                    break;
                }
                let r = run(&folds[i]);
                results.lock().expect("no poisoned workers")[i] = Some(r);
            });
        }
    });
    let reports = results
        .into_inner()
        .expect("no poisoned workers")
        .into_iter()
        .map(|r| r.expect("every fold ran"))
        .collect::<Result<Vec<_>>>()?;
    let summaries = settings
        .iter()
        .enumerate()
        .map(|(si, &s)| {
            let per: Vec<EvalReport> = reports.iter().map(|r| r[si].clone()).collect();
            summarize(s, &per)
        })
        .collect();
    Ok(CvOutcome {
        k,
        reports,
        summaries,
    })
}

fn setting_column(s: EvalSetting) -> &'static str {
    match s {
        EvalSetting::RawText => "raw",
        EvalSetting::GoldTok => "goldtok",
        EvalSetting::GoldTokMorph => "goldtokmorph",
    }
}

/// Table with one row per metric and a mean/sd column pair per setting.
/// Absent metrics are left empty.
pub fn summary_tsv(summaries: &[FoldSummary]) -> String {
    let mut out = String::from("metric");
    for s in summaries {
        let c = setting_column(s.setting);
        out.push_str(&format!("\t{c}_mean\t{c}_sd"));
    }
    out.push('\n');
    for (m, name) in METRIC_NAMES.iter().enumerate() {
        out.push_str(name);
        for s in summaries {
            match s.metrics[m] {
                Some(ms) => out.push_str(&format!("\t{:.1}\t{:.2}", super::round1(ms.mean), ms.sd)),
                None => out.push_str("\t\t"),
            }
        }
        out.push('\n');
    }
    out
}
