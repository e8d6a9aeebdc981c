//! Sparse multiclass averaged perceptron.
//!
//! Averaging is lazy: each parameter remembers the step at which it last
//! changed, so the final average equals the mean of the weight vector taken
//! after every training step without storing the snapshots.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default)]
struct Param {
    weight: f64,
    total: f64,
    stamp: u64,
}

/// Mutable weights during training.
#[derive(Clone, Debug)]
pub struct PerceptronTrainer {
    classes: Vec<String>,
    params: HashMap<String, Vec<(u32, Param)>>,
    step: u64,
}

impl PerceptronTrainer {
    pub fn new(classes: Vec<String>) -> Self {
        PerceptronTrainer {
            classes,
            params: HashMap::new(),
            step: 0,
        }
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    /// Scores under the current (not averaged) weights.
    pub fn scores(&self, features: &[String]) -> Vec<f64> {
        let mut scores = vec![0.0; self.classes.len()];
        for f in features {
            if let Some(row) = self.params.get(f) {
                for &(c, p) in row {
                    scores[c as usize] += p.weight;
                }
            }
        }
        scores
    }

    /// Advances the step counter; call once per training instance.
    pub fn tick(&mut self) {
        self.step += 1;
    }

    /// Rewards `truth` and penalizes `guess` on every feature, unless they agree.
    pub fn update(&mut self, features: &[String], truth: usize, guess: usize) {
        if truth == guess {
            return;
        }
        for f in features {
            self.adjust(f, truth as u32, 1.0);
            self.adjust(f, guess as u32, -1.0);
        }
    }

    fn adjust(&mut self, feature: &str, class: u32, delta: f64) {
        let step = self.step;
        let row = match self.params.get_mut(feature) {
            Some(r) => r,
            None => self.params.entry(feature.to_owned()).or_default(),
        };
        let p = match row.iter().position(|(c, _)| *c == class) {
            Some(i) => &mut row[i].1,
            None => {
                row.push((
                    class,
                    Param {
                        stamp: step,
                        ..Param::default()
                    },
                ));
                &mut row.last_mut().expect("just pushed").1
            }
        };
        p.total += (step - p.stamp) as f64 * p.weight;
        p.weight += delta;
        p.stamp = step;
    }

    /// The averaged weights as of the current step. Entries whose magnitude
    /// does not exceed `cutoff` are dropped.
    pub fn averaged(&self, cutoff: f64) -> Weights {
        let steps = self.step.max(1) as f64;
        let mut table = HashMap::with_capacity(self.params.len());
        for (f, row) in &self.params {
            let mut out: Vec<(u32, f64)> = row
                .iter()
                .filter_map(|&(c, p)| {
                    let held = (self.step + 1).saturating_sub(p.stamp.max(1));
                    let total = p.total + held as f64 * p.weight;
                    let avg = total / steps;
                    (avg.abs() > cutoff).then_some((c, avg))
                })
                .collect();
            if !out.is_empty() {
                out.sort_by_key(|&(c, _)| c);
                table.insert(f.clone(), out);
            }
        }
        Weights {
            classes: self.classes.clone(),
            table,
        }
    }
}

/// Frozen weights used for prediction.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "WeightsRepr", into = "WeightsRepr")]
pub struct Weights {
    classes: Vec<String>,
    table: HashMap<String, Vec<(u32, f64)>>,
}

#[derive(Serialize, Deserialize)]
struct WeightsRepr {
    classes: Vec<String>,
    table: BTreeMap<String, Vec<(u32, f64)>>,
}

impl From<WeightsRepr> for Weights {
    fn from(r: WeightsRepr) -> Self {
        Weights {
            classes: r.classes,
            table: r.table.into_iter().collect(),
        }
    }
}

impl From<Weights> for WeightsRepr {
    fn from(w: Weights) -> Self {
        WeightsRepr {
            classes: w.classes,
            table: w.table.into_iter().collect(),
        }
    }
}

impl Weights {
    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == name)
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.table.len()
    }

    pub fn weight(&self, feature: &str, class: usize) -> f64 {
        self.table
            .get(feature)
            .and_then(|row| row.iter().find(|(c, _)| *c as usize == class))
            .map_or(0.0, |&(_, w)| w)
    }

    pub fn scores(&self, features: &[String]) -> Vec<f64> {
        let mut scores = vec![0.0; self.classes.len()];
        for f in features {
            if let Some(row) = self.table.get(f) {
                for &(c, w) in row {
                    scores[c as usize] += w;
                }
            }
        }
        scores
    }

    /// Highest-scoring class; ties go to the lower index.
    pub fn predict(&self, features: &[String]) -> usize {
        argmax(&self.scores(features), |_| true).unwrap_or(0)
    }
}

/// Index of the largest score among allowed classes; ties go to the lower index.
pub fn argmax(scores: &[f64], allowed: impl Fn(usize) -> bool) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &s) in scores.iter().enumerate() {
        if !allowed(i) {
            continue;
        }
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    best.map(|(i, _)| i)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn feats(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn averaging_matches_snapshot_mean() {
        // Three steps, each an update on feature "f":
        //   step 1: truth 0, guess 1  -> w0 = 1, w1 = -1
        //   step 2: truth 0, guess 1  -> w0 = 2, w1 = -2
        //   step 3: truth 1, guess 0  -> w0 = 1, w1 = -1
        // Snapshots of w0: 1, 2, 1 -> mean 4/3; of w1: -1, -2, -1 -> mean -4/3.
        let mut p = PerceptronTrainer::new(feats(&["A", "B"]));
        let f = feats(&["f"]);
        for (truth, guess) in [(0, 1), (0, 1), (1, 0)] {
            p.tick();
            p.update(&f, truth, guess);
        }
        let avg = p.averaged(0.0);
        assert!((avg.weight("f", 0) - 4.0 / 3.0).abs() < 1e-12);
        assert!((avg.weight("f", 1) + 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn averaging_counts_steps_without_updates() {
        // Update at step 1 only; three more steps pass unchanged.
        // Snapshots of w0: 1, 1, 1, 1 -> mean 1; a late feature added at step 4
        // has snapshots 0, 0, 0, 1 -> mean 1/4.
        let mut p = PerceptronTrainer::new(feats(&["A", "B"]));
        p.tick();
        p.update(&feats(&["f"]), 0, 1);
        p.tick();
        p.tick();
        p.tick();
        p.update(&feats(&["g"]), 0, 1);
        let avg = p.averaged(0.0);
        assert!((avg.weight("f", 0) - 1.0).abs() < 1e-12);
        assert!((avg.weight("g", 0) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn learns_separable_problem() {
        let mut p = PerceptronTrainer::new(feats(&["A", "B"]));
        let data = [(feats(&["x"]), 0), (feats(&["y"]), 1)];
        for _ in 0..3 {
            for (f, y) in &data {
                p.tick();
                let guess = argmax(&p.scores(f), |_| true).unwrap();
                p.update(f, *y, guess);
            }
        }
        let w = p.averaged(0.0);
        assert_eq!(w.predict(&data[0].0), 0);
        assert_eq!(w.predict(&data[1].0), 1);
    }

    #[test]
    fn argmax_ties_and_masks() {
        assert_eq!(argmax(&[1.0, 1.0, 0.5], |_| true), Some(0));
        assert_eq!(argmax(&[1.0, 1.0, 0.5], |i| i != 0), Some(1));
        assert_eq!(argmax(&[1.0], |_| false), None);
    }

    #[test]
    fn weights_serialize_deterministically() {
        let mut p = PerceptronTrainer::new(feats(&["A", "B"]));
        p.tick();
        p.update(&feats(&["z", "a", "m"]), 0, 1);
        let w = p.averaged(0.0);
        let a = serde_json::to_string(&w).unwrap();
        let b = serde_json::to_string(&w.clone()).unwrap();
        assert_eq!(a, b);
        let back: Weights = serde_json::from_str(&a).unwrap();
        assert_eq!(back, w);
    }
}
