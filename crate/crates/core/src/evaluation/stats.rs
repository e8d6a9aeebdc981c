//! Fisher's exact test and a percentile-bootstrap comparison of medians.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Counts for two procedures: row 1 is (a correct, b incorrect), row 2 is
/// (c correct, d incorrect).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ContingencyTable2x2 {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
}

impl ContingencyTable2x2 {
    pub fn new(a: u64, b: u64, c: u64, d: u64) -> Self {
        ContingencyTable2x2 { a, b, c, d }
    }
}

fn binomial(n: u64, k: u64) -> Option<u128> {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 1..=u128::from(k) {
        acc = acc.checked_mul(u128::from(n) - u128::from(k) + i)? / i;
    }
    Some(acc)
}

fn ln_factorial_table(n: u64) -> Vec<f64> {
    let mut t = Vec::with_capacity(n as usize + 1);
    t.push(0.0);
    let mut acc = 0.0f64;
    for i in 1..=n {
        acc += (i as f64).ln();
        t.push(acc);
    }
    t
}

/// Relative slack for ties in the log-space path.
const LOG_SLACK: f64 = 1e-7;

/// Two-sided Fisher exact test: the total probability, under fixed margins,
/// of all tables no more probable than the observed one.
///
/// Small tables are summed in exact integer arithmetic. Once the binomial
/// coefficients overflow 128 bits the sum moves to log space, where tables
/// within a relative `1e-7` of the observed probability count as ties.
pub fn fisher_exact(t: ContingencyTable2x2) -> Result<f64> {
    let ContingencyTable2x2 { a, b, c, d } = t;
    let n = a
        .checked_add(b)
        .and_then(|x| x.checked_add(c))
        .and_then(|x| x.checked_add(d))
        .ok_or_else(|| Error::invalid("table counts overflow"))?;
    if n == 0 {
        return Err(Error::invalid("contingency table has no observations"));
    }
    let (r1, r2, c1) = (a + b, c + d, a + c);
    let lo = c1.saturating_sub(r2);
    let hi = r1.min(c1);

    if let Some(p) = fisher_exact_integer(r1, r2, c1, n, a, lo, hi) {
        return Ok(p);
    }

    let lf = ln_factorial_table(n);
    let ln_p = |x: u64| {
        lf[r1 as usize] + lf[r2 as usize] + lf[c1 as usize] + lf[(n - c1) as usize]
            - lf[n as usize]
            - lf[x as usize]
            - lf[(r1 - x) as usize]
            - lf[(c1 - x) as usize]
            - lf[(r2 + x - c1) as usize]
    };
    let observed = ln_p(a);
    let threshold = observed + LOG_SLACK.ln_1p();
    let p: f64 = (lo..=hi)
        .map(ln_p)
        .filter(|&l| l <= threshold)
        .map(f64::exp)
        .sum();
    Ok(p.min(1.0))
}

fn fisher_exact_integer(r1: u64, r2: u64, c1: u64, n: u64, a: u64, lo: u64, hi: u64) -> Option<f64> {
    let total = binomial(n, c1)?;
    let weight = |x: u64| -> Option<u128> { binomial(r1, x)?.checked_mul(binomial(r2, c1 - x)?) };
    let observed = weight(a)?;
    let mut sum: u128 = 0;
    for x in lo..=hi {
        let w = weight(x)?;
        if w <= observed {
            sum = sum.checked_add(w)?;
        }
    }
    Some((sum as f64 / total as f64).min(1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    /// median(a) - median(b) on the original samples.
    pub median_difference: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub p_value: f64,
    pub iterations: usize,
}

pub const MIN_BOOTSTRAP_SAMPLE: usize = 5;
pub const MIN_BOOTSTRAP_ITERATIONS: usize = 1000;

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut v = v.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Percentile-bootstrap comparison of two medians.
///
/// Each iteration resamples both groups with replacement and records the
/// difference of medians. The 95% interval takes the sorted differences at
/// positions `round(0.025 B) + 1` and `B - round(0.025 B) - 1` (1-based).
/// `p = 2 min(P(diff <= 0), P(diff >= 0))`, kept within `[1/B, 1]`.
pub fn bootstrap_median_compare(a: &[f64], b: &[f64], iterations: usize, seed: u64) -> Result<BootstrapResult> {
    if a.len() < MIN_BOOTSTRAP_SAMPLE || b.len() < MIN_BOOTSTRAP_SAMPLE {
        return Err(Error::invalid(format!(
            "each sample needs at least {MIN_BOOTSTRAP_SAMPLE} values (got {} and {})",
            a.len(),
            b.len()
        )));
    }
    if iterations < MIN_BOOTSTRAP_ITERATIONS {
        return Err(Error::invalid(format!(
            "at least {MIN_BOOTSTRAP_ITERATIONS} bootstrap iterations are required"
        )));
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(Error::invalid("samples must be finite numbers"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ra = vec![0.0; a.len()];
    let mut rb = vec![0.0; b.len()];
    let mut diffs = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        for x in ra.iter_mut() {
            *x = a[rng.random_range(0..a.len())];
        }
        for x in rb.iter_mut() {
            *x = b[rng.random_range(0..b.len())];
        }
        ra.sort_by(f64::total_cmp);
        rb.sort_by(f64::total_cmp);
        diffs.push(median(&ra) - median(&rb));
    }
    diffs.sort_by(f64::total_cmp);
    let low = (0.025 * iterations as f64).round() as usize + 1;
    let up = iterations - low;
    let le = diffs.iter().filter(|&&d| d <= 0.0).count();
    let ge = diffs.iter().filter(|&&d| d >= 0.0).count();
    let p = (2.0 * le.min(ge) as f64 / iterations as f64).clamp(1.0 / iterations as f64, 1.0);
    Ok(BootstrapResult {
        median_difference: median(&sorted(a)) - median(&sorted(b)),
        ci_low: diffs[low - 1],
        ci_high: diffs[up - 1],
        p_value: p,
        iterations,
    })
}
