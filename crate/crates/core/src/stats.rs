//! Return statistics: total return, moments, Sharpe and correlations.
//!
//! Moments and correlations are accumulated in a single streaming pass
//! (Welford-style central-moment updates) so they stay stable on long series
//! with a large common offset.

use serde::{Deserialize, Serialize};

/// `last / first - 1`; absent when either endpoint is non-positive.
pub fn total_return(series: &[f64]) -> Option<f64> {
    let (&first, &last) = (series.first()?, series.last()?);
    if first <= 0.0 || last <= 0.0 {
        return None;
    }
    Some(last / first - 1.0)
}

/// Per-step log returns. A step is absent when either level is non-positive.
pub fn log_returns(series: &[f64]) -> Vec<Option<f64>> {
    series
        .windows(2)
        .map(|w| (w[0] > 0.0 && w[1] > 0.0).then(|| (w[1] / w[0]).ln()))
        .collect()
}

/// Log returns with absent steps dropped.
pub fn defined_log_returns(series: &[f64]) -> Vec<f64> {
    log_returns(series).into_iter().flatten().collect()
}

/// Running central moments up to order four.
#[derive(Debug, Clone, Copy, Default)]
struct MomentAccumulator {
    n: f64,
    mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
}

impl MomentAccumulator {
    fn push(&mut self, x: f64) {
        let n1 = self.n;
        self.n += 1.0;
        let n = self.n;
        let delta = x - self.mean;
        let delta_n = delta / n;
        let delta_n2 = delta_n * delta_n;
        let term1 = delta * delta_n * n1;
        self.mean += delta_n;
        self.m4 += term1 * delta_n2 * (n * n - 3.0 * n + 3.0) + 6.0 * delta_n2 * self.m2
            - 4.0 * delta_n * self.m3;
        self.m3 += term1 * delta_n * (n - 2.0) - 3.0 * delta_n * self.m2;
        self.m2 += term1;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub std: f64,
    pub skewness: Option<f64>,
    /// Excess kurtosis; needs at least four observations.
    pub excess_kurtosis: Option<f64>,
    /// Mean over standard deviation, zero rate, per step.
    pub sharpe: Option<f64>,
}

/// Relative size below which a variance counts as zero.
const DEGENERATE: f64 = 1e-24;

/// Moments of a return series; `None` with fewer than two observations.
pub fn moments(returns: &[f64]) -> Option<Moments> {
    if returns.len() < 2 {
        return None;
    }
    let mut acc = MomentAccumulator::default();
    for &x in returns {
        acc.push(x);
    }
    let n = acc.n;
    let var_pop = acc.m2 / n;
    let scale = acc.mean * acc.mean + var_pop;
    let degenerate = var_pop <= DEGENERATE * scale.max(f64::MIN_POSITIVE) || var_pop == 0.0;
    let std = (acc.m2 / (n - 1.0)).sqrt();
    let (skewness, excess_kurtosis, sharpe) = if degenerate {
        (None, None, None)
    } else {
        let skew = (acc.m3 / n) / var_pop.powf(1.5);
        let kurt = (returns.len() >= 4).then(|| (acc.m4 / n) / (var_pop * var_pop) - 3.0);
        (Some(skew), kurt, Some(acc.mean / std))
    };
    Some(Moments {
        n: returns.len(),
        mean: acc.mean,
        std: if degenerate { 0.0 } else { std },
        skewness,
        excess_kurtosis,
        sharpe,
    })
}

/// Pearson correlation. Absent for mismatched lengths, fewer than two points,
/// or a constant input.
pub fn correlation(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (mut n, mut mx, mut my, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        n += 1.0;
        let dx = a - mx;
        let dy = b - my;
        mx += dx / n;
        my += dy / n;
        sxx += dx * (a - mx);
        syy += dy * (b - my);
        sxy += dx * (b - my);
    }
    let degenerate =
        |s: f64, m: f64| s <= DEGENERATE * n * (m * m).max(f64::MIN_POSITIVE) || s == 0.0;
    if degenerate(sxx, mx) || degenerate(syy, my) {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Correlation over the steps where both optional series are defined.
pub fn paired_correlation(x: &[Option<f64>], y: &[Option<f64>]) -> Option<f64> {
    let (a, b): (Vec<f64>, Vec<f64>) = x
        .iter()
        .zip(y)
        .filter_map(|(a, b)| Some(((*a)?, (*b)?)))
        .unzip();
    correlation(&a, &b)
}

/// Average ranks (1-based), ties sharing their mean rank.
pub fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}

pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    correlation(&ranks(x), &ranks(y))
}

/// Mean and sample standard deviation of the defined values.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    match values.len() {
        0 => (f64::NAN, f64::NAN),
        1 => (values[0], 0.0),
        _ => {
            let m = moments(values).expect("at least two values");
            (m.mean, m.std)
        }
    }
}

/// Summary of one level series (wealth or price).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesStats {
    pub total_return: Option<f64>,
    pub moments: Option<Moments>,
}

impl SeriesStats {
    pub fn of(levels: &[f64]) -> Self {
        SeriesStats {
            total_return: total_return(levels),
            moments: moments(&defined_log_returns(levels)),
        }
    }

    pub fn volatility(&self) -> Option<f64> {
        self.moments.map(|m| m.std)
    }

    pub fn skewness(&self) -> Option<f64> {
        self.moments.and_then(|m| m.skewness)
    }

    pub fn kurtosis(&self) -> Option<f64> {
        self.moments.and_then(|m| m.excess_kurtosis)
    }

    pub fn sharpe(&self) -> Option<f64> {
        self.moments.and_then(|m| m.sharpe)
    }
}
