//! Per-run statistics extracted from a simulation output.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::market::RunOutput;
use crate::stats::{self, SeriesStats};

/// Return statistics of one level series.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SeriesSummary {
    pub n: usize,
    pub total_return: Option<f64>,
    pub volatility: Option<f64>,
    pub skewness: Option<f64>,
    pub kurtosis: Option<f64>,
    pub sharpe: Option<f64>,
}

impl SeriesSummary {
    pub fn of(levels: &[f64]) -> Self {
        let s = SeriesStats::of(levels);
        SeriesSummary {
            n: s.moments.map_or(0, |m| m.n),
            total_return: s.total_return,
            volatility: s.volatility(),
            skewness: s.skewness(),
            kurtosis: s.kurtosis(),
            sharpe: s.sharpe(),
        }
    }

    pub fn fields(&self) -> [(&'static str, Option<f64>); 5] {
        [
            ("total_return", self.total_return),
            ("volatility", self.volatility),
            ("skewness", self.skewness),
            ("kurtosis", self.kurtosis),
            ("sharpe", self.sharpe),
        ]
    }
}

/// Names of the series summarised for every run, in output order.
pub const SERIES: [&str; 5] = ["dealer", "market", "fundamentalist", "chartist", "noise"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub dealer: SeriesSummary,
    pub market: SeriesSummary,
    pub fundamentalist: SeriesSummary,
    pub chartist: SeriesSummary,
    pub noise: SeriesSummary,
    /// Dealer wealth log returns against price log returns.
    pub corr_wealth_underlying: Option<f64>,
    /// Dealer wealth change against signed traded notional, over the
    /// timestamps at which she traded.
    pub corr_wealth_trade: Option<f64>,
    pub mean_inventory: f64,
    pub mean_abs_inventory: f64,
    pub final_inventory: i64,
    pub dealer_fills: usize,
    pub dealer_volume: u64,
    pub trades: usize,
    pub bankrupt_agents: usize,
}

impl RunMetrics {
    pub fn compute(out: &RunOutput) -> Self {
        let prices = out.prices();
        let wealth = out.dealer_wealth();
        let class = |f: fn(&crate::market::StepRecord) -> f64, initial: f64| -> Vec<f64> {
            std::iter::once(initial)
                .chain(out.series.iter().map(f))
                .collect()
        };
        let initial = out.initial_class_wealth;

        let n = out.series.len().max(1) as f64;
        let mean_inventory = out
            .series
            .iter()
            .map(|r| r.dealer_inventory as f64)
            .sum::<f64>()
            / n;
        let mean_abs_inventory = out
            .series
            .iter()
            .map(|r| r.dealer_inventory.unsigned_abs() as f64)
            .sum::<f64>()
            / n;

        RunMetrics {
            dealer: SeriesSummary::of(&wealth),
            market: SeriesSummary::of(&prices),
            fundamentalist: SeriesSummary::of(&class(|r| r.fundamentalist_wealth, initial[0])),
            chartist: SeriesSummary::of(&class(|r| r.chartist_wealth, initial[1])),
            noise: SeriesSummary::of(&class(|r| r.noise_wealth, initial[2])),
            corr_wealth_underlying: stats::paired_correlation(
                &stats::log_returns(&wealth),
                &stats::log_returns(&prices),
            ),
            corr_wealth_trade: wealth_trade_correlation(out, &wealth),
            mean_inventory: if out.series.is_empty() {
                0.0
            } else {
                mean_inventory
            },
            mean_abs_inventory: if out.series.is_empty() {
                0.0
            } else {
                mean_abs_inventory
            },
            final_inventory: out.series.last().map_or(0, |r| r.dealer_inventory),
            dealer_fills: out.dealer_fills.len(),
            dealer_volume: out.dealer_fills.iter().map(|f| f.quantity).sum(),
            trades: out.trades.len(),
            bankrupt_agents: out.bankrupt_agents,
        }
    }

    pub fn series(&self, name: &str) -> Option<&SeriesSummary> {
        Some(match name {
            "dealer" => &self.dealer,
            "market" => &self.market,
            "fundamentalist" => &self.fundamentalist,
            "chartist" => &self.chartist,
            "noise" => &self.noise,
            _ => return None,
        })
    }

    /// Every metric as `(name, value)`, series statistics prefixed by the
    /// series name.
    pub fn flatten(&self) -> Vec<(String, Option<f64>)> {
        let mut out = Vec::new();
        for name in SERIES {
            let s = self.series(name).expect("known series");
            for (field, value) in s.fields() {
                out.push((format!("{name}_{field}"), value));
            }
        }
        let scalars = [
            ("corr_wealth_underlying", self.corr_wealth_underlying),
            ("corr_wealth_trade", self.corr_wealth_trade),
            ("mean_inventory", Some(self.mean_inventory)),
            ("mean_abs_inventory", Some(self.mean_abs_inventory)),
            ("final_inventory", Some(self.final_inventory as f64)),
            ("dealer_fills", Some(self.dealer_fills as f64)),
            ("dealer_volume", Some(self.dealer_volume as f64)),
            ("trades", Some(self.trades as f64)),
            ("bankrupt_agents", Some(self.bankrupt_agents as f64)),
        ];
        out.extend(scalars.into_iter().map(|(k, v)| (k.to_string(), v)));
        out
    }

    pub fn get(&self, metric: &str) -> Option<f64> {
        self.flatten()
            .into_iter()
            .find(|(k, _)| k == metric)
            .and_then(|(_, v)| v)
    }
}

/// Correlation between the dealer's wealth change over a timestamp and the
/// signed notional she traded in it (positive when buying).
pub fn wealth_trade_correlation(out: &RunOutput, wealth: &[f64]) -> Option<f64> {
    let mut notional: BTreeMap<u64, f64> = BTreeMap::new();
    for fill in &out.dealer_fills {
        let price = fill.price.ticks() as f64 * out.tick;
        *notional.entry(fill.t).or_default() += fill.signed_quantity() as f64 * price;
    }
    let (dw, value): (Vec<f64>, Vec<f64>) = notional
        .into_iter()
        .filter_map(|(t, v)| {
            let i = t as usize;
            Some((wealth.get(i + 1)? - wealth[i], v))
        })
        .unzip();
    stats::correlation(&dw, &value)
}

/// Mean and standard deviation across runs of one metric, ignoring runs in
/// which it is absent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub n: usize,
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

impl Aggregate {
    pub fn of(values: impl IntoIterator<Item = Option<f64>>) -> Self {
        let v: Vec<f64> = values
            .into_iter()
            .flatten()
            .filter(|x| x.is_finite())
            .collect();
        if v.is_empty() {
            return Aggregate {
                n: 0,
                mean: None,
                std: None,
            };
        }
        let (mean, std) = stats::mean_std(&v);
        Aggregate {
            n: v.len(),
            mean: Some(mean),
            std: (v.len() > 1).then_some(std),
        }
    }
}

/// Per-metric aggregates over a set of runs, in `flatten` order.
pub fn aggregate(runs: &[&RunMetrics]) -> Vec<(String, Aggregate)> {
    let Some(first) = runs.first() else {
        return Vec::new();
    };
    let flat: Vec<Vec<(String, Option<f64>)>> = runs.iter().map(|m| m.flatten()).collect();
    first
        .flatten()
        .iter()
        .enumerate()
        .map(|(i, (name, _))| (name.clone(), Aggregate::of(flat.iter().map(|f| f[i].1))))
        .collect()
}
