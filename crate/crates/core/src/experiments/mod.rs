//! Parameter sweeps, baseline comparisons and result tables.

mod metrics;
mod output;
mod skew;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use metrics::{
    aggregate, wealth_trade_correlation, Aggregate, RunMetrics, SeriesSummary, SERIES,
};
pub use output::{
    write_baselines, write_probsim, write_run, write_skew_curve, write_sweep, BaselineRow,
    SweepSummary,
};
pub use skew::{emit_skew_curve, SkewCurveRow};

use crate::dealer::{unit_skew, DealerKind};
use crate::market::{run_simulation, ConfigError, SimConfig};
use crate::rng::run_seed;

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("sweep grid is empty")]
    EmptyGrid,
    #[error("no dealer kinds to sweep")]
    NoDealers,
    #[error("runs must be at least 1")]
    NoRuns,
    #[error("axis {0} only applies to the inventory-rule dealer")]
    SkewNeedsIr(&'static str),
    #[error("axis {axis} expects {expected}")]
    ValueShape {
        axis: &'static str,
        expected: &'static str,
    },
    #[error("invalid grid value {value} for axis {axis}")]
    BadValue { axis: &'static str, value: f64 },
    #[error("base config: {0}")]
    Config(#[from] ConfigError),
    #[error("sweep spec: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("could not build worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    #[serde(rename = "risk_aversion_2_over_gamma")]
    RiskAversion2OverGamma,
    PhiMaxSymmetric,
    PhiMaxAsymmetric,
    InventorySkewSymmetric,
    InventorySkewAsymmetric,
}

/// How an axis is labelled in output tables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AxisDisplay {
    pub label: &'static str,
    /// Factor applied to the raw parameter for display.
    pub scale: f64,
    pub log_scale: bool,
}

impl Axis {
    pub const ALL: [Axis; 5] = [
        Axis::RiskAversion2OverGamma,
        Axis::PhiMaxSymmetric,
        Axis::PhiMaxAsymmetric,
        Axis::InventorySkewSymmetric,
        Axis::InventorySkewAsymmetric,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Axis::RiskAversion2OverGamma => "risk_aversion_2_over_gamma",
            Axis::PhiMaxSymmetric => "phi_max_symmetric",
            Axis::PhiMaxAsymmetric => "phi_max_asymmetric",
            Axis::InventorySkewSymmetric => "inventory_skew_symmetric",
            Axis::InventorySkewAsymmetric => "inventory_skew_asymmetric",
        }
    }

    pub fn paired(self) -> bool {
        matches!(self, Axis::PhiMaxAsymmetric | Axis::InventorySkewAsymmetric)
    }

    pub fn skew(self) -> bool {
        matches!(
            self,
            Axis::InventorySkewSymmetric | Axis::InventorySkewAsymmetric
        )
    }

    pub fn display(self) -> AxisDisplay {
        match self {
            Axis::RiskAversion2OverGamma => AxisDisplay {
                label: "2/gamma",
                scale: 1.0,
                log_scale: false,
            },
            Axis::PhiMaxSymmetric => AxisDisplay {
                label: "phi_max",
                scale: 1.0,
                log_scale: false,
            },
            Axis::PhiMaxAsymmetric => AxisDisplay {
                label: "phi_bid - phi_ask",
                scale: 1.0,
                log_scale: false,
            },
            Axis::InventorySkewSymmetric => AxisDisplay {
                label: "|eta| x 100",
                scale: 100.0,
                log_scale: true,
            },
            Axis::InventorySkewAsymmetric => AxisDisplay {
                label: "|eta_bid| x 100",
                scale: 100.0,
                log_scale: true,
            },
        }
    }

    /// Grid used when the spec gives none. Skew axes hold multipliers of
    /// the unit skew of the base configuration.
    pub fn default_values(self) -> Vec<f64> {
        match self {
            Axis::RiskAversion2OverGamma => vec![5.0, 10.0, 20.0, 40.0, 80.0],
            Axis::PhiMaxSymmetric => vec![1000.0, 2500.0, 5000.0, 7500.0, 10000.0],
            Axis::InventorySkewSymmetric => vec![0.25, 0.5, 1.0, 2.0, 4.0],
            Axis::PhiMaxAsymmetric | Axis::InventorySkewAsymmetric => Vec::new(),
        }
    }

    pub fn default_pairs(self) -> Vec<[f64; 2]> {
        match self {
            Axis::PhiMaxAsymmetric => vec![
                [1000.0, 10000.0],
                [2500.0, 7500.0],
                [5000.0, 5000.0],
                [7500.0, 2500.0],
                [10000.0, 1000.0],
            ],
            Axis::InventorySkewAsymmetric => {
                vec![[0.25, 4.0], [0.5, 2.0], [1.0, 1.0], [2.0, 0.5], [4.0, 0.25]]
            }
            _ => Vec::new(),
        }
    }

    pub fn default_dealers(self) -> Vec<DealerKind> {
        if self.skew() {
            vec![DealerKind::Ir]
        } else {
            vec![DealerKind::As, DealerKind::Ir]
        }
    }
}

impl std::fmt::Display for Axis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A sweep over one axis for one or more dealers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: Axis,
    /// Scalar grid for the single-parameter axes.
    #[serde(default)]
    pub values: Option<Vec<f64>>,
    /// `(bid, ask)` grid for the asymmetric axes.
    #[serde(default)]
    pub pairs: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub dealers: Option<Vec<DealerKind>>,
    #[serde(default = "default_runs")]
    pub runs: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub base: SimConfig,
}

fn default_runs() -> u64 {
    20
}

fn default_seed() -> u64 {
    42
}

impl SweepSpec {
    pub fn new(axis: Axis, base: SimConfig) -> Self {
        SweepSpec {
            axis,
            values: None,
            pairs: None,
            dealers: None,
            runs: default_runs(),
            seed: default_seed(),
            base,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, SpecError> {
        Ok(toml::from_str(text)?)
    }

    pub fn dealers(&self) -> Vec<DealerKind> {
        self.dealers
            .clone()
            .unwrap_or_else(|| self.axis.default_dealers())
    }

    /// Grid points with the configuration change each one makes.
    pub fn points(&self) -> Result<Vec<GridPoint>, SpecError> {
        let axis = self.axis.name();
        let raw: Vec<[f64; 2]> = if self.axis.paired() {
            if self.values.is_some() {
                return Err(SpecError::ValueShape {
                    axis,
                    expected: "`pairs = [[bid, ask], ...]`",
                });
            }
            self.pairs
                .clone()
                .unwrap_or_else(|| self.axis.default_pairs())
        } else {
            if self.pairs.is_some() {
                return Err(SpecError::ValueShape {
                    axis,
                    expected: "`values = [...]`",
                });
            }
            self.values
                .clone()
                .unwrap_or_else(|| self.axis.default_values())
                .into_iter()
                .map(|v| [v, v])
                .collect()
        };
        if raw.is_empty() {
            return Err(SpecError::EmptyGrid);
        }
        raw.into_iter()
            .map(|[bid, ask]| GridPoint::new(self.axis, bid, ask, &self.base))
            .collect()
    }

    pub fn validate(&self) -> Result<Vec<GridPoint>, SpecError> {
        let dealers = self.dealers();
        if dealers.is_empty() {
            return Err(SpecError::NoDealers);
        }
        if self.runs == 0 {
            return Err(SpecError::NoRuns);
        }
        if self.axis.skew() && dealers.iter().any(|d| *d != DealerKind::Ir) {
            return Err(SpecError::SkewNeedsIr(self.axis.name()));
        }
        let points = self.points()?;
        for p in &points {
            for &d in &dealers {
                p.config(&self.base, d).validate()?;
            }
        }
        Ok(points)
    }
}

/// One value on a sweep axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub axis: Axis,
    /// Raw parameters: 2/gamma, phi_max or skew multiplier; `bid == ask`
    /// for symmetric axes.
    pub bid: f64,
    pub ask: f64,
    /// Axis value after display scaling.
    pub value: f64,
}

impl GridPoint {
    fn new(axis: Axis, bid: f64, ask: f64, base: &SimConfig) -> Result<Self, SpecError> {
        for v in [bid, ask] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SpecError::BadValue {
                    axis: axis.name(),
                    value: v,
                });
            }
        }
        if matches!(axis, Axis::PhiMaxSymmetric | Axis::PhiMaxAsymmetric)
            && (bid.fract() != 0.0 || ask.fract() != 0.0)
        {
            return Err(SpecError::BadValue {
                axis: axis.name(),
                value: if bid.fract() != 0.0 { bid } else { ask },
            });
        }
        let value = match axis {
            Axis::RiskAversion2OverGamma | Axis::PhiMaxSymmetric => bid,
            Axis::PhiMaxAsymmetric => bid - ask,
            Axis::InventorySkewSymmetric | Axis::InventorySkewAsymmetric => {
                (bid * unit_skew(base.dealer.phi_max_bid)).abs() * axis.display().scale
            }
        };
        Ok(GridPoint {
            axis,
            bid,
            ask,
            value,
        })
    }

    pub fn label(&self) -> String {
        match self.axis {
            Axis::PhiMaxAsymmetric => format!("{}/{}", self.bid, self.ask),
            Axis::InventorySkewAsymmetric => format!("{}x/{}x", self.bid, self.ask),
            Axis::InventorySkewSymmetric => format!("{}x", self.bid),
            _ => format!("{}", self.bid),
        }
    }

    /// The base configuration with this point applied for `dealer`.
    pub fn config(&self, base: &SimConfig, dealer: DealerKind) -> SimConfig {
        let mut c = base.clone();
        c.dealer.kind = dealer;
        let d = &mut c.dealer;
        match self.axis {
            Axis::RiskAversion2OverGamma => d.gamma = 2.0 / self.bid,
            Axis::PhiMaxSymmetric | Axis::PhiMaxAsymmetric => {
                d.phi_max_bid = self.bid as u64;
                d.phi_max_ask = self.ask as u64;
                if self.axis == Axis::PhiMaxSymmetric {
                    d.naive_size = self.bid as u64;
                }
                // the skew follows the size limit so that size one is
                // reached at |q| = phi_max
                d.eta_bid = None;
                d.eta_ask = None;
            }
            Axis::InventorySkewSymmetric | Axis::InventorySkewAsymmetric => {
                d.eta_bid = Some(self.bid * unit_skew(d.phi_max_bid));
                d.eta_ask = Some(self.ask * unit_skew(d.phi_max_ask));
            }
        }
        c
    }
}

/// Outcome of one simulation inside a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: u64,
    pub seed: u64,
    pub metrics: Result<RunMetrics, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub point: GridPoint,
    pub dealer: DealerKind,
    pub runs: Vec<RunRecord>,
}

impl PointResult {
    pub fn successful(&self) -> Vec<&RunMetrics> {
        self.runs
            .iter()
            .filter_map(|r| r.metrics.as_ref().ok())
            .collect()
    }

    pub fn failures(&self) -> usize {
        self.runs.iter().filter(|r| r.metrics.is_err()).count()
    }

    pub fn aggregates(&self) -> Vec<(String, Aggregate)> {
        aggregate(&self.successful())
    }

    /// Mean of a metric across successful runs.
    pub fn mean(&self, metric: &str) -> Option<f64> {
        Aggregate::of(self.successful().iter().map(|m| m.get(metric))).mean
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub spec: SweepSpec,
    /// Ordered by grid point, then dealer in spec order.
    pub points: Vec<PointResult>,
}

impl SweepResult {
    pub fn failures(&self) -> usize {
        self.points.iter().map(PointResult::failures).sum()
    }

    /// Results for one dealer in grid order.
    pub fn for_dealer(&self, dealer: DealerKind) -> Vec<&PointResult> {
        self.points.iter().filter(|p| p.dealer == dealer).collect()
    }
}

/// Runs `jobs` on a pool of `workers` threads (0 picks the machine default)
/// and returns results in job order.
pub fn run_parallel<T, R, F>(jobs: &[T], workers: usize, f: F) -> Result<Vec<R>, SpecError>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| SpecError::Pool(e.to_string()))?;
    Ok(pool.install(|| jobs.par_iter().map(&f).collect()))
}

fn simulate(config: &SimConfig, seed: u64) -> Result<RunMetrics, String> {
    run_simulation(config, seed)
        .map(|out| RunMetrics::compute(&out))
        .map_err(|e| e.to_string())
}

/// Every grid point for every dealer, `spec.runs` runs each. Run `r` uses
/// the same seed at every point and for every dealer.
pub fn run_sweep(spec: &SweepSpec, workers: usize) -> Result<SweepResult, SpecError> {
    let points = spec.validate()?;
    let dealers = spec.dealers();
    let cells: Vec<(GridPoint, DealerKind)> = points
        .iter()
        .flat_map(|p| dealers.iter().map(move |d| (*p, *d)))
        .collect();
    let jobs: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|c| (0..spec.runs).map(move |r| (c, r)))
        .collect();
    let records = run_parallel(&jobs, workers, |&(c, run)| {
        let (point, dealer) = cells[c];
        let seed = run_seed(spec.seed, run);
        RunRecord {
            run,
            seed,
            metrics: simulate(&point.config(&spec.base, dealer), seed),
        }
    })?;
    let mut records = records.into_iter();
    let points = cells
        .into_iter()
        .map(|(point, dealer)| PointResult {
            point,
            dealer,
            runs: records.by_ref().take(spec.runs as usize).collect(),
        })
        .collect();
    Ok(SweepResult {
        spec: spec.clone(),
        points,
    })
}

/// The three dealers on the base configuration with common seeds.
pub fn compare_baselines(
    base: &SimConfig,
    runs: u64,
    seed: u64,
    workers: usize,
) -> Result<Vec<PointResult>, SpecError> {
    if runs == 0 {
        return Err(SpecError::NoRuns);
    }
    for d in DealerKind::ALL {
        let mut c = base.clone();
        c.dealer.kind = d;
        c.validate()?;
    }
    let jobs: Vec<(DealerKind, u64)> = DealerKind::ALL
        .iter()
        .flat_map(|d| (0..runs).map(move |r| (*d, r)))
        .collect();
    let records = run_parallel(&jobs, workers, |&(dealer, run)| {
        let mut c = base.clone();
        c.dealer.kind = dealer;
        let seed = run_seed(seed, run);
        RunRecord {
            run,
            seed,
            metrics: simulate(&c, seed),
        }
    })?;
    let mut records = records.into_iter();
    let baseline = GridPoint {
        axis: Axis::RiskAversion2OverGamma,
        bid: 2.0 / base.dealer.gamma,
        ask: 2.0 / base.dealer.gamma,
        value: 2.0 / base.dealer.gamma,
    };
    Ok(DealerKind::ALL
        .iter()
        .map(|&dealer| PointResult {
            point: baseline,
            dealer,
            runs: records.by_ref().take(runs as usize).collect(),
        })
        .collect())
}
