//! Probabilistic dealer test bed.
//!
//! The mid price is a symmetric random walk with steps of `±σ√dt`; each
//! quoted side is filled independently with probability `A e^{-κδ} dt`,
//! where `δ` is the quote's distance from the mid. Four strategies are
//! compared:
//!
//! * `AsUnit`: inventory-tilted reservation price (with the time-to-close
//!   term), fills of one share.
//! * `AsGamma`: the same quotes, fill size drawn from a gamma distribution.
//! * `Naive15`: symmetric quotes around the mid, fills of 15 shares.
//! * `Ir`: symmetric quotes with inventory-dependent sizes; the gamma-drawn
//!   fill is capped by the quoted size.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dealer::{ir_size_curve, optimal_spread, reservation_price, unit_skew};
use crate::rng::{run_seed, stream, Stream};
use crate::stats;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProbSimError {
    #[error("{0} must be positive and finite, got {1}")]
    NotPositive(&'static str, f64),
    #[error("fill probability at the mid exceeds one (A*dt = {0})")]
    IntensityTooHigh(f64),
    #[error("at least one run is required")]
    NoRuns,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    AsUnit,
    AsGamma,
    Naive15,
    Ir,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::AsUnit,
        Variant::AsGamma,
        Variant::Naive15,
        Variant::Ir,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::AsUnit => "as_unit",
            Variant::AsGamma => "as_gamma",
            Variant::Naive15 => "naive15",
            Variant::Ir => "ir",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| format!("unknown variant '{s}'"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbSimParams {
    pub horizon: f64,
    pub dt: f64,
    pub sigma: f64,
    /// Base fill intensity `A`.
    pub intensity: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub initial_price: f64,
    pub gamma_shape: f64,
    pub gamma_scale: f64,
    pub naive_size: u64,
    pub ir_phi_max: u64,
    /// Defaults to the unit skew of `ir_phi_max`.
    pub ir_eta: Option<f64>,
}

impl Default for ProbSimParams {
    fn default() -> Self {
        ProbSimParams {
            horizon: 1.0,
            dt: 0.005,
            sigma: 2.0,
            intensity: 140.0,
            kappa: 1.5,
            gamma: 0.1,
            initial_price: 100.0,
            gamma_shape: 2.0,
            gamma_scale: 15.0,
            naive_size: 15,
            ir_phi_max: 15,
            ir_eta: None,
        }
    }
}

impl ProbSimParams {
    pub fn validate(&self) -> Result<(), ProbSimError> {
        let positive = [
            ("horizon", self.horizon),
            ("dt", self.dt),
            ("intensity", self.intensity),
            ("kappa", self.kappa),
            ("gamma", self.gamma),
            ("initial_price", self.initial_price),
            ("gamma_shape", self.gamma_shape),
            ("gamma_scale", self.gamma_scale),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ProbSimError::NotPositive(name, v));
            }
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(ProbSimError::NotPositive("sigma", self.sigma));
        }
        if self.intensity * self.dt > 1.0 {
            return Err(ProbSimError::IntensityTooHigh(self.intensity * self.dt));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    fn ir_eta(&self) -> f64 {
        self.ir_eta.unwrap_or_else(|| unit_skew(self.ir_phi_max))
    }
}

/// `min(1, A e^{-κδ} dt)`.
pub fn fill_probability(delta: f64, intensity: f64, kappa: f64, dt: f64) -> f64 {
    (intensity * (-kappa * delta).exp() * dt).min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbQuote {
    pub bid: f64,
    pub ask: f64,
    /// Size cap per side; `None` means uncapped (fill size set by the variant).
    pub bid_cap: Option<u64>,
    pub ask_cap: Option<u64>,
}

pub fn quote(
    params: &ProbSimParams,
    variant: Variant,
    mid: f64,
    inventory: i64,
    t: f64,
) -> ProbQuote {
    let remaining = (params.horizon - t).max(0.0);
    let scaled = params.sigma * params.sigma * remaining;
    let spread = optimal_spread(params.gamma, scaled, params.kappa);
    let centre = match variant {
        Variant::AsUnit | Variant::AsGamma => {
            reservation_price(mid, inventory, params.gamma, scaled)
        }
        Variant::Naive15 | Variant::Ir => mid,
    };
    let (bid_cap, ask_cap) = match variant {
        Variant::Ir => {
            let phi = params.ir_phi_max as f64;
            let eta = params.ir_eta();
            let (b, a) = ir_size_curve(inventory, phi, phi, eta, eta);
            (Some(b.round() as u64), Some(a.round() as u64))
        }
        _ => (None, None),
    };
    ProbQuote {
        bid: centre - spread / 2.0,
        ask: centre + spread / 2.0,
        bid_cap,
        ask_cap,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub t: f64,
    pub mid: f64,
    pub bid: f64,
    pub ask: f64,
    /// Shares bought at the bid this step.
    pub bought: u64,
    /// Shares sold at the ask this step.
    pub sold: u64,
    pub inventory: i64,
    pub cash: f64,
    pub wealth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbRun {
    pub terminal_wealth: f64,
    pub terminal_inventory: i64,
    pub path: Vec<PathPoint>,
}

fn fill_size(variant: Variant, params: &ProbSimParams, drawn: f64, cap: Option<u64>) -> u64 {
    let gamma_size = || (drawn.round() as u64).max(1);
    let size = match variant {
        Variant::AsUnit => 1,
        Variant::AsGamma | Variant::Ir => gamma_size(),
        Variant::Naive15 => params.naive_size,
    };
    cap.map_or(size, |c| size.min(c))
}

/// One run. The price path and the fill draws come from separate streams of
/// `seed`, so every variant sees the same price path for a given seed.
pub fn simulate_run(
    params: &ProbSimParams,
    variant: Variant,
    seed: u64,
    record_path: bool,
) -> Result<ProbRun, ProbSimError> {
    params.validate()?;
    let mut price_rng = stream(seed, Stream::Price);
    let mut fill_rng = stream(seed, Stream::Fills);
    let sizes = Gamma::new(params.gamma_shape, params.gamma_scale)
        .map_err(|_| ProbSimError::NotPositive("gamma_shape", params.gamma_shape))?;
    let step = params.sigma * params.dt.sqrt();

    let mut mid = params.initial_price;
    let mut inventory: i64 = 0;
    let mut cash = 0.0;
    let mut path = Vec::new();

    for i in 0..params.steps() {
        let t = i as f64 * params.dt;
        let q = quote(params, variant, mid, inventory, t);
        let u_bid: f64 = fill_rng.random();
        let u_ask: f64 = fill_rng.random();
        let draw_bid = sizes.sample(&mut fill_rng);
        let draw_ask = sizes.sample(&mut fill_rng);

        let p_bid = fill_probability(mid - q.bid, params.intensity, params.kappa, params.dt);
        let p_ask = fill_probability(q.ask - mid, params.intensity, params.kappa, params.dt);
        let mut bought = 0;
        let mut sold = 0;
        if u_bid < p_bid && q.bid_cap != Some(0) {
            bought = fill_size(variant, params, draw_bid, q.bid_cap);
            inventory += bought as i64;
            cash -= q.bid * bought as f64;
        }
        if u_ask < p_ask && q.ask_cap != Some(0) {
            sold = fill_size(variant, params, draw_ask, q.ask_cap);
            inventory -= sold as i64;
            cash += q.ask * sold as f64;
        }
        if record_path {
            path.push(PathPoint {
                t,
                mid,
                bid: q.bid,
                ask: q.ask,
                bought,
                sold,
                inventory,
                cash,
                wealth: cash + inventory as f64 * mid,
            });
        }
        mid += if price_rng.random::<bool>() {
            step
        } else {
            -step
        };
    }

    Ok(ProbRun {
        terminal_wealth: cash + inventory as f64 * mid,
        terminal_inventory: inventory,
        path,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSample {
    pub run: u64,
    pub terminal_wealth: f64,
    pub terminal_inventory: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    /// Equal-width bins over `[lo, hi]`; a degenerate range yields one bin.
    pub fn new(values: &[f64], lo: f64, hi: f64, bins: usize) -> Self {
        if hi.partial_cmp(&lo) != Some(std::cmp::Ordering::Greater) || bins == 0 {
            return Histogram {
                edges: vec![lo, hi],
                counts: vec![values.len() as u64],
            };
        }
        let width = (hi - lo) / bins as f64;
        let edges = (0..=bins).map(|i| lo + width * i as f64).collect();
        let mut counts = vec![0; bins];
        for &v in values {
            let idx = (((v - lo) / width) as usize).min(bins - 1);
            counts[idx] += 1;
        }
        Histogram { edges, counts }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantReport {
    pub variant: Variant,
    pub mean_wealth: f64,
    pub std_wealth: f64,
    pub mean_inventory: f64,
    pub std_inventory: f64,
    pub histogram: Histogram,
    pub samples: Vec<RunSample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbSimReport {
    pub params: ProbSimParams,
    pub runs: u64,
    pub master_seed: u64,
    pub variants: Vec<VariantReport>,
}

impl ProbSimReport {
    pub fn variant(&self, v: Variant) -> Option<&VariantReport> {
        self.variants.iter().find(|r| r.variant == v)
    }
}

/// Terminal-wealth distributions for each variant over `runs` runs sharing
/// seeds across variants. All histograms use the same bin edges.
pub fn wealth_histogram(
    params: &ProbSimParams,
    variants: &[Variant],
    runs: u64,
    master_seed: u64,
    bins: usize,
) -> Result<ProbSimReport, ProbSimError> {
    params.validate()?;
    if runs == 0 {
        return Err(ProbSimError::NoRuns);
    }
    let samples: Vec<Vec<RunSample>> = variants
        .iter()
        .map(|&variant| {
            (0..runs)
                .into_par_iter()
                .map(|run| {
                    let out = simulate_run(params, variant, run_seed(master_seed, run), false)?;
                    Ok(RunSample {
                        run,
                        terminal_wealth: out.terminal_wealth,
                        terminal_inventory: out.terminal_inventory,
                    })
                })
                .collect::<Result<Vec<_>, ProbSimError>>()
        })
        .collect::<Result<_, _>>()?;

    let all = samples.iter().flatten().map(|s| s.terminal_wealth);
    let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), w| {
        (lo.min(w), hi.max(w))
    });

    let variants = variants
        .iter()
        .zip(samples)
        .map(|(&variant, samples)| {
            let wealth: Vec<f64> = samples.iter().map(|s| s.terminal_wealth).collect();
            let inventory: Vec<f64> = samples
                .iter()
                .map(|s| s.terminal_inventory as f64)
                .collect();
            let (mean_wealth, std_wealth) = stats::mean_std(&wealth);
            let (mean_inventory, std_inventory) = stats::mean_std(&inventory);
            VariantReport {
                variant,
                mean_wealth,
                std_wealth,
                mean_inventory,
                std_inventory,
                histogram: Histogram::new(&wealth, lo, hi, bins),
                samples,
            }
        })
        .collect();

    Ok(ProbSimReport {
        params: params.clone(),
        runs,
        master_seed,
        variants,
    })
}
