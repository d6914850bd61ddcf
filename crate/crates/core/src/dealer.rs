//! Liquidity-provider strategies.
//!
//! Three dealers share the same spread formula and differ in where they
//! centre it and how large they quote:
//!
//! * `As`: centres on an inventory-tilted reservation price, constant size.
//! * `Ir`: centres on the market price, shrinks the size on the side that
//!   would add to her inventory.
//! * `Naive`: centres on the market price, constant size.
//!
//! Variance enters all of them after multiplication by `variance_scale`, and
//! the time-to-close term of the original formulation is dropped.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lob::{OrderId, Side, TickGrid, TickPrice, Trade};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DealerError {
    #[error("risk aversion must be positive, got {0}")]
    Gamma(f64),
    #[error("arrival intensity must be positive, got {0}")]
    Kappa(f64),
    #[error("maximum order size must be at least 1, got {0}")]
    PhiMax(u64),
    #[error("inventory skew must not be positive, got {0}")]
    Eta(f64),
    #[error("variance scale must be non-negative, got {0}")]
    VarianceScale(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DealerKind {
    As,
    Ir,
    Naive,
}

impl DealerKind {
    pub const ALL: [DealerKind; 3] = [DealerKind::Naive, DealerKind::As, DealerKind::Ir];

    pub fn name(self) -> &'static str {
        match self {
            DealerKind::As => "as",
            DealerKind::Ir => "ir",
            DealerKind::Naive => "naive",
        }
    }
}

impl std::str::FromStr for DealerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "as" => Ok(DealerKind::As),
            "ir" => Ok(DealerKind::Ir),
            "naive" => Ok(DealerKind::Naive),
            other => Err(format!(
                "unknown dealer kind '{other}' (expected as, ir or naive)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DealerConfig {
    pub kind: DealerKind,
    pub gamma: f64,
    pub kappa: f64,
    pub variance_scale: f64,
    pub phi_max_bid: u64,
    pub phi_max_ask: u64,
    /// Inventory skew; `None` means `ln(1/phi_max)/phi_max` for that side.
    pub eta_bid: Option<f64>,
    pub eta_ask: Option<f64>,
    pub naive_size: u64,
    pub initial_cash: f64,
}

impl Default for DealerConfig {
    fn default() -> Self {
        DealerConfig {
            kind: DealerKind::As,
            gamma: 0.1,
            kappa: 0.6,
            variance_scale: 24.0 * 60.0,
            phi_max_bid: 5000,
            phi_max_ask: 5000,
            eta_bid: None,
            eta_ask: None,
            naive_size: 5000,
            initial_cash: 5_000_000.0,
        }
    }
}

/// Skew that makes the quoted size exactly one share at `|q| = phi_max`.
pub fn unit_skew(phi_max: u64) -> f64 {
    let phi = phi_max as f64;
    (1.0 / phi).ln() / phi
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpreadParams {
    pub gamma: f64,
    pub kappa: f64,
    pub variance_scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsParams {
    pub spread: SpreadParams,
    pub phi_max_bid: u64,
    pub phi_max_ask: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IrParams {
    pub spread: SpreadParams,
    pub phi_max_bid: u64,
    pub phi_max_ask: u64,
    pub eta_bid: f64,
    pub eta_ask: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NaiveParams {
    pub spread: SpreadParams,
    pub size: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DealerStrategy {
    As(AsParams),
    Ir(IrParams),
    Naive(NaiveParams),
}

impl DealerConfig {
    pub fn strategy(&self) -> Result<DealerStrategy, DealerError> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(DealerError::Gamma(self.gamma));
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(DealerError::Kappa(self.kappa));
        }
        if !(self.variance_scale >= 0.0 && self.variance_scale.is_finite()) {
            return Err(DealerError::VarianceScale(self.variance_scale));
        }
        let spread = SpreadParams {
            gamma: self.gamma,
            kappa: self.kappa,
            variance_scale: self.variance_scale,
        };
        let check_phi = |phi: u64| {
            if phi == 0 {
                Err(DealerError::PhiMax(phi))
            } else {
                Ok(phi)
            }
        };
        Ok(match self.kind {
            DealerKind::As => DealerStrategy::As(AsParams {
                spread,
                phi_max_bid: check_phi(self.phi_max_bid)?,
                phi_max_ask: check_phi(self.phi_max_ask)?,
            }),
            DealerKind::Ir => {
                let phi_max_bid = check_phi(self.phi_max_bid)?;
                let phi_max_ask = check_phi(self.phi_max_ask)?;
                let eta_bid = self.eta_bid.unwrap_or_else(|| unit_skew(phi_max_bid));
                let eta_ask = self.eta_ask.unwrap_or_else(|| unit_skew(phi_max_ask));
                for eta in [eta_bid, eta_ask] {
                    if eta > 0.0 || !eta.is_finite() {
                        return Err(DealerError::Eta(eta));
                    }
                }
                DealerStrategy::Ir(IrParams {
                    spread,
                    phi_max_bid,
                    phi_max_ask,
                    eta_bid,
                    eta_ask,
                })
            }
            DealerKind::Naive => DealerStrategy::Naive(NaiveParams {
                spread,
                size: check_phi(self.naive_size)?,
            }),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuoteSide {
    pub price: TickPrice,
    pub size: u64,
}

/// Up to two quotes. A missing side is not quoted this turn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Quotes {
    pub bid: Option<QuoteSide>,
    pub ask: Option<QuoteSide>,
}

pub fn reservation_price(price: f64, inventory: i64, gamma: f64, scaled_variance: f64) -> f64 {
    price - inventory as f64 * gamma * scaled_variance
}

pub fn optimal_spread(gamma: f64, scaled_variance: f64, kappa: f64) -> f64 {
    gamma * scaled_variance + (2.0 / gamma) * (1.0 + gamma / kappa).ln()
}

/// Snaps `centre -/+ spread/2` to the grid, keeping the ask strictly above
/// the bid.
fn place(centre: f64, spread: f64, grid: TickGrid) -> (TickPrice, TickPrice) {
    let bid = grid.snap(centre - spread / 2.0);
    let mut ask = grid.snap(centre + spread / 2.0);
    if ask <= bid {
        ask = bid.up();
    }
    (bid, ask)
}

fn quotes(bid: TickPrice, bid_size: u64, ask: TickPrice, ask_size: u64) -> Quotes {
    let side = |price, size| (size > 0).then_some(QuoteSide { price, size });
    Quotes {
        bid: side(bid, bid_size),
        ask: side(ask, ask_size),
    }
}

pub fn as_quotes(
    price: f64,
    inventory: i64,
    params: &AsParams,
    variance: f64,
    grid: TickGrid,
) -> Quotes {
    let sp = params.spread;
    let scaled = variance * sp.variance_scale;
    let centre = reservation_price(price, inventory, sp.gamma, scaled);
    let spread = optimal_spread(sp.gamma, scaled, sp.kappa);
    let (bid, ask) = place(centre, spread, grid);
    quotes(bid, params.phi_max_bid, ask, params.phi_max_ask)
}

/// Unrounded inventory-rule sizes.
pub fn ir_size_curve(
    inventory: i64,
    phi_max_bid: f64,
    phi_max_ask: f64,
    eta_bid: f64,
    eta_ask: f64,
) -> (f64, f64) {
    let q = inventory as f64;
    let bid = if inventory <= 0 {
        phi_max_bid
    } else {
        phi_max_bid * (eta_bid * q).exp()
    };
    let ask = if inventory >= 0 {
        phi_max_ask
    } else {
        phi_max_ask * (-eta_ask * q).exp()
    };
    (bid, ask)
}

/// Inventory-rule sizes rounded half away from zero; zero means withdrawn.
pub fn ir_quote_sizes(inventory: i64, params: &IrParams) -> (u64, u64) {
    let (bid, ask) = ir_size_curve(
        inventory,
        params.phi_max_bid as f64,
        params.phi_max_ask as f64,
        params.eta_bid,
        params.eta_ask,
    );
    (bid.round() as u64, ask.round() as u64)
}

pub fn ir_quotes(
    price: f64,
    inventory: i64,
    params: &IrParams,
    variance: f64,
    grid: TickGrid,
) -> Quotes {
    let sp = params.spread;
    let scaled = variance * sp.variance_scale;
    let spread = optimal_spread(sp.gamma, scaled, sp.kappa);
    let (bid, ask) = place(price, spread, grid);
    let (bid_size, ask_size) = ir_quote_sizes(inventory, params);
    quotes(bid, bid_size, ask, ask_size)
}

pub fn naive_quotes(price: f64, params: &NaiveParams, variance: f64, grid: TickGrid) -> Quotes {
    let sp = params.spread;
    let spread = optimal_spread(sp.gamma, variance * sp.variance_scale, sp.kappa);
    let (bid, ask) = place(price, spread, grid);
    quotes(bid, params.size, ask, params.size)
}

impl DealerStrategy {
    pub fn kind(&self) -> DealerKind {
        match self {
            DealerStrategy::As(_) => DealerKind::As,
            DealerStrategy::Ir(_) => DealerKind::Ir,
            DealerStrategy::Naive(_) => DealerKind::Naive,
        }
    }

    pub fn quote(&self, price: f64, inventory: i64, variance: f64, grid: TickGrid) -> Quotes {
        match self {
            DealerStrategy::As(p) => as_quotes(price, inventory, p, variance, grid),
            DealerStrategy::Ir(p) => ir_quotes(price, inventory, p, variance, grid),
            DealerStrategy::Naive(p) => naive_quotes(price, p, variance, grid),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DealerFill {
    pub t: u64,
    pub side: Side,
    pub price: TickPrice,
    pub quantity: u64,
}

impl DealerFill {
    /// Inventory change: positive when the dealer bought.
    pub fn signed_quantity(&self) -> i64 {
        match self.side {
            Side::Bid => self.quantity as i64,
            Side::Ask => -(self.quantity as i64),
        }
    }

    /// Signed notional in tick units, positive for a dealer buy.
    pub fn signed_notional(&self) -> i64 {
        self.signed_quantity() * self.price.ticks()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DealerState {
    pub inventory: i64,
    /// Cash in tick units.
    pub cash: i64,
    pub initial_cash: i64,
    pub fills: Vec<DealerFill>,
    /// Ids of the dealer's own orders that may still rest on the book.
    pub resting: Vec<OrderId>,
}

impl DealerState {
    pub fn new(initial_cash: i64) -> Self {
        DealerState {
            inventory: 0,
            cash: initial_cash,
            initial_cash,
            fills: Vec::new(),
            resting: Vec::new(),
        }
    }

    pub fn wealth(&self, price: f64, grid: TickGrid) -> f64 {
        self.cash as f64 * grid.size() + self.inventory as f64 * price
    }

    /// Books a trade in which the dealer was the buyer (`side == Bid`) or
    /// the seller.
    pub fn record(&mut self, trade: &Trade, side: Side) {
        let fill = DealerFill {
            t: trade.at,
            side,
            price: trade.price,
            quantity: trade.quantity,
        };
        self.inventory += fill.signed_quantity();
        self.cash -= fill.signed_notional();
        self.fills.push(fill);
    }

    /// Recomputes `(cash, inventory)` from the initial cash and the fill log.
    pub fn replay(&self) -> (i64, i64) {
        self.fills
            .iter()
            .fold((self.initial_cash, 0), |(cash, q), f| {
                (cash - f.signed_notional(), q + f.signed_quantity())
            })
    }
}
