//! Fundamentalist, chartist and noise-trader behaviour.
//!
//! Each stylised agent forecasts a log return, turns it into a price
//! forecast, allocates a CRRA fraction of wealth to the stock and submits a
//! single limit order for the difference between target and current holding.

use rand::Rng;
use rand_distr::{Distribution, LogNormal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::lob::{AgentId, Side, TickGrid, TickPrice};

/// Lower bound on the variance used in the allocation rule.
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// Long and short exposure are both capped at one times wealth.
pub const MAX_FRACTION: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    Fundamentalist,
    Chartist,
    Noise,
}

impl AgentKind {
    pub const ALL: [AgentKind; 3] = [
        AgentKind::Fundamentalist,
        AgentKind::Chartist,
        AgentKind::Noise,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Fundamentalist => "fundamentalist",
            AgentKind::Chartist => "chartist",
            AgentKind::Noise => "noise",
        }
    }
}

/// How the initial stock draw is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StockUnit {
    /// The draw is a currency amount, converted to whole shares at the
    /// initial price.
    #[default]
    Currency,
    /// The draw is a share count.
    Shares,
}

impl StockUnit {
    /// Whole shares for an endowment draw.
    pub fn shares(self, draw: i64, initial_price: f64) -> i64 {
        match self {
            StockUnit::Shares => draw,
            StockUnit::Currency => (draw as f64 / initial_price).round() as i64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentsConfig {
    pub fundamentalists: usize,
    pub chartists: usize,
    pub noise: usize,
    /// Relative risk aversion of every stylised agent.
    pub gamma: f64,
    pub sigma_fundamentalist: f64,
    pub sigma_chartist: f64,
    pub sigma_noise: f64,
    /// Standard deviation of the noise trader's pure-noise return draw.
    pub sigma_noise_draw: f64,
    pub lookback_max: usize,
    /// Bounds of the uniform integer stock endowment draw.
    pub stock_min: i64,
    pub stock_max: i64,
    pub stock_unit: StockUnit,
    pub cash_min: f64,
    pub cash_max: f64,
    /// Log-normal shape (sigma of the underlying normal) for price offsets.
    pub offset_shape: f64,
    /// Log-normal scale (its median) for price offsets.
    pub offset_scale: f64,
}

impl Default for AgentsConfig {
    fn default() -> Self {
        AgentsConfig {
            fundamentalists: 450,
            chartists: 450,
            noise: 99,
            gamma: 10.0,
            sigma_fundamentalist: 0.0005,
            sigma_chartist: 0.001,
            sigma_noise: 0.0005,
            sigma_noise_draw: 0.0005,
            lookback_max: 100,
            stock_min: -2000,
            stock_max: 2000,
            stock_unit: StockUnit::Currency,
            cash_min: 2000.0,
            cash_max: 10000.0,
            offset_shape: 0.5,
            offset_scale: 10.0,
        }
    }
}

impl AgentsConfig {
    pub fn total(&self) -> usize {
        self.fundamentalists + self.chartists + self.noise
    }

    pub fn forecast_noise(&self, kind: AgentKind) -> f64 {
        match kind {
            AgentKind::Fundamentalist => self.sigma_fundamentalist,
            AgentKind::Chartist => self.sigma_chartist,
            AgentKind::Noise => self.sigma_noise,
        }
    }

    /// Median of the price-offset distribution.
    pub fn offset_median(&self) -> f64 {
        self.offset_scale
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StylisedAgent {
    pub id: AgentId,
    pub kind: AgentKind,
    pub gamma: f64,
    /// Chartist lookback in steps; unused by other kinds.
    pub lookback: usize,
    pub forecast_noise: f64,
    pub noise_draw: f64,
    pub stock: i64,
    /// Cash in tick units.
    pub cash: i64,
    pub bankrupt: bool,
}

impl StylisedAgent {
    /// Mark-to-market wealth `stock * p + cash`.
    pub fn wealth(&self, price: f64, grid: TickGrid) -> f64 {
        self.stock as f64 * price + self.cash as f64 * grid.size()
    }
}

/// What a selected agent sees of the market.
#[derive(Debug, Clone, Copy)]
pub struct MarketView<'a> {
    pub price: f64,
    pub fundamental: f64,
    /// Price history, oldest first, ending with the current price.
    pub history: &'a [f64],
    pub variance: f64,
    pub best_bid: Option<TickPrice>,
    pub best_ask: Option<TickPrice>,
    pub grid: TickGrid,
}

/// Random inputs for one decision. Drawn up front so every decision by an
/// agent of a given kind consumes the same number of draws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionDraws {
    pub forecast_noise: f64,
    pub noise_return: f64,
    pub price_offset: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Decision {
    /// Wealth is not positive; the agent stops trading for good.
    Bankrupt,
    Hold,
    Order {
        side: Side,
        quantity: u64,
        price: TickPrice,
    },
}

/// Mean of the last `lookback` log returns of `prices`. Uses whatever is
/// available when the history is shorter.
pub fn average_return(prices: &[f64], lookback: usize) -> f64 {
    if prices.len() < 2 || lookback == 0 {
        return 0.0;
    }
    let n = lookback.min(prices.len() - 1);
    let window = &prices[prices.len() - n - 1..];
    let sum: f64 = window.windows(2).map(|w| (w[1] / w[0]).ln()).sum();
    sum / n as f64
}

pub fn forecast_return(
    agent: &StylisedAgent,
    price: f64,
    fundamental: f64,
    history: &[f64],
    draws: &DecisionDraws,
) -> f64 {
    let signal = match agent.kind {
        AgentKind::Fundamentalist => (fundamental - price) / price,
        AgentKind::Chartist => average_return(history, agent.lookback),
        AgentKind::Noise => draws.noise_return,
    };
    signal + draws.forecast_noise
}

pub fn forecast_price(price: f64, forecast: f64) -> f64 {
    price * forecast.exp()
}

/// Unclamped CRRA fraction `ln(p_hat / p) / (gamma * var)`.
pub fn crra_fraction(forecast_price: f64, price: f64, gamma: f64, variance: f64) -> f64 {
    (forecast_price / price).ln() / (gamma * variance.max(VARIANCE_FLOOR))
}

/// CRRA fraction clamped to the long/short limits.
pub fn crra_allocation(forecast_price: f64, price: f64, gamma: f64, variance: f64) -> f64 {
    crra_fraction(forecast_price, price, gamma, variance).clamp(-MAX_FRACTION, MAX_FRACTION)
}

/// Order needed to move from `stock` to a holding worth `fraction * wealth`.
/// The target is capped so that `|target * p| <= wealth`. Returns `None` for
/// zero-quantity decisions and for non-positive wealth.
pub fn target_order(stock: i64, wealth: f64, price: f64, fraction: f64) -> Option<(Side, u64)> {
    if wealth <= 0.0 {
        return None;
    }
    let cap = (MAX_FRACTION * wealth / price).floor();
    let target = (fraction * wealth / price).round().clamp(-cap, cap);
    let delta = target - stock as f64;
    if delta >= 1.0 {
        Some((Side::Bid, delta as u64))
    } else if delta <= -1.0 {
        Some((Side::Ask, (-delta) as u64))
    } else {
        None
    }
}

/// Limit price from a log-normal offset around the touch. Offsets below the
/// median make the order more aggressive and may cross.
pub fn order_price(
    side: Side,
    best_bid: f64,
    best_ask: f64,
    offset: f64,
    median: f64,
    grid: TickGrid,
) -> TickPrice {
    let raw = match side {
        Side::Bid => best_bid - (offset - median),
        Side::Ask => best_ask + (offset - median),
    };
    grid.snap(raw)
}

pub fn draw_decision<R: Rng + ?Sized>(
    agent: &StylisedAgent,
    offsets: &LogNormal<f64>,
    rng: &mut R,
) -> DecisionDraws {
    let forecast_noise = agent.forecast_noise * rng.sample::<f64, _>(StandardNormal);
    let noise_return = match agent.kind {
        AgentKind::Noise => agent.noise_draw * rng.sample::<f64, _>(StandardNormal),
        _ => 0.0,
    };
    let price_offset = offsets.sample(rng);
    DecisionDraws {
        forecast_noise,
        noise_return,
        price_offset,
    }
}

/// Full decision for a selected agent given its pre-drawn randomness.
pub fn decide(
    agent: &mut StylisedAgent,
    view: &MarketView<'_>,
    draws: &DecisionDraws,
    offset_median: f64,
) -> Decision {
    if agent.bankrupt {
        return Decision::Bankrupt;
    }
    let wealth = agent.wealth(view.price, view.grid);
    if wealth <= 0.0 {
        agent.bankrupt = true;
        return Decision::Bankrupt;
    }
    let r_hat = forecast_return(agent, view.price, view.fundamental, view.history, draws);
    let p_hat = forecast_price(view.price, r_hat);
    let fraction = crra_allocation(p_hat, view.price, agent.gamma, view.variance);
    let Some((side, quantity)) = target_order(agent.stock, wealth, view.price, fraction) else {
        return Decision::Hold;
    };
    let reference =
        |quote: Option<TickPrice>| quote.map_or(view.price, |q| q.to_currency(view.grid));
    let price = order_price(
        side,
        reference(view.best_bid),
        reference(view.best_ask),
        draws.price_offset,
        offset_median,
        view.grid,
    );
    Decision::Order {
        side,
        quantity,
        price,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid() -> TickGrid {
        TickGrid::new(0.1).unwrap()
    }

    fn agent(kind: AgentKind) -> StylisedAgent {
        StylisedAgent {
            id: AgentId(1),
            kind,
            gamma: 10.0,
            lookback: 5,
            forecast_noise: 0.0,
            noise_draw: 0.0,
            stock: 0,
            cash: 100_000,
            bankrupt: false,
        }
    }

    fn no_draws() -> DecisionDraws {
        DecisionDraws {
            forecast_noise: 0.0,
            noise_return: 0.0,
            price_offset: 10.0,
        }
    }

    #[test]
    fn average_return_examples() {
        assert_eq!(average_return(&[100.0; 20], 10), 0.0);
        let r = average_return(&[100.0, 110.0, 121.0], 2);
        assert!((r - 1.1f64.ln()).abs() < 1e-12);
        assert_eq!(average_return(&[100.0], 5), 0.0);
        assert_eq!(average_return(&[], 5), 0.0);
    }

    #[test]
    fn average_return_short_history_uses_available() {
        // two returns available, lookback 10
        let r = average_return(&[100.0, 110.0, 99.0], 10);
        let expected = ((1.1f64).ln() + (0.9f64).ln()) / 2.0;
        assert!((r - expected).abs() < 1e-12);
    }

    #[test]
    fn average_return_only_uses_last_window() {
        let r = average_return(&[50.0, 100.0, 100.0, 110.0], 1);
        assert!((r - 1.1f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn forecast_examples() {
        let f = agent(AgentKind::Fundamentalist);
        assert_eq!(forecast_return(&f, 1000.0, 1000.0, &[], &no_draws()), 0.0);
        let r = forecast_return(&f, 1000.0, 1010.0, &[], &no_draws());
        assert!((r - 0.01).abs() < 1e-12);

        let n = agent(AgentKind::Noise);
        let draws = DecisionDraws {
            forecast_noise: -0.0001,
            noise_return: 0.0003,
            price_offset: 10.0,
        };
        assert!((forecast_return(&n, 1000.0, 1000.0, &[], &draws) - 0.0002).abs() < 1e-15);

        let c = agent(AgentKind::Chartist);
        let r = forecast_return(&c, 121.0, 1000.0, &[100.0, 110.0, 121.0], &no_draws());
        assert!((r - 1.1f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn forecast_price_examples() {
        assert_eq!(forecast_price(1000.0, 0.0), 1000.0);
        assert!((forecast_price(1000.0, 0.01) - 1010.050167).abs() < 1e-5);
        assert!((forecast_price(1000.0, -0.01) - 990.049834).abs() < 1e-5);
    }

    #[test]
    fn allocation_examples() {
        assert_eq!(crra_allocation(1000.0, 1000.0, 10.0, 0.01), 0.0);
        let p_hat = 1000.0 * 0.01f64.exp();
        assert!((crra_fraction(p_hat, 1000.0, 10.0, 0.0005) - 2.0).abs() < 1e-9);
        assert_eq!(crra_allocation(p_hat, 1000.0, 10.0, 0.0005), 1.0);
        let p_hat = 1000.0 * (-0.02f64).exp();
        assert!((crra_allocation(p_hat, 1000.0, 10.0, 0.01) + 0.2).abs() < 1e-12);
    }

    #[test]
    fn allocation_variance_floor() {
        let z = crra_fraction(1001.0, 1000.0, 10.0, 0.0);
        assert!(z.is_finite());
        assert_eq!(crra_allocation(1001.0, 1000.0, 10.0, 0.0), 1.0);
    }

    #[test]
    fn target_order_examples() {
        assert_eq!(target_order(0, 10_000.0, 1000.0, 0.5), Some((Side::Bid, 5)));
        assert_eq!(target_order(5, 10_000.0, 1000.0, 0.5), None);
        assert_eq!(
            target_order(-12, 10_000.0, 1000.0, -1.0),
            Some((Side::Bid, 2))
        );
        assert_eq!(
            target_order(3, 10_000.0, 1000.0, -1.0),
            Some((Side::Ask, 13))
        );
        assert_eq!(target_order(3, 0.0, 1000.0, 1.0), None);
        assert_eq!(target_order(3, -5.0, 1000.0, 1.0), None);
    }

    #[test]
    fn order_price_examples() {
        let g = grid();
        assert_eq!(
            order_price(Side::Bid, 999.9, 1000.1, 10.0, 10.0, g),
            g.exact(999.9).unwrap()
        );
        assert_eq!(
            order_price(Side::Bid, 999.9, 1000.1, 12.5, 10.0, g),
            g.exact(997.4).unwrap()
        );
        assert_eq!(
            order_price(Side::Ask, 999.9, 1000.1, 7.0, 10.0, g),
            g.exact(997.1).unwrap()
        );
    }

    #[test]
    fn bankrupt_agent_stops_for_good() {
        let mut a = agent(AgentKind::Fundamentalist);
        a.stock = -100;
        a.cash = 10_000;
        let history = [1000.0];
        let view = MarketView {
            price: 1000.0,
            fundamental: 1100.0,
            history: &history,
            variance: 1e-6,
            best_bid: None,
            best_ask: None,
            grid: grid(),
        };
        assert_eq!(decide(&mut a, &view, &no_draws(), 10.0), Decision::Bankrupt);
        assert!(a.bankrupt);
        // even after wealth would recover
        a.stock = 0;
        assert_eq!(decide(&mut a, &view, &no_draws(), 10.0), Decision::Bankrupt);
    }

    #[test]
    fn fundamentalist_at_fair_value_holds() {
        let mut a = agent(AgentKind::Fundamentalist);
        let history = [1000.0; 3];
        let view = MarketView {
            price: 1000.0,
            fundamental: 1000.0,
            history: &history,
            variance: 1e-6,
            best_bid: None,
            best_ask: None,
            grid: grid(),
        };
        assert_eq!(decide(&mut a, &view, &no_draws(), 10.0), Decision::Hold);
    }

    #[test]
    fn missing_quotes_fall_back_to_price() {
        let mut a = agent(AgentKind::Fundamentalist);
        let history = [1000.0];
        let view = MarketView {
            price: 1000.0,
            fundamental: 1010.0,
            history: &history,
            variance: 1e-4,
            best_bid: None,
            best_ask: Some(grid().exact(1000.5).unwrap()),
            grid: grid(),
        };
        match decide(&mut a, &view, &no_draws(), 10.0) {
            Decision::Order {
                side,
                price,
                quantity,
            } => {
                assert_eq!(side, Side::Bid);
                assert_eq!(price, grid().exact(1000.0).unwrap());
                assert_eq!(quantity, 10);
            }
            other => panic!("expected an order, got {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn fundamentalist_sign(p in 1.0f64..5000.0, pf in 1.0f64..5000.0) {
            let a = agent(AgentKind::Fundamentalist);
            let r = forecast_return(&a, p, pf, &[], &no_draws());
            prop_assert_eq!(r.signum() == (pf - p).signum() || r == 0.0, true);
        }

        #[test]
        fn fraction_antisymmetric_and_monotone(
            lr in 1e-6f64..0.1,
            gamma in 0.1f64..50.0,
            var in 1e-8f64..1e-2,
        ) {
            let p = 1000.0;
            let up = crra_fraction(p * lr.exp(), p, gamma, var);
            let down = crra_fraction(p * (-lr).exp(), p, gamma, var);
            prop_assert!((up + down).abs() <= 1e-9 * up.abs());
            prop_assert!(crra_fraction(p * lr.exp(), p, gamma * 2.0, var).abs() < up.abs());
            prop_assert!(crra_fraction(p * lr.exp(), p, gamma, var * 2.0).abs() < up.abs());
        }

        #[test]
        fn clamp_holds_after_full_execution(
            stock in -3000i64..3000,
            cash in 0.0f64..2.0e6,
            p in 500.0f64..1500.0,
            z in -1.0f64..=1.0,
        ) {
            let wealth = stock as f64 * p + cash;
            prop_assume!(wealth > 0.0);
            let after = match target_order(stock, wealth, p, z) {
                Some((Side::Bid, q)) => stock + q as i64,
                Some((Side::Ask, q)) => stock - q as i64,
                None => stock,
            };
            prop_assert!((after as f64 * p).abs() <= wealth + 1e-6);
        }
    }
}
