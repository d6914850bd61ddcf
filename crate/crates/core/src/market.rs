//! Agent-based market: population setup, scheduling and recording.
//!
//! One timestamp runs, in order: order expiry, the fundamental step, one
//! action, settlement of the resulting trades, the price update with its log
//! return and EWMA variance, and a series record. The action is either a
//! stylised agent's single order or one half of a dealer turn: the dealer
//! cancels her resting quotes and submits her bid at `t`, then submits her
//! ask at `t + 1`. The timestamp after a dealer turn always goes to a
//! stylised agent.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::LogNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{self, AgentKind, AgentsConfig, Decision, MarketView, StylisedAgent};
use crate::assets::{FundamentalConfig, FundamentalProcess};
use crate::dealer::{
    DealerConfig, DealerError, DealerFill, DealerState, DealerStrategy, QuoteSide,
};
use crate::lob::{AgentId, LobError, NewOrder, OrderBook, Side, TickGrid, Trade};
use crate::rng::{stream, Stream};

pub const DEALER_ID: AgentId = AgentId(0);

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error(transparent)]
    Book(#[from] LobError),
    #[error(transparent)]
    Dealer(#[from] DealerError),
    #[error("{0} must lie in [0, 1], got {1}")]
    Probability(&'static str, f64),
    #[error("invalid {0}: {1}")]
    Invalid(&'static str, String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    /// Number of timestamps per run.
    pub steps: u64,
    pub runs: u64,
    pub seed: u64,
    pub initial_price: f64,
    pub ewma_alpha: f64,
    /// Probability that a free timestamp starts a dealer turn. `None` means
    /// one over the population size, i.e. the dealer is drawn like any agent.
    pub dealer_prob: Option<f64>,
}

impl Default for SimSection {
    fn default() -> Self {
        SimSection {
            steps: 40_000,
            runs: 100,
            seed: 42,
            initial_price: 1000.0,
            ewma_alpha: 0.25,
            dealer_prob: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BookConfig {
    pub tick: f64,
    /// Probability `ω` that expiry fires on a timestamp.
    pub expiry_prob: f64,
    /// Number `τ` of oldest orders removed when it fires.
    pub expiry_count: usize,
}

impl Default for BookConfig {
    fn default() -> Self {
        BookConfig {
            tick: 0.1,
            expiry_prob: 0.1,
            expiry_count: 50,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub sim: SimSection,
    pub book: BookConfig,
    pub fundamental: FundamentalConfig,
    pub agents: AgentsConfig,
    pub dealer: DealerConfig,
}

impl SimConfig {
    /// Population including the dealer.
    pub fn population(&self) -> usize {
        self.agents.total() + 1
    }

    pub fn dealer_prob(&self) -> f64 {
        self.sim
            .dealer_prob
            .unwrap_or(1.0 / self.population() as f64)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        TickGrid::new(self.book.tick)?;
        self.dealer.strategy()?;
        for (name, p) in [
            ("book.expiry_prob", self.book.expiry_prob),
            ("fundamental.jump_prob", self.fundamental.jump_prob),
            ("sim.dealer_prob", self.dealer_prob()),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(ConfigError::Probability(name, p));
            }
        }
        let a = &self.sim.ewma_alpha;
        if !(*a > 0.0 && *a <= 1.0) {
            return Err(ConfigError::Invalid("sim.ewma_alpha", a.to_string()));
        }
        if !(self.sim.initial_price > 0.0 && self.sim.initial_price.is_finite()) {
            return Err(ConfigError::Invalid(
                "sim.initial_price",
                self.sim.initial_price.to_string(),
            ));
        }
        if !(self.fundamental.initial > 0.0 && self.fundamental.jump_size > -1.0) {
            return Err(ConfigError::Invalid(
                "fundamental",
                "initial value must be positive and jump_size > -1".into(),
            ));
        }
        let ag = &self.agents;
        if ag.stock_min > ag.stock_max
            || ag.cash_min.is_nan()
            || ag.cash_max.is_nan()
            || ag.cash_min > ag.cash_max
            || ag.cash_min < 0.0
        {
            return Err(ConfigError::Invalid(
                "agents",
                "endowment ranges must be ordered and cash non-negative".into(),
            ));
        }
        if ag.chartists > 0 && ag.lookback_max < 1 {
            return Err(ConfigError::Invalid(
                "agents.lookback_max",
                "must be >= 1".into(),
            ));
        }
        let positive = |x: f64| x > 0.0;
        if !positive(ag.gamma)
            || !positive(ag.offset_scale)
            || ag.offset_shape.is_nan()
            || ag.offset_shape < 0.0
        {
            return Err(ConfigError::Invalid(
                "agents",
                "gamma and offset_scale must be positive, offset_shape non-negative".into(),
            ));
        }
        for (name, s) in [
            ("agents.sigma_fundamentalist", ag.sigma_fundamentalist),
            ("agents.sigma_chartist", ag.sigma_chartist),
            ("agents.sigma_noise", ag.sigma_noise),
            ("agents.sigma_noise_draw", ag.sigma_noise_draw),
        ] {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(ConfigError::Invalid(name, s.to_string()));
            }
        }
        if !(self.dealer.initial_cash.is_finite()) {
            return Err(ConfigError::Invalid(
                "dealer.initial_cash",
                "not finite".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EwmaVariance {
    pub value: f64,
    pub alpha: f64,
}

impl EwmaVariance {
    pub fn new(alpha: f64) -> Self {
        EwmaVariance { value: 0.0, alpha }
    }

    pub fn update(&mut self, log_return: f64) -> f64 {
        self.value = update_ewma(self.value, log_return, self.alpha);
        self.value
    }
}

/// `alpha * r^2 + (1 - alpha) * v`.
pub fn update_ewma(variance: f64, log_return: f64, alpha: f64) -> f64 {
    alpha * log_return * log_return + (1.0 - alpha) * variance
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Actor {
    Stylised(AgentKind),
    DealerBid,
    DealerAsk,
}

impl Actor {
    pub fn code(self) -> &'static str {
        match self {
            Actor::Stylised(k) => k.name(),
            Actor::DealerBid => "dealer_bid",
            Actor::DealerAsk => "dealer_ask",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: u64,
    pub actor: Actor,
    pub price: f64,
    pub fundamental: f64,
    pub ewma_var: f64,
    pub volume: u64,
    pub dealer_inventory: i64,
    pub dealer_wealth: f64,
    /// Summed wealth of each class, counting agents solvent at the start.
    pub fundamentalist_wealth: f64,
    pub chartist_wealth: f64,
    pub noise_wealth: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeRecord {
    pub t: u64,
    pub price: f64,
    pub price_ticks: i64,
    pub quantity: u64,
    pub buyer: u32,
    pub seller: u32,
    pub aggressor: Side,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Holdings {
    /// Total cash in tick units.
    pub cash: i64,
    pub stock: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    pub seed: u64,
    pub tick: f64,
    pub initial_price: f64,
    pub initial_dealer_wealth: f64,
    /// Starting values of the three class wealth series.
    pub initial_class_wealth: [f64; 3],
    pub series: Vec<StepRecord>,
    pub trades: Vec<TradeRecord>,
    pub dealer_fills: Vec<DealerFill>,
    pub initial_holdings: Holdings,
    pub final_holdings: Holdings,
    pub bankrupt_agents: usize,
}

impl RunOutput {
    pub fn prices(&self) -> Vec<f64> {
        std::iter::once(self.initial_price)
            .chain(self.series.iter().map(|r| r.price))
            .collect()
    }

    pub fn dealer_wealth(&self) -> Vec<f64> {
        std::iter::once(self.initial_dealer_wealth)
            .chain(self.series.iter().map(|r| r.dealer_wealth))
            .collect()
    }
}

/// Running holdings of agents of one class that started solvent.
#[derive(Debug, Clone, Copy, Default)]
struct ClassTotals {
    stock: i64,
    cash: i64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Phase {
    Free,
    /// Second timestamp of a dealer turn; `None` when the ask was withdrawn.
    DealerAsk(Option<QuoteSide>),
    Cooldown,
}

pub struct Market {
    grid: TickGrid,
    omega: f64,
    tau: usize,
    dealer_prob: f64,
    offset_median: f64,
    book: OrderBook,
    fundamental: FundamentalProcess,
    agents: Vec<StylisedAgent>,
    /// Whether each agent counts towards its class wealth series.
    tracked: Vec<bool>,
    classes: [ClassTotals; 3],
    dealer: DealerState,
    strategy: DealerStrategy,
    ewma: EwmaVariance,
    prices: Vec<f64>,
    t: u64,
    phase: Phase,
    offsets: LogNormal<f64>,
    scheduler: ChaCha8Rng,
    expiry: ChaCha8Rng,
    fundamental_rng: ChaCha8Rng,
    decisions: ChaCha8Rng,
    seed: u64,
    initial_holdings: Holdings,
    initial_dealer_wealth: f64,
    initial_class_wealth: [f64; 3],
    series: Vec<StepRecord>,
    trades: Vec<TradeRecord>,
}

fn class_index(kind: AgentKind) -> usize {
    match kind {
        AgentKind::Fundamentalist => 0,
        AgentKind::Chartist => 1,
        AgentKind::Noise => 2,
    }
}

impl Market {
    pub fn new(config: &SimConfig, seed: u64) -> Result<Self, ConfigError> {
        config.validate()?;
        let grid = TickGrid::new(config.book.tick)?;
        let strategy = config.dealer.strategy()?;
        let ac = &config.agents;
        let offsets = LogNormal::new(ac.offset_scale.ln(), ac.offset_shape)
            .map_err(|e| ConfigError::Invalid("agents.offset", e.to_string()))?;

        let mut endow = stream(seed, Stream::Endowment);
        let p0 = config.sim.initial_price;
        let cash_lo = (ac.cash_min / grid.size()).round() as i64;
        let cash_hi = (ac.cash_max / grid.size()).round() as i64;
        let kinds = std::iter::repeat_n(AgentKind::Fundamentalist, ac.fundamentalists)
            .chain(std::iter::repeat_n(AgentKind::Chartist, ac.chartists))
            .chain(std::iter::repeat_n(AgentKind::Noise, ac.noise));
        let agents: Vec<StylisedAgent> = kinds
            .enumerate()
            .map(|(i, kind)| {
                let lookback = if ac.lookback_max >= 1 {
                    endow.random_range(1..=ac.lookback_max)
                } else {
                    1
                };
                StylisedAgent {
                    id: AgentId(i as u32 + 1),
                    kind,
                    gamma: ac.gamma,
                    lookback,
                    forecast_noise: ac.forecast_noise(kind),
                    noise_draw: ac.sigma_noise_draw,
                    stock: ac
                        .stock_unit
                        .shares(endow.random_range(ac.stock_min..=ac.stock_max), p0),
                    cash: endow.random_range(cash_lo..=cash_hi),
                    bankrupt: false,
                }
            })
            .collect();

        let tracked: Vec<bool> = agents.iter().map(|a| a.wealth(p0, grid) > 0.0).collect();
        let mut classes = [ClassTotals::default(); 3];
        for (a, _) in agents.iter().zip(&tracked).filter(|(_, &t)| t) {
            let c = &mut classes[class_index(a.kind)];
            c.stock += a.stock;
            c.cash += a.cash;
        }

        let dealer = DealerState::new((config.dealer.initial_cash / grid.size()).round() as i64);
        let initial_holdings = Holdings {
            cash: agents.iter().map(|a| a.cash).sum::<i64>() + dealer.cash,
            stock: agents.iter().map(|a| a.stock).sum::<i64>() + dealer.inventory,
        };
        let initial_dealer_wealth = dealer.wealth(p0, grid);
        let initial_class_wealth =
            classes.map(|c| c.stock as f64 * p0 + c.cash as f64 * grid.size());

        Ok(Market {
            grid,
            omega: config.book.expiry_prob,
            tau: config.book.expiry_count,
            dealer_prob: config.dealer_prob(),
            offset_median: ac.offset_median(),
            book: OrderBook::new(grid, p0),
            fundamental: FundamentalProcess::new(&config.fundamental),
            agents,
            tracked,
            classes,
            dealer,
            strategy,
            ewma: EwmaVariance::new(config.sim.ewma_alpha),
            prices: vec![p0],
            t: 0,
            phase: Phase::Free,
            offsets,
            scheduler: stream(seed, Stream::Scheduler),
            expiry: stream(seed, Stream::Expiry),
            fundamental_rng: stream(seed, Stream::Fundamental),
            decisions: stream(seed, Stream::Decisions),
            seed,
            initial_holdings,
            initial_dealer_wealth,
            initial_class_wealth,
            series: Vec::new(),
            trades: Vec::new(),
        })
    }

    pub fn book(&self) -> &OrderBook {
        &self.book
    }

    pub fn agents(&self) -> &[StylisedAgent] {
        &self.agents
    }

    pub fn dealer(&self) -> &DealerState {
        &self.dealer
    }

    pub fn time(&self) -> u64 {
        self.t
    }

    pub fn price(&self) -> f64 {
        *self.prices.last().expect("price history starts non-empty")
    }

    pub fn variance(&self) -> f64 {
        self.ewma.value
    }

    pub fn series(&self) -> &[StepRecord] {
        &self.series
    }

    pub fn holdings(&self) -> Holdings {
        Holdings {
            cash: self.agents.iter().map(|a| a.cash).sum::<i64>() + self.dealer.cash,
            stock: self.agents.iter().map(|a| a.stock).sum::<i64>() + self.dealer.inventory,
        }
    }

    fn submit(
        &mut self,
        agent: AgentId,
        side: Side,
        price: crate::lob::TickPrice,
        quantity: u64,
    ) -> Vec<Trade> {
        let sub = self
            .book
            .submit(NewOrder {
                agent,
                side,
                price,
                quantity,
                at: self.t,
            })
            .expect("quantities and prices are validated before submission");
        if agent == DEALER_ID && sub.resting > 0 {
            self.dealer.resting.push(sub.order_id);
        }
        sub.trades
    }

    fn dealer_turn(&mut self) -> Vec<Trade> {
        for id in std::mem::take(&mut self.dealer.resting) {
            self.book.cancel(id);
        }
        let quotes = self.strategy.quote(
            self.price(),
            self.dealer.inventory,
            self.ewma.value,
            self.grid,
        );
        self.phase = Phase::DealerAsk(quotes.ask);
        match quotes.bid {
            Some(bid) => self.submit(DEALER_ID, Side::Bid, bid.price, bid.size),
            None => Vec::new(),
        }
    }

    fn stylised_turn(&mut self, index: usize) -> Vec<Trade> {
        let draws = agents::draw_decision(&self.agents[index], &self.offsets, &mut self.decisions);
        let view = MarketView {
            price: *self.prices.last().expect("non-empty"),
            fundamental: self.fundamental.value(),
            history: &self.prices,
            variance: self.ewma.value,
            best_bid: self.book.best_bid(),
            best_ask: self.book.best_ask(),
            grid: self.grid,
        };
        let decision = agents::decide(&mut self.agents[index], &view, &draws, self.offset_median);
        match decision {
            Decision::Order {
                side,
                quantity,
                price,
            } => {
                let id = self.agents[index].id;
                self.submit(id, side, price, quantity)
            }
            Decision::Hold | Decision::Bankrupt => Vec::new(),
        }
    }

    fn settle(&mut self, trade: &Trade) {
        let notional = trade.notional_ticks();
        let q = trade.quantity as i64;
        for (id, side) in [(trade.buyer, Side::Bid), (trade.seller, Side::Ask)] {
            let (dq, dc) = match side {
                Side::Bid => (q, -notional),
                Side::Ask => (-q, notional),
            };
            if id == DEALER_ID {
                self.dealer.record(trade, side);
            } else {
                let idx = id.0 as usize - 1;
                let agent = &mut self.agents[idx];
                agent.stock += dq;
                agent.cash += dc;
                if self.tracked[idx] {
                    let c = &mut self.classes[class_index(agent.kind)];
                    c.stock += dq;
                    c.cash += dc;
                }
            }
        }
        self.trades.push(TradeRecord {
            t: trade.at,
            price: trade.price.to_currency(self.grid),
            price_ticks: trade.price.ticks(),
            quantity: trade.quantity,
            buyer: trade.buyer.0,
            seller: trade.seller.0,
            aggressor: trade.aggressor,
        });
    }

    /// Advances one timestamp.
    pub fn step(&mut self) -> &StepRecord {
        let u: f64 = self.expiry.random();
        self.book.expire_orders(u, self.omega, self.tau);
        self.fundamental.step(&mut self.fundamental_rng);

        let (actor, trades) = match self.phase {
            Phase::DealerAsk(ask) => {
                self.phase = Phase::Cooldown;
                let trades = match ask {
                    Some(a) => self.submit(DEALER_ID, Side::Ask, a.price, a.size),
                    None => Vec::new(),
                };
                (Actor::DealerAsk, trades)
            }
            phase => {
                // always two scheduler draws so the schedule is the same for
                // every dealer strategy
                let u_dealer: f64 = self.scheduler.random();
                let pick: f64 = self.scheduler.random();
                let dealer_turn = phase == Phase::Free && u_dealer < self.dealer_prob;
                if dealer_turn || self.agents.is_empty() {
                    if dealer_turn {
                        (Actor::DealerBid, self.dealer_turn())
                    } else {
                        self.phase = Phase::Free;
                        (Actor::Stylised(AgentKind::Noise), Vec::new())
                    }
                } else {
                    self.phase = Phase::Free;
                    let index =
                        ((pick * self.agents.len() as f64) as usize).min(self.agents.len() - 1);
                    let kind = self.agents[index].kind;
                    (Actor::Stylised(kind), self.stylised_turn(index))
                }
            }
        };

        let mut volume = 0;
        for trade in &trades {
            volume += trade.quantity;
            self.settle(trade);
        }

        let prev = self.price();
        let price = self.book.current_price(!trades.is_empty());
        self.ewma.update((price / prev).ln());
        self.prices.push(price);

        let class_wealth =
            |c: &ClassTotals| c.stock as f64 * price + c.cash as f64 * self.grid.size();
        let record = StepRecord {
            t: self.t,
            actor,
            price,
            fundamental: self.fundamental.value(),
            ewma_var: self.ewma.value,
            volume,
            dealer_inventory: self.dealer.inventory,
            dealer_wealth: self.dealer.wealth(price, self.grid),
            fundamentalist_wealth: class_wealth(&self.classes[0]),
            chartist_wealth: class_wealth(&self.classes[1]),
            noise_wealth: class_wealth(&self.classes[2]),
        };
        self.t += 1;
        self.series.push(record);
        self.series.last().expect("just pushed")
    }

    pub fn finish(self) -> RunOutput {
        let final_holdings = self.holdings();
        RunOutput {
            seed: self.seed,
            tick: self.grid.size(),
            initial_price: self.prices[0],
            initial_dealer_wealth: self.initial_dealer_wealth,
            initial_class_wealth: self.initial_class_wealth,
            bankrupt_agents: self.agents.iter().filter(|a| a.bankrupt).count(),
            series: self.series,
            trades: self.trades,
            dealer_fills: self.dealer.fills,
            initial_holdings: self.initial_holdings,
            final_holdings,
        }
    }
}

/// Runs `config.sim.steps` timestamps with the given run seed.
pub fn run_simulation(config: &SimConfig, seed: u64) -> Result<RunOutput, ConfigError> {
    let mut market = Market::new(config, seed)?;
    for _ in 0..config.sim.steps {
        market.step();
    }
    Ok(market.finish())
}
