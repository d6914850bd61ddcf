//! Limit order book with price-time priority on a fixed tick grid.
//!
//! Prices are stored as integer tick counts so that every resting price is an
//! exact multiple of the tick size and cash flows (`ticks * quantity`) are
//! exact integers. Orders are limit-only; an incoming order trades against the
//! opposite side while it crosses, at the resting order's price, and any
//! remainder rests with its original id.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LobError {
    #[error("order quantity must be positive")]
    ZeroQuantity,
    #[error("price must be at least one tick, got {0} ticks")]
    NonPositivePrice(i64),
    #[error("price {price} is not a multiple of tick size {tick}")]
    OffGrid { price: f64, tick: f64 },
    #[error("tick size must be positive and finite, got {0}")]
    InvalidTick(f64),
}

/// Price expressed as a whole number of ticks. Always strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i64")]
pub struct TickPrice(i64);

impl TickPrice {
    pub fn new(ticks: i64) -> Result<Self, LobError> {
        if ticks < 1 {
            return Err(LobError::NonPositivePrice(ticks));
        }
        Ok(TickPrice(ticks))
    }

    pub fn ticks(self) -> i64 {
        self.0
    }

    pub fn to_currency(self, grid: TickGrid) -> f64 {
        self.0 as f64 * grid.size()
    }

    /// The next price one tick higher.
    pub fn up(self) -> TickPrice {
        TickPrice(self.0 + 1)
    }
}

impl TryFrom<i64> for TickPrice {
    type Error = LobError;

    fn try_from(ticks: i64) -> Result<Self, Self::Error> {
        TickPrice::new(ticks)
    }
}

impl From<TickPrice> for i64 {
    fn from(p: TickPrice) -> i64 {
        p.0
    }
}

impl fmt::Display for TickPrice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}t", self.0)
    }
}

/// The tick size Δ of the price grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TickGrid {
    size: f64,
}

impl TickGrid {
    pub fn new(size: f64) -> Result<Self, LobError> {
        if !(size.is_finite() && size > 0.0) {
            return Err(LobError::InvalidTick(size));
        }
        Ok(TickGrid { size })
    }

    pub fn size(self) -> f64 {
        self.size
    }

    /// Rounds a raw currency price to the nearest grid point, ties away from
    /// zero, with a floor of one tick.
    pub fn snap(self, raw: f64) -> TickPrice {
        let scaled = raw / self.size;
        // Division by a decimal tick leaves exact halves slightly short of .5.
        let nudged = scaled + scaled.signum() * 1e-9;
        let ticks = nudged.round();
        if ticks < 1.0 {
            TickPrice(1)
        } else if ticks >= i64::MAX as f64 {
            TickPrice(i64::MAX)
        } else {
            TickPrice(ticks as i64)
        }
    }

    /// Converts a price that must already sit on the grid.
    pub fn exact(self, price: f64) -> Result<TickPrice, LobError> {
        let scaled = price / self.size;
        let ticks = scaled.round();
        if !price.is_finite() || (scaled - ticks).abs() > 1e-6 {
            return Err(LobError::OffGrid {
                price,
                tick: self.size,
            });
        }
        TickPrice::new(ticks as i64)
    }
}

pub fn snap_to_grid(raw_price: f64, tick: f64) -> Result<TickPrice, LobError> {
    Ok(TickGrid::new(tick)?.snap(raw_price))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Bid,
    Ask,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Bid => Side::Ask,
            Side::Ask => Side::Bid,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Bid => "bid",
            Side::Ask => "ask",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct OrderId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AgentId(pub u32);

/// An order as submitted, before the book assigns it an id.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewOrder {
    pub agent: AgentId,
    pub side: Side,
    pub price: TickPrice,
    pub quantity: u64,
    pub at: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Order {
    pub id: OrderId,
    pub agent: AgentId,
    pub side: Side,
    pub price: TickPrice,
    pub quantity: u64,
    pub submitted_at: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trade {
    pub price: TickPrice,
    pub quantity: u64,
    pub buyer: AgentId,
    pub seller: AgentId,
    pub buy_order: OrderId,
    pub sell_order: OrderId,
    /// Side of the incoming (aggressing) order.
    pub aggressor: Side,
    pub at: u64,
}

impl Trade {
    /// Cash moved from buyer to seller, in tick units.
    pub fn notional_ticks(&self) -> i64 {
        self.price.ticks() * self.quantity as i64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Submission {
    pub order_id: OrderId,
    pub trades: Vec<Trade>,
    /// Quantity left resting on the book, zero if fully filled.
    pub resting: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSnapshot {
    pub price: f64,
    pub quantity: u64,
    pub orders: usize,
}

/// Top-of-book view used for debug logging.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BookSnapshot {
    pub t: u64,
    pub bids: Vec<LevelSnapshot>,
    pub asks: Vec<LevelSnapshot>,
}

type Levels = BTreeMap<i64, VecDeque<Order>>;

#[derive(Debug, Clone)]
pub struct OrderBook {
    grid: TickGrid,
    bids: Levels,
    asks: Levels,
    /// Every resting order keyed by id; iteration order is age order.
    index: BTreeMap<OrderId, (Side, TickPrice)>,
    next_id: u64,
    last_trade: Option<TickPrice>,
    prev_price: f64,
}

impl OrderBook {
    pub fn new(grid: TickGrid, initial_price: f64) -> Self {
        OrderBook {
            grid,
            bids: BTreeMap::new(),
            asks: BTreeMap::new(),
            index: BTreeMap::new(),
            next_id: 1,
            last_trade: None,
            prev_price: initial_price,
        }
    }

    pub fn grid(&self) -> TickGrid {
        self.grid
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn best_bid(&self) -> Option<TickPrice> {
        self.bids.keys().next_back().map(|&t| TickPrice(t))
    }

    pub fn best_ask(&self) -> Option<TickPrice> {
        self.asks.keys().next().map(|&t| TickPrice(t))
    }

    pub fn last_trade_price(&self) -> Option<TickPrice> {
        self.last_trade
    }

    pub fn prev_price(&self) -> f64 {
        self.prev_price
    }

    pub fn get(&self, id: OrderId) -> Option<&Order> {
        let (side, price) = self.index.get(&id)?;
        self.levels(*side)
            .get(&price.ticks())?
            .iter()
            .find(|o| o.id == id)
    }

    /// Resting orders of one side in priority order.
    pub fn orders(&self, side: Side) -> Vec<&Order> {
        match side {
            Side::Bid => self.bids.values().rev().flatten().collect(),
            Side::Ask => self.asks.values().flatten().collect(),
        }
    }

    fn levels(&self, side: Side) -> &Levels {
        match side {
            Side::Bid => &self.bids,
            Side::Ask => &self.asks,
        }
    }

    fn levels_mut(&mut self, side: Side) -> &mut Levels {
        match side {
            Side::Bid => &mut self.bids,
            Side::Ask => &mut self.asks,
        }
    }

    /// Best opposite price the incoming order can trade against, if it crosses.
    fn crossing_level(&self, side: Side, limit: TickPrice) -> Option<i64> {
        match side {
            Side::Bid => self
                .asks
                .keys()
                .next()
                .copied()
                .filter(|&ask| ask <= limit.ticks()),
            Side::Ask => self
                .bids
                .keys()
                .next_back()
                .copied()
                .filter(|&bid| bid >= limit.ticks()),
        }
    }

    pub fn submit(&mut self, order: NewOrder) -> Result<Submission, LobError> {
        if order.quantity == 0 {
            return Err(LobError::ZeroQuantity);
        }
        let id = OrderId(self.next_id);
        self.next_id += 1;

        let mut remaining = order.quantity;
        let mut trades = Vec::new();
        let opposite = order.side.opposite();

        while remaining > 0 {
            let Some(level_ticks) = self.crossing_level(order.side, order.price) else {
                break;
            };
            let levels = self.levels_mut(opposite);
            let level = levels.get_mut(&level_ticks).expect("level exists");
            let resting = level.front_mut().expect("levels are never empty");
            let fill = remaining.min(resting.quantity);
            resting.quantity -= fill;
            remaining -= fill;

            let (buyer, seller, buy_order, sell_order) = match order.side {
                Side::Bid => (order.agent, resting.agent, id, resting.id),
                Side::Ask => (resting.agent, order.agent, resting.id, id),
            };
            trades.push(Trade {
                price: TickPrice(level_ticks),
                quantity: fill,
                buyer,
                seller,
                buy_order,
                sell_order,
                aggressor: order.side,
                at: order.at,
            });

            if resting.quantity == 0 {
                let done = level.pop_front().expect("front exists");
                if level.is_empty() {
                    levels.remove(&level_ticks);
                }
                self.index.remove(&done.id);
            }
        }

        if let Some(last) = trades.last() {
            self.last_trade = Some(last.price);
        }

        if remaining > 0 {
            let resting = Order {
                id,
                agent: order.agent,
                side: order.side,
                price: order.price,
                quantity: remaining,
                submitted_at: order.at,
            };
            self.levels_mut(order.side)
                .entry(order.price.ticks())
                .or_default()
                .push_back(resting);
            self.index.insert(id, (order.side, order.price));
        }

        Ok(Submission {
            order_id: id,
            trades,
            resting: remaining,
        })
    }

    pub fn cancel(&mut self, id: OrderId) -> Option<Order> {
        let (side, price) = self.index.remove(&id)?;
        let levels = self.levels_mut(side);
        let level = levels.get_mut(&price.ticks())?;
        let pos = level.iter().position(|o| o.id == id)?;
        let order = level.remove(pos);
        if level.is_empty() {
            levels.remove(&price.ticks());
        }
        order
    }

    /// With `u < omega`, removes the `tau` oldest resting orders across both
    /// sides (all of them if fewer rest).
    pub fn expire_orders(&mut self, u: f64, omega: f64, tau: usize) -> Vec<Order> {
        if u >= omega {
            return Vec::new();
        }
        let oldest: Vec<OrderId> = self.index.keys().take(tau).copied().collect();
        oldest
            .into_iter()
            .filter_map(|id| self.cancel(id))
            .collect()
    }

    /// Market price for the step: the last trade price if this step traded,
    /// else the mid when both sides exist, else the previous price. The
    /// result becomes the new previous price.
    pub fn current_price(&mut self, traded_this_step: bool) -> f64 {
        let price = match (traded_this_step, self.last_trade) {
            (true, Some(last)) => last.to_currency(self.grid),
            _ => match (self.best_bid(), self.best_ask()) {
                (Some(b), Some(a)) => (b.ticks() + a.ticks()) as f64 * 0.5 * self.grid.size(),
                _ => self.prev_price,
            },
        };
        self.prev_price = price;
        price
    }

    pub fn snapshot(&self, t: u64, depth: usize) -> BookSnapshot {
        let level = |(&ticks, orders): (&i64, &VecDeque<Order>)| LevelSnapshot {
            price: ticks as f64 * self.grid.size(),
            quantity: orders.iter().map(|o| o.quantity).sum(),
            orders: orders.len(),
        };
        BookSnapshot {
            t,
            bids: self.bids.iter().rev().take(depth).map(level).collect(),
            asks: self.asks.iter().take(depth).map(level).collect(),
        }
    }
}
