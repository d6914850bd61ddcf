//! Agent-based limit order book market with a liquidity-providing dealer.
//!
//! The crate holds the order book, the stylised trader population, dealer
//! quoting strategies, a probabilistic dealer simulator, statistics and the
//! parameter-sweep harness.

pub mod agents;
pub mod assets;
pub mod config;
pub mod dealer;
pub mod experiments;
pub mod lob;
pub mod market;
pub mod prob_sim;
pub mod rng;
pub mod stats;

pub use agents::{AgentKind, AgentsConfig, StylisedAgent};
pub use assets::{FundamentalConfig, FundamentalProcess};
pub use dealer::{DealerConfig, DealerKind, DealerState, DealerStrategy, Quotes};
pub use lob::{AgentId, OrderBook, OrderId, Side, TickGrid, TickPrice, Trade};
pub use market::{run_simulation, Market, RunOutput, SimConfig};
pub use prob_sim::{ProbSimParams, Variant};
pub use stats::{Moments, SeriesStats};
