//! Inputs shared by the benchmarks under `benches/`.

use abm_core::lob::NewOrder;
use abm_core::{AgentId, Side, TickPrice};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n` limit orders scattered within `half_width` ticks of `centre`.
pub fn order_stream(n: usize, centre: i64, half_width: i64, seed: u64) -> Vec<NewOrder> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| NewOrder {
            agent: AgentId(rng.random_range(1..1000)),
            side: if rng.random_bool(0.5) {
                Side::Bid
            } else {
                Side::Ask
            },
            price: TickPrice::new(centre + rng.random_range(-half_width..=half_width))
                .expect("positive tick"),
            quantity: rng.random_range(1..=20),
            at: i as u64,
        })
        .collect()
}
