//! Quote size against inventory for two skew values.

use serde::{Deserialize, Serialize};

use crate::dealer::ir_size_curve;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkewCurveRow {
    pub inventory: i64,
    /// Size on the side that adds to the position, for the low skew.
    pub size_low: f64,
    pub size_high: f64,
}

/// Unrounded size on the inventory side, `phi_max * exp(-|eta| * |q|)`, for
/// every `q` in `q_range`. Skews are given as magnitudes.
pub fn emit_skew_curve(
    phi_max: u64,
    skew_low: f64,
    skew_high: f64,
    q_range: impl IntoIterator<Item = i64>,
) -> Vec<SkewCurveRow> {
    let phi = phi_max as f64;
    let size = |q: i64, skew: f64| {
        let eta = -skew.abs();
        let (bid, ask) = ir_size_curve(q, phi, phi, eta, eta);
        if q >= 0 {
            bid
        } else {
            ask
        }
    };
    q_range
        .into_iter()
        .map(|q| SkewCurveRow {
            inventory: q,
            size_low: size(q, skew_low),
            size_high: size(q, skew_high),
        })
        .collect()
}
