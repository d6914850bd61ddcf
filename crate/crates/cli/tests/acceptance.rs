//! Acceptance checks, one PASS/FAIL line per criterion.
//!
//! Exact criteria (1-7, 12) make the target fail. The directional
//! agent-based criteria (8-11) are reported but only fail the target when
//! `ACCEPTANCE_STRICT=1` is set.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;

use abm_core::dealer::{ir_size_curve, optimal_spread, reservation_price, unit_skew};
use abm_core::experiments::{
    compare_baselines, emit_skew_curve, run_sweep, Axis, PointResult, SweepResult, SweepSpec,
};
use abm_core::lob::NewOrder;
use abm_core::prob_sim::wealth_histogram;
use abm_core::stats::{correlation, moments, spearman};
use abm_core::{
    AgentId, DealerKind, Market, OrderBook, ProbSimParams, Side, SimConfig, TickGrid, TickPrice,
    Variant,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 42;
const DESK_RUNS: u64 = 20;
const DESK_STEPS: u64 = 10_000;

const LOB_STREAMS: usize = 10_000;
const LOB_MAX_ORDERS: usize = 50;
const CLOSED_FORM_REL: f64 = 1e-9;
const SPREAD_ABS: f64 = 1e-12;
const STATS_REL: f64 = 1e-10;
const PROB_RUNS: u64 = 1000;
/// "Much greater" for dealer wealth volatility.
const MUCH_GREATER: f64 = 2.0;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome {
            pass,
            detail: detail.into(),
        }
    }
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

// ---------------------------------------------------------------- 1

#[derive(Debug, Clone, Copy, PartialEq)]
struct TapeEntry {
    price: i64,
    quantity: u64,
    buy: usize,
    sell: usize,
    aggressor: Side,
}

struct Resting {
    index: usize,
    side: Side,
    price: i64,
    quantity: u64,
}

/// Scans every resting order for the best counterparty on each fill.
fn reference_tape(orders: &[(Side, i64, u64)]) -> (Vec<TapeEntry>, Vec<(Side, i64, u64)>) {
    let mut book: Vec<Resting> = Vec::new();
    let mut tape = Vec::new();
    for (index, &(side, price, quantity)) in orders.iter().enumerate() {
        let mut left = quantity;
        while left > 0 {
            let mut best: Option<usize> = None;
            for (i, r) in book.iter().enumerate() {
                let crosses = match side {
                    Side::Bid => r.side == Side::Ask && r.price <= price,
                    Side::Ask => r.side == Side::Bid && r.price >= price,
                };
                if !crosses {
                    continue;
                }
                best = match best {
                    None => Some(i),
                    Some(j) => {
                        let b = &book[j];
                        let better = match side {
                            Side::Bid => r.price < b.price,
                            Side::Ask => r.price > b.price,
                        };
                        let same_earlier = r.price == b.price && r.index < b.index;
                        Some(if better || same_earlier { i } else { j })
                    }
                };
            }
            let Some(i) = best else { break };
            let fill = left.min(book[i].quantity);
            let (buy, sell) = match side {
                Side::Bid => (index, book[i].index),
                Side::Ask => (book[i].index, index),
            };
            tape.push(TapeEntry {
                price: book[i].price,
                quantity: fill,
                buy,
                sell,
                aggressor: side,
            });
            left -= fill;
            book[i].quantity -= fill;
            if book[i].quantity == 0 {
                book.remove(i);
            }
        }
        if left > 0 {
            book.push(Resting {
                index,
                side,
                price,
                quantity: left,
            });
        }
    }
    let mut rest: Vec<(Side, i64, u64)> =
        book.iter().map(|r| (r.side, r.price, r.quantity)).collect();
    rest.sort_by_key(|&(s, p, q)| (s == Side::Ask, p, q));
    (tape, rest)
}

fn engine_tape(orders: &[(Side, i64, u64)]) -> (Vec<TapeEntry>, Vec<(Side, i64, u64)>) {
    let grid = TickGrid::new(0.1).unwrap();
    let mut book = OrderBook::new(grid, 100.0);
    let mut index_of = BTreeMap::new();
    let mut tape = Vec::new();
    for (index, &(side, price, quantity)) in orders.iter().enumerate() {
        let sub = book
            .submit(NewOrder {
                agent: AgentId(index as u32),
                side,
                price: TickPrice::new(price).unwrap(),
                quantity,
                at: index as u64,
            })
            .unwrap();
        index_of.insert(sub.order_id, index);
        for t in sub.trades {
            tape.push(TapeEntry {
                price: t.price.ticks(),
                quantity: t.quantity,
                buy: index_of[&t.buy_order],
                sell: index_of[&t.sell_order],
                aggressor: t.aggressor,
            });
        }
    }
    let mut rest: Vec<(Side, i64, u64)> = [Side::Bid, Side::Ask]
        .into_iter()
        .flat_map(|s| {
            book.orders(s)
                .into_iter()
                .map(|o| (o.side, o.price.ticks(), o.quantity))
                .collect::<Vec<_>>()
        })
        .collect();
    rest.sort_by_key(|&(s, p, q)| (s == Side::Ask, p, q));
    (tape, rest)
}

fn lob_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut trades = 0;
    for stream in 0..LOB_STREAMS {
        let n = rng.random_range(1..=LOB_MAX_ORDERS);
        let orders: Vec<(Side, i64, u64)> = (0..n)
            .map(|_| {
                let side = if rng.random_bool(0.5) {
                    Side::Bid
                } else {
                    Side::Ask
                };
                (side, rng.random_range(995..=1005), rng.random_range(1..=20))
            })
            .collect();
        let expected = reference_tape(&orders);
        let got = engine_tape(&orders);
        if got != expected {
            return Outcome::new(false, format!("stream {stream} differs"));
        }
        trades += expected.0.len();
    }
    Outcome::new(
        true,
        format!("{LOB_STREAMS} streams, {trades} trades identical"),
    )
}

// ---------------------------------------------------------------- 2

fn conservation() -> Outcome {
    for kind in DealerKind::ALL {
        for seed in [1, 2, 3] {
            let mut config = SimConfig::default();
            config.sim.steps = 5000;
            config.sim.dealer_prob = Some(0.3);
            config.dealer.kind = kind;
            let mut market = Market::new(&config, seed).unwrap();
            let start = market.holdings();
            for _ in 0..config.sim.steps {
                market.step();
                if market.holdings() != start {
                    return Outcome::new(
                        false,
                        format!("{} seed {seed}: drift at t={}", kind.name(), market.time()),
                    );
                }
            }
            let out = market.finish();
            if out.trades.is_empty() || out.final_holdings != out.initial_holdings {
                return Outcome::new(false, format!("{} seed {seed}", kind.name()));
            }
        }
    }
    Outcome::new(true, "cash and stock fixed at every step, 9 runs")
}

// ---------------------------------------------------------------- 3

fn closed_forms() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    for _ in 0..1000 {
        let p = rng.random_range(1.0..5000.0);
        let q: i64 = rng.random_range(-10_000..=10_000);
        let gamma = rng.random_range(1e-3..1.0);
        let var = rng.random_range(1e-6..10.0);
        let r = reservation_price(p, q, gamma, var);
        let tilt_ok = match q.signum() {
            1 => r < p,
            -1 => r > p,
            _ => r == p,
        };
        let expected = p - q as f64 * gamma * var;
        if !tilt_ok || !rel_close(r, expected, CLOSED_FORM_REL) {
            return Outcome::new(
                false,
                format!("reservation p={p} q={q} gamma={gamma} var={var}: {r}"),
            );
        }
    }
    for phi in [1u64, 2, 15, 1000, 2500, 5000, 7500, 10_000] {
        let eta = unit_skew(phi);
        let q = phi as i64;
        let (bid, _) = ir_size_curve(q, phi as f64, phi as f64, eta, eta);
        let (_, ask) = ir_size_curve(-q, phi as f64, phi as f64, eta, eta);
        if !rel_close(bid, 1.0, CLOSED_FORM_REL) || !rel_close(ask, 1.0, CLOSED_FORM_REL) {
            return Outcome::new(false, format!("phi_max={phi}: sizes {bid}, {ask}"));
        }
    }
    Outcome::new(true, "1000 reservation tilts; unit size at |q| = phi_max")
}

// ---------------------------------------------------------------- 4

fn spread_value() -> Outcome {
    let got = optimal_spread(0.1, 1.44, 0.6);
    let expected = 0.144 + 20.0 * (7.0f64 / 6.0).ln();
    Outcome::new(
        (got - expected).abs() <= SPREAD_ABS,
        format!("{got:.15} vs {expected:.15}"),
    )
}

// ---------------------------------------------------------------- 5

fn files_under(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path
                    .strip_prefix(dir)
                    .unwrap()
                    .to_string_lossy()
                    .into_owned();
                out.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn run_cli(args: &[&str], out: &Path) -> bool {
    Command::new(env!("CARGO_BIN_EXE_dealer-abm"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let spec = tmp.path().join("spec.toml");
    fs::write(
        &spec,
        "axis = \"risk_aversion_2_over_gamma\"\nvalues = [5.0, 20.0, 80.0]\n",
    )
    .unwrap();
    let spec = spec.to_str().unwrap();
    // the second invocation uses a different worker count
    let jobs: [(&str, Vec<&str>, Vec<&str>); 3] = [
        (
            "run",
            vec!["run", "--set", "sim.dealer_prob=0.3"],
            vec!["run", "--set", "sim.dealer_prob=0.3"],
        ),
        (
            "sweep",
            vec![
                "sweep",
                spec,
                "--runs",
                "3",
                "--steps",
                "3000",
                "--workers",
                "1",
            ],
            vec![
                "sweep",
                spec,
                "--runs",
                "3",
                "--steps",
                "3000",
                "--workers",
                "4",
            ],
        ),
        (
            "probsim",
            vec!["probsim", "--workers", "1"],
            vec!["probsim", "--workers", "4"],
        ),
    ];
    let mut notes = Vec::new();
    for (name, first, second) in jobs {
        let a = tmp.path().join(format!("{name}-a"));
        let b = tmp.path().join(format!("{name}-b"));
        if !run_cli(&first, &a) || !run_cli(&second, &b) {
            return Outcome::new(false, format!("{name}: command failed"));
        }
        let (fa, fb) = (files_under(&a), files_under(&b));
        if fa.is_empty() || fa != fb {
            return Outcome::new(false, format!("{name}: outputs differ"));
        }
        notes.push(format!("{name} {} files", fa.len()));
    }
    Outcome::new(true, format!("byte-identical: {}", notes.join(", ")))
}

// ---------------------------------------------------------------- 6

fn naive_moments(x: &[f64]) -> (f64, f64, f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let central = |k: i32| x.iter().map(|v| (v - mean).powi(k)).sum::<f64>() / n;
    let m2 = central(2);
    let std = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    (
        mean,
        std,
        central(3) / m2.powf(1.5),
        central(4) / (m2 * m2) - 3.0,
    )
}

fn naive_correlation(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

fn statistics_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    for i in 0..1000 {
        let n = rng.random_range(4..=400);
        let scale = 10f64.powf(rng.random_range(-3.0..1.0));
        let shift = rng.random_range(-0.01..0.01);
        let x: Vec<f64> = (0..n)
            .map(|_| shift + scale * rng.random_range(-1.0..1.0))
            .collect();
        let y: Vec<f64> = x
            .iter()
            .map(|v| 0.5 * v + scale * rng.random_range(-1.0..1.0))
            .collect();
        let m = moments(&x).unwrap();
        let (mean, std, skew, kurt) = naive_moments(&x);
        let ok = rel_close(m.mean / scale, mean / scale, STATS_REL)
            && rel_close(m.std / scale, std / scale, STATS_REL)
            && rel_close(m.skewness.unwrap(), skew, STATS_REL)
            && rel_close(m.excess_kurtosis.unwrap(), kurt, STATS_REL)
            && rel_close(
                correlation(&x, &y).unwrap(),
                naive_correlation(&x, &y),
                STATS_REL,
            );
        if !ok {
            return Outcome::new(false, format!("series {i} (n={n})"));
        }
    }
    Outcome::new(
        true,
        "1000 series: mean, std, skewness, kurtosis, correlation",
    )
}

// ---------------------------------------------------------------- 7

fn probabilistic() -> Outcome {
    let report = wealth_histogram(
        &ProbSimParams::default(),
        &Variant::ALL,
        PROB_RUNS,
        SEED,
        50,
    )
    .unwrap();
    let v = |x| report.variant(x).unwrap();
    let (unit, gamma, naive, ir) = (
        v(Variant::AsUnit),
        v(Variant::AsGamma),
        v(Variant::Naive15),
        v(Variant::Ir),
    );
    let checks = [
        gamma.mean_wealth < unit.mean_wealth,
        naive.mean_wealth > gamma.mean_wealth,
        ir.std_wealth < naive.std_wealth,
        unit.std_inventory < gamma.std_inventory,
    ];
    Outcome::new(
        checks.iter().all(|c| *c),
        format!(
            "mean W as_unit {:.1} as_gamma {:.1} naive15 {:.1}; std W ir {:.1} naive15 {:.1}; std q as_unit {:.2} as_gamma {:.2}",
            unit.mean_wealth, gamma.mean_wealth, naive.mean_wealth, ir.std_wealth, naive.std_wealth,
            unit.std_inventory, gamma.std_inventory
        ),
    )
}

// ---------------------------------------------------------------- 8-11

fn desk_base() -> SimConfig {
    let mut c = SimConfig::default();
    c.sim.steps = DESK_STEPS;
    c
}

fn mean_of(p: &PointResult, metric: &str) -> f64 {
    p.mean(metric).unwrap_or(f64::NAN)
}

fn baselines(points: &[PointResult]) -> Outcome {
    let get = |d: DealerKind| points.iter().find(|p| p.dealer == d).unwrap();
    let (naive, avs, ir) = (
        get(DealerKind::Naive),
        get(DealerKind::As),
        get(DealerKind::Ir),
    );
    let vol = |p| mean_of(p, "dealer_volatility");
    let corr = |p| mean_of(p, "corr_wealth_underlying");
    let sharpe = |p| mean_of(p, "dealer_sharpe");
    let vol_ok = vol(naive) >= MUCH_GREATER * vol(avs) && vol(avs) >= vol(ir);
    let corr_ok = corr(naive) > corr(avs) && corr(avs) > corr(ir).abs();
    let sharpe_ok = sharpe(avs) > sharpe(naive);
    Outcome::new(
        vol_ok && corr_ok && sharpe_ok,
        format!(
            "vol naive/as/ir {:.3e}/{:.3e}/{:.3e} [{}]; corr {:.3}/{:.3}/{:.3} [{}]; sharpe as {:.2e} naive {:.2e} [{}]",
            vol(naive), vol(avs), vol(ir), ok_str(vol_ok),
            corr(naive), corr(avs), corr(ir), ok_str(corr_ok),
            sharpe(avs), sharpe(naive), ok_str(sharpe_ok)
        ),
    )
}

fn ok_str(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "no"
    }
}

fn grid_series(result: &SweepResult, dealer: DealerKind, metric: &str) -> (Vec<f64>, Vec<f64>) {
    result
        .for_dealer(dealer)
        .into_iter()
        .map(|p| (p.point.value, mean_of(p, metric)))
        .unzip()
}

/// Longest strictly monotone subsequence in the given direction.
fn longest_monotone(y: &[f64], increasing: bool) -> usize {
    let mut best = vec![1usize; y.len()];
    for i in 0..y.len() {
        for j in 0..i {
            let ordered = if increasing { y[j] < y[i] } else { y[j] > y[i] };
            if ordered {
                best[i] = best[i].max(best[j] + 1);
            }
        }
    }
    best.into_iter().max().unwrap_or(0)
}

/// Spearman sign plus at most one grid point out of order.
fn trend(x: &[f64], y: &[f64], increasing: bool) -> (bool, String) {
    let rho = spearman(x, y);
    let sign_ok = rho.is_some_and(|r| if increasing { r > 0.0 } else { r < 0.0 });
    let ok = sign_ok && longest_monotone(y, increasing) + 1 >= y.len();
    let rho = rho.map_or("n/a".to_string(), |r| format!("{r:.2}"));
    (ok, format!("rho {rho} [{}]", ok_str(ok)))
}

fn risk_aversion_returns(result: &SweepResult) -> Outcome {
    let mut pass = true;
    let mut notes = Vec::new();
    for d in [DealerKind::As, DealerKind::Ir] {
        let (x, y) = grid_series(result, d, "dealer_total_return");
        let rho = spearman(&x, &y);
        let ok = rho.is_some_and(|r| r > 0.0);
        pass &= ok;
        notes.push(format!(
            "{} rho {}",
            d.name(),
            rho.map_or("n/a".into(), |r| format!("{r:.2}"))
        ));
    }
    Outcome::new(pass, notes.join(", "))
}

fn market_impact(risk: &SweepResult, phi: &SweepResult) -> Outcome {
    let mut pass = true;
    let mut notes = Vec::new();
    let mut check =
        |label: String, result: &SweepResult, d: DealerKind, metric: &str, increasing: bool| {
            let (x, y) = grid_series(result, d, metric);
            let (ok, note) = trend(&x, &y, increasing);
            pass &= ok;
            notes.push(format!("{label} {note}"));
        };
    check(
        "as vol up in 2/gamma".into(),
        risk,
        DealerKind::As,
        "market_volatility",
        true,
    );
    check(
        "as kurt down in 2/gamma".into(),
        risk,
        DealerKind::As,
        "market_kurtosis",
        false,
    );
    for d in [DealerKind::As, DealerKind::Ir] {
        check(
            format!("{} vol down in phi", d.name()),
            phi,
            d,
            "market_volatility",
            false,
        );
        check(
            format!("{} kurt down in phi", d.name()),
            phi,
            d,
            "market_kurtosis",
            false,
        );
    }
    Outcome::new(pass, notes.join("; "))
}

fn asymmetric(result: &SweepResult) -> Outcome {
    let ir = result.for_dealer(DealerKind::Ir);
    let find = |bid: f64, ask: f64| {
        ir.iter()
            .find(|p| p.point.bid == bid && p.point.ask == ask)
            .unwrap()
    };
    let (sym, skewed) = (find(5000.0, 5000.0), find(10000.0, 1000.0));
    let inventory = mean_of(skewed, "mean_inventory");
    let corr_sym = mean_of(sym, "corr_wealth_underlying").abs();
    let corr_skewed = mean_of(skewed, "corr_wealth_underlying").abs();
    Outcome::new(
        inventory > 0.0 && corr_skewed > corr_sym,
        format!(
            "ir mean inventory {inventory:.2}; |corr| asymmetric {corr_skewed:.4} vs symmetric {corr_sym:.4}"
        ),
    )
}

// ---------------------------------------------------------------- 12

fn skew_curve() -> Outcome {
    let (phi, low, high) = (5000u64, 0.001, 0.004);
    let rows = emit_skew_curve(phi, low, high, -10_000..=10_000);
    for r in &rows {
        let q = r.inventory.unsigned_abs() as f64;
        let lo = phi as f64 * (-low * q).exp();
        let hi = phi as f64 * (-high * q).exp();
        let close = |a: f64, b: f64| (a - b).abs() <= CLOSED_FORM_REL * b.abs();
        if !close(r.size_low, lo) || !close(r.size_high, hi) {
            return Outcome::new(
                false,
                format!("q={}: {} {}", r.inventory, r.size_low, r.size_high),
            );
        }
        if r.inventory > 0 && r.size_high > r.size_low {
            return Outcome::new(false, format!("q={}: high skew above low", r.inventory));
        }
    }
    Outcome::new(
        true,
        format!("{} points match; high <= low for q > 0", rows.len()),
    )
}

// ----------------------------------------------------------------

fn sweep(axis: Axis, base: &SimConfig, pairs: Option<Vec<[f64; 2]>>) -> SweepResult {
    let mut spec = SweepSpec::new(axis, base.clone());
    spec.runs = DESK_RUNS;
    spec.seed = SEED;
    spec.pairs = pairs;
    if axis == Axis::PhiMaxAsymmetric {
        spec.dealers = Some(vec![DealerKind::Ir]);
    }
    let result = run_sweep(&spec, 0).unwrap();
    assert_eq!(result.failures(), 0, "{axis} sweep had failed runs");
    result
}

fn main() {
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let mut results: Vec<(u8, bool, Outcome)> = Vec::new();
    let mut record = |n: u8, exact: bool, o: Outcome| {
        println!(
            "criterion {n:>2} {} {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        results.push((n, exact, o));
    };

    record(1, true, lob_oracle());
    record(2, true, conservation());
    record(3, true, closed_forms());
    record(4, true, spread_value());
    record(5, true, determinism());
    record(6, true, statistics_oracle());
    record(7, true, probabilistic());

    let base = desk_base();
    let points = compare_baselines(&base, DESK_RUNS, SEED, 0).unwrap();
    let risk = sweep(Axis::RiskAversion2OverGamma, &base, None);
    let phi = sweep(Axis::PhiMaxSymmetric, &base, None);
    let asym = sweep(
        Axis::PhiMaxAsymmetric,
        &base,
        Some(vec![[5000.0, 5000.0], [10000.0, 1000.0]]),
    );
    record(8, false, baselines(&points));
    record(9, false, risk_aversion_returns(&risk));
    record(10, false, market_impact(&risk, &phi));
    record(11, false, asymmetric(&asym));
    record(12, true, skew_curve());

    let failed = |exact: bool| -> Vec<u8> {
        results
            .iter()
            .filter(|(_, e, o)| *e == exact && !o.pass)
            .map(|(n, _, _)| *n)
            .collect()
    };
    let (exact_fail, directional_fail) = (failed(true), failed(false));
    let passed = results.iter().filter(|(_, _, o)| o.pass).count();
    println!("acceptance: {passed}/{} pass", results.len());
    if !directional_fail.is_empty() {
        println!(
            "directional failures {directional_fail:?} (fatal only with ACCEPTANCE_STRICT=1; \
             desk scale {DESK_RUNS} runs x {DESK_STEPS} steps, seed {SEED})"
        );
    }
    if !exact_fail.is_empty() || (strict && !directional_fail.is_empty()) {
        eprintln!(
            "failing criteria: {:?}",
            [exact_fail, if strict { directional_fail } else { vec![] }].concat()
        );
        std::process::exit(1);
    }
}
