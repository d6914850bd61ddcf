//! CSV and JSON writers for runs, sweeps and baseline tables.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use super::metrics::{Aggregate, RunMetrics, SeriesSummary, SERIES};
use super::skew::SkewCurveRow;
use super::{AxisDisplay, PointResult, SweepResult};
use crate::dealer::DealerKind;
use crate::market::{RunOutput, SimConfig};
use crate::prob_sim::{ProbSimParams, ProbSimReport};

fn csv_writer(path: &Path) -> io::Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(
        path,
    )?)))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()
}

#[derive(Serialize)]
struct SeriesRow {
    t: u64,
    actor: &'static str,
    price: f64,
    p_f: f64,
    ewma_var: f64,
    volume: u64,
    dealer_q: i64,
    dealer_wealth: f64,
    fundamentalist_wealth: f64,
    chartist_wealth: f64,
    noise_wealth: f64,
}

#[derive(Serialize)]
struct TradeRow {
    t: u64,
    price: f64,
    quantity: u64,
    buyer: u32,
    seller: u32,
    aggressor: &'static str,
}

#[derive(Serialize)]
struct FillRow {
    t: u64,
    side: &'static str,
    price: f64,
    quantity: u64,
}

#[derive(Serialize)]
struct RunMeta<'a> {
    version: &'static str,
    seed: u64,
    steps: usize,
    trades: usize,
    dealer_fills: usize,
    bankrupt_agents: usize,
    metrics: &'a RunMetrics,
    config: &'a SimConfig,
}

fn side_name(side: crate::lob::Side) -> &'static str {
    match side {
        crate::lob::Side::Bid => "bid",
        crate::lob::Side::Ask => "ask",
    }
}

/// Writes `series.csv`, `trades.csv`, `dealer_fills.csv` and `meta.json`.
pub fn write_run(dir: &Path, config: &SimConfig, out: &RunOutput) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let mut w = csv_writer(&dir.join("series.csv"))?;
    for r in &out.series {
        w.serialize(SeriesRow {
            t: r.t,
            actor: r.actor.code(),
            price: r.price,
            p_f: r.fundamental,
            ewma_var: r.ewma_var,
            volume: r.volume,
            dealer_q: r.dealer_inventory,
            dealer_wealth: r.dealer_wealth,
            fundamentalist_wealth: r.fundamentalist_wealth,
            chartist_wealth: r.chartist_wealth,
            noise_wealth: r.noise_wealth,
        })?;
    }
    w.flush()?;

    let mut w = csv_writer(&dir.join("trades.csv"))?;
    for t in &out.trades {
        w.serialize(TradeRow {
            t: t.t,
            price: t.price,
            quantity: t.quantity,
            buyer: t.buyer,
            seller: t.seller,
            aggressor: side_name(t.aggressor),
        })?;
    }
    w.flush()?;

    let mut w = csv_writer(&dir.join("dealer_fills.csv"))?;
    for f in &out.dealer_fills {
        w.serialize(FillRow {
            t: f.t,
            side: side_name(f.side),
            price: f.price.ticks() as f64 * out.tick,
            quantity: f.quantity,
        })?;
    }
    w.flush()?;

    let metrics = RunMetrics::compute(out);
    write_json(
        &dir.join("meta.json"),
        &RunMeta {
            version: concat!("abm-core ", env!("CARGO_PKG_VERSION")),
            seed: out.seed,
            steps: out.series.len(),
            trades: out.trades.len(),
            dealer_fills: out.dealer_fills.len(),
            bankrupt_agents: out.bankrupt_agents,
            metrics: &metrics,
            config,
        },
    )
}

#[derive(Serialize)]
struct LongRow<'a> {
    axis: &'a str,
    axis_value: f64,
    label: &'a str,
    dealer: &'a str,
    run: u64,
    seed: u64,
    metric: &'a str,
    value: Option<f64>,
}

#[derive(Serialize)]
struct MomentRow<'a> {
    axis_value: f64,
    label: &'a str,
    dealer: &'a str,
    row: &'a str,
    series: &'a str,
    n: Option<usize>,
    total_return: Option<f64>,
    volatility: Option<f64>,
    skewness: Option<f64>,
    kurtosis: Option<f64>,
    sharpe: Option<f64>,
}

fn write_long(path: &Path, axis: &str, points: &[PointResult]) -> io::Result<()> {
    let mut w = csv_writer(path)?;
    for p in points {
        let label = p.point.label();
        for r in &p.runs {
            let Ok(m) = &r.metrics else { continue };
            for (metric, value) in m.flatten() {
                w.serialize(LongRow {
                    axis,
                    axis_value: p.point.value,
                    label: &label,
                    dealer: p.dealer.name(),
                    run: r.run,
                    seed: r.seed,
                    metric: &metric,
                    value,
                })?;
            }
        }
    }
    w.flush()
}

fn write_moments(path: &Path, points: &[PointResult]) -> io::Result<()> {
    let mut w = csv_writer(path)?;
    for p in points {
        let label = p.point.label();
        let ok = p.successful();
        for series in SERIES {
            let summaries: Vec<&SeriesSummary> = ok
                .iter()
                .map(|m| m.series(series).expect("known series"))
                .collect();
            for (r, s) in p.runs.iter().filter(|r| r.metrics.is_ok()).zip(&summaries) {
                let run = r.run.to_string();
                w.serialize(MomentRow {
                    axis_value: p.point.value,
                    label: &label,
                    dealer: p.dealer.name(),
                    row: &run,
                    series,
                    n: Some(s.n),
                    total_return: s.total_return,
                    volatility: s.volatility,
                    skewness: s.skewness,
                    kurtosis: s.kurtosis,
                    sharpe: s.sharpe,
                })?;
            }
            let agg = |f: fn(&SeriesSummary) -> Option<f64>| {
                Aggregate::of(summaries.iter().map(|s| f(s)))
            };
            let fields = [
                agg(|s| s.total_return),
                agg(|s| s.volatility),
                agg(|s| s.skewness),
                agg(|s| s.kurtosis),
                agg(|s| s.sharpe),
            ];
            for (row, pick) in [
                (
                    "mean",
                    (|a: &Aggregate| a.mean) as fn(&Aggregate) -> Option<f64>,
                ),
                ("std", |a: &Aggregate| a.std),
            ] {
                w.serialize(MomentRow {
                    axis_value: p.point.value,
                    label: &label,
                    dealer: p.dealer.name(),
                    row,
                    series,
                    n: Some(summaries.len()),
                    total_return: pick(&fields[0]),
                    volatility: pick(&fields[1]),
                    skewness: pick(&fields[2]),
                    kurtosis: pick(&fields[3]),
                    sharpe: pick(&fields[4]),
                })?;
            }
        }
    }
    w.flush()
}

#[derive(Debug, Serialize)]
pub struct MetricSummary {
    pub metric: String,
    pub n: usize,
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct PointSummary {
    pub axis_value: f64,
    pub label: String,
    pub dealer: DealerKind,
    pub runs: usize,
    pub failures: Vec<RunFailure>,
    pub metrics: Vec<MetricSummary>,
}

#[derive(Debug, Serialize)]
pub struct RunFailure {
    pub run: u64,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Serialize)]
pub struct SweepSummary {
    pub version: &'static str,
    pub axis: String,
    pub display: Option<AxisDisplay>,
    pub runs: u64,
    pub seed: u64,
    pub steps: u64,
    pub failures: usize,
    pub points: Vec<PointSummary>,
}

fn point_summaries(points: &[PointResult]) -> Vec<PointSummary> {
    points
        .iter()
        .map(|p| PointSummary {
            axis_value: p.point.value,
            label: p.point.label(),
            dealer: p.dealer,
            runs: p.runs.len(),
            failures: p
                .runs
                .iter()
                .filter_map(|r| {
                    r.metrics.as_ref().err().map(|e| RunFailure {
                        run: r.run,
                        seed: r.seed,
                        error: e.clone(),
                    })
                })
                .collect(),
            metrics: p
                .aggregates()
                .into_iter()
                .map(|(metric, a)| MetricSummary {
                    metric,
                    n: a.n,
                    mean: a.mean,
                    std: a.std,
                })
                .collect(),
        })
        .collect()
}

impl SweepSummary {
    pub fn of(result: &SweepResult) -> Self {
        SweepSummary {
            version: concat!("abm-core ", env!("CARGO_PKG_VERSION")),
            axis: result.spec.axis.name().to_string(),
            display: Some(result.spec.axis.display()),
            runs: result.spec.runs,
            seed: result.spec.seed,
            steps: result.spec.base.sim.steps,
            failures: result.failures(),
            points: point_summaries(&result.points),
        }
    }
}

/// Writes `results.csv` (long format), `moments.csv` and `summary.json`.
pub fn write_sweep(dir: &Path, result: &SweepResult) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let axis = result.spec.axis.name();
    write_long(&dir.join("results.csv"), axis, &result.points)?;
    write_moments(&dir.join("moments.csv"), &result.points)?;
    write_json(&dir.join("summary.json"), &SweepSummary::of(result))
}

/// One line of the baseline comparison table; means across runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineRow {
    pub dealer: DealerKind,
    pub runs: usize,
    pub failures: usize,
    pub total_return: Option<f64>,
    pub volatility: Option<f64>,
    pub sharpe: Option<f64>,
    pub corr_wealth_underlying: Option<f64>,
    pub corr_wealth_trade: Option<f64>,
    pub mean_inventory: Option<f64>,
    pub mean_abs_inventory: Option<f64>,
    pub dealer_fills: Option<f64>,
}

impl BaselineRow {
    pub fn of(p: &PointResult) -> Self {
        BaselineRow {
            dealer: p.dealer,
            runs: p.runs.len(),
            failures: p.failures(),
            total_return: p.mean("dealer_total_return"),
            volatility: p.mean("dealer_volatility"),
            sharpe: p.mean("dealer_sharpe"),
            corr_wealth_underlying: p.mean("corr_wealth_underlying"),
            corr_wealth_trade: p.mean("corr_wealth_trade"),
            mean_inventory: p.mean("mean_inventory"),
            mean_abs_inventory: p.mean("mean_abs_inventory"),
            dealer_fills: p.mean("dealer_fills"),
        }
    }
}

#[derive(Serialize)]
struct BaselineSummary<'a> {
    version: &'static str,
    runs: u64,
    seed: u64,
    steps: u64,
    table: &'a [BaselineRow],
    points: Vec<PointSummary>,
}

/// Writes `baselines.csv`, `results.csv`, `moments.csv` and `summary.json`.
pub fn write_baselines(
    dir: &Path,
    base: &SimConfig,
    runs: u64,
    seed: u64,
    points: &[PointResult],
) -> io::Result<Vec<BaselineRow>> {
    fs::create_dir_all(dir)?;
    let table: Vec<BaselineRow> = points.iter().map(BaselineRow::of).collect();
    let mut w = csv_writer(&dir.join("baselines.csv"))?;
    for row in &table {
        w.serialize(row)?;
    }
    w.flush()?;
    write_long(&dir.join("results.csv"), "baseline", points)?;
    write_moments(&dir.join("moments.csv"), points)?;
    write_json(
        &dir.join("summary.json"),
        &BaselineSummary {
            version: concat!("abm-core ", env!("CARGO_PKG_VERSION")),
            runs,
            seed,
            steps: base.sim.steps,
            table: &table,
            points: point_summaries(points),
        },
    )?;
    Ok(table)
}

#[derive(Serialize)]
struct TerminalRow {
    variant: &'static str,
    run: u64,
    terminal_wealth: f64,
    terminal_inventory: i64,
}

#[derive(Serialize)]
struct HistogramRow {
    variant: &'static str,
    bin: usize,
    lo: f64,
    hi: f64,
    count: u64,
}

#[derive(Serialize)]
struct VariantMoments {
    variant: &'static str,
    mean_wealth: f64,
    std_wealth: f64,
    mean_inventory: f64,
    std_inventory: f64,
}

#[derive(Serialize)]
struct ProbSimSummary<'a> {
    version: &'static str,
    runs: u64,
    master_seed: u64,
    params: &'a ProbSimParams,
    variants: Vec<VariantMoments>,
}

/// Writes `terminal.csv`, `histogram.csv` and `summary.json`.
pub fn write_probsim(dir: &Path, report: &ProbSimReport) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let mut w = csv_writer(&dir.join("terminal.csv"))?;
    for v in &report.variants {
        for s in &v.samples {
            w.serialize(TerminalRow {
                variant: v.variant.name(),
                run: s.run,
                terminal_wealth: s.terminal_wealth,
                terminal_inventory: s.terminal_inventory,
            })?;
        }
    }
    w.flush()?;

    let mut w = csv_writer(&dir.join("histogram.csv"))?;
    for v in &report.variants {
        let h = &v.histogram;
        for (bin, count) in h.counts.iter().enumerate() {
            w.serialize(HistogramRow {
                variant: v.variant.name(),
                bin,
                lo: h.edges[bin],
                hi: h.edges[bin + 1],
                count: *count,
            })?;
        }
    }
    w.flush()?;

    write_json(
        &dir.join("summary.json"),
        &ProbSimSummary {
            version: concat!("abm-core ", env!("CARGO_PKG_VERSION")),
            runs: report.runs,
            master_seed: report.master_seed,
            params: &report.params,
            variants: report
                .variants
                .iter()
                .map(|v| VariantMoments {
                    variant: v.variant.name(),
                    mean_wealth: v.mean_wealth,
                    std_wealth: v.std_wealth,
                    mean_inventory: v.mean_inventory,
                    std_inventory: v.std_inventory,
                })
                .collect(),
        },
    )
}

/// Writes the skew curve as CSV to any writer.
pub fn write_skew_curve<W: Write>(out: W, rows: &[SkewCurveRow]) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()
}
