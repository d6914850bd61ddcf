use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use abm_core::config::{layered, merge, set_key};
use abm_core::experiments::{
    compare_baselines, emit_skew_curve, run_sweep, write_baselines, write_probsim, write_run,
    write_skew_curve, write_sweep, BaselineRow, SweepSpec,
};
use abm_core::prob_sim::wealth_histogram;
use abm_core::{DealerKind, Market, ProbSimParams, SimConfig, Variant};
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

const DESK_STEPS: u64 = 10_000;
const DESK_RUNS: u64 = 20;

/// Agent-based limit order book simulator with a market-making dealer.
#[derive(Parser)]
#[command(name = "dealer-abm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One agent-based run.
    Run(RunArgs),
    /// A parameter sweep described by a TOML spec file.
    Sweep(SweepArgs),
    /// Naive, AS and IR dealers on the base configuration.
    Baselines(BaselineArgs),
    /// Terminal-wealth distributions from the probabilistic dealer simulator.
    Probsim(ProbSimArgs),
    /// IR quote size against inventory for two skew values.
    SkewCurve(SkewArgs),
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set dealer.gamma=0.05`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    steps: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Use 100 runs of 40,000 steps instead of 20 of 10,000.
    #[arg(long)]
    full_scale: bool,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Dealer strategy: naive, as or ir.
    #[arg(long)]
    dealer: Option<DealerKind>,
    /// Also write `book.jsonl` with this many levels per side after each step.
    #[arg(long, value_name = "DEPTH")]
    book_log: Option<usize>,
}

#[derive(Args)]
struct Parallel {
    #[arg(long)]
    runs: Option<u64>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep spec file.
    spec: PathBuf,
    /// Overrides apply to the spec, so base settings are `base.sim.steps=...`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    full_scale: bool,
    #[command(flatten)]
    parallel: Parallel,
}

#[derive(Args)]
struct BaselineArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    parallel: Parallel,
}

#[derive(Args)]
struct ProbSimArgs {
    /// TOML file of simulator parameters.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long, default_value_t = 1000)]
    runs: u64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    bins: usize,
    /// Comma-separated subset of as_unit, as_gamma, naive15, ir.
    #[arg(long, value_delimiter = ',')]
    variants: Option<Vec<Variant>>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SkewArgs {
    #[arg(long, default_value_t = 5000)]
    phi_max: u64,
    #[arg(long, default_value_t = 0.001)]
    low: f64,
    #[arg(long, default_value_t = 0.004)]
    high: f64,
    #[arg(long, default_value_t = -5000, allow_negative_numbers = true)]
    q_min: i64,
    #[arg(long, default_value_t = 5000, allow_negative_numbers = true)]
    q_max: i64,
    #[arg(long, default_value_t = 100)]
    q_step: usize,
    /// CSV file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn scale_defaults(full_scale: bool) -> SimConfig {
    let mut c = SimConfig::default();
    if !full_scale {
        c.sim.steps = DESK_STEPS;
        c.sim.runs = DESK_RUNS;
    }
    c
}

fn read_optional(path: Option<&Path>) -> Result<Option<String>> {
    path.map(|p| fs::read_to_string(p).with_context(|| format!("reading {}", p.display())))
        .transpose()
}

fn sim_config(common: &Common) -> Result<SimConfig> {
    let file = read_optional(common.config.as_deref())?;
    let mut c: SimConfig = layered(
        &scale_defaults(common.full_scale),
        file.as_deref(),
        &common.overrides,
    )?;
    if let Some(s) = common.seed {
        c.sim.seed = s;
    }
    if let Some(s) = common.steps {
        c.sim.steps = s;
    }
    c.validate()?;
    Ok(c)
}

fn workers(requested: Option<usize>) -> usize {
    requested
        .filter(|&w| w > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn out_dir(out: &Option<PathBuf>, default: &str) -> PathBuf {
    out.clone()
        .unwrap_or_else(|| PathBuf::from("out").join(default))
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    let mut config = sim_config(&args.common)?;
    if let Some(kind) = args.dealer {
        config.dealer.kind = kind;
        config.validate()?;
    }
    let dir = out_dir(&args.common.out, "run");
    fs::create_dir_all(&dir)?;
    let mut market = Market::new(&config, config.sim.seed)?;
    let mut book_log = match args.book_log {
        Some(depth) => Some((depth, BufWriter::new(File::create(dir.join("book.jsonl"))?))),
        None => None,
    };
    for _ in 0..config.sim.steps {
        let t = market.step().t;
        if let Some((depth, w)) = book_log.as_mut() {
            serde_json::to_writer(&mut *w, &market.book().snapshot(t, *depth))?;
            w.write_all(b"\n")?;
        }
    }
    if let Some((_, mut w)) = book_log {
        w.flush()?;
    }
    let out = market.finish();
    write_run(&dir, &config, &out)?;
    let last = out.series.last();
    println!(
        "{} dealer, seed {}: {} steps, {} trades, {} dealer fills, final price {:.1}, dealer wealth {:.0}",
        config.dealer.kind.name(),
        out.seed,
        out.series.len(),
        out.trades.len(),
        out.dealer_fills.len(),
        last.map_or(out.initial_price, |r| r.price),
        last.map_or(out.initial_dealer_wealth, |r| r.dealer_wealth),
    );
    println!("wrote {}", dir.display());
    Ok(())
}

fn load_spec(args: &SweepArgs) -> Result<SweepSpec> {
    let text = fs::read_to_string(&args.spec)
        .with_context(|| format!("reading {}", args.spec.display()))?;
    let mut table = toml::Table::try_from(SweepSpecDefaults::new(args.full_scale))?;
    merge(
        &mut table,
        toml::from_str(&text).context("parsing sweep spec")?,
    );
    for o in &args.overrides {
        set_key(&mut table, o)?;
    }
    let mut spec: SweepSpec = table.try_into().context("sweep spec")?;
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    if let Some(s) = args.steps {
        spec.base.sim.steps = s;
    }
    if let Some(r) = args.parallel.runs {
        spec.runs = r;
    }
    spec.validate()?;
    Ok(spec)
}

/// Scale-dependent defaults that sit under a spec file.
#[derive(serde::Serialize)]
struct SweepSpecDefaults {
    runs: u64,
    base: SimConfig,
}

impl SweepSpecDefaults {
    fn new(full_scale: bool) -> Self {
        let base = scale_defaults(full_scale);
        SweepSpecDefaults {
            runs: base.sim.runs,
            base,
        }
    }
}

fn cmd_sweep(args: &SweepArgs) -> Result<bool> {
    let spec = load_spec(args)?;
    let result = run_sweep(&spec, workers(args.parallel.workers))?;
    let dir = out_dir(&args.out, "sweep");
    write_sweep(&dir, &result)?;
    println!(
        "{} sweep: {} points x {} runs, {} steps",
        spec.axis,
        result.points.len(),
        spec.runs,
        spec.base.sim.steps
    );
    for p in &result.points {
        println!(
            "  {:<5} {:<16} dealer return {:>10}  market vol {:>10}",
            p.dealer.name(),
            p.point.label(),
            fmt_opt(p.mean("dealer_total_return")),
            fmt_opt(p.mean("market_volatility")),
        );
    }
    println!("wrote {}", dir.display());
    report_failures(result.failures())
}

fn cmd_baselines(args: &BaselineArgs) -> Result<bool> {
    let config = sim_config(&args.common)?;
    let runs = args.parallel.runs.unwrap_or(config.sim.runs);
    let seed = config.sim.seed;
    let points = compare_baselines(&config, runs, seed, workers(args.parallel.workers))?;
    let dir = out_dir(&args.common.out, "baselines");
    let table = write_baselines(&dir, &config, runs, seed, &points)?;
    println!("{runs} runs x {} steps, seed {seed}", config.sim.steps);
    println!(
        "  {:<6} {:>10} {:>10} {:>10} {:>10}",
        "dealer", "return", "vol", "sharpe", "corr_px"
    );
    for row in &table {
        print_baseline(row);
    }
    println!("wrote {}", dir.display());
    report_failures(points.iter().map(|p| p.failures()).sum())
}

fn print_baseline(row: &BaselineRow) {
    println!(
        "  {:<6} {:>10} {:>10} {:>10} {:>10}",
        row.dealer.name(),
        fmt_opt(row.total_return),
        fmt_opt(row.volatility),
        fmt_opt(row.sharpe),
        fmt_opt(row.corr_wealth_underlying),
    );
}

fn cmd_probsim(args: &ProbSimArgs) -> Result<()> {
    let file = read_optional(args.config.as_deref())?;
    let params: ProbSimParams =
        layered(&ProbSimParams::default(), file.as_deref(), &args.overrides)?;
    let variants = args
        .variants
        .clone()
        .unwrap_or_else(|| Variant::ALL.to_vec());
    if variants.is_empty() {
        bail!("no variants selected");
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers(args.workers))
        .build()?;
    let report =
        pool.install(|| wealth_histogram(&params, &variants, args.runs, args.seed, args.bins))?;
    let dir = out_dir(&args.out, "probsim");
    write_probsim(&dir, &report)?;
    println!("{} runs, seed {}", args.runs, args.seed);
    println!(
        "  {:<9} {:>12} {:>12} {:>10} {:>10}",
        "variant", "mean W", "std W", "mean q", "std q"
    );
    for v in &report.variants {
        println!(
            "  {:<9} {:>12.3} {:>12.3} {:>10.3} {:>10.3}",
            v.variant.name(),
            v.mean_wealth,
            v.std_wealth,
            v.mean_inventory,
            v.std_inventory
        );
    }
    println!("wrote {}", dir.display());
    Ok(())
}

fn cmd_skew_curve(args: &SkewArgs) -> Result<()> {
    if args.q_step == 0 || args.q_min > args.q_max {
        bail!("need q_min <= q_max and q_step > 0");
    }
    let rows = emit_skew_curve(
        args.phi_max,
        args.low,
        args.high,
        (args.q_min..=args.q_max).step_by(args.q_step),
    );
    match &args.out {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            write_skew_curve(BufWriter::new(File::create(path)?), &rows)?;
            eprintln!("wrote {}", path.display());
        }
        None => write_skew_curve(io::stdout().lock(), &rows)?,
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.3e}"))
}

fn report_failures(failures: usize) -> Result<bool> {
    if failures > 0 {
        eprintln!("{failures} run(s) failed; see summary.json");
    }
    Ok(failures == 0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(a) => cmd_run(a).map(|_| true),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Baselines(a) => cmd_baselines(a),
        Command::Probsim(a) => cmd_probsim(a).map(|_| true),
        Command::SkewCurve(a) => cmd_skew_curve(a).map(|_| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
