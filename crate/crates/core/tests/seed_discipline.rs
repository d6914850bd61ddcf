use abm_core::experiments::{run_sweep, Axis, RunMetrics, SweepSpec};
use abm_core::market::Actor;
use abm_core::rng::run_seed;
use abm_core::{run_simulation, DealerKind, RunOutput, SimConfig};

fn run(kind: DealerKind, seed: u64) -> RunOutput {
    let mut c = SimConfig::default();
    c.sim.steps = 4000;
    c.sim.dealer_prob = Some(0.25);
    c.dealer.kind = kind;
    run_simulation(&c, seed).unwrap()
}

#[test]
fn schedule_and_fundamental_are_shared_across_dealers() {
    for seed in [0, 5, 42] {
        let runs: Vec<RunOutput> = DealerKind::ALL.iter().map(|&k| run(k, seed)).collect();
        let actors = |o: &RunOutput| o.series.iter().map(|r| r.actor).collect::<Vec<Actor>>();
        let fundamental = |o: &RunOutput| {
            o.series
                .iter()
                .map(|r| r.fundamental.to_bits())
                .collect::<Vec<_>>()
        };
        for o in &runs[1..] {
            assert_eq!(actors(o), actors(&runs[0]));
            assert_eq!(fundamental(o), fundamental(&runs[0]));
            assert_eq!(o.initial_holdings, runs[0].initial_holdings);
        }
    }
}

#[test]
fn paths_agree_until_the_dealer_first_trades() {
    // With zero inventory all three dealers quote the same prices and sizes,
    // so nothing can differ before the first dealer fill.
    for seed in [1, 2, 3] {
        let runs: Vec<RunOutput> = DealerKind::ALL.iter().map(|&k| run(k, seed)).collect();
        let first_fill = runs[0].dealer_fills.first().expect("dealer trades").t;
        for o in &runs[1..] {
            assert_eq!(o.dealer_fills[0].t, first_fill);
            for (a, b) in o
                .series
                .iter()
                .zip(&runs[0].series)
                .take(first_fill as usize + 1)
            {
                assert_eq!(a, b);
            }
        }
    }
}

#[test]
fn runs_in_a_sweep_use_master_xor_index() {
    let mut base = SimConfig::default();
    base.sim.steps = 600;
    base.sim.dealer_prob = Some(0.3);
    let mut spec = SweepSpec::new(Axis::RiskAversion2OverGamma, base.clone());
    spec.values = Some(vec![20.0]);
    spec.dealers = Some(vec![DealerKind::As]);
    spec.runs = 3;
    spec.seed = 1234;
    let result = run_sweep(&spec, 2).unwrap();
    let point = &result.points[0];
    for rec in &point.runs {
        assert_eq!(rec.seed, run_seed(1234, rec.run));
        let direct = RunMetrics::compute(
            &run_simulation(&point.point.config(&base, DealerKind::As), rec.seed).unwrap(),
        );
        assert_eq!(rec.metrics.as_ref().unwrap(), &direct);
    }
}
