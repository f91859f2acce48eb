use nlb_core::experiments::{aa_band, run_ablation_sweep, run_closed_loop, AblationSweep, DiversionPlan, Scenario};
use nlb_core::metrics::satisfied_series;

fn smoke() -> Scenario {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/smoke.toml");
    Scenario::load(path).unwrap()
}

#[test]
fn aa_band_is_mean_plus_minus_three_sample_sd() {
    let b = aa_band(5, &[0.1, 0.3, 0.2, 0.4]);
    let sd = (0.05f64 / 3.0).sqrt();
    assert_eq!(b.threshold, 5);
    assert_eq!(b.seeds, 4);
    assert!((b.lower - (0.25 - 3.0 * sd)).abs() < 1e-12);
    assert!((b.upper - (0.25 + 3.0 * sd)).abs() < 1e-12);
}

#[test]
fn zero_ablation_reproduces_the_unablated_control() {
    let sc = smoke();
    let sweep = AblationSweep {
        fractions: vec![0.0, 0.5],
        salt: "t".into(),
        tail_days: 3,
    };
    let points = run_ablation_sweep(&sc, &sweep, 2).unwrap();

    let mut base = sc.clone();
    base.plan = DiversionPlan::user_only(sc.plan.salt(), &[(sc.control, 1.0)]).unwrap();
    base.arms.retain(|a| a.arm == sc.control);
    base.arms[0].ablation = None;
    let run = run_closed_loop(&base, 2, false).unwrap();
    let series = satisfied_series(&run.log, sc.world.horizon_days, sc.metrics.satisfied_threshold);
    assert_eq!(points[0].series, series);
    assert_eq!(points[0].impressions, run.log.len());
    // same traffic for every fraction
    assert_eq!(points[0].impressions, points[1].impressions);
}
