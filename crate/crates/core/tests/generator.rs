use rac_core::gen::{generate_trace, measure_long_reuse, validate_separation, zipf_slope, GenParams};
use rac_core::report::mean_std;
use rac_core::sweep::{run_sweep, SweepGrid};

#[test]
fn zipf_slope_is_recovered() {
    let p = GenParams { zipf_gamma: 1.2, seed: 4, ..GenParams::default() };
    let t = generate_trace(&p).unwrap();
    assert_eq!(t.len(), 10_000);
    let slope = zipf_slope(&t, 30).unwrap();
    assert!((slope + 1.2).abs() <= 0.15, "slope {slope}");
}

#[test]
fn long_reuse_targets_are_met() {
    for (target, seed) in [(0.3, 1), (0.5, 2), (0.8, 3)] {
        let p = GenParams { long_reuse_target: target, seed, ..GenParams::default() };
        let t = generate_trace(&p).unwrap();
        let got = measure_long_reuse(&t, p.capacity_ref);
        assert!((got - target).abs() <= 0.05, "target {target}: {got}");
    }
}

#[test]
fn default_geometry_separates_at_the_hit_threshold() {
    let r = validate_separation(&GenParams::default(), 0.85, 4000).unwrap();
    assert!(r.pass, "{r:?}");
    assert!(r.p1_intra >= 0.85 && r.p99_cross < 0.85);
}

#[test]
fn same_seed_same_bytes() {
    let p = GenParams { n_topics: 30, trace_len: 3000, capacity_ref: 200, seed: 12, ..GenParams::default() };
    assert_eq!(generate_trace(&p).unwrap().to_text(), generate_trace(&p).unwrap().to_text());
    let q = GenParams { seed: 13, ..p };
    assert_ne!(generate_trace(&p).unwrap().to_text(), generate_trace(&q).unwrap().to_text());
}

/// Skewed popularity concentrates reuse, so RAC's normalized hit ratio should
/// not fall as gamma grows (within one standard deviation).
#[test]
fn rac_does_not_degrade_with_skew() {
    let grid = SweepGrid {
        policies: vec!["rac".into()],
        capacity_fracs: vec![0.1],
        gammas: vec![0.7, 1.2],
        seeds: (0..5).collect(),
        base: GenParams { n_topics: 40, trace_len: 4000, ..GenParams::default() },
        ..SweepGrid::default()
    };
    let rows = run_sweep(&grid, None).unwrap();
    let at = |g: f64| -> Vec<f64> { rows.iter().filter(|r| r.gamma == g).filter_map(|r| r.hr_norm()).collect() };
    let (lo_mean, lo_std) = mean_std(&at(0.7)).unwrap();
    let (hi_mean, _) = mean_std(&at(1.2)).unwrap();
    assert!(hi_mean >= lo_mean - lo_std, "gamma 1.2: {hi_mean}, gamma 0.7: {lo_mean} +- {lo_std}");
}
