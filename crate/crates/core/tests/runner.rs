use fas_secrecy::channel::FasGeometry;
use fas_secrecy::metrics::Metric;
use fas_secrecy::runner::{parse_config, render_csv, run_sweep, SweepScale, SweepVariable};

const EXAMPLE: &str = include_str!("../../../configs/example.toml");

#[test]
fn example_config_parses() {
    let cfg = parse_config(EXAMPLE).unwrap();
    assert_eq!(cfg.geometry.near.ports(), 9);
    assert_eq!(cfg.sweep.variable, SweepVariable::SnrUn);
    assert_eq!(cfg.sweep.scale, SweepScale::Db);
    assert_eq!(cfg.sweep.metrics, vec![Metric::SopExternalNear, Metric::SopInternalNear]);
    assert_eq!(cfg.secrecy.extra_orders, vec![2, 3]);
    assert_eq!(cfg.mc.n_samples, 1_000_000);
    assert_eq!(cfg.output.csv, None);
}

#[test]
fn example_sweep_agrees_with_monte_carlo() {
    let mut cfg = parse_config(EXAMPLE).unwrap();
    cfg.geometry.near = FasGeometry::square(2, 1.0).unwrap();
    cfg.sweep.points = 3;
    cfg.mc.n_samples = 200_000;
    let rows = run_sweep(&cfg).unwrap();
    assert_eq!(rows.len(), 3);
    for r in &rows {
        assert!(!r.failed);
        for c in &r.cells {
            let mc = c.mc.unwrap();
            let tol = 5.0 * mc.std_error + 0.02 * mc.value;
            assert!(
                (c.analytic - mc.value).abs() <= tol,
                "{} at {} dB: {} vs {}",
                c.metric.name(),
                r.sweep_value,
                c.analytic,
                mc.value
            );
            assert_eq!(c.low_order.len(), 2);
        }
    }
    let text = render_csv(&rows, cfg.output.precision).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.lines().next().unwrap().contains("sop_int_near_mc_stderr"));
}
