//! Parameter sweeps over the analytic metrics and the Monte Carlo oracle,
//! figure presets and CSV output.

mod config;
mod csv_out;
mod presets;

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use rayon::prelude::*;

pub use config::{
    parse_config, GeometryConfig, MappingChoice, McConfig, OutputConfig, PointSetting, RunConfig, SecrecySection,
    SnrConfig, SweepConfig, SweepScale, SweepVariable, SystemConfig,
};
pub use csv_out::{emit_csv, format_value, render_csv, write_csv};
pub use presets::{preset, Curve, PRESETS};

use crate::channel::{CorrelationModel, FasGeometry};
use crate::copula::MvnOptions;
use crate::distribution::FasGainDistribution;
use crate::error::{Error, Result};
use crate::metrics::{Metric, MetricResult, ScenarioParams};
use crate::monte_carlo::{estimate_sweep, McNodes, McPoint, MonteCarloEstimate};

/// One metric at one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricCell {
    pub metric: Metric,
    /// Main analytic value; NaN when the evaluation failed.
    pub analytic: f64,
    pub result: Option<MetricResult>,
    /// `(order, value)` for each extra low order.
    pub low_order: Vec<(usize, f64)>,
    pub mc: Option<MonteCarloEstimate>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub sweep_value: f64,
    pub scale: SweepScale,
    pub cells: Vec<MetricCell>,
    pub quad_order: usize,
    /// Worst MVN error estimate behind any analytic cell of the row.
    pub mvn_max_error: f64,
    pub clamped: bool,
    /// Some MVN evaluation ran out of budget.
    pub warning: bool,
    pub failed: bool,
}

impl SweepRow {
    pub fn cell(&self, metric: Metric) -> Option<&MetricCell> {
        self.cells.iter().find(|c| c.metric == metric)
    }
}

type DistKey = (usize, usize, u64, u64, CorrelationModel);

/// Gain distributions are cached per geometry so the tabulated CDF profile
/// is built once per process. Clones share the profile.
pub fn gain_distribution(geometry: FasGeometry, model: CorrelationModel) -> Result<FasGainDistribution> {
    static CACHE: OnceLock<Mutex<HashMap<DistKey, FasGainDistribution>>> = OnceLock::new();
    let key = (geometry.n1, geometry.n2, geometry.w1.to_bits(), geometry.w2.to_bits(), model);
    let cache = CACHE.get_or_init(Default::default);
    if let Some(d) = cache.lock().expect("distribution cache").get(&key) {
        return Ok(d.clone());
    }
    let d = FasGainDistribution::new(geometry, model, MvnOptions::default())?;
    cache.lock().expect("distribution cache").insert(key, d.clone());
    Ok(d)
}

fn scenario(cfg: &RunConfig) -> Result<ScenarioParams> {
    let g = &cfg.geometry;
    let build = |geometry| -> Result<FasGainDistribution> {
        Ok(gain_distribution(geometry, g.correlation)?
            .with_density(cfg.secrecy.density)
            .with_pdf_argument(cfg.secrecy.pdf_argument))
    };
    Ok(ScenarioParams {
        snr_un: 1.0,
        snr_uf: 1.0,
        snr_e: 1.0,
        alloc: cfg.system.allocation(),
        dist_un: build(g.near)?,
        dist_uf: build(g.far)?,
        dist_e: build(g.eve)?,
    })
}

fn at_point(base: &ScenarioParams, s: &PointSetting) -> ScenarioParams {
    ScenarioParams {
        snr_un: s.snr[0],
        snr_uf: s.snr[1],
        snr_e: s.snr[2],
        ..base.clone()
    }
}

fn analytic_row(cfg: &RunConfig, base: &ScenarioParams, x: f64) -> SweepRow {
    let s = cfg.point(x);
    let p = at_point(base, &s);
    let mut sec = cfg.secrecy.secrecy_config();
    sec.rate_un = s.rate_un;
    sec.rate_uf = s.rate_uf;
    let mut row = SweepRow {
        sweep_value: x,
        scale: cfg.sweep.scale,
        cells: Vec::with_capacity(cfg.sweep.metrics.len()),
        quad_order: sec.laguerre_order.max(sec.legendre_order),
        mvn_max_error: 0.0,
        clamped: false,
        warning: false,
        failed: false,
    };
    for &metric in &cfg.sweep.metrics {
        let (analytic, result, error) = match metric.evaluate(&p, &sec) {
            Ok(r) => {
                row.mvn_max_error = row.mvn_max_error.max(r.embedded_cdf_error);
                row.clamped |= r.clamped;
                row.warning |= r.warning;
                (r.value, Some(r), None)
            }
            Err(e) => {
                row.failed = true;
                (f64::NAN, None, Some(e.to_string()))
            }
        };
        let low_order = cfg
            .secrecy
            .extra_orders
            .iter()
            .map(|&m| {
                let mut low = cfg.secrecy.low_order_config(m);
                low.rate_un = s.rate_un;
                low.rate_uf = s.rate_uf;
                (m, metric.evaluate(&p, &low).map_or(f64::NAN, |r| r.value))
            })
            .collect();
        row.cells.push(MetricCell {
            metric,
            analytic,
            result,
            low_order,
            mc: None,
            error,
        });
    }
    row
}

/// Evaluates one sweep. Rows come back in sweep order.
pub fn run_sweep(cfg: &RunConfig) -> Result<Vec<SweepRow>> {
    Ok(run_batch(std::slice::from_ref(cfg))?.remove(0))
}

/// Evaluates several sweeps. Analytic points run in the rayon pool; Monte
/// Carlo estimates are shared between sweeps with the same geometry and
/// sampler settings, so one set of realizations serves all their points.
pub fn run_batch(cfgs: &[RunConfig]) -> Result<Vec<Vec<SweepRow>>> {
    for cfg in cfgs {
        cfg.validate()?;
    }
    let bases = cfgs.iter().map(scenario).collect::<Result<Vec<_>>>()?;
    // Profiles are built up front: building one inside the pool could
    // re-enter its own initialisation through work stealing.
    for b in &bases {
        b.dist_un.prepare();
        b.dist_uf.prepare();
        b.dist_e.prepare();
    }
    let tasks: Vec<(usize, f64)> = cfgs
        .iter()
        .enumerate()
        .flat_map(|(i, c)| c.sweep.values().into_iter().map(move |x| (i, x)))
        .collect();
    let flat: Vec<SweepRow> = tasks
        .par_iter()
        .map(|&(i, x)| analytic_row(&cfgs[i], &bases[i], x))
        .collect();
    let mut out: Vec<Vec<SweepRow>> = cfgs.iter().map(|c| Vec::with_capacity(c.sweep.points)).collect();
    for (&(i, _), row) in tasks.iter().zip(flat) {
        out[i].push(row);
    }
    attach_monte_carlo(cfgs, &bases, &mut out)?;
    Ok(out)
}

fn attach_monte_carlo(cfgs: &[RunConfig], bases: &[ScenarioParams], out: &mut [Vec<SweepRow>]) -> Result<()> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, c) in cfgs.iter().enumerate() {
        if c.mc.n_samples == 0 {
            continue;
        }
        let same = |j: &usize| cfgs[*j].geometry == c.geometry && cfgs[*j].mc == c.mc;
        match groups.iter_mut().find(|g| same(&g[0])) {
            Some(g) => g.push(i),
            None => groups.push(vec![i]),
        }
    }
    for group in groups {
        let mc = cfgs[group[0]].mc;
        let mut metrics: Vec<Metric> = Vec::new();
        let mut points = Vec::new();
        for &i in &group {
            for &m in &cfgs[i].sweep.metrics {
                if !metrics.contains(&m) {
                    metrics.push(m);
                }
            }
            for x in cfgs[i].sweep.values() {
                let s = cfgs[i].point(x);
                points.push(McPoint {
                    snr_un: s.snr[0],
                    snr_uf: s.snr[1],
                    snr_e: s.snr[2],
                    alloc: cfgs[i].system.allocation(),
                    rate_un: s.rate_un,
                    rate_uf: s.rate_uf,
                });
            }
        }
        let est = estimate_sweep(
            McNodes::of(&bases[group[0]]),
            &points,
            &metrics,
            mc.n_samples,
            mc.seed,
            mc.mode,
        )?;
        let mut k = 0;
        for &i in &group {
            for row in out[i].iter_mut() {
                for cell in row.cells.iter_mut() {
                    let mi = metrics.iter().position(|&m| m == cell.metric).expect("metric in union");
                    cell.mc = Some(est[k][mi]);
                }
                k += 1;
            }
        }
    }
    Ok(())
}

/// Runs a figure preset and returns `(curve name, rows)` per curve.
pub fn run_preset(name: &str, base: &RunConfig) -> Result<Vec<(String, Vec<SweepRow>)>> {
    let curves = preset(name, base)?;
    let cfgs: Vec<RunConfig> = curves.iter().map(|c| c.config.clone()).collect();
    let rows = run_batch(&cfgs)?;
    Ok(curves.into_iter().map(|c| c.name).zip(rows).collect())
}

/// First failure recorded in a set of rows, as an error.
pub fn first_failure(rows: &[SweepRow]) -> Option<Error> {
    rows.iter().flat_map(|r| &r.cells).find_map(|c| {
        c.error
            .as_ref()
            .map(|e| Error::Numerical(format!("{}: {e}", c.metric.name())))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::monte_carlo::McMode;

    fn small(metrics: &[Metric]) -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.geometry.near = FasGeometry::single_port();
        cfg.geometry.far = FasGeometry::single_port();
        cfg.geometry.eve = FasGeometry::single_port();
        cfg.sweep = SweepConfig {
            variable: SweepVariable::SnrUn,
            start: 0.0,
            stop: 20.0,
            points: 3,
            scale: SweepScale::Db,
            metrics: metrics.to_vec(),
        };
        cfg
    }

    #[test]
    fn flat_sweep_without_eavesdropper() {
        let mut cfg = small(&[Metric::SopExternalNear]);
        cfg.secrecy.rate_un = 0.0;
        cfg.snr.e_db = Some(-300.0);
        cfg.sweep.points = 2;
        let rows = run_sweep(&cfg).unwrap();
        assert_eq!(rows.len(), 2);
        for r in &rows {
            assert!(r.cells[0].analytic.abs() < 1e-12, "{}", r.cells[0].analytic);
            assert!(!r.failed);
        }
    }

    #[test]
    fn rows_follow_sweep_order_and_match_direct_evaluation() {
        let cfg = small(&[Metric::SopExternalNear, Metric::AscExternalNear]);
        let rows = run_sweep(&cfg).unwrap();
        let xs: Vec<f64> = rows.iter().map(|r| r.sweep_value).collect();
        assert_eq!(xs, vec![0.0, 10.0, 20.0]);
        let base = scenario(&cfg).unwrap();
        for r in &rows {
            let p = at_point(&base, &cfg.point(r.sweep_value));
            let want = Metric::SopExternalNear.evaluate(&p, &cfg.secrecy.secrecy_config()).unwrap();
            assert_eq!(r.cells[0].analytic, want.value);
            assert!(r.cells.iter().all(|c| c.mc.is_none()));
        }
        assert!(rows[0].cells[0].analytic > rows[2].cells[0].analytic);
    }

    #[test]
    fn monte_carlo_columns_attach_per_group() {
        let mut a = small(&[Metric::SopExternalNear]);
        a.mc = McConfig {
            n_samples: 20_000,
            seed: 3,
            mode: McMode::Copula,
        };
        let mut b = a.clone();
        b.snr.e_db = Some(5.0);
        let batch = run_batch(&[a.clone(), b.clone()]).unwrap();
        let alone = run_sweep(&a).unwrap();
        for rows in &batch {
            for r in rows {
                let mc = r.cells[0].mc.unwrap();
                assert_eq!(mc.n_samples, 20_000);
            }
        }
        for (x, y) in batch[0].iter().zip(&alone) {
            assert_eq!(x.cells[0].mc.unwrap().value, y.cells[0].mc.unwrap().value);
        }
        // a stronger eavesdropper on the same realizations never helps
        for (x, y) in batch[0].iter().zip(&batch[1]) {
            assert!(y.cells[0].mc.unwrap().value >= x.cells[0].mc.unwrap().value);
        }
    }

    #[test]
    fn low_orders_reported() {
        let mut cfg = small(&[Metric::SopExternalFar]);
        cfg.sweep.variable = SweepVariable::SnrUf;
        cfg.secrecy.extra_orders = vec![2, 3];
        let rows = run_sweep(&cfg).unwrap();
        let cell = &rows[1].cells[0];
        assert_eq!(cell.low_order.iter().map(|p| p.0).collect::<Vec<_>>(), vec![2, 3]);
        assert!(cell.low_order.iter().all(|p| p.1.is_finite()));
    }

    #[test]
    fn invalid_config_rejected_before_work() {
        let mut cfg = small(&[Metric::SopExternalNear]);
        cfg.sweep.points = 1;
        assert_eq!(run_sweep(&cfg).unwrap_err().exit_code(), 2);
    }
}
