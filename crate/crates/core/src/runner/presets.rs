//! Figure presets. Each preset is a list of curves; every curve is a full
//! run configuration and becomes one CSV.
//!
//! | preset | x axis | curves |
//! |---|---|---|
//! | fig2 | γ̄_un or γ̄_uf, 0–20 dB | external SOP, near and far, γ̄_e = 0 dB |
//! | fig3 | γ̄_un, 0–20 dB | internal SOP, γ̄_uf ∈ {−5, 0, 5} dB, far user 2×2 at 1λ² |
//! | fig4 | rate, 0–3 bit/s/Hz | SOP of both users, all nodes 2×2 at 1λ² |
//! | fig5 | γ̄_un or γ̄_uf, 0–30 dB | external ASC, γ̄_e = 0 dB |
//! | fig6 | γ̄_un, 0–30 dB | internal ASC, γ̄_uf ∈ {−5, 0, 5} dB |
//!
//! Legitimate users take each of TAS (1×1), FAS 2×2 on 1λ² and FAS 3×3 on
//! 4λ². The eavesdropper is 2×2 on 1λ². Values not named here come from the
//! base configuration.

use super::{RunConfig, SweepConfig, SweepScale, SweepVariable};
use crate::channel::FasGeometry;
use crate::error::{Error, Result};
use crate::metrics::Metric;

pub const PRESETS: [&str; 5] = ["fig2", "fig3", "fig4", "fig5", "fig6"];

/// Internal-eavesdropper SNRs in dB for fig3 and fig6.
pub const FAR_SNR_DB: [f64; 3] = [-5.0, 0.0, 5.0];

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub name: String,
    pub config: RunConfig,
}

fn antennas() -> [(&'static str, FasGeometry); 3] {
    [
        ("tas", FasGeometry::single_port()),
        ("fas4w1", square(2, 1.0)),
        ("fas9w4", square(3, 4.0)),
    ]
}

fn square(side: usize, area: f64) -> FasGeometry {
    FasGeometry::square(side, area).expect("preset geometry")
}

fn sweep(variable: SweepVariable, start: f64, stop: f64, points: usize, metrics: &[Metric]) -> SweepConfig {
    SweepConfig {
        variable,
        start,
        stop,
        points,
        scale: match variable {
            SweepVariable::RateUn | SweepVariable::RateUf => SweepScale::Linear,
            _ => SweepScale::Db,
        },
        metrics: metrics.to_vec(),
    }
}

fn external(tag: &str, base: &RunConfig, stop: f64, points: usize, near: Metric, far: Metric) -> Vec<Curve> {
    let mut out = Vec::new();
    for (user, variable, metric) in [("near", SweepVariable::SnrUn, near), ("far", SweepVariable::SnrUf, far)] {
        for (name, g) in antennas() {
            let mut c = base.clone();
            c.geometry.near = g;
            c.geometry.far = g;
            c.geometry.eve = square(2, 1.0);
            c.snr.e_db = Some(0.0);
            c.sweep = sweep(variable, 0.0, stop, points, &[metric]);
            out.push(Curve {
                name: format!("{tag}_{user}_{name}"),
                config: c,
            });
        }
    }
    out
}

fn internal(tag: &str, base: &RunConfig, stop: f64, points: usize, metric: Metric) -> Vec<Curve> {
    let mut out = Vec::new();
    for uf_db in FAR_SNR_DB {
        for (name, g) in antennas() {
            let mut c = base.clone();
            c.geometry.near = g;
            c.geometry.far = square(2, 1.0);
            c.geometry.eve = square(2, 1.0);
            c.snr.uf_db = Some(uf_db);
            c.snr.e_db = Some(0.0);
            c.sweep = sweep(SweepVariable::SnrUn, 0.0, stop, points, &[metric]);
            out.push(Curve {
                name: format!("{tag}_uf{uf_db}db_{name}"),
                config: c,
            });
        }
    }
    out
}

fn rates(base: &RunConfig) -> Vec<Curve> {
    let mut out = Vec::new();
    let quad = square(2, 1.0);
    for (user, variable, metrics) in [
        ("near", SweepVariable::RateUn, vec![Metric::SopExternalNear, Metric::SopInternalNear]),
        ("far", SweepVariable::RateUf, vec![Metric::SopExternalFar]),
    ] {
        let mut c = base.clone();
        c.geometry.near = quad;
        c.geometry.far = quad;
        c.geometry.eve = quad;
        c.sweep = sweep(variable, 0.0, 3.0, 13, &metrics);
        out.push(Curve {
            name: format!("fig4_{user}"),
            config: c,
        });
    }
    out
}

/// Curves of a named preset on top of `base`. Presets also report the
/// order-2 and order-3 sums unless `base` lists its own extra orders.
pub fn preset(name: &str, base: &RunConfig) -> Result<Vec<Curve>> {
    let mut base = base.clone();
    if base.secrecy.extra_orders.is_empty() {
        base.secrecy.extra_orders = vec![2, 3];
    }
    let curves = match name {
        "fig2" => external("fig2", &base, 20.0, 9, Metric::SopExternalNear, Metric::SopExternalFar),
        "fig3" => internal("fig3", &base, 20.0, 9, Metric::SopInternalNear),
        "fig4" => rates(&base),
        "fig5" => external("fig5", &base, 30.0, 13, Metric::AscExternalNear, Metric::AscExternalFar),
        "fig6" => internal("fig6", &base, 30.0, 13, Metric::AscInternalNear),
        _ => {
            return Err(Error::config(
                "preset",
                format!("unknown preset `{name}` (expected one of {})", PRESETS.join(", ")),
            ))
        }
    };
    Ok(curves)
}
