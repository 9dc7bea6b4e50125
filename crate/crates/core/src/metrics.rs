//! SINR models and the quadrature forms of the secrecy outage probability
//! (SOP) and average secrecy capacity (ASC).

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::channel::PowerAllocation;
use crate::distribution::{Estimate, FasGainDistribution};
use crate::error::{Error, Result};
use crate::quadrature::{gauss_laguerre_rule, gauss_legendre_rule, LaguerreMapping};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    External,
    Internal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SinrRole {
    /// Near user decoding the far user's symbol before cancellation.
    Sic,
    Near,
    Far,
    /// External eavesdropper decoding the near user's symbol.
    EveNear,
    /// External eavesdropper decoding the far user's symbol.
    EveFar,
    /// Far user eavesdropping on the near user's symbol.
    InternalEve,
}

/// Target rates and quadrature settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecrecyConfig {
    pub rate_un: f64,
    pub rate_uf: f64,
    pub laguerre_order: usize,
    pub legendre_order: usize,
    pub mapping: LaguerreMapping,
    /// Keep the `e^{ψ}` factor in the far-user ASC sum.
    pub asc_far_literal: bool,
}

impl Default for SecrecyConfig {
    fn default() -> Self {
        SecrecyConfig {
            rate_un: 0.5,
            rate_uf: 0.5,
            laguerre_order: 40,
            legendre_order: 40,
            mapping: LaguerreMapping::default(),
            asc_far_literal: false,
        }
    }
}

impl SecrecyConfig {
    pub fn rbar_n(&self) -> f64 {
        self.rate_un.exp2()
    }

    pub fn rbar_f(&self) -> f64 {
        self.rate_uf.exp2()
    }

    pub fn validate(&self) -> Result<()> {
        for (key, v) in [("rate_un", self.rate_un), ("rate_uf", self.rate_uf)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(key, format!("must be a finite rate >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Average SNRs, power split and the gain distribution of every node.
#[derive(Debug, Clone)]
pub struct ScenarioParams {
    pub snr_un: f64,
    pub snr_uf: f64,
    pub snr_e: f64,
    pub alloc: PowerAllocation,
    pub dist_un: FasGainDistribution,
    pub dist_uf: FasGainDistribution,
    pub dist_e: FasGainDistribution,
}

impl ScenarioParams {
    pub fn validate(&self) -> Result<()> {
        for (key, v) in [("snr_un", self.snr_un), ("snr_uf", self.snr_uf), ("snr_e", self.snr_e)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(key, format!("average SNR must be positive, got {v}")));
            }
        }
        self.alloc.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricResult {
    /// Clamped value.
    pub value: f64,
    pub raw_value: f64,
    pub quadrature_order: usize,
    /// Largest error estimate reported by an embedded MVN evaluation.
    pub embedded_cdf_error: f64,
    /// Those errors pushed through the quadrature sum.
    pub numeric_error: f64,
    pub clamped: bool,
    /// Some embedded MVN evaluation ran out of budget.
    pub warning: bool,
}

/// The six secrecy metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    SopExternalNear,
    SopExternalFar,
    SopInternalNear,
    AscExternalNear,
    AscExternalFar,
    AscInternalNear,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::SopExternalNear,
        Metric::SopExternalFar,
        Metric::SopInternalNear,
        Metric::AscExternalNear,
        Metric::AscExternalFar,
        Metric::AscInternalNear,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::SopExternalNear => "sop_external_near",
            Metric::SopExternalFar => "sop_external_far",
            Metric::SopInternalNear => "sop_internal_near",
            Metric::AscExternalNear => "asc_external_near",
            Metric::AscExternalFar => "asc_external_far",
            Metric::AscInternalNear => "asc_internal_near",
        }
    }

    /// Column prefix used in CSV output.
    pub fn short_name(self) -> &'static str {
        match self {
            Metric::SopExternalNear => "sop_ext_near",
            Metric::SopExternalFar => "sop_ext_far",
            Metric::SopInternalNear => "sop_int_near",
            Metric::AscExternalNear => "asc_ext_near",
            Metric::AscExternalFar => "asc_ext_far",
            Metric::AscInternalNear => "asc_int_near",
        }
    }

    pub fn is_sop(self) -> bool {
        matches!(
            self,
            Metric::SopExternalNear | Metric::SopExternalFar | Metric::SopInternalNear
        )
    }

    pub fn scenario(self) -> Scenario {
        match self {
            Metric::SopInternalNear | Metric::AscInternalNear => Scenario::Internal,
            _ => Scenario::External,
        }
    }

    pub fn evaluate(self, p: &ScenarioParams, cfg: &SecrecyConfig) -> Result<MetricResult> {
        match self {
            Metric::SopExternalNear => sop_external_near(p, cfg),
            Metric::SopExternalFar => sop_external_far(p, cfg),
            Metric::SopInternalNear => sop_internal_near(p, cfg),
            Metric::AscExternalNear => asc_external_near(p, cfg),
            Metric::AscExternalFar => asc_external_far(p, cfg),
            Metric::AscInternalNear => asc_internal_near(p, cfg),
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s || m.short_name() == s)
            .ok_or_else(|| Error::config("metric", format!("unknown metric `{s}`")))
    }
}

pub fn instantaneous_sinr(role: SinrRole, g: f64, p: &ScenarioParams) -> f64 {
    sinr(role, g, [p.snr_un, p.snr_uf, p.snr_e], p.alloc)
}

/// SINR from average SNRs `[γ̄_un, γ̄_uf, γ̄_e]`.
pub(crate) fn sinr(role: SinrRole, g: f64, snr: [f64; 3], alloc: PowerAllocation) -> f64 {
    let [snr_un, snr_uf, snr_e] = snr;
    let PowerAllocation { p_un, p_uf } = alloc;
    match role {
        SinrRole::Sic => snr_un * p_uf * g / (snr_un * p_un * g + 1.0),
        SinrRole::Near => snr_un * p_un * g,
        SinrRole::Far => snr_uf * p_uf * g / (snr_uf * p_un * g + 1.0),
        SinrRole::EveNear => snr_e * p_un * g,
        SinrRole::EveFar => snr_e * p_uf * g,
        SinrRole::InternalEve => snr_uf * p_un * g,
    }
}

/// Gain threshold below which `snr·p_hi·g/(snr·p_lo·g + 1) < γ`; `None`
/// when `γ` is at or above the ceiling `p_hi/p_lo`.
fn ratio_threshold(gamma: f64, snr: f64, p_hi: f64, p_lo: f64) -> Option<f64> {
    let den = snr * (p_hi - gamma * p_lo);
    (den > 0.0).then(|| gamma / den)
}

pub fn sinr_cdf(role: SinrRole, gamma: f64, p: &ScenarioParams) -> Result<Estimate> {
    if gamma.is_nan() || gamma < 0.0 {
        return Err(Error::Domain {
            function: "sinr_cdf",
            value: gamma,
            expected: "gamma >= 0",
        });
    }
    let PowerAllocation { p_un, p_uf } = p.alloc;
    match role {
        SinrRole::Sic => match ratio_threshold(gamma, p.snr_un, p_uf, p_un) {
            Some(g) => p.dist_un.cdf_fas(g),
            None => Ok(Estimate::exact(1.0)),
        },
        SinrRole::Near => p.dist_un.cdf_fas(gamma / (p.snr_un * p_un)),
        SinrRole::Far => match ratio_threshold(gamma, p.snr_uf, p_uf, p_un) {
            Some(g) => p.dist_uf.cdf_fas(g),
            None => Ok(Estimate::exact(1.0)),
        },
        SinrRole::EveNear => p.dist_e.cdf_fas(gamma / (p.snr_e * p_un)),
        SinrRole::EveFar => p.dist_e.cdf_fas(gamma / (p.snr_e * p_uf)),
        SinrRole::InternalEve => p.dist_uf.cdf_fas(gamma / (p.snr_uf * p_un)),
    }
}

/// Running quadrature sum of products of two estimates.
#[derive(Default)]
struct Accumulator {
    sum: f64,
    err: f64,
    max_err: f64,
    warning: bool,
}

impl Accumulator {
    fn add(&mut self, weight: f64, a: Estimate, b: Estimate) {
        self.sum += weight * a.value * b.value;
        self.err += weight.abs() * (a.value.abs() * b.error + b.value.abs() * a.error);
        self.max_err = self.max_err.max(a.error).max(b.error);
        self.warning |= a.warning || b.warning;
    }

    fn add_one(&mut self, weight: f64, a: Estimate) {
        self.sum += weight * a.value;
        self.err += weight.abs() * a.error;
        self.max_err = self.max_err.max(a.error);
        self.warning |= a.warning;
    }

    fn finish(self, scale: f64, order: usize, lo: f64, hi: f64) -> MetricResult {
        let raw = scale * self.sum;
        let value = raw.clamp(lo, hi);
        MetricResult {
            value,
            raw_value: raw,
            quadrature_order: order,
            embedded_cdf_error: self.max_err,
            numeric_error: scale.abs() * self.err,
            clamped: value != raw,
            warning: self.warning,
        }
    }
}

fn check(p: &ScenarioParams, cfg: &SecrecyConfig) -> Result<()> {
    p.validate()?;
    cfg.validate()
}

/// A single-port density keeps its full `ln g` singularity at the origin,
/// which a cubic substitution flattens better than a quadratic one.
fn density_mapping(cfg: &SecrecyConfig, dist: &FasGainDistribution) -> LaguerreMapping {
    let m = cfg.mapping.with_scale(1.0);
    if dist.geometry().ports() == 1 {
        m.with_power(3.0)
    } else {
        m
    }
}

fn checked_pdf(dist: &FasGainDistribution, g: f64) -> Result<Estimate> {
    let density = dist.pdf(g)?;
    if density.value.is_finite() {
        Ok(density)
    } else {
        Err(Error::Evaluation {
            node: g,
            value: density.value,
        })
    }
}

/// `∫ f_eve(g) · F_legit(threshold(g)) dg`, where `threshold` returns `None`
/// when outage is certain.
fn sop_integral(
    eve: &FasGainDistribution,
    legit: &FasGainDistribution,
    cfg: &SecrecyConfig,
    threshold: impl Fn(f64) -> Option<f64>,
) -> Result<MetricResult> {
    let rule = gauss_laguerre_rule(cfg.laguerre_order)?;
    let mapping = density_mapping(cfg, eve);
    let mut acc = Accumulator::default();
    for (u, w) in rule.iter_direct() {
        let (g, jac) = mapping.apply(u);
        if jac == 0.0 || g <= 0.0 {
            continue;
        }
        let density = checked_pdf(eve, g)?;
        let outage = match threshold(g) {
            Some(t) => legit.cdf_fas(t)?,
            None => Estimate::exact(1.0),
        };
        acc.add(w * jac, density, outage);
    }
    Ok(acc.finish(1.0, cfg.laguerre_order, 0.0, 1.0))
}

/// External eavesdropper, near user.
pub fn sop_external_near(p: &ScenarioParams, cfg: &SecrecyConfig) -> Result<MetricResult> {
    check(p, cfg)?;
    let rbar = cfg.rbar_n();
    let p_un = p.alloc.p_un;
    sop_integral(&p.dist_e, &p.dist_un, cfg, |g| {
        Some((rbar * (p.snr_e * p_un * g + 1.0) - 1.0) / (p.snr_un * p_un))
    })
}

/// External eavesdropper, far user.
///
/// The far user's SINR saturates at `p_uf/p_un`, so outage is certain once
/// the eavesdropper gain passes a finite edge, and just below that edge the
/// outage probability climbs steeply. Integrating over the eavesdropper gain
/// therefore converges badly. Instead
///
/// `SOP = F_uf(μ₀) + ∫_{μ₀}^∞ f_uf(h) (1 - F_e(g(h))) dh`,
///
/// where `g(h)` is the eavesdropper gain that exactly matches the secrecy
/// rate at far-user gain `h`. `g` rises over a layer of width `~1/(γ̄ p_un)`
/// above `μ₀`, which gets its own graded Legendre piece; the rest goes to
/// Laguerre. `LaguerreMapping::Direct` keeps the plain form.
pub fn sop_external_far(p: &ScenarioParams, cfg: &SecrecyConfig) -> Result<MetricResult> {
    check(p, cfg)?;
    let rbar = cfg.rbar_f();
    let PowerAllocation { p_un, p_uf } = p.alloc;
    if cfg.mapping == LaguerreMapping::Direct {
        return sop_integral(&p.dist_e, &p.dist_uf, cfg, |g| {
            let need = rbar * (1.0 + p.snr_e * p_uf * g) - 1.0;
            ratio_threshold(need, p.snr_uf, p_uf, p_un)
        });
    }
    let Some(mu0) = ratio_threshold(rbar - 1.0, p.snr_uf, p_uf, p_un) else {
        return Ok(Accumulator {
            sum: 1.0,
            ..Default::default()
        }
        .finish(1.0, cfg.laguerre_order, 0.0, 1.0));
    };
    let eve_gain = |h: f64| {
        let sinr = instantaneous_sinr(SinrRole::Far, h, p);
        ((sinr + 1.0) / rbar - 1.0).max(0.0) / (p.snr_e * p_uf)
    };
    let mut acc = Accumulator::default();
    acc.add_one(1.0, p.dist_uf.cdf_fas(mu0)?);

    let delta = (20.0 / (p.snr_uf * p_un)).min(1.0);
    let legendre = gauss_legendre_rule(cfg.legendre_order)?;
    for (psi, w) in legendre.iter_direct() {
        let t = 0.5 * (psi + 1.0);
        let h = mu0 + delta * t * t;
        if h <= 0.0 {
            continue;
        }
        let density = checked_pdf(&p.dist_uf, h)?;
        let secure = p.dist_e.survival_fas(eve_gain(h))?;
        acc.add(w * delta * t, density, secure);
    }

    let laguerre = gauss_laguerre_rule(cfg.laguerre_order)?;
    let mapping = cfg.mapping.with_scale(1.0);
    for (u, w) in laguerre.iter_direct() {
        let (x, jac) = mapping.apply(u);
        if jac == 0.0 {
            continue;
        }
        let h = mu0 + delta + x;
        let density = checked_pdf(&p.dist_uf, h)?;
        let secure = p.dist_e.survival_fas(eve_gain(h))?;
        acc.add(w * jac, density, secure);
    }
    Ok(acc.finish(1.0, cfg.laguerre_order, 0.0, 1.0))
}

/// Far user eavesdropping on the near user.
pub fn sop_internal_near(p: &ScenarioParams, cfg: &SecrecyConfig) -> Result<MetricResult> {
    check(p, cfg)?;
    let rbar = cfg.rbar_n();
    let p_un = p.alloc.p_un;
    sop_integral(&p.dist_uf, &p.dist_un, cfg, |g| {
        Some((rbar * (p.snr_uf * p_un * g + 1.0) - 1.0) / (p.snr_un * p_un))
    })
}

/// `(1/ln 2) ∫ (1 - F_legit(γ/a)) F_eve(γ/b) / (1 + γ) dγ` over `(0, ∞)`.
///
/// The integrand lives on the scale `a` when the eavesdropper is strong and
/// is cut off near `b` otherwise; `√(a·min(a, b))` sits between the two.
/// `b` is floored at `1e-4·a`, below which the cut-off layer is negligible.
fn asc_semi_infinite(
    legit: &FasGainDistribution,
    legit_scale: f64,
    eve: &FasGainDistribution,
    eve_scale: f64,
    cfg: &SecrecyConfig,
) -> Result<MetricResult> {
    let rule = gauss_laguerre_rule(cfg.laguerre_order)?;
    let mapping = cfg
        .mapping
        .with_scale((legit_scale * eve_scale.clamp(1e-4 * legit_scale, legit_scale)).sqrt());
    let mut acc = Accumulator::default();
    for (u, w) in rule.iter_direct() {
        let (gamma, jac) = mapping.apply(u);
        if jac == 0.0 || gamma <= 0.0 {
            continue;
        }
        let survive = legit.survival_fas(gamma / legit_scale)?;
        let eve_cdf = eve.cdf_fas(gamma / eve_scale)?;
        acc.add(w * jac / (1.0 + gamma), survive, eve_cdf);
    }
    Ok(acc.finish(1.0 / LN_2, cfg.laguerre_order, 0.0, f64::INFINITY))
}

/// External eavesdropper, near user.
pub fn asc_external_near(p: &ScenarioParams, cfg: &SecrecyConfig) -> Result<MetricResult> {
    check(p, cfg)?;
    let p_un = p.alloc.p_un;
    asc_semi_infinite(&p.dist_un, p.snr_un * p_un, &p.dist_e, p.snr_e * p_un, cfg)
}

/// Far user eavesdropping on the near user.
pub fn asc_internal_near(p: &ScenarioParams, cfg: &SecrecyConfig) -> Result<MetricResult> {
    check(p, cfg)?;
    let p_un = p.alloc.p_un;
    asc_semi_infinite(&p.dist_un, p.snr_un * p_un, &p.dist_uf, p.snr_uf * p_un, cfg)
}

/// External eavesdropper, far user. The far user's SINR never exceeds
/// `p_uf/p_un`, so the integral runs over that finite interval.
pub fn asc_external_far(p: &ScenarioParams, cfg: &SecrecyConfig) -> Result<MetricResult> {
    check(p, cfg)?;
    let PowerAllocation { p_un, p_uf } = p.alloc;
    let upper = p_uf / p_un;
    let rule = gauss_legendre_rule(cfg.legendre_order)?;
    let half = 0.5 * upper;
    let mut acc = Accumulator::default();
    for (psi, w) in rule.iter_direct() {
        let gamma = half * psi + half;
        let xi = ratio_threshold(gamma, p.snr_uf, p_uf, p_un).ok_or_else(|| {
            Error::Numerical(format!("Legendre node {gamma} reached the far-user SINR ceiling"))
        })?;
        let survive = p.dist_uf.survival_fas(xi)?;
        let eve_cdf = p.dist_e.cdf_fas(gamma / (p.snr_e * p_uf))?;
        let mut weight = w / (1.0 + gamma);
        if cfg.asc_far_literal {
            weight *= gamma.exp();
        }
        acc.add(weight, survive, eve_cdf);
    }
    Ok(acc.finish(half / LN_2, cfg.legendre_order, 0.0, f64::INFINITY))
}
