//! Distribution of the equivalent channel gain.
//!
//! A single port sees `g = g_t g_j`, the product of two unit-mean
//! exponential gains (energy link and information link). Its CDF is
//! `1 - 2√g K1(2√g)` and its density `2 K0(2√g)`. A fluid antenna picks the
//! best of `N` correlated ports; the correlation enters through a Gaussian
//! copula, so `P(max ≤ g) = Φ_R(x, …, x)` with `x = Φ⁻¹(F(g))`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{CorrelationModel, FasGeometry};
use crate::copula::{
    log_copula_density_factor, mvn_cdf_equicoordinate, mvn_cdf_equicoordinate_with_slope,
    CorrelationMatrix, MvnEstimate, MvnOptions,
};
use crate::error::{Error, Result};
use crate::special::{
    bessel_k0, k01_scaled, one_minus_x_k1, std_normal_quantile, std_normal_quantile_upper,
};

/// Argument of K0 in the single-port density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PdfArgument {
    /// `2 K0(2√g)`, the derivative of the CDF.
    #[default]
    Corrected,
    /// `2 K0(√(2g))`, which integrates to 2.
    PaperLiteral,
}

/// Which density of the best-port gain feeds the integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DensityForm {
    /// Derivative of the copula CDF:
    /// `f(g) Σ_i P(Z_{-i} ≤ x | Z_i = x)`.
    #[default]
    Exact,
    /// Copula density on the diagonal times the product of marginals,
    /// `f(g)^N c_R(x, …, x)`. Not a normalised density for `N > 1`.
    CopulaDiagonal,
}

pub fn cdf_single_port(g: f64) -> f64 {
    if g <= 0.0 {
        return 0.0;
    }
    one_minus_x_k1(2.0 * g.sqrt()).clamp(0.0, 1.0)
}

/// `1 - F(g) = 2√g K1(2√g)`, accurate deep in the upper tail.
pub fn survival_single_port(g: f64) -> f64 {
    if g <= 0.0 {
        return 1.0;
    }
    let x = 2.0 * g.sqrt();
    if x < 2.0 {
        1.0 - one_minus_x_k1(x)
    } else {
        x * k01_scaled(x).1 * (-x).exp()
    }
}

fn check_positive(function: &'static str, g: f64) -> Result<()> {
    if g > 0.0 && g.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            function,
            value: g,
            expected: "0 < g < ∞",
        })
    }
}

fn k0_argument(g: f64, arg: PdfArgument) -> f64 {
    match arg {
        PdfArgument::Corrected => 2.0 * g.sqrt(),
        PdfArgument::PaperLiteral => (2.0 * g).sqrt(),
    }
}

pub fn pdf_single_port(g: f64) -> Result<f64> {
    pdf_single_port_with(g, PdfArgument::Corrected)
}

pub fn pdf_single_port_with(g: f64, arg: PdfArgument) -> Result<f64> {
    check_positive("pdf_single_port", g)?;
    Ok(2.0 * bessel_k0(k0_argument(g, arg))?)
}

/// `ln f(g)`, finite far beyond the point where `f` itself underflows.
pub fn log_pdf_single_port(g: f64, arg: PdfArgument) -> Result<f64> {
    check_positive("log_pdf_single_port", g)?;
    let x = k0_argument(g, arg);
    Ok(std::f64::consts::LN_2 + k01_scaled(x).0.ln() - x)
}

/// Normal score `Φ⁻¹(F(g))`, taken from whichever tail is more accurate.
pub fn normal_score(g: f64) -> f64 {
    if g <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let u = cdf_single_port(g);
    if u <= 0.5 {
        std_normal_quantile(u).expect("probability in range")
    } else {
        std_normal_quantile_upper(survival_single_port(g)).expect("probability in range")
    }
}

/// Estimate with an attached numerical error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub warning: bool,
}

impl From<MvnEstimate> for Estimate {
    fn from(m: MvnEstimate) -> Self {
        Estimate {
            value: m.value,
            error: m.error,
            warning: m.warning,
        }
    }
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate {
            value,
            error: 0.0,
            warning: false,
        }
    }
}

/// Best-port gain of a fluid antenna with `N` correlated ports.
///
/// By default `Φ_R(x·1)` and its slope are tabulated once on a uniform
/// grid in `x` (step [`PROFILE_STEP`], in parallel, on first use) and
/// interpolated as a cubic Hermite in `ln Φ_R`. The interpolation error is
/// far below the MVN tolerance, and every later evaluation is O(1).
/// Arguments off the grid fall back to direct MVN evaluation.
#[derive(Debug, Clone)]
pub struct FasGainDistribution {
    geometry: FasGeometry,
    corr: CorrelationMatrix,
    opts: MvnOptions,
    density: DensityForm,
    pdf_arg: PdfArgument,
    tabulate: bool,
    memo: Memo,
    profile: Arc<OnceLock<Profile>>,
}

const MEMO_LIMIT: usize = 1 << 16;
pub const PROFILE_STEP: f64 = 0.125;
const PROFILE_MIN: f64 = -8.0;
const PROFILE_MAX: f64 = 8.5;

/// Evaluations keyed by (kind, g bits), shared between clones.
#[derive(Debug, Clone, Default)]
struct Memo(Arc<Mutex<HashMap<(u8, u64), Estimate>>>);

impl Memo {
    fn get_or(&self, kind: u8, g: f64, f: impl FnOnce() -> Result<Estimate>) -> Result<Estimate> {
        let key = (kind, g.to_bits());
        if let Some(v) = self.0.lock().expect("memo lock").get(&key) {
            return Ok(*v);
        }
        let v = f()?;
        let mut map = self.0.lock().expect("memo lock");
        if map.len() >= MEMO_LIMIT {
            map.clear();
        }
        map.insert(key, v);
        Ok(v)
    }
}

/// `ln Φ_R(x·1)` and `d/dx ln Φ_R(x·1)` at `x_k = lo + k·h`.
#[derive(Debug)]
struct Profile {
    lo: f64,
    log_f: Vec<f64>,
    dlog_f: Vec<f64>,
    value_err: Vec<f64>,
    slope_err: Vec<f64>,
    warning: Vec<bool>,
}

struct ProfilePoint {
    log_f: f64,
    dlog_f: f64,
    value_err: f64,
    slope_err: f64,
    warning: bool,
}

impl Profile {
    fn build(corr: &CorrelationMatrix, opts: &MvnOptions) -> Profile {
        let n = ((PROFILE_MAX - PROFILE_MIN) / PROFILE_STEP).round() as usize + 1;
        let points: Vec<Option<ProfilePoint>> = (0..n)
            .into_par_iter()
            .map(|k| {
                let x = PROFILE_MIN + k as f64 * PROFILE_STEP;
                let (v, d) = mvn_cdf_equicoordinate_with_slope(x, corr, opts).expect("finite abscissa");
                (v.value > 1e-290).then(|| ProfilePoint {
                    log_f: v.value.ln(),
                    dlog_f: d.value / v.value,
                    value_err: v.error,
                    slope_err: d.error,
                    warning: v.warning || d.warning,
                })
            })
            .collect();
        // keep the contiguous run of representable values at the top
        let first = points.iter().rposition(|p| p.is_none()).map_or(0, |i| i + 1);
        let kept: Vec<ProfilePoint> = points.into_iter().skip(first).flatten().collect();
        Profile {
            lo: PROFILE_MIN + first as f64 * PROFILE_STEP,
            log_f: kept.iter().map(|p| p.log_f).collect(),
            dlog_f: kept.iter().map(|p| p.dlog_f).collect(),
            value_err: kept.iter().map(|p| p.value_err).collect(),
            slope_err: kept.iter().map(|p| p.slope_err).collect(),
            warning: kept.iter().map(|p| p.warning).collect(),
        }
    }

    fn top(&self) -> f64 {
        self.lo + (self.log_f.len().max(1) - 1) as f64 * PROFILE_STEP
    }

    /// `(dΦ_R(x·1)/dx) / φ(x)` at the top node.
    fn top_density_factor(&self) -> f64 {
        let k = self.log_f.len() - 1;
        let x = self.top();
        let log_phi = -0.5 * x * x - 0.5 * (2.0 * std::f64::consts::PI).ln();
        (self.log_f[k] - log_phi).exp() * self.dlog_f[k].max(0.0)
    }

    /// `(ln F, d ln F / dx, value error, slope error, warning)` at `x`, or
    /// `None` off the grid.
    fn eval(&self, x: f64) -> Option<(f64, f64, f64, f64, bool)> {
        if self.log_f.len() < 2 {
            return None;
        }
        let pos = (x - self.lo) / PROFILE_STEP;
        if !(pos >= 0.0 && pos <= (self.log_f.len() - 1) as f64) {
            return None;
        }
        let k = (pos.floor() as usize).min(self.log_f.len() - 2);
        let s = pos - k as f64;
        let h = PROFILE_STEP;
        let (y0, y1) = (self.log_f[k], self.log_f[k + 1]);
        let (d0, d1) = (self.dlog_f[k] * h, self.dlog_f[k + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        let y = (2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * d0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * d1;
        let dy = ((6.0 * s2 - 6.0 * s) * y0
            + (3.0 * s2 - 4.0 * s + 1.0) * d0
            + (-6.0 * s2 + 6.0 * s) * y1
            + (3.0 * s2 - 2.0 * s) * d1)
            / h;
        Some((
            y,
            dy,
            self.value_err[k].max(self.value_err[k + 1]),
            self.slope_err[k].max(self.slope_err[k + 1]),
            self.warning[k] || self.warning[k + 1],
        ))
    }
}

impl FasGainDistribution {
    pub fn new(geometry: FasGeometry, model: CorrelationModel, opts: MvnOptions) -> Result<Self> {
        geometry.validate()?;
        let corr = geometry.correlation_matrix(model)?;
        Self::from_matrix(geometry, corr, opts)
    }

    /// Distribution for an arbitrary correlation matrix (geometry is only a label).
    pub fn from_matrix(geometry: FasGeometry, corr: CorrelationMatrix, opts: MvnOptions) -> Result<Self> {
        if corr.dim() != geometry.ports() {
            return Err(Error::config("correlation", "matrix size does not match the port count"));
        }
        Ok(FasGainDistribution {
            geometry,
            corr,
            opts,
            density: DensityForm::default(),
            pdf_arg: PdfArgument::default(),
            tabulate: true,
            memo: Memo::default(),
            profile: Arc::default(),
        })
    }

    pub fn with_density(mut self, density: DensityForm) -> Self {
        self.density = density;
        self
    }

    pub fn with_pdf_argument(mut self, arg: PdfArgument) -> Self {
        self.pdf_arg = arg;
        self.memo = Memo::default();
        self
    }

    /// Evaluate every CDF and density by a fresh MVN call instead of the
    /// tabulated profile.
    pub fn with_tabulation(mut self, on: bool) -> Self {
        self.tabulate = on;
        self
    }

    /// Builds the tabulated profile now rather than on first use.
    pub fn prepare(&self) {
        if self.uses_profile() {
            self.profile();
        }
    }

    fn uses_profile(&self) -> bool {
        self.tabulate && self.ports() > 1 && !self.corr.is_identity()
    }

    fn profile(&self) -> &Profile {
        self.profile.get_or_init(|| Profile::build(&self.corr, &self.opts))
    }

    pub fn geometry(&self) -> &FasGeometry {
        &self.geometry
    }

    pub fn correlation(&self) -> &CorrelationMatrix {
        &self.corr
    }

    pub fn options(&self) -> &MvnOptions {
        &self.opts
    }

    pub fn density_form(&self) -> DensityForm {
        self.density
    }

    pub fn ports(&self) -> usize {
        self.corr.dim()
    }

    pub fn cdf_fas(&self, g: f64) -> Result<Estimate> {
        if g.is_nan() || g < 0.0 {
            return Err(Error::Domain {
                function: "cdf_fas",
                value: g,
                expected: "g >= 0",
            });
        }
        if g == 0.0 {
            return Ok(Estimate::exact(0.0));
        }
        if self.ports() == 1 {
            return Ok(Estimate::exact(cdf_single_port(g)));
        }
        if self.corr.is_identity() {
            return Ok(Estimate::exact(cdf_single_port(g).powi(self.ports() as i32)));
        }
        let x = normal_score(g);
        if self.uses_profile() {
            if let Some((log_f, _, err, _, warning)) = self.profile().eval(x) {
                return Ok(Estimate {
                    value: log_f.exp().min(1.0),
                    error: err,
                    warning,
                });
            }
            if x > self.profile().top() {
                // Fréchet bounds 1 - N·s ≤ F ≤ 1 - s, with s below 1e-17 here
                let s = survival_single_port(g);
                let n = self.ports() as f64;
                return Ok(Estimate {
                    value: 1.0 - 0.5 * (n + 1.0) * s,
                    error: 0.5 * (n - 1.0) * s,
                    warning: false,
                });
            }
        }
        self.memo
            .get_or(0, g, || Ok(mvn_cdf_equicoordinate(x, &self.corr, &self.opts)?.into()))
    }

    /// `1 - cdf_fas(g)`.
    pub fn survival_fas(&self, g: f64) -> Result<Estimate> {
        if self.ports() == 1 && g > 0.0 {
            return Ok(Estimate::exact(survival_single_port(g)));
        }
        let c = self.cdf_fas(g)?;
        Ok(Estimate {
            value: 1.0 - c.value,
            ..c
        })
    }

    /// Density chosen by [`DensityForm`].
    pub fn pdf(&self, g: f64) -> Result<Estimate> {
        match self.density {
            DensityForm::Exact => self.pdf_fas_exact(g),
            DensityForm::CopulaDiagonal => self.pdf_fas(g).map(Estimate::exact),
        }
    }

    /// `f(g)^N · c_R(x, …, x)`, assembled in the log domain.
    pub fn pdf_fas(&self, g: f64) -> Result<f64> {
        if self.ports() == 1 {
            return pdf_single_port_with(g, self.pdf_arg);
        }
        let log_marg = self.ports() as f64 * log_pdf_single_port(g, self.pdf_arg)?;
        if log_marg < -745.0 {
            return Ok(0.0);
        }
        let x = normal_score(g);
        if !x.is_finite() {
            return Ok(0.0);
        }
        let v = (log_marg + log_copula_density_factor(x, &self.corr)?).exp();
        if !v.is_finite() {
            return Err(Error::Numerical(format!("density overflows at g = {g}")));
        }
        Ok(v)
    }

    /// Derivative of `cdf_fas`, i.e. `f(g) Σ_i P(Z_{-i} ≤ x | Z_i = x)`,
    /// which equals `f(g) · (dΦ_R(x·1)/dx) / φ(x)`.
    pub fn pdf_fas_exact(&self, g: f64) -> Result<Estimate> {
        if self.ports() == 1 {
            return pdf_single_port_with(g, self.pdf_arg).map(Estimate::exact);
        }
        if self.corr.is_identity() {
            let n = self.ports() as i32;
            let f = pdf_single_port_with(g, self.pdf_arg)?;
            return Ok(Estimate::exact(n as f64 * f * cdf_single_port(g).powi(n - 1)));
        }
        let log_f = log_pdf_single_port(g, self.pdf_arg)?;
        if log_f < -745.0 {
            return Ok(Estimate::exact(0.0));
        }
        let x = normal_score(g);
        if x == f64::INFINITY {
            // every other port is certainly below
            return Ok(Estimate::exact(self.ports() as f64 * log_f.exp()));
        }
        let log_phi = -0.5 * x * x - 0.5 * (2.0 * std::f64::consts::PI).ln();
        if self.uses_profile() {
            if let Some((log_c, dlog_c, _, slope_err, warning)) = self.profile().eval(x) {
                let value = if dlog_c > 0.0 {
                    (log_f + log_c + dlog_c.ln() - log_phi).exp()
                } else {
                    0.0
                };
                return Ok(Estimate {
                    value,
                    error: (log_f - log_phi).exp() * slope_err,
                    warning,
                });
            }
            let profile = self.profile();
            if x > profile.top() && profile.log_f.len() >= 2 {
                // the factor Σ_i P(Z_{-i} ≤ x | Z_i = x) increases with x up to N
                let lo = profile.top_density_factor();
                let n = self.ports() as f64;
                let f = log_f.exp();
                return Ok(Estimate {
                    value: 0.5 * (lo + n) * f,
                    error: 0.5 * (n - lo).max(0.0) * f,
                    warning: false,
                });
            }
        }
        self.memo.get_or(1, g, || {
            let (_, slope) = mvn_cdf_equicoordinate_with_slope(x, &self.corr, &self.opts)?;
            let scale = (log_f - log_phi).exp();
            Ok(Estimate {
                value: scale * slope.value,
                error: scale * slope.error,
                warning: slope.warning,
            })
        })
    }

    /// Central difference of `cdf_fas` with relative step `h`.
    pub fn pdf_fas_numeric(&self, g: f64, h: f64) -> Result<f64> {
        check_positive("pdf_fas_numeric", g)?;
        let step = h * g;
        let up = self.cdf_fas(g + step)?.value;
        let dn = self.cdf_fas(g - step)?.value;
        Ok((up - dn) / (2.0 * step))
    }
}
