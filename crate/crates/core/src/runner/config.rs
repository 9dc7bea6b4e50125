//! TOML run configuration.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::channel::{
    average_snr, db_to_linear, CorrelationModel, FasGeometry, NodeId, PowerAllocation, RadioParams, Topology,
};
use crate::distribution::{DensityForm, PdfArgument};
use crate::error::{Error, Result};
use crate::metrics::{Metric, SecrecyConfig};
use crate::monte_carlo::{McMode, MIN_SAMPLES};
use crate::quadrature::{LaguerreMapping, MAX_ORDER};

/// Topology, radio parameters and the NOMA power split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemConfig {
    pub alpha: f64,
    pub l_p: f64,
    pub d_t: f64,
    pub d_un: f64,
    pub d_uf: f64,
    pub d_e: f64,
    pub p_beacon_dbm: f64,
    pub noise_un_dbm: f64,
    pub noise_uf_dbm: f64,
    pub noise_e_dbm: f64,
    pub p_un: f64,
    pub p_uf: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        let t = Topology::default();
        let r = RadioParams::default();
        let a = PowerAllocation::default();
        SystemConfig {
            alpha: t.alpha,
            l_p: t.l_p,
            d_t: t.d_t,
            d_un: t.d_un,
            d_uf: t.d_uf,
            d_e: t.d_e,
            p_beacon_dbm: r.p_beacon_dbm,
            noise_un_dbm: r.noise_un_dbm,
            noise_uf_dbm: r.noise_uf_dbm,
            noise_e_dbm: r.noise_e_dbm,
            p_un: a.p_un,
            p_uf: a.p_uf,
        }
    }
}

impl SystemConfig {
    pub fn topology(&self) -> Topology {
        Topology {
            d_t: self.d_t,
            d_un: self.d_un,
            d_uf: self.d_uf,
            d_e: self.d_e,
            alpha: self.alpha,
            l_p: self.l_p,
        }
    }

    pub fn radio(&self) -> RadioParams {
        RadioParams {
            p_beacon_dbm: self.p_beacon_dbm,
            noise_un_dbm: self.noise_un_dbm,
            noise_uf_dbm: self.noise_uf_dbm,
            noise_e_dbm: self.noise_e_dbm,
        }
    }

    pub fn allocation(&self) -> PowerAllocation {
        PowerAllocation {
            p_un: self.p_un,
            p_uf: self.p_uf,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.topology().validate()?;
        self.radio().validate()?;
        self.allocation().validate()
    }
}

/// Optional fixed average SNRs in dB. A missing entry is derived from the
/// topology and radio parameters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SnrConfig {
    pub un_db: Option<f64>,
    pub uf_db: Option<f64>,
    pub e_db: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    pub correlation: CorrelationModel,
    pub near: FasGeometry,
    pub far: FasGeometry,
    pub eve: FasGeometry,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        let quad = FasGeometry {
            n1: 2,
            n2: 2,
            w1: 1.0,
            w2: 1.0,
        };
        GeometryConfig {
            correlation: CorrelationModel::Spherical,
            near: quad,
            far: quad,
            eve: quad,
        }
    }
}

impl GeometryConfig {
    pub fn node(&self, node: NodeId) -> FasGeometry {
        match node {
            NodeId::NearUser => self.near,
            NodeId::FarUser => self.far,
            NodeId::Eavesdropper => self.eve,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (key, g) in [("geometry.near", self.near), ("geometry.far", self.far), ("geometry.eve", self.eve)] {
            g.validate()
                .map_err(|e| Error::config(key, e.to_string()))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MappingChoice {
    #[default]
    Power,
    Direct,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SecrecySection {
    pub rate_un: f64,
    pub rate_uf: f64,
    pub laguerre_order: usize,
    pub legendre_order: usize,
    pub laguerre_mapping: MappingChoice,
    pub pdf_argument: PdfArgument,
    pub density: DensityForm,
    pub asc_far_literal: bool,
    /// Extra low orders reported next to the main result, evaluated with
    /// the unmapped Laguerre sum.
    pub extra_orders: Vec<usize>,
}

impl Default for SecrecySection {
    fn default() -> Self {
        let s = SecrecyConfig::default();
        SecrecySection {
            rate_un: s.rate_un,
            rate_uf: s.rate_uf,
            laguerre_order: s.laguerre_order,
            legendre_order: s.legendre_order,
            laguerre_mapping: MappingChoice::Power,
            pdf_argument: PdfArgument::Corrected,
            density: DensityForm::Exact,
            asc_far_literal: false,
            extra_orders: Vec::new(),
        }
    }
}

impl SecrecySection {
    pub fn secrecy_config(&self) -> SecrecyConfig {
        SecrecyConfig {
            rate_un: self.rate_un,
            rate_uf: self.rate_uf,
            laguerre_order: self.laguerre_order,
            legendre_order: self.legendre_order,
            mapping: match self.laguerre_mapping {
                MappingChoice::Power => LaguerreMapping::default(),
                MappingChoice::Direct => LaguerreMapping::Direct,
            },
            asc_far_literal: self.asc_far_literal,
        }
    }

    /// Same rates, order `m` for both rules, unmapped Laguerre sum.
    pub fn low_order_config(&self, m: usize) -> SecrecyConfig {
        SecrecyConfig {
            laguerre_order: m,
            legendre_order: m,
            mapping: LaguerreMapping::Direct,
            ..self.secrecy_config()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.secrecy_config().validate()?;
        for (key, m) in [
            ("secrecy.laguerre_order", self.laguerre_order),
            ("secrecy.legendre_order", self.legendre_order),
        ] {
            if !(1..=MAX_ORDER).contains(&m) {
                return Err(Error::config(key, format!("must lie in 1..={MAX_ORDER}, got {m}")));
            }
        }
        if let Some(&m) = self.extra_orders.iter().find(|&&m| !(1..=MAX_ORDER).contains(&m)) {
            return Err(Error::config(
                "secrecy.extra_orders",
                format!("must lie in 1..={MAX_ORDER}, got {m}"),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    SnrUn,
    SnrUf,
    SnrE,
    RateUn,
    RateUf,
    BeaconDbm,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::SnrUn => "snr_un",
            SweepVariable::SnrUf => "snr_uf",
            SweepVariable::SnrE => "snr_e",
            SweepVariable::RateUn => "rate_un",
            SweepVariable::RateUf => "rate_uf",
            SweepVariable::BeaconDbm => "beacon_dbm",
        }
    }

    fn is_snr(self) -> bool {
        matches!(self, SweepVariable::SnrUn | SweepVariable::SnrUf | SweepVariable::SnrE)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepScale {
    Linear,
    #[default]
    Db,
}

/// Evenly spaced values of one variable. With `scale = "db"` SNRs are given
/// in dB; rates are always in bit/s/Hz and the beacon power in dBm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub variable: SweepVariable,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    pub scale: SweepScale,
    pub metrics: Vec<Metric>,
}

fn default_metrics() -> Vec<Metric> {
    vec![Metric::SopExternalNear]
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            variable: SweepVariable::SnrUn,
            start: 0.0,
            stop: 20.0,
            points: 9,
            scale: SweepScale::Db,
            metrics: default_metrics(),
        }
    }
}

impl SweepConfig {
    pub fn values(&self) -> Vec<f64> {
        let n = self.points;
        (0..n)
            .map(|i| {
                if i + 1 == n {
                    self.stop
                } else {
                    self.start + (self.stop - self.start) * i as f64 / (n - 1) as f64
                }
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.points < 2 {
            return Err(Error::config("sweep.points", format!("need at least 2, got {}", self.points)));
        }
        if !(self.start.is_finite() && self.stop.is_finite()) {
            return Err(Error::config("sweep", "start and stop must be finite"));
        }
        let rate = matches!(self.variable, SweepVariable::RateUn | SweepVariable::RateUf);
        if rate && self.scale == SweepScale::Db {
            return Err(Error::config("sweep.scale", "rates are swept on a linear scale"));
        }
        if rate && self.start.min(self.stop) < 0.0 {
            return Err(Error::config("sweep.start", "rates must be >= 0"));
        }
        if self.variable.is_snr() && self.scale == SweepScale::Linear && self.start.min(self.stop) <= 0.0 {
            return Err(Error::config("sweep.start", "linear SNRs must be positive"));
        }
        if self.metrics.is_empty() {
            return Err(Error::config("sweep.metrics", "at least one metric is required"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McConfig {
    /// Zero disables the Monte Carlo columns.
    pub n_samples: u64,
    pub seed: u64,
    pub mode: McMode,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            n_samples: 0,
            seed: 1,
            mode: McMode::Copula,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub csv: Option<PathBuf>,
    /// Significant digits.
    pub precision: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            csv: None,
            precision: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub system: SystemConfig,
    pub snr: SnrConfig,
    pub geometry: GeometryConfig,
    pub secrecy: SecrecySection,
    pub sweep: SweepConfig,
    pub mc: McConfig,
    pub output: OutputConfig,
}

/// Parses and validates a TOML document. Omitted keys take their defaults.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Parse(e.message().trim().to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Average linear SNRs of the three nodes at one sweep value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointSetting {
    pub snr: [f64; 3],
    pub rate_un: f64,
    pub rate_uf: f64,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        self.geometry.validate()?;
        self.secrecy.validate()?;
        self.sweep.validate()?;
        for (key, v) in [("snr.un_db", self.snr.un_db), ("snr.uf_db", self.snr.uf_db), ("snr.e_db", self.snr.e_db)] {
            if let Some(v) = v {
                if !v.is_finite() {
                    return Err(Error::config(key, format!("must be finite, got {v}")));
                }
            }
        }
        let pinned = self.snr.un_db.is_some() && self.snr.uf_db.is_some() && self.snr.e_db.is_some();
        if self.sweep.variable == SweepVariable::BeaconDbm && pinned {
            return Err(Error::config(
                "sweep.variable",
                "beacon_dbm has no effect when every SNR is fixed in [snr]",
            ));
        }
        if self.mc.n_samples != 0 && self.mc.n_samples < MIN_SAMPLES {
            return Err(Error::config(
                "mc.n_samples",
                format!("must be 0 or at least {MIN_SAMPLES}, got {}", self.mc.n_samples),
            ));
        }
        if !(1..=17).contains(&self.output.precision) {
            return Err(Error::config("output.precision", "must lie in 1..=17"));
        }
        Ok(())
    }

    /// SNRs and rates at sweep value `x`.
    pub fn point(&self, x: f64) -> PointSetting {
        let mut radio = self.system.radio();
        if self.sweep.variable == SweepVariable::BeaconDbm {
            radio.p_beacon_dbm = x;
        }
        let topo = self.system.topology();
        let derived = |node, fixed: Option<f64>| fixed.map(db_to_linear).unwrap_or_else(|| average_snr(node, &topo, &radio));
        let mut snr = [
            derived(NodeId::NearUser, self.snr.un_db),
            derived(NodeId::FarUser, self.snr.uf_db),
            derived(NodeId::Eavesdropper, self.snr.e_db),
        ];
        let level = match self.sweep.scale {
            SweepScale::Db => db_to_linear(x),
            SweepScale::Linear => x,
        };
        let (mut rate_un, mut rate_uf) = (self.secrecy.rate_un, self.secrecy.rate_uf);
        match self.sweep.variable {
            SweepVariable::SnrUn => snr[0] = level,
            SweepVariable::SnrUf => snr[1] = level,
            SweepVariable::SnrE => snr[2] = level,
            SweepVariable::RateUn => rate_un = x,
            SweepVariable::RateUf => rate_uf = x,
            SweepVariable::BeaconDbm => {}
        }
        PointSetting { snr, rate_un, rate_uf }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.system.p_un, 0.4);
        assert_eq!(cfg.system.alpha, 3.0);
        assert_eq!(cfg.system.d_uf, 60.0);
        assert_eq!(cfg.system.noise_e_dbm, -80.0);
        assert_eq!(cfg.secrecy.rate_un, 0.5);
        assert_eq!(cfg.geometry.eve.ports(), 4);
        let p = cfg.point(0.0);
        assert!((p.snr[0] - 1.0).abs() < 1e-12);
        assert!((p.snr[1] - 125.0 / 27.0).abs() < 1e-9);
        assert!((p.snr[2] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn validation_errors() {
        let err = parse_config("[system]\np_un = 0.7\np_uf = 0.3\n").unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("far user"), "{err}");
        let err = parse_config("[system]\nalpha = 1.5\n").unwrap_err();
        assert!(err.to_string().contains("alpha"), "{err}");
        let err = parse_config("[system]\np_un = 0.3\np_uf = 0.6\n").unwrap_err();
        assert!(err.to_string().contains("!= 1"), "{err}");
        assert!(parse_config("[sweep]\nvariable = \"snr_un\"\nstart = 0\nstop = 1\npoints = 1\n").is_err());
        assert!(parse_config("[sweep]\nvariable = \"distance\"\nstart = 0\nstop = 1\npoints = 3\n").is_err());
        assert!(parse_config("[sweep]\nvariable = \"rate_un\"\nstart = 0\nstop = 1\npoints = 3\n").is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = parse_config("[system]\nbogus = 1\n").unwrap_err();
        assert!(matches!(err, Error::Parse(_)));
        assert!(err.to_string().contains("bogus"), "{err}");
        assert!(parse_config("top = 1\n").is_err());
        assert!(parse_config("[geometry.near]\nn1 = 2\nn2 = 2\nw1 = 1\nw2 = 1\nn3 = 1\n").is_err());
    }

    #[test]
    fn full_document() {
        let text = r#"
[system]
p_beacon_dbm = 20.0

[snr]
e_db = 0.0

[geometry]
correlation = "cylindrical"
near = { n1 = 3, n2 = 3, w1 = 2.0, w2 = 2.0 }

[secrecy]
rate_un = 1.0
laguerre_mapping = "direct"
pdf_argument = "paper-literal"
density = "copula-diagonal"
extra_orders = [2, 3]

[sweep]
variable = "rate_uf"
start = 0.0
stop = 3.0
points = 4
scale = "linear"
metrics = ["sop_external_far", "asc_internal_near"]

[mc]
n_samples = 100000
seed = 7
mode = "shared-energy-link"

[output]
csv = "out.csv"
precision = 6
"#;
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.geometry.near.ports(), 9);
        assert_eq!(cfg.geometry.correlation, CorrelationModel::Cylindrical);
        assert_eq!(cfg.secrecy.secrecy_config().mapping, LaguerreMapping::Direct);
        assert_eq!(cfg.sweep.values(), vec![0.0, 1.0, 2.0, 3.0]);
        assert_eq!(cfg.mc.mode, McMode::SharedEnergyLink);
        let p = cfg.point(2.0);
        assert_eq!((p.rate_un, p.rate_uf), (1.0, 2.0));
        assert!((p.snr[0] - 12.5).abs() < 1e-9);
        assert_eq!(p.snr[2], 1.0);
    }

    #[test]
    fn beacon_sweep_scales_every_snr() {
        let cfg = parse_config("[sweep]\nvariable = \"beacon_dbm\"\nstart = 20\nstop = 40\npoints = 3\n").unwrap();
        let lo = cfg.point(20.0);
        let hi = cfg.point(40.0);
        for i in 0..3 {
            assert!((hi.snr[i] / lo.snr[i] - 100.0).abs() < 1e-9);
        }
    }
}
