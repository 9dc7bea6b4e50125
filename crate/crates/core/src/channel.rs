//! Geometry, topology, power split and spatial correlation of the nodes.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::copula::{repair_and_factor, CorrelationMatrix};
use crate::error::{Error, Result};
use crate::special::{bessel_j0, sph_bessel_j0};

/// Decibels to a linear power ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Kernel used to turn a port separation into a correlation coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorrelationModel {
    /// `sin(2πd)/(2πd)`, the three-dimensional isotropic model.
    #[default]
    Spherical,
    /// `J0(2πd)`, Jakes' two-dimensional model.
    Cylindrical,
}

impl CorrelationModel {
    fn kernel(self, x: f64) -> f64 {
        match self {
            CorrelationModel::Spherical => sph_bessel_j0(x),
            CorrelationModel::Cylindrical => bessel_j0(x),
        }
    }
}

/// Planar port grid of a fluid antenna, with aperture sizes in wavelengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FasGeometry {
    pub n1: usize,
    pub n2: usize,
    pub w1: f64,
    pub w2: f64,
}

impl FasGeometry {
    pub fn new(n1: usize, n2: usize, w1: f64, w2: f64) -> Result<Self> {
        let g = FasGeometry { n1, n2, w1, w2 };
        g.validate()?;
        Ok(g)
    }

    /// A single fixed antenna.
    pub fn single_port() -> Self {
        FasGeometry {
            n1: 1,
            n2: 1,
            w1: 0.0,
            w2: 0.0,
        }
    }

    /// `side × side` ports over a square aperture of `area` square wavelengths.
    pub fn square(side: usize, area: f64) -> Result<Self> {
        let w = area.max(0.0).sqrt();
        Self::new(side, side, w, w)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n1 == 0 || self.n2 == 0 {
            return Err(Error::config("geometry", "port counts must be at least 1"));
        }
        if !(self.w1 >= 0.0 && self.w2 >= 0.0 && self.w1.is_finite() && self.w2.is_finite()) {
            return Err(Error::config("geometry", "apertures must be finite and non-negative"));
        }
        Ok(())
    }

    pub fn ports(&self) -> usize {
        self.n1 * self.n2
    }

    /// Row-major 1-based port index to 1-based grid coordinates.
    pub fn port_map(&self, n: usize) -> Result<(usize, usize)> {
        if n == 0 || n > self.ports() {
            return Err(Error::Domain {
                function: "port_map",
                value: n as f64,
                expected: "1 <= n <= N",
            });
        }
        Ok(((n - 1) / self.n2 + 1, (n - 1) % self.n2 + 1))
    }

    pub fn port_unmap(&self, a: usize, b: usize) -> Result<usize> {
        if a == 0 || b == 0 || a > self.n1 || b > self.n2 {
            return Err(Error::Domain {
                function: "port_unmap",
                value: (a.max(b)) as f64,
                expected: "coordinates inside the grid",
            });
        }
        Ok((a - 1) * self.n2 + b)
    }

    fn offset(count: usize, aperture: f64, delta: usize) -> f64 {
        if count <= 1 {
            0.0
        } else {
            delta as f64 / (count - 1) as f64 * aperture
        }
    }

    /// Correlation between ports `n` and `m` (1-based).
    pub fn spatial_correlation(&self, n: usize, m: usize, model: CorrelationModel) -> Result<f64> {
        let (a1, a2) = self.port_map(n)?;
        let (b1, b2) = self.port_map(m)?;
        let d1 = Self::offset(self.n1, self.w1, a1.abs_diff(b1));
        let d2 = Self::offset(self.n2, self.w2, a2.abs_diff(b2));
        Ok(model.kernel(2.0 * PI * d1.hypot(d2)))
    }

    /// Row-major `N×N` matrix of port correlations, before any repair.
    pub fn correlation_entries(&self, model: CorrelationModel) -> Vec<f64> {
        let n = self.ports();
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            out[i * n + i] = 1.0;
            for j in 0..i {
                let r = self
                    .spatial_correlation(i + 1, j + 1, model)
                    .expect("indices are in range");
                out[i * n + j] = r;
                out[j * n + i] = r;
            }
        }
        out
    }

    /// Factored (and, if needed, repaired) correlation matrix.
    pub fn correlation_matrix(&self, model: CorrelationModel) -> Result<CorrelationMatrix> {
        repair_and_factor(self.ports(), &self.correlation_entries(model))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeId {
    NearUser,
    FarUser,
    Eavesdropper,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Topology {
    pub d_t: f64,
    pub d_un: f64,
    pub d_uf: f64,
    pub d_e: f64,
    pub alpha: f64,
    pub l_p: f64,
}

impl Default for Topology {
    fn default() -> Self {
        Topology {
            d_t: 100.0,
            d_un: 20.0,
            d_uf: 60.0,
            d_e: 100.0,
            alpha: 3.0,
            l_p: 1.0,
        }
    }
}

impl Topology {
    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("d_t", self.d_t),
            ("d_un", self.d_un),
            ("d_uf", self.d_uf),
            ("d_e", self.d_e),
            ("l_p", self.l_p),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(key, format!("must be positive, got {v}")));
            }
        }
        if !(self.alpha > 2.0 && self.alpha.is_finite()) {
            return Err(Error::config("alpha", format!("must exceed 2, got {}", self.alpha)));
        }
        Ok(())
    }

    pub fn distance(&self, node: NodeId) -> f64 {
        match node {
            NodeId::NearUser => self.d_un,
            NodeId::FarUser => self.d_uf,
            NodeId::Eavesdropper => self.d_e,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadioParams {
    pub p_beacon_dbm: f64,
    pub noise_un_dbm: f64,
    pub noise_uf_dbm: f64,
    pub noise_e_dbm: f64,
}

impl Default for RadioParams {
    fn default() -> Self {
        RadioParams {
            p_beacon_dbm: 30.0,
            noise_un_dbm: -90.0,
            noise_uf_dbm: -90.0,
            noise_e_dbm: -80.0,
        }
    }
}

impl RadioParams {
    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("p_beacon_dbm", self.p_beacon_dbm),
            ("noise_un_dbm", self.noise_un_dbm),
            ("noise_uf_dbm", self.noise_uf_dbm),
            ("noise_e_dbm", self.noise_e_dbm),
        ] {
            let w = dbm_to_watts(v);
            if !(v.is_finite() && w > 0.0 && w.is_finite()) {
                return Err(Error::config(key, format!("not a usable dBm value: {v}")));
            }
        }
        Ok(())
    }

    pub fn noise_dbm(&self, node: NodeId) -> f64 {
        match node {
            NodeId::NearUser => self.noise_un_dbm,
            NodeId::FarUser => self.noise_uf_dbm,
            NodeId::Eavesdropper => self.noise_e_dbm,
        }
    }
}

/// Linear average SNR `P_p L_p / (σ² d_t^α d_j^α)`.
pub fn average_snr(node: NodeId, t: &Topology, r: &RadioParams) -> f64 {
    dbm_to_watts(r.p_beacon_dbm) * t.l_p
        / (dbm_to_watts(r.noise_dbm(node)) * t.d_t.powf(t.alpha) * t.distance(node).powf(t.alpha))
}

/// NOMA power split between the near and far user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerAllocation {
    pub p_un: f64,
    pub p_uf: f64,
}

impl Default for PowerAllocation {
    fn default() -> Self {
        PowerAllocation { p_un: 0.4, p_uf: 0.6 }
    }
}

impl PowerAllocation {
    pub fn new(p_un: f64, p_uf: f64) -> Result<Self> {
        let p = PowerAllocation { p_un, p_uf };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let PowerAllocation { p_un, p_uf } = *self;
        if !(p_un > 0.0 && p_un < 1.0 && p_uf > 0.0 && p_uf < 1.0) {
            return Err(Error::config("power", "p_un and p_uf must lie in (0, 1)"));
        }
        if (p_un + p_uf - 1.0).abs() > 1e-12 {
            return Err(Error::config("power", format!("p_un + p_uf = {} != 1", p_un + p_uf)));
        }
        if p_uf <= p_un {
            return Err(Error::config("power", "the far user needs the larger share (p_uf > p_un)"));
        }
        Ok(())
    }

    pub fn share(&self, node: NodeId) -> f64 {
        match node {
            NodeId::NearUser => self.p_un,
            _ => self.p_uf,
        }
    }
}
