//! Gauss–Laguerre and Gauss–Legendre rules.
//!
//! Nodes start from the eigenvalues of the Jacobi matrix of the
//! three-term recurrence (implicit QL, no eigenvectors) and are polished
//! with Newton steps on the polynomial itself. Weights use the classical
//! closed forms:
//!
//! * Laguerre: `ω = ε / ((M+1)² L_{M+1}(ε)²)`
//! * Legendre: `ω = 2 / ((1-ψ²) P'_M(ψ)²)`
//!
//! A rule of order `M` has exactly `M` nodes.

use crate::error::{Error, Result};

pub const MAX_ORDER: usize = 200;

/// How a semi-infinite integral is handed to a Laguerre rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LaguerreMapping {
    /// `Σ e^{ε} ω f(ε)` on the original variable.
    Direct,
    /// Substitute `x = s (u/2)^p` first. Densities with a log singularity at
    /// the origin and heavy tails converge much faster this way.
    Power { power: f64, scale: f64 },
}

impl Default for LaguerreMapping {
    fn default() -> Self {
        LaguerreMapping::square_root(1.0)
    }
}

impl LaguerreMapping {
    pub fn square_root(scale: f64) -> Self {
        LaguerreMapping::Power { power: 2.0, scale }
    }

    /// Node `x` and Jacobian for an integration variable `u`.
    pub fn apply(self, u: f64) -> (f64, f64) {
        match self {
            LaguerreMapping::Direct => (u, 1.0),
            LaguerreMapping::Power { power, scale } => {
                let h = 0.5 * u;
                let x = scale * h.powf(power);
                (x, 0.5 * power * scale * h.powf(power - 1.0))
            }
        }
    }

    /// Same substitution with a different scale; `Direct` is left alone.
    pub fn with_scale(self, scale: f64) -> Self {
        match self {
            LaguerreMapping::Direct => LaguerreMapping::Direct,
            LaguerreMapping::Power { power, .. } => LaguerreMapping::Power { power, scale },
        }
    }

    pub fn with_power(self, power: f64) -> Self {
        match self {
            LaguerreMapping::Direct => LaguerreMapping::Direct,
            LaguerreMapping::Power { scale, .. } => LaguerreMapping::Power { power, scale },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadratureKind {
    Laguerre,
    Legendre,
}

/// Immutable set of nodes and weights.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    kind: QuadratureKind,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// Weights pre-multiplied by the inverse weight function, i.e.
    /// `e^{ε} ω` for Laguerre. Identical to `weights` for Legendre.
    direct_weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn kind(&self) -> QuadratureKind {
        self.kind
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Weights against the rule's weight function. High-order Laguerre
    /// weights underflow to zero in double precision; use
    /// [`direct_weights`](Self::direct_weights) for integration.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn direct_weights(&self) -> &[f64] {
        &self.direct_weights
    }

    /// `(node, e^{node}·weight)` pairs for Laguerre; `(node, weight)` for Legendre.
    pub fn iter_direct(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.direct_weights.iter().copied())
    }

    /// `∫_0^∞ f(x) dx ≈ Σ e^{ε_m} ω_m f(ε_m)`.
    pub fn integrate_semi_infinite(&self, f: impl Fn(f64) -> f64) -> Result<f64> {
        self.try_integrate_semi_infinite(|x| Ok(f(x)))
    }

    pub fn try_integrate_semi_infinite(
        &self,
        mut f: impl FnMut(f64) -> Result<f64>,
    ) -> Result<f64> {
        if self.kind != QuadratureKind::Laguerre {
            return Err(Error::config(
                "rule",
                "semi-infinite integration needs a Laguerre rule",
            ));
        }
        let mut acc = 0.0;
        for (x, w) in self.iter_direct() {
            let v = f(x)?;
            if !v.is_finite() {
                return Err(Error::Evaluation { node: x, value: v });
            }
            acc += w * v;
        }
        Ok(acc)
    }

    /// `∫_0^∞ f(x) dx` after the given change of variables.
    pub fn integrate_mapped(
        &self,
        mapping: LaguerreMapping,
        mut f: impl FnMut(f64) -> Result<f64>,
    ) -> Result<f64> {
        self.try_integrate_semi_infinite(|u| {
            let (x, jac) = mapping.apply(u);
            if jac == 0.0 {
                return Ok(0.0);
            }
            let v = f(x)?;
            if !v.is_finite() {
                return Err(Error::Evaluation { node: x, value: v });
            }
            Ok(v * jac)
        })
    }

    /// `∫_a^b f(x) dx ≈ (b-a)/2 Σ ω f((b-a)/2 ψ + (b+a)/2)`.
    pub fn integrate_interval(&self, f: impl Fn(f64) -> f64, a: f64, b: f64) -> Result<f64> {
        self.try_integrate_interval(|x| Ok(f(x)), a, b)
    }

    pub fn try_integrate_interval(
        &self,
        mut f: impl FnMut(f64) -> Result<f64>,
        a: f64,
        b: f64,
    ) -> Result<f64> {
        if self.kind != QuadratureKind::Legendre {
            return Err(Error::config(
                "rule",
                "finite-interval integration needs a Legendre rule",
            ));
        }
        if !(a < b) {
            return Err(Error::Domain {
                function: "integrate_interval",
                value: b - a,
                expected: "a < b",
            });
        }
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        let mut acc = 0.0;
        for (psi, w) in self.iter_direct() {
            let x = half * psi + mid;
            let v = f(x)?;
            if !v.is_finite() {
                return Err(Error::Evaluation { node: x, value: v });
            }
            acc += w * v;
        }
        Ok(half * acc)
    }
}

fn check_order(order: usize) -> Result<()> {
    if (1..=MAX_ORDER).contains(&order) {
        Ok(())
    } else {
        Err(Error::config(
            "quadrature order",
            format!("{order} not in 1..={MAX_ORDER}"),
        ))
    }
}

/// Eigenvalues of a symmetric tridiagonal matrix (implicit QL with Wilkinson
/// shifts). `off[i]` couples `diag[i]` and `diag[i+1]`.
fn tridiagonal_eigenvalues(mut d: Vec<f64>, off: &[f64]) -> Result<Vec<f64>> {
    let n = d.len();
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(off);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::Numerical("QL iteration did not converge".into()));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d.sort_by(|a, b| a.total_cmp(b));
    Ok(d)
}

/// `(e^{-x/2} L_n(x), e^{-x/2} L_{n-1}(x))` by the three-term recurrence.
fn laguerre_scaled(n: usize, x: f64) -> (f64, f64) {
    let scale = (-0.5 * x).exp();
    let mut prev = 0.0;
    let mut cur = scale;
    for k in 0..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 - x) * cur - kf * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    (cur, prev)
}

/// `(P_n(x), P_{n-1}(x))`.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut prev = 0.0;
    let mut cur = 1.0;
    for k in 0..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * x * cur - kf * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    (cur, prev)
}

/// Newton polish of a Laguerre root. The step `L/L'` is scale-free, so the
/// scaled recurrence can be used without overflow.
fn polish_laguerre(n: usize, mut x: f64) -> f64 {
    let nf = n as f64;
    for _ in 0..8 {
        let (ln, lnm1) = laguerre_scaled(n, x);
        // x L'_n = n (L_n - L_{n-1})
        let deriv = nf * (ln - lnm1) / x;
        let step = ln / deriv;
        x -= step;
        if step.abs() <= 4.0 * f64::EPSILON * x.abs() {
            break;
        }
    }
    x
}

fn polish_legendre(n: usize, mut x: f64) -> f64 {
    let nf = n as f64;
    for _ in 0..8 {
        let (pn, pnm1) = legendre(n, x);
        let deriv = nf * (x * pn - pnm1) / (x * x - 1.0);
        let step = pn / deriv;
        x -= step;
        if step.abs() <= 4.0 * f64::EPSILON {
            break;
        }
    }
    x
}

/// Gauss–Laguerre rule for `∫_0^∞ e^{-x} f(x) dx`.
pub fn gauss_laguerre_rule(order: usize) -> Result<QuadratureRule> {
    check_order(order)?;
    let diag: Vec<f64> = (0..order).map(|k| 2.0 * k as f64 + 1.0).collect();
    let off: Vec<f64> = (1..order).map(|k| k as f64).collect();
    let guesses = tridiagonal_eigenvalues(diag, &off)?;
    let mut nodes = Vec::with_capacity(order);
    let mut weights = Vec::with_capacity(order);
    let mut direct = Vec::with_capacity(order);
    for g in guesses {
        let x = polish_laguerre(order, g);
        // At a root (M+1) L_{M+1} = -x L'_M, so ε/((M+1)² L_{M+1}²) = 1/(ε L'_M²).
        // The derivative form is the better conditioned of the two.
        let (lm, lmm1) = laguerre_scaled(order, x);
        let deriv = order as f64 * (lm - lmm1) / x;
        let dw = 1.0 / (x * deriv * deriv);
        nodes.push(x);
        direct.push(dw);
        weights.push(dw * (-x).exp());
    }
    Ok(QuadratureRule {
        kind: QuadratureKind::Laguerre,
        nodes,
        weights,
        direct_weights: direct,
    })
}

/// Gauss–Legendre rule on `(-1, 1)`.
pub fn gauss_legendre_rule(order: usize) -> Result<QuadratureRule> {
    check_order(order)?;
    let diag = vec![0.0; order];
    let off: Vec<f64> = (1..order)
        .map(|k| {
            let kf = k as f64;
            kf / (4.0 * kf * kf - 1.0).sqrt()
        })
        .collect();
    let guesses = tridiagonal_eigenvalues(diag, &off)?;
    let nf = order as f64;
    let mut nodes = Vec::with_capacity(order);
    let mut weights = Vec::with_capacity(order);
    for g in guesses {
        let x = polish_legendre(order, g);
        let (pn, pnm1) = legendre(order, x);
        let deriv = nf * (x * pn - pnm1) / (x * x - 1.0);
        nodes.push(x);
        weights.push(2.0 / ((1.0 - x * x) * deriv * deriv));
    }
    // Exact symmetry about the origin.
    for i in 0..order / 2 {
        let j = order - 1 - i;
        let x = 0.5 * (nodes[j] - nodes[i]);
        let w = 0.5 * (weights[i] + weights[j]);
        nodes[i] = -x;
        nodes[j] = x;
        weights[i] = w;
        weights[j] = w;
    }
    if order % 2 == 1 {
        nodes[order / 2] = 0.0;
    }
    Ok(QuadratureRule {
        kind: QuadratureKind::Legendre,
        direct_weights: weights.clone(),
        nodes,
        weights,
    })
}
