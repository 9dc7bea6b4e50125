//! Multivariate-normal machinery behind the Gaussian copula.
//!
//! Orthant-type probabilities `P(Z ≤ b)` are estimated with Genz's
//! separation-of-variables transform, variables reordered on the fly so
//! the most constrained ones come first, and integrated by a randomly
//! shifted Richtmyer lattice with a baker's periodization. The shifts give
//! an unbiased error estimate; the number of lattice points doubles until
//! the requested accuracy is met or the budget runs out.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::special::{ndtri_as241, std_normal_cdf, std_normal_pdf};

/// Smallest Cholesky pivot accepted without repair.
pub const PIVOT_FLOOR: f64 = 1e-12;
const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-4;

/// Symmetric positive-definite correlation matrix with a cached Cholesky factor.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    dim: usize,
    entries: Vec<f64>,
    lower: Vec<f64>,
    log_det: f64,
    jitter: f64,
    ones_quad: f64,
}

impl CorrelationMatrix {
    pub fn identity(dim: usize) -> Self {
        let mut e = vec![0.0; dim * dim];
        for i in 0..dim {
            e[i * dim + i] = 1.0;
        }
        repair_and_factor(dim, &e).expect("identity is positive definite")
    }

    /// Equicorrelated matrix with common off-diagonal `rho`.
    pub fn equicorrelated(dim: usize, rho: f64) -> Result<Self> {
        let mut e = vec![rho; dim * dim];
        for i in 0..dim {
            e[i * dim + i] = 1.0;
        }
        repair_and_factor(dim, &e)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Row-major entries after repair.
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    /// Row-major lower Cholesky factor.
    pub fn lower_factor(&self) -> &[f64] {
        &self.lower
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// Diagonal jitter applied by the repair step (0 if none was needed).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// True when every off-diagonal entry is below 1e-12 in magnitude.
    pub fn is_identity(&self) -> bool {
        (0..self.dim).all(|i| (0..self.dim).all(|j| i == j || self.get(i, j).abs() <= 1e-12))
    }

    /// `1ᵀ R⁻¹ 1`.
    pub fn ones_quadratic_form(&self) -> f64 {
        self.ones_quad
    }

    pub fn min_eigenvalue_bound(&self) -> f64 {
        // smallest squared Cholesky pivot is an upper bound on λ_min
        (0..self.dim)
            .map(|i| self.lower[i * self.dim + i].powi(2))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Plain Cholesky; `None` if a pivot falls below [`PIVOT_FLOOR`].
fn cholesky(n: usize, a: &[f64]) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s >= PIVOT_FLOOR) {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// Validates a raw correlation matrix, factors it and repairs it with
/// escalating diagonal jitter if the factorization breaks down.
pub fn repair_and_factor(n: usize, raw: &[f64]) -> Result<CorrelationMatrix> {
    if n == 0 || raw.len() != n * n {
        return Err(Error::config("correlation", "matrix must be square and non-empty"));
    }
    for i in 0..n {
        if (raw[i * n + i] - 1.0).abs() > 1e-12 {
            return Err(Error::config("correlation", format!("diagonal entry {i} is not 1")));
        }
        for j in 0..i {
            let (a, b) = (raw[i * n + j], raw[j * n + i]);
            if !a.is_finite() || (a - b).abs() > 1e-12 || a.abs() > 1.0 + 1e-12 {
                return Err(Error::config(
                    "correlation",
                    format!("entry ({i},{j}) is not a symmetric correlation"),
                ));
            }
        }
    }
    let mut entries = raw.to_vec();
    for i in 0..n {
        entries[i * n + i] = 1.0;
        for j in 0..i {
            let v = 0.5 * (raw[i * n + j] + raw[j * n + i]);
            entries[i * n + j] = v;
            entries[j * n + i] = v;
        }
    }
    let mut jitter = 0.0;
    let lower = loop {
        let trial: Vec<f64> = if jitter == 0.0 {
            entries.clone()
        } else {
            // (R + λI)/(1 + λ) keeps a unit diagonal
            entries
                .iter()
                .enumerate()
                .map(|(k, &v)| {
                    if k / n == k % n {
                        1.0
                    } else {
                        v / (1.0 + jitter)
                    }
                })
                .collect()
        };
        if let Some(l) = cholesky(n, &trial) {
            entries = trial;
            break l;
        }
        jitter = if jitter == 0.0 { JITTER_START } else { jitter * 10.0 };
        if jitter > JITTER_MAX * (1.0 + 1e-9) {
            return Err(Error::Numerical(format!(
                "correlation matrix not positive definite even with jitter {JITTER_MAX}"
            )));
        }
    };
    let log_det = 2.0 * (0..n).map(|i| lower[i * n + i].ln()).sum::<f64>();
    // forward substitution L v = 1
    let mut v = vec![0.0; n];
    for i in 0..n {
        let mut s = 1.0;
        for k in 0..i {
            s -= lower[i * n + k] * v[k];
        }
        v[i] = s / lower[i * n + i];
    }
    let ones_quad = v.iter().map(|x| x * x).sum();
    Ok(CorrelationMatrix {
        dim: n,
        entries,
        lower,
        log_det,
        jitter,
        ones_quad,
    })
}

/// `ln` of `exp(-½ φᵀ(R⁻¹ - I)φ) / √det R` for `φ = (x, …, x)`.
pub fn log_copula_density_factor(x: f64, r: &CorrelationMatrix) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain {
            function: "copula_density_factor",
            value: x,
            expected: "finite argument",
        });
    }
    let v = -0.5 * x * x * (r.ones_quad - r.dim as f64) - 0.5 * r.log_det;
    if v.is_nan() {
        return Err(Error::Numerical("copula density exponent is NaN".into()));
    }
    Ok(v)
}

pub fn copula_density_factor(x: f64, r: &CorrelationMatrix) -> Result<f64> {
    let v = log_copula_density_factor(x, r)?.exp();
    if !v.is_finite() {
        return Err(Error::Numerical(format!("copula density factor overflows at x = {x}")));
    }
    Ok(v)
}

/// Controls for the QMC estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MvnOptions {
    /// Absolute error target at 99% confidence.
    pub abs_tol: f64,
    /// Relative error target; the tighter of the two applies.
    pub rel_tol: f64,
    pub shifts: usize,
    pub min_points: usize,
    /// Lattice points per shift before giving up.
    pub max_points: usize,
    pub seed: u64,
}

impl Default for MvnOptions {
    fn default() -> Self {
        MvnOptions {
            abs_tol: 1e-6,
            rel_tol: 1e-3,
            shifts: 8,
            min_points: 1 << 8,
            max_points: 1 << 14,
            seed: 0x5eed_c0b1_a5ee_d001,
        }
    }
}

impl MvnOptions {
    pub fn with_accuracy(accuracy: f64, seed: u64) -> Result<Self> {
        if !(1e-8..=1e-2).contains(&accuracy) {
            return Err(Error::config("accuracy", format!("{accuracy} not in [1e-8, 1e-2]")));
        }
        Ok(MvnOptions {
            abs_tol: accuracy,
            seed,
            ..Default::default()
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MvnEstimate {
    pub value: f64,
    /// Half-width of a 99% confidence interval.
    pub error: f64,
    /// Set when the point budget ran out before the target was met.
    pub warning: bool,
}

impl MvnEstimate {
    fn exact(value: f64) -> Self {
        MvnEstimate {
            value,
            error: 0.0,
            warning: false,
        }
    }
}

/// Student-t 0.995 quantile (Cornish–Fisher expansion around the normal).
fn t_quantile_995(dof: usize) -> f64 {
    let z: f64 = 2.575_829_303_548_901;
    let v = dof as f64;
    let z3 = z.powi(3);
    let z5 = z.powi(5);
    let z7 = z.powi(7);
    z + (z3 + z) / (4.0 * v)
        + (5.0 * z5 + 16.0 * z3 + 3.0 * z) / (96.0 * v * v)
        + (3.0 * z7 + 19.0 * z5 + 17.0 * z3 - 15.0 * z) / (384.0 * v * v * v)
}

const PRIMES: [u32; 100] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
    101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191, 193,
    197, 199, 211, 223, 227, 229, 233, 239, 241, 251, 257, 263, 269, 271, 277, 281, 283, 293, 307,
    311, 313, 317, 331, 337, 347, 349, 353, 359, 367, 373, 379, 383, 389, 397, 401, 409, 419, 421,
    431, 433, 439, 443, 449, 457, 461, 463, 467, 479, 487, 491, 499, 503, 509, 521, 523, 541,
];

/// Separation-of-variables integrand after reordering.
struct Sov {
    dim: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    first: f64,
    /// `d first / dt` when every limit moves by `t`.
    first_slope: f64,
}

impl Sov {
    /// Genz–Bretz reordering with a Cholesky factor built column by column.
    /// Returns `Err(p)` when the probability is decided without sampling.
    fn new(b: &[f64], cov: &[f64]) -> std::result::Result<Self, f64> {
        let n0 = b.len();
        if b.iter().any(|&v| v == f64::NEG_INFINITY) {
            return Err(0.0);
        }
        let keep: Vec<usize> = (0..n0).filter(|&i| b[i] != f64::INFINITY).collect();
        let n = keep.len();
        if n == 0 {
            return Err(1.0);
        }
        let mut a: Vec<f64> = Vec::with_capacity(n * n);
        for &i in &keep {
            for &j in &keep {
                a.push(cov[i * n0 + j]);
            }
        }
        let mut upper: Vec<f64> = keep.iter().map(|&i| b[i]).collect();
        let mut l = vec![0.0; n * n];
        let mut y = vec![0.0; n];
        let swap = |a: &mut Vec<f64>, l: &mut Vec<f64>, upper: &mut Vec<f64>, p: usize, q: usize| {
            if p == q {
                return;
            }
            upper.swap(p, q);
            for k in 0..n {
                a.swap(p * n + k, q * n + k);
            }
            for k in 0..n {
                a.swap(k * n + p, k * n + q);
            }
            for k in 0..n {
                l.swap(p * n + k, q * n + k);
            }
        };
        for k in 0..n {
            let mut best = k;
            let mut best_p = f64::INFINITY;
            for i in k..n {
                let mut var = a[i * n + i];
                let mut mean = 0.0;
                for j in 0..k {
                    var -= l[i * n + j] * l[i * n + j];
                    mean += l[i * n + j] * y[j];
                }
                let p = if var > PIVOT_FLOOR {
                    std_normal_cdf((upper[i] - mean) / var.sqrt())
                } else if upper[i] >= mean {
                    1.0
                } else {
                    0.0
                };
                if p < best_p {
                    best_p = p;
                    best = i;
                }
            }
            swap(&mut a, &mut l, &mut upper, k, best);
            let mut var = a[k * n + k];
            let mut mean = 0.0;
            for j in 0..k {
                var -= l[k * n + j] * l[k * n + j];
                mean += l[k * n + j] * y[j];
            }
            if var > PIVOT_FLOOR {
                let d = var.sqrt();
                l[k * n + k] = d;
                for i in k + 1..n {
                    let mut s = a[i * n + k];
                    for j in 0..k {
                        s -= l[i * n + j] * l[k * n + j];
                    }
                    l[i * n + k] = s / d;
                }
                let t = (upper[k] - mean) / d;
                let cdf = std_normal_cdf(t);
                y[k] = if cdf > 0.0 {
                    -std_normal_pdf(t) / cdf
                } else {
                    t
                };
            } else {
                l[k * n + k] = 0.0;
                y[k] = 0.0;
            }
        }
        let first = if l[0] > 0.0 {
            std_normal_cdf(upper[0] / l[0])
        } else if upper[0] >= 0.0 {
            1.0
        } else {
            0.0
        };
        if first == 0.0 {
            return Err(0.0);
        }
        let first_slope = if l[0] > 0.0 {
            std_normal_pdf(upper[0] / l[0]) / l[0]
        } else {
            0.0
        };
        Ok(Sov {
            dim: n,
            lower: l,
            upper,
            first,
            first_slope,
        })
    }

    fn eval(&self, w: &[f64], y: &mut [f64]) -> f64 {
        let n = self.dim;
        let mut f = self.first;
        let mut e = self.first;
        for k in 1..n {
            let u = (w[k - 1] * e).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0);
            y[k - 1] = ndtri_as241(u);
            let row = &self.lower[k * n..k * n + k];
            let mean: f64 = row.iter().zip(y.iter()).map(|(a, b)| a * b).sum();
            let d = self.lower[k * n + k];
            e = if d > 0.0 {
                std_normal_cdf((self.upper[k] - mean) / d)
            } else if self.upper[k] >= mean {
                1.0
            } else {
                0.0
            };
            f *= e;
            if f == 0.0 {
                break;
            }
        }
        f
    }

    /// Integrand and its derivative with respect to a common shift of all
    /// limits, carried forward through the recursion.
    fn eval_with_slope(&self, w: &[f64], y: &mut [f64], dy: &mut [f64]) -> (f64, f64) {
        let n = self.dim;
        let (mut f, mut df) = (self.first, self.first_slope);
        let (mut e, mut de) = (f, df);
        for k in 1..n {
            let raw = w[k - 1] * e;
            let u = raw.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0);
            y[k - 1] = ndtri_as241(u);
            dy[k - 1] = if u == raw {
                w[k - 1] * de / std_normal_pdf(y[k - 1])
            } else {
                0.0
            };
            let row = &self.lower[k * n..k * n + k];
            let mean: f64 = row.iter().zip(y.iter()).map(|(a, b)| a * b).sum();
            let dmean: f64 = row.iter().zip(dy.iter()).map(|(a, b)| a * b).sum();
            let d = self.lower[k * n + k];
            if d > 0.0 {
                let a = (self.upper[k] - mean) / d;
                e = std_normal_cdf(a);
                de = std_normal_pdf(a) * (1.0 - dmean) / d;
            } else {
                e = if self.upper[k] >= mean { 1.0 } else { 0.0 };
                de = 0.0;
            }
            df = df * e + f * de;
            f *= e;
            if f == 0.0 && df == 0.0 {
                break;
            }
        }
        (f, df)
    }
}

/// `P(Z ≤ b)` for `Z ~ N(0, cov)`, `cov` row-major and positive semidefinite.
pub(crate) fn mvn_cdf_upper(b: &[f64], cov: &[f64], opts: &MvnOptions) -> MvnEstimate {
    match Sov::new(b, cov) {
        Ok(s) if s.dim > 1 => qmc(&s, opts, false).0,
        Ok(s) => MvnEstimate::exact(s.first),
        Err(p) => MvnEstimate::exact(p),
    }
}

/// As [`mvn_cdf_upper`], plus the derivative with respect to moving every
/// limit by the same amount.
pub(crate) fn mvn_cdf_upper_with_slope(b: &[f64], cov: &[f64], opts: &MvnOptions) -> (MvnEstimate, MvnEstimate) {
    match Sov::new(b, cov) {
        Ok(s) if s.dim > 1 => {
            let (v, d) = qmc(&s, opts, true);
            (v, d.expect("slope requested"))
        }
        Ok(s) => (MvnEstimate::exact(s.first), MvnEstimate::exact(s.first_slope)),
        // decided without sampling; a vanishing or saturated orthant is flat
        Err(p) => (MvnEstimate::exact(p), MvnEstimate::exact(0.0)),
    }
}

struct ShiftStats {
    shifts: usize,
    sums: Vec<f64>,
}

impl ShiftStats {
    fn new(shifts: usize) -> Self {
        ShiftStats {
            shifts,
            sums: vec![0.0; shifts],
        }
    }

    /// Mean and 99% half-width after `done` points per shift.
    fn summary(&self, done: usize, tq: f64) -> (f64, f64) {
        let means: Vec<f64> = self.sums.iter().map(|s| s / done as f64).collect();
        let k = self.shifts as f64;
        let mean = means.iter().sum::<f64>() / k;
        let var = means.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / ((k - 1.0) * k);
        (mean, tq * var.sqrt())
    }
}

fn qmc(sov: &Sov, opts: &MvnOptions, with_slope: bool) -> (MvnEstimate, Option<MvnEstimate>) {
    let m = sov.dim - 1;
    let shifts = opts.shifts.max(2);
    let gen: Vec<f64> = (0..m)
        .map(|j| {
            let p = PRIMES[j % PRIMES.len()] as f64 + (j / PRIMES.len()) as f64 * 1e3;
            p.sqrt().fract()
        })
        .collect();
    let shift_vecs: Vec<Vec<f64>> = (0..shifts)
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(s as u64);
            (0..m).map(|_| rng.gen::<f64>()).collect()
        })
        .collect();
    let tq = t_quantile_995(shifts - 1);
    let mut values = ShiftStats::new(shifts);
    let mut slopes = ShiftStats::new(shifts);
    let mut w = vec![0.0; m];
    let mut y = vec![0.0; m];
    let mut dy = vec![0.0; m];
    let mut done = 0usize;
    let mut target = opts.min_points.max(1).min(opts.max_points.max(1));
    let goal = |mean: f64| opts.abs_tol.min(opts.rel_tol * mean.abs());
    loop {
        for (s, shift) in shift_vecs.iter().enumerate() {
            let (mut acc, mut dacc) = (0.0, 0.0);
            for i in done..target {
                let fi = i as f64;
                for j in 0..m {
                    let t = (fi * gen[j] + shift[j]).fract();
                    w[j] = 1.0 - (2.0 * t - 1.0).abs();
                }
                if with_slope {
                    let (f, df) = sov.eval_with_slope(&w, &mut y, &mut dy);
                    acc += f;
                    dacc += df;
                } else {
                    acc += sov.eval(&w, &mut y);
                }
            }
            values.sums[s] += acc;
            slopes.sums[s] += dacc;
        }
        done = target;
        let (mean, error) = values.summary(done, tq);
        let (dmean, derror) = slopes.summary(done, tq);
        let mut met = error <= goal(mean) || error == 0.0;
        if with_slope {
            met &= derror <= goal(dmean) || derror == 0.0;
        }
        let exhausted = done >= opts.max_points;
        if met || exhausted {
            let value = MvnEstimate {
                value: mean.clamp(0.0, 1.0),
                error,
                warning: !met,
            };
            let slope = with_slope.then_some(MvnEstimate {
                value: dmean.max(0.0),
                error: derror,
                warning: !met,
            });
            return (value, slope);
        }
        target = (done * 2).min(opts.max_points);
    }
}

/// `Φ_R(x, …, x)`, the equicoordinate multivariate normal CDF.
pub fn mvn_cdf_equicoordinate(x: f64, r: &CorrelationMatrix, opts: &MvnOptions) -> Result<MvnEstimate> {
    if x.is_nan() {
        return Err(Error::Domain {
            function: "mvn_cdf_equicoordinate",
            value: x,
            expected: "not NaN",
        });
    }
    if x == f64::NEG_INFINITY {
        return Ok(MvnEstimate::exact(0.0));
    }
    if x == f64::INFINITY {
        return Ok(MvnEstimate::exact(1.0));
    }
    if r.dim == 1 {
        return Ok(MvnEstimate::exact(std_normal_cdf(x)));
    }
    if r.is_identity() {
        return Ok(MvnEstimate::exact(std_normal_cdf(x).powi(r.dim as i32)));
    }
    let b = vec![x; r.dim];
    Ok(mvn_cdf_upper(&b, &r.entries, opts))
}

/// `Φ_R(x, …, x)` together with its derivative in `x`.
pub fn mvn_cdf_equicoordinate_with_slope(
    x: f64,
    r: &CorrelationMatrix,
    opts: &MvnOptions,
) -> Result<(MvnEstimate, MvnEstimate)> {
    if x.is_nan() {
        return Err(Error::Domain {
            function: "mvn_cdf_equicoordinate_with_slope",
            value: x,
            expected: "not NaN",
        });
    }
    if x.is_infinite() {
        let v = if x > 0.0 { 1.0 } else { 0.0 };
        return Ok((MvnEstimate::exact(v), MvnEstimate::exact(0.0)));
    }
    let n = r.dim;
    if n == 1 || r.is_identity() {
        let c = std_normal_cdf(x);
        let value = c.powi(n as i32);
        let slope = n as f64 * std_normal_pdf(x) * c.powi(n as i32 - 1);
        return Ok((MvnEstimate::exact(value), MvnEstimate::exact(slope)));
    }
    let b = vec![x; n];
    Ok(mvn_cdf_upper_with_slope(&b, &r.entries, opts))
}

/// `Σ_i P(Z_{-i} ≤ x | Z_i = x)`: the factor linking the density of
/// `max_i Z_i` at `x` to `φ(x)`.
#[cfg(test)]
pub(crate) fn equicoordinate_conditional_sum(
    x: f64,
    r: &CorrelationMatrix,
    opts: &MvnOptions,
) -> MvnEstimate {
    let n = r.dim;
    if n == 1 {
        return MvnEstimate::exact(1.0);
    }
    if r.is_identity() {
        return MvnEstimate::exact(n as f64 * std_normal_cdf(x).powi(n as i32 - 1));
    }
    let mut total = 0.0;
    let mut err2 = 0.0;
    let mut warning = false;
    let m = n - 1;
    let mut b = vec![0.0; m];
    let mut cov = vec![0.0; m * m];
    for i in 0..n {
        let others: Vec<usize> = (0..n).filter(|&k| k != i).collect();
        for (a, &p) in others.iter().enumerate() {
            let rp = r.get(p, i);
            b[a] = x * (1.0 - rp);
            for (c, &q) in others.iter().enumerate() {
                cov[a * m + c] = r.get(p, q) - rp * r.get(q, i);
            }
        }
        let est = mvn_cdf_upper(&b, &cov, opts);
        total += est.value;
        err2 += est.error * est.error;
        warning |= est.warning;
    }
    MvnEstimate {
        value: total,
        error: err2.sqrt(),
        warning,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn two_by_two(rho: f64) -> CorrelationMatrix {
        repair_and_factor(2, &[1.0, rho, rho, 1.0]).unwrap()
    }

    #[test]
    fn repair_examples() {
        let id = CorrelationMatrix::identity(3);
        assert_eq!(id.jitter(), 0.0);
        assert_eq!(id.log_det(), 0.0);
        assert_relative_eq!(two_by_two(0.5).log_det(), 0.75f64.ln(), max_relative = 1e-14);
        assert_relative_eq!(0.75f64.ln(), -0.287_682_072_4, max_relative = 1e-9);

        let ones = repair_and_factor(3, &[1.0; 9]).unwrap();
        assert!(ones.jitter() > 0.0 && ones.jitter() <= JITTER_MAX);
        assert!(ones.log_det().is_finite() && ones.log_det() < -15.0);
        for i in 0..3 {
            assert_eq!(ones.get(i, i), 1.0);
        }
        assert!(ones.min_eigenvalue_bound() >= PIVOT_FLOOR);
    }

    #[test]
    fn repair_rejects_bad_input() {
        assert!(repair_and_factor(2, &[1.0, 0.3, 0.2, 1.0]).is_err());
        assert!(repair_and_factor(2, &[2.0, 0.0, 0.0, 1.0]).is_err());
        assert!(repair_and_factor(2, &[1.0, 0.0, 0.0]).is_err());
        // strongly indefinite: far beyond any jitter
        let r = -0.9;
        assert!(matches!(
            repair_and_factor(3, &[1.0, r, r, r, 1.0, r, r, r, 1.0]),
            Err(Error::Numerical(_))
        ));
    }

    #[test]
    fn density_factor_examples() {
        let id = CorrelationMatrix::identity(4);
        assert_relative_eq!(copula_density_factor(1.7, &id).unwrap(), 1.0, max_relative = 1e-14);
        let r = two_by_two(0.5);
        assert_relative_eq!(copula_density_factor(0.0, &r).unwrap(), 1.154_700_5, max_relative = 1e-7);
        // [1,1](R⁻¹ - I)[1,1]ᵀ = 4/3 - 2, so the factor is exp(1/3)/√0.75
        let expect = (1.0f64 / 3.0).exp() / 0.75f64.sqrt();
        assert_relative_eq!(copula_density_factor(1.0, &r).unwrap(), expect, max_relative = 1e-12);
        assert_relative_eq!(expect, 1.611_514_4, max_relative = 1e-7);
        assert!(copula_density_factor(f64::INFINITY, &r).is_err());
    }

    #[test]
    fn mvn_examples() {
        let opts = MvnOptions::default();
        let one = CorrelationMatrix::identity(1);
        assert_eq!(mvn_cdf_equicoordinate(0.0, &one, &opts).unwrap().value, 0.5);
        let id = CorrelationMatrix::identity(2);
        assert_eq!(mvn_cdf_equicoordinate(0.0, &id, &opts).unwrap().value, 0.25);
        let r = two_by_two(0.5);
        let est = mvn_cdf_equicoordinate(0.0, &r, &opts).unwrap();
        let oracle = 0.25 + 0.5f64.asin() / (2.0 * PI);
        assert_relative_eq!(oracle, 1.0 / 3.0, max_relative = 1e-14);
        assert!((est.value - oracle).abs() <= est.error.max(1e-12));
        assert!((est.value - oracle).abs() < 1e-6);
        assert_eq!(mvn_cdf_equicoordinate(f64::NEG_INFINITY, &r, &opts).unwrap().value, 0.0);
        assert_eq!(mvn_cdf_equicoordinate(f64::INFINITY, &r, &opts).unwrap().value, 1.0);
        assert!(mvn_cdf_equicoordinate(f64::NAN, &r, &opts).is_err());
    }

    /// Trivariate orthant probability `1/8 + Σ asin(ρ_ij)/(4π)`.
    #[test]
    fn trivariate_orthant() {
        let (a, b, c) = (0.3, -0.2, 0.6);
        let r = repair_and_factor(3, &[1.0, a, b, a, 1.0, c, b, c, 1.0]).unwrap();
        let opts = MvnOptions {
            max_points: 1 << 16,
            ..Default::default()
        };
        let est = mvn_cdf_equicoordinate(0.0, &r, &opts).unwrap();
        let oracle = 0.125 + (a.asin() + b.asin() + c.asin()) / (4.0 * PI);
        assert!((est.value - oracle).abs() <= est.error, "{} vs {oracle}", est.value);
        assert!(est.error <= 1e-6 && !est.warning);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let r = CorrelationMatrix::equicorrelated(5, 0.4).unwrap();
        let opts = MvnOptions::default();
        let a = mvn_cdf_equicoordinate(0.3, &r, &opts).unwrap();
        let b = mvn_cdf_equicoordinate(0.3, &r, &opts).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        let c = mvn_cdf_equicoordinate(0.3, &r, &MvnOptions { seed: 7, ..opts }).unwrap();
        assert!((a.value - c.value).abs() <= a.error + c.error + 1e-12);
    }

    /// Equicorrelated orthant by one-dimensional integration over the
    /// common factor: `∫ φ(w) Φ((x - √ρ w)/√(1-ρ))^N dw`.
    fn equicorrelated_oracle(x: f64, rho: f64, n: i32) -> f64 {
        crate::oracle::adaptive_simpson(
            &|w: f64| {
                std_normal_pdf(w) * std_normal_cdf((x - rho.sqrt() * w) / (1.0 - rho).sqrt()).powi(n)
            },
            -12.0,
            12.0,
            1e-13,
        )
    }

    #[test]
    fn equicorrelated_against_factor_oracle() {
        let opts = MvnOptions::default();
        for &rho in &[0.3, 0.8, 0.9999] {
            let r = CorrelationMatrix::equicorrelated(4, rho).unwrap();
            for &x in &[-2.0, -0.5, 0.0, 1.0, 2.5] {
                let est = mvn_cdf_equicoordinate(x, &r, &opts).unwrap();
                let oracle = equicorrelated_oracle(x, rho, 4);
                assert!((est.value - oracle).abs() <= est.error.max(2e-6), "rho={rho} x={x}");
            }
        }
    }

    #[test]
    fn comonotone_and_independent_limits() {
        let opts = MvnOptions::default();
        // √(1-ρ) = 0.01 still moves the maximum by about 0.01 standard deviations
        let co = CorrelationMatrix::equicorrelated(4, 0.9999).unwrap();
        for &x in &[-2.0, -0.5, 0.0, 1.0, 2.5] {
            let v = mvn_cdf_equicoordinate(x, &co, &opts).unwrap().value;
            assert!((v - std_normal_cdf(x)).abs() < 5e-3, "x={x}");
        }
        // tiny but nonzero correlation keeps the QMC path
        let near_id = CorrelationMatrix::equicorrelated(3, 1e-9).unwrap();
        for &x in &[-1.0, 0.0, 1.3] {
            let est = mvn_cdf_equicoordinate(x, &near_id, &opts).unwrap();
            assert!((est.value - std_normal_cdf(x).powi(3)).abs() <= est.error + 1e-8);
        }
    }

    #[test]
    fn monotone_in_x() {
        let r = repair_and_factor(
            4,
            &[
                1.0, 0.6, 0.2, -0.1, 0.6, 1.0, 0.5, 0.1, 0.2, 0.5, 1.0, 0.4, -0.1, 0.1, 0.4, 1.0,
            ],
        )
        .unwrap();
        let opts = MvnOptions::default();
        let mut prev = MvnEstimate::exact(0.0);
        for i in 0..50 {
            let x = -4.0 + 8.0 * i as f64 / 49.0;
            let est = mvn_cdf_equicoordinate(x, &r, &opts).unwrap();
            assert!(est.value + 2.0 * (est.error + prev.error) >= prev.value, "x={x}");
            prev = est;
        }
    }

    #[test]
    fn conditional_sum_matches_derivative() {
        // d/dx Φ_R(x,…,x) = φ(x) Σ_i P(Z_{-i} ≤ x | Z_i = x)
        let r = CorrelationMatrix::equicorrelated(3, 0.5).unwrap();
        let opts = MvnOptions {
            abs_tol: 1e-9,
            rel_tol: 1e-9,
            max_points: 1 << 18,
            ..Default::default()
        };
        for &x in &[-1.0, 0.0, 0.8] {
            let h = 1e-3;
            let up = mvn_cdf_equicoordinate(x + h, &r, &opts).unwrap().value;
            let dn = mvn_cdf_equicoordinate(x - h, &r, &opts).unwrap().value;
            let fd = (up - dn) / (2.0 * h);
            let an = std_normal_pdf(x) * equicoordinate_conditional_sum(x, &r, &opts).value;
            assert!((fd - an).abs() < 1e-5, "x={x}: {fd} vs {an}");
        }
        let id = CorrelationMatrix::identity(3);
        assert_relative_eq!(
            equicoordinate_conditional_sum(0.0, &id, &opts).value,
            3.0 * 0.25,
            max_relative = 1e-14
        );
    }

    #[test]
    fn t_quantile_close_to_table() {
        assert!((t_quantile_995(7) - 3.4995).abs() < 0.01);
        assert!((t_quantile_995(1000) - 2.5808).abs() < 1e-3);
    }

    fn random_correlation() -> impl Strategy<Value = CorrelationMatrix> {
        (2usize..6, proptest::collection::vec(-1.0f64..1.0, 36)).prop_map(|(n, raw)| {
            // Gram matrix of random unit vectors is a valid correlation matrix
            let vecs: Vec<Vec<f64>> = (0..n)
                .map(|i| {
                    let v: Vec<f64> = (0..n).map(|k| raw[i * 6 + k] + if i == k { 1.0 } else { 0.0 }).collect();
                    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    v.into_iter().map(|x| x / norm).collect()
                })
                .collect();
            let mut e = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    e[i * n + j] = if i == j {
                        1.0
                    } else {
                        vecs[i].iter().zip(&vecs[j]).map(|(a, b)| a * b).sum()
                    };
                }
            }
            repair_and_factor(n, &e).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn frechet_bounds(r in random_correlation(), x in -3.0f64..3.0) {
            let est = mvn_cdf_equicoordinate(x, &r, &MvnOptions::default()).unwrap();
            let n = r.dim() as f64;
            let lo = (1.0 - n * (1.0 - std_normal_cdf(x))).max(0.0);
            let hi = std_normal_cdf(x);
            let slack = 2.0 * est.error + 1e-12;
            prop_assert!(est.value >= lo - slack && est.value <= hi + slack);
        }
    }
}
