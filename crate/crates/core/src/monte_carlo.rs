//! Monte Carlo oracle for the secrecy metrics.
//!
//! Port gains are drawn through the Gaussian copula: `z ~ N(0, R)` via the
//! Cholesky factor, then each node keeps its best port. Because every
//! marginal map is increasing, only `max z` has to be transformed.
//!
//! Realizations are processed in fixed chunks of [`CHUNK`]. Chunk `c` draws
//! from ChaCha8 stream `c` of the seed, and the partial sums are merged in
//! chunk order, so estimates are bit-identical for any thread count.

use std::f64::consts::LN_2;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::PowerAllocation;
use crate::copula::CorrelationMatrix;
use crate::distribution::{normal_score, pdf_single_port, FasGainDistribution};
use crate::error::{Error, Result};
use crate::metrics::{sinr, Metric, ScenarioParams, SecrecyConfig, SinrRole};
use crate::special::{std_normal_cdf, std_normal_pdf, std_normal_sf};

pub const MIN_SAMPLES: u64 = 10_000;
pub const DEFAULT_SAMPLES: u64 = 10_000_000;
/// Realizations per RNG stream.
pub const CHUNK: u64 = 1 << 16;

/// How the energy-link gain enters the sampled node gains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum McMode {
    /// Best-port gain drawn directly from the copula model with
    /// K-distributed marginals; nodes are independent.
    #[default]
    Copula,
    /// `g_t · max_n g_n` with exponential port gains and a fresh `g_t` per node.
    IndependentEnergyLink,
    /// As above with one `g_t` shared by all nodes of a realization.
    SharedEnergyLink,
}

impl McMode {
    pub const ALL: [McMode; 3] = [
        McMode::Copula,
        McMode::IndependentEnergyLink,
        McMode::SharedEnergyLink,
    ];

    pub fn name(self) -> &'static str {
        match self {
            McMode::Copula => "copula",
            McMode::IndependentEnergyLink => "independent-energy-link",
            McMode::SharedEnergyLink => "shared-energy-link",
        }
    }
}

impl std::str::FromStr for McMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        McMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::config("mode", format!("unknown Monte Carlo mode `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloEstimate {
    pub value: f64,
    /// Sample standard deviation over `√n`.
    pub std_error: f64,
    pub n_samples: u64,
    pub seed: u64,
    pub mode: McMode,
}

// ---------------------------------------------------------------------------
// normal score -> single-port gain

const Z_MIN: f64 = -8.0;
const Z_MAX: f64 = 8.5;
const Z_PER_UNIT: f64 = 128.0;

/// `ln g` and `d ln g / dz` on a uniform grid in `z`.
struct ScoreTable {
    log_gain: Vec<f64>,
    slope: Vec<f64>,
}

fn score_table() -> &'static ScoreTable {
    static TABLE: OnceLock<ScoreTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let n = ((Z_MAX - Z_MIN) * Z_PER_UNIT).round() as usize + 1;
        let mut log_gain = Vec::with_capacity(n);
        let mut slope = Vec::with_capacity(n);
        let mut t = -40.0;
        for k in 0..n {
            let z = Z_MIN + k as f64 / Z_PER_UNIT;
            t = solve_log_gain(z, t);
            log_gain.push(t);
            slope.push(log_gain_slope(t.exp(), z));
        }
        ScoreTable { log_gain, slope }
    })
}

fn log_gain_slope(g: f64, z: f64) -> f64 {
    std_normal_pdf(z) / (g * pdf_single_port(g).expect("positive gain"))
}

/// Safeguarded Newton solve of `normal_score(e^t) = z`.
fn solve_log_gain(z: f64, guess: f64) -> f64 {
    let (mut lo, mut hi) = (-80.0f64, 8.0f64);
    let mut t = guess.clamp(lo, hi);
    for _ in 0..200 {
        let g = t.exp();
        let zt = normal_score(g);
        if zt == z {
            return t;
        }
        if zt > z {
            hi = t;
        } else {
            lo = t;
        }
        let mut next = t - (zt - z) * log_gain_slope(g, zt);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - t).abs() <= 1e-15 * t.abs().max(1.0) || hi - lo <= 1e-15 * t.abs().max(1.0) {
            return next;
        }
        t = next;
    }
    t
}

/// Single-port gain with normal score `z`, i.e. `F⁻¹(Φ(z))`.
pub fn gain_from_score(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    if z == f64::NEG_INFINITY {
        return 0.0;
    }
    if z == f64::INFINITY {
        return f64::INFINITY;
    }
    if !(Z_MIN..Z_MAX).contains(&z) {
        let start = if z < Z_MIN { -40.0 } else { 5.0 };
        return solve_log_gain(z, start).exp();
    }
    let table = score_table();
    let pos = (z - Z_MIN) * Z_PER_UNIT;
    let k = (pos.floor() as usize).min(table.log_gain.len() - 2);
    let s = pos - k as f64;
    let h = 1.0 / Z_PER_UNIT;
    let (y0, y1) = (table.log_gain[k], table.log_gain[k + 1]);
    let (d0, d1) = (table.slope[k] * h, table.slope[k + 1] * h);
    let s2 = s * s;
    let s3 = s2 * s;
    let t = (2.0 * s3 - 3.0 * s2 + 1.0) * y0
        + (s3 - 2.0 * s2 + s) * d0
        + (-2.0 * s3 + 3.0 * s2) * y1
        + (s3 - s2) * d1;
    t.exp()
}

/// Exponential(1) quantile of `Φ(z)`, accurate in both tails.
fn exponential_from_score(z: f64) -> f64 {
    if z < 0.0 {
        -(-std_normal_cdf(z)).ln_1p()
    } else {
        -std_normal_sf(z).ln()
    }
}

// ---------------------------------------------------------------------------
// sampling

/// Draws correlated port scores for one node.
#[derive(Debug, Clone)]
pub struct GainSampler {
    dim: usize,
    lower: Vec<f64>,
}

impl GainSampler {
    pub fn new(dist: &FasGainDistribution) -> Self {
        Self::from_matrix(dist.correlation())
    }

    pub fn from_matrix(r: &CorrelationMatrix) -> Self {
        GainSampler {
            dim: r.dim(),
            lower: r.lower_factor().to_vec(),
        }
    }

    pub fn ports(&self) -> usize {
        self.dim
    }

    /// Fills `out` (length = ports) with one draw of `z ~ N(0, R)`.
    pub fn sample_scores<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        assert_eq!(out.len(), self.dim, "score buffer has the wrong length");
        for v in out.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        // row i only reads entries 0..=i, so fill from the bottom up
        for i in (0..self.dim).rev() {
            let row = &self.lower[i * self.dim..i * self.dim + i + 1];
            out[i] = row.iter().zip(&out[..=i]).map(|(l, e)| l * e).sum();
        }
    }

    fn max_score<R: Rng + ?Sized>(&self, rng: &mut R, buf: &mut Vec<f64>) -> f64 {
        buf.resize(self.dim, 0.0);
        self.sample_scores(rng, buf);
        buf.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sample_max_score<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.max_score(rng, &mut Vec::new())
    }

    /// Best-port gain under the copula model with K-distributed marginals.
    pub fn sample_copula_gain<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        gain_from_score(self.sample_max_score(rng))
    }

    /// Largest of the exponential(1) local port gains.
    pub fn sample_local_gain<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        exponential_from_score(self.sample_max_score(rng))
    }

    /// `energy_gain · max_n g_n`.
    pub fn sample_fas_gain<R: Rng + ?Sized>(&self, energy_gain: f64, rng: &mut R) -> f64 {
        energy_gain * self.sample_local_gain(rng)
    }
}

// ---------------------------------------------------------------------------
// estimation

/// SNRs, power split and rates of one sweep point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McPoint {
    pub snr_un: f64,
    pub snr_uf: f64,
    pub snr_e: f64,
    pub alloc: PowerAllocation,
    pub rate_un: f64,
    pub rate_uf: f64,
}

impl McPoint {
    pub fn new(p: &ScenarioParams, cfg: &SecrecyConfig) -> Self {
        McPoint {
            snr_un: p.snr_un,
            snr_uf: p.snr_uf,
            snr_e: p.snr_e,
            alloc: p.alloc,
            rate_un: cfg.rate_un,
            rate_uf: cfg.rate_uf,
        }
    }

    fn validate(&self) -> Result<()> {
        for (key, v) in [("snr_un", self.snr_un), ("snr_uf", self.snr_uf), ("snr_e", self.snr_e)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(key, format!("average SNR must be positive, got {v}")));
            }
        }
        for (key, v) in [("rate_un", self.rate_un), ("rate_uf", self.rate_uf)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(key, format!("must be a finite rate >= 0, got {v}")));
            }
        }
        self.alloc.validate()
    }
}

/// The three nodes whose gains are sampled.
#[derive(Debug, Clone, Copy)]
pub struct McNodes<'a> {
    pub un: &'a FasGainDistribution,
    pub uf: &'a FasGainDistribution,
    pub e: &'a FasGainDistribution,
}

impl<'a> McNodes<'a> {
    pub fn of(p: &'a ScenarioParams) -> Self {
        McNodes {
            un: &p.dist_un,
            uf: &p.dist_uf,
            e: &p.dist_e,
        }
    }
}

const UN: usize = 0;
const UF: usize = 1;
const EVE: usize = 2;

/// Legitimate (role, node), eavesdropper (role, node) and whether the
/// near-user rate applies.
fn links(m: Metric) -> ((SinrRole, usize), (SinrRole, usize), bool) {
    match m {
        Metric::SopExternalNear | Metric::AscExternalNear => {
            ((SinrRole::Near, UN), (SinrRole::EveNear, EVE), true)
        }
        Metric::SopExternalFar | Metric::AscExternalFar => ((SinrRole::Far, UF), (SinrRole::EveFar, EVE), false),
        Metric::SopInternalNear | Metric::AscInternalNear => {
            ((SinrRole::Near, UN), (SinrRole::InternalEve, UF), true)
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    hits: u64,
    sum: f64,
    sumsq: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn merge(&mut self, n: f64, mean: f64, m2: f64) {
        let total = self.n + n;
        let delta = mean - self.mean;
        self.mean += delta * n / total;
        self.m2 += m2 + delta * delta * self.n * n / total;
        self.n = total;
    }
}

struct Plan<'a> {
    samplers: [Option<GainSampler>; 3],
    points: &'a [McPoint],
    metrics: &'a [Metric],
    mode: McMode,
}

impl Plan<'_> {
    fn run_chunk(&self, seed: u64, chunk: u64, count: u64) -> Vec<Tally> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(chunk);
        let width = self.metrics.len();
        let mut tallies = vec![Tally::default(); self.points.len() * width];
        let mut buf = Vec::new();
        let mut gains = [0.0f64; 3];
        let links: Vec<_> = self.metrics.iter().map(|&m| (m.is_sop(), links(m))).collect();
        for _ in 0..count {
            let shared: f64 = match self.mode {
                McMode::SharedEnergyLink => rng.sample(Exp1),
                _ => 1.0,
            };
            for (gain, sampler) in gains.iter_mut().zip(&self.samplers) {
                let Some(s) = sampler else { continue };
                let z = s.max_score(&mut rng, &mut buf);
                *gain = match self.mode {
                    McMode::Copula => gain_from_score(z),
                    McMode::IndependentEnergyLink => rng.sample::<f64, _>(Exp1) * exponential_from_score(z),
                    McMode::SharedEnergyLink => shared * exponential_from_score(z),
                };
            }
            for (pi, pt) in self.points.iter().enumerate() {
                let snr = [pt.snr_un, pt.snr_uf, pt.snr_e];
                for (mi, &(is_sop, ((lr, ln), (er, en), near))) in links.iter().enumerate() {
                    let legit = sinr(lr, gains[ln], snr, pt.alloc);
                    let eve = sinr(er, gains[en], snr, pt.alloc);
                    let t = &mut tallies[pi * width + mi];
                    if is_sop {
                        let rate = if near { pt.rate_un } else { pt.rate_uf };
                        if 1.0 + legit <= rate.exp2() * (1.0 + eve) {
                            t.hits += 1;
                        }
                    } else {
                        let c = ((legit.ln_1p() - eve.ln_1p()) / LN_2).max(0.0);
                        t.sum += c;
                        t.sumsq += c * c;
                    }
                }
            }
        }
        tallies
    }
}

/// Estimates every metric at every point from one shared set of `n`
/// realizations. Result is indexed `[point][metric]`.
pub fn estimate_sweep(
    nodes: McNodes<'_>,
    points: &[McPoint],
    metrics: &[Metric],
    n: u64,
    seed: u64,
    mode: McMode,
) -> Result<Vec<Vec<MonteCarloEstimate>>> {
    if n < MIN_SAMPLES {
        return Err(Error::config("n_samples", format!("need at least {MIN_SAMPLES}, got {n}")));
    }
    for p in points {
        p.validate()?;
    }
    let mut needed = [false; 3];
    for &m in metrics {
        let ((_, a), (_, b), _) = links(m);
        needed[a] = true;
        needed[b] = true;
    }
    let dists = [nodes.un, nodes.uf, nodes.e];
    let plan = Plan {
        samplers: std::array::from_fn(|i| needed[i].then(|| GainSampler::new(dists[i]))),
        points,
        metrics,
        mode,
    };
    let chunks = n.div_ceil(CHUNK);
    let partial: Vec<Vec<Tally>> = (0..chunks)
        .into_par_iter()
        .map(|c| plan.run_chunk(seed, c, CHUNK.min(n - c * CHUNK)))
        .collect();

    let width = metrics.len();
    let mut out = Vec::with_capacity(points.len());
    for pi in 0..points.len() {
        let mut row = Vec::with_capacity(width);
        for (mi, m) in metrics.iter().enumerate() {
            let idx = pi * width + mi;
            let (mean, var) = if m.is_sop() {
                let hits: u64 = partial.iter().map(|t| t[idx].hits).sum();
                let p = hits as f64 / n as f64;
                (p, p * (1.0 - p) * n as f64 / (n - 1) as f64)
            } else {
                let mut acc = Moments::default();
                for (c, t) in partial.iter().enumerate() {
                    let k = CHUNK.min(n - c as u64 * CHUNK) as f64;
                    let mean = t[idx].sum / k;
                    let m2 = (t[idx].sumsq - t[idx].sum * mean).max(0.0);
                    acc.merge(k, mean, m2);
                }
                (acc.mean, acc.m2 / (n - 1) as f64)
            };
            row.push(MonteCarloEstimate {
                value: mean,
                std_error: (var / n as f64).sqrt(),
                n_samples: n,
                seed,
                mode,
            });
        }
        out.push(row);
    }
    Ok(out)
}

fn estimate_one(
    metric: Metric,
    p: &ScenarioParams,
    cfg: &SecrecyConfig,
    n: u64,
    seed: u64,
    mode: McMode,
) -> Result<MonteCarloEstimate> {
    cfg.validate()?;
    let pt = McPoint::new(p, cfg);
    Ok(estimate_sweep(McNodes::of(p), &[pt], &[metric], n, seed, mode)?[0][0])
}

/// Fraction of realizations with `C_s ≤ R_s`.
pub fn estimate_sop(
    metric: Metric,
    p: &ScenarioParams,
    cfg: &SecrecyConfig,
    n: u64,
    seed: u64,
    mode: McMode,
) -> Result<MonteCarloEstimate> {
    if !metric.is_sop() {
        return Err(Error::config("metric", format!("`{}` is not an outage metric", metric.name())));
    }
    estimate_one(metric, p, cfg, n, seed, mode)
}

/// Sample mean of `max(log2((1+γ_legit)/(1+γ_eve)), 0)`.
pub fn estimate_asc(
    metric: Metric,
    p: &ScenarioParams,
    cfg: &SecrecyConfig,
    n: u64,
    seed: u64,
    mode: McMode,
) -> Result<MonteCarloEstimate> {
    if metric.is_sop() {
        return Err(Error::config("metric", format!("`{}` is not a capacity metric", metric.name())));
    }
    estimate_one(metric, p, cfg, n, seed, mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{CorrelationModel, FasGeometry};
    use crate::copula::MvnOptions;
    use crate::distribution::cdf_single_port;
    use proptest::prelude::*;
    use rand::Rng;

    fn dist(g: FasGeometry) -> FasGainDistribution {
        FasGainDistribution::new(g, CorrelationModel::Spherical, MvnOptions::default()).unwrap()
    }

    fn scenario(legit: FasGeometry, eve: FasGeometry, snr: [f64; 3]) -> ScenarioParams {
        ScenarioParams {
            snr_un: snr[0],
            snr_uf: snr[1],
            snr_e: snr[2],
            alloc: PowerAllocation::default(),
            dist_un: dist(legit),
            dist_uf: dist(legit),
            dist_e: dist(eve),
        }
    }

    #[test]
    fn score_table_matches_direct_solve() {
        for k in 0..400 {
            let z = -9.0 + k as f64 * 0.0451;
            let g = gain_from_score(z);
            let direct = solve_log_gain(z, 0.0).exp();
            assert!((g / direct - 1.0).abs() < 1e-9, "z={z}: {g} vs {direct}");
        }
        assert_eq!(gain_from_score(f64::NEG_INFINITY), 0.0);
        assert_eq!(gain_from_score(f64::INFINITY), f64::INFINITY);
    }

    #[test]
    fn exponential_quantile_examples() {
        // median of exponential(1) is ln 2
        assert!((exponential_from_score(0.0) - LN_2).abs() < 1e-15);
        let z = -7.0;
        assert!((exponential_from_score(z) / std_normal_cdf(z) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn energy_gain_has_unit_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100_000;
        let mean: f64 = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.01, "{mean}");
    }

    fn ks_distance(mut samples: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
        samples.sort_by(f64::total_cmp);
        let n = samples.len() as f64;
        samples
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = cdf(x);
                (f - i as f64 / n).max((i + 1) as f64 / n - f)
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn independent_exponential_maximum_ks() {
        let s = GainSampler::from_matrix(&CorrelationMatrix::identity(2));
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws: Vec<f64> = (0..1_000_000).map(|_| s.sample_fas_gain(1.0, &mut rng)).collect();
        let d = ks_distance(draws, |g| (1.0 - (-g).exp()).powi(2));
        assert!(d <= 0.005, "{d}");
    }

    #[test]
    fn single_port_copula_gain_is_k_distributed() {
        let s = GainSampler::from_matrix(&CorrelationMatrix::identity(1));
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let draws: Vec<f64> = (0..200_000).map(|_| s.sample_copula_gain(&mut rng)).collect();
        let d = ks_distance(draws, cdf_single_port);
        assert!(d <= 0.005, "{d}");
    }

    #[test]
    fn sampled_scores_reproduce_correlation() {
        let d = dist(FasGeometry::square(2, 1.0).unwrap());
        let s = GainSampler::new(&d);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let n = 200_000;
        let mut z = [0.0; 4];
        let mut cross = [[0.0f64; 4]; 4];
        for _ in 0..n {
            s.sample_scores(&mut rng, &mut z);
            for i in 0..4 {
                for j in 0..4 {
                    cross[i][j] += z[i] * z[j];
                }
            }
        }
        for i in 0..4 {
            for j in 0..4 {
                let r = cross[i][j] / n as f64;
                assert!((r - d.correlation().get(i, j)).abs() < 0.01, "({i},{j}) {r}");
            }
        }
    }

    #[test]
    fn trivial_limits_are_exact() {
        let one = FasGeometry::single_port();
        let p = scenario(one, one, [10.0, 10.0, 1e-300]);
        let zero = SecrecyConfig {
            rate_un: 0.0,
            rate_uf: 0.0,
            ..Default::default()
        };
        for mode in McMode::ALL {
            let e = estimate_sop(Metric::SopExternalNear, &p, &zero, 20_000, 1, mode).unwrap();
            assert_eq!(e.value, 0.0);
        }
        let huge = SecrecyConfig {
            rate_un: 1e3,
            rate_uf: 1e3,
            ..Default::default()
        };
        let e = estimate_sop(Metric::SopExternalFar, &p, &huge, 20_000, 1, McMode::Copula).unwrap();
        assert_eq!(e.value, 1.0);
        assert_eq!(e.std_error, 0.0);

        let dark = scenario(one, one, [1e-9, 1e-9, 1.0]);
        let a = estimate_asc(Metric::AscExternalNear, &dark, &zero, 20_000, 1, McMode::Copula).unwrap();
        assert!(a.value < 1e-6);
    }

    #[test]
    fn rejects_bad_requests() {
        let one = FasGeometry::single_port();
        let p = scenario(one, one, [10.0, 10.0, 1.0]);
        let cfg = SecrecyConfig::default();
        assert!(estimate_sop(Metric::SopExternalNear, &p, &cfg, 100, 1, McMode::Copula).is_err());
        assert!(estimate_sop(Metric::AscExternalNear, &p, &cfg, 20_000, 1, McMode::Copula).is_err());
        assert!(estimate_asc(Metric::SopExternalNear, &p, &cfg, 20_000, 1, McMode::Copula).is_err());
        assert!("shared-energy-link".parse::<McMode>().is_ok());
        assert!("bogus".parse::<McMode>().is_err());
    }

    #[test]
    fn estimates_are_reproducible_and_seed_dependent() {
        let g = FasGeometry::square(2, 1.0).unwrap();
        let p = scenario(g, g, [10.0, 10.0, 1.0]);
        let cfg = SecrecyConfig::default();
        let n = 3 * CHUNK + 17;
        let a = estimate_asc(Metric::AscExternalNear, &p, &cfg, n, 3, McMode::Copula).unwrap();
        let b = estimate_asc(Metric::AscExternalNear, &p, &cfg, n, 3, McMode::Copula).unwrap();
        let c = estimate_asc(Metric::AscExternalNear, &p, &cfg, n, 4, McMode::Copula).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
        assert_ne!(a.value, c.value);
        assert!((a.value - c.value).abs() < 5.0 * a.std_error.hypot(c.std_error));

        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let d = pool
            .install(|| estimate_asc(Metric::AscExternalNear, &p, &cfg, n, 3, McMode::Copula))
            .unwrap();
        assert_eq!(a.value.to_bits(), d.value.to_bits());
    }

    #[test]
    fn far_capacity_respects_ceiling() {
        let g = FasGeometry::square(2, 1.0).unwrap();
        let p = scenario(g, g, [10.0, 1e6, 1e-6]);
        let cfg = SecrecyConfig::default();
        for mode in McMode::ALL {
            let e = estimate_asc(Metric::AscExternalFar, &p, &cfg, 20_000, 2, mode).unwrap();
            assert!(e.value <= 2.5f64.log2(), "{}", e.value);
        }
    }

    #[test]
    fn sweep_rows_match_single_estimates() {
        let g = FasGeometry::square(2, 1.0).unwrap();
        let p = scenario(g, g, [10.0, 5.0, 1.0]);
        let cfg = SecrecyConfig::default();
        let pts = [McPoint::new(&p, &cfg), McPoint { snr_un: 30.0, ..McPoint::new(&p, &cfg) }];
        let rows = estimate_sweep(McNodes::of(&p), &pts, &Metric::ALL, 20_000, 9, McMode::Copula).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows[1][0].value <= rows[0][0].value);
        let single = estimate_sop(Metric::SopExternalNear, &p, &cfg, 20_000, 9, McMode::Copula).unwrap();
        // same nodes are drawn only when the metric set needs them
        assert!((single.value - rows[0][0].value).abs() < 5.0 * single.std_error.max(1e-3));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn score_round_trip(z in -8.4f64..8.4) {
            let g = gain_from_score(z);
            prop_assert!((normal_score(g) - z).abs() < 1e-8 * z.abs().max(1.0));
        }

        #[test]
        fn gain_increases_with_score(z in -8.0f64..8.0, dz in 1e-3f64..1.0) {
            prop_assert!(gain_from_score(z + dz) > gain_from_score(z));
        }
    }
}
