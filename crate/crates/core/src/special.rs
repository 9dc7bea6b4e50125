//! Scalar special functions used by the channel-gain distributions.
//!
//! Modified Bessel functions of the second kind are evaluated with their
//! ascending series below `x = 2` and with Steed's continued fraction
//! (Temme's normalisation) above it; both reach full double precision.
//! `erf`/`erfc` come from `libm`, the normal quantile is Wichura's AS241
//! with one Halley correction.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use crate::error::{Error, Result};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const SERIES_LIMIT: f64 = 2.0;
const SERIES_TOL: f64 = 1e-17;

fn check_positive(function: &'static str, x: f64) -> Result<()> {
    if x > 0.0 && !x.is_nan() {
        Ok(())
    } else {
        Err(Error::Domain {
            function,
            value: x,
            expected: "x > 0",
        })
    }
}

/// Ascending series of K0 and K1 for `0 < x < 2`.
fn k01_series(x: f64) -> (f64, f64) {
    let t = 0.25 * x * x;
    let log_half = (0.5 * x).ln();

    // K0 = -(ln(x/2) + γ) I0 + Σ H_k t^k / (k!)²
    // K1 = 1/x + ln(x/2) I1 - (x/4) Σ (H_k + H_{k+1} - 2γ) t^k / (k! (k+1)!)
    let mut i0 = 0.0;
    let mut i1 = 0.0;
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    let mut term0 = 1.0; // t^k / (k!)^2
    let mut term1 = 1.0; // t^k / (k! (k+1)!)
    let mut harmonic = 0.0; // H_k
    for k in 0..200 {
        let kf = k as f64;
        let h_next = harmonic + 1.0 / (kf + 1.0);
        i0 += term0;
        i1 += term1;
        s0 += harmonic * term0;
        s1 += (harmonic + h_next - 2.0 * EULER_GAMMA) * term1;
        if term0 < SERIES_TOL * i0.abs() && k > 2 {
            break;
        }
        term0 *= t / ((kf + 1.0) * (kf + 1.0));
        term1 *= t / ((kf + 1.0) * (kf + 2.0));
        harmonic = h_next;
    }
    let k0 = -(log_half + EULER_GAMMA) * i0 + s0;
    let k1 = 1.0 / x + log_half * (0.5 * x * i1) - 0.25 * x * s1;
    (k0, k1)
}

/// Steed's continued fraction for `(e^x K0(x), e^x K1(x))`, valid for `x >= 2`.
fn k01_scaled_cf(x: f64) -> (f64, f64) {
    let a1 = 0.25;
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut h = d;
    let mut delh = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 2..10_000 {
        let fi = i as f64;
        a -= 2.0 * (fi - 1.0);
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh = (b * d - 1.0) * delh;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < f64::EPSILON {
            break;
        }
    }
    h *= a1;
    let k0 = (PI / (2.0 * x)).sqrt() / s;
    let k1 = k0 * (x + 0.5 - h) / x;
    (k0, k1)
}

/// `(e^x K0(x), e^x K1(x))` for `x > 0`, no domain check.
pub(crate) fn k01_scaled(x: f64) -> (f64, f64) {
    if x < SERIES_LIMIT {
        let (k0, k1) = k01_series(x);
        let e = x.exp();
        (k0 * e, k1 * e)
    } else {
        k01_scaled_cf(x)
    }
}

/// Zero-order modified Bessel function of the second kind, `K0(x)`.
pub fn bessel_k0(x: f64) -> Result<f64> {
    check_positive("bessel_k0", x)?;
    Ok(if x < SERIES_LIMIT {
        k01_series(x).0
    } else {
        k01_scaled_cf(x).0 * (-x).exp()
    })
}

/// First-order modified Bessel function of the second kind, `K1(x)`.
pub fn bessel_k1(x: f64) -> Result<f64> {
    check_positive("bessel_k1", x)?;
    Ok(if x < SERIES_LIMIT {
        k01_series(x).1
    } else {
        k01_scaled_cf(x).1 * (-x).exp()
    })
}

/// Exponentially scaled `e^x K0(x)`.
pub fn bessel_k0_scaled(x: f64) -> Result<f64> {
    check_positive("bessel_k0_scaled", x)?;
    Ok(k01_scaled(x).0)
}

/// Exponentially scaled `e^x K1(x)`.
pub fn bessel_k1_scaled(x: f64) -> Result<f64> {
    check_positive("bessel_k1_scaled", x)?;
    Ok(k01_scaled(x).1)
}

/// `1 - x K1(x)` for `x >= 0`, free of cancellation near the origin.
///
/// With `t = x²/4` the series is
/// `t Σ (H_k + H_{k+1} - 2γ - 2 ln(x/2)) t^k / (k! (k+1)!)`.
pub fn one_minus_x_k1(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= SERIES_LIMIT {
        return 1.0 - x * k01_scaled_cf(x).1 * (-x).exp();
    }
    let t = 0.25 * x * x;
    let two_log_half = 2.0 * (0.5 * x).ln();
    let mut sum = 0.0;
    let mut term = 1.0;
    let mut harmonic = 0.0;
    for k in 0..200 {
        let kf = k as f64;
        let h_next = harmonic + 1.0 / (kf + 1.0);
        let contrib = (harmonic + h_next - 2.0 * EULER_GAMMA - two_log_half) * term;
        sum += contrib;
        if contrib.abs() < SERIES_TOL * sum.abs() && k > 2 {
            break;
        }
        term *= t / ((kf + 1.0) * (kf + 2.0));
        harmonic = h_next;
    }
    t * sum
}

/// Spherical Bessel function of the first kind, `j0(x) = sin(x)/x`.
pub fn sph_bessel_j0(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 * (1.0 - x2 / 20.0)
    } else {
        x.sin() / x
    }
}

/// Cylindrical Bessel function of the first kind, `J0(x)`.
pub fn bessel_j0(x: f64) -> f64 {
    libm::j0(x)
}

pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Standard normal CDF `Φ(x)`.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal survival function `1 - Φ(x)`.
pub fn std_normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

pub fn std_normal_pdf(x: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

fn poly(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

const AS241_A: [f64; 8] = [
    3.387_132_872_796_366_608,
    133.141_667_891_784_377_45,
    1_971.590_950_306_551_442_7,
    13_731.693_765_509_461_125,
    45_921.953_931_549_871_457,
    67_265.770_927_008_700_853,
    33_430.575_583_588_128_105,
    2_509.080_928_730_122_672_7,
];
const AS241_B: [f64; 8] = [
    1.0,
    42.313_330_701_600_911_252,
    687.187_007_492_057_908_3,
    5_394.196_021_424_751_107_7,
    21_213.794_301_586_595_867,
    39_307.895_800_092_710_61,
    28_729.085_735_721_942_674,
    5_226.495_278_852_854_561,
];
const AS241_C: [f64; 8] = [
    1.423_437_110_749_683_577_34,
    4.630_337_846_156_545_295_9,
    5.769_497_221_460_691_405_5,
    3.647_848_324_763_204_605_04,
    1.270_458_252_452_368_382_58,
    0.241_780_725_177_450_611_77,
    0.022_723_844_989_269_184_583_3,
    7.745_450_142_783_414_076_4e-4,
];
const AS241_D: [f64; 8] = [
    1.0,
    2.053_191_626_637_758_821_87,
    1.676_384_830_183_803_849_4,
    0.689_767_334_985_100_004_55,
    0.148_103_976_427_480_074_59,
    0.015_198_666_563_616_457_196_6,
    5.475_938_084_995_344_946e-4,
    1.050_750_071_644_416_843_24e-9,
];
const AS241_E: [f64; 8] = [
    6.657_904_643_501_103_777_2,
    5.463_784_911_164_114_369_9,
    1.784_826_539_917_291_335_8,
    0.296_560_571_828_504_891_23,
    0.026_532_189_526_576_123_093,
    0.001_242_660_947_388_078_438_6,
    2.711_555_568_743_487_578_15e-5,
    2.010_334_399_292_288_132_65e-7,
];
const AS241_F: [f64; 8] = [
    1.0,
    0.599_832_206_555_887_937_69,
    0.136_929_880_922_735_805_31,
    0.014_875_361_290_850_614_852_5,
    7.868_691_311_456_132_591e-4,
    1.846_318_317_510_054_681_8e-5,
    1.421_511_758_316_445_888_7e-7,
    2.044_263_103_389_939_785_64e-15,
];

/// Wichura's AS241 for `0 < p < 1`, without refinement.
pub(crate) fn ndtri_as241(p: f64) -> f64 {
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180_625 - q * q;
        return q * poly(&AS241_A, r) / poly(&AS241_B, r);
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-tail.ln()).sqrt();
    let val = if r <= 5.0 {
        r -= 1.6;
        poly(&AS241_C, r) / poly(&AS241_D, r)
    } else {
        r -= 5.0;
        poly(&AS241_E, r) / poly(&AS241_F, r)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

/// Lower-tail quantile for `0 < p <= 0.5` with one Halley step.
fn lower_quantile(p: f64) -> f64 {
    let x = ndtri_as241(p);
    let dens = std_normal_pdf(x);
    if dens == 0.0 {
        return x;
    }
    let e = (std_normal_cdf(x) - p) / dens;
    x - e / (1.0 + 0.5 * x * e)
}

/// Standard normal quantile `Φ⁻¹(u)`; `u = 0` and `u = 1` map to `∓∞`.
pub fn std_normal_quantile(u: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::Domain {
            function: "std_normal_quantile",
            value: u,
            expected: "0 <= u <= 1",
        });
    }
    Ok(if u == 0.0 {
        f64::NEG_INFINITY
    } else if u == 1.0 {
        f64::INFINITY
    } else if u <= 0.5 {
        lower_quantile(u)
    } else {
        -lower_quantile(1.0 - u)
    })
}

/// `Φ⁻¹(1 - s)` computed from the upper-tail probability `s` without
/// forming `1 - s`.
pub fn std_normal_quantile_upper(s: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::Domain {
            function: "std_normal_quantile_upper",
            value: s,
            expected: "0 <= s <= 1",
        });
    }
    Ok(if s == 0.0 {
        f64::INFINITY
    } else if s == 1.0 {
        f64::NEG_INFINITY
    } else if s <= 0.5 {
        -lower_quantile(s)
    } else {
        lower_quantile(1.0 - s)
    })
}

/// Inverse error function on `(-1, 1)`.
pub fn erf_inv(p: f64) -> Result<f64> {
    if p.is_nan() || p.abs() >= 1.0 {
        return Err(Error::Domain {
            function: "erf_inv",
            value: p,
            expected: "|p| < 1",
        });
    }
    if p == 0.0 {
        return Ok(0.0);
    }
    let a = p.abs();
    // Tiny arguments: erf(y) = 2y/√π (1 - y²/3 + ...).
    if a < 1e-9 {
        let y = a * PI.sqrt() / 2.0;
        return Ok(p.signum() * (y + y * y * y / 3.0));
    }
    let mut y = if a <= 0.5 {
        lower_quantile(0.5 * (1.0 + a)).max(0.0)
    } else {
        -lower_quantile(0.5 * (1.0 - a))
    } * FRAC_1_SQRT_2;
    let two_over_sqrt_pi = 2.0 / PI.sqrt();
    for _ in 0..3 {
        // Residual erf(y) - a, taken through erfc when a is close to one.
        let r = if a <= 0.5 {
            libm::erf(y) - a
        } else {
            (1.0 - a) - libm::erfc(y)
        };
        let d = two_over_sqrt_pi * (-y * y).exp();
        if d == 0.0 {
            break;
        }
        let e = r / d;
        let step = e / (1.0 + y * e);
        y -= step;
        if step.abs() <= 1e-16 * y.abs() {
            break;
        }
    }
    Ok(p.signum() * y)
}

/// `√2 · erf⁻¹(2u - 1)` for `u` in the open unit interval.
pub fn probit_via_erf_inv(u: f64) -> Result<f64> {
    Ok(SQRT_2 * erf_inv(2.0 * u - 1.0)?)
}
