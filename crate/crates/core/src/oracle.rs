//! Slow, independent reference integrators for unit tests.

/// Adaptive Simpson on `[a, b]`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// `∫_0^∞ f` through `x = t/(1-t)`, with an `x = s²` change near the
/// origin so integrable log/power singularities at zero are tamed.
pub fn semi_infinite(f: &dyn Fn(f64) -> f64, tol: f64) -> f64 {
    let head = adaptive_simpson(
        &|s: f64| if s == 0.0 { 0.0 } else { 2.0 * s * f(s * s) },
        0.0,
        1.0,
        tol / 2.0,
    );
    let tail = adaptive_simpson(
        &|t: f64| {
            if t >= 1.0 {
                return 0.0;
            }
            let x = 1.0 + t / (1.0 - t);
            let v = f(x) / ((1.0 - t) * (1.0 - t));
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        tol / 2.0,
    );
    head + tail
}
