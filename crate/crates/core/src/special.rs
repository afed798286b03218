//! Special functions used by the service-time families.
//!
//! Everything here works on `f64` through `libm` so the crate stays usable
//! without `std`.

use libm::{erfc, exp, fabs, lgamma, log, log1p};

const EPS: f64 = 1e-15;
const TINY: f64 = 1e-300;
const MAX_ITER: usize = 10_000;

/// ln Γ(a) for a > 0.
#[inline]
pub fn ln_gamma(a: f64) -> f64 {
    lgamma(a)
}

/// Series for the lower regularized incomplete gamma P(a, x); valid for x < a + 1.
fn gamma_p_series(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let mut ap = a;
    let mut term = 1.0 / a;
    let mut sum = term;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if fabs(term) < fabs(sum) * EPS {
            break;
        }
    }
    sum * exp(-x + a * log(x) - ln_gamma(a))
}

/// ln of the continued fraction part of Q(a, x) (modified Lentz); valid for x >= a + 1.
/// Q(a, x) = exp(-x + a ln x - ln Γ(a)) * cf.
fn gamma_q_cf_ln(a: f64, x: f64) -> f64 {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if fabs(d) < TINY {
            d = TINY;
        }
        c = b + an / c;
        if fabs(c) < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if fabs(del - 1.0) < EPS {
            break;
        }
    }
    -x + a * log(x) - ln_gamma(a) + log(h)
}

/// Upper regularized incomplete gamma Q(a, x) = Γ(a, x) / Γ(a).
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        exp(gamma_q_cf_ln(a, x))
    }
}

/// ln Q(a, x), accurate far into the upper tail where Q itself underflows.
pub fn ln_gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        log1p(-gamma_p_series(a, x))
    } else {
        gamma_q_cf_ln(a, x)
    }
}

/// Standard normal upper tail Φc(z) = P(Z > z).
pub fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / core::f64::consts::SQRT_2)
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    normal_sf(-z)
}

/// ln Φc(z). Switches to the asymptotic Mills-ratio expansion once `erfc`
/// would underflow.
pub fn ln_normal_sf(z: f64) -> f64 {
    if z < 30.0 {
        return log(normal_sf(z));
    }
    let z2 = z * z;
    let series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2);
    -0.5 * z2 - log(z) - 0.5 * log(2.0 * core::f64::consts::PI) + log(series)
}

/// ln(e^a + e^b).
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + log1p(exp(lo - hi))
}

/// Adaptive Simpson quadrature of `f` on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
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
        if depth == 0 || fabs(delta) <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    if b <= a {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    recurse(f, a, b, fa, fm, fb, whole, tol, 48)
}

/// Bisection for a root of a monotone function on `[lo, hi]`, assuming a sign change.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, xtol: f64) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= xtol {
            return mid;
        }
        let fm = f(mid);
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_q_integer_shape_matches_closed_form() {
        // Q(2, x) = e^{-x}(1 + x)
        for &x in &[0.1, 0.5, 1.0, 2.9, 3.1, 10.0, 40.0] {
            let expect = exp(-x) * (1.0 + x);
            assert!((gamma_q(2.0, x) - expect).abs() < 1e-13, "x={x}");
            assert!((ln_gamma_q(2.0, x) - log(expect)).abs() < 1e-11, "x={x}");
        }
        assert_eq!(gamma_q(3.0, 0.0), 1.0);
    }

    #[test]
    fn ln_gamma_q_survives_underflow() {
        let v = ln_gamma_q(2.0, 1000.0);
        let expect = -1000.0 + log(1001.0);
        assert!((v - expect).abs() < 1e-9);
    }

    #[test]
    fn normal_tails() {
        assert!((normal_sf(0.0) - 0.5).abs() < 1e-15);
        assert!((normal_cdf(1.959963984540054) - 0.975).abs() < 1e-12);
        // continuity across the asymptotic switch
        let a = log(normal_sf(30.0));
        let b = ln_normal_sf(30.0);
        assert!((a - b).abs() < 1e-6);
        assert!(ln_normal_sf(60.0).is_finite());
    }

    #[test]
    fn simpson_integrates_exponential() {
        let v = adaptive_simpson(&|x: f64| exp(-x), 0.0, 5.0, 1e-12);
        assert!((v - (1.0 - exp(-5.0))).abs() < 1e-11);
    }

    #[test]
    fn log_add_exp_basic() {
        assert!((log_add_exp(log(2.0), log(3.0)) - log(5.0)).abs() < 1e-15);
        assert_eq!(log_add_exp(f64::NEG_INFINITY, 1.0), 1.0);
    }
}
