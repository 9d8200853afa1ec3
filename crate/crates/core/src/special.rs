//! Log-gamma and regularized incomplete gamma functions.
//!
//! The incomplete gamma routines accept `ln x` so that arguments far below
//! the smallest positive double still produce finite logarithms.

use crate::float::{exp, ln, ln1p};

const EPS: f64 = 1e-16;
const MAX_ITER: usize = 100_000;

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

/// `ln Σ_{n≥0} xⁿ / ((a+1)…(a+n))`.
fn ln_series(a: f64, x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut ap = a;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term < sum * EPS {
            break;
        }
    }
    ln(sum)
}

/// `ln` of the continued fraction in `Q(a, x) = e^{-x} x^a CF / Γ(a)`.
fn ln_cont_frac(a: f64, x: f64) -> f64 {
    let tiny = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    ln(h)
}

/// `ln P(a, x)` for the regularized lower incomplete gamma function, given
/// `ln x`.
pub fn ln_gamma_p_lnx(a: f64, ln_x: f64) -> f64 {
    if ln_x == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let x = exp(ln_x);
    if x == f64::INFINITY {
        return 0.0;
    }
    if x < a + 1.0 {
        a * ln_x - x - ln_gamma(a + 1.0) + ln_series(a, x)
    } else {
        let ln_q = a * ln_x - x - ln_gamma(a) + ln_cont_frac(a, x);
        ln1p(-exp(ln_q))
    }
}

/// `ln Q(a, x)` for the regularized upper incomplete gamma function.
pub fn ln_gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let ln_x = ln(x);
    if x < a + 1.0 {
        let ln_p = a * ln_x - x - ln_gamma(a + 1.0) + ln_series(a, x);
        ln1p(-exp(ln_p))
    } else {
        a * ln_x - x - ln_gamma(a) + ln_cont_frac(a, x)
    }
}

pub fn gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        exp(ln_gamma_p_lnx(a, ln(x)))
    }
}

pub fn gamma_q(a: f64, x: f64) -> f64 {
    exp(ln_gamma_q(a, x))
}
