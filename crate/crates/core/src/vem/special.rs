//! Log-gamma, digamma and trigamma for positive arguments, plus a stable
//! `log(exp(a) + exp(b))`.
//!
//! Small arguments are shifted upward with the recurrences
//! `lgamma(x) = lgamma(x + 1) - ln x`, `digamma(x) = digamma(x + 1) - 1/x` and
//! `trigamma(x) = trigamma(x + 1) + 1/x^2` until the asymptotic series are
//! accurate to double precision.
//!
//! The plain functions return NaN outside the domain; the `try_` versions
//! report an error instead.

use crate::error::{LdaError, Result};

const SHIFT_LGAMMA: f64 = 7.0;
const SHIFT_PSI: f64 = 6.0;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

pub fn lgamma(x: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NAN;
    }
    if x.is_infinite() {
        return f64::INFINITY;
    }
    let mut x = x;
    let mut prod = 1.0;
    let mut log_shift = 0.0;
    while x < SHIFT_LGAMMA {
        prod *= x;
        x += 1.0;
        if prod > 1e280 {
            log_shift += prod.ln();
            prod = 1.0;
        }
    }
    log_shift += prod.ln();
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = inv
        * (1.0 / 12.0
            + inv2
                * (-1.0 / 360.0
                    + inv2
                        * (1.0 / 1260.0
                            + inv2
                                * (-1.0 / 1680.0
                                    + inv2 * (1.0 / 1188.0 + inv2 * (-691.0 / 360_360.0 + inv2 / 156.0))))));
    (x - 0.5) * x.ln() - x + HALF_LN_2PI + series - log_shift
}

pub fn digamma(x: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NAN;
    }
    if x.is_infinite() {
        return f64::INFINITY;
    }
    let mut x = x;
    let mut acc = 0.0;
    while x < SHIFT_PSI {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2
                        * (1.0 / 252.0
                            - inv2
                                * (1.0 / 240.0
                                    - inv2 * (1.0 / 132.0 - inv2 * (691.0 / 32_760.0 - inv2 / 12.0))))));
    acc + x.ln() - 0.5 * inv - series
}

pub fn trigamma(x: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NAN;
    }
    if x.is_infinite() {
        return 0.0;
    }
    let mut x = x;
    let mut acc = 0.0;
    while x < SHIFT_PSI {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = inv
        + 0.5 * inv2
        + inv
            * inv2
            * (1.0 / 6.0
                - inv2
                    * (1.0 / 30.0
                        - inv2
                            * (1.0 / 42.0
                                - inv2 * (1.0 / 30.0 - inv2 * (5.0 / 66.0 - inv2 * (691.0 / 2730.0 - inv2 * 7.0 / 6.0))))));
    acc + series
}

fn domain(name: &str, x: f64) -> Result<()> {
    if x > 0.0 {
        Ok(())
    } else {
        Err(LdaError::Numeric(format!("{name} is undefined at {x}")))
    }
}

pub fn try_lgamma(x: f64) -> Result<f64> {
    domain("lgamma", x).map(|_| lgamma(x))
}

pub fn try_digamma(x: f64) -> Result<f64> {
    domain("digamma", x).map(|_| digamma(x))
}

pub fn try_trigamma(x: f64) -> Result<f64> {
    domain("trigamma", x).map(|_| trigamma(x))
}

/// `log(exp(log_a) + exp(log_b))`; `-inf` stands for zero mass.
pub fn log_sum(log_a: f64, log_b: f64) -> f64 {
    let (hi, lo) = if log_a >= log_b { (log_a, log_b) } else { (log_b, log_a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}
