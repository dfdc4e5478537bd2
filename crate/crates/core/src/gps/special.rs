//! Digamma (from statrs), trigamma and the inverse digamma.

use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Digamma `psi(x)` for `x > 0`.
pub fn digamma(x: f64) -> Result<f64> {
    if x.is_nan() || x <= 0.0 {
        return Err(Error::Domain(format!("digamma of {x}")));
    }
    Ok(psi(x))
}

/// Digamma without the domain check; callers guarantee `x > 0`.
#[inline]
pub(crate) fn psi(x: f64) -> f64 {
    statrs::function::gamma::digamma(x)
}

/// Trigamma `psi'(x)` for `x > 0`.
pub(crate) fn trigamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 6.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let r = 1.0 / (x * x);
    let tail = (1.0 / x)
        * r
        * (1.0 / 6.0
            + r * (-1.0 / 30.0
                + r * (1.0 / 42.0 + r * (-1.0 / 30.0 + r * (5.0 / 66.0 + r * (-691.0 / 2730.0 + r * (7.0 / 6.0)))))));
    acc + 1.0 / x + 0.5 * r + tail
}

/// The `x > 0` with `psi(x) = y`, by Newton iteration.
pub fn inv_digamma(y: f64) -> f64 {
    if y.is_nan() {
        return f64::NAN;
    }
    if y > 700.0 {
        // psi(x) ~ ln(x) - 1/(2x) this far out.
        return y.exp() + 0.5;
    }
    let mut x = if y >= -2.22 {
        y.exp() + 0.5
    } else {
        -1.0 / (y + EULER_GAMMA)
    };
    for _ in 0..100 {
        let f = psi(x) - y;
        if f.abs() <= 1e-13 * y.abs().max(1.0) {
            break;
        }
        let mut next = x - f / trigamma(x);
        if next <= 0.0 {
            next = 0.5 * x;
        }
        if next == x {
            break;
        }
        x = next;
    }
    x
}
