//! Standard normal tail function `Q(x) = P(Z > x)` and its inverse.
//!
//! `Q` is evaluated through the musl `erfc` (via `libm`), accurate to a few
//! ulps. The inverse starts from the rational approximation of the inverse
//! complementary error function in `statrs` and is polished with Halley
//! steps against `Q`. It works on the lower half `p <= 1/2`, where `2p` is
//! exact; the upper half is mapped through `1 - p`, which is exact for
//! `p >= 1/2`.

use statrs::function::erf::erfc_inv;
use std::f64::consts::{PI, SQRT_2};

/// Gaussian tail probability `P(Z > x)` for standard normal `Z`.
pub fn q(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

fn pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Inverse of [`q`]: returns `x` with `q(x) = p`.
///
/// `p` must lie in the open interval `(0, 1)`; the endpoints map to `±inf`
/// and anything else to NaN.
pub fn q_inv(p: f64) -> f64 {
    if !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::INFINITY;
    }
    if p == 1.0 {
        return f64::NEG_INFINITY;
    }
    if p > 0.5 {
        -q_inv(1.0 - p)
    } else {
        let mut x = SQRT_2 * erfc_inv(2.0 * p);
        for _ in 0..2 {
            // Halley on q(x) - p = 0, with q' = -pdf and q'' = x pdf
            let f = q(x) - p;
            let d = pdf(x);
            if d == 0.0 {
                break;
            }
            let t = f / d;
            x += t / (1.0 + 0.5 * x * t);
        }
        x
    }
}
