//! Gamma(shape, 1) variates returned on the log scale.
//!
//! The p-norm sampler needs `G(1/p)^(1/p)`. For large `p` the shape `1/p` is
//! tiny and `G` itself routinely underflows `f64` (at `p = 200` a typical draw
//! is around `exp(-200)`), while `G^(1/p)` is an ordinary number in `(0, 1]`.
//! Working with `ln G` keeps every step representable.
//!
//! * `shape >= 1`: Marsaglia & Tsang (2000) squeeze method.
//! * `0 < shape < 1`: Ahrens & Dieter (1974) algorithm GS, a direct rejection
//!   scheme with no `shape + 1` boosting. With `b = 1 + shape/e` and
//!   `u1, u2 ~ U(0, 1)`, let `P = b * u1`:
//!   - if `P <= 1`, propose `x = P^(1/shape)` and accept iff `u2 <= exp(-x)`;
//!   - otherwise propose `x = -ln((b - P)/shape)` and accept iff
//!     `u2 <= x^(shape - 1)`.
//!
//!   Both branches are exact for every shape in `(0, 1)`.

use rand::distr::Open01;
use rand::Rng;
use rand_distr::StandardNormal;

/// Draws `ln G` with `G ~ Gamma(shape, 1)`. `shape` must be positive and finite.
pub fn sample_ln_gamma<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    debug_assert!(shape > 0.0 && shape.is_finite());
    if shape < 1.0 {
        ln_gamma_small_shape(shape, rng)
    } else {
        ln_gamma_marsaglia_tsang(shape, rng)
    }
}

fn ln_gamma_small_shape<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    let b = 1.0 + shape / std::f64::consts::E;
    loop {
        let u1: f64 = rng.sample(Open01);
        let u2: f64 = rng.sample(Open01);
        let p = b * u1;
        if p <= 1.0 {
            let ln_x = p.ln() / shape;
            // u2 <= exp(-x)  <=>  -ln u2 >= x
            if -u2.ln() >= ln_x.exp() {
                return ln_x;
            }
        } else {
            let x = -((b - p) / shape).ln();
            if x <= 0.0 {
                continue;
            }
            let ln_x = x.ln();
            if u2.ln() <= (shape - 1.0) * ln_x {
                return ln_x;
            }
        }
    }
}

fn ln_gamma_marsaglia_tsang<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x: f64 = rng.sample(StandardNormal);
        let t = 1.0 + c * x;
        if t <= 0.0 {
            continue;
        }
        let v = t * t * t;
        let u: f64 = rng.sample(Open01);
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 || u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return d.ln() + v.ln();
        }
    }
}
