//! Uniform random corruptions from p-norm balls and spheres.
//!
//! For `0 < p < inf` a draw is built from `d` independent magnitudes
//! `x_i = G_i^(1/p)` with `G_i ~ Gamma(1/p, 1)`, random signs, and a radial
//! factor `r`. The vector `x / ||x||_p` is distributed by the cone measure of
//! the unit sphere, and scaling by `r = w^(1/d)`, `w ~ U[0, 1]`, makes the
//! result uniform in the ball because the volume inside radius `t` grows as
//! `t^d`. Fixing `r = 1` samples the sphere.
//!
//! `p = inf` and `p = 0` have dedicated samplers: independent uniform
//! components, and replacement of a fixed share of components by 0 or 1.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::gamma::sample_ln_gamma;
use crate::image::ImageTensor;
use crate::norm::{l0_count, lp_norm, PNorm};

/// How the radial factor of a draw is distributed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadialMode {
    /// Uniform in the ball, `r = w^(1/d)`.
    Ball,
    /// On the sphere, `r = 1`.
    Sphere,
    /// `r = w^(k/d)`; `k = 1` is the ball, larger `k` pushes mass inward.
    Exponent(f64),
}

impl RadialMode {
    fn radius<R: Rng + ?Sized>(self, dim: usize, rng: &mut R) -> f64 {
        match self {
            RadialMode::Sphere => 1.0,
            RadialMode::Ball => {
                let w: f64 = rng.random();
                (w.ln() / dim as f64).exp()
            }
            RadialMode::Exponent(k) => {
                let w: f64 = rng.random();
                w.powf(k / dim as f64)
            }
        }
    }
}

impl fmt::Display for RadialMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RadialMode::Ball => f.write_str("ball"),
            RadialMode::Sphere => f.write_str("sphere"),
            RadialMode::Exponent(k) => write!(f, "exponent:{k}"),
        }
    }
}

impl FromStr for RadialMode {
    type Err = Error;

    /// Parses `ball`, `sphere` or `exponent:<k>`.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "ball" => Ok(RadialMode::Ball),
            "sphere" => Ok(RadialMode::Sphere),
            t => t
                .strip_prefix("exponent:")
                .and_then(|k| k.parse::<f64>().ok())
                .filter(|k| *k > 0.0 && k.is_finite())
                .map(RadialMode::Exponent)
                .ok_or_else(|| {
                    Error::param("mode", format!("expected ball, sphere or exponent:<k> with k > 0, got `{s}`"))
                }),
        }
    }
}

/// One corruption distribution: a norm, a strength and a radial law.
///
/// For `p = 0`, `epsilon` is the share of components replaced, in `(0, 1]`.
/// Otherwise it is the radius of the ball in `[0, 1]` pixel units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorruptionSpec {
    pub p: PNorm,
    pub epsilon: f64,
    pub radial: RadialMode,
    /// Clip corrupted pixels to `[0, 1]`.
    pub clamp: bool,
}

impl CorruptionSpec {
    /// A ball-mode spec with clamping on.
    pub fn new(p: PNorm, epsilon: f64) -> Result<Self> {
        let spec = Self {
            p,
            epsilon,
            radial: RadialMode::Ball,
            clamp: true,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_radial(mut self, radial: RadialMode) -> Result<Self> {
        self.radial = radial;
        self.validate()?;
        Ok(self)
    }

    pub fn with_clamp(mut self, clamp: bool) -> Self {
        self.clamp = clamp;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::param(
                "epsilon",
                format!("must be positive and finite, got {}", self.epsilon),
            ));
        }
        if self.p == PNorm::Zero && self.epsilon > 1.0 {
            return Err(Error::param(
                "epsilon",
                format!("L0 ratio must lie in (0, 1], got {}", self.epsilon),
            ));
        }
        if let PNorm::Finite(p) = self.p {
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::param("p", format!("invalid exponent {p}")));
            }
        }
        if let RadialMode::Exponent(k) = self.radial {
            if !(k > 0.0 && k.is_finite()) {
                return Err(Error::param(
                    "radial exponent",
                    format!("must be positive and finite, got {k}"),
                ));
            }
        }
        Ok(())
    }
}

/// The payload of a noise draw.
#[derive(Debug, Clone, PartialEq)]
pub enum Noise {
    /// Added to the image component-wise.
    Additive(Vec<f64>),
    /// Listed components are overwritten with the paired values (0 or 1).
    Replace { indices: Vec<usize>, values: Vec<f32> },
}

/// A single corruption realization for a `dim`-dimensional input.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseVector {
    pub p: PNorm,
    pub epsilon: f64,
    pub dim: usize,
    pub noise: Noise,
}

impl NoiseVector {
    /// Norm of the noise itself: the p-norm of the additive components, or the
    /// number of marked components for replacement noise.
    pub fn norm(&self) -> f64 {
        match &self.noise {
            Noise::Additive(v) => lp_norm(v.iter().copied(), self.p),
            Noise::Replace { indices, .. } => indices.len() as f64,
        }
    }

    pub fn zeros(dim: usize, p: PNorm, epsilon: f64) -> Self {
        Self {
            p,
            epsilon,
            dim,
            noise: Noise::Additive(vec![0.0; dim]),
        }
    }

    pub fn additive(&self) -> Option<&[f64]> {
        match &self.noise {
            Noise::Additive(v) => Some(v),
            Noise::Replace { .. } => None,
        }
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        return Err(Error::param("d", "dimension must be at least 1"));
    }
    Ok(())
}

/// Draws from the ball or sphere of a finite positive `p`.
pub fn sample_finite_p<R: Rng + ?Sized>(
    dim: usize,
    spec: &CorruptionSpec,
    rng: &mut R,
) -> Result<NoiseVector> {
    check_dim(dim)?;
    spec.validate()?;
    let PNorm::Finite(p) = spec.p else {
        return Err(Error::param("p", format!("expected a finite positive p, got {}", spec.p)));
    };
    let shape = 1.0 / p;
    let mut x: Vec<f64> = Vec::with_capacity(dim);
    for _ in 0..dim {
        let magnitude = (sample_ln_gamma(shape, rng) * shape).exp();
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        x.push(sign * magnitude);
    }
    let r = spec.radial.radius(dim, rng);
    let n = lp_norm(x.iter().copied(), spec.p);
    let scale = spec.epsilon * r / n;
    for v in &mut x {
        *v *= scale;
    }
    Ok(NoiseVector {
        p: spec.p,
        epsilon: spec.epsilon,
        dim,
        noise: Noise::Additive(x),
    })
}

/// Draws an L0 corruption: `round(epsilon * d)` distinct components chosen
/// uniformly, each replaced by 0 or 1 with equal probability. The radial mode
/// has no effect.
pub fn sample_l0<R: Rng + ?Sized>(
    dim: usize,
    spec: &CorruptionSpec,
    rng: &mut R,
) -> Result<NoiseVector> {
    check_dim(dim)?;
    spec.validate()?;
    if spec.p != PNorm::Zero {
        return Err(Error::param("p", format!("expected p = 0, got {}", spec.p)));
    }
    let k = l0_count(spec.epsilon, dim);
    if k == 0 {
        return Err(Error::EmptyL0Selection {
            epsilon: spec.epsilon,
            dim,
            min_epsilon: 0.5 / dim as f64,
        });
    }
    // Partial Fisher-Yates over u64 draws, independent of the platform's usize.
    let mut pool: Vec<usize> = (0..dim).collect();
    let mut indices = Vec::with_capacity(k);
    let mut values = Vec::with_capacity(k);
    for i in 0..k {
        let j = i + rng.random_range(0..(dim - i) as u64) as usize;
        pool.swap(i, j);
        indices.push(pool[i]);
        values.push(if rng.random::<bool>() { 1.0 } else { 0.0 });
    }
    Ok(NoiseVector {
        p: PNorm::Zero,
        epsilon: spec.epsilon,
        dim,
        noise: Noise::Replace { indices, values },
    })
}

/// Draws an L-infinity corruption.
///
/// Ball mode draws every component from `U[-eps, eps]`. Sphere mode does the
/// same and then forces one uniformly chosen component to `+-eps` with a
/// random sign, which is the uniform (cone) measure on the cube's surface.
/// Exponent mode scales such a sphere draw by `w^(k/d)`.
pub fn sample_linf<R: Rng + ?Sized>(
    dim: usize,
    spec: &CorruptionSpec,
    rng: &mut R,
) -> Result<NoiseVector> {
    check_dim(dim)?;
    spec.validate()?;
    if spec.p != PNorm::Infinity {
        return Err(Error::param("p", format!("expected p = inf, got {}", spec.p)));
    }
    let eps = spec.epsilon;
    let mut x: Vec<f64> = (0..dim)
        .map(|_| eps * (2.0 * rng.random::<f64>() - 1.0))
        .collect();
    if spec.radial != RadialMode::Ball {
        let face = rng.random_range(0..dim as u64) as usize;
        x[face] = if rng.random::<bool>() { eps } else { -eps };
        let r = spec.radial.radius(dim, rng);
        if r != 1.0 {
            for v in &mut x {
                *v *= r;
            }
        }
    }
    Ok(NoiseVector {
        p: PNorm::Infinity,
        epsilon: eps,
        dim,
        noise: Noise::Additive(x),
    })
}

/// Dispatches to the sampler matching `spec.p`.
pub fn sample_noise<R: Rng + ?Sized>(
    dim: usize,
    spec: &CorruptionSpec,
    rng: &mut R,
) -> Result<NoiseVector> {
    match spec.p {
        PNorm::Zero => sample_l0(dim, spec, rng),
        PNorm::Finite(_) => sample_finite_p(dim, spec, rng),
        PNorm::Infinity => sample_linf(dim, spec, rng),
    }
}

/// Applies a noise draw to an image. See [`apply_noise_in_place`].
pub fn apply_noise(image: &ImageTensor, noise: &NoiseVector, clamp: bool) -> Result<ImageTensor> {
    let mut out = image.clone();
    apply_noise_in_place(out.data_mut(), noise, clamp)?;
    Ok(out)
}

/// Corrupts `pixels` in place.
///
/// Additive noise is summed in `f64`, optionally clipped to `[0, 1]`, and
/// stored as the nearest `f32` that is not farther from the original pixel
/// than the exact result. Both steps only move a component toward its
/// original value, so the distance to the original never exceeds the norm of
/// the noise.
pub fn apply_noise_in_place(pixels: &mut [f32], noise: &NoiseVector, clamp: bool) -> Result<()> {
    if pixels.len() != noise.dim {
        return Err(Error::LengthMismatch {
            expected: noise.dim,
            actual: pixels.len(),
        });
    }
    match &noise.noise {
        Noise::Additive(v) => {
            if v.len() != pixels.len() {
                return Err(Error::LengthMismatch {
                    expected: pixels.len(),
                    actual: v.len(),
                });
            }
            for (px, dv) in pixels.iter_mut().zip(v) {
                let mut y = f64::from(*px) + dv;
                if clamp {
                    y = y.clamp(0.0, 1.0);
                }
                *px = round_toward(*px, y);
            }
        }
        Noise::Replace { indices, values } => {
            for (&i, &value) in indices.iter().zip(values) {
                pixels[i] = value;
            }
        }
    }
    Ok(())
}

/// Rounds `target` to `f32`, stepping one ulp back toward `origin` if plain
/// rounding overshot.
fn round_toward(origin: f32, target: f64) -> f32 {
    let mut y = target as f32;
    let origin64 = f64::from(origin);
    if (f64::from(y) - origin64).abs() > (target - origin64).abs() {
        y = if y > origin { y.next_down() } else { y.next_up() };
    }
    y
}
