//! Volumes and overlaps of p-norm balls.
//!
//! Closed-form volumes are evaluated on the log scale,
//! `log V = d log(2 Gamma(1/p + 1) eps) - log Gamma(d/p + 1)`, so that
//! `d = 3072` does not overflow. Monte Carlo routines split their samples into
//! chunks with one random stream per chunk and sum the counts, which keeps the
//! result independent of the thread count.

use rand::Rng;
use rayon::prelude::*;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::norm::{l0_count, lp_norm, PNorm};
use crate::rng::RngStream;
use crate::sampler::{sample_noise, CorruptionSpec, Noise, RadialMode};
use crate::stats::quantile;

/// Relative slack of the membership test, absorbing floating-point rounding.
pub const MEMBERSHIP_RTOL: f64 = 1e-9;

/// Default number of samples per overlap point.
pub const DEFAULT_OVERLAP_SAMPLES: usize = 1000;

const CHUNK: usize = 1 << 14;

/// A ball `{v in R^d : ||v||_p <= epsilon}`. For `p = 0` the ball holds the
/// vectors with at most `round(epsilon * d)` nonzero components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallSpec {
    pub p: PNorm,
    pub epsilon: f64,
    pub d: usize,
}

impl BallSpec {
    pub fn new(p: PNorm, epsilon: f64, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::param("d", "dimension must be at least 1"));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::param(
                "epsilon",
                format!("must be positive and finite, got {epsilon}"),
            ));
        }
        Ok(Self { p, epsilon, d })
    }

    pub fn contains(&self, v: &[f64]) -> bool {
        match self.p {
            PNorm::Zero => {
                v.iter().filter(|x| **x != 0.0).count() <= l0_count(self.epsilon, self.d)
            }
            p => lp_norm(v.iter().copied(), p) <= self.epsilon * (1.0 + MEMBERSHIP_RTOL),
        }
    }
}

/// Natural log of the Lebesgue volume of the ball.
pub fn log_volume(ball: &BallSpec) -> Result<f64> {
    let d = ball.d as f64;
    match ball.p {
        PNorm::Zero => Err(Error::param(
            "p",
            "the L0 ball has zero Lebesgue volume",
        )),
        PNorm::Infinity => Ok(d * (2.0 * ball.epsilon).ln()),
        PNorm::Finite(p) => {
            Ok(d * (2.0_f64.ln() + ln_gamma(1.0 / p + 1.0) + ball.epsilon.ln()) - ln_gamma(d / p + 1.0))
        }
    }
}

/// `log(V_hi / V_lo)` for two balls of equal radius in dimension `d`.
pub fn log_volume_factor(d: usize, p_hi: PNorm, p_lo: PNorm) -> Result<f64> {
    let hi = log_volume(&BallSpec::new(p_hi, 1.0, d)?)?;
    let lo = log_volume(&BallSpec::new(p_lo, 1.0, d)?)?;
    Ok(hi - lo)
}

pub fn volume_factor(d: usize, p_hi: PNorm, p_lo: PNorm) -> Result<f64> {
    Ok(log_volume_factor(d, p_hi, p_lo)?.exp())
}

/// One row of a volume-factor table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolumeFactorRow {
    pub d: usize,
    pub p_hi: PNorm,
    pub p_lo: PNorm,
    pub log_factor: f64,
    pub factor: f64,
}

pub fn volume_factor_table(dims: &[usize], pairs: &[(PNorm, PNorm)]) -> Result<Vec<VolumeFactorRow>> {
    let mut rows = Vec::with_capacity(dims.len() * pairs.len());
    for &d in dims {
        for &(p_hi, p_lo) in pairs {
            let log_factor = log_volume_factor(d, p_hi, p_lo)?;
            rows.push(VolumeFactorRow {
                d,
                p_hi,
                p_lo,
                log_factor,
                factor: log_factor.exp(),
            });
        }
    }
    Ok(rows)
}

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

fn chunk_sizes(n: usize) -> Vec<(u64, usize)> {
    (0..n.div_ceil(CHUNK))
        .map(|c| (c as u64, CHUNK.min(n - c * CHUNK)))
        .collect()
}

/// Estimates `V_hi / V_lo` by drawing `n_samples` points uniformly from the
/// cube `[-1, 1]^d`, which encloses both unit balls. The standard error
/// comes from the delta method on the two hit fractions and their covariance.
pub fn mc_volume_factor(
    d: usize,
    p_hi: PNorm,
    p_lo: PNorm,
    n_samples: usize,
    stream: RngStream,
) -> Result<Estimate> {
    let hi = BallSpec::new(p_hi, 1.0, d)?;
    let lo = BallSpec::new(p_lo, 1.0, d)?;
    for b in [&hi, &lo] {
        if b.p == PNorm::Zero {
            return Err(Error::param("p", "the L0 ball has zero Lebesgue volume"));
        }
    }
    if n_samples == 0 {
        return Err(Error::param("n_samples", "must be at least 1"));
    }
    let (n_hi, n_lo, n_both) = chunk_sizes(n_samples)
        .into_par_iter()
        .map(|(c, len)| {
            let mut rng = stream.with_index(stream.stream_index.wrapping_add(c)).rng();
            let mut x = vec![0.0; d];
            let mut counts = (0u64, 0u64, 0u64);
            for _ in 0..len {
                for v in &mut x {
                    *v = 2.0 * rng.random::<f64>() - 1.0;
                }
                let a = hi.contains(&x);
                let b = lo.contains(&x);
                counts.0 += a as u64;
                counts.1 += b as u64;
                counts.2 += (a && b) as u64;
            }
            counts
        })
        .reduce(|| (0, 0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
    if n_hi == 0 || n_lo == 0 {
        return Err(Error::Invariant {
            field: "n_samples".into(),
            message: format!("no sample hit one of the balls; {n_samples} samples are too few at d = {d}"),
        });
    }
    let n = n_samples as f64;
    let (f_hi, f_lo, f_both) = (n_hi as f64 / n, n_lo as f64 / n, n_both as f64 / n);
    let ratio = f_hi / f_lo;
    let var_hi = f_hi * (1.0 - f_hi) / n;
    let var_lo = f_lo * (1.0 - f_lo) / n;
    let cov = (f_both - f_hi * f_lo) / n;
    let rel_var = var_hi / (f_hi * f_hi) + var_lo / (f_lo * f_lo) - 2.0 * cov / (f_hi * f_lo);
    Ok(Estimate {
        value: ratio,
        std_error: ratio * rel_var.max(0.0).sqrt(),
        n_samples,
    })
}

/// A sample from the ball, as a difference vector in `R^d`.
///
/// L0 draws mark `round(eps * d)` components as `sample_l0` does; each
/// marked component becomes `value - base` with the replacement value in
/// `{0, 1}` and a `U[0, 1]` base pixel, so it is `U[-1, 1]` and almost surely
/// nonzero.
fn ball_draw<R: Rng + ?Sized>(p: PNorm, epsilon: f64, d: usize, rng: &mut R) -> Result<Vec<f64>> {
    let spec = CorruptionSpec::new(p, epsilon)?;
    let noise = sample_noise(d, &spec, rng)?;
    Ok(match noise.noise {
        Noise::Additive(v) => v,
        Noise::Replace { indices, values } => {
            let mut v = vec![0.0; d];
            for (i, value) in indices.into_iter().zip(values) {
                v[i] = f64::from(value) - rng.random::<f64>();
            }
            v
        }
    })
}

/// Membership frequencies between a family of balls and one fixed ball.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapCurve {
    pub fixed_ball: BallSpec,
    pub varying_p: PNorm,
    pub epsilon_grid: Vec<f64>,
    /// Share of draws from the varying ball that lie in the fixed ball.
    pub frac_first_in_second: Vec<f64>,
    /// Share of draws from the fixed ball that lie in the varying ball.
    pub frac_second_in_first: Vec<f64>,
    pub n_samples: usize,
}

/// Stream offsets of the sample roles in [`overlap_curve`].
const ROLE_SHIFT: u32 = 40;

/// For every `eps` in `grid`, draws `n_samples` points from the ball
/// `(first_p, eps)` and from `second`, and records how often each lands in
/// the other ball.
///
/// Draw `j` of the fixed ball uses stream `stream_index + j`; draw `j` of the
/// varying family uses `stream_index + (1 << 40) + j` and is scaled to each
/// `eps`. L0 draws depend on `eps` through their support size, so grid point
/// `g` uses `stream_index + ((2 + g) << 40) + j`.
pub fn overlap_curve(
    first_p: PNorm,
    grid: &[f64],
    second: &BallSpec,
    n_samples: usize,
    stream: RngStream,
) -> Result<OverlapCurve> {
    if n_samples == 0 {
        return Err(Error::param("n_samples", "must be at least 1"));
    }
    let d = second.d;
    let firsts: Vec<BallSpec> = grid
        .iter()
        .map(|&eps| BallSpec::new(first_p, eps, d))
        .collect::<Result<_>>()?;
    let draws = |role: u64, p: PNorm, eps: f64| -> Result<Vec<Vec<f64>>> {
        (0..n_samples as u64)
            .into_par_iter()
            .map(|j| {
                let idx = stream
                    .stream_index
                    .wrapping_add(role << ROLE_SHIFT)
                    .wrapping_add(j);
                ball_draw(p, eps, d, &mut stream.with_index(idx).rng())
            })
            .collect()
    };
    let count = |samples: &[Vec<f64>], ball: &BallSpec, scale: f64| -> f64 {
        let hits = samples
            .par_iter()
            .filter(|v| {
                if scale == 1.0 {
                    ball.contains(v)
                } else {
                    let w: Vec<f64> = v.iter().map(|x| x * scale).collect();
                    ball.contains(&w)
                }
            })
            .count();
        hits as f64 / n_samples as f64
    };

    let second_draws = draws(0, second.p, second.epsilon)?;
    let unit_first = if first_p == PNorm::Zero {
        None
    } else {
        Some(draws(1, first_p, 1.0)?)
    };
    let mut first_in_second = Vec::with_capacity(grid.len());
    let mut second_in_first = Vec::with_capacity(grid.len());
    for (g, first) in firsts.iter().enumerate() {
        let f = match &unit_first {
            Some(unit) => count(unit, second, first.epsilon),
            None => count(&draws(2 + g as u64, first_p, first.epsilon)?, second, 1.0),
        };
        first_in_second.push(f);
        second_in_first.push(count(&second_draws, first, 1.0));
    }
    Ok(OverlapCurve {
        fixed_ball: *second,
        varying_p: first_p,
        epsilon_grid: grid.to_vec(),
        frac_first_in_second: first_in_second,
        frac_second_in_first: second_in_first,
        n_samples,
    })
}

/// Summary of `||v||_p / eps` over draws from a ball or sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct Concentration {
    pub n_samples: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// `(q, value)` pairs for [`CONCENTRATION_QUANTILES`].
    pub quantiles: Vec<(f64, f64)>,
}

pub const CONCENTRATION_QUANTILES: [f64; 7] = [0.01, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99];

impl Concentration {
    pub fn median(&self) -> f64 {
        quantile_of(&self.quantiles, 0.5)
    }
}

fn quantile_of(q: &[(f64, f64)], at: f64) -> f64 {
    q.iter().find(|(x, _)| *x == at).map(|(_, v)| *v).unwrap_or(f64::NAN)
}

/// Draw `j` uses stream `stream_index + j`. For L0 the ratio is the number
/// of marked components over `eps * d`.
pub fn concentration_check(
    ball: &BallSpec,
    radial: RadialMode,
    n_samples: usize,
    stream: RngStream,
) -> Result<Concentration> {
    if n_samples == 0 {
        return Err(Error::param("n_samples", "must be at least 1"));
    }
    let spec = CorruptionSpec::new(ball.p, ball.epsilon)?.with_radial(radial)?;
    let mut ratios: Vec<f64> = (0..n_samples as u64)
        .into_par_iter()
        .map(|j| {
            let mut rng = stream.with_index(stream.stream_index.wrapping_add(j)).rng();
            let noise = sample_noise(ball.d, &spec, &mut rng)?;
            Ok(match ball.p {
                PNorm::Zero => noise.norm() / (ball.epsilon * ball.d as f64),
                _ => noise.norm() / ball.epsilon,
            })
        })
        .collect::<Result<_>>()?;
    ratios.sort_by(f64::total_cmp);
    let mean = ratios.iter().sum::<f64>() / n_samples as f64;
    Ok(Concentration {
        n_samples,
        mean,
        min: ratios[0],
        max: ratios[n_samples - 1],
        quantiles: CONCENTRATION_QUANTILES
            .iter()
            .map(|&q| (q, quantile(&ratios, q)))
            .collect(),
    })
}
