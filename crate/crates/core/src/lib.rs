//! Random p-norm corruptions for image robustness testing.
//!
//! The crate draws uniform samples from p-norm balls and spheres for any
//! `0 <= p <= inf`, applies them to images reproducibly, scores classifiers
//! with corruption-error metrics, and studies the geometry of p-norm balls in
//! high dimension.

pub mod error;
pub mod gamma;
pub mod geometry;
pub mod image;
pub mod metrics;
pub mod norm;
pub mod pipeline;
pub mod rng;
pub mod sampler;
pub mod sets;
pub mod stats;

pub use error::{Error, Result};
pub use image::{lp_distance, ImageTensor};
pub use norm::{l0_count, lp_norm, PNorm};
pub use rng::RngStream;
pub use sampler::{
    apply_noise, apply_noise_in_place, sample_finite_p, sample_l0, sample_linf, sample_noise,
    CorruptionSpec, Noise, NoiseVector, RadialMode,
};
pub use sets::{CorruptionSet, EpsilonGrid, Intent, Profile};
