//! Corruption label layouts of the supported error tables.

use crate::norm::PNorm;

/// Real-world corruption benchmark labels (CIFAR-10-C / Tiny-ImageNet-C).
pub const STANDARD_CORRUPTIONS: [&str; 19] = [
    "gaussian_noise",
    "shot_noise",
    "impulse_noise",
    "speckle_noise",
    "defocus_blur",
    "glass_blur",
    "motion_blur",
    "zoom_blur",
    "gaussian_blur",
    "snow",
    "frost",
    "fog",
    "brightness",
    "contrast",
    "elastic_transform",
    "pixelate",
    "jpeg_compression",
    "spatter",
    "saturate",
];

/// The pixel-wise noise corruptions excluded from the ex-noise mean.
pub const STANDARD_NOISE: [&str; 4] = ["gaussian_noise", "shot_noise", "impulse_noise", "speckle_noise"];

pub const STANDARD_SEVERITIES: u32 = 5;

/// Norms of the p-norm evaluation grid, in table order.
pub const LP_NORMS: [f64; 9] = [0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 50.0, 200.0, f64::INFINITY];

pub const LP_SEVERITIES: u32 = 10;

/// Label of the clean (uncorrupted) pseudo-corruption.
pub const CLEAN_LABEL: &str = "clean";

/// Prefix of imperceptible-set labels, e.g. `imp_L2`.
pub const IMPERCEPTIBLE_PREFIX: &str = "imp_";

pub fn lp_labels() -> Vec<String> {
    LP_NORMS
        .iter()
        .map(|&p| PNorm::new(p).expect("grid norm").label())
        .collect()
}

pub fn is_standard_noise(label: &str) -> bool {
    STANDARD_NOISE.contains(&label)
}

/// Which metric family a label feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelFamily {
    Clean,
    Imperceptible,
    PNorm,
    RealWorld,
}

pub fn classify(label: &str) -> LabelFamily {
    if label == CLEAN_LABEL {
        LabelFamily::Clean
    } else if label.starts_with(IMPERCEPTIBLE_PREFIX) {
        LabelFamily::Imperceptible
    } else if label.starts_with('L') && label.parse::<PNorm>().is_ok() {
        LabelFamily::PNorm
    } else {
        LabelFamily::RealWorld
    }
}
