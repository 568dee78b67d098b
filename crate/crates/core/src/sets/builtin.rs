//! Built-in corruption sets for the CIFAR and Tiny ImageNet profiles.
//!
//! The evaluation grid has 10 strengths per norm. Only the smallest value,
//! the fifth value (the top of the reduced training mixture `C3`) and the
//! largest value are fixed; the grid is geometric between the first and fifth
//! value and between the fifth and tenth. Built-ins are immutable: changing
//! any value must bump [`BUILTIN_VERSION`].

use super::{CorruptionSet, Epsilons, Intent, Profile, Registry, SpecGroup};
use crate::error::{Error, Result};
use crate::norm::PNorm;
use crate::sampler::RadialMode;

pub const BUILTIN_VERSION: u32 = 1;

pub const BUILTIN_NAMES: [&str; 5] = ["mCE_Lp", "iCE", "C1", "C2", "C3"];

/// `(p, [min, fifth, max] for CIFAR, [min, fifth, max] for TIN)`.
const LP_GRID: [(f64, [f64; 3], [f64; 3]); 9] = [
    (0.0, [0.005, 0.03, 0.12], [0.01, 0.075, 0.3]),
    (0.5, [2.5e4, 1.5e5, 4e5], [2e5, 1.8e6, 1.2e7]),
    (1.0, [12.5, 75.0, 200.0], [37.5, 300.0, 1500.0]),
    (2.0, [0.25, 1.5, 5.0], [0.5, 4.0, 20.0]),
    (5.0, [0.03, 0.2, 0.6], [0.05, 0.3, 1.5]),
    (10.0, [0.02, 0.1, 0.3], [0.02, 0.14, 0.7]),
    (50.0, [0.01, 0.06, 0.18], [0.02, 0.1, 0.35]),
    (200.0, [0.01, 0.05, 0.15], [0.02, 0.08, 0.3]),
    (f64::INFINITY, [0.005, 0.04, 0.15], [0.01, 0.06, 0.3]),
];

/// `(p, CIFAR eps, TIN eps)` of the imperceptible set.
const IMPERCEPTIBLE: [(f64, f64, f64); 6] = [
    (0.5, 2.5e4, 7e5),
    (1.0, 25.0, 125.0),
    (2.0, 0.5, 2.0),
    (10.0, 0.03, 0.06),
    (50.0, 0.02, 0.04),
    (f64::INFINITY, 0.01, 0.01),
];

/// Norms of the `C2` mixture.
const C2_NORMS: [f64; 3] = [0.0, 2.0, f64::INFINITY];

fn geometric(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| match i {
            0 => a,
            i if i == n - 1 => b,
            i => a * (b / a).powf(i as f64 / (n - 1) as f64),
        })
        .collect()
}

/// The 10-value evaluation grid for one norm and profile.
fn lp_grid(profile: Profile, p: f64) -> Vec<f64> {
    let (_, cifar, tin) = LP_GRID
        .iter()
        .find(|(q, _, _)| *q == p)
        .expect("norm of the built-in grid");
    let [min, fifth, max] = if profile == Profile::Tin { *tin } else { *cifar };
    let mut values = geometric(min, fifth, 5);
    values.extend(geometric(fifth, max, 6).into_iter().skip(1));
    values
}

fn group(p: f64, values: Vec<f64>, radial: RadialMode) -> SpecGroup {
    SpecGroup::norm(
        PNorm::new(p).expect("built-in norm"),
        Epsilons::List(values),
        radial,
    )
}

/// Expands one of [`BUILTIN_NAMES`] for `Profile::Cifar` or `Profile::Tin`.
pub fn builtin_set(name: &str, profile: Profile) -> Result<CorruptionSet> {
    if !profile.is_builtin() {
        return Err(Error::UnknownProfile(profile.to_string()));
    }
    let all_norms = LP_GRID.iter().map(|(p, _, _)| *p);
    let (intent, groups): (Intent, Vec<SpecGroup>) = match name {
        "mCE_Lp" => (
            Intent::TestGrid,
            all_norms
                .map(|p| group(p, lp_grid(profile, p), RadialMode::Ball))
                .collect(),
        ),
        "iCE" => (
            Intent::Imperceptible,
            IMPERCEPTIBLE
                .iter()
                .map(|&(p, cifar, tin)| {
                    let eps = if profile == Profile::Tin { tin } else { cifar };
                    group(p, vec![eps], RadialMode::Sphere)
                })
                .collect(),
        ),
        "C1" => (
            Intent::Training,
            all_norms
                .map(|p| group(p, lp_grid(profile, p), RadialMode::Ball))
                .collect(),
        ),
        "C2" => (
            Intent::Training,
            C2_NORMS
                .iter()
                .map(|&p| group(p, lp_grid(profile, p), RadialMode::Ball))
                .collect(),
        ),
        "C3" => (
            Intent::Training,
            all_norms
                .map(|p| {
                    let mut v = lp_grid(profile, p);
                    v.truncate(5);
                    group(p, v, RadialMode::Ball)
                })
                .collect(),
        ),
        _ => return Err(Error::UnknownSet(name.to_string())),
    };
    CorruptionSet::new(name, profile, intent, groups)
}

/// All built-in sets of one profile.
pub fn builtin_registry(profile: Profile) -> Result<Registry> {
    let mut reg = Registry::default();
    for name in BUILTIN_NAMES {
        reg.insert(builtin_set(name, profile)?)?;
    }
    Ok(reg)
}
