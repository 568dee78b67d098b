//! Named corruption sets: evaluation grids, imperceptible sets and training
//! mixtures.

mod builtin;
mod config;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::norm::PNorm;
use crate::sampler::{CorruptionSpec, RadialMode};

pub use builtin::{builtin_registry, builtin_set, BUILTIN_NAMES, BUILTIN_VERSION};
pub use config::{parse_registry, parse_set_file, serialize_set};

/// Dataset profile a set was calibrated for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Profile {
    /// CIFAR-10/100, 3x32x32.
    Cifar,
    /// Tiny ImageNet, 3x64x64.
    Tin,
    Custom,
}

impl Profile {
    pub fn is_builtin(self) -> bool {
        !matches!(self, Profile::Custom)
    }

    /// Image shape `(channels, height, width)` of the profile's dataset.
    pub fn image_shape(self) -> Option<[usize; 3]> {
        match self {
            Profile::Cifar => Some([3, 32, 32]),
            Profile::Tin => Some([3, 64, 64]),
            Profile::Custom => None,
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Profile::Cifar => "CIFAR",
            Profile::Tin => "TIN",
            Profile::Custom => "custom",
        })
    }
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cifar" => Ok(Profile::Cifar),
            "tin" => Ok(Profile::Tin),
            "custom" => Ok(Profile::Custom),
            _ => Err(Error::UnknownProfile(s.to_string())),
        }
    }
}

/// What a set is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Intent {
    /// Every (image, spec) pair is evaluated.
    TestGrid,
    /// Quasi-imperceptible corruptions, sampled on the sphere.
    Imperceptible,
    /// One entry drawn at random per shared group.
    Training,
}

impl fmt::Display for Intent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Intent::TestGrid => "test_grid",
            Intent::Imperceptible => "imperceptible",
            Intent::Training => "training",
        })
    }
}

impl FromStr for Intent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "test_grid" => Ok(Intent::TestGrid),
            "imperceptible" => Ok(Intent::Imperceptible),
            "training" => Ok(Intent::Training),
            _ => Err(Error::Invariant {
                field: "intent".into(),
                message: format!("unknown intent `{s}`"),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spacing {
    Log,
    Linear,
}

impl fmt::Display for Spacing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Spacing::Log => "log",
            Spacing::Linear => "linear",
        })
    }
}

impl FromStr for Spacing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "log" => Ok(Spacing::Log),
            "linear" => Ok(Spacing::Linear),
            _ => Err(Error::Invariant {
                field: "spacing".into(),
                message: format!("expected `log` or `linear`, got `{s}`"),
            }),
        }
    }
}

/// `count` strengths between `eps_min` and `eps_max`, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonGrid {
    eps_min: f64,
    eps_max: f64,
    count: usize,
    spacing: Spacing,
}

impl EpsilonGrid {
    pub fn new(eps_min: f64, eps_max: f64, count: usize, spacing: Spacing) -> Result<Self> {
        let invariant = |field: &str, message: String| Error::Invariant {
            field: field.into(),
            message,
        };
        if !(eps_min > 0.0 && eps_min.is_finite()) {
            return Err(invariant("eps_min", format!("must be positive, got {eps_min}")));
        }
        if !(eps_max > eps_min && eps_max.is_finite()) {
            return Err(invariant(
                "eps_max",
                format!("must exceed eps_min = {eps_min}, got {eps_max}"),
            ));
        }
        if count < 2 {
            return Err(invariant("n", format!("a grid needs at least 2 values, got {count}")));
        }
        Ok(Self {
            eps_min,
            eps_max,
            count,
            spacing,
        })
    }

    pub fn eps_min(&self) -> f64 {
        self.eps_min
    }

    pub fn eps_max(&self) -> f64 {
        self.eps_max
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn expand(&self) -> Vec<f64> {
        expand_grid(self)
    }
}

/// Expands a grid into its values; the endpoints are reproduced exactly.
pub fn expand_grid(grid: &EpsilonGrid) -> Vec<f64> {
    let (a, b, n) = (grid.eps_min, grid.eps_max, grid.count);
    let last = (n - 1) as f64;
    (0..n)
        .map(|i| {
            if i == 0 {
                a
            } else if i == n - 1 {
                b
            } else {
                let t = i as f64 / last;
                match grid.spacing {
                    Spacing::Log => a * (b / a).powf(t),
                    Spacing::Linear => a + (b - a) * t,
                }
            }
        })
        .collect()
}

/// Strength values of one group.
#[derive(Debug, Clone, PartialEq)]
pub enum Epsilons {
    Grid(EpsilonGrid),
    List(Vec<f64>),
}

impl Epsilons {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Epsilons::Grid(g) => g.expand(),
            Epsilons::List(v) => v.clone(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Epsilons::Grid(g) => g.count,
            Epsilons::List(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One line of a set definition.
#[derive(Debug, Clone, PartialEq)]
pub enum SpecGroup {
    /// Leaves the input unchanged; only meaningful in training mixtures.
    Identity,
    Norm {
        p: PNorm,
        epsilons: Epsilons,
        radial: RadialMode,
        clamp: bool,
    },
}

impl SpecGroup {
    pub fn norm(p: PNorm, epsilons: Epsilons, radial: RadialMode) -> Self {
        SpecGroup::Norm {
            p,
            epsilons,
            radial,
            clamp: true,
        }
    }

    pub fn specs(&self) -> Result<Vec<CorruptionSpec>> {
        match self {
            SpecGroup::Identity => Ok(Vec::new()),
            SpecGroup::Norm {
                p,
                epsilons,
                radial,
                clamp,
            } => epsilons
                .values()
                .into_iter()
                .map(|eps| {
                    CorruptionSpec::new(*p, eps)
                        .and_then(|s| s.with_radial(*radial))
                        .map(|s| s.with_clamp(*clamp))
                })
                .collect(),
        }
    }
}

/// A drawable element of a set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SetEntry {
    Identity,
    Corrupt(CorruptionSpec),
}

/// A named, ordered collection of corruption groups.
#[derive(Debug, Clone, PartialEq)]
pub struct CorruptionSet {
    pub name: String,
    pub profile: Profile,
    pub intent: Intent,
    pub groups: Vec<SpecGroup>,
}

impl CorruptionSet {
    pub fn new(
        name: impl Into<String>,
        profile: Profile,
        intent: Intent,
        groups: Vec<SpecGroup>,
    ) -> Result<Self> {
        let set = Self {
            name: name.into(),
            profile,
            intent,
            groups,
        };
        set.validate()?;
        Ok(set)
    }

    /// Every spec in group order, identity entries skipped.
    pub fn specs(&self) -> Vec<CorruptionSpec> {
        self.groups
            .iter()
            .flat_map(|g| g.specs().expect("validated set"))
            .collect()
    }

    /// Every drawable entry, identity entries included.
    pub fn entries(&self) -> Vec<SetEntry> {
        let mut out = Vec::new();
        for g in &self.groups {
            match g {
                SpecGroup::Identity => out.push(SetEntry::Identity),
                SpecGroup::Norm { .. } => out.extend(
                    g.specs()
                        .expect("validated set")
                        .into_iter()
                        .map(SetEntry::Corrupt),
                ),
            }
        }
        out
    }

    /// Specs keyed by the group's norm label with 1-based severity indices,
    /// the layout error tables use.
    pub fn labelled_specs(&self) -> Vec<(String, u32, CorruptionSpec)> {
        let mut out = Vec::new();
        for g in &self.groups {
            if let SpecGroup::Norm { p, .. } = g {
                for (i, spec) in g.specs().expect("validated set").into_iter().enumerate() {
                    out.push((p.label(), i as u32 + 1, spec));
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
        {
            return Err(Error::Invariant {
                field: "name".into(),
                message: format!("`{}` is not an identifier", self.name),
            });
        }
        if self.groups.is_empty() {
            return Err(Error::EmptySet(self.name.clone()));
        }
        for g in &self.groups {
            match g {
                SpecGroup::Identity if self.intent != Intent::Training => {
                    return Err(Error::Invariant {
                        field: "p".into(),
                        message: "identity entries are only allowed in training sets".into(),
                    })
                }
                SpecGroup::Identity => {}
                SpecGroup::Norm { epsilons, .. } => {
                    if epsilons.is_empty() {
                        return Err(Error::Invariant {
                            field: "eps".into(),
                            message: "group has no strength values".into(),
                        });
                    }
                    g.specs()?;
                }
            }
        }
        if self.profile.is_builtin() {
            match self.intent {
                Intent::TestGrid => {
                    let mut seen = Vec::new();
                    for g in &self.groups {
                        if let SpecGroup::Norm { p, epsilons, .. } = g {
                            if epsilons.len() != 10 {
                                return Err(Error::Invariant {
                                    field: "n".into(),
                                    message: format!(
                                        "test grids for {} carry 10 strengths per norm; {} has {}",
                                        self.profile,
                                        p.label(),
                                        epsilons.len()
                                    ),
                                });
                            }
                            if seen.contains(p) {
                                return Err(Error::Invariant {
                                    field: "p".into(),
                                    message: format!("norm {} appears twice", p.label()),
                                });
                            }
                            seen.push(*p);
                        }
                    }
                }
                Intent::Imperceptible => {
                    let n = self.specs().len();
                    if n != 6 {
                        return Err(Error::Invariant {
                            field: "eps".into(),
                            message: format!(
                                "imperceptible sets for {} carry 6 specs, found {n}",
                                self.profile
                            ),
                        });
                    }
                }
                Intent::Training => {}
            }
        }
        Ok(())
    }
}

/// Draws one entry uniformly over all (p, epsilon) entries of a training set.
pub fn draw_training_spec<R: Rng + ?Sized>(set: &CorruptionSet, rng: &mut R) -> Result<SetEntry> {
    if set.intent != Intent::Training {
        return Err(Error::Invariant {
            field: "intent".into(),
            message: format!("`{}` is a {} set, not a training set", set.name, set.intent),
        });
    }
    let entries = set.entries();
    if entries.is_empty() {
        return Err(Error::EmptySet(set.name.clone()));
    }
    let i = rng.random_range(0..entries.len() as u64) as usize;
    Ok(entries[i])
}

/// Sets with unique names.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Registry {
    sets: BTreeMap<String, CorruptionSet>,
}

impl Registry {
    pub fn insert(&mut self, set: CorruptionSet) -> Result<()> {
        if self.sets.contains_key(&set.name) {
            return Err(Error::DuplicateSet(set.name));
        }
        self.sets.insert(set.name.clone(), set);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&CorruptionSet> {
        self.sets.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &CorruptionSet> {
        self.sets.values()
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use crate::stats::chi_square_uniform;

    #[test]
    fn geometric_midpoint() {
        let g = EpsilonGrid::new(1.0, 100.0, 3, Spacing::Log).unwrap();
        let v = g.expand();
        assert_eq!(v[0], 1.0);
        assert!((v[1] - 10.0).abs() < 1e-12);
        assert_eq!(v[2], 100.0);
    }

    #[test]
    fn grid_rejects_nonpositive_min() {
        assert!(EpsilonGrid::new(0.0, 1.0, 3, Spacing::Log).is_err());
        assert!(EpsilonGrid::new(2.0, 1.0, 3, Spacing::Log).is_err());
        assert!(EpsilonGrid::new(1.0, 2.0, 1, Spacing::Linear).is_err());
    }

    #[test]
    fn log_grid_has_constant_ratio() {
        let g = EpsilonGrid::new(12.5, 200.0, 10, Spacing::Log).unwrap();
        let v = g.expand();
        assert_eq!(v.len(), 10);
        assert_eq!((v[0], v[9]), (12.5, 200.0));
        let ratio = (200.0f64 / 12.5).powf(1.0 / 9.0);
        for w in v.windows(2) {
            assert!((w[1] / w[0] - ratio).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_grid() {
        let g = EpsilonGrid::new(1.0, 2.0, 5, Spacing::Linear).unwrap();
        assert_eq!(g.expand(), vec![1.0, 1.25, 1.5, 1.75, 2.0]);
    }

    fn singleton() -> CorruptionSet {
        CorruptionSet::new(
            "one",
            Profile::Custom,
            Intent::Training,
            vec![SpecGroup::norm(
                PNorm::Finite(2.0),
                Epsilons::List(vec![0.5]),
                RadialMode::Ball,
            )],
        )
        .unwrap()
    }

    #[test]
    fn singleton_draw_is_certain() {
        let set = singleton();
        let mut rng = RngStream::new(1, 0).rng();
        for _ in 0..100 {
            let e = draw_training_spec(&set, &mut rng).unwrap();
            assert_eq!(e, SetEntry::Corrupt(set.specs()[0]));
        }
    }

    #[test]
    fn draws_require_training_intent() {
        let set = builtin_set("mCE_Lp", Profile::Cifar).unwrap();
        let mut rng = RngStream::new(1, 0).rng();
        assert!(draw_training_spec(&set, &mut rng).is_err());
    }

    #[test]
    fn c2_draws_are_uniform() {
        let set = builtin_set("C2", Profile::Cifar).unwrap();
        let entries = set.entries();
        assert_eq!(entries.len(), 30);
        let mut counts = vec![0u64; entries.len()];
        let mut rng = RngStream::new(2, 0).rng();
        let n = 100_000;
        for _ in 0..n {
            let e = draw_training_spec(&set, &mut rng).unwrap();
            let i = entries.iter().position(|x| *x == e).unwrap();
            counts[i] += 1;
        }
        for &c in &counts {
            assert!((c as f64 / n as f64 - 1.0 / 30.0).abs() < 0.01);
        }
        let (_, p) = chi_square_uniform(&counts);
        assert!(p > 0.01, "chi-square p = {p}");
    }

    #[test]
    fn c1_has_ninety_entries() {
        let set = builtin_set("C1", Profile::Cifar).unwrap();
        assert_eq!(set.entries().len(), 90);
    }

    #[test]
    fn registry_rejects_duplicates() {
        let mut reg = Registry::default();
        reg.insert(singleton()).unwrap();
        assert!(matches!(reg.insert(singleton()), Err(Error::DuplicateSet(n)) if n == "one"));
    }

    #[test]
    fn identity_only_in_training() {
        let err = CorruptionSet::new(
            "x",
            Profile::Custom,
            Intent::TestGrid,
            vec![SpecGroup::Identity],
        );
        assert!(err.is_err());
    }

    #[test]
    fn builtin_test_grids_need_ten_values() {
        let err = CorruptionSet::new(
            "short",
            Profile::Cifar,
            Intent::TestGrid,
            vec![SpecGroup::norm(
                PNorm::Finite(2.0),
                Epsilons::List(vec![0.5, 1.0]),
                RadialMode::Ball,
            )],
        );
        assert!(matches!(err, Err(Error::Invariant { field, .. }) if field == "n"));
    }
}
