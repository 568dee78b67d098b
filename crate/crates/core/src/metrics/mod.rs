//! Corruption-error metrics computed from error tables.
//!
//! All means are taken over exact rationals: count-based cells contribute
//! `n_wrong / n_total`, rate-only cells contribute the exact binary value of
//! their `f64`. The result is rounded to `f64` once, at the end.

pub mod log;
pub mod profile;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
pub use log::{errors_from_log, parse_error_table, write_error_table, LogCounts, PredictionRecord};
use profile::{classify, LabelFamily, CLEAN_LABEL, LP_SEVERITIES, STANDARD_NOISE, STANDARD_SEVERITIES};

/// Error rate of one (corruption, severity) cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorCell {
    n_total: u64,
    n_wrong: u64,
    rate: f64,
}

impl ErrorCell {
    pub fn from_counts(n_total: u64, n_wrong: u64) -> Result<Self> {
        if n_total == 0 {
            return Err(Error::Invariant {
                field: "n_total".into(),
                message: "cell has no predictions".into(),
            });
        }
        if n_wrong > n_total {
            return Err(Error::Invariant {
                field: "n_wrong".into(),
                message: format!("{n_wrong} wrong out of {n_total}"),
            });
        }
        Ok(Self {
            n_total,
            n_wrong,
            rate: n_wrong as f64 / n_total as f64,
        })
    }

    /// A cell known only by its rate (`n_total = 0`).
    pub fn from_rate(rate: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rate) {
            return Err(Error::Invariant {
                field: "rate".into(),
                message: format!("{rate} lies outside [0, 1]"),
            });
        }
        Ok(Self {
            n_total: 0,
            n_wrong: 0,
            rate,
        })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn counts(&self) -> Option<(u64, u64)> {
        (self.n_total > 0).then_some((self.n_total, self.n_wrong))
    }

    pub fn exact_rate(&self) -> BigRational {
        match self.counts() {
            Some((total, wrong)) => BigRational::new(BigInt::from(wrong), BigInt::from(total)),
            None => BigRational::from_float(self.rate).expect("finite rate"),
        }
    }
}

/// Error rates indexed by corruption label and 1-based severity, plus the
/// clean error rate.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ErrorTable {
    clean: Option<ErrorCell>,
    entries: BTreeMap<(String, u32), ErrorCell>,
    noise_flags: BTreeMap<String, bool>,
}

impl ErrorTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn clean(&self) -> Option<ErrorCell> {
        self.clean
    }

    pub fn set_clean(&mut self, cell: ErrorCell) {
        self.clean = Some(cell);
    }

    /// Adds a cell. Labels of the standard noise corruptions are flagged as
    /// noise automatically; use [`ErrorTable::set_noise_flag`] to override.
    pub fn insert(&mut self, label: impl Into<String>, severity: u32, cell: ErrorCell) -> Result<()> {
        let label = label.into();
        if label == CLEAN_LABEL {
            self.clean = Some(cell);
            return Ok(());
        }
        if severity == 0 {
            return Err(Error::Invariant {
                field: "severity".into(),
                message: format!("severities start at 1 (`{label}`)"),
            });
        }
        if self.entries.contains_key(&(label.clone(), severity)) {
            return Err(Error::Invariant {
                field: "severity".into(),
                message: format!("duplicate cell ({label}, {severity})"),
            });
        }
        self.noise_flags
            .entry(label.clone())
            .or_insert_with(|| STANDARD_NOISE.contains(&label.as_str()));
        self.entries.insert((label, severity), cell);
        Ok(())
    }

    pub fn set_noise_flag(&mut self, label: &str, noise: bool) {
        self.noise_flags.insert(label.to_string(), noise);
    }

    pub fn is_noise(&self, label: &str) -> bool {
        self.noise_flags.get(label).copied().unwrap_or(false)
    }

    pub fn get(&self, label: &str, severity: u32) -> Option<ErrorCell> {
        self.entries.get(&(label.to_string(), severity)).copied()
    }

    /// Corruption labels in sorted order (the clean row excluded).
    pub fn labels(&self) -> Vec<String> {
        let set: BTreeSet<&String> = self.entries.keys().map(|(l, _)| l).collect();
        set.into_iter().cloned().collect()
    }

    pub fn cells(&self) -> impl Iterator<Item = (&str, u32, ErrorCell)> {
        self.entries.iter().map(|((l, s), c)| (l.as_str(), *s, *c))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The cells whose label satisfies `keep`, with the clean row and flags.
    pub fn subset(&self, keep: impl Fn(&str) -> bool) -> ErrorTable {
        ErrorTable {
            clean: self.clean,
            entries: self
                .entries
                .iter()
                .filter(|((l, _), _)| keep(l))
                .map(|(k, v)| (k.clone(), *v))
                .collect(),
            noise_flags: self
                .noise_flags
                .iter()
                .filter(|(l, _)| keep(l))
                .map(|(k, v)| (k.clone(), *v))
                .collect(),
        }
    }

    /// Checks that each label's severities form `1..=k`.
    pub fn validate(&self) -> Result<()> {
        for label in self.labels() {
            let sev: Vec<u32> = self
                .entries
                .keys()
                .filter(|(l, _)| *l == label)
                .map(|(_, s)| *s)
                .collect();
            for (i, s) in sev.iter().enumerate() {
                if *s != i as u32 + 1 {
                    return Err(Error::MissingCell {
                        corruption: label,
                        severity: i as u32 + 1,
                    });
                }
            }
        }
        Ok(())
    }
}

fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().expect("rational in range")
}

/// Exact mean over a full `labels x 1..=severities` block.
fn exact_block_mean(table: &ErrorTable, labels: &[String], severities: u32) -> Result<BigRational> {
    let mut sum = BigRational::zero();
    for label in labels {
        for s in 1..=severities {
            let cell = table.get(label, s).ok_or_else(|| Error::MissingCell {
                corruption: label.clone(),
                severity: s,
            })?;
            sum += cell.exact_rate();
        }
    }
    let count = labels.len() as u64 * u64::from(severities);
    Ok(sum / BigRational::from_integer(BigInt::from(count)))
}

fn check_shape(table: &ErrorTable, expected_corruptions: usize, expected_severities: u32) -> Result<Vec<String>> {
    let labels = table.labels();
    if labels.len() > expected_corruptions {
        return Err(Error::ExtraCorruption(labels[expected_corruptions].clone()));
    }
    if labels.len() < expected_corruptions {
        return Err(Error::Invariant {
            field: "corruption".into(),
            message: format!(
                "expected {expected_corruptions} corruptions, table has {}",
                labels.len()
            ),
        });
    }
    for ((label, s), _) in &table.entries {
        if *s > expected_severities {
            return Err(Error::Invariant {
                field: "severity".into(),
                message: format!("({label}, {s}) exceeds {expected_severities} severities"),
            });
        }
    }
    Ok(labels)
}

/// Unweighted mean of every cell rate of a `corruptions x severities` table.
pub fn mean_corruption_error(
    table: &ErrorTable,
    expected_corruptions: usize,
    expected_severities: u32,
) -> Result<f64> {
    let labels = check_shape(table, expected_corruptions, expected_severities)?;
    Ok(to_f64(&exact_block_mean(table, &labels, expected_severities)?))
}

/// Mean over the non-noise corruptions of a standard 19 x 5 table.
/// Exactly 4 labels must be flagged as noise.
pub fn mean_corruption_error_ex_noise(table: &ErrorTable) -> Result<f64> {
    mean_corruption_error_ex_noise_with(table, 19, STANDARD_SEVERITIES, Some(4))
}

/// Ex-noise mean for custom layouts; `expected_noise = None` accepts any
/// number of noise flags as long as at least one corruption remains.
pub fn mean_corruption_error_ex_noise_with(
    table: &ErrorTable,
    expected_corruptions: usize,
    expected_severities: u32,
    expected_noise: Option<usize>,
) -> Result<f64> {
    let labels = check_shape(table, expected_corruptions, expected_severities)?;
    let noise = labels.iter().filter(|l| table.is_noise(l)).count();
    if let Some(expected) = expected_noise {
        if noise != expected {
            return Err(Error::NoiseFlagCount {
                expected,
                actual: noise,
            });
        }
    }
    let kept: Vec<String> = labels.into_iter().filter(|l| !table.is_noise(l)).collect();
    if kept.is_empty() {
        return Err(Error::Invariant {
            field: "noise".into(),
            message: "every corruption is flagged as noise".into(),
        });
    }
    Ok(to_f64(&exact_block_mean(table, &kept, expected_severities)?))
}

/// Mean over the 9 norms x 10 strengths of the p-norm grid.
pub fn mean_corruption_error_lp(table: &ErrorTable) -> Result<f64> {
    mean_corruption_error(table, 9, LP_SEVERITIES)
}

/// Mean relative error increase over `n` imperceptible corruptions, in
/// percent: `100 * sum(E_i - E_clean) / (n * E_clean)`.
pub fn imperceptible_corruption_error(clean_error: f64, imperceptible_errors: &[f64]) -> Result<f64> {
    if clean_error == 0.0 {
        return Err(Error::ZeroCleanError);
    }
    if !(clean_error > 0.0 && clean_error <= 1.0) {
        return Err(Error::param("clean_error", format!("must lie in (0, 1], got {clean_error}")));
    }
    if imperceptible_errors.is_empty() {
        return Err(Error::param("imperceptible_errors", "at least one error rate is required"));
    }
    let n = imperceptible_errors.len() as f64;
    let increase: f64 = imperceptible_errors.iter().map(|e| e - clean_error).sum();
    Ok(100.0 * increase / (n * clean_error))
}

/// All metrics a table supports, plus per-corruption means.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    #[serde(rename = "E_clean")]
    pub clean_error: Option<f64>,
    #[serde(rename = "mCE")]
    pub mce: Option<f64>,
    #[serde(rename = "mCE_xN")]
    pub mce_xn: Option<f64>,
    #[serde(rename = "mCE_Lp")]
    pub mce_lp: Option<f64>,
    /// Signed percent.
    #[serde(rename = "iCE")]
    pub ice: Option<f64>,
    pub per_corruption: BTreeMap<String, f64>,
}

impl MetricReport {
    /// Computes every metric whose cells are present. Labels are routed by
    /// family: `clean`, `imp_*` (imperceptible, severity 1), `L<p>` (p-norm
    /// grid) and everything else (real-world benchmark). A family that is
    /// present must be complete.
    pub fn from_table(table: &ErrorTable) -> Result<Self> {
        table.validate()?;
        let real = table.subset(|l| classify(l) == LabelFamily::RealWorld);
        let lp = table.subset(|l| classify(l) == LabelFamily::PNorm);
        let imp = table.subset(|l| classify(l) == LabelFamily::Imperceptible);

        let (mce, mce_xn) = if real.is_empty() {
            (None, None)
        } else {
            (
                Some(mean_corruption_error(&real, 19, STANDARD_SEVERITIES)?),
                Some(mean_corruption_error_ex_noise(&real)?),
            )
        };
        let mce_lp = if lp.is_empty() {
            None
        } else {
            Some(mean_corruption_error_lp(&lp)?)
        };
        let clean_error = table.clean.map(|c| c.rate());
        let ice = if imp.is_empty() {
            None
        } else {
            let clean = clean_error.ok_or(Error::MissingCell {
                corruption: CLEAN_LABEL.into(),
                severity: 0,
            })?;
            let rates: Vec<f64> = imp.cells().map(|(_, _, c)| c.rate()).collect();
            Some(imperceptible_corruption_error(clean, &rates)?)
        };

        let mut per_corruption = BTreeMap::new();
        for label in table.labels() {
            let sev = table.cells().filter(|(l, _, _)| *l == label).count() as u32;
            let mean = exact_block_mean(table, std::slice::from_ref(&label), sev)?;
            per_corruption.insert(label, to_f64(&mean));
        }
        Ok(Self {
            clean_error,
            mce,
            mce_xn,
            mce_lp,
            ice,
            per_corruption,
        })
    }

    pub fn to_text(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.6}"));
        let mut out = String::new();
        writeln!(out, "E_clean  {}", fmt(self.clean_error)).unwrap();
        writeln!(out, "mCE      {}", fmt(self.mce)).unwrap();
        writeln!(out, "mCE_xN   {}", fmt(self.mce_xn)).unwrap();
        writeln!(out, "mCE_Lp   {}", fmt(self.mce_lp)).unwrap();
        match self.ice {
            Some(v) => writeln!(out, "iCE      {v:.4}%").unwrap(),
            None => writeln!(out, "iCE      n/a").unwrap(),
        }
        if !self.per_corruption.is_empty() {
            out.push_str("\nper_corruption\n");
            for (label, v) in &self.per_corruption {
                writeln!(out, "  {label:<20} {v:.6}").unwrap();
            }
        }
        out
    }
}
