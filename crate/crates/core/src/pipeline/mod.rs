//! Applying corruption sets to datasets reproducibly.
//!
//! Every noise draw comes from its own [`RngStream`] whose index is written
//! to the manifest, so a corrupted dataset can be regenerated bit-exactly and
//! parallel runs match serial ones.
//!
//! Stream layout for a set with `S` specs and `G` groups of `share_group`
//! consecutive images:
//! - test grids and imperceptible sets: spec `s`, group `g` uses index
//!   `s * G + g`;
//! - training sets: group `g` draws its spec from index `SPEC_STREAM_TAG | g`
//!   and its noise from index `g`.

mod archive;
mod manifest;
mod png;

use std::collections::{HashMap, HashSet};
use std::io::Write as _;
use std::path::Path;

use rayon::prelude::*;

pub use archive::{decode_archive, encode_archive, index_path, read_archive, write_archive};
pub use manifest::{CorruptionManifest, ManifestRecord, Quantization, MANIFEST_VERSION};
pub use png::{decode_png, dequantize_u8, encode_png, quantize_u8, quantized, read_png_dir, write_png_dir};

use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::metrics::profile::IMPERCEPTIBLE_PREFIX;
use crate::norm::{l0_count, lp_distance_slices, PNorm};
use crate::rng::RngStream;
use crate::sampler::{apply_noise, sample_noise, CorruptionSpec};
use crate::sets::{draw_training_spec, CorruptionSet, Intent, SetEntry};

/// High bit that separates spec-draw streams from noise streams.
pub const SPEC_STREAM_TAG: u64 = 1 << 63;

/// Default group size for training sets.
pub const TRAINING_SHARE_GROUP: usize = 8;

/// Relative slack of [`verify_distance`], absorbing floating-point rounding.
pub const DISTANCE_RTOL: f64 = 1e-9;

/// Named images of one common shape.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    ids: Vec<String>,
    images: Vec<ImageTensor>,
}

fn check_id(id: &str) -> Result<()> {
    if id.is_empty() || id.contains([',', '\n', '\r', '/', '\\']) || id.starts_with('#') {
        return Err(Error::Invariant {
            field: "image_id".into(),
            message: format!("`{id}` must be nonempty and free of `,`, `/`, `\\`, line breaks and a leading `#`"),
        });
    }
    Ok(())
}

impl Dataset {
    pub fn new(ids: Vec<String>, images: Vec<ImageTensor>) -> Result<Self> {
        if ids.len() != images.len() {
            return Err(Error::LengthMismatch {
                expected: ids.len(),
                actual: images.len(),
            });
        }
        let mut seen = HashSet::new();
        for id in &ids {
            check_id(id)?;
            if !seen.insert(id.as_str()) {
                return Err(Error::Invariant {
                    field: "image_id".into(),
                    message: format!("duplicate id `{id}`"),
                });
            }
        }
        if let Some(first) = images.first() {
            if let Some((i, img)) = images.iter().enumerate().find(|(_, m)| m.shape() != first.shape()) {
                return Err(Error::Invariant {
                    field: "shape".into(),
                    message: format!(
                        "image `{}` has shape {:?}, expected {:?}",
                        ids[i],
                        img.shape(),
                        first.shape()
                    ),
                });
            }
        }
        Ok(Self { ids, images })
    }

    /// Ids `"0"`, `"1"`, ... in order.
    pub fn numbered(images: Vec<ImageTensor>) -> Result<Self> {
        Self::new((0..images.len()).map(|i| i.to_string()).collect(), images)
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn images(&self) -> &[ImageTensor] {
        &self.images
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn shape(&self) -> Option<[usize; 3]> {
        self.images.first().map(ImageTensor::shape)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &ImageTensor)> {
        self.ids.iter().map(String::as_str).zip(&self.images)
    }
}

/// Options of [`corrupt_dataset`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CorruptOptions {
    /// Images per shared noise draw; defaults to 8 for training sets, else 1.
    pub share_group: Option<usize>,
    /// Overrides the per-spec clamp flag.
    pub clamp: Option<bool>,
    /// Storage the outputs are meant for, recorded in the manifest.
    pub quantization: Quantization,
}

/// Output for one `(p, epsilon)` of a test grid, or the whole output of a
/// training set.
#[derive(Debug, Clone, PartialEq)]
pub struct CorruptedPart {
    /// Error-table label and severity, absent for training sets.
    pub label: Option<(String, u32)>,
    pub spec: Option<CorruptionSpec>,
    pub dataset: Dataset,
    pub manifest: CorruptionManifest,
}

impl CorruptedPart {
    /// Subdirectory name, e.g. `L2_eps0.25`.
    pub fn subdir(&self) -> Option<String> {
        let (label, _) = self.label.as_ref()?;
        Some(format!("{label}_eps{}", self.spec?.epsilon))
    }
}

fn effective(entry: SetEntry, clamp: Option<bool>) -> SetEntry {
    match (entry, clamp) {
        (SetEntry::Corrupt(s), Some(c)) => SetEntry::Corrupt(s.with_clamp(c)),
        _ => entry,
    }
}

/// Applies one entry to a group of images with a single noise draw.
fn corrupt_group(images: &[ImageTensor], entry: SetEntry, stream: RngStream) -> Result<Vec<ImageTensor>> {
    match entry {
        SetEntry::Identity => Ok(images.to_vec()),
        SetEntry::Corrupt(spec) => {
            let dim = images.first().map_or(0, ImageTensor::len);
            let noise = sample_noise(dim, &spec, &mut stream.rng())?;
            images.iter().map(|img| apply_noise(img, &noise, spec.clamp)).collect()
        }
    }
}

/// Corrupts a dataset with every spec of a test grid or imperceptible set, or
/// with one random spec per group for a training set.
pub fn corrupt_dataset(
    dataset: &Dataset,
    set: &CorruptionSet,
    options: CorruptOptions,
    seed: u64,
) -> Result<Vec<CorruptedPart>> {
    if dataset.is_empty() {
        return Err(Error::Invariant {
            field: "dataset".into(),
            message: "no images".into(),
        });
    }
    for (id, img) in dataset.iter() {
        img.check_unit_range().map_err(|e| Error::Invariant {
            field: format!("image `{id}`"),
            message: e.to_string(),
        })?;
    }
    let k = options.share_group.unwrap_or(match set.intent {
        Intent::Training => TRAINING_SHARE_GROUP,
        _ => 1,
    });
    if k == 0 {
        return Err(Error::param("share_group", "must be at least 1"));
    }
    let n_groups = dataset.len().div_ceil(k);
    let groups: Vec<std::ops::Range<usize>> = (0..n_groups)
        .map(|g| g * k..((g + 1) * k).min(dataset.len()))
        .collect();
    let manifest = |records| CorruptionManifest {
        master_seed: seed,
        set_name: set.name.clone(),
        profile: set.profile,
        quantization: options.quantization,
        records,
    };
    let records_for = |range: &std::ops::Range<usize>, entry, stream_index, g: usize| {
        dataset.ids[range.clone()]
            .iter()
            .map(move |id| ManifestRecord {
                image_id: id.clone(),
                entry,
                stream_index,
                shared_group_id: g as u64,
            })
    };

    if set.intent == Intent::Training {
        let outputs: Vec<(SetEntry, Vec<ImageTensor>)> = groups
            .par_iter()
            .enumerate()
            .map(|(g, range)| {
                let g64 = g as u64;
                let drawn = draw_training_spec(set, &mut RngStream::new(seed, SPEC_STREAM_TAG | g64).rng())?;
                let entry = effective(drawn, options.clamp);
                let imgs = corrupt_group(&dataset.images[range.clone()], entry, RngStream::new(seed, g64))?;
                Ok((entry, imgs))
            })
            .collect::<Result<_>>()?;
        let mut records = Vec::with_capacity(dataset.len());
        let mut images = Vec::with_capacity(dataset.len());
        for (g, ((entry, imgs), range)) in outputs.into_iter().zip(&groups).enumerate() {
            records.extend(records_for(range, entry, g as u64, g));
            images.extend(imgs);
        }
        return Ok(vec![CorruptedPart {
            label: None,
            spec: None,
            dataset: Dataset::new(dataset.ids.clone(), images)?,
            manifest: manifest(records),
        }]);
    }

    let labelled = set.labelled_specs();
    let prefix = if set.intent == Intent::Imperceptible {
        IMPERCEPTIBLE_PREFIX
    } else {
        ""
    };
    let jobs: Vec<(usize, usize)> = (0..labelled.len())
        .flat_map(|s| (0..n_groups).map(move |g| (s, g)))
        .collect();
    let mut outputs = jobs
        .par_iter()
        .map(|&(s, g)| {
            let entry = effective(SetEntry::Corrupt(labelled[s].2), options.clamp);
            let idx = (s * n_groups + g) as u64;
            corrupt_group(&dataset.images[groups[g].clone()], entry, RngStream::new(seed, idx))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter();
    let mut parts = Vec::with_capacity(labelled.len());
    for (s, (label, severity, spec)) in labelled.into_iter().enumerate() {
        let entry = effective(SetEntry::Corrupt(spec), options.clamp);
        let mut records = Vec::with_capacity(dataset.len());
        let mut images = Vec::with_capacity(dataset.len());
        for (g, range) in groups.iter().enumerate() {
            records.extend(records_for(range, entry, (s * n_groups + g) as u64, g));
            images.extend(outputs.next().expect("one output per job"));
        }
        let SetEntry::Corrupt(spec) = entry else { unreachable!() };
        parts.push(CorruptedPart {
            label: Some((format!("{prefix}{label}"), severity)),
            spec: Some(spec),
            dataset: Dataset::new(dataset.ids.clone(), images)?,
            manifest: manifest(records),
        });
    }
    Ok(parts)
}

/// Rebuilds corrupted images from a manifest and the original dataset.
/// Consecutive records with equal stream and entry share one noise draw.
pub fn regenerate(manifest: &CorruptionManifest, dataset: &Dataset) -> Result<Dataset> {
    let by_id: HashMap<&str, &ImageTensor> = dataset.iter().collect();
    let mut runs: Vec<(SetEntry, u64, Vec<ImageTensor>)> = Vec::new();
    for r in &manifest.records {
        let img = by_id
            .get(r.image_id.as_str())
            .ok_or_else(|| Error::ManifestMismatch(format!("image `{}` is not in the dataset", r.image_id)))?;
        match runs.last_mut() {
            Some((entry, idx, imgs)) if *entry == r.entry && *idx == r.stream_index => imgs.push((*img).clone()),
            _ => runs.push((r.entry, r.stream_index, vec![(*img).clone()])),
        }
    }
    let images: Vec<Vec<ImageTensor>> = runs
        .par_iter()
        .map(|(entry, idx, imgs)| corrupt_group(imgs, *entry, RngStream::new(manifest.master_seed, *idx)))
        .collect::<Result<_>>()?;
    Dataset::new(
        manifest.records.iter().map(|r| r.image_id.clone()).collect(),
        images.into_iter().flatten().collect(),
    )
}

/// Largest distance allowed between an original and its corrupted image.
///
/// 8-bit storage moves each component by at most `1/510`, which adds at
/// most `d^(1/p) / 510` to a p-norm distance for `p >= 1` and turns the
/// bound into `(eps^p + d (1/510)^p)^(1/p)` for `p < 1`.
pub fn distance_bound(entry: SetEntry, dim: usize, quantization: Quantization) -> f64 {
    let (p, eps) = match entry {
        SetEntry::Identity => (PNorm::Infinity, 0.0),
        SetEntry::Corrupt(s) => (s.p, s.epsilon),
    };
    if p == PNorm::Zero {
        return l0_count(eps, dim) as f64;
    }
    let base = eps * (1.0 + DISTANCE_RTOL);
    if quantization == Quantization::None {
        return base;
    }
    let q = 1.0 / 510.0;
    let d = dim as f64;
    match p {
        PNorm::Infinity => base + q,
        PNorm::Finite(p) if p >= 1.0 => base + d.powf(1.0 / p) * q,
        PNorm::Finite(p) => (base.powf(p) + d * q.powf(p)).powf(1.0 / p) * (1.0 + DISTANCE_RTOL),
        PNorm::Zero => unreachable!(),
    }
}

/// One image whose corruption exceeds its recorded bound.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub image_id: String,
    pub entry: SetEntry,
    /// p-norm distance, or the number of changed components for `p = 0`.
    pub distance: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VerifyReport {
    pub checked: usize,
    pub violations: Vec<Violation>,
}

impl VerifyReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks every corrupted image against the `(p, epsilon)` its manifest
/// record names. For `p = 0` the count of changed components must not
/// exceed `round(epsilon * d)`; under 8-bit storage the original is
/// quantized first so untouched components compare equal.
pub fn verify_distance(
    original: &Dataset,
    corrupted: &Dataset,
    manifest: &CorruptionManifest,
) -> Result<VerifyReport> {
    if corrupted.len() != manifest.records.len() {
        return Err(Error::ManifestMismatch(format!(
            "{} corrupted images for {} records",
            corrupted.len(),
            manifest.records.len()
        )));
    }
    let by_id: HashMap<&str, &ImageTensor> = original.iter().collect();
    let mut report = VerifyReport::default();
    for (record, (id, img)) in manifest.records.iter().zip(corrupted.iter()) {
        if record.image_id != id {
            return Err(Error::ManifestMismatch(format!(
                "record `{}` is aligned with corrupted image `{id}`",
                record.image_id
            )));
        }
        let orig = by_id
            .get(id)
            .ok_or_else(|| Error::ManifestMismatch(format!("image `{id}` is not in the original dataset")))?;
        let bound = distance_bound(record.entry, img.len(), manifest.quantization);
        let distance = match record.entry {
            SetEntry::Corrupt(s) if s.p == PNorm::Zero => {
                let reference = match manifest.quantization {
                    Quantization::None => (*orig).clone(),
                    Quantization::U8 => quantized(orig),
                };
                if reference.shape() != img.shape() {
                    return Err(Error::LengthMismatch {
                        expected: reference.len(),
                        actual: img.len(),
                    });
                }
                reference.data().iter().zip(img.data()).filter(|(a, b)| a != b).count() as f64
            }
            SetEntry::Corrupt(s) => lp_distance_slices(orig.data(), img.data(), s.p)?,
            SetEntry::Identity => lp_distance_slices(orig.data(), img.data(), PNorm::Infinity)?,
        };
        report.checked += 1;
        if distance > bound {
            report.violations.push(Violation {
                image_id: id.to_string(),
                entry: record.entry,
                distance,
                bound,
            });
        }
    }
    Ok(report)
}

/// Writes `bytes` to a temporary file next to `path` and renames it into
/// place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// On-disk layout of a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StorageFormat {
    /// `LPT1` archive plus `.idx` index.
    Archive,
    /// Directory of 8-bit PNG files.
    Png,
}

impl StorageFormat {
    pub fn quantization(self) -> Quantization {
        match self {
            StorageFormat::Archive => Quantization::None,
            StorageFormat::Png => Quantization::U8,
        }
    }
}

/// Reads a PNG directory or an archive, depending on what `path` is.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    if path.is_dir() {
        read_png_dir(path)
    } else {
        read_archive(path)
    }
}

pub fn save_dataset(path: &Path, dataset: &Dataset, format: StorageFormat) -> Result<()> {
    match format {
        StorageFormat::Archive => write_archive(path, dataset),
        StorageFormat::Png => write_png_dir(path, dataset),
    }
}

/// File name of the images inside an output directory.
pub fn images_name(format: StorageFormat) -> &'static str {
    match format {
        StorageFormat::Archive => "images.lpt",
        StorageFormat::Png => "images",
    }
}

pub const MANIFEST_NAME: &str = "manifest.csv";

/// Writes each part to `out_dir` (or its subdirectory) as images plus
/// `manifest.csv`.
pub fn write_parts(out_dir: &Path, parts: &[CorruptedPart], format: StorageFormat) -> Result<()> {
    for part in parts {
        let dir = match part.subdir() {
            Some(s) => out_dir.join(s),
            None => out_dir.to_path_buf(),
        };
        save_dataset(&dir.join(images_name(format)), &part.dataset, format)?;
        let mut manifest = part.manifest.clone();
        manifest.quantization = format.quantization();
        write_atomic(&dir.join(MANIFEST_NAME), manifest.to_text().as_bytes())?;
    }
    Ok(())
}
