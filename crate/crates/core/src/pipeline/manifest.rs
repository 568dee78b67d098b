//! Manifest text format.
//!
//! ```text
//! # lpcorrupt-manifest v1
//! # master_seed=42
//! # set=C1
//! # profile=CIFAR
//! # quantization=none
//! image_id,p,epsilon,mode,clamp,stream_index,shared_group_id
//! img0,2,0.25,ball,true,0,0
//! ```
//!
//! Identity entries are written with `p=identity`, `epsilon=0`, `mode=none`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::norm::PNorm;
use crate::sampler::{CorruptionSpec, RadialMode};
use crate::sets::{Profile, SetEntry};

pub const MANIFEST_VERSION: u32 = 1;
const MAGIC: &str = "# lpcorrupt-manifest";
const COLUMNS: [&str; 7] = [
    "image_id",
    "p",
    "epsilon",
    "mode",
    "clamp",
    "stream_index",
    "shared_group_id",
];

/// How the stored images were quantized after corruption.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Quantization {
    /// Raw 32-bit floats.
    #[default]
    None,
    /// 8-bit, round half to even.
    U8,
}

impl fmt::Display for Quantization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Quantization::None => "none",
            Quantization::U8 => "u8",
        })
    }
}

impl FromStr for Quantization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Quantization::None),
            "u8" => Ok(Quantization::U8),
            _ => Err(Error::Format(format!("unknown quantization `{s}`"))),
        }
    }
}

/// What was applied to one image.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRecord {
    pub image_id: String,
    pub entry: SetEntry,
    pub stream_index: u64,
    pub shared_group_id: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorruptionManifest {
    pub master_seed: u64,
    pub set_name: String,
    pub profile: Profile,
    pub quantization: Quantization,
    pub records: Vec<ManifestRecord>,
}

impl CorruptionManifest {
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{MAGIC} v{MANIFEST_VERSION}\n# master_seed={}\n# set={}\n# profile={}\n# quantization={}\n{}\n",
            self.master_seed,
            self.set_name,
            self.profile,
            self.quantization,
            COLUMNS.join(",")
        );
        for r in &self.records {
            let (p, eps, mode, clamp) = match r.entry {
                SetEntry::Identity => ("identity".to_string(), "0".to_string(), "none".to_string(), false),
                SetEntry::Corrupt(s) => (s.p.to_string(), s.epsilon.to_string(), s.radial.to_string(), s.clamp),
            };
            out.push_str(&format!(
                "{},{p},{eps},{mode},{clamp},{},{}\n",
                r.image_id, r.stream_index, r.shared_group_id
            ));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let version = match lines.next() {
            Some((_, l)) if l.starts_with(MAGIC) => l[MAGIC.len()..].trim().to_string(),
            _ => return Err(Error::Format("missing manifest header".into())),
        };
        if version != format!("v{MANIFEST_VERSION}") {
            return Err(Error::ManifestVersion(version));
        }
        let mut seed = None;
        let mut set_name = None;
        let mut profile = None;
        let mut quantization = Quantization::None;
        let mut records = Vec::new();
        let mut saw_columns = false;
        for (i, line) in lines {
            let n = i + 1;
            let bad = |m: String| Error::Format(format!("manifest line {n}: {m}"));
            if let Some(meta) = line.strip_prefix('#') {
                let (k, v) = meta
                    .trim()
                    .split_once('=')
                    .ok_or_else(|| bad(format!("malformed header `{line}`")))?;
                match k {
                    "master_seed" => {
                        seed = Some(v.parse::<u64>().map_err(|_| bad(format!("bad seed `{v}`")))?)
                    }
                    "set" => set_name = Some(v.to_string()),
                    "profile" => profile = Some(v.parse::<Profile>()?),
                    "quantization" => quantization = v.parse()?,
                    _ => return Err(bad(format!("unknown header `{k}`"))),
                }
                continue;
            }
            if !saw_columns {
                if line != COLUMNS.join(",") {
                    return Err(bad(format!("expected columns `{}`", COLUMNS.join(","))));
                }
                saw_columns = true;
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != COLUMNS.len() {
                return Err(bad(format!("expected {} fields, got {}", COLUMNS.len(), f.len())));
            }
            let entry = if f[1] == "identity" {
                SetEntry::Identity
            } else {
                let p: PNorm = f[1].parse()?;
                let eps: f64 = f[2].parse().map_err(|_| bad(format!("bad epsilon `{}`", f[2])))?;
                let radial: RadialMode = f[3].parse()?;
                let clamp: bool = f[4].parse().map_err(|_| bad(format!("bad clamp `{}`", f[4])))?;
                SetEntry::Corrupt(
                    CorruptionSpec::new(p, eps)?
                        .with_radial(radial)?
                        .with_clamp(clamp),
                )
            };
            let int = |s: &str, what: &str| {
                s.parse::<u64>()
                    .map_err(|_| bad(format!("bad {what} `{s}`")))
            };
            records.push(ManifestRecord {
                image_id: f[0].to_string(),
                entry,
                stream_index: int(f[5], "stream_index")?,
                shared_group_id: int(f[6], "shared_group_id")?,
            });
        }
        if !saw_columns {
            return Err(Error::Format("manifest has no column line".into()));
        }
        Ok(Self {
            master_seed: seed.ok_or_else(|| Error::Format("manifest lacks master_seed".into()))?,
            set_name: set_name.ok_or_else(|| Error::Format("manifest lacks set".into()))?,
            profile: profile.ok_or_else(|| Error::Format("manifest lacks profile".into()))?,
            quantization,
            records,
        })
    }
}
