//! Command-line grammar.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lpcorrupt_core::{PNorm, Profile, RadialMode};

/// Seed used when `--seed` and `LPCORRUPT_SEED` are both absent.
pub const DEFAULT_SEED: u64 = 20_220_101;

#[derive(Debug, Parser)]
#[command(
    name = "lpcorrupt",
    version,
    about = "Random p-norm corruptions: sets, datasets, metrics and ball geometry",
    after_help = "Every flag can also be set through an environment variable named LPCORRUPT_<FLAG>, \
                  e.g. LPCORRUPT_SEED or LPCORRUPT_SHARE_GROUP. Flags take precedence.\n\
                  Exit status: 0 success, 2 usage error, 3 I/O error, 4 validation failure."
)]
pub struct Cli {
    /// Worker threads; output does not depend on this
    #[arg(long, global = true, env = "LPCORRUPT_THREADS", value_name = "N")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List, expand, show and validate corruption sets
    #[command(subcommand)]
    Sets(SetsCommand),
    /// Corrupt a dataset with a corruption set
    Corrupt(CorruptArgs),
    /// Rebuild corrupted images from a manifest and the original dataset
    Regenerate(RegenerateArgs),
    /// Check corrupted images against the bounds in their manifest
    Verify(VerifyArgs),
    /// Compute corruption-error metrics from a prediction log or error table
    Metrics(MetricsArgs),
    /// Volumes, volume factors and overlaps of p-norm balls
    #[command(subcommand)]
    Geometry(GeometryCommand),
    /// Print raw noise vectors
    Sample(SampleArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProfileArg {
    Cifar,
    Tin,
}

impl From<ProfileArg> for Profile {
    fn from(p: ProfileArg) -> Self {
        match p {
            ProfileArg::Cifar => Profile::Cifar,
            ProfileArg::Tin => Profile::Tin,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SetArgs {
    /// Built-in set name or path to a set file
    #[arg(long = "set", visible_alias = "name", env = "LPCORRUPT_SET", value_name = "NAME|FILE")]
    pub set: String,

    /// Profile of built-in sets
    #[arg(long, value_enum, ignore_case = true, default_value = "cifar", env = "LPCORRUPT_PROFILE")]
    pub profile: ProfileArg,
}

#[derive(Debug, Clone, Args)]
pub struct OutArgs {
    /// Write to this file (atomically) instead of standard output
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum SetsCommand {
    /// List the built-in sets of a profile
    List {
        #[arg(long, value_enum, ignore_case = true, default_value = "cifar", env = "LPCORRUPT_PROFILE")]
        profile: ProfileArg,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Print one `p,epsilon` line per spec of a set
    Expand {
        #[command(flatten)]
        set: SetArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Print a set in the set-file format
    Show {
        #[command(flatten)]
        set: SetArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Validate a set file holding one or more sets
    Validate {
        /// Set file
        file: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    /// LPT1 raw tensor archive with an .idx index
    Archive,
    /// Directory of 8-bit PNG files
    Png,
}

#[derive(Debug, Args)]
pub struct CorruptArgs {
    /// Input dataset: an LPT1 archive or a directory of PNG files
    #[arg(long, env = "LPCORRUPT_INPUT", value_name = "PATH")]
    pub input: PathBuf,

    /// Output directory
    #[arg(long, env = "LPCORRUPT_OUTPUT", value_name = "DIR")]
    pub output: PathBuf,

    #[command(flatten)]
    pub set: SetArgs,

    /// Master seed
    #[arg(long, env = "LPCORRUPT_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,

    /// Images per shared noise draw [default: 8 for training sets, 1 otherwise]
    #[arg(long, env = "LPCORRUPT_SHARE_GROUP", value_name = "K")]
    pub share_group: Option<usize>,

    /// Do not clip corrupted pixels to [0, 1]
    #[arg(long, env = "LPCORRUPT_NO_CLAMP")]
    pub no_clamp: bool,

    /// Output storage
    #[arg(long, value_enum, default_value = "archive", env = "LPCORRUPT_FORMAT")]
    pub format: FormatArg,
}

#[derive(Debug, Args)]
pub struct RegenerateArgs {
    /// Manifest written by `corrupt`
    #[arg(long, env = "LPCORRUPT_MANIFEST", value_name = "FILE")]
    pub manifest: PathBuf,

    /// Original dataset
    #[arg(long, env = "LPCORRUPT_INPUT", value_name = "PATH")]
    pub input: PathBuf,

    /// Output archive file or PNG directory
    #[arg(long, env = "LPCORRUPT_OUTPUT", value_name = "PATH")]
    pub output: PathBuf,

    /// Output storage [default: png for 8-bit manifests, archive otherwise]
    #[arg(long, value_enum, env = "LPCORRUPT_FORMAT")]
    pub format: Option<FormatArg>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Manifest of the corrupted dataset
    #[arg(long, env = "LPCORRUPT_MANIFEST", value_name = "FILE")]
    pub manifest: PathBuf,

    /// Original dataset
    #[arg(long, value_name = "PATH")]
    pub original: PathBuf,

    /// Corrupted dataset
    #[arg(long, value_name = "PATH")]
    pub corrupted: PathBuf,

    /// Emit JSON
    #[arg(long, env = "LPCORRUPT_JSON")]
    pub json: bool,
}

#[derive(Debug, Args)]
#[group(id = "source", required = true, multiple = false)]
pub struct MetricsArgs {
    /// Prediction log with columns corruption,severity,true,pred
    #[arg(long, group = "source", value_name = "FILE")]
    pub log: Option<PathBuf>,

    /// Error table with columns corruption,severity,n_total,n_wrong or corruption,severity,rate
    #[arg(long, group = "source", value_name = "FILE")]
    pub table: Option<PathBuf>,

    /// Emit JSON
    #[arg(long, env = "LPCORRUPT_JSON")]
    pub json: bool,

    #[command(flatten)]
    pub out: OutArgs,
}

fn parse_norm(s: &str) -> Result<PNorm, String> {
    s.parse::<PNorm>().map_err(|e| e.to_string())
}

fn parse_mode(s: &str) -> Result<RadialMode, String> {
    s.parse::<RadialMode>().map_err(|e| e.to_string())
}

fn parse_pair(s: &str) -> Result<(PNorm, PNorm), String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("expected <p_hi>:<p_lo>, got `{s}`"))?;
    Ok((parse_norm(a)?, parse_norm(b)?))
}

#[derive(Debug, Subcommand)]
pub enum GeometryCommand {
    /// Closed-form volume factor V_hi / V_lo at equal radius
    VolumeFactor {
        /// Dimension
        #[arg(long)]
        d: usize,
        /// Larger-volume norm
        #[arg(long, value_parser = parse_norm)]
        hi: PNorm,
        /// Smaller-volume norm
        #[arg(long, value_parser = parse_norm)]
        lo: PNorm,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Closed-form volume factors for several dimensions and norm pairs
    VolumeTable {
        /// Dimensions
        #[arg(long, value_delimiter = ',', default_value = "3,5,10,20")]
        dims: Vec<usize>,
        /// Norm pairs as <p_hi>:<p_lo>
        #[arg(long, value_delimiter = ',', value_parser = parse_pair, default_value = "inf:2,2:1")]
        pairs: Vec<(PNorm, PNorm)>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Monte Carlo estimate of a volume factor by rejection from the cube
    McVolume {
        /// Dimension
        #[arg(long)]
        d: usize,
        /// Larger-volume norm
        #[arg(long, value_parser = parse_norm)]
        hi: PNorm,
        /// Smaller-volume norm
        #[arg(long, value_parser = parse_norm)]
        lo: PNorm,
        /// Number of cube samples
        #[arg(long, env = "LPCORRUPT_SAMPLES", default_value_t = 1_000_000)]
        samples: usize,
        /// Master seed
        #[arg(long, env = "LPCORRUPT_SEED", default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Membership frequencies between a family of p-balls and a fixed ball
    Overlap(OverlapArgs),
    /// Distribution of ||v||_p / eps over draws
    Concentration {
        /// Norm
        #[arg(long, value_parser = parse_norm)]
        p: PNorm,
        /// Radius
        #[arg(long)]
        eps: f64,
        /// Dimension
        #[arg(long)]
        d: usize,
        /// Radial law: ball, sphere or exponent:<k>
        #[arg(long, value_parser = parse_mode, default_value = "ball")]
        mode: RadialMode,
        /// Number of draws
        #[arg(long, env = "LPCORRUPT_SAMPLES", default_value_t = 1000)]
        samples: usize,
        /// Master seed
        #[arg(long, env = "LPCORRUPT_SEED", default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Debug, Args)]
pub struct OverlapArgs {
    /// Norm of the varying ball family
    #[arg(long, value_parser = parse_norm)]
    pub first: PNorm,
    /// Explicit radii of the varying family
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["eps_min", "eps_max"])]
    pub eps: Option<Vec<f64>>,
    /// Smallest radius of a log-spaced grid [default: a tenth of the equal-volume radius; 0.001 for p = 0]
    #[arg(long)]
    pub eps_min: Option<f64>,
    /// Largest radius of a log-spaced grid [default: ten times the equal-volume radius; 1 for p = 0]
    #[arg(long)]
    pub eps_max: Option<f64>,
    /// Points of the log-spaced grid
    #[arg(long, default_value_t = 31)]
    pub n_eps: usize,
    /// Norm of the fixed ball
    #[arg(long, value_parser = parse_norm, default_value = "2")]
    pub second: PNorm,
    /// Radius of the fixed ball
    #[arg(long, default_value_t = 4.0)]
    pub second_eps: f64,
    /// Dimension
    #[arg(long, default_value_t = 3072)]
    pub d: usize,
    /// Draws per grid point and direction
    #[arg(long, env = "LPCORRUPT_SAMPLES", default_value_t = 1000)]
    pub samples: usize,
    /// Master seed
    #[arg(long, env = "LPCORRUPT_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Norm
    #[arg(long, value_parser = parse_norm)]
    pub p: PNorm,
    /// Radius, or the share of components for p = 0
    #[arg(long)]
    pub eps: f64,
    /// Dimension
    #[arg(long)]
    pub d: usize,
    /// Radial law: ball, sphere or exponent:<k>
    #[arg(long, value_parser = parse_mode, default_value = "ball")]
    pub mode: RadialMode,
    /// Number of vectors
    #[arg(long, env = "LPCORRUPT_SAMPLES", default_value_t = 1)]
    pub samples: usize,
    /// Master seed
    #[arg(long, env = "LPCORRUPT_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Emit JSON
    #[arg(long, env = "LPCORRUPT_JSON")]
    pub json: bool,
    #[command(flatten)]
    pub out: OutArgs,
}
