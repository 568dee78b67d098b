use std::fmt::Write as _;
use std::fs::File;
use std::io::Write as _;
use std::path::Path;

use lpcorrupt_core::geometry::{
    concentration_check, log_volume, mc_volume_factor, overlap_curve, volume_factor_table, BallSpec,
};
use lpcorrupt_core::metrics::{errors_from_log, parse_error_table, MetricReport};
use lpcorrupt_core::pipeline::{
    corrupt_dataset, load_dataset, regenerate, save_dataset, verify_distance, write_atomic, write_parts,
    CorruptOptions, CorruptionManifest, Quantization, StorageFormat,
};
use lpcorrupt_core::sets::{builtin_registry, builtin_set, parse_registry, parse_set_file, serialize_set, SetEntry};
use lpcorrupt_core::{sample_noise, CorruptionSet, CorruptionSpec, Noise, PNorm, RngStream};

use crate::args::{
    Command, CorruptArgs, FormatArg, GeometryCommand, MetricsArgs, OutArgs, OverlapArgs, RegenerateArgs,
    SampleArgs, SetArgs, SetsCommand, VerifyArgs,
};
use crate::{Category, Failure};

type Result<T> = std::result::Result<T, Failure>;

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        category: Category::Io,
        message: format!("{}: {e}", path.display()),
    }
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure {
        category: Category::Validation,
        message: message.into(),
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| io_failure(path, e))
}

fn emit(out: &OutArgs, text: &str) -> Result<()> {
    match &out.out {
        Some(path) => Ok(write_atomic(path, text.as_bytes())?),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| io_failure(Path::new("<stdout>"), e))
        }
    }
}

fn announce_seed(seed: u64) {
    eprintln!("seed: {seed}");
}

fn storage(format: FormatArg) -> StorageFormat {
    match format {
        FormatArg::Archive => StorageFormat::Archive,
        FormatArg::Png => StorageFormat::Png,
    }
}

/// A set file when `set` names an existing file, a built-in set otherwise.
fn resolve_set(args: &SetArgs) -> Result<CorruptionSet> {
    let path = Path::new(&args.set);
    if path.is_file() {
        Ok(parse_set_file(&read_text(path)?)?)
    } else {
        Ok(builtin_set(&args.set, args.profile.into())?)
    }
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Sets(c) => sets(c),
        Command::Corrupt(a) => corrupt(a),
        Command::Regenerate(a) => regenerate_cmd(a),
        Command::Verify(a) => verify(a),
        Command::Metrics(a) => metrics(a),
        Command::Geometry(c) => geometry(c),
        Command::Sample(a) => sample(a),
    }
}

fn sets(command: SetsCommand) -> Result<()> {
    match command {
        SetsCommand::List { profile, out } => {
            let mut text = String::from("name,intent,specs\n");
            for set in builtin_registry(profile.into())?.iter() {
                writeln!(text, "{},{},{}", set.name, set.intent, set.entries().len()).unwrap();
            }
            emit(&out, &text)
        }
        SetsCommand::Expand { set, out } => {
            let set = resolve_set(&set)?;
            let mut text = String::new();
            for entry in set.entries() {
                match entry {
                    SetEntry::Identity => text.push_str("identity,0\n"),
                    SetEntry::Corrupt(s) => writeln!(text, "{},{}", s.p, s.epsilon).unwrap(),
                }
            }
            emit(&out, &text)
        }
        SetsCommand::Show { set, out } => emit(&out, &serialize_set(&resolve_set(&set)?)),
        SetsCommand::Validate { file } => {
            let registry = parse_registry(&read_text(&file)?)?;
            for set in registry.iter() {
                println!("ok {} ({} entries)", set.name, set.entries().len());
            }
            Ok(())
        }
    }
}

fn corrupt(a: CorruptArgs) -> Result<()> {
    let set = resolve_set(&a.set)?;
    let dataset = load_dataset(&a.input)?;
    announce_seed(a.seed);
    let format = storage(a.format);
    let options = CorruptOptions {
        share_group: a.share_group,
        clamp: a.no_clamp.then_some(false),
        quantization: format.quantization(),
    };
    let parts = corrupt_dataset(&dataset, &set, options, a.seed)?;
    write_parts(&a.output, &parts, format)?;
    eprintln!(
        "wrote {} output set(s) of {} image(s) to {}",
        parts.len(),
        dataset.len(),
        a.output.display()
    );
    Ok(())
}

fn regenerate_cmd(a: RegenerateArgs) -> Result<()> {
    let manifest = CorruptionManifest::parse(&read_text(&a.manifest)?)?;
    let dataset = load_dataset(&a.input)?;
    announce_seed(manifest.master_seed);
    let format = match (a.format, manifest.quantization) {
        (Some(f), _) => storage(f),
        (None, Quantization::U8) => StorageFormat::Png,
        (None, Quantization::None) => StorageFormat::Archive,
    };
    save_dataset(&a.output, &regenerate(&manifest, &dataset)?, format)?;
    Ok(())
}

fn verify(a: VerifyArgs) -> Result<()> {
    let manifest = CorruptionManifest::parse(&read_text(&a.manifest)?)?;
    let original = load_dataset(&a.original)?;
    let corrupted = load_dataset(&a.corrupted)?;
    let report = verify_distance(&original, &corrupted, &manifest)?;
    if a.json {
        let violations: Vec<_> = report
            .violations
            .iter()
            .map(|v| {
                serde_json::json!({
                    "image_id": v.image_id,
                    "distance": v.distance,
                    "bound": v.bound,
                })
            })
            .collect();
        let doc = serde_json::json!({ "checked": report.checked, "violations": violations });
        println!("{}", serde_json::to_string_pretty(&doc).expect("json"));
    } else {
        println!("checked {} violations {}", report.checked, report.violations.len());
        for v in &report.violations {
            println!("{},{},{}", v.image_id, v.distance, v.bound);
        }
    }
    if report.is_clean() {
        Ok(())
    } else {
        Err(invalid(format!("{} distance violation(s)", report.violations.len())))
    }
}

fn metrics(a: MetricsArgs) -> Result<()> {
    let table = match (&a.log, &a.table) {
        (Some(path), _) => errors_from_log(File::open(path).map_err(|e| io_failure(path, e))?)?,
        (None, Some(path)) => parse_error_table(File::open(path).map_err(|e| io_failure(path, e))?)?,
        (None, None) => unreachable!("clap requires one source"),
    };
    let report = MetricReport::from_table(&table)?;
    let text = if a.json {
        serde_json::to_string_pretty(&report).expect("json") + "\n"
    } else {
        report.to_text()
    };
    emit(&a.out, &text)
}

fn geometry(command: GeometryCommand) -> Result<()> {
    match command {
        GeometryCommand::VolumeFactor { d, hi, lo, out } => volume_rows(&[d], &[(hi, lo)], &out),
        GeometryCommand::VolumeTable { dims, pairs, out } => volume_rows(&dims, &pairs, &out),
        GeometryCommand::McVolume {
            d,
            hi,
            lo,
            samples,
            seed,
            out,
        } => {
            announce_seed(seed);
            let est = mc_volume_factor(d, hi, lo, samples, RngStream::new(seed, 0))?;
            let exact = lpcorrupt_core::geometry::volume_factor(d, hi, lo)?;
            let text = format!(
                "d,p_hi,p_lo,estimate,std_error,closed_form,n\n{d},{hi},{lo},{},{},{exact},{samples}\n",
                est.value, est.std_error
            );
            emit(&out, &text)
        }
        GeometryCommand::Overlap(a) => overlap(a),
        GeometryCommand::Concentration {
            p,
            eps,
            d,
            mode,
            samples,
            seed,
            out,
        } => {
            announce_seed(seed);
            let ball = BallSpec::new(p, eps, d)?;
            let c = concentration_check(&ball, mode, samples, RngStream::new(seed, 0))?;
            let mut text = String::from("statistic,value\n");
            writeln!(text, "n,{}", c.n_samples).unwrap();
            writeln!(text, "mean,{}", c.mean).unwrap();
            writeln!(text, "min,{}", c.min).unwrap();
            for (q, v) in &c.quantiles {
                writeln!(text, "q{q},{v}").unwrap();
            }
            writeln!(text, "max,{}", c.max).unwrap();
            emit(&out, &text)
        }
    }
}

fn volume_rows(dims: &[usize], pairs: &[(PNorm, PNorm)], out: &OutArgs) -> Result<()> {
    let mut text = String::from("d,p_hi,p_lo,log_factor,factor\n");
    for r in volume_factor_table(dims, pairs)? {
        writeln!(text, "{},{},{},{},{}", r.d, r.p_hi, r.p_lo, r.log_factor, r.factor).unwrap();
    }
    emit(out, &text)
}

fn log_spaced(a: f64, b: f64, n: usize) -> Result<Vec<f64>> {
    if !(a > 0.0 && b > a && n >= 2) {
        return Err(invalid(format!(
            "grid needs 0 < eps-min < eps-max and at least 2 points, got [{a}, {b}] with {n}"
        )));
    }
    Ok((0..n)
        .map(|i| match i {
            0 => a,
            i if i == n - 1 => b,
            i => a * (b / a).powf(i as f64 / (n - 1) as f64),
        })
        .collect())
}

/// Radius at which the `p` ball has the volume of the fixed ball.
fn equal_volume_radius(p: PNorm, fixed: &BallSpec) -> Result<f64> {
    let unit = log_volume(&BallSpec::new(p, 1.0, fixed.d)?)?;
    Ok((log_volume(fixed)? - unit) / fixed.d as f64).map(f64::exp)
}

fn overlap(a: OverlapArgs) -> Result<()> {
    let second = BallSpec::new(a.second, a.second_eps, a.d)?;
    let grid = match a.eps {
        Some(list) => list,
        None => {
            let (lo, hi) = if a.first == PNorm::Zero {
                (0.001, 1.0)
            } else {
                let r = equal_volume_radius(a.first, &second)?;
                (r / 10.0, r * 10.0)
            };
            log_spaced(a.eps_min.unwrap_or(lo), a.eps_max.unwrap_or(hi), a.n_eps)?
        }
    };
    announce_seed(a.seed);
    let curve = overlap_curve(a.first, &grid, &second, a.samples, RngStream::new(a.seed, 0))?;
    let mut text = String::from("epsilon,frac_first_in_second,frac_second_in_first,n\n");
    for (i, eps) in curve.epsilon_grid.iter().enumerate() {
        writeln!(
            text,
            "{eps},{},{},{}",
            curve.frac_first_in_second[i], curve.frac_second_in_first[i], curve.n_samples
        )
        .unwrap();
    }
    emit(&a.out, &text)
}

fn sample(a: SampleArgs) -> Result<()> {
    let spec = CorruptionSpec::new(a.p, a.eps)?.with_radial(a.mode)?;
    announce_seed(a.seed);
    let mut text = String::new();
    let mut docs = Vec::new();
    for j in 0..a.samples as u64 {
        let v = sample_noise(a.d, &spec, &mut RngStream::new(a.seed, j).rng())?;
        match &v.noise {
            Noise::Additive(x) => {
                if a.json {
                    docs.push(serde_json::json!({ "values": x }));
                } else {
                    let line: Vec<String> = x.iter().map(f64::to_string).collect();
                    writeln!(text, "{}", line.join(",")).unwrap();
                }
            }
            Noise::Replace { indices, values } => {
                if a.json {
                    docs.push(serde_json::json!({ "indices": indices, "values": values }));
                } else {
                    let line: Vec<String> = indices.iter().zip(values).map(|(i, v)| format!("{i}:{v}")).collect();
                    writeln!(text, "{}", line.join(",")).unwrap();
                }
            }
        }
    }
    if a.json {
        text = serde_json::to_string_pretty(&docs).expect("json") + "\n";
    }
    emit(&a.out, &text)
}
