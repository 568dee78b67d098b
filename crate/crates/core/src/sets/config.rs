//! Line-oriented text format for corruption sets.
//!
//! ```text
//! # comment
//! set C2 profile=CIFAR intent=training
//! p=2 eps_min=0.25 eps_max=5 n=10 spacing=log mode=ball
//! p=inf eps=0.005,0.01,0.02 mode=ball clamp=false
//! p=identity
//! ```
//!
//! `mode` is `ball`, `sphere` or `exponent:<k>`; `clamp` defaults to `true`.
//! Reals are written in their shortest round-trip form, so
//! `parse(serialize(set)) == set` bit for bit.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{CorruptionSet, EpsilonGrid, Epsilons, Intent, Profile, Registry, Spacing, SpecGroup};
use crate::error::{Error, Result};
use crate::norm::PNorm;
use crate::sampler::RadialMode;

/// Parses a file holding exactly one set.
pub fn parse_set_file(text: &str) -> Result<CorruptionSet> {
    let mut sets = parse_sets(text)?;
    match sets.len() {
        1 => Ok(sets.remove(0)),
        n => Err(Error::Syntax {
            line: 1,
            message: format!("expected exactly one `set` block, found {n}"),
        }),
    }
}

/// Parses a file holding any number of sets with unique names.
pub fn parse_registry(text: &str) -> Result<Registry> {
    let mut reg = Registry::default();
    for set in parse_sets(text)? {
        reg.insert(set)?;
    }
    Ok(reg)
}

struct Pending {
    line: usize,
    name: String,
    profile: Profile,
    intent: Intent,
    groups: Vec<SpecGroup>,
}

impl Pending {
    fn finish(self) -> Result<CorruptionSet> {
        let line = self.line;
        CorruptionSet::new(self.name, self.profile, self.intent, self.groups).map_err(|e| match e {
            Error::Invariant { field, message } => Error::Invariant {
                field,
                message: format!("set starting on line {line}: {message}"),
            },
            other => other,
        })
    }
}

fn parse_sets(text: &str) -> Result<Vec<CorruptionSet>> {
    let mut out = Vec::new();
    let mut current: Option<Pending> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let first = tokens.next().expect("nonempty line");
        if first == "set" {
            if let Some(done) = current.take() {
                out.push(done.finish()?);
            }
            let name = tokens.next().ok_or_else(|| Error::Syntax {
                line,
                message: "`set` needs a name".into(),
            })?;
            let fields = key_values(line, tokens)?;
            let profile = required(line, &fields, "profile")?.parse::<Profile>()?;
            let intent = required(line, &fields, "intent")?
                .parse::<Intent>()
                .map_err(|e| at_line(line, e))?;
            reject_unknown(line, &fields, &["profile", "intent"])?;
            current = Some(Pending {
                line,
                name: name.to_string(),
                profile,
                intent,
                groups: Vec::new(),
            });
        } else {
            let pending = current.as_mut().ok_or_else(|| Error::Syntax {
                line,
                message: "group line before any `set` header".into(),
            })?;
            let fields = key_values(line, std::iter::once(first).chain(tokens))?;
            pending.groups.push(parse_group(line, &fields)?);
        }
    }
    if let Some(done) = current.take() {
        out.push(done.finish()?);
    }
    if out.is_empty() {
        return Err(Error::Syntax {
            line: 1,
            message: "no `set` header found".into(),
        });
    }
    Ok(out)
}

fn key_values<'a>(
    line: usize,
    tokens: impl Iterator<Item = &'a str>,
) -> Result<BTreeMap<&'a str, &'a str>> {
    let mut map = BTreeMap::new();
    for tok in tokens {
        let (k, v) = tok.split_once('=').ok_or_else(|| Error::Syntax {
            line,
            message: format!("expected key=value, got `{tok}`"),
        })?;
        if map.insert(k, v).is_some() {
            return Err(Error::Syntax {
                line,
                message: format!("field `{k}` given twice"),
            });
        }
    }
    Ok(map)
}

fn required<'a>(line: usize, fields: &BTreeMap<&str, &'a str>, key: &str) -> Result<&'a str> {
    fields.get(key).copied().ok_or_else(|| Error::Syntax {
        line,
        message: format!("missing field `{key}`"),
    })
}

fn reject_unknown(line: usize, fields: &BTreeMap<&str, &str>, allowed: &[&str]) -> Result<()> {
    match fields.keys().find(|k| !allowed.contains(k)) {
        Some(k) => Err(Error::Syntax {
            line,
            message: format!("unknown field `{k}`"),
        }),
        None => Ok(()),
    }
}

fn at_line(line: usize, e: Error) -> Error {
    match e {
        Error::Invariant { field, message } => Error::Invariant {
            field,
            message: format!("line {line}: {message}"),
        },
        Error::InvalidParameter { name, reason } => Error::Invariant {
            field: name.to_string(),
            message: format!("line {line}: {reason}"),
        },
        other => other,
    }
}

fn real(line: usize, field: &str, s: &str) -> Result<f64> {
    s.parse::<f64>().map_err(|_| Error::Syntax {
        line,
        message: format!("field `{field}`: `{s}` is not a number"),
    })
}

fn parse_group(line: usize, fields: &BTreeMap<&str, &str>) -> Result<SpecGroup> {
    let p_text = required(line, fields, "p")?;
    if p_text == "identity" {
        reject_unknown(line, fields, &["p"])?;
        return Ok(SpecGroup::Identity);
    }
    let p: PNorm = p_text.parse().map_err(|e| at_line(line, e))?;
    let epsilons = if let Some(list) = fields.get("eps") {
        reject_unknown(line, fields, &["p", "eps", "mode", "clamp"])?;
        let values = list
            .split(',')
            .map(|s| real(line, "eps", s))
            .collect::<Result<Vec<_>>>()?;
        Epsilons::List(values)
    } else {
        reject_unknown(
            line,
            fields,
            &["p", "eps_min", "eps_max", "n", "spacing", "mode", "clamp"],
        )?;
        let eps_min = real(line, "eps_min", required(line, fields, "eps_min")?)?;
        let eps_max = real(line, "eps_max", required(line, fields, "eps_max")?)?;
        let n_text = required(line, fields, "n")?;
        let n: usize = n_text.parse().map_err(|_| Error::Syntax {
            line,
            message: format!("field `n`: `{n_text}` is not a count"),
        })?;
        let spacing: Spacing = required(line, fields, "spacing")?
            .parse()
            .map_err(|e| at_line(line, e))?;
        Epsilons::Grid(
            EpsilonGrid::new(eps_min, eps_max, n, spacing).map_err(|e| at_line(line, e))?,
        )
    };
    let radial = parse_mode(line, fields.get("mode").copied().unwrap_or("ball"))?;
    let clamp = match fields.get("clamp").copied().unwrap_or("true") {
        "true" => true,
        "false" => false,
        other => {
            return Err(Error::Syntax {
                line,
                message: format!("field `clamp`: expected true or false, got `{other}`"),
            })
        }
    };
    let group = SpecGroup::Norm {
        p,
        epsilons,
        radial,
        clamp,
    };
    group.specs().map_err(|e| at_line(line, e))?;
    Ok(group)
}

fn parse_mode(line: usize, s: &str) -> Result<RadialMode> {
    s.parse().map_err(|e: Error| Error::Syntax {
        line,
        message: format!("field `mode`: {e}"),
    })
}

/// Writes a set in the text format.
pub fn serialize_set(set: &CorruptionSet) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "set {} profile={} intent={}",
        set.name, set.profile, set.intent
    )
    .unwrap();
    for g in &set.groups {
        match g {
            SpecGroup::Identity => out.push_str("p=identity\n"),
            SpecGroup::Norm {
                p,
                epsilons,
                radial,
                clamp,
            } => {
                write!(out, "p={p} ").unwrap();
                match epsilons {
                    Epsilons::Grid(g) => write!(
                        out,
                        "eps_min={} eps_max={} n={} spacing={}",
                        g.eps_min(),
                        g.eps_max(),
                        g.count(),
                        g.spacing()
                    )
                    .unwrap(),
                    Epsilons::List(v) => {
                        let joined: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                        write!(out, "eps={}", joined.join(",")).unwrap();
                    }
                }
                write!(out, " mode={}", radial).unwrap();
                if !clamp {
                    out.push_str(" clamp=false");
                }
                out.push('\n');
            }
        }
    }
    out
}
