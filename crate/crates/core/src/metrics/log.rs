//! Prediction logs and error-table files.
//!
//! Log: `corruption,severity,true,pred`, one prediction per row; rows
//! labelled `clean` (severity 0) give the clean error. Table:
//! `corruption,severity,n_total,n_wrong` or `corruption,severity,rate`.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rayon::prelude::*;

use super::profile::CLEAN_LABEL;
use super::{ErrorCell, ErrorTable};
use crate::error::{Error, Result};

const LOG_HEADER: [&str; 4] = ["corruption", "severity", "true", "pred"];
const COUNT_HEADER: [&str; 4] = ["corruption", "severity", "n_total", "n_wrong"];
const RATE_HEADER: [&str; 3] = ["corruption", "severity", "rate"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictionRecord {
    pub corruption: String,
    pub severity: u32,
    pub true_label: String,
    pub predicted: String,
}

/// Per-cell `(total, wrong)` counts; merging is associative and commutative.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LogCounts {
    cells: BTreeMap<(String, u32), (u64, u64)>,
}

impl LogCounts {
    pub fn add(&mut self, record: &PredictionRecord) {
        let e = self
            .cells
            .entry((record.corruption.clone(), record.severity))
            .or_insert((0, 0));
        e.0 += 1;
        if record.true_label != record.predicted {
            e.1 += 1;
        }
    }

    pub fn merge(mut self, other: LogCounts) -> LogCounts {
        for (k, (t, w)) in other.cells {
            let e = self.cells.entry(k).or_insert((0, 0));
            e.0 += t;
            e.1 += w;
        }
        self
    }

    pub fn get(&self, corruption: &str, severity: u32) -> Option<(u64, u64)> {
        self.cells.get(&(corruption.to_string(), severity)).copied()
    }

    pub fn into_table(self) -> Result<ErrorTable> {
        let mut table = ErrorTable::new();
        for ((label, severity), (total, wrong)) in self.cells {
            let cell = ErrorCell::from_counts(total, wrong)?;
            if label == CLEAN_LABEL {
                table.set_clean(cell);
            } else {
                table.insert(label, severity, cell)?;
            }
        }
        table.validate()?;
        Ok(table)
    }
}

fn format_err(line: u64, message: impl std::fmt::Display) -> Error {
    Error::Format(format!("line {line}: {message}"))
}

fn check_header(headers: &csv::StringRecord, expected: &[&str]) -> bool {
    headers.len() == expected.len() && headers.iter().zip(expected).all(|(h, e)| h.trim() == *e)
}

fn parse_severity(line: u64, label: &str, text: &str) -> Result<u32> {
    let s: u32 = text
        .trim()
        .parse()
        .map_err(|_| format_err(line, format!("severity `{text}` is not a nonnegative integer")))?;
    if (label == CLEAN_LABEL) != (s == 0) {
        return Err(format_err(
            line,
            "severity 0 is reserved for the `clean` row and vice versa",
        ));
    }
    Ok(s)
}

fn field<'a>(rec: &'a csv::StringRecord, i: usize, name: &str, line: u64) -> Result<&'a str> {
    match rec.get(i).map(str::trim) {
        Some(v) if !v.is_empty() => Ok(v),
        _ => Err(format_err(line, format!("empty `{name}` field"))),
    }
}

/// Reads a prediction log.
pub fn parse_prediction_log<R: Read>(reader: R) -> Result<Vec<PredictionRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Format(e.to_string()))?
        .clone();
    if !check_header(&headers, &LOG_HEADER) {
        return Err(Error::Format(format!(
            "unknown log fields `{}`; expected `{}`",
            headers.iter().collect::<Vec<_>>().join(","),
            LOG_HEADER.join(",")
        )));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Format(e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let corruption = field(&rec, 0, "corruption", line)?.to_string();
        let severity = parse_severity(line, &corruption, field(&rec, 1, "severity", line)?)?;
        out.push(PredictionRecord {
            severity,
            true_label: field(&rec, 2, "true", line)?.to_string(),
            predicted: field(&rec, 3, "pred", line)?.to_string(),
            corruption,
        });
    }
    Ok(out)
}

/// Counts a prediction log into an error table. Counting runs in parallel
/// chunks merged with [`LogCounts::merge`], so the result does not depend on
/// record order or thread count.
pub fn errors_from_log<R: Read>(reader: R) -> Result<ErrorTable> {
    let records = parse_prediction_log(reader)?;
    count_records(&records).into_table()
}

pub fn count_records(records: &[PredictionRecord]) -> LogCounts {
    records
        .par_chunks(4096)
        .map(|chunk| {
            let mut c = LogCounts::default();
            for r in chunk {
                c.add(r);
            }
            c
        })
        .reduce(LogCounts::default, LogCounts::merge)
}

/// Reads an error-table file in either the count or the rate layout.
pub fn parse_error_table<R: Read>(reader: R) -> Result<ErrorTable> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Format(e.to_string()))?
        .clone();
    let counts = if check_header(&headers, &COUNT_HEADER) {
        true
    } else if check_header(&headers, &RATE_HEADER) {
        false
    } else {
        return Err(Error::Format(format!(
            "unknown table fields `{}`; expected `{}` or `{}`",
            headers.iter().collect::<Vec<_>>().join(","),
            COUNT_HEADER.join(","),
            RATE_HEADER.join(",")
        )));
    };
    let mut table = ErrorTable::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Format(e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let label = field(&rec, 0, "corruption", line)?.to_string();
        let severity = parse_severity(line, &label, field(&rec, 1, "severity", line)?)?;
        let cell = if counts {
            let num = |i: usize, name: &str| -> Result<u64> {
                field(&rec, i, name, line)?
                    .parse()
                    .map_err(|_| format_err(line, format!("`{name}` is not a count")))
            };
            ErrorCell::from_counts(num(2, "n_total")?, num(3, "n_wrong")?)
        } else {
            let rate: f64 = field(&rec, 2, "rate", line)?
                .parse()
                .map_err(|_| format_err(line, "`rate` is not a number"))?;
            ErrorCell::from_rate(rate)
        }
        .map_err(|e| format_err(line, e))?;
        if label == CLEAN_LABEL {
            table.set_clean(cell);
        } else {
            table.insert(label, severity, cell).map_err(|e| format_err(line, e))?;
        }
    }
    table.validate()?;
    Ok(table)
}

/// Writes a table, using the count layout when every cell carries counts.
pub fn write_error_table<W: Write>(table: &ErrorTable, writer: W) -> Result<()> {
    let all_counts = table.cells().all(|(_, _, c)| c.counts().is_some())
        && table.clean().is_none_or(|c| c.counts().is_some());
    let mut w = csv::Writer::from_writer(writer);
    let wrap = |e: csv::Error| Error::Format(e.to_string());
    if all_counts {
        w.write_record(COUNT_HEADER).map_err(wrap)?;
    } else {
        w.write_record(RATE_HEADER).map_err(wrap)?;
    }
    let clean = table.clean().map(|c| (CLEAN_LABEL, 0u32, c));
    for (label, sev, cell) in clean.into_iter().chain(table.cells()) {
        let sev = sev.to_string();
        if all_counts {
            let (t, wr) = cell.counts().expect("count cell");
            w.write_record([label, &sev, &t.to_string(), &wr.to_string()])
                .map_err(wrap)?;
        } else {
            w.write_record([label, &sev, &cell.rate().to_string()])
                .map_err(wrap)?;
        }
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))?;
    Ok(())
}
