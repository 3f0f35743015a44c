//! Report rows and their serialized forms. The CSV column order is part of
//! the crate's contract; downstream analysis scripts key on it.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::config::ReportFormat;
use crate::histories::{conditional_rate, enumerate_ensemble};
use crate::policy::ChoicePolicy;
use crate::protocols::ProtocolSpec;

/// One simulation outcome. `rate` is the hit rate among conditioned trials;
/// `exact_rate` and `no_signaling_gap` are present only when the protocol
/// was small enough to enumerate exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub protocol: String,
    pub policy: String,
    pub beta: f64,
    pub trials: u64,
    pub hits: u64,
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub exact_rate: Option<f64>,
    pub no_signaling_gap: Option<f64>,
    pub seed: u64,
}

pub const CSV_HEADER: &str =
    "protocol,policy,beta,trials,hits,rate,ci_low,ci_high,exact_rate,no_signaling_gap,seed";

/// 12 significant digits, enough to reconstruct the f64 for comparison
/// while keeping rows stable across platforms.
fn fmt_float(x: f64) -> String {
    format!("{x:.11e}")
}

fn fmt_optional(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

pub fn write_csv(reports: &[TrialReport], out: impl Write) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer
        .write_record(CSV_HEADER.split(','))
        .map_err(csv_error)?;
    for r in reports {
        writer
            .write_record([
                r.protocol.as_str(),
                r.policy.as_str(),
                &fmt_float(r.beta),
                &r.trials.to_string(),
                &r.hits.to_string(),
                &fmt_float(r.rate),
                &fmt_float(r.ci_low),
                &fmt_float(r.ci_high),
                &fmt_optional(r.exact_rate),
                &fmt_optional(r.no_signaling_gap),
                &r.seed.to_string(),
            ])
            .map_err(csv_error)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_json(reports: &[TrialReport], mut out: impl Write) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, reports)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn render(reports: &[TrialReport], format: ReportFormat) -> Result<String> {
    let mut buffer = Vec::new();
    match format {
        ReportFormat::Csv => write_csv(reports, &mut buffer)?,
        ReportFormat::Json => write_json(reports, &mut buffer)?,
    }
    String::from_utf8(buffer)
        .map_err(|e| Error::NumericIntegrity(format!("report is not UTF-8: {e}")))
}

/// Reads rows previously produced by [`write_csv`]. Numeric fields come
/// back exactly as far as the 12 emitted significant digits carry them.
pub fn read_csv(input: impl std::io::Read) -> Result<Vec<TrialReport>> {
    let mut reader = csv::ReaderBuilder::new().from_reader(input);
    let headers = reader.headers().map_err(csv_parse_error)?.clone();
    let expected: Vec<&str> = CSV_HEADER.split(',').collect();
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::ConfigError(format!(
            "unexpected CSV header {headers:?}; expected {CSV_HEADER:?}"
        )));
    }
    let mut reports = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(csv_parse_error)?;
        let field = |i: usize| record.get(i).unwrap_or_default();
        let float = |i: usize| -> Result<f64> {
            field(i).parse().map_err(|e| {
                Error::ConfigError(format!("row {}, column {}: {e}", line + 2, expected[i]))
            })
        };
        let integer = |i: usize| -> Result<u64> {
            field(i).parse().map_err(|e| {
                Error::ConfigError(format!("row {}, column {}: {e}", line + 2, expected[i]))
            })
        };
        let optional = |i: usize| -> Result<Option<f64>> {
            if field(i).is_empty() { Ok(None) } else { float(i).map(Some) }
        };
        reports.push(TrialReport {
            protocol: field(0).to_string(),
            policy: field(1).to_string(),
            beta: float(2)?,
            trials: integer(3)?,
            hits: integer(4)?,
            rate: float(5)?,
            ci_low: float(6)?,
            ci_high: float(7)?,
            exact_rate: optional(8)?,
            no_signaling_gap: optional(9)?,
            seed: integer(10)?,
        });
    }
    Ok(reports)
}

/// One row of the exact ensemble table emitted by the `enumerate` command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleRow {
    /// Outcome path as `var=label` pairs joined with `;`.
    pub history: String,
    pub weight: f64,
    pub valence: f64,
    pub hit: bool,
    pub conditioned: bool,
}

pub const ENSEMBLE_CSV_HEADER: &str = "history,weight,valence,hit,conditioned";

/// Enumerates the protocol under the law and tabulates every history with
/// its weight, valence, and hit flags. The table ends with the summary
/// statistics the simulation path would target.
pub fn ensemble_rows(
    spec: &ProtocolSpec,
    policy: &ChoicePolicy,
) -> Result<(Vec<EnsembleRow>, f64)> {
    let ensemble = enumerate_ensemble(spec, policy)?;
    let rows = ensemble
        .histories()
        .iter()
        .map(|h| EnsembleRow {
            history: h
                .outcomes()
                .iter()
                .map(|(var, label)| format!("{var}={label}"))
                .collect::<Vec<_>>()
                .join(";"),
            weight: h.weight(),
            valence: spec.valence_of(h.outcomes()).value(),
            hit: h.matches(spec.hit()),
            conditioned: h.matches(spec.hit_condition()),
        })
        .collect();
    let exact = conditional_rate(&ensemble, spec.hit_condition(), spec.hit())?;
    Ok((rows, exact))
}

pub fn render_ensemble(rows: &[EnsembleRow], format: ReportFormat) -> Result<String> {
    let mut buffer = Vec::new();
    match format {
        ReportFormat::Csv => {
            let mut writer = csv::Writer::from_writer(&mut buffer);
            writer
                .write_record(ENSEMBLE_CSV_HEADER.split(','))
                .map_err(csv_error)?;
            for row in rows {
                writer
                    .write_record([
                        row.history.as_str(),
                        &fmt_float(row.weight),
                        &fmt_float(row.valence),
                        &row.hit.to_string(),
                        &row.conditioned.to_string(),
                    ])
                    .map_err(csv_error)?;
            }
            writer.flush()?;
            drop(writer);
        }
        ReportFormat::Json => {
            serde_json::to_writer_pretty(&mut buffer, rows)
                .map_err(|e| Error::Io(std::io::Error::other(e)))?;
            buffer.push(b'\n');
        }
    }
    String::from_utf8(buffer)
        .map_err(|e| Error::NumericIntegrity(format!("report is not UTF-8: {e}")))
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn csv_parse_error(e: csv::Error) -> Error {
    Error::ConfigError(format!("malformed report CSV: {e}"))
}
