//! Versioned file formats. Every file carries its format tag on line 1.
//!
//! * pool: JSON lines, a header `{"format":"lh3d-pool/1","class_names":[..]}`
//!   then one scene per line with an extra `labeled` flag;
//! * history: JSON lines, a header then one round record per line;
//! * report: CSV preceded by a `# lh3d-report/1` comment line;
//! * summary and round results: single JSON documents with a `format` key.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::scene::{PoolState, SceneRecord};
use crate::selector::{RoundRecord, RoundResult};
use crate::simulator::{ExperimentReport, ReportRow, StrategySummary};

pub const POOL_FORMAT: &str = "lh3d-pool/1";
pub const HISTORY_FORMAT: &str = "lh3d-history/1";
pub const REPORT_FORMAT: &str = "lh3d-report/1";
pub const SUMMARY_FORMAT: &str = "lh3d-summary/1";
pub const ROUND_FORMAT: &str = "lh3d-round/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoolHeader {
    format: String,
    class_names: Vec<String>,
}

fn check_format(found: &str, expected: &str, line: usize) -> Result<()> {
    if found != expected {
        return Err(Error::Parse {
            line,
            message: format!("expected format {expected:?}, found {found:?}"),
        });
    }
    Ok(())
}

fn parse_err(line: usize) -> impl Fn(serde_json::Error) -> Error {
    move |e| Error::Parse {
        line,
        message: e.to_string(),
    }
}

pub fn write_pool(mut w: impl Write, pool: &PoolState) -> Result<()> {
    let header = PoolHeader {
        format: POOL_FORMAT.into(),
        class_names: pool.class_names.clone(),
    };
    serde_json::to_writer(&mut w, &header)?;
    writeln!(w)?;
    for rec in &pool.records {
        let mut value = serde_json::to_value(rec)?;
        if let Value::Object(map) = &mut value {
            map.insert("labeled".into(), Value::Bool(pool.labeled.contains(&rec.scene_id)));
        }
        serde_json::to_writer(&mut w, &value)?;
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a pool file. Parse failures name the 1-based line. The result is
/// not validated; see [`crate::scene::validate_pool`].
pub fn read_pool(r: impl BufRead) -> Result<PoolState> {
    let mut lines = r.lines().enumerate();
    let (_, first) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "empty pool file".into(),
    })?;
    let header: PoolHeader = serde_json::from_str(&first?).map_err(parse_err(1))?;
    check_format(&header.format, POOL_FORMAT, 1)?;
    let mut records = Vec::new();
    let mut labeled = BTreeSet::new();
    for (i, line) in lines {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut map: Map<String, Value> = serde_json::from_str(&line).map_err(parse_err(line_no))?;
        let is_labeled = match map.remove("labeled") {
            None => false,
            Some(Value::Bool(b)) => b,
            Some(other) => {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("labeled must be a boolean, got {other}"),
                })
            }
        };
        let rec: SceneRecord = serde_json::from_value(Value::Object(map)).map_err(parse_err(line_no))?;
        if is_labeled {
            labeled.insert(rec.scene_id);
        }
        records.push(rec);
    }
    PoolState::new(records, labeled, header.class_names)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HistoryHeader {
    format: String,
    class_names: Vec<String>,
}

pub fn write_history<'a>(
    mut w: impl Write,
    class_names: &[String],
    records: impl IntoIterator<Item = &'a RoundRecord>,
) -> Result<()> {
    let header = HistoryHeader {
        format: HISTORY_FORMAT.into(),
        class_names: class_names.to_vec(),
    };
    serde_json::to_writer(&mut w, &header)?;
    writeln!(w)?;
    for rec in records {
        serde_json::to_writer(&mut w, rec)?;
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Returns the class names and round records of a history file.
pub fn read_history(r: impl BufRead) -> Result<(Vec<String>, Vec<RoundRecord>)> {
    let mut lines = r.lines().enumerate();
    let (_, first) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "empty history file".into(),
    })?;
    let header: HistoryHeader = serde_json::from_str(&first?).map_err(parse_err(1))?;
    check_format(&header.format, HISTORY_FORMAT, 1)?;
    let mut out = Vec::new();
    for (i, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(parse_err(i + 1))?);
    }
    Ok((header.class_names, out))
}

/// Report rows reconstructed from a history.
pub fn rows_from_history(records: &[RoundRecord]) -> Vec<ReportRow> {
    records
        .iter()
        .map(|rec| ReportRow {
            strategy: rec.result.strategy.clone(),
            round: rec.result.round,
            images: rec.metrics.images_labeled,
            objects_round: rec.metrics.objects_this_round,
            objects_consumed: rec.metrics.objects_consumed,
            budget_remaining: rec.metrics.budget_remaining,
            class_entropy: rec.metrics.class_entropy,
            mean_selected_h: rec.metrics.mean_selected_h,
            per_class_annotated: rec.metrics.per_class_annotated.clone(),
            exhausted: rec.result.exhausted,
        })
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_report(mut w: impl Write, class_names: &[String], rows: &[ReportRow]) -> Result<()> {
    writeln!(w, "# {REPORT_FORMAT}")?;
    let mut csv = csv::Writer::from_writer(&mut w);
    let mut header: Vec<String> = [
        "strategy",
        "round",
        "images",
        "objects_round",
        "objects_consumed",
        "budget_remaining",
        "class_entropy",
        "mean_selected_h",
        "exhausted",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend(class_names.iter().map(|c| format!("annotated_{c}")));
    csv.write_record(&header).map_err(csv_err)?;
    for row in rows {
        let mut fields = vec![
            row.strategy.clone(),
            row.round.to_string(),
            row.images.to_string(),
            row.objects_round.to_string(),
            row.objects_consumed.to_string(),
            row.budget_remaining.to_string(),
            opt(row.class_entropy),
            opt(row.mean_selected_h),
            row.exhausted.to_string(),
        ];
        fields.extend(row.per_class_annotated.iter().map(u64::to_string));
        csv.write_record(&fields).map_err(csv_err)?;
    }
    csv.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub format: String,
    pub class_names: Vec<String>,
    pub strategies: Vec<StrategySummary>,
}

impl Summary {
    pub fn from_report(report: &ExperimentReport) -> Self {
        Self {
            format: SUMMARY_FORMAT.into(),
            class_names: report.class_names.clone(),
            strategies: report.summaries(),
        }
    }
}

pub fn write_json<T: Serialize + ?Sized>(mut w: impl Write, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct TaggedRound<'a> {
    format: &'static str,
    #[serde(flatten)]
    result: &'a RoundResult,
}

pub fn write_round_result(w: impl Write, result: &RoundResult) -> Result<()> {
    write_json(
        w,
        &TaggedRound {
            format: ROUND_FORMAT,
            result,
        },
    )
}
