//! Writing run reports to disk.
//!
//! Data files hold only numbers derived from the configuration, so two runs
//! of the same file produce byte-identical output. Wall time and identity
//! results go to a separate report file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::Format;
use crate::error::{RunError, RunResult};
use crate::report::{IdentityCheck, Provenance, RunReport, Table};

fn write_error(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Write {
        path: path.to_path_buf(),
        source,
    }
}

fn cell(value: Option<f64>) -> String {
    value.map_or_else(String::new, |v| format!("{v:.16e}"))
}

fn write_csv(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<String>>) -> RunResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| RunError::Write {
        path: path.to_path_buf(),
        source: e.into(),
    })?;
    let io = |e: csv::Error| RunError::Write {
        path: path.to_path_buf(),
        source: e.into(),
    };
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(write_error(path))
}

fn write_table_csv(path: &Path, table: &Table) -> RunResult<()> {
    write_csv(
        path,
        &table.columns,
        table.rows.iter().map(|r| r.iter().map(|&v| cell(v)).collect()),
    )
}

/// Rows as JSON objects keyed by column name, `null` for missing values.
pub fn table_json(table: &Table) -> Value {
    Value::Array(
        table
            .rows
            .iter()
            .map(|row| {
                let object: Map<String, Value> = table
                    .columns
                    .iter()
                    .zip(row)
                    .map(|(c, v)| (c.clone(), v.map_or(Value::Null, Value::from)))
                    .collect();
                Value::Object(object)
            })
            .collect(),
    )
}

fn write_json(path: &Path, value: &impl Serialize) -> RunResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("plain data serializes");
    text.push('\n');
    fs::write(path, text).map_err(write_error(path))
}

#[derive(Serialize)]
struct ReportFile<'a> {
    scenario: &'a str,
    passed: bool,
    identities: &'a [IdentityCheck],
    metrics: &'a std::collections::BTreeMap<String, f64>,
    provenance: &'a Provenance,
}

/// Writes the diagnostics table in each requested format, the
/// measured-vs-reference plot table, any field dumps, and the identity
/// report. Returns the paths written.
pub fn emit_timeseries(report: &RunReport, directory: &Path, formats: &[Format]) -> RunResult<Vec<PathBuf>> {
    fs::create_dir_all(directory).map_err(write_error(directory))?;
    let name = &report.scenario;
    let mut written = Vec::new();
    for format in formats {
        let path = match format {
            Format::Csv => {
                let path = directory.join(format!("{name}.csv"));
                write_table_csv(&path, &report.table)?;
                path
            }
            Format::Json => {
                let path = directory.join(format!("{name}.json"));
                write_json(&path, &table_json(&report.table))?;
                path
            }
        };
        written.push(path);
    }

    let plot = directory.join(format!("{name}_plot.csv"));
    let header = ["t", "quantity", "measured", "reference"].map(String::from);
    write_csv(
        &plot,
        &header,
        report.plot.iter().map(|p| {
            vec![
                cell(Some(p.t)),
                p.quantity.to_string(),
                cell(Some(p.measured)),
                cell(p.reference),
            ]
        }),
    )?;
    written.push(plot);

    if !report.fields.is_empty() {
        let dir = directory.join("fields");
        fs::create_dir_all(&dir).map_err(write_error(&dir))?;
        for dump in &report.fields {
            let path = dir.join(format!("{name}_field_{:05}.csv", dump.snapshot));
            write_table_csv(&path, &dump.table)?;
            written.push(path);
        }
    }

    let path = directory.join(format!("{name}_report.json"));
    write_json(
        &path,
        &ReportFile {
            scenario: name,
            passed: report.passed(),
            identities: &report.identities,
            metrics: &report.metrics,
            provenance: &report.provenance,
        },
    )?;
    written.push(path);
    Ok(written)
}
