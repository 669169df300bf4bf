//! Campaign artifact formats: versioned CSV files (runs, records, history)
//! and the JSON report. Every file starts with a `# tsfuzz-<name>-v<major>`
//! comment line; readers reject unknown majors.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::campaign::{CampaignOutput, CampaignReport, HistoryRow, RecordRow, RunRow};
use crate::error::{Error, Result};

pub const RUNS_SCHEMA: &str = "# tsfuzz-runs-v1";
pub const RECORDS_SCHEMA: &str = "# tsfuzz-records-v1";
pub const HISTORY_SCHEMA: &str = "# tsfuzz-history-v1";

pub const RUNS_FILE: &str = "runs.csv";
pub const RECORDS_FILE: &str = "records.csv";
pub const HISTORY_FILE: &str = "history.csv";
pub const REPORT_FILE: &str = "report.json";

fn write_csv<T: Serialize>(path: &Path, schema: &str, rows: &[T]) -> Result<()> {
    let mut file = BufWriter::new(File::create(path)?);
    writeln!(file, "{schema}")?;
    let mut writer = csv::Writer::from_writer(file);
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Check the `# tsfuzz-<name>-v<major>` line against the expected schema;
/// the minor/patch suffix may drift, the major may not.
fn check_schema(path: &Path, found: &str, expected: &str) -> Result<()> {
    if found.trim() != expected {
        return Err(Error::SchemaVersion {
            path: path.display().to_string(),
            found: found.trim().to_string(),
            expected: expected.to_string(),
        });
    }
    Ok(())
}

fn read_csv<T: DeserializeOwned>(path: &Path, schema: &str) -> Result<Vec<T>> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut first_line = String::new();
    reader.read_line(&mut first_line)?;
    check_schema(path, &first_line, schema)?;
    let mut csv_reader = csv::Reader::from_reader(reader);
    let mut rows = Vec::new();
    for row in csv_reader.deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}

pub fn write_runs_csv(path: &Path, rows: &[RunRow]) -> Result<()> {
    write_csv(path, RUNS_SCHEMA, rows)
}

pub fn read_runs_csv(path: &Path) -> Result<Vec<RunRow>> {
    read_csv(path, RUNS_SCHEMA)
}

pub fn write_records_csv(path: &Path, rows: &[RecordRow]) -> Result<()> {
    write_csv(path, RECORDS_SCHEMA, rows)
}

pub fn read_records_csv(path: &Path) -> Result<Vec<RecordRow>> {
    read_csv(path, RECORDS_SCHEMA)
}

pub fn write_history_csv(path: &Path, rows: &[HistoryRow]) -> Result<()> {
    write_csv(path, HISTORY_SCHEMA, rows)
}

pub fn read_history_csv(path: &Path) -> Result<Vec<HistoryRow>> {
    read_csv(path, HISTORY_SCHEMA)
}

pub fn write_report_json(path: &Path, report: &CampaignReport) -> Result<()> {
    let mut file = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut file, report)?;
    file.write_all(b"\n")?;
    file.flush()?;
    Ok(())
}

pub fn read_report_json(path: &Path) -> Result<CampaignReport> {
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    let report: CampaignReport = serde_json::from_str(&text)?;
    Ok(report)
}

/// Write the full artifact set into `dir` (created if missing).
pub fn write_campaign(dir: &Path, output: &CampaignOutput) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_runs_csv(&dir.join(RUNS_FILE), &output.runs)?;
    write_records_csv(&dir.join(RECORDS_FILE), &output.records)?;
    write_history_csv(&dir.join(HISTORY_FILE), &output.history)?;
    write_report_json(&dir.join(REPORT_FILE), &output.report)?;
    Ok(())
}

type SummaryGetter = Box<dyn Fn(&crate::campaign::MethodSummary) -> String>;

/// Render the cross-method summary as an aligned text table.
pub fn format_report_table(report: &CampaignReport) -> String {
    let mut out = String::new();
    let fmt_u64 = |v: u64| v.to_string();
    let fmt_f = |v: f64| format!("{v:.3}");
    let pull = |summary: &Option<crate::campaign::MethodSummary>,
                f: &dyn Fn(&crate::campaign::MethodSummary) -> String| {
        summary.as_ref().map_or("-".to_string(), f)
    };
    out.push_str(&format!(
        "{:<34} {:>16} {:>16}\n",
        "Metric", "AI-Fuzzing", "Traditional"
    ));
    let rows: Vec<(&str, SummaryGetter)> = vec![
        ("Total vulnerabilities", Box::new(move |s| fmt_u64(s.total_vulns))),
        (
            "Vulnerabilities per run",
            Box::new(move |s| {
                format!("{:.2} +- {:.2}", s.vulns_per_run_mean, s.vulns_per_run_sd)
            }),
        ),
        ("Critical failures", Box::new(move |s| fmt_u64(s.critical_total))),
        (
            "Critical failures per run",
            Box::new(move |s| {
                format!(
                    "{:.2} +- {:.2}",
                    s.critical_per_run_mean, s.critical_per_run_sd
                )
            }),
        ),
        (
            "Critical CI95",
            Box::new(move |s| {
                format!(
                    "[{:.2}, {:.2}]",
                    s.critical_per_run_ci95.0, s.critical_per_run_ci95.1
                )
            }),
        ),
        ("Average severity", Box::new(move |s| fmt_f(s.mean_severity))),
        (
            "Shannon diversity",
            Box::new(move |s| fmt_f(s.shannon_diversity)),
        ),
    ];
    for (label, getter) in rows {
        out.push_str(&format!(
            "{:<34} {:>16} {:>16}\n",
            label,
            pull(&report.ai, getter.as_ref()),
            pull(&report.traditional, getter.as_ref())
        ));
    }
    if let Some(cmp) = &report.comparison {
        let improvement = cmp
            .improvement_rate
            .map_or("n/a".to_string(), |r| format!("{:+.1}%", 100.0 * r));
        out.push_str(&format!("{:<34} {:>16}\n", "Improvement rate", improvement));
        out.push_str(&format!(
            "{:<34} {:>16}\n",
            "Welch t (vulns) p-value",
            format!("{:.5}", cmp.welch_vulns.p_value)
        ));
        out.push_str(&format!(
            "{:<34} {:>16}\n",
            "Mann-Whitney U (criticals) p",
            format!("{:.5}", cmp.mann_whitney_critical.p_value)
        ));
        out.push_str(&format!(
            "{:<34} {:>16}\n",
            "Cohen's d (vulns)",
            format!("{:.3}", cmp.cohens_d_vulns)
        ));
    }
    out
}
