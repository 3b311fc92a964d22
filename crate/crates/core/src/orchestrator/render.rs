//! Comparison tables over persisted reports.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::downstream::RunReport;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
    Md,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "md" => Ok(ReportFormat::Md),
            _ => Err(Error::InvalidArgument(format!("unknown report format '{s}' (expected csv, json or md)"))),
        }
    }
}

fn collect(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()
        .map_err(|e| Error::io(dir, e))?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            collect(&p, out)?;
        } else if p
            .file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| n.starts_with("report-") && n.ends_with(".json"))
        {
            out.push(p);
        }
    }
    Ok(())
}

/// Every `report-*.json` under `dir`, recursively, ordered by sweep value
/// and then by condition.
pub fn load_reports(dir: &Path) -> Result<Vec<RunReport>> {
    if !dir.is_dir() {
        return Err(Error::io(dir, std::io::Error::new(std::io::ErrorKind::NotFound, "no such directory")));
    }
    let mut paths = Vec::new();
    collect(dir, &mut paths)?;
    let mut reports = Vec::with_capacity(paths.len());
    for p in &paths {
        let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
        let r: RunReport = serde_json::from_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", p.display())))?;
        r.validate().map_err(|e| Error::Schema(format!("{}: {e}", p.display())))?;
        reports.push(r);
    }
    if reports.is_empty() {
        return Err(Error::InvalidArgument(format!("no reports found under {}", dir.display())));
    }
    reports.sort_by_key(|r| (r.value, r.condition));
    Ok(reports)
}

#[derive(Serialize)]
struct Row<'a> {
    condition: &'a str,
    axis: Option<&'a str>,
    value: Option<usize>,
    seeds: usize,
    mean: f64,
    std: f64,
}

fn rows(reports: &[RunReport]) -> Vec<Row<'_>> {
    reports
        .iter()
        .map(|r| Row {
            condition: r.condition.as_str(),
            axis: r.axis.as_ref().map(|a| a.as_str()),
            value: r.value,
            seeds: r.seeds.len(),
            mean: r.mean,
            std: r.std,
        })
        .collect()
}

/// Render one row per report. Markdown shows accuracy as `mean ± std`.
pub fn render(reports: &[RunReport], format: ReportFormat) -> Result<String> {
    let rows = rows(reports);
    let swept = rows.iter().any(|r| r.axis.is_some());
    let mut out = String::new();
    match format {
        ReportFormat::Json => {
            out = serde_json::to_string_pretty(&rows)?;
            out.push('\n');
        }
        ReportFormat::Csv => {
            out.push_str("condition,axis,value,seeds,mean,std\n");
            for r in &rows {
                let value = r.value.map(|v| v.to_string()).unwrap_or_default();
                let _ = writeln!(
                    out,
                    "{},{},{},{},{:.6},{:.6}",
                    r.condition,
                    r.axis.unwrap_or(""),
                    value,
                    r.seeds,
                    r.mean,
                    r.std
                );
            }
        }
        ReportFormat::Md => {
            if swept {
                let axis = rows.iter().find_map(|r| r.axis).unwrap_or("value");
                let _ = writeln!(out, "| {axis} | condition | seeds | accuracy |");
                out.push_str("|---:|---|---:|---|\n");
            } else {
                out.push_str("| condition | seeds | accuracy |\n|---|---:|---|\n");
            }
            for r in &rows {
                let cell = format!("{:.4} ± {:.4}", r.mean, r.std);
                if swept {
                    let value = r.value.map(|v| v.to_string()).unwrap_or_default();
                    let _ = writeln!(out, "| {value} | {} | {} | {cell} |", r.condition, r.seeds);
                } else {
                    let _ = writeln!(out, "| {} | {} | {cell} |", r.condition, r.seeds);
                }
            }
        }
    }
    Ok(out)
}
