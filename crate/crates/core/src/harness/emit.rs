//! Result files: the summary CSV, a text table and long-form plot data.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::run::{ResultRow, ScenarioResult};
use crate::error::Result;

pub const CSV_HEADER: [&str; 15] = [
    "scenario",
    "procedure",
    "sweep_param",
    "sweep_value",
    "trials",
    "pfa",
    "pfa_ci_lo",
    "pfa_ci_hi",
    "add",
    "add_ci_lo",
    "add_ci_hi",
    "fdr",
    "fdr_ci_lo",
    "fdr_ci_hi",
    "mean_stop",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    TableText,
    PlotData,
}

/// Summary rows as CSV with the fixed header, even when empty.
pub fn write_csv<W: std::io::Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct PlotRow<'a> {
    scenario: &'a str,
    procedure: &'a str,
    sweep_param: &'a str,
    sweep_value: f64,
    metric: &'static str,
    value: f64,
    ci_lo: f64,
    ci_hi: f64,
}

/// Long-form plot data: one line per (row, metric). Sampling-rate sweeps
/// also get the delay in seconds.
pub fn write_plot_data<W: std::io::Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        let mut metrics = vec![
            ("pfa", r.pfa, r.pfa_ci_lo, r.pfa_ci_hi),
            ("add", r.add, r.add_ci_lo, r.add_ci_hi),
        ];
        if let (Some(f), Some(lo), Some(hi)) = (r.fdr, r.fdr_ci_lo, r.fdr_ci_hi) {
            metrics.push(("fdr", f, lo, hi));
        }
        if r.sweep_param == "fs" && r.sweep_value > 0.0 {
            let f = r.sweep_value;
            metrics.push(("add_seconds", r.add / f, r.add_ci_lo / f, r.add_ci_hi / f));
        }
        metrics.push(("mean_stop", r.mean_stop, r.mean_stop, r.mean_stop));
        for (metric, value, ci_lo, ci_hi) in metrics {
            w.serialize(PlotRow {
                scenario: &r.scenario,
                procedure: &r.procedure,
                sweep_param: &r.sweep_param,
                sweep_value: r.sweep_value,
                metric,
                value,
                ci_lo,
                ci_hi,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One block per scenario: procedures down, sweep values across; each cell
/// shows PFA (or FDR in parallel mode) and ADD.
pub fn table_text(rows: &[ResultRow]) -> String {
    let mut scenarios: Vec<&str> = Vec::new();
    for r in rows {
        if !scenarios.contains(&r.scenario.as_str()) {
            scenarios.push(&r.scenario);
        }
    }
    let mut s = String::new();
    for (k, sc) in scenarios.iter().enumerate() {
        let block: Vec<&ResultRow> = rows.iter().filter(|r| r.scenario == *sc).collect();
        let mut procs: Vec<&str> = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        for r in &block {
            if !procs.contains(&r.procedure.as_str()) {
                procs.push(&r.procedure);
            }
            if !values.contains(&r.sweep_value) {
                values.push(r.sweep_value);
            }
        }
        let param = block[0].sweep_param.as_str();
        if k > 0 {
            s.push('\n');
        }
        let _ = writeln!(s, "[{sc}]");
        let _ = write!(s, "{:<22}", "procedure");
        for v in &values {
            let _ = write!(s, " | {:^28}", format!("{param}={v}"));
        }
        s.push('\n');
        for p in procs {
            let _ = write!(s, "{p:<22}");
            for v in &values {
                let cell = block
                    .iter()
                    .find(|r| r.procedure == p && r.sweep_value == *v)
                    .map(|r| match r.fdr {
                        Some(f) => format!("fdr {f:.3} add {:.2}", r.add),
                        None => format!("pfa {:.3} add {:.2}", r.pfa, r.add),
                    })
                    .unwrap_or_default();
                let _ = write!(s, " | {cell:^28}");
            }
            s.push('\n');
        }
    }
    s
}

/// Writes `results.csv`, `table.txt`, `plot-data.csv` and, when present,
/// `trials.csv` into `dir`. Returns the summary path.
pub fn emit_all(result: &ScenarioResult, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let summary = dir.join("results.csv");
    write_csv(&result.rows, fs::File::create(&summary)?)?;
    write_plot_data(&result.rows, fs::File::create(dir.join("plot-data.csv"))?)?;
    fs::write(dir.join("table.txt"), table_text(&result.rows))?;
    if !result.trials.is_empty() {
        let mut w = csv::Writer::from_path(dir.join("trials.csv"))?;
        for t in &result.trials {
            w.serialize(t)?;
        }
        w.flush()?;
    }
    Ok(summary)
}

/// Writes one format only.
pub fn emit(result: &ScenarioResult, format: Format, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    match format {
        Format::Csv => write_csv(&result.rows, fs::File::create(path)?),
        Format::PlotData => write_plot_data(&result.rows, fs::File::create(path)?),
        Format::TableText => Ok(fs::write(path, table_text(&result.rows))?),
    }
}
