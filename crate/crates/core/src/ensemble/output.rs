//! CSV tables with JSON sidecars, and `(x, y, yerr)` plot data.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;

use super::{IdsCurve, LocalizationReport, WegnerTable};

/// `{experiment}_L{l₁-l₂-…}_seed{seed}`.
pub fn file_stem(experiment: &str, half_widths: &[u32], seed: u64) -> String {
    let widths: Vec<String> = half_widths.iter().map(u32::to_string).collect();
    format!("{experiment}_L{}_seed{seed}", widths.join("-"))
}

/// Header plus one record per row; an empty table still gets its header,
/// taken from `R::default()`.
pub fn write_csv<R: Serialize + Default, W: Write>(mut out: W, rows: &[R]) -> Result<()> {
    if rows.is_empty() {
        let mut probe = csv::Writer::from_writer(Vec::new());
        probe.serialize(R::default())?;
        let bytes = probe.into_inner().map_err(|e| e.into_error())?;
        let header_end = bytes.iter().position(|&c| c == b'\n').map_or(bytes.len(), |i| i + 1);
        out.write_all(&bytes[..header_end])?;
        return Ok(());
    }
    let mut writer = csv::Writer::from_writer(out);
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct Sidecar<'a, C: Serialize, S: Serialize> {
    pub experiment: &'a str,
    pub code_version: &'a str,
    pub master_seed: u64,
    pub config: &'a C,
    pub summary: &'a S,
}

/// Writes `{stem}.csv` and `{stem}.json` into `dir`.
pub fn write_experiment<R: Serialize + Default, C: Serialize, S: Serialize>(
    dir: &Path,
    stem: &str,
    experiment: &str,
    master_seed: u64,
    config: &C,
    rows: &[R],
    summary: &S,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let csv_path = dir.join(format!("{stem}.csv"));
    write_csv(fs::File::create(&csv_path)?, rows)?;
    let json_path = dir.join(format!("{stem}.json"));
    let sidecar = Sidecar {
        experiment,
        code_version: env!("CARGO_PKG_VERSION"),
        master_seed,
        config,
        summary,
    };
    fs::write(&json_path, serde_json::to_vec_pretty(&sidecar)?)?;
    Ok(vec![csv_path, json_path])
}

/// One plotted point with its error bar.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PlotPoint {
    pub series: String,
    pub x: f64,
    pub y: f64,
    pub yerr: f64,
}

/// Mean count against `η`, one series per `(L, E)`.
pub fn wegner_plot(table: &WegnerTable) -> Vec<PlotPoint> {
    table
        .rows
        .iter()
        .map(|r| PlotPoint {
            series: format!("L={} E={}", r.half_width, r.energy),
            x: r.eta,
            y: r.mean_count,
            yerr: r.stderr,
        })
        .collect()
}

pub fn ids_plot(curve: &IdsCurve) -> Vec<PlotPoint> {
    curve
        .rows()
        .into_iter()
        .map(|r| PlotPoint {
            series: format!("L={}", r.half_width),
            x: r.energy,
            y: r.k_hat,
            yerr: r.stderr,
        })
        .collect()
}

/// Mean IPR against `L`.
pub fn localization_plot(report: &LocalizationReport) -> Vec<PlotPoint> {
    report
        .summaries
        .iter()
        .map(|s| PlotPoint {
            series: "mean_ipr".into(),
            x: f64::from(s.half_width),
            y: s.mean_ipr,
            yerr: s.stderr_ipr,
        })
        .collect()
}
