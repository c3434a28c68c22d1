//! Files written by the CLI: JSON-lines metrics, plot-ready CSV, raw trials, RDM grids.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::chain::Snapshot;
use crate::sweep::{Figure, SweepPoint, SweepResult};
use crate::HarnessError;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.display().to_string(), source }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> HarnessError + '_ {
    move |e| HarnessError::Io { path: path.display().to_string(), source: std::io::Error::other(e) }
}

/// One line of a figure CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FigureRow {
    pub x: f64,
    pub series: String,
    pub value: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
}

type Metric = (&'static str, fn(&SweepPoint) -> (Option<f64>, Option<(f64, f64)>));

fn metrics(figure: Figure) -> Vec<Metric> {
    let pd_real: Metric = ("pd_real", |p| (p.pd_real, p.pd_real_ci));
    let pd_art: Metric = ("pd_artificial", |p| (p.pd_artificial, p.pd_artificial_ci));
    match figure {
        Figure::PdVsCfo | Figure::PdVsJsr => vec![pd_real, pd_art],
        Figure::MdrDr => vec![("mdr_real", |p| (p.mdr_real, p.mdr_real_ci)), ("dr_artificial", |p| (p.dr_artificial, p.dr_artificial_ci))],
        Figure::Overcrowding => vec![
            ("mean_count", |p| (p.mean_detection_count, p.mean_detection_count_ci)),
            ("expected_count", |p| (p.expected_count, None)),
        ],
    }
}

pub fn figure_rows(result: &SweepResult) -> Vec<FigureRow> {
    let mut rows = Vec::new();
    for (name, get) in metrics(result.figure) {
        for p in &result.points {
            let (value, ci) = get(p);
            rows.push(FigureRow {
                x: p.x,
                series: format!("{name}/{}", p.series),
                value,
                ci_low: ci.map(|c| c.0),
                ci_high: ci.map(|c| c.1),
            });
        }
    }
    rows
}

fn write_csv<S: Serialize>(path: &Path, header: &[&str], rows: &[S]) -> Result<(), HarnessError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path).map_err(csv_err(path))?;
    w.write_record(header).map_err(csv_err(path))?;
    for r in rows {
        w.serialize(r).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// `metrics.jsonl`, `<figure>.csv` and, with `raw`, `trials.csv`. Returns the paths written.
pub fn export_results(result: &SweepResult, out_dir: &Path, raw: bool) -> Result<Vec<PathBuf>, HarnessError> {
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let metrics_path = out_dir.join("metrics.jsonl");
    let mut f = std::fs::File::create(&metrics_path).map_err(io_err(&metrics_path))?;
    for p in &result.points {
        let line = serde_json::json!({ "figure": result.figure.name(), "x_label": result.figure.x_label(), "point": p });
        writeln!(f, "{line}").map_err(io_err(&metrics_path))?;
    }
    let fig_path = out_dir.join(format!("{}.csv", result.figure.name()));
    write_csv(&fig_path, &["x", "series", "value", "ci_low", "ci_high"], &figure_rows(result))?;
    let mut written = vec![metrics_path, fig_path];
    if raw {
        let path = out_dir.join("trials.csv");
        let header = [
            "point", "trial", "seed", "x", "series", "real_detected", "real_total", "artificial_detected",
            "artificial_total", "count", "locked_to_eve", "infeasible",
        ];
        let rows: Vec<_> = result
            .trials
            .iter()
            .map(|t| {
                let o = &t.outcome;
                (
                    t.point, t.trial, t.seed, t.x, &t.series, o.real_detected, o.real_total, o.artificial_detected,
                    o.artificial_total, o.count, o.locked_to_eve, o.infeasible,
                )
            })
            .collect();
        write_csv(&path, &header, &rows)?;
        written.push(path);
    }
    Ok(written)
}

/// `rdm.f32` with its `rdm.json` sidecar, plus `snapshot.json` with sync, truths and detections.
pub fn export_snapshot(snapshot: &Snapshot, out_dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let (data, sidecar) = (out_dir.join("rdm.f32"), out_dir.join("rdm.json"));
    snapshot.rdm.export(&data, &sidecar)?;
    let report = out_dir.join("snapshot.json");
    let text = serde_json::to_string_pretty(&snapshot.report()).expect("report serializes");
    std::fs::write(&report, text).map_err(io_err(&report))?;
    Ok(vec![data, sidecar, report])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_sweep_writes_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let r = SweepResult { figure: Figure::PdVsCfo, points: vec![], trials: vec![] };
        let files = export_results(&r, dir.path(), true).unwrap();
        assert_eq!(std::fs::read_to_string(&files[1]).unwrap(), "x,series,value,ci_low,ci_high\n");
        assert_eq!(std::fs::read_to_string(&files[0]).unwrap(), "");
        assert!(std::fs::read_to_string(&files[2]).unwrap().starts_with("point,trial,seed"));
    }
}
