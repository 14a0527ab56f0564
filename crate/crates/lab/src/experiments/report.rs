use std::fs;
use std::path::Path;

use coordgate::metrics::MetricsRecord;
use coordgate::{Error, Result};
use serde::{Deserialize, Serialize};

use super::output::{csv_err, write_csv};
use crate::config::ExperimentConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub run: String,
    pub model: String,
    pub params: usize,
    pub psnr_db: f64,
    pub ssim: f64,
    pub mse: f64,
    pub inference_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlotPoint {
    pub run: String,
    pub model: String,
    pub x: f64,
    pub y: f64,
    pub size: f64,
}

pub struct ReportOutcome {
    pub rows: Vec<ReportRow>,
}

fn read_metrics(path: &Path) -> Result<Vec<MetricsRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

/// Merges `<out>/<run>/metrics.csv` into `report.csv` plus scatter data for
/// PSNR against inference time and against log10(params).
pub fn cmd_report(cfg: &ExperimentConfig, out: &Path) -> Result<ReportOutcome> {
    let runs: Vec<String> = if cfg.runs.is_empty() {
        let mut found: Vec<String> = fs::read_dir(out)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", out.display())))?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().join("metrics.csv").is_file())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .collect();
        found.sort();
        found
    } else {
        cfg.runs.clone()
    };
    let mut rows = Vec::new();
    let mut missing = Vec::new();
    for run in &runs {
        let path = out.join(run).join("metrics.csv");
        if !path.is_file() {
            missing.push(run.clone());
            continue;
        }
        for rec in read_metrics(&path)? {
            rec.check()?;
            rows.push(ReportRow {
                run: run.clone(),
                model: rec.model,
                params: rec.params,
                psnr_db: rec.psnr_db,
                ssim: rec.ssim,
                mse: rec.mse,
                inference_s: rec.inference_s,
            });
        }
    }
    if !missing.is_empty() {
        return Err(Error::Config(format!("missing runs: {}", missing.join(", "))));
    }
    if rows.is_empty() {
        return Err(Error::Config(format!("no metrics.csv below {}", out.display())));
    }
    let trained = || rows.iter().filter(|r| r.params > 0);
    let vs_time: Vec<PlotPoint> = trained()
        .map(|r| PlotPoint {
            run: r.run.clone(),
            model: r.model.clone(),
            x: r.inference_s,
            y: r.psnr_db,
            size: r.params as f64,
        })
        .collect();
    let vs_params: Vec<PlotPoint> = trained()
        .map(|r| PlotPoint {
            run: r.run.clone(),
            model: r.model.clone(),
            x: (r.params as f64).log10(),
            y: r.psnr_db,
            size: r.ssim,
        })
        .collect();
    write_csv(&out.join("report.csv"), &rows)?;
    write_csv(&out.join("psnr_vs_time.csv"), &vs_time)?;
    write_csv(&out.join("psnr_vs_log_params.csv"), &vs_params)?;
    Ok(ReportOutcome { rows })
}
