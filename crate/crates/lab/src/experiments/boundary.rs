use std::path::Path;

use coordgate::datagen::run_boundary;
use coordgate::{pgm, Rational64, Result, Tensor};
use num_traits::ToPrimitive;
use serde::Serialize;

use super::output::{ensure_dir, write_csv};
use crate::config::ExperimentConfig;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundaryRow {
    pub run: String,
    pub stage: usize,
    pub label: String,
    pub height: usize,
    pub width: usize,
    pub defect_depth: usize,
    pub uniform_side: usize,
    /// Exact value at the top-left corner, e.g. `4/9`.
    pub corner: String,
    /// Exact value at the centre of the top edge.
    pub edge: String,
    /// Exact value at the centre pixel.
    pub centre: String,
}

/// Runs every configured boundary demonstration in exact arithmetic; writes
/// one PGM per stage and `boundary.csv`.
pub fn cmd_boundary(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<BoundaryRow>> {
    let out = ensure_dir(out)?;
    let mut rows = Vec::new();
    for run in &cfg.boundary {
        let stages = run_boundary::<Rational64>(run.size, run.variant)?;
        for (i, s) in stages.iter().enumerate() {
            let (h, w) = (s.map.shape()[0], s.map.shape()[1]);
            let img = Tensor::new(
                [h, w],
                s.map.data().iter().map(|v| v.to_f64().unwrap_or(0.0)).collect(),
            )?;
            pgm::write_pgm(&out.join(format!("{}_{:02}_{}.pgm", run.name, i + 1, s.label)), &img)?;
            rows.push(BoundaryRow {
                run: run.name.clone(),
                stage: i + 1,
                label: s.label.clone(),
                height: h,
                width: w,
                defect_depth: s.defect_depth,
                uniform_side: s.uniform_side,
                corner: s.map.at(&[0, 0]).to_string(),
                edge: s.map.at(&[0, w / 2]).to_string(),
                centre: s.map.at(&[h / 2, w / 2]).to_string(),
            });
        }
    }
    write_csv(&out.join("boundary.csv"), &rows)?;
    Ok(rows)
}
