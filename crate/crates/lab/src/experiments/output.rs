use std::fs;
use std::path::{Path, PathBuf};

use coordgate::{Error, Real, Result, Tensor};
use serde::Serialize;

pub fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse(format!("{other:?}")),
    }
}

pub fn write_csv<R: Serialize>(path: &Path, rows: &[R]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn ensure_dir(dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir)
        .map_err(|e| Error::Config(format!("cannot create output directory {}: {e}", dir.display())))?;
    Ok(dir.to_path_buf())
}

/// File-name friendly form of a model name: `CG U-Net(2)` -> `cg_u-net_2`.
pub fn slug(name: &str) -> String {
    let mut s = String::new();
    for ch in name.chars() {
        if ch.is_ascii_alphanumeric() || ch == '-' {
            s.push(ch.to_ascii_lowercase());
        } else if !s.ends_with('_') {
            s.push('_');
        }
    }
    s.trim_matches('_').to_string()
}

/// Writes a `[rows, cols]` matrix as CSV without a header.
pub fn write_matrix<T: Real>(path: &Path, m: &Tensor<T>) -> Result<()> {
    let cols = *m.shape().last().unwrap_or(&1);
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(csv_err)?;
    for row in m.data().chunks(cols.max(1)) {
        w.write_record(row.iter().map(|&v| Real::to_f64(v).to_string()))
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slugs() {
        assert_eq!(slug("CG U-Net(2)"), "cg_u-net_2");
        assert_eq!(slug("CNN(4,7,20)"), "cnn_4_7_20");
    }
}
