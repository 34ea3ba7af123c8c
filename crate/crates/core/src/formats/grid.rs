//! Raw little-endian `f32` rasters with a `{"height": H, "width": W}` JSON
//! sidecar that shares the basename (`frame.f32` + `frame.json`).

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::Grid;

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    height: usize,
    width: usize,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Writes `grid` narrowed to `f32`.
pub fn write_grid(path: &Path, grid: &Grid) -> Result<()> {
    let mut raw = Vec::with_capacity(grid.values().len() * 4);
    for &v in grid.values() {
        raw.extend_from_slice(&(v as f32).to_le_bytes());
    }
    fs::write(path, raw).map_err(|e| Error::io(path, e))?;
    let meta = Sidecar {
        height: grid.height(),
        width: grid.width(),
    };
    let side = sidecar_path(path);
    let text = serde_json::to_string(&meta).expect("sidecar serializes");
    fs::write(&side, text).map_err(|e| Error::io(&side, e))
}

pub fn read_grid(path: &Path) -> Result<Grid> {
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let meta: Sidecar = serde_json::from_str(&text).map_err(|e| Error::format(&side, e.to_string()))?;
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    if raw.len() != meta.height * meta.width * 4 {
        return Err(Error::format(
            path,
            format!(
                "expected {} bytes for {}x{} f32 raster, found {}",
                meta.height * meta.width * 4,
                meta.height,
                meta.width,
                raw.len()
            ),
        ));
    }
    let values = raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    Grid::new(meta.height, meta.width, values).map_err(|e| Error::format(path, e.to_string()))
}
