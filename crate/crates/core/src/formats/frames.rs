//! Frame sequence directories: `NNN.f32` images with `NNN_residual.f32`,
//! `NNN_layers.csv` and optionally `NNN_gt.pgm`, consumed in ascending
//! numeric order.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrameEntry {
    /// The basename as written, e.g. `"007"`.
    pub id: String,
    pub index: u64,
    pub image: PathBuf,
    pub residual: PathBuf,
    pub layers: PathBuf,
    pub gt: Option<PathBuf>,
}

fn numeric_stem(path: &Path) -> Option<(String, u64)> {
    if path.extension()? != "f32" {
        return None;
    }
    let stem = path.file_stem()?.to_str()?;
    if stem.is_empty() || !stem.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    Some((stem.to_string(), stem.parse().ok()?))
}

/// Lists the frames of `dir`. Every image must have its residual and layer
/// files; a directory without frames is a layout error.
pub fn list_frames(dir: &Path) -> Result<Vec<FrameEntry>> {
    let read = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut found = Vec::new();
    for entry in read {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if let Some((id, index)) = numeric_stem(&path) {
            found.push((index, id, path));
        }
    }
    found.sort();
    if let Some(w) = found.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::format(
            dir,
            format!("frames {:?} and {:?} share index {}", w[0].1, w[1].1, w[0].0),
        ));
    }
    if found.is_empty() {
        return Err(Error::format(dir, "no frames (expected NNN.f32 files)"));
    }
    found
        .into_iter()
        .map(|(index, id, image)| {
            let residual = dir.join(format!("{id}_residual.f32"));
            let layers = dir.join(format!("{id}_layers.csv"));
            for required in [&residual, &layers] {
                if !required.is_file() {
                    return Err(Error::format(
                        dir,
                        format!("frame {id}: missing {}", required.display()),
                    ));
                }
            }
            let gt = Some(dir.join(format!("{id}_gt.pgm"))).filter(|p| p.is_file());
            Ok(FrameEntry {
                id,
                index,
                image,
                residual,
                layers,
                gt,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn touch(dir: &Path, name: &str) {
        fs::write(dir.join(name), b"").unwrap();
    }

    #[test]
    fn lists_in_numeric_order() {
        let dir = tempfile::tempdir().unwrap();
        for id in ["10", "002", "1"] {
            touch(dir.path(), &format!("{id}.f32"));
            touch(dir.path(), &format!("{id}_residual.f32"));
            touch(dir.path(), &format!("{id}_layers.csv"));
        }
        touch(dir.path(), "002_gt.pgm");
        touch(dir.path(), "notes.f32");
        let frames = list_frames(dir.path()).unwrap();
        let ids: Vec<&str> = frames.iter().map(|f| f.id.as_str()).collect();
        assert_eq!(ids, ["1", "002", "10"]);
        assert!(frames[1].gt.is_some() && frames[0].gt.is_none());
    }

    #[test]
    fn layout_violations() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(list_frames(dir.path()), Err(Error::Format { .. })));
        touch(dir.path(), "000.f32");
        touch(dir.path(), "000_residual.f32");
        let err = list_frames(dir.path()).unwrap_err();
        assert!(err.to_string().contains("000_layers.csv"));
        assert!(matches!(list_frames(&dir.path().join("nope")), Err(Error::Io { .. })));
    }
}
