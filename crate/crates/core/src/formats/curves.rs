//! Layer curves as CSV: header `x,ilm_row,bm_row`, one line per column with
//! `x` running 0..width. An empty field marks a gap, which is filled by
//! linear interpolation on load.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::layers::LayerCurve;

const HEADER: [&str; 3] = ["x", "ilm_row", "bm_row"];

pub fn encode_layers(ilm: &LayerCurve, bm: &LayerCurve) -> String {
    let mut out = String::from("x,ilm_row,bm_row\n");
    for (x, (i, b)) in ilm.rows().iter().zip(bm.rows()).enumerate() {
        out.push_str(&format!("{x},{i},{b}\n"));
    }
    out
}

fn parse_field(raw: &str, path: &Path, line: usize) -> Result<Option<f64>> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Ok(None);
    }
    raw.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .map(Some)
        .ok_or_else(|| Error::format(path, format!("line {line}: invalid row value {raw:?}")))
}

pub fn decode_layers(text: &str, path: &Path) -> Result<(LayerCurve, LayerCurve)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| Error::format(path, e.to_string()))?;
    if headers.iter().map(str::trim).ne(HEADER) {
        return Err(Error::format(path, "header must be `x,ilm_row,bm_row`"));
    }
    let mut ilm = Vec::new();
    let mut bm = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::format(path, e.to_string()))?;
        let x: usize = record[0]
            .trim()
            .parse()
            .map_err(|_| Error::format(path, format!("line {line}: invalid column index")))?;
        if x != i {
            return Err(Error::format(path, format!("line {line}: expected x = {i}, found {x}")));
        }
        ilm.push(parse_field(&record[1], path, line)?);
        bm.push(parse_field(&record[2], path, line)?);
    }
    if ilm.is_empty() {
        return Err(Error::format(path, "no curve rows"));
    }
    let fill = |v: &[Option<f64>]| LayerCurve::from_gapped(v).map_err(|e| Error::format(path, e.to_string()));
    Ok((fill(&ilm)?, fill(&bm)?))
}

pub fn read_layers(path: &Path) -> Result<(LayerCurve, LayerCurve)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    decode_layers(&text, path)
}

pub fn write_layers(path: &Path, ilm: &LayerCurve, bm: &LayerCurve) -> Result<()> {
    fs::write(path, encode_layers(ilm, bm)).map_err(|e| Error::io(path, e))
}
