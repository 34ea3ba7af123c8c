//! Retinal boundary curves (ILM above, BM below) and the envelope correction
//! that flattens upward BM mis-segmentations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::BinaryMask;

/// Row coordinate of a boundary at every column. Rows may be fractional.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LayerCurve {
    rows: Vec<f64>,
}

impl LayerCurve {
    pub fn new(rows: Vec<f64>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyCurve);
        }
        if let Some(i) = rows.iter().position(|r| !r.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { rows })
    }

    /// Builds a total curve from one with gaps: interior gaps are linearly
    /// interpolated between the nearest defined neighbours, leading and
    /// trailing gaps copy the nearest defined value.
    pub fn from_gapped(samples: &[Option<f64>]) -> Result<Self> {
        let defined: Vec<(usize, f64)> = samples
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|v| (i, v)))
            .collect();
        let (&(first_x, first_v), &(last_x, last_v)) = match (defined.first(), defined.last()) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(Error::EmptyCurve),
        };
        let mut rows = vec![0.0; samples.len()];
        rows[..first_x].fill(first_v);
        rows[last_x..].fill(last_v);
        for pair in defined.windows(2) {
            let ((x0, v0), (x1, v1)) = (pair[0], pair[1]);
            let span = (x1 - x0) as f64;
            for (x, row) in rows.iter_mut().enumerate().take(x1 + 1).skip(x0) {
                row_between(row, v0, v1, (x - x0) as f64, span);
            }
        }
        Self::new(rows)
    }

    pub fn width(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[f64] {
        &self.rows
    }

    pub fn row(&self, x: usize) -> f64 {
        self.rows[x]
    }

    /// Pixel row of column `x`, rounded half away from zero.
    pub fn pixel_row(&self, x: usize) -> usize {
        round_row(self.rows[x])
    }
}

fn row_between(out: &mut f64, v0: f64, v1: f64, offset: f64, span: f64) {
    *out = (v0 * (span - offset) + v1 * offset) / span;
}

pub(crate) fn round_row(row: f64) -> usize {
    row.round().max(0.0) as usize
}

/// A validated ILM/BM pair: equal widths, rows inside the raster, ILM never
/// below BM.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerPair {
    ilm: LayerCurve,
    bm: LayerCurve,
    height: usize,
}

impl LayerPair {
    pub fn ilm(&self) -> &LayerCurve {
        &self.ilm
    }

    pub fn bm(&self) -> &LayerCurve {
        &self.bm
    }

    pub fn width(&self) -> usize {
        self.ilm.width()
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Same pair with BM replaced by its lower convex envelope.
    pub fn with_corrected_bm(&self) -> Result<LayerPair> {
        validate_layers(
            self.ilm.clone(),
            convex_envelope_bm(&self.bm),
            self.height,
            self.width(),
        )
    }
}

pub fn validate_layers(ilm: LayerCurve, bm: LayerCurve, height: usize, width: usize) -> Result<LayerPair> {
    if height == 0 || width == 0 {
        return Err(Error::InvalidDimensions { height, width });
    }
    for curve in [&ilm, &bm] {
        if curve.width() != width {
            return Err(Error::WidthMismatch {
                curve: curve.width(),
                raster: width,
            });
        }
    }
    let max_row = height - 1;
    for x in 0..width {
        for row in [ilm.row(x), bm.row(x)] {
            if !(0.0..=max_row as f64).contains(&row) {
                return Err(Error::RowOutOfRange {
                    column: x,
                    row,
                    max_row,
                });
            }
        }
        if ilm.row(x) > bm.row(x) {
            return Err(Error::CurveCrossing(x));
        }
    }
    Ok(LayerPair { ilm, bm, height })
}

const COLLINEAR_SLACK: f64 = 1e-12;

/// Lower convex envelope of the BM curve in image coordinates.
///
/// Returns the pointwise-smallest piecewise-linear curve that lies at or
/// below every input point (rows grow downward) and whose upper side is
/// convex. Upward spikes are cut off; downward bulges are kept. Numerically
/// this is the concave majorant of `rows`, built with a monotone chain and
/// evaluated between breakpoints with the two-point weighted form.
pub fn convex_envelope_bm(bm: &LayerCurve) -> LayerCurve {
    let rows = bm.rows();
    let mut chain: Vec<usize> = Vec::with_capacity(rows.len());
    for x in 0..rows.len() {
        while chain.len() >= 2 {
            let (o, a) = (chain[chain.len() - 2], chain[chain.len() - 1]);
            let lhs = (a - o) as f64 * (rows[x] - rows[o]);
            let rhs = (rows[a] - rows[o]) * (x - o) as f64;
            // drop `a` when it sits on or above the chord o→x (smaller row);
            // the relative slack absorbs rounding in already-interpolated rows
            let scale =
                (a - o) as f64 * (rows[x].abs() + rows[o].abs()) + (x - o) as f64 * (rows[a].abs() + rows[o].abs());
            if lhs - rhs >= -COLLINEAR_SLACK * scale {
                chain.pop();
            } else {
                break;
            }
        }
        chain.push(x);
    }

    let mut out = rows.to_vec();
    for seg in chain.windows(2) {
        let (i, j) = (seg[0], seg[1]);
        let span = (j - i) as f64;
        for (x, row) in out.iter_mut().enumerate().take(j).skip(i + 1) {
            row_between(row, rows[i], rows[j], (x - i) as f64, span);
        }
    }
    LayerCurve { rows: out }
}

/// Band between the layers over columns `x_left..=x_right`: pixel `(x, y)` is
/// set iff `round(ilm[x]) <= y <= round(bm[x])`.
pub fn rasterize_band(pair: &LayerPair, x_left: usize, x_right: usize, height: usize) -> Result<BinaryMask> {
    let width = pair.width();
    if x_left > x_right || x_right >= width {
        return Err(Error::BoundsError {
            left: x_left,
            right: x_right,
            width,
        });
    }
    let mut mask = BinaryMask::empty(height, width)?;
    for x in x_left..=x_right {
        let top = pair.ilm().pixel_row(x);
        let bottom = pair.bm().pixel_row(x).min(height - 1);
        for y in top..=bottom {
            mask.set(x, y, true);
        }
    }
    Ok(mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn curve(v: &[f64]) -> LayerCurve {
        LayerCurve::new(v.to_vec()).unwrap()
    }

    /// O(W²) oracle: the largest value any chord between two input points
    /// takes at each column (a point is its own degenerate chord).
    fn brute_envelope(rows: &[f64]) -> Vec<f64> {
        let w = rows.len();
        (0..w)
            .map(|x| {
                let mut best = rows[x];
                for i in 0..=x {
                    for j in x..w {
                        if i < j {
                            let v = (rows[i] * (j - x) as f64 + rows[j] * (x - i) as f64) / (j - i) as f64;
                            best = best.max(v);
                        }
                    }
                }
                best
            })
            .collect()
    }

    #[test]
    fn validate_examples() {
        let pair = validate_layers(curve(&[1.0; 3]), curve(&[4.0; 3]), 6, 3).unwrap();
        assert_eq!(pair.width(), 3);
        assert!(matches!(
            validate_layers(curve(&[1.0, 5.0, 1.0]), curve(&[4.0; 3]), 6, 3),
            Err(Error::CurveCrossing(1))
        ));
        assert!(matches!(
            validate_layers(curve(&[1.0; 3]), curve(&[4.0; 2]), 6, 3),
            Err(Error::WidthMismatch { curve: 2, raster: 3 })
        ));
        assert!(matches!(
            validate_layers(curve(&[1.0; 3]), curve(&[4.0, 6.0, 4.0]), 6, 3),
            Err(Error::RowOutOfRange { column: 1, .. })
        ));
    }

    #[test]
    fn envelope_removes_upward_spike() {
        let e = convex_envelope_bm(&curve(&[10.0, 8.0, 10.0, 10.0, 10.0]));
        assert_eq!(e.rows(), &[10.0; 5]);
    }

    #[test]
    fn envelope_keeps_downward_bulge_and_lines() {
        assert_eq!(
            convex_envelope_bm(&curve(&[10.0, 12.0, 10.0])).rows(),
            &[10.0, 12.0, 10.0]
        );
        let line = [5.0, 6.0, 7.0, 8.0, 9.0];
        assert_eq!(convex_envelope_bm(&curve(&line)).rows(), &line);
    }

    #[test]
    fn band_examples() {
        let pair = validate_layers(curve(&[1.0; 4]), curve(&[3.0; 4]), 5, 4).unwrap();
        let band = rasterize_band(&pair, 1, 2, 5).unwrap();
        assert_eq!(band.count(), 6);
        assert!(band.get(1, 1) && band.get(2, 3) && !band.get(0, 2) && !band.get(1, 0));
        assert!(matches!(rasterize_band(&pair, 2, 1, 5), Err(Error::BoundsError { .. })));

        let flat = validate_layers(curve(&[2.0, 3.0]), curve(&[2.0, 3.0]), 5, 2).unwrap();
        let one = rasterize_band(&flat, 0, 0, 5).unwrap();
        assert_eq!(
            one.points().collect::<Vec<_>>(),
            vec![crate::raster::PixelPoint::new(0, 2)]
        );
    }

    #[test]
    fn band_rounds_half_away_from_zero() {
        let pair = validate_layers(curve(&[0.5, 1.49]), curve(&[2.5, 2.49]), 5, 2).unwrap();
        let band = rasterize_band(&pair, 0, 1, 5).unwrap();
        // column 0: rows 1..=3, column 1: rows 1..=2
        assert_eq!(band.count(), 5);
        assert!(band.get(0, 3) && !band.get(0, 0) && !band.get(1, 3));
    }

    #[test]
    fn gap_filling() {
        let c = LayerCurve::from_gapped(&[None, Some(2.0), None, None, Some(8.0), None]).unwrap();
        assert_eq!(c.rows(), &[2.0, 2.0, 4.0, 6.0, 8.0, 8.0]);
        assert!(matches!(LayerCurve::from_gapped(&[None, None]), Err(Error::EmptyCurve)));
    }

    fn quarter_rows(max_w: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0u32..400, 1..=max_w).prop_map(|v| v.into_iter().map(|q| q as f64 / 4.0).collect())
    }

    proptest! {
        #[test]
        fn envelope_matches_chord_oracle_exactly(rows in quarter_rows(64)) {
            let env = convex_envelope_bm(&curve(&rows));
            prop_assert_eq!(env.rows(), &brute_envelope(&rows)[..]);
        }

        #[test]
        fn envelope_matches_oracle_on_arbitrary_reals(
            rows in prop::collection::vec(0.0f64..500.0, 1..=64)
        ) {
            let env = convex_envelope_bm(&curve(&rows));
            for (a, b) in env.rows().iter().zip(brute_envelope(&rows)) {
                prop_assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
            }
            let again = convex_envelope_bm(&env);
            prop_assert_eq!(again.rows(), env.rows());
        }

        #[test]
        fn envelope_is_idempotent_and_never_lifts(rows in quarter_rows(64)) {
            let env = convex_envelope_bm(&curve(&rows));
            let again = convex_envelope_bm(&env);
            prop_assert_eq!(again.rows(), env.rows());
            for (e, r) in env.rows().iter().zip(&rows) {
                prop_assert!(e >= r);
            }
            // the end columns are always breakpoints, and breakpoints sit on input points
            prop_assert_eq!(env.rows()[0], rows[0]);
            prop_assert_eq!(env.rows()[rows.len() - 1], rows[rows.len() - 1]);
        }

        #[test]
        fn band_count_matches_rounded_widths(
            base in prop::collection::vec((0.0f64..20.0, 0.0f64..20.0), 1..30),
            l in 0usize..30, r in 0usize..30,
        ) {
            let w = base.len();
            let ilm: Vec<f64> = base.iter().map(|&(a, _)| a).collect();
            let bm: Vec<f64> = base.iter().map(|&(a, t)| a + t).collect();
            let pair = validate_layers(curve(&ilm), curve(&bm), 41, w).unwrap();
            let (l, r) = (l.min(w - 1), r.min(w - 1));
            let (l, r) = (l.min(r), l.max(r));
            let band = rasterize_band(&pair, l, r, 41).unwrap();
            let expected: usize = (l..=r).map(|x| pair.bm().pixel_row(x) - pair.ilm().pixel_row(x) + 1).sum();
            prop_assert_eq!(band.count(), expected);
        }
    }
}
