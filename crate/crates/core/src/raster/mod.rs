//! Dense raster primitives: scalar grids, binary masks, connected
//! components, lattice convex hulls and polygon fill.
//!
//! All rasters are row-major with the origin at the top-left corner; the row
//! index `y` grows downward and the column index `x` grows rightward.

mod components;
mod hull;

pub use components::{connected_components, label_components, largest_component, Component};
pub use hull::{convex_hull, fill_polygon};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_dims(height: usize, width: usize) -> Result<()> {
    if height == 0 || width == 0 {
        return Err(Error::InvalidDimensions { height, width });
    }
    Ok(())
}

/// A dense grid of finite `f64` samples.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl Grid {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        check_dims(height, width)?;
        if values.len() != height * width {
            return Err(Error::LengthMismatch {
                expected: height * width,
                actual: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { height, width, values })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(height, width, vec![value; height * width])
    }

    /// Builds a grid by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        check_dims(height, width)?;
        let mut values = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Self::new(height, width, values)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }
}

/// A dense boolean raster.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(height: usize, width: usize, bits: Vec<bool>) -> Result<Self> {
        check_dims(height, width)?;
        if bits.len() != height * width {
            return Err(Error::LengthMismatch {
                expected: height * width,
                actual: bits.len(),
            });
        }
        Ok(Self { height, width, bits })
    }

    pub fn empty(height: usize, width: usize) -> Result<Self> {
        Self::new(height, width, vec![false; height * width])
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> bool) -> Result<Self> {
        check_dims(height, width)?;
        let mut bits = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Ok(Self { height, width, bits })
    }

    /// Mask with exactly the listed pixels set. Out-of-bounds points are an error.
    pub fn from_points(height: usize, width: usize, points: &[PixelPoint]) -> Result<Self> {
        let mut mask = Self::empty(height, width)?;
        for p in points {
            if p.x >= width || p.y >= height {
                return Err(Error::PointOutOfBounds { x: p.x, y: p.y });
            }
            mask.set(p.x, p.y, true);
        }
        Ok(mask)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Foreground pixels in raster order (row by row, left to right).
    pub fn points(&self) -> impl Iterator<Item = PixelPoint> + '_ {
        let w = self.width;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| PixelPoint::new(i % w, i / w))
    }

    /// True when every foreground pixel of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.dims() == other.dims() && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    pub fn ensure_same_dims(&self, dims: (usize, usize)) -> Result<()> {
        if self.dims() != dims {
            return Err(Error::dims(self.dims(), dims));
        }
        Ok(())
    }
}

/// A lattice point in pixel coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PixelPoint {
    pub x: usize,
    pub y: usize,
}

impl PixelPoint {
    pub const fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Connectivity {
    #[serde(rename = "4")]
    Four,
    #[default]
    #[serde(rename = "8")]
    Eight,
}

/// Per-column foreground extent of a mask.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColumnExtrema {
    /// `(top_row, bottom_row)` for every column that has foreground.
    pub spans: Vec<Option<(usize, usize)>>,
    pub leftmost: Option<usize>,
    pub rightmost: Option<usize>,
}

impl ColumnExtrema {
    pub fn top(&self, x: usize) -> Option<usize> {
        self.spans[x].map(|(t, _)| t)
    }

    pub fn bottom(&self, x: usize) -> Option<usize> {
        self.spans[x].map(|(_, b)| b)
    }
}

pub fn column_extrema(mask: &BinaryMask) -> ColumnExtrema {
    let mut spans: Vec<Option<(usize, usize)>> = vec![None; mask.width];
    for y in 0..mask.height {
        for (x, span) in spans.iter_mut().enumerate() {
            if mask.get(x, y) {
                *span = Some(match *span {
                    None => (y, y),
                    Some((top, _)) => (top, y),
                });
            }
        }
    }
    let leftmost = spans.iter().position(Option::is_some);
    let rightmost = spans.iter().rposition(Option::is_some);
    ColumnExtrema {
        spans,
        leftmost,
        rightmost,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rejects_bad_input() {
        assert!(matches!(Grid::new(0, 3, vec![]), Err(Error::InvalidDimensions { .. })));
        assert!(matches!(
            Grid::new(2, 2, vec![0.0; 3]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(Grid::new(1, 2, vec![0.0, f64::NAN]), Err(Error::NonFinite(1))));
    }

    #[test]
    fn column_extrema_of_rectangle() {
        let mask = BinaryMask::from_fn(6, 6, |x, y| (2..=4).contains(&x) && (1..=4).contains(&y)).unwrap();
        let ext = column_extrema(&mask);
        for x in 2..=4 {
            assert_eq!(ext.spans[x], Some((1, 4)));
        }
        assert_eq!(ext.spans[0], None);
        assert_eq!(ext.spans[5], None);
        assert_eq!(ext.leftmost, Some(2));
        assert_eq!(ext.rightmost, Some(4));
    }

    #[test]
    fn column_extrema_of_empty_mask() {
        let ext = column_extrema(&BinaryMask::empty(4, 5).unwrap());
        assert!(ext.spans.iter().all(Option::is_none));
        assert_eq!(ext.leftmost, None);
        assert_eq!(ext.rightmost, None);
    }

    #[test]
    fn column_extrema_single_pixel() {
        let mask = BinaryMask::from_points(8, 8, &[PixelPoint::new(3, 5)]).unwrap();
        let ext = column_extrema(&mask);
        assert_eq!(ext.spans[3], Some((5, 5)));
        assert_eq!(ext.leftmost, Some(3));
        assert_eq!(ext.rightmost, Some(3));
    }
}
