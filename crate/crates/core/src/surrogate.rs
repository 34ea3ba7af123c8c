//! Coarse lesion prediction from a lesion-evidence map: threshold, keep the
//! largest connected blob, optionally replace it by its filled convex hull.
//!
//! Any externally produced coarse mask can skip this module entirely.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{self, BinaryMask, Connectivity, Grid};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurrogateConfig {
    /// Values `>= threshold` are lesion candidates.
    pub threshold: f64,
    pub connectivity: Connectivity,
    pub apply_hull: bool,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            connectivity: Connectivity::Eight,
            apply_hull: true,
        }
    }
}

impl SurrogateConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.threshold.is_finite() {
            return Err(Error::InvalidConfig("surrogate threshold must be finite".into()));
        }
        Ok(())
    }
}

pub fn threshold(evidence: &Grid, level: f64) -> BinaryMask {
    let (h, w) = evidence.dims();
    BinaryMask::new(h, w, evidence.values().iter().map(|&v| v >= level).collect())
        .expect("dimensions come from a valid grid")
}

/// Only the top and bottom pixel of each column can be hull vertices.
fn column_envelope_points(mask: &BinaryMask) -> Vec<raster::PixelPoint> {
    let ext = raster::column_extrema(mask);
    ext.spans
        .iter()
        .enumerate()
        .filter_map(|(x, s)| s.map(|(t, b)| [raster::PixelPoint::new(x, t), raster::PixelPoint::new(x, b)]))
        .flatten()
        .collect()
}

pub fn residual_to_oriseg(residual: &Grid, cfg: &SurrogateConfig) -> Result<BinaryMask> {
    cfg.validate()?;
    let (h, w) = residual.dims();
    let candidates = threshold(residual, cfg.threshold);
    let blob = match raster::largest_component(&candidates, cfg.connectivity) {
        Ok(blob) => blob,
        Err(Error::EmptyMask) => return BinaryMask::empty(h, w),
        Err(e) => return Err(e),
    };
    if !cfg.apply_hull {
        return Ok(blob);
    }
    let hull = raster::convex_hull(&column_envelope_points(&blob));
    raster::fill_polygon(&hull, h, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid_with_blocks(h: usize, w: usize, blocks: &[(usize, usize, usize, usize)]) -> Grid {
        Grid::from_fn(h, w, |x, y| {
            let hit = blocks
                .iter()
                .any(|&(x0, y0, x1, y1)| (x0..=x1).contains(&x) && (y0..=y1).contains(&y));
            if hit {
                1.0
            } else {
                0.0
            }
        })
        .unwrap()
    }

    #[test]
    fn all_below_threshold_gives_empty_mask() {
        let g = Grid::filled(5, 5, 0.0).unwrap();
        assert!(residual_to_oriseg(&g, &SurrogateConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn filled_rectangle_is_its_own_hull() {
        let g = grid_with_blocks(5, 5, &[(1, 1, 2, 2)]);
        let m = residual_to_oriseg(&g, &SurrogateConfig::default()).unwrap();
        assert_eq!(m, threshold(&g, 0.5));
        assert_eq!(m.count(), 4);
    }

    #[test]
    fn keeps_only_the_larger_blob() {
        // 2x2 blob (size 4) and 3x3 blob (size 9)
        let g = grid_with_blocks(8, 10, &[(0, 0, 1, 1), (5, 3, 7, 5)]);
        let m = residual_to_oriseg(&g, &SurrogateConfig::default()).unwrap();
        assert_eq!(m.count(), 9);
        assert!(m.get(6, 4) && !m.get(0, 0));
    }

    #[test]
    fn hull_fills_concavities() {
        // L-shaped blob: hull adds the missing corner triangle
        let g = grid_with_blocks(6, 6, &[(0, 0, 0, 4), (0, 4, 4, 4)]);
        let cfg = SurrogateConfig::default();
        let hulled = residual_to_oriseg(&g, &cfg).unwrap();
        let raw = residual_to_oriseg(
            &g,
            &SurrogateConfig {
                apply_hull: false,
                ..cfg
            },
        )
        .unwrap();
        assert_eq!(raw.count(), 9);
        assert!(raw.is_subset_of(&hulled));
        assert_eq!(hulled.count(), 15);
    }

    proptest! {
        #[test]
        fn monotone_in_threshold_and_hull_contains_blob(
            vals in prop::collection::vec(0.0f64..1.0, 10 * 10),
            t1 in 0.0f64..1.0, t2 in 0.0f64..1.0,
        ) {
            let g = Grid::new(10, 10, vals).unwrap();
            let (lo, hi) = (t1.min(t2), t1.max(t2));
            prop_assert!(threshold(&g, hi).is_subset_of(&threshold(&g, lo)));

            let cfg = SurrogateConfig { threshold: lo, ..SurrogateConfig::default() };
            let raw = residual_to_oriseg(&g, &SurrogateConfig { apply_hull: false, ..cfg }).unwrap();
            let hulled = residual_to_oriseg(&g, &cfg).unwrap();
            prop_assert!(raw.is_subset_of(&hulled));
            prop_assert!(raw.is_subset_of(&threshold(&g, lo)));
            prop_assert_eq!(residual_to_oriseg(&g, &cfg).unwrap(), hulled);
        }
    }
}
