//! Layer-guided refinement of a coarse edema-area mask.
//!
//! The final mask is the full ILM–BM band over a contiguous column interval,
//! so the task reduces to locating the interval's two ends. The steps are:
//!
//! 1. correct BM with its lower convex envelope,
//! 2. find where the coarse mask's top/bottom envelope meets ILM/BM
//!    (the four corner points),
//! 3. complete missing corners from the opposite corner on the same side,
//! 4. pick `w_left`/`w_right` with a [`BoundaryStrategy`],
//! 5. rasterize the band between the layers over `[w_left, w_right]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::{rasterize_band, validate_layers, LayerCurve, LayerPair};
use crate::raster::{column_extrema, BinaryMask, PixelPoint};

/// How the left/right boundary column is chosen from the two corners on
/// each side.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BoundaryStrategy {
    /// Outermost corner on each side (widest band).
    #[default]
    S1,
    /// Innermost corner on each side (narrowest band).
    S2,
    /// Mean of the two corners, rounded outward.
    S3,
}

impl BoundaryStrategy {
    pub const ALL: [BoundaryStrategy; 3] = [BoundaryStrategy::S1, BoundaryStrategy::S2, BoundaryStrategy::S3];

    pub fn from_number(n: u8) -> Option<Self> {
        match n {
            1 => Some(Self::S1),
            2 => Some(Self::S2),
            3 => Some(Self::S3),
            _ => None,
        }
    }
}

impl std::fmt::Display for BoundaryStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Self::S1 => "S1",
            Self::S2 => "S2",
            Self::S3 => "S3",
        };
        f.write_str(s)
    }
}

/// What to do when both corners of one side are missing.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SideFallback {
    /// Use the coarse mask's leftmost/rightmost occupied column.
    #[default]
    MaskExtent,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefineConfig {
    pub strategy: BoundaryStrategy,
    /// Max distance in pixels between the mask envelope and a layer for a
    /// column to count as an intersection.
    pub tolerance_px: f64,
    pub fallback: SideFallback,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            strategy: BoundaryStrategy::S1,
            tolerance_px: 2.0,
            fallback: SideFallback::MaskExtent,
        }
    }
}

impl RefineConfig {
    pub fn with_strategy(strategy: BoundaryStrategy) -> Self {
        Self {
            strategy,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance_px.is_finite() && self.tolerance_px >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "tolerance must be a finite non-negative number, got {}",
                self.tolerance_px
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CornerPoints {
    pub top_left: Option<PixelPoint>,
    pub bottom_left: Option<PixelPoint>,
    pub top_right: Option<PixelPoint>,
    pub bottom_right: Option<PixelPoint>,
}

impl CornerPoints {
    pub fn is_complete(&self) -> bool {
        self.top_left.is_some() && self.bottom_left.is_some() && self.top_right.is_some() && self.bottom_right.is_some()
    }

    /// `|top.x - bottom.x|` on the left and right side, when both exist.
    pub fn horizontal_skew(&self) -> (Option<usize>, Option<usize>) {
        let dx = |a: Option<PixelPoint>, b: Option<PixelPoint>| Some(a?.x.abs_diff(b?.x));
        (
            dx(self.top_left, self.bottom_left),
            dx(self.top_right, self.bottom_right),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Bounds {
    pub w_left: usize,
    pub w_right: usize,
    pub degenerate: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RefineOutcome {
    pub mask: BinaryMask,
    pub corners: CornerPoints,
    pub w_left: usize,
    pub w_right: usize,
    pub strategy: BoundaryStrategy,
    pub degenerate: bool,
    pub notes: Vec<String>,
    /// The layers actually used for the band (BM after envelope correction).
    pub layers: LayerPair,
}

/// Serializable per-frame record of how a mask was produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub corners: CornerPoints,
    pub w_left: usize,
    pub w_right: usize,
    pub strategy: BoundaryStrategy,
    pub degenerate: bool,
    pub notes: Vec<String>,
}

impl RefineOutcome {
    pub fn provenance(&self) -> Provenance {
        Provenance {
            corners: self.corners,
            w_left: self.w_left,
            w_right: self.w_right,
            strategy: self.strategy,
            degenerate: self.degenerate,
            notes: self.notes.clone(),
        }
    }
}

fn touches(pred_row: usize, layer_row: usize, tolerance: f64) -> bool {
    pred_row.abs_diff(layer_row) as f64 <= tolerance
}

/// Locates the four corner points between the coarse mask and the layers.
///
/// Column `x` meets ILM when the topmost foreground row is within
/// `tolerance_px` of ILM's pixel row, and meets BM likewise for the
/// bottommost row. The left corner on a layer is the leftmost meeting column,
/// the right corner the rightmost; corner rows come from the layer.
pub fn find_intersections(oriseg: &BinaryMask, pair: &LayerPair, tolerance_px: f64) -> Result<CornerPoints> {
    oriseg.ensure_same_dims((pair.height(), pair.width()))?;
    let ext = column_extrema(oriseg);
    if ext.leftmost.is_none() {
        return Err(Error::EmptyPrediction);
    }
    let mut top: Vec<usize> = Vec::new();
    let mut bottom: Vec<usize> = Vec::new();
    for (x, span) in ext.spans.iter().enumerate() {
        let Some((t, b)) = *span else { continue };
        if touches(t, pair.ilm().pixel_row(x), tolerance_px) {
            top.push(x);
        }
        if touches(b, pair.bm().pixel_row(x), tolerance_px) {
            bottom.push(x);
        }
    }
    let on = |curve: &LayerCurve, x: usize| PixelPoint::new(x, curve.pixel_row(x));
    Ok(CornerPoints {
        top_left: top.first().map(|&x| on(pair.ilm(), x)),
        top_right: top.last().map(|&x| on(pair.ilm(), x)),
        bottom_left: bottom.first().map(|&x| on(pair.bm(), x)),
        bottom_right: bottom.last().map(|&x| on(pair.bm(), x)),
    })
}

/// Fills in missing corners. A lone missing corner borrows the column of the
/// other corner on its side; a side with neither corner falls back to the
/// coarse mask's extent (`leftmost`, `rightmost`). Returns the completed
/// corners and a note for every substitution.
pub fn complete_missing(
    corners: &CornerPoints,
    pair: &LayerPair,
    extent: (usize, usize),
) -> (CornerPoints, Vec<String>) {
    let mut notes = Vec::new();
    let ilm_at = |x: usize| PixelPoint::new(x, pair.ilm().pixel_row(x));
    let bm_at = |x: usize| PixelPoint::new(x, pair.bm().pixel_row(x));

    let mut side =
        |top: Option<PixelPoint>, bottom: Option<PixelPoint>, name: &str, fallback_x: usize| match (top, bottom) {
            (Some(t), Some(b)) => (t, b),
            (None, Some(b)) => {
                notes.push(format!("top_{name} taken from bottom_{name} column {}", b.x));
                (ilm_at(b.x), b)
            }
            (Some(t), None) => {
                notes.push(format!("bottom_{name} taken from top_{name} column {}", t.x));
                (t, bm_at(t.x))
            }
            (None, None) => {
                notes.push(format!("{name} side missing; used mask extent column {fallback_x}"));
                (ilm_at(fallback_x), bm_at(fallback_x))
            }
        };

    let (tl, bl) = side(corners.top_left, corners.bottom_left, "left", extent.0);
    let (tr, br) = side(corners.top_right, corners.bottom_right, "right", extent.1);
    (
        CornerPoints {
            top_left: Some(tl),
            bottom_left: Some(bl),
            top_right: Some(tr),
            bottom_right: Some(br),
        },
        notes,
    )
}

/// Picks the band's column interval from complete corners.
///
/// S1 takes the outer corner on each side, S2 the inner one, S3 the mean
/// rounded outward (floor on the left, ceil on the right), which keeps
/// `S2 ⊆ S3 ⊆ S1`. If S2 crosses over, both ends collapse onto the rounded
/// midpoint and the result is marked degenerate.
pub fn select_bounds(corners: &CornerPoints, strategy: BoundaryStrategy) -> Result<Bounds> {
    let (Some(tl), Some(bl), Some(tr), Some(br)) = (
        corners.top_left,
        corners.bottom_left,
        corners.top_right,
        corners.bottom_right,
    ) else {
        return Err(Error::IncompleteCorners);
    };
    let (w_left, w_right) = match strategy {
        BoundaryStrategy::S1 => (tl.x.min(bl.x), tr.x.max(br.x)),
        BoundaryStrategy::S2 => (tl.x.max(bl.x), tr.x.min(br.x)),
        BoundaryStrategy::S3 => ((tl.x + bl.x) / 2, (tr.x + br.x).div_ceil(2)),
    };
    if w_left > w_right {
        let mid = (w_left + w_right).div_ceil(2);
        return Ok(Bounds {
            w_left: mid,
            w_right: mid,
            degenerate: true,
        });
    }
    Ok(Bounds {
        w_left,
        w_right,
        degenerate: false,
    })
}

/// The band between the layers over `[w_left, w_right]`, with exactly
/// vertical side boundaries.
pub fn confined(pair: &LayerPair, w_left: usize, w_right: usize, height: usize) -> Result<BinaryMask> {
    rasterize_band(pair, w_left, w_right, height)
}

/// Full refinement of one frame starting from raw layer curves.
pub fn refine(
    oriseg: &BinaryMask,
    ilm: &LayerCurve,
    bm: &LayerCurve,
    cfg: &RefineConfig,
    height: usize,
    width: usize,
) -> Result<RefineOutcome> {
    let pair = validate_layers(ilm.clone(), bm.clone(), height, width)?;
    refine_pair(oriseg, &pair, cfg)
}

/// Same as [`refine`] for layers that were already validated.
pub fn refine_pair(oriseg: &BinaryMask, pair: &LayerPair, cfg: &RefineConfig) -> Result<RefineOutcome> {
    cfg.validate()?;
    let (height, width) = (pair.height(), pair.width());
    oriseg.ensure_same_dims((height, width))?;
    // unconditional, whether or not BM actually has an elevation
    let layers = pair.with_corrected_bm()?;

    let corners = match find_intersections(oriseg, &layers, cfg.tolerance_px) {
        Ok(c) => c,
        Err(Error::EmptyPrediction) => {
            return Ok(RefineOutcome {
                mask: BinaryMask::empty(height, width)?,
                corners: CornerPoints::default(),
                w_left: 0,
                w_right: 0,
                strategy: cfg.strategy,
                degenerate: true,
                notes: vec!["empty prediction".to_string()],
                layers,
            });
        }
        Err(e) => return Err(e),
    };
    let ext = column_extrema(oriseg);
    let extent = (
        ext.leftmost.expect("non-empty prediction"),
        ext.rightmost.expect("non-empty prediction"),
    );
    let (corners, mut notes) = match cfg.fallback {
        SideFallback::MaskExtent => complete_missing(&corners, &layers, extent),
    };
    let bounds = select_bounds(&corners, cfg.strategy)?;
    if bounds.degenerate {
        notes.push(format!("bounds crossed; collapsed to column {}", bounds.w_left));
    }
    let mask = confined(&layers, bounds.w_left, bounds.w_right, height)?;
    Ok(RefineOutcome {
        mask,
        corners,
        w_left: bounds.w_left,
        w_right: bounds.w_right,
        strategy: cfg.strategy,
        degenerate: bounds.degenerate,
        notes,
        layers,
    })
}
