//! Layer-guided refinement of edema-area masks in retinal OCT B-scans, with
//! online test-time adaptation, a synthetic phantom generator and
//! segmentation metrics.
//!
//! A coarse lesion mask is turned into the full band between the inner
//! limiting membrane (ILM) and Bruch's membrane (BM) over a column interval
//! located from where the mask meets the two layers:
//!
//! ```
//! use ea_refine::layers::LayerCurve;
//! use ea_refine::raster::BinaryMask;
//! use ea_refine::refine::{refine, RefineConfig};
//!
//! let ilm = LayerCurve::new(vec![1.0; 8]).unwrap();
//! let bm = LayerCurve::new(vec![5.0; 8]).unwrap();
//! // coarse mask that stops two rows short of ILM
//! let coarse = BinaryMask::from_fn(8, 8, |x, y| (2..=5).contains(&x) && (3..=5).contains(&y)).unwrap();
//! let out = refine(&coarse, &ilm, &bm, &RefineConfig::default(), 8, 8).unwrap();
//! assert_eq!((out.w_left, out.w_right), (2, 5));
//! assert_eq!(out.mask.count(), 4 * 5);
//! ```
//!
//! Modules:
//! - [`raster`]: grids, masks, connected components, lattice convex hulls
//! - [`layers`]: layer curves, BM envelope correction, band rasterization
//! - [`surrogate`]: coarse mask from a lesion-evidence map
//! - [`refine`]: corner detection, boundary strategies, confined band
//! - [`tta`]: trainable-segmenter contract, logistic reference model, online loop
//! - [`metrics`]: DSC / IoU / FNR / FPR and mean ± std
//! - [`phantom`]: deterministic synthetic frames with injectable failure modes
//! - [`report`]: run summaries and learning-rate tables
//! - [`formats`]: PGM masks, f32 grids, layer CSV, frame directories
//! - [`cli`]: the `ea-refine` command line

pub mod cli;
pub mod error;
pub mod formats;
pub mod layers;
pub mod metrics;
pub mod phantom;
pub mod raster;
pub mod refine;
pub mod report;
pub mod rng;
pub mod surrogate;
pub mod tta;

pub use error::{Error, Result};
