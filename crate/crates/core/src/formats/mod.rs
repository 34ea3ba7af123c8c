//! On-disk formats for masks, scalar grids, layer curves and frame
//! directories.

mod curves;
mod frames;
mod grid;
mod pgm;

pub use curves::{decode_layers, encode_layers, read_layers, write_layers};
pub use frames::{list_frames, FrameEntry};
pub use grid::{read_grid, sidecar_path, write_grid};
pub use pgm::{decode_pgm, encode_pgm, read_pgm, write_pgm};
