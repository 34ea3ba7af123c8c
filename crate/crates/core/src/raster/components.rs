use super::{BinaryMask, Connectivity};
use crate::error::{Error, Result};

const NEIGHBORS_4: [(isize, isize); 4] = [(0, -1), (-1, 0), (1, 0), (0, 1)];
const NEIGHBORS_8: [(isize, isize); 8] = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];

/// One connected component of a binary mask.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Component {
    pub mask: BinaryMask,
    pub size: usize,
}

/// Labels every foreground pixel with a component id starting at 1 (0 is
/// background). Ids are assigned in raster order of each component's first
/// pixel, so id 1 holds the component containing the smallest `(y, x)`.
///
/// Returns the label image and the pixel count of each component (index
/// `id - 1`).
pub fn label_components(mask: &BinaryMask, connectivity: Connectivity) -> (Vec<u32>, Vec<usize>) {
    let (h, w) = mask.dims();
    let offsets: &[(isize, isize)] = match connectivity {
        Connectivity::Four => &NEIGHBORS_4,
        Connectivity::Eight => &NEIGHBORS_8,
    };
    let mut labels = vec![0u32; h * w];
    let mut sizes = Vec::new();
    let mut stack = Vec::new();

    for start in 0..h * w {
        if !mask.bits()[start] || labels[start] != 0 {
            continue;
        }
        let id = sizes.len() as u32 + 1;
        let mut size = 0;
        labels[start] = id;
        stack.push(start);
        while let Some(i) = stack.pop() {
            size += 1;
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for &(dx, dy) in offsets {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if mask.bits()[j] && labels[j] == 0 {
                    labels[j] = id;
                    stack.push(j);
                }
            }
        }
        sizes.push(size);
    }
    (labels, sizes)
}

fn component_mask(mask: &BinaryMask, labels: &[u32], id: u32) -> BinaryMask {
    let (h, w) = mask.dims();
    BinaryMask::new(h, w, labels.iter().map(|&l| l == id).collect()).expect("dimensions come from a valid mask")
}

/// Splits the foreground into connected components, ordered by the raster
/// position of each component's first pixel.
pub fn connected_components(mask: &BinaryMask, connectivity: Connectivity) -> Vec<Component> {
    let (labels, sizes) = label_components(mask, connectivity);
    sizes
        .iter()
        .enumerate()
        .map(|(i, &size)| Component {
            mask: component_mask(mask, &labels, i as u32 + 1),
            size,
        })
        .collect()
}

/// The component with the most pixels. Ties go to the component whose first
/// pixel comes earliest in raster order.
pub fn largest_component(mask: &BinaryMask, connectivity: Connectivity) -> Result<BinaryMask> {
    let (labels, sizes) = label_components(mask, connectivity);
    let mut best: Option<(usize, usize)> = None;
    for (i, &size) in sizes.iter().enumerate() {
        // strict `>` keeps the earliest component on ties
        if best.is_none_or(|(_, s)| size > s) {
            best = Some((i, size));
        }
    }
    let (i, _) = best.ok_or(Error::EmptyMask)?;
    Ok(component_mask(mask, &labels, i as u32 + 1))
}
