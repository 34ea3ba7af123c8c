//! Lattice-point convex hull (Andrew's monotone chain) and closed polygon
//! rasterization. All orientation tests are exact `i64` cross products.

use super::{BinaryMask, PixelPoint};
use crate::error::Result;

/// Point in a y-up frame so that "counter-clockwise" has its usual meaning.
type Lattice = (i64, i64);

fn to_lattice(p: PixelPoint) -> Lattice {
    (p.x as i64, -(p.y as i64))
}

fn from_lattice(p: Lattice) -> PixelPoint {
    PixelPoint::new(p.0 as usize, (-p.1) as usize)
}

fn cross(o: Lattice, a: Lattice, b: Lattice) -> i64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Convex hull of a set of pixels.
///
/// Vertices come back counter-clockwise when viewed with y pointing up (that
/// is, clockwise on screen), starting from the leftmost point with the
/// largest row. Collinear boundary points are dropped; a single point yields a
/// one-vertex polygon and a collinear set yields its two endpoints.
pub fn convex_hull(points: &[PixelPoint]) -> Vec<PixelPoint> {
    let mut pts: Vec<Lattice> = points.iter().copied().map(to_lattice).collect();
    pts.sort_unstable();
    pts.dedup();
    if pts.len() <= 2 {
        return pts.into_iter().map(from_lattice).collect();
    }

    let mut hull: Vec<Lattice> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull.into_iter().map(from_lattice).collect()
}

fn on_segment(a: PixelPoint, b: PixelPoint, p: PixelPoint) -> bool {
    let (a, b, p) = (to_lattice(a), to_lattice(b), to_lattice(p));
    cross(a, b, p) == 0 && p.0 >= a.0.min(b.0) && p.0 <= a.0.max(b.0) && p.1 >= a.1.min(b.1) && p.1 <= a.1.max(b.1)
}

/// Even-odd test for pixel centers strictly off the boundary.
fn crosses_odd(polygon: &[PixelPoint], px: i64, py: i64) -> bool {
    let mut inside = false;
    let n = polygon.len();
    for i in 0..n {
        let (ax, ay) = (polygon[i].x as i64, polygon[i].y as i64);
        let (bx, by) = (polygon[(i + 1) % n].x as i64, polygon[(i + 1) % n].y as i64);
        if (ay > py) != (by > py) {
            // px < ax + (py - ay) * (bx - ax) / (by - ay), multiplied through
            let lhs = (px - ax) * (by - ay);
            let rhs = (py - ay) * (bx - ax);
            let left_of_edge = if by > ay { lhs < rhs } else { lhs > rhs };
            if left_of_edge {
                inside = !inside;
            }
        }
    }
    inside
}

/// Rasterizes a closed polygon: a pixel is set iff its center lies inside
/// (even-odd rule) or on the boundary. Parts outside the raster are clipped.
pub fn fill_polygon(polygon: &[PixelPoint], height: usize, width: usize) -> Result<BinaryMask> {
    let mut mask = BinaryMask::empty(height, width)?;
    if polygon.is_empty() {
        return Ok(mask);
    }
    let x_max = polygon.iter().map(|p| p.x).max().unwrap().min(width - 1);
    let y_max = polygon.iter().map(|p| p.y).max().unwrap().min(height - 1);
    let x_min = polygon.iter().map(|p| p.x).min().unwrap();
    let y_min = polygon.iter().map(|p| p.y).min().unwrap();
    let n = polygon.len();
    for y in y_min..=y_max {
        for x in x_min..=x_max {
            let p = PixelPoint::new(x, y);
            let boundary = (0..n).any(|i| on_segment(polygon[i], polygon[(i + 1) % n], p));
            if boundary || crosses_odd(polygon, x as i64, y as i64) {
                mask.set(x, y, true);
            }
        }
    }
    Ok(mask)
}
