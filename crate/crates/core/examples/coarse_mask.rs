//! From a lesion-evidence map to a coarse mask: threshold, largest blob,
//! filled convex hull.

use ea_refine::raster::Grid;
use ea_refine::surrogate::{residual_to_oriseg, threshold, SurrogateConfig};

fn main() -> ea_refine::Result<()> {
    // a crescent-shaped blob plus a stray speck
    let evidence = Grid::from_fn(12, 16, |x, y| {
        let (dx, dy) = (x as f64 - 8.0, y as f64 - 6.0);
        let r = (dx * dx + dy * dy).sqrt();
        let crescent = (3.5..5.5).contains(&r) && dy > -1.0;
        let speck = x == 1 && y == 1;
        if crescent || speck {
            0.9
        } else {
            0.1
        }
    })?;
    let cfg = SurrogateConfig::default();
    let raw = threshold(&evidence, cfg.threshold);
    let blob = residual_to_oriseg(
        &evidence,
        &SurrogateConfig {
            apply_hull: false,
            ..cfg
        },
    )?;
    let hulled = residual_to_oriseg(&evidence, &cfg)?;
    println!(
        "thresholded {} px, largest blob {} px, hull {} px",
        raw.count(),
        blob.count(),
        hulled.count()
    );
    for y in 0..hulled.height() {
        let line: String = (0..hulled.width())
            .map(|x| match (blob.get(x, y), hulled.get(x, y), raw.get(x, y)) {
                (true, _, _) => '#',
                (false, true, _) => '+',
                (false, false, true) => '.',
                _ => ' ',
            })
            .collect();
        println!("|{line}|");
    }
    Ok(())
}
