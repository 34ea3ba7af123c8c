//! Scores of the unrefined coarse mask and of its strategy-1 refinement on
//! a suite where each failure mode appears on a quarter of the frames.

use ea_refine::metrics::{aggregate, evaluate, FrameMetrics, RateMode};
use ea_refine::phantom::{frame_id, generate_sequence, Issue, PhantomSpec, Schedule};
use ea_refine::refine::{refine, RefineConfig};

fn main() -> ea_refine::Result<()> {
    let spec = PhantomSpec {
        seed: 2024,
        ..PhantomSpec::default()
    }
    .with_issues(Issue::ALL);
    let frames = generate_sequence(&spec, 40, Schedule::Cycle)?;
    let mode = RateMode::GtNormalized;
    let mut coarse = Vec::new();
    let mut refined = Vec::new();
    for f in &frames {
        let (h, w) = f.image.dims();
        let out = refine(&f.oriseg_seed, &f.ilm_obs, &f.bm_obs, &RefineConfig::default(), h, w)?;
        let id = frame_id(f.index);
        coarse.push(FrameMetrics::new(
            id.clone(),
            &evaluate(&f.oriseg_seed, &f.ea_gt, mode)?,
            false,
        ));
        refined.push(FrameMetrics::new(id, &evaluate(&out.mask, &f.ea_gt, mode)?, false));
    }
    println!("coarse mask\n{}", aggregate(&coarse, mode, false)?.to_text());
    println!("refined (strategy 1)\n{}", aggregate(&refined, mode, false)?.to_text());
    Ok(())
}
