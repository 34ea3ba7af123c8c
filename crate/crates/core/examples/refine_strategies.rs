//! The three boundary strategies on frames whose coarse mask has slanted
//! sides: strategy 1 keeps the outer corners, 2 the inner ones, 3 averages.

use ea_refine::metrics::{evaluate, RateMode};
use ea_refine::phantom::{generate, Issue, PhantomSpec};
use ea_refine::refine::{refine, BoundaryStrategy, RefineConfig};

fn main() -> ea_refine::Result<()> {
    let spec = PhantomSpec::default().with_issues([Issue::DxSkew]);
    for index in 0..3 {
        let f = generate(&spec, index)?;
        let (h, w) = f.image.dims();
        let skew = f.injections.skew.expect("skew was requested");
        println!("frame {index}: true span {:?}, corner offset {}", f.span, skew.dx);
        let seed = evaluate(&f.oriseg_seed, &f.ea_gt, RateMode::GtNormalized)?;
        println!("  coarse   dsc {:.4}", seed.dsc);
        for strategy in BoundaryStrategy::ALL {
            let out = refine(
                &f.oriseg_seed,
                &f.ilm_obs,
                &f.bm_obs,
                &RefineConfig::with_strategy(strategy),
                h,
                w,
            )?;
            let m = evaluate(&out.mask, &f.ea_gt, RateMode::GtNormalized)?;
            println!(
                "  {strategy}  [{:>3}, {:>3}]  dsc {:.4}  fnr {:.4}  fpr {:.4}",
                out.w_left, out.w_right, m.dsc, m.fnr, m.fpr
            );
        }
    }
    Ok(())
}
