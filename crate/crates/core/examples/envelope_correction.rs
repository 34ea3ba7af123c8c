//! A phantom frame whose BM was mis-traced upward over a few columns, and
//! how the lower convex envelope puts it back.

use ea_refine::layers::convex_envelope_bm;
use ea_refine::phantom::{generate, Issue, PhantomSpec};

fn main() -> ea_refine::Result<()> {
    let spec = PhantomSpec {
        seed: 11,
        ..PhantomSpec::default()
    }
    .with_issues([Issue::BmElevation]);
    let frame = generate(&spec, 0)?;
    let lift = frame.injections.elevation.expect("elevation was requested");
    let corrected = convex_envelope_bm(&frame.bm_obs);

    println!(
        "elevated columns {}..={} (peak {:.1} px)",
        lift.x_start, lift.x_end, lift.peak_px
    );
    println!("{:>4} {:>8} {:>8} {:>9}", "x", "true", "traced", "envelope");
    for x in (lift.x_start..=lift.x_end).step_by(2) {
        println!(
            "{x:>4} {:>8.2} {:>8.2} {:>9.2}",
            frame.bm_gt.row(x),
            frame.bm_obs.row(x),
            corrected.row(x)
        );
    }
    let worst = (lift.x_start..=lift.x_end)
        .map(|x| (corrected.row(x) - frame.bm_gt.row(x)).abs())
        .fold(0.0, f64::max);
    println!("max |envelope - true| over the span: {worst:.3} px");
    Ok(())
}
