//! Online adaptation across an intensity shift. The initial model relies on
//! image intensity, so after frame 100 it under-segments; one step per frame
//! against the refined pseudo label pulls it back.

use ea_refine::metrics::RateMode;
use ea_refine::phantom::{generate_sequence, Issue, PhantomSpec, Schedule};
use ea_refine::refine::{BoundaryStrategy, RefineConfig};
use ea_refine::report::{build_report, RunSettings, RunSummary};
use ea_refine::surrogate::SurrogateConfig;
use ea_refine::tta::{sweep, FrameInput, LogisticPixelModel, SWEEP_LEARNING_RATES};

fn main() -> ea_refine::Result<()> {
    let spec = PhantomSpec {
        seed: 7,
        shift_at: Some(100),
        shift_offset: 60.0,
        ..PhantomSpec::default()
    }
    .with_issues(Issue::ALL);
    let frames = generate_sequence(&spec, 200, Schedule::Random)?;
    let inputs: Vec<FrameInput> = frames.iter().map(FrameInput::from_phantom).collect();
    let gts: Vec<_> = frames.iter().map(|f| Some(f.ea_gt.clone())).collect();

    let model = LogisticPixelModel::new([-2.0, -0.1, 16.0])?;
    let lrs: Vec<f64> = std::iter::once(0.0).chain(SWEEP_LEARNING_RATES).collect();
    let cfg = RefineConfig::default();
    let runs = sweep(
        &model,
        &inputs,
        &lrs,
        &cfg,
        BoundaryStrategy::S1,
        &SurrogateConfig::default(),
    )?;

    let summaries = runs
        .iter()
        .map(|(run, last)| {
            let settings = RunSettings {
                strategy: cfg.strategy,
                pseudo_label_strategy: BoundaryStrategy::S1,
                tolerance_px: cfg.tolerance_px,
                mode: RateMode::GtNormalized,
                initial_weights: model.weights(),
                final_weights: last.weights(),
            };
            RunSummary::new(run, &gts, &settings)
        })
        .collect::<ea_refine::Result<Vec<_>>>()?;
    println!("frames 100..200 (after the shift)");
    print!("{}", build_report(&summaries, 100)?.to_text());
    for s in &summaries {
        println!("lr {:e}: final weights {:?}", s.lr, s.final_weights);
    }
    Ok(())
}
