//! Plugging a different model into the online loop. Anything that can
//! predict a probability map and take one gradient-like step qualifies.

use ea_refine::phantom::{generate_sequence, PhantomSpec, Schedule};
use ea_refine::raster::{BinaryMask, Grid};
use ea_refine::refine::RefineConfig;
use ea_refine::surrogate::SurrogateConfig;
use ea_refine::tta::{bce_loss, run_online, Adaptation, FrameInput, TrainableSegmenter, TtaConfig};

/// Soft threshold on the residual with a learnable cut point.
struct SoftThreshold {
    cut: f64,
    sharpness: f64,
}

impl SoftThreshold {
    fn prob(&self, r: f64) -> f64 {
        1.0 / (1.0 + (-(r - self.cut) * self.sharpness).exp())
    }
}

impl TrainableSegmenter for SoftThreshold {
    fn predict(&self, _image: &Grid, residual: &Grid) -> ea_refine::Result<Grid> {
        let (h, w) = residual.dims();
        Grid::new(h, w, residual.values().iter().map(|&r| self.prob(r)).collect())
    }

    fn step(&mut self, image: &Grid, residual: &Grid, label: &BinaryMask, lr: f64) -> ea_refine::Result<f64> {
        let loss = bce_loss(&self.predict(image, residual)?, label)?;
        let n = residual.values().len() as f64;
        // d(mean BCE)/d(cut) = -sharpness * mean(p - y)
        let g: f64 = residual
            .values()
            .iter()
            .zip(label.bits())
            .map(|(&r, &y)| self.prob(r) - if y { 1.0 } else { 0.0 })
            .sum::<f64>()
            * -self.sharpness
            / n;
        self.cut -= lr * g;
        Ok(loss)
    }
}

fn main() -> ea_refine::Result<()> {
    let frames = generate_sequence(&PhantomSpec::default(), 20, Schedule::All)?;
    let inputs = frames.iter().map(|f| Ok(FrameInput::from_phantom(f)));
    let mut model = SoftThreshold {
        cut: 0.9,
        sharpness: 20.0,
    };
    let adaptation = Adaptation::Online(TtaConfig::new(0.05, Default::default())?);
    let run = run_online(
        &mut model,
        inputs,
        &RefineConfig::default(),
        &adaptation,
        &SurrogateConfig::default(),
    )?;
    for rec in run.frames.iter().step_by(4) {
        println!(
            "frame {}: loss {:.4}, band [{}, {}]",
            rec.id, rec.loss, rec.outcome.w_left, rec.outcome.w_right
        );
    }
    println!("cut point after {} frames: {:.4}", run.frames.len(), model.cut);
    Ok(())
}
