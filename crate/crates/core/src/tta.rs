//! Online test-time adaptation: each frame is predicted, refined into a
//! pseudo label, and then used for exactly one gradient step before the next
//! frame is seen.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::{read_grid, read_layers, FrameEntry};
use crate::layers::{validate_layers, LayerCurve};
use crate::phantom::PhantomFrame;
use crate::raster::{BinaryMask, Grid};
use crate::refine::{refine_pair, BoundaryStrategy, RefineConfig, RefineOutcome};
use crate::surrogate::{residual_to_oriseg, SurrogateConfig};

/// Probabilities are clamped to `[PROB_EPS, 1 - PROB_EPS]` inside the loss.
pub const PROB_EPS: f64 = 1e-7;

pub const DEFAULT_LR: f64 = 5e-5;

/// The learning rates of a standard sweep, largest first.
pub const SWEEP_LEARNING_RATES: [f64; 4] = [5e-4, 1e-4, 5e-5, 1e-5];

pub const ITERATIONS_PER_SAMPLE: usize = 1;

/// A segmenter that can be adapted one step at a time.
///
/// `step` with `lr == 0` must leave the parameters bit-identical.
pub trait TrainableSegmenter {
    /// Per-pixel lesion probability in `[0, 1]`.
    fn predict(&self, image: &Grid, residual: &Grid) -> Result<Grid>;

    /// One gradient step towards `label`. Returns the loss before the step.
    fn step(&mut self, image: &Grid, residual: &Grid, label: &BinaryMask, lr: f64) -> Result<f64>;
}

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

/// Pixel-mean binary cross-entropy.
pub fn bce_loss(pred: &Grid, label: &BinaryMask) -> Result<f64> {
    label.ensure_same_dims(pred.dims())?;
    let total: f64 = pred
        .values()
        .iter()
        .zip(label.bits())
        .map(|(&p, &y)| {
            let p = clamp_prob(p);
            if y {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    Ok(total / label.bits().len() as f64)
}

/// `p = sigmoid(w0 + w1 * image + w2 * residual)` per pixel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticPixelModel {
    weights: [f64; 3],
}

impl Default for LogisticPixelModel {
    fn default() -> Self {
        Self::residual_passthrough()
    }
}

impl LogisticPixelModel {
    pub fn new(weights: [f64; 3]) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "model weights must be finite, got {weights:?}"
            )));
        }
        Ok(Self { weights })
    }

    /// Ignores the image: `p >= 0.5` exactly when `residual >= 0.5`, so the
    /// default threshold on its output reproduces thresholding the residual.
    pub fn residual_passthrough() -> Self {
        Self {
            weights: [-8.0, 0.0, 16.0],
        }
    }

    pub fn weights(&self) -> [f64; 3] {
        self.weights
    }

    fn logit(&self, intensity: f64, residual: f64) -> f64 {
        let [b, wi, wr] = self.weights;
        b + wi * intensity + wr * residual
    }

    /// Mean BCE and its gradient with respect to the weights.
    pub fn loss_and_gradient(&self, image: &Grid, residual: &Grid, label: &BinaryMask) -> Result<(f64, [f64; 3])> {
        check_dims(image, residual)?;
        label.ensure_same_dims(image.dims())?;
        let n = image.values().len() as f64;
        let mut loss = 0.0;
        let mut grad = [0.0; 3];
        for ((&i, &r), &y) in image.values().iter().zip(residual.values()).zip(label.bits()) {
            let p = sigmoid(self.logit(i, r));
            let pc = clamp_prob(p);
            let target = if y { 1.0 } else { 0.0 };
            loss -= if y { pc.ln() } else { (1.0 - pc).ln() };
            let err = p - target;
            grad[0] += err;
            grad[1] += err * i;
            grad[2] += err * r;
        }
        Ok((loss / n, grad.map(|g| g / n)))
    }
}

fn check_dims(image: &Grid, residual: &Grid) -> Result<()> {
    if image.dims() != residual.dims() {
        return Err(Error::dims(image.dims(), residual.dims()));
    }
    Ok(())
}

/// One plain gradient step. Returns the loss before the step and the
/// updated model; `lr == 0` returns the model unchanged.
pub fn logistic_step(
    model: &LogisticPixelModel,
    image: &Grid,
    residual: &Grid,
    label: &BinaryMask,
    lr: f64,
) -> Result<(f64, LogisticPixelModel)> {
    if !(lr.is_finite() && lr >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "learning rate must be finite and >= 0, got {lr}"
        )));
    }
    let (loss, grad) = model.loss_and_gradient(image, residual, label)?;
    if lr == 0.0 {
        return Ok((loss, *model));
    }
    let mut weights = model.weights;
    for (w, g) in weights.iter_mut().zip(grad) {
        *w -= lr * g;
    }
    Ok((loss, LogisticPixelModel::new(weights)?))
}

impl TrainableSegmenter for LogisticPixelModel {
    fn predict(&self, image: &Grid, residual: &Grid) -> Result<Grid> {
        check_dims(image, residual)?;
        let (h, w) = image.dims();
        let values = image
            .values()
            .iter()
            .zip(residual.values())
            .map(|(&i, &r)| sigmoid(self.logit(i, r)))
            .collect();
        Grid::new(h, w, values)
    }

    fn step(&mut self, image: &Grid, residual: &Grid, label: &BinaryMask, lr: f64) -> Result<f64> {
        let (loss, next) = logistic_step(self, image, residual, label, lr)?;
        *self = next;
        Ok(loss)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TtaConfig {
    lr: f64,
    pseudo_label_strategy: BoundaryStrategy,
}

impl Default for TtaConfig {
    fn default() -> Self {
        Self {
            lr: DEFAULT_LR,
            pseudo_label_strategy: BoundaryStrategy::S1,
        }
    }
}

impl TtaConfig {
    pub fn new(lr: f64, pseudo_label_strategy: BoundaryStrategy) -> Result<Self> {
        if !(lr > 0.0 && lr < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must lie in (0, 1), got {lr}"
            )));
        }
        Ok(Self {
            lr,
            pseudo_label_strategy,
        })
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn pseudo_label_strategy(&self) -> BoundaryStrategy {
        self.pseudo_label_strategy
    }
}

/// Whether a run updates the model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Adaptation {
    /// No updates: plain per-frame prediction and refinement.
    Frozen,
    Online(TtaConfig),
}

impl Adaptation {
    /// `lr == 0` means [`Adaptation::Frozen`].
    pub fn from_lr(lr: f64, pseudo_label_strategy: BoundaryStrategy) -> Result<Self> {
        if lr == 0.0 {
            Ok(Adaptation::Frozen)
        } else {
            TtaConfig::new(lr, pseudo_label_strategy).map(Adaptation::Online)
        }
    }

    pub fn lr(&self) -> f64 {
        match self {
            Adaptation::Frozen => 0.0,
            Adaptation::Online(cfg) => cfg.lr,
        }
    }
}

/// Everything one frame contributes to a run.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameInput {
    pub id: String,
    pub image: Grid,
    pub residual: Grid,
    pub ilm: LayerCurve,
    pub bm: LayerCurve,
}

impl FrameInput {
    pub fn load(entry: &FrameEntry) -> Result<Self> {
        let image = read_grid(&entry.image)?;
        let residual = read_grid(&entry.residual)?;
        check_dims(&image, &residual)?;
        let (ilm, bm) = read_layers(&entry.layers)?;
        Ok(Self {
            id: entry.id.clone(),
            image,
            residual,
            ilm,
            bm,
        })
    }

    pub fn from_phantom(frame: &PhantomFrame) -> Self {
        Self {
            id: crate::phantom::frame_id(frame.index),
            image: frame.image.clone(),
            residual: frame.residual.clone(),
            ilm: frame.ilm_obs.clone(),
            bm: frame.bm_obs.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameRecord {
    pub id: String,
    /// The prediction for this frame, made before its own update.
    pub outcome: RefineOutcome,
    /// Loss of the prediction against the pseudo label, before any update.
    pub loss: f64,
    pub updated: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OnlineRun {
    pub lr: f64,
    pub frames: Vec<FrameRecord>,
    /// Frames whose refinement was degenerate; they never update the model.
    pub skipped: Vec<String>,
}

/// Runs the online loop over `frames` in order, reading each frame once.
///
/// Per frame: predict with the current model, turn the probability map into
/// a coarse mask, refine it, and, if adapting and the refinement is not
/// degenerate, take one step towards the refined pseudo label.
pub fn run_online<M, I>(
    model: &mut M,
    frames: I,
    refine_cfg: &RefineConfig,
    adaptation: &Adaptation,
    surrogate_cfg: &SurrogateConfig,
) -> Result<OnlineRun>
where
    M: TrainableSegmenter + ?Sized,
    I: IntoIterator<Item = Result<FrameInput>>,
{
    refine_cfg.validate()?;
    surrogate_cfg.validate()?;
    let mut run = OnlineRun {
        lr: adaptation.lr(),
        frames: Vec::new(),
        skipped: Vec::new(),
    };
    for frame in frames {
        let frame = frame?;
        let (h, w) = frame.image.dims();
        let pair = validate_layers(frame.ilm, frame.bm, h, w)?;
        let prob = model.predict(&frame.image, &frame.residual)?;
        let oriseg = residual_to_oriseg(&prob, surrogate_cfg)?;
        let outcome = refine_pair(&oriseg, &pair, refine_cfg)?;

        let label = match adaptation {
            Adaptation::Online(cfg) if cfg.pseudo_label_strategy != refine_cfg.strategy => {
                let cfg = RefineConfig {
                    strategy: cfg.pseudo_label_strategy,
                    ..*refine_cfg
                };
                refine_pair(&oriseg, &pair, &cfg)?
            }
            _ => outcome.clone(),
        };
        let mut loss = bce_loss(&prob, &label.mask)?;
        let mut updated = false;
        if label.degenerate || outcome.degenerate {
            run.skipped.push(frame.id.clone());
        } else if let Adaptation::Online(cfg) = adaptation {
            loss = model.step(&frame.image, &frame.residual, &label.mask, cfg.lr)?;
            updated = true;
        }
        run.frames.push(FrameRecord {
            id: frame.id,
            outcome,
            loss,
            updated,
        });
    }
    if run.frames.is_empty() {
        return Err(Error::InvalidConfig("frame sequence is empty".into()));
    }
    Ok(run)
}

/// Independent runs, one per learning rate, each from its own copy of
/// `initial`. `0.0` is the frozen baseline. Runs execute concurrently; each
/// comes back with its final model.
pub fn sweep<M>(
    initial: &M,
    frames: &[FrameInput],
    lrs: &[f64],
    refine_cfg: &RefineConfig,
    pseudo_label_strategy: BoundaryStrategy,
    surrogate_cfg: &SurrogateConfig,
) -> Result<Vec<(OnlineRun, M)>>
where
    M: TrainableSegmenter + Clone + Send + Sync,
{
    let adaptations = lrs
        .iter()
        .map(|&lr| Adaptation::from_lr(lr, pseudo_label_strategy))
        .collect::<Result<Vec<_>>>()?;
    std::thread::scope(|scope| {
        let handles: Vec<_> = adaptations
            .iter()
            .map(|adaptation| {
                scope.spawn(move || {
                    let mut model = initial.clone();
                    let run = run_online(
                        &mut model,
                        frames.iter().cloned().map(Ok),
                        refine_cfg,
                        adaptation,
                        surrogate_cfg,
                    )?;
                    Ok((run, model))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phantom::{generate, generate_sequence, Issue, PhantomSpec, Schedule};
    use crate::refine::refine;
    use proptest::prelude::*;
    use std::cell::Cell;

    fn grid(h: usize, w: usize, v: &[f64]) -> Grid {
        Grid::new(h, w, v.to_vec()).unwrap()
    }

    #[test]
    fn bce_examples() {
        let p = grid(1, 1, &[0.5]);
        let one = BinaryMask::new(1, 1, vec![true]).unwrap();
        let zero = BinaryMask::new(1, 1, vec![false]).unwrap();
        assert!((bce_loss(&p, &one).unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((bce_loss(&p, &zero).unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
        let exact = grid(1, 2, &[1.0, 0.0]);
        let label = BinaryMask::new(1, 2, vec![true, false]).unwrap();
        let l = bce_loss(&exact, &label).unwrap();
        assert!((l - -(1.0 - PROB_EPS).ln()).abs() < 1e-15);
        assert!(matches!(bce_loss(&exact, &one), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn single_pixel_step() {
        let m = LogisticPixelModel::new([0.0; 3]).unwrap();
        let img = grid(1, 1, &[0.0]);
        let res = grid(1, 1, &[0.0]);
        let y = BinaryMask::new(1, 1, vec![true]).unwrap();
        let (loss, next) = logistic_step(&m, &img, &res, &y, 5e-4).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
        assert_eq!(next.weights(), [2.5e-4, 0.0, 0.0]);
        let (_, same) = logistic_step(&m, &img, &res, &y, 0.0).unwrap();
        assert_eq!(same, m);
        assert!(logistic_step(&m, &img, &res, &y, -1.0).is_err());
    }

    #[test]
    fn passthrough_reproduces_residual_threshold() {
        let res = grid(1, 5, &[0.0, 0.49999997, 0.5, 0.6, 1.0]);
        let img = grid(1, 5, &[100.0; 5]);
        let p = LogisticPixelModel::default().predict(&img, &res).unwrap();
        let hits: Vec<bool> = p.values().iter().map(|&v| v >= 0.5).collect();
        assert_eq!(hits, [false, false, true, true, true]);
    }

    #[test]
    fn tta_config_bounds() {
        assert!(TtaConfig::new(0.0, BoundaryStrategy::S1).is_err());
        assert!(TtaConfig::new(1.0, BoundaryStrategy::S1).is_err());
        assert_eq!(TtaConfig::default().lr(), 5e-5);
        assert_eq!(
            Adaptation::from_lr(0.0, BoundaryStrategy::S1).unwrap(),
            Adaptation::Frozen
        );
    }

    fn numeric_gradient(m: &LogisticPixelModel, img: &Grid, res: &Grid, y: &BinaryMask) -> [f64; 3] {
        let mut g = [0.0; 3];
        for (k, gk) in g.iter_mut().enumerate() {
            let h = 1e-6 * m.weights()[k].abs().max(1.0);
            let mut plus = m.weights();
            let mut minus = m.weights();
            plus[k] += h;
            minus[k] -= h;
            let loss = |w| {
                let p = LogisticPixelModel::new(w).unwrap().predict(img, res).unwrap();
                bce_loss(&p, y).unwrap()
            };
            *gk = (loss(plus) - loss(minus)) / (2.0 * h);
        }
        g
    }

    proptest! {
        #[test]
        fn gradient_matches_finite_differences(
            w in prop::array::uniform3(-2.0f64..2.0),
            img in prop::collection::vec(0.0f64..1.0, 64),
            res in prop::collection::vec(0.0f64..1.0, 64),
            bits in prop::collection::vec(any::<bool>(), 64),
        ) {
            let m = LogisticPixelModel::new(w).unwrap();
            let (img, res) = (Grid::new(8, 8, img).unwrap(), Grid::new(8, 8, res).unwrap());
            let y = BinaryMask::new(8, 8, bits).unwrap();
            let (_, g) = m.loss_and_gradient(&img, &res, &y).unwrap();
            let fd = numeric_gradient(&m, &img, &res, &y);
            for k in 0..3 {
                let scale = g[k].abs().max(fd[k].abs()).max(1e-8);
                prop_assert!((g[k] - fd[k]).abs() / scale < 1e-4, "k={} {} vs {}", k, g[k], fd[k]);
            }
        }
    }

    struct Counting<'a> {
        inner: LogisticPixelModel,
        predicts: &'a Cell<usize>,
        steps: &'a Cell<usize>,
    }

    impl TrainableSegmenter for Counting<'_> {
        fn predict(&self, image: &Grid, residual: &Grid) -> Result<Grid> {
            self.predicts.set(self.predicts.get() + 1);
            self.inner.predict(image, residual)
        }
        fn step(&mut self, image: &Grid, residual: &Grid, label: &BinaryMask, lr: f64) -> Result<f64> {
            self.steps.set(self.steps.get() + 1);
            self.inner.step(image, residual, label, lr)
        }
    }

    fn phantom_inputs(count: usize) -> Vec<FrameInput> {
        let spec = PhantomSpec::default().with_issues(Issue::ALL);
        generate_sequence(&spec, count, Schedule::Random)
            .unwrap()
            .iter()
            .map(FrameInput::from_phantom)
            .collect()
    }

    #[test]
    fn each_frame_is_read_and_predicted_once() {
        let frames = phantom_inputs(6);
        let (predicts, steps, pulls) = (Cell::new(0), Cell::new(0), Cell::new(0));
        let mut model = Counting {
            inner: LogisticPixelModel::default(),
            predicts: &predicts,
            steps: &steps,
        };
        let adaptation = Adaptation::Online(TtaConfig::default());
        let iter = frames.iter().cloned().map(|f| {
            pulls.set(pulls.get() + 1);
            Ok(f)
        });
        let run = run_online(
            &mut model,
            iter,
            &RefineConfig::default(),
            &adaptation,
            &SurrogateConfig::default(),
        )
        .unwrap();
        assert_eq!((pulls.get(), predicts.get()), (6, 6));
        assert_eq!(steps.get(), run.frames.iter().filter(|f| f.updated).count());
        assert!(steps.get() <= 6);
    }

    #[test]
    fn frozen_run_equals_independent_refinement() {
        let frames = phantom_inputs(5);
        let mut model = LogisticPixelModel::default();
        let cfg = RefineConfig::default();
        let run = run_online(
            &mut model,
            frames.iter().cloned().map(Ok),
            &cfg,
            &Adaptation::Frozen,
            &SurrogateConfig::default(),
        )
        .unwrap();
        assert_eq!(model, LogisticPixelModel::default());
        for (f, rec) in frames.iter().zip(&run.frames) {
            let oriseg = residual_to_oriseg(&f.residual, &SurrogateConfig::default()).unwrap();
            let (h, w) = f.image.dims();
            let direct = refine(&oriseg, &f.ilm, &f.bm, &cfg, h, w).unwrap();
            assert_eq!(rec.outcome, direct);
            assert!(!rec.updated);
        }
    }

    #[test]
    fn single_frame_updates_once_after_predicting() {
        let frames = phantom_inputs(1);
        let initial = LogisticPixelModel::new([-8.0, 0.01, 16.0]).unwrap();
        let mut model = initial;
        let cfg = RefineConfig::default();
        let adaptation = Adaptation::Online(TtaConfig::new(1e-3, BoundaryStrategy::S1).unwrap());
        let run = run_online(
            &mut model,
            frames.iter().cloned().map(Ok),
            &cfg,
            &adaptation,
            &SurrogateConfig::default(),
        )
        .unwrap();
        let mut frozen = initial;
        let plain = run_online(
            &mut frozen,
            frames.iter().cloned().map(Ok),
            &cfg,
            &Adaptation::Frozen,
            &SurrogateConfig::default(),
        )
        .unwrap();
        assert_eq!(run.frames[0].outcome, plain.frames[0].outcome);
        assert!(run.frames[0].updated);
        let (_, expected) = logistic_step(
            &initial,
            &frames[0].image,
            &frames[0].residual,
            &run.frames[0].outcome.mask,
            1e-3,
        )
        .unwrap();
        assert_eq!(model, expected);
    }

    #[test]
    fn degenerate_frames_skip_the_update() {
        let mut f = FrameInput::from_phantom(&generate(&PhantomSpec::default(), 0).unwrap());
        f.residual = Grid::filled(96, 128, 0.0).unwrap();
        let mut model = LogisticPixelModel::default();
        let adaptation = Adaptation::Online(TtaConfig::default());
        let run = run_online(
            &mut model,
            [Ok(f)],
            &RefineConfig::default(),
            &adaptation,
            &SurrogateConfig::default(),
        )
        .unwrap();
        assert_eq!(run.skipped, ["000"]);
        assert!(!run.frames[0].updated);
        assert_eq!(model, LogisticPixelModel::default());
    }

    #[test]
    fn small_step_does_not_increase_loss() {
        for f in phantom_inputs(10) {
            let model = LogisticPixelModel::new([-6.0, -0.01, 14.0]).unwrap();
            let label = f.residual.values().iter().map(|&r| r >= 0.5).collect();
            let label = BinaryMask::new(96, 128, label).unwrap();
            let (before, next) = logistic_step(&model, &f.image, &f.residual, &label, 1e-6).unwrap();
            let (after, _) = next.loss_and_gradient(&f.image, &f.residual, &label).unwrap();
            assert!(after <= before);
        }
    }

    #[test]
    fn sweep_runs_are_independent() {
        let frames = phantom_inputs(4);
        let model = LogisticPixelModel::new([-7.0, -0.01, 16.0]).unwrap();
        let cfg = RefineConfig::default();
        let runs = sweep(
            &model,
            &frames,
            &[0.0, 1e-4],
            &cfg,
            BoundaryStrategy::S1,
            &SurrogateConfig::default(),
        )
        .unwrap();
        assert_eq!(runs.iter().map(|r| r.0.lr).collect::<Vec<_>>(), [0.0, 1e-4]);
        assert_eq!(runs[0].1, model);
        let mut alone = model;
        let adaptation = Adaptation::Online(TtaConfig::new(1e-4, BoundaryStrategy::S1).unwrap());
        let solo = run_online(
            &mut alone,
            frames.iter().cloned().map(Ok),
            &cfg,
            &adaptation,
            &SurrogateConfig::default(),
        )
        .unwrap();
        assert_eq!(runs[1], (solo, alone));
    }
}
