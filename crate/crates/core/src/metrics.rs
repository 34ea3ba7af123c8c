//! Pixel-level segmentation metrics and mean ± std aggregation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::BinaryMask;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn gt_positive(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn pred_positive(&self) -> u64 {
        self.tp + self.fp
    }
}

/// Denominator used for FPR. FNR is always `fn / (tp + fn)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateMode {
    /// `fpr = min(1, fp / (tp + fn))`, i.e. relative to ground-truth size.
    #[default]
    GtNormalized,
    /// `fpr = fp / (tp + fp)`.
    PredNormalized,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub dsc: f64,
    pub iou: f64,
    pub fnr: f64,
    pub fpr: f64,
    pub mode: RateMode,
}

pub fn confusion(pred: &BinaryMask, gt: &BinaryMask) -> Result<ConfusionCounts> {
    pred.ensure_same_dims(gt.dims())?;
    let mut c = ConfusionCounts::default();
    for (&p, &g) in pred.bits().iter().zip(gt.bits()) {
        match (p, g) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

/// `num / den`, with `0/0 = 0` and `n/0 = 1` for `n > 0`.
fn ratio(num: u64, den: u64) -> f64 {
    match (num, den) {
        (0, 0) => 0.0,
        (_, 0) => 1.0,
        _ => num as f64 / den as f64,
    }
}

pub fn metric_set(c: &ConfusionCounts, mode: RateMode) -> MetricSet {
    if c.tp + c.fp + c.fn_ == 0 {
        return MetricSet {
            dsc: 1.0,
            iou: 1.0,
            fnr: 0.0,
            fpr: 0.0,
            mode,
        };
    }
    let fpr_den = match mode {
        RateMode::GtNormalized => c.gt_positive(),
        RateMode::PredNormalized => c.pred_positive(),
    };
    MetricSet {
        dsc: ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_),
        iou: ratio(c.tp, c.tp + c.fp + c.fn_),
        fnr: ratio(c.fn_, c.gt_positive()),
        // fp can exceed the ground-truth size; saturate so rates stay in [0, 1]
        fpr: ratio(c.fp, fpr_den).min(1.0),
        mode,
    }
}

pub fn evaluate(pred: &BinaryMask, gt: &BinaryMask, mode: RateMode) -> Result<MetricSet> {
    Ok(metric_set(&confusion(pred, gt)?, mode))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Arithmetic mean and sample standard deviation (`n - 1`; 0 for one value).
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() == 1 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Some(Self { mean, std })
    }

    /// `"mean ± std"` in percent with two decimals.
    pub fn percent(&self) -> String {
        format!("{:.2} ± {:.2}", self.mean * 100.0, self.std * 100.0)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AggregateMetrics {
    pub dsc: MeanStd,
    pub iou: MeanStd,
    pub fnr: MeanStd,
    pub fpr: MeanStd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameMetrics {
    pub id: String,
    pub dsc: f64,
    pub iou: f64,
    pub fnr: f64,
    pub fpr: f64,
    /// Whether the ground truth of this frame had no foreground.
    #[serde(skip)]
    pub empty_gt: bool,
}

impl FrameMetrics {
    pub fn new(id: impl Into<String>, m: &MetricSet, empty_gt: bool) -> Self {
        Self {
            id: id.into(),
            dsc: m.dsc,
            iou: m.iou,
            fnr: m.fnr,
            fpr: m.fpr,
            empty_gt,
        }
    }
}

/// Evaluation report; the JSON written by the `eval` command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub mode: RateMode,
    pub exclude_empty_gt: bool,
    pub n: usize,
    pub frames: Vec<FrameMetrics>,
    pub aggregate: AggregateMetrics,
}

/// Aggregates per-frame metrics. With `exclude_empty_gt`, frames whose
/// ground truth is empty are dropped before averaging (they stay listed).
pub fn aggregate(frames: &[FrameMetrics], mode: RateMode, exclude_empty_gt: bool) -> Result<AggregateReport> {
    let kept: Vec<&FrameMetrics> = frames.iter().filter(|f| !(exclude_empty_gt && f.empty_gt)).collect();
    let stat = |get: fn(&FrameMetrics) -> f64| {
        let v: Vec<f64> = kept.iter().map(|f| get(f)).collect();
        MeanStd::of(&v).ok_or(Error::EmptyCohort)
    };
    let aggregate = AggregateMetrics {
        dsc: stat(|f| f.dsc)?,
        iou: stat(|f| f.iou)?,
        fnr: stat(|f| f.fnr)?,
        fpr: stat(|f| f.fpr)?,
    };
    Ok(AggregateReport {
        mode,
        exclude_empty_gt,
        n: kept.len(),
        frames: frames.to_vec(),
        aggregate,
    })
}

impl AggregateReport {
    /// Table-style text block with percent values.
    pub fn to_text(&self) -> String {
        let a = &self.aggregate;
        let mut out = format!("n = {}  (mode: {})\n", self.n, mode_name(self.mode));
        for (name, m) in [("DSC", a.dsc), ("IoU", a.iou), ("FNR", a.fnr), ("FPR", a.fpr)] {
            out.push_str(&format!("{name:<4} {}\n", m.percent()));
        }
        out
    }
}

pub fn mode_name(mode: RateMode) -> &'static str {
    match mode {
        RateMode::GtNormalized => "gt_normalized",
        RateMode::PredNormalized => "pred_normalized",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mask4(pixels: &[(usize, usize)]) -> BinaryMask {
        BinaryMask::from_fn(4, 4, |x, y| pixels.contains(&(x, y))).unwrap()
    }

    fn counts(tp: u64, fp: u64, fn_: u64, tn: u64) -> ConfusionCounts {
        ConfusionCounts { tp, fp, fn_, tn }
    }

    #[test]
    fn confusion_examples() {
        let a = mask4(&[(0, 0), (1, 0), (0, 1), (1, 1)]);
        assert_eq!(confusion(&a, &a).unwrap(), counts(4, 0, 0, 12));
        let b = mask4(&[(2, 2), (3, 2), (2, 3), (3, 3)]);
        assert_eq!(confusion(&a, &b).unwrap(), counts(0, 4, 4, 8));
        let c = mask4(&[(1, 0), (1, 1), (2, 0), (2, 1)]);
        assert_eq!(confusion(&c, &a).unwrap(), counts(2, 2, 2, 10));
        let small = BinaryMask::empty(3, 4).unwrap();
        assert!(matches!(confusion(&a, &small), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn metric_examples() {
        let m = metric_set(&counts(2, 2, 2, 10), RateMode::GtNormalized);
        assert_eq!((m.dsc, m.fnr, m.fpr), (0.5, 0.5, 0.5));
        assert!((m.iou - 1.0 / 3.0).abs() < 1e-15);

        let m = metric_set(&counts(4, 0, 0, 12), RateMode::GtNormalized);
        assert_eq!((m.dsc, m.iou, m.fnr, m.fpr), (1.0, 1.0, 0.0, 0.0));
        let m = metric_set(&counts(0, 0, 0, 16), RateMode::PredNormalized);
        assert_eq!((m.dsc, m.iou, m.fnr, m.fpr), (1.0, 1.0, 0.0, 0.0));
        // prediction on a healthy frame: gt-normalized fpr has a zero denominator
        let m = metric_set(&counts(0, 3, 0, 13), RateMode::GtNormalized);
        assert_eq!((m.dsc, m.fnr, m.fpr), (0.0, 0.0, 1.0));
        // missed lesion: pred-normalized fpr has a zero denominator
        let m = metric_set(&counts(0, 0, 3, 13), RateMode::PredNormalized);
        assert_eq!((m.dsc, m.fnr, m.fpr), (0.0, 1.0, 0.0));
        let m = metric_set(&counts(1, 5, 1, 9), RateMode::GtNormalized);
        assert_eq!(m.fpr, 1.0);
        let m = metric_set(&counts(3, 1, 1, 9), RateMode::GtNormalized);
        assert_eq!(m.fpr, 0.25);
    }

    #[test]
    fn aggregate_examples() {
        let f = |d: f64, empty| FrameMetrics {
            id: String::new(),
            dsc: d,
            iou: d,
            fnr: 0.0,
            fpr: 0.0,
            empty_gt: empty,
        };
        let r = aggregate(&[f(0.8, false), f(1.0, false)], RateMode::GtNormalized, false).unwrap();
        assert!((r.aggregate.dsc.mean - 0.9).abs() < 1e-15);
        assert!((r.aggregate.dsc.std - 0.141421).abs() < 1e-6);
        let r = aggregate(&[f(0.7, false)], RateMode::GtNormalized, false).unwrap();
        assert_eq!(r.aggregate.dsc, MeanStd { mean: 0.7, std: 0.0 });
        let r = aggregate(&[f(0.7, false), f(1.0, true)], RateMode::GtNormalized, true).unwrap();
        assert_eq!((r.n, r.frames.len()), (1, 2));
        assert!(matches!(
            aggregate(&[f(1.0, true)], RateMode::GtNormalized, true),
            Err(Error::EmptyCohort)
        ));
        assert!(matches!(
            aggregate(&[], RateMode::GtNormalized, false),
            Err(Error::EmptyCohort)
        ));
    }

    #[test]
    fn report_json_and_text() {
        let m = metric_set(&counts(2, 2, 2, 10), RateMode::GtNormalized);
        let r = aggregate(&[FrameMetrics::new("000", &m, false)], m.mode, false).unwrap();
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["mode"], "gt_normalized");
        assert_eq!(v["frames"][0]["id"], "000");
        assert_eq!(v["aggregate"]["dsc"]["mean"], 0.5);
        assert!(r.to_text().contains("DSC  50.00 ± 0.00"));
    }

    fn all_metrics(m: &MetricSet) -> [f64; 4] {
        [m.dsc, m.iou, m.fnr, m.fpr]
    }

    proptest! {
        #[test]
        fn identities_hold_for_any_counts(tp in 0u64..50, fp in 0u64..50, fn_ in 0u64..50, tn in 0u64..50) {
            let c = counts(tp, fp, fn_, tn);
            for mode in [RateMode::GtNormalized, RateMode::PredNormalized] {
                let m = metric_set(&c, mode);
                prop_assert!(all_metrics(&m).iter().all(|v| (0.0..=1.0).contains(v)));
                prop_assert!((m.dsc - 2.0 * m.iou / (1.0 + m.iou)).abs() <= 1e-12);
            }
        }

        #[test]
        fn symmetry_and_role_swap(bits in prop::collection::vec((any::<bool>(), any::<bool>()), 64)) {
            let a = BinaryMask::new(8, 8, bits.iter().map(|b| b.0).collect()).unwrap();
            let b = BinaryMask::new(8, 8, bits.iter().map(|b| b.1).collect()).unwrap();
            let ab = evaluate(&a, &b, RateMode::GtNormalized).unwrap();
            let ba = evaluate(&b, &a, RateMode::PredNormalized).unwrap();
            prop_assert_eq!(ab.dsc, ba.dsc);
            prop_assert_eq!(ab.fnr, ba.fpr);
        }
    }
}
