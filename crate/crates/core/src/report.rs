//! Run summaries of online adaptation and the learning-rate comparison
//! table built from them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{evaluate, MeanStd, MetricSet, RateMode};
use crate::raster::BinaryMask;
use crate::refine::BoundaryStrategy;
use crate::tta::OnlineRun;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub dsc: f64,
    pub iou: f64,
    pub fnr: f64,
    pub fpr: f64,
}

impl From<MetricSet> for Scores {
    fn from(m: MetricSet) -> Self {
        Self {
            dsc: m.dsc,
            iou: m.iou,
            fnr: m.fnr,
            fpr: m.fpr,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameSummary {
    pub id: String,
    pub loss: f64,
    pub updated: bool,
    pub degenerate: bool,
    pub w_left: usize,
    pub w_right: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<Scores>,
}

/// The `summary.json` of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub lr: f64,
    /// `lr == 0`: no updates, the plain refinement pipeline.
    pub baseline: bool,
    pub strategy: BoundaryStrategy,
    pub pseudo_label_strategy: BoundaryStrategy,
    pub tolerance_px: f64,
    pub mode: RateMode,
    pub initial_weights: [f64; 3],
    pub final_weights: [f64; 3],
    pub frames: Vec<FrameSummary>,
    pub skipped: Vec<String>,
}

/// Settings recorded alongside a run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunSettings {
    pub strategy: BoundaryStrategy,
    pub pseudo_label_strategy: BoundaryStrategy,
    pub tolerance_px: f64,
    pub mode: RateMode,
    pub initial_weights: [f64; 3],
    pub final_weights: [f64; 3],
}

impl RunSummary {
    /// `gts[i]` is the ground truth of frame `i`, if known.
    pub fn new(run: &OnlineRun, gts: &[Option<BinaryMask>], settings: &RunSettings) -> Result<Self> {
        if gts.len() != run.frames.len() {
            return Err(Error::LengthMismatch {
                expected: run.frames.len(),
                actual: gts.len(),
            });
        }
        let frames = run
            .frames
            .iter()
            .zip(gts)
            .map(|(f, gt)| {
                let metrics = gt
                    .as_ref()
                    .map(|gt| evaluate(&f.outcome.mask, gt, settings.mode).map(Scores::from))
                    .transpose()?;
                Ok(FrameSummary {
                    id: f.id.clone(),
                    loss: f.loss,
                    updated: f.updated,
                    degenerate: f.outcome.degenerate,
                    w_left: f.outcome.w_left,
                    w_right: f.outcome.w_right,
                    metrics,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            lr: run.lr,
            baseline: run.lr == 0.0,
            strategy: settings.strategy,
            pseudo_label_strategy: settings.pseudo_label_strategy,
            tolerance_px: settings.tolerance_px,
            mode: settings.mode,
            initial_weights: settings.initial_weights,
            final_weights: settings.final_weights,
            frames,
            skipped: run.skipped.clone(),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub lr: f64,
    pub baseline: bool,
    pub n: usize,
    pub dsc: MeanStd,
    pub iou: MeanStd,
    pub fnr: MeanStd,
    pub fpr: MeanStd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    Flat,
    NonIncreasing,
    NonDecreasing,
    Mixed,
}

impl Trend {
    pub fn of(values: &[f64]) -> Self {
        let diffs: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
        let up = diffs.iter().any(|&d| d > 0.0);
        let down = diffs.iter().any(|&d| d < 0.0);
        match (up, down) {
            (false, false) => Trend::Flat,
            (false, true) => Trend::NonIncreasing,
            (true, false) => Trend::NonDecreasing,
            (true, true) => Trend::Mixed,
        }
    }
}

/// Direction of mean FNR and FPR as the learning rate grows (rows in
/// table order).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrendReport {
    pub fnr: Trend,
    pub fpr: Trend,
    /// FNR never rises and FPR never falls.
    pub fnr_down_fpr_up: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    /// Frames before this position in each run were left out.
    pub from_frame: usize,
    pub rows: Vec<ReportRow>,
    pub trend: TrendReport,
}

fn stat(frames: &[&Scores], get: fn(&Scores) -> f64) -> MeanStd {
    MeanStd::of(&frames.iter().map(|s| get(s)).collect::<Vec<_>>()).expect("non-empty cohort")
}

/// One row per run, baseline first and then by ascending learning rate.
pub fn build_report(runs: &[RunSummary], from_frame: usize) -> Result<Report> {
    if runs.is_empty() {
        return Err(Error::EmptyCohort);
    }
    let mut rows = runs
        .iter()
        .map(|run| {
            let scores = run
                .frames
                .iter()
                .skip(from_frame)
                .map(|f| {
                    f.metrics.as_ref().ok_or_else(|| {
                        Error::InvalidConfig(format!("run lr={} frame {} has no ground-truth metrics", run.lr, f.id))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            if scores.is_empty() {
                return Err(Error::EmptyCohort);
            }
            Ok(ReportRow {
                lr: run.lr,
                baseline: run.baseline,
                n: scores.len(),
                dsc: stat(&scores, |s| s.dsc),
                iou: stat(&scores, |s| s.iou),
                fnr: stat(&scores, |s| s.fnr),
                fpr: stat(&scores, |s| s.fpr),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| b.baseline.cmp(&a.baseline).then(a.lr.total_cmp(&b.lr)));
    let fnr = Trend::of(&rows.iter().map(|r| r.fnr.mean).collect::<Vec<_>>());
    let fpr = Trend::of(&rows.iter().map(|r| r.fpr.mean).collect::<Vec<_>>());
    let fnr_down_fpr_up =
        matches!(fnr, Trend::Flat | Trend::NonIncreasing) && matches!(fpr, Trend::Flat | Trend::NonDecreasing);
    Ok(Report {
        from_frame,
        rows,
        trend: TrendReport {
            fnr,
            fpr,
            fnr_down_fpr_up,
        },
    })
}

pub fn lr_label(lr: f64, baseline: bool) -> String {
    if baseline {
        "baseline (lr=0)".to_string()
    } else {
        format!("{lr:e}")
    }
}

impl Report {
    /// Aligned table in percent, followed by the trend line.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{:<16} {:>5}  {:<15} {:<15} {:<15} {:<15}\n",
            "lr", "n", "DSC(%)", "IoU(%)", "FNR(%)", "FPR(%)"
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{:<16} {:>5}  {:<15} {:<15} {:<15} {:<15}\n",
                lr_label(r.lr, r.baseline),
                r.n,
                r.dsc.percent(),
                r.iou.percent(),
                r.fnr.percent(),
                r.fpr.percent()
            ));
        }
        let name = |t: Trend| {
            serde_json::to_value(t)
                .expect("trend serializes")
                .as_str()
                .unwrap_or_default()
                .to_string()
        };
        out.push_str(&format!(
            "trend with increasing lr: FNR {}, FPR {}\n",
            name(self.trend.fnr),
            name(self.trend.fpr)
        ));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn summary(lr: f64, dsc: &[f64], fnr: f64, fpr: f64) -> RunSummary {
        RunSummary {
            lr,
            baseline: lr == 0.0,
            strategy: BoundaryStrategy::S1,
            pseudo_label_strategy: BoundaryStrategy::S1,
            tolerance_px: 2.0,
            mode: RateMode::GtNormalized,
            initial_weights: [0.0; 3],
            final_weights: [0.0; 3],
            frames: dsc
                .iter()
                .enumerate()
                .map(|(i, &d)| FrameSummary {
                    id: format!("{i:03}"),
                    loss: 0.1,
                    updated: lr > 0.0,
                    degenerate: false,
                    w_left: 0,
                    w_right: 1,
                    metrics: Some(Scores {
                        dsc: d,
                        iou: d,
                        fnr,
                        fpr,
                    }),
                })
                .collect(),
            skipped: vec![],
        }
    }

    #[test]
    fn trends() {
        assert_eq!(Trend::of(&[0.3, 0.2, 0.2]), Trend::NonIncreasing);
        assert_eq!(Trend::of(&[0.1, 0.2]), Trend::NonDecreasing);
        assert_eq!(Trend::of(&[0.1, 0.1]), Trend::Flat);
        assert_eq!(Trend::of(&[0.1]), Trend::Flat);
        assert_eq!(Trend::of(&[0.1, 0.3, 0.2]), Trend::Mixed);
    }

    #[test]
    fn rows_are_ordered_baseline_first() {
        let runs = [
            summary(5e-4, &[0.9], 0.05, 0.2),
            summary(1e-5, &[0.8], 0.2, 0.1),
            summary(0.0, &[0.7], 0.3, 0.1),
            summary(1e-4, &[0.85], 0.1, 0.15),
        ];
        let r = build_report(&runs, 0).unwrap();
        let lrs: Vec<f64> = r.rows.iter().map(|r| r.lr).collect();
        assert_eq!(lrs, [0.0, 1e-5, 1e-4, 5e-4]);
        assert_eq!(r.trend.fnr, Trend::NonIncreasing);
        assert_eq!(r.trend.fpr, Trend::NonDecreasing);
        assert!(r.trend.fnr_down_fpr_up);
        let text = r.to_text();
        assert!(text.lines().nth(1).unwrap().starts_with("baseline (lr=0)"));
        assert!(text.contains("70.00 ± 0.00"));
    }

    #[test]
    fn from_frame_and_errors() {
        let run = summary(0.0, &[0.0, 1.0, 0.8], 0.0, 0.0);
        let r = build_report(std::slice::from_ref(&run), 1).unwrap();
        assert_eq!(r.rows[0].n, 2);
        assert!((r.rows[0].dsc.mean - 0.9).abs() < 1e-12);
        assert!(matches!(
            build_report(std::slice::from_ref(&run), 3),
            Err(Error::EmptyCohort)
        ));
        assert!(matches!(build_report(&[], 0), Err(Error::EmptyCohort)));
        let mut bare = run;
        bare.frames[2].metrics = None;
        assert!(matches!(build_report(&[bare], 0), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn summary_json_round_trip() {
        let s = summary(5e-5, &[0.5], 0.5, 0.5);
        let text = serde_json::to_string(&s).unwrap();
        assert!(text.contains(r#""strategy":"S1""#));
        assert_eq!(serde_json::from_str::<RunSummary>(&text).unwrap(), s);
    }
}
