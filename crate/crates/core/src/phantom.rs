//! Deterministic synthetic B-scans with known edema ground truth.
//!
//! Each frame has a smooth ILM above a BM that is its own lower convex
//! envelope, an edema area spanning the full ILM–BM band over a column
//! interval, a residual map that lights up an evidence region, and a coarse
//! mask (`oriseg_seed`) equal to that evidence region. Without injected
//! issues the evidence region is the ground truth; each [`Issue`] removes
//! part of it in the way the corresponding failure mode does.
//!
//! All randomness comes from [`CounterRng`] keyed by `(seed, frame_index,
//! stream)`, so a frame is a pure function of its spec and index.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::{write_grid, write_layers, write_pgm};
use crate::layers::{convex_envelope_bm, rasterize_band, validate_layers, LayerCurve, LayerPair};
use crate::raster::{BinaryMask, Grid};
use crate::rng::CounterRng;

const STREAM_ILM: u64 = 1;
const STREAM_BM: u64 = 2;
const STREAM_SPAN: u64 = 3;
const STREAM_INJECT: u64 = 4;
const STREAM_RESIDUAL: u64 = 5;
const STREAM_IMAGE: u64 = 6;
const STREAM_SCHEDULE: u64 = 7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Issue {
    /// BM pulled upward over a sub-span; the coarse mask stops at it.
    BmElevation,
    /// Coarse mask's upper boundary sits below ILM by more than the tolerance.
    TopUndershoot,
    /// Coarse mask's lower boundary sits above BM by more than the tolerance.
    BottomDeviation,
    /// Lateral boundaries slanted so same-side corners are `dx` apart.
    DxSkew,
}

impl Issue {
    pub const ALL: [Issue; 4] = [
        Issue::BmElevation,
        Issue::TopUndershoot,
        Issue::BottomDeviation,
        Issue::DxSkew,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Issue::BmElevation => "bm_elevation",
            Issue::TopUndershoot => "top_undershoot",
            Issue::BottomDeviation => "bottom_deviation",
            Issue::DxSkew => "dx_skew",
        }
    }
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Issue {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Issue::ALL
            .into_iter()
            .find(|i| i.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown issue {s:?}")))
    }
}

/// `row(x) = c0 + c1*t + c2*t^2` with `t` running from -1 at the left edge to
/// 1 at the right edge, plus smooth noise of the given amplitude.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveParams {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub noise_amplitude: f64,
}

impl CurveParams {
    fn base(&self, x: usize, width: usize) -> f64 {
        let c = (width as f64 - 1.0) / 2.0;
        let t = if width > 1 { (x as f64 - c) / c } else { 0.0 };
        self.c0 + self.c1 * t + self.c2 * t * t
    }

    fn sample(&self, width: usize, rng: &mut CounterRng) -> Vec<f64> {
        let noise = smooth_noise(width, self.noise_amplitude, rng);
        (0..width).map(|x| self.base(x, width) + noise[x]).collect()
    }
}

/// Three sinusoids with periods `width / k`, weights `1/k` and random phases,
/// scaled so the weights sum to `amplitude`.
fn smooth_noise(width: usize, amplitude: f64, rng: &mut CounterRng) -> Vec<f64> {
    let tau = std::f64::consts::TAU;
    let phases: Vec<f64> = (0..3).map(|_| rng.uniform(0.0, tau)).collect();
    let norm: f64 = (1..=3).map(|k| 1.0 / k as f64).sum();
    (0..width)
        .map(|x| {
            let s: f64 = (1..=3)
                .map(|k| {
                    let k = k as f64;
                    (tau * k * x as f64 / width as f64 + phases[k as usize - 1]).sin() / k
                })
                .sum();
            amplitude * s / norm
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InjectionParams {
    /// Peak BM lift in pixels, drawn uniformly from `[lo, hi)`.
    pub elevation_px: (f64, f64),
    /// Width in columns of the lifted BM stretch, inclusive range.
    pub elevation_columns: (usize, usize),
    /// Extra pixels beyond the tolerance for undershoot and deviation.
    pub margin_px: usize,
    /// Corner offset for the skew, inclusive range.
    pub skew_px: (usize, usize),
}

impl Default for InjectionParams {
    fn default() -> Self {
        Self {
            elevation_px: (8.0, 15.0),
            elevation_columns: (12, 24),
            margin_px: 3,
            skew_px: (5, 15),
        }
    }
}

/// Mean intensity of each image region before noise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Intensities {
    pub vitreous: f64,
    pub retina: f64,
    pub fluid: f64,
    pub choroid: f64,
}

impl Default for Intensities {
    fn default() -> Self {
        Self {
            vitreous: 110.0,
            retina: 150.0,
            fluid: 50.0,
            choroid: 120.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub height: usize,
    pub width: usize,
    pub seed: u64,
    pub ilm: CurveParams,
    pub bm: CurveParams,
    /// Edema columns `(x0, x1)` before jitter.
    pub edema_span: (usize, usize),
    /// Each end of the span moves by up to this many columns per frame.
    pub span_jitter: usize,
    pub issue_flags: BTreeSet<Issue>,
    /// Frames with index `>= shift_at` get `shift_offset` added to the image.
    pub shift_at: Option<usize>,
    pub shift_offset: f64,
    /// Half-width of the uniform image noise.
    pub noise_level: f64,
    /// Corner tolerance the injectors are sized against.
    pub tolerance_px: f64,
    pub injection: InjectionParams,
    pub intensities: Intensities,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            height: 96,
            width: 128,
            seed: 0,
            ilm: CurveParams {
                c0: 30.0,
                c1: 0.0,
                c2: 4.0,
                noise_amplitude: 1.5,
            },
            bm: CurveParams {
                c0: 62.0,
                c1: 0.0,
                c2: -4.0,
                noise_amplitude: 0.5,
            },
            edema_span: (40, 88),
            span_jitter: 6,
            issue_flags: BTreeSet::new(),
            shift_at: None,
            shift_offset: 60.0,
            noise_level: 12.0,
            tolerance_px: 2.0,
            injection: InjectionParams::default(),
            intensities: Intensities::default(),
        }
    }
}

impl PhantomSpec {
    /// Default geometry stretched to a `height` x `width` raster.
    pub fn for_size(height: usize, width: usize) -> Self {
        let d = Self::default();
        let sy = height as f64 / d.height as f64;
        let sx = width as f64 / d.width as f64;
        let scale = |c: CurveParams| CurveParams {
            c0: c.c0 * sy,
            c2: c.c2 * sy,
            ..c
        };
        let col = |x: usize| (x as f64 * sx).round() as usize;
        Self {
            height,
            width,
            ilm: scale(d.ilm),
            bm: scale(d.bm),
            edema_span: (col(d.edema_span.0), col(d.edema_span.1)),
            span_jitter: col(d.span_jitter),
            ..d
        }
    }

    pub fn with_issues(mut self, issues: impl IntoIterator<Item = Issue>) -> Self {
        self.issue_flags = issues.into_iter().collect();
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.height == 0 || self.width == 0 {
            return Err(Error::InvalidDimensions {
                height: self.height,
                width: self.width,
            });
        }
        let (x0, x1) = self.edema_span;
        if x0 > x1 || x1 >= self.width {
            return bad("edema span must satisfy x0 <= x1 < width");
        }
        let reals = [
            self.ilm.c0,
            self.ilm.c1,
            self.ilm.c2,
            self.bm.c0,
            self.bm.c1,
            self.bm.c2,
            self.shift_offset,
            self.injection.elevation_px.0,
            self.injection.elevation_px.1,
        ];
        if reals.iter().any(|v| !v.is_finite()) {
            return bad("curve, shift and elevation parameters must be finite");
        }
        for v in [
            self.ilm.noise_amplitude,
            self.bm.noise_amplitude,
            self.noise_level,
            self.tolerance_px,
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad("noise amplitudes and tolerance must be finite and non-negative");
            }
        }
        let inj = &self.injection;
        if !(inj.elevation_px.0 > 0.0 && inj.elevation_px.0 <= inj.elevation_px.1) {
            return bad("elevation range must be positive and ordered");
        }
        if inj.elevation_columns.0 < 3 || inj.elevation_columns.0 > inj.elevation_columns.1 {
            return bad("elevation columns must be at least 3 and ordered");
        }
        if inj.skew_px.0 == 0 || inj.skew_px.0 > inj.skew_px.1 {
            return bad("skew range must be positive and ordered");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Elevation {
    pub x_start: usize,
    pub x_end: usize,
    pub peak_px: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skew {
    pub dx: usize,
    /// Whether the top edge is the narrower one.
    pub top_inner: bool,
}

/// What the injectors actually did to one frame.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InjectionRecord {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elevation: Option<Elevation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub undershoot_px: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deviation_px: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skew: Option<Skew>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhantomFrame {
    pub index: usize,
    pub image: Grid,
    pub residual: Grid,
    pub ilm_gt: LayerCurve,
    pub bm_gt: LayerCurve,
    pub ilm_obs: LayerCurve,
    pub bm_obs: LayerCurve,
    pub ea_gt: BinaryMask,
    pub oriseg_seed: BinaryMask,
    pub flags: BTreeSet<Issue>,
    pub shifted: bool,
    pub span: (usize, usize),
    pub injections: InjectionRecord,
}

impl PhantomFrame {
    pub fn gt_layers(&self) -> LayerPair {
        validate_layers(
            self.ilm_gt.clone(),
            self.bm_gt.clone(),
            self.image.height(),
            self.image.width(),
        )
        .expect("generator validated the ground-truth layers")
    }
}

fn f32_round(v: f64) -> f64 {
    v as f32 as f64
}

/// Builds frame `frame_index` of `spec`.
pub fn generate(spec: &PhantomSpec, frame_index: usize) -> Result<PhantomFrame> {
    spec.validate()?;
    let infeasible = |reason: String| Error::SpecInfeasible {
        frame: Some(frame_index),
        reason,
    };
    let (h, w) = (spec.height, spec.width);
    let stream = |id| CounterRng::new(spec.seed, frame_index as u64, id);

    let ilm_gt = LayerCurve::new(spec.ilm.sample(w, &mut stream(STREAM_ILM)))?;
    let bm_gt = convex_envelope_bm(&LayerCurve::new(spec.bm.sample(w, &mut stream(STREAM_BM)))?);
    let gt = validate_layers(ilm_gt.clone(), bm_gt.clone(), h, w).map_err(|e| infeasible(e.to_string()))?;

    let mut span_rng = stream(STREAM_SPAN);
    let j = spec.span_jitter as i64;
    let clamp = |v: i64| v.clamp(0, w as i64 - 1) as usize;
    let x0 = clamp(spec.edema_span.0 as i64 + span_rng.int_inclusive(-j, j));
    let x1 = clamp(spec.edema_span.1 as i64 + span_rng.int_inclusive(-j, j));
    if x0 > x1 {
        return Err(infeasible(format!("jittered edema span ({x0}, {x1}) is empty")));
    }
    let ea_gt = rasterize_band(&gt, x0, x1, h)?;

    // evidence region as one row span per edema column
    let mut spans: Vec<(usize, usize)> = (x0..=x1)
        .map(|x| (gt.ilm().pixel_row(x), gt.bm().pixel_row(x)))
        .collect();
    let col = |x: usize| x - x0;
    let mut bm_obs = bm_gt.rows().to_vec();
    let mut record = InjectionRecord::default();
    let mut rng = stream(STREAM_INJECT);
    let tol_floor = spec.tolerance_px.floor() as usize;
    let inj = &spec.injection;

    if spec.issue_flags.contains(&Issue::BmElevation) {
        let interior = (x1 - x0).saturating_sub(1);
        let max_cols = inj.elevation_columns.1.min(interior);
        if max_cols < inj.elevation_columns.0 {
            return Err(infeasible(format!(
                "edema span ({x0}, {x1}) too narrow for a {}-column BM elevation",
                inj.elevation_columns.0
            )));
        }
        let len = rng.int_inclusive(inj.elevation_columns.0 as i64, max_cols as i64) as usize;
        let a = rng.int_inclusive(x0 as i64 + 1, (x1 - len) as i64) as usize;
        let b = a + len - 1;
        let peak = rng.uniform(inj.elevation_px.0, inj.elevation_px.1);
        for (x, row) in bm_obs.iter_mut().enumerate().take(b + 1).skip(a) {
            let t = (x - a) as f64 / (b - a) as f64;
            *row -= peak * (1.0 - (std::f64::consts::TAU * t).cos()) / 2.0;
        }
        let corrected = convex_envelope_bm(&LayerCurve::new(bm_obs.clone())?);
        let sag = (a..=b)
            .map(|x| (corrected.row(x) - bm_gt.row(x)).abs())
            .fold(0.0, f64::max);
        if sag > 1.0 {
            return Err(infeasible(format!(
                "BM curvature too strong: envelope misses ground truth by {sag:.3} px over the elevation"
            )));
        }
        for x in a..=b {
            let s = &mut spans[col(x)];
            s.1 = s.1.min(crate::layers::round_row(bm_obs[x]));
        }
        record.elevation = Some(Elevation {
            x_start: a,
            x_end: b,
            peak_px: peak,
        });
    }
    let offset = tol_floor + inj.margin_px;
    if spec.issue_flags.contains(&Issue::TopUndershoot) {
        for x in x0..=x1 {
            let s = &mut spans[col(x)];
            s.0 = s.0.max(gt.ilm().pixel_row(x) + offset);
        }
        record.undershoot_px = Some(offset);
    }
    if spec.issue_flags.contains(&Issue::BottomDeviation) {
        for x in x0..=x1 {
            let s = &mut spans[col(x)];
            s.1 = s.1.min(gt.bm().pixel_row(x).saturating_sub(offset));
        }
        record.deviation_px = Some(offset);
    }
    if spans.iter().any(|s| s.0 > s.1) {
        return Err(infeasible(
            "retina too thin for the requested undershoot/deviation".into(),
        ));
    }
    if spec.issue_flags.contains(&Issue::DxSkew) {
        let dx = rng.int_inclusive(inj.skew_px.0 as i64, inj.skew_px.1 as i64) as usize;
        if x1 - x0 < dx {
            return Err(infeasible(format!("edema span ({x0}, {x1}) narrower than skew {dx}")));
        }
        let top_inner = rng.chance(0.5);
        // k in 1..=dx counts columns from the inner corner outward
        let lift = |s: (usize, usize), k: usize| {
            let depth = s.1 - s.0;
            let slope = (depth * k).div_ceil(dx);
            slope.max(tol_floor + 1).min(depth)
        };
        for k in 1..=dx {
            let left = x0 + dx - k;
            let right = x1 + k - dx;
            let (cut_top, cut_bottom) = if top_inner { (left, right) } else { (right, left) };
            let s = spans[col(cut_top)];
            spans[col(cut_top)].0 += lift(s, k);
            let s = spans[col(cut_bottom)];
            spans[col(cut_bottom)].1 -= lift(s, k);
        }
        record.skew = Some(Skew { dx, top_inner });
    }

    let seed_mask = BinaryMask::from_fn(h, w, |x, y| {
        (x0..=x1).contains(&x) && {
            let (t, b) = spans[col(x)];
            t <= y && y <= b
        }
    })?;

    let mut res_rng = stream(STREAM_RESIDUAL);
    let residual = Grid::from_fn(h, w, |x, y| {
        let u = res_rng.next_f64();
        f32_round(if seed_mask.get(x, y) { 0.6 + 0.4 * u } else { 0.25 * u })
    })?;

    let shifted = spec.shift_at.is_some_and(|s| frame_index >= s);
    let lum = spec.intensities;
    let mut img_rng = stream(STREAM_IMAGE);
    let image = Grid::from_fn(h, w, |x, y| {
        let base = if y < gt.ilm().pixel_row(x) {
            lum.vitreous
        } else if y > gt.bm().pixel_row(x) {
            lum.choroid
        } else if (x0..=x1).contains(&x) {
            lum.fluid
        } else {
            lum.retina
        };
        let noise = img_rng.uniform(-spec.noise_level, spec.noise_level);
        f32_round(base + noise + if shifted { spec.shift_offset } else { 0.0 })
    })?;

    let bm_obs = LayerCurve::new(bm_obs)?;
    validate_layers(ilm_gt.clone(), bm_obs.clone(), h, w).map_err(|e| infeasible(e.to_string()))?;

    Ok(PhantomFrame {
        index: frame_index,
        image,
        residual,
        ilm_obs: ilm_gt.clone(),
        bm_obs,
        ilm_gt,
        bm_gt,
        ea_gt,
        oriseg_seed: seed_mask,
        flags: spec.issue_flags.clone(),
        shifted,
        span: (x0, x1),
        injections: record,
    })
}

/// Which of the template's issue flags each frame of a suite carries.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    /// Every frame carries all flags.
    #[default]
    All,
    /// Odd frames carry all flags, even frames none.
    Alternate,
    /// Frame `i` carries only the `(i mod k)`-th of the `k` flags.
    Cycle,
    /// Each flag independently with probability 1/2, drawn per frame.
    Random,
}

impl Schedule {
    pub fn flags_for(self, template: &PhantomSpec, index: usize) -> BTreeSet<Issue> {
        let flags = &template.issue_flags;
        match self {
            Schedule::All => flags.clone(),
            Schedule::Alternate if index % 2 == 1 => flags.clone(),
            Schedule::Alternate => BTreeSet::new(),
            Schedule::Cycle if flags.is_empty() => BTreeSet::new(),
            Schedule::Cycle => flags.iter().copied().skip(index % flags.len()).take(1).collect(),
            Schedule::Random => {
                let mut rng = CounterRng::new(template.seed, index as u64, STREAM_SCHEDULE);
                flags.iter().copied().filter(|_| rng.chance(0.5)).collect()
            }
        }
    }
}

/// Frames `0..count` with per-frame flags from `schedule`.
pub fn generate_sequence(template: &PhantomSpec, count: usize, schedule: Schedule) -> Result<Vec<PhantomFrame>> {
    if count == 0 {
        return Err(Error::InvalidConfig("frame count must be at least 1".into()));
    }
    (0..count)
        .map(|i| {
            let spec = PhantomSpec {
                issue_flags: schedule.flags_for(template, i),
                ..template.clone()
            };
            generate(&spec, i)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameFiles {
    pub image: String,
    pub residual: String,
    pub layers: String,
    pub gt: String,
    pub seed: String,
}

impl FrameFiles {
    pub fn for_id(id: &str) -> Self {
        Self {
            image: format!("{id}.f32"),
            residual: format!("{id}_residual.f32"),
            layers: format!("{id}_layers.csv"),
            gt: format!("{id}_gt.pgm"),
            seed: format!("{id}_seed.pgm"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestFrame {
    pub index: usize,
    pub flags: BTreeSet<Issue>,
    pub shifted: bool,
    pub span: (usize, usize),
    pub injections: InjectionRecord,
    pub files: FrameFiles,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub spec: PhantomSpec,
    pub schedule: Schedule,
    pub frames: Vec<ManifestFrame>,
}

pub fn frame_id(index: usize) -> String {
    format!("{index:03}")
}

/// Writes one frame's files into `dir`.
pub fn write_frame(dir: &Path, frame: &PhantomFrame) -> Result<FrameFiles> {
    let files = FrameFiles::for_id(&frame_id(frame.index));
    write_grid(&dir.join(&files.image), &frame.image)?;
    write_grid(&dir.join(&files.residual), &frame.residual)?;
    write_layers(&dir.join(&files.layers), &frame.ilm_obs, &frame.bm_obs)?;
    write_pgm(&dir.join(&files.gt), &frame.ea_gt)?;
    write_pgm(&dir.join(&files.seed), &frame.oriseg_seed)?;
    Ok(files)
}

/// Generates a suite into `dir` and writes `manifest.json`. Returns the
/// manifest path.
pub fn generate_suite(template: &PhantomSpec, count: usize, schedule: Schedule, dir: &Path) -> Result<PathBuf> {
    let frames = generate_sequence(template, count, schedule)?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(frames.len());
    for frame in &frames {
        let files = write_frame(dir, frame)?;
        entries.push(ManifestFrame {
            index: frame.index,
            flags: frame.flags.clone(),
            shifted: frame.shifted,
            span: frame.span,
            injections: frame.injections,
            files,
        });
    }
    let manifest = Manifest {
        spec: template.clone(),
        schedule,
        frames: entries,
    };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}
