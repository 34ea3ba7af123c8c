//! Command-line front end. [`run`] parses arguments, executes one
//! subcommand and returns the process exit code:
//! 0 on success (degenerate frames included), 2 on invalid input, 4 on I/O
//! failure.

use std::ffi::{OsStr, OsString};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::formats::{list_frames, read_grid, read_layers, read_pgm, write_pgm};
use crate::metrics::{aggregate, evaluate, FrameMetrics, RateMode};
use crate::phantom::{generate_suite, Issue, PhantomSpec, Schedule};
use crate::raster::BinaryMask;
use crate::refine::{refine, BoundaryStrategy, RefineConfig, RefineOutcome};
use crate::report::{build_report, RunSettings, RunSummary};
use crate::surrogate::{residual_to_oriseg, SurrogateConfig};
use crate::tta::{sweep, Adaptation, FrameInput, LogisticPixelModel, DEFAULT_LR, SWEEP_LEARNING_RATES};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "ea-refine",
    version,
    about = "Layer-guided edema mask refinement and online adaptation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic frame suite with a manifest.
    Synth(SynthArgs),
    /// Refine one coarse mask (or residual map) with layer curves.
    Refine(RefineArgs),
    /// Score predicted masks against ground truth.
    Eval(EvalArgs),
    /// Run online adaptation over a frame directory.
    Tta(TtaArgs),
    /// Compare run summaries in a learning-rate table.
    Report(ReportArgs),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    #[default]
    Text,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum ScheduleArg {
    #[default]
    All,
    Alternate,
    Cycle,
    Random,
}

impl From<ScheduleArg> for Schedule {
    fn from(s: ScheduleArg) -> Self {
        match s {
            ScheduleArg::All => Schedule::All,
            ScheduleArg::Alternate => Schedule::Alternate,
            ScheduleArg::Cycle => Schedule::Cycle,
            ScheduleArg::Random => Schedule::Random,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    #[default]
    GtNormalized,
    PredNormalized,
}

impl From<ModeArg> for RateMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::GtNormalized => RateMode::GtNormalized,
            ModeArg::PredNormalized => RateMode::PredNormalized,
        }
    }
}

fn parse_strategy(s: &str) -> std::result::Result<BoundaryStrategy, String> {
    s.parse::<u8>()
        .ok()
        .and_then(BoundaryStrategy::from_number)
        .ok_or_else(|| format!("strategy must be 1, 2 or 3, got {s:?}"))
}

fn parse_issue(s: &str) -> std::result::Result<Issue, String> {
    s.parse::<Issue>().map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Args)]
pub struct RefineFlags {
    /// Boundary strategy: 1 outermost, 2 innermost, 3 mean.
    #[arg(long, default_value = "1", value_parser = parse_strategy)]
    pub strategy: BoundaryStrategy,
    /// Corner tolerance in pixels.
    #[arg(long, default_value_t = 2.0)]
    pub tol: f64,
    /// Threshold applied to residual or probability maps.
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
}

impl RefineFlags {
    fn refine_config(&self) -> Result<RefineConfig> {
        let cfg = RefineConfig {
            strategy: self.strategy,
            tolerance_px: self.tol,
            ..RefineConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn surrogate_config(&self) -> Result<SurrogateConfig> {
        let cfg = SurrogateConfig {
            threshold: self.threshold,
            ..SurrogateConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 96)]
    pub height: usize,
    #[arg(long, default_value_t = 128)]
    pub width: usize,
    /// Comma-separated issues: bm_elevation, top_undershoot, bottom_deviation, dx_skew.
    #[arg(long, value_delimiter = ',', value_parser = parse_issue)]
    pub issues: Vec<Issue>,
    /// Which frames carry the issues.
    #[arg(long, value_enum, default_value_t = ScheduleArg::All)]
    pub schedule: ScheduleArg,
    /// First frame with the intensity shift.
    #[arg(long)]
    pub shift_at: Option<usize>,
    #[arg(long, default_value_t = 60.0)]
    pub shift_offset: f64,
    /// Corner tolerance the injected issues must defeat.
    #[arg(long, default_value_t = 2.0)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct RefineArgs {
    /// Coarse mask (binary PGM).
    #[arg(long, conflicts_with = "residual", required_unless_present = "residual")]
    pub oriseg: Option<PathBuf>,
    /// Residual map (f32 raster); thresholded into a coarse mask first.
    #[arg(long)]
    pub residual: Option<PathBuf>,
    #[arg(long)]
    pub layers: PathBuf,
    #[command(flatten)]
    pub flags: RefineFlags,
    /// Output prefix: writes `<out>_pred.pgm` and `<out>_prov.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Predicted mask file or directory of masks.
    #[arg(long)]
    pub pred: PathBuf,
    /// Ground-truth mask file or directory of masks.
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::GtNormalized)]
    pub mode: ModeArg,
    /// Leave frames with empty ground truth out of the averages.
    #[arg(long)]
    pub exclude_empty_gt: bool,
    #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
    pub format: OutputFormat,
    /// Also write the JSON report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TtaArgs {
    #[arg(long)]
    pub frames: PathBuf,
    /// Learning rate; 0 disables updates.
    #[arg(long, default_value_t = DEFAULT_LR, conflicts_with = "lr_sweep")]
    pub lr: f64,
    /// Run lr = 0 and each standard learning rate as separate runs.
    #[arg(long)]
    pub lr_sweep: bool,
    #[command(flatten)]
    pub flags: RefineFlags,
    /// Strategy used to build pseudo labels.
    #[arg(long, default_value = "1", value_parser = parse_strategy)]
    pub pseudo_strategy: BoundaryStrategy,
    /// Initial model weights as `{"weights": [bias, intensity, residual]}`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ModeArg::GtNormalized)]
    pub mode: ModeArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Run summary files.
    #[arg(long, num_args = 1.., required = true)]
    pub runs: Vec<PathBuf>,
    /// Skip this many leading frames of every run.
    #[arg(long, default_value_t = 0)]
    pub from_frame: usize,
    #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
    pub format: OutputFormat,
    /// Also write the JSON report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn exit_code(err: &Error) -> i32 {
    if err.is_io() {
        EXIT_IO
    } else {
        EXIT_INVALID
    }
}

/// Parses `args` (program name first), runs the command, and reports to
/// `out` / `err`. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match execute(&cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

pub fn execute(command: &Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Synth(a) => cmd_synth(a, out),
        Command::Refine(a) => cmd_refine(a, out),
        Command::Eval(a) => cmd_eval(a, out),
        Command::Tta(a) => cmd_tta(a, out),
        Command::Report(a) => cmd_report(a, out),
    }
}

fn say(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("report types serialize");
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Writes `<prefix>_pred.pgm` and `<prefix>_prov.json`.
pub fn write_outcome(prefix: &Path, outcome: &RefineOutcome) -> Result<PathBuf> {
    let pred = with_suffix(prefix, "_pred.pgm");
    write_pgm(&pred, &outcome.mask)?;
    write_json(&with_suffix(prefix, "_prov.json"), &outcome.provenance())?;
    Ok(pred)
}

pub fn cmd_synth(a: &SynthArgs, out: &mut dyn Write) -> Result<()> {
    let spec = PhantomSpec {
        seed: a.seed,
        issue_flags: a.issues.iter().copied().collect(),
        shift_at: a.shift_at,
        shift_offset: a.shift_offset,
        tolerance_px: a.tol,
        ..PhantomSpec::for_size(a.height, a.width)
    };
    let manifest = generate_suite(&spec, a.count, a.schedule.into(), &a.out)?;
    say(out, &format!("{}\n", manifest.display()))
}

pub fn cmd_refine(a: &RefineArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = a.flags.refine_config()?;
    let oriseg = match (&a.oriseg, &a.residual) {
        (Some(path), _) => read_pgm(path)?,
        (None, Some(path)) => residual_to_oriseg(&read_grid(path)?, &a.flags.surrogate_config()?)?,
        (None, None) => return Err(Error::InvalidConfig("one of --oriseg or --residual is required".into())),
    };
    let (ilm, bm) = read_layers(&a.layers)?;
    let outcome = refine(&oriseg, &ilm, &bm, &cfg, oriseg.height(), oriseg.width()).map_err(|e| match e {
        Error::WidthMismatch { .. } | Error::RowOutOfRange { .. } | Error::CurveCrossing(_) => {
            Error::format(&a.layers, e.to_string())
        }
        other => other,
    })?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    let pred = write_outcome(&a.out, &outcome)?;
    say(
        out,
        &format!(
            "{} w_left={} w_right={} degenerate={}\n",
            pred.display(),
            outcome.w_left,
            outcome.w_right,
            outcome.degenerate
        ),
    )
}

/// Frame id of a mask file: the file stem up to the first `_`.
fn mask_id(path: &Path) -> String {
    let stem = path.file_stem().and_then(OsStr::to_str).unwrap_or_default();
    stem.split('_').next().unwrap_or(stem).to_string()
}

/// Masks of a directory keyed by id. Files ending in `preferred` win when
/// any exist (e.g. `_gt.pgm` next to `_seed.pgm`).
fn masks_in(dir: &Path, preferred: &str) -> Result<Vec<(String, PathBuf)>> {
    let mut all = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "pgm") {
            all.push(path);
        }
    }
    let ends = |p: &PathBuf| {
        p.file_name()
            .and_then(OsStr::to_str)
            .is_some_and(|n| n.ends_with(preferred))
    };
    if all.iter().any(ends) {
        all.retain(ends);
    }
    let mut keyed: Vec<(String, PathBuf)> = all.into_iter().map(|p| (mask_id(&p), p)).collect();
    keyed.sort();
    if let Some(w) = keyed.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::format(dir, format!("two masks share id {:?}", w[0].0)));
    }
    Ok(keyed)
}

fn pair_masks(pred: &Path, gt: &Path) -> Result<Vec<(String, PathBuf, PathBuf)>> {
    match (pred.is_dir(), gt.is_dir()) {
        (false, false) => Ok(vec![(mask_id(pred), pred.to_path_buf(), gt.to_path_buf())]),
        (true, true) => {
            let preds = masks_in(pred, "_pred.pgm")?;
            let gts = masks_in(gt, "_gt.pgm")?;
            if preds.is_empty() {
                return Err(Error::format(pred, "no predicted masks"));
            }
            preds
                .into_iter()
                .map(|(id, p)| match gts.binary_search_by(|(g, _)| g.cmp(&id)) {
                    Ok(i) => Ok((id, p, gts[i].1.clone())),
                    Err(_) => Err(Error::format(gt, format!("no ground truth for frame {id}"))),
                })
                .collect()
        }
        _ => Err(Error::InvalidConfig(
            "--pred and --gt must both be files or both be directories".into(),
        )),
    }
}

pub fn cmd_eval(a: &EvalArgs, out: &mut dyn Write) -> Result<()> {
    let mode = RateMode::from(a.mode);
    let mut frames = Vec::new();
    for (id, pred, gt) in pair_masks(&a.pred, &a.gt)? {
        let p = read_pgm(&pred)?;
        let g = read_pgm(&gt)?;
        let m = evaluate(&p, &g, mode).map_err(|e| Error::format(&pred, e.to_string()))?;
        frames.push(FrameMetrics::new(id, &m, g.is_empty()));
    }
    let report = aggregate(&frames, mode, a.exclude_empty_gt)?;
    if let Some(path) = &a.out {
        write_json(path, &report)?;
    }
    match a.format {
        OutputFormat::Text => say(out, &report.to_text()),
        OutputFormat::Json => say(
            out,
            &(serde_json::to_string_pretty(&report).expect("report serializes") + "\n"),
        ),
    }
}

fn read_model(path: &Path) -> Result<LogisticPixelModel> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let model: LogisticPixelModel = serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
    LogisticPixelModel::new(model.weights()).map_err(|e| Error::format(path, e.to_string()))
}

/// Output directory name of a sweep run.
pub fn run_dir_name(lr: f64) -> String {
    if lr == 0.0 {
        "lr_0".to_string()
    } else {
        format!("lr_{lr:e}")
    }
}

pub fn cmd_tta(a: &TtaArgs, out: &mut dyn Write) -> Result<()> {
    let refine_cfg = a.flags.refine_config()?;
    let surrogate_cfg = a.flags.surrogate_config()?;
    let lrs: Vec<f64> = if a.lr_sweep {
        std::iter::once(0.0).chain(SWEEP_LEARNING_RATES).collect()
    } else {
        vec![a.lr]
    };
    for &lr in &lrs {
        Adaptation::from_lr(lr, a.pseudo_strategy)?;
    }
    let model = match &a.model {
        Some(path) => read_model(path)?,
        None => LogisticPixelModel::default(),
    };
    let entries = list_frames(&a.frames)?;
    let frames = entries.iter().map(FrameInput::load).collect::<Result<Vec<_>>>()?;
    let gts: Vec<Option<BinaryMask>> = entries
        .iter()
        .map(|e| e.gt.as_deref().map(read_pgm).transpose())
        .collect::<Result<_>>()?;

    let runs = sweep(&model, &frames, &lrs, &refine_cfg, a.pseudo_strategy, &surrogate_cfg)?;
    for (run, final_model) in &runs {
        let dir = if a.lr_sweep {
            a.out.join(run_dir_name(run.lr))
        } else {
            a.out.clone()
        };
        create_dir(&dir)?;
        for rec in &run.frames {
            write_outcome(&dir.join(&rec.id), &rec.outcome)?;
        }
        let settings = RunSettings {
            strategy: refine_cfg.strategy,
            pseudo_label_strategy: a.pseudo_strategy,
            tolerance_px: refine_cfg.tolerance_px,
            mode: a.mode.into(),
            initial_weights: model.weights(),
            final_weights: final_model.weights(),
        };
        let summary = RunSummary::new(run, &gts, &settings)?;
        let path = dir.join("summary.json");
        write_json(&path, &summary)?;
        say(out, &format!("{}\n", path.display()))?;
    }
    Ok(())
}

pub fn cmd_report(a: &ReportArgs, out: &mut dyn Write) -> Result<()> {
    let runs = a
        .runs
        .iter()
        .map(|path| {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            serde_json::from_str::<RunSummary>(&text).map_err(|e| Error::format(path, e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    let report = build_report(&runs, a.from_frame)?;
    if let Some(path) = &a.out {
        write_json(path, &report)?;
    }
    match a.format {
        OutputFormat::Text => say(out, &report.to_text()),
        OutputFormat::Json => say(
            out,
            &(serde_json::to_string_pretty(&report).expect("report serializes") + "\n"),
        ),
    }
}
