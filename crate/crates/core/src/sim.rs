//! Logit-field gradient descent on synthetic scenes.
//!
//! A scene paints labels and a per-pixel difficulty `d` in `[0, 1)`. Descent
//! starts from zero logits (`p = 0.5`) and applies
//! `z <- z - lr * (1 - d) * dL/dz`, so hard pixels learn more slowly. The
//! resulting trajectory is inspected for boundary-first learning of the hard
//! region: its rim should gain attention and cross the learned level before
//! its core.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::{str_enum, LossConfig, Reduction};
use crate::error::{Error, Result};
use crate::grad::{sigmoid, sigmoid_map};
use crate::grid::{FieldMap, GridDims, LabelMap, PixelPos};
use crate::imageio::{self, Scale};
use crate::kernels::single_deriv;
use crate::loss::{image_loss, Prepared};

/// Logit magnitude treated as divergence.
pub const DIVERGENCE_LIMIT: f64 = 50.0;
/// Erosion radius separating the core of a hard region from its rim.
pub const CORE_EROSION: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Geometry {
    /// Pixels with centre distance `<= r` from `(cx, cy)`.
    Disk { cx: f64, cy: f64, r: f64 },
    /// Inclusive pixel rectangle.
    Rect { x0: i64, y0: i64, x1: i64, y1: i64 },
    /// Pixels with `r_in <= distance <= r_out`.
    Ring { cx: f64, cy: f64, r_in: f64, r_out: f64 },
}

impl Geometry {
    fn contains(&self, row: usize, col: usize) -> bool {
        let (x, y) = (col as f64, row as f64);
        match *self {
            Geometry::Disk { cx, cy, r } => (x - cx).powi(2) + (y - cy).powi(2) <= r * r,
            Geometry::Rect { x0, y0, x1, y1 } => {
                let (x, y) = (col as i64, row as i64);
                (x0..=x1).contains(&x) && (y0..=y1).contains(&y)
            }
            Geometry::Ring { cx, cy, r_in, r_out } => {
                let d2 = (x - cx).powi(2) + (y - cy).powi(2);
                r_in * r_in <= d2 && d2 <= r_out * r_out
            }
        }
    }

    fn check(&self) -> std::result::Result<(), String> {
        let finite = |vals: &[f64]| vals.iter().all(|v| v.is_finite());
        match *self {
            Geometry::Disk { cx, cy, r } if !finite(&[cx, cy, r]) || r < 0.0 => {
                Err(format!("disk needs finite centre and r >= 0, got r = {r}"))
            }
            Geometry::Rect { x0, y0, x1, y1 } if x0 > x1 || y0 > y1 => {
                Err(format!("rect corners out of order: ({x0}, {y0})..({x1}, {y1})"))
            }
            Geometry::Ring { cx, cy, r_in, r_out }
                if !finite(&[cx, cy, r_in, r_out]) || r_in < 0.0 || r_in > r_out =>
            {
                Err(format!("ring needs 0 <= r_in <= r_out, got {r_in}..{r_out}"))
            }
            _ => Ok(()),
        }
    }
}

fn default_label() -> u32 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Shape {
    #[serde(flatten)]
    pub geometry: Geometry,
    #[serde(default = "default_label")]
    pub label: u32,
    #[serde(default)]
    pub difficulty: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSize {
    pub width: usize,
    pub height: usize,
}

/// Ordered shape list over a background of label 0, difficulty 0. Later
/// shapes overwrite earlier ones.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub scene: SceneSize,
    #[serde(default, rename = "shape")]
    pub shapes: Vec<Shape>,
}

impl SceneSpec {
    pub fn new(height: usize, width: usize, shapes: Vec<Shape>) -> Self {
        SceneSpec {
            scene: SceneSize { width, height },
            shapes,
        }
    }

    /// 64x64: an easy foreground disk (r = 24) holding a hard disk (r = 10,
    /// difficulty 0.8).
    pub fn canonical_phantom() -> Self {
        let disk = |r, difficulty| Shape {
            geometry: Geometry::Disk { cx: 32.0, cy: 32.0, r },
            label: 1,
            difficulty,
        };
        SceneSpec::new(64, 64, vec![disk(24.0, 0.0), disk(10.0, 0.8)])
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidScene(e.to_string()))
    }

    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn dims(&self) -> Result<GridDims> {
        GridDims::new(self.scene.height, self.scene.width)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub labels: LabelMap,
    pub difficulty: FieldMap,
}

impl Scene {
    pub fn dims(&self) -> GridDims {
        self.labels.dims()
    }
}

pub fn build_scene(spec: &SceneSpec) -> Result<Scene> {
    let dims = spec.dims()?;
    let mut labels = vec![0u32; dims.len()];
    let mut difficulty = vec![0.0; dims.len()];
    for (idx, shape) in spec.shapes.iter().enumerate() {
        let bad = |msg: String| Error::InvalidScene(format!("shape {idx}: {msg}"));
        shape.geometry.check().map_err(bad)?;
        if shape.label > 1 {
            return Err(bad(format!("label must be 0 or 1, got {}", shape.label)));
        }
        if !(0.0..1.0).contains(&shape.difficulty) {
            return Err(bad(format!("difficulty must lie in [0, 1), got {}", shape.difficulty)));
        }
        let mut painted = 0;
        for pos in dims.positions() {
            if shape.geometry.contains(pos.row, pos.col) {
                let i = dims.index(pos);
                labels[i] = shape.label;
                difficulty[i] = shape.difficulty;
                painted += 1;
            }
        }
        if painted == 0 {
            return Err(bad(format!("geometry does not intersect the {dims} image")));
        }
    }
    Ok(Scene {
        labels: LabelMap::binary(dims, labels)?,
        difficulty: FieldMap::new(dims, difficulty)?,
    })
}

/// Pixel masks of the hard region `H = {d >= threshold}`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RegionMasks {
    pub hard: Vec<bool>,
    /// Pixels of `H` with a level-1 neighbour outside `H`.
    pub boundary: Vec<bool>,
    /// Pixels of `H` whose whole radius-3 Chebyshev neighbourhood lies in `H`.
    pub core: Vec<bool>,
}

impl RegionMasks {
    pub fn easy(&self) -> Vec<bool> {
        self.hard.iter().map(|h| !h).collect()
    }

    pub fn count(mask: &[bool]) -> usize {
        mask.iter().filter(|&&m| m).count()
    }
}

fn masks_for(dims: GridDims, hard: Vec<bool>) -> RegionMasks {
    let surrounded_by_hard = |pos: PixelPos, radius: isize| {
        (-radius..=radius).all(|dr| {
            (-radius..=radius).all(|dc| match dims.offset(pos, dr, dc) {
                Some(q) => hard[dims.index(q)],
                None => true,
            })
        })
    };
    let mut boundary = vec![false; dims.len()];
    let mut core = vec![false; dims.len()];
    for pos in dims.positions() {
        let i = dims.index(pos);
        if hard[i] {
            boundary[i] = !surrounded_by_hard(pos, 1);
            core[i] = surrounded_by_hard(pos, CORE_EROSION as isize);
        }
    }
    RegionMasks { hard, boundary, core }
}

pub fn region_masks(scene: &Scene, hard_threshold: f64) -> Result<RegionMasks> {
    if !(hard_threshold > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "hard threshold must be positive, got {hard_threshold}"
        )));
    }
    let hard: Vec<bool> = scene
        .difficulty
        .values()
        .iter()
        .map(|&d| d >= hard_threshold)
        .collect();
    if !hard.contains(&true) {
        return Err(Error::EmptyRegion(format!(
            "no pixel has difficulty >= {hard_threshold}"
        )));
    }
    let masks = masks_for(scene.dims(), hard);
    if !masks.core.contains(&true) {
        log::warn!("hard region is too thin to have a core after erosion by {CORE_EROSION}");
    }
    Ok(masks)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    /// Descend the spatial coherence loss.
    Scloss,
    /// Descend the single-response term alone; attention is constant 1.
    SingleResponseOnly,
}

str_enum!(Baseline {
    "scloss" => Baseline::Scloss,
    "single_response_only" => Baseline::SingleResponseOnly,
});

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimConfig {
    pub steps: usize,
    pub learning_rate: f64,
    pub snapshot_every: usize,
    /// Recorded with the run; the descent itself draws no random numbers.
    pub seed: u64,
    pub loss: LossConfig,
    pub baseline: Baseline,
    pub hard_threshold: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            steps: 500,
            learning_rate: 0.5,
            snapshot_every: 50,
            seed: 0,
            loss: LossConfig {
                reduction: Reduction::Sum,
                ..LossConfig::default()
            },
            baseline: Baseline::Scloss,
            hard_threshold: 0.5,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.steps == 0 {
            return bad("steps must be >= 1".into());
        }
        if self.snapshot_every == 0 {
            return bad("snapshot_every must be >= 1".into());
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate must be finite and >= 0, got {}", self.learning_rate));
        }
        if !(self.hard_threshold > 0.0 && self.hard_threshold <= 1.0) {
            return bad(format!("hard threshold must lie in (0, 1], got {}", self.hard_threshold));
        }
        Ok(())
    }
}

/// Per-snapshot statistics; region means are `None` for empty regions.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SnapshotStats {
    pub step: usize,
    pub total_loss: f64,
    pub easy_mae: Option<f64>,
    pub hard_mae: Option<f64>,
    pub boundary_attention_mean: Option<f64>,
    pub core_attention_mean: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub prediction: FieldMap,
    pub attention: FieldMap,
    pub stats: SnapshotStats,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FinalSummary {
    pub steps: usize,
    pub total_loss: f64,
    pub mae: f64,
    pub easy_mae: Option<f64>,
    pub hard_mae: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
    /// Optimised loss at every step `0..=steps`.
    pub losses: Vec<f64>,
    /// Per pixel: first step with `|p - n| < 1 - level`, for each tracked level.
    pub crossings: Vec<(f64, Vec<Option<usize>>)>,
    pub masks: RegionMasks,
    pub labels: LabelMap,
    pub summary: FinalSummary,
}

impl Trajectory {
    pub fn crossing_steps(&self, level: f64) -> Option<&[Option<usize>]> {
        self.crossings
            .iter()
            .find(|(l, _)| *l == level)
            .map(|(_, c)| c.as_slice())
    }
}

fn masked_abs_error(pred: &[f64], labels: &[u32], mask: &[bool]) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for ((&p, &y), &m) in pred.iter().zip(labels).zip(mask) {
        if m {
            sum += (p - f64::from(y)).abs();
            n += 1;
        }
    }
    (n > 0).then(|| sum / n as f64)
}

/// Loss and `dL/dp` of the descended objective at probabilities `probs`.
fn objective(probs: &crate::grid::ProbabilityMap, labels: &LabelMap, cfg: &SimConfig) -> Result<(f64, FieldMap)> {
    let prep = Prepared::binary(probs, labels, &cfg.loss)?;
    match cfg.baseline {
        Baseline::Scloss => Ok(prep.loss_and_gradient()),
        Baseline::SingleResponseOnly => {
            let scale = prep.reduction_scale();
            let eps = cfg.loss.epsilon;
            let mut total = 0.0;
            let grad = (0..prep.dims.len())
                .map(|i| {
                    total += scale * prep.single(i);
                    let p = prep.p[i];
                    if p <= eps || p >= 1.0 - eps {
                        0.0
                    } else {
                        scale * single_deriv(cfg.loss.single_response, p, prep.n[i])
                    }
                })
                .collect();
            Ok((total, FieldMap::new(prep.dims, grad)?))
        }
    }
}

fn attention(probs: &crate::grid::ProbabilityMap, labels: &LabelMap, cfg: &SimConfig) -> Result<FieldMap> {
    match cfg.baseline {
        Baseline::Scloss => Ok(image_loss(probs, labels, &cfg.loss)?.attention_map),
        Baseline::SingleResponseOnly => Ok(FieldMap::filled(probs.dims(), 1.0)),
    }
}

/// Levels whose first crossing is tracked per pixel during descent.
pub const TRACKED_LEVELS: [f64; 2] = [0.5, LEARNED_LEVEL];
/// A pixel counts as learned once `|p - n| < 1 - LEARNED_LEVEL`.
pub const LEARNED_LEVEL: f64 = 0.9;

pub fn run_descent(scene: &Scene, cfg: &SimConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let dims = scene.dims();
    let labels = &scene.labels;
    let hard: Vec<bool> = scene
        .difficulty
        .values()
        .iter()
        .map(|&d| d >= cfg.hard_threshold)
        .collect();
    let masks = masks_for(dims, hard);
    let easy = masks.easy();
    let step_scale: Vec<f64> = scene
        .difficulty
        .values()
        .iter()
        .map(|d| cfg.learning_rate * (1.0 - d))
        .collect();

    let mut z = FieldMap::zeros(dims);
    let mut snapshots = Vec::new();
    let mut losses = Vec::with_capacity(cfg.steps + 1);
    let mut crossings: Vec<(f64, Vec<Option<usize>>)> = TRACKED_LEVELS
        .iter()
        .map(|&l| (l, vec![None; dims.len()]))
        .collect();

    for step in 0..=cfg.steps {
        let probs = sigmoid_map(&z)?;
        let (loss, grad_p) = objective(&probs, labels, cfg)?;
        losses.push(loss);

        for (level, first) in crossings.iter_mut() {
            for ((slot, &p), &y) in first.iter_mut().zip(probs.values()).zip(labels.values()) {
                if slot.is_none() && (p - f64::from(y)).abs() < 1.0 - *level {
                    *slot = Some(step);
                }
            }
        }

        if step % cfg.snapshot_every == 0 || step == cfg.steps {
            let att = attention(&probs, labels, cfg)?;
            let p = probs.values();
            let stats = SnapshotStats {
                step,
                total_loss: loss,
                easy_mae: masked_abs_error(p, labels.values(), &easy),
                hard_mae: masked_abs_error(p, labels.values(), &masks.hard),
                boundary_attention_mean: att.masked_mean(&masks.boundary),
                core_attention_mean: att.masked_mean(&masks.core),
            };
            log::debug!("step {step}: loss {loss:.6}");
            snapshots.push(Snapshot {
                step,
                prediction: FieldMap::new(dims, p.to_vec())?,
                attention: att,
                stats,
            });
        }
        if step == cfg.steps {
            break;
        }

        for (i, zi) in z.values_mut().iter_mut().enumerate() {
            let p = sigmoid(*zi);
            *zi -= step_scale[i] * grad_p.values()[i] * p * (1.0 - p);
        }
        if let Some((i, &v)) = z
            .values()
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.abs() <= DIVERGENCE_LIMIT))
        {
            let pos = dims.pos(i);
            return Err(Error::Divergence {
                step: step + 1,
                row: pos.row,
                col: pos.col,
                magnitude: v.abs(),
            });
        }
    }

    let last = snapshots.last().expect("final snapshot");
    let all = vec![true; dims.len()];
    let summary = FinalSummary {
        steps: cfg.steps,
        total_loss: last.stats.total_loss,
        mae: masked_abs_error(last.prediction.values(), labels.values(), &all).expect("non-empty"),
        easy_mae: last.stats.easy_mae,
        hard_mae: last.stats.hard_mae,
    };
    Ok(Trajectory {
        snapshots,
        losses,
        crossings,
        masks,
        labels: labels.clone(),
        summary,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Violated,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Holds => "holds",
            Verdict::Violated => "violated",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

/// Thresholds of the boundary-first check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundaryFirstCriteria {
    /// Easy region counts as learned below this MAE.
    pub easy_mae: f64,
    /// Core and crossing level: a pixel is learned once `|p - n| < 1 - level`.
    pub learned_level: f64,
}

impl Default for BoundaryFirstCriteria {
    fn default() -> Self {
        BoundaryFirstCriteria {
            easy_mae: 0.1,
            learned_level: LEARNED_LEVEL,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundaryFirstReport {
    pub verdict: Verdict,
    pub boundary_first: bool,
    pub criteria: BoundaryFirstCriteria,
    /// Snapshot steps with the easy region learned and the core not.
    pub mid_training_steps: Vec<usize>,
    /// Mid-training steps where boundary attention did not exceed core attention.
    pub attention_violations: Vec<usize>,
    pub min_attention_ratio: Option<f64>,
    pub boundary_median_crossing: Option<f64>,
    pub core_median_crossing: Option<f64>,
    pub boundary_pixels: usize,
    pub core_pixels: usize,
    pub reason: String,
}

/// Median of crossing steps; pixels that never cross count as `never`.
fn median_crossing(first: &[Option<usize>], mask: &[bool], never: usize) -> Option<f64> {
    let mut steps: Vec<usize> = first
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(s, _)| s.unwrap_or(never))
        .collect();
    if steps.is_empty() {
        return None;
    }
    steps.sort_unstable();
    let n = steps.len();
    Some(if n % 2 == 1 {
        steps[n / 2] as f64
    } else {
        (steps[n / 2 - 1] + steps[n / 2]) as f64 / 2.0
    })
}

pub fn assert_boundary_first(traj: &Trajectory, criteria: BoundaryFirstCriteria) -> Result<BoundaryFirstReport> {
    if traj.snapshots.len() < 3 {
        return Err(Error::InvalidConfig(format!(
            "boundary-first check needs at least 3 snapshots, got {}",
            traj.snapshots.len()
        )));
    }
    let masks = &traj.masks;
    let labels = traj.labels.values();
    let mut report = BoundaryFirstReport {
        verdict: Verdict::Inconclusive,
        boundary_first: false,
        criteria,
        mid_training_steps: Vec::new(),
        attention_violations: Vec::new(),
        min_attention_ratio: None,
        boundary_median_crossing: None,
        core_median_crossing: None,
        boundary_pixels: RegionMasks::count(&masks.boundary),
        core_pixels: RegionMasks::count(&masks.core),
        reason: String::new(),
    };
    if report.boundary_pixels == 0 || report.core_pixels == 0 {
        report.reason = "hard region has an empty boundary or core".into();
        return Ok(report);
    }

    let core_learned_mae = 1.0 - criteria.learned_level;
    for snap in &traj.snapshots {
        let p = snap.prediction.values();
        let core_mae = masked_abs_error(p, labels, &masks.core).expect("non-empty core");
        let easy_ok = snap.stats.easy_mae.is_some_and(|m| m < criteria.easy_mae);
        if !(easy_ok && core_mae >= core_learned_mae) {
            continue;
        }
        report.mid_training_steps.push(snap.step);
        let b = snap.stats.boundary_attention_mean.expect("non-empty boundary");
        let c = snap.stats.core_attention_mean.expect("non-empty core");
        let ratio = b / c;
        report.min_attention_ratio = Some(report.min_attention_ratio.map_or(ratio, |r: f64| r.min(ratio)));
        if !(b > c) {
            report.attention_violations.push(snap.step);
        }
    }
    if report.mid_training_steps.is_empty() {
        report.reason = "no snapshot has the easy region learned while the core is not".into();
        return Ok(report);
    }

    let never = traj.summary.steps + 1;
    let first = traj.crossing_steps(criteria.learned_level).ok_or_else(|| {
        Error::InvalidConfig(format!(
            "crossing level {} was not tracked during descent",
            criteria.learned_level
        ))
    })?;
    let b = median_crossing(first, &masks.boundary, never).expect("non-empty");
    let c = median_crossing(first, &masks.core, never).expect("non-empty");
    report.boundary_median_crossing = Some(b);
    report.core_median_crossing = Some(c);

    let attention_ok = report.attention_violations.is_empty();
    let crossing_ok = b <= c;
    report.verdict = if attention_ok && crossing_ok {
        Verdict::Holds
    } else {
        Verdict::Violated
    };
    report.boundary_first = report.verdict == Verdict::Holds;
    report.reason = match (attention_ok, crossing_ok) {
        (true, true) => format!(
            "boundary attention exceeds core attention in all {} mid-training snapshots; median crossing {b} <= {c}",
            report.mid_training_steps.len()
        ),
        (false, _) => format!(
            "boundary attention did not exceed core attention at steps {:?}",
            report.attention_violations
        ),
        (true, false) => format!("boundary median crossing {b} is later than core median {c}"),
    };
    Ok(report)
}

#[derive(Clone, Debug, Serialize)]
struct CsvRow {
    step: usize,
    total_loss: f64,
    easy_mae: Option<f64>,
    hard_mae: Option<f64>,
    boundary_attention_mean: Option<f64>,
    core_attention_mean: Option<f64>,
}

/// CSV log with one row per snapshot.
pub fn trajectory_csv(traj: &Trajectory) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for s in &traj.snapshots {
        let st = &s.stats;
        w.serialize(CsvRow {
            step: st.step,
            total_loss: st.total_loss,
            easy_mae: st.easy_mae,
            hard_mae: st.hard_mae,
            boundary_attention_mean: st.boundary_attention_mean,
            core_attention_mean: st.core_attention_mean,
        })
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    }
    w.into_inner().map_err(|e| Error::InvalidConfig(e.to_string()))
}

/// Attention range over the whole trajectory.
pub fn attention_scale(traj: &Trajectory) -> Scale {
    let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in &traj.snapshots {
        let (lo, hi) = s.attention.min_max();
        min = min.min(lo);
        max = max.max(hi);
    }
    Scale { min, max }
}

/// Writes `trajectory.csv` plus `pred_NNNNN.pgm` / `attention_NNNNN.pgm`
/// for each snapshot into `dir`. Returns the shared attention scale.
pub fn write_trajectory(traj: &Trajectory, dir: &Path) -> Result<Scale> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv_path = dir.join("trajectory.csv");
    fs::write(&csv_path, trajectory_csv(traj)?).map_err(|e| Error::io(&csv_path, e))?;
    let scale = attention_scale(traj);
    for s in &traj.snapshots {
        let dims = s.prediction.dims();
        imageio::write_gray8(
            &dir.join(format!("pred_{:05}.pgm", s.step)),
            dims,
            &imageio::probabilities_u8(s.prediction.values()),
        )?;
        imageio::write_gray8(
            &dir.join(format!("attention_{:05}.pgm", s.step)),
            dims,
            &imageio::normalize_with(&s.attention, scale),
        )?;
    }
    Ok(scale)
}
