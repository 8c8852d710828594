//! Analytic gradient of the loss and a central-difference oracle.
//!
//! Every pair term `t = S(p_i) / D(p_i, p_j)` contributes
//! `(S' D - S dD/dp_i) / D^2` to pixel `i` and `-S dD/dp_j / D^2` to its
//! neighbour `j`, scaled by the level weight, `1/N` and the reduction factor.
//! Pixels sitting on the clamp bound get a zero gradient: the clamp is a
//! saturating projection and is treated as flat there.

use serde::Serialize;

use crate::config::LossConfig;
use crate::error::{Error, Result};
use crate::grid::{FieldMap, GridDims, LabelMap, PixelPos, ProbabilityMap};
use crate::kernels::{denominator_grad, single_deriv};
use crate::loss::{image_loss, Prepared};
use crate::rng::Lcg64;

pub const DEFAULT_FD_STEP: f64 = 1e-4;
pub const DEFAULT_TOLERANCE: f64 = 1e-4;
/// Floor of the relative-error denominator.
pub const REL_ERROR_FLOOR: f64 = 1e-8;

/// Range random probabilities are drawn from in [`grad_check`].
pub const RANDOM_PROB_RANGE: (f64, f64) = (0.02, 0.98);

impl Prepared<'_> {
    fn saturated(&self, i: usize) -> bool {
        let eps = self.cfg.epsilon;
        self.p[i] <= eps || self.p[i] >= 1.0 - eps
    }

    pub(crate) fn gradient(&self) -> FieldMap {
        self.loss_and_gradient().1
    }

    /// Reduced loss and its gradient from one traversal.
    pub(crate) fn loss_and_gradient(&self) -> (f64, FieldMap) {
        let len = self.dims.len();
        let scale = self.reduction_scale();
        let kind = self.cfg.single_response;
        let (reg, alpha) = (self.cfg.regularizer, self.cfg.alpha);
        let mut grad = vec![0.0; len];
        let mut total = 0.0;
        let mut ring = Vec::with_capacity(8 * self.cfg.k_max);
        for i in 0..len {
            let s = self.single(i);
            let ds = single_deriv(kind, self.p[i], self.n[i]);
            for (level, &w) in self.cfg.level_weights.iter().enumerate() {
                self.ring_into(i, level, &mut ring);
                if ring.is_empty() {
                    continue;
                }
                let c = scale * w / ring.len() as f64;
                for &j in &ring {
                    let m = self.indicator(i, j);
                    let (d, d_i, d_j) = denominator_grad(reg, alpha, self.p[i], self.p[j], m);
                    let d2 = d * d;
                    total += c * s / d;
                    grad[i] += c * (ds * d - s * d_i) / d2;
                    grad[j] -= c * s * d_j / d2;
                }
            }
        }
        for (i, g) in grad.iter_mut().enumerate() {
            if self.saturated(i) {
                *g = 0.0;
            }
        }
        (total, FieldMap::new(self.dims, grad).expect("dims"))
    }
}

/// `d total / d p` for every pixel.
pub fn grad_wrt_probs(pred: &ProbabilityMap, labels: &LabelMap, cfg: &LossConfig) -> Result<FieldMap> {
    Ok(Prepared::binary(pred, labels, cfg)?.gradient())
}

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

pub fn sigmoid_map(logits: &FieldMap) -> Result<ProbabilityMap> {
    ProbabilityMap::new(
        logits.dims(),
        logits.values().iter().map(|&z| sigmoid(z)).collect(),
    )
}

fn check_finite(map: &FieldMap) -> Result<()> {
    match map.values().iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::ValueOutOfRange {
            index,
            value: map.values()[index],
            range: "finite reals",
        }),
        None => Ok(()),
    }
}

/// `d total / d z` with `p = sigmoid(z)`.
pub fn grad_wrt_logits(logits: &FieldMap, labels: &LabelMap, cfg: &LossConfig) -> Result<FieldMap> {
    check_finite(logits)?;
    let probs = sigmoid_map(logits)?;
    let mut grad = grad_wrt_probs(&probs, labels, cfg)?;
    for (g, &p) in grad.values_mut().iter_mut().zip(probs.values()) {
        *g *= p * (1.0 - p);
    }
    Ok(grad)
}

/// Central-difference gradient evaluated through the forward pass only.
#[derive(Clone, Debug)]
pub struct FiniteDiff {
    pub grad: FieldMap,
    /// Pixels whose perturbation crossed the clamp bound; their estimate is one-sided.
    pub clamp_hits: Vec<PixelPos>,
}

pub fn finite_diff_grad(
    pred: &ProbabilityMap,
    labels: &LabelMap,
    cfg: &LossConfig,
    step: f64,
) -> Result<FiniteDiff> {
    if !(1e-6..=1e-3).contains(&step) {
        return Err(Error::InvalidConfig(format!(
            "finite-difference step must lie in [1e-6, 1e-3], got {step}"
        )));
    }
    let base = pred.clamp(cfg.epsilon)?;
    let (lo, hi) = (cfg.epsilon, 1.0 - cfg.epsilon);
    let dims = base.dims();
    let mut values = base.values().to_vec();
    let mut grad = vec![0.0; dims.len()];
    let mut clamp_hits = Vec::new();
    for m in 0..dims.len() {
        let p = values[m];
        if p + step > hi || p - step < lo {
            log::warn!(
                "finite difference at {} crosses the clamp bound; estimate is one-sided",
                dims.pos(m)
            );
            clamp_hits.push(dims.pos(m));
        }
        values[m] = (p + step).clamp(lo, hi);
        let plus = image_loss(&ProbabilityMap::new(dims, values.clone())?, labels, cfg)?.total;
        values[m] = (p - step).clamp(lo, hi);
        let minus = image_loss(&ProbabilityMap::new(dims, values.clone())?, labels, cfg)?.total;
        values[m] = p;
        grad[m] = (plus - minus) / (2.0 * step);
    }
    Ok(FiniteDiff {
        grad: FieldMap::new(dims, grad)?,
        clamp_hits,
    })
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradReport {
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub worst_pixel: PixelPos,
    pub worst_trial: usize,
    pub trials: usize,
    pub pixels_compared: usize,
    pub pixels_skipped: usize,
    pub tolerance: f64,
    pub pass: bool,
}

/// Random binary instance: probabilities uniform in [`RANDOM_PROB_RANGE`],
/// labels 1 when a draw is `>= 0.5`.
pub fn random_instance(rng: &mut Lcg64, dims: GridDims) -> (ProbabilityMap, LabelMap) {
    let (lo, hi) = RANDOM_PROB_RANGE;
    let probs = (0..dims.len()).map(|_| rng.uniform(lo, hi)).collect();
    let labels = (0..dims.len()).map(|_| u32::from(rng.next_f64() >= 0.5)).collect();
    (
        ProbabilityMap::new(dims, probs).expect("draws lie in [0, 1]"),
        LabelMap::binary(dims, labels).expect("binary draws"),
    )
}

/// Compares [`grad_wrt_probs`] with [`finite_diff_grad`] on `trials` seeded
/// random instances. Failure is reported through `pass`, not as an error.
pub fn grad_check(
    seed: u64,
    dims: GridDims,
    cfg: &LossConfig,
    trials: usize,
    step: f64,
    tolerance: f64,
) -> Result<GradReport> {
    if trials < 1 {
        return Err(Error::InvalidConfig("grad check needs at least one trial".into()));
    }
    let mut rng = Lcg64::new(seed);
    let mut report = GradReport {
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        worst_pixel: PixelPos::new(0, 0),
        worst_trial: 0,
        trials,
        pixels_compared: 0,
        pixels_skipped: 0,
        tolerance,
        pass: false,
    };
    for trial in 0..trials {
        let (pred, labels) = random_instance(&mut rng, dims);
        let analytic = grad_wrt_probs(&pred, &labels, cfg)?;
        let fd = finite_diff_grad(&pred, &labels, cfg, step)?;
        for (m, (&a, &f)) in analytic.values().iter().zip(fd.grad.values()).enumerate() {
            let pos = dims.pos(m);
            if fd.clamp_hits.contains(&pos) {
                report.pixels_skipped += 1;
                continue;
            }
            report.pixels_compared += 1;
            let rel = relative_error(a, f);
            report.max_abs_error = report.max_abs_error.max((a - f).abs());
            if rel > report.max_rel_error || rel.is_nan() {
                report.max_rel_error = rel;
                report.worst_pixel = pos;
                report.worst_trial = trial;
            }
        }
    }
    report.pass = report.max_rel_error <= tolerance;
    Ok(report)
}
