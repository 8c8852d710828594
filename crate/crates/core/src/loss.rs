//! Forward evaluation of the spatial coherence loss.
//!
//! For pixel `i` and adjacency level `k` the loss is the mean over the
//! in-bounds level-`k` ring of
//!
//! ```text
//! S(p_i, n_i) / (mutual(p_i p_j, m_ij) + alpha * f(p_i, p_j))
//! ```
//!
//! and the per-pixel loss is the level-weighted sum over `k = 1..=k_max`.
//! The attention map is the same aggregation with the numerator replaced by
//! one. Levels whose ring is empty for a pixel (possible near the border of
//! small images) contribute nothing to that pixel.

use serde::Serialize;

use crate::config::{LossConfig, Reduction, SingleResponse};
use crate::error::{Error, Result};
use crate::grid::{ring_offsets, FieldMap, GridDims, LabelMap, PixelPos, ProbabilityMap};
use crate::kernels::{denominator, single_value};

/// Result of one image evaluation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LossBreakdown {
    /// Reduced loss (mean or sum of `loss_map`, per the config).
    pub total: f64,
    #[serde(skip)]
    pub loss_map: FieldMap,
    #[serde(skip)]
    pub attention_map: FieldMap,
    /// Reduced weighted contribution of each level; these sum to `total`.
    pub per_level_totals: Vec<f64>,
    pub reduction: Reduction,
}

/// How the mutual-response indicator of a pair is formed.
#[derive(Clone, Copy, Debug)]
pub(crate) enum PairIndicator<'a> {
    /// `n_i * n_j` for binary labels.
    Product,
    /// `1` iff the two class labels agree.
    SameClass(&'a [u32]),
}

/// Clamped inputs plus ring geometry, shared by the forward and backward passes.
pub(crate) struct Prepared<'a> {
    pub dims: GridDims,
    pub cfg: &'a LossConfig,
    /// Clamped probability entering every kernel.
    pub p: Vec<f64>,
    /// Target of the single-response term.
    pub n: Vec<f64>,
    pub pair: PairIndicator<'a>,
    pub rings: Vec<Vec<(isize, isize)>>,
}

impl<'a> Prepared<'a> {
    pub fn binary(pred: &ProbabilityMap, labels: &'a LabelMap, cfg: &'a LossConfig) -> Result<Self> {
        cfg.validate()?;
        pred.dims().check_same(labels.dims())?;
        labels.require_binary()?;
        check_geometry(pred.dims())?;
        let p = pred.clamp(cfg.epsilon)?.into_values();
        let n = labels.values().iter().map(|&v| f64::from(v)).collect();
        Ok(Prepared {
            dims: pred.dims(),
            cfg,
            p,
            n,
            pair: PairIndicator::Product,
            rings: (1..=cfg.k_max).map(ring_offsets).collect(),
        })
    }

    #[inline]
    pub fn indicator(&self, i: usize, j: usize) -> f64 {
        match self.pair {
            PairIndicator::Product => self.n[i] * self.n[j],
            PairIndicator::SameClass(y) => f64::from(u8::from(y[i] == y[j])),
        }
    }

    /// Fills `out` with the in-bounds ring members of pixel `i` at level index `level`.
    #[inline]
    pub fn ring_into(&self, i: usize, level: usize, out: &mut Vec<usize>) {
        out.clear();
        let pos = self.dims.pos(i);
        for &(dr, dc) in &self.rings[level] {
            if let Some(q) = self.dims.offset(pos, dr, dc) {
                out.push(self.dims.index(q));
            }
        }
    }

    #[inline]
    pub fn single(&self, i: usize) -> f64 {
        single_value(self.cfg.single_response, self.p[i], self.n[i])
    }

    #[inline]
    pub fn denom(&self, i: usize, j: usize) -> f64 {
        denominator(
            self.cfg.regularizer,
            self.cfg.alpha,
            self.p[i],
            self.p[j],
            self.indicator(i, j),
        )
    }

    pub fn reduction_scale(&self) -> f64 {
        match self.cfg.reduction {
            Reduction::Mean => 1.0 / self.dims.len() as f64,
            Reduction::Sum => 1.0,
        }
    }

    /// `(level loss, level attention)` of pixel `i`; `None` for an empty ring.
    fn level_terms(&self, i: usize, level: usize, ring: &mut Vec<usize>) -> Option<(f64, f64)> {
        self.ring_into(i, level, ring);
        if ring.is_empty() {
            return None;
        }
        let s = self.single(i);
        let (mut loss, mut weight) = (0.0, 0.0);
        for &j in ring.iter() {
            let d = self.denom(i, j);
            loss += s / d;
            weight += 1.0 / d;
        }
        let n = ring.len() as f64;
        Some((loss / n, weight / n))
    }

    pub fn evaluate(&self) -> LossBreakdown {
        let len = self.dims.len();
        let levels = self.cfg.k_max;
        let mut loss_map = vec![0.0; len];
        let mut attention = vec![0.0; len];
        let mut level_sums = vec![0.0; levels];
        let mut ring = Vec::with_capacity(8 * levels);
        for i in 0..len {
            for (level, &w) in self.cfg.level_weights.iter().enumerate() {
                if let Some((l, a)) = self.level_terms(i, level, &mut ring) {
                    loss_map[i] += w * l;
                    attention[i] += w * a;
                    level_sums[level] += w * l;
                }
            }
        }
        let loss_map = FieldMap::new(self.dims, loss_map).expect("dims");
        let total = reduce(&loss_map, self.cfg.reduction);
        let scale = self.reduction_scale();
        LossBreakdown {
            total,
            per_level_totals: level_sums.iter().map(|s| s * scale).collect(),
            loss_map,
            attention_map: FieldMap::new(self.dims, attention).expect("dims"),
            reduction: self.cfg.reduction,
        }
    }
}

fn reduce(map: &FieldMap, reduction: Reduction) -> f64 {
    match reduction {
        Reduction::Mean => map.mean(),
        Reduction::Sum => map.sum(),
    }
}

/// A single-pixel image has no neighbours at any level.
fn check_geometry(dims: GridDims) -> Result<()> {
    if dims.len() < 2 {
        return Err(Error::DegenerateGeometry(format!(
            "a {dims} image has no adjacent pixel pairs"
        )));
    }
    Ok(())
}

fn check_level(k: usize, cfg: &LossConfig) -> Result<()> {
    if k < 1 || k > cfg.k_max {
        return Err(Error::InvalidLevel(k));
    }
    Ok(())
}

fn check_pos(pos: PixelPos, dims: GridDims) -> Result<()> {
    if !dims.contains(pos) {
        return Err(Error::OutOfBounds {
            row: pos.row,
            col: pos.col,
            dims,
        });
    }
    Ok(())
}

/// Loss of pixel `pos` at adjacency level `k` (1-based).
pub fn pixel_level_loss(
    pos: PixelPos,
    k: usize,
    pred: &ProbabilityMap,
    labels: &LabelMap,
    cfg: &LossConfig,
) -> Result<f64> {
    let prep = Prepared::binary(pred, labels, cfg)?;
    check_level(k, cfg)?;
    check_pos(pos, prep.dims)?;
    prep.level_terms(prep.dims.index(pos), k - 1, &mut Vec::new())
        .map(|(l, _)| l)
        .ok_or_else(|| {
            Error::DegenerateGeometry(format!(
                "pixel {pos} has no level-{k} neighbours in a {} image",
                prep.dims
            ))
        })
}

/// Level-weighted loss of pixel `pos`.
pub fn pixel_loss(
    pos: PixelPos,
    pred: &ProbabilityMap,
    labels: &LabelMap,
    cfg: &LossConfig,
) -> Result<f64> {
    let prep = Prepared::binary(pred, labels, cfg)?;
    check_pos(pos, prep.dims)?;
    let i = prep.dims.index(pos);
    let mut ring = Vec::new();
    Ok(cfg
        .level_weights
        .iter()
        .enumerate()
        .filter_map(|(level, &w)| prep.level_terms(i, level, &mut ring).map(|(l, _)| w * l))
        .sum())
}

/// Loss, per-pixel loss map and weight attention map of one image.
pub fn image_loss(pred: &ProbabilityMap, labels: &LabelMap, cfg: &LossConfig) -> Result<LossBreakdown> {
    Ok(Prepared::binary(pred, labels, cfg)?.evaluate())
}

/// Per-pixel reciprocal denominators, aggregated like the loss.
pub fn attention_map(pred: &ProbabilityMap, labels: &LabelMap, cfg: &LossConfig) -> Result<FieldMap> {
    Ok(image_loss(pred, labels, cfg)?.attention_map)
}

/// The numerator alone: per-pixel single-response loss (the plain BCE map
/// under the default config).
pub fn single_response_map(
    pred: &ProbabilityMap,
    labels: &LabelMap,
    cfg: &LossConfig,
) -> Result<FieldMap> {
    let prep = Prepared::binary(pred, labels, cfg)?;
    let values = (0..prep.dims.len()).map(|i| prep.single(i)).collect();
    FieldMap::new(prep.dims, values)
}

/// `base + addon_weight * sc_total`.
pub fn combine_addon(base_loss: f64, sc_total: f64, cfg: &LossConfig) -> f64 {
    base_loss + cfg.addon_weight * sc_total
}

/// Per-pixel class probability vectors, pixel-major (`classes` values per pixel).
#[derive(Clone, Debug, PartialEq)]
pub struct ClassProbabilities {
    dims: GridDims,
    classes: usize,
    values: Vec<f64>,
}

impl ClassProbabilities {
    pub const SUM_TOLERANCE: f64 = 1e-6;

    pub fn new(dims: GridDims, classes: usize, values: Vec<f64>) -> Result<Self> {
        if classes < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 classes, got {classes}"
            )));
        }
        if values.len() != dims.len() * classes {
            return Err(Error::LengthMismatch {
                dims,
                expected: dims.len() * classes,
                found: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::ValueOutOfRange {
                index,
                value: values[index],
                range: "[0, 1]",
            });
        }
        for (pixel, probs) in values.chunks_exact(classes).enumerate() {
            let sum: f64 = probs.iter().sum();
            if (sum - 1.0).abs() > Self::SUM_TOLERANCE {
                return Err(Error::ValueOutOfRange {
                    index: pixel,
                    value: sum,
                    range: "class-probability sum 1 +/- 1e-6",
                });
            }
        }
        Ok(ClassProbabilities {
            dims,
            classes,
            values,
        })
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn pixel(&self, i: usize) -> &[f64] {
        &self.values[i * self.classes..(i + 1) * self.classes]
    }
}

/// Multi-class variant: cross entropy on the true-class probability, with the
/// mutual indicator set when two pixels share a class and `q` formed from the
/// two true-class probabilities.
pub fn multiclass_image_loss(
    probs: &ClassProbabilities,
    labels: &LabelMap,
    cfg: &LossConfig,
) -> Result<LossBreakdown> {
    cfg.validate()?;
    if !matches!(
        cfg.single_response,
        SingleResponse::CrossEntropy | SingleResponse::Bce
    ) {
        return Err(Error::InvalidConfig(format!(
            "multi-class loss needs cross_entropy as the single response, got {}",
            cfg.single_response
        )));
    }
    probs.dims.check_same(labels.dims())?;
    if labels.classes() as usize != probs.classes {
        return Err(Error::InvalidConfig(format!(
            "label map has {} classes but probabilities have {}",
            labels.classes(),
            probs.classes
        )));
    }
    check_geometry(probs.dims)?;
    let (lo, hi) = (cfg.epsilon, 1.0 - cfg.epsilon);
    let p = labels
        .values()
        .iter()
        .enumerate()
        .map(|(i, &y)| probs.pixel(i)[y as usize].clamp(lo, hi))
        .collect();
    // -ln(t) is BCE against a positive target.
    let ce_cfg = LossConfig {
        single_response: SingleResponse::Bce,
        ..cfg.clone()
    };
    let prep = Prepared {
        dims: probs.dims,
        cfg: &ce_cfg,
        p,
        n: vec![1.0; probs.dims.len()],
        pair: PairIndicator::SameClass(labels.values()),
        rings: (1..=cfg.k_max).map(ring_offsets).collect(),
    };
    Ok(prep.evaluate())
}
