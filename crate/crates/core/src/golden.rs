//! Self-contained golden vectors for cross-implementation parity.
//!
//! Inputs are drawn from [`Lcg64`]: the first `H*W` draws `u` give
//! predictions `0.01 + 0.98 u`, the next `H*W` give labels `u >= 0.5`.
//! Every real is written with 17 significant digits so a reader recovers
//! the exact doubles.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize, Serializer};
use serde_json::value::RawValue;

use crate::config::LossConfig;
use crate::error::{Error, Result};
use crate::grad::{grad_wrt_probs, relative_error};
use crate::grid::{GridDims, LabelMap, ProbabilityMap};
use crate::loss::image_loss;
use crate::rng::Lcg64;

pub const GOLDEN_VERSION: u32 = 1;
/// Relative tolerance of the self-consistency check.
pub const SELF_CHECK_TOLERANCE: f64 = 1e-12;

const PRED_LO: f64 = 0.01;
const PRED_SPAN: f64 = 0.98;

fn real<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if !v.is_finite() {
        return Err(serde::ser::Error::custom(format!("non-finite value {v}")));
    }
    let raw = RawValue::from_string(format!("{v:.16e}")).map_err(serde::ser::Error::custom)?;
    raw.serialize(s)
}

fn reals<S: Serializer>(v: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
    #[derive(Serialize)]
    struct R(#[serde(serialize_with = "real")] f64);
    s.collect_seq(v.iter().map(|&x| R(x)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoldenConfig {
    pub k_max: usize,
    #[serde(serialize_with = "real")]
    pub alpha: f64,
    pub single_response: crate::config::SingleResponse,
    pub regularizer: crate::config::Regularizer,
    #[serde(serialize_with = "real")]
    pub epsilon: f64,
    pub reduction: crate::config::Reduction,
    #[serde(serialize_with = "reals")]
    pub level_weights: Vec<f64>,
    #[serde(serialize_with = "real")]
    pub addon_weight: f64,
}

impl From<&LossConfig> for GoldenConfig {
    fn from(c: &LossConfig) -> Self {
        GoldenConfig {
            k_max: c.k_max,
            alpha: c.alpha,
            single_response: c.single_response,
            regularizer: c.regularizer,
            epsilon: c.epsilon,
            reduction: c.reduction,
            level_weights: c.level_weights.clone(),
            addon_weight: c.addon_weight,
        }
    }
}

impl From<GoldenConfig> for LossConfig {
    fn from(c: GoldenConfig) -> Self {
        LossConfig {
            k_max: c.k_max,
            alpha: c.alpha,
            single_response: c.single_response,
            regularizer: c.regularizer,
            epsilon: c.epsilon,
            reduction: c.reduction,
            level_weights: c.level_weights,
            addon_weight: c.addon_weight,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoldenExpected {
    #[serde(serialize_with = "real")]
    pub total: f64,
    #[serde(serialize_with = "reals")]
    pub per_level_totals: Vec<f64>,
    #[serde(serialize_with = "reals")]
    pub loss_map: Vec<f64>,
    #[serde(serialize_with = "reals")]
    pub attention_map: Vec<f64>,
    /// Gradient of `total` with respect to the unclamped probabilities.
    #[serde(serialize_with = "reals")]
    pub gradient: Vec<f64>,
}

/// Row-major inputs, configuration and reference outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoldenVector {
    pub version: u32,
    pub seed: u64,
    pub height: usize,
    pub width: usize,
    pub config: GoldenConfig,
    #[serde(serialize_with = "reals")]
    pub pred: Vec<f64>,
    pub labels: Vec<u32>,
    pub expected: GoldenExpected,
}

/// The documented LCG inputs for `seed`.
pub fn golden_inputs(seed: u64, dims: GridDims) -> Result<(ProbabilityMap, LabelMap)> {
    let mut rng = Lcg64::new(seed);
    let pred = (0..dims.len())
        .map(|_| PRED_LO + PRED_SPAN * rng.next_f64())
        .collect();
    let labels = (0..dims.len())
        .map(|_| u32::from(rng.next_f64() >= 0.5))
        .collect();
    Ok((ProbabilityMap::new(dims, pred)?, LabelMap::binary(dims, labels)?))
}

fn expected_for(pred: &ProbabilityMap, labels: &LabelMap, cfg: &LossConfig) -> Result<GoldenExpected> {
    let b = image_loss(pred, labels, cfg)?;
    Ok(GoldenExpected {
        total: b.total,
        per_level_totals: b.per_level_totals,
        loss_map: b.loss_map.into_values(),
        attention_map: b.attention_map.into_values(),
        gradient: grad_wrt_probs(pred, labels, cfg)?.into_values(),
    })
}

impl GoldenVector {
    pub fn generate(seed: u64, dims: GridDims, cfg: &LossConfig) -> Result<Self> {
        cfg.validate()?;
        let (pred, labels) = golden_inputs(seed, dims)?;
        Ok(GoldenVector {
            version: GOLDEN_VERSION,
            seed,
            height: dims.height,
            width: dims.width,
            config: cfg.into(),
            expected: expected_for(&pred, &labels, cfg)?,
            pred: pred.into_values(),
            labels: labels.values().to_vec(),
        })
    }

    pub fn dims(&self) -> Result<GridDims> {
        GridDims::new(self.height, self.width)
    }

    pub fn loss_config(&self) -> LossConfig {
        self.config.clone().into()
    }

    pub fn inputs(&self) -> Result<(ProbabilityMap, LabelMap)> {
        let dims = self.dims()?;
        Ok((
            ProbabilityMap::new(dims, self.pred.clone())?,
            LabelMap::binary(dims, self.labels.clone())?,
        ))
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)
            .map_err(|e| Error::InvalidConfig(format!("golden vector serialisation: {e}")))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidConfig(format!("golden vector: {e}")))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }

    /// Recomputes the outputs from the embedded inputs.
    pub fn verify(&self, tolerance: f64) -> Result<GoldenCheck> {
        let cfg = self.loss_config();
        cfg.validate()?;
        let (pred, labels) = self.inputs()?;
        let got = expected_for(&pred, &labels, &cfg)?;
        let want = &self.expected;
        let worst = |a: &[f64], b: &[f64]| -> f64 {
            if a.len() != b.len() {
                return f64::INFINITY;
            }
            a.iter()
                .zip(b)
                .map(|(&x, &y)| relative_error(x, y))
                .fold(0.0, f64::max)
        };
        let check = GoldenCheck {
            total: relative_error(got.total, want.total),
            per_level_totals: worst(&got.per_level_totals, &want.per_level_totals),
            loss_map: worst(&got.loss_map, &want.loss_map),
            attention_map: worst(&got.attention_map, &want.attention_map),
            gradient: worst(&got.gradient, &want.gradient),
            tolerance,
            pass: false,
        };
        let pass = [
            check.total,
            check.per_level_totals,
            check.loss_map,
            check.attention_map,
            check.gradient,
        ]
        .iter()
        .all(|&e| e <= tolerance);
        Ok(GoldenCheck { pass, ..check })
    }
}

/// Worst relative error per output.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GoldenCheck {
    pub total: f64,
    pub per_level_totals: f64,
    pub loss_map: f64,
    pub attention_map: f64,
    pub gradient: f64,
    pub tolerance: f64,
    pub pass: bool,
}
