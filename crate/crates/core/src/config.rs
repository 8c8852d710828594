//! Loss hyperparameters and their TOML representation.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{check_epsilon, DEFAULT_EPSILON};

/// Per-pixel loss placed in the numerator of every pair term.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SingleResponse {
    Bce,
    Mse,
    L1,
    /// Multi-class cross entropy; identical to `Bce` on binary labels.
    CrossEntropy,
}

/// Bounded positive pair function added to the mutual response.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regularizer {
    /// `exp(-p_i p_j)`
    Gaussian,
    /// `exp((p_i - p_j)^2)`
    Distance,
    Constant,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reduction {
    Mean,
    Sum,
}

macro_rules! str_enum {
    ($ty:ty { $($name:literal => $variant:expr),+ $(,)? }) => {
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok($variant),)+
                    other => Err(Error::InvalidConfig(format!(
                        "unknown {} `{other}` (expected one of: {})",
                        stringify!($ty),
                        [$($name),+].join(", ")
                    ))),
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                let name = match self { $(v if *v == $variant => $name,)+ _ => unreachable!() };
                f.write_str(name)
            }
        }
    };
}
pub(crate) use str_enum;

str_enum!(SingleResponse {
    "bce" => SingleResponse::Bce,
    "mse" => SingleResponse::Mse,
    "l1" => SingleResponse::L1,
    "cross_entropy" => SingleResponse::CrossEntropy,
});

str_enum!(Regularizer {
    "gaussian" => Regularizer::Gaussian,
    "distance" => Regularizer::Distance,
    "constant" => Regularizer::Constant,
});

str_enum!(Reduction {
    "mean" => Reduction::Mean,
    "sum" => Reduction::Sum,
});

impl SingleResponse {
    pub const BINARY: [SingleResponse; 3] =
        [SingleResponse::Bce, SingleResponse::Mse, SingleResponse::L1];
}

impl Regularizer {
    pub const ALL: [Regularizer; 3] = [
        Regularizer::Gaussian,
        Regularizer::Distance,
        Regularizer::Constant,
    ];
}

/// Hyperparameters of the spatial coherence loss.
///
/// Defaults: two adjacency levels weighted `1, 1/2`, `alpha = 1`, BCE over a
/// Gaussian pair regulariser, mean reduction, add-on weight 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub k_max: usize,
    pub alpha: f64,
    pub single_response: SingleResponse,
    pub regularizer: Regularizer,
    pub epsilon: f64,
    pub reduction: Reduction,
    pub level_weights: Vec<f64>,
    pub addon_weight: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            k_max: 2,
            alpha: 1.0,
            single_response: SingleResponse::Bce,
            regularizer: Regularizer::Gaussian,
            epsilon: DEFAULT_EPSILON,
            reduction: Reduction::Mean,
            level_weights: halving_weights(2),
            addon_weight: 1.0,
        }
    }
}

/// `(1/2)^(k-1)` for `k = 1..=k_max`.
pub fn halving_weights(k_max: usize) -> Vec<f64> {
    (0..k_max).map(|k| 0.5f64.powi(k as i32)).collect()
}

impl LossConfig {
    /// Default configuration with `k_max` levels and halving level weights.
    pub fn with_levels(k_max: usize) -> Self {
        LossConfig {
            k_max,
            level_weights: halving_weights(k_max),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_max < 1 {
            return Err(Error::InvalidConfig("k_max must be >= 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "alpha must be positive and finite, got {}",
                self.alpha
            )));
        }
        check_epsilon(self.epsilon).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        if self.level_weights.len() != self.k_max {
            return Err(Error::InvalidConfig(format!(
                "level_weights has {} entries but k_max is {}",
                self.level_weights.len(),
                self.k_max
            )));
        }
        // Zero is tolerated so a level can be switched off; negative is not.
        if let Some(w) = self
            .level_weights
            .iter()
            .find(|w| !(**w >= 0.0 && w.is_finite()))
        {
            return Err(Error::InvalidConfig(format!(
                "level weights must be non-negative and finite, got {w}"
            )));
        }
        if !self.addon_weight.is_finite() {
            return Err(Error::InvalidConfig("addon_weight must be finite".into()));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ConfigFile =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(e.message().to_string()))?;
        file.resolve()
    }

    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::InvalidConfig(msg) => {
                Error::InvalidConfig(format!("{}: {msg}", path.display()))
            }
            other => other,
        })
    }
}

/// On-disk form: every field optional, missing ones take the defaults.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    k_max: Option<usize>,
    alpha: Option<f64>,
    single_response: Option<SingleResponse>,
    regularizer: Option<Regularizer>,
    epsilon: Option<f64>,
    reduction: Option<Reduction>,
    level_weights: Option<Vec<f64>>,
    addon_weight: Option<f64>,
}

impl ConfigFile {
    fn resolve(self) -> Result<LossConfig> {
        let defaults = LossConfig::default();
        let k_max = self
            .k_max
            .or_else(|| self.level_weights.as_ref().map(Vec::len))
            .unwrap_or(defaults.k_max);
        let cfg = LossConfig {
            k_max,
            alpha: self.alpha.unwrap_or(defaults.alpha),
            single_response: self.single_response.unwrap_or(defaults.single_response),
            regularizer: self.regularizer.unwrap_or(defaults.regularizer),
            epsilon: self.epsilon.unwrap_or(defaults.epsilon),
            reduction: self.reduction.unwrap_or(defaults.reduction),
            level_weights: self.level_weights.unwrap_or_else(|| halving_weights(k_max)),
            addon_weight: self.addon_weight.unwrap_or(defaults.addon_weight),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
