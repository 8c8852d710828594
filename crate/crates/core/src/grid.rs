//! Image-grid value types and Chebyshev ring neighbourhoods.
//!
//! All maps are stored row-major. Reductions over a map are always performed
//! in row-major order so results are reproducible bit-for-bit.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Clamp bound applied to probabilities before any logarithm is taken.
pub const DEFAULT_EPSILON: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridDims {
    pub height: usize,
    pub width: usize,
}

impl GridDims {
    pub fn new(height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::EmptyGrid { height, width });
        }
        Ok(GridDims { height, width })
    }

    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, pos: PixelPos) -> bool {
        pos.row < self.height && pos.col < self.width
    }

    pub fn index(&self, pos: PixelPos) -> usize {
        pos.row * self.width + pos.col
    }

    pub fn pos(&self, index: usize) -> PixelPos {
        PixelPos::new(index / self.width, index % self.width)
    }

    /// Row-major iterator over every pixel position.
    pub fn positions(&self) -> impl Iterator<Item = PixelPos> + '_ {
        (0..self.height).flat_map(move |row| (0..self.width).map(move |col| PixelPos { row, col }))
    }

    /// Translates `pos` by `(dr, dc)`; `None` when the result leaves the grid.
    #[inline]
    pub fn offset(&self, pos: PixelPos, dr: isize, dc: isize) -> Option<PixelPos> {
        let row = pos.row as isize + dr;
        let col = pos.col as isize + dc;
        if row < 0 || col < 0 || row >= self.height as isize || col >= self.width as isize {
            None
        } else {
            Some(PixelPos::new(row as usize, col as usize))
        }
    }

    pub(crate) fn check_same(&self, other: GridDims) -> Result<()> {
        if *self != other {
            return Err(Error::DimensionMismatch {
                left: *self,
                right: other,
            });
        }
        Ok(())
    }

    fn check_len(&self, found: usize) -> Result<()> {
        if found != self.len() {
            return Err(Error::LengthMismatch {
                dims: *self,
                expected: self.len(),
                found,
            });
        }
        Ok(())
    }
}

impl fmt::Display for GridDims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.height, self.width)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PixelPos {
    pub row: usize,
    pub col: usize,
}

impl PixelPos {
    pub const fn new(row: usize, col: usize) -> Self {
        PixelPos { row, col }
    }

    pub fn chebyshev(&self, other: PixelPos) -> usize {
        self.row.abs_diff(other.row).max(self.col.abs_diff(other.col))
    }
}

impl fmt::Display for PixelPos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

/// Per-pixel objectness probabilities in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityMap {
    dims: GridDims,
    values: Vec<f64>,
}

impl ProbabilityMap {
    pub fn new(dims: GridDims, values: Vec<f64>) -> Result<Self> {
        dims.check_len(values.len())?;
        check_unit_interval(&values)?;
        Ok(ProbabilityMap { dims, values })
    }

    pub fn uniform(dims: GridDims, value: f64) -> Result<Self> {
        Self::new(dims, vec![value; dims.len()])
    }

    /// Maps 8-bit grey levels to `v / 255`.
    pub fn from_u8(dims: GridDims, levels: &[u8]) -> Result<Self> {
        Self::new(dims, levels.iter().map(|&v| f64::from(v) / 255.0).collect())
    }

    /// Maps 16-bit grey levels to `v / 65535`.
    pub fn from_u16(dims: GridDims, levels: &[u16]) -> Result<Self> {
        Self::new(dims, levels.iter().map(|&v| f64::from(v) / 65535.0).collect())
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, pos: PixelPos) -> f64 {
        self.values[self.dims.index(pos)]
    }

    /// Clamps every value into `[epsilon, 1 - epsilon]`.
    pub fn clamp(&self, epsilon: f64) -> Result<ProbabilityMap> {
        check_epsilon(epsilon)?;
        let (lo, hi) = (epsilon, 1.0 - epsilon);
        Ok(ProbabilityMap {
            dims: self.dims,
            values: self.values.iter().map(|&p| p.clamp(lo, hi)).collect(),
        })
    }
}

/// Free-function form of [`ProbabilityMap::clamp`].
pub fn clamp_probabilities(map: &ProbabilityMap, epsilon: f64) -> Result<ProbabilityMap> {
    map.clamp(epsilon)
}

pub(crate) fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(Error::InvalidEpsilon(epsilon));
    }
    Ok(())
}

fn check_unit_interval(values: &[f64]) -> Result<()> {
    match values
        .iter()
        .position(|v| !(0.0..=1.0).contains(v))
    {
        Some(index) => Err(Error::ValueOutOfRange {
            index,
            value: values[index],
            range: "[0, 1]",
        }),
        None => Ok(()),
    }
}

/// Ground-truth labels: `{0, 1}` for binary maps, `0..classes` otherwise.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMap {
    dims: GridDims,
    classes: u32,
    values: Vec<u32>,
}

impl LabelMap {
    pub fn binary(dims: GridDims, values: Vec<u32>) -> Result<Self> {
        Self::with_classes(dims, values, 2)
    }

    pub fn with_classes(dims: GridDims, values: Vec<u32>, classes: u32) -> Result<Self> {
        dims.check_len(values.len())?;
        if classes < 2 {
            return Err(Error::InvalidConfig(format!(
                "label maps need at least 2 classes, got {classes}"
            )));
        }
        if let Some(index) = values.iter().position(|&v| v >= classes) {
            return Err(Error::LabelOutOfRange {
                index,
                label: values[index],
                max: classes - 1,
            });
        }
        Ok(LabelMap {
            dims,
            classes,
            values,
        })
    }

    pub fn filled(dims: GridDims, label: u32) -> Result<Self> {
        Self::binary(dims, vec![label; dims.len()])
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn classes(&self) -> u32 {
        self.classes
    }

    pub fn values(&self) -> &[u32] {
        &self.values
    }

    pub fn get(&self, pos: PixelPos) -> u32 {
        self.values[self.dims.index(pos)]
    }

    /// Fails unless every label is 0 or 1.
    pub fn require_binary(&self) -> Result<()> {
        match self.values.iter().position(|&v| v > 1) {
            Some(index) => Err(Error::LabelOutOfRange {
                index,
                label: self.values[index],
                max: 1,
            }),
            None => Ok(()),
        }
    }

    pub fn count(&self, label: u32) -> usize {
        self.values.iter().filter(|&&v| v == label).count()
    }
}

/// Unconstrained real-valued map: losses, attention weights, gradients, logits.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldMap {
    dims: GridDims,
    values: Vec<f64>,
}

impl FieldMap {
    pub fn new(dims: GridDims, values: Vec<f64>) -> Result<Self> {
        dims.check_len(values.len())?;
        Ok(FieldMap { dims, values })
    }

    pub fn zeros(dims: GridDims) -> Self {
        FieldMap {
            dims,
            values: vec![0.0; dims.len()],
        }
    }

    pub fn filled(dims: GridDims, value: f64) -> Self {
        FieldMap {
            dims,
            values: vec![value; dims.len()],
        }
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, pos: PixelPos) -> f64 {
        self.values[self.dims.index(pos)]
    }

    /// Row-major sum.
    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.values.len() as f64
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Mean over the pixels where `mask` is set; `None` for an empty mask.
    pub fn masked_mean(&self, mask: &[bool]) -> Option<f64> {
        let (sum, count) = self
            .values
            .iter()
            .zip(mask)
            .filter(|(_, &m)| m)
            .fold((0.0, 0usize), |(s, c), (&v, _)| (s + v, c + 1));
        (count > 0).then(|| sum / count as f64)
    }
}

/// Offsets `(dr, dc)` of the level-`k` Chebyshev ring in row-major order.
pub(crate) fn ring_offsets(k: usize) -> Vec<(isize, isize)> {
    let k = k as isize;
    let mut out = Vec::with_capacity(8 * k as usize);
    for dr in -k..=k {
        for dc in -k..=k {
            if dr.abs().max(dc.abs()) == k {
                out.push((dr, dc));
            }
        }
    }
    out
}

/// In-bounds pixels at Chebyshev distance exactly `k` from `pos`, row-major.
///
/// An interior pixel has `8k` ring members; near the border only the
/// in-bounds members are returned.
pub fn ring_neighbors(pos: PixelPos, k: usize, dims: GridDims) -> Result<Vec<PixelPos>> {
    if k < 1 {
        return Err(Error::InvalidLevel(k));
    }
    if !dims.contains(pos) {
        return Err(Error::OutOfBounds {
            row: pos.row,
            col: pos.col,
            dims,
        });
    }
    Ok(ring_offsets(k)
        .into_iter()
        .filter_map(|(dr, dc)| dims.offset(pos, dr, dc))
        .collect())
}
