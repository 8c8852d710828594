//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use scloss::config::{LossConfig, Reduction, Regularizer, SingleResponse};
use scloss::sim::{build_scene, region_masks, Geometry, RegionMasks, SceneSpec, Shape};
use scloss::{GridDims, LabelMap, ProbabilityMap};

/// Level loss of an interior pixel for uniform `p = 0.5`, all foreground,
/// default configuration: `ln 2 / (ln 4 + exp(-1/4))`.
pub fn uniform_level_loss() -> f64 {
    std::f64::consts::LN_2 / (4f64.ln() + (-0.25f64).exp())
}

/// Same with the default two halving levels: `1.5 x` the level loss.
pub fn uniform_total() -> f64 {
    1.5 * uniform_level_loss()
}

fn single(kind: SingleResponse, p: f64, n: f64) -> f64 {
    match kind {
        SingleResponse::Bce | SingleResponse::CrossEntropy => -(n * p.ln() + (1.0 - n) * (1.0 - p).ln()),
        SingleResponse::Mse => (p - n) * (p - n),
        SingleResponse::L1 => (p - n).abs(),
    }
}

fn pair_denominator(cfg: &LossConfig, pi: f64, pj: f64, m: f64) -> f64 {
    let q = pi * pj;
    let mutual = -(m * q.ln() + (1.0 - m) * (1.0 - q).ln());
    let reg = match cfg.regularizer {
        Regularizer::Gaussian => (-q).exp(),
        Regularizer::Distance => ((pi - pj) * (pi - pj)).exp(),
        Regularizer::Constant => 1.0,
    };
    mutual + cfg.alpha * reg
}

/// Straight quadruple loop: for every pixel and level, scan the whole image
/// for pixels at Chebyshev distance exactly `k`.
pub fn naive_image_loss(pred: &[f64], labels: &[u32], h: usize, w: usize, cfg: &LossConfig) -> (f64, Vec<f64>) {
    let eps = cfg.epsilon;
    let p: Vec<f64> = pred.iter().map(|v| v.clamp(eps, 1.0 - eps)).collect();
    let n: Vec<f64> = labels.iter().map(|&v| v as f64).collect();
    let mut map = vec![0.0; h * w];
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            let s = single(cfg.single_response, p[i], n[i]);
            for k in 1..=cfg.k_max {
                let (mut sum, mut count) = (0.0, 0usize);
                for r2 in 0..h {
                    for c2 in 0..w {
                        let dist = r.abs_diff(r2).max(c.abs_diff(c2));
                        if dist != k {
                            continue;
                        }
                        let j = r2 * w + c2;
                        sum += s / pair_denominator(cfg, p[i], p[j], n[i] * n[j]);
                        count += 1;
                    }
                }
                if count > 0 {
                    map[i] += cfg.level_weights[k - 1] * sum / count as f64;
                }
            }
        }
    }
    let sum: f64 = map.iter().sum();
    let total = match cfg.reduction {
        Reduction::Mean => sum / (h * w) as f64,
        Reduction::Sum => sum,
    };
    (total, map)
}

/// `|a - b| / max(|a|, |b|)`, zero when both vanish.
pub fn rel(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Side and offset of the hard square inside the phantom.
pub const SQUARE_SIZE: usize = 32;
pub const SQUARE_SIDE: i64 = 12;
pub const SQUARE_OFFSET: i64 = 10;

/// Easy field `p = 0.95` with a hard square at `p = 0.10`; labels all 1.
pub fn hard_square_phantom() -> (ProbabilityMap, LabelMap, RegionMasks) {
    let dims = GridDims::new(SQUARE_SIZE, SQUARE_SIZE).unwrap();
    let lo = SQUARE_OFFSET;
    let hi = SQUARE_OFFSET + SQUARE_SIDE - 1;
    let spec = SceneSpec::new(
        SQUARE_SIZE,
        SQUARE_SIZE,
        vec![
            Shape {
                geometry: Geometry::Rect { x0: 0, y0: 0, x1: SQUARE_SIZE as i64 - 1, y1: SQUARE_SIZE as i64 - 1 },
                label: 1,
                difficulty: 0.0,
            },
            Shape {
                geometry: Geometry::Rect { x0: lo, y0: lo, x1: hi, y1: hi },
                label: 1,
                difficulty: 0.5,
            },
        ],
    );
    let scene = build_scene(&spec).unwrap();
    let masks = region_masks(&scene, 0.5).unwrap();
    let values = masks.hard.iter().map(|&h| if h { 0.10 } else { 0.95 }).collect();
    (ProbabilityMap::new(dims, values).unwrap(), scene.labels, masks)
}

pub fn masked_mean(values: &[f64], mask: &[bool]) -> f64 {
    let (s, n) = values
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .fold((0.0, 0usize), |(s, n), (v, _)| (s + v, n + 1));
    s / n as f64
}

/// Deterministic instance generator independent of the library's LCG.
pub struct SplitMix(pub u64);

impl SplitMix {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn instance(&mut self, h: usize, w: usize) -> (Vec<f64>, Vec<u32>) {
        let p = (0..h * w).map(|_| self.unit()).collect();
        let l = (0..h * w).map(|_| (self.next_u64() & 1) as u32).collect();
        (p, l)
    }
}

pub fn combinations() -> Vec<(SingleResponse, Regularizer)> {
    SingleResponse::BINARY
        .iter()
        .flat_map(|&s| Regularizer::ALL.iter().map(move |&r| (s, r)))
        .collect()
}
