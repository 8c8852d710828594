//! Saliency evaluation metrics: MAE, adaptive F-measure and max F-measure.
//!
//! F-measures use `beta^2 = 0.3`. Binarisation is inclusive (`p >= tau`).
//! The adaptive threshold is `min(2 * mean(p), 1)`.

use serde::Serialize;

use crate::error::Result;
use crate::grid::{LabelMap, ProbabilityMap};

pub const BETA_SQ: f64 = 0.3;
pub const SWEEP_LEVELS: usize = 256;

pub fn mae(pred: &ProbabilityMap, gt: &LabelMap) -> Result<f64> {
    pred.dims().check_same(gt.dims())?;
    gt.require_binary()?;
    let sum: f64 = pred
        .values()
        .iter()
        .zip(gt.values())
        .map(|(&p, &n)| (p - f64::from(n)).abs())
        .sum();
    Ok(sum / pred.values().len() as f64)
}

pub fn adaptive_threshold(pred: &ProbabilityMap) -> f64 {
    let mean = pred.values().iter().sum::<f64>() / pred.values().len() as f64;
    (2.0 * mean).min(1.0)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Clone, Copy, Debug, Default)]
struct Counts {
    tp: usize,
    fp: usize,
    fn_: usize,
}

impl Counts {
    fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    fn f_measure(&self, beta_sq: f64) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        let denom = beta_sq * p + r;
        if self.tp == 0 || denom == 0.0 {
            0.0
        } else {
            (1.0 + beta_sq) * p * r / denom
        }
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn count(pred: impl Iterator<Item = bool>, gt: &[u32]) -> Counts {
    pred.zip(gt).fold(Counts::default(), |mut c, (p, &g)| {
        match (p, g == 1) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => {}
        }
        c
    })
}

fn counts_at(pred: &ProbabilityMap, gt: &LabelMap, tau: f64) -> Counts {
    count(pred.values().iter().map(|&p| p >= tau), gt.values())
}

/// F-measure of an already binarised prediction. Zero when either map has no
/// positives.
pub fn f_measure(pred_binary: &LabelMap, gt: &LabelMap, beta_sq: f64) -> Result<f64> {
    pred_binary.dims().check_same(gt.dims())?;
    pred_binary.require_binary()?;
    gt.require_binary()?;
    Ok(count(pred_binary.values().iter().map(|&v| v == 1), gt.values()).f_measure(beta_sq))
}

pub fn f_adp(pred: &ProbabilityMap, gt: &LabelMap) -> Result<f64> {
    pred.dims().check_same(gt.dims())?;
    gt.require_binary()?;
    Ok(counts_at(pred, gt, adaptive_threshold(pred)).f_measure(BETA_SQ))
}

/// Maximum F-measure over the thresholds `t / 255` (`t = 0..=255`) plus the
/// adaptive threshold, with the 256-point precision/recall curve.
pub fn f_max(pred: &ProbabilityMap, gt: &LabelMap) -> Result<(f64, Vec<PrPoint>)> {
    pred.dims().check_same(gt.dims())?;
    gt.require_binary()?;
    let mut best = counts_at(pred, gt, adaptive_threshold(pred)).f_measure(BETA_SQ);
    let mut curve = Vec::with_capacity(SWEEP_LEVELS);
    for t in 0..SWEEP_LEVELS {
        let threshold = t as f64 / 255.0;
        let c = counts_at(pred, gt, threshold);
        best = best.max(c.f_measure(BETA_SQ));
        curve.push(PrPoint {
            threshold,
            precision: c.precision(),
            recall: c.recall(),
        });
    }
    Ok((best, curve))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricReport {
    pub mae: f64,
    pub f_adp: f64,
    pub f_max: f64,
    pub adaptive_threshold: f64,
    pub pr_curve: Vec<PrPoint>,
}

pub fn evaluate(pred: &ProbabilityMap, gt: &LabelMap) -> Result<MetricReport> {
    let (f_max, pr_curve) = f_max(pred, gt)?;
    Ok(MetricReport {
        mae: mae(pred, gt)?,
        f_adp: f_adp(pred, gt)?,
        f_max,
        adaptive_threshold: adaptive_threshold(pred),
        pr_curve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridDims;
    use proptest::prelude::*;

    fn worked() -> (ProbabilityMap, LabelMap) {
        let d = GridDims::new(1, 4).unwrap();
        (
            ProbabilityMap::new(d, vec![0.8, 0.6, 0.2, 0.0]).unwrap(),
            LabelMap::binary(d, vec![1, 1, 0, 0]).unwrap(),
        )
    }

    #[test]
    fn worked_example() {
        let (pred, gt) = worked();
        assert!((adaptive_threshold(&pred) - 0.8).abs() < 1e-15);
        assert!((f_adp(&pred, &gt).unwrap() - 0.8125).abs() < 1e-12);
        let binary = LabelMap::binary(gt.dims(), vec![1, 0, 0, 0]).unwrap();
        assert!((f_measure(&binary, &gt, 0.3).unwrap() - 0.8125).abs() < 1e-12);
        assert_eq!(f_max(&pred, &gt).unwrap().0, 1.0);
    }

    #[test]
    fn mae_cases() {
        let d = GridDims::new(2, 3).unwrap();
        let gt = LabelMap::binary(d, vec![1, 0, 0, 1, 1, 0]).unwrap();
        let same = ProbabilityMap::new(d, gt.values().iter().map(|&v| f64::from(v)).collect()).unwrap();
        let inverted = ProbabilityMap::new(d, gt.values().iter().map(|&v| 1.0 - f64::from(v)).collect()).unwrap();
        assert_eq!(mae(&same, &gt).unwrap(), 0.0);
        assert_eq!(mae(&inverted, &gt).unwrap(), 1.0);
        assert_eq!(mae(&ProbabilityMap::uniform(d, 0.5).unwrap(), &gt).unwrap(), 0.5);
    }

    #[test]
    fn adaptive_threshold_cases() {
        let d = GridDims::new(2, 2).unwrap();
        assert!((adaptive_threshold(&ProbabilityMap::uniform(d, 0.4).unwrap()) - 0.8).abs() < 1e-15);
        assert_eq!(adaptive_threshold(&ProbabilityMap::uniform(d, 0.6).unwrap()), 1.0);
        assert_eq!(adaptive_threshold(&ProbabilityMap::uniform(d, 0.0).unwrap()), 0.0);
    }

    #[test]
    fn degenerate_f_measures() {
        let d = GridDims::new(2, 2).unwrap();
        let gt = LabelMap::binary(d, vec![1, 1, 0, 0]).unwrap();
        let none = LabelMap::filled(d, 0).unwrap();
        assert_eq!(f_measure(&none, &gt, 0.3).unwrap(), 0.0);
        assert_eq!(f_measure(&gt, &none, 0.3).unwrap(), 0.0);
        assert_eq!(f_measure(&gt, &gt, 0.3).unwrap(), 1.0);
        // Zero map: adaptive threshold 0 makes every pixel positive under >=.
        let zero = ProbabilityMap::uniform(d, 0.0).unwrap();
        assert!(f_adp(&zero, &none).unwrap() == 0.0);
    }

    #[test]
    fn perfect_binary_prediction() {
        let d = GridDims::new(2, 2).unwrap();
        let gt = LabelMap::binary(d, vec![1, 1, 0, 0]).unwrap();
        let pred = ProbabilityMap::new(d, vec![1.0, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!(f_adp(&pred, &gt).unwrap(), 1.0);
        assert_eq!(f_max(&pred, &gt).unwrap().0, 1.0);
    }

    #[test]
    fn uninformative_prediction() {
        let d = GridDims::new(2, 2).unwrap();
        let gt = LabelMap::binary(d, vec![1, 1, 0, 0]).unwrap();
        let (f, curve) = f_max(&ProbabilityMap::uniform(d, 0.5).unwrap(), &gt).unwrap();
        assert!((f - 0.65 / 1.15).abs() < 1e-12);
        assert!((f - 0.5652).abs() < 1e-4);
        assert_eq!(curve.len(), 256);
    }

    fn instance() -> impl Strategy<Value = (ProbabilityMap, LabelMap)> {
        (1usize..6, 1usize..6).prop_flat_map(|(h, w)| {
            let n = h * w;
            (
                proptest::collection::vec(0.0..=1.0f64, n),
                proptest::collection::vec(0u32..2, n),
            )
                .prop_map(move |(p, g)| {
                    let d = GridDims::new(h, w).unwrap();
                    (ProbabilityMap::new(d, p).unwrap(), LabelMap::binary(d, g).unwrap())
                })
        })
    }

    proptest! {
        #[test]
        fn f_max_dominates_f_adp((pred, gt) in instance()) {
            let r = evaluate(&pred, &gt).unwrap();
            prop_assert!(r.f_max >= r.f_adp - 1e-9);
            for v in [r.mae, r.f_adp, r.f_max, r.adaptive_threshold] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }

        #[test]
        fn mae_complement_identity((pred, gt) in instance()) {
            let inv = ProbabilityMap::new(pred.dims(), pred.values().iter().map(|p| 1.0 - p).collect()).unwrap();
            let s = mae(&pred, &gt).unwrap() + mae(&inv, &gt).unwrap();
            prop_assert!((s - 1.0).abs() < 1e-12);
        }

        #[test]
        fn metrics_ignore_pixel_order((pred, gt) in instance(), rot in 0usize..30) {
            let n = pred.values().len();
            let k = rot % n;
            let mut p = pred.values().to_vec();
            let mut g = gt.values().to_vec();
            p.rotate_left(k);
            g.rotate_left(k);
            let a = evaluate(&pred, &gt).unwrap();
            let b = evaluate(
                &ProbabilityMap::new(pred.dims(), p).unwrap(),
                &LabelMap::binary(gt.dims(), g).unwrap(),
            ).unwrap();
            prop_assert!((a.mae - b.mae).abs() < 1e-12);
            prop_assert_eq!(a.f_adp, b.f_adp);
            prop_assert_eq!(a.f_max, b.f_max);
        }
    }
}
