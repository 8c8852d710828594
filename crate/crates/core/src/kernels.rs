//! Scalar term kernels and their partial derivatives.
//!
//! A pair term is `S(p_i, n_i) / D(p_i, p_j)` with
//! `D = mutual(p_i p_j, m) + alpha * f(p_i, p_j)`. The checked public
//! functions validate their arguments; the `pub(crate)` forms are used by the
//! per-pixel loops after inputs have been clamped once.

use crate::config::{Regularizer, SingleResponse};
use crate::error::{Error, Result};

fn check_open_unit(value: f64, index: usize) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(Error::ValueOutOfRange {
            index,
            value,
            range: "(0, 1) (clamp probabilities first)",
        })
    }
}

fn check_indicator(value: u32, index: usize) -> Result<()> {
    if value > 1 {
        return Err(Error::LabelOutOfRange {
            index,
            label: value,
            max: 1,
        });
    }
    Ok(())
}

/// Single-response loss of one pixel; always `>= 0`.
pub fn single_response(kind: SingleResponse, p: f64, n: u32) -> Result<f64> {
    check_open_unit(p, 0)?;
    check_indicator(n, 1)?;
    Ok(single_value(kind, p, f64::from(n)))
}

/// Mutual response of a pixel pair with indicator `m` (`n_i n_j` for binary labels).
pub fn mutual_response(p_i: f64, p_j: f64, m: u32) -> Result<f64> {
    check_open_unit(p_i, 0)?;
    check_open_unit(p_j, 1)?;
    check_indicator(m, 2)?;
    Ok(mutual_value(p_i * p_j, f64::from(m)))
}

pub fn pairwise_regularizer(kind: Regularizer, p_i: f64, p_j: f64) -> Result<f64> {
    check_open_unit(p_i, 0)?;
    check_open_unit(p_j, 1)?;
    Ok(reg_value(kind, p_i, p_j))
}

#[inline]
pub(crate) fn single_value(kind: SingleResponse, p: f64, n: f64) -> f64 {
    match kind {
        SingleResponse::Bce | SingleResponse::CrossEntropy => {
            -(n * p.ln() + (1.0 - n) * (1.0 - p).ln())
        }
        SingleResponse::Mse => (p - n) * (p - n),
        SingleResponse::L1 => (p - n).abs(),
    }
}

#[inline]
pub(crate) fn single_deriv(kind: SingleResponse, p: f64, n: f64) -> f64 {
    match kind {
        SingleResponse::Bce | SingleResponse::CrossEntropy => -(n / p - (1.0 - n) / (1.0 - p)),
        SingleResponse::Mse => 2.0 * (p - n),
        SingleResponse::L1 => {
            let d = p - n;
            if d > 0.0 {
                1.0
            } else if d < 0.0 {
                -1.0
            } else {
                0.0
            }
        }
    }
}

#[inline]
pub(crate) fn mutual_value(q: f64, m: f64) -> f64 {
    -(m * q.ln() + (1.0 - m) * (1.0 - q).ln())
}

#[inline]
fn mutual_dq(q: f64, m: f64) -> f64 {
    -(m / q - (1.0 - m) / (1.0 - q))
}

#[inline]
pub(crate) fn reg_value(kind: Regularizer, p_i: f64, p_j: f64) -> f64 {
    match kind {
        Regularizer::Gaussian => (-p_i * p_j).exp(),
        Regularizer::Distance => {
            let d = p_i - p_j;
            (d * d).exp()
        }
        Regularizer::Constant => 1.0,
    }
}

/// `(df/dp_i, df/dp_j)`.
#[inline]
fn reg_grad(kind: Regularizer, p_i: f64, p_j: f64) -> (f64, f64) {
    match kind {
        Regularizer::Gaussian => {
            let e = (-p_i * p_j).exp();
            (-p_j * e, -p_i * e)
        }
        Regularizer::Distance => {
            let d = p_i - p_j;
            let g = 2.0 * d * (d * d).exp();
            (g, -g)
        }
        Regularizer::Constant => (0.0, 0.0),
    }
}

/// Denominator of one pair term.
#[inline]
pub(crate) fn denominator(kind: Regularizer, alpha: f64, p_i: f64, p_j: f64, m: f64) -> f64 {
    mutual_value(p_i * p_j, m) + alpha * reg_value(kind, p_i, p_j)
}

/// Denominator together with `(dD/dp_i, dD/dp_j)`.
#[inline]
pub(crate) fn denominator_grad(
    kind: Regularizer,
    alpha: f64,
    p_i: f64,
    p_j: f64,
    m: f64,
) -> (f64, f64, f64) {
    let q = p_i * p_j;
    let dm = mutual_dq(q, m);
    let (fi, fj) = reg_grad(kind, p_i, p_j);
    (
        denominator(kind, alpha, p_i, p_j, m),
        dm * p_j + alpha * fi,
        dm * p_i + alpha * fj,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const EPS: f64 = 1e-7;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn single_response_closed_forms() {
        let ln2 = std::f64::consts::LN_2;
        assert!(close(single_response(SingleResponse::Bce, 0.5, 1).unwrap(), ln2, 1e-15));
        assert_eq!(single_response(SingleResponse::Mse, 0.5, 1).unwrap(), 0.25);
        assert_eq!(single_response(SingleResponse::L1, 0.5, 1).unwrap(), 0.5);
        let perfect = single_response(SingleResponse::Bce, 1.0 - EPS, 1).unwrap();
        assert!(close(perfect, 1e-7, 1e-13), "{perfect}");
    }

    #[test]
    fn single_response_rejects_bad_inputs() {
        assert!(single_response(SingleResponse::Bce, 0.0, 1).is_err());
        assert!(single_response(SingleResponse::Bce, 1.0, 1).is_err());
        assert!(single_response(SingleResponse::Bce, 0.5, 2).is_err());
    }

    #[test]
    fn mutual_response_closed_forms() {
        assert!(close(mutual_response(0.5, 0.5, 1).unwrap(), 1.386_294_361_119_890_6, 1e-15));
        assert!(close(mutual_response(0.9, 0.9, 0).unwrap(), -(0.19f64).ln(), 1e-15));
        assert!(close(mutual_response(0.9, 0.9, 0).unwrap(), 1.660_731_206_821_651, 1e-12));
        let perfect = mutual_response(1.0 - EPS, 1.0 - EPS, 1).unwrap();
        assert!(close(perfect, 2e-7, 1e-12), "{perfect}");
        assert!(mutual_response(0.5, 0.5, 3).is_err());
    }

    #[test]
    fn regularizer_closed_forms() {
        let g = pairwise_regularizer(Regularizer::Gaussian, 1.0 - EPS, 1.0 - EPS).unwrap();
        assert!(close(g, (-1.0f64).exp(), 1e-6));
        assert!(close(g, 0.367_879_4, 1e-6));
        for p in [0.01, 0.3, 0.77] {
            assert_eq!(pairwise_regularizer(Regularizer::Distance, p, p).unwrap(), 1.0);
        }
        let d = pairwise_regularizer(Regularizer::Distance, 0.2, 0.7).unwrap();
        assert!(close(d, 1.284_025_4, 1e-7));
        assert_eq!(pairwise_regularizer(Regularizer::Constant, 0.2, 0.9).unwrap(), 1.0);
    }

    fn central(f: impl Fn(f64) -> f64, x: f64) -> f64 {
        let h = 1e-6;
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    proptest! {
        #[test]
        fn kernels_symmetric(p in 1e-6..(1.0 - 1e-6), q in 1e-6..(1.0 - 1e-6), m in 0u32..2) {
            prop_assert_eq!(mutual_response(p, q, m).unwrap(), mutual_response(q, p, m).unwrap());
            for kind in Regularizer::ALL {
                prop_assert_eq!(
                    pairwise_regularizer(kind, p, q).unwrap(),
                    pairwise_regularizer(kind, q, p).unwrap()
                );
            }
        }

        #[test]
        fn regularizer_ranges(p in 1e-7..(1.0 - 1e-7), q in 1e-7..(1.0 - 1e-7)) {
            let g = reg_value(Regularizer::Gaussian, p, q);
            prop_assert!(g > (-1.0f64).exp() && g < 1.0);
            let d = reg_value(Regularizer::Distance, p, q);
            prop_assert!((1.0..std::f64::consts::E).contains(&d));
        }

        #[test]
        fn denominator_partials_match_differences(
            p in 0.05..0.95f64, q in 0.05..0.95f64, m in 0u32..2, alpha in 0.1..3.0f64
        ) {
            let m = f64::from(m);
            for kind in Regularizer::ALL {
                let (_, di, dj) = denominator_grad(kind, alpha, p, q, m);
                let fi = central(|x| denominator(kind, alpha, x, q, m), p);
                let fj = central(|x| denominator(kind, alpha, p, x, m), q);
                prop_assert!(close(di, fi, 1e-6 * (1.0 + di.abs())), "{kind}: {di} vs {fi}");
                prop_assert!(close(dj, fj, 1e-6 * (1.0 + dj.abs())), "{kind}: {dj} vs {fj}");
            }
        }

        #[test]
        fn single_partials_match_differences(p in 0.05..0.95f64, n in 0u32..2) {
            let n = f64::from(n);
            for kind in SingleResponse::BINARY {
                let a = single_deriv(kind, p, n);
                let f = central(|x| single_value(kind, x, n), p);
                prop_assert!(close(a, f, 1e-6 * (1.0 + a.abs())));
            }
        }
    }
}
