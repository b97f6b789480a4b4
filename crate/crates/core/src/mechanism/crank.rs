//! The planar crank-slider: crank pin `B = (x_B, y_B)` on a radius-`l1`
//! circle, slider `C = (x_C, 0)` at distance `l2` from `B`, actuated on
//! `x_C`, forward map `(x_B, y_B)`.

use nalgebra::{DMatrix, DVector};

use super::{ActuatorProjection, ConstraintSystem, FormalManipulator, SystemKind};
use crate::{Error, Result};

/// Builds the crank-slider manipulator (3 coordinates, 2 constraints).
pub fn build_crank_slider(l1: f64, l2: f64) -> Result<FormalManipulator> {
    for (name, value) in [("l1", l1), ("l2", l2)] {
        if !value.is_finite() {
            return Err(Error::NonFinite { what: "crank-slider length" });
        }
        if value <= 0.0 {
            return Err(Error::InvalidParameter {
                name,
                value,
                constraint: "> 0",
            });
        }
    }
    Ok(FormalManipulator::new(
        ConstraintSystem {
            kind: SystemKind::CrankSlider { l1, l2 },
        },
        vec![ActuatorProjection::Coordinate(2)],
        "crank-slider",
        1,
    ))
}

pub(crate) fn eval(l1: f64, l2: f64, x: &[f64]) -> DVector<f64> {
    let (xb, yb, xc) = (x[0], x[1], x[2]);
    DVector::from_row_slice(&[
        xb * xb + yb * yb - l1 * l1,
        (xc - xb) * (xc - xb) + yb * yb - l2 * l2,
    ])
}

pub(crate) fn jacobian(_l1: f64, _l2: f64, x: &[f64]) -> DMatrix<f64> {
    let (xb, yb, xc) = (x[0], x[1], x[2]);
    DMatrix::from_row_slice(
        2,
        3,
        &[
            2.0 * xb,
            2.0 * yb,
            0.0,
            -2.0 * (xc - xb),
            2.0 * yb,
            2.0 * (xc - xb),
        ],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{numerical_rank, ToleranceConfig};

    #[test]
    fn crank_circle_constraint() {
        let m = build_crank_slider(1.5, 2.0).unwrap();
        let f = m.constraints().eval(&[1.5, 0.0, 7.0]).unwrap();
        assert_eq!(f[0], 0.0);
    }

    #[test]
    fn equal_lengths_make_the_folded_point_rank_one() {
        let l = 1.3;
        let m = build_crank_slider(l, l).unwrap();
        let x = [0.0, l, 0.0];
        let f = m.constraints().eval(&x).unwrap();
        assert_eq!(f[0], 0.0);
        assert_eq!(f[1], 0.0);
        let j = m.constraints().jacobian(&x).unwrap();
        for col in 0..3 {
            let expect = if col == 1 { 2.0 * l } else { 0.0 };
            assert_eq!(j[(0, col)], expect);
            assert_eq!(j[(1, col)], expect);
        }
        assert_eq!(numerical_rank(&j, &ToleranceConfig::default()).unwrap(), 1);
    }

    #[test]
    fn rejects_nonpositive_lengths() {
        assert!(build_crank_slider(0.0, 1.0).is_err());
        assert!(build_crank_slider(1.0, -2.0).is_err());
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let m = build_crank_slider(1.0, 2.0).unwrap();
        for seed in 0..100u32 {
            let s = seed as f64;
            let x = [(s * 0.9).sin(), (s * 1.7).cos(), (s * 0.4).sin() * 2.0];
            let j = m.constraints().jacobian(&x).unwrap();
            let h = 1e-6;
            for col in 0..3 {
                let mut plus = x;
                let mut minus = x;
                plus[col] += h;
                minus[col] -= h;
                let fp = m.constraints().eval(&plus).unwrap();
                let fm = m.constraints().eval(&minus).unwrap();
                for row in 0..2 {
                    let fd = (fp[row] - fm[row]) / (2.0 * h);
                    assert!((j[(row, col)] - fd).abs() < 1e-6 * j[(row, col)].abs().max(1.0));
                }
            }
        }
    }
}
