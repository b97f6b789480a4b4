//! A plane algebraic curve whose origin is a rank-zero point of the gradient
//! yet still a manifold point: `f(x, y) = y^3 + x^2 y - x^4`.
//!
//! Viewed as a quadratic in `x^2`, the curve factors over analytic germs as
//! `-(x^2 - u(y))(x^2 - v(y))` with `u, v = y (1 ± sqrt(1 + 4y))/2`, and near
//! the origin the real locus is exactly the graph of a single analytic
//! branch `y(x)`. Both facts are checked numerically here.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// `y^3 + coeff * x^2 y - x^4`. The illustrative figure uses `coeff = 2`,
/// the analysis `coeff = 1`.
pub fn curve_eval_coeff(x: f64, y: f64, coeff: f64) -> f64 {
    y * y * y + coeff * x * x * y - x * x * x * x
}

/// The curve polynomial with unit cross coefficient.
pub fn curve_eval(x: f64, y: f64) -> f64 {
    curve_eval_coeff(x, y, 1.0)
}

/// Analytic factor roots of `x^4 - y x^2 - y^3` as a quadratic in `x^2`:
/// `u, v = y (1 ± sqrt(1 + 4y))/2`, defined for `y > -1/4`.
pub fn factor_roots(y: f64) -> Result<(f64, f64)> {
    let disc = 1.0 + 4.0 * y;
    if disc < 0.0 {
        return Err(Error::Domain {
            detail: format!("factor roots need y >= -1/4, got {y}"),
        });
    }
    let s = disc.sqrt();
    Ok((y * (1.0 + s) / 2.0, y * (1.0 - s) / 2.0))
}

/// The unique real solution branch of `f(x, y) = 0` through the origin,
/// for `|x| < 0.5`: inverts `x^2 = u(y)` with a bisection bracket and a
/// Newton polish.
pub fn branch(x: f64) -> Result<f64> {
    if x.is_nan() || x.abs() >= 0.5 {
        return Err(Error::Domain {
            detail: format!("branch is computed for |x| < 0.5, got {x}"),
        });
    }
    let target = x * x;
    if target == 0.0 {
        return Ok(0.0);
    }
    // u is increasing on [0, 0.25] with u(0.215) > 0.25 >= x^2.
    let u = |y: f64| y * (1.0 + (1.0 + 4.0 * y).sqrt()) / 2.0;
    let mut lo = 0.0;
    let mut hi = 0.25;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if u(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut y = 0.5 * (lo + hi);
    // Newton on the cubic itself for the last digits.
    for _ in 0..4 {
        let f = curve_eval(x, y);
        let df = 3.0 * y * y + x * x;
        if df.abs() < 1e-300 {
            break;
        }
        y -= f / df;
    }
    Ok(y)
}

/// Max of `|f(x,y) + (x^2 - u(y))(x^2 - v(y))|` over a uniform grid: the
/// corrected analytic factorization residual (identically zero up to
/// rounding).
pub fn factor_identity_residual(
    x_range: (f64, f64),
    y_range: (f64, f64),
    nx: usize,
    ny: usize,
) -> Result<f64> {
    if y_range.0 <= -0.25 {
        return Err(Error::Domain {
            detail: "factor identity grid needs y > -1/4".into(),
        });
    }
    let mut worst: f64 = 0.0;
    for i in 0..nx.max(1) {
        let x = if nx <= 1 {
            x_range.0
        } else {
            x_range.0 + (x_range.1 - x_range.0) * i as f64 / (nx - 1) as f64
        };
        for j in 0..ny.max(1) {
            let y = if ny <= 1 {
                y_range.0
            } else {
                y_range.0 + (y_range.1 - y_range.0) * j as f64 / (ny - 1) as f64
            };
            let (u, v) = factor_roots(y)?;
            let residual = curve_eval(x, y) + (x * x - u) * (x * x - v);
            worst = worst.max(residual.abs());
        }
    }
    Ok(worst)
}

/// Max residual of the factorization as printed with `sqrt(1 + y)` factors,
/// `(x^2 - y(1 + sqrt(1+y)))(x^2 + y(1 + sqrt(1+y)))`, against `f` on the
/// same grid. Not small: the printed factors generate no `x^2 y` term. Kept
/// as the recorded evidence for using the corrected factors above.
pub fn printed_factor_residual(
    x_range: (f64, f64),
    y_range: (f64, f64),
    nx: usize,
    ny: usize,
) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..nx.max(1) {
        let x = x_range.0 + (x_range.1 - x_range.0) * i as f64 / (nx.max(2) - 1) as f64;
        for j in 0..ny.max(1) {
            let y = y_range.0 + (y_range.1 - y_range.0) * j as f64 / (ny.max(2) - 1) as f64;
            if 1.0 + y < 0.0 {
                continue;
            }
            let g = y * (1.0 + (1.0 + y).sqrt());
            let residual = curve_eval(x, y) - (x * x - g) * (x * x + g);
            worst = worst.max(residual.abs());
        }
    }
    worst
}

/// One emitted curve point.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CurveSample {
    pub x: f64,
    pub y: f64,
    pub residual: f64,
}

/// Samples the real curve `y^3 + coeff x^2 y - x^4 = 0` over `[x_min,
/// x_max]`, ordered by `x`. When the range straddles zero the node nearest
/// the origin is snapped onto it, so `(0, 0)` is always present.
pub fn emit_plot_samples(
    x_range: (f64, f64),
    count: usize,
    coeff: f64,
) -> Result<Vec<CurveSample>> {
    let count = count.max(2);
    let (lo, hi) = x_range;
    if hi <= lo || hi.is_nan() || lo.is_nan() {
        return Err(Error::Domain {
            detail: format!("empty sample range [{lo}, {hi}]"),
        });
    }
    let mut xs: Vec<f64> = (0..count)
        .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
        .collect();
    if lo < 0.0 && hi > 0.0 {
        let nearest = xs
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .map(|(i, _)| i)
            .expect("nonempty");
        xs[nearest] = 0.0;
    }
    let mut out = Vec::with_capacity(count);
    for x in xs {
        // The cubic y^3 + c x^2 y - x^4 is strictly increasing in y for
        // c >= 0, so it has exactly one real root.
        let mut y = if x == 0.0 { 0.0 } else { x * x };
        for _ in 0..60 {
            let f = curve_eval_coeff(x, y, coeff);
            let df = 3.0 * y * y + coeff * x * x;
            if df.abs() < 1e-300 {
                break;
            }
            let step = f / df;
            y -= step;
            if step.abs() < 1e-16 * y.abs().max(1.0) {
                break;
            }
        }
        out.push(CurveSample {
            x,
            y,
            residual: curve_eval_coeff(x, y, coeff),
        });
    }
    Ok(out)
}

/// Writes samples as gnuplot-style two-column text: `x y`, one per line, no
/// header.
pub fn write_plot_data<W: std::io::Write>(
    samples: &[CurveSample],
    mut out: W,
) -> std::io::Result<()> {
    for s in samples {
        writeln!(out, "{} {}", s.x, s.y)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_values() {
        assert_eq!(curve_eval(0.0, 0.0), 0.0);
        for x in [0.3, -0.7, 1.2] {
            assert!(curve_eval(x, 0.0) < 0.0, "f(x, 0) = -x^4 < 0");
        }
    }

    #[test]
    fn root_on_the_unit_line_matches_the_cubic_oracle() {
        // f(1, y) = y^3 + y - 1: Newton oracle from y = 0.7.
        let mut y = 0.7f64;
        for _ in 0..60 {
            y -= (y * y * y + y - 1.0) / (3.0 * y * y + 1.0);
        }
        assert!((y - 0.682_327_803_828_019_3).abs() < 1e-12);
        assert!(curve_eval(1.0, y).abs() < 1e-12);
    }

    #[test]
    fn branch_through_the_origin() {
        assert_eq!(branch(0.0).unwrap(), 0.0);
        for x in [0.05, 0.17, 0.3, 0.45] {
            let y = branch(x).unwrap();
            assert!(curve_eval(x, y).abs() < 1e-12, "residual at x = {x}");
            // Even in x.
            assert_eq!(branch(-x).unwrap(), y);
            // Leading behavior y ~ x^2.
            assert!(y > 0.0 && y < x * x * 1.2 + 1e-12);
        }
        assert!(branch(0.6).is_err());
    }

    #[test]
    fn branch_at_three_tenths_matches_the_cubic_root() {
        // The unique real root of y^3 + 0.09 y - 0.0081.
        let mut y = 0.08;
        for _ in 0..60 {
            let f = y * y * y + 0.09 * y - 0.0081;
            y -= f / (3.0 * y * y + 0.09);
        }
        let b = branch(0.3).unwrap();
        assert!((b - y).abs() < 1e-12, "branch {b} vs oracle {y}");
        assert!(y > 0.0 && y < 0.09);
    }

    #[test]
    fn corrected_factors_reproduce_the_polynomial() {
        assert_eq!(
            factor_identity_residual((0.0, 0.0), (0.0, 0.0), 1, 1).unwrap(),
            0.0
        );
        let r = factor_identity_residual((-1.0, 1.0), (-0.2, 1.0), 101, 101).unwrap();
        assert!(r <= 1e-12, "residual {r}");
    }

    #[test]
    fn printed_factors_do_not() {
        let r = printed_factor_residual((-1.0, 1.0), (-0.2, 1.0), 101, 101);
        assert!(r > 1e-3, "the printed factors should not match, got {r}");
    }

    #[test]
    fn factor_roots_sum_and_product() {
        for y in [-0.2, 0.0, 0.4, 2.0] {
            let (u, v) = factor_roots(y).unwrap();
            assert!((u + v - y).abs() < 1e-14);
            assert!((u * v + y * y * y).abs() < 1e-13);
        }
        assert!(factor_roots(-0.3).is_err());
    }

    #[test]
    fn plot_samples_have_the_requested_shape() {
        for coeff in [1.0, 2.0] {
            let samples = emit_plot_samples((-1.0, 0.5), 400, coeff).unwrap();
            assert_eq!(samples.len(), 400);
            assert!(samples.windows(2).all(|w| w[0].x <= w[1].x));
            assert!(
                samples.iter().any(|s| s.x == 0.0 && s.y == 0.0),
                "contains the origin"
            );
            assert!(samples.iter().all(|s| s.residual.abs() <= 1e-10));
        }
    }

    #[test]
    fn plot_data_is_two_column_text() {
        let samples = emit_plot_samples((-0.1, 0.1), 3, 1.0).unwrap();
        let mut buf = Vec::new();
        write_plot_data(&samples, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        for line in text.lines() {
            assert_eq!(line.split_whitespace().count(), 2);
        }
    }

    #[test]
    fn branch_divided_differences_stay_bounded() {
        // Fourth-order divided differences over |x| <= 0.3 remain O(1),
        // numerically consistent with analyticity.
        let h = 0.02;
        let mut worst: f64 = 0.0;
        let mut x = -0.3;
        while x <= 0.3 - 4.0 * h {
            let f: Vec<f64> = (0..5).map(|k| branch(x + k as f64 * h).unwrap()).collect();
            let dd4 = (f[4] - 4.0 * f[3] + 6.0 * f[2] - 4.0 * f[1] + f[0]) / h.powi(4) / 24.0;
            worst = worst.max(dd4.abs());
            x += h;
        }
        assert!(worst < 10.0, "4th divided differences reach {worst}");
    }
}
