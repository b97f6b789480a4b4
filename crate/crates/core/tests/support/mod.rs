//! Shared test helpers, including an SVD oracle that is independent of the
//! library's linear-algebra path.
#![allow(dead_code)] // each test binary uses a different subset

use nalgebra::DMatrix;

/// Singular values of `m` (descending) by one-sided Jacobi: orthogonalize
/// column pairs with plane rotations until every pair is orthogonal; the
/// singular values are then the column norms. Working on the matrix itself
/// (never on the squared Gram matrix) keeps small singular values accurate
/// to machine precision relative to the largest. This is the reference the
/// library's rank decisions are checked against.
pub fn jacobi_singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let (rows, cols) = m.shape();
    // Operate on the tall orientation so columns count the singular values.
    let mut a = if rows >= cols {
        m.clone()
    } else {
        m.transpose()
    };
    let n = a.ncols();
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let cp = a.column(p).into_owned();
                let cq = a.column(q).into_owned();
                let app = cp.dot(&cp);
                let aqq = cq.dot(&cq);
                let apq = cp.dot(&cq);
                if apq.abs() <= 1e-16 * (app * aqq).sqrt() {
                    continue;
                }
                rotated = true;
                let tau = (aqq - app) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..a.nrows() {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = (0..n).map(|i| a.column(i).norm()).collect();
    sv.sort_by(|x, y| y.partial_cmp(x).unwrap());
    sv
}

/// Rank decision on oracle singular values with the same relative rule the
/// library uses.
pub fn oracle_rank(sv: &[f64], rel_tol: f64) -> usize {
    let sigma_max = sv.first().copied().unwrap_or(0.0);
    if sigma_max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * sigma_max).count()
}

/// Brute-force intersection of two plane circles by scanning Newton starts
/// on a grid: returns all distinct roots of the polynomial pair
/// `x^2 + y^2 - r0^2 = 0`, `(x - cx)^2 + (y - cy)^2 - r1^2 = 0`.
pub fn brute_force_circle_intersection(
    r0: f64,
    cx: f64,
    cy: f64,
    r1: f64,
) -> Vec<(f64, f64)> {
    let mut roots: Vec<(f64, f64)> = Vec::new();
    let span = r0.max(r1) * 1.5;
    let grid = 24;
    for i in 0..=grid {
        for j in 0..=grid {
            let mut x = -span + 2.0 * span * i as f64 / grid as f64;
            let mut y = -span + 2.0 * span * j as f64 / grid as f64;
            let mut converged = false;
            for _ in 0..80 {
                let f1 = x * x + y * y - r0 * r0;
                let f2 = (x - cx) * (x - cx) + (y - cy) * (y - cy) - r1 * r1;
                if f1.abs() < 1e-13 * r0 * r0 && f2.abs() < 1e-13 * r0 * r0 {
                    converged = true;
                    break;
                }
                // Jacobian of the pair.
                let j11 = 2.0 * x;
                let j12 = 2.0 * y;
                let j21 = 2.0 * (x - cx);
                let j22 = 2.0 * (y - cy);
                let det = j11 * j22 - j12 * j21;
                if det.abs() < 1e-12 {
                    break;
                }
                x -= (f1 * j22 - f2 * j12) / det;
                y -= (j11 * f2 - j21 * f1) / det;
            }
            if converged && !roots.iter().any(|r| (r.0 - x).hypot(r.1 - y) < 1e-7) {
                roots.push((x, y));
            }
        }
    }
    roots
}
