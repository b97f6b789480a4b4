//! Dense linear-algebra and differentiation primitives with explicit
//! tolerance semantics.
//!
//! Every rank decision in the crate is relative to the largest singular
//! value, because the constraint polynomials scale with the squared design
//! lengths. Functions report the full singular-value vector where rank is
//! decided, so borderline cases stay auditable.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Tolerances used throughout the crate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceConfig {
    /// Singular values below `rank_rel_tol * sigma_max` count as zero.
    pub rank_rel_tol: f64,
    /// Base tolerance for on-variety residual checks (scaled by the caller
    /// with the natural constraint scale, usually `b^2`).
    pub residual_tol: f64,
    /// Step size for finite-difference tangents.
    pub fd_step: f64,
    /// Distance below which two configurations are identified as one point.
    pub branch_match_tol: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self {
            rank_rel_tol: 1e-8,
            residual_tol: 1e-9,
            fd_step: 1e-5,
            branch_match_tol: 1e-6,
        }
    }
}

impl ToleranceConfig {
    /// Checks that every tolerance is strictly positive and the rank
    /// threshold is a genuine relative one.
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("rank_rel_tol", self.rank_rel_tol),
            ("residual_tol", self.residual_tol),
            ("fd_step", self.fd_step),
            ("branch_match_tol", self.branch_match_tol),
        ];
        for (name, value) in fields {
            if value.is_nan() || value <= 0.0 {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    constraint: "strictly positive",
                });
            }
        }
        if self.rank_rel_tol >= 1.0 {
            return Err(Error::InvalidParameter {
                name: "rank_rel_tol",
                value: self.rank_rel_tol,
                constraint: "< 1",
            });
        }
        Ok(())
    }
}

/// Singular values (descending) together with the rank decision they imply.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankReport {
    pub singular_values: Vec<f64>,
    pub rank: usize,
}

fn ensure_finite(m: &DMatrix<f64>, what: &'static str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { what })
    }
}

/// Singular values of `m`, sorted in descending order.
pub fn singular_values(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    ensure_finite(m, "singular_values")?;
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|x, y| y.partial_cmp(x).expect("finite singular values"));
    Ok(sv)
}

fn rank_from_values(sv: &[f64], tol: &ToleranceConfig) -> usize {
    let sigma_max = sv.first().copied().unwrap_or(0.0);
    if sigma_max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol.rank_rel_tol * sigma_max).count()
}

/// Number of singular values above `rank_rel_tol * sigma_max`; 0 for the
/// zero matrix.
pub fn numerical_rank(m: &DMatrix<f64>, tol: &ToleranceConfig) -> Result<usize> {
    Ok(rank_from_values(&singular_values(m)?, tol))
}

/// Rank with the threshold floored at `rank_rel_tol * scale_floor`, for
/// matrices with a known natural scale (e.g. projections of orthonormal
/// bases) where `sigma_max` itself may be rounding noise.
pub fn numerical_rank_scaled(
    m: &DMatrix<f64>,
    tol: &ToleranceConfig,
    scale_floor: f64,
) -> Result<usize> {
    let sv = singular_values(m)?;
    let sigma_max = sv.first().copied().unwrap_or(0.0);
    let threshold = tol.rank_rel_tol * sigma_max.max(scale_floor);
    Ok(sv.iter().filter(|&&s| s > threshold).count())
}

/// Rank together with the singular values the decision was based on.
pub fn rank_report(m: &DMatrix<f64>, tol: &ToleranceConfig) -> Result<RankReport> {
    let sv = singular_values(m)?;
    let rank = rank_from_values(&sv, tol);
    Ok(RankReport {
        singular_values: sv,
        rank,
    })
}

/// Orthonormal basis of the numerical null space of `m`.
///
/// Returns `cols - numerical_rank(m)` vectors `k` with
/// `|m k| <= 10 * rank_rel_tol * sigma_max`.
///
/// The basis is built as the orthogonal complement of the row space, with
/// the row space spanned by `m^T u_i` over the counted singular values.
/// Those products are backward-stably accurate, unlike the raw right
/// singular vectors of near-zero singular values, whose row-space
/// contamination can be many orders above rounding.
pub fn kernel_basis(m: &DMatrix<f64>, tol: &ToleranceConfig) -> Result<Vec<DVector<f64>>> {
    ensure_finite(m, "kernel_basis")?;
    let ncols = m.ncols();
    let svd = m.clone().svd(true, false);
    let u = svd.u.as_ref().expect("U requested");
    let mut pairs: Vec<(f64, usize)> = svd
        .singular_values
        .iter()
        .copied()
        .enumerate()
        .map(|(i, s)| (s, i))
        .collect();
    pairs.sort_by(|x, y| y.0.partial_cmp(&x.0).expect("finite singular values"));
    let sigma_max = pairs.first().map(|p| p.0).unwrap_or(0.0);
    let rank = if sigma_max == 0.0 {
        0
    } else {
        pairs.iter().filter(|p| p.0 > tol.rank_rel_tol * sigma_max).count()
    };

    // Orthonormal row-space basis from the counted singular directions.
    let mut row_space: Vec<DVector<f64>> = Vec::with_capacity(rank);
    for &(_, col) in pairs.iter().take(rank) {
        let mut w = m.transpose() * u.column(col);
        for b in &row_space {
            let proj = b.dot(&w);
            w -= b * proj;
        }
        let norm = w.norm();
        if norm > 0.0 {
            row_space.push(w / norm);
        }
    }

    // Complement by Gram-Schmidt over the coordinate axes, relaxing the
    // acceptance threshold if a nearly-parallel axis set leaves us short.
    let target = ncols - rank;
    let mut threshold = 1e-6;
    loop {
        let mut basis: Vec<DVector<f64>> = Vec::with_capacity(target);
        for j in 0..ncols {
            if basis.len() == target {
                break;
            }
            let mut cand = DVector::zeros(ncols);
            cand[j] = 1.0;
            for b in row_space.iter().chain(basis.iter()) {
                let proj = b.dot(&cand);
                cand -= b * proj;
            }
            // A second orthogonalization pass keeps the basis clean.
            for b in row_space.iter().chain(basis.iter()) {
                let proj = b.dot(&cand);
                cand -= b * proj;
            }
            let norm = cand.norm();
            if norm > threshold {
                basis.push(cand / norm);
            }
        }
        if basis.len() == target || threshold < 1e-14 {
            return Ok(basis);
        }
        threshold *= 1e-3;
    }
}

/// Dimension of the span of a set of equal-length vectors.
pub fn span_dimension(vectors: &[DVector<f64>], tol: &ToleranceConfig) -> Result<usize> {
    let first = vectors.first().ok_or(Error::DimensionMismatch {
        what: "span_dimension",
        expected: 1,
        actual: 0,
    })?;
    let n = first.len();
    for v in vectors {
        if v.len() != n {
            return Err(Error::DimensionMismatch {
                what: "span_dimension",
                expected: n,
                actual: v.len(),
            });
        }
    }
    let m = DMatrix::from_fn(n, vectors.len(), |i, j| vectors[j][i]);
    numerical_rank(&m, tol)
}

/// Derivative of a parametric path by Richardson-extrapolated central
/// differences over steps `h` and `h/2`; exact for polynomial paths of
/// degree <= 3, O(h^4) for analytic ones.
pub fn central_difference_tangent<F>(path: F, t0: f64, tol: &ToleranceConfig) -> Result<DVector<f64>>
where
    F: Fn(f64) -> Result<DVector<f64>>,
{
    let h = tol.fd_step;
    let d = |step: f64| -> Result<DVector<f64>> {
        let plus = path(t0 + step)?;
        let minus = path(t0 - step)?;
        Ok((plus - minus) / (2.0 * step))
    };
    let coarse = d(h)?;
    let fine = d(h / 2.0)?;
    Ok((fine * 4.0 - coarse) / 3.0)
}
