//! Kinematic classification of an on-variety configuration: configuration
//! space singularity (the point fails to be a manifold point, witnessed or
//! at least flagged by a Jacobian rank drop), endeffector singularity (the
//! forward map's differential loses rank on the tangent space), and actuator
//! singularity (the actuated coordinates fail to form a local chart).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::mechanism::{ActuatorProjection, Configuration, DeltaVariant, FormalManipulator};
use crate::numeric::{kernel_basis, numerical_rank_scaled, rank_report, ToleranceConfig};
use crate::witness;
use crate::{Error, Result};

/// How a configuration-space singularity was established.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CssStatus {
    /// Full Jacobian rank: not a configuration-space singularity.
    No,
    /// The Jacobian rank dropped, which flags but does not prove a
    /// non-manifold point.
    RankDropOnly,
    /// A tangent-span certificate proves the point is not a manifold point.
    Certified,
}

/// Classification flags at one configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KinematicClass {
    pub css: CssStatus,
    pub endeffector_singular: bool,
    pub actuator_singular: bool,
    pub regular: bool,
    pub jacobian_rank: usize,
    pub jacobian_singular_values: Vec<f64>,
    /// Dimension of the numerical tangent space (only at non-CSS points).
    pub tangent_dim: Option<usize>,
    pub forward_rank: Option<usize>,
    /// Rank of the actuator chart projection for every nonempty actuator
    /// subset, in lexicographic subset order, for auditability.
    pub actuator_subset_ranks: Vec<(Vec<usize>, usize)>,
}

fn tangent_matrix(t: &[nalgebra::DVector<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(t[0].len(), t.len(), |i, j| t[j][i])
}

/// Rows of the differential of the actuator chart map for the chosen
/// actuator subset, evaluated at `x`. A circle-pair actuator contributes the
/// angle-chart row `(-sin, cos)` (up to scale) at its two columns; a plain
/// coordinate actuator contributes a unit row.
fn actuator_chart_rows(
    m: &FormalManipulator,
    x: &[f64],
    subset: &[usize],
) -> Result<DMatrix<f64>> {
    let dim_in = m.constraints().dim_in();
    let mut rows = DMatrix::zeros(subset.len(), dim_in);
    for (r, &idx) in subset.iter().enumerate() {
        let actuator = m.actuators().get(idx).ok_or(Error::DimensionMismatch {
            what: "actuator subset index",
            expected: m.actuators().len(),
            actual: idx,
        })?;
        match *actuator {
            ActuatorProjection::Coordinate(col) => rows[(r, col)] = 1.0,
            ActuatorProjection::CirclePair {
                cos_index,
                sin_index,
            } => {
                // Chart centered at the current angle; rank is
                // chart-independent, so the scale is dropped.
                let (ca, sa) = (x[cos_index], x[sin_index]);
                let norm = (ca * ca + sa * sa).sqrt().max(1e-12);
                rows[(r, cos_index)] = -sa / norm;
                rows[(r, sin_index)] = ca / norm;
            }
        }
    }
    Ok(rows)
}

/// Rank of the projection of the tangent basis onto the chart coordinates of
/// the chosen actuator subset. An empty subset has rank 0.
pub fn actuator_chart_rank(
    m: &FormalManipulator,
    x: &[f64],
    tangent: &[nalgebra::DVector<f64>],
    subset: &[usize],
    tol: &ToleranceConfig,
) -> Result<usize> {
    if subset.is_empty() || tangent.is_empty() {
        return Ok(0);
    }
    // Chart rows and tangent columns are normalized, so the projection's
    // natural scale is 1; floor the threshold there so an all-noise
    // projection counts as rank zero.
    let rows = actuator_chart_rows(m, x, subset)?;
    let projected = rows * tangent_matrix(tangent);
    numerical_rank_scaled(&projected, tol, 1.0)
}

fn nonempty_subsets(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for mask in 1..(1usize << n) {
        let subset: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        out.push(subset);
    }
    out.sort();
    out
}

/// Classifies a configuration on the variety.
///
/// A Jacobian rank below `dim_in - assumed_dim` marks a configuration-space
/// singularity; a successful witness certificate upgrades the flag from
/// `RankDropOnly` to `Certified`. At full-rank points the endeffector and
/// actuator flags compare the restricted differentials' ranks against the
/// tangent dimension.
pub fn classify(
    m: &FormalManipulator,
    x: &[f64],
    tol: &ToleranceConfig,
) -> Result<KinematicClass> {
    let scale = m
        .delta_params()
        .map(|p| p.residual_scale())
        .unwrap_or(1.0);
    let residual = m.constraints().residual_max(x)?;
    let bound = tol.residual_tol * scale;
    if residual > bound {
        return Err(Error::OffVariety {
            residual,
            tolerance: bound,
        });
    }
    let jac = m.constraints().jacobian(x)?;
    let report = rank_report(&jac, tol)?;
    let full_rank = m.constraints().dim_in() - m.assumed_dim();
    if report.rank < full_rank {
        // Rank drop alone does not prove a non-manifold point; try the
        // witness construction.
        let css = if m.is_delta() && m.delta_variant() == Some(DeltaVariant::Original) {
            let config = Configuration::from_slice(x)?;
            match witness::certify(&m.delta_params().unwrap(), &config, tol) {
                Ok(cert) if cert.valid => CssStatus::Certified,
                _ => CssStatus::RankDropOnly,
            }
        } else if !m.is_delta() {
            match crank_certify_attempt(m, x, tol) {
                Some(()) => CssStatus::Certified,
                None => CssStatus::RankDropOnly,
            }
        } else {
            CssStatus::RankDropOnly
        };
        return Ok(KinematicClass {
            css,
            endeffector_singular: false,
            actuator_singular: false,
            regular: false,
            jacobian_rank: report.rank,
            jacobian_singular_values: report.singular_values,
            tangent_dim: None,
            forward_rank: None,
            actuator_subset_ranks: Vec::new(),
        });
    }

    let tangent = kernel_basis(&jac, tol)?;
    let tangent_dim = tangent.len();
    let t_mat = tangent_matrix(&tangent);

    let dg = m.forward_jacobian(x)?;
    let forward_restricted = &dg * &t_mat;
    let forward_rank = numerical_rank_scaled(&forward_restricted, tol, 1.0)?;
    let endeffector_singular = forward_rank < dg.nrows().min(tangent_dim);

    let n_act = m.actuators().len();
    let mut actuator_subset_ranks = Vec::new();
    for subset in nonempty_subsets(n_act) {
        let rank = actuator_chart_rank(m, x, &tangent, &subset, tol)?;
        actuator_subset_ranks.push((subset, rank));
    }
    // The full actuator set fails to be a chart iff its projection loses
    // rank on the tangent space.
    let full_set_rank = actuator_subset_ranks
        .iter()
        .find(|(s, _)| s.len() == n_act)
        .map(|(_, r)| *r)
        .unwrap_or(0);
    let actuator_singular = full_set_rank < tangent_dim;

    Ok(KinematicClass {
        css: CssStatus::No,
        endeffector_singular,
        actuator_singular,
        regular: !endeffector_singular && !actuator_singular,
        jacobian_rank: report.rank,
        jacobian_singular_values: report.singular_values,
        tangent_dim: Some(tangent_dim),
        forward_rank: Some(forward_rank),
        actuator_subset_ranks,
    })
}

/// Tries the folded crank-slider certificate when the configuration matches
/// its base point.
fn crank_certify_attempt(m: &FormalManipulator, x: &[f64], tol: &ToleranceConfig) -> Option<()> {
    // The only certified crank-slider singularity is the folded point
    // (0, l, 0) with equal link lengths; recover l from the constraint
    // residual structure: f1(0, l, 0) = 0 forces l = |y_B|.
    if x.len() != 3 {
        return None;
    }
    let l = x[1].abs();
    if l < 1e-9 || x[0].abs() > tol.branch_match_tol || x[2].abs() > tol.branch_match_tol {
        return None;
    }
    if m.constraints().residual_max(&[0.0, l, 0.0]).ok()? > 1e-9 * l * l {
        return None;
    }
    witness::crank_slider_witness(l, l, tol).ok().map(|_| ())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanism::{build_crank_slider, build_delta, ParameterSet};

    fn tol() -> ToleranceConfig {
        ToleranceConfig::default()
    }

    #[test]
    fn crank_dead_point_is_an_actuator_singularity() {
        let m = build_crank_slider(1.0, 2.0).unwrap();
        // B = (1, 0), C = (3, 0): crank, coupler and slide axis aligned.
        let class = classify(&m, &[1.0, 0.0, 3.0], &tol()).unwrap();
        assert_eq!(class.css, CssStatus::No);
        assert!(class.actuator_singular);
        assert!(!class.endeffector_singular);
        assert!(!class.regular);
        assert_eq!(class.tangent_dim, Some(1));
        // The lone actuator subset is audited.
        assert_eq!(class.actuator_subset_ranks, vec![(vec![0], 0)]);
    }

    #[test]
    fn generic_crank_configuration_is_regular() {
        let m = build_crank_slider(1.0, 2.0).unwrap();
        let (xb, yb) = (0.6, 0.8);
        let xc = xb + (4.0f64 - yb * yb).sqrt();
        let class = classify(&m, &[xb, yb, xc], &tol()).unwrap();
        assert!(class.regular);
        assert_eq!(class.css, CssStatus::No);
        assert_eq!(class.forward_rank, Some(1));
    }

    #[test]
    fn longer_crank_has_endeffector_singularities() {
        // With l1 > l2 the tangent can point purely along x_C.
        let m = build_crank_slider(2.0, 1.0).unwrap();
        let xb = 3.0f64.sqrt();
        let class = classify(&m, &[xb, 1.0, xb], &tol()).unwrap();
        assert!(class.endeffector_singular);
        assert_eq!(class.forward_rank, Some(0));
    }

    #[test]
    fn folded_crank_point_is_certified() {
        let m = build_crank_slider(1.0, 1.0).unwrap();
        let class = classify(&m, &[0.0, 1.0, 0.0], &tol()).unwrap();
        assert_eq!(class.css, CssStatus::Certified);
        assert!(!class.regular);
    }

    #[test]
    fn off_variety_input_is_rejected() {
        let m = build_crank_slider(1.0, 2.0).unwrap();
        assert!(matches!(
            classify(&m, &[5.0, 5.0, 5.0], &tol()),
            Err(Error::OffVariety { .. })
        ));
    }

    #[test]
    fn empty_actuator_subset_has_rank_zero() {
        let params = ParameterSet::new(3.0, 5.0, 0.5).unwrap();
        let m = build_delta(params, DeltaVariant::Original);
        let x = crate::catalog::closed_form_point(crate::catalog::CatalogLabel::Q1, &params);
        let jac = m.constraints().jacobian(x.as_slice()).unwrap();
        let tangent = kernel_basis(&jac, &tol()).unwrap();
        let rank = actuator_chart_rank(&m, x.as_slice(), &tangent, &[], &tol()).unwrap();
        assert_eq!(rank, 0);
    }
}
