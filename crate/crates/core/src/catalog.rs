//! The closed-form rank-deficient configurations of the Delta system, their
//! orbit under the symmetry group, and a numerical search for further
//! rank-deficient points on the variety.
//!
//! Four base configurations `q1..q4` are given in closed form (original
//! coordinates). `q1` and `q2` have all three arm tips coinciding on the
//! vertical axis; `q3` and `q4` have two coinciding tips and rational
//! expressions for the third limb. Their denominators are quadratics in `b`
//! with negative discriminant, hence never vanish for valid parameters.

use nalgebra::{DMatrix, DVector, Vector3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::mechanism::{
    build_delta, from_tilde, lift_pose, limb_center, Configuration, DeltaVariant,
    FormalManipulator, ParameterSet, PlatformPose, DELTA_CONSTRAINTS,
};
use crate::numeric::{rank_report, ToleranceConfig};
use crate::symmetry::{act, is_free_on, GroupElement};
use crate::{Error, Result};

/// Which of the four closed-form configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CatalogLabel {
    Q1,
    Q2,
    Q3,
    Q4,
}

impl CatalogLabel {
    pub const ALL: [CatalogLabel; 4] = [
        CatalogLabel::Q1,
        CatalogLabel::Q2,
        CatalogLabel::Q3,
        CatalogLabel::Q4,
    ];
}

impl std::fmt::Display for CatalogLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            CatalogLabel::Q1 => "q1",
            CatalogLabel::Q2 => "q2",
            CatalogLabel::Q3 => "q3",
            CatalogLabel::Q4 => "q4",
        };
        write!(f, "{s}")
    }
}

impl std::str::FromStr for CatalogLabel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "q1" => Ok(CatalogLabel::Q1),
            "q2" => Ok(CatalogLabel::Q2),
            "q3" => Ok(CatalogLabel::Q3),
            "q4" => Ok(CatalogLabel::Q4),
            _ => Err(Error::Domain {
                detail: format!("unknown catalog label '{s}' (expected q1..q4)"),
            }),
        }
    }
}

/// The two rational-expression denominators and the discriminant that keeps
/// them away from zero.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GuardReport {
    /// `2b(a^2 - 3d^2) + q(a^2 + b^2)` — denominator of the `q4` column.
    pub plus_denominator: f64,
    /// `-2b(a^2 - 3d^2) + q(a^2 + b^2)` — denominator of the `q3` column.
    pub minus_denominator: f64,
    /// `-9 a^2 d^2 + 9 d^4`, negative whenever `a > d`, which is what rules
    /// out real roots of the two quadratics above.
    pub discriminant: f64,
}

/// Evaluates both denominators and the discriminant, asserting the guard
/// conditions hold.
pub fn denominator_guard(params: &ParameterSet) -> Result<GuardReport> {
    let (a, b, d, q) = (params.a(), params.b(), params.d(), params.q());
    let lead = 2.0 * b * (a * a - 3.0 * d * d);
    let stem = q * (a * a + b * b);
    let report = GuardReport {
        plus_denominator: lead + stem,
        minus_denominator: -lead + stem,
        discriminant: -9.0 * a * a * d * d + 9.0 * d * d * d * d,
    };
    if report.plus_denominator <= 0.0 || report.minus_denominator <= 0.0 {
        return Err(Error::VerificationFailed {
            label: "denominator_guard".into(),
            detail: format!(
                "denominators {} / {} not positive",
                report.plus_denominator, report.minus_denominator
            ),
        });
    }
    if report.discriminant >= 0.0 {
        return Err(Error::VerificationFailed {
            label: "denominator_guard".into(),
            detail: format!("discriminant {} not negative", report.discriminant),
        });
    }
    Ok(report)
}

/// True iff the parameters sit on the locus `b = (3d^2 - a^2)/q` where two
/// intersections in the witness-path construction become tangential. The
/// right-hand side is positive only when `3 d^2 > a^2`.
pub fn excluded_case(params: &ParameterSet) -> bool {
    let critical = (3.0 * params.d() * params.d() - params.a() * params.a()) / params.q();
    (params.b() - critical).abs() <= 1e-12 * params.b()
}

/// The closed-form configuration for a catalog label, in original
/// coordinates.
pub fn closed_form_point(label: CatalogLabel, params: &ParameterSet) -> Configuration {
    let (a, b, d) = (params.a(), params.b(), params.d());
    let q = params.q();
    let h = params.h();
    let db_q = d * b / q;
    let sqrt3 = 3.0f64.sqrt();
    let hb_q = h * b / q;

    let mut x = Configuration::zeros();
    match label {
        CatalogLabel::Q1 | CatalogLabel::Q4 => {
            x.set_limb_position(0, Vector3::new(-db_q, -sqrt3 * db_q, hb_q));
            x.set_limb_position(1, Vector3::new(-db_q, sqrt3 * db_q, hb_q));
        }
        CatalogLabel::Q2 | CatalogLabel::Q3 => {
            x.set_limb_position(0, Vector3::new(db_q, sqrt3 * db_q, hb_q));
            x.set_limb_position(1, Vector3::new(db_q, -sqrt3 * db_q, hb_q));
        }
    }
    let sa12 = match label {
        CatalogLabel::Q1 | CatalogLabel::Q4 => h,
        CatalogLabel::Q2 | CatalogLabel::Q3 => -h,
    };
    x.set_actuator(0, -d, sa12);
    x.set_actuator(1, -d, sa12);

    match label {
        CatalogLabel::Q1 => {
            x.set_limb_position(2, Vector3::new(2.0 * db_q, 0.0, hb_q));
            x.set_actuator(2, -d, h);
        }
        CatalogLabel::Q2 => {
            x.set_limb_position(2, Vector3::new(-2.0 * db_q, 0.0, hb_q));
            x.set_actuator(2, -d, -h);
        }
        CatalogLabel::Q3 => {
            // Denominator -2b(a^2-3d^2) + q(a^2+b^2) > 0 by the guard.
            let den = -2.0 * b * (a * a - 3.0 * d * d) + q * (a * a + b * b);
            let x3 = -2.0 * b * d * (b * q - 2.0 * a * a + b * b + 3.0 * d * d) / den;
            let z3 = -b * h * (2.0 * b * q - a * a - b * b + 6.0 * d * d) / den;
            let ca3 = 6.0 * b * d * (a * a - d * d) * (b - q) / (q * den) - d;
            let sa3 = 6.0 * b * d * d * h * (q + 2.0 * b) / (q * den) - h;
            x.set_limb_position(2, Vector3::new(x3, 0.0, z3));
            x.set_actuator(2, ca3, sa3);
        }
        CatalogLabel::Q4 => {
            let den = 2.0 * b * (a * a - 3.0 * d * d) + q * (a * a + b * b);
            let x3 = -2.0 * b * d * (b * q + 2.0 * a * a - b * b - 3.0 * d * d) / den;
            let z3 = b * h * (2.0 * b * q + a * a + b * b - 6.0 * d * d) / den;
            let ca3 = 6.0 * b * d * (a * a - d * d) * (b + q) / (q * den) - d;
            let sa3 = 6.0 * b * d * d * h * (q - 2.0 * b) / (q * den) + h;
            x.set_limb_position(2, Vector3::new(x3, 0.0, z3));
            x.set_actuator(2, ca3, sa3);
        }
    }
    x
}

/// A verified (or audited) rank-deficiency record at one configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SingularPointRecord {
    pub label: Option<CatalogLabel>,
    pub element: Option<GroupElement>,
    pub params: ParameterSet,
    pub configuration: Configuration,
    pub residual_max: f64,
    pub singular_values: Vec<f64>,
    pub rank: usize,
    pub rank_deficient: bool,
    pub guards: GuardReport,
    pub excluded_case: bool,
    /// Whether the non-manifold certificate construction applies at this
    /// point (false for the two-coinciding-tips orbits on the excluded
    /// parameter locus).
    pub certificate_available: bool,
}

impl SingularPointRecord {
    /// CSV header matching [`Self::to_csv_row`].
    pub fn csv_header() -> String {
        let coords = [
            "x1", "y1", "z1", "x2", "y2", "z2", "x3", "y3", "z3", "ca1", "sa1", "ca2", "sa2",
            "ca3", "sa3",
        ];
        let sigmas: Vec<String> = (1..=DELTA_CONSTRAINTS).map(|i| format!("sigma{i}")).collect();
        format!(
            "label,element,{},residual_max,{},rank,guard_plus,guard_minus,excluded_case",
            coords.join(","),
            sigmas.join(",")
        )
    }

    pub fn to_csv_row(&self, fmt: impl Fn(f64) -> String) -> String {
        let mut fields: Vec<String> = Vec::new();
        fields.push(self.label.map(|l| l.to_string()).unwrap_or_default());
        fields.push(self.element.map(|e| e.to_string()).unwrap_or_default());
        for v in self.configuration.as_slice() {
            fields.push(fmt(*v));
        }
        fields.push(fmt(self.residual_max));
        for s in &self.singular_values {
            fields.push(fmt(*s));
        }
        fields.push(self.rank.to_string());
        fields.push(fmt(self.guards.plus_denominator));
        fields.push(fmt(self.guards.minus_denominator));
        fields.push(self.excluded_case.to_string());
        fields.join(",")
    }
}

/// Checks that `x` lies on the variety and reports the Jacobian rank with
/// its full singular-value vector. The record passes iff the rank dropped
/// below 12.
pub fn verify_rank_drop(
    m: &FormalManipulator,
    x: &Configuration,
    tol: &ToleranceConfig,
) -> Result<SingularPointRecord> {
    let params = m.delta_params().ok_or(Error::Domain {
        detail: "verify_rank_drop expects the Delta mechanism".into(),
    })?;
    let residual_max = m.constraints().residual_max(x.as_slice())?;
    let bound = tol.residual_tol * params.residual_scale();
    if residual_max > bound {
        return Err(Error::OffVariety {
            residual: residual_max,
            tolerance: bound,
        });
    }
    let jac = m.constraints().jacobian(x.as_slice())?;
    let report = rank_report(&jac, tol)?;
    let guards = denominator_guard(&params)?;
    // The witness construction applies to every arm-tip coincidence except
    // the two-of-three pattern on the excluded parameter locus.
    let certificate_available = match crate::witness::coincidence_pattern(&params, x, tol) {
        Ok(crate::witness::CoincidencePattern::AllThree) => true,
        Ok(crate::witness::CoincidencePattern::TwoOfThree { .. }) => !excluded_case(&params),
        Err(_) => false,
    };
    Ok(SingularPointRecord {
        label: None,
        element: None,
        params,
        configuration: *x,
        residual_max,
        rank: report.rank,
        rank_deficient: report.rank < DELTA_CONSTRAINTS,
        singular_values: report.singular_values,
        guards,
        excluded_case: excluded_case(&params),
        certificate_available,
    })
}

/// Builds and verifies the full 24-point singular set: the orbit of the four
/// closed-form configurations under all six group elements.
///
/// Records are ordered label-major, then by element in the fixed order
/// `e, r, r2, s, rs, r2s`. Fails if any record is off the variety, fails to
/// drop rank, coincides with another, or is fixed by a non-identity element.
pub fn full_catalog(
    params: &ParameterSet,
    tol: &ToleranceConfig,
) -> Result<Vec<SingularPointRecord>> {
    let m = build_delta(*params, DeltaVariant::Original);
    let mut records = Vec::with_capacity(24);
    for label in CatalogLabel::ALL {
        let base = closed_form_point(label, params);
        for g in GroupElement::all() {
            let image = act(&g, &base);
            let mut record = verify_rank_drop(&m, &image, tol).map_err(|e| match e {
                Error::OffVariety { residual, .. } => Error::VerificationFailed {
                    label: format!("{label}/{g}"),
                    detail: format!("off variety, residual {residual:.3e}"),
                },
                other => other,
            })?;
            if !record.rank_deficient {
                return Err(Error::VerificationFailed {
                    label: format!("{label}/{g}"),
                    detail: format!("rank {} did not drop below 12", record.rank),
                });
            }
            record.label = Some(label);
            record.element = Some(g);
            records.push(record);
        }
    }
    // Pairwise distinctness.
    for i in 0..records.len() {
        for j in (i + 1)..records.len() {
            let dist = records[i]
                .configuration
                .distance(&records[j].configuration);
            if dist <= tol.branch_match_tol {
                return Err(Error::VerificationFailed {
                    label: format!(
                        "{}/{} vs {}/{}",
                        records[i].label.unwrap(),
                        records[i].element.unwrap(),
                        records[j].label.unwrap(),
                        records[j].element.unwrap()
                    ),
                    detail: format!("catalog points coincide (distance {dist:.3e})"),
                });
            }
        }
    }
    // Free action.
    let points: Vec<Configuration> = records.iter().map(|r| r.configuration).collect();
    let free = is_free_on(&points, tol);
    if !free.is_free {
        return Err(Error::VerificationFailed {
            label: "full_catalog".into(),
            detail: format!("action not free: {} violations", free.violations.len()),
        });
    }
    Ok(records)
}

/// Intersection of three radius-`radius` spheres centered at `centers`;
/// `upper` picks between the two mirror solutions. `None` when the spheres
/// do not meet or the centers are (nearly) collinear.
pub fn trilaterate(centers: &[Vector3<f64>], radius: f64, upper: bool) -> Option<Vector3<f64>> {
    let (c0, c1, c2) = (centers[0], centers[1], centers[2]);
    let n1 = c1 - c0;
    let n2 = c2 - c0;
    let axis = n1.cross(&n2);
    if axis.norm() < 1e-10 {
        return None;
    }
    let e = axis.normalize();
    let b1 = (c1.norm_squared() - c0.norm_squared()) / 2.0;
    let b2 = (c2.norm_squared() - c0.norm_squared()) / 2.0;
    // Least-norm solution of the two plane equations.
    let g11 = n1.dot(&n1);
    let g12 = n1.dot(&n2);
    let g22 = n2.dot(&n2);
    let det = g11 * g22 - g12 * g12;
    if det.abs() < 1e-12 {
        return None;
    }
    let alpha = (b1 * g22 - b2 * g12) / det;
    let beta = (b2 * g11 - b1 * g12) / det;
    let p0 = n1 * alpha + n2 * beta;
    let rel = p0 - c0;
    let mid = e.dot(&rel);
    let disc = mid * mid - (rel.norm_squared() - radius * radius);
    if disc < 0.0 {
        return None;
    }
    let s = if upper { -mid + disc.sqrt() } else { -mid - disc.sqrt() };
    Some(p0 + e * s)
}

/// Draws a random on-variety configuration in tilde coordinates by sampling
/// arm angles and intersecting the three limb spheres. `None` when the
/// sampled angles admit no platform point.
pub fn sample_on_variety<R: Rng>(params: &ParameterSet, rng: &mut R) -> Option<Configuration> {
    let angles = [
        rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
        rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
        rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
    ];
    let centers: Vec<Vector3<f64>> = (0..3)
        .map(|i| limb_center(params, i, angles[i]))
        .collect();
    let p = trilaterate(&centers, params.b(), rng.random_bool(0.5))?;
    Some(lift_pose(
        params,
        &PlatformPose {
            position: p,
            angles,
        },
    ))
}

/// A convergent outcome of the rank-deficiency search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchCandidate {
    pub configuration: Configuration,
    pub sigma_min: f64,
    pub sigma_ratio: f64,
    pub iterations: usize,
    /// Closest catalog point, when within `branch_match_tol`-scale distance.
    pub matched: Option<CatalogMatch>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CatalogMatch {
    pub label: CatalogLabel,
    pub element: GroupElement,
    pub distance: f64,
}

/// Least-norm Newton step `J^T (J J^T + ridge)^-1 f`, via Cholesky on the
/// small Gram matrix.
fn least_norm_step(j: &DMatrix<f64>, f: &DVector<f64>, ridge: f64) -> Option<DVector<f64>> {
    let mut gram = j * j.transpose();
    for i in 0..gram.nrows() {
        gram[(i, i)] += ridge;
    }
    let chol = gram.cholesky()?;
    Some(j.transpose() * chol.solve(f))
}

/// Newton projection back onto the variety; returns the refined point or
/// `None` when it fails to reach the requested residual.
fn newton_project(
    m: &FormalManipulator,
    x: &Configuration,
    target: f64,
) -> Option<Configuration> {
    let mut current = x.dvector();
    for _ in 0..8 {
        let f = m.constraints().eval(current.as_slice()).ok()?;
        if f.amax() <= target {
            return Configuration::from_slice(current.as_slice()).ok();
        }
        let j = m.constraints().jacobian(current.as_slice()).ok()?;
        // The Gram matrix is nearly singular close to a rank drop; a ridge
        // at the rank threshold keeps the step finite without disturbing
        // the strong directions.
        let scale = j.amax();
        let step = least_norm_step(&j, &f, (1e-7 * scale) * (1e-7 * scale))?;
        current -= step;
    }
    let f = m.constraints().eval(current.as_slice()).ok()?;
    if f.amax() <= target {
        Configuration::from_slice(current.as_slice()).ok()
    } else {
        None
    }
}

/// Row-wise Hessian contraction `H(v)` with `H(v)[r, k] = sum_j
/// d2F_r/dx_k dx_j v_j`, using the constant second derivatives of the
/// quadratic constraint polynomials. This is the x-derivative of
/// `DF(x) v` and equals it as a function of `v` (the map is linear).
fn hessian_contraction(m: &FormalManipulator, v: &DVector<f64>) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(m.constraints().dim_out(), m.constraints().dim_in());
    if m.is_delta() {
        for limb in 0..3 {
            for k in (3 * limb)..(3 * limb + 3) {
                h[(limb, k)] = 2.0 * v[k];
            }
            let (c, s) = crate::mechanism::ACTUATOR_COLUMNS[limb];
            h[(3 + limb, c)] = 2.0 * v[c];
            h[(3 + limb, s)] = 2.0 * v[s];
        }
    } else {
        // Crank-slider: f1 acts on (x_B, y_B), f2 on (x_B, y_B, x_C).
        h[(0, 0)] = 2.0 * v[0];
        h[(0, 1)] = 2.0 * v[1];
        h[(1, 0)] = 2.0 * (v[0] - v[2]);
        h[(1, 1)] = 2.0 * v[1];
        h[(1, 2)] = 2.0 * (v[2] - v[0]);
    }
    h
}

/// Gradient of the smallest singular value of the constraint Jacobian with
/// respect to the coordinates: `g_k = u^T (dJ/dx_k) v` for the smallest
/// singular pair `(u, v)`.
fn sigma_min_gradient(
    m: &FormalManipulator,
    u: &DVector<f64>,
    v: &DVector<f64>,
) -> DVector<f64> {
    hessian_contraction(m, v).transpose() * u
}

/// Left-kernel Hessian weighting `W(u) = sum_r u_r Hess(F_r)`, the
/// x-derivative of `DF(x)^T u` (constant in `x` for quadratic constraints).
fn hessian_weighted(m: &FormalManipulator, u: &DVector<f64>) -> DMatrix<f64> {
    let n = m.constraints().dim_in();
    let mut w = DMatrix::zeros(n, n);
    if m.is_delta() {
        for limb in 0..3 {
            for k in (3 * limb)..(3 * limb + 3) {
                w[(k, k)] = 2.0 * u[limb];
            }
            let (c, s) = crate::mechanism::ACTUATOR_COLUMNS[limb];
            w[(c, c)] = 2.0 * u[3 + limb];
            w[(s, s)] = 2.0 * u[3 + limb];
        }
    } else {
        w[(0, 0)] = 2.0 * (u[0] + u[1]);
        w[(1, 1)] = 2.0 * (u[0] + u[1]);
        w[(0, 2)] = -2.0 * u[1];
        w[(2, 0)] = -2.0 * u[1];
        w[(2, 2)] = 2.0 * u[1];
    }
    w
}

/// Newton sharpening of a near-rank-drop point: solves the bordered system
/// `F(x) = 0`, `DF(x)^T u = 0`, `|u|^2 = 1` for `(x, u)` by least-squares
/// Newton steps. The left null vector `u` detects the rank drop (the right
/// kernel is the tangent space and exists everywhere); the solutions are
/// the isolated rank-deficient points, so convergence is quadratic.
fn sharpen_rank_drop(
    m: &FormalManipulator,
    x0: &Configuration,
    u0: &DVector<f64>,
    iterations: usize,
) -> Option<Configuration> {
    let n = m.constraints().dim_in();
    let k = m.constraints().dim_out();
    let mut x = x0.dvector();
    let mut u = u0.clone();
    for _ in 0..iterations {
        let f = m.constraints().eval(x.as_slice()).ok()?;
        let j = m.constraints().jacobian(x.as_slice()).ok()?;
        let jtu = j.transpose() * &u;
        let mut residual = DVector::zeros(k + n + 1);
        residual.rows_mut(0, k).copy_from(&f);
        residual.rows_mut(k, n).copy_from(&jtu);
        residual[k + n] = 0.5 * (u.norm_squared() - 1.0);
        let mut jac = DMatrix::zeros(k + n + 1, n + k);
        jac.view_mut((0, 0), (k, n)).copy_from(&j);
        jac.view_mut((k, 0), (n, n))
            .copy_from(&hessian_weighted(m, &u));
        jac.view_mut((k, n), (n, k)).copy_from(&j.transpose());
        jac.view_mut((k + n, n), (1, k)).copy_from(&u.transpose());
        // Least-squares Newton step via the normal equations; the system
        // has full column rank at an isolated solution.
        let mut normal = jac.transpose() * &jac;
        let ridge = 1e-14 * normal.diagonal().amax().max(1e-300);
        for i in 0..normal.nrows() {
            normal[(i, i)] += ridge;
        }
        let rhs = jac.transpose() * &residual;
        let step = normal.cholesky()?.solve(&rhs);
        x -= step.rows(0, n);
        u -= step.rows(n, k);
        if step.norm() < 1e-14 {
            break;
        }
    }
    Configuration::from_slice(x.as_slice()).ok()
}

/// Smallest/largest singular values of `J` with the left singular vector of
/// the smallest, from the eigendecomposition of the small Gram matrix
/// `J J^T`.
fn extreme_singular_data(j: &DMatrix<f64>) -> (f64, f64, DVector<f64>) {
    let gram = j * j.transpose();
    let eig = gram.symmetric_eigen();
    let mut min_i = 0;
    let mut max_i = 0;
    for i in 0..eig.eigenvalues.len() {
        if eig.eigenvalues[i] < eig.eigenvalues[min_i] {
            min_i = i;
        }
        if eig.eigenvalues[i] > eig.eigenvalues[max_i] {
            max_i = i;
        }
    }
    let sigma_min = eig.eigenvalues[min_i].max(0.0).sqrt();
    let sigma_max = eig.eigenvalues[max_i].max(0.0).sqrt();
    let u = eig.eigenvectors.column(min_i).into_owned();
    (sigma_min, sigma_max, u)
}

/// Projects `g` onto the numerical tangent space (orthogonal complement of
/// the Jacobian row space): `g - J^T (J J^T + ridge)^-1 J g`.
fn project_tangent(j: &DMatrix<f64>, g: &DVector<f64>) -> DVector<f64> {
    let jg = j * g;
    let scale = j.amax();
    match least_norm_step(j, &jg, (1e-7 * scale) * (1e-7 * scale)) {
        Some(correction) => g - correction,
        None => g.clone(),
    }
}

/// Projected descent on the smallest singular value with Newton correction
/// back to the variety, followed by bordered-Newton sharpening once close.
/// Updates `x` in place; returns `(sigma_min, sigma_ratio, iterations)` on
/// convergence below the rank threshold.
fn descend_to_rank_drop(
    m: &FormalManipulator,
    x: &mut Configuration,
    budget: usize,
    tol: &ToleranceConfig,
    newton_target: f64,
) -> Option<(f64, f64, usize)> {
    let mut last_sharpen_sigma = f64::INFINITY;
    for iter in 0..budget {
        let j = m.constraints().jacobian(x.as_slice()).ok()?;
        let (sigma_min, sigma_max, u) = extreme_singular_data(&j);
        if sigma_min < tol.rank_rel_tol * sigma_max {
            return Some((sigma_min, sigma_min / sigma_max, iter));
        }
        // Close enough for the quadratically convergent bordered Newton;
        // retry only after meaningful further progress.
        if sigma_min < 1e-3 * sigma_max && sigma_min < 0.5 * last_sharpen_sigma {
            last_sharpen_sigma = sigma_min;
            if let Some(sharp) = sharpen_rank_drop(m, x, &u, 25) {
                let j2 = m.constraints().jacobian(sharp.as_slice()).ok()?;
                let (s2, smax2, _) = extreme_singular_data(&j2);
                let on_variety = m
                    .constraints()
                    .residual_max(sharp.as_slice())
                    .map(|r| r <= newton_target)
                    .unwrap_or(false);
                if on_variety && s2 < tol.rank_rel_tol * smax2 {
                    *x = sharp;
                    return Some((s2, s2 / smax2, iter));
                }
            }
        }
        // v = J^T u / sigma recovers the right singular vector.
        let v = j.transpose() * &u / sigma_min.max(1e-300);
        let grad = sigma_min_gradient(m, &u, &v);
        let tangent_grad = project_tangent(&j, &grad);
        let gnorm2 = tangent_grad.norm_squared();
        if gnorm2 < 1e-24 {
            return None; // stationary away from a rank drop
        }
        // Step toward the predicted zero of the (locally conical) smallest
        // singular value, with backtracking.
        let mut alpha = sigma_min / gnorm2;
        let mut improved = false;
        for _ in 0..10 {
            let trial_vec = x.dvector() - &tangent_grad * alpha;
            let trial = Configuration::from_slice(trial_vec.as_slice()).ok()?;
            if let Some(projected) = newton_project(m, &trial, newton_target) {
                let j2 = m.constraints().jacobian(projected.as_slice()).ok()?;
                let (s2, _, _) = extreme_singular_data(&j2);
                if s2 < sigma_min {
                    *x = projected;
                    improved = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !improved {
            return None;
        }
    }
    None
}

/// Searches for rank-deficient points of the constraint Jacobian on the
/// variety, by projected descent on the smallest singular value with a
/// Newton corrector, from random on-variety seeds.
///
/// Only seeds that actually converge (`sigma_min/sigma_max < rank_rel_tol`)
/// are returned; each is matched against the 24-point catalog.
pub fn rank_deficiency_search(
    m: &FormalManipulator,
    seeds: usize,
    budget: usize,
    tol: &ToleranceConfig,
    rng_seed: u64,
) -> Result<Vec<SearchCandidate>> {
    let params = m.delta_params().ok_or(Error::Domain {
        detail: "rank_deficiency_search expects the Delta mechanism".into(),
    })?;
    if seeds == 0 || budget == 0 {
        return Ok(Vec::new());
    }
    let catalog: Vec<(CatalogLabel, GroupElement, Configuration)> = CatalogLabel::ALL
        .iter()
        .flat_map(|&label| {
            let base = closed_form_point(label, &params);
            GroupElement::all()
                .into_iter()
                .map(move |g| (label, g, act(&g, &base)))
        })
        .collect();
    let to_search_frame = |c: &Configuration| -> Configuration {
        match m.delta_variant() {
            Some(DeltaVariant::Tilde) => crate::mechanism::to_tilde(c),
            _ => *c,
        }
    };
    let catalog_frame: Vec<(CatalogLabel, GroupElement, Configuration)> = catalog
        .iter()
        .map(|(l, g, c)| (*l, *g, to_search_frame(c)))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let newton_target = tol.residual_tol * params.residual_scale();
    let mut candidates = Vec::new();
    for _ in 0..seeds {
        let Some(tilde_seed) = sample_on_variety(&params, &mut rng) else {
            continue;
        };
        let mut x = match m.delta_variant() {
            Some(DeltaVariant::Tilde) => tilde_seed,
            _ => from_tilde(&tilde_seed),
        };
        let converged = descend_to_rank_drop(m, &mut x, budget, tol, newton_target);
        if let Some((sigma_min, sigma_ratio, iterations)) = converged {
            let matched = catalog_frame
                .iter()
                .map(|(l, g, c)| (*l, *g, c.distance(&x)))
                .min_by(|a, b| a.2.total_cmp(&b.2))
                .filter(|(_, _, dist)| *dist < 1e-3)
                .map(|(label, element, distance)| CatalogMatch {
                    label,
                    element,
                    distance,
                });
            candidates.push(SearchCandidate {
                configuration: x,
                sigma_min,
                sigma_ratio,
                iterations,
                matched,
            });
        }
    }
    Ok(candidates)
}
