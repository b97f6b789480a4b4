//! Four analytic paths through a singular configuration whose tangents span
//! four dimensions, certifying that the configuration is not a manifold
//! point of the three-dimensional variety.
//!
//! All constructions run in tilde coordinates, where each limb constrains
//! the platform point to a sphere about the limb's arm-tip curve. At the
//! catalog points two or three of those tips coincide, and the paths are:
//! a branch of the two-moving-spheres pencil against the third sphere, a
//! point riding the circle cut by the odd limb, travel along the fixed
//! intersection circle, and a branch with a single moving sphere (the
//! degenerate two-circle continuation). Where all three tips coincide, two
//! independent tangent directions of the common sphere replace the first
//! two constructions.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::catalog::excluded_case;
use crate::geom::{
    circle_circle_branch, circle_sphere_branch, degenerate_limits, equal_radius_pencil,
    plane_reduce, point_on_circle, Branch, MovingCircle2D, PlanarFrame, Sphere,
};
use crate::mechanism::{
    build_crank_slider, build_delta, lift_pose, limb_center, pose_of, rotation_120, rotation_240,
    to_tilde, Configuration, DeltaVariant, ParameterSet, PlatformPose,
};
use crate::numeric::{central_difference_tangent, singular_values, ToleranceConfig};
use crate::{Error, Result};

/// Default half-width of the parameter window around the base time.
pub const DEFAULT_HALF_WIDTH: f64 = 0.05;
/// Default number of on-variety samples per path.
pub const DEFAULT_SAMPLES: usize = 41;
/// Residual bound factor for path samples (scaled by `b^2`).
pub const PATH_RESIDUAL_FACTOR: f64 = 1e-8;

/// Which of the four witness paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathLabel {
    Gamma1,
    Gamma2,
    Gamma3,
    Gamma4,
}

impl std::fmt::Display for PathLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            PathLabel::Gamma1 => "gamma1",
            PathLabel::Gamma2 => "gamma2",
            PathLabel::Gamma3 => "gamma3",
            PathLabel::Gamma4 => "gamma4",
        };
        write!(f, "{s}")
    }
}

/// How the arm tips coincide at a candidate singular configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoincidencePattern {
    /// All three tips meet on the vertical axis.
    AllThree,
    /// Exactly one pair of tips coincides; `lone` is the remaining limb.
    TwoOfThree { pair: [usize; 2], lone: usize },
}

/// An analytic path inside the tilde variety through a base configuration.
pub struct WitnessPath {
    pub label: PathLabel,
    pub base_point: Configuration,
    pub base_time: f64,
    pub half_width: f64,
    pub recipe: String,
    evaluator: Arc<dyn Fn(f64) -> Result<Configuration> + Send + Sync>,
}

impl WitnessPath {
    pub fn at(&self, t: f64) -> Result<Configuration> {
        (self.evaluator)(t)
    }

    /// `count` uniform samples over `[t0 - w, t0 + w]`.
    pub fn samples(&self, count: usize) -> Result<Vec<(f64, Configuration)>> {
        let count = count.max(2);
        let mut out = Vec::with_capacity(count);
        for k in 0..count {
            let frac = k as f64 / (count - 1) as f64;
            let t = self.base_time - self.half_width + 2.0 * self.half_width * frac;
            out.push((t, self.at(t)?));
        }
        Ok(out)
    }
}

impl std::fmt::Debug for WitnessPath {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WitnessPath")
            .field("label", &self.label)
            .field("base_time", &self.base_time)
            .field("half_width", &self.half_width)
            .field("recipe", &self.recipe)
            .finish()
    }
}

/// Tangent-span certificate at a singular configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NonManifoldCertificate {
    /// The certified configuration (original coordinates for the Delta).
    pub point: Vec<f64>,
    /// One numeric tangent per path (tilde coordinates for the Delta).
    pub tangents: Vec<Vec<f64>>,
    /// Singular values of the tangent matrix, descending.
    pub tangent_singular_values: Vec<f64>,
    pub span_rank: usize,
    pub max_path_residual: f64,
    pub assumed_local_dimension: usize,
    /// True iff the span exceeds the assumed local dimension.
    pub valid: bool,
}

fn limb_rotation(limb: usize) -> nalgebra::Matrix3<f64> {
    match limb {
        0 => nalgebra::Matrix3::identity(),
        1 => rotation_120(),
        2 => rotation_240(),
        _ => unreachable!("limb index"),
    }
}

/// Velocity of the limb-`limb` tip curve at angle `psi`.
fn limb_center_velocity(params: &ParameterSet, limb: usize, psi: f64) -> Vector3<f64> {
    limb_rotation(limb) * Vector3::new(-params.a() * psi.sin(), 0.0, params.a() * psi.cos())
}

fn pattern_from_pose(
    params: &ParameterSet,
    pose: &PlatformPose,
) -> Result<(CoincidencePattern, [Vector3<f64>; 3])> {
    let centers = [
        limb_center(params, 0, pose.angles[0]),
        limb_center(params, 1, pose.angles[1]),
        limb_center(params, 2, pose.angles[2]),
    ];
    let threshold = 1e-8 * params.a();
    let pairs = [(0usize, 1usize), (0, 2), (1, 2)];
    let close: Vec<(usize, usize)> = pairs
        .iter()
        .copied()
        .filter(|&(i, j)| (centers[i] - centers[j]).norm() <= threshold)
        .collect();
    let pattern = match close.len() {
        0 => {
            let min_distance = pairs
                .iter()
                .map(|&(i, j)| (centers[i] - centers[j]).norm())
                .fold(f64::INFINITY, f64::min);
            return Err(Error::NoCoincidence { min_distance });
        }
        1 => {
            let (i, j) = close[0];
            CoincidencePattern::TwoOfThree {
                pair: [i, j],
                lone: 3 - i - j,
            }
        }
        _ => CoincidencePattern::AllThree,
    };
    Ok((pattern, centers))
}

/// Classifies the arm-tip coincidence at an on-variety configuration
/// (original coordinates).
pub fn coincidence_pattern(
    params: &ParameterSet,
    point: &Configuration,
    tol: &ToleranceConfig,
) -> Result<CoincidencePattern> {
    let pose = pose_of(params, &to_tilde(point), tol)?;
    Ok(pattern_from_pose(params, &pose)?.0)
}

/// Per-limb angle schedule of a path.
#[derive(Clone, Copy)]
enum Schedule {
    Fixed(f64),
    Moving,
}

fn make_lift(
    params: ParameterSet,
    schedule: [Schedule; 3],
    delta: Arc<dyn Fn(f64) -> Result<Vector3<f64>> + Send + Sync>,
) -> Arc<dyn Fn(f64) -> Result<Configuration> + Send + Sync> {
    Arc::new(move |t: f64| {
        let angles = [
            match schedule[0] {
                Schedule::Fixed(v) => v,
                Schedule::Moving => t,
            },
            match schedule[1] {
                Schedule::Fixed(v) => v,
                Schedule::Moving => t,
            },
            match schedule[2] {
                Schedule::Fixed(v) => v,
                Schedule::Moving => t,
            },
        ];
        let position = delta(t)?;
        Ok(lift_pose(
            &params,
            &PlatformPose { position, angles },
        ))
    })
}

fn schedule_for(moving: &[usize], angles: [f64; 3]) -> [Schedule; 3] {
    let mut out = [
        Schedule::Fixed(angles[0]),
        Schedule::Fixed(angles[1]),
        Schedule::Fixed(angles[2]),
    ];
    for &limb in moving {
        out[limb] = Schedule::Moving;
    }
    out
}

fn check_base(
    path: &WitnessPath,
    expected: &Configuration,
    scale: f64,
) -> Result<()> {
    let got = path.at(path.base_time)?;
    let err = got.distance(expected);
    if err > 1e-9 * scale.max(1.0) {
        return Err(Error::ContinuationFailure {
            detail: format!(
                "{} misses its base point by {err:.3e}",
                path.label
            ),
        });
    }
    Ok(())
}

struct PathContext {
    params: ParameterSet,
    base: Configuration,
    pose: PlatformPose,
    platform: Vector3<f64>,
    half_width: f64,
}

fn pencil_interval(t0: f64, half_width: f64) -> (f64, f64) {
    (t0 - half_width - 1e-3, t0 + half_width + 1e-3)
}

fn build_two_of_three(
    ctx: &PathContext,
    pair: [usize; 2],
    lone: usize,
) -> Result<Vec<WitnessPath>> {
    let params = ctx.params;
    let b = params.b();
    let p = ctx.platform;
    let phi = ctx.pose.angles[pair[0]];
    let phi_lone = ctx.pose.angles[lone];
    let shared_center = limb_center(&params, pair[0], phi);
    let lone_sphere = Sphere::new(limb_center(&params, lone, phi_lone), b)?;

    // The platform point must lie in the degenerate pencil plane of the
    // coinciding pair, whose normal continues as the center-velocity
    // difference.
    let pencil_normal = {
        let v = limb_center_velocity(&params, pair[0], phi)
            - limb_center_velocity(&params, pair[1], phi);
        if v.norm() < 1e-9 {
            return Err(Error::ContinuationFailure {
                detail: "coinciding tips separate with zero velocity".into(),
            });
        }
        v.normalize()
    };
    if (p - shared_center).dot(&pencil_normal).abs() > 1e-8 * b {
        return Err(Error::PreconditionViolated {
            detail: "platform point is off the pencil plane of the coinciding pair".into(),
        });
    }

    let mut paths = Vec::with_capacity(4);

    // gamma1: both coinciding limbs move together.
    {
        let (pa, pb) = (pair[0], pair[1]);
        let prm = params;
        let family = equal_radius_pencil(
            move |t| limb_center(&prm, pa, t),
            move |t| limb_center(&prm, pb, t),
            b,
            Some(phi),
            pencil_interval(phi, ctx.half_width),
        )?;
        let seed = p;
        let sphere = lone_sphere;
        let delta: Arc<dyn Fn(f64) -> Result<Vector3<f64>> + Send + Sync> =
            Arc::new(move |t| circle_sphere_branch(&family, &sphere, &seed, t));
        paths.push(WitnessPath {
            label: PathLabel::Gamma1,
            base_point: ctx.base,
            base_time: phi,
            half_width: ctx.half_width,
            recipe: format!("pencil of limbs {}+{} against limb {}", pair[0], pair[1], lone),
            evaluator: make_lift(params, schedule_for(&pair, ctx.pose.angles), delta),
        });
    }

    // gamma2: only the lone limb moves; the point rides the circle cut out
    // of the shared sphere.
    {
        let prm = params;
        let lk = lone;
        let c = shared_center;
        let family = equal_radius_pencil(
            move |_| c,
            move |t| limb_center(&prm, lk, t),
            b,
            None,
            pencil_interval(phi_lone, ctx.half_width),
        )?;
        let base_slice = family.at(phi_lone)?;
        let reference = p - base_slice.center;
        let delta: Arc<dyn Fn(f64) -> Result<Vector3<f64>> + Send + Sync> =
            Arc::new(move |t| point_on_circle(&family, &reference, t));
        paths.push(WitnessPath {
            label: PathLabel::Gamma2,
            base_point: ctx.base,
            base_time: phi_lone,
            half_width: ctx.half_width,
            recipe: format!("lone limb {lone} sweeps its sphere through the shared circle"),
            evaluator: make_lift(params, schedule_for(&[lone], ctx.pose.angles), delta),
        });
    }

    // gamma3: all angles frozen; travel along the fixed intersection circle.
    paths.push(fixed_circle_path(
        ctx,
        shared_center,
        &lone_sphere,
        ctx.pose.angles,
    )?);

    // gamma4: one limb of the coinciding pair moves alone; the pencil of
    // its sphere against the (static) partner sphere degenerates at phi.
    {
        // Both pair members may qualify; take the first, matching the
        // convention that gamma4 moves the lower-indexed arm.
        let mover = pair
            .iter()
            .copied()
            .find(|&i| {
                (p - shared_center)
                    .dot(&limb_center_velocity(&params, i, phi).normalize())
                    .abs()
                    <= 1e-8 * b
            })
            .ok_or_else(|| Error::PreconditionViolated {
                detail: "platform point not perpendicular to any pair member's tip velocity"
                    .into(),
            })?;
        let prm = params;
        let c = shared_center;
        let family = equal_radius_pencil(
            move |t| limb_center(&prm, mover, t),
            move |_| c,
            b,
            Some(phi),
            pencil_interval(phi, ctx.half_width),
        )?;
        let seed = p;
        let sphere = lone_sphere;
        let delta: Arc<dyn Fn(f64) -> Result<Vector3<f64>> + Send + Sync> =
            Arc::new(move |t| circle_sphere_branch(&family, &sphere, &seed, t));
        paths.push(WitnessPath {
            label: PathLabel::Gamma4,
            base_point: ctx.base,
            base_time: phi,
            half_width: ctx.half_width,
            recipe: format!("limb {mover} moves alone against its frozen partner"),
            evaluator: make_lift(params, schedule_for(&[mover], ctx.pose.angles), delta),
        });
    }

    Ok(paths)
}

/// The fixed-angles path: all spheres static, the point travels along the
/// circle `S_shared ∩ S_lone` through the platform point. Its tangent has a
/// zero actuator block.
fn fixed_circle_path(
    ctx: &PathContext,
    shared_center: Vector3<f64>,
    lone_sphere: &Sphere,
    angles: [f64; 3],
) -> Result<WitnessPath> {
    let b = ctx.params.b();
    let p = ctx.platform;
    // Circle of the two static spheres.
    let delta_c = lone_sphere.center - shared_center;
    let dist = delta_c.norm();
    if dist < 1e-9 * b {
        return Err(Error::DegenerateIntersection {
            detail: "shared and lone spheres are concentric".into(),
        });
    }
    let normal = delta_c / dist;
    let center = (shared_center + lone_sphere.center) * 0.5;
    let radius_sq = b * b - 0.25 * dist * dist;
    if radius_sq <= 0.0 {
        return Err(Error::EmptyIntersection {
            detail: "static spheres do not meet in a circle".into(),
        });
    }
    let radius = radius_sq.sqrt();
    let radial = p - center;
    let u = radial / radius;
    let v = normal.cross(&u);
    let delta: Arc<dyn Fn(f64) -> Result<Vector3<f64>> + Send + Sync> =
        Arc::new(move |t: f64| Ok(center + (u * t.cos() + v * t.sin()) * radius));
    Ok(WitnessPath {
        label: PathLabel::Gamma3,
        base_point: ctx.base,
        base_time: 0.0,
        half_width: ctx.half_width,
        recipe: "travel along the fixed intersection circle, all actuators frozen".into(),
        evaluator: make_lift(ctx.params, schedule_for(&[], angles), delta),
    })
}

fn build_all_three(ctx: &PathContext) -> Result<Vec<WitnessPath>> {
    let params = ctx.params;
    let b = params.b();
    let p = ctx.platform;
    let phi = ctx.pose.angles[0];
    let c = limb_center(&params, 0, phi);
    let radial = (p - c) / b;

    let mut paths = Vec::with_capacity(4);

    // gamma1, gamma2: two orthonormal tangent directions of the common
    // sphere, realized as great-circle rotations of the platform point.
    let seed_axis = {
        let trials = [Vector3::x(), Vector3::y(), Vector3::z()];
        *trials
            .iter()
            .min_by(|a, b| {
                radial.dot(a).abs().total_cmp(&radial.dot(b).abs())
            })
            .expect("nonempty")
    };
    let e1 = (seed_axis - radial * radial.dot(&seed_axis)).normalize();
    let e2 = radial.cross(&e1);
    for (label, tangent) in [(PathLabel::Gamma1, e1), (PathLabel::Gamma2, e2)] {
        let delta: Arc<dyn Fn(f64) -> Result<Vector3<f64>> + Send + Sync> =
            Arc::new(move |t: f64| Ok(c + (radial * t.cos() + tangent * t.sin()) * b));
        paths.push(WitnessPath {
            label,
            base_point: ctx.base,
            base_time: 0.0,
            half_width: ctx.half_width,
            recipe: "great-circle rotation on the common sphere".into(),
            evaluator: make_lift(params, schedule_for(&[], ctx.pose.angles), delta),
        });
    }

    // gamma3: one pair of limbs moves together; the degenerate pencil
    // circle is intersected with the great circle of the common sphere in
    // the pencil's (fixed) plane. The pair is the one whose pencil plane
    // contains the platform point.
    {
        let pairs = [(0usize, 1usize), (0, 2), (1, 2)];
        let plane_normal = |i: usize, j: usize| -> Vector3<f64> {
            ((limb_rotation(i) - limb_rotation(j)) * Vector3::x()).normalize()
        };
        let (pi, pj) = pairs
            .into_iter()
            .find(|&(i, j)| (p - c).dot(&plane_normal(i, j)).abs() <= 1e-8 * b)
            .ok_or_else(|| Error::PreconditionViolated {
                detail: "no pencil plane contains the platform point".into(),
            })?;
        let n_plane = plane_normal(pi, pj);
        // In-plane frame about the common center.
        let frame = PlanarFrame::from_spanning(c, p - c, n_plane.cross(&(p - c)))?;
        let prm = params;
        let (fi, fj) = (pi, pj);
        let center2d = move |t: f64| {
            let m =
                (limb_center(&prm, fi, t) + limb_center(&prm, fj, t)) * 0.5;
            frame.to_plane(&m)
        };
        let radius_sq2d = move |t: f64| {
            let d = (limb_center(&prm, fi, t) - limb_center(&prm, fj, t)).norm_squared();
            b * b - 0.25 * d
        };
        let moving = MovingCircle2D::new(center2d, radius_sq2d, Some(phi))?;
        let (lim_plus, lim_minus) = degenerate_limits(b, &moving)?;
        let p2d = frame.to_plane(&p);
        let branch = if (lim_plus - p2d).norm() <= (lim_minus - p2d).norm() {
            Branch::Plus
        } else {
            Branch::Minus
        };
        let matched = (if branch == Branch::Plus { lim_plus } else { lim_minus } - p2d).norm();
        if matched > 1e-6 * b {
            return Err(Error::PreconditionViolated {
                detail: format!(
                    "platform point is not a branch limit of the pair pencil (off by {matched:.3e})"
                ),
            });
        }
        let delta: Arc<dyn Fn(f64) -> Result<Vector3<f64>> + Send + Sync> =
            Arc::new(move |t| {
                let q = circle_circle_branch(b, &moving, branch, t)?;
                Ok(frame.to_space(&q))
            });
        paths.push(WitnessPath {
            label: PathLabel::Gamma3,
            base_point: ctx.base,
            base_time: phi,
            half_width: ctx.half_width,
            recipe: format!("limbs {pi}+{pj} move together inside their fixed pencil plane"),
            evaluator: make_lift(params, schedule_for(&[pi, pj], ctx.pose.angles), delta),
        });
    }

    // gamma4: one limb moves alone against the common sphere of the other
    // two; reduced to the plane spanned by the radial direction and the tip
    // velocity.
    {
        let mover = (0..3)
            .find(|&i| {
                (p - c)
                    .dot(&limb_center_velocity(&params, i, phi).normalize())
                    .abs()
                    <= 1e-8 * b
            })
            .ok_or_else(|| Error::PreconditionViolated {
                detail: "platform point not perpendicular to any tip velocity".into(),
            })?;
        let fixed = Sphere::new(c, b)?;
        let prm = params;
        let (frame, moving) = plane_reduce(
            &fixed,
            move |t: f64| Sphere {
                center: limb_center(&prm, mover, t),
                radius: b,
            },
            phi,
            &p,
        )?;
        let (lim_plus, lim_minus) = degenerate_limits(b, &moving)?;
        let p2d = frame.to_plane(&p);
        let branch = if (lim_plus - p2d).norm() <= (lim_minus - p2d).norm() {
            Branch::Plus
        } else {
            Branch::Minus
        };
        let matched = (if branch == Branch::Plus { lim_plus } else { lim_minus } - p2d).norm();
        if matched > 1e-6 * b {
            return Err(Error::PreconditionViolated {
                detail: format!(
                    "platform point is not a branch limit of the single-limb pencil (off by {matched:.3e})"
                ),
            });
        }
        let delta: Arc<dyn Fn(f64) -> Result<Vector3<f64>> + Send + Sync> =
            Arc::new(move |t| {
                let q = circle_circle_branch(b, &moving, branch, t)?;
                Ok(frame.to_space(&q))
            });
        paths.push(WitnessPath {
            label: PathLabel::Gamma4,
            base_point: ctx.base,
            base_time: phi,
            half_width: ctx.half_width,
            recipe: format!("limb {mover} moves alone against the common sphere"),
            evaluator: make_lift(params, schedule_for(&[mover], ctx.pose.angles), delta),
        });
    }

    // Order as gamma1..gamma4.
    paths.sort_by_key(|p| match p.label {
        PathLabel::Gamma1 => 0,
        PathLabel::Gamma2 => 1,
        PathLabel::Gamma3 => 2,
        PathLabel::Gamma4 => 3,
    });
    Ok(paths)
}

/// Builds the four witness paths through a singular configuration given in
/// original coordinates, with the given parameter half-width.
pub fn witness_paths_with_width(
    params: &ParameterSet,
    point: &Configuration,
    tol: &ToleranceConfig,
    half_width: f64,
) -> Result<Vec<WitnessPath>> {
    let base = to_tilde(point);
    let pose = pose_of(params, &base, tol)?;
    let (pattern, _) = pattern_from_pose(params, &pose)?;
    if matches!(pattern, CoincidencePattern::TwoOfThree { .. }) && excluded_case(params) {
        return Err(Error::CertificateUnavailable {
            reason: "parameters on the excluded locus b = (3d^2 - a^2)/sqrt(a^2 + 3d^2)"
                .into(),
        });
    }
    let ctx = PathContext {
        params: *params,
        base,
        pose,
        platform: pose.position,
        half_width,
    };
    let paths = match pattern {
        CoincidencePattern::TwoOfThree { pair, lone } => build_two_of_three(&ctx, pair, lone)?,
        CoincidencePattern::AllThree => build_all_three(&ctx)?,
    };
    for path in &paths {
        check_base(path, &base, params.b())?;
    }
    Ok(paths)
}

/// Builds the four witness paths with the default half-width.
pub fn witness_paths(
    params: &ParameterSet,
    point: &Configuration,
    tol: &ToleranceConfig,
) -> Result<Vec<WitnessPath>> {
    witness_paths_with_width(params, point, tol, DEFAULT_HALF_WIDTH)
}

fn certificate_from_paths(
    paths: &[WitnessPath],
    point_coords: Vec<f64>,
    residual_of: impl Fn(&Configuration) -> Result<f64>,
    residual_bound: f64,
    samples: usize,
    assumed_local_dimension: usize,
    tol: &ToleranceConfig,
) -> Result<NonManifoldCertificate> {
    let mut max_path_residual: f64 = 0.0;
    let mut tangents = Vec::with_capacity(paths.len());
    for path in paths {
        for (t, config) in path.samples(samples)? {
            let r = residual_of(&config)?;
            if r > residual_bound {
                return Err(Error::PathInvalid {
                    residual: r,
                    tolerance: residual_bound,
                    t,
                });
            }
            max_path_residual = max_path_residual.max(r);
        }
        let tangent = central_difference_tangent(
            |t| path.at(t).map(|c| c.dvector()),
            path.base_time,
            tol,
        )?;
        tangents.push(tangent);
    }
    let dim = tangents[0].len();
    let matrix = DMatrix::from_fn(dim, tangents.len(), |i, j| tangents[j][i]);
    let sv = singular_values(&matrix)?;
    let span_rank = {
        let smax = sv[0];
        sv.iter().filter(|&&s| s > tol.rank_rel_tol * smax).count()
    };
    let valid = span_rank > assumed_local_dimension;
    if !valid {
        return Err(Error::CertificateFailure {
            span: span_rank,
            sigma_ratio: sv.last().copied().unwrap_or(0.0) / sv[0],
        });
    }
    Ok(NonManifoldCertificate {
        point: point_coords,
        tangents: tangents
            .iter()
            .map(|t| t.iter().copied().collect())
            .collect(),
        tangent_singular_values: sv,
        span_rank,
        max_path_residual,
        assumed_local_dimension,
        valid,
    })
}

/// Certifies that a catalog configuration (original coordinates) is not a
/// manifold point: all four paths stay on the variety and their tangents
/// span four dimensions, exceeding the assumed local dimension three.
pub fn certify(
    params: &ParameterSet,
    point: &Configuration,
    tol: &ToleranceConfig,
) -> Result<NonManifoldCertificate> {
    certify_with(params, point, tol, DEFAULT_HALF_WIDTH, DEFAULT_SAMPLES)
}

/// [`certify`] with explicit half-width and sample count.
pub fn certify_with(
    params: &ParameterSet,
    point: &Configuration,
    tol: &ToleranceConfig,
    half_width: f64,
    samples: usize,
) -> Result<NonManifoldCertificate> {
    let paths = witness_paths_with_width(params, point, tol, half_width)?;
    let tilde = build_delta(*params, DeltaVariant::Tilde);
    let bound = PATH_RESIDUAL_FACTOR * params.b() * params.b();
    certificate_from_paths(
        &paths,
        point.as_slice().to_vec(),
        |config| tilde.constraints().residual_max(config.as_slice()),
        bound,
        samples,
        3,
        tol,
    )
}

/// The folded crank-slider certificate: with equal link lengths the two
/// closed-form circle paths cross at `(0, l, 0)` with independent tangents,
/// exceeding the curve dimension one. Tangents are taken at the crossing
/// parameter `pi/2`, where both paths pass through the point.
pub fn crank_slider_witness(
    l1: f64,
    l2: f64,
    tol: &ToleranceConfig,
) -> Result<NonManifoldCertificate> {
    if (l1 - l2).abs() > 1e-12 * l1.abs().max(l2.abs()) {
        return Err(Error::Domain {
            detail: format!(
                "crank-slider with l1 = {l1}, l2 = {l2} has no configuration-space singularity"
            ),
        });
    }
    let m = build_crank_slider(l1, l2)?;
    let l = l1;
    let t0 = std::f64::consts::FRAC_PI_2;
    type CurvePath = Arc<dyn Fn(f64) -> Result<DVector<f64>> + Send + Sync>;
    let paths: Vec<(String, CurvePath)> = vec![
        (
            "crank circle with slider tracking at 2 l cos t".into(),
            Arc::new(move |t: f64| {
                Ok(DVector::from_row_slice(&[
                    l * t.cos(),
                    l * t.sin(),
                    2.0 * l * t.cos(),
                ]))
            }),
        ),
        (
            "crank circle with slider pinned at the origin".into(),
            Arc::new(move |t: f64| {
                Ok(DVector::from_row_slice(&[l * t.cos(), l * t.sin(), 0.0]))
            }),
        ),
    ];
    let bound = 1e-10 * l * l;
    let mut max_res: f64 = 0.0;
    let mut tangents = Vec::new();
    for (_, path) in &paths {
        for k in 0..DEFAULT_SAMPLES {
            let frac = k as f64 / (DEFAULT_SAMPLES - 1) as f64;
            let t = t0 - DEFAULT_HALF_WIDTH + 2.0 * DEFAULT_HALF_WIDTH * frac;
            let x = path(t)?;
            let r = m.constraints().residual_max(x.as_slice())?;
            if r > bound {
                return Err(Error::PathInvalid {
                    residual: r,
                    tolerance: bound,
                    t,
                });
            }
            max_res = max_res.max(r);
        }
        tangents.push(central_difference_tangent(|t| path(t), t0, tol)?);
    }
    let matrix = DMatrix::from_fn(3, 2, |i, j| tangents[j][i]);
    let sv = singular_values(&matrix)?;
    let span_rank = sv
        .iter()
        .filter(|&&s| s > tol.rank_rel_tol * sv[0])
        .count();
    if span_rank <= 1 {
        return Err(Error::CertificateFailure {
            span: span_rank,
            sigma_ratio: sv.last().copied().unwrap_or(0.0) / sv[0],
        });
    }
    Ok(NonManifoldCertificate {
        point: vec![0.0, l, 0.0],
        tangents: tangents.iter().map(|t| t.iter().copied().collect()).collect(),
        tangent_singular_values: sv,
        span_rank,
        max_path_residual: max_res,
        assumed_local_dimension: 1,
        valid: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{closed_form_point, CatalogLabel};
    use crate::symmetry::{act, representation, GroupElement};

    fn params() -> ParameterSet {
        ParameterSet::new(3.0, 5.0, 0.5).unwrap()
    }

    fn tol() -> ToleranceConfig {
        ToleranceConfig::default()
    }

    #[test]
    fn patterns_of_the_four_base_points() {
        let p = params();
        let q1 = closed_form_point(CatalogLabel::Q1, &p);
        assert_eq!(
            coincidence_pattern(&p, &q1, &tol()).unwrap(),
            CoincidencePattern::AllThree
        );
        let q4 = closed_form_point(CatalogLabel::Q4, &p);
        assert!(matches!(
            coincidence_pattern(&p, &q4, &tol()).unwrap(),
            CoincidencePattern::TwoOfThree { .. }
        ));
    }

    #[test]
    fn generic_point_has_no_coincidence() {
        let p = params();
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let config = loop {
            if let Some(c) = crate::catalog::sample_on_variety(&p, &mut rng) {
                break crate::mechanism::from_tilde(&c);
            }
        };
        assert!(matches!(
            coincidence_pattern(&p, &config, &tol()),
            Err(Error::NoCoincidence { .. })
        ));
    }

    #[test]
    fn all_three_tips_coincide_at_q1_on_the_axis() {
        let p = params();
        let q1 = closed_form_point(CatalogLabel::Q1, &p);
        let pose = pose_of(&p, &to_tilde(&q1), &tol()).unwrap();
        let expect = nalgebra::Vector3::new(0.0, 0.0, p.h());
        for limb in 0..3 {
            let c = limb_center(&p, limb, pose.angles[limb]);
            assert!((c - expect).norm() < 1e-12);
        }
        // The recovered angle matches pi - arctan(h/d).
        let phi = std::f64::consts::PI - (p.h() / p.d()).atan();
        for a in pose.angles {
            assert!((a - phi).abs() < 1e-12, "angle {a} vs {phi}");
        }
    }

    #[test]
    fn paths_hit_their_base_points_and_stay_on_the_variety() {
        let p = params();
        let tilde = build_delta(p, DeltaVariant::Tilde);
        let bound = PATH_RESIDUAL_FACTOR * p.b() * p.b();
        for label in CatalogLabel::ALL {
            let x = closed_form_point(label, &p);
            let paths = witness_paths(&p, &x, &tol()).unwrap();
            assert_eq!(paths.len(), 4);
            let base = to_tilde(&x);
            for path in &paths {
                assert!(path.at(path.base_time).unwrap().distance(&base) < 1e-9);
                for (_, config) in path.samples(DEFAULT_SAMPLES).unwrap() {
                    let r = tilde.constraints().residual_max(config.as_slice()).unwrap();
                    assert!(r <= bound, "{label}/{}: residual {r}", path.label);
                }
            }
        }
    }

    /// The actuator sub-blocks of the four tangents at a two-coinciding
    /// configuration reproduce the expected structure: gamma1 moves arms of
    /// the pair in lockstep, gamma2 only the lone arm, gamma3 nothing,
    /// gamma4 only the first pair arm.
    #[test]
    fn q4_actuator_tangent_blocks() {
        let p = params();
        let (h, d) = (p.h(), p.d());
        let x = closed_form_point(CatalogLabel::Q4, &p);
        let paths = witness_paths(&p, &x, &tol()).unwrap();
        let mut tangents = Vec::new();
        for path in &paths {
            let t = crate::numeric::central_difference_tangent(
                |t| path.at(t).map(|c| c.dvector()),
                path.base_time,
                &tol(),
            )
            .unwrap();
            tangents.push(t);
        }
        let act = |t: &nalgebra::DVector<f64>| -> Vec<f64> { t.as_slice()[9..15].to_vec() };

        // gamma1: both pair arms move with unit angle speed.
        let g1 = act(&tangents[0]);
        let expect1 = [-h, -d, -h, -d, 0.0, 0.0];
        for (got, want) in g1.iter().zip(expect1) {
            assert!((got - want).abs() < 1e-8, "gamma1 actuator {g1:?}");
        }
        // gamma2: only the lone arm.
        let g2 = act(&tangents[1]);
        let (ca3, sa3) = x.actuator(2);
        let expect2 = [0.0, 0.0, 0.0, 0.0, -sa3, ca3];
        for (got, want) in g2.iter().zip(expect2) {
            assert!((got - want).abs() < 1e-8, "gamma2 actuator {g2:?}");
        }
        // gamma3: frozen actuators.
        let g3 = act(&tangents[2]);
        assert!(g3.iter().all(|v| v.abs() < 1e-9), "gamma3 actuator {g3:?}");
        // gamma4: a single pair arm.
        let g4 = act(&tangents[3]);
        let expect4 = [-h, -d, 0.0, 0.0, 0.0, 0.0];
        for (got, want) in g4.iter().zip(expect4) {
            assert!((got - want).abs() < 1e-8, "gamma4 actuator {g4:?}");
        }
        // All four tangents are robustly nonzero.
        for t in &tangents {
            assert!(t.norm() >= 1e-3 * p.a().max(p.b()));
        }
    }

    #[test]
    fn certificates_hold_on_the_whole_catalog() {
        let p = params();
        for label in CatalogLabel::ALL {
            for g in GroupElement::all() {
                let x = act(&g, &closed_form_point(label, &p));
                let cert = certify(&p, &x, &tol()).unwrap();
                assert_eq!(cert.span_rank, 4, "{label}/{g}");
                assert!(cert.valid);
                assert_eq!(cert.assumed_local_dimension, 3);
                let ratio =
                    cert.tangent_singular_values[3] / cert.tangent_singular_values[0];
                assert!(ratio > 1e-6, "{label}/{g}: ratio {ratio}");
            }
        }
    }

    #[test]
    fn symmetry_transport_preserves_path_validity_and_span() {
        // Conjugating the tilde-frame samples by T Psi(g) T^-1 gives valid
        // paths at the transported point with the same tangent span.
        let p = params();
        let tilde_sys = build_delta(p, DeltaVariant::Tilde);
        let bound = PATH_RESIDUAL_FACTOR * p.b() * p.b();
        let x = closed_form_point(CatalogLabel::Q4, &p);
        let paths = witness_paths(&p, &x, &tol()).unwrap();
        let g = GroupElement::rotation().compose(&GroupElement::reflection());
        let rep = representation(&g);
        let transport = |c: &Configuration| to_tilde(&rep.apply(&crate::mechanism::from_tilde(c)));
        let mut tangents = Vec::new();
        for path in &paths {
            for (_, config) in path.samples(11).unwrap() {
                let moved = transport(&config);
                let r = tilde_sys.constraints().residual_max(moved.as_slice()).unwrap();
                assert!(r <= bound, "transported sample left the variety: {r}");
            }
            let t = crate::numeric::central_difference_tangent(
                |t| path.at(t).map(|c| transport(&c).dvector()),
                path.base_time,
                &tol(),
            )
            .unwrap();
            tangents.push(t);
        }
        let span = crate::numeric::span_dimension(&tangents, &tol()).unwrap();
        assert_eq!(span, 4);
    }

    #[test]
    fn excluded_parameters_refuse_two_of_three_certificates() {
        let a = 1.0f64;
        let d = 0.9f64;
        let q = (a * a + 3.0 * d * d).sqrt();
        let b = (3.0 * d * d - a * a) / q;
        let p = ParameterSet::new(a, b, d).unwrap();
        assert!(crate::catalog::excluded_case(&p));
        let x = closed_form_point(CatalogLabel::Q4, &p);
        assert!(matches!(
            witness_paths(&p, &x, &tol()),
            Err(Error::CertificateUnavailable { .. })
        ));
    }

    #[test]
    fn crank_slider_certificate_at_the_folded_point() {
        let cert = crank_slider_witness(1.0, 1.0, &tol()).unwrap();
        assert_eq!(cert.point, vec![0.0, 1.0, 0.0]);
        assert_eq!(cert.span_rank, 2);
        assert_eq!(cert.assumed_local_dimension, 1);
        assert!(cert.max_path_residual < 1e-12);
        // Tangents at the crossing: (-l, 0, -2l) and (-l, 0, 0).
        let t1 = &cert.tangents[0];
        let t2 = &cert.tangents[1];
        assert!((t1[0] + 1.0).abs() < 1e-9 && t1[1].abs() < 1e-9 && (t1[2] + 2.0).abs() < 1e-9);
        assert!((t2[0] + 1.0).abs() < 1e-9 && t2[1].abs() < 1e-9 && t2[2].abs() < 1e-9);
    }

    #[test]
    fn crank_slider_with_distinct_lengths_refuses() {
        assert!(crank_slider_witness(1.0, 2.0, &tol()).is_err());
    }
}
