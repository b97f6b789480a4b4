//! Analytic continuation of sphere and circle intersections.
//!
//! A family of equal-radius spheres whose centers collide at an isolated
//! parameter value still cuts out a well-defined circle there: the radical
//! plane's normal continues analytically as the derivative of the center
//! difference. Likewise two plane circles that coincide at an isolated
//! parameter have two intersection branches whose limits are perpendicular
//! to the center velocity. This module implements both continuations with
//! orientation kept continuous across the degenerate instant, which is what
//! the witness paths are built from.

use nalgebra::{Vector2, Vector3};

use crate::{Error, Result};

/// Relative center-coincidence threshold below which the chord direction is
/// replaced by the analytic derivative.
const COINCIDENCE_SWITCH: f64 = 1e-7;

/// Step for the internal derivative estimates of analytic center curves.
const DERIVATIVE_STEP: f64 = 1e-4;

pub type Curve3 = Box<dyn Fn(f64) -> Vector3<f64> + Send + Sync>;
pub type Curve2 = Box<dyn Fn(f64) -> Vector2<f64> + Send + Sync>;
pub type Scalar1 = Box<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sphere {
    pub center: Vector3<f64>,
    pub radius: f64,
}

impl Sphere {
    pub fn new(center: Vector3<f64>, radius: f64) -> Result<Self> {
        if radius <= 0.0 || radius.is_nan() || !center.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "radius",
                value: radius,
                constraint: "> 0 with finite center",
            });
        }
        Ok(Self { center, radius })
    }

    /// `|p - center|^2 - radius^2`.
    pub fn residual(&self, p: &Vector3<f64>) -> f64 {
        (p - self.center).norm_squared() - self.radius * self.radius
    }
}

/// An orthonormal 2-D coordinate frame inside a plane in space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarFrame {
    pub origin: Vector3<f64>,
    pub u: Vector3<f64>,
    pub v: Vector3<f64>,
}

impl PlanarFrame {
    /// Builds the frame spanned by `e1` and the part of `e2` orthogonal to
    /// it (Gram-Schmidt).
    pub fn from_spanning(
        origin: Vector3<f64>,
        e1: Vector3<f64>,
        e2: Vector3<f64>,
    ) -> Result<Self> {
        let n1 = e1.norm();
        if n1 < 1e-12 {
            return Err(Error::PreconditionViolated {
                detail: "first spanning vector is zero".into(),
            });
        }
        let u = e1 / n1;
        let w = e2 - u * u.dot(&e2);
        let n2 = w.norm();
        if n2 < 1e-12 {
            return Err(Error::PreconditionViolated {
                detail: "spanning vectors are parallel".into(),
            });
        }
        Ok(Self {
            origin,
            u,
            v: w / n2,
        })
    }

    pub fn normal(&self) -> Vector3<f64> {
        self.u.cross(&self.v)
    }

    pub fn to_plane(&self, p: &Vector3<f64>) -> Vector2<f64> {
        let rel = p - self.origin;
        Vector2::new(rel.dot(&self.u), rel.dot(&self.v))
    }

    pub fn out_of_plane(&self, p: &Vector3<f64>) -> f64 {
        (p - self.origin).dot(&self.normal())
    }

    pub fn to_space(&self, q: &Vector2<f64>) -> Vector3<f64> {
        self.origin + self.u * q.x + self.v * q.y
    }
}

/// The circle cut at parameter `t`: center, squared radius, and a unit
/// normal chosen continuously in `t`.
#[derive(Debug, Clone, Copy)]
pub struct CircleSlice {
    pub center: Vector3<f64>,
    pub radius_sq: f64,
    pub normal: Vector3<f64>,
}

impl CircleSlice {
    pub fn radius(&self) -> f64 {
        self.radius_sq.max(0.0).sqrt()
    }
}

/// The circle family `S1(t) ∩ S2(t)` of two equal-radius spheres with
/// analytic center curves, continued across an isolated center coincidence.
pub struct AnalyticCircleFamily {
    c1: Curve3,
    c2: Curve3,
    radius: f64,
    t_star: Option<f64>,
    interval: (f64, f64),
    orient: Vector3<f64>,
}

fn derivative3(f: &dyn Fn(f64) -> Vector3<f64>, t: f64) -> Vector3<f64> {
    let d = |step: f64| (f(t + step) - f(t - step)) / (2.0 * step);
    let coarse = d(DERIVATIVE_STEP);
    let fine = d(DERIVATIVE_STEP / 2.0);
    (fine * 4.0 - coarse) / 3.0
}

fn derivative2(f: &dyn Fn(f64) -> Vector2<f64>, t: f64) -> Vector2<f64> {
    let d = |step: f64| (f(t + step) - f(t - step)) / (2.0 * step);
    let coarse = d(DERIVATIVE_STEP);
    let fine = d(DERIVATIVE_STEP / 2.0);
    (fine * 4.0 - coarse) / 3.0
}

/// Builds the pencil family of the two radius-`radius` spheres centered on
/// `c1(t)` and `c2(t)`.
///
/// `t_star` designates the parameter where the centers may coincide; there
/// the plane normal is continued as the derivative of `c1 - c2`. The family
/// is only evaluatable on `interval` (small slack allowed).
pub fn equal_radius_pencil(
    c1: impl Fn(f64) -> Vector3<f64> + Send + Sync + 'static,
    c2: impl Fn(f64) -> Vector3<f64> + Send + Sync + 'static,
    radius: f64,
    t_star: Option<f64>,
    interval: (f64, f64),
) -> Result<AnalyticCircleFamily> {
    if radius <= 0.0 || radius.is_nan() {
        return Err(Error::InvalidParameter {
            name: "radius",
            value: radius,
            constraint: "> 0",
        });
    }
    let delta = |t: f64| c1(t) - c2(t);
    let anchor_t = t_star.unwrap_or(0.5 * (interval.0 + interval.1));
    let chord = delta(anchor_t);
    let orient = if chord.norm() > COINCIDENCE_SWITCH * radius {
        chord.normalize()
    } else {
        let vel = derivative3(&delta, anchor_t);
        if vel.norm() < 1e-9 * radius {
            return Err(Error::ContinuationFailure {
                detail: format!(
                    "center difference and its derivative both vanish at t = {anchor_t}"
                ),
            });
        }
        if t_star.is_none() {
            return Err(Error::ContinuationFailure {
                detail: "centers coincide at the anchor; designate t_star".into(),
            });
        }
        vel.normalize()
    };
    Ok(AnalyticCircleFamily {
        c1: Box::new(c1),
        c2: Box::new(c2),
        radius,
        t_star,
        interval,
        orient,
    })
}

impl AnalyticCircleFamily {
    pub fn interval(&self) -> (f64, f64) {
        self.interval
    }

    pub fn sphere_centers(&self, t: f64) -> (Vector3<f64>, Vector3<f64>) {
        ((self.c1)(t), (self.c2)(t))
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Evaluates the circle at `t`.
    pub fn at(&self, t: f64) -> Result<CircleSlice> {
        let slack = 1e-6 * (1.0 + (self.interval.1 - self.interval.0).abs());
        if t < self.interval.0 - slack || t > self.interval.1 + slack {
            return Err(Error::Domain {
                detail: format!(
                    "t = {t} outside family interval [{}, {}]",
                    self.interval.0, self.interval.1
                ),
            });
        }
        let delta = (self.c1)(t) - (self.c2)(t);
        let dist = delta.norm();
        let b_sq = self.radius * self.radius;
        let radius_sq = b_sq - 0.25 * dist * dist;
        if radius_sq < -1e-12 * b_sq {
            return Err(Error::EmptyIntersection {
                detail: format!("sphere centers {dist:.6} apart exceed diameter"),
            });
        }
        let normal = if dist > COINCIDENCE_SWITCH * self.radius {
            let n = delta / dist;
            if n.dot(&self.orient) < 0.0 {
                -n
            } else {
                n
            }
        } else {
            if self.t_star.is_none() {
                return Err(Error::DegenerateIntersection {
                    detail: "coincident centers outside the designated t_star".into(),
                });
            }
            let d = |s: f64| (self.c1)(s) - (self.c2)(s);
            let vel = derivative3(&d, t);
            if vel.norm() < 1e-9 * self.radius {
                return Err(Error::ContinuationFailure {
                    detail: format!("vanishing center velocity at t = {t}"),
                });
            }
            let n = vel.normalize();
            if n.dot(&self.orient) < 0.0 {
                -n
            } else {
                n
            }
        };
        Ok(CircleSlice {
            center: ((self.c1)(t) + (self.c2)(t)) * 0.5,
            radius_sq: radius_sq.max(0.0),
            normal,
        })
    }
}

/// A plane circle moving analytically with `t`, possibly crossing the
/// origin-centered fixed circle at a designated degenerate parameter.
pub struct MovingCircle2D {
    center: Curve2,
    radius_sq: Scalar1,
    t_star: Option<f64>,
    orient: Option<Vector2<f64>>,
}

impl MovingCircle2D {
    pub fn new(
        center: impl Fn(f64) -> Vector2<f64> + Send + Sync + 'static,
        radius_sq: impl Fn(f64) -> f64 + Send + Sync + 'static,
        t_star: Option<f64>,
    ) -> Result<Self> {
        let orient = match t_star {
            Some(ts) => {
                let vel = derivative2(&center, ts);
                if vel.norm() < 1e-9 {
                    return Err(Error::ContinuationFailure {
                        detail: format!("center velocity vanishes at t_star = {ts}"),
                    });
                }
                Some(vel.normalize())
            }
            None => None,
        };
        Ok(Self {
            center: Box::new(center),
            radius_sq: Box::new(radius_sq),
            t_star,
            orient,
        })
    }

    pub fn center(&self, t: f64) -> Vector2<f64> {
        (self.center)(t)
    }

    pub fn radius_sq(&self, t: f64) -> f64 {
        (self.radius_sq)(t)
    }
}

/// Which of the two analytic intersection branches to follow.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }
}

fn perp(v: &Vector2<f64>) -> Vector2<f64> {
    Vector2::new(-v.y, v.x)
}

/// Limits of the two branches at the degenerate parameter: points on the
/// fixed circle perpendicular to the center velocity,
/// `±(r0/|p'|)(-p_y', p_x')`.
pub fn degenerate_limits(r0: f64, moving: &MovingCircle2D) -> Result<(Vector2<f64>, Vector2<f64>)> {
    let ts = moving.t_star.ok_or(Error::Domain {
        detail: "degenerate_limits needs a designated t_star".into(),
    })?;
    let vel = derivative2(&moving.center, ts);
    let speed = vel.norm();
    if speed < 1e-9 {
        return Err(Error::ContinuationFailure {
            detail: "center velocity vanishes at t_star".into(),
        });
    }
    let base = perp(&vel) * (r0 / speed);
    Ok((base, -base))
}

/// Follows one analytic branch of the intersection of the fixed circle of
/// radius `r0` about the origin with the moving circle, valid through the
/// degenerate instant where the circles coincide.
///
/// Away from the degeneracy this is the textbook two-circle intersection;
/// near it the chord decomposition loses all digits and the branch point is
/// taken from the derivative limit instead. The branch label is attached to
/// the orientation of the center velocity at `t_star`, so each branch is
/// continuous (and analytic) across it.
pub fn circle_circle_branch(
    r0: f64,
    moving: &MovingCircle2D,
    branch: Branch,
    t: f64,
) -> Result<Vector2<f64>> {
    if r0 <= 0.0 || r0.is_nan() {
        return Err(Error::InvalidParameter {
            name: "r0",
            value: r0,
            constraint: "> 0",
        });
    }
    let p = moving.center(t);
    let r_sq = moving.radius_sq(t);
    let d = p.norm();
    if d < COINCIDENCE_SWITCH * r0 {
        // Degenerate evaluation; exact at t_star, O(|t - t_star|) nearby.
        if moving.t_star.is_none() {
            return Err(Error::DegenerateIntersection {
                detail: "coincident circle centers without designated t_star".into(),
            });
        }
        let (plus, minus) = degenerate_limits(r0, moving)?;
        return Ok(match branch {
            Branch::Plus => plus,
            Branch::Minus => minus,
        });
    }
    let l = (r0 * r0 + d * d - r_sq) / (2.0 * d);
    let scale = (r0 * r0).max(r_sq.abs()).max(d * d);
    let disc = r0 * r0 - l * l;
    if disc < -1e-12 * scale {
        return Err(Error::EmptyIntersection {
            detail: format!(
                "circles of radii {r0:.6}/{:.6} at distance {d:.6} do not meet",
                r_sq.max(0.0).sqrt()
            ),
        });
    }
    let orientation = match moving.orient {
        Some(o) if p.dot(&o) < 0.0 => -1.0,
        _ => 1.0,
    };
    let along = p * (l / d);
    let across = perp(&p) * (branch.sign() * orientation * disc.max(0.0).sqrt() / d);
    Ok(along + across)
}

/// Both intersection points of the fixed circle with the moving circle at a
/// single parameter (transversal case only).
pub fn circle_circle_points(
    r0: f64,
    moving: &MovingCircle2D,
    t: f64,
) -> Result<(Vector2<f64>, Vector2<f64>)> {
    Ok((
        circle_circle_branch(r0, moving, Branch::Plus, t)?,
        circle_circle_branch(r0, moving, Branch::Minus, t)?,
    ))
}

/// Follows the intersection point of a moving circle with a fixed sphere
/// that stays on the branch through `seed`.
///
/// The sphere is sectioned by the circle's plane and the resulting
/// coplanar two-circle problem is solved in closed form; of the two
/// solutions the one continuous with `seed` is returned. Tangential
/// configurations (the excluded parameter locus) are rejected.
pub fn circle_sphere_branch(
    family: &AnalyticCircleFamily,
    sphere: &Sphere,
    seed: &Vector3<f64>,
    t: f64,
) -> Result<Vector3<f64>> {
    let slice = family.at(t)?;
    let n = slice.normal;
    let offset = (sphere.center - slice.center).dot(&n);
    let rho_sq = sphere.radius * sphere.radius - offset * offset;
    let scale = sphere.radius * sphere.radius;
    if rho_sq < -1e-12 * scale {
        return Err(Error::EmptyIntersection {
            detail: "circle plane misses the sphere".into(),
        });
    }
    let section_center = sphere.center - n * offset;
    let sep = section_center - slice.center;
    let d = sep.norm();
    if d < 1e-9 * sphere.radius {
        return if (slice.radius_sq - rho_sq).abs() <= 1e-9 * scale {
            Err(Error::DegenerateIntersection {
                detail: "circle lies on the sphere (concentric equal section)".into(),
            })
        } else {
            Err(Error::EmptyIntersection {
                detail: "concentric section of different radius".into(),
            })
        };
    }
    let u = sep / d;
    let v = n.cross(&u);
    let x = (slice.radius_sq + d * d - rho_sq.max(0.0)) / (2.0 * d);
    let y_sq = slice.radius_sq - x * x;
    let scale2 = slice.radius_sq.max(rho_sq.abs()).max(d * d);
    if y_sq < -1e-12 * scale2 {
        return Err(Error::EmptyIntersection {
            detail: format!("section circles do not meet (y^2 = {y_sq:.3e})"),
        });
    }
    if y_sq <= 1e-12 * scale2 {
        return Err(Error::DegenerateIntersection {
            detail: "tangential circle/sphere intersection".into(),
        });
    }
    let y = y_sq.sqrt();
    let base = slice.center + u * x;
    let plus = base + v * y;
    let minus = base - v * y;
    let (chosen, other) = if (plus - seed).norm() <= (minus - seed).norm() {
        (plus, minus)
    } else {
        (minus, plus)
    };
    let d_chosen = (chosen - seed).norm();
    let d_other = (other - seed).norm();
    if d_chosen > 0.45 * (d_chosen + d_other) {
        return Err(Error::DegenerateIntersection {
            detail: "branch selection ambiguous (seed nearly equidistant)".into(),
        });
    }
    Ok(chosen)
}

/// A point moving on the circle family, keeping a fixed reference direction:
/// the projection of `reference` onto the circle plane, normalized and
/// scaled to the radius. Exact on the family and analytic wherever the
/// reference is not parallel to the plane normal.
pub fn point_on_circle(
    family: &AnalyticCircleFamily,
    reference: &Vector3<f64>,
    t: f64,
) -> Result<Vector3<f64>> {
    let slice = family.at(t)?;
    let n = slice.normal;
    let w = reference - n * n.dot(reference);
    let wn = w.norm();
    if wn < 1e-9 {
        return Err(Error::ContinuationFailure {
            detail: "reference direction parallel to the circle normal".into(),
        });
    }
    Ok(slice.center + w * (slice.radius() / wn))
}

/// Reduces a degenerate two-sphere intersection problem to the plane
/// spanned by `p - center` and the center velocity, per the perpendicularity
/// hypothesis: returns the frame and the in-plane moving circle, ready for
/// [`circle_circle_branch`] against the fixed great circle of radius
/// `fixed.radius`.
pub fn plane_reduce(
    fixed: &Sphere,
    moving: impl Fn(f64) -> Sphere + Send + Sync + 'static,
    t_star: f64,
    p: &Vector3<f64>,
) -> Result<(PlanarFrame, MovingCircle2D)> {
    let moving = std::sync::Arc::new(moving);
    let c0 = fixed.center;
    let r0 = fixed.radius;
    if (moving(t_star).center - c0).norm() > 1e-8 * r0.max(1.0) {
        return Err(Error::PreconditionViolated {
            detail: "moving sphere center must pass through the fixed center at t_star".into(),
        });
    }
    let center_curve = {
        let m = moving.clone();
        move |t: f64| m(t).center
    };
    let vel = derivative3(&center_curve, t_star);
    let speed = vel.norm();
    if speed < 1e-9 {
        return Err(Error::ContinuationFailure {
            detail: "center velocity vanishes at t_star".into(),
        });
    }
    let rel = p - c0;
    if (rel.norm() - r0).abs() > 1e-8 * r0.max(1.0) {
        return Err(Error::PreconditionViolated {
            detail: format!(
                "p is not on the fixed sphere (|p - c| = {:.6}, r = {:.6})",
                rel.norm(),
                r0
            ),
        });
    }
    let cosine = rel.dot(&vel) / (rel.norm() * speed);
    if cosine.abs() > 1e-8 {
        return Err(Error::PreconditionViolated {
            detail: format!(
                "p - center not perpendicular to the center velocity (cos = {cosine:.3e})"
            ),
        });
    }
    let frame = PlanarFrame::from_spanning(c0, rel, vel)?;
    let center_fn = {
        let m = moving.clone();
        move |t: f64| frame.to_plane(&m(t).center)
    };
    let radius_fn = move |t: f64| {
        let s = moving(t);
        let off = frame.out_of_plane(&s.center);
        s.radius * s.radius - off * off
    };
    let circle = MovingCircle2D::new(center_fn, radius_fn, Some(t_star))?;
    Ok((frame, circle))
}
