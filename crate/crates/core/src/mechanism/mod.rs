//! Formal manipulators: a real algebraic configuration space given by
//! polynomial constraints, a set of actuated coordinates, and a forward
//! kinematic map.
//!
//! Two mechanisms are built here: the Delta platform (15 coordinates, 12
//! constraints, in the original or the linearly transformed "tilde"
//! coordinates) and the planar crank-slider (3 coordinates, 2 constraints).

mod crank;
mod delta;
mod pose;

pub use crank::build_crank_slider;
pub use delta::{
    arm_center, build_delta, from_tilde, limb_center, rotation_120, rotation_240, to_tilde,
    DeltaVariant,
};
pub use pose::{lift_pose, pose_of, PlatformPose};

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Number of coordinates of a Delta configuration.
pub const CONFIG_DIM: usize = 15;
/// Number of Delta constraint polynomials.
pub const DELTA_CONSTRAINTS: usize = 12;

/// Column indices of the `(cos, sin)` actuator pair of each limb.
pub const ACTUATOR_COLUMNS: [(usize, usize); 3] = [(9, 10), (11, 12), (13, 14)];

/// Delta design parameters: upper-arm length `a`, lower-arm length `b`, and
/// the base/platform radius difference `d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterSet {
    a: f64,
    b: f64,
    d: f64,
}

impl ParameterSet {
    /// Validates `a > 0`, `b > 0`, `d > 0` and `a > d`.
    pub fn new(a: f64, b: f64, d: f64) -> Result<Self> {
        for (name, value) in [("a", a), ("b", b), ("d", d)] {
            if !value.is_finite() {
                return Err(Error::NonFinite { what: "ParameterSet" });
            }
            if value <= 0.0 {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    constraint: "> 0",
                });
            }
        }
        if a <= d {
            return Err(Error::InvalidParameter {
                name: "a",
                value: a,
                constraint: "a > d",
            });
        }
        Ok(Self { a, b, d })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    /// `sqrt(a^2 + 3 d^2)`, the norm of `(d, sqrt(3) d, sqrt(a^2 - d^2))`;
    /// the denominators of the closed-form singular configurations.
    pub fn q(&self) -> f64 {
        (self.a * self.a + 3.0 * self.d * self.d).sqrt()
    }

    /// `sqrt(a^2 - d^2)`: the height at which an upper-arm tip crosses the
    /// vertical axis (reached at `cos(psi) = -d/a`).
    pub fn h(&self) -> f64 {
        (self.a * self.a - self.d * self.d).sqrt()
    }

    /// Natural scale of the constraint residuals (`b^2`) for tolerance
    /// scaling.
    pub fn residual_scale(&self) -> f64 {
        (self.b * self.b).max(1.0)
    }
}

/// A point of the 15-dimensional Delta coordinate space, in the fixed order
/// `x1,y1,z1,x2,y2,z2,x3,y3,z3,ca1,sa1,ca2,sa2,ca3,sa3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Configuration {
    coords: [f64; CONFIG_DIM],
}

impl Configuration {
    pub fn new(coords: [f64; CONFIG_DIM]) -> Self {
        Self { coords }
    }

    pub fn from_slice(slice: &[f64]) -> Result<Self> {
        if slice.len() != CONFIG_DIM {
            return Err(Error::DimensionMismatch {
                what: "Configuration",
                expected: CONFIG_DIM,
                actual: slice.len(),
            });
        }
        let mut coords = [0.0; CONFIG_DIM];
        coords.copy_from_slice(slice);
        Ok(Self { coords })
    }

    pub fn zeros() -> Self {
        Self {
            coords: [0.0; CONFIG_DIM],
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coords
    }

    pub fn as_array(&self) -> &[f64; CONFIG_DIM] {
        &self.coords
    }

    pub fn is_finite(&self) -> bool {
        self.coords.iter().all(|x| x.is_finite())
    }

    /// Position block of limb `limb` (0-based).
    pub fn limb_position(&self, limb: usize) -> Vector3<f64> {
        let o = 3 * limb;
        Vector3::new(self.coords[o], self.coords[o + 1], self.coords[o + 2])
    }

    pub fn set_limb_position(&mut self, limb: usize, p: Vector3<f64>) {
        let o = 3 * limb;
        self.coords[o] = p.x;
        self.coords[o + 1] = p.y;
        self.coords[o + 2] = p.z;
    }

    /// `(cos, sin)` actuator pair of limb `limb` (0-based).
    pub fn actuator(&self, limb: usize) -> (f64, f64) {
        let (c, s) = ACTUATOR_COLUMNS[limb];
        (self.coords[c], self.coords[s])
    }

    pub fn set_actuator(&mut self, limb: usize, ca: f64, sa: f64) {
        let (c, s) = ACTUATOR_COLUMNS[limb];
        self.coords[c] = ca;
        self.coords[s] = sa;
    }

    pub fn dvector(&self) -> DVector<f64> {
        DVector::from_row_slice(&self.coords)
    }

    /// Euclidean distance in coordinate space.
    pub fn distance(&self, other: &Configuration) -> f64 {
        self.coords
            .iter()
            .zip(other.coords.iter())
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }
}

impl std::ops::Index<usize> for Configuration {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.coords[i]
    }
}

impl std::ops::IndexMut<usize> for Configuration {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.coords[i]
    }
}

/// An actuated coordinate: either a plain coordinate projection or a
/// projection onto a `(cos, sin)` pair constrained to a circle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ActuatorProjection {
    Coordinate(usize),
    CirclePair { cos_index: usize, sin_index: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum SystemKind {
    Delta {
        params: ParameterSet,
        variant: DeltaVariant,
    },
    CrankSlider {
        l1: f64,
        l2: f64,
    },
}

/// An evaluatable polynomial constraint map with its analytic Jacobian.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSystem {
    pub(crate) kind: SystemKind,
}

impl ConstraintSystem {
    pub fn dim_in(&self) -> usize {
        match self.kind {
            SystemKind::Delta { .. } => CONFIG_DIM,
            SystemKind::CrankSlider { .. } => 3,
        }
    }

    pub fn dim_out(&self) -> usize {
        match self.kind {
            SystemKind::Delta { .. } => DELTA_CONSTRAINTS,
            SystemKind::CrankSlider { .. } => 2,
        }
    }

    /// Names of the constraint components, in evaluation order.
    pub fn constraint_names(&self) -> &'static [&'static str] {
        match self.kind {
            SystemKind::Delta { .. } => &[
                "s1", "s2", "s3", "c1", "c2", "c3", "l1", "l2", "l3", "l4", "l5", "l6",
            ],
            SystemKind::CrankSlider { .. } => &["f1", "f2"],
        }
    }

    fn check_input(&self, x: &[f64], what: &'static str) -> Result<()> {
        if x.len() != self.dim_in() {
            return Err(Error::DimensionMismatch {
                what,
                expected: self.dim_in(),
                actual: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what });
        }
        Ok(())
    }

    /// Residual vector at `x`, in the fixed constraint order.
    pub fn eval(&self, x: &[f64]) -> Result<DVector<f64>> {
        self.check_input(x, "ConstraintSystem::eval")?;
        Ok(match &self.kind {
            SystemKind::Delta { params, variant } => delta::eval(params, *variant, x),
            SystemKind::CrankSlider { l1, l2 } => crank::eval(*l1, *l2, x),
        })
    }

    /// Analytic Jacobian at `x`.
    pub fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_input(x, "ConstraintSystem::jacobian")?;
        Ok(match &self.kind {
            SystemKind::Delta { params, variant } => delta::jacobian(params, *variant, x),
            SystemKind::CrankSlider { l1, l2 } => crank::jacobian(*l1, *l2, x),
        })
    }

    /// Largest absolute constraint residual at `x`.
    pub fn residual_max(&self, x: &[f64]) -> Result<f64> {
        Ok(self.eval(x)?.amax())
    }
}

/// A manipulator: constraint system, actuator projections and forward map.
#[derive(Debug, Clone, PartialEq)]
pub struct FormalManipulator {
    constraints: ConstraintSystem,
    actuators: Vec<ActuatorProjection>,
    name: &'static str,
    assumed_dim: usize,
}

impl FormalManipulator {
    pub(crate) fn new(
        constraints: ConstraintSystem,
        actuators: Vec<ActuatorProjection>,
        name: &'static str,
        assumed_dim: usize,
    ) -> Self {
        Self {
            constraints,
            actuators,
            name,
            assumed_dim,
        }
    }

    pub fn constraints(&self) -> &ConstraintSystem {
        &self.constraints
    }

    pub fn actuators(&self) -> &[ActuatorProjection] {
        &self.actuators
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    /// Expected local dimension of the configuration space at regular points.
    pub fn assumed_dim(&self) -> usize {
        self.assumed_dim
    }

    pub fn is_delta(&self) -> bool {
        matches!(self.constraints.kind, SystemKind::Delta { .. })
    }

    pub fn delta_params(&self) -> Option<ParameterSet> {
        match self.constraints.kind {
            SystemKind::Delta { params, .. } => Some(params),
            SystemKind::CrankSlider { .. } => None,
        }
    }

    pub fn delta_variant(&self) -> Option<DeltaVariant> {
        match self.constraints.kind {
            SystemKind::Delta { variant, .. } => Some(variant),
            SystemKind::CrankSlider { .. } => None,
        }
    }

    /// Forward kinematic map. For the Delta this is the first limb's joint
    /// vector `(d + ca1 + x1, y1, z1 + sa1)`, which on the tilde variety is
    /// exactly the platform point; for the crank-slider it is `(x_B, y_B)`.
    pub fn forward(&self, x: &[f64]) -> Result<DVector<f64>> {
        self.constraints.check_input(x, "FormalManipulator::forward")?;
        Ok(match &self.constraints.kind {
            SystemKind::Delta { params, .. } => {
                let d = params.d();
                DVector::from_row_slice(&[d + x[9] + x[0], x[1], x[2] + x[10]])
            }
            SystemKind::CrankSlider { .. } => DVector::from_row_slice(&[x[0], x[1]]),
        })
    }

    /// Jacobian of the forward map (constant for both mechanisms).
    pub fn forward_jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.constraints
            .check_input(x, "FormalManipulator::forward_jacobian")?;
        Ok(match &self.constraints.kind {
            SystemKind::Delta { .. } => {
                let mut j = DMatrix::zeros(3, CONFIG_DIM);
                j[(0, 0)] = 1.0;
                j[(0, 9)] = 1.0;
                j[(1, 1)] = 1.0;
                j[(2, 2)] = 1.0;
                j[(2, 10)] = 1.0;
                j
            }
            SystemKind::CrankSlider { .. } => {
                DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0])
            }
        })
    }
}
