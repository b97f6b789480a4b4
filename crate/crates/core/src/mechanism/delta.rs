//! The Delta platform constraint system.
//!
//! Coordinates (15): `x1,y1,z1,x2,y2,z2,x3,y3,z3,ca1,sa1,ca2,sa2,ca3,sa3`.
//! Constraints (12), in this fixed order:
//!
//! * `s_i = x_i^2 + y_i^2 + z_i^2 - b^2` — lower arm `i` has length `b`,
//! * `c_i = ca_i^2 + sa_i^2 - a^2` — the actuator pair of limb `i` lies on
//!   the radius-`a` circle,
//! * `(l1,l2,l3) = v1 - A v2`, `(l4,l5,l6) = v1 - A^-1 v3` — the three limbs
//!   carry a common platform point, with `v_i = (d + ca_i + x_i, y_i,
//!   z_i + sa_i)` and `A` the rotation by 120 degrees about the z-axis.
//!
//! The "tilde" variant applies the linear change of coordinates that rotates
//! the limb-2 position block by `A` and the limb-3 block by `A^-1`. In tilde
//! coordinates each limb constraint reads `|p - center| = b` for a common
//! platform point `p`, which is what the witness-path construction uses.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::{
    ActuatorProjection, Configuration, ConstraintSystem, FormalManipulator, ParameterSet,
    SystemKind, ACTUATOR_COLUMNS, CONFIG_DIM, DELTA_CONSTRAINTS,
};

/// Which presentation of the Delta constraints to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DeltaVariant {
    Original,
    Tilde,
}

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Rotation by +120 degrees about the z-axis.
pub fn rotation_120() -> Matrix3<f64> {
    Matrix3::new(
        -0.5,
        -SQRT3 / 2.0,
        0.0,
        SQRT3 / 2.0,
        -0.5,
        0.0,
        0.0,
        0.0,
        1.0,
    )
}

/// Rotation by -120 degrees about the z-axis (inverse of [`rotation_120`]).
pub fn rotation_240() -> Matrix3<f64> {
    rotation_120().transpose()
}

/// Builds the Delta manipulator: 12 constraints on 15 coordinates, three
/// `(cos, sin)` actuator pairs, and the platform forward map.
pub fn build_delta(params: ParameterSet, variant: DeltaVariant) -> FormalManipulator {
    let name = match variant {
        DeltaVariant::Original => "delta-original",
        DeltaVariant::Tilde => "delta-tilde",
    };
    let actuators = ACTUATOR_COLUMNS
        .iter()
        .map(|&(c, s)| ActuatorProjection::CirclePair {
            cos_index: c,
            sin_index: s,
        })
        .collect();
    FormalManipulator::new(
        ConstraintSystem {
            kind: SystemKind::Delta { params, variant },
        },
        actuators,
        name,
        3,
    )
}

fn v_block(d: f64, x: &[f64], limb: usize) -> Vector3<f64> {
    let o = 3 * limb;
    let (c, s) = ACTUATOR_COLUMNS[limb];
    Vector3::new(d + x[c] + x[o], x[o + 1], x[o + 2] + x[s])
}

/// Upper-arm tip of limb `limb` expressed from the actuator pair alone.
fn w_block(d: f64, x: &[f64], limb: usize) -> Vector3<f64> {
    let (c, s) = ACTUATOR_COLUMNS[limb];
    Vector3::new(d + x[c], 0.0, x[s])
}

pub(crate) fn eval(params: &ParameterSet, variant: DeltaVariant, x: &[f64]) -> DVector<f64> {
    let (a, b, d) = (params.a(), params.b(), params.d());
    let rot = rotation_120();
    let rot_inv = rotation_240();
    let mut out = DVector::zeros(DELTA_CONSTRAINTS);
    for limb in 0..3 {
        let o = 3 * limb;
        out[limb] = x[o] * x[o] + x[o + 1] * x[o + 1] + x[o + 2] * x[o + 2] - b * b;
        let (c, s) = ACTUATOR_COLUMNS[limb];
        out[3 + limb] = x[c] * x[c] + x[s] * x[s] - a * a;
    }
    let (l123, l456) = match variant {
        DeltaVariant::Original => {
            let v1 = v_block(d, x, 0);
            let v2 = v_block(d, x, 1);
            let v3 = v_block(d, x, 2);
            (v1 - rot * v2, v1 - rot_inv * v3)
        }
        DeltaVariant::Tilde => {
            let v1 = v_block(d, x, 0);
            let b2 = Vector3::new(x[3], x[4], x[5]);
            let b3 = Vector3::new(x[6], x[7], x[8]);
            (
                v1 - rot * w_block(d, x, 1) - b2,
                v1 - rot_inv * w_block(d, x, 2) - b3,
            )
        }
    };
    for i in 0..3 {
        out[6 + i] = l123[i];
        out[9 + i] = l456[i];
    }
    out
}

pub(crate) fn jacobian(_params: &ParameterSet, variant: DeltaVariant, x: &[f64]) -> DMatrix<f64> {
    let rot = rotation_120();
    let rot_inv = rotation_240();
    let mut j = DMatrix::zeros(DELTA_CONSTRAINTS, CONFIG_DIM);
    for limb in 0..3 {
        let o = 3 * limb;
        for k in 0..3 {
            j[(limb, o + k)] = 2.0 * x[o + k];
        }
        let (c, s) = ACTUATOR_COLUMNS[limb];
        j[(3 + limb, c)] = 2.0 * x[c];
        j[(3 + limb, s)] = 2.0 * x[s];
    }
    // v_i depends on (x_i, y_i, z_i) by the identity and on (ca_i, sa_i)
    // through its first and third components.
    let fill_v1 = |j: &mut DMatrix<f64>, rows: usize| {
        for k in 0..3 {
            j[(rows + k, k)] += 1.0;
        }
        j[(rows, 9)] += 1.0;
        j[(rows + 2, 10)] += 1.0;
    };
    let fill_rotated = |j: &mut DMatrix<f64>, rows: usize, m: &Matrix3<f64>, limb: usize,
                        positions: bool| {
        let o = 3 * limb;
        let (c, s) = ACTUATOR_COLUMNS[limb];
        for r in 0..3 {
            if positions {
                for k in 0..3 {
                    j[(rows + r, o + k)] -= m[(r, k)];
                }
            }
            j[(rows + r, c)] -= m[(r, 0)];
            j[(rows + r, s)] -= m[(r, 2)];
        }
    };
    match variant {
        DeltaVariant::Original => {
            fill_v1(&mut j, 6);
            fill_rotated(&mut j, 6, &rot, 1, true);
            fill_v1(&mut j, 9);
            fill_rotated(&mut j, 9, &rot_inv, 2, true);
        }
        DeltaVariant::Tilde => {
            fill_v1(&mut j, 6);
            fill_rotated(&mut j, 6, &rot, 1, false);
            for k in 0..3 {
                j[(6 + k, 3 + k)] -= 1.0;
            }
            fill_v1(&mut j, 9);
            fill_rotated(&mut j, 9, &rot_inv, 2, false);
            for k in 0..3 {
                j[(9 + k, 6 + k)] -= 1.0;
            }
        }
    }
    j
}

/// Original -> tilde change of coordinates: rotate the limb-2 position block
/// by `A` and the limb-3 block by `A^-1`; identity elsewhere.
pub fn to_tilde(config: &Configuration) -> Configuration {
    let mut out = *config;
    out.set_limb_position(1, rotation_120() * config.limb_position(1));
    out.set_limb_position(2, rotation_240() * config.limb_position(2));
    out
}

/// Inverse of [`to_tilde`].
pub fn from_tilde(config: &Configuration) -> Configuration {
    let mut out = *config;
    out.set_limb_position(1, rotation_240() * config.limb_position(1));
    out.set_limb_position(2, rotation_120() * config.limb_position(2));
    out
}

fn w_of_angle(params: &ParameterSet, psi: f64) -> Vector3<f64> {
    Vector3::new(
        params.d() + params.a() * psi.cos(),
        0.0,
        params.a() * psi.sin(),
    )
}

/// Arm-tip curve `m_i(psi)`: `m1 = A w`, `m2 = A^-1 w`, `m3 = w` with
/// `w(psi) = (d + a cos psi, 0, a sin psi)`. `which` is 1, 2 or 3.
pub fn arm_center(params: &ParameterSet, which: usize, psi: f64) -> Vector3<f64> {
    let w = w_of_angle(params, psi);
    match which {
        1 => rotation_120() * w,
        2 => rotation_240() * w,
        3 => w,
        _ => panic!("arm_center index must be 1, 2 or 3, got {which}"),
    }
}

/// Center of the sphere constraining limb `limb` (0-based) in tilde
/// coordinates. The limb-to-curve assignment is the one under which lifting
/// a pose annihilates all six platform constraints identically: limb 0 uses
/// the unrotated tip, limb 1 the `A`-rotated one, limb 2 the `A^-1`-rotated
/// one.
pub fn limb_center(params: &ParameterSet, limb: usize, psi: f64) -> Vector3<f64> {
    match limb {
        0 => arm_center(params, 3, psi),
        1 => arm_center(params, 1, psi),
        2 => arm_center(params, 2, psi),
        _ => panic!("limb index must be 0, 1 or 2, got {limb}"),
    }
}
