//! Platform-pose coordinates on the tilde variety.
//!
//! Every point of the tilde variety is uniquely a lifted pose: a platform
//! point `p` together with three arm angles. The lift places limb block `i`
//! at `p - center_i(psi_i)` and the actuator pairs at `(a cos psi_i,
//! a sin psi_i)`; it satisfies all six platform constraints identically and
//! the three sphere constraints exactly when `|p - center_i(psi_i)| = b`.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{limb_center, Configuration, ParameterSet};
use crate::numeric::ToleranceConfig;
use crate::{Error, Result};

/// A platform point plus the three arm angles (radians, normalized to
/// `(-pi, pi]`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlatformPose {
    pub position: Vector3<f64>,
    pub angles: [f64; 3],
}

/// Normalizes an angle to `(-pi, pi]`.
pub(crate) fn wrap_angle(psi: f64) -> f64 {
    let mut t = psi.rem_euclid(2.0 * std::f64::consts::PI);
    if t > std::f64::consts::PI {
        t -= 2.0 * std::f64::consts::PI;
    }
    t
}

/// Builds the tilde configuration of a pose. Membership in the variety is
/// not required: the sphere residual of limb `i` is exactly
/// `|p - center_i(psi_i)|^2 - b^2`.
pub fn lift_pose(params: &ParameterSet, pose: &PlatformPose) -> Configuration {
    let a = params.a();
    let mut config = Configuration::zeros();
    for limb in 0..3 {
        let psi = pose.angles[limb];
        config.set_limb_position(limb, pose.position - limb_center(params, limb, psi));
        config.set_actuator(limb, a * psi.cos(), a * psi.sin());
    }
    config
}

/// Recovers the pose of a tilde configuration on the variety.
///
/// The angles come from the two-argument arctangent of the actuator pairs
/// and the platform point from the limb-1 block. Off-variety input is
/// rejected with the worst residual.
pub fn pose_of(
    params: &ParameterSet,
    config: &Configuration,
    tol: &ToleranceConfig,
) -> Result<PlatformPose> {
    let worst = super::build_delta(*params, super::DeltaVariant::Tilde)
        .constraints()
        .residual_max(config.as_slice())?;
    let bound = tol.residual_tol * params.residual_scale();
    if worst > bound {
        return Err(Error::OffVariety {
            residual: worst,
            tolerance: bound,
        });
    }
    let mut angles = [0.0; 3];
    for (limb, angle) in angles.iter_mut().enumerate() {
        let (ca, sa) = config.actuator(limb);
        *angle = wrap_angle(sa.atan2(ca));
    }
    // p = B1 + w(psi1) = (x1 + d + ca1, y1, z1 + sa1).
    let (ca1, sa1) = config.actuator(0);
    let b1 = config.limb_position(0);
    let position = Vector3::new(b1.x + params.d() + ca1, b1.y, b1.z + sa1);
    Ok(PlatformPose { position, angles })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanism::{build_delta, DeltaVariant};

    fn params() -> ParameterSet {
        ParameterSet::new(3.0, 5.0, 0.5).unwrap()
    }

    /// Deterministic pseudo-random poses whose platform point lies on all
    /// three spheres: pick angles, then intersect the three spheres by
    /// descending from a generic start with Newton.
    fn on_variety_pose(params: &ParameterSet, seed: u32) -> Option<PlatformPose> {
        let s = seed as f64;
        let angles = [
            wrap_angle((s * 0.711).sin() * 2.0),
            wrap_angle((s * 1.37 + 0.5).sin() * 2.0),
            wrap_angle((s * 2.19 + 1.1).sin() * 2.0),
        ];
        let centers: Vec<_> = (0..3)
            .map(|i| limb_center(params, i, angles[i]))
            .collect();
        let p = crate::catalog::trilaterate(&centers, params.b(), seed.is_multiple_of(2))?;
        Some(PlatformPose {
            position: p,
            angles,
        })
    }

    #[test]
    fn lift_then_recover_round_trips() {
        let p = params();
        let tol = ToleranceConfig::default();
        let mut tested = 0;
        for seed in 0..200 {
            let Some(pose) = on_variety_pose(&p, seed) else {
                continue;
            };
            let config = lift_pose(&p, &pose);
            let back = pose_of(&p, &config, &tol).unwrap();
            assert!((back.position - pose.position).norm() < 1e-10);
            for i in 0..3 {
                assert!((back.angles[i] - pose.angles[i]).abs() < 1e-10);
            }
            tested += 1;
            if tested >= 100 {
                break;
            }
        }
        assert!(tested >= 100, "only {tested} poses could be constructed");
    }

    #[test]
    fn actuators_reproduce_cos_sin_of_angles() {
        let p = params();
        let pose = PlatformPose {
            position: Vector3::new(1.0, -2.0, 3.0),
            angles: [0.3, -1.2, 2.4],
        };
        let config = lift_pose(&p, &pose);
        for i in 0..3 {
            let (ca, sa) = config.actuator(i);
            assert!((ca - p.a() * pose.angles[i].cos()).abs() < 1e-15);
            assert!((sa - p.a() * pose.angles[i].sin()).abs() < 1e-15);
        }
    }

    #[test]
    fn off_sphere_lift_has_the_predicted_sphere_residual() {
        let p = params();
        let tilde = build_delta(p, DeltaVariant::Tilde);
        let pose = (0..100)
            .find_map(|seed| on_variety_pose(&p, seed))
            .expect("some seed admits a platform point");
        // Push the platform off limb 1's sphere by moving it radially by 1.
        let center = limb_center(&p, 0, pose.angles[0]);
        let radial = (pose.position - center).normalize();
        let off = PlatformPose {
            position: pose.position + radial,
            angles: pose.angles,
        };
        let f = tilde
            .constraints()
            .eval(lift_pose(&p, &off).as_slice())
            .unwrap();
        let expected = (p.b() + 1.0) * (p.b() + 1.0) - p.b() * p.b();
        assert!((f[0] - expected).abs() < 1e-9, "s1 = {}", f[0]);
        // The platform constraints stay identically zero.
        for k in 6..12 {
            assert!(f[k].abs() < 1e-12);
        }
        // And a small perturbation tangent to the other two spheres moves
        // exactly one sphere residual, at the predicted first-order rate.
        let radials: Vec<Vector3<f64>> = (0..3)
            .map(|i| pose.position - limb_center(&p, i, pose.angles[i]))
            .collect();
        let u2 = radials[1].normalize();
        let mut u3 = radials[2] - u2 * u2.dot(&radials[2]);
        u3 = u3.normalize();
        let mut dir = radials[0];
        dir -= u2 * u2.dot(&dir);
        dir -= u3 * u3.dot(&dir);
        assert!(dir.norm() > 1e-6, "degenerate geometry for this seed");
        let dir = dir.normalize();
        let eps = 1e-4;
        let rate = 2.0 * radials[0].dot(&dir);
        let nudged = PlatformPose {
            position: pose.position + dir * eps,
            angles: pose.angles,
        };
        let f2 = tilde
            .constraints()
            .eval(lift_pose(&p, &nudged).as_slice())
            .unwrap();
        assert!((f2[0] - rate * eps).abs() < 1e-7, "s1 = {} vs {}", f2[0], rate * eps);
        for k in 1..3 {
            assert!(f2[k].abs() < 1e-7, "other spheres only move at second order");
        }
    }

    #[test]
    fn pose_of_rejects_off_variety_configurations() {
        let p = params();
        let tol = ToleranceConfig::default();
        let mut config = Configuration::zeros();
        config.set_actuator(0, p.a(), 0.0);
        config.set_actuator(1, p.a(), 0.0);
        config.set_actuator(2, p.a(), 0.0);
        let err = pose_of(&p, &config, &tol).unwrap_err();
        assert!(matches!(err, Error::OffVariety { .. }));
    }
}
