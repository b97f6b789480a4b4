//! The order-6 symmetry group of the Delta constraint system.
//!
//! The group is generated by a rotation `r` (cyclic relabeling of the three
//! limbs) and a reflection `s` (negating every `z_i` and `sa_i`), acting on
//! the 15 coordinates by signed permutations. The two generators commute:
//! `r` permutes the limb blocks while `s` applies the same sign pattern
//! inside every block, so the group is abelian of order six. The action
//! permutes the constraint polynomials up to an invertible linear mixing,
//! so it maps the variety to itself and preserves Jacobian rank.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::mechanism::{
    Configuration, DeltaVariant, FormalManipulator, ParameterSet, CONFIG_DIM,
};
use crate::numeric::ToleranceConfig;
use crate::{Error, Result};

/// An element `r^i s^j` of the symmetry group, in normal form with `i` in
/// `{0,1,2}` and `j` in `{0,1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GroupElement {
    rot: u8,
    flip: bool,
}

impl GroupElement {
    pub const IDENTITY: Self = Self {
        rot: 0,
        flip: false,
    };

    pub fn new(rot: i32, flip: bool) -> Self {
        Self {
            rot: rot.rem_euclid(3) as u8,
            flip,
        }
    }

    /// The generator `r` (cyclic limb relabeling).
    pub fn rotation() -> Self {
        Self::new(1, false)
    }

    /// The generator `s` (vertical reflection).
    pub fn reflection() -> Self {
        Self::new(0, true)
    }

    /// All six elements: `e, r, r2, s, rs, r2s`.
    pub fn all() -> [Self; 6] {
        [
            Self::new(0, false),
            Self::new(1, false),
            Self::new(2, false),
            Self::new(0, true),
            Self::new(1, true),
            Self::new(2, true),
        ]
    }

    pub fn is_identity(&self) -> bool {
        self.rot == 0 && !self.flip
    }

    /// Group product `self * other` (apply `other` first when acting). The
    /// generators commute, so the product is componentwise.
    pub fn compose(&self, other: &Self) -> Self {
        Self::new(
            self.rot as i32 + other.rot as i32,
            self.flip ^ other.flip,
        )
    }

    pub fn inverse(&self) -> Self {
        Self::new(-(self.rot as i32), self.flip)
    }
}

impl std::fmt::Display for GroupElement {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let base = match self.rot {
            0 => "",
            1 => "r",
            _ => "r2",
        };
        match (base, self.flip) {
            ("", false) => write!(f, "e"),
            ("", true) => write!(f, "s"),
            (b, false) => write!(f, "{b}"),
            (b, true) => write!(f, "{b}s"),
        }
    }
}

impl std::str::FromStr for GroupElement {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "e" => Ok(Self::new(0, false)),
            "r" => Ok(Self::new(1, false)),
            "r2" => Ok(Self::new(2, false)),
            "s" => Ok(Self::new(0, true)),
            "rs" => Ok(Self::new(1, true)),
            "r2s" => Ok(Self::new(2, true)),
            _ => Err(Error::Domain {
                detail: format!("unknown group element '{s}'"),
            }),
        }
    }
}

/// A 15-dimensional signed permutation: `(Psi x)[k] = sign[k] * x[source[k]]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rep15 {
    source: [usize; CONFIG_DIM],
    sign: [i8; CONFIG_DIM],
}

impl Rep15 {
    pub fn identity() -> Self {
        let mut source = [0; CONFIG_DIM];
        for (i, s) in source.iter_mut().enumerate() {
            *s = i;
        }
        Self {
            source,
            sign: [1; CONFIG_DIM],
        }
    }

    /// Image of the rotation generator: limb blocks advance cyclically
    /// (new block 1 reads old block 2, etc.), actuator pairs likewise.
    fn generator_rotation() -> Self {
        Self {
            source: [3, 4, 5, 6, 7, 8, 0, 1, 2, 11, 12, 13, 14, 9, 10],
            sign: [1; CONFIG_DIM],
        }
    }

    /// Image of the reflection generator: negate every `z_i` and `sa_i`.
    fn generator_reflection() -> Self {
        let mut sign = [1i8; CONFIG_DIM];
        for k in [2, 5, 8, 10, 12, 14] {
            sign[k] = -1;
        }
        Self {
            source: Self::identity().source,
            sign,
        }
    }

    /// Matrix product `self * other` as signed permutations (exact).
    pub fn compose(&self, other: &Self) -> Self {
        let mut source = [0; CONFIG_DIM];
        let mut sign = [1i8; CONFIG_DIM];
        for k in 0..CONFIG_DIM {
            source[k] = other.source[self.source[k]];
            sign[k] = self.sign[k] * other.sign[self.source[k]];
        }
        Self { source, sign }
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(CONFIG_DIM, CONFIG_DIM);
        for k in 0..CONFIG_DIM {
            m[(k, self.source[k])] = self.sign[k] as f64;
        }
        m
    }

    pub fn apply(&self, x: &Configuration) -> Configuration {
        let mut out = [0.0; CONFIG_DIM];
        for k in 0..CONFIG_DIM {
            out[k] = self.sign[k] as f64 * x[self.source[k]];
        }
        Configuration::new(out)
    }
}

/// The faithful 15-dimensional representation of the dihedral group.
pub fn representation(g: &GroupElement) -> Rep15 {
    let mut rep = Rep15::identity();
    let r = Rep15::generator_rotation();
    let GroupElement { rot, flip } = *g;
    for _ in 0..rot {
        rep = rep.compose(&r);
    }
    if flip {
        rep = rep.compose(&Rep15::generator_reflection());
    }
    rep
}

/// Linear action of a group element on a configuration.
pub fn act(g: &GroupElement, x: &Configuration) -> Configuration {
    representation(g).apply(x)
}

/// Closure of a point set under all six group elements, with points closer
/// than `branch_match_tol` identified. The output is sorted
/// lexicographically on coordinates, so it is deterministic.
pub fn orbit(points: &[Configuration], tol: &ToleranceConfig) -> Vec<Configuration> {
    let mut reps: Vec<Configuration> = Vec::new();
    for p in points {
        for g in GroupElement::all() {
            let image = act(&g, p);
            if !reps
                .iter()
                .any(|r| r.distance(&image) <= tol.branch_match_tol)
            {
                reps.push(image);
            }
        }
    }
    reps.sort_by(|a, b| {
        a.as_slice()
            .iter()
            .zip(b.as_slice())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    reps
}

/// A non-identity element that fixed a point (within tolerance).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FreeActionViolation {
    pub element: GroupElement,
    pub point_index: usize,
    pub displacement: f64,
}

/// Result of checking whether the action is free on a point set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FreeActionReport {
    pub is_free: bool,
    pub violations: Vec<FreeActionViolation>,
}

/// The action is free iff every non-identity element displaces every point
/// by more than `branch_match_tol`.
pub fn is_free_on(points: &[Configuration], tol: &ToleranceConfig) -> FreeActionReport {
    let mut violations = Vec::new();
    for (idx, p) in points.iter().enumerate() {
        for g in GroupElement::all() {
            if g.is_identity() {
                continue;
            }
            let displacement = act(&g, p).distance(p);
            if displacement <= tol.branch_match_tol {
                violations.push(FreeActionViolation {
                    element: g,
                    point_index: idx,
                    displacement,
                });
            }
        }
    }
    FreeActionReport {
        is_free: violations.is_empty(),
        violations,
    }
}

/// The 12x12 matrix expressing how a group element mixes the constraint
/// polynomials, fitted by least squares, with the worst fit residual.
#[derive(Debug, Clone)]
pub struct MixingFit {
    pub matrix: DMatrix<f64>,
    pub fit_residual: f64,
}

/// Fits `A_g` with `F(Psi(g) x) = A_g F(x)` from random evaluations.
///
/// The relation is exact for the Delta system, so the fit residual is at
/// rounding level; anything above `1e-8` signals a wrong representation or
/// constraint set and is reported as an error.
pub fn constraint_mixing_matrix(
    m: &FormalManipulator,
    g: &GroupElement,
    samples: usize,
    seed: u64,
) -> Result<MixingFit> {
    let params: ParameterSet = m.delta_params().ok_or(Error::Domain {
        detail: "constraint mixing is defined for the Delta mechanism".into(),
    })?;
    if m.delta_variant() != Some(DeltaVariant::Original) {
        return Err(Error::Domain {
            detail: "constraint mixing uses the original Delta variant".into(),
        });
    }
    // The exact relation needs far fewer, but the fit contract is at least
    // 200 evaluation points.
    let samples = samples.max(200);
    let rep = representation(g);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = m.constraints().dim_out();
    let mut x_mat = DMatrix::zeros(dim, samples);
    let mut y_mat = DMatrix::zeros(dim, samples);
    let (pos_scale, act_scale) = (params.b(), params.a());
    for k in 0..samples {
        let mut coords = [0.0; CONFIG_DIM];
        for (i, c) in coords.iter_mut().enumerate() {
            let scale = if i < 9 { pos_scale } else { act_scale };
            *c = rng.random_range(-scale..scale);
        }
        let config = Configuration::new(coords);
        let fx = m.constraints().eval(config.as_slice())?;
        let fgx = m.constraints().eval(rep.apply(&config).as_slice())?;
        x_mat.set_column(k, &fx);
        y_mat.set_column(k, &fgx);
    }
    // A = Y X^T (X X^T)^-1, via an LU solve on the Gram matrix.
    let gram = &x_mat * x_mat.transpose();
    let w = &y_mat * x_mat.transpose();
    let a_t = gram
        .clone()
        .lu()
        .solve(&w.transpose())
        .ok_or(Error::Domain {
            detail: "singular Gram matrix in mixing fit (too few samples)".into(),
        })?;
    let a = a_t.transpose();
    let fit_residual = (&a * &x_mat - &y_mat).amax();
    if fit_residual > 1e-8 {
        return Err(Error::InvarianceViolation {
            element: g.to_string(),
            residual: fit_residual,
            tolerance: 1e-8,
        });
    }
    let tol = ToleranceConfig::default();
    let rank = crate::numeric::numerical_rank(&a, &tol)?;
    if rank < dim {
        return Err(Error::InvarianceViolation {
            element: g.to_string(),
            residual: fit_residual,
            tolerance: 1e-8,
        });
    }
    Ok(MixingFit {
        matrix: a,
        fit_residual,
    })
}
