//! Property tests for the structural invariants: rank behavior under
//! transposition and orthogonal factors, kernel quality, invariance of the
//! variety and of Jacobian rank under the symmetry action, closed-form
//! catalog validity across a parameter grid, and classification invariance.

mod support;

use confspace::catalog::{closed_form_point, sample_on_variety, CatalogLabel};
use confspace::classify::{classify, CssStatus};
use confspace::mechanism::{build_delta, from_tilde, DeltaVariant, ParameterSet};
use confspace::numeric::{kernel_basis, numerical_rank, singular_values, ToleranceConfig};
use confspace::symmetry::{act, constraint_mixing_matrix, GroupElement};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tol() -> ToleranceConfig {
    ToleranceConfig::default()
}

/// Deterministic random-ish matrix from a seed.
fn seeded_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |i, j| {
        ((seed as f64 * 0.61 + 1.0) * (i as f64 * 2.31 + j as f64 * 1.17 + 0.7)).sin() * 3.0
    })
}

/// Orthogonal factor from the QR decomposition of a seeded matrix.
fn seeded_orthogonal(n: usize, seed: u64) -> DMatrix<f64> {
    let m = seeded_matrix(n, n, seed) + DMatrix::identity(n, n) * 0.1;
    m.qr().q()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn rank_is_transpose_invariant(rows in 1usize..8, cols in 1usize..8, seed in 0u64..1000) {
        let m = seeded_matrix(rows, cols, seed);
        let t = tol();
        prop_assert_eq!(
            numerical_rank(&m, &t).unwrap(),
            numerical_rank(&m.transpose(), &t).unwrap()
        );
    }

    #[test]
    fn rank_is_orthogonal_invariant(rows in 2usize..8, cols in 2usize..8, seed in 0u64..1000) {
        // Plant a rank deficiency by zeroing a column, then sandwich.
        let mut m = seeded_matrix(rows, cols, seed);
        let kill = (seed as usize) % cols;
        for i in 0..rows {
            m[(i, kill)] = 0.0;
        }
        let u = seeded_orthogonal(rows, seed.wrapping_add(13));
        let v = seeded_orthogonal(cols, seed.wrapping_add(29));
        let t = tol();
        let sandwiched = &u * &m * &v;
        prop_assert_eq!(
            numerical_rank(&sandwiched, &t).unwrap(),
            numerical_rank(&m, &t).unwrap()
        );
    }

    #[test]
    fn kernel_vectors_are_annihilated(rows in 1usize..7, cols in 1usize..7, seed in 0u64..1000) {
        let mut m = seeded_matrix(rows, cols, seed);
        if cols > 1 {
            // Duplicate a column to force a nontrivial kernel.
            let src = m.column(0).into_owned();
            m.set_column(cols - 1, &src);
        }
        let t = tol();
        let sv = singular_values(&m).unwrap();
        let basis = kernel_basis(&m, &t).unwrap();
        prop_assert_eq!(basis.len(), cols - numerical_rank(&m, &t).unwrap());
        for k in &basis {
            prop_assert!((k.norm() - 1.0).abs() < 1e-12);
            prop_assert!((&m * k).norm() <= 10.0 * t.rank_rel_tol * sv[0].max(1e-300));
        }
    }
}

#[test]
fn variety_and_rank_are_invariant_under_the_group_action() {
    let params = ParameterSet::new(3.0, 5.0, 0.5).unwrap();
    let m = build_delta(params, DeltaVariant::Original);
    let t = tol();
    let mut rng = ChaCha8Rng::seed_from_u64(97);
    let mut checked = 0;
    while checked < 50 {
        let Some(tilde) = sample_on_variety(&params, &mut rng) else {
            continue;
        };
        let x = from_tilde(&tilde);
        let base_rank = numerical_rank(
            &m.constraints().jacobian(x.as_slice()).unwrap(),
            &t,
        )
        .unwrap();
        for g in GroupElement::all() {
            let moved = act(&g, &x);
            let residual = m.constraints().residual_max(moved.as_slice()).unwrap();
            assert!(residual <= 1e-8, "zero-set invariance broke: {residual}");
            let rank = numerical_rank(
                &m.constraints().jacobian(moved.as_slice()).unwrap(),
                &t,
            )
            .unwrap();
            assert_eq!(rank, base_rank, "rank changed under {g}");
        }
        checked += 1;
    }
}

#[test]
fn closed_forms_hold_across_a_parameter_grid() {
    let t = tol();
    for a in [1.0, 2.0, 3.0] {
        for d in [0.1, 0.4 * a, 0.9 * a] {
            for b in [1.0, 5.0] {
                let params = ParameterSet::new(a, b, d).unwrap();
                let m = build_delta(params, DeltaVariant::Original);
                for label in CatalogLabel::ALL {
                    let x = closed_form_point(label, &params);
                    let residual = m.constraints().residual_max(x.as_slice()).unwrap();
                    assert!(
                        residual <= 1e-9 * b * b,
                        "{label} at ({a},{b},{d}): residual {residual}"
                    );
                    let rank = numerical_rank(
                        &m.constraints().jacobian(x.as_slice()).unwrap(),
                        &t,
                    )
                    .unwrap();
                    assert!(rank < 12, "{label} at ({a},{b},{d}): rank {rank}");
                }
            }
        }
    }
}

#[test]
fn catalog_points_stay_verified_under_the_action() {
    let params = ParameterSet::new(2.0, 3.0, 0.25).unwrap();
    let m = build_delta(params, DeltaVariant::Original);
    let t = tol();
    for label in CatalogLabel::ALL {
        let base = closed_form_point(label, &params);
        for g in GroupElement::all() {
            let record =
                confspace::catalog::verify_rank_drop(&m, &act(&g, &base), &t).unwrap();
            assert!(record.rank_deficient, "{label}/{g}");
        }
    }
}

#[test]
fn classification_is_invariant_under_the_group_action() {
    let params = ParameterSet::new(3.0, 5.0, 0.5).unwrap();
    let m = build_delta(params, DeltaVariant::Original);
    let t = tol();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut checked = 0;
    while checked < 10 {
        let Some(tilde) = sample_on_variety(&params, &mut rng) else {
            continue;
        };
        let x = from_tilde(&tilde);
        let base = classify(&m, x.as_slice(), &t).unwrap();
        for g in GroupElement::all() {
            let moved = classify(&m, act(&g, &x).as_slice(), &t).unwrap();
            assert_eq!(moved.css, base.css);
            assert_eq!(moved.endeffector_singular, base.endeffector_singular);
            assert_eq!(moved.actuator_singular, base.actuator_singular);
            assert_eq!(moved.regular, base.regular);
            assert_eq!(moved.tangent_dim, base.tangent_dim);
        }
        checked += 1;
    }
    // Generic points are regular with a three-dimensional tangent space.
}

#[test]
fn generic_delta_points_are_regular_with_tangent_dimension_three() {
    let params = ParameterSet::new(3.0, 5.0, 0.5).unwrap();
    let m = build_delta(params, DeltaVariant::Original);
    let t = tol();
    let mut rng = ChaCha8Rng::seed_from_u64(71);
    let mut checked = 0;
    while checked < 20 {
        let Some(tilde) = sample_on_variety(&params, &mut rng) else {
            continue;
        };
        let x = from_tilde(&tilde);
        let class = classify(&m, x.as_slice(), &t).unwrap();
        assert_eq!(class.css, CssStatus::No);
        assert!(class.regular);
        assert_eq!(class.tangent_dim, Some(3));
        assert_eq!(class.forward_rank, Some(3));
        checked += 1;
    }
}

#[test]
fn chart_choice_does_not_change_the_actuator_flags() {
    // The angle-chart differential at (ca, sa) spans the same row for any
    // chart of the circle: rotating the chart multiplies the row by a
    // nonzero factor. Recompute classification with explicitly rotated
    // charts and compare flags.
    let params = ParameterSet::new(3.0, 5.0, 0.5).unwrap();
    let m = build_delta(params, DeltaVariant::Original);
    let t = tol();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let tilde = loop {
        if let Some(c) = sample_on_variety(&params, &mut rng) {
            break c;
        }
    };
    let x = from_tilde(&tilde);
    let class = classify(&m, x.as_slice(), &t).unwrap();

    // Rotated chart rows: the derivative of atan2 after rotating the circle
    // by alpha is the same (-sa, ca)/a^2 row, so the projected ranks must
    // agree with what `classify` reported.
    let jac = m.constraints().jacobian(x.as_slice()).unwrap();
    let tangent = kernel_basis(&jac, &t).unwrap();
    for alpha in [0.0f64, 0.7, -2.1] {
        let mut rows = DMatrix::zeros(3, 15);
        for limb in 0..3 {
            let (cc, ss) = confspace::mechanism::ACTUATOR_COLUMNS[limb];
            let (ca, sa) = (x[cc], x[ss]);
            // Differential of atan2 in the chart rotated by alpha:
            // rho = atan2(sa cos a - ca sin a, ca cos a + sa sin a).
            let cp = ca * alpha.cos() + sa * alpha.sin();
            let sp = sa * alpha.cos() - ca * alpha.sin();
            let sq = cp * cp + sp * sp;
            rows[(limb, cc)] = (cp * (-alpha.sin()) - sp * alpha.cos()) / sq;
            rows[(limb, ss)] = (cp * alpha.cos() - sp * alpha.sin()) / sq;
        }
        let t_mat = DMatrix::from_fn(15, tangent.len(), |i, j| tangent[j][i]);
        let projected = rows * t_mat;
        let rank = numerical_rank(&projected, &t).unwrap();
        assert_eq!(rank < tangent.len(), class.actuator_singular);
    }
}

#[test]
fn mixing_matrices_exist_for_every_element() {
    let params = ParameterSet::new(3.0, 5.0, 0.5).unwrap();
    let m = build_delta(params, DeltaVariant::Original);
    for g in GroupElement::all() {
        let fit = constraint_mixing_matrix(&m, &g, 200, 1234).unwrap();
        assert!(fit.fit_residual <= 1e-10, "{g}: {}", fit.fit_residual);
    }
}

#[test]
fn actuator_projection_degenerates_approaching_a_catalog_point() {
    // Along the frozen-actuator witness path through q4, regular points
    // close to the singular one have an actuator-chart projection whose
    // smallest singular value shrinks toward zero: the chart failure at the
    // singular point is visible in the limit.
    let params = ParameterSet::new(3.0, 5.0, 0.5).unwrap();
    let m = build_delta(params, DeltaVariant::Original);
    let t = tol();
    let q4 = closed_form_point(CatalogLabel::Q4, &params);
    let paths = confspace::witness::witness_paths(&params, &q4, &t).unwrap();
    let gamma3 = paths
        .iter()
        .find(|p| matches!(p.label, confspace::witness::PathLabel::Gamma3))
        .unwrap();
    for offset in [0.04, 0.02, 0.01, 0.005] {
        let config = from_tilde(&gamma3.at(gamma3.base_time + offset).unwrap());
        let class = classify(&m, config.as_slice(), &t).unwrap();
        // Full constraint rank, yet the frozen-actuator tangent direction
        // survives: the actuator chart fails along the whole path, not just
        // at the singular point itself.
        assert_eq!(class.css, CssStatus::No, "nearby point keeps full rank");
        assert_eq!(class.jacobian_rank, 12);
        assert!(class.actuator_singular, "chart deficit flagged at offset {offset}");
        let full_rank = class
            .actuator_subset_ranks
            .iter()
            .find(|(subset, _)| subset.len() == 3)
            .map(|(_, rank)| *rank)
            .unwrap();
        assert_eq!(full_rank, 2, "one tangent direction projects to zero");
    }
}
