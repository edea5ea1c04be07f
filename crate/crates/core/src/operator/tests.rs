use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use super::*;
use crate::instances::{random_contraction, random_pair, random_triple, BASIS_1, BASIS_2, BASIS_3};
use crate::rng::NormalStream;

const TOL: f64 = 1e-6;

fn op(entries: DMatrix<f64>, codomain: BasisId, domain: BasisId) -> OperatorMatrix {
    OperatorMatrix::new(entries, codomain, domain, Mode::Correlation)
}

fn scalar(c: f64, a: BasisId, b: BasisId) -> OperatorMatrix {
    op(DMatrix::from_element(1, 1, c), a, b)
}

fn scalar_pair(c: f64) -> BlockOperator2 {
    BlockOperator2::new(scalar(c, BASIS_1, BASIS_2)).unwrap()
}

fn scalar_triple(c12: f64, c13: f64, c23: f64) -> BlockOperator3 {
    BlockOperator3::new(
        scalar(c12, BASIS_1, BASIS_2),
        scalar(c13, BASIS_1, BASIS_3),
        scalar(c23, BASIS_2, BASIS_3),
    )
    .unwrap()
}

fn elem(values: &[f64], bases: &[BasisId]) -> HQElement {
    HQElement::new(
        values
            .iter()
            .zip(bases)
            .map(|(v, b)| HsVector::new(DVector::from_element(1, *v), *b))
            .collect(),
    )
}

fn hs(v: f64, b: BasisId) -> HsVector {
    HsVector::new(DVector::from_element(1, v), b)
}

#[test]
fn q_apply_scalar() {
    let q = scalar_pair(0.5);
    let out = q_apply(&q, &elem(&[1.0, 0.0], &[BASIS_1, BASIS_2])).unwrap();
    assert_eq!(out.stacked(), DVector::from_vec(vec![1.0, 0.5]));
}

#[test]
fn q2_inverse_scalar() {
    let inv = q2_inverse(&scalar_pair(0.5), TOL).unwrap();
    let expected = DMatrix::from_row_slice(2, 2, &[4.0 / 3.0, -2.0 / 3.0, -2.0 / 3.0, 4.0 / 3.0]);
    assert_relative_eq!(inv, expected, epsilon = 1e-15);

    let id = q2_inverse(&scalar_pair(0.0), TOL).unwrap();
    assert_eq!(id, DMatrix::identity(2, 2));
}

#[test]
fn q2_inverse_rejects_unit_norm() {
    let err = q2_inverse(&scalar_pair(1.0), TOL).unwrap_err();
    assert!(matches!(err, Error::AssumptionViolated { .. }));
}

#[test]
fn covariance_mode_is_rejected() {
    let m = OperatorMatrix::new(DMatrix::from_element(1, 1, 0.2), BASIS_1, BASIS_2, Mode::Covariance);
    assert!(BlockOperator2::new(m).is_err());
}

#[test]
fn hq_inner_scalar() {
    let q = scalar_pair(0.5);
    let h = elem(&[1.0, 0.0], &[BASIS_1, BASIS_2]);
    assert_relative_eq!(hq_inner(&h, &h, &q, TOL).unwrap(), 4.0 / 3.0, epsilon = 1e-15);
}

#[test]
fn hq_inner_checks_bases() {
    let q = scalar_pair(0.5);
    let h = elem(&[1.0, 0.0], &[BASIS_1, BASIS_3]);
    assert!(matches!(hq_inner(&h, &h, &q, TOL), Err(Error::BasisMismatch { .. })));
}

#[test]
fn q3_reduces_to_pair_when_third_is_independent() {
    let q = scalar_triple(0.5, 0.0, 0.0);
    let inv = q3_inverse(&q, TOL).unwrap();
    let mut expected = DMatrix::identity(3, 3);
    expected
        .view_mut((0, 0), (2, 2))
        .copy_from(&q2_inverse(&scalar_pair(0.5), TOL).unwrap());
    assert_relative_eq!(inv, expected, epsilon = 1e-14);

    let zero = q3_inverse(&scalar_triple(0.0, 0.0, 0.0), TOL).unwrap();
    assert_eq!(zero, DMatrix::identity(3, 3));
}

#[test]
fn q3_inverse_scalar_identity() {
    let q = scalar_triple(0.3, -0.4, 0.5);
    let inv = q3_inverse(&q, TOL).unwrap();
    assert_relative_eq!(q.assemble() * inv, DMatrix::identity(3, 3), epsilon = 1e-14);
}

#[test]
fn inverse_identities_on_random_instances() {
    for t in 0..200 {
        let mut s = NormalStream::new(77, t);
        let (a, b, c) = (s.int_in(1, 8), s.int_in(1, 8), s.int_in(1, 8));
        let q2 = random_pair(&mut s, a, b);
        let n2 = a + b;
        let err2 = crate::linalg::max_abs(
            &(q2.assemble() * q2_inverse(&q2, TOL).unwrap() - DMatrix::identity(n2, n2)),
        );
        assert!(err2 < 1e-9, "pair trial {t}: {err2:e}");

        let q3 = random_triple(&mut s, a, b, c);
        let n3 = a + b + c;
        let err3 = crate::linalg::max_abs(
            &(q3.assemble() * q3_inverse(&q3, TOL).unwrap() - DMatrix::identity(n3, n3)),
        );
        assert!(err3 < 1e-9, "triple trial {t}: {err3:e}");
    }
}

#[test]
fn congruence_identity() {
    let mut s = NormalStream::new(3, 0);
    let q = random_triple(&mut s, 3, 2, 4);
    let h = HQElement::from_stacked(&DVector::from_fn(9, |_, _| s.standard_normal()), &q).unwrap();
    let h2 = HQElement::from_stacked(&DVector::from_fn(9, |_, _| s.standard_normal()), &q).unwrap();
    let lhs = hq_inner(&q_apply(&q, &h).unwrap(), &q_apply(&q, &h2).unwrap(), &q, TOL).unwrap();
    let rhs = h.stacked().dot(&(q.assemble() * h2.stacked()));
    assert_relative_eq!(lhs, rhs, epsilon = 1e-10);
}

#[test]
fn pair_projection_scalar() {
    let c = 0.6;
    let (l1, l2) = project_l1_m2(&hs(1.0, BASIS_2), &scalar_pair(c)).unwrap();
    assert_relative_eq!(l1.stacked(), DVector::from_vec(vec![c, c * c]), epsilon = 1e-15);
    assert_relative_eq!(l2.stacked(), DVector::from_vec(vec![0.0, 1.0 - c * c]), epsilon = 1e-15);
}

#[test]
fn projections_match_gram_oracle() {
    let mut s = NormalStream::new(5, 1);
    let q = random_pair(&mut s, 4, 3);
    let f2 = HsVector::new(DVector::from_fn(3, |_, _| s.standard_normal()), BASIS_2);
    let (l1, l2) = project_l1_m2(&f2, &q).unwrap();
    let x = q_apply(&q, &HQElement::new(vec![HsVector::zeros(4, BASIS_1), f2])).unwrap();
    let parts = gram::l_components(&q, &x.stacked()).unwrap();
    assert_relative_eq!(parts[0], l1.stacked(), epsilon = 1e-10);
    assert_relative_eq!(parts[1], l2.stacked(), epsilon = 1e-10);

    let q = random_triple(&mut s, 2, 3, 4);
    let f3 = HsVector::new(DVector::from_fn(4, |_, _| s.standard_normal()), BASIS_3);
    let closed = project_m3_components(&f3, &q, TOL).unwrap();
    let mut h = HQElement::zeros(&q);
    h.parts[2] = f3;
    let x = q_apply(&q, &h).unwrap();
    let parts = gram::l_components(&q, &x.stacked()).unwrap();
    for k in 0..3 {
        assert_relative_eq!(parts[k], closed[k].stacked(), epsilon = 1e-10);
    }
    // the components add back up to the original element
    let sum = closed.iter().fold(DVector::zeros(9), |acc, c| acc + c.stacked());
    assert_relative_eq!(sum, x.stacked(), epsilon = 1e-12);
}

#[test]
fn m2_components_sum_to_element() {
    let q = scalar_triple(0.3, 0.2, 0.4);
    let (l1, l2) = project_m2_components(&hs(1.0, BASIS_2), &q).unwrap();
    let x = q_apply(&q, &elem(&[0.0, 1.0, 0.0], &[BASIS_1, BASIS_2, BASIS_3])).unwrap();
    assert_relative_eq!(l1.stacked() + l2.stacked(), x.stacked(), epsilon = 1e-15);
}

#[test]
fn bstarb_pair_scalar() {
    // ρ = 1/√2 ⇒ α² = ρ²/(1 − ρ²) = 1
    let q = scalar_pair(std::f64::consts::FRAC_1_SQRT_2);
    let out = bstarb_2(&hs(1.0, BASIS_2), &q, TOL).unwrap();
    assert_relative_eq!(out.coords[0], 1.0, epsilon = 1e-14);

    let zero = bstarb_2(&hs(1.0, BASIS_2), &scalar_pair(0.0), TOL).unwrap();
    assert_eq!(zero.coords[0], 0.0);
}

#[test]
fn bstarb_matches_numeric_composition() {
    let mut s = NormalStream::new(9, 2);
    let q = random_pair(&mut s, 3, 5);
    let f = HsVector::new(DVector::from_fn(5, |_, _| s.standard_normal()), BASIS_2);
    let closed = bstarb_2(&f, &q, TOL).unwrap();
    let h = HQElement::new(vec![HsVector::zeros(3, BASIS_1), f]);
    let numeric = gram::bstarb_numeric(&q, &h.stacked()).unwrap();
    assert_relative_eq!(numeric.rows(3, 5).into_owned(), closed.coords, epsilon = 1e-9);
    assert!(numeric.rows(0, 3).amax() < 1e-9);

    let q = random_triple(&mut s, 2, 3, 2);
    let f = HsVector::new(DVector::from_fn(2, |_, _| s.standard_normal()), BASIS_3);
    let closed = bstarb_3(&f, &q, TOL).unwrap();
    let mut h = HQElement::zeros(&q);
    h.parts[2] = f;
    let numeric = gram::bstarb_numeric(&q, &h.stacked()).unwrap();
    assert_relative_eq!(numeric.rows(5, 2).into_owned(), closed.coords, epsilon = 1e-9);
}

#[test]
fn bstarb_spectrum_maps_to_correlations() {
    let m = DMatrix::from_row_slice(2, 2, &[0.6, 0.0, 0.0, 0.2]);
    let q = BlockOperator2::new(op(m.clone(), BASIS_1, BASIS_2)).unwrap();
    let k = bstarb_2_matrix(&q, TOL).unwrap();
    for (i, rho) in [0.6_f64, 0.2].iter().enumerate() {
        assert_relative_eq!(k[(i, i)], rho * rho / (1.0 - rho * rho), epsilon = 1e-14);
    }
}

#[test]
fn sunder_blocks_are_orthonormal() {
    let q = scalar_pair(0.5);
    let bases = sunder_decompose_hq(&q, TOL).unwrap();
    let g = q2_inverse(&q, TOL).unwrap();
    let all = DMatrix::from_columns(&[bases[0].column(0), bases[1].column(0)]);
    assert_relative_eq!(all.transpose() * g * all, DMatrix::identity(2, 2), epsilon = 1e-14);

    let mut s = NormalStream::new(1, 1);
    let q = random_triple(&mut s, 3, 2, 3);
    let bases = sunder_decompose_hq(&q, TOL).unwrap();
    let g = q3_inverse(&q, TOL).unwrap();
    for i in 0..3 {
        for j in 0..3 {
            let block = bases[i].transpose() * &g * &bases[j];
            let expected = if i == j {
                DMatrix::identity(block.nrows(), block.ncols())
            } else {
                DMatrix::zeros(block.nrows(), block.ncols())
            };
            assert_relative_eq!(block, expected, epsilon = 1e-10);
        }
    }
}

#[test]
fn sunder_rejects_dependent_spans() {
    let span = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
    let err = sunder_decompose(&[span.clone(), span], &DMatrix::identity(2, 2)).unwrap_err();
    assert!(matches!(err, Error::RankDeficient(_)));
}

#[test]
fn cca_from_diagonal_operator() {
    let m = DMatrix::from_row_slice(2, 3, &[0.3, 0.0, 0.0, 0.0, 0.9, 0.0]);
    let pairs = cca_from_operators(&op(m, BASIS_1, BASIS_2), TOL).unwrap();
    assert_eq!(pairs.len(), 2);
    assert_relative_eq!(pairs[0].rho, 0.9, epsilon = 1e-15);
    assert_relative_eq!(pairs[1].rho, 0.3, epsilon = 1e-15);
    assert_relative_eq!(pairs[0].left.coords, DVector::from_vec(vec![0.0, 1.0]), epsilon = 1e-15);
}

#[test]
fn pcca_without_conditioning_is_cca() {
    let mut s = NormalStream::new(4, 0);
    let m23 = random_contraction(&mut s, 3, 2, 0.8);
    let q = BlockOperator3::new(
        op(DMatrix::zeros(2, 3), BASIS_1, BASIS_2),
        op(DMatrix::zeros(2, 2), BASIS_1, BASIS_3),
        op(m23.clone(), BASIS_2, BASIS_3),
    )
    .unwrap();
    let partial = pcca_from_operators(q.c12(), q.c13(), q.c23(), TOL).unwrap();
    let plain = cca_from_operators(&op(m23, BASIS_2, BASIS_3), TOL).unwrap();
    for (a, b) in partial.iter().zip(&plain) {
        assert_relative_eq!(a.rho, b.rho, epsilon = 1e-12);
    }
}

#[test]
fn pcca_scalar_closed_form() {
    let (a, b, c) = (0.5, 0.4, 0.6);
    let q = scalar_triple(a, b, c);
    let partial = pcca_from_operators(q.c12(), q.c13(), q.c23(), TOL).unwrap();
    let expected = (c - a * b) / ((1.0 - a * a) * (1.0 - b * b)).sqrt();
    assert_relative_eq!(partial[0].rho, expected, epsilon = 1e-14);
}

proptest! {
    #[test]
    fn residual_operator_is_a_strict_contraction(seed in 0u64..10_000, a in 1usize..6, b in 1usize..6, c in 1usize..6) {
        let mut s = NormalStream::new(seed, 0);
        let q = random_triple(&mut s, a, b, c);
        let norm = q.residual_cross_norm().unwrap();
        prop_assert!(norm < 1.0);
    }

    #[test]
    fn pair_inverse_is_symmetric(seed in 0u64..10_000, a in 1usize..6, b in 1usize..6) {
        let mut s = NormalStream::new(seed, 1);
        let q = random_pair(&mut s, a, b);
        let inv = q2_inverse(&q, TOL).unwrap();
        prop_assert!(crate::linalg::max_abs(&(&inv - inv.transpose())) < 1e-10);
    }
}
