mod common;

use common::*;
use passnode::cayley::{check_impedance_cayley, internal_cayley, check_discrete_passivity};
use passnode::linalg::{self, c64};
use passnode::passivity::{
    self, check_impedance, check_impedance_reciprocal, check_scattering, impedance_form,
    minimal_e_colocated_at, minimal_e_esad_at, minimal_e_selfadjoint_at, PassivityKind, Verdict,
};
use passnode::StateSpaceNode;
use proptest::prelude::*;

#[test]
fn generated_passive_nodes_certify() {
    let mut r = rng(11);
    for i in 0..30 {
        let node = passive_node(&mut r, 1 + i % 5, 1 + i % 3, i % 2 == 0, 0.05);
        let cert = check_impedance(&node).unwrap();
        assert!(cert.is_passive(), "case {i}: {}", cert.min_eigenvalue);
        assert!(cert.points_agree());
        assert!(cert.witness.is_none());
    }
}

#[test]
fn non_passive_witness_violates_form() {
    let mut r = rng(12);
    for i in 0..30 {
        let node = non_passive_node(&mut r, 1 + i % 4, 1 + i % 3, i % 2 == 1);
        let cert = check_impedance(&node).unwrap();
        assert_eq!(cert.verdict, Verdict::NotPassive, "case {i}");
        assert!(cert.points_agree());
        let v = cert.witness.clone().unwrap();
        assert!((v.norm() - 1.0).abs() < 1e-10);
        // back to orthonormal coordinates, then evaluate the form
        let n = node.states();
        let mut vt = v.clone();
        vt.rows_mut(0, n).copy_from(&node.to_ortho(&v.rows(0, n).into_owned()));
        let value = (vt.adjoint() * impedance_form(&node) * &vt)[(0, 0)].re;
        assert!(value < 0.0, "case {i}: {value}");
    }
}

#[test]
fn three_criteria_agree() {
    let mut r = rng(13);
    for i in 0..40 {
        let (n, m, w) = (1 + i % 5, 1 + i % 2, i % 3 == 0);
        let node = if i % 2 == 0 {
            passive_node(&mut r, n, m, w, 0.05)
        } else {
            non_passive_node(&mut r, n, m, w)
        };
        let cont = check_impedance(&node).unwrap().verdict;
        let disc = check_impedance_cayley(&node, c64(1.3, 0.4)).unwrap().verdict;
        let zero = linalg::zeros(m, m);
        let recip = check_impedance_reciprocal(&node, &zero, 0.7).unwrap().verdict;
        assert_eq!(cont, disc, "case {i}");
        assert_eq!(cont, recip, "case {i}");
    }
}

#[test]
fn colocated_contractions_are_passive() {
    let mut r = rng(14);
    for i in 0..30 {
        let node = colocated_contraction(&mut r, 1 + i % 6, 1 + i % 3, i % 2 == 0);
        assert!(check_impedance(&node).unwrap().is_passive(), "case {i}");
    }
}

#[test]
fn scattering_certificate_matches_discrete_route() {
    let mut r = rng(15);
    for i in 0..20 {
        let node = passive_node(&mut r, 3, 2, i % 2 == 0, 0.1);
        // pushing D far out breaks contractivity of G
        let node = if i % 2 == 0 {
            node
        } else {
            node.shift_feedthrough(&(linalg::identity(2) * c64(5.0, 0.0))).unwrap()
        };
        let cont = check_scattering(&node).unwrap().verdict;
        let disc = check_discrete_passivity(&internal_cayley(&node, c64(1.0, 0.0)).unwrap(), PassivityKind::Scattering)
            .unwrap()
            .verdict;
        assert_eq!(cont, disc, "case {i}");
    }
}

fn skew_colocated(r: &mut TestRng, n: usize, m: usize) -> StateSpaceNode {
    let bt = cmat(r, n, m);
    StateSpaceNode::new(skew(r, n), bt.clone(), bt.adjoint(), cmat(r, m, m)).unwrap()
}

#[test]
fn esad_shift_is_independent_of_s() {
    let mut r = rng(16);
    for _ in 0..10 {
        let node = colocated_contraction(&mut r, 4, 2, true);
        let node = node.shift_feedthrough(&cmat(&mut r, 2, 2)).unwrap();
        let points = rhp_points(&mut r, 5);
        let es: Vec<_> = points.iter().map(|&s| minimal_e_esad_at(&node, s).unwrap()).collect();
        let spread = es.iter().map(|e| linalg::max_diff(e, &es[0])).fold(0.0, f64::max);
        assert!(spread < 1e-8, "{spread}");
        let expected = (node.d() + node.d().adjoint()) * c64(-0.5, 0.0);
        assert!(linalg::max_diff(&es[0], &expected) < 1e-10);
    }
}

#[test]
fn skew_generator_shift_matches_feedthrough() {
    let mut r = rng(17);
    for _ in 0..10 {
        let node = skew_colocated(&mut r, 4, 2);
        let expected = (node.d() + node.d().adjoint()) * c64(-0.5, 0.0);
        let e = minimal_e_colocated_at(&node, 0.3).unwrap();
        let diff = linalg::max_diff(&e, &expected);
        let g = node.eval_transfer(c64(0.0, 0.3)).unwrap();
        assert!(diff < 1e-13 * (1.0 + linalg::max_abs(&g)).powi(2), "{diff}");
    }
}

#[test]
fn selfadjoint_shift_is_independent_of_s_and_minimal() {
    let mut r = rng(18);
    for _ in 0..10 {
        let n = 4;
        let x = cmat(&mut r, n, n);
        let a = -(&x * x.adjoint()) - linalg::identity(n) * c64(0.1, 0.0);
        let bt = cmat(&mut r, n, 2);
        let node = StateSpaceNode::new(a, bt.clone(), bt.adjoint(), cmat(&mut r, 2, 2)).unwrap();
        let points = rhp_points(&mut r, 5);
        let es: Vec<_> = points.iter().map(|&s| minimal_e_selfadjoint_at(&node, s).unwrap()).collect();
        let spread = es.iter().map(|e| linalg::max_diff(e, &es[0])).fold(0.0, f64::max);
        assert!(spread < 1e-8, "{spread}");
        assert!(check_impedance(&node.shift_feedthrough(&es[0]).unwrap()).unwrap().is_passive());
        let probe = &es[0] - linalg::identity(2) * c64(1e-3, 0.0);
        assert!(!check_impedance(&node.shift_feedthrough(&probe).unwrap()).unwrap().is_passive());
    }
}

#[test]
fn positive_real_scan_is_nonnegative_for_passive_nodes() {
    let mut r = rng(19);
    let grid = passivity::right_half_plane_grid(100);
    for _ in 0..10 {
        let node = passive_node(&mut r, 3, 2, true, 0.01);
        let scan = passivity::positive_real_scan(&node, &grid).unwrap();
        assert!(scan.min_eigenvalue > -1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn verdict_is_invariant_under_weight_change(seed in any::<u64>(), n in 1usize..5, m in 1usize..3) {
        let mut r = rng(seed);
        let node = if seed % 2 == 0 { passive_node(&mut r, n, m, false, 0.05) } else { non_passive_node(&mut r, n, m, false) };
        // similarity z ↦ Tz with W = T^H T leaves the supply balance unchanged
        let t = cmat(&mut r, n, n) + linalg::identity(n) * c64(2.0 * n as f64, 0.0);
        let t_inv = t.clone().try_inverse().unwrap();
        let moved = StateSpaceNode::from_parts(
            &t_inv * node.a() * &t,
            &t_inv * node.b(),
            node.c() * &t,
            node.d().clone(),
            Some(t.adjoint() * &t),
            String::new(),
        ).unwrap();
        prop_assert_eq!(check_impedance(&node).unwrap().verdict, check_impedance(&moved).unwrap().verdict);
    }
}
