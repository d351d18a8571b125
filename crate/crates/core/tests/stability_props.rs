mod common;

use common::*;
use passnode::feedback::output_feedback;
use passnode::linalg::{self, c64, CMat};
use passnode::stability::{
    benchimol_conditions, closed_loop_spectrum_gate, imaginary_axis_eigenvalues, nearest_eigenvalue,
    stability_verdict, unitary_subspace, unobservable_space, StabilityVerdict,
};
use passnode::StateSpaceNode;
use rand::Rng;

/// `[C; CA; …; CA^{n−1}]`.
fn observability_matrix(a: &CMat, c: &CMat) -> CMat {
    let n = a.nrows();
    let p = c.nrows();
    let mut out = linalg::zeros(n * p, n);
    let mut block = c.clone();
    for i in 0..n {
        out.view_mut((i * p, 0), (p, n)).copy_from(&block);
        block = &block * a;
    }
    out
}

fn rank(m: &CMat) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let top = sv.iter().copied().fold(0.0, f64::max);
    sv.iter().filter(|&&s| s > 1e-9 * (1.0 + top)).count()
}

#[test]
fn unobservable_space_matches_kalman_rank() {
    let mut r = rng(31);
    for i in 0..20 {
        let n1 = 1 + i % 3;
        let n2 = i % 3;
        let n = n1 + n2;
        let mut blk = linalg::zeros(n, n);
        blk.view_mut((0, 0), (n1, n1)).copy_from(&cmat(&mut r, n1, n1));
        blk.view_mut((n1, 0), (n2, n1)).copy_from(&cmat(&mut r, n2, n1));
        blk.view_mut((n1, n1), (n2, n2)).copy_from(&cmat(&mut r, n2, n2));
        let mut c_blk = linalg::zeros(1, n);
        c_blk.view_mut((0, 0), (1, n1)).copy_from(&cmat(&mut r, 1, n1));
        let t = cmat(&mut r, n, n) + linalg::identity(n) * c64(n as f64, 0.0);
        let t_inv = t.clone().try_inverse().unwrap();
        let a = &t * blk * &t_inv;
        let c = c_blk * &t_inv;
        let node = StateSpaceNode::new(a.clone(), cmat(&mut r, n, 1), c.clone(), linalg::zeros(1, 1)).unwrap();
        let basis = unobservable_space(&node);
        let obs = observability_matrix(&a, &c);
        assert_eq!(basis.ncols(), n - rank(&obs), "case {i}");
        assert!(linalg::max_abs(&(obs * &basis)) < 1e-8 * (1.0 + linalg::max_abs(&a)).powi(n as i32));
    }
}

#[test]
fn unitary_part_lies_in_dissipation_kernel() {
    let mut r = rng(32);
    for i in 0..20 {
        let (node, _) = dark_mode_node(&mut r, 1 + i % 3, 1, 1.0 + i as f64 * 0.1);
        let xu = unitary_subspace(&node).unwrap();
        assert!(xu.ncols() >= 2);
        let w = node.weight();
        let diss = w * node.a() + node.a().adjoint() * w;
        assert!(linalg::max_abs(&(diss * &xu)) < 1e-8);
    }
}

#[test]
fn bweak_is_cweak_of_dual() {
    let mut r = rng(33);
    for i in 0..20 {
        let node = if i % 2 == 0 {
            colocated_contraction(&mut r, 3, 1, true)
        } else {
            dark_mode_node(&mut r, 2, 1, 1.5).0
        };
        let (_, bweak) = benchimol_conditions(&node).unwrap();
        let (cweak_dual, _) = benchimol_conditions(&node.dual()).unwrap();
        assert_eq!(bweak, cweak_dual, "case {i}");
    }
}

#[test]
fn observability_implies_cweak() {
    let mut r = rng(34);
    for _ in 0..20 {
        let node = colocated_contraction(&mut r, 4, 2, true);
        if unobservable_space(&node).ncols() == 0 {
            assert!(benchimol_conditions(&node).unwrap().0);
        }
    }
}

#[test]
fn gate_agrees_with_closed_loop_eigenvalues() {
    let mut r = rng(35);
    for _ in 0..20 {
        let node = passive_node(&mut r, 3, 2, false, 0.1);
        let k = cmat(&mut r, 2, 2);
        let Ok(closed) = output_feedback(&node, &k) else { continue };
        let open = node.spectrum();
        let mut lambdas: Vec<_> = closed
            .spectrum()
            .into_iter()
            .filter(|l| open.iter().all(|o| (o - l).norm() > 1e-3))
            .collect();
        let eig_count = lambdas.len();
        lambdas.extend(rhp_points(&mut r, 5));
        let gate = closed_loop_spectrum_gate(&node, &k, &lambdas).unwrap();
        for (i, (&l, &g)) in lambdas.iter().zip(&gate).enumerate() {
            let is_eig = closed.spectrum().iter().any(|e| (e - l).norm() < 1e-9);
            if i < eig_count {
                assert!(!g, "eigenvalue {l} passed the gate");
            } else {
                assert_eq!(g, !is_eig);
            }
        }
    }
}

#[test]
fn almost_passive_gate_on_imaginary_axis() {
    let mut r = rng(36);
    for _ in 0..20 {
        let (node, e) = almost_passive_node(&mut r, 3, 2, true);
        let kappa0 = passnode::passivity::positive_part(&e).unwrap().kappa0;
        let kappa = r.random_range(0.05..0.95) * kappa0.as_f64().min(5.0);
        let k = linalg::identity(2) * c64(-kappa, 0.0);
        let lambdas: Vec<_> = (0..10).map(|_| c64(0.0, r.random_range(-5.0..5.0))).collect();
        assert!(closed_loop_spectrum_gate(&node, &k, &lambdas).unwrap().into_iter().all(|g| g));
    }
}

#[test]
fn verdict_matches_closed_loop_abscissa() {
    let mut r = rng(37);
    for i in 0..50 {
        let (node, e) = if i % 5 == 0 {
            dark_mode_node(&mut r, 2, 1, 0.5 + i as f64 * 0.05)
        } else {
            almost_passive_node(&mut r, 1 + i % 4, 1 + i % 2, i % 2 == 0)
        };
        let kappa0 = passnode::passivity::positive_part(&e).unwrap().kappa0;
        let kappa = 0.5 * kappa0.as_f64().min(2.0);
        let report = stability_verdict(&node, &e, kappa).unwrap();
        let hurwitz = report.closed_loop_abscissa < -1e-10;
        assert_eq!(report.verdict == StabilityVerdict::StronglyStable, hurwitz, "case {i}");
        assert!(report.spectrum_inclusion_holds, "case {i}");
        let open_imag = imaginary_axis_eigenvalues(node.a());
        for w in &report.closed_loop_imaginary_spectrum {
            assert!(open_imag.iter().any(|v| (v - w).abs() < 1e-8));
        }
    }
}

#[test]
fn dark_mode_survives_feedback() {
    let mut r = rng(38);
    for j in 0..10 {
        let omega = 0.7 + 0.3 * j as f64;
        let (node, e) = dark_mode_node(&mut r, 3, 2, omega);
        let kappa0 = passnode::passivity::positive_part(&e).unwrap().kappa0;
        let kappa = 0.5 * kappa0.as_f64().min(2.0);
        let report = stability_verdict(&node, &e, kappa).unwrap();
        assert_eq!(report.verdict, StabilityVerdict::NotStable);
        let nearest = nearest_eigenvalue(report.synthesis.closed_loop.a(), c64(0.0, omega)).unwrap();
        assert!((nearest - c64(0.0, omega)).norm() < 1e-8);
    }
}
