mod common;

use common::*;
use passnode::feedback::stabilizing_feedback;
use passnode::linalg::{self, c64, CMat, CVec};
use passnode::passivity::{check_impedance, check_scattering, PassivityKind};
use passnode::second_order::{build_noncolocated, SecondOrderPlant};
use passnode::sim::{energy_audit, quadrature_weights, simulate, witness_experiment};
use rand::Rng;

#[test]
fn passive_nodes_pass_random_input_audits() {
    let mut r = rng(51);
    for i in 0..100 {
        let node = passive_node(&mut r, 1 + i % 4, 1 + i % 2, i % 2 == 0, 0.0);
        assert!(check_impedance(&node).unwrap().is_passive());
        let u = smooth_input(&mut r, node.inputs(), 3);
        let z0 = cvec(&mut r, node.states());
        let traj = simulate(&node, &z0, u, 2.0, 2000).unwrap();
        let audit = energy_audit(&traj, node.weight(), None);
        assert!(audit.passed(), "case {i}: {}", audit.min_defect);
    }
}

#[test]
fn not_passive_witness_drives_defect_negative() {
    let mut r = rng(52);
    for i in 0..30 {
        let node = non_passive_node(&mut r, 1 + i % 4, 1 + i % 2, i % 2 == 1);
        let cert = check_impedance(&node).unwrap();
        assert!(!cert.is_passive());
        let exp = witness_experiment(&node, &cert).expect("witness with negative rate");
        let audit = exp.audit(&node, PassivityKind::Impedance).unwrap();
        assert!(audit.min_defect < -1e-3, "case {i}: {}", audit.min_defect);
    }
}

#[test]
fn scattering_witness_drives_defect_negative() {
    let mut r = rng(53);
    for i in 0..10 {
        let node = passive_node(&mut r, 2, 1, i % 2 == 0, 0.1)
            .shift_feedthrough(&(linalg::identity(1) * c64(4.0, 0.0)))
            .unwrap();
        let cert = check_scattering(&node).unwrap();
        assert!(!cert.is_passive());
        let exp = witness_experiment(&node, &cert).unwrap();
        assert!(exp.audit(&node, PassivityKind::Scattering).unwrap().min_defect < -1e-3);
    }
}

#[test]
fn noncolocated_plant_needs_its_shift() {
    let mut r = rng(54);
    for _ in 0..5 {
        let n = 2;
        let x = cmat(&mut r, n, n);
        let y = cmat(&mut r, n, n);
        let plant = SecondOrderPlant::new(
            &x * x.adjoint() + linalg::identity(n),
            &y * y.adjoint() + linalg::identity(n) * c64(0.2, 0.0),
            cmat(&mut r, 1, n),
        )
        .with_b0(cmat(&mut r, n, 1));
        let (node, e) = build_noncolocated(&plant).unwrap();
        let cert = check_impedance(&node).unwrap();
        assert!(!cert.is_passive());
        let exp = witness_experiment(&node, &cert).unwrap();
        let traj = exp.run(&node).unwrap();
        assert!(energy_audit(&traj, node.weight(), None).min_defect < -1e-3);
        assert!(energy_audit(&traj, node.weight(), Some(&e)).passed());
    }
}

#[test]
fn closed_loop_energy_is_nonincreasing() {
    let mut r = rng(55);
    for _ in 0..10 {
        let (node, e) = almost_passive_node(&mut r, 3, 2, true);
        let kappa = 0.5 * passnode::passivity::positive_part(&e).unwrap().kappa0.as_f64().min(2.0);
        let syn = stabilizing_feedback(&node, &e, kappa).unwrap();
        let cl = &syn.closed_loop;
        let z0 = cvec(&mut r, 3);
        let traj = simulate(cl, &z0, |_| CVec::zeros(2), 5.0, 5000).unwrap();
        let energies: Vec<f64> = traj.states.iter().map(|z| cl.energy(z)).collect();
        for pair in energies.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12 * (1.0 + pair[0]));
        }
    }
}

#[test]
fn laplace_transform_of_output() {
    let mut r = rng(56);
    let s = c64(2.0, 0.0);
    for _ in 0..5 {
        let node = passive_node(&mut r, 3, 2, true, 0.5);
        let z0 = cvec(&mut r, 3);
        let u0 = cvec(&mut r, 2);
        let decay: f64 = r.random_range(0.5..2.0);
        let u_dir = u0.clone();
        let (t_final, steps) = (20.0, 20_000);
        let traj = simulate(&node, &z0, move |t| &u_dir * c64((-decay * t).exp(), 0.0), t_final, steps).unwrap();
        let weights = quadrature_weights(traj.len(), traj.step());
        let numeric = traj
            .outputs
            .iter()
            .zip(&traj.times)
            .zip(&weights)
            .fold(CVec::zeros(2), |acc, ((y, &t), &w)| acc + y * ((-s * t).exp() * w));
        let res: CMat = linalg::resolvent(node.a(), s).unwrap();
        let u_hat = &u0 / (s + decay);
        let expected = node.c() * res * &z0 + node.eval_transfer(s).unwrap() * u_hat;
        assert!((numeric - expected).norm() < 1e-4);
    }
}
