//! Seeded random node generators shared by the integration tests.
#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use passnode::linalg::{self, c64, CMat, CVec};
use passnode::StateSpaceNode;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type TestRng = ChaCha8Rng;

pub fn rng(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn cmat(rng: &mut TestRng, r: usize, c: usize) -> CMat {
    DMatrix::from_fn(r, c, |_, _| c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

pub fn rmat(rng: &mut TestRng, r: usize, c: usize) -> CMat {
    DMatrix::from_fn(r, c, |_, _| c64(rng.random_range(-1.0..1.0), 0.0))
}

pub fn cvec(rng: &mut TestRng, n: usize) -> CVec {
    CVec::from_fn(n, |_, _| c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

pub fn skew(rng: &mut TestRng, n: usize) -> CMat {
    let x = cmat(rng, n, n);
    (&x - x.adjoint()) * c64(0.5, 0.0)
}

pub fn hermitian(rng: &mut TestRng, n: usize) -> CMat {
    let x = cmat(rng, n, n);
    (&x + x.adjoint()) * c64(0.5, 0.0)
}

/// `XX^H/n + ½I`.
pub fn weight(rng: &mut TestRng, n: usize) -> CMat {
    let x = cmat(rng, n, n);
    &x * x.adjoint() * c64(1.0 / n.max(1) as f64, 0.0) + linalg::identity(n) * c64(0.5, 0.0)
}

/// Node whose `W`-orthonormal copy is `(at, bt, ct, d)`.
pub fn from_ortho(at: CMat, bt: CMat, ct: CMat, d: CMat, w: Option<CMat>) -> StateSpaceNode {
    match w {
        None => StateSpaceNode::new(at, bt, ct, d).unwrap(),
        Some(w) => {
            let (l, l_inv) = linalg::weight_factors(&w, 1e-12).unwrap();
            let lh = l.adjoint();
            let lih = l_inv.adjoint();
            let a = &lih * at * &lh;
            let b = &lih * bt;
            let c = ct * &lh;
            StateSpaceNode::from_parts(a, b, c, d, Some(w), String::new()).unwrap()
        }
    }
}

/// Impedance-passive node; the impedance form is `FF^H + margin·I`.
pub fn passive_node(rng: &mut TestRng, n: usize, m: usize, weighted: bool, margin: f64) -> StateSpaceNode {
    let r = rng.random_range(1..=n + m);
    let rr = cmat(rng, n, r);
    let z = cmat(rng, m, r);
    let q = &rr * rr.adjoint() + linalg::identity(n) * c64(margin, 0.0);
    let at = skew(rng, n) - q * c64(0.5, 0.0);
    let bt = cmat(rng, n, m);
    let ct = bt.adjoint() + &z * rr.adjoint();
    let d = &z * z.adjoint() * c64(0.5, 0.0) + skew(rng, m) + linalg::identity(m) * c64(0.5 * margin, 0.0);
    let w = weighted.then(|| weight(rng, n));
    from_ortho(at, bt, ct, d, w)
}

/// Node with `D + D^H` indefinite, hence not impedance passive.
pub fn non_passive_node(rng: &mut TestRng, n: usize, m: usize, weighted: bool) -> StateSpaceNode {
    let p = passive_node(rng, n, m, weighted, 0.1);
    let d = p.d();
    let top = linalg::hermitian_eigen(&(d + d.adjoint())).0[m - 1];
    let delta = rng.random_range(0.05..1.0);
    let shift = linalg::identity(m) * c64(0.5 * top + delta, 0.0);
    p.with_quadruple(p.a().clone(), p.b().clone(), p.c().clone(), d - shift).unwrap()
}

/// `(node, E)` with `Σ_E` impedance passive and `E` indefinite.
pub fn almost_passive_node(rng: &mut TestRng, n: usize, m: usize, weighted: bool) -> (StateSpaceNode, CMat) {
    let p = passive_node(rng, n, m, weighted, 0.05);
    let e = hermitian(rng, m);
    let node = p
        .with_quadruple(p.a().clone(), p.b().clone(), p.c().clone(), p.d() - &e)
        .unwrap();
    (node, e)
}

/// Contraction generator with `C = B*` and `D = 0`.
pub fn colocated_contraction(rng: &mut TestRng, n: usize, m: usize, weighted: bool) -> StateSpaceNode {
    let r = rng.random_range(0..=n);
    let rr = cmat(rng, n, r);
    let at = skew(rng, n) - &rr * rr.adjoint() * c64(0.5, 0.0);
    let bt = cmat(rng, n, m);
    let ct = bt.adjoint();
    let w = weighted.then(|| weight(rng, n));
    from_ortho(at, bt, ct, linalg::zeros(m, m), w)
}

/// Almost-passive node plus an undamped block at `±iω` that neither `B`
/// nor `C` reaches.
pub fn dark_mode_node(rng: &mut TestRng, n: usize, m: usize, omega: f64) -> (StateSpaceNode, CMat) {
    let (visible, e) = almost_passive_node(rng, n, m, false);
    let dark = linalg::from_real(2, 2, &[0.0, omega, -omega, 0.0]);
    let a = linalg::block_diag(visible.a(), &dark);
    let mut b = linalg::zeros(n + 2, m);
    b.view_mut((0, 0), (n, m)).copy_from(visible.b());
    let mut c = linalg::zeros(m, n + 2);
    c.view_mut((0, 0), (m, n)).copy_from(visible.c());
    let node = StateSpaceNode::new(a, b, c, visible.d().clone()).unwrap();
    (node, e)
}

/// Smooth input `Σ_j a_j sin(ω_j t + φ_j)` per channel.
pub fn smooth_input(rng: &mut TestRng, m: usize, terms: usize) -> impl Fn(f64) -> CVec + Clone {
    let params: Vec<Vec<(Complex64, f64, f64)>> = (0..m)
        .map(|_| {
            (0..terms)
                .map(|_| {
                    (
                        c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
                        rng.random_range(0.2..3.0),
                        rng.random_range(0.0..std::f64::consts::TAU),
                    )
                })
                .collect()
        })
        .collect();
    move |t| {
        CVec::from_iterator(
            params.len(),
            params.iter().map(|chan| {
                chan.iter()
                    .map(|&(a, w, phi)| a * (w * t + phi).sin())
                    .sum::<Complex64>()
            }),
        )
    }
}

/// Right-half-plane points `s = x + iy`.
pub fn rhp_points(rng: &mut TestRng, count: usize) -> Vec<Complex64> {
    (0..count)
        .map(|_| c64(rng.random_range(0.05..5.0), rng.random_range(-5.0..5.0)))
        .collect()
}
