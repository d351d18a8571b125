//! Unobservable and unitary subspaces, the closed-loop spectrum gate and the
//! stability verdict for `u = −κy + v`.
//!
//! Subspaces are computed in the orthonormal coordinates of `W` and returned
//! as `W`-orthonormal bases in the original coordinates. At finite dimension
//! the imaginary-axis spectrum is always countable, so the strong verdict
//! needs only one of the two intersection conditions plus a numerical
//! confirmation that the closed-loop generator is Hurwitz.

use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::feedback::{self, FeedbackSynthesis};
use crate::io::{complex_to_value, matrix_to_value};
use crate::linalg::{self, CMat};
use crate::node::StateSpaceNode;
use crate::passivity::PSD_TOL;

/// Principal-angle threshold for rank decisions on subspaces.
pub const SUBSPACE_TOL: f64 = 1e-8;

/// `|Re λ| < IMAG_AXIS_TOL·(1 + ‖A‖)` counts as imaginary.
pub const IMAG_AXIS_TOL: f64 = 1e-9;

/// Gate threshold on `σ_min(I − KG(λ))`, relative to `1 + ‖KG(λ)‖`.
pub const GATE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StabilityVerdict {
    StronglyStable,
    WeaklyStable,
    Inconclusive,
    NotStable,
}

#[derive(Debug, Clone)]
pub struct StabilityReport {
    pub unobservable_basis: CMat,
    pub uncontrollable_dual_basis: CMat,
    pub unitary_basis: CMat,
    /// `ω` with `iω ∈ σ(A)`.
    pub imaginary_spectrum: Vec<f64>,
    pub cweak_holds: bool,
    pub bweak_holds: bool,
    pub verdict: StabilityVerdict,
    /// `ω` with `iω ∈ σ(A^κ)`.
    pub closed_loop_imaginary_spectrum: Vec<f64>,
    pub closed_loop_spectrum: Vec<Complex64>,
    pub closed_loop_abscissa: f64,
    /// Whether every imaginary closed-loop eigenvalue is also an open-loop one.
    pub spectrum_inclusion_holds: bool,
    pub conditions: Vec<String>,
    pub synthesis: FeedbackSynthesis,
}

impl StabilityReport {
    pub fn is_stable(&self) -> bool {
        matches!(
            self.verdict,
            StabilityVerdict::StronglyStable | StabilityVerdict::WeaklyStable
        )
    }

    pub fn to_value(&self) -> Value {
        json!({
            "verdict": self.verdict,
            "cweak_holds": self.cweak_holds,
            "bweak_holds": self.bweak_holds,
            "conditions": self.conditions,
            "unobservable_basis": matrix_to_value(&self.unobservable_basis),
            "uncontrollable_dual_basis": matrix_to_value(&self.uncontrollable_dual_basis),
            "unitary_basis": matrix_to_value(&self.unitary_basis),
            "imaginary_spectrum": self.imaginary_spectrum,
            "closed_loop_imaginary_spectrum": self.closed_loop_imaginary_spectrum,
            "closed_loop_abscissa": self.closed_loop_abscissa,
            "closed_loop_spectrum": self.closed_loop_spectrum.iter().map(|&z| complex_to_value(z)).collect::<Vec<_>>(),
            "spectrum_inclusion_holds": self.spectrum_inclusion_holds,
            "feedback": self.synthesis.to_value(),
        })
    }
}

fn contraction_check(node: &StateSpaceNode) -> Result<()> {
    if node.is_contraction(PSD_TOL) {
        Ok(())
    } else {
        Err(Error::NotContraction)
    }
}

/// Largest `a`-invariant subspace of `span(v)`, `v` orthonormal, also
/// invariant under every extra map in `others`.
fn invariant_core(v: CMat, maps: &[&CMat], threshold: f64) -> CMat {
    let n = v.nrows();
    let mut v = v;
    for _ in 0..=n {
        if v.ncols() == 0 {
            return v;
        }
        let proj = linalg::complement_projector(&v);
        let k = v.ncols();
        let mut stacked = linalg::zeros(maps.len() * n, k);
        for (i, a) in maps.iter().enumerate() {
            stacked.view_mut((i * n, 0), (n, k)).copy_from(&(&proj * *a * &v));
        }
        let null = linalg::nullspace_below(&stacked, threshold);
        if null.ncols() == k {
            return v;
        }
        v = linalg::orthonormalize(&(&v * null), SUBSPACE_TOL);
    }
    v
}

fn ortho_unobservable(a: &CMat, c: &CMat) -> CMat {
    let scale = 1.0 + linalg::spectral_norm(a).max(linalg::spectral_norm(c));
    let ker = linalg::nullspace_below(c, SUBSPACE_TOL * scale);
    invariant_core(ker, &[a], SUBSPACE_TOL * scale)
}

fn ortho_unitary(node: &StateSpaceNode) -> CMat {
    let a = node.ortho_a();
    let scale = 1.0 + linalg::spectral_norm(a);
    let ker = linalg::nullspace_below(&node.dissipation(), SUBSPACE_TOL * scale);
    invariant_core(ker, &[a, &a.adjoint()], SUBSPACE_TOL * scale)
}

/// Basis of `𝒩`, the largest `A`-invariant subspace of `ker C`.
pub fn unobservable_space(node: &StateSpaceNode) -> CMat {
    node.from_ortho(&ortho_unobservable(node.ortho_a(), node.ortho_c()))
}

/// Basis of `𝒩^d`, the unobservable space of the dual node.
pub fn uncontrollable_dual_space(node: &StateSpaceNode) -> CMat {
    let a = node.ortho_a().adjoint();
    let c = node.ortho_b().adjoint();
    node.from_ortho(&ortho_unobservable(&a, &c))
}

/// Basis of `X^u`: the largest subspace of `ker(WA + A^HW)` invariant under
/// `A` and its `W`-adjoint.
pub fn unitary_subspace(node: &StateSpaceNode) -> Result<CMat> {
    contraction_check(node)?;
    Ok(node.from_ortho(&ortho_unitary(node)))
}

/// `(cweak, bweak)`: `𝒩 ∩ X^u = {0}` and `𝒩^d ∩ X^u = {0}`.
pub fn benchimol_conditions(node: &StateSpaceNode) -> Result<(bool, bool)> {
    contraction_check(node)?;
    let xu = ortho_unitary(node);
    let n_obs = ortho_unobservable(node.ortho_a(), node.ortho_c());
    let a_d = node.ortho_a().adjoint();
    let n_dual = ortho_unobservable(&a_d, &node.ortho_b().adjoint());
    let cweak = linalg::intersect(&n_obs, &xu, SUBSPACE_TOL).ncols() == 0;
    let bweak = linalg::intersect(&n_dual, &xu, SUBSPACE_TOL).ncols() == 0;
    Ok((cweak, bweak))
}

/// For each `λ ∈ ρ(A)`, whether `I − KG(λ)` is invertible, equivalently
/// `λ ∈ ρ(A^K)`.
pub fn closed_loop_spectrum_gate(
    node: &StateSpaceNode,
    k: &CMat,
    lambdas: &[Complex64],
) -> Result<Vec<bool>> {
    if k.shape() != (node.inputs(), node.outputs()) {
        return Err(Error::DimensionMismatch("K must be m x p".into()));
    }
    lambdas
        .iter()
        .map(|&lambda| {
            let g = node
                .eval_transfer(lambda)
                .map_err(|_| Error::LambdaInOpenLoopSpectrum(lambda))?;
            let kg = k * g;
            let m = linalg::identity(node.inputs()) - &kg;
            let threshold = GATE_TOL * (1.0 + linalg::spectral_norm(&kg));
            Ok(linalg::smallest_singular_value(&m) > threshold)
        })
        .collect()
}

/// Imaginary parts of eigenvalues within `IMAG_AXIS_TOL·(1 + ‖A‖)` of the axis.
pub fn imaginary_axis_eigenvalues(a: &CMat) -> Vec<f64> {
    let tol = IMAG_AXIS_TOL * (1.0 + linalg::spectral_norm(a));
    let mut out: Vec<f64> = linalg::eigenvalues(a)
        .into_iter()
        .filter(|z| z.re.abs() < tol)
        .map(|z| z.im)
        .collect();
    out.sort_by(f64::total_cmp);
    out
}

/// Weak/strong verdict for the closed loop `u = −κy + v`.
pub fn stability_verdict(node: &StateSpaceNode, e: &CMat, kappa: f64) -> Result<StabilityReport> {
    stability_verdict_with(node, e, kappa, PSD_TOL)
}

pub fn stability_verdict_with(
    node: &StateSpaceNode,
    e: &CMat,
    kappa: f64,
    tol: f64,
) -> Result<StabilityReport> {
    let synthesis = feedback::stabilizing_feedback_with(node, e, kappa, tol)?;
    contraction_check(node)?;
    let unobservable_basis = unobservable_space(node);
    let uncontrollable_dual_basis = uncontrollable_dual_space(node);
    let unitary_basis = unitary_subspace(node)?;
    let (cweak, bweak) = benchimol_conditions(node)?;
    let imaginary_spectrum = imaginary_axis_eigenvalues(node.a());

    let closed = &synthesis.closed_loop;
    let closed_loop_spectrum = closed.spectrum();
    let closed_loop_abscissa = closed_loop_spectrum
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    let closed_loop_imaginary_spectrum = imaginary_axis_eigenvalues(closed.a());
    let match_tol = 1e-6 * (1.0 + linalg::spectral_norm(node.a()));
    let spectrum_inclusion_holds = closed_loop_imaginary_spectrum
        .iter()
        .all(|w| imaginary_spectrum.iter().any(|v| (v - w).abs() < match_tol));

    let hurwitz_margin = IMAG_AXIS_TOL * (1.0 + linalg::spectral_norm(closed.a()));
    let hurwitz = closed.states() == 0 || closed_loop_abscissa < -hurwitz_margin;
    let mut conditions = Vec::new();
    if cweak {
        conditions.push("unobservable space meets the unitary part only in {0}".to_string());
    }
    if bweak {
        conditions.push("dual unobservable space meets the unitary part only in {0}".to_string());
    }
    if unobservable_basis.ncols() == 0 {
        conditions.push("(A, C) observable".to_string());
    }
    let verdict = if cweak || bweak {
        if hurwitz {
            conditions.push("closed-loop generator Hurwitz".to_string());
            StabilityVerdict::StronglyStable
        } else {
            conditions.push("closed-loop abscissa within tolerance of the axis".to_string());
            StabilityVerdict::WeaklyStable
        }
    } else if !closed_loop_imaginary_spectrum.is_empty() {
        conditions.push("closed loop keeps an imaginary-axis eigenvalue".to_string());
        StabilityVerdict::NotStable
    } else {
        StabilityVerdict::Inconclusive
    };

    Ok(StabilityReport {
        unobservable_basis,
        uncontrollable_dual_basis,
        unitary_basis,
        imaginary_spectrum,
        cweak_holds: cweak,
        bweak_holds: bweak,
        verdict,
        closed_loop_imaginary_spectrum,
        closed_loop_spectrum,
        closed_loop_abscissa,
        spectrum_inclusion_holds,
        conditions,
        synthesis,
    })
}

/// Closed-loop eigenvalue closest to `target`.
pub fn nearest_eigenvalue(a: &CMat, target: Complex64) -> Option<Complex64> {
    linalg::eigenvalues(a)
        .into_iter()
        .min_by(|x, y| (x - target).norm().total_cmp(&(y - target).norm()))
}
