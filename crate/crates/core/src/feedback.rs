//! Diagonal transform, static output feedback and the κ-parametrized
//! stabilizing feedback `u = −κy + v`.
//!
//! At finite dimension the closed loop exists in two ways: directly, as
//! `output_feedback(node, −κI)`, and through the scattering route
//! `Σ_{cI} → Σ^s → Σ^κ`. Both are built; their agreement is the main
//! correctness check for the synthesis.

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::io::{matrix_to_value, node_to_value};
use crate::linalg::{self, c64, CMat};
use crate::node::StateSpaceNode;
use crate::passivity::{self, GainLimit, PositivePart, PSD_TOL};

/// `Σ^s` from an impedance-passive node and `k > 0`:
/// `A^s = A − kB(I+kD)^{-1}C`, `B^s = √(2k)B(I+kD)^{-1}`,
/// `C^s = −√(2k)(I+kD)^{-1}C`, `D^s = (I+kD)^{-1}(I−kD)`.
pub fn diagonal_transform(node: &StateSpaceNode, k: f64) -> Result<StateSpaceNode> {
    diagonal_transform_with(node, k, PSD_TOL)
}

pub fn diagonal_transform_with(node: &StateSpaceNode, k: f64, tol: f64) -> Result<StateSpaceNode> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::InvalidArgument(format!("k = {k} must be positive")));
    }
    let cert = passivity::check_impedance_with(node, &[], tol)?;
    if !cert.is_passive() {
        return Err(Error::NotImpedancePassive);
    }
    diagonal_transform_unchecked(node, k)
}

/// The same formulas without the passivity gate.
pub(crate) fn diagonal_transform_unchecked(node: &StateSpaceNode, k: f64) -> Result<StateSpaceNode> {
    let m = node.inputs();
    let kc = c64(k, 0.0);
    let root = c64((2.0 * k).sqrt(), 0.0);
    let eye = linalg::identity(m);
    let inv = linalg::inverse_checked(&(&eye + node.d() * kc), linalg::SINGULAR_COND)
        .ok_or(Error::SingularIPlusKD)?;
    let a = node.a() - node.b() * &inv * node.c() * kc;
    let b = node.b() * &inv * root;
    let c = -(&inv * node.c() * root);
    let d = &inv * (&eye - node.d() * kc);
    node.with_quadruple(a, b, c, d)
}

/// `u = Ky + v`: `A^K = A + BK(I−DK)^{-1}C`, `B^K = B(I−KD)^{-1}`,
/// `C^K = (I−DK)^{-1}C`, `D^K = D(I−KD)^{-1}`.
pub fn output_feedback(node: &StateSpaceNode, k: &CMat) -> Result<StateSpaceNode> {
    if k.shape() != (node.inputs(), node.outputs()) {
        return Err(Error::DimensionMismatch(format!(
            "K is {}x{}, expected {}x{}",
            k.nrows(),
            k.ncols(),
            node.inputs(),
            node.outputs()
        )));
    }
    let d = node.d();
    let left = linalg::inverse_checked(
        &(linalg::identity(node.outputs()) - d * k),
        linalg::SINGULAR_COND,
    )
    .ok_or(Error::SingularIMinusKD)?;
    let right = linalg::inverse_checked(
        &(linalg::identity(node.inputs()) - k * d),
        linalg::SINGULAR_COND,
    )
    .ok_or(Error::SingularIMinusKD)?;
    let a = node.a() + node.b() * k * &left * node.c();
    let b = node.b() * &right;
    let c = &left * node.c();
    let dk = d * &right;
    node.with_quadruple(a, b, c, dk)
}

/// Everything produced by the stabilizing synthesis.
#[derive(Debug, Clone)]
pub struct FeedbackSynthesis {
    pub e: CMat,
    pub e_plus: CMat,
    pub c: f64,
    pub kappa0: GainLimit,
    pub kappa: f64,
    /// `k = κ/(1 − κc)`.
    pub k: f64,
    /// `√(2κ(1 − κc))`.
    pub alpha: f64,
    /// `(1 − 2κc)/α`.
    pub beta: f64,
    /// `Σ^κ` built through the scattering route.
    pub closed_loop: StateSpaceNode,
    /// `Σ^s = diagonal_transform(Σ_{cI}, k)`.
    pub scattering_intermediate: StateSpaceNode,
    /// `output_feedback(node, −κI)`.
    pub direct: StateSpaceNode,
}

impl FeedbackSynthesis {
    /// Largest entrywise gap between the two closed-loop constructions.
    pub fn route_discrepancy(&self) -> f64 {
        let a = &self.closed_loop;
        let b = &self.direct;
        linalg::max_diff(a.a(), b.a())
            .max(linalg::max_diff(a.b(), b.b()))
            .max(linalg::max_diff(a.c(), b.c()))
            .max(linalg::max_diff(a.d(), b.d()))
    }

    pub fn to_value(&self) -> Value {
        json!({
            "E": matrix_to_value(&self.e),
            "E_plus": matrix_to_value(&self.e_plus),
            "c": self.c,
            "kappa0": self.kappa0.to_value(),
            "kappa": self.kappa,
            "k": self.k,
            "alpha": self.alpha,
            "beta": self.beta,
            "route_discrepancy": self.route_discrepancy(),
            "closed_loop": node_to_value(&self.closed_loop),
            "scattering_intermediate": node_to_value(&self.scattering_intermediate),
        })
    }
}

/// Closed loop `u = −κy + v` for a node with `Σ_E` impedance passive and
/// `0 < κ < 1/‖E⁺‖`.
pub fn stabilizing_feedback(node: &StateSpaceNode, e: &CMat, kappa: f64) -> Result<FeedbackSynthesis> {
    stabilizing_feedback_with(node, e, kappa, PSD_TOL)
}

pub fn stabilizing_feedback_with(
    node: &StateSpaceNode,
    e: &CMat,
    kappa: f64,
    tol: f64,
) -> Result<FeedbackSynthesis> {
    let PositivePart { e_plus, c, kappa0 } = passivity::positive_part(e)?;
    if !kappa0.admits(kappa) {
        return Err(Error::KappaOutOfRange {
            kappa,
            kappa0: kappa0.as_f64(),
        });
    }
    let shifted = node.shift_feedthrough(e)?;
    if !passivity::check_impedance_with(&shifted, &[], tol)?.is_passive() {
        return Err(Error::NotAlmostPassive);
    }
    let m = node.inputs();
    let eye = linalg::identity(m);
    let k = kappa / (1.0 - kappa * c);
    let alpha = (2.0 * kappa * (1.0 - kappa * c)).sqrt();
    let beta = (1.0 - 2.0 * kappa * c) / alpha;

    // Σ_{cI} dominates Σ_E, so it is impedance passive whenever Σ_E is
    let sigma_p = node.shift_feedthrough(&(&eye * c64(c, 0.0)))?;
    let sigma_s = diagonal_transform_unchecked(&sigma_p, k)?;
    let inv_alpha = c64(1.0 / alpha, 0.0);
    let a_k = sigma_s.a().clone();
    let b_k = sigma_s.b() * inv_alpha;
    let c_k = -(sigma_s.c() * inv_alpha);
    let d_k = &eye * c64(beta / alpha, 0.0) - sigma_s.d() * c64(1.0 / (alpha * alpha), 0.0);
    let closed_loop = node.with_quadruple(a_k, b_k, c_k, d_k)?;
    let direct = output_feedback(node, &(&eye * c64(-kappa, 0.0)))?;

    Ok(FeedbackSynthesis {
        e: e.clone(),
        e_plus,
        c,
        kappa0,
        kappa,
        k,
        alpha,
        beta,
        closed_loop,
        scattering_intermediate: sigma_s,
        direct,
    })
}
