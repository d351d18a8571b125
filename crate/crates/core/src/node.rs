//! Finite-dimensional system nodes.
//!
//! A node is a quadruple `(A, B, C, D)` acting on `X = ℂⁿ` with the weighted
//! inner product `⟨x, y⟩_X = y^H W x`. Its transfer function is
//! `G(s) = C(sI − A)^{-1}B + D`.
//!
//! At finite dimension the interpolation spaces `X₁ ⊂ X ⊂ X₋₁` all coincide
//! with `X`, every `(z₀, u)` is a compatible pair, and the combined
//! observation/feedthrough operator collapses to `[C D]`. The general
//! definitions are still exposed where they are cheap to evaluate so their
//! finite-dimensional collapse can be checked.
//!
//! On construction the node computes a Cholesky factor `W = L L^H` and an
//! orthonormal-coordinate copy `Ã = L^H A L^{-H}`, `B̃ = L^H B`,
//! `C̃ = C L^{-H}`. Adjoints in the `W` inner product become plain conjugate
//! transposes there, so every downstream PSD test is a standard eigen test.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c64, CMat, CVec};

/// Relative tolerance used to accept `W` as self-adjoint.
const WEIGHT_HERMITIAN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "crate::io::NodeFile", into = "crate::io::NodeFile")]
pub struct StateSpaceNode {
    a: CMat,
    b: CMat,
    c: CMat,
    d: CMat,
    w: CMat,
    meta: String,
    weighted: bool,
    // W = L L^H
    chol: CMat,
    chol_inv: CMat,
    a_o: CMat,
    b_o: CMat,
    c_o: CMat,
}

/// A transfer-function value at one frequency point.
#[derive(Debug, Clone)]
pub struct TransferSample {
    pub s: Complex64,
    pub value: CMat,
}

impl StateSpaceNode {
    /// Node with the identity state weight.
    pub fn new(a: CMat, b: CMat, c: CMat, d: CMat) -> Result<Self> {
        Self::from_parts(a, b, c, d, None, String::new())
    }

    pub fn from_parts(
        a: CMat,
        b: CMat,
        c: CMat,
        d: CMat,
        w: Option<CMat>,
        meta: String,
    ) -> Result<Self> {
        let n = a.nrows();
        if !a.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "A must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        let m = b.ncols();
        let p = c.nrows();
        if b.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "B has {} rows, expected {n}",
                b.nrows()
            )));
        }
        if c.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "C has {} columns, expected {n}",
                c.ncols()
            )));
        }
        if d.shape() != (p, m) {
            return Err(Error::DimensionMismatch(format!(
                "D is {}x{}, expected {p}x{m}",
                d.nrows(),
                d.ncols()
            )));
        }
        let weighted = w.is_some();
        let w = w.unwrap_or_else(|| linalg::identity(n));
        if w.shape() != (n, n) {
            return Err(Error::DimensionMismatch(format!(
                "W is {}x{}, expected {n}x{n}",
                w.nrows(),
                w.ncols()
            )));
        }
        let (chol, chol_inv) =
            linalg::weight_factors(&w, WEIGHT_HERMITIAN_TOL).ok_or(Error::InvalidWeight)?;
        let l_h = chol.adjoint();
        let l_inv_h = chol_inv.adjoint();
        let a_o = &l_h * &a * &l_inv_h;
        let b_o = &l_h * &b;
        let c_o = &c * &l_inv_h;
        Ok(Self {
            a,
            b,
            c,
            d,
            w,
            meta,
            weighted,
            chol,
            chol_inv,
            a_o,
            b_o,
            c_o,
        })
    }

    /// Node in the orthonormal coordinates of another node's weight:
    /// `A = L^{-H} Ã L^H` and so on.
    pub(crate) fn from_ortho_like(
        template: &StateSpaceNode,
        a_o: CMat,
        b_o: CMat,
        c_o: CMat,
        d: CMat,
    ) -> Result<Self> {
        let l_h = template.chol.adjoint();
        let l_inv_h = template.chol_inv.adjoint();
        let a = &l_inv_h * &a_o * &l_h;
        let b = &l_inv_h * &b_o;
        let c = &c_o * &l_h;
        Self::from_parts(a, b, c, d, template.weight_opt(), template.meta.clone())
    }

    /// Same weight and label, new quadruple.
    pub fn with_quadruple(&self, a: CMat, b: CMat, c: CMat, d: CMat) -> Result<Self> {
        Self::from_parts(a, b, c, d, self.weight_opt(), self.meta.clone())
    }

    pub fn with_weight(self, w: CMat) -> Result<Self> {
        Self::from_parts(self.a, self.b, self.c, self.d, Some(w), self.meta)
    }

    pub fn with_meta(mut self, meta: impl Into<String>) -> Self {
        self.meta = meta.into();
        self
    }

    pub fn a(&self) -> &CMat {
        &self.a
    }
    pub fn b(&self) -> &CMat {
        &self.b
    }
    pub fn c(&self) -> &CMat {
        &self.c
    }
    pub fn d(&self) -> &CMat {
        &self.d
    }
    pub fn weight(&self) -> &CMat {
        &self.w
    }
    /// `Some(W)` when a weight was supplied explicitly.
    pub fn weight_opt(&self) -> Option<CMat> {
        self.weighted.then(|| self.w.clone())
    }
    pub fn meta(&self) -> &str {
        &self.meta
    }

    pub fn states(&self) -> usize {
        self.a.nrows()
    }
    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }
    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }
    pub fn is_square(&self) -> bool {
        self.inputs() == self.outputs()
    }

    /// `Ã = L^H A L^{-H}`.
    pub fn ortho_a(&self) -> &CMat {
        &self.a_o
    }
    /// `B̃ = L^H B`.
    pub fn ortho_b(&self) -> &CMat {
        &self.b_o
    }
    /// `C̃ = C L^{-H}`.
    pub fn ortho_c(&self) -> &CMat {
        &self.c_o
    }

    /// Original state to orthonormal coordinates, `x̃ = L^H x`.
    pub fn to_ortho(&self, x: &CVec) -> CVec {
        self.chol.adjoint() * x
    }

    /// Orthonormal coordinates back to original state, `x = L^{-H} x̃`.
    pub fn from_ortho(&self, x: &CMat) -> CMat {
        self.chol_inv.adjoint() * x
    }

    /// `‖x‖²_W = x^H W x`.
    pub fn energy(&self, x: &CVec) -> f64 {
        (x.adjoint() * &self.w * x)[(0, 0)].re
    }

    /// `W A + A^H W` expressed in orthonormal coordinates, i.e. `Ã + Ã^H`.
    pub fn dissipation(&self) -> CMat {
        &self.a_o + self.a_o.adjoint()
    }

    /// Whether `A` generates a contraction semigroup in the `W` norm.
    pub fn is_contraction(&self, rel_tol: f64) -> bool {
        linalg::psd_test(&(-self.dissipation()), rel_tol).is_psd()
    }

    pub fn spectrum(&self) -> Vec<Complex64> {
        linalg::eigenvalues(&self.a)
    }

    pub fn spectral_abscissa(&self) -> f64 {
        linalg::spectral_abscissa(&self.a)
    }

    /// `G(s) = C(sI − A)^{-1}B + D`.
    pub fn eval_transfer(&self, s: Complex64) -> Result<CMat> {
        let r = linalg::resolvent(&self.a, s)?;
        Ok(&self.c * r * &self.b + &self.d)
    }

    pub fn sample(&self, s: Complex64) -> Result<TransferSample> {
        Ok(TransferSample {
            s,
            value: self.eval_transfer(s)?,
        })
    }

    /// Dual node `(A*, C*, B*, D^H)` with adjoints taken in the `W` inner
    /// product: `A* = W^{-1}A^H W`, `C* = W^{-1}C^H`, `B* = B^H W`. Its
    /// transfer function is `G(s̄)^H`.
    pub fn dual(&self) -> StateSpaceNode {
        // in orthonormal coordinates the W-adjoint is the plain adjoint
        Self::from_ortho_like(
            self,
            self.a_o.adjoint(),
            self.c_o.adjoint(),
            self.b_o.adjoint(),
            self.d.adjoint(),
        )
        .expect("dual of a valid node is valid")
    }

    /// `Σ_E`: same generating triple, transfer function `G + E`.
    pub fn shift_feedthrough(&self, e: &CMat) -> Result<StateSpaceNode> {
        if e.shape() != self.d.shape() {
            return Err(Error::DimensionMismatch(format!(
                "shift is {}x{}, feedthrough is {}x{}",
                e.nrows(),
                e.ncols(),
                self.d.nrows(),
                self.d.ncols()
            )));
        }
        let mut out = self.clone();
        out.d = &self.d + e;
        Ok(out)
    }

    /// The β used for `C&D`: `1 + max(0, spectral abscissa)`.
    pub fn default_beta(&self) -> f64 {
        1.0 + self.spectral_abscissa().max(0.0)
    }

    /// `C&D [x; v] = C[x − (βI − A)^{-1}Bv] + G(β)v`, with β chosen by
    /// [`default_beta`](Self::default_beta) and retried at `β + 1` on a
    /// singular resolvent.
    pub fn apply_combined_observation(&self, x: &CVec, v: &CVec) -> Result<CVec> {
        let beta = self.default_beta();
        match self.combined_observation_at(x, v, c64(beta, 0.0)) {
            Err(Error::SingularResolvent(_)) => {
                self.combined_observation_at(x, v, c64(beta + 1.0, 0.0))
            }
            other => other,
        }
    }

    /// `C&D [x; v]` evaluated with an explicit `β ∈ ρ(A)`.
    pub fn combined_observation_at(&self, x: &CVec, v: &CVec, beta: Complex64) -> Result<CVec> {
        if x.len() != self.states() || v.len() != self.inputs() {
            return Err(Error::DimensionMismatch(
                "state or input vector has the wrong length".into(),
            ));
        }
        let r = linalg::resolvent(&self.a, beta)?;
        let g = &self.c * &r * &self.b + &self.d;
        Ok(&self.c * (x - &r * &self.b * v) + g * v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::from_real;

    fn scalar() -> StateSpaceNode {
        StateSpaceNode::new(
            from_real(1, 1, &[-1.0]),
            from_real(1, 1, &[1.0]),
            from_real(1, 1, &[1.0]),
            from_real(1, 1, &[0.0]),
        )
        .unwrap()
    }

    #[test]
    fn scalar_resolvent_values() {
        let node = scalar();
        assert!((node.eval_transfer(c64(1.0, 0.0)).unwrap()[(0, 0)] - c64(0.5, 0.0)).norm() < 1e-15);
        assert!((node.eval_transfer(c64(0.0, 0.0)).unwrap()[(0, 0)] - c64(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn singular_resolvent_reported() {
        let node = scalar();
        assert!(matches!(
            node.eval_transfer(c64(-1.0, 0.0)),
            Err(Error::SingularResolvent(_))
        ));
    }

    #[test]
    fn dual_of_scalar_conjugates() {
        let dual = scalar().dual();
        let g = dual.eval_transfer(c64(0.0, 1.0)).unwrap()[(0, 0)];
        assert!((g - c64(0.5, -0.5)).norm() < 1e-14);
    }

    #[test]
    fn dimension_errors() {
        let r = StateSpaceNode::new(
            from_real(2, 2, &[0.0; 4]),
            from_real(1, 1, &[1.0]),
            from_real(1, 2, &[1.0, 0.0]),
            from_real(1, 1, &[0.0]),
        );
        assert!(matches!(r, Err(Error::DimensionMismatch(_))));
        let r = scalar().shift_feedthrough(&from_real(2, 2, &[0.0; 4]));
        assert!(matches!(r, Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn indefinite_weight_rejected() {
        let r = scalar().with_weight(from_real(1, 1, &[-1.0]));
        assert!(matches!(r, Err(Error::InvalidWeight)));
        let a = from_real(2, 2, &[0.0; 4]);
        let r = StateSpaceNode::from_parts(
            a,
            from_real(2, 1, &[0.0, 1.0]),
            from_real(1, 2, &[0.0, 1.0]),
            from_real(1, 1, &[0.0]),
            Some(from_real(2, 2, &[1.0, 2.0, 0.0, 1.0])),
            String::new(),
        );
        assert!(matches!(r, Err(Error::InvalidWeight)));
    }

    #[test]
    fn combined_observation_scalar() {
        let node = scalar();
        let x = CVec::from_element(1, c64(0.0, 0.0));
        let v = CVec::from_element(1, c64(1.0, 0.0));
        let y = node.combined_observation_at(&x, &v, c64(1.0, 0.0)).unwrap();
        assert!(y[0].norm() < 1e-15);
        let x = CVec::from_element(1, c64(2.0, 0.0));
        let v = CVec::zeros(1);
        let y = node.apply_combined_observation(&x, &v).unwrap();
        assert!((y[0] - c64(2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn shift_is_additive_and_invertible() {
        let node = scalar();
        let e = from_real(1, 1, &[0.75]);
        let shifted = node.shift_feedthrough(&e).unwrap();
        let g0 = node.eval_transfer(c64(1.0, 0.0)).unwrap();
        let g1 = shifted.eval_transfer(c64(1.0, 0.0)).unwrap();
        assert!((g1[(0, 0)] - g0[(0, 0)] - c64(0.75, 0.0)).norm() < 1e-15);
        let back = shifted.shift_feedthrough(&(-e)).unwrap();
        assert_eq!(back.d(), node.d());
        assert_eq!(back.a(), node.a());
        let zero = node.shift_feedthrough(&from_real(1, 1, &[0.0])).unwrap();
        assert_eq!(zero.d(), node.d());
    }
}
