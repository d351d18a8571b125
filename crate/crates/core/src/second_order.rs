//! First-order realizations of damped second-order plants
//! `q̈ + Mq̇ + A₀q = (input)` and the free–free beam modal model.
//!
//! The state is `z = [q; w]` on `X = H_½ × H`, realized with the weight
//! `W = diag(A₀, I)`, and the generator is `A = [[0, I], [−A₀, −M]]`.

use std::f64::consts::PI;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::io::{matrix_from_raw, PlantFile};
use crate::linalg::{self, c64, CMat};
use crate::node::StateSpaceNode;

const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct SecondOrderPlant {
    /// Stiffness, self-adjoint positive definite.
    pub a0: CMat,
    /// Damping, self-adjoint positive semidefinite.
    pub m: CMat,
    /// Rate-output map.
    pub c0: CMat,
    /// Non-colocated input map.
    pub b0: Option<CMat>,
    /// Position-channel map.
    pub c1: Option<CMat>,
}

impl SecondOrderPlant {
    pub fn new(a0: CMat, m: CMat, c0: CMat) -> Self {
        Self {
            a0,
            m,
            c0,
            b0: None,
            c1: None,
        }
    }

    pub fn with_b0(mut self, b0: CMat) -> Self {
        self.b0 = Some(b0);
        self
    }

    pub fn with_c1(mut self, c1: CMat) -> Self {
        self.c1 = Some(c1);
        self
    }

    pub fn dofs(&self) -> usize {
        self.a0.nrows()
    }

    pub fn from_file(f: &PlantFile) -> Result<Self> {
        let a0 = matrix_from_raw("A0", &f.a0, None)?;
        let n = a0.nrows();
        let m = matrix_from_raw("M", &f.m, Some((n, n)))?;
        let c0 = matrix_from_raw("C0", &f.c0, None)?;
        let b0 = f
            .b0
            .as_ref()
            .map(|b| matrix_from_raw("B0", b, Some((n, c0.nrows()))))
            .transpose()?;
        let c1 = f
            .c1
            .as_ref()
            .map(|c| matrix_from_raw("C1", c, None))
            .transpose()?;
        let plant = Self { a0, m, c0, b0, c1 };
        plant.validate()?;
        Ok(plant)
    }

    /// Dimension, symmetry and definiteness checks.
    pub fn validate(&self) -> Result<()> {
        let n = self.dofs();
        if !self.a0.is_square() || n == 0 {
            return Err(Error::InvalidPlant("A0 must be square and nonempty".into()));
        }
        if self.m.shape() != (n, n) {
            return Err(Error::InvalidPlant("M must match A0".into()));
        }
        if self.c0.ncols() != n {
            return Err(Error::InvalidPlant("C0 must have one column per degree of freedom".into()));
        }
        if let Some(b0) = &self.b0 {
            if b0.shape() != (n, self.c0.nrows()) {
                return Err(Error::InvalidPlant("B0 must be n x m0".into()));
            }
        }
        if let Some(c1) = &self.c1 {
            if c1.ncols() != n {
                return Err(Error::InvalidPlant("C1 must have one column per degree of freedom".into()));
            }
        }
        if !linalg::is_hermitian(&self.a0, HERMITIAN_TOL)
            || linalg::hermitian_eigen(&linalg::hermitian_part(&self.a0)).0[0] <= 0.0
        {
            return Err(Error::SingularA0);
        }
        if !linalg::is_hermitian(&self.m, HERMITIAN_TOL)
            || !linalg::psd_test(&self.m, 1e-12).is_psd()
        {
            return Err(Error::InvalidPlant("M must be self-adjoint and nonnegative".into()));
        }
        Ok(())
    }

    fn a0_inv(&self) -> Result<CMat> {
        linalg::inverse_checked(&self.a0, linalg::SINGULAR_COND).ok_or(Error::SingularA0)
    }

    /// `A = [[0, I], [−A₀, −M]]`.
    pub fn generator(&self) -> CMat {
        let n = self.dofs();
        linalg::block2(
            &linalg::zeros(n, n),
            &linalg::identity(n),
            &(-&self.a0),
            &(-&self.m),
        )
    }

    /// `W = diag(A₀, I)`.
    pub fn weight(&self) -> CMat {
        linalg::block_diag(&self.a0, &linalg::identity(self.dofs()))
    }
}

/// Colocated plant `q̈ + Mq̇ + A₀q = C₀*u`, `y = C₀q̇`.
pub fn build_colocated(plant: &SecondOrderPlant) -> Result<StateSpaceNode> {
    plant.validate()?;
    if plant.b0.is_some() || plant.c1.is_some() {
        return Err(Error::InvalidPlant("colocated plants take neither B0 nor C1".into()));
    }
    let n = plant.dofs();
    let m0 = plant.c0.nrows();
    let b = stack(&linalg::zeros(n, m0), &plant.c0.adjoint());
    let c = side(&linalg::zeros(m0, n), &plant.c0);
    StateSpaceNode::from_parts(
        plant.generator(),
        b,
        c,
        linalg::zeros(m0, m0),
        Some(plant.weight()),
        "colocated second-order plant".into(),
    )
}

/// Plant `q̈ + Mq̇ + A₀q = B₀u`, `y = C₀q̇` and its minimal shift
/// `E = ¼(C₀ − B₀*)M^{-1}(C₀* − B₀)`.
pub fn build_noncolocated(plant: &SecondOrderPlant) -> Result<(StateSpaceNode, CMat)> {
    plant.validate()?;
    let b0 = plant
        .b0
        .as_ref()
        .ok_or_else(|| Error::InvalidPlant("non-colocated plant needs B0".into()))?;
    if plant.c1.is_some() {
        return Err(Error::InvalidPlant("non-colocated plant takes no C1".into()));
    }
    let m_inv = linalg::inverse_checked(&plant.m, linalg::SINGULAR_COND).ok_or(Error::SingularM)?;
    let n = plant.dofs();
    let m0 = plant.c0.nrows();
    let b = stack(&linalg::zeros(n, m0), b0);
    let c = side(&linalg::zeros(m0, n), &plant.c0);
    let node = StateSpaceNode::from_parts(
        plant.generator(),
        b,
        c,
        linalg::zeros(m0, m0),
        Some(plant.weight()),
        "non-colocated second-order plant".into(),
    )?;
    let k = plant.c0.adjoint() - b0;
    let e = linalg::hermitian_part(&(k.adjoint() * m_inv * &k * c64(0.25, 0.0)));
    Ok((node, e))
}

/// Operators of the two-channel plant.
#[derive(Debug, Clone)]
pub struct TwoChannelParts {
    /// `C₂ = C₁A₀^{-1}M`.
    pub c2: CMat,
    /// `D₀ = C₀A₀^{-1}C₁*`.
    pub d0: CMat,
    /// `D₁ = C₁A₀^{-1}C₀*`.
    pub d1: CMat,
    /// `D₂ = C₂A₀^{-1}C₁*`.
    pub d2: CMat,
}

pub fn two_channel_parts(plant: &SecondOrderPlant) -> Result<TwoChannelParts> {
    let c1 = plant
        .c1
        .as_ref()
        .ok_or_else(|| Error::InvalidPlant("two-channel plant needs C1".into()))?;
    let a0_inv = plant.a0_inv()?;
    let c2 = c1 * &a0_inv * &plant.m;
    Ok(TwoChannelParts {
        d0: &plant.c0 * &a0_inv * c1.adjoint(),
        d1: c1 * &a0_inv * plant.c0.adjoint(),
        d2: &c2 * &a0_inv * c1.adjoint(),
        c2,
    })
}

/// Two-channel plant on `U = U₀ × U₁` with
/// `B = [[0, A₀^{-1}C₁*], [C₀*, 0]]`, `C = [[0, C₀], [C₁, 2C₂]]`,
/// `D = [[0, D₀], [0, D₂]]` and minimal shift `E = −½[[0, D₁*], [D₁, 0]]`.
pub fn build_two_channel(plant: &SecondOrderPlant) -> Result<(StateSpaceNode, CMat)> {
    plant.validate()?;
    if plant.b0.is_some() {
        return Err(Error::InvalidPlant("two-channel plant takes no B0".into()));
    }
    let parts = two_channel_parts(plant)?;
    let c1 = plant.c1.as_ref().expect("checked by two_channel_parts");
    let a0_inv = plant.a0_inv()?;
    let n = plant.dofs();
    let m0 = plant.c0.nrows();
    let m1 = c1.nrows();
    let b = linalg::block2(
        &linalg::zeros(n, m0),
        &(&a0_inv * c1.adjoint()),
        &plant.c0.adjoint(),
        &linalg::zeros(n, m1),
    );
    let c = linalg::block2(
        &linalg::zeros(m0, n),
        &plant.c0,
        c1,
        &(&parts.c2 * c64(2.0, 0.0)),
    );
    let d = linalg::block2(
        &linalg::zeros(m0, m0),
        &parts.d0,
        &linalg::zeros(m1, m0),
        &parts.d2,
    );
    let node = StateSpaceNode::from_parts(
        plant.generator(),
        b,
        c,
        d,
        Some(plant.weight()),
        "two-channel second-order plant".into(),
    )?;
    let e = linalg::block2(
        &linalg::zeros(m0, m0),
        &parts.d1.adjoint(),
        &parts.d1,
        &linalg::zeros(m1, m1),
    ) * c64(-0.5, 0.0);
    Ok((node, e))
}

fn stack(top: &CMat, bottom: &CMat) -> CMat {
    let mut out = linalg::zeros(top.nrows() + bottom.nrows(), top.ncols());
    out.view_mut((0, 0), top.shape()).copy_from(top);
    out.view_mut((top.nrows(), 0), bottom.shape()).copy_from(bottom);
    out
}

fn side(left: &CMat, right: &CMat) -> CMat {
    let mut out = linalg::zeros(left.nrows(), left.ncols() + right.ncols());
    out.view_mut((0, 0), left.shape()).copy_from(left);
    out.view_mut((0, left.ncols()), right.shape()).copy_from(right);
    out
}

/// Free–free beam on `(−1, 1)` with Kelvin–Voigt damping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamParameters {
    pub rho_a: f64,
    pub ei: f64,
    pub ebar_i: f64,
    /// Modes kept, including the two rigid-body modes.
    pub n_modes: usize,
}

impl Default for BeamParameters {
    fn default() -> Self {
        Self {
            rho_a: 1.0,
            ei: 1.0,
            ebar_i: 0.01,
            n_modes: 12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeShape {
    Translation,
    Rotation,
    Even,
    Odd,
}

/// One normalized eigenfunction of `d⁴/dx⁴` with free ends at `±1`.
#[derive(Debug, Clone, Copy)]
pub struct BeamMode {
    pub shape: ModeShape,
    /// `β` with `λ = β⁴`; zero for rigid modes.
    pub beta: f64,
    pub lambda: f64,
    /// `φ(0)`.
    pub value_at_centre: f64,
    /// `φ′(0)`.
    pub slope_at_centre: f64,
    /// `1/‖unnormalized φ‖`.
    pub scale: f64,
}

impl BeamMode {
    /// `φ(x)`, normalized in `L²(−1, 1)`.
    pub fn eval(&self, x: f64) -> f64 {
        let b = self.beta;
        self.scale
            * match self.shape {
                ModeShape::Translation => 1.0,
                ModeShape::Rotation => x,
                ModeShape::Even => (b * x).cos() / b.cos() + (b * x).cosh() / b.cosh(),
                ModeShape::Odd => (b * x).sin() / b.sin() + (b * x).sinh() / b.sinh(),
            }
    }
}

/// Outputs sensed at the beam centre.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BeamSensor {
    /// `y₀ = ∂w/∂t(0)`, `y₁ = ∂²w/∂t∂x(0)`.
    #[default]
    VelocityAndAngularVelocityAtCentre,
}

/// Modal beam realization and the data it was built from.
#[derive(Debug, Clone)]
pub struct BeamModel {
    pub params: BeamParameters,
    pub modes: Vec<BeamMode>,
    /// Rows `[φ_k(0)]` and `[φ_k′(0)]`.
    pub c0: CMat,
    pub node: StateSpaceNode,
}

impl BeamModel {
    /// `(algebraic, geometric)` multiplicity of the eigenvalue 0 of `A`.
    pub fn zero_eigenvalue_structure(&self) -> (usize, usize) {
        zero_eigenvalue_structure(self.node.a())
    }

    pub fn to_value(&self) -> Value {
        let (alg, geo) = self.zero_eigenvalue_structure();
        json!({
            "rho_a": self.params.rho_a,
            "EI": self.params.ei,
            "EbarI": self.params.ebar_i,
            "n_modes": self.params.n_modes,
            "states": self.node.states(),
            "zero_eigenvalue": {"algebraic": alg, "geometric": geo},
            "mode_lambdas": self.modes.iter().map(|m| m.lambda).collect::<Vec<_>>(),
        })
    }
}

/// `(algebraic, geometric)` multiplicity of 0 in `σ(a)`.
pub fn zero_eigenvalue_structure(a: &CMat) -> (usize, usize) {
    let scale = 1.0 + linalg::spectral_norm(a);
    let algebraic = linalg::eigenvalues(a)
        .iter()
        .filter(|z| z.norm() < 1e-8 * scale)
        .count();
    let geometric = linalg::nullspace_below(a, 1e-10 * scale).ncols();
    (algebraic, geometric)
}

/// `cos x − 1/cosh x`, whose positive roots are `2β` for the flexible modes.
fn characteristic(x: f64) -> f64 {
    x.cos() - 1.0 / x.cosh()
}

/// `x_j ∈ [jπ, (j+1)π]` with `cos(x_j)cosh(x_j) = 1`, `j ≥ 1`.
pub fn characteristic_root(j: usize) -> Result<f64> {
    let (mut lo, mut hi) = (j as f64 * PI, (j + 1) as f64 * PI);
    let (mut flo, fhi) = (characteristic(lo), characteristic(hi));
    if j == 0 || flo * fhi > 0.0 {
        return Err(Error::RootFindingFailure(j));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = characteristic(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    let root = 0.5 * (lo + hi);
    if characteristic(root).abs() > 1e-12 {
        return Err(Error::RootFindingFailure(j));
    }
    Ok(root)
}

fn flexible_mode(j: usize) -> Result<BeamMode> {
    let beta = 0.5 * characteristic_root(j)?;
    let (s, c, sh, ch) = (beta.sin(), beta.cos(), beta.sinh(), beta.cosh());
    // tan β = −tanh β for even modes, tan β = tanh β for odd modes
    let even_residual = (s * ch + c * sh).abs();
    let odd_residual = (s * ch - c * sh).abs();
    let (shape, norm_sq, value, slope) = if even_residual < odd_residual {
        let norm_sq = (1.0 + (2.0 * beta).sin() / (2.0 * beta)) / (c * c)
            + 1.0 / (ch * ch)
            + beta.tanh() / beta;
        (ModeShape::Even, norm_sq, 1.0 / c + 1.0 / ch, 0.0)
    } else {
        let norm_sq = (1.0 - (2.0 * beta).sin() / (2.0 * beta)) / (s * s) + 1.0 / (beta * beta.tanh())
            - 1.0 / (sh * sh);
        (ModeShape::Odd, norm_sq, 0.0, beta * (1.0 / s + 1.0 / sh))
    };
    let scale = 1.0 / norm_sq.sqrt();
    Ok(BeamMode {
        shape,
        beta,
        lambda: beta.powi(4),
        value_at_centre: value * scale,
        slope_at_centre: slope * scale,
        scale,
    })
}

/// Rigid translation and rotation followed by `n_modes − 2` flexible modes.
pub fn beam_modes(n_modes: usize) -> Result<Vec<BeamMode>> {
    if n_modes < 2 {
        return Err(Error::InvalidArgument("n_modes must be at least 2".into()));
    }
    let translation = 0.5_f64.sqrt();
    let rotation = 1.5_f64.sqrt();
    let mut modes = vec![
        BeamMode {
            shape: ModeShape::Translation,
            beta: 0.0,
            lambda: 0.0,
            value_at_centre: translation,
            slope_at_centre: 0.0,
            scale: translation,
        },
        BeamMode {
            shape: ModeShape::Rotation,
            beta: 0.0,
            lambda: 0.0,
            value_at_centre: 0.0,
            slope_at_centre: rotation,
            scale: rotation,
        },
    ];
    for j in 1..=n_modes - 2 {
        modes.push(flexible_mode(j)?);
    }
    Ok(modes)
}

/// Modal beam node with state `[q_flex; w]`.
///
/// Rigid-body positions are dropped: they do not enter the dynamics of the
/// other coordinates or the outputs, and keeping them would leave a Jordan
/// block at zero that no positive-definite weight can render dissipative.
/// The generator keeps a semisimple double eigenvalue at zero from the two
/// rigid velocities. The weight is `diag(A₀_flex, I)`.
pub fn beam_model(params: BeamParameters, _sensor: BeamSensor) -> Result<BeamModel> {
    if !(params.rho_a > 0.0 && params.ei > 0.0 && params.ebar_i >= 0.0) {
        return Err(Error::InvalidArgument(
            "beam needs rho_a > 0, EI > 0 and EbarI >= 0".into(),
        ));
    }
    let modes = beam_modes(params.n_modes)?;
    let n = modes.len();
    let nf = n - 2;
    let stiffness: Vec<f64> = modes.iter().map(|m| params.ei / params.rho_a * m.lambda).collect();
    let damping: Vec<f64> = modes.iter().map(|m| params.ebar_i / params.rho_a * m.lambda).collect();
    let c0 = CMat::from_fn(2, n, |i, k| {
        let m = &modes[k];
        c64(if i == 0 { m.value_at_centre } else { m.slope_at_centre }, 0.0)
    });

    // q̇_flex = P w, ẇ = −Pᵀ A0_flex q_flex − M w + C0ᵀ u
    let dim = nf + n;
    let mut a = linalg::zeros(dim, dim);
    for f in 0..nf {
        let k = f + 2;
        a[(f, nf + k)] = c64(1.0, 0.0);
        a[(nf + k, f)] = c64(-stiffness[k], 0.0);
    }
    for k in 0..n {
        a[(nf + k, nf + k)] = c64(-damping[k], 0.0);
    }
    let b = stack(&linalg::zeros(nf, 2), &c0.adjoint());
    let c = side(&linalg::zeros(2, nf), &c0);
    let mut w = linalg::identity(dim);
    for f in 0..nf {
        w[(f, f)] = c64(stiffness[f + 2], 0.0);
    }
    let node = StateSpaceNode::from_parts(
        a,
        b,
        c,
        linalg::zeros(2, 2),
        Some(w),
        "free-free Kelvin-Voigt beam, modal".into(),
    )?;
    Ok(BeamModel {
        params,
        modes,
        c0,
        node,
    })
}
