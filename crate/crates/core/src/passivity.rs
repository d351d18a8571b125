//! Scattering and impedance passivity certificates and minimal feedthrough
//! shifts.
//!
//! Every test is a fixed Hermitian block form evaluated in the orthonormal
//! coordinates of the node's state weight, so "`≥ 0` in `X × U`" becomes an
//! ordinary eigenvalue test. A form is accepted as PSD when its smallest
//! eigenvalue is at least `−tol·(1 + ‖form‖)`.

use num_complex::Complex64;
use serde::{Serialize, Serializer};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::io::{complex_to_value, matrix_to_value};
use crate::linalg::{self, c64, CMat, CVec};
use crate::node::StateSpaceNode;

/// Default relative PSD slack.
pub const PSD_TOL: f64 = 1e-9;

/// Relative residual accepted for structural identities such as `C = B*`.
pub const STRUCTURE_TOL: f64 = 1e-10;

/// Relative residual accepted for the resolvent colocation identity at `iω`.
pub const COLOCATION_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PassivityKind {
    Scattering,
    Impedance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Passive,
    NotPassive,
}

impl Verdict {
    fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Passive
        } else {
            Verdict::NotPassive
        }
    }
}

/// Smallest eigenvalue of the resolvent-parametrized form at one point.
#[derive(Debug, Clone, Copy)]
pub struct PointCheck {
    pub s: Complex64,
    pub min_eigenvalue: f64,
    pub passive: bool,
}

#[derive(Debug, Clone)]
pub struct PassivityCertificate {
    pub kind: PassivityKind,
    pub verdict: Verdict,
    /// Smallest eigenvalue of the bounded-triple form.
    pub min_eigenvalue: f64,
    pub test_points: Vec<Complex64>,
    pub point_checks: Vec<PointCheck>,
    /// Violating `[z; u]` in original state coordinates, unit length.
    pub witness: Option<CVec>,
    pub tolerance: f64,
}

impl PassivityCertificate {
    pub fn is_passive(&self) -> bool {
        self.verdict == Verdict::Passive
    }

    /// Whether every resolvent-point form agrees with the overall verdict.
    pub fn points_agree(&self) -> bool {
        self.point_checks.iter().all(|p| p.passive == self.is_passive())
    }

    pub fn to_value(&self) -> Value {
        let mut v = json!({
            "kind": self.kind,
            "verdict": self.verdict,
            "min_eigenvalue": self.min_eigenvalue,
            "tolerance": self.tolerance,
            "test_points": self.test_points.iter().map(|&s| complex_to_value(s)).collect::<Vec<_>>(),
            "point_min_eigenvalues": self.point_checks.iter().map(|p| json!({
                "s": complex_to_value(p.s),
                "min_eigenvalue": p.min_eigenvalue,
            })).collect::<Vec<_>>(),
        });
        if let Some(w) = &self.witness {
            v["witness"] = Value::Array(w.iter().map(|&z| complex_to_value(z)).collect());
        }
        v
    }
}

/// Upper gain bound `κ₀`, either finite or explicitly unbounded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GainLimit {
    Finite(f64),
    Infinite,
}

impl GainLimit {
    /// Whether `0 < κ < κ₀`.
    pub fn admits(self, kappa: f64) -> bool {
        kappa > 0.0
            && match self {
                GainLimit::Finite(k0) => kappa < k0,
                GainLimit::Infinite => kappa.is_finite(),
            }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            GainLimit::Finite(k) => k,
            GainLimit::Infinite => f64::INFINITY,
        }
    }

    pub fn to_value(self) -> Value {
        match self {
            GainLimit::Finite(k) => json!(k),
            GainLimit::Infinite => json!("inf"),
        }
    }
}

impl Serialize for GainLimit {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            GainLimit::Finite(k) => ser.serialize_f64(*k),
            GainLimit::Infinite => ser.serialize_str("inf"),
        }
    }
}

/// Spectral split of a self-adjoint shift.
#[derive(Debug, Clone)]
pub struct PositivePart {
    pub e_plus: CMat,
    /// `‖E⁺‖`.
    pub c: f64,
    /// `1/c`, unbounded when `c = 0`.
    pub kappa0: GainLimit,
}

/// Outcome of a positive-real grid scan.
#[derive(Debug, Clone)]
pub struct PositiveRealScan {
    pub min_eigenvalue: f64,
    pub argmin: Complex64,
    pub values: Vec<(Complex64, f64)>,
}

/// `{1, 2+i, 2−i, 10}` restricted to points where `sI − A` is invertible.
pub fn default_test_points(node: &StateSpaceNode) -> Vec<Complex64> {
    [c64(1.0, 0.0), c64(2.0, 1.0), c64(2.0, -1.0), c64(10.0, 0.0)]
        .into_iter()
        .filter(|&s| linalg::resolvent(node.a(), s).is_ok())
        .collect()
}

fn require_square(node: &StateSpaceNode) -> Result<()> {
    if node.is_square() {
        Ok(())
    } else {
        Err(Error::NotSquare {
            p: node.outputs(),
            m: node.inputs(),
        })
    }
}

/// Maps an eigenvector of a form over `X̃ × U` back to `X × U`.
fn witness_from_ortho(node: &StateSpaceNode, v: &CVec) -> CVec {
    let n = node.states();
    let z = node.from_ortho(&CMat::from_iterator(n, 1, v.rows(0, n).iter().copied()));
    let mut out = CVec::zeros(v.len());
    out.rows_mut(0, n).copy_from(&z.column(0));
    let tail = v.len() - n;
    out.rows_mut(n, tail).copy_from(&v.rows(n, tail));
    let norm = out.norm();
    if norm > 0.0 {
        out /= c64(norm, 0.0);
    }
    out
}

/// Bounded impedance form `[[−Ã−Ã^H, C̃^H−B̃], [C̃−B̃^H, D+D^H]]`.
pub fn impedance_form(node: &StateSpaceNode) -> CMat {
    let a = node.ortho_a();
    let b = node.ortho_b();
    let c = node.ortho_c();
    let d = node.d();
    let f12 = c.adjoint() - b;
    linalg::block2(
        &(-(a + a.adjoint())),
        &f12,
        &f12.adjoint(),
        &(d + d.adjoint()),
    )
}

/// Bounded scattering form
/// `[[−Ã−Ã^H−C̃^HC̃, −B̃−C̃^HD], [−B̃^H−D^HC̃, I−D^HD]]`.
pub fn scattering_form(node: &StateSpaceNode) -> CMat {
    let a = node.ortho_a();
    let b = node.ortho_b();
    let c = node.ortho_c();
    let d = node.d();
    let f12 = -(b + c.adjoint() * d);
    linalg::block2(
        &(-(a + a.adjoint()) - c.adjoint() * c),
        &f12,
        &f12.adjoint(),
        &(linalg::identity(node.inputs()) - d.adjoint() * d),
    )
}

/// Impedance form on pairs `(x, u)` with `x − (sI−A)^{-1}Bu` as state:
/// `[[−Ã−Ã^H, C̃^H−(sI+Ã^H)R̃B̃], [·, G(s)+G(s)^H − 2Re(s)·B̃^H R̃^H R̃ B̃]]`.
pub fn impedance_form_at(node: &StateSpaceNode, s: Complex64) -> Result<CMat> {
    let n = node.states();
    let a = node.ortho_a();
    let b = node.ortho_b();
    let c = node.ortho_c();
    let r = linalg::resolvent(a, s)?;
    let rb = &r * b;
    let g = c * &rb + node.d();
    let shifted = linalg::identity(n).map(|z| z * s) + a.adjoint();
    let f12 = c.adjoint() - shifted * &rb;
    let f22 = &g + g.adjoint() - rb.adjoint() * &rb * c64(2.0 * s.re, 0.0);
    Ok(linalg::block2(&(-(a + a.adjoint())), &f12, &f12.adjoint(), &f22))
}

/// Scattering form on the same resolvent parametrization.
pub fn scattering_form_at(node: &StateSpaceNode, s: Complex64) -> Result<CMat> {
    let t = resolvent_congruence(node, s)?;
    Ok(t.adjoint() * scattering_form(node) * t)
}

/// `T = [[I, R̃(s)B̃], [0, I]]`.
fn resolvent_congruence(node: &StateSpaceNode, s: Complex64) -> Result<CMat> {
    let n = node.states();
    let m = node.inputs();
    let rb = linalg::resolvent(node.ortho_a(), s)? * node.ortho_b();
    Ok(linalg::block2(
        &linalg::identity(n),
        &rb,
        &linalg::zeros(m, n),
        &linalg::identity(m),
    ))
}

fn certificate(
    node: &StateSpaceNode,
    kind: PassivityKind,
    form: &CMat,
    test_points: &[Complex64],
    point_form: impl Fn(Complex64) -> Result<CMat>,
    tol: f64,
) -> Result<PassivityCertificate> {
    let test = linalg::psd_test(form, tol);
    let passive = test.is_psd();
    let point_checks = test_points
        .iter()
        .map(|&s| {
            let t = linalg::psd_test(&point_form(s)?, tol);
            Ok(PointCheck {
                s,
                min_eigenvalue: t.min_eigenvalue,
                passive: t.is_psd(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PassivityCertificate {
        kind,
        verdict: Verdict::from_bool(passive),
        min_eigenvalue: test.min_eigenvalue,
        test_points: test_points.to_vec(),
        point_checks,
        witness: (!passive).then(|| witness_from_ortho(node, &test.witness)),
        tolerance: tol,
    })
}

/// Impedance certificate at the default test points.
pub fn check_impedance(node: &StateSpaceNode) -> Result<PassivityCertificate> {
    check_impedance_with(node, &default_test_points(node), PSD_TOL)
}

/// Impedance certificate at explicit points with explicit slack.
pub fn check_impedance_with(
    node: &StateSpaceNode,
    test_points: &[Complex64],
    tol: f64,
) -> Result<PassivityCertificate> {
    require_square(node)?;
    certificate(
        node,
        PassivityKind::Impedance,
        &impedance_form(node),
        test_points,
        |s| impedance_form_at(node, s),
        tol,
    )
}

pub fn check_scattering(node: &StateSpaceNode) -> Result<PassivityCertificate> {
    check_scattering_with(node, &default_test_points(node), PSD_TOL)
}

pub fn check_scattering_with(
    node: &StateSpaceNode,
    test_points: &[Complex64],
    tol: f64,
) -> Result<PassivityCertificate> {
    certificate(
        node,
        PassivityKind::Scattering,
        &scattering_form(node),
        test_points,
        |s| scattering_form_at(node, s),
        tol,
    )
}

pub fn check(node: &StateSpaceNode, kind: PassivityKind, tol: f64) -> Result<PassivityCertificate> {
    let points = default_test_points(node);
    match kind {
        PassivityKind::Impedance => check_impedance_with(node, &points, tol),
        PassivityKind::Scattering => check_scattering_with(node, &points, tol),
    }
}

/// Form `[[−Aω⁻¹−Aω^{-H}, Aω⁻¹B̃+Aω^{-H}C̃^H], [·, 2E+G(iω)+G(iω)^H]]`
/// with `Aω = Ã − iωI`.
pub fn reciprocal_form(node: &StateSpaceNode, e: &CMat, omega: f64) -> Result<CMat> {
    require_square(node)?;
    if e.shape() != node.d().shape() {
        return Err(Error::DimensionMismatch("E must be m x m".into()));
    }
    let n = node.states();
    let a_w = node.ortho_a() - linalg::identity(n).map(|z| z * c64(0.0, omega));
    let inv = linalg::inverse_checked(&a_w, linalg::SINGULAR_COND)
        .ok_or(Error::OmegaInSpectrum(omega))?;
    let g = node
        .eval_transfer(c64(0.0, omega))
        .map_err(|_| Error::OmegaInSpectrum(omega))?;
    let f12 = &inv * node.ortho_b() + inv.adjoint() * node.ortho_c().adjoint();
    let f22 = e * c64(2.0, 0.0) + &g + g.adjoint();
    Ok(linalg::block2(&(-(&inv + inv.adjoint())), &f12, &f12.adjoint(), &f22))
}

/// Impedance certificate of `Σ_E` through the reciprocal-system form at `iω`.
pub fn check_impedance_reciprocal(
    node: &StateSpaceNode,
    e: &CMat,
    omega: f64,
) -> Result<PassivityCertificate> {
    check_impedance_reciprocal_with(node, e, omega, PSD_TOL)
}

pub fn check_impedance_reciprocal_with(
    node: &StateSpaceNode,
    e: &CMat,
    omega: f64,
    tol: f64,
) -> Result<PassivityCertificate> {
    let form = reciprocal_form(node, e, omega)?;
    let test = linalg::psd_test(&form, tol);
    let passive = test.is_psd();
    let witness = (!passive).then(|| {
        // [ξ; u] ↦ [Aω⁻¹(ξ − B̃u); u]
        let n = node.states();
        let a_w = node.ortho_a() - linalg::identity(n).map(|z| z * c64(0.0, omega));
        let inv = linalg::inverse_checked(&a_w, linalg::SINGULAR_COND).expect("checked above");
        let xi = test.witness.rows(0, n).into_owned();
        let u = test.witness.rows(n, node.inputs()).into_owned();
        let z = inv * (xi - node.ortho_b() * &u);
        let mut v = CVec::zeros(test.witness.len());
        v.rows_mut(0, n).copy_from(&z);
        v.rows_mut(n, node.inputs()).copy_from(&u);
        witness_from_ortho(node, &v)
    });
    Ok(PassivityCertificate {
        kind: PassivityKind::Impedance,
        verdict: Verdict::from_bool(passive),
        min_eigenvalue: test.min_eigenvalue,
        test_points: vec![c64(0.0, omega)],
        point_checks: Vec::new(),
        witness,
        tolerance: tol,
    })
}

fn relative_residual(diff: &CMat, scale: f64) -> f64 {
    linalg::max_abs(diff) / (1.0 + scale)
}

/// Residual of `B̃^H(iωI+Ã^H)^{-1} = C̃(iωI−Ã)^{-1}`.
pub fn colocation_residual(node: &StateSpaceNode, omega: f64) -> Result<f64> {
    let s = c64(0.0, omega);
    let r = linalg::resolvent(node.ortho_a(), s).map_err(|_| Error::OmegaInSpectrum(omega))?;
    let left = node.ortho_b().adjoint() * r.adjoint() * c64(-1.0, 0.0);
    let right = node.ortho_c() * &r;
    let scale = linalg::max_abs(&left).max(linalg::max_abs(&right));
    Ok(relative_residual(&(left - right), scale))
}

/// `E = −½[G(iω) + G(iω)^H]`, valid when the colocation identity at `iω`
/// holds.
pub fn minimal_e_colocated_at(node: &StateSpaceNode, omega: f64) -> Result<CMat> {
    require_square(node)?;
    let residual = colocation_residual(node, omega)?;
    if residual > COLOCATION_TOL {
        return Err(Error::AssViolated(residual));
    }
    let g = node.eval_transfer(c64(0.0, omega))?;
    Ok((&g + g.adjoint()) * c64(-0.5, 0.0))
}

fn check_colocated(node: &StateSpaceNode) -> Result<()> {
    let b_h = node.ortho_b().adjoint();
    let c = node.ortho_c();
    let scale = linalg::max_abs(&b_h).max(linalg::max_abs(c));
    let residual = relative_residual(&(c - b_h), scale);
    if residual > STRUCTURE_TOL {
        return Err(Error::NotColocated(residual));
    }
    Ok(())
}

/// `Q = −(Ã + Ã^H)`, required PSD.
fn esad_q(node: &StateSpaceNode) -> Result<CMat> {
    let q = -node.dissipation();
    if !linalg::psd_test(&q, PSD_TOL).is_psd() {
        return Err(Error::NotEsad);
    }
    Ok(q)
}

/// Minimal shift for an essentially skew-adjoint dissipative colocated node,
/// evaluated at `s = 1` (or the first default point in `ρ(A)`).
pub fn minimal_e_esad(node: &StateSpaceNode) -> Result<CMat> {
    let s = default_test_points(node)
        .first()
        .copied()
        .ok_or(Error::SingularResolvent(c64(1.0, 0.0)))?;
    minimal_e_esad_at(node, s)
}

/// `E = −½[G(s)+G(s)^H] + ½B̃^H(s̄I−Ã^H)^{-1}[2Re(s)I + Q](sI−Ã)^{-1}B̃`.
pub fn minimal_e_esad_at(node: &StateSpaceNode, s: Complex64) -> Result<CMat> {
    require_square(node)?;
    let q = esad_q(node)?;
    check_colocated(node)?;
    let n = node.states();
    let r = linalg::resolvent(node.ortho_a(), s)?;
    let rb = &r * node.ortho_b();
    let g = node.ortho_c() * &rb + node.d();
    let middle = linalg::identity(n) * c64(2.0 * s.re, 0.0) + q;
    let e = (&g + g.adjoint()) * c64(-0.5, 0.0) + rb.adjoint() * middle * &rb * c64(0.5, 0.0);
    Ok(linalg::hermitian_part(&e))
}

/// Minimal shift for a self-adjoint dissipative colocated node at `s = 1`.
pub fn minimal_e_selfadjoint(node: &StateSpaceNode) -> Result<CMat> {
    minimal_e_selfadjoint_at(node, c64(1.0, 0.0))
}

/// `E = −½[G(s)+G(s)^H] + B̃^H(s̄I−Ã)^{-1}[Re(s)I − Ã](sI−Ã)^{-1}B̃`, `Re s > 0`.
pub fn minimal_e_selfadjoint_at(node: &StateSpaceNode, s: Complex64) -> Result<CMat> {
    require_square(node)?;
    let a = node.ortho_a();
    let scale = linalg::max_abs(a);
    if relative_residual(&(a - a.adjoint()), scale) > STRUCTURE_TOL
        || !linalg::psd_test(&(-a), PSD_TOL).is_psd()
    {
        return Err(Error::NotSelfAdjointDissipative);
    }
    check_colocated(node)?;
    if s.re <= 0.0 {
        return Err(Error::GridPointInSpectrum(s));
    }
    let n = node.states();
    let r = linalg::resolvent(a, s)?;
    let rb = &r * node.ortho_b();
    let g = node.ortho_c() * &rb + node.d();
    let middle = linalg::identity(n) * c64(s.re, 0.0) - a;
    let e = (&g + g.adjoint()) * c64(-0.5, 0.0) + rb.adjoint() * middle * &rb;
    Ok(linalg::hermitian_part(&e))
}

/// `E⁺`, `c = ‖E⁺‖` and `κ₀ = 1/c`.
pub fn positive_part(e: &CMat) -> Result<PositivePart> {
    let scale = linalg::max_abs(e);
    if !e.is_square() || relative_residual(&(e - e.adjoint()), scale) > STRUCTURE_TOL {
        return Err(Error::NotSelfAdjoint);
    }
    let (vals, vecs) = linalg::hermitian_eigen(&linalg::hermitian_part(e));
    let n = vals.len();
    let mut e_plus = linalg::zeros(n, n);
    let mut c = 0.0_f64;
    for (k, &lambda) in vals.iter().enumerate() {
        if lambda > 0.0 {
            let v = vecs.column(k);
            e_plus += v * v.adjoint() * c64(lambda, 0.0);
            c = c.max(lambda);
        }
    }
    let kappa0 = if c > 0.0 {
        GainLimit::Finite(1.0 / c)
    } else {
        GainLimit::Infinite
    };
    Ok(PositivePart {
        e_plus: linalg::hermitian_part(&e_plus),
        c,
        kappa0,
    })
}

/// Smallest eigenvalue of `G(s) + G(s)^H` over a grid in the open right
/// half-plane. Nonnegativity is necessary, not sufficient, for impedance
/// passivity.
pub fn positive_real_scan(node: &StateSpaceNode, grid: &[Complex64]) -> Result<PositiveRealScan> {
    require_square(node)?;
    let mut values = Vec::with_capacity(grid.len());
    let mut best = (f64::INFINITY, c64(0.0, 0.0));
    for &s in grid {
        if s.re <= 0.0 {
            return Err(Error::GridPointInSpectrum(s));
        }
        let g = node
            .eval_transfer(s)
            .map_err(|_| Error::GridPointInSpectrum(s))?;
        let lambda = linalg::hermitian_eigen(&(&g + g.adjoint())).0[0];
        if lambda < best.0 {
            best = (lambda, s);
        }
        values.push((s, lambda));
    }
    Ok(PositiveRealScan {
        min_eigenvalue: best.0,
        argmin: best.1,
        values,
    })
}

/// Grid of `count` points `x + iy` with `x ∈ [0.05, 20]` log-spaced and
/// `y ∈ [−20, 20]`.
pub fn right_half_plane_grid(count: usize) -> Vec<Complex64> {
    let count = count.max(1);
    let golden = 0.618_033_988_749_894_9_f64;
    (0..count)
        .map(|k| {
            let t = (k as f64 + 0.5) / count as f64;
            let x = 0.05 * (400.0_f64).powf(t);
            let y = 40.0 * ((k as f64 * golden).fract() - 0.5);
            c64(x, y)
        })
        .collect()
}

/// JSON of an `m × m` shift matrix together with its positive part.
pub fn shift_report(e: &CMat) -> Result<Value> {
    let pp = positive_part(e)?;
    Ok(json!({
        "E": matrix_to_value(e),
        "E_plus": matrix_to_value(&pp.e_plus),
        "c": pp.c,
        "kappa0": pp.kappa0.to_value(),
    }))
}
