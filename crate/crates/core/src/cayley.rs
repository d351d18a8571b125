//! Internal Cayley transform, discrete-time passivity and the Laguerre
//! correspondence between continuous signals and discrete sequences.
//!
//! For `α` in the open right half-plane and in `ρ(A)`:
//!
//! ```text
//! A_d = (ᾱI + A)(αI − A)^{-1}      B_d = √(2Re α)(αI − A)^{-1}B
//! C_d = √(2Re α)C(αI − A)^{-1}     D_d = G(α)
//! ```
//!
//! and `G_d(z) = G((αz − ᾱ)/(z + 1))`.

use num_complex::Complex64;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::io::{self, complex_to_value, NodeFile};
use crate::linalg::{self, c64, CMat, CVec};
use crate::node::StateSpaceNode;
use crate::passivity::{PassivityCertificate, PassivityKind, Verdict, PSD_TOL};
use crate::sim::{quadrature_weights, SampledSignal};

/// Default transform parameter.
pub const DEFAULT_ALPHA: Complex64 = Complex64::new(1.0, 0.0);

/// Discrete-time quadruple produced by the internal Cayley transform.
#[derive(Debug, Clone)]
pub struct DiscreteSystem {
    pub ad: CMat,
    pub bd: CMat,
    pub cd: CMat,
    pub dd: CMat,
    pub alpha: Complex64,
    /// State weight inherited from the continuous node.
    pub w: Option<CMat>,
    pub meta: String,
}

impl DiscreteSystem {
    pub fn new(ad: CMat, bd: CMat, cd: CMat, dd: CMat, alpha: Complex64) -> Result<Self> {
        if alpha.re <= 0.0 {
            return Err(Error::AlphaNotRightHalfPlane(alpha));
        }
        let n = ad.nrows();
        if !ad.is_square()
            || bd.nrows() != n
            || cd.ncols() != n
            || dd.shape() != (cd.nrows(), bd.ncols())
        {
            return Err(Error::DimensionMismatch(
                "discrete quadruple is not conformable".into(),
            ));
        }
        Ok(Self {
            ad,
            bd,
            cd,
            dd,
            alpha,
            w: None,
            meta: String::new(),
        })
    }

    pub fn with_weight(mut self, w: CMat) -> Result<Self> {
        if w.shape() != self.ad.shape() {
            return Err(Error::DimensionMismatch("W must be n x n".into()));
        }
        linalg::weight_factors(&w, 1e-12).ok_or(Error::InvalidWeight)?;
        self.w = Some(w);
        Ok(self)
    }

    pub fn states(&self) -> usize {
        self.ad.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.bd.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.cd.nrows()
    }

    /// `(Ã_d, B̃_d, C̃_d)` in the orthonormal coordinates of `W`.
    fn ortho(&self) -> (CMat, CMat, CMat) {
        match &self.w {
            None => (self.ad.clone(), self.bd.clone(), self.cd.clone()),
            Some(w) => {
                let (l, l_inv) = linalg::weight_factors(w, 1e-12).expect("validated weight");
                let l_h = l.adjoint();
                let l_inv_h = l_inv.adjoint();
                (&l_h * &self.ad * &l_inv_h, &l_h * &self.bd, &self.cd * &l_inv_h)
            }
        }
    }

    /// `x_{k+1} = A_d x_k + B_d u_k`, `y_k = C_d x_k + D_d u_k` from `x_0 = 0`.
    pub fn respond(&self, inputs: &[CVec]) -> Vec<CVec> {
        let mut x = CVec::zeros(self.states());
        inputs
            .iter()
            .map(|u| {
                let y = &self.cd * &x + &self.dd * u;
                x = &self.ad * &x + &self.bd * u;
                y
            })
            .collect()
    }

    /// Node-format JSON plus `"alpha"`.
    pub fn to_value(&self) -> Value {
        let file = NodeFile {
            n: self.states(),
            m: self.inputs(),
            p: self.outputs(),
            a: io::raw_from_matrix(&self.ad),
            b: io::raw_from_matrix(&self.bd),
            c: io::raw_from_matrix(&self.cd),
            d: io::raw_from_matrix(&self.dd),
            w: self.w.as_ref().map(io::raw_from_matrix),
            meta: (!self.meta.is_empty()).then(|| self.meta.clone()),
        };
        let mut v = serde_json::to_value(file).expect("discrete system serializes");
        v["alpha"] = complex_to_value(self.alpha);
        v
    }

    pub fn from_value(mut v: Value) -> Result<Self> {
        let alpha = v
            .as_object_mut()
            .and_then(|o| o.remove("alpha"))
            .ok_or_else(|| Error::Schema("discrete system needs \"alpha\"".into()))?;
        let alpha = io::complex_from_value("alpha", &alpha)?;
        let file: NodeFile = serde_json::from_value(v).map_err(|e| Error::Schema(e.to_string()))?;
        let (n, m, p) = (file.n, file.m, file.p);
        let mut disc = Self::new(
            io::matrix_from_raw("A", &file.a, Some((n, n)))?,
            io::matrix_from_raw("B", &file.b, Some((n, m)))?,
            io::matrix_from_raw("C", &file.c, Some((p, n)))?,
            io::matrix_from_raw("D", &file.d, Some((p, m)))?,
            alpha,
        )?;
        if let Some(w) = &file.w {
            disc = disc.with_weight(io::matrix_from_raw("W", w, Some((n, n)))?)?;
        }
        disc.meta = file.meta.unwrap_or_default();
        Ok(disc)
    }
}

pub fn internal_cayley(node: &StateSpaceNode, alpha: Complex64) -> Result<DiscreteSystem> {
    if alpha.re <= 0.0 {
        return Err(Error::AlphaNotRightHalfPlane(alpha));
    }
    let n = node.states();
    let r = linalg::resolvent(node.a(), alpha).map_err(|_| Error::AlphaInSpectrum(alpha))?;
    let root = c64((2.0 * alpha.re).sqrt(), 0.0);
    let ad = (linalg::identity(n).map(|z| z * alpha.conj()) + node.a()) * &r;
    let bd = &r * node.b() * root;
    let cd = node.c() * &r * root;
    let dd = node.c() * &r * node.b() + node.d();
    let mut disc = DiscreteSystem::new(ad, bd, cd, dd, alpha)?;
    disc.w = node.weight_opt();
    disc.meta = node.meta().to_string();
    Ok(disc)
}

/// Continuous node whose internal Cayley transform at `disc.alpha` is `disc`.
pub fn inverse_cayley(disc: &DiscreteSystem) -> Result<StateSpaceNode> {
    let n = disc.states();
    let alpha = disc.alpha;
    let inv = linalg::inverse_checked(&(linalg::identity(n) + &disc.ad), linalg::SINGULAR_COND)
        .ok_or(Error::MinusOneEigenvalue)?;
    let root = c64((2.0 * alpha.re).sqrt(), 0.0);
    let a = &inv * (&disc.ad * alpha - linalg::identity(n) * alpha.conj());
    let b = &inv * &disc.bd * root;
    let c = &disc.cd * &inv * root;
    let d = &disc.dd - &disc.cd * &inv * &disc.bd;
    StateSpaceNode::from_parts(a, b, c, d, disc.w.clone(), disc.meta.clone())
}

/// `G_d(z) = C_d(zI − A_d)^{-1}B_d + D_d`.
pub fn discrete_transfer(disc: &DiscreteSystem, z: Complex64) -> Result<CMat> {
    let r = linalg::resolvent(&disc.ad, z)?;
    Ok(&disc.cd * r * &disc.bd + &disc.dd)
}

/// `s = (αz − ᾱ)/(z + 1)`.
pub fn continuous_point(alpha: Complex64, z: Complex64) -> Complex64 {
    (alpha * z - alpha.conj()) / (z + 1.0)
}

/// Impedance form
/// `[[I − Ã_d^HÃ_d, C̃_d^H − Ã_d^HB̃_d], [·, D_d + D_d^H − B̃_d^HB̃_d]]`.
pub fn discrete_impedance_form(disc: &DiscreteSystem) -> CMat {
    let (a, b, c) = disc.ortho();
    let d = &disc.dd;
    let f12 = c.adjoint() - a.adjoint() * &b;
    linalg::block2(
        &(linalg::identity(disc.states()) - a.adjoint() * &a),
        &f12,
        &f12.adjoint(),
        &(d + d.adjoint() - b.adjoint() * &b),
    )
}

pub fn check_discrete_passivity(disc: &DiscreteSystem, kind: PassivityKind) -> Result<PassivityCertificate> {
    check_discrete_passivity_with(disc, kind, PSD_TOL)
}

/// Scattering: `σ_max([[Ã_d, B̃_d], [C̃_d, D_d]]) ≤ 1 + tol`, reported as
/// `min_eigenvalue = 1 − σ_max²`. Impedance: PSD test of the discrete form.
pub fn check_discrete_passivity_with(
    disc: &DiscreteSystem,
    kind: PassivityKind,
    tol: f64,
) -> Result<PassivityCertificate> {
    let (min_eigenvalue, passive, witness) = match kind {
        PassivityKind::Impedance => {
            if disc.inputs() != disc.outputs() {
                return Err(Error::NotSquare {
                    p: disc.outputs(),
                    m: disc.inputs(),
                });
            }
            let t = linalg::psd_test(&discrete_impedance_form(disc), tol);
            let ok = t.is_psd();
            (t.min_eigenvalue, ok, (!ok).then_some(t.witness))
        }
        PassivityKind::Scattering => {
            let (a, b, c) = disc.ortho();
            let block = linalg::block2(&a, &b, &c, &disc.dd);
            if block.is_empty() {
                (1.0, true, None)
            } else {
                let (vals, vecs) = linalg::hermitian_eigen(&(block.adjoint() * &block));
                let top = vals.len() - 1;
                let sigma = vals[top].max(0.0).sqrt();
                let ok = sigma <= 1.0 + tol;
                (1.0 - sigma * sigma, ok, (!ok).then(|| vecs.column(top).into_owned()))
            }
        }
    };
    Ok(PassivityCertificate {
        kind,
        verdict: if passive {
            Verdict::Passive
        } else {
            Verdict::NotPassive
        },
        min_eigenvalue,
        test_points: Vec::new(),
        point_checks: Vec::new(),
        witness,
        tolerance: tol,
    })
}

/// Continuous impedance verdict through the Cayley transform at `α`.
pub fn check_impedance_cayley(node: &StateSpaceNode, alpha: Complex64) -> Result<PassivityCertificate> {
    check_discrete_passivity(&internal_cayley(node, alpha)?, PassivityKind::Impedance)
}

/// `ψ_k(t) = (−1)^k √(2Re α) e^{−ᾱt} L_k(2Re α·t)` for `k < count` at each
/// time; `ψ_k` is the inverse Laplace transform of
/// `√(2Re α)/(ᾱ+s)·((α−s)/(ᾱ+s))^k`.
pub fn laguerre_functions(alpha: Complex64, count: usize, times: &[f64]) -> Result<Vec<Vec<Complex64>>> {
    if alpha.re <= 0.0 {
        return Err(Error::NonPositiveAlpha);
    }
    let r2 = 2.0 * alpha.re;
    let root = r2.sqrt();
    let mut out = vec![Vec::with_capacity(times.len()); count];
    for &t in times {
        let x = r2 * t;
        let phase = Complex64::from_polar(1.0, alpha.im * t) * root;
        // e^{−x/2}L_k(x) by the three-term recurrence
        let mut prev = 0.0;
        let mut cur = (-0.5 * x).exp();
        for (k, col) in out.iter_mut().enumerate() {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            col.push(phase * (sign * cur));
            let kf = k as f64;
            let next = ((2.0 * kf + 1.0 - x) * cur - kf * prev) / (kf + 1.0);
            prev = cur;
            cur = next;
        }
    }
    Ok(out)
}

/// `u_k = ∫₀^T u(t)·conj(ψ_k(t)) dt`, `u` taken as zero beyond its last
/// sample.
pub fn laguerre_coefficients(u: &SampledSignal, alpha: Complex64, count: usize) -> Result<Vec<CVec>> {
    let times = u.times();
    let basis = laguerre_functions(alpha, count, &times)?;
    let weights = quadrature_weights(times.len(), u.dt);
    Ok(basis
        .iter()
        .map(|psi| {
            let mut acc = CVec::zeros(u.dim());
            for ((v, p), w) in u.values.iter().zip(psi).zip(&weights) {
                acc += v * (p.conj() * *w);
            }
            acc
        })
        .collect())
}

/// `‖u‖² = ∫|u|²` on the signal's own quadrature.
pub fn signal_energy(u: &SampledSignal) -> f64 {
    let weights = quadrature_weights(u.values.len(), u.dt);
    u.values
        .iter()
        .zip(&weights)
        .map(|(v, w)| w * v.norm_squared())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::from_real;
    use crate::passivity::check_impedance;

    fn scalar() -> StateSpaceNode {
        StateSpaceNode::new(
            from_real(1, 1, &[-1.0]),
            from_real(1, 1, &[1.0]),
            from_real(1, 1, &[1.0]),
            from_real(1, 1, &[0.0]),
        )
        .unwrap()
    }

    fn oscillator(d: f64) -> StateSpaceNode {
        StateSpaceNode::new(
            from_real(2, 2, &[0.0, 1.0, -1.0, -d]),
            from_real(2, 1, &[0.0, 1.0]),
            from_real(1, 2, &[0.0, 1.0]),
            from_real(1, 1, &[0.0]),
        )
        .unwrap()
    }

    #[test]
    fn scalar_transform() {
        let disc = internal_cayley(&scalar(), DEFAULT_ALPHA).unwrap();
        let h = 0.5_f64.sqrt();
        assert!(disc.ad[(0, 0)].norm() < 1e-15);
        assert!((disc.bd[(0, 0)].re - h).abs() < 1e-15);
        assert!((disc.cd[(0, 0)].re - h).abs() < 1e-15);
        assert!((disc.dd[(0, 0)].re - 0.5).abs() < 1e-15);
        let back = inverse_cayley(&disc).unwrap();
        assert!((back.a()[(0, 0)] - c64(-1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn parameter_errors() {
        assert!(matches!(
            internal_cayley(&scalar(), c64(0.0, 1.0)),
            Err(Error::AlphaNotRightHalfPlane(_))
        ));
        let unstable = StateSpaceNode::new(
            from_real(1, 1, &[1.0]),
            from_real(1, 1, &[1.0]),
            from_real(1, 1, &[1.0]),
            from_real(1, 1, &[0.0]),
        )
        .unwrap();
        assert!(matches!(
            internal_cayley(&unstable, DEFAULT_ALPHA),
            Err(Error::AlphaInSpectrum(_))
        ));
        let bad = DiscreteSystem::new(
            from_real(1, 1, &[-1.0]),
            from_real(1, 1, &[1.0]),
            from_real(1, 1, &[1.0]),
            from_real(1, 1, &[0.0]),
            DEFAULT_ALPHA,
        )
        .unwrap();
        assert!(matches!(inverse_cayley(&bad), Err(Error::MinusOneEigenvalue)));
    }

    #[test]
    fn skew_generator_maps_to_unitary() {
        let disc = internal_cayley(&oscillator(0.0), DEFAULT_ALPHA).unwrap();
        let gram = disc.ad.adjoint() * &disc.ad;
        assert!(linalg::max_diff(&gram, &linalg::identity(2)) < 1e-14);
    }

    #[test]
    fn scalar_correspondence() {
        let disc = internal_cayley(&scalar(), DEFAULT_ALPHA).unwrap();
        let z = c64(3.0, 0.0);
        let gd = discrete_transfer(&disc, z).unwrap()[(0, 0)];
        assert!((gd - c64(2.0 / 3.0, 0.0)).norm() < 1e-15);
        let g = scalar().eval_transfer(continuous_point(DEFAULT_ALPHA, z)).unwrap()[(0, 0)];
        assert!((g - gd).norm() < 1e-15);
        let far = discrete_transfer(&disc, c64(1e12, 0.0)).unwrap();
        assert!((far[(0, 0)] - disc.dd[(0, 0)]).norm() < 1e-11);
    }

    #[test]
    fn discrete_verdicts() {
        let disc = internal_cayley(&oscillator(0.5), DEFAULT_ALPHA).unwrap();
        assert!(check_discrete_passivity(&disc, PassivityKind::Impedance).unwrap().is_passive());
        let zero = DiscreteSystem::new(
            linalg::zeros(2, 2),
            linalg::zeros(2, 1),
            linalg::zeros(1, 2),
            linalg::zeros(1, 1),
            DEFAULT_ALPHA,
        )
        .unwrap();
        assert!(check_discrete_passivity(&zero, PassivityKind::Scattering).unwrap().is_passive());
        let bad = StateSpaceNode::new(
            from_real(2, 2, &[0.0, 1.0, -1.0, 0.0]),
            from_real(2, 1, &[0.0, 1.0]),
            from_real(1, 2, &[1.0, 0.0]),
            from_real(1, 1, &[0.0]),
        )
        .unwrap();
        assert!(!check_impedance(&bad).unwrap().is_passive());
        assert!(!check_impedance_cayley(&bad, c64(2.0, 1.0)).unwrap().is_passive());
    }

    #[test]
    fn json_round_trip_keeps_alpha() {
        let disc = internal_cayley(&oscillator(0.5), c64(2.0, 1.0)).unwrap();
        let back = DiscreteSystem::from_value(disc.to_value()).unwrap();
        assert_eq!(back.alpha, disc.alpha);
        assert_eq!(back.ad, disc.ad);
    }

    #[test]
    fn first_basis_function_has_unit_coefficient() {
        let alpha = DEFAULT_ALPHA;
        let root = (2.0 * alpha.re).sqrt();
        let u = SampledSignal::from_fn(
            |t| CVec::from_element(1, (-alpha.conj() * t).exp() * root),
            40.0,
            80_000,
        )
        .unwrap();
        let coeffs = laguerre_coefficients(&u, alpha, 6).unwrap();
        assert!((coeffs[0][0] - c64(1.0, 0.0)).norm() < 1e-9);
        for c in &coeffs[1..] {
            assert!(c[0].norm() < 1e-9);
        }
        let zero = SampledSignal::from_fn(|_| CVec::zeros(1), 1.0, 10).unwrap();
        assert!(laguerre_coefficients(&zero, alpha, 4).unwrap().iter().all(|c| c[0].norm() == 0.0));
        assert!(matches!(
            laguerre_coefficients(&zero, c64(-1.0, 0.0), 4),
            Err(Error::NonPositiveAlpha)
        ));
    }

    #[test]
    fn basis_is_orthonormal_for_complex_alpha() {
        let alpha = c64(1.5, 0.7);
        let steps = 60_000;
        let t_final = 40.0;
        let h = t_final / steps as f64;
        let times: Vec<f64> = (0..=steps).map(|k| k as f64 * h).collect();
        let psi = laguerre_functions(alpha, 5, &times).unwrap();
        let w = quadrature_weights(times.len(), h);
        for j in 0..5 {
            for k in 0..5 {
                let ip: Complex64 = (0..times.len()).map(|i| psi[j][i] * psi[k][i].conj() * w[i]).sum();
                let expected = if j == k { 1.0 } else { 0.0 };
                assert!((ip - c64(expected, 0.0)).norm() < 1e-9, "{j},{k}: {ip}");
            }
        }
    }
}
