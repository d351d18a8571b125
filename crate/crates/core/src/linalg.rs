//! Dense complex linear-algebra helpers shared by the analysis modules.
//!
//! Everything here works on `DMatrix<Complex64>`. Rank decisions use
//! singular values with a relative threshold; PSD decisions use the
//! smallest eigenvalue of the Hermitian part.

use nalgebra::linalg::{Schur, SymmetricEigen, SVD};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

/// Condition number above which `sI - A` is treated as singular.
pub const SINGULAR_COND: f64 = 1e12;

#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn zeros(r: usize, c: usize) -> CMat {
    CMat::zeros(r, c)
}

/// Complex matrix from a real row-major slice.
pub fn from_real(r: usize, c: usize, data: &[f64]) -> CMat {
    assert_eq!(data.len(), r * c);
    CMat::from_fn(r, c, |i, j| c64(data[i * c + j], 0.0))
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

/// Largest entrywise modulus.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn spectral_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    SVD::new(m.clone(), false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

pub fn smallest_singular_value(m: &CMat) -> f64 {
    if m.is_empty() {
        return f64::INFINITY;
    }
    SVD::new(m.clone(), false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// `‖M - M^H‖ ≤ tol·(1 + ‖M‖)`, entrywise.
pub fn is_hermitian(m: &CMat, tol: f64) -> bool {
    m.is_square() && max_abs(&(m - m.adjoint())) <= tol * (1.0 + max_abs(m))
}

/// 2×2 block matrix `[[a, b], [c, d]]`.
pub fn block2(a: &CMat, b: &CMat, c: &CMat, d: &CMat) -> CMat {
    let (r1, c1) = a.shape();
    let (r2, c2) = d.shape();
    debug_assert_eq!(b.shape(), (r1, c2));
    debug_assert_eq!(c.shape(), (r2, c1));
    let mut out = zeros(r1 + r2, c1 + c2);
    out.view_mut((0, 0), (r1, c1)).copy_from(a);
    out.view_mut((0, c1), (r1, c2)).copy_from(b);
    out.view_mut((r1, 0), (r2, c1)).copy_from(c);
    out.view_mut((r1, c1), (r2, c2)).copy_from(d);
    out
}

pub fn block_diag(a: &CMat, b: &CMat) -> CMat {
    block2(a, &zeros(a.nrows(), b.ncols()), &zeros(b.nrows(), a.ncols()), b)
}

/// Sorted (ascending) eigenvalues and eigenvectors of the Hermitian part of `m`.
pub fn hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), zeros(0, 0));
    }
    let eig = SymmetricEigen::new(hermitian_part(m));
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = CMat::from_fn(n, n, |r, k| eig.eigenvectors[(r, idx[k])]);
    (vals, vecs)
}

/// Outcome of a positive-semidefiniteness test on a Hermitian form.
#[derive(Debug, Clone)]
pub struct PsdTest {
    pub min_eigenvalue: f64,
    pub norm: f64,
    pub threshold: f64,
    pub witness: CVec,
}

impl PsdTest {
    pub fn is_psd(&self) -> bool {
        self.min_eigenvalue >= -self.threshold
    }
}

/// Accepts the form as PSD when `λ_min ≥ −rel_tol·(1 + ‖form‖)`.
pub fn psd_test(form: &CMat, rel_tol: f64) -> PsdTest {
    let (vals, vecs) = hermitian_eigen(form);
    if vals.is_empty() {
        return PsdTest {
            min_eigenvalue: 0.0,
            norm: 0.0,
            threshold: rel_tol,
            witness: CVec::zeros(0),
        };
    }
    let norm = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    PsdTest {
        min_eigenvalue: vals[0],
        norm,
        threshold: rel_tol * (1.0 + norm),
        witness: vecs.column(0).into_owned(),
    }
}

/// `(L, L⁻¹)` with `W = L L^H`; `None` unless `W` is self-adjoint positive definite.
pub fn weight_factors(w: &CMat, hermitian_tol: f64) -> Option<(CMat, CMat)> {
    let n = w.nrows();
    if !w.is_square() || !is_hermitian(w, hermitian_tol) {
        return None;
    }
    if n == 0 {
        return Some((zeros(0, 0), zeros(0, 0)));
    }
    let h = hermitian_part(w);
    if hermitian_eigen(&h).0[0] <= 0.0 {
        return None;
    }
    let l = h.cholesky()?.l();
    let l_inv = l.clone().lu().try_inverse()?;
    Some((l, l_inv))
}

/// Inverse with a 1-norm condition estimate; `None` when singular to working precision.
pub fn inverse_checked(m: &CMat, cond_limit: f64) -> Option<CMat> {
    if m.is_empty() {
        return Some(m.clone());
    }
    let inv = m.clone().lu().try_inverse()?;
    let cond = one_norm(m) * one_norm(&inv);
    if !cond.is_finite() || cond > cond_limit {
        return None;
    }
    Some(inv)
}

pub fn one_norm(m: &CMat) -> f64 {
    m.column_iter()
        .map(|col| col.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `(sI − A)^{-1}`.
pub fn resolvent(a: &CMat, s: Complex64) -> Result<CMat> {
    let n = a.nrows();
    let m = identity(n).map(|z| z * s) - a;
    inverse_checked(&m, SINGULAR_COND).ok_or(Error::SingularResolvent(s))
}

/// Eigenvalues of a general complex matrix via the complex Schur form.
pub fn eigenvalues(a: &CMat) -> Vec<Complex64> {
    let n = a.nrows();
    if n == 0 {
        return Vec::new();
    }
    let schur = Schur::try_new(a.clone(), f64::EPSILON, 0)
        .unwrap_or_else(|| Schur::new(a.clone()));
    let (_, t) = schur.unpack();
    let scale = 1.0 + max_abs(&t);
    let mut out = Vec::with_capacity(n);
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)].norm() > f64::EPSILON * scale {
            // leftover 2×2 block
            let (p, q, r, s) = (t[(i, i)], t[(i, i + 1)], t[(i + 1, i)], t[(i + 1, i + 1)]);
            let tr = p + s;
            let det = p * s - q * r;
            let disc = (tr * tr - det * 4.0).sqrt();
            out.push((tr + disc) * 0.5);
            out.push((tr - disc) * 0.5);
            i += 2;
        } else {
            out.push(t[(i, i)]);
            i += 1;
        }
    }
    out
}

pub fn spectral_abscissa(a: &CMat) -> f64 {
    eigenvalues(a)
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Orthonormal basis (columns) of the null space of `m`, deciding rank with
/// singular values `≤ rel_tol·(1 + σ_max)`.
pub fn nullspace(m: &CMat, rel_tol: f64) -> CMat {
    nullspace_impl(m, |smax| rel_tol * (1.0 + smax))
}

/// Null space with an absolute singular-value threshold.
pub fn nullspace_below(m: &CMat, threshold: f64) -> CMat {
    nullspace_impl(m, |_| threshold)
}

fn nullspace_impl(m: &CMat, threshold: impl Fn(f64) -> f64) -> CMat {
    let (r, n) = m.shape();
    if n == 0 {
        return zeros(0, 0);
    }
    if r == 0 {
        return identity(n);
    }
    // pad to at least n rows so the SVD returns a full right basis
    let padded = if r < n {
        let mut p = zeros(n, n);
        p.view_mut((0, 0), (r, n)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = SVD::new(padded, false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let thresh = threshold(smax);
    let cols: Vec<CVec> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= thresh)
        .map(|(i, _)| v_t.row(i).adjoint())
        .collect();
    if cols.is_empty() {
        zeros(n, 0)
    } else {
        CMat::from_columns(&cols)
    }
}

/// Orthonormal basis of the column span of `m`.
pub fn orthonormalize(m: &CMat, rel_tol: f64) -> CMat {
    let (n, k) = m.shape();
    if k == 0 || n == 0 {
        return zeros(n, 0);
    }
    let svd = SVD::new(m.clone(), true, false);
    let u = svd.u.expect("left singular vectors requested");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return zeros(n, 0);
    }
    let cols: Vec<CVec> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > rel_tol * smax)
        .map(|(i, _)| u.column(i).into_owned())
        .collect();
    if cols.is_empty() {
        zeros(n, 0)
    } else {
        CMat::from_columns(&cols)
    }
}

/// Intersection of two subspaces given by orthonormal bases, via the null
/// space of `[U, −V]`.
pub fn intersect(u: &CMat, v: &CMat, rel_tol: f64) -> CMat {
    let n = u.nrows().max(v.nrows());
    if u.ncols() == 0 || v.ncols() == 0 {
        return zeros(n, 0);
    }
    let stacked = CMat::from_fn(n, u.ncols() + v.ncols(), |i, j| {
        if j < u.ncols() {
            u[(i, j)]
        } else {
            -v[(i, j - u.ncols())]
        }
    });
    let null = nullspace(&stacked, rel_tol);
    if null.ncols() == 0 {
        return zeros(n, 0);
    }
    let coeffs = null.rows(0, u.ncols()).into_owned();
    orthonormalize(&(u * coeffs), rel_tol)
}

/// Projector onto the orthogonal complement of the span of orthonormal `v`.
pub fn complement_projector(v: &CMat) -> CMat {
    identity(v.nrows()) - v * v.adjoint()
}

/// Largest |entry| of `a − b`, infinite when shapes differ.
pub fn max_diff(a: &CMat, b: &CMat) -> f64 {
    if a.shape() != b.shape() {
        return f64::INFINITY;
    }
    max_abs(&(a - b))
}
