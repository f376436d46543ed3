//! Matrix polynomials in one variable with complex square-matrix
//! coefficients, plus scalar polynomial helpers. Determinants of matrix
//! polynomials go through evaluation on a circle and an inverse DFT, which
//! is exact for polynomial data up to rounding.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::mat::{c, cr, fro, ident, CMatrix, C64};

/// p(x) = coeffs[0] + coeffs[1] x + ... + coeffs[d] x^d, all coefficients
/// square of the same size.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixPolynomial {
    pub coeffs: Vec<CMatrix>,
}

impl MatrixPolynomial {
    pub fn new(coeffs: Vec<CMatrix>) -> Self {
        assert!(!coeffs.is_empty(), "a polynomial needs at least one coefficient");
        let n = coeffs[0].nrows();
        for m in &coeffs {
            assert_eq!(m.nrows(), n);
            assert_eq!(m.ncols(), n);
        }
        Self { coeffs }
    }

    pub fn zero(size: usize) -> Self {
        Self::new(vec![CMatrix::zeros(size, size)])
    }

    pub fn constant(m: CMatrix) -> Self {
        Self::new(vec![m])
    }

    /// x*I - m, the degree-one pencil.
    pub fn pencil(m: &CMatrix) -> Self {
        Self::new(vec![-m.clone(), ident(m.nrows())])
    }

    pub fn size(&self) -> usize {
        self.coeffs[0].nrows()
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Horner evaluation.
    pub fn eval(&self, x: C64) -> CMatrix {
        let mut acc = self.coeffs.last().unwrap().clone();
        for k in (0..self.coeffs.len() - 1).rev() {
            acc = acc * x + &self.coeffs[k];
        }
        acc
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.size(), other.size());
        let n = self.size();
        let len = self.coeffs.len().max(other.coeffs.len());
        let mut coeffs = vec![CMatrix::zeros(n, n); len];
        for (k, m) in self.coeffs.iter().enumerate() {
            coeffs[k] += m;
        }
        for (k, m) in other.coeffs.iter().enumerate() {
            coeffs[k] += m;
        }
        Self::new(coeffs)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(cr(-1.0)))
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::new(self.coeffs.iter().map(|m| m * s).collect())
    }

    /// Product respecting coefficient order (matrix coefficients do not
    /// commute).
    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.size(), other.size());
        let n = self.size();
        let mut coeffs =
            vec![CMatrix::zeros(n, n); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                coeffs[i + j] += a * b;
            }
        }
        Self::new(coeffs)
    }

    /// Drop trailing coefficient blocks below tol in Frobenius norm
    /// (always keeps at least the constant term).
    pub fn trim(&self, tol: f64) -> Self {
        let mut end = self.coeffs.len();
        while end > 1 && fro(&self.coeffs[end - 1]) <= tol {
            end -= 1;
        }
        Self::new(self.coeffs[..end].to_vec())
    }

    /// Coefficients of p(x0 + y) as a polynomial in y (synthetic division).
    pub fn taylor_at(&self, x0: C64) -> Self {
        let n = self.size();
        let d = self.degree();
        let mut work = self.coeffs.clone();
        let mut out = vec![CMatrix::zeros(n, n); d + 1];
        for item in out.iter_mut().take(d + 1) {
            // one Horner pass leaves the remainder p(x0) in work[0]
            for k in (0..work.len() - 1).rev() {
                let (head, tail) = work.split_at_mut(k + 1);
                head[k] += &tail[0] * x0;
            }
            *item = work.remove(0);
            if work.is_empty() {
                break;
            }
        }
        Self::new(out)
    }

    /// Assemble a polynomial with 2x2 block coefficients from four equally
    /// sized block polynomials.
    pub fn block2x2(tl: &Self, tr: &Self, bl: &Self, br: &Self) -> Self {
        let m = tl.size();
        assert!(m == tr.size() && m == bl.size() && m == br.size());
        let len = tl
            .coeffs
            .len()
            .max(tr.coeffs.len())
            .max(bl.coeffs.len())
            .max(br.coeffs.len());
        let mut coeffs = vec![CMatrix::zeros(2 * m, 2 * m); len];
        for (k, coeff) in coeffs.iter_mut().enumerate() {
            let blk = |p: &Self| p.coeffs.get(k).cloned().unwrap_or_else(|| CMatrix::zeros(m, m));
            coeff.view_mut((0, 0), (m, m)).copy_from(&blk(tl));
            coeff.view_mut((0, m), (m, m)).copy_from(&blk(tr));
            coeff.view_mut((m, 0), (m, m)).copy_from(&blk(bl));
            coeff.view_mut((m, m), (m, m)).copy_from(&blk(br));
        }
        Self::new(coeffs)
    }

    /// Extract the (i, j) block of size m from 2m-sized coefficients.
    pub fn block(&self, i: usize, j: usize, m: usize) -> Self {
        Self::new(self.coeffs.iter().map(|a| a.view((i * m, j * m), (m, m)).into()).collect())
    }

    pub fn max_coeff_norm(&self) -> f64 {
        self.coeffs.iter().map(fro).fold(0.0, f64::max)
    }
}

/// Coefficients of det p(x), a scalar polynomial of degree at most
/// size * degree, by sampling on a circle and inverting the DFT.
///
/// The circle radius is the geometric mean of the determinant's root
/// magnitudes, (|det p(0)| / |det lead|)^(1/(nd)), which balances the
/// extraction error eps * max|det| / R^k across coefficients; when an end
/// determinant vanishes the coefficient-norm ratio stands in. A half-step
/// phase offset keeps samples off the positive real axis.
pub fn poly_det(p: &MatrixPolynomial) -> Result<Vec<C64>> {
    let n = p.size();
    if n == 0 {
        return Ok(vec![cr(1.0)]);
    }
    let d = p.degree() * n;
    let npts = d + 1;
    if d == 0 {
        return Ok(vec![p.coeffs[0].determinant()]);
    }
    let det0 = p.coeffs[0].determinant().norm();
    let detd = p.coeffs[p.degree()].determinant().norm();
    let mut radius = if det0 > 0.0 && detd > 0.0 && (det0 / detd).is_finite() {
        (det0 / detd).powf(1.0 / d as f64)
    } else {
        let c0 = fro(&p.coeffs[0]).max(1.0);
        let cd = fro(&p.coeffs[p.degree()]).max(1.0);
        (c0 / cd).powf(1.0 / p.degree() as f64)
    };
    if !radius.is_finite() {
        radius = 1.0;
    }
    let radius = radius.clamp(1e-3, 1e3);
    let mut dets = Vec::with_capacity(npts);
    for j in 0..npts {
        let phase = 2.0 * PI * (j as f64 + 0.5) / npts as f64;
        let x = c(phase.cos(), phase.sin()) * radius;
        let det = p.eval(x).determinant();
        if !det.re.is_finite() || !det.im.is_finite() {
            return Err(Error::InterpolationIllConditioned);
        }
        dets.push(det);
    }
    let mut coeffs = Vec::with_capacity(npts);
    for k in 0..npts {
        let mut acc = C64::default();
        for (j, dj) in dets.iter().enumerate() {
            let phase = -2.0 * PI * (k as f64) * (j as f64 + 0.5) / npts as f64;
            acc += dj * c(phase.cos(), phase.sin());
        }
        let rk = radius.powi(k as i32);
        if rk == 0.0 || !rk.is_finite() {
            return Err(Error::InterpolationIllConditioned);
        }
        coeffs.push(acc / cr(npts as f64 * rk));
    }
    Ok(coeffs)
}

/// Scalar polynomial evaluation, low degree first.
pub fn sp_eval(coeffs: &[C64], x: C64) -> C64 {
    let mut acc = C64::default();
    for &ck in coeffs.iter().rev() {
        acc = acc * x + ck;
    }
    acc
}

/// Scalar polynomial product.
pub fn sp_mul(a: &[C64], b: &[C64]) -> Vec<C64> {
    let mut out = vec![C64::default(); a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// Monic scalar polynomial with the given roots, low degree first.
pub fn sp_from_roots(roots: &[C64]) -> Vec<C64> {
    let mut out = vec![cr(1.0)];
    for &r in roots {
        out = sp_mul(&out, &[-r, cr(1.0)]);
    }
    out
}

/// Drop trailing near-zero scalar coefficients.
pub fn sp_trim(coeffs: &[C64], tol: f64) -> Vec<C64> {
    let mut end = coeffs.len();
    while end > 1 && coeffs[end - 1].norm() <= tol {
        end -= 1;
    }
    coeffs[..end].to_vec()
}

/// Roots of a scalar polynomial via its companion matrix. The input is
/// trimmed at tol relative to its largest coefficient first; a (near-)zero
/// polynomial is an error.
pub fn sp_roots(coeffs: &[C64], tol: f64) -> Result<Vec<C64>> {
    let scale = coeffs.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
    if scale == 0.0 {
        return Err(Error::InterpolationIllConditioned);
    }
    let tc = sp_trim(coeffs, tol * scale);
    let d = tc.len() - 1;
    if d == 0 {
        return Ok(Vec::new());
    }
    let lead = tc[d];
    let mut comp = CMatrix::zeros(d, d);
    for i in 1..d {
        comp[(i, i - 1)] = cr(1.0);
    }
    for i in 0..d {
        comp[(i, d - 1)] = -tc[i] / lead;
    }
    crate::mat::eigenvalues(&comp)
}
