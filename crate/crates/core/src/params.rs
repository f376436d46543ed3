//! Parameters of the linear q-difference system: block size m, the step
//! ratio q, the deformation variable t, characteristic exponents at zero
//! and infinity, and the four determinant-root parameters.
//!
//! The coefficient matrix has size 2m x 2m with leading block
//! diag(kappa1 I_m, K), K = diag(kappa2 I_{m-1}, kappa3), trailing block
//! similar to diag(theta1 t I_m, theta2 t I_m), and determinant
//! kappa1^m kappa2^{m-1} kappa3 (x - a1 t)^m (x - a2 t)^m (x - a3)^m (x - a4)^m.

use crate::error::{Error, Result};
use crate::mat::{cr, CMatrix, CVector, C64};

#[derive(Clone, Debug)]
pub struct QParameters {
    pub m: usize,
    pub q: C64,
    pub t: C64,
    pub theta: [C64; 2],
    pub kappa: [C64; 3],
    pub a: [C64; 4],
}

impl QParameters {
    /// Validate and construct. Requires 0 < |q| < 1, the exponent product
    /// relation kappa1^m kappa2^{m-1} kappa3 (a1 a2 a3 a4)^m = (theta1 theta2)^m
    /// to within 1e-10, distinct non-resonant determinant roots
    /// (q^k alpha_i != alpha_j for k = 0, 1), and kappa1 separated from the
    /// spectrum of K and q^{-1} K.
    pub fn new(
        m: usize,
        q: C64,
        t: C64,
        theta: [C64; 2],
        kappa: [C64; 3],
        a: [C64; 4],
    ) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParameters("m must be at least 1".into()));
        }
        let p = Self { m, q, t, theta, kappa, a };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        let Self { m, q, t, theta, kappa, a } = self;
        let all = [*q, *t, theta[0], theta[1], kappa[0], kappa[1], kappa[2], a[0], a[1], a[2], a[3]];
        if all.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidParameters("parameters must be finite".into()));
        }
        if !(q.norm() > 0.0 && q.norm() < 1.0) {
            return Err(Error::InvalidParameters(format!("|q| must lie in (0, 1), got {}", q.norm())));
        }
        if t.norm() == 0.0 {
            return Err(Error::InvalidParameters("t must be nonzero".into()));
        }
        for (name, z) in [
            ("theta1", theta[0]),
            ("theta2", theta[1]),
            ("kappa1", kappa[0]),
            ("kappa2", kappa[1]),
            ("kappa3", kappa[2]),
            ("a1", a[0]),
            ("a2", a[1]),
            ("a3", a[2]),
            ("a4", a[3]),
        ] {
            if z.norm() == 0.0 {
                return Err(Error::InvalidParameters(format!("{name} must be nonzero")));
            }
        }
        let mi = *m as i32;
        let lhs = kappa[0].powi(mi)
            * kappa[1].powi(mi - 1)
            * kappa[2]
            * (a[0] * a[1] * a[2] * a[3]).powi(mi);
        let rhs = (theta[0] * theta[1]).powi(mi);
        let viol = (lhs - rhs).norm() / rhs.norm().max(1e-300);
        if viol > 1e-10 {
            return Err(Error::FuchsViolation(viol));
        }
        let alphas = self.alphas();
        let scale = alphas.iter().map(|z| z.norm()).fold(0.0f64, f64::max).max(1e-300);
        for i in 0..4 {
            for j in 0..4 {
                if i != j && (alphas[i] - alphas[j]).norm() <= 1e-12 * scale {
                    return Err(Error::InvalidParameters(format!(
                        "determinant roots {} and {} coincide",
                        i + 1,
                        j + 1
                    )));
                }
                if (q * alphas[i] - alphas[j]).norm() <= 1e-12 * scale {
                    return Err(Error::InvalidParameters(format!(
                        "resonant determinant roots: q * alpha_{} = alpha_{}",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        let kscale = kappa.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
        for kk in [kappa[1], kappa[2]] {
            if (kappa[0] - kk).norm() <= 1e-12 * kscale {
                return Err(Error::InvalidParameters(
                    "kappa1 must differ from the other leading exponents".into(),
                ));
            }
            if (q * kappa[0] - kk).norm() <= 1e-12 * kscale {
                return Err(Error::InvalidParameters(
                    "q * kappa1 must differ from the other leading exponents".into(),
                ));
            }
        }
        Ok(())
    }

    /// rho = a1 a2 a3 a4 kappa1 / (theta1 theta2).
    pub fn rho(&self) -> C64 {
        self.a[0] * self.a[1] * self.a[2] * self.a[3] * self.kappa[0]
            / (self.theta[0] * self.theta[1])
    }

    /// Relative defect of the exponent product relation
    /// kappa1^m kappa2^{m-1} kappa3 (a1 a2 a3 a4)^m = (theta1 theta2)^m.
    pub fn fuchs_residual(&self) -> f64 {
        let mi = self.m as i32;
        let lhs = self.kappa[0].powi(mi)
            * self.kappa[1].powi(mi - 1)
            * self.kappa[2]
            * (self.a[0] * self.a[1] * self.a[2] * self.a[3]).powi(mi);
        let rhs = (self.theta[0] * self.theta[1]).powi(mi);
        (lhs - rhs).norm() / rhs.norm().max(1e-300)
    }

    /// Determinant roots (a1 t, a2 t, a3, a4).
    pub fn alphas(&self) -> [C64; 4] {
        [self.a[0] * self.t, self.a[1] * self.t, self.a[2], self.a[3]]
    }

    /// Coefficients (beta1, beta2, beta3, beta4) of
    /// prod_j (x - alpha_j) = x^4 + beta1 x^3 + beta2 x^2 + beta3 x + beta4.
    pub fn betas(&self) -> [C64; 4] {
        let [a1, a2, a3, a4] = self.alphas();
        let e1 = a1 + a2 + a3 + a4;
        let e2 = a1 * a2 + a1 * a3 + a1 * a4 + a2 * a3 + a2 * a4 + a3 * a4;
        let e3 = a1 * a2 * a3 + a1 * a2 * a4 + a1 * a3 * a4 + a2 * a3 * a4;
        let e4 = a1 * a2 * a3 * a4;
        [-e1, e2, -e3, e4]
    }

    /// K = diag(kappa2 I_{m-1}, kappa3).
    pub fn kmat(&self) -> CMatrix {
        let mut d = CVector::from_element(self.m, self.kappa[1]);
        d[self.m - 1] = self.kappa[2];
        CMatrix::from_diagonal(&d)
    }

    /// Leading coefficient diag(kappa1 I_m, K) of the coefficient matrix.
    pub fn leading_coeff(&self) -> CMatrix {
        let mut d = CVector::from_element(2 * self.m, self.kappa[0]);
        for i in 0..self.m {
            d[self.m + i] = if i + 1 < self.m { self.kappa[1] } else { self.kappa[2] };
        }
        CMatrix::from_diagonal(&d)
    }

    /// Scalar factor kappa1^m kappa2^{m-1} kappa3 of the determinant.
    pub fn det_prefactor(&self) -> C64 {
        let mi = self.m as i32;
        self.kappa[0].powi(mi) * self.kappa[1].powi(mi - 1) * self.kappa[2]
    }

    /// Coefficients of det A(x) = det_prefactor * prod_j (x - alpha_j)^m,
    /// low degree first (length 4m + 1).
    pub fn det_coeffs(&self) -> Vec<C64> {
        let mut p = vec![self.det_prefactor()];
        let alphas = self.alphas();
        for _ in 0..self.m {
            for &r in &alphas {
                p = crate::poly::sp_mul(&p, &[-r, cr(1.0)]);
            }
        }
        p
    }

    /// Same parameters at t -> q t.
    pub fn shift_t(&self) -> Result<Self> {
        Self::new(self.m, self.q, self.q * self.t, self.theta, self.kappa, self.a)
    }
}

/// Balanced parameter set for tests: kappa3 chosen so the exponent
/// relation holds exactly.
#[cfg(test)]
pub(crate) fn fixture(m: usize) -> QParameters {
    let q = cr(0.4);
    let t = cr(1.0);
    let theta = [cr(2.0), cr(3.0)];
    let a = [cr(1.0), cr(2.0), cr(3.0), cr(4.0)];
    let kappa1 = cr(0.7);
    let kappa2 = cr(1.3);
    let mi = m as i32;
    let kappa3 = (theta[0] * theta[1]).powi(mi)
        / (kappa1.powi(mi) * kappa2.powi(mi - 1) * (a[0] * a[1] * a[2] * a[3]).powi(mi));
    QParameters::new(m, q, t, theta, [kappa1, kappa2, kappa3], a).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mat::c;

    #[test]
    fn betas_sign_convention() {
        // a = (1,2,3,4), t = 1: x^4 - 10x^3 + 35x^2 - 50x + 24
        let p = fixture(1);
        let b = p.betas();
        assert!((b[0] - cr(-10.0)).norm() < 1e-14);
        assert!((b[1] - cr(35.0)).norm() < 1e-14);
        assert!((b[2] - cr(-50.0)).norm() < 1e-14);
        assert!((b[3] - cr(24.0)).norm() < 1e-14);
    }

    #[test]
    fn rho_and_prefactor() {
        let p = fixture(2);
        let want_rho = cr(24.0) * cr(0.7) / cr(6.0);
        assert!((p.rho() - want_rho).norm() < 1e-14);
        let want_pref = cr(0.7) * cr(0.7) * cr(1.3) * p.kappa[2];
        assert!((p.det_prefactor() - want_pref).norm() < 1e-14);
    }

    #[test]
    fn kmat_layout() {
        let p = fixture(3);
        let k = p.kmat();
        assert_eq!(k[(0, 0)], p.kappa[1]);
        assert_eq!(k[(1, 1)], p.kappa[1]);
        assert_eq!(k[(2, 2)], p.kappa[2]);
        let lead = p.leading_coeff();
        assert_eq!(lead[(0, 0)], p.kappa[0]);
        assert_eq!(lead[(2, 2)], p.kappa[0]);
        assert_eq!(lead[(3, 3)], p.kappa[1]);
        assert_eq!(lead[(5, 5)], p.kappa[2]);
    }

    #[test]
    fn det_coeffs_monic_of_right_degree() {
        let p = fixture(2);
        let d = p.det_coeffs();
        assert_eq!(d.len(), 9);
        assert!((d[8] - p.det_prefactor()).norm() < 1e-14);
        // value check at x = 5
        let x = cr(5.0);
        let want = p.det_prefactor()
            * p.alphas().iter().map(|&r| (x - r) * (x - r)).product::<C64>();
        assert!((crate::poly::sp_eval(&d, x) - want).norm() < 1e-10 * want.norm());
    }

    #[test]
    fn rejects_bad_parameters() {
        let p = fixture(1);
        // broken exponent relation
        assert!(matches!(
            QParameters::new(1, p.q, p.t, p.theta, [p.kappa[0], p.kappa[1], p.kappa[2] * cr(1.01)], p.a),
            Err(Error::FuchsViolation(_))
        ));
        // |q| >= 1
        assert!(QParameters::new(1, cr(1.5), p.t, p.theta, p.kappa, p.a).is_err());
        // resonance: with t = 1, q = 1/2, roots 2t and 1t collide under q
        let theta_res = [cr(2.0), cr(3.0)];
        let a_res = [cr(1.0), cr(2.0), cr(3.0), cr(4.0)];
        let k3 = theta_res[0] * theta_res[1] / (cr(0.9) * cr(24.0));
        assert!(QParameters::new(1, cr(0.5), cr(1.0), theta_res, [cr(0.9), cr(1.3), k3], a_res)
            .is_err());
        // complex parameters pass when balanced
        let q = c(0.4, 0.1);
        let t = c(1.0, 0.3);
        let theta = [c(1.0, 0.5), c(2.0, -0.25)];
        let a = [c(1.0, 0.1), c(-2.0, 0.4), c(0.5, -1.0), c(3.0, 0.0)];
        let kappa1 = c(0.8, 0.2);
        let kappa2 = c(1.1, -0.4);
        let prod = a[0] * a[1] * a[2] * a[3];
        let kappa3 = (theta[0] * theta[1]).powi(2) / (kappa1.powi(2) * kappa2 * prod.powi(2));
        assert!(QParameters::new(2, q, t, theta, [kappa1, kappa2, kappa3], a).is_ok());
    }

    #[test]
    fn shift_t_scales_roots() {
        let p = fixture(1);
        let s = p.shift_t().unwrap();
        assert!((s.t - cr(0.4)).norm() < 1e-15);
        let ar = s.alphas();
        assert!((ar[0] - cr(0.4)).norm() < 1e-15);
        assert!((ar[2] - cr(3.0)).norm() < 1e-15);
    }
}
