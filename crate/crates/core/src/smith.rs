//! Witness factorization for the elementary-divisor structure of A(x):
//! explicit matrix polynomials M1(x), M2(x) with constant nonzero
//! determinants such that M1 A M2 = diag(I_m, Atilde(x)), where
//! Atilde(x) = (x^3 + Q1 x^2 + Q2 x + Q3)(x - F) + G1 G2 collapses to
//! prod_j (x - alpha_j) I_m. This certifies the divisor pair
//! (I_m, prod_j (x - alpha_j) I_m) without any rational normal-form
//! computation.

use std::f64::consts::PI;

use crate::accessory::AccessoryState;
use crate::assemble::DerivedBlocks;
use crate::error::{Error, Result};
use crate::mat::{c, ident, mat_inv, rel_resid, scalar, CMatrix, C64};
use crate::params::QParameters;
use crate::poly::MatrixPolynomial;
use crate::tol::Tolerances;

#[derive(Clone, Debug)]
pub struct SmithWitness {
    pub m1: MatrixPolynomial,
    pub m2: MatrixPolynomial,
    pub atilde: MatrixPolynomial,
    /// Coefficients of the cubic cofactor, verified against powers of F.
    pub q: [CMatrix; 3],
    /// Degree-3 block entering the lower-left corner of M1.
    pub zpoly: MatrixPolynomial,
}

/// The scalar elementary divisor prod_j (x - alpha_j).
pub fn expected_divisor(params: &QParameters, x: C64) -> C64 {
    params.alphas().iter().map(|&a| x - a).product()
}

/// Eight sample points on the circle through the geometric mean of the
/// divisor roots, at half-offset phases.
pub fn sample_points(params: &QParameters) -> Vec<C64> {
    let r = params
        .alphas()
        .iter()
        .map(|z| z.norm())
        .product::<f64>()
        .powf(0.25)
        .max(1e-3);
    (0..8)
        .map(|j| {
            let phi = PI * (2.0 * j as f64 + 1.0) / 8.0;
            c(phi.cos(), phi.sin()) * crate::mat::cr(r)
        })
        .collect()
}

/// Build the witness and verify it at the standard sample points: the
/// cofactor coefficients against polynomials in F, the transformed matrix
/// against diag(I, Atilde), and Atilde against the scalar divisor.
pub fn smith_witness(
    params: &QParameters,
    state: &AccessoryState,
    blocks: &DerivedBlocks,
    a: &MatrixPolynomial,
    tol: &Tolerances,
) -> Result<SmithWitness> {
    let m = params.m;
    let f = &state.f;
    let w = &state.w;
    let k = params.kmat();
    let kappa1 = params.kappa[0];
    let [be1, be2, be3, _] = params.betas();
    let inv = |x: &CMatrix, label: &str| {
        mat_inv(x, tol.cond_limit).map_err(|_| Error::SingularBlock(label.into()))
    };
    let ki = inv(&k, "K")?;
    let wi = inv(w, "W")?;
    let g1i = inv(&blocks.g1, "G1")?;
    let g1 = &blocks.g1;
    let g2 = &blocks.g2;
    let al = &blocks.alpha;
    let be = &blocks.beta;

    let q1 = -(g1 * (al + be + f) * &g1i);
    let q2 = g1 * (g1 + g2 - &ki * &blocks.gamma * &k + f * al + be * al + be * f) * &g1i;
    let q3 = -(g1 * (be * g1 + g2 * al + &ki * &blocks.delta * &k + be * f * al) * &g1i);

    let fp1 = f + scalar(m, be1);
    let fp2 = &fp1 * f + scalar(m, be2);
    let fp3 = &fp2 * f + scalar(m, be3);
    for (name, got, want) in [
        ("cofactor x^2", &q1, &fp1),
        ("cofactor x^1", &q2, &fp2),
        ("cofactor x^0", &q3, &fp3),
    ] {
        let residual = rel_resid(got, want);
        if residual > tol.smith {
            return Err(Error::WitnessMismatch { relation: name, residual });
        }
    }

    let cubic = MatrixPolynomial::new(vec![q3.clone(), q2.clone(), q1.clone(), ident(m)]);
    let atilde = cubic.mul(&MatrixPolynomial::pencil(f)).add(&MatrixPolynomial::constant(g1 * g2));

    // M2 = [[I, 0], [-kappa1 (x - alpha) K^-1 W^-1, I]]
    //    * [[I, -kappa1^-1 W K G1^-1 (x - F)], [0, I]]
    let kiwi = &ki * &wi;
    let lower = MatrixPolynomial::new(vec![al * &kiwi * kappa1, -(&kiwi * kappa1)]);
    let one = MatrixPolynomial::constant(ident(m));
    let zero = MatrixPolynomial::zero(m);
    let u1 = MatrixPolynomial::block2x2(&one, &zero, &lower, &one);
    let wkg = w * &k * &g1i;
    let upper = MatrixPolynomial::new(vec![&wkg * f / kappa1, -(&wkg / kappa1)]);
    let u2 = MatrixPolynomial::block2x2(&one, &upper, &zero, &one);
    let m2 = u1.mul(&u2);

    // Z(x) = A22(x) kappa1 (x - alpha) K^-1 W^-1 - A21(x)
    let a22 = a.block(1, 1, m);
    let a21 = a.block(1, 0, m);
    let factor = MatrixPolynomial::new(vec![-(al * &kiwi * kappa1), &kiwi * kappa1]);
    let zpoly = a22.mul(&factor).sub(&a21);

    // M1 = [[E, 0], [G1 K^-1 Z(x) E, G1 K^-1]] with E = kappa1^-1 W K G1^-1 K^-1 W^-1
    let e_blk = &wkg * &kiwi / kappa1;
    let g1ki = g1 * &ki;
    let bl = MatrixPolynomial::constant(g1ki.clone())
        .mul(&zpoly)
        .mul(&MatrixPolynomial::constant(e_blk.clone()));
    let m1 = MatrixPolynomial::block2x2(
        &MatrixPolynomial::constant(e_blk),
        &zero,
        &bl,
        &MatrixPolynomial::constant(g1ki),
    );

    let witness = SmithWitness { m1, m2, atilde, q: [q1, q2, q3], zpoly };

    for x in sample_points(params) {
        let residual = witness_residual(&witness, a, x);
        if residual > tol.smith {
            return Err(Error::WitnessMismatch { relation: "diagonalization", residual });
        }
        let residual = atilde_residual(&witness, params, x);
        if residual > tol.smith {
            return Err(Error::WitnessMismatch { relation: "elementary divisor", residual });
        }
    }
    Ok(witness)
}

/// || M1(x) A(x) M2(x) - diag(I, Atilde(x)) || at one point, scale-floored.
pub fn witness_residual(witness: &SmithWitness, a: &MatrixPolynomial, x: C64) -> f64 {
    let m = witness.atilde.size();
    let got = witness.m1.eval(x) * a.eval(x) * witness.m2.eval(x);
    let mut want = CMatrix::zeros(2 * m, 2 * m);
    want.view_mut((0, 0), (m, m)).copy_from(&ident(m));
    want.view_mut((m, m), (m, m)).copy_from(&witness.atilde.eval(x));
    rel_resid(&got, &want)
}

/// || Atilde(x) - prod_j (x - alpha_j) I || at one point, scale-floored.
pub fn atilde_residual(witness: &SmithWitness, params: &QParameters, x: C64) -> f64 {
    let m = witness.atilde.size();
    rel_resid(&witness.atilde.eval(x), &scalar(m, expected_divisor(params, x)))
}
