//! Assembly of the quadratic 2m x 2m coefficient matrix A(x) from an
//! accessory state. The off-diagonal data of A are generated by a handful
//! of derived m x m blocks; the constant term carries a rank-m structure
//! through the pair (B1, C1) that pins its eigenvalues to theta1 t and
//! theta2 t.

use crate::accessory::AccessoryState;
use crate::error::{Error, Result};
use crate::mat::{mat_inv, rel_resid, scalar, CMatrix, C64};
use crate::params::QParameters;
use crate::poly::MatrixPolynomial;
use crate::tol::Tolerances;

/// The m x m blocks derived from (F, G, W) that enter A(x).
#[derive(Clone, Debug)]
pub struct DerivedBlocks {
    pub g1: CMatrix,
    pub g2: CMatrix,
    pub alpha: CMatrix,
    pub beta: CMatrix,
    pub b1: CMatrix,
    pub gamma: CMatrix,
    pub delta: CMatrix,
    pub c1: CMatrix,
}

fn guarded_inv(a: &CMatrix, cond_limit: f64, label: &str) -> Result<CMatrix> {
    mat_inv(a, cond_limit).map_err(|_| Error::SingularBlock(label.into()))
}

/// Compute the derived blocks. Fails with `SingularBlock` when a required
/// inverse does not exist at the configured conditioning limit.
pub fn derive_blocks(
    params: &QParameters,
    state: &AccessoryState,
    tol: &Tolerances,
) -> Result<DerivedBlocks> {
    let m = params.m;
    let f = &state.f;
    let g = &state.g;
    let w = &state.w;
    let k = params.kmat();
    let kappa1 = params.kappa[0];
    let t = params.t;
    let [th1, th2] = params.theta;
    let [al1, al2, al3, al4] = params.alphas();
    let [be1, be2, _, _] = params.betas();
    let q = params.q;

    let fi = guarded_inv(f, tol.cond_limit, "F")?;
    let gi = mat_inv(g, tol.cond_limit).map_err(|_| Error::SingularG)?;
    let ki = guarded_inv(&k, tol.cond_limit, "K")?;
    let wi = guarded_inv(w, tol.cond_limit, "W")?;

    let shift = |z: C64| -> CMatrix { f - scalar(m, z) };
    let g1 = (shift(al1) * shift(al2) * &gi) / (q * kappa1);
    let g2 = g * shift(al3) * shift(al4) * (q * kappa1);
    let g1i = guarded_inv(&g1, tol.cond_limit, "G1")?;

    let km = scalar(m, kappa1) - &k;
    let km_i = guarded_inv(&km, tol.cond_limit, "kappa1 - K")?;
    let conj_f = &g1i * f * &g1;
    let fsum = f + &conj_f + scalar(m, be1);

    let alpha = &km_i
        * (&fi * ((th1 + th2) * t) - &fi * &g1 * kappa1 - &k * &g2 * &fi + &k * &fsum);
    let beta = &km_i
        * (&fi * (-(th1 + th2) * t) + &fi * &g1 * kappa1 + &k * &g2 * &fi - &fsum * kappa1);

    let kmr = scalar(m, kappa1.inv()) - &ki;
    let kmr_i = guarded_inv(&kmr, tol.cond_limit, "1/kappa1 - 1/K")?;
    let b1 = &kmr_i
        * (&fi * &g1 + &g2 * &fi
            - (scalar(m, th1 / kappa1 * t) + &ki * (th2 * t)) * &fi
            - &fsum)
        * &ki
        * &wi;

    let fpoly = f * f + f * be1 + scalar(m, be2);
    let gamma =
        &k * (&g1 + &g2 + f * &alpha + &beta * f + &beta * &alpha - &g1i * &fpoly * &g1) * &ki;
    let delta = (&fi * (t * t * th1 * th2)
        - &k * (&g2 + &beta * f) * &fi * (&g1 + f * &alpha) * kappa1)
        * &ki
        / kappa1;

    let c1 = -(w * &k * f);

    Ok(DerivedBlocks { g1, g2, alpha, beta, b1, gamma, delta, c1 })
}

/// Build A(x) = A2 x^2 + A1 x + A0 from the derived blocks. Blocks are
/// placed as 2x2 arrays of m x m matrices; the gauge W conjugates the
/// upper band.
pub fn assemble_a(
    params: &QParameters,
    state: &AccessoryState,
    tol: &Tolerances,
) -> Result<(MatrixPolynomial, DerivedBlocks)> {
    let m = params.m;
    let blocks = derive_blocks(params, state, tol)?;
    let k = params.kmat();
    let kappa1 = params.kappa[0];
    let f = &state.f;
    let w = &state.w;
    let ki = guarded_inv(&k, tol.cond_limit, "K")?;
    let wi = guarded_inv(w, tol.cond_limit, "W")?;
    let wk = w * &k;
    let kw_i = &ki * &wi;

    let a2 = params.leading_coeff();

    let mut a1 = CMatrix::zeros(2 * m, 2 * m);
    set_block(&mut a1, 0, 0, &(-(&wk * (f + &blocks.alpha) * &kw_i) * kappa1));
    set_block(&mut a1, 0, 1, &wk);
    set_block(&mut a1, 1, 0, &(&blocks.gamma * &wi * kappa1));
    set_block(&mut a1, 1, 1, &(-(&k * (f + &blocks.beta))));

    let mut a0 = CMatrix::zeros(2 * m, 2 * m);
    set_block(&mut a0, 0, 0, &(&wk * (f * &blocks.alpha + &blocks.g1) * &kw_i * kappa1));
    set_block(&mut a0, 0, 1, &blocks.c1);
    set_block(&mut a0, 1, 0, &(&blocks.delta * &wi * kappa1));
    set_block(&mut a0, 1, 1, &(&k * (&blocks.beta * f + &blocks.g2)));

    Ok((MatrixPolynomial::new(vec![a0, a1, a2]), blocks))
}

fn set_block(target: &mut CMatrix, i: usize, j: usize, b: &CMatrix) {
    let m = b.nrows();
    target.view_mut((i * m, j * m), (m, m)).copy_from(b);
}

/// Residuals of the three identities tying the constant term to its rank-m
/// factorization: the diagonal blocks must match theta1 t I - C1 B1 and
/// theta2 t I + B1 C1, and the lower-left block must match
/// B1 ((theta1 - theta2) t I - C1 B1).
pub fn residue_identity_residuals(
    params: &QParameters,
    state: &AccessoryState,
    blocks: &DerivedBlocks,
) -> Result<[f64; 3]> {
    let m = params.m;
    let k = params.kmat();
    let kappa1 = params.kappa[0];
    let t = params.t;
    let [th1, th2] = params.theta;
    let w = &state.w;
    let f = &state.f;
    let ki = guarded_inv(&k, 1e14, "K")?;
    let wi = guarded_inv(w, 1e14, "W")?;
    let wk = w * &k;

    let a0_tl = &wk * (f * &blocks.alpha + &blocks.g1) * &ki * &wi * kappa1;
    let a0_br = &k * (&blocks.beta * f + &blocks.g2);
    let a0_bl = &blocks.delta * &wi * kappa1;

    let r1 = rel_resid(&a0_tl, &(scalar(m, th1 * t) - &blocks.c1 * &blocks.b1));
    let r2 = rel_resid(&a0_br, &(scalar(m, th2 * t) + &blocks.b1 * &blocks.c1));
    let r3 = rel_resid(
        &a0_bl,
        &(&blocks.b1 * (scalar(m, (th1 - th2) * t) - &blocks.c1 * &blocks.b1)),
    );
    Ok([r1, r2, r3])
}

/// Compare det A(x) against the closed form
/// kappa1^m kappa2^{m-1} kappa3 prod_j (x - alpha_j)^m coefficient by
/// coefficient. Returns the largest coefficient error relative to the
/// largest expected coefficient; errors out above tol_det.
pub fn verify_det(a: &MatrixPolynomial, params: &QParameters, tol_det: f64) -> Result<f64> {
    let got = crate::poly::poly_det(a)?;
    let want = params.det_coeffs();
    let scale = want.iter().map(|z| z.norm()).fold(0.0f64, f64::max).max(1e-300);
    let mut worst = 0.0f64;
    for k in 0..got.len().max(want.len()) {
        let g = got.get(k).copied().unwrap_or_default();
        let w = want.get(k).copied().unwrap_or_default();
        worst = worst.max((g - w).norm() / scale);
    }
    if worst > tol_det {
        return Err(Error::WitnessMismatch { relation: "determinant", residual: worst });
    }
    Ok(worst)
}

/// Max residual over the identities that the derived blocks must satisfy
/// independently of the assembly: alpha + beta = -(F + G1^{-1} F G1 + beta1).
pub fn alpha_beta_sum_residual(
    params: &QParameters,
    state: &AccessoryState,
    blocks: &DerivedBlocks,
) -> Result<f64> {
    let m = params.m;
    let g1i = guarded_inv(&blocks.g1, 1e14, "G1")?;
    let want = -(&state.f + &g1i * &state.f * &blocks.g1 + scalar(m, params.betas()[0]));
    Ok(rel_resid(&(&blocks.alpha + &blocks.beta), &want))
}
