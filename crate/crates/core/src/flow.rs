//! Evolution of the accessory state induced by the connection-preserving
//! deformation: the three-step update (Gbar, then Fbar, then Wbar), the
//! deformation matrix B(x,t) with its kernel identities, and numerical
//! verification of the compatibility condition A(x,qt)B(x,t) = B(qx,t)A(x,t).

use crate::accessory::AccessoryState;
use crate::assemble::assemble_a;
use crate::error::{Error, Result};
use crate::mat::{fro, ident, mat_inv, rel_resid, scalar, CMatrix, C64};
use crate::params::QParameters;
use crate::tol::Tolerances;

fn factor_inv(a: &CMatrix, cond_limit: f64, label: &str) -> Result<CMatrix> {
    mat_inv(a, cond_limit).map_err(|_| Error::SingularFactor(label.into()))
}

/// Gbar solved from Gbar K G = (q kappa1)^-1 (F-a1t)(F-a2t)(F-a3)^-1(F-a4)^-1.
/// The four shifted factors commute (all polynomials in F); the trailing
/// G^-1 K^-1 does not and stays rightmost.
pub fn step_g(params: &QParameters, state: &AccessoryState, tol: &Tolerances) -> Result<CMatrix> {
    let m = params.m;
    let [al1, al2, al3, al4] = params.alphas();
    let f = &state.f;
    let sh = |z: C64| f - scalar(m, z);
    let d3 = factor_inv(&sh(al3), tol.cond_limit, "F - a3")?;
    let d4 = factor_inv(&sh(al4), tol.cond_limit, "F - a4")?;
    let gi = factor_inv(&state.g, tol.cond_limit, "G")?;
    let ki = factor_inv(&params.kmat(), tol.cond_limit, "K")?;
    Ok(sh(al1) * sh(al2) * d3 * d4 * gi * ki / (params.q * params.kappa[0]))
}

/// Fbar solved from Fbar K F = theta1 theta2 / (kappa1 a1 a2) *
/// (Gbar - t a1 a2/theta1)(Gbar - t a1 a2/theta2)(Gbar - 1/(q kappa1))^-1 (Gbar - rho)^-1.
pub fn step_f(
    params: &QParameters,
    state: &AccessoryState,
    gbar: &CMatrix,
    tol: &Tolerances,
) -> Result<CMatrix> {
    let m = params.m;
    let [th1, th2] = params.theta;
    let [a1, a2, _, _] = params.a;
    let (q, t, kappa1) = (params.q, params.t, params.kappa[0]);
    let sh = |z: C64| gbar - scalar(m, z);
    let d1 = factor_inv(&sh(C64::new(1.0, 0.0) / (q * kappa1)), tol.cond_limit, "Gbar - 1/(q kappa1)")?;
    let d2 = factor_inv(&sh(params.rho()), tol.cond_limit, "Gbar - rho")?;
    let fi = factor_inv(&state.f, tol.cond_limit, "F")?;
    let ki = factor_inv(&params.kmat(), tol.cond_limit, "K")?;
    let pref = th1 * th2 / (kappa1 * a1 * a2);
    Ok(sh(t * a1 * a2 / th1) * sh(t * a1 * a2 / th2) * d1 * d2 * pref * fi * ki)
}

/// Wbar = W q kappa1 (Gbar - K^-1)^-1 (Gbar - 1/(q kappa1)) K^-1.
pub fn step_w(
    params: &QParameters,
    state: &AccessoryState,
    gbar: &CMatrix,
    tol: &Tolerances,
) -> Result<CMatrix> {
    let m = params.m;
    let (q, kappa1) = (params.q, params.kappa[0]);
    let ki = factor_inv(&params.kmat(), tol.cond_limit, "K")?;
    let d = factor_inv(&(gbar - &ki), tol.cond_limit, "Gbar - K^-1")?;
    let n = gbar - scalar(m, C64::new(1.0, 0.0) / (q * kappa1));
    Ok(&state.w * (d * n * ki) * (q * kappa1))
}

#[derive(Clone, Debug)]
pub struct DeformationMatrices {
    pub b0: CMatrix,
    pub b11: CMatrix,
    pub b12: CMatrix,
    pub b21: CMatrix,
    pub b22: CMatrix,
    pub phi1: CMatrix,
    pub phi2: CMatrix,
    pub psi1: CMatrix,
    pub psi2: CMatrix,
    pub l: CMatrix,
}

impl DeformationMatrices {
    /// B(x,t) = x (xI + B0) / ((x - q a1 t)(x - q a2 t)).
    pub fn eval_b(&self, x: C64, params: &QParameters, pole_margin: f64) -> Result<CMatrix> {
        let (q, t) = (params.q, params.t);
        let mut den = C64::new(1.0, 0.0);
        for pole in [q * params.a[0] * t, q * params.a[1] * t] {
            if (x - pole).norm() < pole_margin * pole.norm() {
                return Err(Error::PoleProximity { x });
            }
            den *= x - pole;
        }
        let n = self.b0.nrows();
        Ok((scalar(n, x) + &self.b0) * (x / den))
    }
}

/// One application of the evolution map together with its deformation data.
#[derive(Clone, Debug)]
pub struct FlowStep {
    pub before: (QParameters, AccessoryState),
    pub after: (QParameters, AccessoryState),
    pub deformation: DeformationMatrices,
}

fn kernel_check(name: &'static str, lhs: &CMatrix, rhs: &CMatrix, tol: f64) -> Result<()> {
    let residual = rel_resid(lhs, rhs);
    if residual > tol {
        return Err(Error::KernelIdentityViolated { name, residual });
    }
    Ok(())
}

/// Build the deformation matrix B0 (blocks, kernel factors, and the linear
/// coefficient L) from the states on both sides of a step, enforcing every
/// kernel identity at tol.kernel_identity.
pub fn build_b(
    params: &QParameters,
    state: &AccessoryState,
    after_state: &AccessoryState,
    tol: &Tolerances,
) -> Result<DeformationMatrices> {
    let m = params.m;
    let (q, t, kappa1) = (params.q, params.t, params.kappa[0]);
    let [a1, a2, _, _] = params.a;
    let k = params.kmat();
    let after_params = params.shift_t()?;

    let (a_before, before) = assemble_a(params, state, tol)?;
    let (a_after, after) = assemble_a(&after_params, after_state, tol)?;

    let f = &state.f;
    let w = &state.w;
    let (fbar, gbar, wbar) = (&after_state.f, &after_state.g, &after_state.w);

    let ki = factor_inv(&k, tol.cond_limit, "K")?;
    let wi = factor_inv(w, tol.cond_limit, "W")?;
    let wbari = factor_inv(wbar, tol.cond_limit, "Wbar")?;
    let gbari = factor_inv(gbar, tol.cond_limit, "Gbar")?;
    let wk = w * &k;

    let i_gk = factor_inv(&(ident(m) - gbar * &k), tol.cond_limit, "I - Gbar K")?;
    let i_qkg = factor_inv(&(ident(m) - gbar * (q * kappa1)), tol.cond_limit, "I - q kappa1 Gbar")?;

    let inner11 = &ki * &gbari * (f - scalar(m, (a1 + a2) * t)) + &before.beta;
    let b11 = &wk * &i_gk * gbar * &k * inner11 * &ki * &wi * q;
    let b12 = &wk * &i_gk * gbar * q;

    let left21 = (fbar - scalar(m, q * a2 * t)) * &gbari / (q * kappa1) - scalar(m, q * a1 * t)
        + &after.alpha;
    let right21 =
        &ki * &gbari * (f - scalar(m, a2 * t)) - scalar(m, a1 * t) + &before.beta;
    let b21 = &left21 * &i_qkg * gbar * &k * right21 * &ki * &wi * (q * kappa1);

    let left22 = (fbar - scalar(m, q * (a1 + a2) * t)) * &gbari / (q * kappa1) + &after.alpha;
    let b22 = left22 * gbar * &i_qkg * (q * kappa1);

    let phi1 = &left21 * &ki * &wbari * kappa1;
    let left_phi2 = (fbar - scalar(m, q * a1 * t)) * &gbari / (q * kappa1)
        - scalar(m, q * a2 * t)
        + &after.alpha;
    let phi2 = left_phi2 * &ki * &wbari * kappa1;

    let psi = |ai: C64, label: &'static str| -> Result<CMatrix> {
        let sfi = factor_inv(&(f - scalar(m, ai * t)), tol.cond_limit, label)?;
        Ok(&k * (&before.g2 * sfi + scalar(m, -ai * t) + &before.beta) * &ki * &wi)
    };
    let psi1 = psi(a1, "F - a1 t")?;
    let psi2 = psi(a2, "F - a2 t")?;

    kernel_check("Phi1 + Psi2", &phi1, &(-&psi2), tol.kernel_identity)?;
    let target = scalar(m, q * (a1 - a2) * t);
    kernel_check("(Phi1 - Phi2) B12", &((&phi1 - &phi2) * &b12), &target, tol.kernel_identity)?;
    kernel_check("B12 (Psi1 - Psi2)", &(&b12 * (&psi1 - &psi2)), &target, tol.kernel_identity)?;

    let mut b0 = CMatrix::zeros(2 * m, 2 * m);
    b0.view_mut((0, 0), (m, m)).copy_from(&b11);
    b0.view_mut((0, m), (m, m)).copy_from(&b12);
    b0.view_mut((m, 0), (m, m)).copy_from(&b21);
    b0.view_mut((m, m), (m, m)).copy_from(&b22);

    let mut col = CMatrix::zeros(2 * m, m);
    col.view_mut((0, 0), (m, m)).copy_from(&ident(m));
    col.view_mut((m, 0), (m, m)).copy_from(&phi1);
    let mut row = CMatrix::zeros(m, 2 * m);
    row.view_mut((0, 0), (m, m)).copy_from(&psi1);
    row.view_mut((0, m), (m, m)).copy_from(&ident(m));
    let reconstruction = scalar(2 * m, -q * a1 * t) + col * &b12 * row;
    kernel_check("B0 kernel reconstruction", &b0, &reconstruction, tol.kernel_identity)?;

    let a2mat = &a_before.coeffs[2];
    let l = a2mat * &b0 + &a_after.coeffs[1] + a2mat * (q * (a1 + a2) * t);
    let lp = &a_before.coeffs[1] + &b0 * a2mat / q + a2mat * ((a1 + a2) * t);
    kernel_check("L = L'", &l, &lp, tol.kernel_identity)?;

    Ok(DeformationMatrices { b0, b11, b12, b21, b22, phi1, phi2, psi1, psi2, l })
}

/// Apply one evolution step: Gbar from (F,G), Fbar from (Gbar,F), Wbar from
/// (W,Gbar), shift t -> qt, assert the commutation invariant of the after
/// state, and build the deformation matrices.
pub fn flow_step(params: &QParameters, state: &AccessoryState, tol: &Tolerances) -> Result<FlowStep> {
    let gbar = step_g(params, state, tol)?;
    factor_inv(&gbar, tol.cond_limit, "Gbar")?;
    let fbar = step_f(params, state, &gbar, tol)?;
    let wbar = step_w(params, state, &gbar, tol)?;
    factor_inv(&wbar, tol.cond_limit, "Wbar")?;

    let after_params = params.shift_t()?;
    let after_state = AccessoryState { f: fbar, g: gbar, w: wbar };
    let residual = after_state.commutation_residual(&after_params, tol.cond_limit)?;
    if residual > tol.drift {
        return Err(Error::CommutationDrift { residual, tol: tol.drift });
    }
    let deformation = build_b(params, state, &after_state, tol)?;
    Ok(FlowStep {
        before: (params.clone(), state.clone()),
        after: (after_params, after_state),
        deformation,
    })
}

/// Max over samples of |A(x,qt)B(x,t) - B(qx,t)A(x,t)| / (|A(x,qt)| |B(x,t)|)
/// in Frobenius norms. Samples must stay clear of the poles q a1 t, q a2 t
/// and their images a1 t, a2 t under x -> qx.
pub fn verify_compat(step: &FlowStep, xsamples: &[C64], tol: &Tolerances) -> Result<f64> {
    let (p, s) = &step.before;
    let (pa, sa) = &step.after;
    let (a_t, _) = assemble_a(p, s, tol)?;
    let (a_qt, _) = assemble_a(pa, sa, tol)?;
    let q = p.q;
    let mut worst: f64 = 0.0;
    for &x in xsamples {
        for pole in [p.a[0] * p.t, p.a[1] * p.t] {
            if (x - pole).norm() < tol.pole_margin * pole.norm() {
                return Err(Error::PoleProximity { x });
            }
        }
        let b_x = step.deformation.eval_b(x, p, tol.pole_margin)?;
        let b_qx = step.deformation.eval_b(q * x, p, tol.pole_margin)?;
        let ax_qt = a_qt.eval(x);
        let lhs = &ax_qt * &b_x;
        let rhs = b_qx * a_t.eval(x);
        let denom = (fro(&ax_qt) * fro(&b_x)).max(f64::MIN_POSITIVE);
        worst = worst.max(fro(&(lhs - rhs)) / denom);
    }
    Ok(worst)
}

/// Eight sample points on the circle |x| = geometric mean of |q a1 t| and
/// |a3|, between the two pole clusters, at phases avoiding the real axis.
pub fn compat_circle(params: &QParameters) -> Vec<C64> {
    let r = ((params.q * params.a[0] * params.t).norm() * params.a[2].norm()).sqrt();
    (0..8)
        .map(|j| C64::from_polar(r, std::f64::consts::PI * (2 * j + 1) as f64 / 8.0))
        .collect()
}

#[derive(Clone, Debug)]
pub struct StepRecord {
    pub step: FlowStep,
    pub commutation_residual: f64,
    pub compat_residual: f64,
}

/// A run of successive evolution steps. `steps` holds the completed steps in
/// order; a failure aborts the run and is recorded instead of returned.
#[derive(Debug)]
pub struct Trajectory {
    pub initial_params: QParameters,
    pub initial_state: AccessoryState,
    pub steps: Vec<StepRecord>,
    pub failure: Option<Error>,
}

/// Iterate the evolution map nsteps times, recording per-step commutation
/// and compatibility residuals on the fixed sample circle of each step.
pub fn evolve(
    params: &QParameters,
    state: &AccessoryState,
    nsteps: usize,
    tol: &Tolerances,
) -> Trajectory {
    let mut trajectory = Trajectory {
        initial_params: params.clone(),
        initial_state: state.clone(),
        steps: Vec::with_capacity(nsteps),
        failure: None,
    };
    let mut cur_p = params.clone();
    let mut cur_s = state.clone();
    for _ in 0..nsteps {
        let step = match flow_step(&cur_p, &cur_s, tol) {
            Ok(st) => st,
            Err(e) => {
                trajectory.failure = Some(e);
                break;
            }
        };
        let samples = compat_circle(&cur_p);
        let compat = match verify_compat(&step, &samples, tol) {
            Ok(r) => r,
            Err(e) => {
                trajectory.failure = Some(e);
                break;
            }
        };
        let commutation = match step.after.1.commutation_residual(&step.after.0, tol.cond_limit) {
            Ok(r) => r,
            Err(e) => {
                trajectory.failure = Some(e);
                break;
            }
        };
        cur_p = step.after.0.clone();
        cur_s = step.after.1.clone();
        trajectory.steps.push(StepRecord { step, commutation_residual: commutation, compat_residual: compat });
    }
    trajectory
}
