//! Seeded draws of admissible inputs: parameter sets on both sides of the
//! limit, accessory coordinates, and phase points on the canonical
//! constraint variety. Every function consumes a caller-owned generator,
//! so one recorded seed reproduces an entire run.

use rand::Rng;

use crate::accessory::{build_accessory, AccessoryData};
use crate::error::{Error, Result};
use crate::limit::LimitDictionary;
use crate::mat::{
    c, cr, fro, ident, kron, singular_values, sub_scalar, unvec, vec_of, CMatrix, C64,
};
use crate::params::QParameters;
use crate::pvi::{DiffParameters, PhasePoint};
use crate::tol::Tolerances;

/// Relative separation required between values the formulas divide by.
const MARGIN: f64 = 0.05;

/// Complex scalar with modulus uniform in [lo, hi] and uniform phase.
pub fn ring<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> C64 {
    let r = rng.gen_range(lo..=hi);
    let phi = rng.gen_range(0.0..std::f64::consts::TAU);
    C64::from_polar(r, phi)
}

/// Complex scalar with real and imaginary parts uniform in [-half, half].
pub fn cbox<R: Rng + ?Sized>(rng: &mut R, half: f64) -> C64 {
    c(rng.gen_range(-half..=half), rng.gen_range(-half..=half))
}

fn min_sv(a: &CMatrix) -> f64 {
    singular_values(a).last().copied().unwrap_or(0.0)
}

/// m x m matrix with independent cbox(half) entries, redrawn until its
/// smallest singular value clears sv_floor.
pub fn cbox_matrix<R: Rng + ?Sized>(rng: &mut R, m: usize, half: f64, sv_floor: f64) -> CMatrix {
    loop {
        let a = CMatrix::from_fn(m, m, |_, _| cbox(rng, half));
        if min_sv(&a) >= sv_floor {
            return a;
        }
    }
}

fn qparams_margins(p: &QParameters) -> bool {
    let al = p.alphas();
    let scale = al.iter().map(|z| z.norm()).fold(1.0f64, f64::max);
    for i in 0..4 {
        for j in 0..4 {
            if i != j && (al[i] - al[j]).norm() < MARGIN * scale {
                return false;
            }
            if (p.q * al[i] - al[j]).norm() < MARGIN * scale {
                return false;
            }
        }
    }
    let kscale = p.kappa.iter().map(|z| z.norm()).fold(1.0f64, f64::max);
    for kk in [p.kappa[1], p.kappa[2]] {
        if (p.kappa[0] - kk).norm() < MARGIN * kscale {
            return false;
        }
        if (p.q * p.kappa[0] - kk).norm() < MARGIN * kscale {
            return false;
        }
    }
    // the leading and trailing eigenvalue groups must stay resolvable
    if p.m >= 2 && (p.kappa[1] - p.kappa[2]).norm() < MARGIN * kscale {
        return false;
    }
    let tscale = p.theta[0].norm().max(p.theta[1].norm());
    (p.theta[0] - p.theta[1]).norm() >= MARGIN * tscale
}

/// Admissible multiplicative parameter set: kappa3 is solved from the
/// exponent product relation, and everything the assembly divides by (root
/// differences and their q-shifts, kappa1 against K and q^{-1} K, the
/// eigenvalue-group separations) clears a 5% relative margin. |q| is kept
/// in [0.80, 0.90] so that long trajectories, which scale the roots a1 t
/// and a2 t by q each step, do not drive them into the coincidence gate.
pub fn random_qparams<R: Rng + ?Sized>(rng: &mut R, m: usize) -> QParameters {
    let mi = m as i32;
    loop {
        let q = ring(rng, 0.80, 0.90);
        let t = ring(rng, 0.9, 1.2);
        let theta = [ring(rng, 0.7, 1.4), ring(rng, 0.7, 1.4)];
        let kappa1 = ring(rng, 0.7, 1.4);
        let kappa2 = ring(rng, 0.7, 1.4);
        let a = [
            ring(rng, 0.7, 1.4),
            ring(rng, 0.7, 1.4),
            ring(rng, 0.7, 1.4),
            ring(rng, 0.7, 1.4),
        ];
        let kappa3 = (theta[0] * theta[1]).powi(mi)
            / (kappa1.powi(mi) * kappa2.powi(mi - 1) * (a[0] * a[1] * a[2] * a[3]).powi(mi));
        if !(0.2..=5.0).contains(&kappa3.norm()) {
            continue;
        }
        let Ok(p) = QParameters::new(m, q, t, theta, [kappa1, kappa2, kappa3], a) else {
            continue;
        };
        if qparams_margins(&p) {
            return p;
        }
    }
}

/// Accessory coordinates over the given parameters: the 2m free complex
/// coordinates are drawn from rings bounded away from zero, and a draw is
/// rejected unless F stays clear of the four determinant roots (the block
/// assembly inverts F - alpha_i). Gives up after 64 draws.
pub fn random_accessory<R: Rng + ?Sized>(
    rng: &mut R,
    params: &QParameters,
    tol: &Tolerances,
) -> Result<AccessoryData> {
    let m = params.m;
    let mut last = Error::InvalidParameters("accessory sampling exhausted its retries".into());
    for _ in 0..64 {
        let f_free: Vec<C64> = (0..m).map(|_| ring(rng, 0.6, 1.5)).collect();
        let g_coeffs: Vec<C64> = (0..m).map(|_| ring(rng, 0.6, 1.5)).collect();
        match build_accessory(params, &f_free, &g_coeffs, None, tol) {
            Ok(data) => {
                let clear = params.alphas().iter().all(|&ai| {
                    min_sv(&sub_scalar(&data.state.f, ai)) >= 0.02 * ai.norm().max(1.0)
                });
                if clear {
                    return Ok(data);
                }
                last = Error::SingularBlock("F - alpha_i margin".into());
            }
            Err(e) => last = e,
        }
    }
    Err(last)
}

/// Additive exponent set with theta_inf3 solved from the trace relation.
/// The finite exponents keep their moduli in [0.15, 0.5] so the residue
/// eigenvalue clusters {0, theta} stay resolvable, the groups at infinity
/// keep a 0.1 separation (the residue construction inverts
/// theta_inf1 I - Theta), and the solved exponent is clamped to keep the
/// vector field tame.
pub fn random_diff_params<R: Rng + ?Sized>(rng: &mut R, m: usize) -> DiffParameters {
    let mm = m as f64;
    loop {
        let theta0 = ring(rng, 0.15, 0.5);
        let theta1 = ring(rng, 0.15, 0.5);
        let thetat = ring(rng, 0.15, 0.5);
        let ti1 = cbox(rng, 0.35);
        let ti2 = cbox(rng, 0.35);
        let ti3 = -(mm * (theta0 + theta1 + thetat + ti1) + (mm - 1.0) * ti2);
        let separated = (ti1 - ti2).norm() >= 0.1
            && (ti1 - ti3).norm() >= 0.1
            && (m == 1 || (ti2 - ti3).norm() >= 0.1);
        if !separated || ti3.norm() > 2.0 {
            continue;
        }
        if let Ok(dp) = DiffParameters::new(m, theta0, theta1, thetat, [ti1, ti2, ti3]) {
            return dp;
        }
    }
}

/// Joint Gauss-Newton refinement of (Q, P) onto [P, Q] = target, with
/// minimum-norm steps and backtracking. Quadratic once close; the
/// least-squares start below leaves a residual well inside the basin.
fn close_canonical(
    q0: &CMatrix,
    p0: &CMatrix,
    target: &CMatrix,
) -> Result<(CMatrix, CMatrix)> {
    let m = q0.nrows();
    let mm = m * m;
    let scale = fro(target).max(1.0);
    let mut q = q0.clone();
    let mut p = p0.clone();
    let mut best = f64::MAX;
    for _ in 0..40 {
        let r = &p * &q - &q * &p - target;
        let resid = fro(&r) / scale;
        best = best.min(resid);
        if resid < 1e-13 {
            return Ok((q, p));
        }
        // vec(A X B) = (B^T (x) A) vec(X): the differential sends
        // (dQ, dP) to [P, dQ] + [dP, Q]
        let jq = kron(&ident(m), &p) - kron(&p.transpose(), &ident(m));
        let jp = kron(&q.transpose(), &ident(m)) - kron(&ident(m), &q);
        let mut j = CMatrix::zeros(mm, 2 * mm);
        j.view_mut((0, 0), (mm, mm)).copy_from(&jq);
        j.view_mut((0, mm), (mm, mm)).copy_from(&jp);
        let rhs = -vec_of(&r);
        let svd = j.svd(true, true);
        let z = svd
            .solve(&rhs, 1e-12 * svd.singular_values.max())
            .map_err(|_| Error::SingularMatrix("canonical-relation least-squares".into()))?;
        let dq = unvec(&z.rows(0, mm).into_owned(), m);
        let dp = unvec(&z.rows(mm, mm).into_owned(), m);
        let mut lambda = 1.0f64;
        let mut moved = false;
        for _ in 0..20 {
            let qt = &q + &dq * cr(lambda);
            let pt = &p + &dp * cr(lambda);
            let rt = &pt * &qt - &qt * &pt - target;
            if fro(&rt) / scale < resid {
                q = qt;
                p = pt;
                moved = true;
                break;
            }
            lambda *= 0.5;
        }
        if !moved {
            break;
        }
    }
    Err(Error::NewtonDiverged { best })
}

/// Phase point on the constraint variety at position t. Q is drawn with
/// invertibility margins against {O, I, t I} (the variable substitution of
/// the limit divides by all three), the minimum-norm momentum of the linear
/// map P -> [P, Q] seeds a joint refinement of (Q, P) (for fixed generic Q
/// and m > 1 the equation itself is unsolvable: tr([P, Q] Q^k) = 0 for
/// every k, while the target only has zero trace), a commutant dressing
/// keeps the minimum-norm P from being structurally special, and the gauge
/// U is an independent well-conditioned draw.
pub fn random_phase_point<R: Rng + ?Sized>(
    rng: &mut R,
    dp: &DiffParameters,
    t: C64,
) -> Result<PhasePoint> {
    let m = dp.m;
    let target = dp.commutator_target();
    let mut last = Error::InvalidParameters("phase-point sampling exhausted its retries".into());
    for _ in 0..64 {
        let q = CMatrix::from_fn(m, m, |_, _| cbox(rng, 1.0));
        let margins = |q: &CMatrix, floor: f64| {
            min_sv(q) >= floor
                && min_sv(&sub_scalar(q, cr(1.0))) >= floor
                && min_sv(&sub_scalar(q, t)) >= floor
        };
        if !margins(&q, 0.15) {
            continue;
        }
        let lin = kron(&q.transpose(), &ident(m)) - kron(&ident(m), &q);
        let svd = lin.svd(true, true);
        let Ok(v) = svd.solve(&vec_of(&target), 1e-10 * svd.singular_values.max().max(1.0))
        else {
            continue;
        };
        let mut p = unvec(&v, m);
        // polynomials in Q commute with Q, so this moves P without moving
        // [P, Q]
        let mut qpow = ident(m);
        for _ in 0..m {
            p += &qpow * cbox(rng, 0.5);
            qpow = &qpow * &q;
        }
        match close_canonical(&q, &p, &target) {
            Ok((q, p)) => {
                if !(margins(&q, 0.1) && fro(&p) <= 20.0) {
                    last = Error::InvalidParameters(
                        "phase-point margins failed after refinement".into(),
                    );
                    continue;
                }
                let u = cbox_matrix(rng, m, 1.0, 0.25);
                return Ok(PhasePoint { q, p, u, t });
            }
            Err(e) => last = e,
        }
    }
    Err(last)
}

/// Small-step exponent family: mu3 is solved from the additive balance, and
/// the separations that the assembled system divides by after the 1/eps
/// amplification (zeta and sigma differences, mu1 against mu2 and mu3, the
/// unit-shifted mu differences that the q-shift produces) clear fixed
/// margins.
pub fn random_limit_dictionary<R: Rng + ?Sized>(
    rng: &mut R,
    m: usize,
    epsilon: f64,
) -> LimitDictionary {
    let mm = m as f64;
    loop {
        let sigma = [cbox(rng, 0.25), cbox(rng, 0.25)];
        let zeta = [
            cbox(rng, 0.25),
            cbox(rng, 0.25),
            cbox(rng, 0.25),
            cbox(rng, 0.25),
        ];
        let mu1 = cbox(rng, 0.4);
        let mu2 = cbox(rng, 0.4);
        let zsum = zeta[0] + zeta[1] + zeta[2] + zeta[3];
        let mu3 = -(mm * mu1 + cr(mm - 1.0) * mu2 + cr(mm) * (zsum + sigma[0] + sigma[1]));
        let separated = (sigma[0] - sigma[1]).norm() >= 0.1
            && (zeta[0] - zeta[1]).norm() >= 0.1
            && (zeta[2] - zeta[3]).norm() >= 0.1
            && (mu1 - mu2).norm() >= 0.1
            && (mu1 - mu3).norm() >= 0.1
            && (mu1 - mu2 - cr(1.0)).norm() >= MARGIN
            && (mu1 - mu3 - cr(1.0)).norm() >= MARGIN
            && (m == 1 || (mu2 - mu3).norm() >= 0.1);
        if !separated || mu3.norm() > 2.5 {
            continue;
        }
        if let Ok(d) = LimitDictionary::new(m, epsilon, sigma, zeta, [mu1, mu2, mu3]) {
            return d;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn scalar_draws_land_in_their_ranges() {
        let mut r = rng(1);
        for _ in 0..200 {
            let z = ring(&mut r, 0.7, 1.4);
            assert!((0.7..=1.4).contains(&z.norm()));
            let w = cbox(&mut r, 0.3);
            assert!(w.re.abs() <= 0.3 && w.im.abs() <= 0.3);
        }
    }

    #[test]
    fn identical_seeds_reproduce_the_draw() {
        let p1 = random_qparams(&mut rng(42), 2);
        let p2 = random_qparams(&mut rng(42), 2);
        assert_eq!(p1.q, p2.q);
        assert_eq!(p1.t, p2.t);
        assert_eq!(p1.theta, p2.theta);
        assert_eq!(p1.kappa, p2.kappa);
        assert_eq!(p1.a, p2.a);
        let d1 = random_limit_dictionary(&mut rng(42), 2, 1e-3);
        let d2 = random_limit_dictionary(&mut rng(42), 2, 1e-3);
        assert_eq!(d1.mu, d2.mu);
    }

    #[test]
    fn qparams_draws_are_admissible() {
        let mut r = rng(7);
        for m in [1usize, 2, 3] {
            for _ in 0..10 {
                let p = random_qparams(&mut r, m);
                assert!(p.fuchs_residual() < 1e-12);
                assert!(qparams_margins(&p));
                assert!((0.80..=0.90).contains(&p.q.norm()));
            }
        }
    }

    #[test]
    fn accessory_draws_satisfy_commutation() {
        let tol = Tolerances::default();
        let mut r = rng(11);
        for m in [1usize, 2, 3] {
            let p = random_qparams(&mut r, m);
            for _ in 0..3 {
                let data = random_accessory(&mut r, &p, &tol).unwrap();
                let resid = data.state.commutation_residual(&p, tol.cond_limit).unwrap();
                assert!(resid < 1e-10, "m={m} residual {resid}");
                assert_eq!(data.kernel.len(), m);
            }
        }
    }

    #[test]
    fn phase_points_land_on_the_constraint_variety() {
        let t = c(0.45, 0.35);
        let mut r = rng(23);
        for m in [1usize, 2, 3, 4] {
            let dp = random_diff_params(&mut r, m);
            for _ in 0..5 {
                let pt = random_phase_point(&mut r, &dp, t).unwrap();
                let resid = pt.canonical_residual(&dp);
                assert!(resid < 1e-12, "m={m} residual {resid}");
                assert!(min_sv(&pt.q) >= 0.1);
                assert!(min_sv(&pt.u) >= 0.25);
            }
        }
    }

    #[test]
    fn diff_params_close_the_trace_relation() {
        let mut r = rng(31);
        for m in [1usize, 2, 3] {
            for _ in 0..10 {
                let dp = random_diff_params(&mut r, m);
                assert!(dp.fuchs_residual() < 1e-13);
                assert!((dp.theta_inf[0] - dp.theta_inf[1]).norm() >= 0.1);
            }
        }
    }

    #[test]
    fn dictionary_draws_balance_both_sides() {
        let t = c(0.45, 0.35);
        let mut r = rng(5);
        for m in [1usize, 2, 3] {
            for _ in 0..5 {
                let d = random_limit_dictionary(&mut r, m, 2e-3);
                let qp = d.to_qparams(t).unwrap();
                assert!(qp.fuchs_residual() < 1e-10, "m={m}");
                let dp = d.param_dictionary().unwrap();
                assert!(dp.fuchs_residual() < 1e-10, "m={m}");
            }
        }
    }
}
