//! Spectral type measurement of a matrix polynomial A(x): eigenvalue
//! multiplicities of the end coefficients and, for every root of det A,
//! the partition describing the local elementary-divisor exponents.
//!
//! Root clustering is adaptive: companion-matrix roots of an m-fold zero
//! scatter like eps^(1/m), so a fixed radius either splits true clusters
//! or merges neighbors. Each candidate clustering is validated against the
//! rank profile of block Toeplitz sections of the Taylor expansion, which
//! encodes the exponents independently: with delta_k = k n - rank T_k, the
//! increments c_k = delta_k - delta_{k-1} form the conjugate partition and
//! must sum to the cluster's share of det-roots.

use crate::error::{Error, Result};
use crate::mat::{cluster_points, eig_clustered, CMatrix, C64};
use crate::params::QParameters;
use crate::poly::{poly_det, sp_roots, MatrixPolynomial};
use crate::tol::Tolerances;

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralType {
    /// Eigenvalue clusters of the constant coefficient: (value, size).
    pub s0: Vec<(C64, usize)>,
    /// Eigenvalue clusters of the leading coefficient: (value, size).
    pub s_inf: Vec<(C64, usize)>,
    /// Distinct determinant roots with their conjugate exponent partitions.
    pub s_div: Vec<(C64, Vec<usize>)>,
}

impl SpectralType {
    /// Compact rendering, e.g. "(2,2; 2,1,1; 2,2,2,2)". Nontrivial local
    /// structure shows as summed parts, e.g. "2+1".
    pub fn signature(&self) -> String {
        let sizes = |cl: &[(C64, usize)]| {
            cl.iter().map(|c| c.1.to_string()).collect::<Vec<_>>().join(",")
        };
        let div = self
            .s_div
            .iter()
            .map(|(_, p)| p.iter().map(|k| k.to_string()).collect::<Vec<_>>().join("+"))
            .collect::<Vec<_>>()
            .join(",");
        format!("({}; {}; {})", sizes(&self.s0), sizes(&self.s_inf), div)
    }

    /// Exact structural match against the family built by `assemble_a`:
    /// constant term (m, m) at theta_i t, leading term (m, m-1, 1) at the
    /// kappa_i, and four roots at the alpha_j, each with trivial partition
    /// of total m.
    pub fn matches_expected(&self, params: &QParameters, value_tol: f64) -> bool {
        let m = params.m;
        let near = |a: C64, b: C64, scale: f64| (a - b).norm() <= value_tol * scale.max(1.0);

        let th: Vec<(C64, usize)> =
            vec![(params.theta[0] * params.t, m), (params.theta[1] * params.t, m)];
        let th_scale = th.iter().map(|x| x.0.norm()).fold(0.0, f64::max);
        if self.s0.len() != 2 {
            return false;
        }
        for (want, mult) in &th {
            if !self.s0.iter().any(|(v, s)| s == mult && near(*v, *want, th_scale)) {
                return false;
            }
        }

        let mut want_inf: Vec<(C64, usize)> = vec![(params.kappa[0], m), (params.kappa[2], 1)];
        if m > 1 {
            want_inf.push((params.kappa[1], m - 1));
        }
        let k_scale = params.kappa.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if self.s_inf.len() != want_inf.len() {
            return false;
        }
        for (want, mult) in &want_inf {
            if !self.s_inf.iter().any(|(v, s)| s == mult && near(*v, *want, k_scale)) {
                return false;
            }
        }

        if self.s_div.len() != 4 {
            return false;
        }
        let alphas = params.alphas();
        let a_scale = alphas.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for want in alphas {
            if !self
                .s_div
                .iter()
                .any(|(v, p)| p.as_slice() == [m] && near(*v, want, a_scale))
            {
                return false;
            }
        }
        true
    }
}

/// Conjugate partition of the elementary-divisor exponents of `a` at x0,
/// from rank profiles of the block Toeplitz sections of its Taylor
/// expansion. At a true root the kernel directions of a section vanish to
/// rounding level, far below any structural singular value, so rank is
/// decided against a noise ceiling of noise_rel * (section size) * (global
/// coefficient scale), and the call refuses (None) unless the discarded
/// group is separated from the kept group by a factor 10. None also signals
/// non-monotone rank increments; both mean the point is not well resolved.
pub fn toeplitz_partition(
    a: &MatrixPolynomial,
    x0: C64,
    max_order: usize,
    noise_rel: f64,
) -> Option<Vec<usize>> {
    let n = a.size();
    let taylor = a.taylor_at(x0);
    // noise ceiling against the expansion's global scale: a section can be
    // uniformly tiny (pure roundoff), so its own sigma_max is no reference
    let scale = taylor.max_coeff_norm().max(1e-300);
    let block = |j: usize| -> CMatrix {
        taylor.coeffs.get(j).cloned().unwrap_or_else(|| CMatrix::zeros(n, n))
    };
    let mut partition = Vec::new();
    let mut delta_prev = 0usize;
    let mut c_prev = usize::MAX;
    // probe past max_order without stopping at the first stall: a point
    // offset from a deeper zero shows stalled increments that resume at the
    // next section, and only the resumption exposes it
    for k in 1..=(max_order + 1).max(3) {
        let mut t = CMatrix::zeros(k * n, k * n);
        for i in 0..k {
            for j in 0..=i {
                t.view_mut((i * n, j * n), (n, n)).copy_from(&block(i - j));
            }
        }
        let sv = crate::mat::singular_values(&t);
        let ceiling = noise_rel * (k * n) as f64 * scale;
        let rank = sv.iter().filter(|&&s| s > ceiling).count();
        let largest_zeroed = sv.get(rank).copied().unwrap_or(0.0);
        if rank > 0 && largest_zeroed > 0.0 && sv[rank - 1] < 10.0 * largest_zeroed {
            return None;
        }
        let delta = (k * n).checked_sub(rank)?;
        let c = delta.checked_sub(delta_prev)?;
        if c > c_prev {
            return None;
        }
        if c > 0 {
            partition.push(c);
        }
        c_prev = c;
        delta_prev = delta;
    }
    Some(partition)
}

fn cluster_signature(clusters: &[(C64, usize)]) -> Vec<usize> {
    let mut sizes: Vec<usize> = clusters.iter().map(|c| c.1).collect();
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    sizes
}

/// Measure the spectral type of a matrix polynomial with nonsingular end
/// coefficients. Root clustering starts at tol.root_cluster and doubles
/// (capped at 1e-3) until every cluster's Toeplitz partition accounts for
/// exactly its share of determinant roots and the clustering is stable
/// under a tenfold radius.
pub fn spectral_type(a: &MatrixPolynomial, tol: &Tolerances) -> Result<SpectralType> {
    let s0 = eig_clustered(&a.coeffs[0], tol.eig_rel)?;
    let s_inf = eig_clustered(a.coeffs.last().unwrap(), tol.eig_rel)?;
    let dets = poly_det(a)?;
    let roots = sp_roots(&dets, 1e-12)?;

    let mut rtol = tol.root_cluster;
    let mut attempt = 0usize;
    while rtol <= 1e-3 && attempt < 64 {
        attempt += 1;
        let clusters = cluster_points(&roots, rtol);
        let stable = cluster_points(&roots, rtol * 10.0);
        let mut ok = cluster_signature(&stable) == cluster_signature(&clusters);
        let mut validated = Vec::with_capacity(clusters.len());
        if ok {
            for &(center, count) in &clusters {
                match toeplitz_partition(a, center, count, tol.toeplitz_noise) {
                    Some(p) if p.iter().sum::<usize>() == count => validated.push((center, p)),
                    _ => {
                        ok = false;
                        break;
                    }
                }
            }
        }
        if ok {
            validated.sort_by(|x, y| {
                x.0.re
                    .partial_cmp(&y.0.re)
                    .unwrap()
                    .then(x.0.im.partial_cmp(&y.0.im).unwrap())
            });
            return Ok(SpectralType { s0, s_inf, s_div: validated });
        }
        rtol *= 2.0;
    }
    Err(Error::RootClusterAmbiguous)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::accessory::build_accessory;
    use crate::assemble::assemble_a;
    use crate::mat::{c, cr, ident, CVector};

    fn diag_poly(entries: &[Vec<C64>]) -> MatrixPolynomial {
        // entries[i] = scalar coefficients of the i-th diagonal entry
        let n = entries.len();
        let deg = entries.iter().map(|e| e.len() - 1).max().unwrap();
        let mut coeffs = vec![CMatrix::zeros(n, n); deg + 1];
        for (i, e) in entries.iter().enumerate() {
            for (k, &v) in e.iter().enumerate() {
                coeffs[k][(i, i)] = v;
            }
        }
        MatrixPolynomial::new(coeffs)
    }

    #[test]
    fn toeplitz_partition_mixed_exponents() {
        // diag((x-1)^2, x-1, 1): exponents (2,1) at 1, conjugate (2,1)
        let p = diag_poly(&[
            vec![cr(1.0), cr(-2.0), cr(1.0)],
            vec![cr(-1.0), cr(1.0)],
            vec![cr(1.0)],
        ]);
        let part = toeplitz_partition(&p, cr(1.0), 3, 1e-12).unwrap();
        assert_eq!(part, vec![2, 1]);
    }

    #[test]
    fn toeplitz_partition_regular_point() {
        let p = diag_poly(&[vec![cr(1.0), cr(1.0)], vec![cr(2.0), cr(1.0)]]);
        let part = toeplitz_partition(&p, cr(5.0), 2, 1e-12).unwrap();
        assert!(part.is_empty());
    }

    #[test]
    fn triple_roots_need_escalation() {
        // diag((x-1)^3, (x-2)^3): companion roots of the degree-6 det
        // scatter ~1e-5, beyond the base clustering radius
        let cube = |r: f64| vec![cr(-r * r * r), cr(3.0 * r * r), cr(-3.0 * r), cr(1.0)];
        let p = diag_poly(&[cube(1.0), cube(2.0)]);
        let tol = Tolerances::default();
        let st = spectral_type(&p, &tol).unwrap();
        assert_eq!(st.s_div.len(), 2);
        for (v, part) in &st.s_div {
            assert_eq!(part.as_slice(), &[1, 1, 1], "partition at {v}");
        }
        assert!((st.s_div[0].0 - cr(1.0)).norm() < 1e-3);
        assert!((st.s_div[1].0 - cr(2.0)).norm() < 1e-3);
    }

    #[test]
    fn assembled_system_has_expected_type() {
        for m in [1usize, 2] {
            let params = crate::params::fixture(m);
            let tol = Tolerances::default();
            let (f, g): (Vec<C64>, Vec<C64>) = if m == 1 {
                (vec![cr(5.0)], vec![cr(2.0)])
            } else {
                (vec![c(1.1, 0.2), c(-0.4, 0.6)], vec![c(1.0, 0.1), c(0.3, -0.2)])
            };
            let data = build_accessory(&params, &f, &g, None, &tol).unwrap();
            let (a, _) = assemble_a(&params, &data.state, &tol).unwrap();
            let st = spectral_type(&a, &tol).unwrap();
            assert!(st.matches_expected(&params, 1e-6), "m={m}: got {}", st.signature());
            if m == 2 {
                assert_eq!(st.signature(), "(2,2; 2,1,1; 2,2,2,2)");
            }
        }
    }

    #[test]
    fn signature_formatting() {
        let st = SpectralType {
            s0: vec![(cr(2.0), 2), (cr(3.0), 2)],
            s_inf: vec![(cr(0.7), 2), (cr(1.3), 1), (cr(0.1), 1)],
            s_div: vec![
                (cr(1.0), vec![2]),
                (cr(2.0), vec![2]),
                (cr(3.0), vec![1, 1]),
                (cr(4.0), vec![2]),
            ],
        };
        assert_eq!(st.signature(), "(2,2; 2,1,1; 2,2,1+1,2)");
    }

    #[test]
    fn merged_identity_poly_is_regular_everywhere() {
        // x I - diag(3, 3): one cluster of size 2 at 3 with partition (1,1)
        let a = CMatrix::from_diagonal(&CVector::from_vec(vec![cr(3.0), cr(3.0)]));
        let p = MatrixPolynomial::new(vec![-a, ident(2)]);
        let tol = Tolerances::default();
        let st = spectral_type(&p, &tol).unwrap();
        assert_eq!(st.s_div.len(), 1);
        assert_eq!(st.s_div[0].1, vec![2]);
    }
}
