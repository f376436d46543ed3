//! Named tolerances used across the engine, overridable one by one.

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct Tolerances {
    /// Condition-number ceiling for matrix inverses.
    pub cond_limit: f64,
    /// Relative singular-value cutoff for ranks and null spaces.
    pub rank_rel: f64,
    /// Relative radius for eigenvalue clustering.
    pub eig_rel: f64,
    /// Newton convergence threshold for the trailing-row solve.
    pub newton: f64,
    /// Allowed residual in the commutation relation of an accessory state.
    pub commutation: f64,
    /// Allowed commutation drift along a flow trajectory.
    pub drift: f64,
    /// Allowed relative residual in the compatibility identity.
    pub compat: f64,
    /// Allowed relative coefficient error in determinant checks.
    pub det: f64,
    /// Allowed relative residual in the diagonalization witness.
    pub smith: f64,
    /// Allowed residual in the deformation kernel identities.
    pub kernel_identity: f64,
    /// Base relative radius for clustering roots of the determinant.
    pub root_cluster: f64,
    /// Noise ceiling, relative to sigma_max and section size, below which a
    /// singular value of a Toeplitz section counts as a structural zero.
    pub toeplitz_noise: f64,
    /// Allowed violation of the multiplicative exponent relation.
    pub fuchs: f64,
    /// Allowed violation of the additive exponent relation.
    pub fuchs_diff: f64,
    /// Minimum distance from an evaluation point to a pole.
    pub pole_margin: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            cond_limit: 1e12,
            rank_rel: 1e-8,
            eig_rel: 1e-8,
            newton: 1e-11,
            commutation: 1e-9,
            drift: 1e-7,
            compat: 1e-8,
            det: 1e-8,
            smith: 1e-8,
            kernel_identity: 1e-9,
            root_cluster: 1e-6,
            toeplitz_noise: 1e-12,
            fuchs: 1e-10,
            fuchs_diff: 1e-12,
            pole_margin: 1e-6,
        }
    }
}

impl Tolerances {
    /// Override one tolerance by name; unknown names are an error.
    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::InvalidParameters(format!(
                "tolerance {name} must be finite and positive, got {value}"
            )));
        }
        let slot = match name {
            "cond_limit" => &mut self.cond_limit,
            "rank_rel" => &mut self.rank_rel,
            "eig_rel" => &mut self.eig_rel,
            "newton" => &mut self.newton,
            "commutation" => &mut self.commutation,
            "drift" => &mut self.drift,
            "compat" => &mut self.compat,
            "det" => &mut self.det,
            "smith" => &mut self.smith,
            "kernel_identity" => &mut self.kernel_identity,
            "root_cluster" => &mut self.root_cluster,
            "toeplitz_noise" => &mut self.toeplitz_noise,
            "fuchs" => &mut self.fuchs,
            "fuchs_diff" => &mut self.fuchs_diff,
            "pole_margin" => &mut self.pole_margin,
            _ => {
                return Err(Error::InvalidParameters(format!("unknown tolerance: {name}")));
            }
        };
        *slot = value;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_known_and_unknown() {
        let mut t = Tolerances::default();
        t.set("newton", 1e-9).unwrap();
        assert_eq!(t.newton, 1e-9);
        assert!(t.set("nope", 1.0).is_err());
        assert!(t.set("newton", -1.0).is_err());
        assert!(t.set("newton", f64::NAN).is_err());
    }
}
