//! Error type shared by every module of the engine.

use num_complex::Complex;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A matrix inverse failed outright or its conditioning exceeded the limit.
    #[error("singular matrix: {0}")]
    SingularMatrix(String),

    /// Determinant interpolation produced non-finite samples.
    #[error("interpolation grid produced non-finite determinant samples")]
    InterpolationIllConditioned,

    /// The QR eigenvalue iteration did not converge, even after shifts.
    #[error("eigenvalue iteration failed to converge")]
    EigFailure,

    /// The damped Newton solve for the trailing row of the normal form failed.
    #[error("trailing-row Newton iteration diverged (best residual {best:.3e})")]
    NewtonDiverged { best: f64 },

    /// The structure matrix kernel does not have the expected dimension.
    #[error("kernel dimension {found}, expected {expected}")]
    KernelDimensionMismatch { found: usize, expected: usize },

    /// The kernel combination G = sum g_i V_i is not invertible.
    #[error("kernel combination produced a singular G")]
    SingularG,

    /// A named factor required by the block assembly is not invertible.
    #[error("singular factor in block assembly: {0}")]
    SingularBlock(String),

    /// A witness identity failed at the stated tolerance.
    #[error("witness relation {relation} residual {residual:.3e} exceeds tolerance")]
    WitnessMismatch { relation: &'static str, residual: f64 },

    /// Zero clusters of det A(x) could not be separated reliably.
    #[error("root clusters of det A are too close to separate reliably")]
    RootClusterAmbiguous,

    /// A named factor required by an evolution step is not invertible.
    #[error("singular factor in evolution step: {0}")]
    SingularFactor(String),

    /// The conserved commutation relation drifted past tolerance.
    #[error("commutation relation residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    CommutationDrift { residual: f64, tol: f64 },

    /// One of the deformation kernel identities failed.
    #[error("kernel identity {name} residual {residual:.3e} exceeds tolerance")]
    KernelIdentityViolated { name: &'static str, residual: f64 },

    /// A sample or path point came too close to a pole or excluded point.
    #[error("sample point {x} too close to a pole or excluded point")]
    PoleProximity { x: Complex<f64> },

    /// An integration stage produced non-finite entries.
    #[error("singular encounter during integration: {0}")]
    SingularEncounter(String),

    /// A balance relation between the multiplicative parameters failed.
    #[error("Fuchs relation residual {0:.3e} exceeds tolerance")]
    FuchsViolation(f64),

    /// Parameter values violate a structural precondition.
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
}

pub type Result<T> = std::result::Result<T, Error>;
