//! Numerical engine for a rank-2m Fuchsian linear q-difference system, the
//! nonlinear flow induced by its connection-preserving deformation, and the
//! continuous limit to a matrix analogue of the sixth Painlevé equation.

pub mod assemble;
pub mod error;
pub mod flow;
pub mod limit;
pub mod mat;
pub mod params;
pub mod accessory;
pub mod poly;
pub mod pvi;
pub mod sample;
pub mod smith;
pub mod spectral;
pub mod tol;

pub use error::{Error, Result};
pub use mat::{CMatrix, CVector, C64};
