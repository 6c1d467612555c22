// `!(x > 0.0)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod config;
pub mod error;
pub mod evolution;
pub mod linearized;
pub mod ode;
pub mod quad;
pub mod soliton;
pub mod spectral;
pub mod trajectory;

pub use error::{Error, Result};
pub use spectral::{Basis, BasisSpec, BasisTable, QuadratureRule, SpectralField};
