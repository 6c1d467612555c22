//! Radial oscillator eigenbasis, quadrature and elementary field operators.

pub mod basis;
pub mod field;
pub mod quadrature;

pub use basis::{basis_derivative_rows, basis_row, build_basis, Basis, BasisSpec, BasisTable};
pub use field::{
    analyze, apply_dilation_real, apply_y2_real, cubic, interpolation_cutoff, norm_hxr_pair, norm_hxr_real, synthesize,
    SpectralField,
};
pub use quadrature::{gauss_laguerre, planar_rule, QuadratureRule};
