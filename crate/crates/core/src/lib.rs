// NaN must fail validation, so `!(x > 0.0)` is deliberate throughout
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bessel;
pub mod checks;
pub mod diffusive;
pub mod fit;
pub mod linalg;
pub mod spectrum;
pub mod params;
pub mod pde;
pub mod quadrature;
pub mod resolvent;
pub mod special;

pub use params::{ModelParams, ParamError};
