//! Special functions: gamma and the modified Bessel function `I_ν(z)`.

mod bessel;
mod gamma;

pub use bessel::{
    bessel_i, bessel_i_eval, bessel_i_negligible_order, magnitude_bound, BesselEval, MAX_ARGUMENT,
};
pub(crate) use bessel::eval_unchecked;
pub use gamma::{gamma, ln_gamma};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpecfunError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("argument modulus {argument} exceeds supported bound {bound}")]
    Range { argument: f64, bound: f64 },
    #[error("estimated error {estimate:e} exceeds tolerance {tol:e}")]
    Precision { estimate: f64, tol: f64 },
}
