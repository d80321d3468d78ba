//! Special functions and quadrature used by the clutter kernels.

mod bessel;
mod gamma;
mod quadrature;

pub use bessel::{log_bessel_k, log_bessel_k_integral, log_bessel_k_ratio_down};
pub(crate) use bessel::log_k_and_ratio;
pub use gamma::{digamma, log_gamma};
pub(crate) use gamma::{digamma_unchecked, ln_gamma_unchecked};
pub use quadrature::{
    expectation_halfline, integrate_halfline, integrate_interval, log_integrate_halfline,
    log_integrate_interval, Quadrature, QuadratureSpec, LOG_WINDOW,
};
