//! Direction-of-departure / direction-of-arrival estimation for MIMO radar in
//! compound-Gaussian clutter.

pub mod clutter;
pub mod crb;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod model;
pub mod specfun;

pub use error::{Error, Result};
