//! Coordinated regularized zero-forcing for multicell multiuser MISO
//! downlinks: closed-form expected-SINR approximations, limited-feedback
//! bit allocation and a Monte Carlo engine that checks them.

pub mod analytics;
pub mod bits;
pub mod cell;
pub(crate) mod dd;
pub mod error;
pub mod oracle;
pub mod precoding;
pub mod rvq;
pub mod sim;
pub mod special;

pub use error::{Error, Result};

pub type C64 = num_complex::Complex64;
