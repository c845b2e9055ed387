//! Expected signatures and hyperbolic developments of Brownian motion stopped
//! on exiting a domain: tensor algebra, path signatures, developments into
//! hyperbolic space, Monte-Carlo and PDE estimators, and certified checks of
//! the Bessel-series blow-up bounds.

pub mod bessel;
pub mod config;
pub mod development;
pub mod domain;
pub mod error;
pub mod interval;
pub mod pde;
pub mod rng;
pub mod signature;
pub mod stopped_bm;
pub mod tensor;
pub mod verify;

pub use error::{Error, Result};
