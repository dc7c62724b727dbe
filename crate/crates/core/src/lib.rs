//! Desk-scale simulation and analysis of scanning NV magnetometry over thin
//! superconducting discs.
//!
//! The chain runs from the stray-field forward model ([`field`]) through NV
//! projection and pulsed-ODMR spectrum synthesis ([`sensor`]), per-pixel
//! double-Gaussian fitting ([`fitting`]) and map reconstruction ([`scan`]) to
//! critical-temperature and critical-current analysis ([`thermal`]).

// NaN-rejecting range checks read most clearly as negations.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod demo;
pub mod error;
pub mod field;
pub mod fitting;
pub mod formats;
pub mod linescan;
pub mod lm;
pub mod quadrature;
pub mod rng;
pub mod scan;
pub mod sensor;
pub mod special;
pub mod thermal;

pub use error::{Error, ErrorKind, Result};
