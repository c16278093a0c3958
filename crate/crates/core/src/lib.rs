//! Multicell massive MIMO downlink: exact (Monte Carlo) and asymptotic
//! (deterministic-equivalent) per-user SINR under MRT, ZF and RZF precoding
//! with vector or matrix power normalization.

pub mod channel;
pub mod closed_form;
pub mod det_equiv;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod montecarlo;
pub mod precoder;
pub mod rng;
pub mod scenario;
pub mod sinr;

pub use error::{Error, Result};
