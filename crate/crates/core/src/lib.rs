//! Simulation and analysis of pulse-width mismatch between the signal and a
//! locally generated local oscillator in Gaussian-modulated CV-QKD.
//!
//! A width mismatch makes Bob's homodyne detector project the signal onto
//! the LO mode with overlap `γ < 1`. Parties unaware of it underestimate both
//! the transmittance and the excess noise, which can hide an
//! intercept-resend attack and inflate the computed secret key rate.
//!
//! - [`physics`]: temporal modes and the overlap coefficient.
//! - [`channel_sim`]: seeded Monte Carlo quadrature data, detector mismatch,
//!   attack models.
//! - [`estimation`]: ML and naive channel estimators, finite-size bounds,
//!   closed-form bias.
//! - [`keyrate`]: finite-size key rate via symplectic eigenvalues.
//! - [`countermeasure`]: tap-and-measure width monitoring with LO correction.
//! - [`cli`]: configuration, figure sweeps and CSV output behind the binary.

// `!(x > 0.0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel_sim;
pub mod cli;
pub mod countermeasure;
pub mod error;
pub mod estimation;
pub mod keyrate;
pub mod physics;
pub mod rng;
pub mod special;

pub use error::{Error, Result};
pub use physics::{OverlapCoefficient, PulseSpec};
