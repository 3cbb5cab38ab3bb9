//! Sum-capacity loss between dirty paper coding (DPC) and linear precoding
//! (zero-forcing and block diagonalization) in heterogeneous Ricean
//! multiuser MIMO broadcast channels.
//!
//! The crate provides both routes to the expected loss:
//!
//! * Monte Carlo: draw channels ([`channel`]), build precoders
//!   ([`precoding`]), evaluate exact and affine capacities ([`capacity`]),
//!   and average over trials ([`harness`]).
//! * Closed form: non-central Wishart log-determinants and the shifted
//!   central-Wishart gain approximation ([`analytic`], built on
//!   [`special`]).
//!
//! [`weighted`] covers weighted sum-capacity maximization for single-antenna
//! users.
//!
//! All capacities are in bits/s/Hz. Trials run on rayon when the `parallel`
//! feature is enabled (default); results do not depend on the worker count.

// NaN-rejecting `!(x > 0.0)` guards are deliberate; tabulated coefficients keep full digits.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod analytic;
pub mod capacity;
pub mod channel;
mod error;
pub mod experiments;
pub mod harness;
pub mod linalg;
mod parallel;
pub mod precoding;
pub mod report;
pub mod special;
pub mod weighted;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Dense complex matrix used throughout the crate.
pub type CMatrix = nalgebra::DMatrix<Complex64>;
/// Dense real matrix.
pub type RMatrix = nalgebra::DMatrix<f64>;
