//! Stark-modulated photon echoes for transitions with a hybrid electric and
//! magnetic dipole moment.
//!
//! The crate simulates the pi/2 - tau - pi echo sequence for an ensemble of
//! two-level atoms split over two inversion-related sub-sites, applies an
//! electric-field pulse during the first free interval, and records the echo
//! in two orthogonal detection polarizations. Modulation traces (echo versus
//! field on-time or voltage) can then be fitted to extract the Stark
//! coefficient, visibility, phase and decay.
//!
//! Module map:
//!
//! - [`moments`]: sub-site combined moments and complex Rabi frequencies
//! - [`dynamics`]: exact pulse/free propagators and an RK4 reference integrator
//! - [`echo`]: ensemble echo engine and polarized detection
//! - [`scan`]: on-time / voltage sweeps, modulation metrics, Zeeman-branch arithmetic
//! - [`fit`]: damped least-squares fit of the modulation model
//! - [`io`]: run configuration, CSV traces, key/value records
//! - [`pipeline`]: the end-to-end operations behind the `stark-echo` binary

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod echo;
pub mod error;
pub mod fit;
pub mod io;
pub mod moments;
pub mod pipeline;
pub mod scan;
pub mod units;

pub use error::{Error, Result};
