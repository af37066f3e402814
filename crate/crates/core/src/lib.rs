//! Desk-scale laboratory for QKD attack models.
//!
//! Each module turns one family of attacks or key-rate formulas into
//! something that can be evaluated in closed form and checked by Monte
//! Carlo:
//!
//! - [`qubit`]: two-level states, BB84 and Breidbart bases, Born-rule
//!   measurement, and a brute-force optimizer for discrimination with a
//!   deletion budget.
//! - [`cv`]: Gaussian quadrature channel under passive tapping and
//!   heterodyne-resend, reconciliation comparisons, excess-noise detection.
//! - [`bb84`]: single-photon BB84 sessions with partial Breidbart
//!   intercept-resend and probabilistic-resend deletion.
//! - [`decoy`]: attenuated-laser sources, PNS and coherent beam splitting,
//!   decoy yield checking, level discrimination.
//! - [`key_rate`]: key-rate, leakage and sampling-bound formulas.
//! - [`harness`]: seeded, thread-count-independent scenario runner and
//!   report emission.

pub mod bb84;
pub mod cv;
pub mod decoy;
pub mod error;
pub mod harness;
pub mod key_rate;
pub mod qubit;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use rng::{RngStream, TrialStreams};
