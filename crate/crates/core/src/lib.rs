//! Average age of information (AAoI) of update systems under packet-drop
//! policies.
//!
//! The crate covers a single source with drop-new, drop-old, threshold and
//! stationary randomized policies ([`analytic`], [`sim`]), several sources
//! sharing a carrier-sensed channel without storage ([`multisource`]), and
//! saturated sources with one storage contending over Rayleigh channels
//! ([`csma_game`]).

pub mod analytic;
pub mod csma_game;
pub mod distributions;
pub mod error;
pub mod estimate;
pub mod multisource;
pub mod optimize;
pub mod rng;
pub mod sim;

pub use distributions::{Family, Moments, Side, TransferDistribution};
pub use error::{AoiError, Result};
pub use estimate::AaoiEstimate;
