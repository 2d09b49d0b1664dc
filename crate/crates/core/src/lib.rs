//! Rank-based design engine for randomized controlled trials.
//!
//! The crate covers three layers:
//!
//! - closed-form sample sizes for individual and cluster trials with
//!   continuous, ordinal or binary outcomes, driven by the proportional-odds
//!   log odds ratio and the rank intraclass correlation ([`design`]);
//! - the rank statistics those designs are analysed with ([`rank`], [`score`]);
//! - a seeded Monte-Carlo engine that checks the designs by simulation
//!   ([`sim`]).
//!
//! Scalar special functions (normal and bivariate normal distribution
//! functions, quantiles, the orthant kernel) live in [`stats`]; effect-size
//! conversions in [`effects`].

pub mod design;
pub mod effects;
pub mod error;
pub mod rank;
pub mod score;
pub mod sim;
pub mod stats;
pub mod sweep;

pub use error::{Error, Result};
