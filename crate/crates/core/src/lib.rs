//! Simulation of long-range daily return series via a randomized
//! low-frequency volatility decomposition, a GARCH(1,1) baseline, and a
//! Monte-Carlo verification harness that scores any return generator
//! against eleven quantified stylized facts.

pub mod error;
pub mod fft;
pub mod garch;
pub mod harness;
pub mod kuiper;
pub mod model;
pub mod multiscale;
pub mod numeric;
pub mod optim;
pub mod returns;
pub mod seeding;
pub mod series;
pub mod stats;
pub mod volmodel;

pub use error::{Error, Result};
