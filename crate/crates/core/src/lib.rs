//! Censored representation learning: autoencoders trained against an
//! adversary that tries to recover a binary protected attribute from the
//! latent code.
//!
//! The building blocks are small dense networks ([`nn`]), Adam ([`optim`]),
//! the dampening arithmetic ([`fairness`]), the trainers ([`training`]) and
//! post-hoc probes ([`eval`]). [`experiment`] ties them to config files and
//! run directories.

pub mod data;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod fairness;
pub mod nn;
pub mod optim;
pub mod par;
pub mod rng;
pub mod training;

pub use error::{Error, Result};
