//! Interval Markov chain abstractions of stochastic linear periodic
//! event-triggered control loops, with certified bounds on expected
//! discounted rewards and an exact-sampling Monte Carlo check.

pub mod abstraction;
pub mod cli;
pub mod config;
pub mod error;
pub mod expm;
pub mod gaussint;
pub mod geometry;
pub mod imc;
pub mod meanopt;
pub mod model;
pub mod moments;
pub mod sim;

pub use error::{Error, Result};
