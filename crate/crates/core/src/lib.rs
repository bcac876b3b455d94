//! Adaptive bin packing with overflow penalties under stochastic item sizes.
//!
//! Items arrive in order with known size laws. A policy places each item
//! into an open bin or a fresh one before seeing its size. Each bin costs 1
//! and each overflowing bin costs an extra penalty `C`.
//!
//! The crate provides the online policies ([`policies`]), a seeded Monte
//! Carlo harness ([`engine`]), exact rational solvers ([`exact`]), a
//! discretization scheme with a level-vector DP ([`ptas`]), the threshold
//! MDP ([`mdp`]) and the named instance families ([`generators`]).

pub mod cli;
pub mod dist;
pub mod engine;
pub mod error;
pub mod exact;
pub mod generators;
pub mod instance;
pub mod mdp;
pub mod num;
pub mod policies;
pub mod ptas;

pub use dist::{Rng, Scalar, SizeDistribution};
pub use error::{Error, Result};
pub use instance::{CompiledInstance, Instance};
pub use num::{Gamma, Q};
