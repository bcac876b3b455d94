//! Approximation scheme for the offline sequential problem with resource
//! augmentation.
//!
//! Item laws are normalized to unit capacity, clamped at `1 + ε`, and
//! discretized in two steps. The level-vector DP finds the optimal policy
//! for the discretized items in bins of size `1 + 4ε`, and the tracker runs
//! that policy on the original items in bins of size `1 + 6ε`.

pub mod discretize;
pub mod dp;
pub mod track;

pub use discretize::{
    discretize, discretize_instance, discretize_step1, eps_in_range, normalize, round_up, DiscretizationParams,
};
pub use dp::{ptas_dp, ptas_dp_at, LevelVector, PtasAction, PtasSolution, PtasTable};
pub use track::{track_execute, track_monte_carlo, CoupledDraw, CoupledLaw, SourceStats, TrackRecord, TrackStats, Tracker};
