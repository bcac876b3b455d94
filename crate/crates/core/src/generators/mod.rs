//! Instance constructions: the named families and the CNF reduction.

pub mod cnf;
pub mod named;
pub mod reduction;

pub use cnf::{count_sat_bruteforce, symmetrize_2cnf, Cnf};
pub use named::{gen_named, GenParams};
pub use reduction::{reduction_instance, reduction_value, reduction_value_corrected, ReductionArtifacts, Role};
