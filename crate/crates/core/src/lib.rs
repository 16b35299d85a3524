//! Online scheduling of ring-all-reduce training jobs on a datacenter
//! cluster: per-slot ring embedding through LP relaxation and randomized
//! rounding, a temporally greedy outer loop, baseline policies and an
//! experiment harness.

pub mod baselines;
pub mod gvne;
pub mod harness;
pub mod lp;
pub mod model;
pub mod rartime;
pub mod scheduler;
