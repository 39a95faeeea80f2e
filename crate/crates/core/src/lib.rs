//! Leader-follower formation control in the plane.
//!
//! Agents are single integrators `q̇ = u` stepped with forward Euler. The
//! leader is attracted to a target while followers track their desired
//! offsets through neighbor-only consensus feedback. Obstacles and other
//! agents repel through an artificial potential field, and a bounded random
//! kick is injected when an agent is caught in a local minimum of that field.
//!
//! Modules, bottom up:
//! - [`topology`]: interaction graph and neighbor sets.
//! - [`potential`]: attraction, repulsion, local-minimum detection and escape.
//! - [`control`]: consensus, leader/follower and rigidity-gradient laws.
//! - [`simulation`]: the step loop and trajectory log.
//! - [`analysis`]: distance errors, Lyapunov energy, rigidity matrix, safety metrics.
//! - [`scenarios`]: built-in experiments, scenario files, exports.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod control;
pub mod geometry;
pub mod potential;
pub mod scenarios;
pub mod simulation;
pub mod topology;

pub use geometry::Vec2;
