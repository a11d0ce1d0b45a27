//! Simulation and learning toolkit for hidden-action principal-agent problems.
//!
//! A principal repeatedly offers a payment scheme (a *contract*: one
//! non-negative payment per observable outcome) to an agent who privately
//! picks the action maximizing expected payment minus cost. The principal
//! sees only the realized outcome of each round. This crate provides:
//!
//! - an exact environment simulator ([`environment`]) with best-response
//!   agents, seeded sampling, and a round trace;
//! - the discover-and-cover learner ([`driver`]), which partitions contract
//!   space into regions of constant (indistinguishable) agent behaviour using
//!   only outcome frequencies, then optimizes a linear program per region and
//!   blends the winner toward the reward vector for robustness;
//! - a reference exact solver ([`oracle_ref`]) used to audit learned
//!   contracts against the true optimum;
//! - an explore-then-commit regret harness ([`regret`]);
//! - instance generators ([`instgen`]) including a hardness family with a
//!   known closed-form optimum.
//!
//! Geometry ([`geometry`]) and linear programming ([`lp`]) are implemented
//! from first principles (combinatorial vertex enumeration, two-phase
//! simplex with Bland's rule) so that every pivot and tolerance is pinned
//! and deterministic.

pub mod action_oracle;
pub mod driver;
pub mod environment;
pub mod error;
pub mod find_contract;
pub mod find_hs;
pub mod geometry;
pub mod instgen;
pub mod lp;
pub mod model;
pub mod oracle_ref;
pub mod regret;
pub mod try_cover;

pub use error::Error;
