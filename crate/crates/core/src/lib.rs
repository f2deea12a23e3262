//! Solver for a single-leader, multi-follower Stackelberg game over
//! blockchain shards.
//!
//! Followers split a compute budget across shards; each shard pays a fixed
//! prize in proportion to contributed resources. The leader picks the
//! per-shard prizes. The crate provides:
//!
//! - [`game`]: domain types and the payoff functions,
//! - [`follower`]: a follower's best response by water-filling, with a
//!   projected-gradient cross-check,
//! - [`equilibrium`]: Gauss-Seidel best-response dynamics and numerical
//!   concavity / uniqueness diagnostics,
//! - [`leader`]: integer payment search and closed-form contest benchmarks,
//! - [`payout`]: a Monte-Carlo pay-per-share payout simulator.

pub mod equilibrium;
pub mod error;
pub mod follower;
pub mod game;
pub mod leader;
pub mod numdiff;
pub mod payout;

pub use error::{GameError, Result};
pub use game::{
    AllocationMatrix, EquilibriumResult, FollowerSpec, LeaderVariant, PaymentVector,
    ScenarioConfig, ShardSpec,
};
