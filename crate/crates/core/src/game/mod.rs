//! Domain types and payoff functions of the shard-incentive game.

mod types;
mod utility;

pub use types::{
    AllocationMatrix, EquilibriumResult, FollowerSpec, LeaderVariant, PaymentVector,
    ScenarioConfig, ShardSpec, DEFAULT_EPSILON_GRAIN, DEFAULT_MAX_SWEEPS,
    DEFAULT_PAYMENT_GRID_MAX, FEASIBILITY_REL_TOL,
};
pub use utility::{
    follower_utility, leader_utility, row_gradient, row_utility, shard_payoff, LN_FLOOR,
};

pub(crate) use utility::leader_utility_from_totals;
