//! Payoff functions shared by every solver: the proportional shard split, a
//! follower's net utility and the leader's objective.

use crate::error::{non_negative, same_len, GameError, Result};

use super::types::{AllocationMatrix, FollowerSpec, LeaderVariant, PaymentVector, ShardSpec};

/// Floor applied to shard totals inside the leader's logarithm.
pub const LN_FLOOR: f64 = 1e-12;

/// Share of `payment` earned by contributing `r` against `others_total`.
///
/// An empty shard (`r + others_total == 0`) pays nobody.
pub fn shard_payoff(r: f64, others_total: f64, payment: f64) -> Result<f64> {
    non_negative("contribution", r)?;
    non_negative("others_total", others_total)?;
    non_negative("payment", payment)?;
    Ok(split(r, others_total, payment))
}

#[inline]
pub(crate) fn split(r: f64, others_total: f64, payment: f64) -> f64 {
    let total = r + others_total;
    if total > 0.0 {
        r / total * payment
    } else {
        0.0
    }
}

/// Net utility of one follower's row given the opponents' per-shard totals.
///
/// Unchecked fast path used inside the solvers; lengths must agree.
pub fn row_utility(row: &[f64], others_totals: &[f64], payments: &[f64], unit_cost: f64) -> f64 {
    let mut reward = 0.0;
    let mut spent = 0.0;
    for ((&r, &t), &p) in row.iter().zip(others_totals).zip(payments) {
        reward += split(r, t, p);
        spent += r;
    }
    reward - unit_cost * spent
}

/// Analytic gradient of [`row_utility`] with respect to the follower's own
/// row: `P_m T_m / (r_m + T_m)² − C`.
///
/// At `r_m + T_m == 0` with `P_m > 0` the marginal value is unbounded and
/// the component is `+∞`.
pub fn row_gradient(row: &[f64], others_totals: &[f64], payments: &[f64], unit_cost: f64) -> Vec<f64> {
    row.iter()
        .zip(others_totals)
        .zip(payments)
        .map(|((&r, &t), &p)| {
            let total = r + t;
            if total > 0.0 {
                p * t / (total * total) - unit_cost
            } else if p > 0.0 {
                f64::INFINITY
            } else {
                -unit_cost
            }
        })
        .collect()
}

/// Net utility of follower `n`: proportional rewards over all shards minus
/// `C_n` times its total contribution.
pub fn follower_utility(
    n: usize,
    allocation: &AllocationMatrix,
    payments: &PaymentVector,
    specs: &[FollowerSpec],
) -> Result<f64> {
    if n >= allocation.followers() || n >= specs.len() {
        return Err(GameError::IndexOutOfRange {
            what: "follower",
            index: n,
            len: allocation.followers().min(specs.len()),
        });
    }
    same_len("payments", allocation.shards(), payments.len())?;
    let others = allocation.others_totals(n);
    Ok(row_utility(
        allocation.row(n),
        &others,
        payments.as_slice(),
        specs[n].unit_cost,
    ))
}

/// Leader objective evaluated on the shard totals of `allocation`.
pub fn leader_utility(
    allocation: &AllocationMatrix,
    payments: &PaymentVector,
    shards: &[ShardSpec],
    variant: LeaderVariant,
) -> Result<f64> {
    same_len("payments", shards.len(), payments.len())?;
    same_len("allocation shards", shards.len(), allocation.shards())?;
    Ok(leader_utility_from_totals(
        &allocation.shard_totals(),
        payments.as_slice(),
        shards,
        variant,
    ))
}

pub(crate) fn leader_utility_from_totals(
    totals: &[f64],
    payments: &[f64],
    shards: &[ShardSpec],
    variant: LeaderVariant,
) -> f64 {
    totals
        .iter()
        .zip(payments)
        .zip(shards)
        .map(|((&x, &p), s)| match variant {
            LeaderVariant::Log => s.alpha * x.max(LN_FLOOR).ln() - p,
            LeaderVariant::Linear => s.alpha * x - p,
        })
        .sum()
}
