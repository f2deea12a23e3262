//! Leader stage: choose per-shard payments anticipating the followers'
//! equilibrium.
//!
//! [`search_payments`] hill-climbs on the integer payment grid, starting
//! from one token per shard and raising one coordinate at a time while the
//! leader's utility improves. [`tullock_equilibrium`] and
//! [`interior_benchmark`] are closed-form contest results used to
//! cross-check the numerical solvers when capacities are slack.

use crate::equilibrium::{solve_followers_equilibrium, Init};
use crate::error::{positive, GameError, Result};
use crate::game::{
    AllocationMatrix, EquilibriumResult, FollowerSpec, LeaderVariant, PaymentVector,
    ScenarioConfig, ShardSpec,
};

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub payments: PaymentVector,
    pub leader_utility: f64,
    pub converged: bool,
    pub equilibrium: EquilibriumResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeaderSearchResult {
    pub best_payments: PaymentVector,
    pub best_utility: f64,
    pub equilibrium: EquilibriumResult,
    /// Every evaluated payment vector, in evaluation order.
    pub trace: Vec<TraceEntry>,
}

/// Integer coordinate ascent over payment vectors.
///
/// Starts at `P = (1, …, 1)`. Each pass visits the shards in index order
/// and keeps `P_m + 1` when it strictly improves the leader's utility at
/// the followers' equilibrium (ties keep the smaller vector). The search
/// stops after a pass without improvement or once an accepted coordinate
/// hits `payment_grid_max`. Payment vectors whose inner dynamics do not
/// converge are recorded in the trace and never accepted.
pub fn search_payments(config: &ScenarioConfig) -> Result<LeaderSearchResult> {
    config.validate()?;
    let shards = config.num_shards();
    if (config.payment_grid_max as usize) < shards {
        return Err(GameError::InvalidConfig(format!(
            "payment_grid_max ({}) must be at least the shard count ({shards})",
            config.payment_grid_max
        )));
    }
    let grid_max = f64::from(config.payment_grid_max);
    let mut trace = Vec::new();
    let mut evaluate = |p: &[f64]| -> Result<(usize, f64, bool)> {
        let payments = PaymentVector::new(p.to_vec())?;
        let eq = solve_followers_equilibrium(config, &payments, Init::Uniform)?;
        let out = (trace.len(), eq.leader_utility, eq.converged);
        trace.push(TraceEntry {
            payments,
            leader_utility: eq.leader_utility,
            converged: eq.converged,
            equilibrium: eq,
        });
        Ok(out)
    };

    let mut current = vec![1.0; shards];
    let (i0, u0, ok0) = evaluate(&current)?;
    // An unconverged start can still be replaced by any converged neighbour.
    let mut best: Option<(usize, f64)> = ok0.then_some((i0, u0));
    let mut at_bound = current.iter().any(|&p| p >= grid_max);
    while !at_bound {
        let mut improved = false;
        for m in 0..shards {
            let mut candidate = current.clone();
            candidate[m] += 1.0;
            let (i, u, ok) = evaluate(&candidate)?;
            if ok && best.is_none_or(|(_, b)| u > b) {
                best = Some((i, u));
                current = candidate;
                improved = true;
                if current[m] >= grid_max {
                    at_bound = true;
                    break;
                }
            }
        }
        if !improved {
            break;
        }
    }

    let (idx, best_utility) = best.ok_or_else(|| {
        GameError::Numerical("no evaluated payment vector reached a converged equilibrium".into())
    })?;
    let winner = &trace[idx];
    Ok(LeaderSearchResult {
        best_payments: winner.payments.clone(),
        best_utility,
        equilibrium: winner.equilibrium.clone(),
        trace,
    })
}

/// Uncapacitated equilibrium of a single proportional contest.
#[derive(Debug, Clone, PartialEq)]
pub struct ContestEquilibrium {
    /// Contribution per follower, in the input order.
    pub contributions: Vec<f64>,
    /// Sum of contributions, `X`.
    pub total: f64,
    /// Indices of followers contributing a positive amount.
    pub active: Vec<usize>,
}

/// Closed-form equilibrium of a proportional contest with linear costs and
/// no capacity limits.
///
/// The active set is the longest prefix of followers sorted by cost for
/// which the marginal entrant still profits; with `k` active players the
/// total is `X = (k − 1) P / Σ_active c_i` and each active follower puts in
/// `X (1 − c_i X / P)`.
pub fn tullock_equilibrium(payment: f64, unit_costs: &[f64]) -> Result<ContestEquilibrium> {
    if unit_costs.len() < 2 {
        return Err(GameError::NotApplicable(
            "a contest needs at least two followers".into(),
        ));
    }
    positive("payment", payment)?;
    for &c in unit_costs {
        positive("unit_cost", c)?;
    }
    let mut order: Vec<usize> = (0..unit_costs.len()).collect();
    order.sort_by(|&a, &b| unit_costs[a].total_cmp(&unit_costs[b]).then(a.cmp(&b)));

    // The two cheapest followers are always active.
    let mut k = 2;
    let mut cost_sum = unit_costs[order[0]] + unit_costs[order[1]];
    while k < order.len() {
        let c = unit_costs[order[k]];
        let sum = cost_sum + c;
        let total = k as f64 * payment / sum;
        if c < payment / total {
            cost_sum = sum;
            k += 1;
        } else {
            break;
        }
    }
    let total = (k - 1) as f64 * payment / cost_sum;
    let mut contributions = vec![0.0; unit_costs.len()];
    let mut active: Vec<usize> = order[..k].to_vec();
    active.sort_unstable();
    for &i in &active {
        contributions[i] = (total * (1.0 - unit_costs[i] * total / payment)).max(0.0);
    }
    Ok(ContestEquilibrium {
        contributions,
        total,
        active,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct InteriorBenchmark {
    /// `P_m = α_m`.
    pub payments: PaymentVector,
    /// Predicted shard totals at those payments.
    pub totals: Vec<f64>,
    /// Predicted follower strategies at those payments.
    pub allocation: AllocationMatrix,
}

/// Analytic leader optimum for the log objective when no capacity binds.
///
/// Each shard is then an independent contest whose total is proportional
/// to its prize, so the leader maximises `α_m ln P_m − P_m` separately per
/// shard and picks `P_m = α_m`. Returns [`GameError::NotApplicable`] when
/// some follower's predicted spend exceeds its capacity.
pub fn interior_benchmark(
    shards: &[ShardSpec],
    followers: &[FollowerSpec],
) -> Result<InteriorBenchmark> {
    let costs: Vec<f64> = followers.iter().map(|f| f.unit_cost).collect();
    let mut rows = vec![vec![0.0; shards.len()]; followers.len()];
    let mut totals = Vec::with_capacity(shards.len());
    for (m, shard) in shards.iter().enumerate() {
        let contest = tullock_equilibrium(shard.alpha, &costs)?;
        for (row, r) in rows.iter_mut().zip(&contest.contributions) {
            row[m] = *r;
        }
        totals.push(contest.total);
    }
    for (f, row) in followers.iter().zip(&rows) {
        let spend: f64 = row.iter().sum();
        if spend > f.capacity {
            return Err(GameError::NotApplicable(format!(
                "follower {:?} would spend {spend} > capacity {} at P = α",
                f.id, f.capacity
            )));
        }
    }
    Ok(InteriorBenchmark {
        payments: PaymentVector::new(shards.iter().map(|s| s.alpha).collect())?,
        totals,
        allocation: AllocationMatrix::from_rows(rows)?,
    })
}

/// Leader utility of the interior benchmark under `variant`.
pub fn benchmark_utility(bench: &InteriorBenchmark, shards: &[ShardSpec], variant: LeaderVariant) -> f64 {
    crate::game::leader_utility_from_totals(&bench.totals, bench.payments.as_slice(), shards, variant)
}
