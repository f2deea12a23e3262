//! Followers' equilibrium at a fixed payment vector.
//!
//! Best-response dynamics sweep the followers in index order, each one
//! replacing its row with [`best_response`] against the current rows of the
//! others, until a full pass moves no coordinate by more than the
//! configured tolerance.
//!
//! Plain sweeps can orbit a repelling fixed point (asymmetric contests do
//! this). When the residual stops shrinking for [`STALL_SWEEPS`] passes the
//! update is relaxed to `r ← r + θ (BR(r) − r)`, halving `θ` each time down
//! to [`MIN_RELAXATION`]. Runs that contract never leave `θ = 1`.

mod verify;

pub use verify::{
    concavity_check, rosen_dsc_check, sample_interior_allocation, ConcavityReport, DscReport,
    DEGENERACY_TOL, HESSIAN_EIGEN_TOL,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{GameError, Result};
use crate::follower::{best_response, BestResponseInput};
use crate::game::{
    leader_utility_from_totals, row_utility, AllocationMatrix, EquilibriumResult, PaymentVector,
    ScenarioConfig,
};

/// Passes without a new smallest residual before the step is halved.
pub const STALL_SWEEPS: usize = 8;
/// Smallest relaxation factor used by the safeguard.
pub const MIN_RELAXATION: f64 = 1.0 / 64.0;

/// Starting profile for the dynamics.
#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    /// `r_n^m = R_n / (2M)`.
    Uniform,
    Given(AllocationMatrix),
}

/// Run best-response dynamics to a fixed point or until `max_sweeps`.
///
/// Exhausting the sweep budget is not an error: the result comes back with
/// `converged == false`.
pub fn solve_followers_equilibrium(
    config: &ScenarioConfig,
    payments: &PaymentVector,
    init: Init,
) -> Result<EquilibriumResult> {
    run(config, payments, init, None)
}

/// Like [`solve_followers_equilibrium`], also returning the profile after
/// every pass. The first entry is the starting profile.
pub fn solve_with_trajectory(
    config: &ScenarioConfig,
    payments: &PaymentVector,
    init: Init,
) -> Result<(EquilibriumResult, Vec<AllocationMatrix>)> {
    let mut trajectory = Vec::new();
    let result = run(config, payments, init, Some(&mut trajectory))?;
    Ok((result, trajectory))
}

fn run(
    config: &ScenarioConfig,
    payments: &PaymentVector,
    init: Init,
    mut trajectory: Option<&mut Vec<AllocationMatrix>>,
) -> Result<EquilibriumResult> {
    config.validate()?;
    config.check_payments(payments)?;
    let n_followers = config.num_followers();
    let n_shards = config.num_shards();
    let mut alloc = match init {
        Init::Uniform => AllocationMatrix::uniform(&config.followers, n_shards),
        Init::Given(a) => {
            a.check_shape(n_followers, n_shards)?;
            a.check_feasible(&config.followers)?;
            a
        }
    };
    if let Some(t) = trajectory.as_deref_mut() {
        t.push(alloc.clone());
    }

    let mut moving_sweeps = 0;
    let mut residual = f64::INFINITY;
    let mut converged = false;
    let mut theta = 1.0;
    let mut best = f64::INFINITY;
    let mut stalled = 0;
    for _ in 0..config.max_sweeps {
        residual = 0.0;
        for (n, spec) in config.followers.iter().enumerate() {
            let input = BestResponseInput {
                payments: payments.clone(),
                opponents_totals: alloc.others_totals(n),
                unit_cost: spec.unit_cost,
                capacity: spec.capacity,
                epsilon_grain: config.epsilon_grain,
            };
            let target = best_response(&input)?.allocation;
            let row: Vec<f64> = target
                .iter()
                .zip(alloc.row(n))
                .map(|(&t, &old)| {
                    residual = f64::max(residual, (t - old).abs());
                    if theta == 1.0 {
                        t
                    } else {
                        old + theta * (t - old)
                    }
                })
                .collect();
            alloc.set_row(n, &row);
        }
        if let Some(t) = trajectory.as_deref_mut() {
            t.push(alloc.clone());
        }
        if residual <= config.br_tolerance {
            converged = true;
            break;
        }
        moving_sweeps += 1;
        if residual < best {
            best = residual;
            stalled = 0;
        } else {
            stalled += 1;
            if stalled >= STALL_SWEEPS && theta > MIN_RELAXATION {
                theta = f64::max(theta * 0.5, MIN_RELAXATION);
                best = residual;
                stalled = 0;
            }
        }
    }

    Ok(summarize(config, payments, alloc, moving_sweeps, converged, residual))
}

pub(crate) fn summarize(
    config: &ScenarioConfig,
    payments: &PaymentVector,
    allocation: AllocationMatrix,
    sweeps: usize,
    converged: bool,
    residual: f64,
) -> EquilibriumResult {
    let follower_utilities = (0..config.num_followers())
        .map(|n| {
            row_utility(
                allocation.row(n),
                &allocation.others_totals(n),
                payments.as_slice(),
                config.followers[n].unit_cost,
            )
        })
        .collect();
    let leader_utility = leader_utility_from_totals(
        &allocation.shard_totals(),
        payments.as_slice(),
        &config.shards,
        config.leader_variant,
    );
    EquilibriumResult {
        allocation,
        sweeps,
        converged,
        residual,
        follower_utilities,
        leader_utility,
    }
}

/// Random feasible profile: each row spends a uniform fraction of its
/// capacity, split by uniform weights.
pub fn random_feasible_allocation<R: Rng>(config: &ScenarioConfig, rng: &mut R) -> AllocationMatrix {
    let m = config.num_shards();
    let mut alloc = AllocationMatrix::zeros(config.num_followers(), m);
    for (n, f) in config.followers.iter().enumerate() {
        let weights: Vec<f64> = (0..m).map(|_| rng.random::<f64>() + 1e-3).collect();
        let spend = f.capacity * rng.random::<f64>() / weights.iter().sum::<f64>();
        let row: Vec<f64> = weights.iter().map(|w| w * spend).collect();
        alloc.set_row(n, &row);
    }
    alloc
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniquenessReport {
    /// Largest coordinatewise distance between any two converged profiles.
    pub max_deviation: f64,
    pub runs: usize,
    pub non_converged: usize,
}

/// Re-solve from `num_seeds` random starting profiles and measure how far
/// apart the converged equilibria are.
pub fn uniqueness_probe(
    config: &ScenarioConfig,
    payments: &PaymentVector,
    num_seeds: usize,
) -> Result<UniquenessReport> {
    if num_seeds < 2 {
        return Err(GameError::InvalidConfig(
            "uniqueness probe needs at least two seeds".into(),
        ));
    }
    let results: Vec<EquilibriumResult> = (0..num_seeds)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
            rng.set_stream(k as u64);
            let start = random_feasible_allocation(config, &mut rng);
            solve_followers_equilibrium(config, payments, Init::Given(start))
        })
        .collect::<Result<_>>()?;
    let converged: Vec<&AllocationMatrix> = results
        .iter()
        .filter(|r| r.converged)
        .map(|r| &r.allocation)
        .collect();
    let mut max_deviation: f64 = 0.0;
    for (i, a) in converged.iter().enumerate() {
        for b in &converged[i + 1..] {
            max_deviation = max_deviation.max(a.max_abs_diff(b));
        }
    }
    Ok(UniquenessReport {
        max_deviation,
        runs: num_seeds,
        non_converged: num_seeds - converged.len(),
    })
}
