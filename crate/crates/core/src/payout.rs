//! Monte-Carlo pay-per-share payouts.
//!
//! Each round, every follower submits a Poisson number of work shares to
//! each shard with mean `κ · r_n^m`. The shard's prize for that round is
//! split in proportion to the shares submitted. Averaged over many rounds
//! the payout should approach the proportional split `r/(r + T) · P`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use crate::error::{positive, same_len, GameError, Result};
use crate::game::{AllocationMatrix, PaymentVector};

pub const DEFAULT_SHARES_PER_UNIT: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ShareSampling {
    /// Poisson-distributed share counts.
    #[default]
    Poisson,
    /// Use the mean share counts `κ r` directly; removes all noise.
    Expected,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PayoutEntry {
    /// Proportional split of the prize given the contributions.
    pub expected_tokens: f64,
    /// Mean payout per paid round.
    pub simulated_tokens: f64,
    /// Shares submitted over all rounds.
    pub shares_observed: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PayoutLedger {
    pub followers: usize,
    pub shards: usize,
    /// Row-major `(follower, shard)`.
    pub entries: Vec<PayoutEntry>,
    /// Rounds in which each shard received at least one share.
    pub paid_rounds: Vec<u64>,
    pub rounds: u64,
    /// Largest `|Σ_n payout − P_m|` over all paid rounds and shards.
    pub max_conservation_error: f64,
}

impl PayoutLedger {
    pub fn entry(&self, n: usize, m: usize) -> &PayoutEntry {
        &self.entries[n * self.shards + m]
    }

    pub fn max_relative_error(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| e.relative_error)
            .fold(0.0, f64::max)
    }
}

/// One round's per-`(follower, shard)` payouts, the per-shard paid flags
/// and the worst conservation error of the round.
struct Round {
    payouts: Vec<f64>,
    shares: Vec<f64>,
    paid: Vec<bool>,
    conservation: f64,
}

fn play_round(
    allocation: &AllocationMatrix,
    payments: &[f64],
    kappa: f64,
    sampling: ShareSampling,
    rng: &mut ChaCha8Rng,
) -> Result<Round> {
    let (nf, ns) = (allocation.followers(), allocation.shards());
    let mut shares = vec![0.0; nf * ns];
    for (idx, &r) in allocation.entries().iter().enumerate() {
        let mean = kappa * r;
        shares[idx] = match sampling {
            ShareSampling::Expected => mean,
            ShareSampling::Poisson if mean > 0.0 => Poisson::new(mean)
                .map_err(|e| GameError::Numerical(format!("poisson mean {mean}: {e}")))?
                .sample(rng),
            ShareSampling::Poisson => 0.0,
        };
    }
    let mut payouts = vec![0.0; nf * ns];
    let mut paid = vec![false; ns];
    let mut conservation: f64 = 0.0;
    for m in 0..ns {
        let total: f64 = (0..nf).map(|n| shares[n * ns + m]).sum();
        if total <= 0.0 {
            continue;
        }
        paid[m] = true;
        // The last share holder takes the remainder so the round pays out
        // exactly the prize.
        let last = (0..nf).rev().find(|&n| shares[n * ns + m] > 0.0).unwrap_or(0);
        let mut handed_out = 0.0;
        for n in 0..nf {
            if n == last {
                continue;
            }
            let v = payments[m] * (shares[n * ns + m] / total);
            payouts[n * ns + m] = v;
            handed_out += v;
        }
        payouts[last * ns + m] = payments[m] - handed_out;
        let paid_total: f64 = (0..nf).map(|n| payouts[n * ns + m]).sum();
        conservation = conservation.max((paid_total - payments[m]).abs());
    }
    Ok(Round {
        payouts,
        shares,
        paid,
        conservation,
    })
}

/// Simulate `rounds` pay-per-share rounds and compare average payouts with
/// the proportional split.
///
/// Rounds draw from independent ChaCha streams keyed by round index, so the
/// result is identical for a given seed regardless of thread count.
pub fn simulate_pay_per_share(
    allocation: &AllocationMatrix,
    payments: &PaymentVector,
    shares_per_unit: f64,
    rounds: u64,
    seed: u64,
    sampling: ShareSampling,
) -> Result<PayoutLedger> {
    positive("shares_per_unit", shares_per_unit)?;
    if rounds == 0 {
        return Err(GameError::InvalidConfig("rounds must be at least 1".into()));
    }
    same_len("payments", allocation.shards(), payments.len())?;
    let (nf, ns) = (allocation.followers(), allocation.shards());
    let p = payments.as_slice();

    let per_round: Vec<Round> = (0..rounds)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k);
            play_round(allocation, p, shares_per_unit, sampling, &mut rng)
        })
        .collect::<Result<_>>()?;

    let mut payout_sum = vec![0.0; nf * ns];
    let mut share_sum = vec![0.0; nf * ns];
    let mut paid_rounds = vec![0u64; ns];
    let mut max_conservation_error: f64 = 0.0;
    for round in &per_round {
        for i in 0..nf * ns {
            payout_sum[i] += round.payouts[i];
            share_sum[i] += round.shares[i];
        }
        for (count, &paid) in paid_rounds.iter_mut().zip(&round.paid) {
            *count += u64::from(paid);
        }
        max_conservation_error = max_conservation_error.max(round.conservation);
    }

    let totals = allocation.shard_totals();
    let entries = (0..nf * ns)
        .map(|i| {
            let m = i % ns;
            let r = allocation.entries()[i];
            let expected = crate::game::shard_payoff(r, (totals[m] - r).max(0.0), p[m])?;
            let simulated = if paid_rounds[m] > 0 {
                payout_sum[i] / paid_rounds[m] as f64
            } else {
                0.0
            };
            Ok(PayoutEntry {
                expected_tokens: expected,
                simulated_tokens: simulated,
                shares_observed: share_sum[i],
                relative_error: (simulated - expected).abs() / expected.max(1e-12),
            })
        })
        .collect::<Result<_>>()?;

    Ok(PayoutLedger {
        followers: nf,
        shards: ns,
        entries,
        paid_rounds,
        rounds,
        max_conservation_error,
    })
}
