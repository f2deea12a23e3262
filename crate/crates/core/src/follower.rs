//! A single follower's best response to fixed opponents and payments.
//!
//! The objective `Σ_m P_m r_m/(r_m + T_m) − C Σ_m r_m` is strictly concave
//! in each `r_m` when `T_m > 0`, so the maximiser over
//! `{r ≥ 0, Σ r ≤ R}` is characterised by KKT stationarity with one budget
//! multiplier `λ ≥ 0`:
//!
//! ```text
//! r_m(λ) = max(0, sqrt(P_m T_m / (C + λ)) − T_m)
//! ```
//!
//! [`best_response`] finds `λ` by bisection (water-filling).
//! [`projected_gradient_oracle`] reaches the same point by iterative ascent
//! and exists to cross-check the closed form.

use crate::error::{non_negative, positive, same_len, GameError, Result};
use crate::game::{row_gradient, row_utility, PaymentVector, DEFAULT_EPSILON_GRAIN};

const MAX_BISECTIONS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct BestResponseInput {
    pub payments: PaymentVector,
    /// Per-shard totals of every other follower, `T_m`.
    pub opponents_totals: Vec<f64>,
    pub unit_cost: f64,
    pub capacity: f64,
    /// Stake placed on a paying shard that nobody else contributes to.
    pub epsilon_grain: f64,
}

impl BestResponseInput {
    pub fn new(
        payments: PaymentVector,
        opponents_totals: Vec<f64>,
        unit_cost: f64,
        capacity: f64,
    ) -> Result<Self> {
        let input = Self {
            payments,
            opponents_totals,
            unit_cost,
            capacity,
            epsilon_grain: DEFAULT_EPSILON_GRAIN,
        };
        input.validate()?;
        Ok(input)
    }

    pub fn with_grain(mut self, grain: f64) -> Self {
        self.epsilon_grain = grain;
        self
    }

    pub fn shards(&self) -> usize {
        self.payments.len()
    }

    pub fn validate(&self) -> Result<()> {
        same_len("opponents_totals", self.payments.len(), self.opponents_totals.len())?;
        for &t in &self.opponents_totals {
            non_negative("opponents_total", t)?;
        }
        positive("unit_cost", self.unit_cost)?;
        // An infinite capacity is a legitimate "uncapacitated" request.
        if !(self.capacity > 0.0) {
            return Err(GameError::NonPositive {
                what: "capacity",
                value: self.capacity,
            });
        }
        positive("epsilon_grain", self.epsilon_grain)?;
        Ok(())
    }

    /// Objective value at `row`.
    pub fn utility(&self, row: &[f64]) -> f64 {
        row_utility(row, &self.opponents_totals, self.payments.as_slice(), self.unit_cost)
    }

    /// Analytic gradient of the objective at `row`.
    pub fn gradient(&self, row: &[f64]) -> Vec<f64> {
        row_gradient(row, &self.opponents_totals, self.payments.as_slice(), self.unit_cost)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BestResponse {
    pub allocation: Vec<f64>,
    /// Budget multiplier `λ`; zero when the capacity is slack.
    pub multiplier: f64,
}

/// Unique maximiser of the follower's utility over its feasible set.
///
/// Shards with `T_m = 0` and `P_m > 0` have no attained optimum (any
/// positive stake takes the whole prize), so they receive the configured
/// grain `ε` instead. If the budget cannot cover `ε` on all of them it is
/// split evenly among them.
pub fn best_response(input: &BestResponseInput) -> Result<BestResponse> {
    input.validate()?;
    let payments = input.payments.as_slice();
    let totals = &input.opponents_totals;
    let cost = input.unit_cost;
    let mut allocation = vec![0.0; payments.len()];

    let empty: Vec<usize> = (0..payments.len())
        .filter(|&m| totals[m] == 0.0 && payments[m] > 0.0)
        .collect();
    let mut budget = input.capacity;
    if !empty.is_empty() {
        let grain = input.epsilon_grain.min(budget / empty.len() as f64);
        for &m in &empty {
            allocation[m] = grain;
        }
        budget = (budget - grain * empty.len() as f64).max(0.0);
    }

    let contested: Vec<usize> = (0..payments.len())
        .filter(|&m| totals[m] > 0.0 && payments[m] > 0.0)
        .collect();
    let fill = |lambda: f64, out: &mut [f64]| -> f64 {
        let mut sum = 0.0;
        for &m in &contested {
            let r = ((payments[m] * totals[m] / (cost + lambda)).sqrt() - totals[m]).max(0.0);
            out[m] = r;
            sum += r;
        }
        sum
    };

    if fill(0.0, &mut allocation) <= budget {
        return Ok(BestResponse {
            allocation,
            multiplier: 0.0,
        });
    }

    // Every contested share vanishes once C + λ ≥ P_m / T_m.
    let mut lo = 0.0;
    let mut hi = contested
        .iter()
        .map(|&m| payments[m] / totals[m] - cost)
        .fold(0.0, f64::max);
    let mut scratch = allocation.clone();
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let used = fill(mid, &mut scratch);
        if used > budget {
            lo = mid;
        } else {
            hi = mid;
            if used == budget {
                break;
            }
        }
    }
    if !(hi - lo <= 4.0 * f64::EPSILON * hi.max(1.0)) && fill(hi, &mut scratch) < budget * (1.0 - 1e-12) {
        return Err(GameError::Numerical(format!(
            "budget bisection did not close after {MAX_BISECTIONS} steps (bracket [{lo}, {hi}])"
        )));
    }
    // The upper end of the bracket is always within budget.
    fill(hi, &mut allocation);
    Ok(BestResponse {
        allocation,
        multiplier: hi,
    })
}

/// Euclidean projection onto `{x ≥ 0, Σ x ≤ cap}`.
pub fn project_capped_simplex(v: &[f64], cap: f64) -> Vec<f64> {
    let clipped: Vec<f64> = v.iter().map(|x| x.max(0.0)).collect();
    if clipped.iter().sum::<f64>() <= cap {
        return clipped;
    }
    // Budget binds: project onto {x ≥ 0, Σ x = cap} by the sort-based
    // threshold search.
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let t = (cumulative - cap) / (k + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        } else {
            break;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub allocation: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// `‖Π(r + ∇U(r)) − r‖₂` at the returned point.
    pub gradient_mapping_norm: f64,
}

/// Stationarity threshold on the unit-step gradient mapping.
pub const ORACLE_TOLERANCE: f64 = 1e-8;

/// Projected gradient ascent on the follower utility.
///
/// Steps start from `step` and adapt with Barzilai-Borwein estimates,
/// safeguarded by Armijo backtracking. Requires `T_m > 0` on every shard.
pub fn projected_gradient_oracle(
    input: &BestResponseInput,
    step: f64,
    iterations: usize,
) -> Result<OracleResult> {
    input.validate()?;
    positive("step", step)?;
    if let Some(m) = input.opponents_totals.iter().position(|&t| t <= 0.0) {
        return Err(GameError::NotApplicable(format!(
            "gradient oracle needs positive opponent totals (shard {m} is empty)"
        )));
    }
    let cap = input.capacity;
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mapping = |r: &[f64], g: &[f64]| -> f64 {
        let ahead: Vec<f64> = r.iter().zip(g).map(|(x, d)| x + d).collect();
        let p = project_capped_simplex(&ahead, cap);
        p.iter().zip(r).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
    };

    let mut r = vec![0.0; input.shards()];
    let mut g = input.gradient(&r);
    let mut u = input.utility(&r);
    let mut alpha = step;
    let mut norm = mapping(&r, &g);
    let mut iter = 0;
    while iter < iterations && norm > ORACLE_TOLERANCE {
        iter += 1;
        let mut trial_step = alpha;
        let (next, next_u) = loop {
            let ahead: Vec<f64> = r.iter().zip(&g).map(|(x, d)| x + trial_step * d).collect();
            let cand = project_capped_simplex(&ahead, cap);
            let moved: Vec<f64> = cand.iter().zip(&r).map(|(a, b)| a - b).collect();
            let cu = input.utility(&cand);
            // Rounding on the objective can mask a genuine ascent near the
            // optimum; accept a zero-gain step there instead of stalling.
            let slack = 1e-15 * u.abs().max(1.0);
            if cu + slack >= u + 1e-4 * dot(&g, &moved) || trial_step < 1e-14 {
                break (cand, cu);
            }
            trial_step *= 0.5;
        };
        let next_g = input.gradient(&next);
        let s: Vec<f64> = next.iter().zip(&r).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = next_g.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        alpha = if sy < 0.0 {
            (dot(&s, &s) / -sy).clamp(1e-12, 1e12)
        } else {
            (trial_step * 2.0).min(1e12)
        };
        r = next;
        g = next_g;
        u = next_u;
        norm = mapping(&r, &g);
    }
    Ok(OracleResult {
        allocation: r,
        iterations: iter,
        converged: norm <= ORACLE_TOLERANCE,
        gradient_mapping_norm: norm,
    })
}
