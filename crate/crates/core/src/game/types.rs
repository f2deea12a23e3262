use std::collections::HashSet;
use std::fmt;

use crate::error::{non_negative, positive, same_len, GameError, Result};

/// Relative slack allowed on a row budget before an allocation counts as infeasible.
pub const FEASIBILITY_REL_TOL: f64 = 1e-9;

/// One follower: a user contributing compute to the shards.
#[derive(Debug, Clone, PartialEq)]
pub struct FollowerSpec {
    pub id: String,
    /// Resource capacity `R_n`.
    pub capacity: f64,
    /// Tokens spent per unit of contributed resource, `C_n`.
    pub unit_cost: f64,
}

impl FollowerSpec {
    pub fn new(id: impl Into<String>, capacity: f64, unit_cost: f64) -> Result<Self> {
        let spec = Self {
            id: id.into(),
            capacity,
            unit_cost,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        positive("capacity", self.capacity)?;
        positive("unit_cost", self.unit_cost)?;
        Ok(())
    }
}

/// One shard, i.e. one prize pool, with the leader's priority weight.
#[derive(Debug, Clone, PartialEq)]
pub struct ShardSpec {
    pub id: String,
    pub alpha: f64,
}

impl ShardSpec {
    pub fn new(id: impl Into<String>, alpha: f64) -> Result<Self> {
        let spec = Self {
            id: id.into(),
            alpha,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        positive("alpha", self.alpha).map(|_| ())
    }
}

/// The leader's per-shard payments in tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct PaymentVector(Vec<f64>);

impl PaymentVector {
    pub fn new(payments: Vec<f64>) -> Result<Self> {
        for &p in &payments {
            non_negative("payment", p)?;
        }
        Ok(Self(payments))
    }

    pub fn zeros(shards: usize) -> Self {
        Self(vec![0.0; shards])
    }

    pub fn uniform(shards: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; shards])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for PaymentVector {
    type Output = f64;

    fn index(&self, m: usize) -> &f64 {
        &self.0[m]
    }
}

impl fmt::Display for PaymentVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, p) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, "]")
    }
}

/// Follower strategies `r_n^m`, stored row-major: one row per follower, one
/// column per shard.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationMatrix {
    followers: usize,
    shards: usize,
    entries: Vec<f64>,
}

impl AllocationMatrix {
    pub fn zeros(followers: usize, shards: usize) -> Self {
        Self {
            followers,
            shards,
            entries: vec![0.0; followers * shards],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let followers = rows.len();
        let shards = rows.first().map_or(0, Vec::len);
        let mut entries = Vec::with_capacity(followers * shards);
        for row in rows {
            same_len("allocation row", shards, row.len())?;
            for &r in &row {
                non_negative("allocation entry", r)?;
            }
            entries.extend(row);
        }
        Ok(Self {
            followers,
            shards,
            entries,
        })
    }

    /// `r_n^m = R_n / (2M)` for every follower and shard.
    pub fn uniform(followers: &[FollowerSpec], shards: usize) -> Self {
        let mut out = Self::zeros(followers.len(), shards);
        for (n, f) in followers.iter().enumerate() {
            out.row_mut(n)
                .fill(f.capacity / (2.0 * shards as f64));
        }
        out
    }

    pub fn followers(&self) -> usize {
        self.followers
    }

    pub fn shards(&self) -> usize {
        self.shards
    }

    pub fn get(&self, n: usize, m: usize) -> f64 {
        self.entries[n * self.shards + m]
    }

    pub fn row(&self, n: usize) -> &[f64] {
        &self.entries[n * self.shards..(n + 1) * self.shards]
    }

    pub fn row_mut(&mut self, n: usize) -> &mut [f64] {
        &mut self.entries[n * self.shards..(n + 1) * self.shards]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.entries.chunks(self.shards.max(1)).take(self.followers)
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn set_row(&mut self, n: usize, row: &[f64]) {
        self.row_mut(n).copy_from_slice(row);
    }

    pub fn row_total(&self, n: usize) -> f64 {
        self.row(n).iter().sum()
    }

    /// `X_m = Σ_n r_n^m` for every shard.
    pub fn shard_totals(&self) -> Vec<f64> {
        let mut totals = vec![0.0; self.shards];
        for row in self.rows() {
            for (t, r) in totals.iter_mut().zip(row) {
                *t += r;
            }
        }
        totals
    }

    /// `T_m = Σ_{i≠n} r_i^m`, summed directly rather than by subtraction so
    /// it is exactly zero when every other follower is absent from a shard.
    pub fn others_totals(&self, n: usize) -> Vec<f64> {
        let mut totals = vec![0.0; self.shards];
        for (i, row) in self.rows().enumerate() {
            if i == n {
                continue;
            }
            for (t, r) in totals.iter_mut().zip(row) {
                *t += r;
            }
        }
        totals
    }

    /// Largest coordinatewise absolute difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn check_shape(&self, followers: usize, shards: usize) -> Result<()> {
        same_len("allocation followers", followers, self.followers)?;
        same_len("allocation shards", shards, self.shards)
    }

    /// Entries non-negative and every row within `R_n (1 + 1e-9)`.
    pub fn check_feasible(&self, specs: &[FollowerSpec]) -> Result<()> {
        same_len("allocation followers", specs.len(), self.followers)?;
        for &r in &self.entries {
            non_negative("allocation entry", r)?;
        }
        for (n, spec) in specs.iter().enumerate() {
            let total = self.row_total(n);
            if total > spec.capacity * (1.0 + FEASIBILITY_REL_TOL) {
                return Err(GameError::Infeasible {
                    row: n,
                    total,
                    capacity: spec.capacity,
                });
            }
        }
        Ok(())
    }
}

/// Which leader objective to maximise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LeaderVariant {
    /// `Σ_m (α_m ln X_m − P_m)`.
    #[default]
    Log,
    /// `Σ_m (α_m X_m − P_m)`.
    Linear,
}

impl std::str::FromStr for LeaderVariant {
    type Err = GameError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "log" => Ok(Self::Log),
            "linear" => Ok(Self::Linear),
            other => Err(GameError::InvalidConfig(format!(
                "unknown leader variant {other:?} (expected \"log\" or \"linear\")"
            ))),
        }
    }
}

impl fmt::Display for LeaderVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Log => "log",
            Self::Linear => "linear",
        })
    }
}

pub const DEFAULT_EPSILON_GRAIN: f64 = 1e-6;
pub const DEFAULT_MAX_SWEEPS: usize = 1000;
pub const DEFAULT_PAYMENT_GRID_MAX: u32 = 100;

/// Everything a solve needs: players, solver tolerances and search bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub followers: Vec<FollowerSpec>,
    pub shards: Vec<ShardSpec>,
    pub leader_variant: LeaderVariant,
    /// Entry grain for shards nobody else contributes to.
    pub epsilon_grain: f64,
    /// Sweep-to-sweep change (resource units) below which dynamics stop.
    pub br_tolerance: f64,
    pub max_sweeps: usize,
    pub payment_grid_max: u32,
    pub rng_seed: u64,
}

impl ScenarioConfig {
    /// Config with default tolerances; `br_tolerance` is `1e-6 · max R_n`.
    pub fn new(followers: Vec<FollowerSpec>, shards: Vec<ShardSpec>) -> Result<Self> {
        let max_capacity = followers.iter().map(|f| f.capacity).fold(0.0, f64::max);
        let config = Self {
            followers,
            shards,
            leader_variant: LeaderVariant::Log,
            epsilon_grain: DEFAULT_EPSILON_GRAIN,
            br_tolerance: 1e-6 * max_capacity,
            max_sweeps: DEFAULT_MAX_SWEEPS,
            payment_grid_max: DEFAULT_PAYMENT_GRID_MAX,
            rng_seed: 0,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_variant(mut self, variant: LeaderVariant) -> Self {
        self.leader_variant = variant;
        self
    }

    pub fn with_br_tolerance(mut self, tol: f64) -> Self {
        self.br_tolerance = tol;
        self
    }

    pub fn with_max_sweeps(mut self, sweeps: usize) -> Self {
        self.max_sweeps = sweeps;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    pub fn with_payment_grid_max(mut self, max: u32) -> Self {
        self.payment_grid_max = max;
        self
    }

    pub fn num_followers(&self) -> usize {
        self.followers.len()
    }

    pub fn num_shards(&self) -> usize {
        self.shards.len()
    }

    pub fn alphas(&self) -> Vec<f64> {
        self.shards.iter().map(|s| s.alpha).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.followers.is_empty() {
            return Err(GameError::InvalidConfig("at least one follower required".into()));
        }
        if self.shards.is_empty() {
            return Err(GameError::InvalidConfig("at least one shard required".into()));
        }
        let mut seen = HashSet::new();
        for f in &self.followers {
            f.validate().map_err(|e| {
                GameError::InvalidConfig(format!("follower {:?}: {e}", f.id))
            })?;
            if !seen.insert(f.id.as_str()) {
                return Err(GameError::InvalidConfig(format!(
                    "duplicate follower id {:?}",
                    f.id
                )));
            }
        }
        seen.clear();
        for s in &self.shards {
            s.validate()
                .map_err(|e| GameError::InvalidConfig(format!("shard {:?}: {e}", s.id)))?;
            if !seen.insert(s.id.as_str()) {
                return Err(GameError::InvalidConfig(format!(
                    "duplicate shard id {:?}",
                    s.id
                )));
            }
        }
        positive("epsilon_grain", self.epsilon_grain)
            .and(positive("br_tolerance", self.br_tolerance))
            .map_err(|e| GameError::InvalidConfig(e.to_string()))?;
        if self.max_sweeps == 0 {
            return Err(GameError::InvalidConfig("max_sweeps must be at least 1".into()));
        }
        Ok(())
    }

    pub fn check_payments(&self, payments: &PaymentVector) -> Result<()> {
        same_len("payments", self.num_shards(), payments.len())
    }
}

/// Outcome of best-response dynamics at a fixed payment vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumResult {
    pub allocation: AllocationMatrix,
    /// Passes that moved the profile by more than the tolerance. The final
    /// confirming pass of a converged run is not counted.
    pub sweeps: usize,
    pub converged: bool,
    /// Largest per-coordinate gap between a row and its best response in the
    /// last pass. Equal to the change made unless the step was relaxed.
    pub residual: f64,
    pub follower_utilities: Vec<f64>,
    pub leader_utility: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn followers() -> Vec<FollowerSpec> {
        vec![
            FollowerSpec::new("a", 100.0, 0.2).unwrap(),
            FollowerSpec::new("b", 200.0, 0.1).unwrap(),
        ]
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(FollowerSpec::new("x", 0.0, 1.0).is_err());
        assert!(FollowerSpec::new("x", 1.0, -1.0).is_err());
        assert!(FollowerSpec::new("x", f64::NAN, 1.0).is_err());
        assert!(ShardSpec::new("s", 0.0).is_err());
        assert!(PaymentVector::new(vec![1.0, -0.5]).is_err());
    }

    #[test]
    fn config_defaults_and_validation() {
        let shards = vec![ShardSpec::new("s1", 4.0).unwrap()];
        let cfg = ScenarioConfig::new(followers(), shards.clone()).unwrap();
        assert!((cfg.br_tolerance - 2e-4).abs() < 1e-18);
        assert_eq!(cfg.max_sweeps, 1000);
        assert_eq!(cfg.payment_grid_max, 100);
        assert_eq!(cfg.leader_variant, LeaderVariant::Log);

        assert!(ScenarioConfig::new(vec![], shards.clone()).is_err());
        assert!(ScenarioConfig::new(followers(), vec![]).is_err());
        let mut dup = followers();
        dup[1].id = "a".into();
        assert!(ScenarioConfig::new(dup, shards).is_err());
    }

    #[test]
    fn uniform_allocation_and_totals() {
        let alloc = AllocationMatrix::uniform(&followers(), 2);
        assert_eq!(alloc.row(0), &[25.0, 25.0]);
        assert_eq!(alloc.row(1), &[50.0, 50.0]);
        assert_eq!(alloc.shard_totals(), vec![75.0, 75.0]);
        assert_eq!(alloc.others_totals(0), vec![50.0, 50.0]);
        alloc.check_feasible(&followers()).unwrap();
    }

    #[test]
    fn feasibility_tolerance() {
        let specs = followers();
        let ok = AllocationMatrix::from_rows(vec![vec![50.0, 50.0 + 5e-8], vec![0.0, 0.0]]).unwrap();
        ok.check_feasible(&specs).unwrap();
        let bad = AllocationMatrix::from_rows(vec![vec![50.0, 50.1], vec![0.0, 0.0]]).unwrap();
        assert!(matches!(
            bad.check_feasible(&specs),
            Err(GameError::Infeasible { row: 0, .. })
        ));
        assert!(AllocationMatrix::from_rows(vec![vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(AllocationMatrix::from_rows(vec![vec![-1.0]]).is_err());
    }

    #[test]
    fn variant_parses() {
        assert_eq!("log".parse::<LeaderVariant>().unwrap(), LeaderVariant::Log);
        assert_eq!("linear".parse::<LeaderVariant>().unwrap(), LeaderVariant::Linear);
        assert!("quadratic".parse::<LeaderVariant>().is_err());
    }
}
