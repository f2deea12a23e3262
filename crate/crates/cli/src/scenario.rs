//! Scenario files: TOML documents describing followers, shards and solver
//! settings.
//!
//! ```toml
//! seed = 7
//! payments = [100.0, 200.0]      # optional: fixed leader strategy
//!
//! [[followers]]
//! id = "mu1"
//! capacity = 100.0
//! unit_cost = 0.2
//!
//! [[shards]]
//! id = "s1"
//! alpha = 4.0
//!
//! [solver]                       # optional
//! br_tolerance = 1e-4
//! max_sweeps = 1000
//! epsilon_grain = 1e-6
//!
//! [leader]                       # optional
//! variant = "log"
//! payment_grid_max = 100
//!
//! [focal]                        # optional: one follower vs fixed opponents
//! follower = "mu1"
//! opponents_totals = [100.0, 300.0]
//!
//! [payout]                       # optional
//! shares_per_unit = 10.0
//! rounds = 100000
//! ```

use std::path::Path;

use serde::Deserialize;
use shardgame_core::game::{DEFAULT_EPSILON_GRAIN, DEFAULT_MAX_SWEEPS, DEFAULT_PAYMENT_GRID_MAX};
use shardgame_core::payout::DEFAULT_SHARES_PER_UNIT;
use shardgame_core::{FollowerSpec, LeaderVariant, PaymentVector, ScenarioConfig, ShardSpec};
use toml::Spanned;

use crate::error::{CliError, Result};

pub const DEFAULT_PAYOUT_ROUNDS: u64 = 100_000;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    followers: Vec<FollowerEntry>,
    shards: Vec<ShardEntry>,
    payments: Option<Spanned<Vec<f64>>>,
    #[serde(default)]
    solver: SolverSection,
    #[serde(default)]
    leader: LeaderSection,
    #[serde(default)]
    seed: u64,
    focal: Option<FocalSection>,
    #[serde(default)]
    payout: PayoutSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FollowerEntry {
    id: String,
    capacity: Spanned<f64>,
    unit_cost: Spanned<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ShardEntry {
    id: String,
    alpha: Spanned<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolverSection {
    br_tolerance: Option<f64>,
    max_sweeps: Option<usize>,
    epsilon_grain: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct LeaderSection {
    variant: Option<Spanned<String>>,
    payment_grid_max: Option<u32>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FocalSection {
    follower: Spanned<String>,
    opponents_totals: Spanned<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PayoutSection {
    shares_per_unit: Option<f64>,
    rounds: Option<u64>,
}

/// A single follower facing fixed opponent totals.
#[derive(Debug, Clone, PartialEq)]
pub struct Focal {
    pub follower: usize,
    pub opponents_totals: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PayoutSettings {
    pub shares_per_unit: f64,
    pub rounds: u64,
}

/// A validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub payments: Option<PaymentVector>,
    pub focal: Option<Focal>,
    pub payout: PayoutSettings,
}

impl Scenario {
    pub fn require_payments(&self) -> Result<&PaymentVector> {
        self.payments.as_ref().ok_or_else(|| {
            CliError::Validation("this command needs a top-level `payments` array".into())
        })
    }
}

fn line_of(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].matches('\n').count() + 1
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_scenario(&text).map_err(|e| match e {
        CliError::Validation(msg) => CliError::Validation(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn parse_scenario(src: &str) -> Result<Scenario> {
    let file: ScenarioFile =
        toml::from_str(src).map_err(|e| CliError::Validation(e.to_string().trim_end().to_owned()))?;
    let at = |span: std::ops::Range<usize>| format!("line {}", line_of(src, span.start));

    let mut followers = Vec::with_capacity(file.followers.len());
    for (i, f) in file.followers.iter().enumerate() {
        let bad = |field: &str, value: &Spanned<f64>| {
            CliError::Validation(format!(
                "{}: followers[{i}] (id {:?}): {field} must be a positive number, got {}",
                at(value.span()),
                f.id,
                value.get_ref()
            ))
        };
        let capacity = *f.capacity.get_ref();
        let unit_cost = *f.unit_cost.get_ref();
        if !(capacity.is_finite() && capacity > 0.0) {
            return Err(bad("capacity", &f.capacity));
        }
        if !(unit_cost.is_finite() && unit_cost > 0.0) {
            return Err(bad("unit_cost", &f.unit_cost));
        }
        followers.push(FollowerSpec::new(f.id.clone(), capacity, unit_cost)?);
    }
    let mut shards = Vec::with_capacity(file.shards.len());
    for (i, s) in file.shards.iter().enumerate() {
        let alpha = *s.alpha.get_ref();
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(CliError::Validation(format!(
                "{}: shards[{i}] (id {:?}): alpha must be a positive number, got {alpha}",
                at(s.alpha.span()),
                s.id
            )));
        }
        shards.push(ShardSpec::new(s.id.clone(), alpha)?);
    }
    if followers.is_empty() || shards.is_empty() {
        return Err(CliError::Validation(
            "scenario needs at least one follower and one shard".into(),
        ));
    }

    let mut config = ScenarioConfig::new(followers, shards)?;
    if let Some(tol) = file.solver.br_tolerance {
        config.br_tolerance = tol;
    }
    config.max_sweeps = file.solver.max_sweeps.unwrap_or(DEFAULT_MAX_SWEEPS);
    config.epsilon_grain = file.solver.epsilon_grain.unwrap_or(DEFAULT_EPSILON_GRAIN);
    config.payment_grid_max = file.leader.payment_grid_max.unwrap_or(DEFAULT_PAYMENT_GRID_MAX);
    if let Some(v) = &file.leader.variant {
        config.leader_variant = v
            .get_ref()
            .parse::<LeaderVariant>()
            .map_err(|e| CliError::Validation(format!("{}: leader.variant: {e}", at(v.span()))))?;
    }
    config.rng_seed = file.seed;
    config
        .validate()
        .map_err(|e| CliError::Validation(format!("[solver]/[leader]: {e}")))?;

    let payments = match &file.payments {
        Some(p) => {
            let span = at(p.span());
            if p.get_ref().len() != config.num_shards() {
                return Err(CliError::Validation(format!(
                    "{span}: payments has {} entries but there are {} shards",
                    p.get_ref().len(),
                    config.num_shards()
                )));
            }
            Some(
                PaymentVector::new(p.get_ref().clone())
                    .map_err(|e| CliError::Validation(format!("{span}: payments: {e}")))?,
            )
        }
        None => None,
    };

    let focal = match &file.focal {
        Some(f) => {
            let id = f.follower.get_ref();
            let follower = config
                .followers
                .iter()
                .position(|x| &x.id == id)
                .ok_or_else(|| {
                    CliError::Validation(format!(
                        "{}: focal.follower {id:?} is not a listed follower",
                        at(f.follower.span())
                    ))
                })?;
            let totals = f.opponents_totals.get_ref();
            if totals.len() != config.num_shards() || totals.iter().any(|t| !(*t >= 0.0)) {
                return Err(CliError::Validation(format!(
                    "{}: focal.opponents_totals must hold {} non-negative numbers",
                    at(f.opponents_totals.span()),
                    config.num_shards()
                )));
            }
            Some(Focal {
                follower,
                opponents_totals: totals.clone(),
            })
        }
        None => None,
    };

    let payout = PayoutSettings {
        shares_per_unit: file.payout.shares_per_unit.unwrap_or(DEFAULT_SHARES_PER_UNIT),
        rounds: file.payout.rounds.unwrap_or(DEFAULT_PAYOUT_ROUNDS),
    };
    if !(payout.shares_per_unit > 0.0) || payout.rounds == 0 {
        return Err(CliError::Validation(
            "payout.shares_per_unit must be positive and payout.rounds at least 1".into(),
        ));
    }

    Ok(Scenario {
        config,
        payments,
        focal,
        payout,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
seed = 3
payments = [100.0, 200.0]

[[followers]]
id = "a"
capacity = 100.0
unit_cost = 0.2

[[followers]]
id = "b"
capacity = 200.0
unit_cost = 0.1

[[shards]]
id = "s1"
alpha = 4.0

[[shards]]
id = "s2"
alpha = 6.0
"#;

    #[test]
    fn parses_with_defaults() {
        let s = parse_scenario(MINIMAL).unwrap();
        assert_eq!(s.config.num_followers(), 2);
        assert_eq!(s.config.rng_seed, 3);
        assert!((s.config.br_tolerance - 2e-4).abs() < 1e-18);
        assert_eq!(s.config.leader_variant, LeaderVariant::Log);
        assert_eq!(s.payments.unwrap().as_slice(), &[100.0, 200.0]);
        assert_eq!(s.payout.rounds, DEFAULT_PAYOUT_ROUNDS);
        assert!(s.focal.is_none());
    }

    #[test]
    fn negative_capacity_names_follower_and_line() {
        let src = MINIMAL.replace("capacity = 200.0", "capacity = -5.0");
        let err = parse_scenario(&src).unwrap_err();
        let msg = err.to_string();
        assert_eq!(err.exit_code(), 1);
        assert!(msg.contains("\"b\""), "{msg}");
        assert!(msg.contains("line 12"), "{msg}");
        assert!(msg.contains("capacity"), "{msg}");
    }

    #[test]
    fn syntax_and_schema_errors_are_validation() {
        let err = parse_scenario("followers = [").unwrap_err();
        assert_eq!(err.exit_code(), 1);
        let err = parse_scenario(&format!("{MINIMAL}\n[solver]\nbogus = 1\n")).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn payments_length_checked() {
        let src = MINIMAL.replace("payments = [100.0, 200.0]", "payments = [1.0]");
        let err = parse_scenario(&src).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn optional_sections() {
        let src = format!(
            "{MINIMAL}\n[leader]\nvariant = \"linear\"\npayment_grid_max = 20\n\n[solver]\nmax_sweeps = 7\nbr_tolerance = 1e-9\n\n[focal]\nfollower = \"b\"\nopponents_totals = [1.0, 2.0]\n"
        );
        let s = parse_scenario(&src).unwrap();
        assert_eq!(s.config.leader_variant, LeaderVariant::Linear);
        assert_eq!(s.config.payment_grid_max, 20);
        assert_eq!(s.config.max_sweeps, 7);
        assert_eq!(s.config.br_tolerance, 1e-9);
        assert_eq!(s.focal.unwrap().follower, 1);

        let bad = format!("{MINIMAL}\n[leader]\nvariant = \"cubic\"\n");
        assert!(parse_scenario(&bad).unwrap_err().to_string().contains("cubic"));
    }
}
