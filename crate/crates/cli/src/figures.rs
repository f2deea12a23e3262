//! Data behind the four reference plots: one follower's utility surface,
//! best-response convergence, and the leader's utility over the payment
//! grid at two priority settings.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use shardgame_core::equilibrium::{solve_followers_equilibrium, solve_with_trajectory, Init};
use shardgame_core::follower::{best_response, BestResponseInput};
use shardgame_core::leader::{search_payments, LeaderSearchResult};
use shardgame_core::{EquilibriumResult, PaymentVector};

use crate::error::{CliError, Result};
use crate::report::{num, CsvReport};
use crate::scenario::{parse_scenario, Scenario};

pub const DEFAULT_GRID_POINTS: usize = 100;

const FIG2_SCENARIO: &str = include_str!("../../../scenarios/fig2_best_response.toml");
const FIG3_SCENARIO: &str = include_str!("../../../scenarios/fig3_convergence.toml");
const FIG4_SCENARIO: &str = include_str!("../../../scenarios/fig4_leader_alpha_4_6.toml");
const FIG5_SCENARIO: &str = include_str!("../../../scenarios/fig5_leader_alpha_10_15.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    UtilitySurface,
    Convergence,
    LeaderSurface,
    LeaderSurfaceHighPriority,
}

impl Figure {
    pub fn from_number(n: u8) -> Result<Self> {
        match n {
            2 => Ok(Self::UtilitySurface),
            3 => Ok(Self::Convergence),
            4 => Ok(Self::LeaderSurface),
            5 => Ok(Self::LeaderSurfaceHighPriority),
            other => Err(CliError::Validation(format!(
                "unknown figure {other} (expected 2, 3, 4 or 5)"
            ))),
        }
    }

    /// The checked-in scenario for this figure.
    pub fn builtin_scenario(self) -> Scenario {
        let src = match self {
            Self::UtilitySurface => FIG2_SCENARIO,
            Self::Convergence => FIG3_SCENARIO,
            Self::LeaderSurface => FIG4_SCENARIO,
            Self::LeaderSurfaceHighPriority => FIG5_SCENARIO,
        };
        parse_scenario(src).expect("bundled scenario is valid")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub payments: [f64; 2],
    pub leader_utility: f64,
    pub total_resources: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FigureOutcome {
    UtilitySurface {
        /// Best response `(r¹, r²)` and its utility.
        argmax: [f64; 3],
        files: Vec<PathBuf>,
    },
    Convergence {
        equilibrium: EquilibriumResult,
        files: Vec<PathBuf>,
    },
    LeaderSurface {
        grid_argmax: GridPoint,
        search: Box<LeaderSearchResult>,
        files: Vec<PathBuf>,
    },
}

impl FigureOutcome {
    pub fn files(&self) -> &[PathBuf] {
        match self {
            Self::UtilitySurface { files, .. }
            | Self::Convergence { files, .. }
            | Self::LeaderSurface { files, .. } => files,
        }
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
        .collect()
}

fn require_two_shards(scenario: &Scenario) -> Result<()> {
    if scenario.config.num_shards() == 2 {
        Ok(())
    } else {
        Err(CliError::Validation(format!(
            "surface figures need exactly 2 shards, scenario has {}",
            scenario.config.num_shards()
        )))
    }
}

pub fn reproduce_figure(
    figure: Figure,
    scenario: &Scenario,
    out_dir: &Path,
    grid_points: usize,
) -> Result<FigureOutcome> {
    if grid_points == 0 {
        return Err(CliError::Validation("grid needs at least one point".into()));
    }
    match figure {
        Figure::UtilitySurface => utility_surface(scenario, out_dir, grid_points),
        Figure::Convergence => convergence(scenario, out_dir),
        Figure::LeaderSurface => leader_surface(scenario, out_dir, grid_points, "fig4"),
        Figure::LeaderSurfaceHighPriority => leader_surface(scenario, out_dir, grid_points, "fig5"),
    }
}

fn utility_surface(scenario: &Scenario, out_dir: &Path, n: usize) -> Result<FigureOutcome> {
    require_two_shards(scenario)?;
    let focal = scenario.focal.as_ref().ok_or_else(|| {
        CliError::Validation("the utility surface needs a [focal] section".into())
    })?;
    let payments = scenario.require_payments()?.clone();
    let spec = &scenario.config.followers[focal.follower];
    let input = BestResponseInput::new(
        payments,
        focal.opponents_totals.clone(),
        spec.unit_cost,
        spec.capacity,
    )?
    .with_grain(scenario.config.epsilon_grain);

    let axis = linspace(0.0, spec.capacity, n);
    let mut grid = CsvReport::create(out_dir, "fig2_utility_surface.csv", &["r1", "r2", "utility", "feasible"])?;
    for &r1 in &axis {
        for &r2 in &axis {
            let u = input.utility(&[r1, r2]);
            let feasible = r1 + r2 <= spec.capacity * (1.0 + 1e-12);
            grid.row([num(r1), num(r2), num(u), u8::from(feasible).to_string()])?;
        }
    }
    let best = best_response(&input)?.allocation;
    let u = input.utility(&best);
    let mut opt = CsvReport::create(out_dir, "fig2_optimum.csv", &["r1", "r2", "utility"])?;
    opt.row([num(best[0]), num(best[1]), num(u)])?;
    Ok(FigureOutcome::UtilitySurface {
        argmax: [best[0], best[1], u],
        files: vec![grid.finish()?, opt.finish()?],
    })
}

fn convergence(scenario: &Scenario, out_dir: &Path) -> Result<FigureOutcome> {
    let payments = scenario.require_payments()?;
    let cfg = &scenario.config;
    let (eq, trajectory) = solve_with_trajectory(cfg, payments, Init::Uniform)?;
    let mut csv = CsvReport::create(
        out_dir,
        "fig3_trajectory.csv",
        &["sweep", "follower_id", "shard_id", "allocation", "row_total"],
    )?;
    for (sweep, alloc) in trajectory.iter().enumerate() {
        for (n, f) in cfg.followers.iter().enumerate() {
            for (m, s) in cfg.shards.iter().enumerate() {
                csv.row([
                    sweep.to_string(),
                    f.id.clone(),
                    s.id.clone(),
                    num(alloc.get(n, m)),
                    num(alloc.row_total(n)),
                ])?;
            }
        }
    }
    let files = vec![csv.finish()?];
    if !eq.converged {
        return Err(CliError::NonConvergence(format!(
            "best-response dynamics stopped after {} sweeps with residual {}",
            cfg.max_sweeps, eq.residual
        )));
    }
    Ok(FigureOutcome::Convergence {
        equilibrium: eq,
        files,
    })
}

fn leader_surface(scenario: &Scenario, out_dir: &Path, n: usize, stem: &str) -> Result<FigureOutcome> {
    require_two_shards(scenario)?;
    let cfg = &scenario.config;
    let axis = linspace(1.0, f64::from(cfg.payment_grid_max), n);
    let pairs: Vec<[f64; 2]> = axis
        .iter()
        .flat_map(|&p1| axis.iter().map(move |&p2| [p1, p2]))
        .collect();
    let points: Vec<GridPoint> = pairs
        .par_iter()
        .map(|&p| {
            let eq = solve_followers_equilibrium(cfg, &PaymentVector::new(p.to_vec())?, Init::Uniform)?;
            Ok(GridPoint {
                payments: p,
                leader_utility: eq.leader_utility,
                total_resources: eq.allocation.shard_totals().iter().sum(),
                converged: eq.converged,
            })
        })
        .collect::<Result<_>>()?;

    let mut grid = CsvReport::create(
        out_dir,
        &format!("{stem}_leader_surface.csv"),
        &["payment_1", "payment_2", "leader_utility", "total_resources", "converged"],
    )?;
    let mut argmax: Option<&GridPoint> = None;
    for pt in &points {
        grid.row([
            num(pt.payments[0]),
            num(pt.payments[1]),
            num(pt.leader_utility),
            num(pt.total_resources),
            u8::from(pt.converged).to_string(),
        ])?;
        // Row-major order visits smaller vectors first, so strict `>` keeps
        // the lexicographically smallest maximiser.
        if pt.converged && argmax.is_none_or(|b| pt.leader_utility > b.leader_utility) {
            argmax = Some(pt);
        }
    }
    let grid_argmax = argmax
        .cloned()
        .ok_or_else(|| CliError::NonConvergence("no grid point converged".into()))?;

    let search = search_payments(cfg)?;
    let mut opt = CsvReport::create(
        out_dir,
        &format!("{stem}_optimum.csv"),
        &["source", "payment_1", "payment_2", "leader_utility", "total_resources"],
    )?;
    opt.row([
        "grid".to_string(),
        num(grid_argmax.payments[0]),
        num(grid_argmax.payments[1]),
        num(grid_argmax.leader_utility),
        num(grid_argmax.total_resources),
    ])?;
    opt.row([
        "search".to_string(),
        num(search.best_payments[0]),
        num(search.best_payments[1]),
        num(search.best_utility),
        num(search.equilibrium.allocation.shard_totals().iter().sum()),
    ])?;
    Ok(FigureOutcome::LeaderSurface {
        grid_argmax,
        search: Box::new(search),
        files: vec![grid.finish()?, opt.finish()?],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn utility_surface_argmax() {
        let dir = tempfile::tempdir().unwrap();
        let fig = Figure::UtilitySurface;
        let out = reproduce_figure(fig, &fig.builtin_scenario(), dir.path(), 11).unwrap();
        let FigureOutcome::UtilitySurface { argmax, files } = out else { panic!() };
        assert!((argmax[0] - 41.42).abs() < 0.01);
        assert!((argmax[1] - 46.41).abs() < 0.01);
        assert!((argmax[2] - 121.68).abs() < 0.01);
        let grid = std::fs::read_to_string(&files[0]).unwrap();
        assert_eq!(grid.lines().count(), 1 + 11 * 11);
        assert!(grid.lines().nth(1).unwrap().starts_with("0,0,0,1"));
    }

    #[test]
    fn leader_surfaces_peak_near_reference_payments() {
        let dir = tempfile::tempdir().unwrap();
        let mut totals = Vec::new();
        for (fig, want) in [(Figure::LeaderSurface, [4.0, 6.0]), (Figure::LeaderSurfaceHighPriority, [11.0, 15.0])] {
            let out = reproduce_figure(fig, &fig.builtin_scenario(), dir.path(), DEFAULT_GRID_POINTS).unwrap();
            let FigureOutcome::LeaderSurface { grid_argmax, search, .. } = out else { panic!() };
            assert!((grid_argmax.payments[0] - want[0]).abs() <= 1.0);
            assert!((grid_argmax.payments[1] - want[1]).abs() <= 1.0);
            assert_eq!(grid_argmax.payments.as_slice(), search.best_payments.as_slice());
            totals.push(grid_argmax.total_resources);
        }
        assert!(totals[1] >= 2.4 * totals[0]);
    }

    #[test]
    fn bad_inputs() {
        assert!(Figure::from_number(1).is_err());
        let dir = tempfile::tempdir().unwrap();
        let s = Figure::Convergence.builtin_scenario();
        assert!(reproduce_figure(Figure::UtilitySurface, &s, dir.path(), 10).is_err());
        assert!(reproduce_figure(Figure::Convergence, &s, dir.path(), 0).is_err());
    }
}
