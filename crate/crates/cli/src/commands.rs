use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use shardgame_core::equilibrium::{
    concavity_check, rosen_dsc_check, solve_followers_equilibrium, uniqueness_probe, Init,
    HESSIAN_EIGEN_TOL,
};
use shardgame_core::follower::{best_response, BestResponseInput};
use shardgame_core::leader::search_payments;
use shardgame_core::payout::{simulate_pay_per_share, ShareSampling};
use shardgame_core::{AllocationMatrix, EquilibriumResult, ScenarioConfig};

use crate::error::{CliError, Result};
use crate::report::{num, CsvReport};
use crate::scenario::Scenario;

pub const VERIFY_SAMPLES: usize = 100;
pub const VERIFY_SEEDS: usize = 10;
pub const UNIQUENESS_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Equilibrium,
    Stackelberg,
    Verify,
    Payout,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub summary: String,
    pub files: Vec<PathBuf>,
}

pub fn run_scenario(scenario: &Scenario, command: Command, out_dir: &Path) -> Result<RunOutput> {
    match command {
        Command::Equilibrium => equilibrium(scenario, out_dir),
        Command::Stackelberg => stackelberg(scenario, out_dir),
        Command::Verify => verify(scenario, out_dir),
        Command::Payout => payout(scenario, out_dir),
    }
}

fn write_allocation(
    cfg: &ScenarioConfig,
    eq: &EquilibriumResult,
    out_dir: &Path,
    name: &str,
) -> Result<PathBuf> {
    let mut csv = CsvReport::create(
        out_dir,
        name,
        &["follower_id", "shard_id", "allocation", "row_total", "capacity", "utility"],
    )?;
    for (n, f) in cfg.followers.iter().enumerate() {
        for (m, s) in cfg.shards.iter().enumerate() {
            csv.row([
                f.id.clone(),
                s.id.clone(),
                num(eq.allocation.get(n, m)),
                num(eq.allocation.row_total(n)),
                num(f.capacity),
                num(eq.follower_utilities[n]),
            ])?;
        }
    }
    csv.finish()
}

fn describe_equilibrium(cfg: &ScenarioConfig, eq: &EquilibriumResult, out: &mut String) {
    let _ = writeln!(
        out,
        "converged: {} after {} sweeps (residual {:.3e})",
        eq.converged, eq.sweeps, eq.residual
    );
    for (n, f) in cfg.followers.iter().enumerate() {
        let row: Vec<String> = eq.allocation.row(n).iter().map(|r| format!("{r:.4}")).collect();
        let total = eq.allocation.row_total(n);
        let at_cap = if total >= f.capacity - 1e-2 { "  [at capacity]" } else { "" };
        let _ = writeln!(
            out,
            "  {:<10} r = [{}]  total {:.4} / {}  utility {:.4}{at_cap}",
            f.id,
            row.join(", "),
            total,
            f.capacity,
            eq.follower_utilities[n]
        );
    }
    let _ = writeln!(out, "leader utility ({}): {:.6}", cfg.leader_variant, eq.leader_utility);
}

fn equilibrium(scenario: &Scenario, out_dir: &Path) -> Result<RunOutput> {
    let cfg = &scenario.config;
    let payments = scenario.require_payments()?;
    let eq = solve_followers_equilibrium(cfg, payments, Init::Uniform)?;
    let file = write_allocation(cfg, &eq, out_dir, "equilibrium.csv")?;
    let mut summary = format!("followers' equilibrium at P = {payments}\n");
    describe_equilibrium(cfg, &eq, &mut summary);
    if !eq.converged {
        return Err(CliError::NonConvergence(format!(
            "{summary}no fixed point within {} sweeps",
            cfg.max_sweeps
        )));
    }
    Ok(RunOutput {
        summary,
        files: vec![file],
    })
}

fn stackelberg(scenario: &Scenario, out_dir: &Path) -> Result<RunOutput> {
    let cfg = &scenario.config;
    let result = search_payments(cfg)?;
    let mut header = vec!["step".to_string()];
    header.extend(cfg.shards.iter().map(|s| format!("payment_{}", s.id)));
    header.extend(["leader_utility".into(), "converged".into()]);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut trace = CsvReport::create(out_dir, "leader_trace.csv", &header)?;
    for (i, e) in result.trace.iter().enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(e.payments.as_slice().iter().map(|&p| num(p)));
        row.push(num(e.leader_utility));
        row.push(u8::from(e.converged).to_string());
        trace.row(row)?;
    }
    let files = vec![
        trace.finish()?,
        write_allocation(cfg, &result.equilibrium, out_dir, "stackelberg_allocation.csv")?,
    ];
    let skipped = result.trace.iter().filter(|e| !e.converged).count();
    let mut summary = format!(
        "leader optimum P* = {}  U_L* = {:.6}  ({} evaluations, {skipped} unconverged)\n",
        result.best_payments,
        result.best_utility,
        result.trace.len()
    );
    describe_equilibrium(cfg, &result.equilibrium, &mut summary);
    Ok(RunOutput { summary, files })
}

fn verify(scenario: &Scenario, out_dir: &Path) -> Result<RunOutput> {
    let cfg = &scenario.config;
    let payments = scenario.require_payments()?;
    let concavity = concavity_check(cfg, payments, VERIFY_SAMPLES)?;
    let weights = vec![1.0; cfg.num_followers()];
    let dsc = rosen_dsc_check(cfg, payments, &weights, VERIFY_SAMPLES)?;
    let unique = uniqueness_probe(cfg, payments, VERIFY_SEEDS)?;
    let unique_pass = unique.non_converged == 0 && unique.max_deviation <= UNIQUENESS_TOL;

    let mut csv = CsvReport::create(out_dir, "verify.csv", &["check", "statistic", "threshold", "pass"])?;
    csv.row([
        "own_row_concavity".into(),
        num(concavity.max_eigenvalue),
        num(HESSIAN_EIGEN_TOL),
        u8::from(concavity.pass).to_string(),
    ])?;
    csv.row([
        "diagonal_strict_concavity".into(),
        num(dsc.max_eigenvalue),
        "0".into(),
        u8::from(dsc.pass).to_string(),
    ])?;
    csv.row([
        "uniqueness_deviation".into(),
        num(unique.max_deviation),
        num(UNIQUENESS_TOL),
        u8::from(unique_pass).to_string(),
    ])?;
    let file = csv.finish()?;

    let verdict = |ok: bool| if ok { "pass" } else { "FAIL" };
    let mut summary = String::new();
    let _ = writeln!(
        summary,
        "concavity: max own-row Hessian eigenvalue {:.3e} over {} samples -> {}",
        concavity.max_eigenvalue,
        concavity.samples,
        verdict(concavity.pass)
    );
    let _ = writeln!(
        summary,
        "diagonal strict concavity: max eigenvalue of G + Gᵀ {:.3e} over {} samples -> {}{}",
        dsc.max_eigenvalue,
        dsc.samples,
        verdict(dsc.pass),
        if dsc.degenerate { " (degenerate)" } else { "" }
    );
    let _ = writeln!(
        summary,
        "uniqueness: max deviation {:.3e} over {} starts ({} unconverged) -> {}",
        unique.max_deviation,
        unique.runs,
        unique.non_converged,
        verdict(unique_pass)
    );
    if unique.non_converged > 0 {
        return Err(CliError::NonConvergence(summary));
    }
    Ok(RunOutput {
        summary,
        files: vec![file],
    })
}

fn payout(scenario: &Scenario, out_dir: &Path) -> Result<RunOutput> {
    let cfg = &scenario.config;
    let payments = scenario.require_payments()?;
    // With a focal follower the ledger covers that follower against its
    // aggregated opponents; otherwise it covers the full equilibrium.
    let (allocation, labels) = match &scenario.focal {
        Some(focal) => {
            let spec = &cfg.followers[focal.follower];
            let input = BestResponseInput::new(
                payments.clone(),
                focal.opponents_totals.clone(),
                spec.unit_cost,
                spec.capacity,
            )?
            .with_grain(cfg.epsilon_grain);
            let row = best_response(&input)?.allocation;
            let alloc = AllocationMatrix::from_rows(vec![row, focal.opponents_totals.clone()])?;
            (alloc, vec![spec.id.clone(), "opponents".to_string()])
        }
        None => {
            let eq = solve_followers_equilibrium(cfg, payments, Init::Uniform)?;
            if !eq.converged {
                return Err(CliError::NonConvergence(format!(
                    "equilibrium at P = {payments} did not converge within {} sweeps",
                    cfg.max_sweeps
                )));
            }
            (eq.allocation, cfg.followers.iter().map(|f| f.id.clone()).collect())
        }
    };
    let ledger = simulate_pay_per_share(
        &allocation,
        payments,
        scenario.payout.shares_per_unit,
        scenario.payout.rounds,
        cfg.rng_seed,
        ShareSampling::Poisson,
    )?;
    let mut csv = CsvReport::create(
        out_dir,
        "payout.csv",
        &[
            "follower_id",
            "shard_id",
            "allocation",
            "expected_tokens",
            "simulated_tokens",
            "shares_observed",
            "relative_error",
        ],
    )?;
    for (n, label) in labels.iter().enumerate() {
        for (m, s) in cfg.shards.iter().enumerate() {
            let e = ledger.entry(n, m);
            csv.row([
                label.clone(),
                s.id.clone(),
                num(allocation.get(n, m)),
                num(e.expected_tokens),
                num(e.simulated_tokens),
                num(e.shares_observed),
                num(e.relative_error),
            ])?;
        }
    }
    let summary = format!(
        "pay-per-share over {} rounds (κ = {}): max relative error {:.3e}, max per-round conservation error {:e}\n",
        ledger.rounds,
        scenario.payout.shares_per_unit,
        ledger.max_relative_error(),
        ledger.max_conservation_error
    );
    Ok(RunOutput {
        summary,
        files: vec![csv.finish()?],
    })
}
