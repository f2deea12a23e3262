//! Cross-checks of the solvers against independently derived answers.

use proptest::prelude::*;
use shardgame_core::equilibrium::{solve_followers_equilibrium, Init};
use shardgame_core::follower::{best_response, projected_gradient_oracle, BestResponseInput};
use shardgame_core::game::{follower_utility, row_gradient, row_utility};
use shardgame_core::leader::{interior_benchmark, search_payments, tullock_equilibrium};
use shardgame_core::payout::{simulate_pay_per_share, ShareSampling};
use shardgame_core::{FollowerSpec, PaymentVector, ScenarioConfig, ShardSpec};

fn contest_config(costs: &[f64]) -> ScenarioConfig {
    let followers = costs
        .iter()
        .enumerate()
        .map(|(k, &c)| FollowerSpec::new(format!("f{k}"), 1e6, c).unwrap())
        .collect();
    ScenarioConfig::new(followers, vec![ShardSpec::new("s", 1.0).unwrap()])
        .unwrap()
        .with_br_tolerance(1e-10)
        .with_max_sweeps(100_000)
}

fn reference_followers() -> Vec<FollowerSpec> {
    [(100.0, 0.2), (200.0, 0.1), (300.0, 0.3), (500.0, 0.2)]
        .iter()
        .enumerate()
        .map(|(i, &(r, c))| FollowerSpec::new(format!("mu{}", i + 1), r, c).unwrap())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn dynamics_reach_closed_form_contest(
        costs in prop::collection::vec(0.05f64..1.0, 2..=6),
        payment in 1.0f64..100.0,
    ) {
        let cfg = contest_config(&costs);
        let eq = solve_followers_equilibrium(&cfg, &PaymentVector::new(vec![payment]).unwrap(), Init::Uniform).unwrap();
        prop_assert!(eq.converged);
        let oracle = tullock_equilibrium(payment, &costs).unwrap();
        for (k, want) in oracle.contributions.iter().enumerate() {
            prop_assert!((eq.allocation.get(k, 0) - want).abs() <= 1e-3);
        }
    }

    #[test]
    fn kkt_matches_gradient_oracle(
        shards in prop::collection::vec((1.0f64..2000.0, 1.0f64..300.0), 1..=5),
        cost in 0.1f64..5.0,
        capacity in 1.0f64..300.0,
    ) {
        let (p, t): (Vec<f64>, Vec<f64>) = shards.into_iter().unzip();
        let input = BestResponseInput::new(PaymentVector::new(p).unwrap(), t, cost, capacity).unwrap();
        let kkt = best_response(&input).unwrap().allocation;
        let oracle = projected_gradient_oracle(&input, 1.0, 100_000).unwrap();
        prop_assert!(oracle.converged);
        for (a, b) in kkt.iter().zip(&oracle.allocation) {
            prop_assert!((a - b).abs() <= 1e-3, "{kkt:?} vs {:?}", oracle.allocation);
        }
        prop_assert!(input.utility(&kkt) >= input.utility(&oracle.allocation) - 1e-9);
    }

    #[test]
    fn gradient_matches_finite_differences(
        entries in prop::collection::vec((1.0f64..2000.0, 1.0f64..300.0, 0.0f64..100.0), 1..=5),
        cost in 0.1f64..5.0,
    ) {
        let p: Vec<f64> = entries.iter().map(|e| e.0).collect();
        let t: Vec<f64> = entries.iter().map(|e| e.1).collect();
        let r: Vec<f64> = entries.iter().map(|e| e.2).collect();
        let g = row_gradient(&r, &t, &p, cost);
        for k in 0..r.len() {
            let h = 1e-3 * (r[k] + t[k]);
            let at = |d: f64| {
                let mut x = r.clone();
                x[k] += d;
                row_utility(&x, &t, &p, cost)
            };
            let fd = (8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h);
            prop_assert!((g[k] - fd).abs() <= 1e-6 * g[k].abs().max(1e-12) + 1e-9);
        }
    }
}

#[test]
fn equilibrium_rows_are_mutual_best_responses() {
    let cfg = ScenarioConfig::new(
        reference_followers(),
        vec![ShardSpec::new("s1", 4.0).unwrap(), ShardSpec::new("s2", 6.0).unwrap()],
    )
    .unwrap()
    .with_br_tolerance(1e-10);
    let p = PaymentVector::new(vec![100.0, 200.0]).unwrap();
    let eq = solve_followers_equilibrium(&cfg, &p, Init::Uniform).unwrap();
    assert!(eq.converged);
    for (n, spec) in cfg.followers.iter().enumerate() {
        let input = BestResponseInput::new(p.clone(), eq.allocation.others_totals(n), spec.unit_cost, spec.capacity).unwrap();
        let oracle = projected_gradient_oracle(&input, 1.0, 100_000).unwrap();
        for (a, b) in eq.allocation.row(n).iter().zip(&oracle.allocation) {
            assert!((a - b).abs() < 1e-4);
        }
        let u = follower_utility(n, &eq.allocation, &p, &cfg.followers).unwrap();
        assert!((u - eq.follower_utilities[n]).abs() < 1e-12);
    }
}

#[test]
fn leader_search_lands_on_interior_benchmark() {
    for alpha in [[4.0, 6.0], [10.0, 15.0]] {
        let shards = vec![ShardSpec::new("s1", alpha[0]).unwrap(), ShardSpec::new("s2", alpha[1]).unwrap()];
        let bench = interior_benchmark(&shards, &reference_followers()).unwrap();
        let cfg = ScenarioConfig::new(reference_followers(), shards).unwrap();
        let res = search_payments(&cfg).unwrap();
        assert_eq!(res.best_payments.as_slice(), bench.payments.as_slice());
        let total: f64 = res.equilibrium.allocation.shard_totals().iter().sum();
        let want: f64 = bench.totals.iter().sum();
        assert!((total - want).abs() < 0.01, "{total} vs {want}");
    }
}

#[test]
fn payout_converges_to_proportional_split() {
    let cfg = ScenarioConfig::new(
        reference_followers(),
        vec![ShardSpec::new("s1", 4.0).unwrap(), ShardSpec::new("s2", 6.0).unwrap()],
    )
    .unwrap();
    let p = PaymentVector::new(vec![100.0, 200.0]).unwrap();
    let eq = solve_followers_equilibrium(&cfg, &p, Init::Uniform).unwrap();
    let ledger = simulate_pay_per_share(&eq.allocation, &p, 10.0, 100_000, 11, ShareSampling::Poisson).unwrap();
    assert_eq!(ledger.max_conservation_error, 0.0);
    assert!(ledger.max_relative_error() <= 0.02);
}
