//! Numerical evidence for existence and uniqueness of the followers'
//! equilibrium: own-row concavity of every utility, and negative
//! definiteness of the symmetrised Jacobian of the weighted pseudo-gradient
//! (diagonal strict concavity).

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{positive, same_len, Result};
use crate::game::{row_gradient, row_utility, AllocationMatrix, PaymentVector, ScenarioConfig};
use crate::numdiff;

/// Largest Hessian eigenvalue still accepted as negative semidefinite.
pub const HESSIAN_EIGEN_TOL: f64 = 1e-6;

/// Eigenvalues within this distance of zero are reported as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-10;

const REL_STEP: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct ConcavityReport {
    /// Worst (largest) Hessian eigenvalue over all samples and followers.
    pub max_eigenvalue: f64,
    pub samples: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DscReport {
    /// Worst (largest) eigenvalue of `G + Gᵀ` over all samples.
    pub max_eigenvalue: f64,
    pub samples: usize,
    pub pass: bool,
    /// The worst eigenvalue is zero to within [`DEGENERACY_TOL`].
    pub degenerate: bool,
}

/// Interior profile with every entry in `[0.05 R_n, 0.95 R_n / M]`.
pub fn sample_interior_allocation<R: Rng>(config: &ScenarioConfig, rng: &mut R) -> AllocationMatrix {
    let m = config.num_shards();
    let mut alloc = AllocationMatrix::zeros(config.num_followers(), m);
    for (n, f) in config.followers.iter().enumerate() {
        let hi = (0.95 / m as f64).max(0.05 + 1e-9);
        let row: Vec<f64> = (0..m)
            .map(|_| f.capacity * rng.random_range(0.05..hi))
            .collect();
        alloc.set_row(n, &row);
    }
    alloc
}

fn row_steps(config: &ScenarioConfig, n: usize) -> Vec<f64> {
    vec![REL_STEP * config.followers[n].capacity; config.num_shards()]
}

/// Finite-difference Hessian of follower `n`'s utility in its own row.
pub fn own_hessian(
    config: &ScenarioConfig,
    payments: &PaymentVector,
    alloc: &AllocationMatrix,
    n: usize,
) -> DMatrix<f64> {
    let others = alloc.others_totals(n);
    let cost = config.followers[n].unit_cost;
    let f = |row: &[f64]| row_utility(row, &others, payments.as_slice(), cost);
    numdiff::hessian(f, alloc.row(n), &row_steps(config, n))
}

/// Finite-difference Jacobian of the stacked pseudo-gradient
/// `(ω_n ∇_{r_n} U_n)_n`, indexed row-major by `(follower, shard)`.
pub fn pseudo_gradient_jacobian(
    config: &ScenarioConfig,
    payments: &PaymentVector,
    weights: &[f64],
    alloc: &AllocationMatrix,
) -> DMatrix<f64> {
    let (nf, ns) = (alloc.followers(), alloc.shards());
    let g = |flat: &[f64]| -> Vec<f64> {
        let rows: Vec<Vec<f64>> = flat.chunks(ns).map(<[f64]>::to_vec).collect();
        let point = AllocationMatrix::from_rows(rows).expect("probe stays non-negative");
        let mut out = Vec::with_capacity(nf * ns);
        for n in 0..nf {
            let grad = row_gradient(
                point.row(n),
                &point.others_totals(n),
                payments.as_slice(),
                config.followers[n].unit_cost,
            );
            out.extend(grad.into_iter().map(|d| weights[n] * d));
        }
        out
    };
    let steps: Vec<f64> = (0..nf).flat_map(|n| row_steps(config, n)).collect();
    numdiff::jacobian(g, alloc.entries(), &steps)
}

/// Check every follower's utility is concave in its own row at
/// `num_samples` random interior profiles.
pub fn concavity_check(
    config: &ScenarioConfig,
    payments: &PaymentVector,
    num_samples: usize,
) -> Result<ConcavityReport> {
    config.validate()?;
    config.check_payments(payments)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..num_samples {
        let alloc = sample_interior_allocation(config, &mut rng);
        for n in 0..config.num_followers() {
            let h = own_hessian(config, payments, &alloc, n);
            worst = worst.max(numdiff::max_symmetric_eigenvalue(&h));
        }
    }
    Ok(ConcavityReport {
        max_eigenvalue: worst,
        samples: num_samples,
        pass: num_samples > 0 && worst <= HESSIAN_EIGEN_TOL,
    })
}

/// Check `G + Gᵀ` is negative definite at `num_samples` random interior
/// profiles, where `G` is the Jacobian of the `weights`-scaled
/// pseudo-gradient.
pub fn rosen_dsc_check(
    config: &ScenarioConfig,
    payments: &PaymentVector,
    weights: &[f64],
    num_samples: usize,
) -> Result<DscReport> {
    config.validate()?;
    config.check_payments(payments)?;
    same_len("weights", config.num_followers(), weights.len())?;
    for &w in weights {
        positive("weight", w)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..num_samples {
        let alloc = sample_interior_allocation(config, &mut rng);
        let jac = pseudo_gradient_jacobian(config, payments, weights, &alloc);
        // Eigenvalues of G + Gᵀ are twice those of its symmetric part.
        worst = worst.max(2.0 * numdiff::max_symmetric_eigenvalue(&jac));
    }
    let degenerate = worst.abs() <= DEGENERACY_TOL;
    Ok(DscReport {
        max_eigenvalue: worst,
        samples: num_samples,
        pass: num_samples > 0 && worst < -DEGENERACY_TOL,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{FollowerSpec, ShardSpec};

    fn config(specs: &[(f64, f64)], shards: usize) -> ScenarioConfig {
        let followers = specs
            .iter()
            .enumerate()
            .map(|(i, &(r, c))| FollowerSpec::new(format!("f{i}"), r, c).unwrap())
            .collect();
        let shards = (0..shards)
            .map(|m| ShardSpec::new(format!("s{m}"), 1.0).unwrap())
            .collect();
        ScenarioConfig::new(followers, shards).unwrap().with_seed(5)
    }

    fn reference() -> ScenarioConfig {
        config(&[(100.0, 0.2), (200.0, 0.1), (300.0, 0.3), (500.0, 0.2)], 2)
    }

    fn pay(p: &[f64]) -> PaymentVector {
        PaymentVector::new(p.to_vec()).unwrap()
    }

    #[test]
    fn single_shard_second_derivative() {
        // d²/dr² of P r/(r+T) is −2 P T/(r+T)³ = −0.25 at P=100, T=10, r=10.
        let cfg = config(&[(1000.0, 1.0), (1000.0, 1.0)], 1);
        let alloc = AllocationMatrix::from_rows(vec![vec![10.0], vec![10.0]]).unwrap();
        let h = own_hessian(&cfg, &pay(&[100.0]), &alloc, 0);
        assert!((h[(0, 0)] + 0.25).abs() < 1e-4, "{}", h[(0, 0)]);
    }

    #[test]
    fn reference_scenario_is_concave() {
        let report = concavity_check(&reference(), &pay(&[100.0, 200.0]), 100).unwrap();
        assert!(report.pass, "{report:?}");
        assert!(report.max_eigenvalue < 0.0);
    }

    #[test]
    fn zero_payments_are_flat() {
        let cfg = reference();
        let c = concavity_check(&cfg, &pay(&[0.0, 0.0]), 20).unwrap();
        assert!(c.pass);
        assert!(c.max_eigenvalue.abs() < 1e-8);

        let d = rosen_dsc_check(&cfg, &pay(&[0.0, 0.0]), &[1.0; 4], 20).unwrap();
        assert!(d.degenerate, "{d:?}");
        assert!(!d.pass);
    }

    #[test]
    fn reference_scenario_is_diagonally_strictly_concave() {
        let d = rosen_dsc_check(&reference(), &pay(&[100.0, 200.0]), &[1.0; 4], 50).unwrap();
        assert!(d.pass, "{d:?}");
        let weighted =
            rosen_dsc_check(&reference(), &pay(&[100.0, 200.0]), &[1.0, 2.0, 0.5, 1.0], 20)
                .unwrap();
        assert!(weighted.max_eigenvalue.is_finite());
    }

    #[test]
    fn diagonal_blocks_match_own_hessians() {
        let cfg = reference();
        let p = pay(&[100.0, 200.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let alloc = sample_interior_allocation(&cfg, &mut rng);
        let jac = pseudo_gradient_jacobian(&cfg, &p, &[1.0; 4], &alloc);
        for n in 0..4 {
            let h = own_hessian(&cfg, &p, &alloc, n);
            let block = jac.view((2 * n, 2 * n), (2, 2));
            assert!((block - &h).abs().max() < 1e-6, "follower {n}");
        }
    }

    #[test]
    fn rejects_bad_weights() {
        let cfg = reference();
        let p = pay(&[1.0, 1.0]);
        assert!(rosen_dsc_check(&cfg, &p, &[1.0; 3], 1).is_err());
        assert!(rosen_dsc_check(&cfg, &p, &[1.0, 1.0, 0.0, 1.0], 1).is_err());
    }
}
