//! Central finite differences and a symmetric eigenvalue helper.

use nalgebra::DMatrix;

/// Central-difference gradient of `f` at `x`, one step per coordinate.
pub fn gradient<F>(f: F, x: &[f64], steps: &[f64]) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = steps[i];
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Hessian of a scalar function from second-order central differences of
/// function values only.
pub fn hessian<F>(f: F, x: &[f64], steps: &[f64]) -> DMatrix<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let n = x.len();
    let mut h = DMatrix::zeros(n, n);
    let mut p = x.to_vec();
    let f0 = f(x);
    for i in 0..n {
        let hi = steps[i];
        p[i] = x[i] + hi;
        let up = f(&p);
        p[i] = x[i] - hi;
        let down = f(&p);
        p[i] = x[i];
        h[(i, i)] = (up - 2.0 * f0 + down) / (hi * hi);
        for j in 0..i {
            let hj = steps[j];
            let mut corner = |si: f64, sj: f64| {
                p[i] = x[i] + si * hi;
                p[j] = x[j] + sj * hj;
                let v = f(&p);
                p[i] = x[i];
                p[j] = x[j];
                v
            };
            let v = (corner(1.0, 1.0) - corner(1.0, -1.0) - corner(-1.0, 1.0)
                + corner(-1.0, -1.0))
                / (4.0 * hi * hj);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    h
}

/// Jacobian of a vector field by central differences: entry `(i, j)` is
/// `∂g_i/∂x_j`.
pub fn jacobian<G>(g: G, x: &[f64], steps: &[f64]) -> DMatrix<f64>
where
    G: Fn(&[f64]) -> Vec<f64>,
{
    let n = x.len();
    let rows = g(x).len();
    let mut jac = DMatrix::zeros(rows, n);
    let mut p = x.to_vec();
    for j in 0..n {
        let h = steps[j];
        p[j] = x[j] + h;
        let up = g(&p);
        p[j] = x[j] - h;
        let down = g(&p);
        p[j] = x[j];
        for i in 0..rows {
            jac[(i, j)] = (up[i] - down[i]) / (2.0 * h);
        }
    }
    jac
}

/// Largest eigenvalue of the symmetric part `(A + Aᵀ)/2`.
pub fn max_symmetric_eigenvalue(a: &DMatrix<f64>) -> f64 {
    let sym = (a + a.transpose()) * 0.5;
    sym.symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}
