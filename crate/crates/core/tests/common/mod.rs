//! Independent oracles shared by the integration tests and the acceptance
//! runner.
#![allow(dead_code)]

use gpc_rotation::basis::{BasisSet, PolynomialFamily};
use gpc_rotation::benchmarks::{ridge_eval, ridge_exact_rotation};
use gpc_rotation::quadrature::smolyak_grid;
use gpc_rotation::sampling::{sample_inputs, InputDistribution};
use minilp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector};

/// Nyström discretization of the covariance operator with the trapezoid rule
/// on a uniform grid of `panels` panels over [0, 1]. The kernel's kink lies
/// on the grid diagonal, so the error expands in even powers of h.
pub struct Nystrom {
    pub values: Vec<f64>,
    pub weights: Vec<f64>,
    // column c: mode c at the grid nodes
    pub functions: DMatrix<f64>,
}

pub fn nystrom(l_c: f64, panels: usize) -> Nystrom {
    let n = panels + 1;
    let h = 1.0 / panels as f64;
    let x: Vec<f64> = (0..n).map(|i| i as f64 * h).collect();
    let w: Vec<f64> = (0..n).map(|i| if i == 0 || i == n - 1 { h / 2.0 } else { h }).collect();
    let k = DMatrix::from_fn(n, n, |i, j| w[i].sqrt() * (-(x[i] - x[j]).abs() / l_c).exp() * w[j].sqrt());
    let eig = k.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    Nystrom {
        values: order.iter().map(|&i| eig.eigenvalues[i]).collect(),
        functions: DMatrix::from_fn(n, n, |j, c| eig.eigenvectors[(j, order[c])] / w[j].sqrt()),
        weights: w,
    }
}

/// One Richardson step over 400 and 800 panels.
pub fn extrapolated_eigenvalues(l_c: f64, d: usize) -> Vec<f64> {
    let (coarse, fine) = (nystrom(l_c, 400), nystrom(l_c, 800));
    (0..d).map(|i| (4.0 * fine.values[i] - coarse.values[i]) / 3.0).collect()
}

pub fn gaussian_matrix(m: usize, n: usize, seed: u64) -> DMatrix<f64> {
    sample_inputs(InputDistribution::GaussianStd, n, m, seed) / (m as f64).sqrt()
}

pub fn sparse_data(psi: &DMatrix<f64>, support: &[(usize, f64)]) -> Vec<f64> {
    let mut c = DVector::zeros(psi.ncols());
    for &(j, v) in support {
        c[j] = v;
    }
    (psi * c).iter().copied().collect()
}

/// min ‖c‖₁ s.t. Ψc = u, as an LP in (c⁺, c⁻) ≥ 0.
pub fn lp_basis_pursuit(psi: &DMatrix<f64>, u: &[f64]) -> f64 {
    let n = psi.ncols();
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let pos: Vec<_> = (0..n).map(|_| lp.add_var(1.0, (0.0, f64::INFINITY))).collect();
    let neg: Vec<_> = (0..n).map(|_| lp.add_var(1.0, (0.0, f64::INFINITY))).collect();
    for (i, &ui) in u.iter().enumerate() {
        let expr: Vec<_> = (0..n)
            .flat_map(|j| [(pos[j], psi[(i, j)]), (neg[j], -psi[(i, j)])])
            .collect();
        lp.add_constraint(expr, ComparisonOp::Eq, ui);
    }
    lp.solve().expect("LP solvable").objective()
}

/// Instance `k` of the LP-oracle family: M in 10..=40, N in M+5..=60,
/// alternating dense and sparse right-hand sides.
pub fn lp_instance(k: u64) -> (DMatrix<f64>, Vec<f64>) {
    let m = 10 + (k as usize * 7) % 31;
    let n = (m + 5 + (k as usize * 13) % 25).min(60);
    let psi = gaussian_matrix(m, n, 100 + k);
    let u = if k.is_multiple_of(2) {
        sample_inputs(InputDistribution::UniformSym, 1, m, 200 + k).iter().copied().collect()
    } else {
        let s = 1 + (k as usize % 4);
        let support: Vec<(usize, f64)> = (0..s).map(|i| ((i * 11 + k as usize) % n, if i % 2 == 0 { 1.0 } else { -0.5 })).collect();
        sparse_data(&psi, &support)
    };
    (psi, u)
}

/// Coefficients of the ridge function composed with the exact rotation in
/// the Legendre d=12, P=3 basis, by level-4 Smolyak projection.
pub fn rotated_ridge_projection() -> (BasisSet, Vec<f64>) {
    let basis = BasisSet::new(PolynomialFamily::Legendre, 12, 3).unwrap();
    let a = ridge_exact_rotation(12);
    let grid = smolyak_grid(PolynomialFamily::Legendre, 12, 4).unwrap();
    let mut c = vec![0.0; basis.len()];
    let mut psi = vec![0.0; basis.len()];
    for q in 0..grid.len() {
        let eta = grid.node(q);
        let xi: Vec<f64> = (a.matrix().transpose() * DVector::from_column_slice(&eta)).iter().copied().collect();
        let u = ridge_eval(&xi);
        basis.eval_into(&eta, &mut psi);
        for (cn, p) in c.iter_mut().zip(&psi) {
            *cn += grid.weights[q] * u * p;
        }
    }
    (basis, c)
}
