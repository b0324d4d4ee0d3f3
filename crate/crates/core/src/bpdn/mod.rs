//! ℓ1 minimization with a quadratic data-fidelity constraint,
//!
//! ```text
//! minimize ‖c‖₁  subject to  ‖Ψc − u‖₂ ≤ ε,
//! ```
//!
//! solved by root-finding on the Pareto curve φ(τ) = min{‖Ψc − u‖₂ : ‖c‖₁ ≤ τ}.
//! Each LASSO subproblem is solved by spectral projected gradient with a
//! non-monotone line search; τ is updated by Newton steps using
//! φ'(τ) = −‖Ψᵀr‖∞ / ‖r‖₂.
//!
//! The gradient phase ends with an exact finish: the multiplier
//! λ = ‖Ψᵀr‖∞ and the support of the gradient iterate seed a LASSO homotopy,
//! which is followed to the point with ‖r‖₂ = ε and certified through its
//! optimality conditions. If the seed is not optimal at λ the homotopy starts
//! from c = 0.

mod crossval;
mod homotopy;
mod spg;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};


pub use crossval::{cross_validate_epsilon, CrossValConfig, CrossValReport, CvRoute, SplitResult};
use homotopy::{step_budget, PathPoint, PathState};
use spg::{spg_root, Problem};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Relative optimality / feasibility tolerance.
    pub opt_tol: f64,
    pub max_iters: usize,
    /// Duality-gap tolerance for the LASSO subproblems.
    pub lasso_subproblem_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            opt_tol: 1e-6,
            max_iters: 10_000,
            lasso_subproblem_tol: 1e-6,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> crate::Result<()> {
        if !(self.opt_tol > 0.0) || self.max_iters < 1 || !(self.lasso_subproblem_tol > 0.0) {
            return Err(crate::Error::Config(
                "solver needs opt_tol > 0, lasso_subproblem_tol > 0 and max_iters >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    /// ε ≥ ‖u‖₂, the zero vector is optimal.
    Trivial,
    /// Optimality conditions verified at the returned point.
    Certified,
    /// Pareto root found by the gradient phase within tolerance.
    RootFound,
    /// ε = 0 and the residual was driven to round-off.
    BasisPursuit,
    /// Iteration budget or line search exhausted.
    NotConverged,
    /// ε is below the least-squares residual; the returned point is the
    /// least-squares solution reached by the path.
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct BpdnSolution {
    pub coeffs: Vec<f64>,
    pub residual_norm: f64,
    pub l1_norm: f64,
    pub iterations: usize,
    pub status: SolveStatus,
}

impl BpdnSolution {
    pub fn converged(&self) -> bool {
        !matches!(self.status, SolveStatus::NotConverged | SolveStatus::Infeasible)
    }
}

/// Residual bound the solver guarantees: ε(1+opt_tol), with a round-off
/// floor of 1e-12·‖u‖₂ so that ε = 0 has a meaningful target.
pub fn feasibility_bound(epsilon: f64, u_norm: f64, opt_tol: f64) -> f64 {
    epsilon * (1.0 + opt_tol) + 1e-12 * u_norm
}

pub fn project_l1_ball(v: &mut [f64], tau: f64) {
    let norm: f64 = v.iter().map(|x| x.abs()).sum();
    if norm <= tau {
        return;
    }
    if tau <= 0.0 {
        v.iter_mut().for_each(|x| *x = 0.0);
        return;
    }
    let mut mags: Vec<f64> = v.iter().map(|x| x.abs()).filter(|&x| x > 0.0).collect();
    mags.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut csum = 0.0;
    let mut theta = 0.0;
    for (k, &m) in mags.iter().enumerate() {
        csum += m;
        let t = (csum - tau) / (k + 1) as f64;
        if t < m {
            theta = t;
        } else {
            break;
        }
    }
    for x in v.iter_mut() {
        let m = (x.abs() - theta).max(0.0);
        *x = m.copysign(*x);
    }
}

fn l1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

// Blend an infeasible point toward the minimum-norm least-squares solution
// until the residual constraint holds.
fn repair(p: &Problem, sigma: f64, x: &DVector<f64>) -> Option<DVector<f64>> {
    let svd = p.a.clone().svd(true, true);
    let x_ls = svd.solve(&p.b, 1e-12).ok()?;
    let r_ls = p.residual(&x_ls).norm();
    if r_ls > sigma {
        return None;
    }
    let mut t: f64 = 1.0 / 64.0;
    loop {
        let xt = x + (&x_ls - x) * t;
        if p.residual(&xt).norm() <= sigma {
            return Some(xt);
        }
        if t >= 1.0 {
            return None;
        }
        t = (t * 2.0).min(1.0);
    }
}

/// min ‖c‖₁ s.t. ‖Ψc − u‖₂ ≤ ε.
pub fn solve_bpdn(psi: &DMatrix<f64>, u: &[f64], epsilon: f64, cfg: &SolverConfig) -> BpdnSolution {
    solve_bpdn_warm(psi, u, epsilon, cfg, None)
}

/// As [`solve_bpdn`], starting the root search from `warm` (its ℓ1 norm
/// seeds τ).
pub fn solve_bpdn_warm(
    psi: &DMatrix<f64>,
    u: &[f64],
    epsilon: f64,
    cfg: &SolverConfig,
    warm: Option<&[f64]>,
) -> BpdnSolution {
    assert_eq!(psi.nrows(), u.len(), "Ψ rows must match the data length");
    let n = psi.ncols();
    let b = DVector::from_column_slice(u);
    let b_norm = b.norm();
    if epsilon >= b_norm || b_norm == 0.0 {
        return BpdnSolution {
            coeffs: vec![0.0; n],
            residual_norm: b_norm,
            l1_norm: 0.0,
            iterations: 0,
            status: SolveStatus::Trivial,
        };
    }
    let problem = Problem {
        a: psi,
        b: &b / b_norm,
    };
    let sigma = epsilon / b_norm;
    let x0 = warm.map(|w| DVector::from_column_slice(w) / b_norm);
    let bound = feasibility_bound(sigma, 1.0, cfg.opt_tol);
    let mut finisher = Finisher {
        problem: &problem,
        sigma,
        bound,
        budget: step_budget(psi.nrows(), n),
        from_origin: None,
    };
    let mut early: Option<PathPoint> = None;
    let spg = spg_root(&problem, sigma, cfg, x0, &mut |x| match finisher.attempt(x) {
        Some(p) if finisher.accepts(&p) => {
            early = Some(p);
            true
        }
        _ => false,
    });

    let mut x = spg.x;
    let mut status = spg.status;
    let mut r_norm = problem.residual(&x).norm();
    let finished = match early {
        Some(p) => Some(p),
        None => finisher.attempt(&x),
    };
    if let Some(p) = finished {
        let rn = problem.residual(&p.x).norm();
        if finisher.accepts(&p) {
            x = p.x;
            r_norm = rn;
            status = SolveStatus::Certified;
        } else if !p.reached {
            x = p.x;
            r_norm = rn;
            status = SolveStatus::Infeasible;
        }
    }
    if r_norm > bound && status != SolveStatus::Infeasible {
        match repair(&problem, sigma, &x) {
            Some(xr) => {
                x = xr;
                r_norm = problem.residual(&x).norm();
            }
            None => status = SolveStatus::Infeasible,
        }
    }

    let coeffs: Vec<f64> = x.iter().map(|v| v * b_norm).collect();
    BpdnSolution {
        l1_norm: l1(&coeffs),
        coeffs,
        residual_norm: r_norm * b_norm,
        iterations: spg.iterations,
        status,
    }
}

/// Exact homotopy finish on the normalized problem.
struct Finisher<'a, 'p> {
    problem: &'a Problem<'p>,
    sigma: f64,
    bound: f64,
    budget: usize,
    /// Walk from c = 0; independent of the gradient iterate, so computed
    /// at most once.
    from_origin: Option<Option<PathPoint>>,
}

impl Finisher<'_, '_> {
    /// Path point at level σ, seeded from `x` when its support pattern is
    /// optimal, else from the origin.
    fn attempt(&mut self, x: &DVector<f64>) -> Option<PathPoint> {
        let (psi, b) = (self.problem.a, &self.problem.b);
        let lambda = inf_norm(psi.tr_mul(&self.problem.residual(x)).as_slice());
        let seeded = PathState::from_estimate(psi, b, x, lambda).and_then(|mut st| st.walk(psi, b, self.sigma, self.budget));
        match seeded {
            Some(p) if p.certified => Some(p),
            _ => self
                .from_origin
                .get_or_insert_with(|| PathState::at_origin(psi, b).and_then(|mut st| st.walk(psi, b, self.sigma, self.budget)))
                .clone(),
        }
    }

    fn accepts(&self, p: &PathPoint) -> bool {
        p.certified && self.problem.residual(&p.x).norm() <= self.bound
    }
}

/// Positive diagonal weights for weighted ℓ1.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(w: Vec<f64>) -> crate::Result<Self> {
        if w.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
            return Err(crate::Error::InvalidArgument(
                "weights must be positive and finite".into(),
            ));
        }
        Ok(Self(w))
    }

    pub fn ones(n: usize) -> Self {
        Self(vec![1.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// min ‖diag(w)c‖₁ s.t. ‖Ψc − u‖₂ ≤ ε, via c′ = diag(w)c and Ψ′ = Ψ diag(w)⁻¹.
pub fn solve_weighted_bpdn(
    psi: &DMatrix<f64>,
    u: &[f64],
    epsilon: f64,
    w: &WeightVector,
    cfg: &SolverConfig,
) -> BpdnSolution {
    solve_weighted_bpdn_warm(psi, u, epsilon, w, cfg, None)
}

/// As [`solve_weighted_bpdn`], with the root search started from `warm`
/// (in the original coordinates).
pub fn solve_weighted_bpdn_warm(
    psi: &DMatrix<f64>,
    u: &[f64],
    epsilon: f64,
    w: &WeightVector,
    cfg: &SolverConfig,
    warm: Option<&[f64]>,
) -> BpdnSolution {
    let w = w.as_slice();
    assert_eq!(w.len(), psi.ncols());
    let mut scaled = psi.clone();
    for (j, &wj) in w.iter().enumerate() {
        let inv = 1.0 / wj;
        scaled.column_mut(j).iter_mut().for_each(|v| *v *= inv);
    }
    let warm: Option<Vec<f64>> = warm.map(|c| c.iter().zip(w).map(|(c, wj)| c * wj).collect());
    let mut sol = solve_bpdn_warm(&scaled, u, epsilon, cfg, warm.as_deref());
    for (c, &wj) in sol.coeffs.iter_mut().zip(w) {
        *c /= wj;
    }
    sol.l1_norm = l1(&sol.coeffs);
    sol
}

/// Default number of re-weighting passes.
pub const DEFAULT_REWEIGHT_ITERS: usize = 3;

/// Stabilizer δ = 1e-3 · max(1, ‖c‖∞).
pub fn reweight_delta(c: &[f64]) -> f64 {
    1e-3 * inf_norm(c).max(1.0)
}

/// Re-weighted ℓ1: the first pass is unweighted, later passes use
/// w_i = 1/(|c_i| + δ) from the previous solution.
pub fn reweighted_l1(
    psi: &DMatrix<f64>,
    u: &[f64],
    epsilon: f64,
    iters: usize,
    cfg: &SolverConfig,
) -> BpdnSolution {
    assert!(iters >= 1);
    let mut sol = solve_bpdn(psi, u, epsilon, cfg);
    for _ in 1..iters {
        let delta = reweight_delta(&sol.coeffs);
        let w = WeightVector(sol.coeffs.iter().map(|c| 1.0 / (c.abs() + delta)).collect());
        sol = solve_weighted_bpdn_warm(psi, u, epsilon, &w, cfg, Some(&sol.coeffs));
    }
    sol
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{open_unit, rng_from_seed};
    use rand::RngCore;

    fn gaussian_matrix(m: usize, n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = rng_from_seed(seed);
        let normal = crate::sampling::InputDistribution::GaussianStd;
        DMatrix::from_fn(m, n, |_, _| normal.transform(open_unit(&mut rng)) / (m as f64).sqrt())
    }

    #[test]
    fn projection_onto_ball() {
        let mut v = vec![3.0, -1.0, 0.5];
        project_l1_ball(&mut v, 2.0);
        assert!((l1(&v) - 2.0).abs() < 1e-14);
        assert_eq!(v, vec![2.0, 0.0, 0.0]);
        let mut w = vec![0.2, -0.1];
        project_l1_ball(&mut w, 1.0);
        assert_eq!(w, vec![0.2, -0.1]);
        let mut z = vec![1.0, 1.0];
        project_l1_ball(&mut z, 0.0);
        assert_eq!(z, vec![0.0, 0.0]);
    }

    #[test]
    fn large_epsilon_gives_zero() {
        let psi = gaussian_matrix(5, 8, 1);
        let u = vec![1.0, 2.0, 0.0, -1.0, 0.5];
        let norm = u.iter().map(|x: &f64| x * x).sum::<f64>().sqrt();
        let sol = solve_bpdn(&psi, &u, norm, &SolverConfig::default());
        assert!(sol.coeffs.iter().all(|&c| c == 0.0));
        assert_eq!(sol.status, SolveStatus::Trivial);
    }

    #[test]
    fn identity_system() {
        let psi = DMatrix::identity(3, 3);
        let sol = solve_bpdn(&psi, &[1.0, 0.5, 0.0], 0.0, &SolverConfig::default());
        for (c, e) in sol.coeffs.iter().zip([1.0, 0.5, 0.0]) {
            assert!((c - e).abs() < 1e-12);
        }
    }

    #[test]
    fn recovers_sparse_vector() {
        let psi = gaussian_matrix(40, 100, 7);
        let mut c0 = vec![0.0; 100];
        c0[3] = 1.0;
        c0[41] = -1.0;
        c0[77] = 1.0;
        let u: Vec<f64> = (&psi * DVector::from_column_slice(&c0)).iter().copied().collect();
        let sol = solve_bpdn(&psi, &u, 0.0, &SolverConfig::default());
        for (c, e) in sol.coeffs.iter().zip(&c0) {
            assert!((c - e).abs() < 1e-5, "{c} vs {e}");
        }
        assert!(sol.converged());
    }

    #[test]
    fn feasible_with_noise() {
        let psi = gaussian_matrix(30, 60, 3);
        let mut rng = rng_from_seed(4);
        let u: Vec<f64> = (0..30).map(|_| (rng.next_u64() % 1000) as f64 / 500.0 - 1.0).collect();
        let cfg = SolverConfig::default();
        for eps in [0.01, 0.1, 0.5, 1.0] {
            let sol = solve_bpdn(&psi, &u, eps, &cfg);
            assert!(sol.residual_norm <= feasibility_bound(eps, 0.0, cfg.opt_tol) + 1e-12);
        }
    }

    #[test]
    fn unit_weights_match_unweighted_bitwise() {
        let psi = gaussian_matrix(20, 45, 9);
        let mut c0 = vec![0.0; 45];
        c0[2] = 0.7;
        c0[30] = -1.2;
        let u: Vec<f64> = (&psi * DVector::from_column_slice(&c0)).iter().copied().collect();
        let cfg = SolverConfig::default();
        let a = solve_bpdn(&psi, &u, 0.05, &cfg);
        let b = solve_weighted_bpdn(&psi, &u, 0.05, &WeightVector::ones(45), &cfg);
        assert_eq!(a.coeffs, b.coeffs);
        let r1 = reweighted_l1(&psi, &u, 0.05, 1, &cfg);
        assert_eq!(a.coeffs, r1.coeffs);
    }

    #[test]
    fn huge_weight_suppresses_column() {
        let psi = gaussian_matrix(20, 45, 10);
        let mut c0 = vec![0.0; 45];
        c0[5] = 1.0;
        let u: Vec<f64> = (&psi * DVector::from_column_slice(&c0)).iter().copied().collect();
        let mut w = vec![1.0; 45];
        w[12] = 1e9;
        let sol = solve_weighted_bpdn(&psi, &u, 0.0, &WeightVector::new(w).unwrap(), &SolverConfig::default());
        assert!(sol.coeffs[12].abs() < 1e-12);
    }

    #[test]
    fn weights_must_be_positive() {
        assert!(WeightVector::new(vec![1.0, 0.0]).is_err());
        assert!(WeightVector::new(vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn cross_validation_zero_data() {
        let psi = gaussian_matrix(10, 20, 1);
        let r = cross_validate_epsilon(&psi, &[0.0; 10], &CrossValConfig::default(), &SolverConfig::default(), 1);
        assert_eq!(r.epsilon, 0.0);
    }

    #[test]
    fn cross_validation_noiseless_picks_smallest() {
        let psi = gaussian_matrix(60, 120, 21);
        let mut c0 = vec![0.0; 120];
        c0[4] = 1.0;
        c0[50] = -0.5;
        let u: Vec<f64> = (&psi * DVector::from_column_slice(&c0)).iter().copied().collect();
        let cfg = CrossValConfig::default();
        let rep = cross_validate_epsilon(&psi, &u, &cfg, &SolverConfig::default(), 5);
        assert!(rep.splits.iter().all(|s| s.chosen == 0));
        let again = cross_validate_epsilon(&psi, &u, &cfg, &SolverConfig::default(), 5);
        assert_eq!(rep.epsilon, again.epsilon);
    }
}
