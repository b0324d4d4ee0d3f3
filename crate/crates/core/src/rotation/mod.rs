//! Iterative identification of orthogonal input rotations that sparsify a
//! polynomial chaos expansion.
//!
//! Each iteration reads the dominant directions of variability from the
//! current surrogate (left singular vectors of a gradient matrix, or
//! eigenvectors of the stiffness matrix for Gaussian inputs), rotates the
//! samples, re-assembles the measurement matrix and re-solves the ℓ1 problem.

mod stiffness;
mod svd;

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::{assemble_measurement_with, BasisSet, PolynomialFamily};
use crate::bpdn::{cross_validate_epsilon, reweighted_l1, solve_bpdn, BpdnSolution, CrossValConfig, SolverConfig};
use crate::sampling::derive_seed;
use crate::{Error, Exec, Result};

pub use stiffness::{
    gaussian_stiffness_kernel, limit_consistency_check, project_to_input_coordinates, stiffness_from_coeffs,
    stiffness_kernel, stiffness_via_gradients, StiffnessKernel, PROJECTION_MAX_DIM,
};

/// Orthogonality tolerance (Frobenius norm of A·Aᵀ − I).
pub const ORTHOGONALITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct RotationMatrix(DMatrix<f64>);

impl RotationMatrix {
    pub fn identity(d: usize) -> Self {
        Self(DMatrix::identity(d, d))
    }

    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::InvalidArgument(format!(
                "rotation must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        let r = Self(a);
        let err = r.orthogonality_error();
        if err > ORTHOGONALITY_TOL {
            return Err(Error::InvalidArgument(format!(
                "matrix is not orthogonal: |AAᵀ - I|_F = {err:e}"
            )));
        }
        Ok(r)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn orthogonality_error(&self) -> f64 {
        let d = self.dim();
        (&self.0 * self.0.transpose() - DMatrix::<f64>::identity(d, d)).norm()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (&self.0 * DVector::from_column_slice(x)).iter().copied().collect()
    }

    /// Rows η_q = Aξ_q of a sample matrix with rows ξ_q.
    pub fn rotate_samples(&self, samples: &DMatrix<f64>) -> DMatrix<f64> {
        samples * self.0.transpose()
    }

    /// `self` applied after `inner`: (self·inner)ξ.
    pub fn then_after(&self, inner: &RotationMatrix) -> RotationMatrix {
        RotationMatrix(&self.0 * &inner.0)
    }

    pub fn frobenius_distance(&self, other: &RotationMatrix) -> f64 {
        (&self.0 - &other.0).norm()
    }

    pub fn spectral_distance(&self, other: &RotationMatrix) -> f64 {
        let diff = &self.0 - &other.0;
        diff.singular_values().iter().fold(0.0, |m: f64, &s| m.max(s))
    }

    /// Σ|A_ij|; equals d for signed permutation matrices.
    pub fn entrywise_l1(&self) -> f64 {
        self.0.iter().map(|x| x.abs()).sum()
    }
}

/// d×M matrix of surrogate gradients at the samples, one column per sample.
pub type GradientMatrix = DMatrix<f64>;

fn row_vec(m: &DMatrix<f64>, i: usize) -> Vec<f64> {
    m.row(i).iter().copied().collect()
}

/// Columns ∇_ξ [Σ c_n ψ_n(Aξ)] at ξ = sample rows, via the chain rule
/// Aᵀ ∇ψ(Aξ).
pub fn gradient_matrix(
    basis: &BasisSet,
    coeffs: &[f64],
    samples: &DMatrix<f64>,
    a: &RotationMatrix,
) -> GradientMatrix {
    gradient_matrix_with(basis, coeffs, samples, a, Exec::default())
}

pub fn gradient_matrix_with(
    basis: &BasisSet,
    coeffs: &[f64],
    samples: &DMatrix<f64>,
    a: &RotationMatrix,
    exec: Exec,
) -> GradientMatrix {
    let d = basis.dim();
    let at = a.matrix().transpose();
    let cols = exec.map(samples.nrows(), |q| {
        let x = a.apply(&row_vec(samples, q));
        let mut g = vec![0.0; d];
        basis.expansion_gradient_into(coeffs, &x, &mut g);
        &at * DVector::from_vec(g)
    });
    DMatrix::from_fn(d, samples.nrows(), |i, q| cols[q][i])
}

/// Columns ∇ₓ Σ c_n ψ_n(x) at x = rows of already-rotated samples.
pub fn gradient_matrix_v2(basis: &BasisSet, coeffs: &[f64], rotated_samples: &DMatrix<f64>) -> GradientMatrix {
    gradient_matrix_v2_with(basis, coeffs, rotated_samples, Exec::default())
}

pub fn gradient_matrix_v2_with(
    basis: &BasisSet,
    coeffs: &[f64],
    rotated_samples: &DMatrix<f64>,
    exec: Exec,
) -> GradientMatrix {
    let d = basis.dim();
    let cols = exec.map(rotated_samples.nrows(), |q| {
        let mut g = vec![0.0; d];
        basis.expansion_gradient_into(coeffs, &row_vec(rotated_samples, q), &mut g);
        g
    });
    DMatrix::from_fn(d, rotated_samples.nrows(), |i, q| cols[q][i])
}

/// Orders (value, vector) pairs by non-increasing value and fixes each
/// vector's sign so its largest-magnitude entry is positive. Runs of values
/// within 1e-12 of the largest are ordered by the axis of that entry.
fn canonical_basis(values: &[f64], vectors: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let d = vectors.nrows();
    let k = values.len();
    let lead = |c: usize| {
        let col = vectors.column(c);
        (0..d).fold(0, |best, i| if col[i].abs() > col[best].abs() { i } else { best })
    };
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tie = 1e-12 * scale.max(f64::MIN_POSITIVE);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    // runs of values within `tie` of their neighbour are ordered by lead axis
    let mut start = 0;
    while start < k {
        let mut end = start + 1;
        while end < k && values[order[end - 1]] - values[order[end]] <= tie {
            end += 1;
        }
        order[start..end].sort_by_key(|&c| lead(c));
        start = end;
    }
    let mut u = DMatrix::zeros(d, k);
    for (dst, &src) in order.iter().enumerate() {
        let i = lead(src);
        let s = if vectors[(i, src)] < 0.0 { -1.0 } else { 1.0 };
        u.set_column(dst, &(vectors.column(src) * s));
    }
    (order.iter().map(|&i| values[i]).collect(), u)
}

#[derive(Debug, Clone)]
pub struct SvdRotation {
    pub rotation: RotationMatrix,
    /// Non-increasing.
    pub singular_values: Vec<f64>,
    /// W was identically zero; the rotation is the identity.
    pub degenerate: bool,
}

/// A = U_Wᵀ from the SVD W = U_W Σ V_Wᵀ.
pub fn rotation_from_svd(w: &GradientMatrix) -> SvdRotation {
    let d = w.nrows();
    if w.iter().all(|&x| x == 0.0) {
        warn!("gradient matrix is identically zero; keeping the identity rotation");
        return SvdRotation {
            rotation: RotationMatrix::identity(d),
            singular_values: vec![0.0; d],
            degenerate: true,
        };
    }
    let (values, u) = svd::left_singular(w);
    let (values, u) = canonical_basis(&values, &u);
    SvdRotation {
        rotation: RotationMatrix(u.transpose()),
        singular_values: values,
        degenerate: false,
    }
}

/// A = Uᵀ from the eigen-decomposition G = UΛUᵀ; eigenvalues non-increasing.
pub fn rotation_from_stiffness(g: &DMatrix<f64>) -> SvdRotation {
    let d = g.nrows();
    if g.iter().all(|&x| x == 0.0) {
        warn!("stiffness matrix is identically zero; keeping the identity rotation");
        return SvdRotation {
            rotation: RotationMatrix::identity(d),
            singular_values: vec![0.0; d],
            degenerate: true,
        };
    }
    let sym = (g + g.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let (values, u) = canonical_basis(eig.eigenvalues.as_slice(), &eig.eigenvectors);
    SvdRotation {
        rotation: RotationMatrix(u.transpose()),
        singular_values: values,
        degenerate: false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RotationVariant {
    /// Gradient with respect to the original inputs (chain rule); A is
    /// replaced each iteration.
    V1,
    /// Gradient with respect to the current rotated inputs; rotations are
    /// composed.
    V2,
    /// Eigenvectors of the stiffness matrix cᵀK_ij c; Hermite only.
    GaussianK,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StopNorm {
    #[default]
    Frobenius,
    Spectral,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RotationConfig {
    pub variant: RotationVariant,
    pub l_max: usize,
    /// Stopping threshold; `None` means 0.1·d.
    pub theta: Option<f64>,
    pub reestimate_eps: bool,
    pub reweighted: bool,
    /// Norm of A^(l) − A^(l−1) in the V1 stopping rule.
    pub v1_stop_norm: StopNorm,
    pub reweight_iters: usize,
}

impl Default for RotationConfig {
    fn default() -> Self {
        Self {
            variant: RotationVariant::V1,
            l_max: 3,
            theta: None,
            reestimate_eps: true,
            reweighted: false,
            v1_stop_norm: StopNorm::Frobenius,
            reweight_iters: crate::bpdn::DEFAULT_REWEIGHT_ITERS,
        }
    }
}

impl RotationConfig {
    pub fn theta_for(&self, d: usize) -> f64 {
        self.theta.unwrap_or(0.1 * d as f64)
    }

    pub fn validate(&self) -> Result<()> {
        if self.theta.is_some_and(|t| !(t > 0.0)) {
            return Err(Error::Config("rotation threshold theta must be positive".into()));
        }
        if self.reweighted && self.reweight_iters < 1 {
            return Err(Error::Config("reweight_iters must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct HistoryEntry {
    /// Accumulated rotation: the surrogate is Σ c_n ψ_n(Aξ).
    pub rotation: RotationMatrix,
    pub coeffs: Vec<f64>,
    pub epsilon: f64,
    /// Singular values of the gradient matrix, or stiffness eigenvalues for
    /// `GaussianK`; empty for the initial solve.
    pub spectrum: Vec<f64>,
    pub stop_metric: Option<f64>,
    pub converged: bool,
    pub degenerate: bool,
}

#[derive(Debug, Clone, Default)]
pub struct RotationHistory {
    pub entries: Vec<HistoryEntry>,
}

#[derive(Debug, Clone)]
pub struct Surrogate {
    pub coeffs: Vec<f64>,
    pub rotation: RotationMatrix,
}

impl Surrogate {
    /// Σ c_n ψ_n(Aξ).
    pub fn eval(&self, basis: &BasisSet, xi: &[f64]) -> f64 {
        basis.eval_expansion(&self.coeffs, &self.rotation.apply(xi))
    }
}

#[derive(Debug, Clone)]
pub struct RotationOutcome {
    pub surrogate: Surrogate,
    pub history: RotationHistory,
    /// Every solve converged.
    pub converged: bool,
    /// Number of rotation iterations performed.
    pub iterations: usize,
}

/// Noise-level and solve settings shared by the standard and rotated runs.
#[derive(Debug, Clone, Copy)]
pub struct SolveSettings<'a> {
    pub solver: &'a SolverConfig,
    pub crossval: &'a CrossValConfig,
    pub reweighted: bool,
    pub reweight_iters: usize,
    pub exec: Exec,
}

impl SolveSettings<'_> {
    /// Cross-validated ε followed by the (re-weighted) ℓ1 solve.
    pub fn estimate_and_solve(&self, psi: &DMatrix<f64>, u: &[f64], cv_seed: u64) -> (f64, BpdnSolution) {
        let eps = cross_validate_epsilon(psi, u, self.crossval, self.solver, cv_seed).epsilon;
        (eps, self.solve(psi, u, eps))
    }

    pub fn solve(&self, psi: &DMatrix<f64>, u: &[f64], eps: f64) -> BpdnSolution {
        if self.reweighted {
            reweighted_l1(psi, u, eps, self.reweight_iters, self.solver)
        } else {
            solve_bpdn(psi, u, eps, self.solver)
        }
    }
}

/// Stream for the cross-validation of rotation iteration `l`
/// (0 is the initial solve).
pub fn iteration_cv_seed(seed: u64, l: usize) -> u64 {
    derive_seed(seed, &[0x524f_5441, l as u64])
}

/// Alternates ℓ1 solves with rotation updates.
///
/// `psi0` is the measurement matrix at the unrotated `samples` (rows ξ_q).
/// When `initial` is given it is used as the iteration-0 solve (ε and
/// solution) instead of solving again.
#[allow(clippy::too_many_arguments)]
pub fn iterate_rotations(
    psi0: &DMatrix<f64>,
    u: &[f64],
    samples: &DMatrix<f64>,
    basis: &BasisSet,
    cfg: &RotationConfig,
    solver: &SolverConfig,
    crossval: &CrossValConfig,
    seed: u64,
    initial: Option<(f64, BpdnSolution)>,
) -> Result<RotationOutcome> {
    cfg.validate()?;
    let d = basis.dim();
    if samples.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: samples.ncols(),
        });
    }
    if psi0.nrows() != u.len() || psi0.nrows() != samples.nrows() || psi0.ncols() != basis.len() {
        return Err(Error::InvalidArgument("Ψ₀, u and samples disagree in size".into()));
    }
    if cfg.variant == RotationVariant::GaussianK && basis.family() != PolynomialFamily::Hermite {
        return Err(Error::RequiresHermite("the stiffness-matrix rotation variant"));
    }
    let settings = SolveSettings {
        solver,
        crossval,
        reweighted: cfg.reweighted,
        reweight_iters: cfg.reweight_iters,
        exec: Exec::Sequential,
    };
    let kernel = match cfg.variant {
        RotationVariant::GaussianK => Some(gaussian_stiffness_kernel(basis)?),
        _ => None,
    };
    let theta = cfg.theta_for(d);

    let (eps0, sol0) = initial.unwrap_or_else(|| settings.estimate_and_solve(psi0, u, iteration_cv_seed(seed, 0)));
    let mut converged = sol0.converged();
    let mut history = RotationHistory {
        entries: vec![HistoryEntry {
            rotation: RotationMatrix::identity(d),
            coeffs: sol0.coeffs.clone(),
            epsilon: eps0,
            spectrum: vec![],
            stop_metric: None,
            converged: sol0.converged(),
            degenerate: false,
        }],
    };
    let mut a = RotationMatrix::identity(d);
    let mut eta = samples.clone();
    let mut coeffs = sol0.coeffs;
    let mut iterations = 0;

    for l in 1..=cfg.l_max {
        if !converged {
            break;
        }
        let (step, new_a, new_eta) = match cfg.variant {
            RotationVariant::V1 => {
                let w = gradient_matrix_with(basis, &coeffs, samples, &a, settings.exec);
                let step = rotation_from_svd(&w);
                let new_a = step.rotation.clone();
                let new_eta = new_a.rotate_samples(samples);
                (step, new_a, new_eta)
            }
            RotationVariant::V2 => {
                let w = gradient_matrix_v2_with(basis, &coeffs, &eta, settings.exec);
                let step = rotation_from_svd(&w);
                let new_a = step.rotation.then_after(&a);
                let new_eta = step.rotation.rotate_samples(&eta);
                (step, new_a, new_eta)
            }
            RotationVariant::GaussianK => {
                let g = stiffness_from_coeffs(kernel.as_ref().unwrap(), &coeffs);
                let step = rotation_from_stiffness(&g);
                let new_a = step.rotation.then_after(&a);
                let new_eta = step.rotation.rotate_samples(&eta);
                (step, new_a, new_eta)
            }
        };
        let metric = match cfg.variant {
            RotationVariant::V1 => match cfg.v1_stop_norm {
                StopNorm::Frobenius => new_a.frobenius_distance(&a),
                StopNorm::Spectral => new_a.spectral_distance(&a),
            },
            _ => (step.rotation.entrywise_l1() - d as f64).abs(),
        };

        let psi = assemble_measurement_with(basis, &new_eta, settings.exec)?;
        let cv_seed = iteration_cv_seed(seed, l);
        let (eps, sol) = if cfg.reestimate_eps {
            settings.estimate_and_solve(&psi, u, cv_seed)
        } else {
            (eps0, settings.solve(&psi, u, eps0))
        };
        iterations = l;
        history.entries.push(HistoryEntry {
            rotation: new_a.clone(),
            coeffs: sol.coeffs.clone(),
            epsilon: eps,
            spectrum: step.singular_values,
            stop_metric: Some(metric),
            converged: sol.converged(),
            degenerate: step.degenerate,
        });
        if !sol.converged() {
            // keep the last converged iterate
            converged = false;
            break;
        }
        a = new_a;
        eta = new_eta;
        coeffs = sol.coeffs;
        if metric < theta {
            break;
        }
    }

    Ok(RotationOutcome {
        surrogate: Surrogate { coeffs, rotation: a },
        history,
        converged,
        iterations,
    })
}
