//! Stiffness kernels (K_ij)_km = E{∂_iψ_k ∂_jψ_m} and the stiffness matrix
//! G_ij = cᵀK_ij c = E{∂_i u ∂_j u} of an expansion u = Σ c_k ψ_k.
//!
//! Under a product measure every entry factorizes over coordinates into the
//! one-dimensional moments E{φ'_a φ_b} and E{φ'_a φ'_b}, with Kronecker deltas
//! on the untouched coordinates. Blocks are stored sparse.

use std::collections::HashMap;

use nalgebra::DMatrix;

use super::{gradient_matrix_v2, RotationMatrix};
use crate::basis::{BasisSet, PolynomialFamily};
use crate::quadrature::{gauss_rule, tensor_grid};
use crate::sampling::{derive_seed, sample_inputs, InputDistribution};
use crate::{Error, Result};

/// Largest dimension accepted by [`project_to_input_coordinates`].
pub const PROJECTION_MAX_DIM: usize = 4;

#[derive(Debug, Clone)]
pub struct StiffnessKernel {
    dim: usize,
    len: usize,
    // block (i, j), i ≤ j, at index i*dim + j: (k, m, value)
    blocks: Vec<Vec<(u32, u32, f64)>>,
}

impl StiffnessKernel {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Basis size N.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Nonzero entries of K_ij as (k, m, value).
    pub fn entries(&self, i: usize, j: usize) -> Vec<(usize, usize, f64)> {
        if i <= j {
            self.blocks[i * self.dim + j]
                .iter()
                .map(|&(k, m, v)| (k as usize, m as usize, v))
                .collect()
        } else {
            self.blocks[j * self.dim + i]
                .iter()
                .map(|&(k, m, v)| (m as usize, k as usize, v))
                .collect()
        }
    }

    /// Dense N×N block K_ij.
    pub fn block(&self, i: usize, j: usize) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.len, self.len);
        for (k, m, v) in self.entries(i, j) {
            out[(k, m)] = v;
        }
        out
    }

    pub fn nnz(&self) -> usize {
        self.blocks.iter().map(|b| b.len()).sum()
    }
}

// E{φ'_a φ_b} and E{φ'_a φ'_b} for a, b ≤ order.
fn moment_tables(family: PolynomialFamily, order: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let w = order + 1;
    let rule = gauss_rule(family, order + 1);
    let mut dv = DMatrix::zeros(w, w);
    let mut dd = DMatrix::zeros(w, w);
    let mut vals = vec![0.0; w];
    let mut ders = vec![0.0; w];
    for (&x, &wt) in rule.nodes.iter().zip(&rule.weights) {
        family.eval_all_with_deriv(x, &mut vals, &mut ders);
        for a in 0..w {
            for b in 0..w {
                dv[(a, b)] += wt * ders[a] * vals[b];
                dd[(a, b)] += wt * ders[a] * ders[b];
            }
        }
    }
    // φ'_a has degree a−1: orthogonal to φ_b for b ≥ a
    for a in 0..w {
        for b in a..w {
            dv[(a, b)] = 0.0;
        }
    }
    let clean = |m: &mut DMatrix<f64>| {
        let tol = 1e-12 * m.amax().max(1.0);
        m.iter_mut().for_each(|x| {
            if x.abs() <= tol {
                *x = 0.0
            }
        });
    };
    clean(&mut dv);
    clean(&mut dd);
    (dv, dd)
}

fn group_by_mask(basis: &BasisSet, mask: &[usize]) -> Vec<Vec<usize>> {
    let mut groups: HashMap<Vec<u32>, Vec<usize>> = HashMap::new();
    for (n, alpha) in basis.indices().iter().enumerate() {
        let mut key = alpha.0.clone();
        for &i in mask {
            key[i] = u32::MAX;
        }
        groups.entry(key).or_default().push(n);
    }
    let mut out: Vec<Vec<usize>> = groups.into_values().collect();
    out.sort();
    out
}

/// Kernel under the product input measure of `basis.family()`.
pub fn stiffness_kernel(basis: &BasisSet) -> StiffnessKernel {
    let d = basis.dim();
    let (dv, dd) = moment_tables(basis.family(), basis.order());
    let idx = basis.indices();
    let mut blocks = vec![Vec::new(); d * d];
    for i in 0..d {
        let mut diag = Vec::new();
        for group in group_by_mask(basis, &[i]) {
            for &k in &group {
                for &m in &group {
                    let v = dd[(idx[k].0[i] as usize, idx[m].0[i] as usize)];
                    if v != 0.0 {
                        diag.push((k as u32, m as u32, v));
                    }
                }
            }
        }
        diag.sort_by_key(|e| (e.0, e.1));
        blocks[i * d + i] = diag;
        for j in i + 1..d {
            let mut off = Vec::new();
            for group in group_by_mask(basis, &[i, j]) {
                for &k in &group {
                    for &m in &group {
                        let (ki, kj) = (idx[k].0[i] as usize, idx[k].0[j] as usize);
                        let (mi, mj) = (idx[m].0[i] as usize, idx[m].0[j] as usize);
                        let v = dv[(ki, mi)] * dv[(mj, kj)];
                        if v != 0.0 {
                            off.push((k as u32, m as u32, v));
                        }
                    }
                }
            }
            off.sort_by_key(|e| (e.0, e.1));
            blocks[i * d + j] = off;
        }
    }
    StiffnessKernel {
        dim: d,
        len: basis.len(),
        blocks,
    }
}

/// Kernel for Hermite expansions of standard Gaussian inputs. Rotations
/// preserve the Gaussian measure, so this kernel stays valid in every
/// rotated coordinate system.
pub fn gaussian_stiffness_kernel(basis: &BasisSet) -> Result<StiffnessKernel> {
    if basis.family() != PolynomialFamily::Hermite {
        return Err(Error::RequiresHermite("the Gaussian stiffness kernel"));
    }
    Ok(stiffness_kernel(basis))
}

/// G_ij = cᵀK_ij c.
pub fn stiffness_from_coeffs(kernel: &StiffnessKernel, c: &[f64]) -> DMatrix<f64> {
    assert_eq!(c.len(), kernel.len, "coefficient length must match the kernel");
    let d = kernel.dim;
    let mut g = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let s: f64 = kernel.blocks[i * d + j]
                .iter()
                .map(|&(k, m, v)| c[k as usize] * v * c[m as usize])
                .sum();
            g[(i, j)] = s;
            g[(j, i)] = s;
        }
    }
    g
}

/// G_ij = ⟨g⁽ⁱ⁾, g⁽ʲ⁾⟩ where g⁽ⁱ⁾ are the coefficients of ∂_i u in the same
/// orthonormal basis (the derivative lowers one degree, so it stays in the
/// total-degree space).
pub fn stiffness_via_gradients(basis: &BasisSet, c: &[f64]) -> DMatrix<f64> {
    let d = basis.dim();
    let n = basis.len();
    let (dv, _) = moment_tables(basis.family(), basis.order());
    let lookup: HashMap<&[u32], usize> = basis.indices().iter().enumerate().map(|(k, a)| (a.0.as_slice(), k)).collect();
    let mut grads = vec![vec![0.0; n]; d];
    let mut target = vec![0u32; d];
    for (k, alpha) in basis.indices().iter().enumerate() {
        if c[k] == 0.0 {
            continue;
        }
        for i in 0..d {
            let a = alpha.0[i] as usize;
            target.copy_from_slice(&alpha.0);
            // φ'_a = Σ_{b<a} E{φ'_a φ_b} φ_b
            for b in 0..a {
                let coef = dv[(a, b)];
                if coef == 0.0 {
                    continue;
                }
                target[i] = b as u32;
                grads[i][lookup[target.as_slice()]] += c[k] * coef;
            }
        }
    }
    DMatrix::from_fn(d, d, |i, j| grads[i].iter().zip(&grads[j]).map(|(x, y)| x * y).sum())
}

/// Coefficients of ξ ↦ Σ c̃_n ψ_n(Aξ) in the unrotated basis, by tensor Gauss
/// quadrature with order+1 nodes per axis (exact: the rotated expansion has
/// total degree ≤ order). Limited to `PROJECTION_MAX_DIM` dimensions.
pub fn project_to_input_coordinates(basis: &BasisSet, rotated_coeffs: &[f64], a: &RotationMatrix) -> Result<Vec<f64>> {
    let d = basis.dim();
    if d > PROJECTION_MAX_DIM {
        return Err(Error::InvalidArgument(format!(
            "projection to input coordinates supports d <= {PROJECTION_MAX_DIM}, got {d}"
        )));
    }
    if a.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: a.dim() });
    }
    let grid = tensor_grid(basis.family(), d, basis.order() + 1);
    let mut out = vec![0.0; basis.len()];
    let mut psi = vec![0.0; basis.len()];
    for k in 0..grid.len() {
        let x = grid.node(k);
        let v = basis.eval_expansion(rotated_coeffs, &a.apply(&x));
        basis.eval_into(&x, &mut psi);
        for (o, p) in out.iter_mut().zip(&psi) {
            *o += grid.weights[k] * v * p;
        }
    }
    Ok(out)
}

/// Relative Frobenius gap ‖WWᵀ/M − G‖_F / ‖G‖_F between the sampled and
/// exact stiffness matrices of a Hermite expansion, for each M. Samples for
/// size M come from stream `derive_seed(seed, [M])`. A zero G gives gap 0.
pub fn limit_consistency_check(basis: &BasisSet, coeffs: &[f64], m_list: &[usize], seed: u64) -> Result<Vec<(usize, f64)>> {
    let kernel = gaussian_stiffness_kernel(basis)?;
    let g = stiffness_from_coeffs(&kernel, coeffs);
    let g_norm = g.norm();
    m_list
        .iter()
        .map(|&m| {
            if g_norm == 0.0 || m == 0 {
                return Ok((m, 0.0));
            }
            let xi = sample_inputs(InputDistribution::GaussianStd, basis.dim(), m, derive_seed(seed, &[m as u64]));
            let w = gradient_matrix_v2(basis, coeffs, &xi);
            let sampled = (&w * w.transpose()) / m as f64;
            Ok((m, (sampled - &g).norm() / g_norm))
        })
        .collect()
}
