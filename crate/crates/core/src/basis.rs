//! Orthonormal polynomial families and total-degree tensor bases.
//!
//! Every family is evaluated through its normalized three-term recurrence
//!
//! ```text
//! x ψ_n(x) = β_{n+1} ψ_{n+1}(x) + β_n ψ_{n-1}(x)
//! ```
//!
//! (all supported measures are symmetric, so the diagonal Jacobi entries
//! vanish). Working with the normalized recurrence directly keeps Hermite
//! values finite at high degree where `He_n / sqrt(n!)` would overflow.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;

/// Default cap on the number of basis functions.
pub const DEFAULT_BASIS_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolynomialFamily {
    /// Orthonormal w.r.t. the standard Gaussian density.
    Hermite,
    /// Orthonormal w.r.t. the uniform density 1/2 on [-1, 1].
    Legendre,
    /// First-kind Chebyshev, orthonormal w.r.t. the arcsine density
    /// 1/(π sqrt(1 - x²)) on (-1, 1): ψ₀ = 1, ψₙ = √2 Tₙ.
    #[serde(alias = "chebyshev", alias = "chebyshev1")]
    Chebyshev1,
}

impl PolynomialFamily {
    pub const ALL: [PolynomialFamily; 3] = [
        PolynomialFamily::Hermite,
        PolynomialFamily::Legendre,
        PolynomialFamily::Chebyshev1,
    ];

    /// Off-diagonal Jacobi coefficient β_n (n ≥ 1) of the orthonormal recurrence.
    pub fn beta(self, n: usize) -> f64 {
        debug_assert!(n >= 1);
        let nf = n as f64;
        match self {
            PolynomialFamily::Hermite => nf.sqrt(),
            PolynomialFamily::Legendre => nf / (4.0 * nf * nf - 1.0).sqrt(),
            PolynomialFamily::Chebyshev1 => {
                if n == 1 {
                    std::f64::consts::FRAC_1_SQRT_2
                } else {
                    0.5
                }
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PolynomialFamily::Hermite => "hermite",
            PolynomialFamily::Legendre => "legendre",
            PolynomialFamily::Chebyshev1 => "chebyshev1",
        }
    }

    /// Fill `vals[0..=max_n]` with ψ₀(x)..ψ_max_n(x).
    pub fn eval_all(self, x: f64, vals: &mut [f64]) {
        if vals.is_empty() {
            return;
        }
        vals[0] = 1.0;
        if vals.len() == 1 {
            return;
        }
        vals[1] = x / self.beta(1);
        for n in 1..vals.len() - 1 {
            vals[n + 1] = (x * vals[n] - self.beta(n) * vals[n - 1]) / self.beta(n + 1);
        }
    }

    /// Fill values and first derivatives for degrees 0..vals.len().
    pub fn eval_all_with_deriv(self, x: f64, vals: &mut [f64], ders: &mut [f64]) {
        debug_assert_eq!(vals.len(), ders.len());
        if vals.is_empty() {
            return;
        }
        vals[0] = 1.0;
        ders[0] = 0.0;
        if vals.len() == 1 {
            return;
        }
        let b1 = self.beta(1);
        vals[1] = x / b1;
        ders[1] = 1.0 / b1;
        for n in 1..vals.len() - 1 {
            let bn = self.beta(n);
            let bn1 = self.beta(n + 1);
            vals[n + 1] = (x * vals[n] - bn * vals[n - 1]) / bn1;
            ders[n + 1] = (vals[n] + x * ders[n] - bn * ders[n - 1]) / bn1;
        }
    }
}

/// Degree-n orthonormal polynomial of `family` at `x`.
pub fn eval_univariate(family: PolynomialFamily, n: usize, x: f64) -> f64 {
    let mut vals = vec![0.0; n + 1];
    family.eval_all(x, &mut vals);
    vals[n]
}

/// Derivative of the degree-n orthonormal polynomial of `family` at `x`.
pub fn eval_univariate_deriv(family: PolynomialFamily, n: usize, x: f64) -> f64 {
    let mut vals = vec![0.0; n + 1];
    let mut ders = vec![0.0; n + 1];
    family.eval_all_with_deriv(x, &mut vals, &mut ders);
    ders[n]
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn degrees(&self) -> &[u32] {
        &self.0
    }

    pub fn total_degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// Number of multi-indices in `d` variables with total degree ≤ `order`,
/// i.e. C(order + d, d). `None` on u128 overflow.
pub fn total_degree_count(d: usize, order: usize) -> Option<u128> {
    let k = d.min(order) as u128;
    let n = (d + order) as u128;
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul(n - i)? / (i + 1);
    }
    Some(acc)
}

/// All multi-indices with |α| ≤ `order` in graded lexicographic order:
/// ascending total degree, then descending lexicographic within a degree
/// (so `(1,0)` precedes `(0,1)`).
pub fn total_degree_indices(d: usize, order: usize) -> Result<Vec<MultiIndex>> {
    total_degree_indices_capped(d, order, DEFAULT_BASIS_CAP)
}

pub fn total_degree_indices_capped(d: usize, order: usize, cap: usize) -> Result<Vec<MultiIndex>> {
    if d == 0 {
        return Err(Error::InvalidArgument("basis dimension must be ≥ 1".into()));
    }
    let size = total_degree_count(d, order).unwrap_or(u128::MAX);
    if size > cap as u128 {
        return Err(Error::BasisTooLarge {
            d,
            order,
            size,
            cap,
        });
    }
    let mut out = Vec::with_capacity(size as usize);
    let mut current = vec![0u32; d];
    for degree in 0..=order {
        fill_degree(&mut current, 0, degree as u32, &mut out);
    }
    Ok(out)
}

fn fill_degree(current: &mut [u32], pos: usize, remaining: u32, out: &mut Vec<MultiIndex>) {
    if pos + 1 == current.len() {
        current[pos] = remaining;
        out.push(MultiIndex(current.to_vec()));
        current[pos] = 0;
        return;
    }
    for a in (0..=remaining).rev() {
        current[pos] = a;
        fill_degree(current, pos + 1, remaining - a, out);
    }
    current[pos] = 0;
}

/// A total-degree tensor-product basis {ψ_α : |α| ≤ P}.
#[derive(Debug, Clone)]
pub struct BasisSet {
    family: PolynomialFamily,
    dim: usize,
    order: usize,
    indices: Vec<MultiIndex>,
    // (coordinate, degree) pairs with nonzero degree, per index
    sparse: Vec<Vec<(u32, u32)>>,
}

impl BasisSet {
    pub fn new(family: PolynomialFamily, dim: usize, order: usize) -> Result<Self> {
        Self::with_cap(family, dim, order, DEFAULT_BASIS_CAP)
    }

    pub fn with_cap(family: PolynomialFamily, dim: usize, order: usize, cap: usize) -> Result<Self> {
        let indices = total_degree_indices_capped(dim, order, cap)?;
        let sparse = indices
            .iter()
            .map(|a| {
                a.0.iter()
                    .enumerate()
                    .filter(|(_, &k)| k > 0)
                    .map(|(i, &k)| (i as u32, k))
                    .collect()
            })
            .collect();
        Ok(Self {
            family,
            dim,
            order,
            indices,
            sparse,
        })
    }

    pub fn family(&self) -> PolynomialFamily {
        self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    /// Nonzero (coordinate, degree) factors of basis function `j`.
    pub fn factors(&self, j: usize) -> &[(u32, u32)] {
        &self.sparse[j]
    }

    /// Position of `alpha` in the basis ordering.
    pub fn position(&self, alpha: &[u32]) -> Option<usize> {
        self.indices.iter().position(|a| a.0 == alpha)
    }

    fn check_point(&self, point: &[f64]) -> Result<()> {
        if point.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: point.len(),
            });
        }
        Ok(())
    }

    /// Univariate value table, row-major `dim × (order+1)`.
    fn table(&self, point: &[f64], vals: &mut [f64]) {
        let w = self.order + 1;
        for (i, &x) in point.iter().enumerate() {
            self.family.eval_all(x, &mut vals[i * w..(i + 1) * w]);
        }
    }

    fn table_with_deriv(&self, point: &[f64], vals: &mut [f64], ders: &mut [f64]) {
        let w = self.order + 1;
        for (i, &x) in point.iter().enumerate() {
            self.family
                .eval_all_with_deriv(x, &mut vals[i * w..(i + 1) * w], &mut ders[i * w..(i + 1) * w]);
        }
    }

    /// Writes ψ_j(point) into `out[j]`. `point` must have length `dim`.
    pub fn eval_into(&self, point: &[f64], out: &mut [f64]) {
        let w = self.order + 1;
        let mut vals = vec![0.0; self.dim * w];
        self.table(point, &mut vals);
        for (o, f) in out.iter_mut().zip(&self.sparse) {
            *o = f
                .iter()
                .map(|&(i, k)| vals[i as usize * w + k as usize])
                .product();
        }
    }

    /// All basis functions at `point`.
    pub fn eval(&self, point: &[f64]) -> Result<Vec<f64>> {
        self.check_point(point)?;
        let mut out = vec![0.0; self.len()];
        self.eval_into(point, &mut out);
        Ok(out)
    }

    /// Σ_j coeffs[j] ψ_j(point).
    pub fn eval_expansion(&self, coeffs: &[f64], point: &[f64]) -> f64 {
        let w = self.order + 1;
        let mut vals = vec![0.0; self.dim * w];
        self.table(point, &mut vals);
        coeffs
            .iter()
            .zip(&self.sparse)
            .filter(|(c, _)| **c != 0.0)
            .map(|(c, f)| {
                c * f
                    .iter()
                    .map(|&(i, k)| vals[i as usize * w + k as usize])
                    .product::<f64>()
            })
            .sum()
    }

    /// Gradient ∇ₓ Σ_j coeffs[j] ψ_j(x) at `point`, written into `grad`.
    pub fn expansion_gradient_into(&self, coeffs: &[f64], point: &[f64], grad: &mut [f64]) {
        let w = self.order + 1;
        let mut vals = vec![0.0; self.dim * w];
        let mut ders = vec![0.0; self.dim * w];
        self.table_with_deriv(point, &mut vals, &mut ders);
        grad.iter_mut().for_each(|g| *g = 0.0);
        for (&c, f) in coeffs.iter().zip(&self.sparse) {
            if c == 0.0 {
                continue;
            }
            accumulate_factor_gradient(f, &vals, &ders, w, c, grad);
        }
    }

    /// d×N matrix whose column n is ∇ψ_n(point).
    pub fn eval_gradient(&self, point: &[f64]) -> Result<DMatrix<f64>> {
        self.check_point(point)?;
        let w = self.order + 1;
        let mut vals = vec![0.0; self.dim * w];
        let mut ders = vec![0.0; self.dim * w];
        self.table_with_deriv(point, &mut vals, &mut ders);
        let mut out = DMatrix::zeros(self.dim, self.len());
        let mut col = vec![0.0; self.dim];
        for (n, f) in self.sparse.iter().enumerate() {
            col.iter_mut().for_each(|g| *g = 0.0);
            accumulate_factor_gradient(f, &vals, &ders, w, 1.0, &mut col);
            out.column_mut(n).copy_from_slice(&col);
        }
        Ok(out)
    }
}

// Product rule over the nonzero factors; coordinates with degree 0 have a
// zero derivative and contribute nothing.
fn accumulate_factor_gradient(
    factors: &[(u32, u32)],
    vals: &[f64],
    ders: &[f64],
    w: usize,
    scale: f64,
    grad: &mut [f64],
) {
    for (a, &(i, k)) in factors.iter().enumerate() {
        let mut term = scale * ders[i as usize * w + k as usize];
        for (b, &(i2, k2)) in factors.iter().enumerate() {
            if a != b {
                term *= vals[i2 as usize * w + k2 as usize];
            }
        }
        grad[i as usize] += term;
    }
}

/// Vector of ψ_j(point) over the whole basis.
pub fn eval_basis(basis: &BasisSet, point: &[f64]) -> Result<Vec<f64>> {
    basis.eval(point)
}

pub fn eval_basis_gradient(basis: &BasisSet, point: &[f64]) -> Result<DMatrix<f64>> {
    basis.eval_gradient(point)
}

pub type MeasurementMatrix = DMatrix<f64>;

/// Ψ with Ψ_ij = ψ_j(samples row i).
pub fn assemble_measurement(basis: &BasisSet, samples: &DMatrix<f64>) -> Result<MeasurementMatrix> {
    assemble_measurement_with(basis, samples, Exec::default())
}

pub fn assemble_measurement_with(
    basis: &BasisSet,
    samples: &DMatrix<f64>,
    exec: Exec,
) -> Result<MeasurementMatrix> {
    if samples.nrows() > 0 && samples.ncols() != basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            got: samples.ncols(),
        });
    }
    let m = samples.nrows();
    let n = basis.len();
    let rows = exec.map(m, |i| {
        let point: Vec<f64> = samples.row(i).iter().copied().collect();
        let mut row = vec![0.0; n];
        basis.eval_into(&point, &mut row);
        row
    });
    Ok(DMatrix::from_fn(m, n, |i, j| rows[i][j]))
}
