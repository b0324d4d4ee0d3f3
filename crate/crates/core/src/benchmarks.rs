//! Test problems with exactly evaluable quantities of interest, and the
//! Karhunen–Loève eigenpairs of the exponential covariance on [0, 1].

use serde::{Deserialize, Serialize};

use crate::basis::{BasisSet, PolynomialFamily};
use crate::quadrature::gauss_rule;
use crate::rotation::RotationMatrix;
use crate::sampling::rng_from_seed;
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Karhunen–Loève expansion of C(x, x') = exp(−|x − x'| / l_c) on [0, 1]

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parity {
    /// φ ∝ cos(ω(x − ½)).
    Even,
    /// φ ∝ sin(ω(x − ½)).
    Odd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlMode {
    pub omega: f64,
    pub lambda: f64,
    pub parity: Parity,
    /// L2-normalization constant on [0, 1].
    pub norm: f64,
}

impl KlMode {
    pub fn eval(&self, x: f64) -> f64 {
        let t = self.omega * (x - 0.5);
        self.norm
            * match self.parity {
                Parity::Even => t.cos(),
                Parity::Odd => t.sin(),
            }
    }

    /// ∫₀¹ φ.
    pub fn integral(&self) -> f64 {
        let w = self.omega;
        match self.parity {
            Parity::Even => self.norm * 2.0 * (w / 2.0).sin() / w,
            Parity::Odd => 0.0,
        }
    }

    /// ∫₀¹ ∫₀ᶻ φ(y) dy dz.
    pub fn double_integral(&self) -> f64 {
        let w = self.omega;
        let (s, c) = (w / 2.0).sin_cos();
        match self.parity {
            Parity::Even => self.norm * s / w,
            Parity::Odd => self.norm * (c - 2.0 * s / w) / w,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlExpansion {
    pub l_c: f64,
    /// Field amplitude multiplying Σ√λ_i φ_i ξ_i.
    pub sigma: f64,
    /// Descending eigenvalues.
    pub modes: Vec<KlMode>,
}

impl KlExpansion {
    pub fn d(&self) -> usize {
        self.modes.len()
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.lambda).collect()
    }

    /// Σ λ_i; the full trace ∫₀¹ C(x, x) dx is 1.
    pub fn partial_sum(&self) -> f64 {
        self.modes.iter().map(|m| m.lambda).sum()
    }

    /// σ Σ √λ_i φ_i(x) ξ_i.
    pub fn field(&self, xi: &[f64], x: f64) -> f64 {
        self.sigma * self.modes.iter().zip(xi).map(|(m, &z)| m.lambda.sqrt() * m.eval(x) * z).sum::<f64>()
    }
}

const BISECTION_ITERS: usize = 200;

// Root of f on [lo, hi] with f(lo)·f(hi) < 0.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> Option<f64> {
    let mut flo = f(lo);
    if flo == 0.0 {
        return Some(lo);
    }
    if flo.signum() == f(hi).signum() {
        return None;
    }
    for _ in 0..BISECTION_ITERS {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-15 * hi.abs().max(1.0) {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Some(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// First `d` eigenpairs, by increasing frequency (so decreasing λ). With
/// half-width a = ½ and θ = ωa, even modes solve c·a·cos θ = θ sin θ on
/// (kπ, (k+½)π) and odd modes θ cos θ + c·a·sin θ = 0 on ((k+½)π, (k+1)π),
/// where c = 1/l_c; λ = 2c/(ω² + c²).
pub fn kl_eigenpairs(l_c: f64, d: usize) -> Result<KlExpansion> {
    if !(l_c > 0.0) || !l_c.is_finite() {
        return Err(Error::InvalidArgument(format!("correlation length must be positive, got {l_c}")));
    }
    let c = 1.0 / l_c;
    let a = 0.5;
    let pi = std::f64::consts::PI;
    let mut modes = Vec::with_capacity(d);
    for i in 0..d {
        let k = (i / 2) as f64;
        let (parity, theta) = if i % 2 == 0 {
            let f = |t: f64| c * a * t.cos() - t * t.sin();
            let root = bisect(f, k * pi, (k + 0.5) * pi).ok_or(Error::KlBracket { branch: "even", mode: i })?;
            (Parity::Even, root)
        } else {
            let f = |t: f64| t * t.cos() + c * a * t.sin();
            let root = bisect(f, (k + 0.5) * pi, (k + 1.0) * pi).ok_or(Error::KlBracket { branch: "odd", mode: i })?;
            (Parity::Odd, root)
        };
        let omega = theta / a;
        let half = (omega).sin() / (2.0 * omega);
        let sq = match parity {
            Parity::Even => 0.5 + half,
            Parity::Odd => 0.5 - half,
        };
        modes.push(KlMode {
            omega,
            lambda: 2.0 * c / (omega * omega + c * c),
            parity,
            norm: 1.0 / sq.sqrt(),
        });
    }
    Ok(KlExpansion { l_c, sigma: 1.0, modes })
}

// ---------------------------------------------------------------------------
// Closed-form problems

/// Σξ + ¼(Σξ)² + (1/40)(Σξ)³.
pub fn ridge_eval(xi: &[f64]) -> f64 {
    let s: f64 = xi.iter().sum();
    s + 0.25 * s * s + 0.025 * s * s * s
}

/// First row d^{-1/2}(1, …, 1); the rest by Gram–Schmidt on e_1, e_2, …
/// skipping the one dependent vector.
pub fn ridge_exact_rotation(d: usize) -> RotationMatrix {
    let mut rows: Vec<Vec<f64>> = vec![vec![1.0 / (d as f64).sqrt(); d]];
    for e in 0..d {
        if rows.len() == d {
            break;
        }
        let mut v = vec![0.0; d];
        v[e] = 1.0;
        // modified Gram–Schmidt, two passes
        for _ in 0..2 {
            for r in &rows {
                let p: f64 = r.iter().zip(&v).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(r).for_each(|(x, y)| *x -= p * y);
            }
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-8 {
            rows.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    let m = nalgebra::DMatrix::from_fn(d, d, |i, j| rows[i][j]);
    RotationMatrix::new(m).expect("Gram–Schmidt output is orthogonal")
}

/// c_n = ζ_n / n^{1.5} with ζ_n ~ U[0, 1) from `seed`, n = 1..N.
pub fn compressible_coeffs(basis: &BasisSet, seed: u64) -> Vec<f64> {
    use rand::Rng;
    let mut rng = rng_from_seed(seed);
    (1..=basis.len())
        .map(|n| rng.random::<f64>() / (n as f64).powf(1.5))
        .collect()
}

/// Σξ_i + ¼(Σ ξ_i/√i)², i = 1..d.
pub fn highdim_eval(xi: &[f64]) -> f64 {
    let s: f64 = xi.iter().sum();
    let t: f64 = xi.iter().enumerate().map(|(i, x)| x / ((i + 1) as f64).sqrt()).sum();
    s + 0.25 * t * t
}

// ---------------------------------------------------------------------------
// Elliptic problem: −(a u')' = 1 on (0, 1), u(0) = u(1) = 0

pub const ELLIPTIC_PANELS: usize = 1000;
const PANEL_NODES: usize = 4;

/// Composite Gauss–Legendre nodes and weights on [lo, hi].
fn composite_rule(lo: f64, hi: f64, panels: usize) -> (Vec<f64>, Vec<f64>) {
    let rule = gauss_rule(PolynomialFamily::Legendre, PANEL_NODES);
    let h = (hi - lo) / panels as f64;
    let mut x = Vec::with_capacity(panels * PANEL_NODES);
    let mut w = Vec::with_capacity(panels * PANEL_NODES);
    for p in 0..panels {
        let mid = lo + (p as f64 + 0.5) * h;
        for (t, wt) in rule.nodes.iter().zip(&rule.weights) {
            x.push(mid + 0.5 * h * t);
            // probability weights on [−1, 1] sum to 1
            w.push(h * wt);
        }
    }
    (x, w)
}

/// a(x; ξ) = a₀ + exp(field(ξ, x)); QoI u(x*).
#[derive(Debug, Clone)]
pub struct EllipticProblem {
    pub kl: KlExpansion,
    pub a0: f64,
    pub x_star: f64,
    // nodes on [0, x*] then [x*, 1]
    nodes: Vec<f64>,
    weights: Vec<f64>,
    split: usize,
    // √λ_i φ_i at each node, row-major by node
    modes_at: Vec<f64>,
}

impl EllipticProblem {
    pub fn new(kl: KlExpansion, a0: f64, x_star: f64) -> Result<Self> {
        Self::with_panels(kl, a0, x_star, ELLIPTIC_PANELS)
    }

    /// `panels` over [0, 1], divided between [0, x*] and [x*, 1] in
    /// proportion to their lengths.
    pub fn with_panels(kl: KlExpansion, a0: f64, x_star: f64, panels: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&x_star) || panels < 2 {
            return Err(Error::InvalidArgument("x* must lie in [0, 1] and panels ≥ 2".into()));
        }
        let left = ((x_star * panels as f64).round() as usize).clamp(1, panels - 1);
        let (mut nodes, mut weights) = composite_rule(0.0, x_star, left);
        let split = nodes.len();
        let (x2, w2) = composite_rule(x_star, 1.0, panels - left);
        nodes.extend(x2);
        weights.extend(w2);
        let d = kl.d();
        let mut modes_at = Vec::with_capacity(nodes.len() * d);
        for &x in &nodes {
            modes_at.extend(kl.modes.iter().map(|m| m.lambda.sqrt() * m.eval(x)));
        }
        Ok(Self {
            kl,
            a0,
            x_star,
            nodes,
            weights,
            split,
            modes_at,
        })
    }

    pub fn dim(&self) -> usize {
        self.kl.d()
    }

    pub fn coefficient(&self, xi: &[f64], x: f64) -> f64 {
        self.a0 + self.kl.field(xi, x).exp()
    }

    /// u(x*) = F ∫₀^{x*} 1/a − ∫₀^{x*} y/a, with F = ∫₀¹ y/a / ∫₀¹ 1/a.
    pub fn qoi(&self, xi: &[f64]) -> Result<f64> {
        let d = self.dim();
        if xi.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: xi.len() });
        }
        let (mut inv_left, mut y_left, mut inv_all, mut y_all) = (0.0, 0.0, 0.0, 0.0);
        for (k, (&y, &w)) in self.nodes.iter().zip(&self.weights).enumerate() {
            let g: f64 = self.modes_at[k * d..(k + 1) * d].iter().zip(xi).map(|(p, z)| p * z).sum();
            let a = self.a0 + (self.kl.sigma * g).exp();
            if !(a > 0.0) {
                return Err(Error::NonPositiveCoefficient { value: a, at: y });
            }
            let (inv, yinv) = (w / a, w * y / a);
            inv_all += inv;
            y_all += yinv;
            if k < self.split {
                inv_left += inv;
                y_left += yinv;
            }
        }
        let flux = y_all / inv_all;
        Ok(flux * inv_left - y_left)
    }
}

/// u(x*; ξ) with a₀ = 0.1 and `ELLIPTIC_PANELS` panels.
pub fn elliptic_qoi(xi: &[f64], kl: &KlExpansion, x_star: f64) -> Result<f64> {
    EllipticProblem::new(kl.clone(), 0.1, x_star)?.qoi(xi)
}

// ---------------------------------------------------------------------------
// KdV one-soliton with additive KL noise, QoI at x = 6, t = 1

#[derive(Debug, Clone, PartialEq)]
pub struct KdvProblem {
    pub sigma: f64,
    /// √λ_i ∫₀¹ φ_i.
    pub a: Vec<f64>,
    /// √λ_i ∫₀¹∫₀ᶻ φ_i.
    pub b: Vec<f64>,
}

impl KdvProblem {
    pub fn new(kl: &KlExpansion, sigma: f64) -> Self {
        Self {
            sigma,
            a: kl.modes.iter().map(|m| m.lambda.sqrt() * m.integral()).collect(),
            b: kl.modes.iter().map(|m| m.lambda.sqrt() * m.double_integral()).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    /// σΣA_iξ_i − 2 sech²(2 + 6σΣB_iξ_i).
    pub fn qoi(&self, xi: &[f64]) -> f64 {
        let sa: f64 = self.a.iter().zip(xi).map(|(a, x)| a * x).sum();
        let sb: f64 = self.b.iter().zip(xi).map(|(b, x)| b * x).sum();
        let sech = 1.0 / (2.0 + 6.0 * self.sigma * sb).cosh();
        self.sigma * sa - 2.0 * sech * sech
    }
}

pub fn kdv_qoi(xi: &[f64], kl: &KlExpansion, sigma: f64) -> f64 {
    KdvProblem::new(kl, sigma).qoi(xi)
}

// ---------------------------------------------------------------------------
// Registry

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchmarkId {
    Ridge,
    Compressible,
    Elliptic,
    Kdv,
    #[serde(rename = "highdim")]
    HighDim,
}

impl BenchmarkId {
    pub const ALL: [BenchmarkId; 5] = [
        BenchmarkId::Ridge,
        BenchmarkId::Compressible,
        BenchmarkId::Elliptic,
        BenchmarkId::Kdv,
        BenchmarkId::HighDim,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BenchmarkId::Ridge => "ridge",
            BenchmarkId::Compressible => "compressible",
            BenchmarkId::Elliptic => "elliptic",
            BenchmarkId::Kdv => "kdv",
            BenchmarkId::HighDim => "highdim",
        }
    }

    /// Reference (d, P).
    pub fn default_size(self) -> (usize, usize) {
        match self {
            BenchmarkId::Ridge | BenchmarkId::Compressible => (12, 3),
            BenchmarkId::Elliptic => (15, 3),
            BenchmarkId::Kdv => (10, 4),
            BenchmarkId::HighDim => (100, 2),
        }
    }

    /// Smolyak level of the error grid.
    pub fn default_level(self) -> usize {
        match self {
            BenchmarkId::Ridge | BenchmarkId::Compressible => 4,
            BenchmarkId::Elliptic => 6,
            BenchmarkId::Kdv => 5,
            BenchmarkId::HighDim => 3,
        }
    }

    /// Sample sizes of the reference sweep.
    pub fn default_m_values(self) -> Vec<usize> {
        match self {
            BenchmarkId::Ridge => vec![60, 80, 100, 120, 140, 160, 180],
            BenchmarkId::Compressible => vec![60, 80, 100, 120, 140, 160],
            BenchmarkId::Elliptic => vec![60, 80, 100, 120, 140, 160],
            BenchmarkId::Kdv => vec![80, 100, 120, 140, 160, 180],
            BenchmarkId::HighDim => vec![400, 600, 800, 1000, 1200],
        }
    }
}

impl std::fmt::Display for BenchmarkId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone)]
pub enum Qoi {
    Ridge,
    Compressible { basis: BasisSet, coeffs: Vec<f64> },
    Elliptic(EllipticProblem),
    Kdv(KdvProblem),
    HighDim,
}

#[derive(Debug, Clone)]
pub struct BenchmarkProblem {
    pub id: BenchmarkId,
    pub family: PolynomialFamily,
    pub d: usize,
    pub order: usize,
    pub qoi: Qoi,
}

pub const ELLIPTIC_CORRELATION: f64 = 0.2;
pub const ELLIPTIC_SIGMA: f64 = 0.5;
pub const ELLIPTIC_A0: f64 = 0.1;
pub const ELLIPTIC_X_STAR: f64 = 0.35;
pub const KDV_CORRELATION: f64 = 0.25;
pub const KDV_SIGMA: f64 = 0.4;

impl BenchmarkProblem {
    /// Problem `id` in `d` inputs with expansion order `order`. `seed` fixes
    /// the random coefficients of the compressible problem.
    pub fn new(id: BenchmarkId, family: PolynomialFamily, d: usize, order: usize, seed: u64) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument("benchmark dimension must be at least 1".into()));
        }
        let qoi = match id {
            BenchmarkId::Ridge => Qoi::Ridge,
            BenchmarkId::HighDim => Qoi::HighDim,
            BenchmarkId::Compressible => {
                let basis = BasisSet::new(family, d, order)?;
                let coeffs = compressible_coeffs(&basis, seed);
                Qoi::Compressible { basis, coeffs }
            }
            BenchmarkId::Elliptic => {
                let kl = kl_eigenpairs(ELLIPTIC_CORRELATION, d)?.with_sigma(ELLIPTIC_SIGMA);
                Qoi::Elliptic(EllipticProblem::new(kl, ELLIPTIC_A0, ELLIPTIC_X_STAR)?)
            }
            BenchmarkId::Kdv => Qoi::Kdv(KdvProblem::new(&kl_eigenpairs(KDV_CORRELATION, d)?, KDV_SIGMA)),
        };
        Ok(Self { id, family, d, order, qoi })
    }

    pub fn reference(id: BenchmarkId, family: PolynomialFamily, seed: u64) -> Result<Self> {
        let (d, p) = id.default_size();
        Self::new(id, family, d, p, seed)
    }

    pub fn eval(&self, xi: &[f64]) -> Result<f64> {
        if xi.len() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, got: xi.len() });
        }
        Ok(match &self.qoi {
            Qoi::Ridge => ridge_eval(xi),
            Qoi::HighDim => highdim_eval(xi),
            Qoi::Compressible { basis, coeffs } => basis.eval_expansion(coeffs, xi),
            Qoi::Elliptic(p) => p.qoi(xi)?,
            Qoi::Kdv(p) => p.qoi(xi),
        })
    }

    /// Exact coefficients when the QoI is itself an expansion in the basis.
    pub fn exact_coeffs(&self) -> Option<&[f64]> {
        match &self.qoi {
            Qoi::Compressible { coeffs, .. } => Some(coeffs),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ridge_values() {
        assert_eq!(ridge_eval(&[0.0; 12]), 0.0);
        assert!((ridge_eval(&[1.0; 12]) - 91.2).abs() < 1e-12);
        assert!((ridge_eval(&[-1.0; 12]) + 19.2).abs() < 1e-12);
    }

    #[test]
    fn exact_rotation_shapes() {
        assert_eq!(ridge_exact_rotation(1).matrix()[(0, 0)], 1.0);
        let a = ridge_exact_rotation(4);
        for j in 0..4 {
            assert!((a.matrix()[(0, j)] - 0.5).abs() < 1e-15);
        }
        assert!(a.orthogonality_error() < 1e-14);
        assert!(ridge_exact_rotation(12).orthogonality_error() < 1e-13);
    }

    #[test]
    fn constant_coefficient_limits() {
        let kl = kl_eigenpairs(0.2, 15).unwrap().with_sigma(0.0);
        let xi = [0.3; 15];
        let u = elliptic_qoi(&xi, &kl, 0.35).unwrap();
        assert!((u - 0.35 * 0.65 / 2.2).abs() < 1e-12, "{u}");
        let sech = 1.0 / 2f64.cosh();
        assert!((kdv_qoi(&[0.5; 10], &kl_eigenpairs(0.25, 10).unwrap(), 0.0) + 2.0 * sech * sech).abs() < 1e-15);
    }

    #[test]
    fn boundary_values_vanish() {
        let kl = kl_eigenpairs(0.2, 6).unwrap().with_sigma(0.5);
        let xi = [0.9, -0.4, 0.1, 0.7, -1.0, 0.2];
        assert!(elliptic_qoi(&xi, &kl, 0.0).unwrap().abs() < 1e-15);
        assert!(elliptic_qoi(&xi, &kl, 1.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn nonpositive_coefficient_is_reported() {
        let kl = kl_eigenpairs(0.2, 3).unwrap();
        let p = EllipticProblem::new(kl, -5.0, 0.35).unwrap();
        assert!(matches!(p.qoi(&[0.0; 3]), Err(Error::NonPositiveCoefficient { .. })));
    }

    #[test]
    fn compressible_range() {
        let basis = BasisSet::new(PolynomialFamily::Legendre, 12, 3).unwrap();
        let c = compressible_coeffs(&basis, 3);
        assert_eq!(c.len(), 455);
        for (n, &v) in c.iter().enumerate() {
            assert!(v >= 0.0 && v <= ((n + 1) as f64).powf(-1.5));
        }
        assert!(c[454] <= 1.0311e-4);
    }

    #[test]
    fn eigenvalues_descend() {
        let kl = kl_eigenpairs(0.2, 20).unwrap();
        assert!(kl.modes.windows(2).all(|w| w[0].lambda > w[1].lambda));
        assert!(kl.modes.iter().all(|m| m.lambda > 0.0));
        assert!(kl_eigenpairs(0.0, 3).is_err());
    }
}
