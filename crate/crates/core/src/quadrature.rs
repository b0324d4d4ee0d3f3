//! Gauss rules, Smolyak sparse grids and relative L2 errors.
//!
//! Weights are normalized to the probability measure of each family, so
//! every rule integrates the constant 1 to 1.

use std::collections::HashMap;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::basis::PolynomialFamily;
use crate::error::{Error, Result};
use crate::exec::Exec;

/// Default cap on the number of distinct sparse-grid nodes.
pub const DEFAULT_NODE_CAP: usize = 4_000_000;

/// Coordinates closer than this are treated as the same node.
const MERGE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// n-point Gauss rule for the family's probability measure.
///
/// Golub–Welsch on the Jacobi matrix gives starting nodes; each node is then
/// polished by Newton on ψ_n and the weights are taken from the Christoffel
/// function 1 / Σ_{k<n} ψ_k(x)². The rule is symmetrized about 0.
pub fn gauss_rule(family: PolynomialFamily, n: usize) -> QuadratureRule {
    assert!(n >= 1, "gauss_rule needs at least one node");
    if n == 1 {
        return QuadratureRule {
            nodes: vec![0.0],
            weights: vec![1.0],
        };
    }
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == j {
            family.beta(j)
        } else if j + 1 == i {
            family.beta(i)
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(jacobi);
    let mut nodes: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut vals = vec![0.0; n + 1];
    let mut ders = vec![0.0; n + 1];
    for x in nodes.iter_mut() {
        for _ in 0..4 {
            family.eval_all_with_deriv(*x, &mut vals, &mut ders);
            if ders[n] == 0.0 {
                break;
            }
            let step = vals[n] / ders[n];
            *x -= step;
            if step.abs() <= 1e-16 * x.abs().max(1.0) {
                break;
            }
        }
    }
    let mut weights: Vec<f64> = nodes
        .iter()
        .map(|&x| {
            family.eval_all(x, &mut vals[..n]);
            1.0 / vals[..n].iter().map(|v| v * v).sum::<f64>()
        })
        .collect();

    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = 0.5 * (nodes[j] - nodes[i]);
        nodes[i] = -x;
        nodes[j] = x;
        let w = 0.5 * (weights[i] + weights[j]);
        weights[i] = w;
        weights[j] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    QuadratureRule { nodes, weights }
}

/// A cubature rule in `dim` variables: K nodes (rows) with weights.
#[derive(Debug, Clone)]
pub struct SparseGrid {
    pub level: usize,
    pub dim: usize,
    pub nodes: DMatrix<f64>,
    pub weights: Vec<f64>,
}

impl SparseGrid {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, k: usize) -> Vec<f64> {
        self.nodes.row(k).iter().copied().collect()
    }

    /// f evaluated at every node, in node order.
    pub fn eval<F>(&self, f: F, exec: Exec) -> Vec<f64>
    where
        F: Fn(&[f64]) -> f64 + Sync + Send,
    {
        exec.map(self.len(), |k| f(&self.node(k)))
    }

    pub fn integrate<F>(&self, f: F) -> f64
    where
        F: Fn(&[f64]) -> f64 + Sync + Send,
    {
        self.integrate_with(f, Exec::default())
    }

    pub fn integrate_with<F>(&self, f: F, exec: Exec) -> f64
    where
        F: Fn(&[f64]) -> f64 + Sync + Send,
    {
        let vals = self.eval(f, exec);
        vals.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }
}

/// Full tensor product of the n-point Gauss rule.
pub fn tensor_grid(family: PolynomialFamily, dim: usize, n: usize) -> SparseGrid {
    let rule = gauss_rule(family, n);
    let total = n.pow(dim as u32);
    let mut nodes = DMatrix::zeros(total, dim);
    let mut weights = vec![1.0; total];
    for k in 0..total {
        let mut rem = k;
        for i in 0..dim {
            let j = rem % n;
            rem /= n;
            nodes[(k, i)] = rule.nodes[j];
            weights[k] *= rule.weights[j];
        }
    }
    SparseGrid {
        level: n,
        dim,
        nodes,
        weights,
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Smolyak combination of Gauss rules with linear growth (the 1-D rule at
/// level k has k points, exact to degree 2k−1). The level-`level` grid is
/// exact for all polynomials of total degree ≤ 2·level − 1.
pub fn smolyak_grid(family: PolynomialFamily, dim: usize, level: usize) -> Result<SparseGrid> {
    smolyak_grid_capped(family, dim, level, DEFAULT_NODE_CAP)
}

pub fn smolyak_grid_capped(
    family: PolynomialFamily,
    dim: usize,
    level: usize,
    cap: usize,
) -> Result<SparseGrid> {
    if level == 0 || dim == 0 {
        return Err(Error::InvalidArgument(
            "sparse grid needs level ≥ 1 and d ≥ 1".into(),
        ));
    }
    let rules: Vec<QuadratureRule> = (1..=level).map(|k| gauss_rule(family, k)).collect();

    // Canonical ids for 1-D node values; id 0 is the origin.
    let mut values: Vec<f64> = vec![0.0];
    let ids: Vec<Vec<u32>> = rules
        .iter()
        .map(|r| {
            r.nodes
                .iter()
                .map(|&x| match values.iter().position(|&v| (v - x).abs() <= MERGE_TOL) {
                    Some(p) => p as u32,
                    None => {
                        values.push(x);
                        (values.len() - 1) as u32
                    }
                })
                .collect()
        })
        .collect();

    let max_excess = level - 1;
    let min_excess = level.saturating_sub(dim);
    let mut acc: HashMap<Vec<(u32, u32)>, f64> = HashMap::new();
    let mut active: Vec<(u32, usize)> = Vec::new();
    let mut budget_error = false;
    enumerate_excess(dim, 0, max_excess, &mut active, &mut |act: &[(u32, usize)]| {
        if budget_error {
            return;
        }
        let excess: usize = act.iter().map(|&(_, e)| e).sum();
        if excess < min_excess {
            return;
        }
        let k = max_excess - excess;
        let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
        let coef = sign * binomial(dim - 1, k);
        // tensor product over the active coordinates
        let sizes: Vec<usize> = act.iter().map(|&(_, e)| e + 1).collect();
        let count: usize = sizes.iter().product();
        let mut counter = vec![0usize; act.len()];
        for _ in 0..count {
            let mut w = coef;
            let mut key = Vec::with_capacity(act.len());
            for (a, &(i, e)) in act.iter().enumerate() {
                let r = &rules[e];
                w *= r.weights[counter[a]];
                let id = ids[e][counter[a]];
                if id != 0 {
                    key.push((i, id));
                }
            }
            *acc.entry(key).or_insert(0.0) += w;
            for a in 0..counter.len() {
                counter[a] += 1;
                if counter[a] < sizes[a] {
                    break;
                }
                counter[a] = 0;
            }
        }
        if acc.len() > cap {
            budget_error = true;
        }
    });
    if budget_error {
        return Err(Error::GridTooLarge { dim, level, cap });
    }

    let mut entries: Vec<(Vec<(u32, u32)>, f64)> = acc.into_iter().collect();
    entries.sort_by(|a, b| a.0.cmp(&b.0));
    let mut nodes = DMatrix::zeros(entries.len(), dim);
    let mut weights = Vec::with_capacity(entries.len());
    for (k, (key, w)) in entries.into_iter().enumerate() {
        for (i, id) in key {
            nodes[(k, i as usize)] = values[id as usize];
        }
        weights.push(w);
    }
    Ok(SparseGrid {
        level,
        dim,
        nodes,
        weights,
    })
}

// Visits every sparse assignment of per-coordinate excess (level − 1) with
// total ≤ `remaining`, coordinates in increasing order.
fn enumerate_excess(
    dim: usize,
    start: usize,
    remaining: usize,
    active: &mut Vec<(u32, usize)>,
    visit: &mut dyn FnMut(&[(u32, usize)]),
) {
    visit(active);
    if remaining == 0 {
        return;
    }
    for i in start..dim {
        for e in 1..=remaining {
            active.push((i as u32, e));
            enumerate_excess(dim, i + 1, remaining - e, active, visit);
            active.pop();
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativeL2 {
    pub value: f64,
    /// A negative weighted sum of squares (possible with signed Smolyak
    /// weights) was clamped to zero.
    pub clamped: bool,
}

/// ‖u − u_g‖ / ‖u‖ from values at the grid nodes.
pub fn relative_l2_from_values(exact: &[f64], surrogate: &[f64], weights: &[f64]) -> Result<RelativeL2> {
    let mut num = 0.0;
    let mut den = 0.0;
    for ((u, g), w) in exact.iter().zip(surrogate).zip(weights) {
        num += w * (u - g) * (u - g);
        den += w * u * u;
    }
    if den <= 0.0 {
        return Err(Error::UndefinedError);
    }
    let clamped = num < 0.0;
    if clamped {
        log::warn!("negative squared-error estimate {num:e} clamped to 0");
    }
    Ok(RelativeL2 {
        value: (num.max(0.0) / den).sqrt(),
        clamped,
    })
}

pub fn relative_l2_error<E, S>(exact: E, surrogate: S, grid: &SparseGrid) -> Result<RelativeL2>
where
    E: Fn(&[f64]) -> f64 + Sync + Send,
    S: Fn(&[f64]) -> f64 + Sync + Send,
{
    let exec = Exec::default();
    let u = grid.eval(exact, exec);
    let g = grid.eval(surrogate, exec);
    relative_l2_from_values(&u, &g, &grid.weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_point_rule() {
        let r = gauss_rule(PolynomialFamily::Legendre, 1);
        assert_eq!(r.nodes, vec![0.0]);
        assert_eq!(r.weights, vec![1.0]);
    }

    #[test]
    fn hermite_two_point() {
        let r = gauss_rule(PolynomialFamily::Hermite, 2);
        assert!((r.nodes[0] + 1.0).abs() < 1e-15 && (r.nodes[1] - 1.0).abs() < 1e-15);
        assert!((r.weights[0] - 0.5).abs() < 1e-15);
        let moments: Vec<f64> = (0..4).map(|k| r.integrate(|x| x.powi(k))).collect();
        for (m, e) in moments.iter().zip([1.0, 0.0, 1.0, 0.0]) {
            assert!((m - e).abs() < 1e-14);
        }
    }

    #[test]
    fn chebyshev_fourth_moment() {
        let r = gauss_rule(PolynomialFamily::Chebyshev1, 3);
        assert!((r.integrate(|x| x.powi(4)) - 0.375).abs() < 1e-14);
    }

    // Analytic moments E[x^k] of each probability measure.
    fn moment(family: PolynomialFamily, k: u32) -> f64 {
        if k % 2 == 1 {
            return 0.0;
        }
        match family {
            PolynomialFamily::Legendre => 1.0 / (k as f64 + 1.0),
            // (k-1)!!
            PolynomialFamily::Hermite => (1..k).step_by(2).map(|j| j as f64).product(),
            // C(k, k/2) / 2^k
            PolynomialFamily::Chebyshev1 => binomial(k as usize, k as usize / 2) / 2f64.powi(k as i32),
        }
    }

    #[test]
    fn gauss_exactness_1d() {
        for fam in PolynomialFamily::ALL {
            for n in 1..=12 {
                let r = gauss_rule(fam, n);
                for k in 0..(2 * n as u32) {
                    let got = r.integrate(|x| x.powi(k as i32));
                    let want = moment(fam, k);
                    let scale = r.integrate(|x| x.abs().powi(k as i32)).max(1.0);
                    assert!(
                        (got - want).abs() < 1e-12 * scale,
                        "{fam:?} n={n} k={k}: {got} vs {want}"
                    );
                }
            }
        }
    }

    #[test]
    fn level_one_is_origin() {
        let g = smolyak_grid(PolynomialFamily::Hermite, 5, 1).unwrap();
        assert_eq!(g.len(), 1);
        assert!(g.nodes.iter().all(|&x| x == 0.0));
        assert!((g.weights[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn product_moment() {
        let g = smolyak_grid(PolynomialFamily::Legendre, 2, 3).unwrap();
        let v = g.integrate(|x| x[0] * x[0] * x[1] * x[1]);
        assert!((v - 1.0 / 9.0).abs() < 1e-12);
    }

    fn monomials(dim: usize, max_deg: u32) -> Vec<Vec<u32>> {
        let mut out = vec![];
        let mut cur = vec![0u32; dim];
        loop {
            if cur.iter().sum::<u32>() <= max_deg {
                out.push(cur.clone());
            }
            let mut i = 0;
            loop {
                if i == dim {
                    return out;
                }
                cur[i] += 1;
                if cur[i] <= max_deg {
                    break;
                }
                cur[i] = 0;
                i += 1;
            }
        }
    }

    #[test]
    fn smolyak_exactness() {
        for fam in PolynomialFamily::ALL {
            for dim in [2usize, 3] {
                for level in [2usize, 3, 4] {
                    let g = smolyak_grid(fam, dim, level).unwrap();
                    let wsum: f64 = g.weights.iter().sum();
                    assert!((wsum - 1.0).abs() < 1e-12);
                    for m in monomials(dim, 2 * level as u32 - 1) {
                        let got = g.integrate(|x| x.iter().zip(&m).map(|(xi, &k)| xi.powi(k as i32)).product());
                        let want: f64 = m.iter().map(|&k| moment(fam, k)).product();
                        assert!(
                            (got - want).abs() < 1e-10 * want.abs().max(1.0),
                            "{fam:?} d={dim} p={level} m={m:?}: {got} vs {want}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn smolyak_matches_tensor_at_small_dim() {
        // ridge squared in 3 variables has degree 6
        let f = |x: &[f64]| {
            let s: f64 = x.iter().sum();
            let r = s + 0.25 * s * s + 0.025 * s * s * s;
            r * r
        };
        let sg = smolyak_grid(PolynomialFamily::Legendre, 3, 4).unwrap();
        let tg = tensor_grid(PolynomialFamily::Legendre, 3, 4);
        assert!((sg.integrate(f) - tg.integrate(f)).abs() < 1e-12);
    }

    #[test]
    fn node_cap_enforced() {
        let err = smolyak_grid_capped(PolynomialFamily::Legendre, 10, 5, 100).unwrap_err();
        assert!(matches!(err, Error::GridTooLarge { .. }));
    }

    #[test]
    fn relative_error_examples() {
        let g = smolyak_grid(PolynomialFamily::Legendre, 2, 2).unwrap();
        let u = |x: &[f64]| 3f64.sqrt() * x[0];
        assert_eq!(relative_l2_error(u, u, &g).unwrap().value, 0.0);
        assert!((relative_l2_error(u, |_| 0.0, &g).unwrap().value - 1.0).abs() < 1e-14);
        let e = relative_l2_error(u, |x| 0.9 * u(x), &g).unwrap().value;
        assert!((e - 0.1).abs() < 1e-14);
        assert!(matches!(
            relative_l2_error(|_| 0.0, u, &g),
            Err(Error::UndefinedError)
        ));
    }
}
