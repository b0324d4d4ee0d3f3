use gpc_rotation::basis::{BasisSet, PolynomialFamily};
use gpc_rotation::benchmarks::*;
use gpc_rotation::quadrature::{gauss_rule, smolyak_grid};
use gpc_rotation::sampling::{sample_inputs, InputDistribution};

mod common;
use common::{extrapolated_eigenvalues, nystrom};

#[test]
fn eigenvalues_match_nystrom() {
    for (l_c, d) in [(0.2, 15), (0.25, 10)] {
        let kl = kl_eigenpairs(l_c, d).unwrap();
        let oracle = extrapolated_eigenvalues(l_c, d);
        for (i, m) in kl.modes.iter().enumerate() {
            let rel = (m.lambda - oracle[i]).abs() / m.lambda;
            assert!(rel < 1e-6, "l_c={l_c} mode {i}: {} vs {} ({rel:e})", m.lambda, oracle[i]);
        }
    }
}

#[test]
fn eigenfunctions_match_nystrom() {
    let (l_c, d) = (0.2, 15);
    let kl = kl_eigenpairs(l_c, d).unwrap();
    let (coarse, fine) = (nystrom(l_c, 400), nystrom(l_c, 800));
    for (i, m) in kl.modes.iter().enumerate() {
        let exact: Vec<f64> = (0..=400).map(|j| m.eval(j as f64 / 400.0)).collect();
        let aligned = |v: Vec<f64>| {
            let s = v.iter().zip(&exact).map(|(a, b)| a * b).sum::<f64>().signum();
            v.into_iter().map(|x| s * x).collect::<Vec<f64>>()
        };
        let c = aligned((0..=400).map(|j| coarse.functions[(j, i)]).collect());
        let f = aligned((0..=400).map(|j| fine.functions[(2 * j, i)]).collect());
        let err = (0..=400)
            .map(|j| coarse.weights[j] * (exact[j] - (4.0 * f[j] - c[j]) / 3.0).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(err < 1e-4, "mode {i}: {err:e}");
    }
}

fn composite(f: impl Fn(f64) -> f64, lo: f64, hi: f64, panels: usize) -> f64 {
    let rule = gauss_rule(PolynomialFamily::Legendre, 8);
    let h = (hi - lo) / panels as f64;
    (0..panels)
        .map(|p| {
            let mid = lo + (p as f64 + 0.5) * h;
            rule.nodes.iter().zip(&rule.weights).map(|(t, w)| h * w * f(mid + 0.5 * h * t)).sum::<f64>()
        })
        .sum()
}

#[test]
fn eigenfunctions_are_normalized_and_trace_is_one() {
    for (l_c, d) in [(0.2, 15), (0.25, 10), (1.0, 5)] {
        let kl = kl_eigenpairs(l_c, d).unwrap();
        for m in &kl.modes {
            let norm = composite(|x| m.eval(x).powi(2), 0.0, 1.0, 200);
            assert!((norm - 1.0).abs() < 1e-10, "{norm}");
        }
    }
    // λ_i → 2c/ω_i² with ω_i ≈ (i − 1)π, so the tail past d modes is about
    // 2c / (π²(d − ½))
    let (l_c, d) = (0.2, 4000);
    let kl = kl_eigenpairs(l_c, d).unwrap();
    let tail = 2.0 / l_c / (std::f64::consts::PI.powi(2) * (d as f64 - 0.5));
    assert!((kl.partial_sum() + tail - 1.0).abs() < 1e-6, "{}", kl.partial_sum());
}

#[test]
fn partial_sums_against_oracle() {
    let kl = kl_eigenpairs(0.2, 15).unwrap();
    assert!(kl.partial_sum() > 0.93, "{}", kl.partial_sum());
    for (l_c, d) in [(0.2, 15), (0.25, 10)] {
        let oracle: f64 = extrapolated_eigenvalues(l_c, d).iter().sum();
        let s = kl_eigenpairs(l_c, d).unwrap().partial_sum();
        assert!((s - oracle).abs() < 1e-6 * oracle, "{s} vs {oracle}");
    }
}

/// Adaptive Simpson on [a, b].
fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    // fixed initial subdivision guards against accidental early agreement
    let pieces = 16;
    let h = (b - a) / pieces as f64;
    (0..pieces)
        .map(|k| {
            let (lo, hi) = (a + k as f64 * h, a + (k + 1) as f64 * h);
            let (fa, fm, fb) = (f(lo), f(0.5 * (lo + hi)), f(hi));
            rec(f, lo, hi, fa, fm, fb, (hi - lo) / 6.0 * (fa + 4.0 * fm + fb), tol / pieces as f64, 40)
        })
        .sum()
}

#[test]
fn soliton_matches_integral_form() {
    let kl = kl_eigenpairs(0.25, 10).unwrap();
    let sigma = 0.4;
    let (x, t) = (6.0, 1.0);
    let pts = sample_inputs(InputDistribution::UniformSym, 10, 50, 3);
    let inner: Vec<f64> = kl.modes.iter().map(|m| simpson(&|y| m.eval(y), 0.0, t, 1e-13)).collect();
    let nested: Vec<f64> = kl
        .modes
        .iter()
        .map(|m| simpson(&|z| simpson(&|y| m.eval(y), 0.0, z, 1e-13), 0.0, t, 1e-12))
        .collect();
    let problem = KdvProblem::new(&kl, sigma);
    for q in 0..pts.nrows() {
        let xi: Vec<f64> = pts.row(q).iter().copied().collect();
        let drift: f64 = (0..10).map(|i| kl.modes[i].lambda.sqrt() * xi[i] * inner[i]).sum();
        let shift: f64 = (0..10).map(|i| kl.modes[i].lambda.sqrt() * xi[i] * nested[i]).sum();
        let sech = 1.0 / (x - 4.0 * t + 6.0 * sigma * shift).cosh();
        let oracle = sigma * drift - 2.0 * sech * sech;
        assert!((problem.qoi(&xi) - oracle).abs() < 1e-8, "{} vs {oracle}", problem.qoi(&xi));
        assert_eq!(problem.qoi(&xi), kdv_qoi(&xi, &kl, sigma));
    }
    assert!((kdv_qoi(&[0.0; 10], &kl, 0.0) + 0.14130165).abs() < 1e-7);
}

#[test]
fn soliton_drift_is_linear() {
    let kl = kl_eigenpairs(0.25, 10).unwrap();
    let p = KdvProblem::new(&kl, 0.4);
    let xi = [0.3, -0.1, 0.8, 0.2, -0.5, 0.0, 0.9, -0.7, 0.4, 0.1];
    let two: Vec<f64> = xi.iter().map(|x| 2.0 * x).collect();
    let sech2 = |v: &[f64]| {
        let sb: f64 = p.b.iter().zip(v).map(|(b, x)| b * x).sum();
        let s = 1.0 / (2.0 + 6.0 * 0.4 * sb).cosh();
        -2.0 * s * s
    };
    let base = p.qoi(&[0.0; 10]);
    let lhs = (p.qoi(&two) - sech2(&two)) - (base - sech2(&[0.0; 10]));
    let rhs = 2.0 * ((p.qoi(&xi) - sech2(&xi)) - (base - sech2(&[0.0; 10])));
    assert!((lhs - rhs).abs() < 1e-14);
}

#[test]
fn elliptic_matches_adaptive_quadrature() {
    let kl = kl_eigenpairs(0.2, 15).unwrap().with_sigma(0.5);
    let p = EllipticProblem::new(kl.clone(), 0.1, 0.35).unwrap();
    let pts = sample_inputs(InputDistribution::UniformSym, 15, 5, 4);
    for q in 0..pts.nrows() {
        let xi: Vec<f64> = pts.row(q).iter().copied().collect();
        let a = |y: f64| 0.1 + kl.field(&xi, y).exp();
        let flux = simpson(&|y| y / a(y), 0.0, 1.0, 1e-13) / simpson(&|y| 1.0 / a(y), 0.0, 1.0, 1e-13);
        let oracle = simpson(&|y| (flux - y) / a(y), 0.0, 0.35, 1e-13);
        assert!((p.qoi(&xi).unwrap() - oracle).abs() < 1e-10);
    }
    let flat = kl_eigenpairs(0.2, 15).unwrap().with_sigma(0.0);
    assert!((elliptic_qoi(&[0.7; 15], &flat, 0.35).unwrap() - 0.10340909).abs() < 1e-9);
}

#[test]
fn elliptic_quadrature_self_converges() {
    let kl = kl_eigenpairs(0.2, 15).unwrap().with_sigma(0.5);
    let coarse = EllipticProblem::with_panels(kl.clone(), 0.1, 0.35, 1000).unwrap();
    let fine = EllipticProblem::with_panels(kl, 0.1, 0.35, 2000).unwrap();
    let pts = sample_inputs(InputDistribution::Arcsine, 15, 10, 5);
    for q in 0..pts.nrows() {
        let xi: Vec<f64> = pts.row(q).iter().copied().collect();
        assert!((coarse.qoi(&xi).unwrap() - fine.qoi(&xi).unwrap()).abs() < 1e-10);
    }
}

#[test]
fn stiffer_medium_moves_less() {
    let kl = kl_eigenpairs(0.2, 15).unwrap().with_sigma(0.5);
    let soft = EllipticProblem::new(kl.clone(), 0.1, 0.35).unwrap();
    let stiff = EllipticProblem::new(kl, 0.3, 0.35).unwrap();
    let pts = sample_inputs(InputDistribution::UniformSym, 15, 10, 6);
    for q in 0..pts.nrows() {
        let xi: Vec<f64> = pts.row(q).iter().copied().collect();
        assert!(stiff.qoi(&xi).unwrap() < soft.qoi(&xi).unwrap());
    }
}

#[test]
fn highdim_values_and_exact_moment() {
    assert_eq!(highdim_eval(&[0.0; 100]), 0.0);
    let mut root_sum = 0.0;
    for i in (1..=100).rev() {
        root_sum += 1.0 / (i as f64).sqrt();
    }
    assert!((highdim_eval(&[1.0; 100]) - (100.0 + 0.25 * root_sum * root_sum)).abs() < 1e-10);

    // E[u²] for uniform inputs: E ξ² = 1/3, E ξ⁴ = 1/5
    let harmonic: f64 = (1..=100).map(|i| 1.0 / i as f64).sum();
    let inv_sq: f64 = (1..=100).map(|i| 1.0 / (i * i) as f64).sum();
    let t4 = inv_sq / 5.0 + (harmonic * harmonic - inv_sq) / 3.0;
    let exact = 100.0 / 3.0 + t4 / 16.0;
    let grid = smolyak_grid(PolynomialFamily::Legendre, 100, 3).unwrap();
    let integral = grid.integrate(|x: &[f64]| highdim_eval(x).powi(2));
    assert!((integral - exact).abs() < 1e-10 * exact, "{integral} vs {exact}");
}

#[test]
fn compressible_mean_of_leading_coefficient() {
    let basis = BasisSet::new(PolynomialFamily::Legendre, 2, 1).unwrap();
    let mean = (0..10_000u64).map(|s| compressible_coeffs(&basis, s)[0]).sum::<f64>() / 1e4;
    assert!((mean - 0.5).abs() < 0.02, "{mean}");
}

#[test]
fn ridge_is_sparse_after_exact_rotation() {
    let (basis, c) = common::rotated_ridge_projection();
    let big = c.iter().filter(|x| x.abs() >= 1e-10).count();
    assert!(big <= 4, "{big}");
    for alpha in [[0u32; 12], [1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]] {
        assert!(c[basis.position(&alpha).unwrap()].abs() > 1e-3);
    }
}

#[test]
fn registry_evaluates_every_problem() {
    for id in BenchmarkId::ALL {
        for family in [PolynomialFamily::Legendre, PolynomialFamily::Chebyshev1] {
            let p = BenchmarkProblem::reference(id, family, 1).unwrap();
            let (d, order) = id.default_size();
            assert_eq!((p.d, p.order), (d, order));
            let xi = vec![0.1; d];
            let v = p.eval(&xi).unwrap();
            assert!(v.is_finite());
            assert_eq!(v, p.eval(&xi).unwrap());
            assert!(p.eval(&vec![0.0; d + 1]).is_err());
        }
    }
}
