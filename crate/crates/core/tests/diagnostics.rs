use gpc_rotation::diagnostics::*;
use gpc_rotation::sampling::{sample_inputs, InputDistribution};
use gpc_rotation::Exec;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn pairwise_coherence(psi: &DMatrix<f64>) -> f64 {
    let mut best = 0.0f64;
    for j in 0..psi.ncols() {
        for k in 0..j {
            let (a, b) = (psi.column(j), psi.column(k));
            best = best.max(a.dot(&b).abs() / (a.norm() * b.norm()));
        }
    }
    best
}

#[test]
fn blocked_coherence_matches_pairwise() {
    let psi = sample_inputs(InputDistribution::GaussianStd, 300, 40, 1);
    let fast = mutual_coherence_with(&psi, Exec::Parallel).unwrap();
    assert!((fast - pairwise_coherence(&psi)).abs() < 1e-14);
    assert_eq!(fast, mutual_coherence_with(&psi, Exec::Sequential).unwrap());
}

#[test]
fn power_law_tail() {
    let c: Vec<f64> = (1..=455).map(|n| (n as f64).powf(-1.5)).collect();
    let cs = best_s_approx(&c, 10);
    let err: f64 = c.iter().zip(&cs).map(|(a, b)| (a - b).abs()).sum();
    let mut oracle = 0.0;
    for n in (11..=455).rev() {
        oracle += (n as f64).powf(-1.5);
    }
    assert!((err - oracle).abs() < 1e-13);
    assert!(cs[..10].iter().all(|&x| x != 0.0) && cs[10..].iter().all(|&x| x == 0.0));
}

proptest! {
    #[test]
    fn coherence_bounded_and_scale_invariant(seed in 0u64..10_000, m in 2usize..12, n in 2usize..15, scales in prop::collection::vec(0.1f64..10.0, 15)) {
        let psi = sample_inputs(InputDistribution::UniformSym, m, n, seed).transpose();
        let mu = mutual_coherence(&psi).unwrap();
        prop_assert!((0.0..=1.0).contains(&mu));
        let mut scaled = psi.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= scales[j];
        }
        prop_assert!((mutual_coherence(&scaled).unwrap() - mu).abs() < 1e-12);
    }

    #[test]
    fn profile_decreases_to_zero(c in prop::collection::vec(prop_oneof![Just(0.0), -5.0f64..5.0], 1..30)) {
        let s_list: Vec<usize> = (1..=c.len() + 2).collect();
        let p = sparsity_profile(&c, &s_list).unwrap();
        prop_assert!(p.values.windows(2).all(|w| w[1] <= w[0]));
        let nnz = c.iter().filter(|&&x| x != 0.0).count().max(1);
        prop_assert!(p.values[nnz - 1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn truncation_keeps_largest(c in prop::collection::vec(-5.0f64..5.0, 1..30), s in 0usize..30) {
        let s = s.min(c.len());
        let cs = best_s_approx(&c, s);
        let kept: Vec<usize> = (0..c.len()).filter(|&i| cs[i] != 0.0).collect();
        prop_assert!(kept.len() <= s);
        let min_kept = kept.iter().map(|&i| c[i].abs()).fold(f64::INFINITY, f64::min);
        for i in 0..c.len() {
            if cs[i] == 0.0 {
                prop_assert!(c[i].abs() <= min_kept);
            } else {
                prop_assert_eq!(cs[i], c[i]);
            }
        }
    }
}
