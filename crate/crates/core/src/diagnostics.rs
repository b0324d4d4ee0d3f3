//! Mutual coherence, best s-term truncation and sparsity profiles.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{Error, Exec, Result};

const COHERENCE_BLOCK: usize = 128;

/// max_{j≠k} |Ψ_jᵀΨ_k| / (‖Ψ_j‖‖Ψ_k‖).
pub fn mutual_coherence(psi: &DMatrix<f64>) -> Result<f64> {
    mutual_coherence_with(psi, Exec::default())
}

pub fn mutual_coherence_with(psi: &DMatrix<f64>, exec: Exec) -> Result<f64> {
    let n = psi.ncols();
    if n < 2 {
        return Err(Error::InvalidArgument(format!("coherence needs at least 2 columns, got {n}")));
    }
    let mut unit = psi.clone();
    for (j, mut col) in unit.column_iter_mut().enumerate() {
        let norm = col.norm();
        if norm == 0.0 {
            return Err(Error::ZeroColumn(j));
        }
        col /= norm;
    }
    let unit_t = unit.transpose();
    let blocks = n.div_ceil(COHERENCE_BLOCK);
    let maxima = exec.map(blocks, |b| {
        let start = b * COHERENCE_BLOCK;
        let width = COHERENCE_BLOCK.min(n - start);
        let gram = &unit_t * unit.columns(start, width);
        let mut best = 0.0f64;
        for c in 0..width {
            let j = start + c;
            for (k, v) in gram.column(c).iter().enumerate() {
                if k != j {
                    best = best.max(v.abs());
                }
            }
        }
        best
    });
    Ok(maxima.into_iter().fold(0.0, f64::max).min(1.0))
}

/// Keeps the `s` largest-magnitude entries; equal magnitudes favour the
/// lower index.
pub fn best_s_approx(c: &[f64], s: usize) -> Vec<f64> {
    let mut order: Vec<usize> = (0..c.len()).collect();
    order.sort_by(|&a, &b| c[b].abs().total_cmp(&c[a].abs()).then(a.cmp(&b)));
    let mut out = vec![0.0; c.len()];
    for &i in order.iter().take(s) {
        out[i] = c[i];
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsityProfile {
    pub s: Vec<usize>,
    /// ‖c − c_s‖₁ / √s.
    pub values: Vec<f64>,
}

pub fn sparsity_profile(c: &[f64], s_list: &[usize]) -> Result<SparsityProfile> {
    if s_list.contains(&0) || s_list.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidArgument("sparsity levels must be ascending and at least 1".into()));
    }
    let mut mags: Vec<f64> = c.iter().map(|x| x.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    // tail[s] = Σ_{i≥s} |c|_(i), summed from the smallest entry up
    let mut tail = vec![0.0; mags.len() + 1];
    for i in (0..mags.len()).rev() {
        tail[i] = tail[i + 1] + mags[i];
    }
    let values = s_list
        .iter()
        .map(|&s| tail[s.min(mags.len())] / (s as f64).sqrt())
        .collect();
    Ok(SparsityProfile {
        s: s_list.to_vec(),
        values,
    })
}

/// Mean and sample standard deviation (0 for fewer than two values).
pub fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthogonal_and_repeated_columns() {
        let id = DMatrix::<f64>::identity(4, 3);
        assert_eq!(mutual_coherence(&id).unwrap(), 0.0);
        let rep = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, -1.0, -2.0]);
        assert!((mutual_coherence(&rep).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn coherence_errors() {
        let z = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 0.0]);
        assert!(matches!(mutual_coherence(&z), Err(Error::ZeroColumn(1))));
        assert!(mutual_coherence(&DMatrix::from_element(3, 1, 1.0)).is_err());
    }

    #[test]
    fn truncation() {
        assert_eq!(best_s_approx(&[3.0, -2.0, 1.0], 1), vec![3.0, 0.0, 0.0]);
        assert_eq!(best_s_approx(&[3.0, -2.0, 1.0], 3), vec![3.0, -2.0, 1.0]);
        assert_eq!(best_s_approx(&[1.0, -1.0, 1.0], 2), vec![1.0, -1.0, 0.0]);
        assert_eq!(best_s_approx(&[1.0, 2.0], 0), vec![0.0, 0.0]);
    }

    #[test]
    fn profile_values() {
        let p = sparsity_profile(&[3.0, 2.0, 1.0], &[1, 2, 3, 5]).unwrap();
        assert_eq!(p.values, vec![3.0, 1.0 / 2f64.sqrt(), 0.0, 0.0]);
        let one = sparsity_profile(&[0.0, -4.0, 0.0], &[1, 2]).unwrap();
        assert!(one.values.iter().all(|&v| v == 0.0));
        assert!(sparsity_profile(&[1.0], &[0]).is_err());
        assert!(sparsity_profile(&[1.0], &[2, 1]).is_err());
    }

    #[test]
    fn sample_statistics() {
        assert_eq!(mean_and_std(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_and_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
    }
}
