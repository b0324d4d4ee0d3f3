//! Noise-level estimation by cross-validation.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::homotopy::{step_budget, PathState};
use super::{solve_bpdn_warm, SolverConfig};
use crate::sampling::{derive_seed, permutation, rng_from_seed};

/// How the candidate solves of one split are computed. Both give the
/// constrained minimizer at every candidate; `Path` obtains all of them from
/// one homotopy sweep, `PerCandidate` runs the full solver once per
/// candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CvRoute {
    #[default]
    Path,
    PerCandidate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrossValConfig {
    pub recon_fraction: f64,
    pub num_eps_candidates: usize,
    pub num_splits: usize,
    /// Candidate ε_r range as fractions of ‖u_r‖₂ (log-spaced).
    pub eps_lo: f64,
    pub eps_hi: f64,
    pub route: CvRoute,
}

impl Default for CrossValConfig {
    fn default() -> Self {
        Self {
            recon_fraction: 0.8,
            num_eps_candidates: 9,
            num_splits: 4,
            eps_lo: 1e-4,
            eps_hi: 1.0,
            route: CvRoute::Path,
        }
    }
}

impl CrossValConfig {
    pub fn validate(&self) -> crate::Result<()> {
        let ok = self.recon_fraction > 0.0
            && self.recon_fraction < 1.0
            && self.num_eps_candidates >= 1
            && self.num_splits >= 1
            && self.eps_lo > 0.0
            && self.eps_hi >= self.eps_lo;
        if ok {
            Ok(())
        } else {
            Err(crate::Error::Config(
                "cross-validation needs 0 < recon_fraction < 1, at least one candidate and split, 0 < eps_lo <= eps_hi"
                    .into(),
            ))
        }
    }

    /// Candidate ε_r values as fractions of ‖u_r‖₂, ascending.
    pub fn candidate_fractions(&self) -> Vec<f64> {
        let k = self.num_eps_candidates.max(1);
        if k == 1 {
            return vec![self.eps_lo];
        }
        let (lo, hi) = (self.eps_lo.log10(), self.eps_hi.log10());
        (0..k)
            .map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / (k - 1) as f64))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct SplitResult {
    pub chosen: usize,
    pub eps_r: Vec<f64>,
    pub eps_v: Vec<f64>,
    pub epsilon: f64,
}

#[derive(Debug, Clone)]
pub struct CrossValReport {
    pub epsilon: f64,
    pub splits: Vec<SplitResult>,
}

// Solutions at the given normalized residual levels (descending) from one
// downward homotopy sweep.
fn path_solutions(psi: &DMatrix<f64>, b: &DVector<f64>, levels: &[f64]) -> Option<Vec<DVector<f64>>> {
    let n = psi.ncols();
    let budget = step_budget(psi.nrows(), n);
    let mut state: Option<PathState> = None;
    let mut out = Vec::with_capacity(levels.len());
    for &sigma in levels {
        if sigma >= 1.0 {
            out.push(DVector::zeros(n));
            continue;
        }
        let st = match state.as_mut() {
            Some(st) => st,
            None => state.insert(PathState::at_origin(psi, b)?),
        };
        let p = st.walk(psi, b, sigma, budget)?;
        if !p.certified && p.reached {
            return None;
        }
        out.push(p.x);
    }
    Some(out)
}

/// ε by cross-validation: per split, scan ε_r over the candidate grid on
/// the reconstruction rows, keep the one minimizing the validation residual
/// and rescale by √(M/M_r); average over splits. Split `k` is drawn from
/// the stream `derive_seed(seed, [k])`. Ties go to the smaller candidate.
pub fn cross_validate_epsilon(
    psi: &DMatrix<f64>,
    u: &[f64],
    cv: &CrossValConfig,
    solver: &SolverConfig,
    seed: u64,
) -> CrossValReport {
    let m = u.len();
    if u.iter().all(|&x| x == 0.0) || m < 2 {
        return CrossValReport {
            epsilon: 0.0,
            splits: vec![],
        };
    }
    let m_r = ((cv.recon_fraction * m as f64).round() as usize).clamp(1, m - 1);
    let fracs = cv.candidate_fractions();
    let k = fracs.len();

    let splits: Vec<SplitResult> = (0..cv.num_splits.max(1))
        .map(|s| {
            let mut rng = rng_from_seed(derive_seed(seed, &[s as u64]));
            let perm = permutation(m, &mut rng);
            let (rec, val) = perm.split_at(m_r);
            let psi_r = psi.select_rows(rec.iter());
            let psi_v = psi.select_rows(val.iter());
            let u_r = DVector::from_iterator(m_r, rec.iter().map(|&i| u[i]));
            let u_v = DVector::from_iterator(val.len(), val.iter().map(|&i| u[i]));
            let ur_norm = u_r.norm();
            let eps_r: Vec<f64> = fracs.iter().map(|f| f * ur_norm).collect();

            let mut coeffs: Vec<DVector<f64>> = vec![DVector::zeros(psi.ncols()); k];
            let mut swept = false;
            if cv.route == CvRoute::Path && ur_norm > 0.0 {
                let levels: Vec<f64> = fracs.iter().rev().copied().collect();
                if let Some(sols) = path_solutions(&psi_r, &(&u_r / ur_norm), &levels) {
                    for (i, c) in sols.into_iter().rev().enumerate() {
                        coeffs[i] = c * ur_norm;
                    }
                    swept = true;
                }
            }
            if !swept {
                // largest ε first so each solve warm-starts the next
                let mut warm: Option<Vec<f64>> = None;
                for i in (0..k).rev() {
                    let sol = solve_bpdn_warm(&psi_r, u_r.as_slice(), eps_r[i], solver, warm.as_deref());
                    coeffs[i] = DVector::from_column_slice(&sol.coeffs);
                    warm = Some(sol.coeffs);
                }
            }
            let eps_v: Vec<f64> = coeffs.iter().map(|c| (&psi_v * c - &u_v).norm()).collect();
            let chosen = (0..k)
                .min_by(|&a, &b| eps_v[a].partial_cmp(&eps_v[b]).unwrap().then(a.cmp(&b)))
                .unwrap();
            SplitResult {
                chosen,
                epsilon: (m as f64 / m_r as f64).sqrt() * eps_r[chosen],
                eps_r,
                eps_v,
            }
        })
        .collect();
    let epsilon = splits.iter().map(|s| s.epsilon).sum::<f64>() / splits.len() as f64;
    CrossValReport { epsilon, splits }
}
