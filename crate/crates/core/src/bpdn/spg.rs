//! Spectral projected gradient on the LASSO subproblems
//! min ‖Ψc − b‖₂ s.t. ‖c‖₁ ≤ τ, with τ updated by Newton steps on the
//! Pareto curve.

use nalgebra::{DMatrix, DVector};

use super::{inf_norm, l1, project_l1_ball, SolveStatus, SolverConfig};

pub(super) struct Problem<'a> {
    pub a: &'a DMatrix<f64>,
    pub b: DVector<f64>,
}

impl Problem<'_> {
    pub fn residual(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.b - self.a * x
    }

    fn neg_grad(&self, r: &DVector<f64>) -> DVector<f64> {
        self.a.tr_mul(r)
    }
}

fn projected(x: &DVector<f64>, tau: f64) -> DVector<f64> {
    let mut v = x.clone();
    project_l1_ball(v.as_mut_slice(), tau);
    v
}

const GAMMA: f64 = 1e-4;
const STEP_MIN: f64 = 1e-16;
const N_PREV: usize = 3;
const DEC_TOL: f64 = 1e-4;
const LINE_ITERS: usize = 10;

struct LineResult {
    x: DVector<f64>,
    r: DVector<f64>,
    f: f64,
}

// Backtracking along the projection arc x(α) = P_τ(x − α·g).
fn line_curvy(
    p: &Problem,
    x: &DVector<f64>,
    g: &DVector<f64>,
    step_g: f64,
    f_max: f64,
    tau: f64,
) -> Option<LineResult> {
    let n = x.len() as f64;
    let mut step = 1.0;
    let mut scale = 1.0;
    let mut s_norm = 0.0;
    let mut n_safe = 0;
    for it in 0..=LINE_ITERS {
        let xn = projected(&(x - g * (step * scale * step_g)), tau);
        let rn = p.residual(&xn);
        let fn_ = 0.5 * rn.norm_squared();
        let s = &xn - x;
        let gts = scale * step_g * g.dot(&s);
        if gts >= 0.0 {
            return None;
        }
        if fn_ < f_max + GAMMA * step * gts {
            return Some(LineResult { x: xn, r: rn, f: fn_ });
        }
        if it == LINE_ITERS {
            break;
        }
        step /= 2.0;
        let s_old = s_norm;
        s_norm = s.norm() / n.sqrt();
        if (s_norm - s_old).abs() <= 1e-6 * s_norm {
            let g_norm = g.norm() / n.sqrt() * step_g;
            scale = s_norm / g_norm / 2f64.powi(n_safe);
            n_safe += 1;
        }
    }
    None
}

// Backtracking along a fixed feasible direction.
fn line_feasible(
    p: &Problem,
    x: &DVector<f64>,
    f: f64,
    dir: &DVector<f64>,
    gtd: f64,
    f_max: f64,
) -> Option<LineResult> {
    let gtd = -gtd.abs();
    let mut step = 1.0;
    for it in 0..=LINE_ITERS {
        let xn = x + dir * step;
        let rn = p.residual(&xn);
        let fn_ = 0.5 * rn.norm_squared();
        if fn_ < f_max + GAMMA * step * gtd {
            return Some(LineResult { x: xn, r: rn, f: fn_ });
        }
        if it == LINE_ITERS {
            break;
        }
        if step <= 0.1 {
            step /= 2.0;
        } else {
            let tmp = (-gtd * step * step) / (2.0 * (fn_ - f - step * gtd));
            step = if !tmp.is_finite() || tmp < 0.1 || tmp > 0.9 * step {
                step / 2.0
            } else {
                tmp
            };
        }
    }
    None
}

pub(super) struct SpgOutcome {
    pub x: DVector<f64>,
    pub iterations: usize,
    pub status: SolveStatus,
}

// Pareto root-finding with SPG subproblem solves, on the normalized problem
// (‖b‖ = 1).
/// First SPG iteration at which `checkpoint` is consulted; later ones
/// double.
const FIRST_CHECKPOINT: usize = 250;

/// `checkpoint(x)` returning true ends the search with status `Certified`.
pub(super) fn spg_root(
    p: &Problem,
    sigma: f64,
    cfg: &SolverConfig,
    x0: Option<DVector<f64>>,
    checkpoint: &mut dyn FnMut(&DVector<f64>) -> bool,
) -> SpgOutcome {
    let n = p.a.ncols();
    let opt_tol = cfg.opt_tol;
    let mut step_max = 1e5;
    let mut line_errors_left = 10;

    let mut tau = x0.as_ref().map(|x| l1(x.as_slice())).unwrap_or(0.0);
    let mut x = x0.map(|x| projected(&x, tau)).unwrap_or_else(|| DVector::zeros(n));
    let mut r = p.residual(&x);
    let mut g = -p.neg_grad(&r);
    let mut f = 0.5 * r.norm_squared();
    let mut f_old = f;

    let mut last_fv = [f64::NEG_INFINITY; N_PREV];
    last_fv[0] = f;
    let dx = projected(&(&x - &g), tau) - &x;
    let dx_norm = inf_norm(dx.as_slice());
    let mut step_g = if dx_norm < 1.0 / step_max {
        step_max
    } else {
        (1.0 / dx_norm).clamp(STEP_MIN, step_max)
    };

    let mut test_update_tau = false;
    let mut iter = 0;
    let mut next_checkpoint = FIRST_CHECKPOINT;
    let mut best: Option<(f64, DVector<f64>)> = None;
    let status = loop {
        let g_norm = inf_norm(g.as_slice());
        let r_norm = r.norm();
        let gap = r.dot(&(&r - &p.b)) + tau * g_norm;
        let r_gap = gap.abs() / f.max(1.0);
        let a_err1 = r_norm - sigma;
        let a_err2 = f - 0.5 * sigma * sigma;
        let r_err1 = a_err1.abs() / r_norm.max(1.0);
        let r_err2 = a_err2.abs() / f.max(1.0);

        // keep the best feasible iterate (smallest ℓ1) for the fallback path
        if r_norm <= sigma * (1.0 + opt_tol) {
            let nx = l1(x.as_slice());
            if best.as_ref().map(|(b, _)| nx < *b).unwrap_or(true) {
                best = Some((nx, x.clone()));
            }
        }

        let mut stat = None;
        if r_gap <= opt_tol.max(r_err2).max(cfg.lasso_subproblem_tol) || r_err1 <= opt_tol {
            if sigma > 0.0 && (r_norm - sigma).abs() <= opt_tol * sigma && r_gap <= cfg.lasso_subproblem_tol {
                stat = Some(SolveStatus::RootFound);
            }
            if r_norm <= 1e-13 {
                stat = Some(SolveStatus::BasisPursuit);
            }
        }
        if g_norm == 0.0 && stat.is_none() {
            // residual orthogonal to every column; no further descent possible
            stat = Some(if r_norm <= sigma * (1.0 + opt_tol) {
                SolveStatus::RootFound
            } else {
                SolveStatus::Infeasible
            });
        }

        let rel1 = (f - f_old).abs() <= DEC_TOL * f;
        let rel2 = (f - f_old).abs() <= 1e-1 * f * (r_norm - sigma).abs();
        test_update_tau = ((rel1 && r_norm > 2.0 * sigma) || (rel2 && r_norm <= 2.0 * sigma))
            && stat.is_none()
            && !test_update_tau;
        // the subproblem is solved well enough for a Newton step
        if !test_update_tau
            && stat.is_none()
            && gap.abs() <= (0.1 * r_norm * (r_norm - sigma).abs()).max(1e-3 * cfg.lasso_subproblem_tol * f)
            && (r_norm - sigma).abs() > opt_tol * sigma
        {
            test_update_tau = true;
        }

        if test_update_tau && g_norm > 0.0 {
            let tau_old = tau;
            tau = (tau + r_norm * a_err1 / g_norm).max(0.0);
            if tau < tau_old {
                x = projected(&x, tau);
                r = p.residual(&x);
                g = -p.neg_grad(&r);
                f = 0.5 * r.norm_squared();
                last_fv = [f64::NEG_INFINITY; N_PREV];
                last_fv[0] = f;
            }
        }

        if stat.is_none() && iter == next_checkpoint {
            next_checkpoint *= 2;
            if checkpoint(&x) {
                stat = Some(SolveStatus::Certified);
            }
        }
        if stat.is_none() && iter >= cfg.max_iters {
            stat = Some(SolveStatus::NotConverged);
        }
        if let Some(s) = stat {
            break s;
        }

        iter += 1;
        let x_old = x.clone();
        let f_prev = f;
        let g_old = g.clone();
        f_old = f;
        let f_max = last_fv.iter().copied().fold(f64::NEG_INFINITY, f64::max);

        let mut line = line_curvy(p, &x, &g, step_g, f_max, tau);
        if line.is_none() {
            let dir = projected(&(&x - &g * step_g), tau) - &x;
            let gtd = g.dot(&dir);
            line = line_feasible(p, &x, f_prev, &dir, gtd, f_max);
        }
        match line {
            Some(lr) => {
                x = lr.x;
                r = lr.r;
                f = lr.f;
                g = -p.neg_grad(&r);
                let s = &x - &x_old;
                let y = &g - &g_old;
                let sts = s.dot(&s);
                let sty = s.dot(&y);
                step_g = if sty <= 0.0 {
                    step_max
                } else {
                    (sts / sty).clamp(STEP_MIN, step_max)
                };
            }
            None => {
                if line_errors_left == 0 {
                    break SolveStatus::NotConverged;
                }
                line_errors_left -= 1;
                step_max /= 10.0;
                step_g = step_g.min(step_max);
            }
        }
        if f > 0.5 * sigma * sigma {
            last_fv[iter % N_PREV] = f;
        }
    };

    if status == SolveStatus::NotConverged {
        if let Some((_, bx)) = best {
            return SpgOutcome {
                x: bx,
                iterations: iter,
                status,
            };
        }
    }
    SpgOutcome {
        x,
        iterations: iter,
        status,
    }
}
