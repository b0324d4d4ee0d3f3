//! Exact LASSO homotopy.
//!
//! The minimizer of ½‖Ψc − b‖₂² + λ‖c‖₁ is piecewise linear in λ. On a fixed
//! support S with signs s it is c_S(λ) = G⁻¹(Ψ_Sᵀb − λs), G = Ψ_SᵀΨ_S, and
//! the residual norm is non-decreasing in λ. The constrained problem with
//! residual level σ is therefore solved exactly by the path point where
//! ‖r(λ)‖ = σ. Breakpoints are columns joining (|Ψ_jᵀr| reaching λ) or
//! leaving (a coefficient crossing zero).

use nalgebra::{DMatrix, DVector};

const REL_EVENT: f64 = 1e-12;
const CERT_TOL: f64 = 1e-7;
/// Residual levels below this fraction of ‖b‖ are round-off.
const LEVEL_FLOOR: f64 = 1e-13;
/// Relative squared pivot below which a joining column is dependent.
const SINGULAR_PIVOT: f64 = 1e-20;
const CORR_REFRESH: usize = 32;

#[derive(Debug, Clone)]
pub(super) struct PathState {
    support: Vec<usize>,
    signs: Vec<f64>,
    lambda: f64,
    /// Ψᵀb.
    ptb: DVector<f64>,
    /// Ψ_S in its leading k columns.
    sub: DMatrix<f64>,
    /// Lower Cholesky factor of Ψ_SᵀΨ_S in its leading k×k block.
    chol: DMatrix<f64>,
    /// Ψᵀr at the current λ, carried across breakpoints (the path is
    /// continuous there) and recomputed every `CORR_REFRESH` steps.
    corr: Option<DVector<f64>>,
    pub steps: usize,
}

#[derive(Debug, Clone)]
pub(super) struct PathPoint {
    pub x: DVector<f64>,
    pub certified: bool,
    /// False when the path ended at λ = 0 above the requested level.
    pub reached: bool,
}

struct Segment {
    a_s: DVector<f64>,
    b_s: DVector<f64>,
    r_a: DVector<f64>,
    q: DVector<f64>,
    alpha: DVector<f64>,
    beta: DVector<f64>,
}

impl PathState {
    fn empty(psi: &DMatrix<f64>, ptb: DVector<f64>, lambda: f64) -> Self {
        let cap = psi.nrows().min(psi.ncols()) + 1;
        Self {
            support: Vec::new(),
            signs: Vec::new(),
            lambda,
            ptb,
            sub: DMatrix::zeros(psi.nrows(), cap),
            chol: DMatrix::zeros(cap, cap),
            corr: None,
            steps: 0,
        }
    }

    /// Path start at λ_max = ‖Ψᵀb‖∞, where c = 0.
    pub fn at_origin(psi: &DMatrix<f64>, b: &DVector<f64>) -> Option<Self> {
        let ptb = psi.tr_mul(b);
        let (j, v) = ptb
            .iter()
            .copied()
            .enumerate()
            .fold(None, |best: Option<(usize, f64)>, (j, v)| match best {
                Some((_, bv)) if bv.abs() >= v.abs() => best,
                _ => Some((j, v)),
            })?;
        if v == 0.0 {
            return None;
        }
        let mut state = Self::empty(psi, ptb, v.abs());
        state.add(psi, j, v.signum()).then_some(state)
    }

    /// Path point at `lambda` on the support and signs of `x`, if `x`'s
    /// support pattern is optimal there.
    pub fn from_estimate(psi: &DMatrix<f64>, b: &DVector<f64>, x: &DVector<f64>, lambda: f64) -> Option<Self> {
        let xmax = x.amax();
        if !(lambda > 0.0) || xmax == 0.0 {
            return None;
        }
        let support: Vec<usize> = (0..x.len()).filter(|&j| x[j].abs() > 1e-9 * xmax).collect();
        if support.len() > psi.nrows() {
            return None;
        }
        let mut state = Self::empty(psi, psi.tr_mul(b), lambda);
        for &j in &support {
            if !state.add(psi, j, x[j].signum()) {
                return None;
            }
        }
        let seg = state.segment(psi, b)?;
        let c = &seg.a_s - &seg.b_s * lambda;
        if c.iter().zip(&state.signs).any(|(ci, si)| ci * si <= 0.0) {
            return None;
        }
        let corr = &seg.alpha + &seg.beta * lambda;
        let off = state.off_support_max(&corr);
        (off <= lambda * (1.0 + CERT_TOL)).then_some(state)
    }

    fn off_support_max(&self, v: &DVector<f64>) -> f64 {
        let mut on = vec![false; v.len()];
        for &j in &self.support {
            on[j] = true;
        }
        v.iter()
            .zip(&on)
            .filter(|(_, &o)| !o)
            .fold(0.0, |m, (x, _)| m.max(x.abs()))
    }

    fn segment(&self, psi: &DMatrix<f64>, b: &DVector<f64>) -> Option<Segment> {
        let k = self.support.len();
        let l = self.chol.view((0, 0), (k, k));
        let sub = self.sub.columns(0, k);
        let solve = |v: DVector<f64>| {
            let y = l.solve_lower_triangular(&v)?;
            l.tr_solve_lower_triangular(&y)
        };
        let a_s = solve(DVector::from_iterator(k, self.support.iter().map(|&j| self.ptb[j])))?;
        let b_s = solve(DVector::from_column_slice(&self.signs))?;
        if a_s.iter().chain(b_s.iter()).any(|v| !v.is_finite()) {
            return None;
        }
        let r_a = b - sub * &a_s;
        let q = sub * &b_s;
        let beta = psi.tr_mul(&q);
        let alpha = match &self.corr {
            Some(c) if !self.steps.is_multiple_of(CORR_REFRESH) => c - &beta * self.lambda,
            _ => psi.tr_mul(&r_a),
        };
        Some(Segment {
            a_s,
            b_s,
            r_a,
            q,
            alpha,
            beta,
        })
    }

    /// Appends column `j`; false if the enlarged Gram matrix is numerically
    /// singular or the support would exceed its capacity.
    fn add(&mut self, psi: &DMatrix<f64>, j: usize, sign: f64) -> bool {
        let k = self.support.len();
        if k + 1 >= self.chol.nrows() {
            return false;
        }
        let col = psi.column(j);
        let g = self.sub.columns(0, k).tr_mul(&col);
        let Some(w) = self.chol.view((0, 0), (k, k)).solve_lower_triangular(&g) else {
            return false;
        };
        let jj = col.norm_squared();
        let diag2 = jj - w.norm_squared();
        if !(diag2 > SINGULAR_PIVOT * jj) {
            return false;
        }
        self.chol.view_mut((k, 0), (1, k)).tr_copy_from(&w);
        self.chol[(k, k)] = diag2.sqrt();
        self.sub.set_column(k, &col);
        self.support.push(j);
        self.signs.push(sign);
        true
    }

    /// Drops support position `pos`; the factor is re-triangularized by
    /// Givens rotations acting on column pairs.
    fn remove(&mut self, pos: usize) {
        let k = self.support.len();
        for r in pos..k - 1 {
            for c in 0..=r + 1 {
                self.chol[(r, c)] = self.chol[(r + 1, c)];
            }
        }
        let rows = k - 1;
        for i in pos..rows {
            let (a, b) = (self.chol[(i, i)], self.chol[(i, i + 1)]);
            let r = a.hypot(b);
            if r == 0.0 {
                continue;
            }
            let (c, s) = (a / r, b / r);
            for row in i..rows {
                let (x, y) = (self.chol[(row, i)], self.chol[(row, i + 1)]);
                self.chol[(row, i)] = c * x + s * y;
                self.chol[(row, i + 1)] = -s * x + c * y;
            }
        }
        self.chol.view_mut((0, rows), (k, 1)).fill(0.0);
        self.chol.view_mut((rows, 0), (1, k)).fill(0.0);
        for c in pos..rows {
            self.sub.swap_columns(c, c + 1);
        }
        self.support.remove(pos);
        self.signs.remove(pos);
    }

    fn point(&self, n: usize, coeffs: &DVector<f64>) -> DVector<f64> {
        let mut x = DVector::zeros(n);
        for (i, &j) in self.support.iter().enumerate() {
            x[j] = coeffs[i];
        }
        x
    }

    /// Follow the path from the current λ to the point with ‖r‖ = `sigma`.
    /// `None` if a support Gram matrix becomes singular or the step budget
    /// runs out.
    pub fn walk(&mut self, psi: &DMatrix<f64>, b: &DVector<f64>, sigma: f64, max_steps: usize) -> Option<PathPoint> {
        let n = psi.ncols();
        let sigma = sigma.max(LEVEL_FLOOR * b.norm());
        let mut last_added: Option<usize> = None;
        let mut last_removed: Option<usize> = None;
        loop {
            if self.steps >= max_steps {
                return None;
            }
            let seg = self.segment(psi, b)?;
            let lam = self.lambda;
            let r_now = (&seg.r_a + &seg.q * lam).norm();
            let down = r_now > sigma;

            // ‖r_a + λq‖² = σ²
            let qa = seg.q.norm_squared();
            let qb = 2.0 * seg.r_a.dot(&seg.q);
            let qc = seg.r_a.norm_squared() - sigma * sigma;
            let disc = qb * qb - 4.0 * qa * qc;
            let target = if qa > 0.0 && disc >= 0.0 {
                let sq = disc.sqrt();
                let roots = [(-qb + sq) / (2.0 * qa), (-qb - sq) / (2.0 * qa)];
                roots
                    .into_iter()
                    .filter(|&t| t >= 0.0 && if down { t <= lam } else { t >= lam })
                    .min_by(|x, y| (x - lam).abs().partial_cmp(&(y - lam).abs()).unwrap())
            } else {
                None
            };

            let beyond = |t: f64| {
                t.is_finite()
                    && t >= 0.0
                    && if down {
                        t < lam * (1.0 - REL_EVENT)
                    } else {
                        t > lam * (1.0 + REL_EVENT)
                    }
            };
            let closer = |t: f64, best: Option<f64>| best.map(|b| (t - lam).abs() < (b - lam).abs()).unwrap_or(true);

            enum Event {
                Join(usize, f64),
                Leave(usize),
            }
            let mut next: Option<f64> = None;
            let mut event = None;
            for (i, &j) in self.support.iter().enumerate() {
                if Some(j) == last_added || seg.b_s[i] == 0.0 {
                    continue;
                }
                let t = seg.a_s[i] / seg.b_s[i];
                if beyond(t) && closer(t, next) {
                    next = Some(t);
                    event = Some(Event::Leave(i));
                }
            }
            let mut on = vec![false; n];
            for &j in &self.support {
                on[j] = true;
            }
            // a support of M columns interpolates; joins there are round-off
            let full = self.support.len() >= psi.nrows();
            for j in (0..n).filter(|_| !full) {
                if on[j] || Some(j) == last_removed {
                    continue;
                }
                for s in [1.0, -1.0] {
                    let den = s - seg.beta[j];
                    if den == 0.0 {
                        continue;
                    }
                    let t = seg.alpha[j] / den;
                    if beyond(t) && closer(t, next) {
                        next = Some(t);
                        event = Some(Event::Join(j, s));
                    }
                }
            }

            let finish = match (target, next) {
                (Some(t), Some(e)) => (t - lam).abs() <= (e - lam).abs(),
                (Some(_), None) => true,
                (None, _) => false,
            };
            if finish {
                let t = target.unwrap();
                return Some(self.finish(psi, b, &seg, t, true));
            }
            if down && next.is_none() {
                // path ends at λ = 0 without reaching σ
                let reached = seg.r_a.norm() <= sigma;
                return Some(self.finish(psi, b, &seg, 0.0, reached));
            }
            let t = next?;
            self.corr = Some(&seg.alpha + &seg.beta * t);
            self.lambda = t;
            self.steps += 1;
            match event? {
                Event::Join(j, s) => {
                    if !self.add(psi, j, s) {
                        return None;
                    }
                    last_added = Some(j);
                    last_removed = None;
                }
                Event::Leave(i) => {
                    last_removed = Some(self.support[i]);
                    last_added = None;
                    self.remove(i);
                }
            }
            if self.support.is_empty() {
                return None;
            }
        }
    }

    fn finish(&mut self, psi: &DMatrix<f64>, b: &DVector<f64>, seg: &Segment, lambda: f64, reached: bool) -> PathPoint {
        let alpha = psi.tr_mul(&seg.r_a);
        self.corr = Some(&alpha + &seg.beta * lambda);
        self.lambda = lambda;
        let c = &seg.a_s - &seg.b_s * lambda;
        let x = self.point(psi.ncols(), &c);
        let signs_ok = c.iter().zip(&self.signs).all(|(ci, si)| ci * si >= 0.0);
        // dual certificate Ψᵀr/λ = α/λ + β; once the support interpolates
        // the data α is round-off and the certificate is its limit β
        let interpolating = seg.r_a.norm() <= 1e3 * LEVEL_FLOOR * b.norm();
        let dual = if lambda > 0.0 && !interpolating {
            &alpha / lambda + &seg.beta
        } else {
            seg.beta.clone()
        };
        let off = self.off_support_max(&dual);
        PathPoint {
            x,
            certified: reached && signs_ok && off <= 1.0 + CERT_TOL,
            reached,
        }
    }
}

/// Default homotopy step budget.
pub(super) fn step_budget(m: usize, n: usize) -> usize {
    20 * (m + n) + 100
}
