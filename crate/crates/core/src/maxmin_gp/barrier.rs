//! Log-domain form of the condensed geometric program and a primal-dual
//! interior-point method for it.
//!
//! Powers and gains are normalised first: `x = p / P_total` and
//! `s_{k,n} = g_{k,n} P_total / sigma2_{k,n}`, so each ISNR factor reads
//! `(1 + s sum_{j != k} x_j) / (1 + s sum_l x_l)`. With `q = ln x` and
//! `beta = ln b` the program is
//!
//! ```text
//! minimise   beta
//! subject to f_k(q) - beta <= 0                       (one per user)
//!            ln sum_k exp(q_{k,n}) <= 0               (one per slot)
//!            q_{k,n} >= ln(floor)
//! f_k(q) = c_k + sum_n e_n [ ln(1 + sum_{j != k} s_{k,n} e^{q_{j,n}}) - A_{k,n}(q) ]
//! ```
//!
//! where `A_{k,n}` is the (affine) log of the condensed monomial. Variables
//! are laid out as `q_{k,n}` at `k * F + n`, followed by `beta`.
//!
//! The primal-dual iteration works on the slack form `f_i(y) + s_i = 0`.
//! When the exponential constraints keep its steps short, the iterate is
//! pulled back into the strict interior and the solve finishes with a plain
//! barrier method.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// The convex program of one successive-approximation step.
#[derive(Debug, Clone)]
pub struct LogProgram {
    pub(crate) k: usize,
    pub(crate) f: usize,
    /// `ln s_{k,n}`, `[k * F + n]`.
    pub(crate) log_s: Vec<f64>,
    /// Slot exponents `e_n`.
    pub(crate) exponents: Vec<f64>,
    /// Constant per-user term `c_k`.
    pub(crate) offset: Vec<f64>,
    /// Condensation weights, `[(k * F + n) * (K + 1) + m]`.
    pub(crate) weights: Vec<f64>,
    /// Constant part of `A_{k,n}`, `[k * F + n]`.
    pub(crate) affine_const: Vec<f64>,
    pub(crate) log_floor: f64,
}

/// Constraint values and first-order data at one point, ordered users,
/// budgets, floors.
struct ConstraintEval {
    user: Vec<f64>,
    user_grad: Vec<DVector<f64>>,
    user_probs: Vec<Vec<f64>>,
    budget: Vec<f64>,
    budget_probs: Vec<Vec<f64>>,
    floor: Vec<f64>,
}

impl ConstraintEval {
    fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.user.iter().chain(&self.budget).chain(&self.floor).copied()
    }
}

/// Outcome of one interior-point solve.
#[derive(Debug, Clone)]
pub struct BarrierSolution {
    /// Normalised powers `x[k][n]`.
    pub x: Vec<Vec<f64>>,
    pub beta: f64,
    pub newton_steps: usize,
    pub gap: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct BarrierSettings {
    /// Target surrogate duality gap.
    pub gap_tol: f64,
    pub max_newton: usize,
    /// Centring parameter: each step aims at `t = mu m / gap`.
    pub mu: f64,
}

impl LogProgram {
    /// `s[k][n]` are normalised SNR gains, `weights[k][n]` the `K + 1`
    /// condensation weights for `zeta_{k,n}`.
    pub fn new(
        s: &[Vec<f64>],
        exponents: &[f64],
        offset: &[f64],
        weights: &[Vec<Vec<f64>>],
        floor: f64,
    ) -> Result<Self> {
        let k = s.len();
        let f = exponents.len();
        if k == 0 || f == 0 {
            return Err(Error::Domain("empty program".into()));
        }
        if offset.len() != k || weights.len() != k || s.iter().any(|r| r.len() != f) {
            return Err(Error::Domain("inconsistent program dimensions".into()));
        }
        let mut log_s = Vec::with_capacity(k * f);
        let mut w = Vec::with_capacity(k * f * (k + 1));
        let mut affine_const = Vec::with_capacity(k * f);
        for kk in 0..k {
            for n in 0..f {
                let sv = s[kk][n];
                if !(sv > 0.0) || !sv.is_finite() {
                    return Err(Error::Domain(format!("normalised gain of user {kk} slot {n} is {sv}")));
                }
                let ls = sv.ln();
                log_s.push(ls);
                let wk = &weights[kk][n];
                if wk.len() != k + 1 {
                    return Err(Error::Domain("weight vector has wrong length".into()));
                }
                let mut c = 0.0;
                for (m, &wm) in wk.iter().enumerate() {
                    if wm > 0.0 {
                        // sum_m w_m ln(u_m / w_m), u_m = s x_m or 1
                        c += if m < k { wm * (ls - wm.ln()) } else { -wm * wm.ln() };
                    }
                }
                affine_const.push(c);
                w.extend_from_slice(wk);
            }
        }
        Ok(Self {
            k,
            f,
            log_s,
            exponents: exponents.to_vec(),
            offset: offset.to_vec(),
            weights: w,
            affine_const,
            log_floor: floor.ln(),
        })
    }

    pub fn n_users(&self) -> usize {
        self.k
    }

    pub fn n_slots(&self) -> usize {
        self.f
    }

    pub fn dim(&self) -> usize {
        self.k * self.f + 1
    }

    pub fn n_constraints(&self) -> usize {
        self.k + self.f + self.k * self.f
    }

    #[inline]
    fn idx(&self, k: usize, n: usize) -> usize {
        k * self.f + n
    }

    #[inline]
    fn weight(&self, k: usize, n: usize, m: usize) -> f64 {
        self.weights[(k * self.f + n) * (self.k + 1) + m]
    }

    /// Value of `f_k(q) - beta`. When `grad` is given, the gradient is
    /// written into it; when `slot_probs` is given it receives, for each slot,
    /// the softmax weights `pi_{j}` of the interference log-sum-exp (zero at
    /// `j = k`).
    pub fn user_constraint(
        &self,
        k: usize,
        y: &[f64],
        mut grad: Option<&mut [f64]>,
        mut slot_probs: Option<&mut [f64]>,
    ) -> f64 {
        let beta = y[self.dim() - 1];
        if let Some(g) = grad.as_deref_mut() {
            g.fill(0.0);
            g[self.dim() - 1] = -1.0;
        }
        let mut val = self.offset[k] - beta;
        for n in 0..self.f {
            let e = self.exponents[n];
            let ls = self.log_s[self.idx(k, n)];
            // interference log-sum-exp with the noise term fixed at ln 1 = 0
            let mut mx: f64 = 0.0;
            for j in 0..self.k {
                if j != k {
                    mx = mx.max(ls + y[self.idx(j, n)]);
                }
            }
            let mut sum = (-mx).exp();
            for j in 0..self.k {
                if j != k {
                    sum += (ls + y[self.idx(j, n)] - mx).exp();
                }
            }
            let lse = mx + sum.ln();
            let mut affine = self.affine_const[self.idx(k, n)];
            for j in 0..self.k {
                affine += self.weight(k, n, j) * y[self.idx(j, n)];
            }
            val += e * (lse - affine);

            if grad.is_some() || slot_probs.is_some() {
                for j in 0..self.k {
                    let pi = if j == k { 0.0 } else { (ls + y[self.idx(j, n)] - mx).exp() / sum };
                    if let Some(g) = grad.as_deref_mut() {
                        g[self.idx(j, n)] = e * (pi - self.weight(k, n, j));
                    }
                    if let Some(p) = slot_probs.as_deref_mut() {
                        p[j * self.f + n] = pi;
                    }
                }
            }
        }
        val
    }

    /// Value of `ln sum_k exp(q_{k,n})`, optionally with its softmax.
    pub fn budget_constraint(&self, n: usize, y: &[f64], probs: Option<&mut [f64]>) -> f64 {
        let mx = (0..self.k).map(|k| y[self.idx(k, n)]).fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = (0..self.k).map(|k| (y[self.idx(k, n)] - mx).exp()).sum();
        if let Some(p) = probs {
            for k in 0..self.k {
                p[k] = (y[self.idx(k, n)] - mx).exp() / sum;
            }
        }
        mx + sum.ln()
    }

    /// Gradient of the budget constraint of slot `n` as a full vector.
    pub fn budget_gradient(&self, n: usize, y: &[f64]) -> Vec<f64> {
        let mut probs = vec![0.0; self.k];
        self.budget_constraint(n, y, Some(&mut probs));
        let mut g = vec![0.0; self.dim()];
        for k in 0..self.k {
            g[self.idx(k, n)] = probs[k];
        }
        g
    }

    fn strictly_feasible(&self, y: &[f64]) -> bool {
        if y[..self.dim() - 1].iter().any(|&q| !(q > self.log_floor)) {
            return false;
        }
        (0..self.f).all(|n| self.budget_constraint(n, y, None) < 0.0)
            && (0..self.k).all(|k| self.user_constraint(k, y, None, None) < 0.0)
    }

    /// Evaluates every constraint with its first-order data.
    fn eval(&self, y: &[f64]) -> ConstraintEval {
        let d = self.dim();
        let mut user = Vec::with_capacity(self.k);
        let mut user_grad = Vec::with_capacity(self.k);
        let mut user_probs = Vec::with_capacity(self.k);
        let mut gk = vec![0.0; d];
        for k in 0..self.k {
            let mut probs = vec![0.0; self.k * self.f];
            user.push(self.user_constraint(k, y, Some(&mut gk), Some(&mut probs)));
            user_grad.push(DVector::from_column_slice(&gk));
            user_probs.push(probs);
        }
        let mut budget = Vec::with_capacity(self.f);
        let mut budget_probs = Vec::with_capacity(self.f);
        for n in 0..self.f {
            let mut rho = vec![0.0; self.k];
            budget.push(self.budget_constraint(n, y, Some(&mut rho)));
            budget_probs.push(rho);
        }
        let floor = y[..d - 1].iter().map(|q| self.log_floor - q).collect();
        ConstraintEval {
            user,
            user_grad,
            user_probs,
            budget,
            budget_probs,
            floor,
        }
    }

    /// `c + sum_i lambda_i grad f_i` with `c` the unit vector on `beta`.
    fn dual_residual(&self, ev: &ConstraintEval, lambda: &[f64]) -> DVector<f64> {
        let d = self.dim();
        let mut r = DVector::<f64>::zeros(d);
        r[d - 1] = 1.0;
        for k in 0..self.k {
            r.axpy(lambda[k], &ev.user_grad[k], 1.0);
        }
        for n in 0..self.f {
            let l = lambda[self.k + n];
            for k in 0..self.k {
                r[self.idx(k, n)] += l * ev.budget_probs[n][k];
            }
        }
        let off = self.k + self.f;
        for i in 0..d - 1 {
            r[i] -= lambda[off + i];
        }
        r
    }

    /// `sum_i w_i grad f_i`.
    fn weighted_gradient(&self, ev: &ConstraintEval, w: &[f64]) -> DVector<f64> {
        let mut r = self.dual_residual(ev, w);
        r[self.dim() - 1] -= 1.0;
        r
    }

    /// `grad f_i . v` for every constraint.
    fn directional(&self, ev: &ConstraintEval, v: &DVector<f64>) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_constraints());
        for k in 0..self.k {
            out.push(ev.user_grad[k].dot(v));
        }
        for n in 0..self.f {
            out.push((0..self.k).map(|k| ev.budget_probs[n][k] * v[self.idx(k, n)]).sum());
        }
        for i in 0..self.dim() - 1 {
            out.push(-v[i]);
        }
        out
    }

    /// `sum_i lambda_i hess f_i + sum_i rank_i grad f_i grad f_i^T`.
    fn kkt_matrix(&self, ev: &ConstraintEval, lambda: &[f64], rank: &[f64]) -> DMatrix<f64> {
        let d = self.dim();
        let mut hess = DMatrix::<f64>::zeros(d, d);
        for k in 0..self.k {
            let l = lambda[k];
            hess.ger(rank[k], &ev.user_grad[k], &ev.user_grad[k], 1.0);
            let probs = &ev.user_probs[k];
            for n in 0..self.f {
                let c = l * self.exponents[n];
                for a in 0..self.k {
                    let pa = probs[a * self.f + n];
                    if pa == 0.0 {
                        continue;
                    }
                    let ia = self.idx(a, n);
                    hess[(ia, ia)] += c * pa;
                    for b in 0..self.k {
                        hess[(ia, self.idx(b, n))] -= c * pa * probs[b * self.f + n];
                    }
                }
            }
        }
        for n in 0..self.f {
            let l = lambda[self.k + n];
            let r = rank[self.k + n];
            let rho = &ev.budget_probs[n];
            for a in 0..self.k {
                let ia = self.idx(a, n);
                hess[(ia, ia)] += l * rho[a];
                for b in 0..self.k {
                    hess[(ia, self.idx(b, n))] += (r - l) * rho[a] * rho[b];
                }
            }
        }
        let off = self.k + self.f;
        for i in 0..d - 1 {
            hess[(i, i)] += rank[off + i];
        }
        hess
    }

    /// Strictly feasible starting point near the normalised anchor `x0`.
    pub(crate) fn initial_point(&self, x0: &[Vec<f64>]) -> Vec<f64> {
        let d = self.dim();
        let mut y = vec![0.0; d];
        let lift = self.log_floor + 2f64.ln() * 10.0;
        for n in 0..self.f {
            let col: Vec<f64> = (0..self.k).map(|k| x0[k][n].max(0.0)).collect();
            let sum: f64 = col.iter().sum();
            let shrink = if sum > 0.0 { (1.0 - 1e-3) / sum.max(1.0 - 1e-3) } else { 1.0 };
            for k in 0..self.k {
                let v = col[k] * shrink;
                y[self.idx(k, n)] = if v > 0.0 { v.ln().max(lift) } else { lift };
            }
            // lifting tiny entries can push the slot over budget again
            let over = self.budget_constraint(n, &y, None);
            if over >= 0.0 {
                for k in 0..self.k {
                    y[self.idx(k, n)] -= over + 1e-3;
                }
            }
        }
        let worst = (0..self.k)
            .map(|k| self.user_constraint(k, &y, None, None))
            .fold(f64::NEG_INFINITY, f64::max);
        // user_constraint was evaluated with beta = 0
        y[d - 1] = worst + 1.0;
        y
    }

    /// Minimises `beta` with a primal-dual interior-point method on the
    /// slack form `f_i(y) + s_i = 0`, `s, lambda > 0`, starting from the
    /// normalised powers `x0`.
    pub fn solve(&self, x0: &[Vec<f64>], settings: &BarrierSettings) -> Result<BarrierSolution> {
        const FEAS_TOL: f64 = 1e-7;
        const SHORT_STEP_LIMIT: usize = 5;
        let m = self.n_constraints();
        let mut y = self.initial_point(x0);
        if !self.strictly_feasible(&y) {
            return Err(Error::Numeric("could not build a strictly feasible starting point".into()));
        }
        let mut ev = self.eval(&y);
        let mut slack: Vec<f64> = ev.values().map(|f| -f).collect();
        let mut lambda: Vec<f64> = slack.iter().map(|s| 1.0 / s).collect();
        let mut steps = 0usize;
        let mut best_gap = f64::INFINITY;
        let mut last_progress = 0usize;
        let mut short_steps = 0usize;

        let residual = |ev: &ConstraintEval, s: &[f64], lam: &[f64], t: f64| -> f64 {
            let mut sq = self.dual_residual(ev, lam).norm_squared();
            for ((f, si), li) in ev.values().zip(s).zip(lam) {
                sq += (f + si).powi(2) + (li * si - 1.0 / t).powi(2);
            }
            sq.sqrt()
        };

        loop {
            let gap: f64 = slack.iter().zip(&lambda).map(|(s, l)| s * l).sum();
            let dual_norm = self.dual_residual(&ev, &lambda).norm();
            let primal_norm = ev.values().zip(&slack).map(|(f, s)| (f + s).abs()).fold(0.0, f64::max);
            let within = |tol: f64| dual_norm <= tol && primal_norm <= tol;
            // far below the gap target the residuals can plateau at rounding level
            let solved = gap <= settings.gap_tol && within(FEAS_TOL) || gap <= settings.gap_tol * 1e-4 && within(FEAS_TOL * 1e2);
            if gap < 0.9 * best_gap {
                best_gap = gap;
                last_progress = steps;
            }
            // no progress for a while at rounding level: as good as it gets
            let stalled = steps - last_progress >= 30 && gap <= settings.gap_tol * 1e3 && within(FEAS_TOL * 1e2);
            if solved || stalled {
                return Ok(BarrierSolution {
                    x: self.unpack_x(&y),
                    beta: y[self.dim() - 1],
                    newton_steps: steps,
                    gap,
                });
            }
            if steps >= settings.max_newton {
                return Err(self.non_convergence(steps, gap, dual_norm, &y));
            }
            steps += 1;

            let t = settings.mu * m as f64 / gap;
            let r_p: Vec<f64> = ev.values().zip(&slack).map(|(f, s)| f + s).collect();
            let r_c: Vec<f64> = slack.iter().zip(&lambda).map(|(s, l)| l * s - 1.0 / t).collect();
            let rank: Vec<f64> = lambda.iter().zip(&slack).map(|(l, s)| l / s).collect();
            let w: Vec<f64> = (0..m).map(|i| (lambda[i] * r_p[i] - r_c[i]) / slack[i]).collect();
            let rhs = self.dual_residual(&ev, &lambda) + self.weighted_gradient(&ev, &w);
            let dy = newton_direction(self.kkt_matrix(&ev, &lambda, &rank), &rhs)?;
            let gdy = self.directional(&ev, &dy);
            let ds: Vec<f64> = (0..m).map(|i| -r_p[i] - gdy[i]).collect();
            let dl: Vec<f64> = (0..m).map(|i| (-r_c[i] + lambda[i] * r_p[i] + lambda[i] * gdy[i]) / slack[i]).collect();

            let mut step = 1.0f64;
            for i in 0..m {
                if ds[i] < 0.0 {
                    step = step.min(-slack[i] / ds[i]);
                }
                if dl[i] < 0.0 {
                    step = step.min(-lambda[i] / dl[i]);
                }
            }
            step *= 0.99;
            let r0 = residual(&ev, &slack, &lambda, t);
            let mut trial_y = y.clone();
            let mut trial_s = slack.clone();
            let mut trial_l = lambda.clone();
            let mut accepted = None;
            for _ in 0..60 {
                for (i, v) in trial_y.iter_mut().enumerate() {
                    *v = y[i] + step * dy[i];
                }
                for i in 0..m {
                    trial_s[i] = slack[i] + step * ds[i];
                    trial_l[i] = lambda[i] + step * dl[i];
                }
                let trial_ev = self.eval(&trial_y);
                let r1 = residual(&trial_ev, &trial_s, &trial_l, t);
                if r1.is_finite() && r1 <= (1.0 - 0.01 * step) * r0 {
                    accepted = Some(trial_ev);
                    break;
                }
                step *= 0.5;
            }
            // repeated short primal-dual steps: finish with the plain barrier method
            short_steps = if step < 0.1 { short_steps + 1 } else { 0 };
            if short_steps >= SHORT_STEP_LIMIT {
                if let Some((ry, rev)) = self.restore(&y, &slack) {
                    return self.barrier_finish(ry, rev, m as f64 / gap, settings, steps);
                }
            }
            match accepted {
                Some(next) => {
                    std::mem::swap(&mut y, &mut trial_y);
                    std::mem::swap(&mut slack, &mut trial_s);
                    std::mem::swap(&mut lambda, &mut trial_l);
                    ev = next;
                    // at a strictly feasible point the slacks can absorb the
                    // whole primal residual
                    if ev.values().all(|f| f < 0.0) {
                        for (s, f) in slack.iter_mut().zip(ev.values()) {
                            *s = -f;
                        }
                    }
                }
                None => {
                    // stalled at working precision; accept if essentially solved
                    if gap <= settings.gap_tol * 1e3 && within(FEAS_TOL * 1e2) {
                        return Ok(BarrierSolution {
                            x: self.unpack_x(&y),
                            beta: y[self.dim() - 1],
                            newton_steps: steps,
                            gap,
                        });
                    }
                    return Err(self.non_convergence(steps, gap, dual_norm, &y));
                }
            }
        }
    }

    /// Nearby strictly feasible point: over-budget slots are scaled back and
    /// `beta` is raised above every user constraint, each by the smallest
    /// current slack as margin.
    fn restore(&self, y: &[f64], slack: &[f64]) -> Option<(Vec<f64>, ConstraintEval)> {
        let margin = slack.iter().copied().fold(f64::INFINITY, f64::min).max(1e-12);
        let mut out = y.to_vec();
        for n in 0..self.f {
            let excess = self.budget_constraint(n, y, None) + margin;
            if excess > 0.0 {
                for k in 0..self.k {
                    out[self.idx(k, n)] -= excess;
                }
            }
        }
        let beta_idx = self.dim() - 1;
        let worst = (0..self.k).map(|k| self.user_constraint(k, &out, None, None)).fold(f64::NEG_INFINITY, f64::max);
        if worst + margin > 0.0 {
            out[beta_idx] += worst + margin;
        }
        let ev = self.eval(&out);
        let feasible = ev.values().all(|f| f < 0.0);
        feasible.then_some((out, ev))
    }

    /// `t beta - sum ln(-f_i)`, infinite outside the strict interior.
    fn barrier_value(&self, ev: &ConstraintEval, beta: f64, t: f64) -> f64 {
        let mut v = t * beta;
        for f in ev.values() {
            if !(f < 0.0) {
                return f64::INFINITY;
            }
            v -= (-f).ln();
        }
        v
    }

    /// Barrier method from a strictly feasible point: damped Newton
    /// centring at `t`, then `t *= mu`, until `m / t` meets the gap target.
    fn barrier_finish(
        &self,
        mut y: Vec<f64>,
        mut ev: ConstraintEval,
        mut t: f64,
        settings: &BarrierSettings,
        mut steps: usize,
    ) -> Result<BarrierSolution> {
        let m = self.n_constraints() as f64;
        let beta_idx = self.dim() - 1;
        const CENTERING_STEPS: usize = 50;
        loop {
            for _ in 0..CENTERING_STEPS {
                if steps >= settings.max_newton {
                    let dual = self.dual_residual(&ev, &vec![1.0 / t; self.n_constraints()]).norm();
                    return Err(self.non_convergence(steps, m / t, dual, &y));
                }
                let inv: Vec<f64> = ev.values().map(|f| -1.0 / f).collect();
                let rank: Vec<f64> = inv.iter().map(|v| v * v).collect();
                let scaled: Vec<f64> = inv.iter().map(|v| v / t).collect();
                let grad = self.dual_residual(&ev, &scaled) * t;
                let dy = newton_direction(self.kkt_matrix(&ev, &inv, &rank), &grad)?;
                let slope = grad.dot(&dy);
                // squared Newton decrement
                if !(slope < -1e-6) {
                    break;
                }
                steps += 1;
                let phi0 = self.barrier_value(&ev, y[beta_idx], t);
                let mut step = 1.0;
                let mut next = None;
                let mut trial = y.clone();
                for _ in 0..60 {
                    for (i, v) in trial.iter_mut().enumerate() {
                        *v = y[i] + step * dy[i];
                    }
                    let trial_ev = self.eval(&trial);
                    if self.barrier_value(&trial_ev, trial[beta_idx], t) <= phi0 + 0.01 * step * slope {
                        next = Some(trial_ev);
                        break;
                    }
                    step *= 0.5;
                }
                match next {
                    Some(e) => {
                        y = trial;
                        ev = e;
                    }
                    // no descent left at working precision
                    None => break,
                }
            }
            if m / t <= settings.gap_tol {
                return Ok(BarrierSolution {
                    x: self.unpack_x(&y),
                    beta: y[beta_idx],
                    newton_steps: steps,
                    gap: m / t,
                });
            }
            t *= settings.mu;
        }
    }

    fn unpack_x(&self, y: &[f64]) -> Vec<Vec<f64>> {
        // the slack form may end a rounding error over budget; scale back
        let shift: Vec<f64> = (0..self.f).map(|n| self.budget_constraint(n, y, None).max(0.0)).collect();
        (0..self.k)
            .map(|k| (0..self.f).map(|n| (y[self.idx(k, n)] - shift[n]).exp()).collect())
            .collect()
    }

    fn non_convergence(&self, steps: usize, gap: f64, residual: f64, y: &[f64]) -> Error {
        Error::SolverNonConvergence {
            iterations: steps,
            gap,
            residual,
            last_iterate: self.unpack_x(y),
        }
    }
}

fn newton_direction(hess: DMatrix<f64>, grad: &DVector<f64>) -> Result<DVector<f64>> {
    let d = hess.nrows();
    let scale = (0..d).map(|i| hess[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    let mut reg = 0.0;
    for _ in 0..8 {
        let mut h = hess.clone();
        if reg > 0.0 {
            for i in 0..d {
                h[(i, i)] += reg;
            }
        }
        if let Some(ch) = h.cholesky() {
            return Ok(-ch.solve(grad));
        }
        reg = if reg == 0.0 { 1e-12 * scale } else { reg * 100.0 };
    }
    Err(Error::Numeric("Newton system is not positive definite".into()))
}
