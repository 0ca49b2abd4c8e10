//! Max-min fair power allocation by successive geometric programming.
//!
//! Maximising the minimum (weighted) average rate is equivalent to
//! minimising the largest product of per-slot interference-to-signal ratios
//! `ISNR = (I + N) / (S + I + N)`. The denominators are posynomials; each
//! iteration condenses them into monomials at the previous iterate, which
//! turns the problem into a geometric program solved in the log domain. The
//! condensation is a lower bound on the denominator that is tight at the
//! anchor, so the exact objective never gets worse from one iteration to the
//! next and the iterates settle on a KKT point.
//!
//! The same machinery serves the receding-horizon schemes: slots whose
//! powers are already committed enter as constants, and per-slot objective
//! weights become exponents of the ISNR factors.

mod barrier;
mod kkt;
pub mod posynomial;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linkmodel::PowerMatrix;

pub use barrier::{BarrierSettings, BarrierSolution, LogProgram};
pub use kkt::{kkt_residual, KktReport};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Stop when `||P_i - P_{i-1}||_F / ||P_i||_F < epsilon`.
    pub epsilon: f64,
    pub max_sca_iters: usize,
    /// Duality-gap target of each interior-point solve (log-domain objective units).
    pub inner_tol: f64,
    /// Lower bound on every power, as a fraction of the budget.
    pub p_floor: f64,
    /// Powers below this fraction of the budget are reported as zero.
    pub truncate_below: f64,
    pub max_newton_steps: usize,
    /// Centring parameter of the interior-point steps.
    pub centering_mu: f64,
    /// After each step, also try continuing along the step in the log
    /// domain and keep that point when its exact objective is lower.
    pub extrapolate: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-4,
            max_sca_iters: 50,
            inner_tol: 1e-8,
            p_floor: 1e-12,
            truncate_below: 1e-9,
            max_newton_steps: 2000,
            centering_mu: 10.0,
            extrapolate: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::Config("solver epsilon must be > 0".into()));
        }
        if !(self.p_floor >= 0.0 && self.p_floor < 1.0) {
            return Err(Error::Config("p_floor must lie in [0, 1)".into()));
        }
        if !(self.inner_tol > 0.0) || !(self.centering_mu > 1.0) {
            return Err(Error::Config("inner_tol must be > 0 and centering_mu > 1".into()));
        }
        if self.max_sca_iters == 0 {
            return Err(Error::Config("max_sca_iters must be >= 1".into()));
        }
        Ok(())
    }

    fn barrier(&self) -> BarrierSettings {
        BarrierSettings {
            gap_tol: self.inner_tol,
            max_newton: self.max_newton_steps,
            mu: self.centering_mu,
        }
    }

    /// Floor actually used inside the solver. Zero is not representable in
    /// the log domain, so a requested floor of 0 falls back to 1e-15.
    fn effective_floor(&self) -> f64 {
        if self.p_floor > 0.0 {
            self.p_floor
        } else {
            1e-15
        }
    }
}

/// Slots whose powers are already fixed. They contribute a constant factor
/// to each user's ISNR product.
#[derive(Debug, Clone, PartialEq)]
pub struct PastSlots {
    /// `[K][M]`
    pub g: Vec<Vec<f64>>,
    pub sigma2: Vec<Vec<f64>>,
    pub power: Vec<Vec<f64>>,
    /// Objective weight of each past slot.
    pub slot_weights: Vec<f64>,
}

/// A max-min allocation problem over the free slots.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxMinProblem {
    /// `[K][F]` power gains of the free slots.
    pub g: Vec<Vec<f64>>,
    pub sigma2: Vec<Vec<f64>>,
    pub p_total: f64,
    /// Objective weight of each free slot.
    pub slot_weights: Vec<f64>,
    pub past: Option<PastSlots>,
}

impl MaxMinProblem {
    /// The genie-aided problem: every slot free, uniform `1/N` weights.
    pub fn genie(g: Vec<Vec<f64>>, sigma2: Vec<Vec<f64>>, p_total: f64) -> Self {
        let n = g.first().map_or(0, Vec::len);
        Self {
            g,
            sigma2,
            p_total,
            slot_weights: vec![1.0 / n as f64; n],
            past: None,
        }
    }

    /// Same noise power everywhere.
    pub fn uniform_noise(k: usize, n: usize, sigma2: f64) -> Vec<Vec<f64>> {
        vec![vec![sigma2; n]; k]
    }

    pub fn n_users(&self) -> usize {
        self.g.len()
    }

    pub fn n_free(&self) -> usize {
        self.slot_weights.len()
    }

    pub fn n_past(&self) -> usize {
        self.past.as_ref().map_or(0, |p| p.slot_weights.len())
    }

    /// Total number of slots in the objective.
    pub fn horizon(&self) -> usize {
        self.n_free() + self.n_past()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.n_users();
        let f = self.n_free();
        if k == 0 || f == 0 {
            return Err(Error::Domain("problem needs at least one user and one free slot".into()));
        }
        if !(self.p_total > 0.0) {
            return Err(Error::Domain(format!("power budget must be > 0, got {}", self.p_total)));
        }
        let shape_ok = |m: &[Vec<f64>], cols: usize| m.len() == k && m.iter().all(|r| r.len() == cols);
        if !shape_ok(&self.g, f) || !shape_ok(&self.sigma2, f) {
            return Err(Error::Domain("gain/noise arrays do not match K x F".into()));
        }
        if self.g.iter().flatten().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::Domain("power gains must be finite and > 0".into()));
        }
        if self.sigma2.iter().flatten().any(|&v| !(v > 0.0)) {
            return Err(Error::Domain("noise powers must be > 0".into()));
        }
        if self.slot_weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::Domain("slot weights must be > 0".into()));
        }
        if let Some(p) = &self.past {
            let m = p.slot_weights.len();
            if !shape_ok(&p.g, m) || !shape_ok(&p.sigma2, m) || !shape_ok(&p.power, m) {
                return Err(Error::Domain("past-slot arrays do not match K x M".into()));
            }
        }
        Ok(())
    }

    fn exponent_scale(&self) -> f64 {
        self.horizon() as f64
    }

    /// Natural-log constant each user's ISNR product picks up from the
    /// committed slots.
    pub fn past_log_offset(&self) -> Vec<f64> {
        let k = self.n_users();
        let scale = self.exponent_scale();
        match &self.past {
            None => vec![0.0; k],
            Some(past) => (0..k)
                .map(|user| {
                    (0..past.slot_weights.len())
                        .map(|m| {
                            let total: f64 = past.power.iter().map(|row| row[m]).sum();
                            let own = past.power[user][m];
                            let g = past.g[user][m];
                            let s2 = past.sigma2[user][m];
                            let num = g * (total - own).max(0.0) + s2;
                            let den = g * total + s2;
                            scale * past.slot_weights[m] * (num / den).ln()
                        })
                        .sum()
                })
                .collect(),
        }
    }

    /// `ln` of each user's exact weighted ISNR product at `power`.
    pub fn user_log_isnr(&self, power: &PowerMatrix) -> Vec<f64> {
        let offset = self.past_log_offset();
        let scale = self.exponent_scale();
        (0..self.n_users())
            .map(|k| {
                offset[k]
                    + (0..self.n_free())
                        .map(|n| {
                            let e = scale * self.slot_weights[n];
                            let num = posynomial::interference_plus_noise(power, &self.g, &self.sigma2, k, n);
                            let den = posynomial::zeta(power, &self.g, &self.sigma2, k, n);
                            e * (num / den).ln()
                        })
                        .sum::<f64>()
            })
            .collect()
    }

    /// Exact objective `b = max_k ISNR_k` of the equivalent minimisation.
    pub fn exact_b(&self, power: &PowerMatrix) -> f64 {
        self.user_log_isnr(power).into_iter().fold(f64::NEG_INFINITY, f64::max).exp()
    }

    /// Weighted rate of each user in bits/s/Hz (past slots included).
    pub fn weighted_rates(&self, power: &PowerMatrix) -> Vec<f64> {
        let scale = self.exponent_scale() * std::f64::consts::LN_2;
        self.user_log_isnr(power).into_iter().map(|l| -l / scale).collect()
    }

    pub fn weighted_min_rate(&self, power: &PowerMatrix) -> f64 {
        self.weighted_rates(power).into_iter().fold(f64::INFINITY, f64::min)
    }

    /// Equal split of the budget over the free slots.
    pub fn equal_power(&self) -> PowerMatrix {
        PowerMatrix::equal(self.n_users(), self.n_free(), self.p_total)
    }

    /// Time-shared starting point. Slots are handed out one at a time: the
    /// user with the lowest accumulated rate (committed slots included) takes
    /// its strongest slot that still has room, each slot holding
    /// `ceil(K/F)` favoured users. Favoured users split almost all of the
    /// budget; the rest get `1e-3` of it each.
    pub fn scheduled_start(&self) -> PowerMatrix {
        const MINOR: f64 = 1e-3;
        let (k, f) = (self.n_users(), self.n_free());
        let per_slot = k.div_ceil(f.max(1)).max(1).min(k);
        let exponents: Vec<f64> = self.slot_weights.iter().map(|w| w * self.exponent_scale()).collect();
        let snr = |user: usize, n: usize| self.g[user][n] * self.p_total / self.sigma2[user][n];
        let mean_snr: Vec<f64> = (0..k).map(|user| (0..f).map(|n| snr(user, n)).sum::<f64>() / f as f64).collect();
        let mut acc: Vec<f64> = self.past_log_offset().iter().map(|c| -c).collect();
        let mut favoured = vec![vec![false; f]; k];
        let mut room = vec![per_slot; f];
        for _ in 0..per_slot * f {
            let open = |user: usize| (0..f).any(|n| room[n] > 0 && !favoured[user][n]);
            let Some(user) = (0..k).filter(|&u| open(u)).min_by(|&a, &b| {
                acc[a]
                    .total_cmp(&acc[b])
                    .then(mean_snr[a].total_cmp(&mean_snr[b]))
                    .then(a.cmp(&b))
            }) else {
                break;
            };
            let n = (0..f)
                .filter(|&n| room[n] > 0 && !favoured[user][n])
                .max_by(|&a, &b| snr(user, a).total_cmp(&snr(user, b)).then(b.cmp(&a)))
                .expect("open slot");
            favoured[user][n] = true;
            room[n] -= 1;
            acc[user] += exponents[n] * (1.0 + snr(user, n) / per_slot as f64).ln();
        }
        let mut out = PowerMatrix::zeros(k, f, self.p_total);
        for n in 0..f {
            let n_fav = (0..k).filter(|&u| favoured[u][n]).count().max(1);
            let n_minor = k - n_fav.min(k);
            let minor = if n_minor > 0 { MINOR.min(0.5 / n_minor as f64) } else { 0.0 };
            let major = (1.0 - minor * n_minor as f64) / n_fav as f64;
            for user in 0..k {
                out.p[user][n] = if favoured[user][n] { major } else { minor } * self.p_total;
            }
        }
        out
    }
}

/// One condensed geometric program.
#[derive(Debug, Clone, PartialEq)]
pub struct GpInstance {
    pub g: Vec<Vec<f64>>,
    pub sigma2: Vec<Vec<f64>>,
    pub p_total: f64,
    pub slot_weights: Vec<f64>,
    /// Per-user constant from committed slots (natural log).
    pub log_offset: Vec<f64>,
    /// Multiplier turning slot weights into ISNR exponents.
    pub exponent_scale: f64,
    /// Expansion point of the condensation. Strictly positive.
    pub anchor: PowerMatrix,
}

impl GpInstance {
    pub fn new(problem: &MaxMinProblem, anchor: PowerMatrix) -> Self {
        Self {
            g: problem.g.clone(),
            sigma2: problem.sigma2.clone(),
            p_total: problem.p_total,
            slot_weights: problem.slot_weights.clone(),
            log_offset: problem.past_log_offset(),
            exponent_scale: problem.exponent_scale(),
            anchor,
        }
    }

    /// Builds the normalised log-domain program.
    pub fn log_program(&self, floor: f64) -> Result<LogProgram> {
        let k = self.g.len();
        let f = self.slot_weights.len();
        let s: Vec<Vec<f64>> = (0..k)
            .map(|kk| (0..f).map(|n| self.g[kk][n] * self.p_total / self.sigma2[kk][n]).collect())
            .collect();
        let weights = (0..k)
            .map(|kk| (0..f).map(|n| posynomial::agm_weights(&self.anchor, &self.g, &self.sigma2, kk, n)).collect())
            .collect::<Result<Vec<Vec<Vec<f64>>>>>()?;
        let exponents: Vec<f64> = self.slot_weights.iter().map(|w| w * self.exponent_scale).collect();
        LogProgram::new(&s, &exponents, &self.log_offset, &weights, floor)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpSolution {
    pub power: PowerMatrix,
    /// Optimal value of the condensed program, `ln b`.
    pub log_b: f64,
    pub newton_steps: usize,
}

/// Solves one condensed geometric program.
pub fn solve_gp(instance: &GpInstance, cfg: &SolverConfig) -> Result<GpSolution> {
    let floor = cfg.effective_floor();
    let program = instance.log_program(floor)?;
    let x0: Vec<Vec<f64>> = instance
        .anchor
        .p
        .iter()
        .map(|row| row.iter().map(|v| v / instance.p_total).collect())
        .collect();
    let sol = program.solve(&x0, &cfg.barrier())?;
    let p = sol
        .x
        .iter()
        .map(|row| row.iter().map(|v| v * instance.p_total).collect())
        .collect();
    Ok(GpSolution {
        power: PowerMatrix { p, p_total: instance.p_total },
        log_b: sol.beta,
        newton_steps: sol.newton_steps,
    })
}

/// Lifts entries to the floor and rescales any slot pushed over budget.
pub fn floored_anchor(power: &PowerMatrix, cfg: &SolverConfig) -> PowerMatrix {
    let floor = cfg.effective_floor() * power.p_total;
    let mut out = power.clone();
    for row in out.p.iter_mut() {
        for v in row.iter_mut() {
            *v = v.max(floor * 4.0);
        }
    }
    for n in 0..out.n_slots() {
        let sum = out.slot_sum(n);
        if sum > out.p_total {
            let scale = out.p_total / sum;
            for row in out.p.iter_mut() {
                row[n] *= scale;
            }
        }
    }
    out
}

/// Zeroes entries below `cfg.truncate_below * P_total`.
pub fn truncate_small(power: &PowerMatrix, cfg: &SolverConfig) -> PowerMatrix {
    let thr = cfg.truncate_below * power.p_total;
    let mut out = power.clone();
    for v in out.p.iter_mut().flatten() {
        if *v < thr {
            *v = 0.0;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScaIterate {
    pub iteration: usize,
    /// Exact objective `b` at this iterate.
    pub b: f64,
    /// Exact weighted minimum rate at this iterate.
    pub min_rate: f64,
    /// Relative Frobenius change from the previous iterate.
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaOutcome {
    /// Final allocation with negligible powers set to zero.
    pub power: PowerMatrix,
    /// Final allocation as returned by the solver.
    pub raw_power: PowerMatrix,
    /// Weighted minimum rate of `power`.
    pub min_rate: f64,
    pub iterations: usize,
    pub converged: bool,
    pub newton_steps: usize,
    pub trace: Vec<ScaIterate>,
}

/// Successive convex approximation for a max-min problem.
///
/// Starts from `init` when given (after lifting it to the power floor), else
/// from equal power.
pub fn sca_maxmin(problem: &MaxMinProblem, cfg: &SolverConfig, init: Option<&PowerMatrix>) -> Result<ScaOutcome> {
    problem.validate()?;
    cfg.validate()?;
    let start = match init {
        Some(p) => {
            if p.n_users() != problem.n_users() || p.n_slots() != problem.n_free() {
                return Err(Error::Domain("initial allocation has the wrong shape".into()));
            }
            floored_anchor(p, cfg)
        }
        None => problem.equal_power(),
    };

    let mut anchor = start;
    let mut trace = vec![ScaIterate {
        iteration: 0,
        b: problem.exact_b(&anchor),
        min_rate: problem.weighted_min_rate(&anchor),
        delta: f64::NAN,
    }];
    let mut newton_steps = 0;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_sca_iters {
        iterations += 1;
        let instance = GpInstance::new(problem, anchor.clone());
        let sol = solve_gp(&instance, cfg)?;
        newton_steps += sol.newton_steps;
        let next = if cfg.extrapolate { extrapolate(problem, cfg, &anchor, sol.power) } else { sol.power };
        let norm = next.frobenius_norm();
        let delta = if norm > 0.0 { next.frobenius_distance(&anchor) / norm } else { 0.0 };
        log::trace!("sca iteration {iterations}: delta {delta:.3e}");
        trace.push(ScaIterate {
            iteration: iterations,
            b: problem.exact_b(&next),
            min_rate: problem.weighted_min_rate(&next),
            delta,
        });
        anchor = next;
        if delta < cfg.epsilon {
            converged = true;
            break;
        }
    }

    log::debug!("sca: {iterations} iterations, {newton_steps} newton steps, converged {converged}");
    let power = truncate_small(&anchor, cfg);
    Ok(ScaOutcome {
        min_rate: problem.weighted_min_rate(&power),
        power,
        raw_power: anchor,
        iterations,
        converged,
        newton_steps,
        trace,
    })
}

/// Longest extrapolation tried, as a multiple of the step just taken.
const MAX_STRETCH: f64 = 8.0;

/// Steps past `next` along `ln next - ln from`, doubling the stretch while the
/// exact objective keeps falling. Returns `next` when no stretch helps.
fn extrapolate(problem: &MaxMinProblem, cfg: &SolverConfig, from: &PowerMatrix, next: PowerMatrix) -> PowerMatrix {
    let mut best_b = problem.exact_b(&next);
    let mut best = next.clone();
    let mut stretch = 1.0;
    while stretch <= MAX_STRETCH {
        let mut candidate = next.clone();
        for (row, (a, b)) in candidate.p.iter_mut().zip(from.p.iter().zip(&next.p)) {
            for (v, (pa, pb)) in row.iter_mut().zip(a.iter().zip(b)) {
                *v = (pb * (pb / pa).powf(stretch)).min(next.p_total);
            }
        }
        let candidate = floored_anchor(&candidate, cfg);
        let b = problem.exact_b(&candidate);
        if !(b < best_b) {
            break;
        }
        best_b = b;
        best = candidate;
        stretch *= 2.0;
    }
    best
}

/// SCA from `warm` when given. Otherwise SCA from equal power and from the
/// scheduled start, keeping the better result (equal power on ties).
pub fn solve_maxmin(problem: &MaxMinProblem, cfg: &SolverConfig, warm: Option<&PowerMatrix>) -> Result<ScaOutcome> {
    if let Some(w) = warm {
        return sca_maxmin(problem, cfg, Some(w));
    }
    let equal = sca_maxmin(problem, cfg, None);
    if problem.n_users() == 1 {
        return equal;
    }
    let scheduled = sca_maxmin(problem, cfg, Some(&problem.scheduled_start()));
    match (equal, scheduled) {
        (Ok(a), Ok(b)) => Ok(if b.min_rate > a.min_rate { b } else { a }),
        (Ok(a), Err(e)) | (Err(e), Ok(a)) => {
            log::debug!("one SCA start failed: {e}");
            Ok(a)
        }
        (Err(e), Err(_)) => Err(e),
    }
}

/// Genie-aided bound: max-min allocation with every gain known up front.
pub fn genie_bound(g: &[Vec<f64>], sigma2: &[Vec<f64>], p_total: f64, cfg: &SolverConfig) -> Result<ScaOutcome> {
    let problem = MaxMinProblem::genie(g.to_vec(), sigma2.to_vec(), p_total);
    solve_maxmin(&problem, cfg, None)
}

/// Writes the iteration trace as `iteration, b, min_rate, delta` CSV.
pub fn write_trace_csv<W: std::io::Write>(trace: &[ScaIterate], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iteration", "b", "min_rate", "frobenius_delta"])?;
    for it in trace {
        w.write_record([
            it.iteration.to_string(),
            format!("{:e}", it.b),
            format!("{:.10}", it.min_rate),
            if it.delta.is_nan() { String::new() } else { format!("{:e}", it.delta) },
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}
