//! Transmission schemes evaluated on a channel realization.
//!
//! - APASS re-solves the max-min problem at the start of every slot over the
//!   rest of the pass, using the current actual gains and predicted future
//!   gains, and commits only the current slot.
//! - STS does the same with a one-slot prediction horizon.
//! - Equal power splits the budget evenly in every slot.
//! - Water-filling allocates each slot as if users were parallel
//!   noise-limited channels.
//!
//! Every result is scored on the actual gains.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::linkmodel::{rate_report, PowerMatrix, RateReport};
use crate::maxmin_gp::{solve_maxmin, MaxMinProblem, PastSlots, SolverConfig};
use crate::rng::{Purpose, SeedTree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Apass,
    Sts,
    EqualPower,
    WaterFilling,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Apass, Scheme::Sts, Scheme::EqualPower, Scheme::WaterFilling];

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Apass => "apass",
            Scheme::Sts => "sts",
            Scheme::EqualPower => "equal_power",
            Scheme::WaterFilling => "water_filling",
        }
    }

    /// Whether the scheme consumes channel predictions.
    pub fn uses_predictions(&self) -> bool {
        matches!(self, Scheme::Apass | Scheme::Sts)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "apass" => Ok(Scheme::Apass),
            "sts" => Ok(Scheme::Sts),
            "equal_power" | "equal" => Ok(Scheme::EqualPower),
            "water_filling" | "waterfilling" => Ok(Scheme::WaterFilling),
            other => Err(Error::Config(format!("unknown scheme '{other}'"))),
        }
    }
}

/// Gaussian surrogate for a channel predictor: `h~ = h + delta`,
/// `delta ~ CN(0, v)` with `v` the normalised variance times the user's mean
/// power gain over the pass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionModel {
    pub error_variance_normalized: f64,
}

impl PredictionModel {
    pub fn perfect() -> Self {
        Self { error_variance_normalized: 0.0 }
    }
}

/// Predicted gains of one user for `future` slots, drawn from `rng`.
pub fn predict_row<R: Rng + ?Sized>(h_row: &[Complex64], future: std::ops::Range<usize>, variance: f64, rng: &mut R) -> Vec<f64> {
    if variance <= 0.0 {
        return h_row[future].iter().map(|h| h.norm_sqr()).collect();
    }
    let normal = Normal::new(0.0, (variance / 2.0).sqrt()).expect("finite variance");
    h_row[future]
        .iter()
        .map(|h| {
            let d = Complex64::new(normal.sample(rng), normal.sample(rng));
            (h + d).norm_sqr().max(f64::MIN_POSITIVE)
        })
        .collect()
}

/// Predictions for slots `from_slot + 1 .. N` (0-based `from_slot`), made at
/// the start of `from_slot`. Each `(step, user)` pair has its own stream, so
/// the draws are fresh at every step and reproducible.
pub fn predict_gains(actual_h: &[Vec<Complex64>], from_slot: usize, model: &PredictionModel, seeds: &SeedTree) -> Vec<Vec<f64>> {
    actual_h
        .iter()
        .enumerate()
        .map(|(k, row)| {
            let mean_gain = row.iter().map(|h| h.norm_sqr()).sum::<f64>() / row.len() as f64;
            let variance = model.error_variance_normalized * mean_gain;
            let mut rng = seeds.stream(k as u64, Purpose::PredictionError, from_slot as u64);
            predict_row(row, from_slot + 1..row.len(), variance, &mut rng)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SchemeConfig {
    pub solver: SolverConfig,
    /// Weigh every slot by `1/N` instead of `1/n` for realised slots and
    /// `1/(N-n)` for predicted ones.
    pub uniform_horizon_weights: bool,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        Self {
            solver: SolverConfig::default(),
            uniform_horizon_weights: false,
        }
    }
}

/// What the transmitter knows at the start of slot `slot_index` (1-based).
#[derive(Debug, Clone, PartialEq)]
pub struct ApassState {
    /// Committed power vectors of slots `1 .. n-1`, one `Vec` per slot.
    committed: Vec<Vec<f64>>,
    /// Actual gains of slots `1 .. n`, `[K][n]`.
    observed_g: Vec<Vec<f64>>,
    n_slots: usize,
    p_total: f64,
}

impl ApassState {
    pub fn new(n_users: usize, n_slots: usize, p_total: f64) -> Self {
        Self {
            committed: Vec::new(),
            observed_g: vec![Vec::new(); n_users],
            n_slots,
            p_total,
        }
    }

    pub fn n_users(&self) -> usize {
        self.observed_g.len()
    }

    /// 1-based index of the slot being decided.
    pub fn slot_index(&self) -> usize {
        self.committed.len() + 1
    }

    pub fn committed(&self) -> &[Vec<f64>] {
        &self.committed
    }

    pub fn observed_g(&self) -> &[Vec<f64>] {
        &self.observed_g
    }

    /// Reveals the actual gains of the current slot.
    pub fn observe(&mut self, gains: &[f64]) -> Result<()> {
        if gains.len() != self.n_users() {
            return Err(Error::Domain("gain vector length differs from user count".into()));
        }
        if self.observed_g[0].len() != self.committed.len() {
            return Err(Error::Domain("current slot already observed".into()));
        }
        for (row, &g) in self.observed_g.iter_mut().zip(gains) {
            row.push(g);
        }
        Ok(())
    }

    /// Fixes the allocation of the current slot and moves to the next one.
    pub fn commit(&mut self, p: Vec<f64>) -> Result<()> {
        if self.observed_g[0].len() != self.committed.len() + 1 {
            return Err(Error::Domain("cannot commit a slot before observing it".into()));
        }
        let sum: f64 = p.iter().sum();
        if p.iter().any(|v| *v < 0.0) || sum > self.p_total * (1.0 + 1e-9) {
            return Err(Error::Numeric(format!("slot allocation violates the budget (sum {sum})")));
        }
        self.committed.push(p);
        Ok(())
    }
}

/// Result of one receding-horizon step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    /// Allocation committed for the current slot.
    pub slot_power: Vec<f64>,
    /// Full plan over the current and predicted slots.
    pub plan: PowerMatrix,
    /// Optimal weighted objective of the step.
    pub objective: f64,
    pub sca_iterations: usize,
}

/// Objective weights for past+current and predicted slots at 1-based slot
/// `n` of `n_total`, with `n_pred` predicted slots in the horizon.
fn horizon_weights(n: usize, n_total: usize, n_pred: usize, uniform: bool) -> (Vec<f64>, Vec<f64>) {
    if uniform {
        let w = 1.0 / n_total as f64;
        return (vec![w; n], vec![w; n_pred]);
    }
    let realised = vec![1.0 / n as f64; n];
    let predicted = if n_total > n { vec![1.0 / (n_total - n) as f64; n_pred] } else { Vec::new() };
    (realised, predicted)
}

/// Solves the step problem at the state's current slot and returns the plan.
///
/// `predictions[k]` holds predicted gains for the next `predictions[k].len()`
/// slots (all remaining slots for APASS, at most one for STS).
pub fn apass_step(
    state: &ApassState,
    predictions: &[Vec<f64>],
    sigma2: f64,
    cfg: &SchemeConfig,
    warm_start: Option<&PowerMatrix>,
) -> Result<StepOutcome> {
    let k = state.n_users();
    let n = state.slot_index();
    if state.observed_g[0].len() != n {
        return Err(Error::Domain(format!("slot {n} has not been observed")));
    }
    if predictions.len() != k {
        return Err(Error::Domain("prediction rows differ from user count".into()));
    }
    let n_pred = predictions[0].len();
    if n + n_pred > state.n_slots {
        return Err(Error::Domain("predictions extend past the end of the pass".into()));
    }
    let (realised_w, pred_w) = horizon_weights(n, state.n_slots, n_pred, cfg.uniform_horizon_weights);

    let past = (n > 1).then(|| PastSlots {
        g: state.observed_g.iter().map(|row| row[..n - 1].to_vec()).collect(),
        sigma2: vec![vec![sigma2; n - 1]; k],
        power: (0..k).map(|user| state.committed.iter().map(|slot| slot[user]).collect()).collect(),
        slot_weights: realised_w[..n - 1].to_vec(),
    });
    let g: Vec<Vec<f64>> = (0..k)
        .map(|user| {
            let mut row = vec![state.observed_g[user][n - 1]];
            row.extend_from_slice(&predictions[user]);
            row
        })
        .collect();
    let mut slot_weights = vec![realised_w[n - 1]];
    slot_weights.extend_from_slice(&pred_w);
    let problem = MaxMinProblem {
        sigma2: vec![vec![sigma2; 1 + n_pred]; k],
        g,
        p_total: state.p_total,
        slot_weights,
        past,
    };
    let out = solve_maxmin(&problem, &cfg.solver, warm_start).map_err(|e| Error::SlotSolve {
        slot: n,
        source: Box::new(e),
    })?;
    Ok(StepOutcome {
        slot_power: out.power.slot(0),
        objective: out.min_rate,
        sca_iterations: out.iterations,
        plan: out.raw_power,
    })
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct SolveStats {
    pub sca_iterations: Vec<usize>,
    pub slot_ms: Vec<f64>,
    pub total_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeResult {
    pub scheme_name: String,
    pub power: PowerMatrix,
    pub report: RateReport,
    pub solve_stats: SolveStats,
    /// Step objectives of a receding-horizon run, in slot order.
    pub step_objectives: Vec<f64>,
}

fn receding_horizon(
    realization: &ChannelRealization,
    model: &PredictionModel,
    p_total: f64,
    sigma2: f64,
    cfg: &SchemeConfig,
    seeds: &SeedTree,
    max_lookahead: Option<usize>,
    name: &str,
) -> Result<SchemeResult> {
    let k = realization.n_users();
    let n_slots = realization.n_slots();
    if k == 0 || n_slots == 0 {
        return Err(Error::Domain("empty realization".into()));
    }
    let started = Instant::now();
    let mut state = ApassState::new(k, n_slots, p_total);
    let mut stats = SolveStats::default();
    let mut objectives = Vec::with_capacity(n_slots);
    let mut previous_plan: Option<PowerMatrix> = None;

    for slot in 0..n_slots {
        let t0 = Instant::now();
        let current: Vec<f64> = realization.g.iter().map(|row| row[slot]).collect();
        state.observe(&current)?;
        let mut predictions = predict_gains(&realization.h, slot, model, seeds);
        if let Some(h) = max_lookahead {
            for row in predictions.iter_mut() {
                row.truncate(h);
            }
        }
        let horizon = 1 + predictions[0].len();
        // continue from the remainder of the previous plan
        let warm = previous_plan.as_ref().and_then(|plan| {
            (plan.n_slots() >= horizon + 1).then(|| PowerMatrix {
                p: plan.p.iter().map(|row| row[1..=horizon].to_vec()).collect(),
                p_total,
            })
        });
        let step = apass_step(&state, &predictions, sigma2, cfg, warm.as_ref())?;
        state.commit(step.slot_power.clone())?;
        stats.sca_iterations.push(step.sca_iterations);
        stats.slot_ms.push(t0.elapsed().as_secs_f64() * 1e3);
        objectives.push(step.objective);
        previous_plan = Some(step.plan);
    }

    let mut power = PowerMatrix::zeros(k, n_slots, p_total);
    for (n, slot) in state.committed().iter().enumerate() {
        power.set_slot(n, slot);
    }
    stats.total_ms = started.elapsed().as_secs_f64() * 1e3;
    Ok(SchemeResult {
        scheme_name: name.to_string(),
        report: rate_report(&power, realization, sigma2)?,
        power,
        solve_stats: stats,
        step_objectives: objectives,
    })
}

pub fn run_apass(
    realization: &ChannelRealization,
    model: &PredictionModel,
    p_total: f64,
    sigma2: f64,
    cfg: &SchemeConfig,
    seeds: &SeedTree,
) -> Result<SchemeResult> {
    receding_horizon(realization, model, p_total, sigma2, cfg, seeds, None, Scheme::Apass.name())
}

/// Receding horizon with a single predicted slot.
pub fn run_sts(
    realization: &ChannelRealization,
    model: &PredictionModel,
    p_total: f64,
    sigma2: f64,
    cfg: &SchemeConfig,
    seeds: &SeedTree,
) -> Result<SchemeResult> {
    receding_horizon(realization, model, p_total, sigma2, cfg, seeds, Some(1), Scheme::Sts.name())
}

fn static_result(name: &str, power: PowerMatrix, realization: &ChannelRealization, sigma2: f64, started: Instant) -> Result<SchemeResult> {
    let n = power.n_slots();
    Ok(SchemeResult {
        scheme_name: name.to_string(),
        report: rate_report(&power, realization, sigma2)?,
        power,
        solve_stats: SolveStats {
            sca_iterations: vec![0; n],
            slot_ms: vec![0.0; n],
            total_ms: started.elapsed().as_secs_f64() * 1e3,
        },
        step_objectives: Vec::new(),
    })
}

pub fn run_equal_power(realization: &ChannelRealization, p_total: f64, sigma2: f64) -> Result<SchemeResult> {
    let started = Instant::now();
    let power = PowerMatrix::equal(realization.n_users(), realization.n_slots(), p_total);
    static_result(Scheme::EqualPower.name(), power, realization, sigma2, started)
}

/// Classic water-filling over users for one slot: `p_k = max(0, mu - sigma2/g_k)`
/// with the water level found by bisection.
pub fn water_fill(gains: &[f64], p_total: f64, sigma2: f64) -> Vec<f64> {
    let floors: Vec<f64> = gains.iter().map(|&g| if g > 0.0 { sigma2 / g } else { f64::INFINITY }).collect();
    let used = |mu: f64| floors.iter().map(|f| (mu - f).max(0.0)).sum::<f64>();
    let min_floor = floors.iter().copied().fold(f64::INFINITY, f64::min);
    if !min_floor.is_finite() {
        return vec![0.0; gains.len()];
    }
    let mut lo = min_floor;
    let mut hi = min_floor + p_total;
    while hi - lo > 1e-10 * hi.abs().max(f64::MIN_POSITIVE) {
        let mid = 0.5 * (lo + hi);
        if used(mid) > p_total {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    floors.iter().map(|f| (lo - f).max(0.0)).collect()
}

pub fn run_water_filling(realization: &ChannelRealization, p_total: f64, sigma2: f64) -> Result<SchemeResult> {
    let started = Instant::now();
    let mut power = PowerMatrix::zeros(realization.n_users(), realization.n_slots(), p_total);
    for n in 0..realization.n_slots() {
        let gains: Vec<f64> = realization.g.iter().map(|row| row[n]).collect();
        power.set_slot(n, &water_fill(&gains, p_total, sigma2));
    }
    static_result(Scheme::WaterFilling.name(), power, realization, sigma2, started)
}
