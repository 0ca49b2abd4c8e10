//! Rates, SINR and fairness for a superposition downlink without
//! interference cancellation.

use serde::{Deserialize, Serialize};

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};

/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380649e-23;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub temperature_k: f64,
    pub bandwidth_hz: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self { temperature_k: 290.0, bandwidth_hz: 5e6 }
    }
}

pub fn noise_variance(cfg: &NoiseConfig) -> f64 {
    BOLTZMANN * cfg.temperature_k * cfg.bandwidth_hz
}

/// A `K x N` power allocation with its per-slot budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerMatrix {
    /// `p[k][n]`
    pub p: Vec<Vec<f64>>,
    pub p_total: f64,
}

impl PowerMatrix {
    pub fn zeros(k: usize, n: usize, p_total: f64) -> Self {
        Self { p: vec![vec![0.0; n]; k], p_total }
    }

    pub fn equal(k: usize, n: usize, p_total: f64) -> Self {
        Self { p: vec![vec![p_total / k as f64; n]; k], p_total }
    }

    pub fn n_users(&self) -> usize {
        self.p.len()
    }

    pub fn n_slots(&self) -> usize {
        self.p.first().map_or(0, Vec::len)
    }

    /// Power vector of slot `n` across users.
    pub fn slot(&self, n: usize) -> Vec<f64> {
        self.p.iter().map(|row| row[n]).collect()
    }

    pub fn set_slot(&mut self, n: usize, values: &[f64]) {
        for (row, &v) in self.p.iter_mut().zip(values) {
            row[n] = v;
        }
    }

    pub fn slot_sum(&self, n: usize) -> f64 {
        self.p.iter().map(|row| row[n]).sum()
    }

    /// Non-negative entries and every slot within `p_total * (1 + 1e-9)`.
    pub fn is_feasible(&self) -> bool {
        self.p.iter().flatten().all(|&v| v >= 0.0 && v.is_finite())
            && (0..self.n_slots()).all(|n| self.slot_sum(n) <= self.p_total * (1.0 + 1e-9))
    }

    pub fn frobenius_distance(&self, other: &PowerMatrix) -> f64 {
        self.p
            .iter()
            .flatten()
            .zip(other.p.iter().flatten())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.p.iter().flatten().map(|a| a * a).sum::<f64>().sqrt()
    }
}

pub fn sinr(p_slot: &[f64], g: f64, k: usize, sigma2: f64) -> Result<f64> {
    if !(sigma2 > 0.0) {
        return Err(Error::Domain(format!("noise power must be > 0, got {sigma2}")));
    }
    let total: f64 = p_slot.iter().sum();
    let own = p_slot[k];
    let interference = (total - own).max(0.0);
    Ok(g * own / (g * interference + sigma2))
}

pub fn slot_rate(p_slot: &[f64], g: f64, k: usize, sigma2: f64) -> Result<f64> {
    Ok((1.0 + sinr(p_slot, g, k, sigma2)?).log2())
}

/// Average rate of user `k` over all slots of `power`.
pub fn horizon_rate(power: &PowerMatrix, g_k: &[f64], k: usize, sigma2: f64) -> Result<f64> {
    let n = power.n_slots();
    if g_k.len() != n {
        return Err(Error::Domain(format!("gain row has {} slots, allocation has {n}", g_k.len())));
    }
    let mut acc = 0.0;
    for (slot, &g) in g_k.iter().enumerate() {
        acc += slot_rate(&power.slot(slot), g, k, sigma2)?;
    }
    Ok(acc / n as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub per_user_rate: Vec<f64>,
    pub min_rate: f64,
    pub fairness: f64,
}

/// Jain's index `(sum x)^2 / (n sum x^2)`; 1 when every entry is zero.
pub fn jain_index(x: &[f64]) -> f64 {
    let sum: f64 = x.iter().sum();
    let sq: f64 = x.iter().map(|v| v * v).sum();
    if sq == 0.0 {
        return 1.0;
    }
    sum * sum / (x.len() as f64 * sq)
}

pub fn rate_report_from_gains(power: &PowerMatrix, g: &[Vec<f64>], sigma2: f64) -> Result<RateReport> {
    if g.len() != power.n_users() {
        return Err(Error::Domain(format!("{} gain rows for {} users", g.len(), power.n_users())));
    }
    let per_user_rate = g
        .iter()
        .enumerate()
        .map(|(k, row)| horizon_rate(power, row, k, sigma2))
        .collect::<Result<Vec<_>>>()?;
    let min_rate = per_user_rate.iter().copied().fold(f64::INFINITY, f64::min);
    let fairness = jain_index(&per_user_rate);
    Ok(RateReport { per_user_rate, min_rate, fairness })
}

pub fn rate_report(power: &PowerMatrix, realization: &ChannelRealization, sigma2: f64) -> Result<RateReport> {
    rate_report_from_gains(power, &realization.g, sigma2)
}
