//! Posynomial pieces of the interference-to-signal ratio and their
//! arithmetic-geometric mean condensation.
//!
//! For user `k` in slot `n` the SINR denominator plus signal,
//! `zeta = g * sum_l p_l + sigma2`, is a posynomial with `K + 1` terms:
//! `u_m = g * p_m` for each user and `u_{K+1} = sigma2`. Condensing it at an
//! anchor gives the monomial `prod_m (u_m / w_m)^{w_m}` with weights
//! `w_m = u_m(anchor) / zeta(anchor)`, which never exceeds `zeta` and agrees
//! with it at the anchor.

use crate::error::{Error, Result};
use crate::linkmodel::PowerMatrix;

pub fn zeta(power: &PowerMatrix, g: &[Vec<f64>], sigma2: &[Vec<f64>], k: usize, n: usize) -> f64 {
    g[k][n] * power.slot_sum(n) + sigma2[k][n]
}

/// Interference-plus-noise posynomial `g * sum_{j != k} p_j + sigma2`.
pub fn interference_plus_noise(power: &PowerMatrix, g: &[Vec<f64>], sigma2: &[Vec<f64>], k: usize, n: usize) -> f64 {
    let others: f64 = power.p.iter().enumerate().filter(|(j, _)| *j != k).map(|(_, row)| row[n]).sum();
    g[k][n] * others + sigma2[k][n]
}

/// Condensation weights of `zeta_{k,n}` at `anchor`: one per user, then the
/// noise term.
pub fn agm_weights(anchor: &PowerMatrix, g: &[Vec<f64>], sigma2: &[Vec<f64>], k: usize, n: usize) -> Result<Vec<f64>> {
    if let Some((j, _)) = anchor.p.iter().enumerate().find(|(_, row)| !(row[n] > 0.0)) {
        return Err(Error::Numeric(format!(
            "anchor power of user {j} in slot {n} is not strictly positive; apply the power floor first"
        )));
    }
    let z = zeta(anchor, g, sigma2, k, n);
    let mut w: Vec<f64> = anchor.p.iter().map(|row| g[k][n] * row[n] / z).collect();
    w.push(sigma2[k][n] / z);
    Ok(w)
}

/// Value of the condensed monomial at `power`.
pub fn condense_zeta(power: &PowerMatrix, weights: &[f64], g: &[Vec<f64>], sigma2: &[Vec<f64>], k: usize, n: usize) -> f64 {
    let kk = power.n_users();
    let mut log_val = 0.0;
    for (m, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let u = if m < kk { g[k][n] * power.p[m][n] } else { sigma2[k][n] };
        if u <= 0.0 {
            return 0.0;
        }
        log_val += w * (u.ln() - w.ln());
    }
    log_val.exp()
}

/// Slot exponents `N * weight_n` used in the ISNR products.
pub fn slot_exponents(slot_weights: &[f64]) -> Vec<f64> {
    let n = slot_weights.len() as f64;
    slot_weights.iter().map(|w| w * n).collect()
}

/// Exact weighted ISNR product of user `k`:
/// `prod_n (interference+noise / zeta)^{N w_n}`.
pub fn isnr(power: &PowerMatrix, g: &[Vec<f64>], sigma2: &[Vec<f64>], k: usize, slot_weights: &[f64]) -> f64 {
    let e = slot_exponents(slot_weights);
    let log: f64 = e
        .iter()
        .enumerate()
        .map(|(n, en)| en * (interference_plus_noise(power, g, sigma2, k, n).ln() - zeta(power, g, sigma2, k, n).ln()))
        .sum();
    log.exp()
}

/// ISNR product with every `zeta` replaced by its condensation at `anchor`.
pub fn isnr_hat(
    power: &PowerMatrix,
    anchor: &PowerMatrix,
    g: &[Vec<f64>],
    sigma2: &[Vec<f64>],
    k: usize,
    slot_weights: &[f64],
) -> Result<f64> {
    let e = slot_exponents(slot_weights);
    let mut log = 0.0;
    for (n, en) in e.iter().enumerate() {
        let w = agm_weights(anchor, g, sigma2, k, n)?;
        let zt = condense_zeta(power, &w, g, sigma2, k, n);
        log += en * (interference_plus_noise(power, g, sigma2, k, n).ln() - zt.ln());
    }
    Ok(log.exp())
}
