//! First-order optimality check of an allocation against the exact
//! (uncondensed) log-domain max-min program.
//!
//! At `q = ln p` with `beta = max_k F_k(q)`, stationarity asks for
//! multipliers `lambda >= 0` (users) and `mu >= 0` (budgets) with
//! `sum lambda = 1` and `sum_k lambda_k grad F_k + sum_n mu_n grad h_n = 0`.
//! The best multipliers are found by non-negative least squares; the norm of
//! what is left over is the stationarity residual.

use nalgebra::{DMatrix, DVector};

use super::posynomial::{interference_plus_noise, slot_exponents, zeta};
use crate::linkmodel::PowerMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct KktReport {
    /// Euclidean norm of the stationarity residual.
    pub stationarity: f64,
    /// `beta - F_k >= 0`; zero for users attaining the objective.
    pub user_slack: Vec<f64>,
    /// `1 - sum_k p_{k,n} / P_total` per slot.
    pub budget_slack: Vec<f64>,
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    /// Largest `multiplier * slack` product.
    pub complementarity: f64,
}

pub fn kkt_residual(
    power: &PowerMatrix,
    g: &[Vec<f64>],
    sigma2: &[Vec<f64>],
    p_total: f64,
    slot_weights: &[f64],
) -> KktReport {
    let k = power.n_users();
    let f = power.n_slots();
    let e = slot_exponents(slot_weights);

    // F_k and its gradient in q
    let mut values = vec![0.0; k];
    let mut grads = vec![vec![0.0; k * f]; k];
    for user in 0..k {
        for n in 0..f {
            let num = interference_plus_noise(power, g, sigma2, user, n);
            let den = zeta(power, g, sigma2, user, n);
            values[user] += e[n] * (num / den).ln();
            for j in 0..k {
                let u = g[user][n] * power.p[j][n];
                let pi = if j == user { 0.0 } else { u / num };
                let tau = u / den;
                grads[user][j * f + n] = e[n] * (pi - tau);
            }
        }
    }
    let beta = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let rows = 1 + k * f;
    let cols = k + f;
    let mut a = DMatrix::<f64>::zeros(rows, cols);
    let mut b = DVector::<f64>::zeros(rows);
    b[0] = 1.0;
    for user in 0..k {
        a[(0, user)] = 1.0;
        for i in 0..k * f {
            // stationarity: sum lambda grad F + sum mu grad h = 0
            a[(1 + i, user)] = grads[user][i];
        }
    }
    let mut budget_slack = vec![0.0; f];
    for n in 0..f {
        let sum = power.slot_sum(n);
        budget_slack[n] = 1.0 - sum / p_total;
        if sum > 0.0 {
            for j in 0..k {
                a[(1 + j * f + n, k + n)] = power.p[j][n] / sum;
            }
        }
    }
    let z = nnls(&a, &b);
    let resid = &a * &z - &b;
    let lambda: Vec<f64> = z.iter().take(k).copied().collect();
    let mu: Vec<f64> = z.iter().skip(k).copied().collect();
    let user_slack: Vec<f64> = values.iter().map(|v| beta - v).collect();
    let complementarity = lambda
        .iter()
        .zip(&user_slack)
        .map(|(l, s)| l * s)
        .chain(mu.iter().zip(&budget_slack).map(|(m, s)| m * s.abs()))
        .fold(0.0, f64::max);

    KktReport {
        stationarity: resid.norm(),
        user_slack,
        budget_slack,
        lambda,
        mu,
        complementarity,
    }
}

/// Lawson-Hanson non-negative least squares.
fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.ncols();
    let mut x = DVector::<f64>::zeros(n);
    let mut passive = vec![false; n];
    let tol = 1e-12 * a.norm().max(1.0);

    let solve_passive = |passive: &[bool]| -> DVector<f64> {
        let idx: Vec<usize> = (0..n).filter(|&i| passive[i]).collect();
        let sub = a.select_columns(&idx);
        let sol = sub
            .svd(true, true)
            .solve(b, 1e-14)
            .unwrap_or_else(|_| DVector::zeros(idx.len()));
        let mut full = DVector::<f64>::zeros(n);
        for (pos, &i) in idx.iter().enumerate() {
            full[i] = sol[pos];
        }
        full
    };

    for _ in 0..3 * n + 10 {
        let w = a.transpose() * (b - a * &x);
        let candidate = (0..n)
            .filter(|&i| !passive[i] && w[i] > tol)
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(enter) = candidate else { break };
        passive[enter] = true;
        loop {
            let s = solve_passive(&passive);
            if (0..n).filter(|&i| passive[i]).all(|i| s[i] > 0.0) {
                x = s;
                break;
            }
            let mut alpha = 1.0f64;
            for i in 0..n {
                if passive[i] && s[i] <= 0.0 {
                    let denom = x[i] - s[i];
                    if denom > 0.0 {
                        alpha = alpha.min(x[i] / denom);
                    }
                }
            }
            for i in 0..n {
                x[i] += alpha * (s[i] - x[i]);
                if passive[i] && x[i] <= 1e-15 {
                    passive[i] = false;
                    x[i] = 0.0;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nnls_matches_unconstrained_when_positive() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let x = nnls(&a, &b);
        assert!((x[0] - 1.0).abs() < 1e-10 && (x[1] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn nnls_clamps_negative_direction() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let b = DVector::from_vec(vec![-1.0, 2.0]);
        let x = nnls(&a, &b);
        assert_eq!(x[0], 0.0);
        assert!((x[1] - 2.0).abs() < 1e-12);
    }
}
