use crate::error::{Error, Result};
use ndarray::Array2;

/// Huber function `L_κ(u)`.
pub fn huber(u: f64, kappa: f64) -> f64 {
    if u.abs() <= kappa {
        0.5 * u * u
    } else {
        kappa * (u.abs() - 0.5 * kappa)
    }
}

/// Quantile Huber loss `ρ_τ^κ(u) = |τ − 1{u<0}| · L_κ(u) / κ`.
pub fn quantile_huber(u: f64, tau: f64, kappa: f64) -> f64 {
    let weight = (tau - if u < 0.0 { 1.0 } else { 0.0 }).abs();
    weight * huber(u, kappa) / kappa
}

/// `∂ρ_τ^κ / ∂u`; at the kink `|u| = κ` both one-sided derivatives agree.
pub fn quantile_huber_grad(u: f64, tau: f64, kappa: f64) -> f64 {
    let weight = (tau - if u < 0.0 { 1.0 } else { 0.0 }).abs();
    let dl = if u.abs() <= kappa { u } else { kappa * u.signum() };
    weight * dl / kappa
}

/// Pairwise quantile regression loss.
///
/// `pred` and `taus` are `M × N`, `targets` is `M × N'`. Returns
/// `(1/M) Σ_b (1/N') Σ_i Σ_j ρ_{τ_bi}(T_bj − Z_bi)` and its gradient with
/// respect to `pred`.
pub fn quantile_regression_loss(
    pred: &Array2<f64>,
    taus: &Array2<f64>,
    targets: &Array2<f64>,
    kappa: f64,
) -> Result<(f64, Array2<f64>)> {
    let (m, n) = pred.dim();
    let n_target = targets.ncols();
    let scale = 1.0 / (m as f64 * n_target as f64);
    let mut loss = 0.0;
    let mut grad = Array2::zeros((m, n));
    for b in 0..m {
        for i in 0..n {
            let (z, tau) = (pred[[b, i]], taus[[b, i]]);
            let mut g = 0.0;
            for j in 0..n_target {
                let u = targets[[b, j]] - z;
                loss += quantile_huber(u, tau, kappa);
                g -= quantile_huber_grad(u, tau, kappa);
            }
            grad[[b, i]] = g * scale;
        }
    }
    let loss = loss * scale;
    if !loss.is_finite() {
        return Err(Error::Divergence(format!("quantile loss is {loss}")));
    }
    Ok((loss, grad))
}

/// Mean squared error `(1/M) Σ (y − q)²` and its gradient in `q`.
pub fn squared_td_loss(pred: &[f64], targets: &[f64]) -> Result<(f64, Vec<f64>)> {
    let m = pred.len() as f64;
    let loss = pred.iter().zip(targets).map(|(q, y)| (y - q).powi(2)).sum::<f64>() / m;
    if !loss.is_finite() {
        return Err(Error::Divergence(format!("TD loss is {loss}")));
    }
    let grad = pred.iter().zip(targets).map(|(q, y)| -2.0 * (y - q) / m).collect();
    Ok((loss, grad))
}
