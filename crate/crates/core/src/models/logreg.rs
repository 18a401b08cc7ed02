//! L2-penalised logistic regression fitted by iteratively reweighted least
//! squares. The objective is the mean log-likelihood minus `λ/2 · |w|²`; the
//! intercept is not penalised.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{check_training_data, sigmoid, ModelError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRegConfig {
    pub l2_lambda: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        Self {
            l2_lambda: 1e-4,
            max_iter: 200,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    pub intercept: f64,
    pub weights: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub config: LogRegConfig,
}

impl LogRegModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.intercept + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        sigmoid(self.decision(x))
    }
}

fn design(x: &[Vec<f64>]) -> DMatrix<f64> {
    let d = x[0].len();
    DMatrix::from_fn(x.len(), d + 1, |i, j| if j == 0 { 1.0 } else { x[i][j - 1] })
}

fn objective(xm: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>, lambda: f64) -> f64 {
    let eta = xm * beta;
    let n = y.len() as f64;
    let ll: f64 = eta
        .iter()
        .zip(y.iter())
        .map(|(&z, &t)| {
            // log(1 + e^z) computed stably
            let softplus = if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
            t * z - softplus
        })
        .sum();
    let penalty: f64 = beta.iter().skip(1).map(|b| b * b).sum();
    ll / n - 0.5 * lambda * penalty
}

pub fn train_logreg(x: &[Vec<f64>], y: &[u8], cfg: &LogRegConfig) -> Result<LogRegModel, ModelError> {
    let d = check_training_data(x, y)?;
    let n = x.len() as f64;
    let xm = design(x);
    let yv = DVector::from_iterator(y.len(), y.iter().map(|&v| v as f64));
    let mut beta = DVector::zeros(d + 1);
    let mut current = objective(&xm, &yv, &beta, cfg.l2_lambda);
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iter {
        iterations += 1;
        let p = (&xm * &beta).map(sigmoid);
        let w = p.map(|v| v * (1.0 - v));
        let mut grad = xm.transpose() * (&yv - &p) / n;
        for j in 1..=d {
            grad[j] -= cfg.l2_lambda * beta[j];
        }
        let weighted = DMatrix::from_fn(xm.nrows(), xm.ncols(), |i, j| xm[(i, j)] * w[i]);
        let mut info = xm.transpose() * weighted / n;
        for j in 1..=d {
            info[(j, j)] += cfg.l2_lambda;
        }
        let step = match info.clone().cholesky() {
            Some(ch) => ch.solve(&grad),
            None => {
                info[(0, 0)] += 1e-12;
                match info.lu().solve(&grad) {
                    Some(s) => s,
                    None => break,
                }
            }
        };

        // step halving keeps the penalised likelihood non-decreasing
        let mut scale = 1.0;
        let mut next = &beta + &step;
        let mut value = objective(&xm, &yv, &next, cfg.l2_lambda);
        while value < current && scale > 1e-10 {
            scale *= 0.5;
            next = &beta + &step * scale;
            value = objective(&xm, &yv, &next, cfg.l2_lambda);
        }
        if value < current {
            break;
        }
        let change = (&next - &beta).amax();
        beta = next;
        current = value;
        if change < cfg.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        tracing::warn!(iterations, "logistic regression did not converge; keeping best iterate");
    }
    Ok(LogRegModel {
        intercept: beta[0],
        weights: beta.iter().skip(1).copied().collect(),
        iterations,
        converged,
        config: *cfg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::eval::evaluate;

    #[test]
    fn separable_data_ranks_perfectly() {
        let x: Vec<Vec<f64>> = (-20..=20).filter(|&v| v != 0).map(|v| vec![v as f64 * 0.5]).collect();
        let y: Vec<u8> = x.iter().map(|r| u8::from(r[0] > 0.0)).collect();
        let m = train_logreg(&x, &y, &LogRegConfig::default()).unwrap();
        let scores: Vec<f64> = x.iter().map(|r| m.score(r)).collect();
        assert!(evaluate(&scores, &y, 0.5).unwrap().auc >= 0.99);
        assert!(m.weights[0] > 0.0);
    }

    #[test]
    fn recovers_known_coefficients() {
        // Deterministic grid drawn from logit(p) = -1 + 2x.
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..400 {
            let v = (i as f64 / 400.0) * 4.0 - 2.0;
            let p = sigmoid(-1.0 + 2.0 * v);
            // place round(100 p) positives among 100 copies
            let pos = (p * 100.0).round() as usize;
            for k in 0..100 {
                x.push(vec![v]);
                y.push(u8::from(k < pos));
            }
        }
        let m = train_logreg(&x, &y, &LogRegConfig { l2_lambda: 0.0, ..Default::default() }).unwrap();
        assert!(m.converged);
        assert!((m.intercept + 1.0).abs() < 0.02, "{}", m.intercept);
        assert!((m.weights[0] - 2.0).abs() < 0.02, "{}", m.weights[0]);
    }

    #[test]
    fn duplication_leaves_scores_unchanged() {
        let x: Vec<Vec<f64>> = (0..30).map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()]).collect();
        let y: Vec<u8> = (0..30).map(|i| u8::from((i * 7) % 5 < 2)).collect();
        let m = train_logreg(&x, &y, &LogRegConfig::default()).unwrap();
        let mut x2 = x.clone();
        x2.extend(x.iter().cloned());
        let mut y2 = y.clone();
        y2.extend(&y);
        let m2 = train_logreg(&x2, &y2, &LogRegConfig::default()).unwrap();
        for r in &x {
            assert!((m.score(r) - m2.score(r)).abs() < 1e-9);
        }
    }

    #[test]
    fn collinear_fraction_features_still_fit() {
        // Four fractions summing to one are collinear with the intercept.
        let x: Vec<Vec<f64>> = (0..40)
            .map(|i| {
                let s = i as f64 / 40.0;
                vec![s, (1.0 - s) * 0.5, (1.0 - s) * 0.3, (1.0 - s) * 0.2]
            })
            .collect();
        let y: Vec<u8> = (0..40).map(|i| u8::from(i >= 20)).collect();
        let m = train_logreg(&x, &y, &LogRegConfig::default()).unwrap();
        assert!(m.intercept.is_finite() && m.weights.iter().all(|w| w.is_finite()));
        assert!(m.score(&x[39]) > m.score(&x[0]));
    }
}
