//! Discrete AdaBoost over single-feature threshold stumps.

use serde::{Deserialize, Serialize};

use super::{check_training_data, sigmoid, ModelError};

/// Weighted error used in place of an exact zero when computing the weight
/// of a perfect stump.
const ZERO_ERROR_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaBoostConfig {
    pub rounds: usize,
}

impl Default for AdaBoostConfig {
    fn default() -> Self {
        Self { rounds: 50 }
    }
}

/// Predicts `+1` when `polarity · (x[feature] - threshold) > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stump {
    pub feature: usize,
    pub threshold: f64,
    pub polarity: i8,
}

impl Stump {
    pub fn vote(&self, x: &[f64]) -> f64 {
        let above = x[self.feature] > self.threshold;
        if above == (self.polarity > 0) {
            1.0
        } else {
            -1.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaBoostModel {
    pub n_features: usize,
    pub stumps: Vec<Stump>,
    pub alphas: Vec<f64>,
    /// Weighted error of each kept stump.
    pub round_errors: Vec<f64>,
    pub config: AdaBoostConfig,
}

impl AdaBoostModel {
    pub fn margin(&self, x: &[f64]) -> f64 {
        self.margin_after(x, self.stumps.len())
    }

    /// Ensemble margin using only the first `rounds` stumps.
    pub fn margin_after(&self, x: &[f64], rounds: usize) -> f64 {
        self.stumps
            .iter()
            .zip(&self.alphas)
            .take(rounds)
            .map(|(s, a)| a * s.vote(x))
            .sum()
    }

    /// `1 / (1 + e^{-2F})`, the logistic reading of the margin.
    pub fn score(&self, x: &[f64]) -> f64 {
        sigmoid(2.0 * self.margin(x))
    }

    /// Misclassification rate on `(x, y)` after each round `1..=rounds`.
    pub fn staged_training_error(&self, x: &[Vec<f64>], y: &[u8]) -> Vec<f64> {
        let mut margins = vec![0.0; x.len()];
        self.stumps
            .iter()
            .zip(&self.alphas)
            .map(|(s, a)| {
                let mut wrong = 0;
                for (i, row) in x.iter().enumerate() {
                    margins[i] += a * s.vote(row);
                    let predicted = u8::from(margins[i] > 0.0);
                    if predicted != y[i] {
                        wrong += 1;
                    }
                }
                wrong as f64 / x.len() as f64
            })
            .collect()
    }
}

/// Stump with the smallest weighted error. Scans features in order, then
/// thresholds from low to high, positive polarity first; the first minimum
/// wins.
pub(crate) fn best_stump(x: &[Vec<f64>], signs: &[f64], weights: &[f64]) -> (Stump, f64) {
    let d = x[0].len();
    let total: f64 = weights.iter().sum();
    let mut best: Option<(Stump, f64)> = None;
    let mut consider = |stump: Stump, err: f64| {
        if best.is_none_or(|(_, e)| err < e) {
            best = Some((stump, err));
        }
    };
    for f in 0..d {
        let mut order: Vec<usize> = (0..x.len()).collect();
        order.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]));
        // err_pos: weight misclassified by "x > threshold => +1" with the
        // threshold below every point.
        let mut err_pos: f64 = weights.iter().zip(signs).filter(|(_, &s)| s < 0.0).map(|(w, _)| w).sum();
        let low = Stump {
            feature: f,
            threshold: f64::MIN,
            polarity: 1,
        };
        consider(low, err_pos);
        consider(Stump { polarity: -1, ..low }, total - err_pos);
        for k in 0..order.len() {
            let i = order[k];
            // point i moves to the "below" side
            err_pos += if signs[i] > 0.0 { weights[i] } else { -weights[i] };
            let here = x[i][f];
            let next = order.get(k + 1).map(|&j| x[j][f]);
            if next.is_some_and(|v| v == here) {
                continue;
            }
            let Some(next) = next else { break };
            let stump = Stump {
                feature: f,
                threshold: here + (next - here) / 2.0,
                polarity: 1,
            };
            consider(stump, err_pos);
            consider(Stump { polarity: -1, ..stump }, total - err_pos);
        }
    }
    best.expect("at least one feature")
}

pub fn train_adaboost(x: &[Vec<f64>], y: &[u8], cfg: &AdaBoostConfig) -> Result<AdaBoostModel, ModelError> {
    let d = check_training_data(x, y)?;
    let n = x.len();
    let signs: Vec<f64> = y.iter().map(|&v| if v == 1 { 1.0 } else { -1.0 }).collect();
    let mut weights = vec![1.0 / n as f64; n];
    let mut model = AdaBoostModel {
        n_features: d,
        stumps: Vec::new(),
        alphas: Vec::new(),
        round_errors: Vec::new(),
        config: *cfg,
    };
    if d == 0 {
        return Ok(model);
    }
    for _ in 0..cfg.rounds {
        let (stump, _) = best_stump(x, &signs, &weights);
        let votes: Vec<f64> = x.iter().map(|r| stump.vote(r)).collect();
        // recomputed directly so a perfect stump gives exactly zero
        let err: f64 = (0..n).filter(|&i| votes[i] != signs[i]).map(|i| weights[i]).sum();
        if err >= 0.5 {
            break;
        }
        let perfect = err == 0.0;
        let e = err.max(ZERO_ERROR_FLOOR);
        let alpha = 0.5 * ((1.0 - e) / e).ln();
        model.stumps.push(stump);
        model.alphas.push(alpha);
        model.round_errors.push(err);
        if perfect {
            break;
        }
        for i in 0..n {
            weights[i] *= (-alpha * signs[i] * votes[i]).exp();
        }
        let z: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= z);
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    /// Weighted error of every stump over every midpoint threshold.
    fn exhaustive_best_error(x: &[Vec<f64>], signs: &[f64], weights: &[f64]) -> f64 {
        let mut best = f64::INFINITY;
        for f in 0..x[0].len() {
            let mut values: Vec<f64> = x.iter().map(|r| r[f]).collect();
            values.sort_by(f64::total_cmp);
            values.dedup();
            let mut thresholds = vec![values[0] - 1.0];
            thresholds.extend(values.windows(2).map(|w| (w[0] + w[1]) / 2.0));
            for t in thresholds {
                for polarity in [1i8, -1] {
                    let s = Stump {
                        feature: f,
                        threshold: t,
                        polarity,
                    };
                    let err: f64 = x
                        .iter()
                        .zip(signs)
                        .zip(weights)
                        .filter(|((r, &sg), _)| s.vote(r) != sg)
                        .map(|(_, w)| w)
                        .sum();
                    best = best.min(err);
                }
            }
        }
        best
    }

    #[test]
    fn separable_data_needs_one_round() {
        let x: Vec<Vec<f64>> = (0..10).map(|v| vec![v as f64]).collect();
        let y: Vec<u8> = (0..10).map(|v| u8::from(v >= 4)).collect();
        let m = train_adaboost(&x, &y, &AdaBoostConfig::default()).unwrap();
        assert_eq!(m.stumps.len(), 1);
        assert_eq!(m.round_errors, [0.0]);
        assert_eq!(m.staged_training_error(&x, &y), [0.0]);
        assert_eq!(m.stumps[0].threshold, 3.5);
    }

    #[test]
    fn chance_level_round_stops() {
        // XOR: every stump has weighted error 1/2 in the first round.
        let x = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]];
        let y = vec![0, 0, 1, 1];
        let m = train_adaboost(&x, &y, &AdaBoostConfig::default()).unwrap();
        assert!(m.stumps.is_empty());
        assert!(x.iter().all(|r| m.score(r) == 0.5));
    }

    #[test]
    fn stump_search_matches_exhaustive() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        for _ in 0..300 {
            let n = rng.random_range(2..=20);
            let d = rng.random_range(1..=3);
            let x: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..d).map(|_| rng.random_range(0..6) as f64).collect())
                .collect();
            let signs: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
            let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
            let z: f64 = raw.iter().sum();
            let w: Vec<f64> = raw.iter().map(|v| v / z).collect();
            let (_, err) = best_stump(&x, &signs, &w);
            assert!((err - exhaustive_best_error(&x, &signs, &w)).abs() < 1e-12);
        }
    }

    #[test]
    fn exponential_loss_never_increases() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let n = rng.random_range(6..=20);
            let x: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)]).collect();
            let mut y: Vec<u8> = (0..n).map(|_| u8::from(rng.random_bool(0.5))).collect();
            y[0] = 0;
            y[1] = 1;
            let m = train_adaboost(&x, &y, &AdaBoostConfig { rounds: 30 }).unwrap();
            let mut prev = 1.0;
            for r in 1..=m.stumps.len() {
                let loss: f64 = x
                    .iter()
                    .zip(&y)
                    .map(|(row, &t)| {
                        let s = if t == 1 { 1.0 } else { -1.0 };
                        (-s * m.margin_after(row, r)).exp()
                    })
                    .sum::<f64>()
                    / n as f64;
                assert!(loss <= prev + 1e-12);
                prev = loss;
            }
        }
    }
}
