//! Seeded stratified k-fold cross-validation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::eval::{evaluate, report_from_parts, roc_curve, Confusion, EvalReport};
use super::{predict_scores, train, ModelConfig, ModelError, ModelKind};
use crate::seed::derive_seed;

const FOLD_STREAM: u64 = 0xF01D;

/// Fold index per row. Each class is shuffled and dealt round-robin, the
/// dealing position carrying over from one class to the next, so fold sizes
/// and per-class counts each differ by at most one.
pub fn stratified_folds(y: &[u8], folds: usize, seed: u64) -> Result<Vec<usize>, ModelError> {
    if folds < 2 {
        return Err(ModelError::BadFolds);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[seed, FOLD_STREAM]));
    let mut assignment = vec![0; y.len()];
    let mut offset = 0;
    for class in [0u8, 1] {
        let mut members: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        if members.len() < folds {
            return Err(ModelError::TooFewPerClass {
                class,
                count: members.len(),
                folds,
            });
        }
        members.shuffle(&mut rng);
        for (k, &i) in members.iter().enumerate() {
            assignment[i] = (offset + k) % folds;
        }
        offset = (offset + members.len()) % folds;
    }
    Ok(assignment)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub model_kind: ModelKind,
    pub folds: usize,
    pub seed: u64,
    pub fold_assignment: Vec<usize>,
    pub per_fold: Vec<EvalReport>,
    /// Metrics over the held-out scores of every fold together.
    pub pooled: EvalReport,
    /// Held-out score of each row, in input order.
    pub held_out_scores: Vec<f64>,
}

/// Held-out rows, their scores and the fold report.
type FoldOutcome = (Vec<usize>, Vec<f64>, EvalReport);

pub fn cross_validate(
    x: &[Vec<f64>],
    y: &[u8],
    kind: ModelKind,
    cfg: &ModelConfig,
    folds: usize,
    seed: u64,
    class_threshold: f64,
) -> Result<CvReport, ModelError> {
    if x.len() != y.len() {
        return Err(ModelError::LengthMismatch {
            rows: x.len(),
            labels: y.len(),
        });
    }
    let assignment = stratified_folds(y, folds, seed)?;
    let fold_results: Vec<Result<FoldOutcome, ModelError>> = (0..folds)
        .into_par_iter()
        .map(|k| {
            let (test, trainset): (Vec<usize>, Vec<usize>) = (0..x.len()).partition(|&i| assignment[i] == k);
            let tx: Vec<Vec<f64>> = trainset.iter().map(|&i| x[i].clone()).collect();
            let ty: Vec<u8> = trainset.iter().map(|&i| y[i]).collect();
            let fold_cfg = ModelConfig {
                seed: derive_seed(&[cfg.seed, k as u64]),
                ..*cfg
            };
            let model = train(kind, &tx, &ty, &fold_cfg)?;
            let hx: Vec<Vec<f64>> = test.iter().map(|&i| x[i].clone()).collect();
            let hy: Vec<u8> = test.iter().map(|&i| y[i]).collect();
            let scores = predict_scores(&model, &hx)?;
            let report = evaluate(&scores, &hy, class_threshold)?;
            Ok((test, scores, report))
        })
        .collect();

    let mut held_out = vec![0.0; x.len()];
    let mut per_fold = Vec::with_capacity(folds);
    let mut pooled_scores = Vec::with_capacity(x.len());
    let mut pooled_labels = Vec::with_capacity(x.len());
    for res in fold_results {
        let (test, scores, report) = res?;
        for (&i, &s) in test.iter().zip(&scores) {
            held_out[i] = s;
            pooled_scores.push(s);
            pooled_labels.push(y[i]);
        }
        per_fold.push(report);
    }
    let confusion = per_fold
        .iter()
        .fold(Confusion::default(), |acc, r| acc.add(&r.confusion));
    let pooled = report_from_parts(confusion, roc_curve(&pooled_scores, &pooled_labels)?, class_threshold);
    Ok(CvReport {
        model_kind: kind,
        folds,
        seed,
        fold_assignment: assignment,
        per_fold,
        pooled,
        held_out_scores: held_out,
    })
}
