//! Sleep-period detection and clinical sleep metrics.
//!
//! An epoch is a *candidate* sleep record when it shows no movement on any
//! axis, no steps, and an accepted inclinometer state. By default every state
//! except `lying` is accepted, which is the literal stillness predicate this
//! pipeline was specified with; pass a different accept set to change it.
//!
//! A sleep period opens at the first epoch of a candidate run of at least
//! `onset_run` epochs and closes at the last candidate epoch before the first
//! run of at least `awakening_gap` non-candidate epochs. Shorter non-candidate
//! runs stay inside the period; those longer than `waso_bout_min` count as
//! wake after sleep onset.

use std::collections::BTreeSet;

use chrono::{DateTime, FixedOffset};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cutpoints::IntensityLevel;
use crate::ingest::{Epoch, EpochSeries, Inclinometer};

#[derive(Debug, Error, PartialEq)]
pub enum SleepError {
    #[error("candidate predicate has no criterion enabled")]
    NoCriterion,
    #[error("sleep rule parameters must be positive")]
    InvalidParams,
    #[error("total minutes in bed is zero")]
    DegenerateBed,
    #[error("intensity labels ({labels}) do not match the mask length ({mask})")]
    LengthMismatch { labels: usize, mask: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidatePredicateConfig {
    pub require_zero_triaxial: bool,
    pub require_zero_steps: bool,
    pub inclinometer_accept: BTreeSet<Inclinometer>,
}

impl Default for CandidatePredicateConfig {
    fn default() -> Self {
        Self {
            require_zero_triaxial: true,
            require_zero_steps: true,
            inclinometer_accept: [Inclinometer::Off, Inclinometer::Standing, Inclinometer::Sitting]
                .into_iter()
                .collect(),
        }
    }
}

impl CandidatePredicateConfig {
    pub fn inclinometer_enabled(&self) -> bool {
        self.inclinometer_accept.len() < Inclinometer::ALL.len()
    }

    pub fn validate(&self) -> Result<(), SleepError> {
        if self.require_zero_triaxial || self.require_zero_steps || self.inclinometer_enabled() {
            Ok(())
        } else {
            Err(SleepError::NoCriterion)
        }
    }

    pub fn is_candidate(&self, e: &Epoch) -> bool {
        (!self.require_zero_triaxial || !e.has_movement())
            && (!self.require_zero_steps || e.steps == 0)
            && self.inclinometer_accept.contains(&e.inclinometer)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruncatedPolicy {
    /// Close the period at its last candidate epoch and flag it.
    #[default]
    CloseAtLastCandidate,
    Discard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SleepRuleParams {
    pub onset_run: usize,
    pub awakening_gap: usize,
    /// Interior bouts must be strictly longer than this to count as WASO.
    pub waso_bout_min: usize,
    pub truncated_policy: TruncatedPolicy,
    /// Periods shorter than this many epochs are dropped.
    pub min_sleep_epochs: Option<usize>,
}

impl Default for SleepRuleParams {
    fn default() -> Self {
        Self {
            onset_run: 15,
            awakening_gap: 30,
            waso_bout_min: 5,
            truncated_policy: TruncatedPolicy::CloseAtLastCandidate,
            min_sleep_epochs: None,
        }
    }
}

impl SleepRuleParams {
    pub fn validate(&self) -> Result<(), SleepError> {
        if self.onset_run == 0 || self.awakening_gap == 0 || self.waso_bout_min == 0 {
            Err(SleepError::InvalidParams)
        } else {
            Ok(())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SleepPeriod {
    pub onset_index: usize,
    /// Inclusive.
    pub awakening_index: usize,
    pub truncated: bool,
}

impl SleepPeriod {
    pub fn duration_epochs(&self) -> usize {
        self.awakening_index - self.onset_index + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SleepMetrics {
    pub duration_min: f64,
    pub waso_min: f64,
    pub latency_min: f64,
    pub total_minutes_in_bed: f64,
    pub total_sleep_time_min: f64,
    pub efficiency: f64,
    pub preceding_sedentary_start_index: usize,
    /// Set when WASO plus latency exceeded the duration and total sleep
    /// time was clamped to zero.
    pub tst_floored: bool,
}

pub fn candidate_mask(epochs: &[Epoch], cfg: &CandidatePredicateConfig) -> Vec<bool> {
    epochs.iter().map(|e| cfg.is_candidate(e)).collect()
}

/// Maximal runs of equal values as `(value, start, len)`.
pub(crate) fn runs(mask: &[bool]) -> Vec<(bool, usize, usize)> {
    let mut out: Vec<(bool, usize, usize)> = Vec::new();
    for (i, &m) in mask.iter().enumerate() {
        match out.last_mut() {
            Some((v, _, len)) if *v == m => *len += 1,
            _ => out.push((m, i, 1)),
        }
    }
    out
}

pub fn detect_sleep_periods(mask: &[bool], params: &SleepRuleParams) -> Vec<SleepPeriod> {
    let mut periods = Vec::new();
    // (onset, last candidate index seen so far)
    let mut open: Option<(usize, usize)> = None;
    for (value, start, len) in runs(mask) {
        let end = start + len - 1;
        match (open, value) {
            (None, true) if len >= params.onset_run => open = Some((start, end)),
            (Some((onset, _)), true) => open = Some((onset, end)),
            (Some((onset, last)), false) if len >= params.awakening_gap => {
                periods.push(SleepPeriod {
                    onset_index: onset,
                    awakening_index: last,
                    truncated: false,
                });
                open = None;
            }
            _ => {}
        }
    }
    if let Some((onset, last)) = open {
        if params.truncated_policy == TruncatedPolicy::CloseAtLastCandidate {
            periods.push(SleepPeriod {
                onset_index: onset,
                awakening_index: last,
                truncated: true,
            });
        }
    }
    if let Some(min) = params.min_sleep_epochs {
        periods.retain(|p| p.duration_epochs() >= min);
    }
    periods
}

/// Wake after sleep onset in epochs.
pub fn compute_waso(mask: &[bool], period: &SleepPeriod, params: &SleepRuleParams) -> usize {
    let lo = period.onset_index + 1;
    let hi = period.awakening_index;
    if hi <= lo {
        return 0;
    }
    runs(&mask[lo..hi])
        .into_iter()
        .filter(|&(v, _, len)| !v && len > params.waso_bout_min)
        .map(|(_, _, len)| len)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Latency {
    pub epochs: usize,
    pub start_index: usize,
}

/// Length of the sedentary run that ends just before onset. The run never
/// extends below `floor` (the first epoch after the previous sleep period).
pub fn compute_latency(intensity: &[IntensityLevel], period: &SleepPeriod, floor: usize) -> Latency {
    let onset = period.onset_index;
    let mut start = onset;
    while start > floor && intensity[start - 1] == IntensityLevel::Sedentary {
        start -= 1;
    }
    Latency {
        epochs: onset - start,
        start_index: start,
    }
}

/// Assembles the metrics from epoch counts.
pub fn metrics_from_counts(
    duration: usize,
    waso: usize,
    latency: Latency,
    epoch_minutes: f64,
) -> Result<SleepMetrics, SleepError> {
    let in_bed = duration + latency.epochs;
    if in_bed == 0 {
        return Err(SleepError::DegenerateBed);
    }
    let lost = waso + latency.epochs;
    let (tst, floored) = match duration.checked_sub(lost) {
        Some(t) => (t, false),
        None => (0, true),
    };
    Ok(SleepMetrics {
        duration_min: duration as f64 * epoch_minutes,
        waso_min: waso as f64 * epoch_minutes,
        latency_min: latency.epochs as f64 * epoch_minutes,
        total_minutes_in_bed: in_bed as f64 * epoch_minutes,
        total_sleep_time_min: tst as f64 * epoch_minutes,
        efficiency: tst as f64 / in_bed as f64,
        preceding_sedentary_start_index: latency.start_index,
        tst_floored: floored,
    })
}

pub fn compute_metrics(
    mask: &[bool],
    intensity: &[IntensityLevel],
    period: &SleepPeriod,
    params: &SleepRuleParams,
    floor: usize,
    epoch_minutes: f64,
) -> Result<SleepMetrics, SleepError> {
    if intensity.len() != mask.len() {
        return Err(SleepError::LengthMismatch {
            labels: intensity.len(),
            mask: mask.len(),
        });
    }
    let waso = compute_waso(mask, period, params);
    let latency = compute_latency(intensity, period, floor);
    metrics_from_counts(period.duration_epochs(), waso, latency, epoch_minutes)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SleepRecord {
    pub period: SleepPeriod,
    pub metrics: SleepMetrics,
}

/// Detects every sleep period in a series and computes its metrics.
pub fn analyze_sleep(
    series: &EpochSeries,
    intensity: &[IntensityLevel],
    cfg: &CandidatePredicateConfig,
    params: &SleepRuleParams,
) -> Result<Vec<SleepRecord>, SleepError> {
    cfg.validate()?;
    params.validate()?;
    let mask = candidate_mask(&series.epochs, cfg);
    let mut floor = 0;
    let mut out = Vec::new();
    for period in detect_sleep_periods(&mask, params) {
        let metrics = compute_metrics(&mask, intensity, &period, params, floor, series.epoch_minutes())?;
        floor = period.awakening_index + 1;
        out.push(SleepRecord { period, metrics });
    }
    Ok(out)
}

/// One row of the JSON sleep report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SleepReportEntry {
    pub onset: DateTime<FixedOffset>,
    pub awakening: DateTime<FixedOffset>,
    pub duration_min: f64,
    pub waso_min: f64,
    pub latency_min: f64,
    pub tmb_min: f64,
    pub tst_min: f64,
    pub efficiency: f64,
    pub truncated: bool,
}

pub fn sleep_report(series: &EpochSeries, records: &[SleepRecord]) -> Vec<SleepReportEntry> {
    records
        .iter()
        .map(|r| SleepReportEntry {
            onset: series.epochs[r.period.onset_index].timestamp,
            awakening: series.epochs[r.period.awakening_index].timestamp,
            duration_min: r.metrics.duration_min,
            waso_min: r.metrics.waso_min,
            latency_min: r.metrics.latency_min,
            tmb_min: r.metrics.total_minutes_in_bed,
            tst_min: r.metrics.total_sleep_time_min,
            efficiency: r.metrics.efficiency,
            truncated: r.period.truncated,
        })
        .collect()
}


#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn mask_of(parts: &[(bool, usize)]) -> Vec<bool> {
        parts.iter().flat_map(|&(v, n)| std::iter::repeat_n(v, n)).collect()
    }

    #[test]
    fn candidate_predicate() {
        let t = DateTime::parse_from_rfc3339("2014-09-01T22:00:00+03:00").unwrap();
        let cfg = CandidatePredicateConfig::default();
        let still = Epoch {
            inclinometer: Inclinometer::Standing,
            ..Epoch::zero(t)
        };
        assert!(cfg.is_candidate(&still));
        let moved = Epoch { axis2: 3, ..still.clone() };
        assert!(!cfg.is_candidate(&moved));
        let lying = Epoch {
            inclinometer: Inclinometer::Lying,
            ..still.clone()
        };
        assert!(!cfg.is_candidate(&lying));
        let stepped = Epoch { steps: 1, ..still.clone() };
        assert!(!cfg.is_candidate(&stepped));

        let none = CandidatePredicateConfig {
            require_zero_triaxial: false,
            require_zero_steps: false,
            inclinometer_accept: Inclinometer::ALL.into_iter().collect(),
        };
        assert_eq!(none.validate(), Err(SleepError::NoCriterion));
    }

    #[test]
    fn single_period() {
        let mask = mask_of(&[(false, 10), (true, 15), (false, 30)]);
        let p = detect_sleep_periods(&mask, &SleepRuleParams::default());
        assert_eq!(
            p,
            vec![SleepPeriod {
                onset_index: 10,
                awakening_index: 24,
                truncated: false
            }]
        );
    }

    #[test]
    fn no_candidates() {
        assert!(detect_sleep_periods(&[false; 100], &SleepRuleParams::default()).is_empty());
    }

    #[test]
    fn short_gap_stays_interior() {
        let mask = mask_of(&[(true, 15), (false, 5), (true, 15), (false, 30)]);
        let p = detect_sleep_periods(&mask, &SleepRuleParams::default());
        assert_eq!(
            p,
            vec![SleepPeriod {
                onset_index: 0,
                awakening_index: 34,
                truncated: false
            }]
        );
        assert_eq!(compute_waso(&mask, &p[0], &SleepRuleParams::default()), 0);
    }

    #[test]
    fn short_candidate_runs_do_not_open() {
        let mask = mask_of(&[(true, 14), (false, 40), (true, 14), (false, 40)]);
        assert!(detect_sleep_periods(&mask, &SleepRuleParams::default()).is_empty());
    }

    #[test]
    fn truncation_policies() {
        let mask = mask_of(&[(false, 40), (true, 20), (false, 10), (true, 3), (false, 2)]);
        let close = detect_sleep_periods(&mask, &SleepRuleParams::default());
        assert_eq!(
            close,
            vec![SleepPeriod {
                onset_index: 40,
                awakening_index: 72,
                truncated: true
            }]
        );
        let discard = SleepRuleParams {
            truncated_policy: TruncatedPolicy::Discard,
            ..Default::default()
        };
        assert!(detect_sleep_periods(&mask, &discard).is_empty());
    }

    #[test]
    fn min_sleep_filter() {
        let mask = mask_of(&[(true, 20), (false, 30), (true, 60), (false, 30)]);
        let params = SleepRuleParams {
            min_sleep_epochs: Some(30),
            ..Default::default()
        };
        let p = detect_sleep_periods(&mask, &params);
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].onset_index, 50);
    }

    #[test]
    fn waso_threshold_is_strict() {
        let params = SleepRuleParams::default();
        let none = mask_of(&[(true, 40), (false, 30)]);
        let p = detect_sleep_periods(&none, &params)[0];
        assert_eq!(compute_waso(&none, &p, &params), 0);

        let four = mask_of(&[(true, 20), (false, 4), (true, 20), (false, 30)]);
        let p = detect_sleep_periods(&four, &params)[0];
        assert_eq!(compute_waso(&four, &p, &params), 0);

        let six = mask_of(&[(true, 20), (false, 6), (true, 20), (false, 30)]);
        let p = detect_sleep_periods(&six, &params)[0];
        assert_eq!(compute_waso(&six, &p, &params), 6);

        let five = mask_of(&[(true, 20), (false, 5), (true, 20), (false, 30)]);
        let p = detect_sleep_periods(&five, &params)[0];
        assert_eq!(compute_waso(&five, &p, &params), 0);
    }

    fn period(onset: usize, awakening: usize) -> SleepPeriod {
        SleepPeriod {
            onset_index: onset,
            awakening_index: awakening,
            truncated: false,
        }
    }

    #[test]
    fn latency_cases() {
        use IntensityLevel::*;
        let mut labels = vec![Light; 10];
        labels.extend(vec![Sedentary; 20]);
        labels.extend(vec![Sedentary; 30]);
        let lat = compute_latency(&labels, &period(30, 59), 0);
        assert_eq!(lat, Latency { epochs: 20, start_index: 10 });

        let mut labels = vec![Sedentary; 10];
        labels.push(Light);
        labels.extend(vec![Sedentary; 10]);
        let lat = compute_latency(&labels, &period(11, 20), 0);
        assert_eq!(lat, Latency { epochs: 0, start_index: 11 });

        let labels = vec![Sedentary; 50];
        assert_eq!(compute_latency(&labels, &period(25, 49), 0).epochs, 25);
        assert_eq!(compute_latency(&labels, &period(25, 49), 10).epochs, 15);
    }

    #[test]
    fn metrics_arithmetic() {
        let m = metrics_from_counts(480, 30, Latency { epochs: 20, start_index: 0 }, 1.0).unwrap();
        assert_eq!(m.total_minutes_in_bed, 500.0);
        assert_eq!(m.total_sleep_time_min, 430.0);
        assert_eq!(m.efficiency, 0.86);
        assert!(!m.tst_floored);

        let m = metrics_from_counts(200, 0, Latency { epochs: 0, start_index: 0 }, 1.0).unwrap();
        assert_eq!(m.efficiency, 1.0);

        let m = metrics_from_counts(60, 70, Latency { epochs: 0, start_index: 0 }, 1.0).unwrap();
        assert_eq!(m.total_sleep_time_min, 0.0);
        assert_eq!(m.efficiency, 0.0);
        assert!(m.tst_floored);

        assert_eq!(
            metrics_from_counts(0, 0, Latency { epochs: 0, start_index: 0 }, 1.0),
            Err(SleepError::DegenerateBed)
        );
    }

    #[test]
    fn metrics_from_a_mask() {
        use IntensityLevel::*;
        // 20 sedentary minutes, then 480 minutes of sleep holding two
        // 15-minute wake bouts, then 30 active minutes.
        let mask = mask_of(&[
            (false, 40),
            (true, 150),
            (false, 15),
            (true, 150),
            (false, 15),
            (true, 150),
            (false, 30),
        ]);
        let mut labels = vec![Light; 20];
        labels.extend(vec![Sedentary; 20]);
        labels.extend(vec![Sedentary; 480]);
        labels.extend(vec![Light; 30]);
        let params = SleepRuleParams::default();
        let p = detect_sleep_periods(&mask, &params);
        assert_eq!(p, vec![period(40, 519)]);
        let m = compute_metrics(&mask, &labels, &p[0], &params, 0, 1.0).unwrap();
        assert_eq!(m.duration_min, 480.0);
        assert_eq!(m.waso_min, 30.0);
        assert_eq!(m.latency_min, 20.0);
        assert_eq!(m.efficiency, 0.86);
        assert_eq!(m.preceding_sedentary_start_index, 20);
    }

    #[test]
    fn matches_reference_on_random_masks() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for policy in [TruncatedPolicy::CloseAtLastCandidate, TruncatedPolicy::Discard] {
            let params = SleepRuleParams {
                truncated_policy: policy,
                ..Default::default()
            };
            for _ in 0..200 {
                let len = rng.random_range(1..800);
                let density = [0.2, 0.5, 0.8, 0.95][rng.random_range(0..4)];
                // Runs rather than i.i.d. draws so both rules fire often.
                let mut mask = Vec::with_capacity(len);
                while mask.len() < len {
                    let v = rng.random_bool(density);
                    let n = rng.random_range(1..50);
                    mask.extend(std::iter::repeat_n(v, n));
                }
                mask.truncate(len);
                let got: Vec<_> = detect_sleep_periods(&mask, &params)
                    .into_iter()
                    .map(|p| (p, compute_waso(&mask, &p, &params)))
                    .collect();
                assert_eq!(got, reference::detect(&mask, &params));
            }
        }
    }

    proptest! {
        #[test]
        fn period_invariants(mask in prop::collection::vec(any::<bool>(), 1..600), blocky in prop::collection::vec((any::<bool>(), 1usize..60), 0..30)) {
            let mut mask = mask;
            for (v, n) in blocky {
                mask.extend(std::iter::repeat_n(v, n));
            }
            let params = SleepRuleParams::default();
            let periods = detect_sleep_periods(&mask, &params);
            for w in periods.windows(2) {
                prop_assert!(w[0].awakening_index < w[1].onset_index);
            }
            for p in &periods {
                prop_assert!(p.onset_index <= p.awakening_index);
                prop_assert!(mask[p.onset_index] && mask[p.awakening_index]);
                prop_assert!(mask[p.onset_index..p.onset_index + params.onset_run].iter().all(|&m| m));
                if !p.truncated {
                    let after = &mask[p.awakening_index + 1..p.awakening_index + 1 + params.awakening_gap];
                    prop_assert!(after.iter().all(|&m| !m));
                }
            }
        }

        #[test]
        fn shift_equivariance(blocks in prop::collection::vec((any::<bool>(), 1usize..60), 1..40), k in 0usize..100) {
            let mask = mask_of(&blocks);
            let params = SleepRuleParams::default();
            let base = detect_sleep_periods(&mask, &params);
            let mut shifted_mask = vec![false; k];
            shifted_mask.extend(&mask);
            let shifted = detect_sleep_periods(&shifted_mask, &params);
            prop_assert_eq!(base.len(), shifted.len());
            for (a, b) in base.iter().zip(&shifted) {
                prop_assert_eq!(a.onset_index + k, b.onset_index);
                prop_assert_eq!(a.awakening_index + k, b.awakening_index);
                prop_assert_eq!(compute_waso(&mask, a, &params), compute_waso(&shifted_mask, b, &params));
            }
        }
    }
}
