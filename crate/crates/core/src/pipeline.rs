//! Per-recording orchestration and the tabular reports built from it.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::changepoint::{e_divisive, ChangePointError, ChangePointSet, EnergyParams, Observations, PermutationConfig, Signal};
use crate::cutpoints::{classify_series, CountAxis, CutPointError, CutPointScale, IntensityLevel};
use crate::features::{
    build_dataset, Dataset, DatasetFilters, FeatureError, SegmentObservation, DEFAULT_EFFICIENCY_THRESHOLD,
};
use crate::ingest::{format_timestamp, ValidatedSeries};
use crate::modes::{label_intervals, ActivityMode, TieBreak};
use crate::seed::{derive_seed, mix64};
use crate::segment::{segment_sleep_wake, SleepWakeSegment};
use crate::sleepdetect::{analyze_sleep, sleep_report, CandidatePredicateConfig, SleepError, SleepRecord, SleepReportEntry, SleepRuleParams};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    CutPoints(#[from] CutPointError),
    #[error(transparent)]
    Sleep(#[from] SleepError),
    #[error(transparent)]
    ChangePoint(#[from] ChangePointError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("writing report: {0}")]
    Io(#[from] std::io::Error),
}

/// Where the per-level fractions come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSource {
    /// Per-epoch cut-point labels.
    Raw,
    /// Labels after replacing each change-point interval by its mode.
    #[default]
    Smoothed,
}

/// Every parameter that affects pipeline output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub scale: CutPointScale,
    /// Overrides the age carried by each recording when set.
    pub age_years: Option<u32>,
    pub axis: CountAxis,
    pub predicate: CandidatePredicateConfig,
    pub sleep: SleepRuleParams,
    pub signal: Signal,
    pub energy: EnergyParams,
    pub n_permutations: usize,
    pub significance: f64,
    pub seed: u64,
    pub tie_break: TieBreak,
    pub feature_source: FeatureSource,
    pub filters: DatasetFilters,
    pub efficiency_threshold: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let perm = PermutationConfig::default();
        Self {
            scale: CutPointScale::troiano(),
            age_years: None,
            axis: CountAxis::default(),
            predicate: CandidatePredicateConfig::default(),
            sleep: SleepRuleParams::default(),
            signal: Signal::default(),
            energy: EnergyParams::default(),
            n_permutations: perm.n_permutations,
            significance: perm.significance,
            seed: 0,
            tie_break: TieBreak::default(),
            feature_source: FeatureSource::default(),
            filters: DatasetFilters::default(),
            efficiency_threshold: DEFAULT_EFFICIENCY_THRESHOLD,
        }
    }
}

impl PipelineConfig {
    /// Permutation settings for one segment. The seed depends on the master
    /// seed, the recording and the segment's ordinal, never on scheduling.
    pub fn permutation_for(&self, subject_id: &str, segment: usize) -> PermutationConfig {
        PermutationConfig {
            n_permutations: self.n_permutations,
            significance: self.significance,
            master_seed: derive_seed(&[self.seed, string_key(subject_id), segment as u64]),
        }
    }
}

fn string_key(s: &str) -> u64 {
    s.bytes().fold(s.len() as u64, |acc, b| mix64(acc ^ u64::from(b)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentResult {
    pub segment_id: String,
    pub segment: SleepWakeSegment,
    /// Offsets within the awake span.
    pub change_points: ChangePointSet,
    /// Offsets within the awake span.
    pub modes: Vec<ActivityMode>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecordingResult {
    pub subject_id: String,
    pub epoch_minutes: f64,
    pub intensity: Vec<IntensityLevel>,
    pub records: Vec<SleepRecord>,
    pub sleep_report: Vec<SleepReportEntry>,
    pub segments: Vec<SegmentResult>,
}

/// Classifies, finds sleep, segments, and runs change-point detection and
/// mode labelling on every awake span. Segments are processed in parallel.
pub fn process_recording(
    series: &ValidatedSeries,
    subject_id: &str,
    cfg: &PipelineConfig,
) -> Result<RecordingResult, PipelineError> {
    let age = cfg.age_years.unwrap_or(series.meta.age_years);
    let intensity = classify_series(series, &cfg.scale, age, cfg.axis)?;
    let records = analyze_sleep(series, &intensity, &cfg.predicate, &cfg.sleep)?;
    let segments = segment_sleep_wake(&records, true);
    let observations = Observations::from_epochs(&series.epochs, cfg.signal);

    let segments = segments
        .into_par_iter()
        .enumerate()
        .map(|(k, segment)| {
            let span = segment.awake_range();
            let change_points = e_divisive(
                &observations.slice(span.clone()),
                &cfg.energy,
                &cfg.permutation_for(subject_id, k),
            )?;
            let modes = label_intervals(&intensity[span], &change_points.indices(), cfg.tie_break);
            Ok(SegmentResult {
                segment_id: format!("{subject_id}:{k:03}"),
                segment,
                change_points,
                modes,
            })
        })
        .collect::<Result<Vec<_>, ChangePointError>>()?;
    tracing::info!(subject_id, periods = records.len(), segments = segments.len(), "recording processed");
    Ok(RecordingResult {
        subject_id: subject_id.to_string(),
        epoch_minutes: series.epoch_minutes(),
        sleep_report: sleep_report(series, &records),
        intensity,
        records,
        segments,
    })
}

impl RecordingResult {
    pub fn observations(&self, source: FeatureSource) -> Vec<SegmentObservation> {
        self.segments
            .iter()
            .map(|s| {
                let modes = match source {
                    FeatureSource::Smoothed => s.modes.clone(),
                    FeatureSource::Raw => {
                        // one interval per epoch reproduces the raw labels
                        let span = &self.intensity[s.segment.awake_range()];
                        let every: Vec<usize> = (1..span.len()).collect();
                        label_intervals(span, &every, TieBreak::Lower)
                    }
                };
                SegmentObservation {
                    segment_id: s.segment_id.clone(),
                    segment: s.segment,
                    modes,
                    epoch_minutes: self.epoch_minutes,
                }
            })
            .collect()
    }
}

pub fn dataset_from_results(results: &[RecordingResult], cfg: &PipelineConfig) -> Result<Dataset, FeatureError> {
    let obs: Vec<SegmentObservation> = results
        .iter()
        .flat_map(|r| r.observations(cfg.feature_source))
        .collect();
    build_dataset(&obs, &cfg.filters, cfg.efficiency_threshold)
}

pub fn write_sleep_json<W: Write>(results: &[RecordingResult], mut sink: W) -> Result<(), PipelineError> {
    #[derive(Serialize)]
    struct Entry<'a> {
        subject_id: &'a str,
        periods: &'a [SleepReportEntry],
    }
    let entries: Vec<Entry> = results
        .iter()
        .map(|r| Entry {
            subject_id: &r.subject_id,
            periods: &r.sleep_report,
        })
        .collect();
    serde_json::to_writer_pretty(&mut sink, &entries).map_err(std::io::Error::from)?;
    writeln!(sink)?;
    Ok(())
}

pub fn write_segments_csv<W: Write>(results: &[RecordingResult], mut sink: W) -> Result<(), PipelineError> {
    writeln!(sink, "segment_id,awake_start,awake_end,onset,awakening,efficiency,flags")?;
    for s in results.iter().flat_map(|r| &r.segments) {
        let g = &s.segment;
        writeln!(
            sink,
            "{},{},{},{},{},{},{}",
            s.segment_id,
            g.awake_start_index,
            g.awake_end_index,
            g.sleep.onset_index,
            g.sleep.awakening_index,
            g.metrics.efficiency,
            g.flags()
        )?;
    }
    Ok(())
}

/// `cp_index` is the epoch index within the recording.
pub fn write_changepoints_csv<W: Write>(results: &[RecordingResult], mut sink: W) -> Result<(), PipelineError> {
    writeln!(sink, "segment_id,cp_index,statistic,p_value")?;
    for s in results.iter().flat_map(|r| &r.segments) {
        for c in &s.change_points.points {
            writeln!(
                sink,
                "{},{},{},{}",
                s.segment_id,
                s.segment.awake_start_index + c.index,
                c.statistic,
                c.p_value
            )?;
        }
    }
    Ok(())
}

/// `start` is inclusive and `end` exclusive, both epoch indices within the
/// recording.
pub fn write_modes_csv<W: Write>(results: &[RecordingResult], mut sink: W) -> Result<(), PipelineError> {
    writeln!(sink, "segment_id,start,end,mode")?;
    for s in results.iter().flat_map(|r| &r.segments) {
        let base = s.segment.awake_start_index;
        for m in &s.modes {
            writeln!(
                sink,
                "{},{},{},{}",
                s.segment_id,
                base + m.start_index,
                base + m.end_index,
                m.level
            )?;
        }
    }
    Ok(())
}

/// Per-epoch labels with timestamps, mostly for inspection.
pub fn write_intensity_csv<W: Write>(
    series: &ValidatedSeries,
    intensity: &[IntensityLevel],
    mut sink: W,
) -> Result<(), PipelineError> {
    writeln!(sink, "timestamp,level")?;
    for (e, l) in series.epochs.iter().zip(intensity) {
        writeln!(sink, "{},{}", format_timestamp(&e.timestamp), l)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::validate_series;
    use crate::synth::{generate, Block, BlockMode, DayProfile};

    fn recording(seed: u64) -> ValidatedSeries {
        let mut p = DayProfile::new(
            vec![
                Block::awake(IntensityLevel::Sedentary, 200, 20.0),
                Block::awake(IntensityLevel::Vigorous, 120, 7500.0),
                Block::awake(IntensityLevel::Light, 640, 900.0),
                Block::new(BlockMode::Sleep, 480),
            ],
            seed,
        );
        p.repeat = 3;
        validate_series(generate(&p).unwrap().0).unwrap()
    }

    fn fast() -> PipelineConfig {
        PipelineConfig {
            n_permutations: 19,
            significance: 0.05,
            ..Default::default()
        }
    }

    #[test]
    fn planted_blocks_become_modes() {
        let series = recording(4);
        let r = process_recording(&series, "s1", &fast()).unwrap();
        assert_eq!(r.records.len(), 3);
        // the last night runs to the end of the recording
        assert!(r.records[2].period.truncated);
        let second = &r.segments[1];
        let levels: Vec<IntensityLevel> = second.modes.iter().map(|m| m.level).collect();
        assert_eq!(levels, [IntensityLevel::Sedentary, IntensityLevel::Vigorous, IntensityLevel::Light]);
        let cps = second.change_points.indices();
        assert!(cps.iter().any(|&c| c.abs_diff(200) <= 2), "{cps:?}");
        assert!(cps.iter().any(|&c| c.abs_diff(320) <= 2), "{cps:?}");
    }

    #[test]
    fn results_do_not_depend_on_thread_count() {
        let series = recording(8);
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| process_recording(&series, "x", &fast()).unwrap());
        let many = process_recording(&series, "x", &fast()).unwrap();
        assert_eq!(one, many);
    }

    #[test]
    fn reports_and_dataset() {
        let series = recording(2);
        let cfg = fast();
        let r = vec![process_recording(&series, "s", &cfg).unwrap()];
        let mut seg = Vec::new();
        write_segments_csv(&r, &mut seg).unwrap();
        let seg = String::from_utf8(seg).unwrap();
        assert_eq!(seg.lines().count(), 1 + r[0].segments.len());
        assert!(seg.lines().nth(1).unwrap().ends_with("first_segment"));
        let mut modes = Vec::new();
        write_modes_csv(&r, &mut modes).unwrap();
        let modes = String::from_utf8(modes).unwrap();
        assert!(modes.starts_with("segment_id,start,end,mode\ns:000,0,"));

        // first segment is censored and the last truncated, leaving one row
        let d = dataset_from_results(&r, &cfg).unwrap();
        assert_eq!(d.len(), 1);
        let raw = dataset_from_results(
            &r,
            &PipelineConfig {
                feature_source: FeatureSource::Raw,
                ..cfg.clone()
            },
        )
        .unwrap();
        let f = raw.rows[0].features.fractions();
        assert!((f.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
