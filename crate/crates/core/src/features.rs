//! Per-segment model rows: the share of awake time spent in each activity
//! mode, paired with a good/poor sleep-efficiency label.

use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cutpoints::IntensityLevel;
use crate::modes::ActivityMode;
use crate::segment::SleepWakeSegment;

pub const DATASET_HEADER: [&str; 8] = [
    "segment_id",
    "frac_sed",
    "frac_light",
    "frac_mod",
    "frac_vig",
    "awake_min",
    "efficiency",
    "label",
];

pub const DEFAULT_EFFICIENCY_THRESHOLD: f64 = 0.85;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("awake span is empty")]
    EmptyAwakeSpan,
    #[error("activity modes do not tile the awake span of {len} epochs")]
    ModesDoNotTile { len: usize },
    #[error("no segment survived the dataset filters")]
    EmptyDataset,
    #[error("dataset file: {0}")]
    Csv(#[from] csv::Error),
    #[error("dataset file line {line}: {reason}")]
    BadRow { line: u64, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub frac_sedentary: f64,
    pub frac_light: f64,
    pub frac_moderate: f64,
    pub frac_vigorous: f64,
    pub awake_minutes: f64,
}

impl FeatureVector {
    pub fn fractions(&self) -> [f64; 4] {
        [self.frac_sedentary, self.frac_light, self.frac_moderate, self.frac_vigorous]
    }

    fn from_tally(tally: [usize; 4], epochs: usize, epoch_minutes: f64) -> Self {
        let total = epochs as f64;
        Self {
            frac_sedentary: tally[0] as f64 / total,
            frac_light: tally[1] as f64 / total,
            frac_moderate: tally[2] as f64 / total,
            frac_vigorous: tally[3] as f64 / total,
            awake_minutes: total * epoch_minutes,
        }
    }
}

/// Fractions of the awake span covered by intervals of each level.
pub fn extract_features(
    segment: &SleepWakeSegment,
    modes: &[ActivityMode],
    epoch_minutes: f64,
) -> Result<FeatureVector, FeatureError> {
    let len = segment.awake_len();
    if len == 0 {
        return Err(FeatureError::EmptyAwakeSpan);
    }
    let mut cursor = 0;
    let mut tally = [0usize; 4];
    for m in modes {
        if m.start_index != cursor || m.end_index <= m.start_index {
            return Err(FeatureError::ModesDoNotTile { len });
        }
        tally[m.level.index()] += m.len();
        cursor = m.end_index;
    }
    if cursor != len {
        return Err(FeatureError::ModesDoNotTile { len });
    }
    Ok(FeatureVector::from_tally(tally, len, epoch_minutes))
}

/// Fractions from per-epoch labels, skipping the mode smoothing.
pub fn extract_raw_features(labels: &[IntensityLevel], epoch_minutes: f64) -> Result<FeatureVector, FeatureError> {
    if labels.is_empty() {
        return Err(FeatureError::EmptyAwakeSpan);
    }
    let mut tally = [0usize; 4];
    for l in labels {
        tally[l.index()] += 1;
    }
    Ok(FeatureVector::from_tally(tally, labels.len(), epoch_minutes))
}

/// Sleep quality class. `Poor < Good`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quality {
    Poor,
    Good,
}

impl Quality {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Poor => "poor",
            Self::Good => "good",
        }
    }

    /// Class index for the models: poor sleep is the positive class.
    pub fn target(self) -> u8 {
        match self {
            Self::Poor => 1,
            Self::Good => 0,
        }
    }
}

impl FromStr for Quality {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "poor" => Ok(Self::Poor),
            "good" => Ok(Self::Good),
            other => Err(format!("unknown label `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetLabel {
    pub label: Quality,
    pub efficiency: f64,
    pub threshold: f64,
}

/// Poor when efficiency is strictly below the threshold.
pub fn label_target(efficiency: f64, threshold: f64) -> TargetLabel {
    let label = if efficiency < threshold { Quality::Poor } else { Quality::Good };
    TargetLabel {
        label,
        efficiency,
        threshold,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetFilters {
    pub exclude_first: bool,
    pub exclude_truncated: bool,
    /// Minimum awake span in epochs; empty spans are always excluded.
    pub min_awake_epochs: Option<usize>,
}

impl Default for DatasetFilters {
    fn default() -> Self {
        Self {
            exclude_first: true,
            exclude_truncated: true,
            min_awake_epochs: None,
        }
    }
}

impl DatasetFilters {
    pub fn keeps(&self, s: &SleepWakeSegment) -> bool {
        !(s.awake_len() == 0
            || (self.exclude_first && s.first_segment)
            || (self.exclude_truncated && s.sleep.truncated)
            || self.min_awake_epochs.is_some_and(|m| s.awake_len() < m))
    }
}

/// A segment together with the activity modes of its awake span.
#[derive(Debug, Clone)]
pub struct SegmentObservation {
    pub segment_id: String,
    pub segment: SleepWakeSegment,
    pub modes: Vec<ActivityMode>,
    pub epoch_minutes: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRow {
    pub segment_id: String,
    pub features: FeatureVector,
    pub efficiency: f64,
    pub label: Quality,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Dataset {
    pub rows: Vec<DatasetRow>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Model input rows: the four fractions, plus awake minutes when asked.
    pub fn matrix(&self, include_awake_minutes: bool) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|r| {
                let mut x = r.features.fractions().to_vec();
                if include_awake_minutes {
                    x.push(r.features.awake_minutes);
                }
                x
            })
            .collect()
    }

    pub fn targets(&self) -> Vec<u8> {
        self.rows.iter().map(|r| r.label.target()).collect()
    }

    pub fn segment_ids(&self) -> Vec<&str> {
        self.rows.iter().map(|r| r.segment_id.as_str()).collect()
    }

    pub fn write_csv<W: Write>(&self, sink: W) -> Result<(), FeatureError> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(DATASET_HEADER)?;
        for r in &self.rows {
            let f = &r.features;
            w.write_record([
                r.segment_id.clone(),
                f.frac_sedentary.to_string(),
                f.frac_light.to_string(),
                f.frac_moderate.to_string(),
                f.frac_vigorous.to_string(),
                f.awake_minutes.to_string(),
                r.efficiency.to_string(),
                r.label.as_str().to_string(),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_csv<R: Read>(source: R) -> Result<Self, FeatureError> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(source);
        if reader.headers()?.iter().ne(DATASET_HEADER.iter().copied()) {
            return Err(FeatureError::BadRow {
                line: 1,
                reason: format!("header must be `{}`", DATASET_HEADER.join(",")),
            });
        }
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            let bad = |reason: String| FeatureError::BadRow { line, reason };
            if rec.len() != DATASET_HEADER.len() {
                return Err(bad(format!("expected {} fields", DATASET_HEADER.len())));
            }
            let num = |i: usize| -> Result<f64, FeatureError> {
                rec[i]
                    .parse()
                    .map_err(|_| bad(format!("`{}` is not a number", &rec[i])))
            };
            rows.push(DatasetRow {
                segment_id: rec[0].to_string(),
                features: FeatureVector {
                    frac_sedentary: num(1)?,
                    frac_light: num(2)?,
                    frac_moderate: num(3)?,
                    frac_vigorous: num(4)?,
                    awake_minutes: num(5)?,
                },
                efficiency: num(6)?,
                label: rec[7].parse().map_err(bad)?,
            });
        }
        Ok(Self { rows })
    }
}

/// Filters segments and emits one row per survivor, in input order.
pub fn build_dataset(
    observations: &[SegmentObservation],
    filters: &DatasetFilters,
    threshold: f64,
) -> Result<Dataset, FeatureError> {
    let mut rows = Vec::new();
    for o in observations.iter().filter(|o| filters.keeps(&o.segment)) {
        let features = extract_features(&o.segment, &o.modes, o.epoch_minutes)?;
        let target = label_target(o.segment.metrics.efficiency, threshold);
        rows.push(DatasetRow {
            segment_id: o.segment_id.clone(),
            features,
            efficiency: target.efficiency,
            label: target.label,
        });
    }
    if rows.is_empty() {
        return Err(FeatureError::EmptyDataset);
    }
    Ok(Dataset { rows })
}
