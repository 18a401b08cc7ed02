//! Epoch-level actigraphy records: parsing, validation and re-aggregation.
//!
//! Input files are UTF-8 comma-separated text with the exact header
//! `timestamp,axis1,axis2,axis3,steps,inclinometer`. Timestamps are ISO-8601
//! with a UTC offset and inclinometer tokens are lowercase.

use std::fmt;
use std::io::{Read, Write};
use std::ops::Deref;
use std::str::FromStr;

use chrono::{DateTime, Duration, FixedOffset, SecondsFormat, Timelike};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const CSV_HEADER: [&str; 6] = ["timestamp", "axis1", "axis2", "axis3", "steps", "inclinometer"];
pub const DEFAULT_EPOCH_SECS: u32 = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Inclinometer {
    Off,
    Standing,
    Sitting,
    Lying,
}

impl Inclinometer {
    pub const ALL: [Inclinometer; 4] = [Self::Off, Self::Standing, Self::Sitting, Self::Lying];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Off => "off",
            Self::Standing => "standing",
            Self::Sitting => "sitting",
            Self::Lying => "lying",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Inclinometer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Inclinometer {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "off" => Ok(Self::Off),
            "standing" => Ok(Self::Standing),
            "sitting" => Ok(Self::Sitting),
            "lying" => Ok(Self::Lying),
            other => Err(other.to_string()),
        }
    }
}

/// One epoch of device output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Epoch {
    pub timestamp: DateTime<FixedOffset>,
    /// Vertical axis counts.
    pub axis1: u64,
    pub axis2: u64,
    pub axis3: u64,
    pub steps: u64,
    pub inclinometer: Inclinometer,
}

impl Epoch {
    pub fn zero(timestamp: DateTime<FixedOffset>) -> Self {
        Self {
            timestamp,
            axis1: 0,
            axis2: 0,
            axis3: 0,
            steps: 0,
            inclinometer: Inclinometer::Off,
        }
    }

    pub fn counts(&self) -> [f64; 3] {
        [self.axis1 as f64, self.axis2 as f64, self.axis3 as f64]
    }

    /// Euclidean magnitude of the three axis counts.
    pub fn vector_magnitude(&self) -> f64 {
        let [a, b, c] = self.counts();
        (a * a + b * b + c * c).sqrt()
    }

    pub fn has_movement(&self) -> bool {
        self.axis1 > 0 || self.axis2 > 0 || self.axis3 > 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SubjectMeta {
    pub subject_id: String,
    pub age_years: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpochSeries {
    pub epochs: Vec<Epoch>,
    pub epoch_secs: u32,
    pub meta: SubjectMeta,
}

impl EpochSeries {
    pub fn new(epochs: Vec<Epoch>, epoch_secs: u32, meta: SubjectMeta) -> Self {
        Self {
            epochs,
            epoch_secs,
            meta,
        }
    }

    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn epoch_minutes(&self) -> f64 {
        self.epoch_secs as f64 / 60.0
    }

    fn stride(&self) -> Duration {
        Duration::seconds(self.epoch_secs as i64)
    }
}

/// A series whose timestamps are minute-aligned, strictly increasing and
/// exactly one epoch apart. Only [`validate_series`] and the operations that
/// preserve the stride construct one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidatedSeries(EpochSeries);

impl ValidatedSeries {
    pub fn into_inner(self) -> EpochSeries {
        self.0
    }
}

impl Deref for ValidatedSeries {
    type Target = EpochSeries;

    fn deref(&self) -> &EpochSeries {
        &self.0
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("csv read failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("header must be `{}`, found `{found}`", CSV_HEADER.join(","))]
    BadHeader { found: String },
    #[error("line {line}: malformed row: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("line {line}: negative value in `{field}`")]
    NegativeCount { line: u64, field: &'static str },
    #[error("line {line}: unknown inclinometer state `{token}`")]
    UnknownInclinometer { line: u64, token: String },
    #[error("epoch length must be a positive whole number of minutes, got {0} s")]
    BadEpochLength(u32),
    #[error("aggregation factor must be at least 1")]
    ZeroFactor,
    #[error("write failed: {0}")]
    Io(#[from] std::io::Error),
}

/// Parses an epoch CSV stream with the default one-minute epoch length.
pub fn parse_epoch_csv<R: Read>(source: R, meta: SubjectMeta) -> Result<EpochSeries, IngestError> {
    parse_epoch_csv_with_epoch(source, meta, DEFAULT_EPOCH_SECS)
}

pub fn parse_epoch_csv_with_epoch<R: Read>(
    source: R,
    meta: SubjectMeta,
    epoch_secs: u32,
) -> Result<EpochSeries, IngestError> {
    if epoch_secs == 0 || !epoch_secs.is_multiple_of(60) {
        return Err(IngestError::BadEpochLength(epoch_secs));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(source);
    let mut records = reader.records();

    let header = match records.next() {
        Some(rec) => rec?,
        None => {
            return Err(IngestError::BadHeader {
                found: String::new(),
            })
        }
    };
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(IngestError::BadHeader {
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }

    let mut epochs = Vec::new();
    for rec in records {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        epochs.push(parse_row(&rec, line)?);
    }
    Ok(EpochSeries::new(epochs, epoch_secs, meta))
}

fn parse_row(rec: &csv::StringRecord, line: u64) -> Result<Epoch, IngestError> {
    if rec.len() != CSV_HEADER.len() {
        return Err(IngestError::MalformedRow {
            line,
            reason: format!("expected {} fields, found {}", CSV_HEADER.len(), rec.len()),
        });
    }
    let timestamp =
        DateTime::parse_from_rfc3339(&rec[0]).map_err(|e| IngestError::MalformedRow {
            line,
            reason: format!("timestamp `{}`: {e}", &rec[0]),
        })?;
    let count = |idx: usize| -> Result<u64, IngestError> {
        let field = CSV_HEADER[idx];
        let value: i64 = rec[idx].parse().map_err(|_| IngestError::MalformedRow {
            line,
            reason: format!("`{field}` is not an integer: `{}`", &rec[idx]),
        })?;
        u64::try_from(value).map_err(|_| IngestError::NegativeCount { line, field })
    };
    let axis1 = count(1)?;
    let axis2 = count(2)?;
    let axis3 = count(3)?;
    let steps = count(4)?;
    let inclinometer = rec[5]
        .parse()
        .map_err(|token| IngestError::UnknownInclinometer { line, token })?;
    Ok(Epoch {
        timestamp,
        axis1,
        axis2,
        axis3,
        steps,
        inclinometer,
    })
}

pub fn format_timestamp(ts: &DateTime<FixedOffset>) -> String {
    ts.to_rfc3339_opts(SecondsFormat::Secs, false)
}

/// Writes a series in the input CSV format.
pub fn write_epoch_csv<W: Write>(series: &EpochSeries, sink: W) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(CSV_HEADER)?;
    for e in &series.epochs {
        w.write_record([
            format_timestamp(&e.timestamp),
            e.axis1.to_string(),
            e.axis2.to_string(),
            e.axis3.to_string(),
            e.steps.to_string(),
            e.inclinometer.as_str().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ValidationIssue {
    /// `length` epochs are missing, starting `start_offset` epochs after the
    /// first timestamp.
    GapDetected {
        index: usize,
        start_offset: i64,
        start: DateTime<FixedOffset>,
        length: i64,
    },
    DuplicateTimestamp {
        index: usize,
        timestamp: DateTime<FixedOffset>,
    },
    NonMonotone {
        index: usize,
        timestamp: DateTime<FixedOffset>,
    },
    /// Step to the next epoch is not a whole multiple of the epoch length.
    IrregularStride {
        index: usize,
        timestamp: DateTime<FixedOffset>,
    },
    /// Timestamp carries seconds or sub-second parts.
    Misaligned {
        index: usize,
        timestamp: DateTime<FixedOffset>,
    },
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::GapDetected {
                start_offset,
                start,
                length,
                ..
            } => write!(
                f,
                "gap of {length} epoch(s) at offset {start_offset} ({})",
                format_timestamp(start)
            ),
            Self::DuplicateTimestamp { index, timestamp } => write!(
                f,
                "row {index}: duplicate timestamp {}",
                format_timestamp(timestamp)
            ),
            Self::NonMonotone { index, timestamp } => write!(
                f,
                "row {index}: timestamp {} goes backwards",
                format_timestamp(timestamp)
            ),
            Self::IrregularStride { index, timestamp } => write!(
                f,
                "row {index}: timestamp {} is off the epoch grid",
                format_timestamp(timestamp)
            ),
            Self::Misaligned { index, timestamp } => write!(
                f,
                "row {index}: timestamp {} is not on a whole minute",
                format_timestamp(timestamp)
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Error)]
#[error("series failed validation with {} issue(s)", issues.len())]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn gaps(&self) -> impl Iterator<Item = &ValidationIssue> {
        self.issues
            .iter()
            .filter(|i| matches!(i, ValidationIssue::GapDetected { .. }))
    }

    /// True when every issue is a gap that zero-filling can repair.
    pub fn only_gaps(&self) -> bool {
        self.issues
            .iter()
            .all(|i| matches!(i, ValidationIssue::GapDetected { .. }))
    }
}

fn minute_aligned(ts: &DateTime<FixedOffset>) -> bool {
    ts.second() == 0 && ts.nanosecond() == 0
}

fn check_series(series: &EpochSeries) -> Vec<ValidationIssue> {
    let stride = series.stride();
    let mut issues = Vec::new();
    let Some(first) = series.epochs.first() else {
        return issues;
    };
    let origin = first.timestamp;
    for (index, e) in series.epochs.iter().enumerate() {
        if !minute_aligned(&e.timestamp) {
            issues.push(ValidationIssue::Misaligned {
                index,
                timestamp: e.timestamp,
            });
        }
        if index == 0 {
            continue;
        }
        let prev = series.epochs[index - 1].timestamp;
        let step = e.timestamp - prev;
        if step == Duration::zero() {
            issues.push(ValidationIssue::DuplicateTimestamp {
                index,
                timestamp: e.timestamp,
            });
        } else if step < Duration::zero() {
            issues.push(ValidationIssue::NonMonotone {
                index,
                timestamp: e.timestamp,
            });
        } else if step != stride {
            let secs = step.num_seconds();
            let stride_secs = stride.num_seconds();
            if secs % stride_secs != 0 || step.subsec_nanos() != 0 {
                issues.push(ValidationIssue::IrregularStride {
                    index,
                    timestamp: e.timestamp,
                });
            } else {
                let start = prev + stride;
                issues.push(ValidationIssue::GapDetected {
                    index,
                    start_offset: (start - origin).num_seconds() / stride_secs,
                    start,
                    length: secs / stride_secs - 1,
                });
            }
        }
    }
    issues
}

/// Confirms a strict one-epoch stride. The series is returned unchanged on
/// success; otherwise every problem found is listed.
pub fn validate_series(series: EpochSeries) -> Result<ValidatedSeries, ValidationReport> {
    let issues = check_series(&series);
    if issues.is_empty() {
        Ok(ValidatedSeries(series))
    } else {
        Err(ValidationReport { issues })
    }
}

/// Inserts zero-count, zero-step, `off` epochs into every gap. Any issue other
/// than a gap is still an error. Returns the repaired series and the number of
/// epochs inserted.
pub fn fill_gaps_sedentary_zero(
    series: EpochSeries,
) -> Result<(ValidatedSeries, usize), ValidationReport> {
    let issues = check_series(&series);
    if !issues.iter().all(|i| matches!(i, ValidationIssue::GapDetected { .. })) {
        return Err(ValidationReport {
            issues: issues
                .into_iter()
                .filter(|i| !matches!(i, ValidationIssue::GapDetected { .. }))
                .collect(),
        });
    }
    let stride = series.stride();
    let mut filled = 0;
    let mut epochs = Vec::with_capacity(series.epochs.len());
    for e in series.epochs {
        if let Some(prev) = epochs.last().map(|p: &Epoch| p.timestamp) {
            let mut t = prev + stride;
            while t < e.timestamp {
                epochs.push(Epoch::zero(t));
                filled += 1;
                t += stride;
            }
        }
        epochs.push(e);
    }
    let repaired = EpochSeries { epochs, ..series };
    debug_assert!(check_series(&repaired).is_empty());
    Ok((ValidatedSeries(repaired), filled))
}

#[derive(Debug, Clone)]
pub struct Aggregated {
    pub series: ValidatedSeries,
    /// Trailing epochs that did not fill a whole block.
    pub dropped: usize,
}

/// Sums counts and steps over consecutive blocks of `factor` epochs. A block
/// takes its first member's timestamp and its most frequent inclinometer
/// state, ties going to the earlier state in `off < standing < sitting < lying`.
pub fn aggregate_epochs(series: &ValidatedSeries, factor: usize) -> Result<Aggregated, IngestError> {
    if factor == 0 {
        return Err(IngestError::ZeroFactor);
    }
    let blocks = series.len() / factor;
    let dropped = series.len() - blocks * factor;
    if dropped > 0 {
        tracing::warn!(dropped, factor, "trailing epochs dropped during aggregation");
    }
    let epochs = series
        .epochs
        .chunks_exact(factor)
        .map(|block| {
            let mut votes = [0usize; 4];
            let mut out = Epoch::zero(block[0].timestamp);
            for e in block {
                out.axis1 += e.axis1;
                out.axis2 += e.axis2;
                out.axis3 += e.axis3;
                out.steps += e.steps;
                votes[e.inclinometer.index()] += 1;
            }
            let mut best = 0;
            for (i, &v) in votes.iter().enumerate() {
                if v > votes[best] {
                    best = i;
                }
            }
            out.inclinometer = Inclinometer::ALL[best];
            out
        })
        .collect();
    let epoch_secs = series
        .epoch_secs
        .checked_mul(factor as u32)
        .ok_or(IngestError::BadEpochLength(u32::MAX))?;
    Ok(Aggregated {
        series: ValidatedSeries(EpochSeries::new(epochs, epoch_secs, series.meta.clone())),
        dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ts(minute: i64) -> DateTime<FixedOffset> {
        DateTime::parse_from_rfc3339("2014-09-01T22:00:00+03:00").unwrap() + Duration::minutes(minute)
    }

    fn series_from(minutes: &[i64], axis1: impl Fn(usize) -> u64) -> EpochSeries {
        let epochs = minutes
            .iter()
            .enumerate()
            .map(|(i, &m)| Epoch {
                axis1: axis1(i),
                ..Epoch::zero(ts(m))
            })
            .collect();
        EpochSeries::new(epochs, 60, SubjectMeta::default())
    }

    fn csv_text(rows: &[&str]) -> String {
        let mut s = CSV_HEADER.join(",");
        for r in rows {
            s.push('\n');
            s.push_str(r);
        }
        s
    }

    #[test]
    fn parses_single_row() {
        let text = csv_text(&["2014-09-01T22:00:00+03:00,0,0,0,0,lying"]);
        let s = parse_epoch_csv(text.as_bytes(), SubjectMeta::default()).unwrap();
        assert_eq!(s.len(), 1);
        let e = &s.epochs[0];
        assert_eq!((e.axis1, e.axis2, e.axis3, e.steps), (0, 0, 0, 0));
        assert_eq!(e.inclinometer, Inclinometer::Lying);
        assert_eq!(e.timestamp, ts(0));
    }

    #[test]
    fn negative_count_rejected() {
        let text = csv_text(&["2014-09-01T22:00:00+03:00,-5,0,0,0,lying"]);
        let err = parse_epoch_csv(text.as_bytes(), SubjectMeta::default()).unwrap_err();
        assert!(matches!(err, IngestError::NegativeCount { line: 2, field: "axis1" }));
    }

    #[test]
    fn parse_errors_report_line() {
        let text = csv_text(&[
            "2014-09-01T22:00:00+03:00,1,0,0,0,lying",
            "2014-09-01T22:01:00+03:00,x,0,0,0,lying",
        ]);
        let err = parse_epoch_csv(text.as_bytes(), SubjectMeta::default()).unwrap_err();
        assert!(matches!(err, IngestError::MalformedRow { line: 3, .. }), "{err}");

        let text = csv_text(&["2014-09-01T22:00:00+03:00,1,0,0,0,supine"]);
        let err = parse_epoch_csv(text.as_bytes(), SubjectMeta::default()).unwrap_err();
        assert!(matches!(err, IngestError::UnknownInclinometer { line: 2, ref token } if token == "supine"));

        let text = csv_text(&["2014-09-01T22:00:00+03:00,1,0,0,lying"]);
        assert!(matches!(
            parse_epoch_csv(text.as_bytes(), SubjectMeta::default()),
            Err(IngestError::MalformedRow { .. })
        ));

        let text = "time,axis1,axis2,axis3,steps,inclinometer\n";
        assert!(matches!(
            parse_epoch_csv(text.as_bytes(), SubjectMeta::default()),
            Err(IngestError::BadHeader { .. })
        ));
    }

    #[test]
    fn full_day_cardinality() {
        let rows: Vec<String> = (0..1440)
            .map(|m| format!("{},3,2,1,0,sitting", format_timestamp(&ts(m))))
            .collect();
        let refs: Vec<&str> = rows.iter().map(String::as_str).collect();
        let s = parse_epoch_csv(csv_text(&refs).as_bytes(), SubjectMeta::default()).unwrap();
        assert_eq!(s.len(), 1440);
        assert!(validate_series(s).is_ok());
    }

    #[test]
    fn contiguous_series_validates() {
        let minutes: Vec<i64> = (0..100).collect();
        let s = series_from(&minutes, |_| 0);
        let v = validate_series(s.clone()).unwrap();
        assert_eq!(*v, s);
    }

    #[test]
    fn gap_reported_with_offset_and_length() {
        let minutes: Vec<i64> = (0..100).filter(|&m| m != 50).collect();
        let report = validate_series(series_from(&minutes, |_| 0)).unwrap_err();
        assert_eq!(report.issues.len(), 1);
        match &report.issues[0] {
            ValidationIssue::GapDetected {
                start_offset,
                length,
                start,
                ..
            } => {
                assert_eq!(*start_offset, 50);
                assert_eq!(*length, 1);
                assert_eq!(*start, ts(50));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_and_backwards_timestamps() {
        let report = validate_series(series_from(&[0, 1, 1, 2], |_| 0)).unwrap_err();
        assert!(matches!(
            report.issues[..],
            [ValidationIssue::DuplicateTimestamp { index: 2, .. }]
        ));
        let report = validate_series(series_from(&[0, 2, 1], |_| 0)).unwrap_err();
        assert!(report
            .issues
            .iter()
            .any(|i| matches!(i, ValidationIssue::NonMonotone { index: 2, .. })));
    }

    #[test]
    fn misaligned_timestamp() {
        let mut s = series_from(&[0, 1], |_| 0);
        s.epochs[0].timestamp += Duration::seconds(30);
        s.epochs[1].timestamp += Duration::seconds(30);
        let report = validate_series(s).unwrap_err();
        assert_eq!(report.issues.len(), 2);
        assert!(!report.only_gaps());
    }

    #[test]
    fn gap_filling_inserts_zero_epochs() {
        let minutes: Vec<i64> = (0..20).filter(|m| !(5..8).contains(m)).collect();
        let (v, filled) = fill_gaps_sedentary_zero(series_from(&minutes, |_| 9)).unwrap();
        assert_eq!(filled, 3);
        assert_eq!(v.len(), 20);
        assert_eq!(v.epochs[5], Epoch::zero(ts(5)));
        assert_eq!(v.epochs[8].axis1, 9);

        assert!(fill_gaps_sedentary_zero(series_from(&[0, 1, 1], |_| 0)).is_err());
    }

    #[test]
    fn aggregate_identity_and_sum() {
        let v = validate_series(series_from(&(0..60).collect::<Vec<_>>(), |_| 1)).unwrap();
        let same = aggregate_epochs(&v, 1).unwrap();
        assert_eq!(same.series, v);
        assert_eq!(same.dropped, 0);

        let hour = aggregate_epochs(&v, 60).unwrap();
        assert_eq!(hour.series.len(), 1);
        assert_eq!(hour.series.epochs[0].axis1, 60);
        assert_eq!(hour.series.epoch_secs, 3600);
    }

    #[test]
    fn aggregate_drops_remainder() {
        let v = validate_series(series_from(&(0..10).collect::<Vec<_>>(), |i| i as u64)).unwrap();
        let agg = aggregate_epochs(&v, 3).unwrap();
        assert_eq!(agg.series.len(), 3);
        assert_eq!(agg.dropped, 1);
        assert_eq!(agg.series.epochs[2].axis1, 6 + 7 + 8);
        assert!(matches!(aggregate_epochs(&v, 0), Err(IngestError::ZeroFactor)));
    }

    #[test]
    fn aggregate_inclinometer_majority_tie_break() {
        let mut s = series_from(&(0..4).collect::<Vec<_>>(), |_| 0);
        let states = [
            Inclinometer::Lying,
            Inclinometer::Sitting,
            Inclinometer::Sitting,
            Inclinometer::Lying,
        ];
        for (e, st) in s.epochs.iter_mut().zip(states) {
            e.inclinometer = st;
        }
        let v = validate_series(s).unwrap();
        let agg = aggregate_epochs(&v, 4).unwrap();
        assert_eq!(agg.series.epochs[0].inclinometer, Inclinometer::Sitting);
    }

    fn arb_validated() -> impl Strategy<Value = ValidatedSeries> {
        prop::collection::vec((0u64..20_000, 0u64..500, 0u64..500, 0u64..300, 0usize..4), 0..200)
            .prop_map(|rows| {
                let epochs = rows
                    .into_iter()
                    .enumerate()
                    .map(|(i, (a1, a2, a3, st, inc))| Epoch {
                        timestamp: ts(i as i64),
                        axis1: a1,
                        axis2: a2,
                        axis3: a3,
                        steps: st,
                        inclinometer: Inclinometer::ALL[inc],
                    })
                    .collect();
                validate_series(EpochSeries::new(epochs, 60, SubjectMeta::default())).unwrap()
            })
    }

    proptest! {
        #[test]
        fn csv_round_trip(v in arb_validated()) {
            let mut buf = Vec::new();
            write_epoch_csv(&v, &mut buf).unwrap();
            let back = parse_epoch_csv(buf.as_slice(), SubjectMeta::default()).unwrap();
            prop_assert_eq!(&back, &*v);
        }

        #[test]
        fn aggregation_preserves_totals_and_validity(v in arb_validated(), factor in 1usize..17) {
            let agg = aggregate_epochs(&v, factor).unwrap();
            let kept = factor * (v.len() / factor);
            let expected: u64 = v.epochs[..kept].iter().map(|e| e.axis1).sum();
            let got: u64 = agg.series.epochs.iter().map(|e| e.axis1).sum();
            prop_assert_eq!(got, expected);
            prop_assert!(validate_series(agg.series.into_inner()).is_ok());
        }
    }
}
