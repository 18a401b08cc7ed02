//! Sleep-wake segmentation: each sleep period is paired with the awake span
//! that runs from the previous awakening up to its onset.

use serde::{Deserialize, Serialize};

use crate::sleepdetect::{SleepMetrics, SleepPeriod, SleepRecord};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SleepWakeSegment {
    /// Inclusive.
    pub awake_start_index: usize,
    /// Exclusive; equal to the sleep onset.
    pub awake_end_index: usize,
    pub sleep: SleepPeriod,
    pub metrics: SleepMetrics,
    /// The awake span starts at the recording start, so its exposure is censored.
    pub first_segment: bool,
    /// Onset immediately followed the previous awakening.
    pub empty_awake_span: bool,
}

impl SleepWakeSegment {
    pub fn awake_len(&self) -> usize {
        self.awake_end_index - self.awake_start_index
    }

    pub fn awake_range(&self) -> std::ops::Range<usize> {
        self.awake_start_index..self.awake_end_index
    }

    /// Flags as a `|`-joined list, empty when none is set.
    pub fn flags(&self) -> String {
        let mut flags = Vec::new();
        if self.first_segment {
            flags.push("first_segment");
        }
        if self.empty_awake_span {
            flags.push("empty_awake_span");
        }
        if self.sleep.truncated {
            flags.push("truncated");
        }
        if self.metrics.tst_floored {
            flags.push("tst_floored");
        }
        flags.join("|")
    }
}

/// Builds one segment per sleep period. Truncated periods are skipped unless
/// `include_truncated` is set.
pub fn segment_sleep_wake(records: &[SleepRecord], include_truncated: bool) -> Vec<SleepWakeSegment> {
    let mut out = Vec::with_capacity(records.len());
    let mut awake_start = 0;
    for (i, r) in records.iter().enumerate() {
        let seg = SleepWakeSegment {
            awake_start_index: awake_start,
            awake_end_index: r.period.onset_index,
            sleep: r.period,
            metrics: r.metrics,
            first_segment: i == 0,
            empty_awake_span: r.period.onset_index == awake_start,
        };
        awake_start = r.period.awakening_index + 1;
        if !r.period.truncated || include_truncated {
            out.push(seg);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sleepdetect::{metrics_from_counts, Latency};

    fn record(onset: usize, awakening: usize, truncated: bool) -> SleepRecord {
        SleepRecord {
            period: SleepPeriod {
                onset_index: onset,
                awakening_index: awakening,
                truncated,
            },
            metrics: metrics_from_counts(
                awakening - onset + 1,
                0,
                Latency {
                    epochs: 0,
                    start_index: onset,
                },
                1.0,
            )
            .unwrap(),
        }
    }

    #[test]
    fn two_periods() {
        let segs = segment_sleep_wake(&[record(100, 500, false), record(1500, 1900, false)], false);
        assert_eq!(segs.len(), 2);
        assert_eq!(segs[0].awake_range(), 0..100);
        assert!(segs[0].first_segment);
        assert_eq!(segs[1].awake_range(), 501..1500);
        assert!(!segs[1].first_segment);
        assert_eq!(segs[0].flags(), "first_segment");
        assert_eq!(segs[1].flags(), "");
    }

    #[test]
    fn period_at_start_has_empty_awake_span() {
        let segs = segment_sleep_wake(&[record(0, 400, false)], false);
        assert_eq!(segs[0].awake_len(), 0);
        assert!(segs[0].empty_awake_span);
    }

    #[test]
    fn no_periods() {
        assert!(segment_sleep_wake(&[], false).is_empty());
    }

    #[test]
    fn truncated_period_skipped_by_default() {
        let recs = [record(100, 500, false), record(600, 700, true)];
        assert_eq!(segment_sleep_wake(&recs, false).len(), 1);
        let all = segment_sleep_wake(&recs, true);
        assert_eq!(all.len(), 2);
        assert_eq!(all[1].awake_range(), 501..600);
        assert!(all[1].flags().contains("truncated"));
    }

    #[test]
    fn spans_tile_up_to_last_awakening() {
        let recs = [
            record(30, 90, false),
            record(91, 200, false),
            record(260, 300, false),
            record(420, 900, false),
        ];
        let segs = segment_sleep_wake(&recs, false);
        assert_eq!(segs.len(), recs.len());
        let mut cursor = 0;
        for s in &segs {
            assert_eq!(s.awake_start_index, cursor);
            assert_eq!(s.awake_end_index, s.sleep.onset_index);
            cursor = s.sleep.awakening_index + 1;
        }
        assert!(segs[1].empty_awake_span);
    }
}
