//! Activity modes: each change-point interval takes the most frequent
//! intensity label of its epochs.

use serde::{Deserialize, Serialize};

use crate::cutpoints::IntensityLevel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TieBreak {
    #[default]
    Lower,
    Higher,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityMode {
    pub start_index: usize,
    /// Exclusive.
    pub end_index: usize,
    pub level: IntensityLevel,
    pub epoch_histogram: [usize; 4],
}

impl ActivityMode {
    pub fn len(&self) -> usize {
        self.end_index - self.start_index
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn histogram(labels: &[IntensityLevel]) -> [usize; 4] {
    let mut h = [0; 4];
    for l in labels {
        h[l.index()] += 1;
    }
    h
}

pub fn histogram_mode(h: &[usize; 4], tie: TieBreak) -> IntensityLevel {
    let mut best = 0;
    for i in 1..4 {
        let better = match tie {
            TieBreak::Lower => h[i] > h[best],
            TieBreak::Higher => h[i] >= h[best],
        };
        if better {
            best = i;
        }
    }
    IntensityLevel::ALL[best]
}

/// Partitions `intensity` at `change_points` (offsets in `1..len`) and labels
/// each interval. Indices in the result are offsets into `intensity`.
pub fn label_intervals(intensity: &[IntensityLevel], change_points: &[usize], tie: TieBreak) -> Vec<ActivityMode> {
    if intensity.is_empty() {
        return Vec::new();
    }
    let mut bounds = Vec::with_capacity(change_points.len() + 2);
    bounds.push(0);
    bounds.extend(change_points.iter().copied().filter(|&c| c > 0 && c < intensity.len()));
    bounds.push(intensity.len());
    bounds.windows(2)
        .map(|w| {
            let h = histogram(&intensity[w[0]..w[1]]);
            ActivityMode {
                start_index: w[0],
                end_index: w[1],
                level: histogram_mode(&h, tie),
                epoch_histogram: h,
            }
        })
        .collect()
}
