//! Count-based intensity labelling.
//!
//! A [`CutPointScale`] holds one row of thresholds per age range. Thresholds
//! are inclusive upper bounds in counts per minute: with `sedentary_max = 99`
//! an epoch at 99 cpm is sedentary and one at 100 cpm is light.

use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{Epoch, EpochSeries};

const BUILTIN_SCALE: &str = include_str!("../data/troiano_cutpoints.csv");
const SCALE_HEADER: [&str; 5] = ["age_min", "age_max", "sedentary_max", "light_max", "moderate_max"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntensityLevel {
    Sedentary = 0,
    Light = 1,
    Moderate = 2,
    Vigorous = 3,
}

impl IntensityLevel {
    pub const ALL: [IntensityLevel; 4] = [Self::Sedentary, Self::Light, Self::Moderate, Self::Vigorous];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Sedentary => "sedentary",
            Self::Light => "light",
            Self::Moderate => "moderate",
            Self::Vigorous => "vigorous",
        }
    }
}

impl fmt::Display for IntensityLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for IntensityLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| format!("unknown intensity level `{s}`"))
    }
}

/// Which count signal is compared against the thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CountAxis {
    #[default]
    Axis1,
    /// Vector magnitude of the three axes.
    Vm3,
}

impl CountAxis {
    pub fn counts(self, epoch: &Epoch) -> f64 {
        match self {
            Self::Axis1 => epoch.axis1 as f64,
            Self::Vm3 => epoch.vector_magnitude(),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum CutPointError {
    #[error("invalid cut-point scale: {0}")]
    InvalidScale(String),
    #[error("cut-point scale `{scale}` has no row for age {age}")]
    AgeNotCovered { scale: String, age: u32 },
}

/// One contiguous band `[previous upper bound, upper_exclusive)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Band {
    pub upper_exclusive: f64,
    pub level: IntensityLevel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgeThresholds {
    pub age_min: u32,
    pub age_max: u32,
    pub sedentary_max: u64,
    pub light_max: u64,
    pub moderate_max: u64,
}

impl AgeThresholds {
    pub fn bands(&self) -> [Band; 4] {
        [
            Band {
                upper_exclusive: (self.sedentary_max + 1) as f64,
                level: IntensityLevel::Sedentary,
            },
            Band {
                upper_exclusive: (self.light_max + 1) as f64,
                level: IntensityLevel::Light,
            },
            Band {
                upper_exclusive: (self.moderate_max + 1) as f64,
                level: IntensityLevel::Moderate,
            },
            Band {
                upper_exclusive: f64::INFINITY,
                level: IntensityLevel::Vigorous,
            },
        ]
    }

    pub fn classify_cpm(&self, cpm: f64) -> IntensityLevel {
        self.bands()
            .into_iter()
            .find(|b| cpm < b.upper_exclusive)
            .map(|b| b.level)
            .unwrap_or(IntensityLevel::Vigorous)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CutPointScale {
    pub name: String,
    pub rows: Vec<AgeThresholds>,
}

impl CutPointScale {
    /// The bundled age-indexed scale (ages 6-17 individually, adults from 18).
    pub fn troiano() -> Self {
        Self::from_csv("troiano2008", BUILTIN_SCALE.as_bytes()).expect("bundled scale is valid")
    }

    /// Reads `age_min,age_max,sedentary_max,light_max,moderate_max` rows.
    pub fn from_csv<R: Read>(name: &str, source: R) -> Result<Self, CutPointError> {
        let bad = |msg: String| CutPointError::InvalidScale(msg);
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(source);
        let header = reader.headers().map_err(|e| bad(e.to_string()))?;
        if header.iter().ne(SCALE_HEADER.iter().copied()) {
            return Err(bad(format!("header must be `{}`", SCALE_HEADER.join(","))));
        }
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let field = |i: usize| -> Result<u64, CutPointError> {
                rec.get(i)
                    .ok_or_else(|| bad("short row".into()))?
                    .parse()
                    .map_err(|_| bad(format!("`{}` is not a non-negative integer", &rec[i])))
            };
            rows.push(AgeThresholds {
                age_min: field(0)? as u32,
                age_max: field(1)? as u32,
                sedentary_max: field(2)?,
                light_max: field(3)?,
                moderate_max: field(4)?,
            });
        }
        let scale = Self {
            name: name.to_string(),
            rows,
        };
        scale.validate()?;
        Ok(scale)
    }

    /// A scale with one row covering every age.
    pub fn uniform(name: &str, sedentary_max: u64, light_max: u64, moderate_max: u64) -> Result<Self, CutPointError> {
        let scale = Self {
            name: name.to_string(),
            rows: vec![AgeThresholds {
                age_min: 0,
                age_max: u32::MAX,
                sedentary_max,
                light_max,
                moderate_max,
            }],
        };
        scale.validate()?;
        Ok(scale)
    }

    pub fn validate(&self) -> Result<(), CutPointError> {
        let bad = |msg: String| Err(CutPointError::InvalidScale(msg));
        if self.rows.is_empty() {
            return bad("no rows".into());
        }
        for (i, r) in self.rows.iter().enumerate() {
            if r.age_min > r.age_max {
                return bad(format!("row {}: age_min > age_max", i + 1));
            }
            if !(r.sedentary_max < r.light_max && r.light_max < r.moderate_max) {
                return bad(format!("row {}: thresholds must be strictly increasing", i + 1));
            }
            if i > 0 && self.rows[i - 1].age_max >= r.age_min {
                return bad(format!("row {}: age ranges overlap or are out of order", i + 1));
            }
        }
        Ok(())
    }

    pub fn for_age(&self, age_years: u32) -> Result<&AgeThresholds, CutPointError> {
        self.rows
            .iter()
            .find(|r| (r.age_min..=r.age_max).contains(&age_years))
            .ok_or_else(|| CutPointError::AgeNotCovered {
                scale: self.name.clone(),
                age: age_years,
            })
    }
}

/// Counts per minute for one epoch of `epoch_secs` seconds.
pub fn counts_per_minute(epoch: &Epoch, epoch_secs: u32, axis: CountAxis) -> f64 {
    axis.counts(epoch) * 60.0 / epoch_secs as f64
}

pub fn classify_epoch(
    epoch: &Epoch,
    epoch_secs: u32,
    scale: &CutPointScale,
    age_years: u32,
    axis: CountAxis,
) -> Result<IntensityLevel, CutPointError> {
    scale.validate()?;
    let row = scale.for_age(age_years)?;
    Ok(row.classify_cpm(counts_per_minute(epoch, epoch_secs, axis)))
}

pub fn classify_series(
    series: &EpochSeries,
    scale: &CutPointScale,
    age_years: u32,
    axis: CountAxis,
) -> Result<Vec<IntensityLevel>, CutPointError> {
    scale.validate()?;
    let row = scale.for_age(age_years)?;
    Ok(series
        .epochs
        .iter()
        .map(|e| row.classify_cpm(counts_per_minute(e, series.epoch_secs, axis)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::SubjectMeta;
    use chrono::{DateTime, Duration};
    use proptest::prelude::*;

    fn epoch(axis1: u64) -> Epoch {
        let t = DateTime::parse_from_rfc3339("2014-09-01T08:00:00+03:00").unwrap();
        Epoch {
            axis1,
            ..Epoch::zero(t)
        }
    }

    fn adult(axis1: u64) -> IntensityLevel {
        classify_epoch(&epoch(axis1), 60, &CutPointScale::troiano(), 30, CountAxis::Axis1).unwrap()
    }

    #[test]
    fn adult_thresholds() {
        assert_eq!(adult(0), IntensityLevel::Sedentary);
        assert_eq!(adult(99), IntensityLevel::Sedentary);
        assert_eq!(adult(100), IntensityLevel::Light);
        assert_eq!(adult(2019), IntensityLevel::Light);
        assert_eq!(adult(2020), IntensityLevel::Moderate);
        assert_eq!(adult(5998), IntensityLevel::Moderate);
        assert_eq!(adult(5999), IntensityLevel::Vigorous);
        assert_eq!(adult(6000), IntensityLevel::Vigorous);
    }

    #[test]
    fn youth_rows_are_age_specific() {
        let scale = CutPointScale::troiano();
        let sixteen = scale.for_age(16).unwrap();
        assert_eq!(sixteen.classify_cpm(2999.0), IntensityLevel::Light);
        assert_eq!(sixteen.classify_cpm(3000.0), IntensityLevel::Moderate);
        assert_eq!(sixteen.classify_cpm(6363.0), IntensityLevel::Vigorous);
        assert_eq!(
            scale.for_age(5).unwrap_err(),
            CutPointError::AgeNotCovered {
                scale: "troiano2008".into(),
                age: 5
            }
        );
    }

    #[test]
    fn normalises_by_epoch_length() {
        // 4000 counts in a two-minute epoch is 2000 cpm.
        let lvl = classify_epoch(&epoch(4000), 120, &CutPointScale::troiano(), 30, CountAxis::Axis1).unwrap();
        assert_eq!(lvl, IntensityLevel::Light);
    }

    #[test]
    fn vector_magnitude_axis() {
        let mut e = epoch(60);
        e.axis2 = 80;
        assert_eq!(CountAxis::Vm3.counts(&e), 100.0);
        let lvl = classify_epoch(&e, 60, &CutPointScale::troiano(), 30, CountAxis::Vm3).unwrap();
        assert_eq!(lvl, IntensityLevel::Light);
    }

    #[test]
    fn invalid_scales_rejected() {
        assert!(CutPointScale::uniform("x", 100, 100, 200).is_err());
        let text = "age_min,age_max,sedentary_max,light_max,moderate_max\n0,20,1,2,3\n20,30,1,2,3\n";
        assert!(matches!(
            CutPointScale::from_csv("x", text.as_bytes()),
            Err(CutPointError::InvalidScale(_))
        ));
        let text = "age,sedentary\n";
        assert!(CutPointScale::from_csv("x", text.as_bytes()).is_err());
    }

    #[test]
    fn series_classification() {
        let scale = CutPointScale::troiano();
        let empty = EpochSeries::new(vec![], 60, SubjectMeta::default());
        assert!(classify_series(&empty, &scale, 30, CountAxis::Axis1).unwrap().is_empty());

        let t0 = epoch(0).timestamp;
        let counts = [0u64, 150, 2500, 7000, 50];
        let epochs: Vec<Epoch> = counts
            .iter()
            .enumerate()
            .map(|(i, &c)| Epoch {
                axis1: c,
                ..Epoch::zero(t0 + Duration::minutes(i as i64))
            })
            .collect();
        let s = EpochSeries::new(epochs.clone(), 60, SubjectMeta::default());
        let labels = classify_series(&s, &scale, 30, CountAxis::Axis1).unwrap();
        let each: Vec<_> = epochs.iter().map(|e| adult(e.axis1)).collect();
        assert_eq!(labels, each);

        let zeros = EpochSeries::new(
            (0..50).map(|i| Epoch::zero(t0 + Duration::minutes(i))).collect(),
            60,
            SubjectMeta::default(),
        );
        assert!(classify_series(&zeros, &scale, 30, CountAxis::Axis1)
            .unwrap()
            .iter()
            .all(|&l| l == IntensityLevel::Sedentary));
    }

    proptest! {
        #[test]
        fn monotone_in_counts(a in 0u64..20_000, b in 0u64..20_000, age in 6u32..90) {
            let scale = CutPointScale::troiano();
            let (lo, hi) = (a.min(b), a.max(b));
            let la = classify_epoch(&epoch(lo), 60, &scale, age, CountAxis::Axis1).unwrap();
            let lb = classify_epoch(&epoch(hi), 60, &scale, age, CountAxis::Axis1).unwrap();
            prop_assert!(la <= lb);
        }

        #[test]
        fn bands_cover_each_count_once(c in 0u64..1_000_000, age in 6u32..90) {
            let row = *CutPointScale::troiano().for_age(age).unwrap();
            let bands = row.bands();
            let mut lower = 0.0;
            let mut hits = 0;
            for b in bands {
                if (c as f64) >= lower && (c as f64) < b.upper_exclusive {
                    hits += 1;
                }
                lower = b.upper_exclusive;
            }
            prop_assert_eq!(hits, 1);
        }

        #[test]
        fn permutation_equivariant(counts in prop::collection::vec(0u64..9000, 1..40), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let scale = CutPointScale::troiano();
            let t0 = epoch(0).timestamp;
            let mk = |cs: &[u64]| EpochSeries::new(
                cs.iter().map(|&c| Epoch { axis1: c, ..Epoch::zero(t0) }).collect(),
                60,
                SubjectMeta::default(),
            );
            let mut perm: Vec<usize> = (0..counts.len()).collect();
            perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let shuffled: Vec<u64> = perm.iter().map(|&i| counts[i]).collect();
            let base = classify_series(&mk(&counts), &scale, 40, CountAxis::Axis1).unwrap();
            let moved = classify_series(&mk(&shuffled), &scale, 40, CountAxis::Axis1).unwrap();
            let expected: Vec<_> = perm.iter().map(|&i| base[i]).collect();
            prop_assert_eq!(moved, expected);
        }
    }
}
