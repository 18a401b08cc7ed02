//! Seeded synthetic recordings with planted sleep periods and activity blocks.
//!
//! A [`DayProfile`] is a schedule of blocks, each either sleep or one awake
//! intensity level with per-axis count distributions. Counts are drawn from a
//! gamma-Poisson mixture (negative binomial with the given mean and size
//! parameter), so they are overdispersed non-negative integers.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Duration, FixedOffset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cutpoints::IntensityLevel;
use crate::ingest::{Epoch, EpochSeries, Inclinometer, SubjectMeta, DEFAULT_EPOCH_SECS};
use crate::sleepdetect::{SleepPeriod, SleepRuleParams};

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlockMode {
    Sleep,
    Awake(IntensityLevel),
}

impl fmt::Display for BlockMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Sleep => f.write_str("sleep"),
            Self::Awake(level) => f.write_str(level.as_str()),
        }
    }
}

impl FromStr for BlockMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "sleep" {
            return Ok(Self::Sleep);
        }
        s.parse::<IntensityLevel>()
            .map(Self::Awake)
            .map_err(|_| format!("unknown block mode `{s}`"))
    }
}

impl Serialize for BlockMode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BlockMode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Negative binomial by mean and size. `dispersion = None` gives Poisson.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountDistribution {
    pub mean: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dispersion: Option<f64>,
}

impl CountDistribution {
    pub fn new(mean: f64, dispersion: Option<f64>) -> Self {
        Self { mean, dispersion }
    }

    fn validate(&self) -> Result<(), String> {
        if !(self.mean.is_finite() && self.mean >= 0.0) {
            return Err(format!("count mean {} must be finite and non-negative", self.mean));
        }
        if self.dispersion.is_some_and(|k| !(k.is_finite() && k > 0.0)) {
            return Err("dispersion must be positive".into());
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        if self.mean <= 0.0 {
            return 0;
        }
        let lambda = match self.dispersion {
            Some(k) => Gamma::new(k, self.mean / k).expect("validated").sample(rng),
            None => self.mean,
        };
        if lambda <= 0.0 {
            return 0;
        }
        let draw: f64 = Poisson::new(lambda).expect("positive rate").sample(rng);
        draw.max(0.0).round() as u64
    }
}

fn default_axes(mode: BlockMode) -> [CountDistribution; 3] {
    let axis1 = match mode {
        BlockMode::Sleep => 0.0,
        BlockMode::Awake(IntensityLevel::Sedentary) => 20.0,
        BlockMode::Awake(IntensityLevel::Light) => 900.0,
        BlockMode::Awake(IntensityLevel::Moderate) => 3500.0,
        BlockMode::Awake(IntensityLevel::Vigorous) => 7500.0,
    };
    [
        CountDistribution::new(axis1, Some(20.0)),
        CountDistribution::new(axis1 * 0.8, Some(20.0)),
        CountDistribution::new(axis1 * 0.6, Some(20.0)),
    ]
}

fn default_steps(mode: BlockMode) -> CountDistribution {
    let mean = match mode {
        BlockMode::Sleep | BlockMode::Awake(IntensityLevel::Sedentary) => 0.0,
        BlockMode::Awake(IntensityLevel::Light) => 30.0,
        BlockMode::Awake(IntensityLevel::Moderate) => 90.0,
        BlockMode::Awake(IntensityLevel::Vigorous) => 150.0,
    };
    CountDistribution::new(mean, None)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub mode: BlockMode,
    pub duration_min: usize,
    /// Per-axis distributions; defaults depend on the mode. Ignored for sleep.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counts: Option<[CountDistribution; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<CountDistribution>,
}

impl Block {
    pub fn new(mode: BlockMode, duration_min: usize) -> Self {
        Self {
            mode,
            duration_min,
            counts: None,
            steps: None,
        }
    }

    pub fn awake(level: IntensityLevel, duration_min: usize, axis1_mean: f64) -> Self {
        let mut b = Self::new(BlockMode::Awake(level), duration_min);
        b.counts = Some([
            CountDistribution::new(axis1_mean, Some(20.0)),
            CountDistribution::new(axis1_mean * 0.8, Some(20.0)),
            CountDistribution::new(axis1_mean * 0.6, Some(20.0)),
        ]);
        b
    }

    fn axes(&self) -> [CountDistribution; 3] {
        self.counts.unwrap_or_else(|| default_axes(self.mode))
    }

    fn step_distribution(&self) -> CountDistribution {
        self.steps.unwrap_or_else(|| default_steps(self.mode))
    }
}

fn default_start() -> DateTime<FixedOffset> {
    DateTime::parse_from_rfc3339("2024-01-01T00:00:00+00:00").expect("constant")
}

fn default_repeat() -> usize {
    1
}

fn default_age() -> u32 {
    30
}

fn default_sleep_inclinometer() -> Inclinometer {
    Inclinometer::Off
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayProfile {
    pub schedule: Vec<Block>,
    /// Probability per sleep epoch of starting a short movement bout.
    #[serde(default)]
    pub noise: f64,
    pub seed: u64,
    /// Number of times the schedule is laid end to end.
    #[serde(default = "default_repeat")]
    pub repeat: usize,
    #[serde(default = "default_start")]
    pub start: DateTime<FixedOffset>,
    #[serde(default = "default_sleep_inclinometer")]
    pub sleep_inclinometer: Inclinometer,
    #[serde(default)]
    pub subject_id: String,
    #[serde(default = "default_age")]
    pub age_years: u32,
}

impl DayProfile {
    pub fn new(schedule: Vec<Block>, seed: u64) -> Self {
        Self {
            schedule,
            noise: 0.0,
            seed,
            repeat: 1,
            start: default_start(),
            sleep_inclinometer: Inclinometer::Off,
            subject_id: String::new(),
            age_years: 30,
        }
    }

    fn blocks(&self) -> impl Iterator<Item = &Block> {
        (0..self.repeat).flat_map(move |_| self.schedule.iter())
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidProfile(m));
        let rules = SleepRuleParams::default();
        if self.schedule.is_empty() || self.repeat == 0 {
            return bad("schedule is empty".into());
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return bad(format!("noise {} is not a probability", self.noise));
        }
        if self.sleep_inclinometer == Inclinometer::Lying {
            tracing::warn!("sleep inclinometer `lying` is rejected by the default candidate predicate");
        }
        for (i, b) in self.schedule.iter().enumerate() {
            if b.duration_min == 0 {
                return bad(format!("block {i} has zero duration"));
            }
            if b.mode == BlockMode::Sleep && b.duration_min <= rules.onset_run {
                return bad(format!(
                    "sleep block {i} lasts {} min; at least {} are needed",
                    b.duration_min,
                    rules.onset_run + 1
                ));
            }
            for d in b.axes().iter().chain(std::iter::once(&b.step_distribution())) {
                d.validate().map_err(SynthError::InvalidProfile)?;
            }
        }
        let total: usize = self.blocks().map(|b| b.duration_min).sum();
        if total < 1440 {
            return bad(format!("schedule covers {total} min, less than one day"));
        }
        // awake time separating consecutive sleep blocks
        let mut awake_since_sleep: Option<usize> = None;
        for b in self.blocks() {
            match b.mode {
                BlockMode::Sleep => {
                    if awake_since_sleep.is_some_and(|a| a < rules.awakening_gap) {
                        return bad(format!(
                            "sleep blocks separated by less than {} min of wake",
                            rules.awakening_gap
                        ));
                    }
                    awake_since_sleep = Some(0);
                }
                BlockMode::Awake(_) => {
                    if let Some(a) = awake_since_sleep.as_mut() {
                        *a += b.duration_min;
                    }
                }
            }
        }
        Ok(())
    }
}

/// One planted block in epoch coordinates, `start..end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannedBlock {
    pub start: usize,
    pub end: usize,
    pub mode: BlockMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Sleep periods as the detector should report them with noise-free data.
    pub periods: Vec<SleepPeriod>,
    /// Boundaries between adjacent awake blocks of different modes.
    pub change_points: Vec<usize>,
    pub mode_schedule: Vec<PlannedBlock>,
}

fn awake_epoch(ts: DateTime<FixedOffset>, block: &Block, level: IntensityLevel, rng: &mut ChaCha8Rng) -> Epoch {
    let [a1, a2, a3] = block.axes();
    let mut e = Epoch {
        timestamp: ts,
        axis1: a1.sample(rng),
        axis2: a2.sample(rng),
        axis3: a3.sample(rng),
        steps: block.step_distribution().sample(rng),
        inclinometer: if level == IntensityLevel::Sedentary {
            Inclinometer::Sitting
        } else {
            Inclinometer::Standing
        },
    };
    // an all-zero awake epoch would pass as a sleep candidate
    if !e.has_movement() && e.steps == 0 {
        e.axis1 = 1;
    }
    e
}

/// Draws the recording described by `profile`.
pub fn generate(profile: &DayProfile) -> Result<(EpochSeries, GroundTruth), SynthError> {
    profile.validate()?;
    let rules = SleepRuleParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);
    let stride = Duration::seconds(DEFAULT_EPOCH_SECS as i64);
    let mut epochs: Vec<Epoch> = Vec::new();
    let mut schedule = Vec::new();
    let mut periods = Vec::new();
    let mut change_points = Vec::new();

    for block in profile.blocks() {
        let start = epochs.len();
        let end = start + block.duration_min;
        let ts = |i: usize| profile.start + stride * i as i32;
        match block.mode {
            BlockMode::Sleep => {
                let mut i = start;
                while i < end {
                    epochs.push(Epoch {
                        inclinometer: profile.sleep_inclinometer,
                        ..Epoch::zero(ts(i))
                    });
                    i += 1;
                }
                plant_noise(&mut epochs[start..end], profile.noise, rules.onset_run, &mut rng);
                periods.push(SleepPeriod {
                    onset_index: start,
                    awakening_index: end - 1,
                    truncated: false,
                });
            }
            BlockMode::Awake(level) => {
                if schedule
                    .last()
                    .is_some_and(|p: &PlannedBlock| p.mode != BlockMode::Sleep && p.mode != block.mode)
                {
                    change_points.push(start);
                }
                for i in start..end {
                    let e = awake_epoch(ts(i), block, level, &mut rng);
                    epochs.push(e);
                }
            }
        }
        match schedule.last_mut() {
            Some(p) if p.mode == block.mode && p.end == start => p.end = end,
            _ => schedule.push(PlannedBlock {
                start,
                end,
                mode: block.mode,
            }),
        }
    }
    if let Some(last) = periods.last_mut() {
        // fewer than `awakening_gap` awake epochs after the final sleep block
        if epochs.len() - last.awakening_index - 1 < rules.awakening_gap {
            last.truncated = true;
        }
    }
    let series = EpochSeries::new(
        epochs,
        DEFAULT_EPOCH_SECS,
        SubjectMeta {
            subject_id: profile.subject_id.clone(),
            age_years: profile.age_years,
        },
    );
    Ok((
        series,
        GroundTruth {
            periods,
            change_points,
            mode_schedule: schedule,
        },
    ))
}

/// Movement bouts of 1-4 epochs inside a sleep block. They stay clear of the
/// first `onset_run` epochs and the last epoch, and never touch each other, so
/// onset, awakening and WASO (which ignores bouts of 5 or fewer) are unchanged.
fn plant_noise(sleep: &mut [Epoch], p: f64, onset_run: usize, rng: &mut ChaCha8Rng) {
    if p <= 0.0 {
        return;
    }
    let n = sleep.len();
    let mut i = onset_run;
    while i + 1 < n {
        if rng.random_bool(p) {
            let len = rng.random_range(1..=4).min(n - 1 - i);
            for e in &mut sleep[i..i + len] {
                e.axis1 = rng.random_range(5..60);
                e.inclinometer = Inclinometer::Sitting;
            }
            i += len + 1;
        } else {
            i += 1;
        }
    }
}
