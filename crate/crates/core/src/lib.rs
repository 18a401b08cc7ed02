//! Automated activity recognition over minute-epoch actigraphy.
//!
//! The pipeline runs in a fixed order: [`ingest`] parses and validates epoch
//! records, [`cutpoints`] labels each epoch with an intensity level,
//! [`sleepdetect`] finds sleep periods and their clinical metrics,
//! [`segment`] links each sleep period to the awake span before it,
//! [`changepoint`] splits every awake span with energy statistics,
//! [`modes`] smooths intensity labels over the resulting intervals and
//! [`features`] turns each segment into a model row. [`models`] holds the
//! classifiers and their evaluation; [`synth`] produces recordings with known
//! ground truth. [`pipeline`] wires the stages together for one recording.

pub mod changepoint;
pub mod cutpoints;
pub mod features;
pub mod ingest;
pub mod models;
pub mod modes;
pub mod pipeline;
pub mod segment;
pub mod sleepdetect;
pub mod synth;

mod seed;

pub use cutpoints::IntensityLevel;
pub use ingest::{Epoch, EpochSeries, Inclinometer, SubjectMeta, ValidatedSeries};
