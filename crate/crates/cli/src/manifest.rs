//! Run provenance: digests of every input and output plus the effective
//! parameters and per-stage wall-clock times.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

pub fn digest_file(path: &Path, shown_as: &str) -> std::io::Result<FileDigest> {
    let data = fs::read(path)?;
    Ok(FileDigest {
        path: shown_as.to_string(),
        bytes: data.len() as u64,
        sha256: hex::encode(Sha256::digest(&data)),
    })
}

#[derive(Debug, Default)]
pub struct Stopwatch {
    timings_ms: BTreeMap<String, f64>,
}

impl Stopwatch {
    pub fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        let ms = start.elapsed().as_secs_f64() * 1e3;
        tracing::info!(stage, ms, "stage finished");
        *self.timings_ms.entry(stage.to_string()).or_default() += ms;
        out
    }

    pub fn into_map(self) -> BTreeMap<String, f64> {
        self.timings_ms
    }
}

#[derive(Debug, Serialize)]
pub struct RunManifest<P: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: Vec<String>,
    pub parameters: P,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    /// Wall-clock milliseconds; the only field that varies between
    /// identical runs.
    pub timings_ms: BTreeMap<String, f64>,
}

impl<P: Serialize> RunManifest<P> {
    pub fn new(parameters: P) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: std::env::args().collect(),
            parameters,
            inputs: Vec::new(),
            outputs: Vec::new(),
            timings_ms: BTreeMap::new(),
        }
    }
}
