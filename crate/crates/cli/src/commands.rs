use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use rahar::cutpoints::CutPointScale;
use rahar::features::{Dataset, DatasetFilters};
use rahar::ingest::{
    aggregate_epochs, fill_gaps_sedentary_zero, parse_epoch_csv_with_epoch, validate_series, write_epoch_csv,
    SubjectMeta, ValidatedSeries, ValidationIssue,
};
use rahar::models::eval::{roc_svg, write_roc_csv};
use rahar::models::{
    cross_validate, evaluate, predict_scores, train, AdaBoostConfig, Confusion, EvalReport, ForestConfig, LogRegConfig,
    ModelConfig, ModelKind, RocPoint, TrainedModel,
};
use rahar::pipeline::{
    dataset_from_results, process_recording, write_changepoints_csv, write_modes_csv, write_segments_csv,
    write_sleep_json, PipelineConfig, PipelineError, RecordingResult,
};
use rahar::sleepdetect::{CandidatePredicateConfig, SleepRuleParams};
use rahar::synth::{generate, DayProfile};

use crate::args::{Cli, Command, FillGaps, GlobalArgs};
use crate::manifest::{digest_file, RunManifest, Stopwatch};
use crate::{CliError, FailAs, Failure};

pub fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let g = &cli.global;
    match &cli.command {
        Command::Validate(a) => validate(g, &a.input),
        Command::Sleep(io) => {
            let (_, results) = analyze(g, &io.input)?;
            to_sink(io.out.as_deref(), |w| write_sleep_json(&results, w))
        }
        Command::Segment(io) => {
            let (_, results) = analyze(g, &io.input)?;
            to_sink(io.out.as_deref(), |w| write_segments_csv(&results, w))
        }
        Command::Changepoints(io) => {
            let (_, results) = analyze(g, &io.input)?;
            to_sink(io.out.as_deref(), |w| write_changepoints_csv(&results, w))
        }
        Command::Modes(io) => {
            let (_, results) = analyze(g, &io.input)?;
            to_sink(io.out.as_deref(), |w| write_modes_csv(&results, w))
        }
        Command::Features(io) => {
            let (_, results) = analyze(g, &io.input)?;
            let dataset = dataset_from_results(&results, &pipeline_config(g)?).fail_as(Failure::EmptyDataset)?;
            to_sink(io.out.as_deref(), |w| dataset.write_csv(w).map_err(anyhow::Error::from))
        }
        Command::Train { dataset, out } => {
            let dataset = read_dataset(dataset)?;
            let model = fit(g, &dataset)?;
            write_json(out, &model)
        }
        Command::Eval {
            dataset,
            model_file,
            report,
        } => {
            let dataset = read_dataset(dataset)?;
            let model_report = match model_file {
                Some(path) => score_fitted(g, &dataset, path)?,
                None => cross_validated(g, &dataset)?,
            };
            fs::create_dir_all(report)?;
            write_model_report(report, &model_report)?;
            Ok(())
        }
        Command::Run { input, report, train } => run(g, input, report, *train),
        Command::Synth { profile, out, truth } => synth(profile, out, truth.as_deref()),
    }
}

pub fn pipeline_config(g: &GlobalArgs) -> Result<PipelineConfig, CliError> {
    let scale = match &g.scale_file {
        None => CutPointScale::troiano(),
        Some(path) => {
            let name = path.file_stem().map_or("custom".into(), |s| s.to_string_lossy().into_owned());
            let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            CutPointScale::from_csv(&name, file)
                .with_context(|| format!("reading scale {}", path.display()))
                .fail_as(Failure::Parse)?
        }
    };
    let epoch_minutes = g.epoch_secs as usize / 60 * g.aggregate.unwrap_or(1);
    let to_epochs = |minutes: usize| minutes.div_ceil(epoch_minutes.max(1));
    Ok(PipelineConfig {
        scale,
        age_years: Some(g.age),
        axis: g.axis.into(),
        predicate: CandidatePredicateConfig {
            inclinometer_accept: g.inclinometer_accept.iter().copied().collect(),
            ..Default::default()
        },
        sleep: SleepRuleParams {
            truncated_policy: g.truncated.into(),
            min_sleep_epochs: g.min_sleep_min.map(to_epochs),
            ..Default::default()
        },
        signal: g.signal.into(),
        energy: rahar::changepoint::EnergyParams {
            alpha_exp: g.alpha_exp,
            min_segment: g.min_segment,
        },
        n_permutations: g.permutations,
        significance: g.significance,
        seed: g.seed,
        tie_break: g.tie_break.into(),
        feature_source: g.features.into(),
        filters: DatasetFilters {
            exclude_first: !g.keep_first,
            exclude_truncated: true,
            min_awake_epochs: g.min_awake_min.map(to_epochs),
        },
        efficiency_threshold: g.efficiency_threshold,
    })
}

pub fn model_config(g: &GlobalArgs) -> ModelConfig {
    ModelConfig {
        logreg: LogRegConfig {
            l2_lambda: g.l2,
            ..Default::default()
        },
        adaboost: AdaBoostConfig { rounds: g.rounds },
        forest: ForestConfig {
            trees: g.trees,
            mtry: g.mtry,
            ..Default::default()
        },
        seed: g.seed,
    }
}

struct Recording {
    subject_id: String,
    path: PathBuf,
    series: ValidatedSeries,
}

fn input_files(path: &Path) -> Result<Vec<PathBuf>, CliError> {
    if path.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(path)
            .with_context(|| format!("listing {}", path.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "csv"))
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(CliError::new(
                Failure::Parse,
                anyhow!("no .csv files in {}", path.display()),
            ));
        }
        Ok(files)
    } else {
        Ok(vec![path.to_path_buf()])
    }
}

fn describe(issue: &ValidationIssue) -> String {
    serde_json::to_string(issue).unwrap_or_else(|_| format!("{issue:?}"))
}

fn load_recording(g: &GlobalArgs, path: &Path) -> Result<Recording, CliError> {
    let subject_id = path
        .file_stem()
        .map_or("recording".into(), |s| s.to_string_lossy().into_owned());
    let meta = SubjectMeta {
        subject_id: subject_id.clone(),
        age_years: g.age,
    };
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let series = parse_epoch_csv_with_epoch(io::BufReader::new(file), meta, g.epoch_secs)
        .with_context(|| format!("parsing {}", path.display()))
        .fail_as(Failure::Parse)?;
    let validated = match g.fill_gaps {
        None => validate_series(series),
        Some(FillGaps::SedentaryZero) => fill_gaps_sedentary_zero(series).map(|(s, filled)| {
            if filled > 0 {
                tracing::warn!(file = %path.display(), filled, "filled gap epochs with zero counts");
            }
            s
        }),
    };
    let series = validated
        .map_err(|report| {
            let first = report.issues.first().map(describe).unwrap_or_default();
            anyhow!(
                "{} failed validation with {} issue(s), first: {first}",
                path.display(),
                report.issues.len()
            )
        })
        .fail_as(Failure::Validation)?;
    let series = match g.aggregate {
        None | Some(1) => series,
        Some(factor) => {
            let agg = aggregate_epochs(&series, factor).fail_as(Failure::Parse)?;
            if agg.dropped > 0 {
                tracing::warn!(file = %path.display(), dropped = agg.dropped, "dropped trailing epochs of a partial block");
            }
            agg.series
        }
    };
    Ok(Recording {
        subject_id,
        path: path.to_path_buf(),
        series,
    })
}

fn load_all(g: &GlobalArgs, path: &Path) -> Result<Vec<Recording>, CliError> {
    input_files(path)?
        .par_iter()
        .map(|p| load_recording(g, p))
        .collect()
}

fn pipeline_failure(e: PipelineError) -> CliError {
    let failure = match e {
        PipelineError::Feature(_) => Failure::EmptyDataset,
        PipelineError::Io(_) => Failure::Other,
        _ => Failure::Parse,
    };
    CliError::new(failure, e)
}

fn process_all(recordings: &[Recording], cfg: &PipelineConfig) -> Result<Vec<RecordingResult>, CliError> {
    recordings
        .par_iter()
        .map(|r| process_recording(&r.series, &r.subject_id, cfg).map_err(pipeline_failure))
        .collect()
}

fn analyze(g: &GlobalArgs, input: &Path) -> Result<(Vec<Recording>, Vec<RecordingResult>), CliError> {
    let cfg = pipeline_config(g)?;
    let recordings = load_all(g, input)?;
    let results = process_all(&recordings, &cfg)?;
    Ok((recordings, results))
}

fn to_sink<E: Into<anyhow::Error>>(
    out: Option<&Path>,
    write: impl FnOnce(&mut dyn Write) -> Result<(), E>,
) -> Result<(), CliError> {
    match out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
            write(&mut w).map_err(Into::into)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            write(&mut w).map_err(Into::into)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

#[derive(Serialize)]
struct FileReport {
    file: String,
    epochs: usize,
    valid: bool,
    issues: Vec<ValidationIssue>,
}

fn validate(g: &GlobalArgs, input: &Path) -> Result<(), CliError> {
    let mut reports = Vec::new();
    for path in input_files(input)? {
        let file = File::open(&path).with_context(|| format!("opening {}", path.display()))?;
        let series = parse_epoch_csv_with_epoch(io::BufReader::new(file), SubjectMeta::default(), g.epoch_secs)
            .with_context(|| format!("parsing {}", path.display()))
            .fail_as(Failure::Parse)?;
        let epochs = series.len();
        let issues = match validate_series(series) {
            Ok(_) => Vec::new(),
            Err(report) if g.fill_gaps.is_some() && report.only_gaps() => Vec::new(),
            Err(report) => report.issues,
        };
        reports.push(FileReport {
            file: path.display().to_string(),
            epochs,
            valid: issues.is_empty(),
            issues,
        });
    }
    let all_valid = reports.iter().all(|r| r.valid);
    to_sink(None, |w| -> anyhow::Result<()> {
        serde_json::to_writer_pretty(&mut *w, &reports)?;
        writeln!(w)?;
        Ok(())
    })?;
    if all_valid {
        Ok(())
    } else {
        Err(CliError::new(Failure::Validation, anyhow!("validation failed")))
    }
}

fn read_dataset(path: &Path) -> Result<Dataset, CliError> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let dataset = Dataset::read_csv(io::BufReader::new(file))
        .with_context(|| format!("reading {}", path.display()))
        .fail_as(Failure::Parse)?;
    if dataset.is_empty() {
        return Err(CliError::new(
            Failure::EmptyDataset,
            anyhow!("{} has no rows", path.display()),
        ));
    }
    Ok(dataset)
}

fn feature_names(with_awake_min: bool) -> Vec<String> {
    let mut names: Vec<String> = ["frac_sed", "frac_light", "frac_mod", "frac_vig"]
        .map(String::from)
        .to_vec();
    if with_awake_min {
        names.push("awake_min".into());
    }
    names
}

/// A fitted model with the column layout it expects.
#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    feature_names: Vec<String>,
    efficiency_threshold: f64,
    model: TrainedModel,
}

fn fit(g: &GlobalArgs, dataset: &Dataset) -> Result<ModelFile, CliError> {
    let x = dataset.matrix(g.with_awake_min);
    let model = train(g.model.into(), &x, &dataset.targets(), &model_config(g)).fail_as(Failure::Model)?;
    Ok(ModelFile {
        feature_names: feature_names(g.with_awake_min),
        efficiency_threshold: g.efficiency_threshold,
        model,
    })
}

#[derive(Debug, Clone, Serialize)]
struct Metrics {
    auc: f64,
    f1: f64,
    precision: f64,
    recall: f64,
    sensitivity: f64,
    specificity: f64,
    accuracy: f64,
    confusion: Confusion,
}

impl From<&EvalReport> for Metrics {
    fn from(r: &EvalReport) -> Self {
        Self {
            auc: r.auc,
            f1: r.f1,
            precision: r.precision,
            recall: r.recall,
            sensitivity: r.sensitivity,
            specificity: r.specificity,
            accuracy: r.accuracy,
            confusion: r.confusion,
        }
    }
}

#[derive(Debug, Serialize)]
struct ModelReport {
    model_kind: ModelKind,
    hyperparameters: serde_json::Value,
    seed: u64,
    folds: usize,
    class_threshold: f64,
    feature_names: Vec<String>,
    per_fold: Vec<Metrics>,
    pooled: Metrics,
    roc_points: Vec<RocPoint>,
}

fn hyperparameters(kind: ModelKind, cfg: &ModelConfig) -> serde_json::Value {
    let v = match kind {
        ModelKind::LogReg => serde_json::to_value(cfg.logreg),
        ModelKind::AdaBoost => serde_json::to_value(cfg.adaboost),
        ModelKind::RandomForest => serde_json::to_value(cfg.forest),
    };
    v.unwrap_or(serde_json::Value::Null)
}

fn cross_validated(g: &GlobalArgs, dataset: &Dataset) -> Result<ModelReport, CliError> {
    let kind: ModelKind = g.model.into();
    let cfg = model_config(g);
    let cv = cross_validate(
        &dataset.matrix(g.with_awake_min),
        &dataset.targets(),
        kind,
        &cfg,
        g.folds,
        g.seed,
        g.class_threshold,
    )
    .fail_as(Failure::Model)?;
    Ok(ModelReport {
        model_kind: kind,
        hyperparameters: hyperparameters(kind, &cfg),
        seed: g.seed,
        folds: g.folds,
        class_threshold: g.class_threshold,
        feature_names: feature_names(g.with_awake_min),
        per_fold: cv.per_fold.iter().map(Metrics::from).collect(),
        pooled: Metrics::from(&cv.pooled),
        roc_points: cv.pooled.roc_points,
    })
}

fn score_fitted(g: &GlobalArgs, dataset: &Dataset, path: &Path) -> Result<ModelReport, CliError> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file: ModelFile = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", path.display()))
        .fail_as(Failure::Parse)?;
    let with_awake = file.feature_names.len() == 5;
    let scores = predict_scores(&file.model, &dataset.matrix(with_awake)).fail_as(Failure::Model)?;
    let report = evaluate(&scores, &dataset.targets(), g.class_threshold).fail_as(Failure::Model)?;
    let kind = file.model.kind();
    Ok(ModelReport {
        model_kind: kind,
        hyperparameters: hyperparameters(kind, &model_config(g)),
        seed: g.seed,
        folds: 0,
        class_threshold: g.class_threshold,
        feature_names: file.feature_names,
        per_fold: Vec::new(),
        pooled: Metrics::from(&report),
        roc_points: report.roc_points,
    })
}

fn write_model_report(dir: &Path, report: &ModelReport) -> Result<Vec<&'static str>, CliError> {
    write_json(&dir.join("model_report.json"), report)?;
    let mut roc = BufWriter::new(File::create(dir.join("roc.csv"))?);
    write_roc_csv(&report.roc_points, &mut roc)?;
    roc.flush()?;
    let title = format!("ROC, {} (AUC {:.4})", report.model_kind, report.pooled.auc);
    fs::write(dir.join("roc.svg"), roc_svg(&report.roc_points, &title))?;
    Ok(vec!["model_report.json", "roc.csv", "roc.svg"])
}

#[derive(Serialize)]
struct RunParameters {
    pipeline: PipelineConfig,
    model_kind: ModelKind,
    model: ModelConfig,
    folds: usize,
    class_threshold: f64,
    with_awake_min: bool,
    epoch_secs: u32,
    aggregate: Option<usize>,
    fill_gaps: bool,
    train: bool,
}

fn run(g: &GlobalArgs, input: &Path, report: &Path, with_models: bool) -> Result<(), CliError> {
    let cfg = pipeline_config(g)?;
    let mut clock = Stopwatch::default();
    fs::create_dir_all(report).with_context(|| format!("creating {}", report.display()))?;

    let recordings = clock.time("ingest", || load_all(g, input))?;
    let results = clock.time("analysis", || process_all(&recordings, &cfg))?;
    let dataset = clock.time("features", || match dataset_from_results(&results, &cfg) {
        Ok(d) => Ok(d),
        Err(rahar::features::FeatureError::EmptyDataset) => Ok(Dataset::default()),
        Err(e) => Err(CliError::new(Failure::Other, e)),
    })?;

    let mut written: Vec<&'static str> = Vec::new();
    clock.time("write", || -> Result<(), CliError> {
        let file = |name: &str| -> Result<BufWriter<File>, CliError> {
            Ok(BufWriter::new(File::create(report.join(name))?))
        };
        let finish = |mut w: BufWriter<File>| w.flush();
        let mut w = file("sleep.json")?;
        write_sleep_json(&results, &mut w).map_err(pipeline_failure)?;
        finish(w)?;
        let mut w = file("segments.csv")?;
        write_segments_csv(&results, &mut w).map_err(pipeline_failure)?;
        finish(w)?;
        let mut w = file("changepoints.csv")?;
        write_changepoints_csv(&results, &mut w).map_err(pipeline_failure)?;
        finish(w)?;
        let mut w = file("modes.csv")?;
        write_modes_csv(&results, &mut w).map_err(pipeline_failure)?;
        finish(w)?;
        let mut w = file("dataset.csv")?;
        dataset.write_csv(&mut w)?;
        finish(w)?;
        written.extend(["sleep.json", "segments.csv", "changepoints.csv", "modes.csv", "dataset.csv"]);
        Ok(())
    })?;
    if dataset.is_empty() {
        tracing::warn!("no segment passed the dataset filters");
    }

    if with_models {
        if dataset.is_empty() {
            return Err(CliError::new(Failure::EmptyDataset, anyhow!("dataset is empty")));
        }
        let (model_report, model) = clock.time("models", || -> Result<_, CliError> {
            Ok((cross_validated(g, &dataset)?, fit(g, &dataset)?))
        })?;
        written.extend(write_model_report(report, &model_report)?);
        write_json(&report.join("model.json"), &model)?;
        written.push("model.json");
    }

    let mut manifest = RunManifest::new(RunParameters {
        pipeline: cfg,
        model_kind: g.model.into(),
        model: model_config(g),
        folds: g.folds,
        class_threshold: g.class_threshold,
        with_awake_min: g.with_awake_min,
        epoch_secs: g.epoch_secs,
        aggregate: g.aggregate,
        fill_gaps: g.fill_gaps.is_some(),
        train: with_models,
    });
    for r in &recordings {
        manifest.inputs.push(digest_file(&r.path, &r.path.display().to_string())?);
    }
    for name in written {
        manifest.outputs.push(digest_file(&report.join(name), name)?);
    }
    manifest.timings_ms = clock.into_map();
    write_json(&report.join("manifest.json"), &manifest)?;
    tracing::info!(report = %report.display(), recordings = recordings.len(), rows = dataset.len(), "run complete");
    Ok(())
}

fn synth(profile_path: &Path, out: &Path, truth_path: Option<&Path>) -> Result<(), CliError> {
    let text = fs::read_to_string(profile_path).with_context(|| format!("reading {}", profile_path.display()))?;
    let profile: DayProfile = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", profile_path.display()))
        .fail_as(Failure::Parse)?;
    let (series, truth) = generate(&profile).fail_as(Failure::Parse)?;
    let mut w = BufWriter::new(File::create(out).with_context(|| format!("creating {}", out.display()))?);
    write_epoch_csv(&series, &mut w)?;
    w.flush()?;
    if let Some(path) = truth_path {
        write_json(path, &truth)?;
    }
    Ok(())
}
