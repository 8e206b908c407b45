//! The replay loop: stream, select, retrain, evaluate, report.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use memento::predictor::{logscore, OraclePredictor, UniformPredictor};
use memento::record;
use memento::{Predictor, PredictorKind, ReplayMemory, Sample, SelectionStrategy, StrategyKind, Task};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{BbdrMode, ConfigError, RetrainPolicy, RunConfig, Source};
use crate::metrics;
use crate::workload::{inject_noise, ScenarioSpec};
use crate::HarnessError;

/// Samples per iteration when replaying a record file.
pub const DEFAULT_INPUT_CHUNK: usize = 10_000;

#[derive(Clone, Debug, PartialEq)]
pub struct IterationReport {
    pub iteration: usize,
    /// Memory samples per class; noise samples belong to no class.
    pub class_counts: Vec<usize>,
    pub noise_count: usize,
    pub retrained: bool,
    pub rci: f64,
    pub balanced_accuracy: Option<f64>,
    pub p99_error: Option<f64>,
    pub mean_logscore: Option<f64>,
    pub p1_logscore: Option<f64>,
    pub selection_seconds: f64,
}

pub struct RunResult {
    pub reports: Vec<IterationReport>,
    pub memory: ReplayMemory,
}

enum Feed {
    Scenario(ScenarioSpec),
    Input(Vec<Vec<Sample>>),
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn scenario_spec(config: &RunConfig, kind: crate::workload::ScenarioKind) -> ScenarioSpec {
    let mut spec = ScenarioSpec::new(kind, config.selection.seed);
    if let Some(dim) = config.feature_dim {
        spec = spec.with_feature_dim(dim);
    }
    if let Some(n) = config.iterations {
        spec.iterations = n;
    }
    if let Some(n) = config.samples_per_iteration {
        spec.samples_per_iteration = n;
    }
    spec.stationary = config.stationary;
    if let Some(margin) = config.noise_margin {
        spec.noise_margin = margin;
    }
    spec
}

/// The scenario a config describes, if it names one.
pub fn scenario_for(config: &RunConfig) -> Result<Option<ScenarioSpec>, HarnessError> {
    Ok(match config.source()? {
        Source::Scenario(kind) => Some(scenario_spec(config, kind)),
        Source::Input(_) => None,
    })
}

fn read_input(path: &Path, config: &RunConfig) -> Result<Vec<Vec<Sample>>, HarnessError> {
    let file = File::open(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
    let samples = record::read_samples(BufReader::new(file))?;
    let chunk = config.samples_per_iteration.unwrap_or(DEFAULT_INPUT_CHUNK).max(1);
    let mut feed: Vec<Vec<Sample>> = samples.chunks(chunk).map(<[Sample]>::to_vec).collect();
    if let Some(n) = config.iterations {
        feed.truncate(n);
    }
    Ok(feed)
}

/// Independent bootstrap resamples of the training set.
fn bootstrap_committee<R: Rng + ?Sized>(
    training: &[Sample],
    kind: PredictorKind,
    size: usize,
    bins: usize,
    rng: &mut R,
) -> memento::Result<Vec<Box<dyn Predictor>>> {
    (0..size)
        .map(|_| {
            let resample: Vec<Sample> = (0..training.len())
                .map(|_| training[rng.random_range(0..training.len())].clone())
                .collect();
            kind.fit(&resample, bins)
        })
        .collect()
}

struct Evaluation {
    balanced_accuracy: Option<f64>,
    p99_error: Option<f64>,
    mean_logscore: Option<f64>,
    p1_logscore: Option<f64>,
}

fn evaluate(
    model: &dyn Predictor,
    eval: &[Sample],
    task: Task,
    classes: usize,
    spec: Option<&ScenarioSpec>,
) -> Result<Evaluation, HarnessError> {
    if eval.is_empty() {
        return Ok(Evaluation {
            balanced_accuracy: None,
            p99_error: None,
            mean_logscore: None,
            p1_logscore: None,
        });
    }
    let predictions = eval
        .iter()
        .map(|s| model.predict_sample(s))
        .collect::<memento::Result<Vec<_>>>()?;
    let scores: Vec<f64> = predictions
        .iter()
        .zip(eval)
        .map(|(p, s)| logscore(p, s.output_bin))
        .collect();
    let (mean, p1) = metrics::logscore_summary(&scores)?;

    let mut out = Evaluation {
        balanced_accuracy: None,
        p99_error: None,
        mean_logscore: Some(mean),
        p1_logscore: Some(p1),
    };
    let Some(spec) = spec else { return Ok(out) };
    match task {
        Task::Classification => {
            let predicted: Vec<usize> = predictions.iter().map(|p| p.mode().0).collect();
            let truth: Vec<usize> = eval.iter().map(|s| s.output_bin).collect();
            out.balanced_accuracy = Some(metrics::balanced_accuracy(&predicted, &truth, classes)?);
        }
        Task::Regression => {
            let edges = spec.edges();
            let predicted: Vec<f64> = predictions.iter().map(|p| edges.expected_value(p)).collect();
            let truth: Vec<f64> = eval.iter().map(|s| s.raw_output).collect();
            out.p99_error = Some(metrics::p99_abs_error(&predicted, &truth)?);
        }
    }
    Ok(out)
}

fn write_snapshot(dir: &Path, iteration: usize, memory: &ReplayMemory) -> Result<(), HarnessError> {
    let path = dir.join(format!("memory_{iteration:04}.ndjson"));
    let file = File::create(&path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
    let samples: Vec<Sample> = memory.samples().cloned().collect();
    record::write_samples(BufWriter::new(file), &samples)?;
    Ok(())
}

/// Runs the configured experiment. Reports are also written to
/// `output_dir/report.csv` when an output directory is set.
pub fn run(config: &RunConfig) -> Result<RunResult, HarnessError> {
    let feed = match config.source()? {
        Source::Scenario(kind) => {
            let spec = scenario_spec(config, kind);
            spec.validate()?;
            Feed::Scenario(spec)
        }
        Source::Input(path) => Feed::Input(read_input(&path, config)?),
    };
    let (task, bins, classes) = match &feed {
        Feed::Scenario(spec) => (spec.task(), spec.bins(), spec.classes.len()),
        Feed::Input(chunks) => {
            let all = chunks.iter().flatten();
            let bins = all.clone().map(|s| s.output_bin + 1).max().unwrap_or(1);
            let classes = all.filter_map(|s| s.class.map(|c| c + 1)).max().unwrap_or(0);
            (Task::Regression, bins, classes)
        }
    };
    if config.noise_fraction > 0.0 && matches!(feed, Feed::Input(_)) {
        return Err(ConfigError::Value {
            key: "noise_fraction".into(),
            message: "noise injection needs a scenario".into(),
        }
        .into());
    }
    let cfg = config.strategy_config(bins, task);
    cfg.validate()?;
    if let Some(dir) = &config.output_dir {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::Io(format!("{}: {e}", dir.display())))?;
    }

    let mut memory = ReplayMemory::new(cfg.capacity);
    let mut strategy = SelectionStrategy::new(config.strategy, config.params.clone());
    let mut model: Box<dyn Predictor> = Box::new(UniformPredictor::new(cfg.k_pred));
    let oracle = OraclePredictor::new(cfg.k_pred);
    let mut select_rng = stream_rng(cfg.seed, 1);
    let mut noise_rng = stream_rng(cfg.seed, 2);
    let mut eval_rng = stream_rng(cfg.seed, 3);
    let mut committee_rng = stream_rng(cfg.seed, 4);

    let (spec, chunks): (Option<&ScenarioSpec>, Box<dyn Iterator<Item = Vec<Sample>>>) = match &feed {
        Feed::Scenario(spec) => (Some(spec), Box::new(spec.stream()?)),
        Feed::Input(chunks) => (None, Box::new(chunks.clone().into_iter())),
    };
    let noise_model = spec.map(ScenarioSpec::noise_model);

    let mut reports = Vec::new();
    for (iteration, mut samples) in chunks.enumerate() {
        if let Some(model) = &noise_model {
            inject_noise(&mut samples, config.noise_fraction, model, &mut noise_rng)?;
        }
        let replayed = if spec.is_none() { samples.clone() } else { Vec::new() };

        let bbdr: &dyn Predictor = match config.bbdr {
            BbdrMode::Model => model.as_ref(),
            BbdrMode::Oracle => &oracle,
        };
        let started = Instant::now();
        let outcome = strategy.select(&mut memory, samples, &cfg, bbdr, &mut select_rng)?;
        let selection_seconds = started.elapsed().as_secs_f64();

        let retrained = match config.retrain {
            RetrainPolicy::Strategy => outcome.retrain,
            RetrainPolicy::Every(n) => iteration % n == 0,
        };
        if retrained && !memory.is_empty() {
            let training: Vec<Sample> = memory.samples().cloned().collect();
            model = config.predictor.fit(&training, cfg.k_pred)?;
            if strategy.kind == StrategyKind::Qbc {
                let committee = bootstrap_committee(
                    &training,
                    config.predictor,
                    config.committee_size.max(1),
                    cfg.k_pred,
                    &mut committee_rng,
                )?;
                strategy.set_committee(committee);
            }
            memory.remember_training();
            if config.snapshots {
                if let Some(dir) = &config.output_dir {
                    write_snapshot(dir, iteration, &memory)?;
                }
            }
        }

        let eval = match spec {
            Some(spec) => spec.eval_set(iteration, config.eval_per_class, &mut eval_rng),
            None => replayed,
        };
        let scores = evaluate(model.as_ref(), &eval, task, classes, spec)?;

        let mut class_counts = vec![0; classes];
        let mut noise_count = 0;
        for s in memory.samples() {
            match s.class {
                Some(c) if c < classes => class_counts[c] += 1,
                _ if s.noise => noise_count += 1,
                _ => {}
            }
        }
        reports.push(IterationReport {
            iteration,
            class_counts,
            noise_count,
            retrained,
            rci: outcome.rci,
            balanced_accuracy: scores.balanced_accuracy,
            p99_error: scores.p99_error,
            mean_logscore: scores.mean_logscore,
            p1_logscore: scores.p1_logscore,
            selection_seconds,
        });
    }

    if let Some(dir) = &config.output_dir {
        let path = dir.join("report.csv");
        let file = File::create(&path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
        let mut out = BufWriter::new(file);
        write_report(&mut out, &reports, classes, config.record_timing)?;
        out.flush()?;
    }
    Ok(RunResult { reports, memory })
}

fn cell(value: Option<f64>) -> String {
    value.map(|v| v.to_string()).unwrap_or_default()
}

/// One CSV row per iteration. Selection time is written as 0 unless
/// `record_timing` is set, so repeated runs produce identical files.
pub fn write_report<W: Write>(
    out: &mut W,
    reports: &[IterationReport],
    classes: usize,
    record_timing: bool,
) -> std::io::Result<()> {
    let mut header = vec![
        "iteration".to_string(),
        "retrained".into(),
        "rci".into(),
        "balanced_accuracy".into(),
        "p99_error".into(),
        "mean_logscore".into(),
        "p1_logscore".into(),
    ];
    header.extend((0..classes).map(|c| format!("mem_count_class_{c}")));
    header.push("selection_seconds".into());
    writeln!(out, "{}", header.join(","))?;

    for r in reports {
        let mut row = vec![
            r.iteration.to_string(),
            u8::from(r.retrained).to_string(),
            r.rci.to_string(),
            cell(r.balanced_accuracy),
            cell(r.p99_error),
            cell(r.mean_logscore),
            cell(r.p1_logscore),
        ];
        row.extend(r.class_counts.iter().map(usize::to_string));
        row.push(if record_timing { r.selection_seconds.to_string() } else { "0".into() });
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Writes a scenario stream, with optional noise, as sample records.
pub fn write_stream<W: Write>(spec: &ScenarioSpec, noise_fraction: f64, out: W) -> Result<usize, HarnessError> {
    let mut out = BufWriter::new(out);
    let mut noise_rng = stream_rng(spec.seed, 2);
    let model = spec.noise_model();
    let mut written = 0;
    for mut samples in spec.stream()? {
        inject_noise(&mut samples, noise_fraction, &model, &mut noise_rng)?;
        record::write_samples(&mut out, &samples)?;
        written += samples.len();
    }
    out.flush()?;
    Ok(written)
}
