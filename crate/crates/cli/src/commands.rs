use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::io::Write;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use annoplan::corpus::{
    dataset_stats, filter_long_answers, load_squad_json_as, save_squad_json, split_by_context, to_squad_json,
    Dataset, LoadReport, PoolState, Role, Sample, SplitRatios,
};
use annoplan::fsutil::write_atomic;
use annoplan::metrics::EvalResult;
use annoplan::rng::{derive_seed, stream};
use annoplan::scorer::{
    protocol_check, score_pool, BaselineConfig, BaselineScorer, ExternalConfig, ExternalScorer, ScorerHandle, Trainer,
};
use annoplan::simulation::{
    compare_strategies, export_report, load_learning_curve, run_full_reference, run_simulation_with,
    saturation_report, EvalSets, LearningCurve, Metric, SaturationReport,
};
use annoplan::strategies::{
    difficulty_labels, save_worklist_csv, select_context_roundrobin, select_difficulty, select_per_context_quota,
    select_random, select_uncertainty, uncertainty_scores, worklist_rows, write_worklist_csv, ContextCycle,
    StrategySpec, WorklistRow,
};
use annoplan::synthetic::planted_benchmark_with;
use annoplan::{BaselineModel, Error, Result};

use crate::args::{Cli, Command, Format, SelectArgs, StrategyArg};
use crate::config::{DatasetEntry, RunConfig};
use crate::{EXIT_DATA, EXIT_OK, EXIT_SCORER};

const REFERENCE_CACHE: &str = "reference.json";

pub(crate) fn dispatch(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    match &cli.command {
        Command::Validate { dataset } => validate(cli, dataset, out, err),
        Command::Stats { datasets } => stats(cli, datasets, out),
        Command::Simulate { config } => simulate(cli, config, out),
        Command::Select(args) => select(cli, args, out, err),
        Command::ProtocolCheck { timeout, command } => check_protocol(cli, command, *timeout, out, err),
        Command::Report {
            curves,
            threshold,
            metric,
        } => report(cli, curves, *threshold, metric.map(Metric::from), out),
        Command::Generate { output_dir, contexts } => generate(cli, output_dir, *contexts, out),
        Command::Train { dataset, output } => train(cli, dataset, output, out),
    }
}

fn stdout_io(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn print_json(out: &mut dyn Write, value: &impl Serialize) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value).map_err(|e| Error::io("<stdout>", e.into()))?;
    writeln!(out).map_err(stdout_io)
}

fn print_csv<R: Serialize>(out: &mut dyn Write, rows: &[R], header: &[&str]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(!rows.is_empty()).from_writer(&mut *out);
    if rows.is_empty() {
        w.write_record(header)?;
    }
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(stdout_io)
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "dataset".into())
}

fn load(path: &Path, name: Option<&str>, role: Role) -> Result<LoadReport> {
    let name = name.map(str::to_string).unwrap_or_else(|| stem(path));
    load_squad_json_as(path, &name, role)
}

/// Loads a dataset, logging but tolerating dropped samples.
fn load_lenient(path: &Path, name: Option<&str>, role: Role) -> Result<Dataset> {
    let report = load(path, name, role)?;
    if !report.dropped.is_empty() {
        log::warn!("{}: dropped {} samples", path.display(), report.dropped.len());
    }
    Ok(report.dataset)
}

#[derive(Serialize)]
struct ValidateRow {
    dataset: String,
    samples: usize,
    contexts: usize,
    dropped: usize,
}

fn validate(cli: &Cli, path: &Path, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let report = load(path, None, Role::Train)?;
    let row = ValidateRow {
        dataset: report.dataset.name.clone(),
        samples: report.dataset.len(),
        contexts: report.dataset.contexts().len(),
        dropped: report.dropped.len(),
    };
    match cli.format {
        Format::Json => print_json(
            out,
            &serde_json::json!({
                "dataset": row.dataset,
                "samples": row.samples,
                "contexts": row.contexts,
                "dropped": report.dropped,
            }),
        )?,
        Format::Csv => print_csv(out, &[&row], &[])?,
    }
    for d in &report.dropped {
        let _ = writeln!(err, "dropped {}: {:?}", d.sample_id, d.reason);
    }
    Ok(if report.dropped.is_empty() { EXIT_OK } else { EXIT_DATA })
}

#[derive(Serialize)]
struct StatsRow {
    dataset: String,
    samples: usize,
    contexts: usize,
    mean_questions_per_context: Option<f64>,
    max_questions_per_context: usize,
    mean_answer_tokens: Option<f64>,
}

fn stats(cli: &Cli, paths: &[std::path::PathBuf], out: &mut dyn Write) -> Result<i32> {
    let mut rows = Vec::new();
    for path in paths {
        let ds = load_lenient(path, None, Role::Train)?;
        let s = dataset_stats(&ds);
        rows.push(StatsRow {
            dataset: ds.name.clone(),
            samples: s.n_samples,
            contexts: s.n_contexts,
            mean_questions_per_context: s.mean_questions_per_context,
            max_questions_per_context: s.max_questions_per_context,
            mean_answer_tokens: s.mean_answer_tokens,
        });
    }
    match cli.format {
        Format::Json => print_json(out, &rows)?,
        Format::Csv => print_csv(out, &rows, &[])?,
    }
    Ok(EXIT_OK)
}

#[derive(Serialize, Deserialize)]
struct ReferenceCache {
    fingerprint: String,
    reference: IndexMap<String, EvalResult>,
}

/// Identifies everything a full-data reference depends on.
fn reference_fingerprint(train: &Dataset, sets: &EvalSets<'_>, config: &RunConfig, seed: u64) -> String {
    let mut h = DefaultHasher::new();
    to_squad_json(train).hash(&mut h);
    to_squad_json(sets.holdout).hash(&mut h);
    for g in sets.generalization {
        to_squad_json(g).hash(&mut h);
    }
    serde_json::to_string(&config.scorer).unwrap_or_default().hash(&mut h);
    seed.hash(&mut h);
    format!("{:016x}", h.finish())
}

fn cached_reference(
    path: &Path,
    fingerprint: &str,
    compute: impl FnOnce() -> Result<IndexMap<String, EvalResult>>,
) -> Result<IndexMap<String, EvalResult>> {
    if let Ok(text) = std::fs::read_to_string(path) {
        match serde_json::from_str::<ReferenceCache>(&text) {
            Ok(cache) if cache.fingerprint == fingerprint => return Ok(cache.reference),
            _ => log::info!("{}: stale reference cache", path.display()),
        }
    }
    let reference = compute()?;
    let cache = ReferenceCache {
        fingerprint: fingerprint.to_string(),
        reference: reference.clone(),
    };
    write_json_file(path, &cache)?;
    Ok(reference)
}

fn write_json_file(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

fn load_entry(entry: &DatasetEntry) -> Result<Dataset> {
    load_lenient(&entry.path, entry.name.as_deref(), entry.role)
}

#[derive(Serialize)]
struct SummaryRow {
    strategy: String,
    eval_set: String,
    generalization: bool,
    metric: Metric,
    reference: f64,
    saturation_fraction: Option<f64>,
    falls_back_below: bool,
}

fn summary_rows(reports: &[SaturationReport]) -> Vec<SummaryRow> {
    reports
        .iter()
        .flat_map(|r| {
            r.entries.iter().map(|e| SummaryRow {
                strategy: r.strategy.clone(),
                eval_set: e.eval_set.clone(),
                generalization: e.generalization,
                metric: e.metric,
                reference: e.reference,
                saturation_fraction: e.saturation_fraction,
                falls_back_below: e.falls_back_below,
            })
        })
        .collect()
}

fn simulate(cli: &Cli, config_path: &Path, out: &mut dyn Write) -> Result<i32> {
    let config = RunConfig::load(config_path)?;
    let mut train = None;
    let mut holdout = None;
    let mut generalization = Vec::new();
    for entry in &config.datasets {
        let mut ds = load_entry(entry)?;
        if let Some(max) = config.max_answer_tokens {
            ds = filter_long_answers(&ds, max);
        }
        match entry.role {
            Role::Train => train = Some(ds),
            Role::Dev => holdout = Some(ds),
            Role::Test => generalization.push(ds),
        }
    }
    let train = train.expect("validated: one train set");
    let (train, holdout) = match holdout {
        Some(h) => (train, h),
        None => {
            let h = config.holdout_fraction;
            let (t, d, _) = split_by_context(
                &train,
                SplitRatios([1.0 - h, h, 0.0]),
                derive_seed(cli.seed, stream::HOLDOUT_SPLIT, 0),
            )?;
            (t, d)
        }
    };
    let sets = EvalSets::new(&holdout, &generalization);
    let sim_configs = config.simulation_configs(cli.seed);

    std::fs::create_dir_all(&config.output_dir).map_err(|e| Error::io(&config.output_dir, e))?;
    let mut datasets = vec![&train, &holdout];
    datasets.extend(generalization.iter());
    let trainer = Trainer::from_config(&config.scorer, &datasets)?;
    let reference_seed = sim_configs[0].seeds[0];
    let fingerprint = reference_fingerprint(&train, &sets, &config, reference_seed);
    let reference = cached_reference(&config.output_dir.join(REFERENCE_CACHE), &fingerprint, || {
        run_full_reference(&train, &sets, &trainer, reference_seed)
    })?;

    let mut curves: Vec<LearningCurve> = Vec::new();
    let mut reports = Vec::new();
    for sim in &sim_configs {
        log::info!("simulating {}", sim.strategy);
        let curve = run_simulation_with(&train, &sets, sim, &trainer, reference.clone())?;
        let report = saturation_report(&curve, sim.saturation_threshold)?;
        export_report(&curve, &report, &config.output_dir, &sim.strategy.to_string())?;
        curves.push(curve);
        reports.push(report);
    }
    let comparison = if curves.len() > 1 && curves.iter().any(|c| c.config.strategy == StrategySpec::Random) {
        let rows = compare_strategies(&curves, config.metric, config.saturation_threshold)?;
        write_json_file(&config.output_dir.join("comparison.json"), &rows)?;
        Some(rows)
    } else {
        None
    };

    match cli.format {
        Format::Json => print_json(
            out,
            &serde_json::json!({ "saturation": reports, "comparison": comparison }),
        )?,
        Format::Csv => print_csv(out, &summary_rows(&reports), &[])?,
    }
    Ok(EXIT_OK)
}

fn strategy_spec(args: &SelectArgs) -> Result<StrategySpec> {
    let within = args.within.into();
    let spec = match args.strategy {
        StrategyArg::Random => StrategySpec::Random,
        StrategyArg::Uncertainty => StrategySpec::Uncertainty,
        StrategyArg::Difficulty => StrategySpec::Difficulty,
        StrategyArg::ContextRoundrobin => StrategySpec::ContextRoundrobin { within },
        StrategyArg::PerContextQuota => {
            let (Some(questions_per_context), Some(n_contexts)) = (args.questions_per_context, args.n_contexts) else {
                return Err(Error::Config(
                    "per-context-quota needs --questions-per-context and --n-contexts".into(),
                ));
            };
            StrategySpec::PerContextQuota {
                questions_per_context,
                n_contexts,
                within,
            }
        }
    };
    spec.validate()?;
    Ok(spec)
}

fn selection_handle(cli: &Cli, args: &SelectArgs, pool: &Dataset) -> Result<Option<ScorerHandle>> {
    if let Some(path) = &args.model {
        return Ok(Some(ScorerHandle::Baseline(BaselineScorer::new(BaselineModel::load(path)?))));
    }
    if let Some(path) = &args.train_on {
        let labeled = load_lenient(path, None, Role::Train)?;
        let trainer = Trainer::baseline(BaselineConfig::default(), &[&labeled, pool]);
        return trainer
            .fit(&labeled, |_| true, derive_seed(cli.seed, stream::RETRAIN, 0))
            .map(Some);
    }
    if let Some(program) = &args.backend {
        let mut command = vec![program.clone()];
        command.extend(args.backend_args.iter().cloned());
        let scorer = ExternalScorer::spawn(ExternalConfig::new(command), BaselineConfig::default().max_span_len)?;
        return Ok(Some(ScorerHandle::External(std::sync::Arc::new(scorer))));
    }
    Ok(None)
}

fn select(cli: &Cli, args: &SelectArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let spec = strategy_spec(args)?;
    let k = match (&spec, args.k) {
        (StrategySpec::PerContextQuota { .. }, _) => 0,
        (_, Some(k)) if k > 0 => k,
        _ => return Err(Error::Config(format!("--k must be a positive integer for {spec}"))),
    };
    let ds = load_lenient(&args.dataset, None, Role::Train)?;
    let handle = if spec.is_model_guided() {
        match selection_handle(cli, args, &ds)? {
            Some(h) => Some(h),
            None => {
                return Err(Error::Config(format!(
                    "{spec} needs a scorer: pass --model, --train-on or --backend"
                )))
            }
        }
    } else {
        None
    };
    let pool = PoolState::new(&ds);
    let scores = match &handle {
        Some(h) => {
            let samples: Vec<&Sample> = ds.samples().iter().collect();
            score_pool(h, &samples, &ds)?
        }
        None => Default::default(),
    };
    let seed = cli.seed;
    let batch = match &spec {
        StrategySpec::Random => select_random(&pool, k, seed, 0),
        StrategySpec::Uncertainty => select_uncertainty(&pool, k, &uncertainty_scores(&scores), 0)?,
        StrategySpec::Difficulty => select_difficulty(&pool, k, &difficulty_labels(&scores), seed, 0)?,
        StrategySpec::ContextRoundrobin { within } => {
            let mut cycle = ContextCycle::new(&ds, seed);
            let u = handle.as_ref().map(|_| uncertainty_scores(&scores));
            select_context_roundrobin(&pool, k, &ds, &mut cycle, *within, seed, 0, u.as_ref())?
        }
        StrategySpec::PerContextQuota {
            questions_per_context,
            n_contexts,
            within,
        } => {
            let u = handle.as_ref().map(|_| uncertainty_scores(&scores));
            let q = select_per_context_quota(&ds, *questions_per_context, *n_contexts, *within, seed, u.as_ref())?;
            if q.shortfall > 0 {
                let _ = writeln!(err, "warning: quota short by {} samples", q.shortfall);
            }
            q.batch
        }
    };
    let rows: Vec<WorklistRow> = worklist_rows(&batch, &ds);
    match (&args.output, cli.format) {
        (Some(path), _) => save_worklist_csv(&rows, path)?,
        (None, Format::Csv) => write_worklist_csv(&rows, &mut *out)?,
        (None, Format::Json) => print_json(out, &rows)?,
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct CheckRow<'a> {
    check: &'a str,
    message: &'a str,
    line: &'a str,
}

fn check_protocol(
    cli: &Cli,
    command: &[String],
    timeout: u64,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32> {
    let mut config = ExternalConfig::new(command.to_vec());
    config.timeout_secs = timeout;
    let report = protocol_check(&config);
    match cli.format {
        Format::Json => print_json(out, &report)?,
        Format::Csv => {
            let rows: Vec<CheckRow<'_>> = report
                .violations
                .iter()
                .map(|v| CheckRow {
                    check: &v.check,
                    message: &v.message,
                    line: &v.line,
                })
                .collect();
            print_csv(out, &rows, &["check", "message", "line"])?;
        }
    }
    for w in &report.warnings {
        let _ = writeln!(err, "warning: {w}");
    }
    for v in &report.violations {
        let _ = writeln!(err, "violation [{}]: {}", v.check, v.message);
        let _ = writeln!(err, "  offending line: {}", v.line);
    }
    Ok(if report.passed() { EXIT_OK } else { EXIT_SCORER })
}

fn report(
    cli: &Cli,
    paths: &[std::path::PathBuf],
    threshold: Option<f64>,
    metric: Option<Metric>,
    out: &mut dyn Write,
) -> Result<i32> {
    let curves: Vec<LearningCurve> = paths.iter().map(load_learning_curve).collect::<Result<_>>()?;
    let threshold = threshold.unwrap_or(curves[0].config.saturation_threshold);
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::Config(format!("--threshold must be in (0, 1], got {threshold}")));
    }
    let metric = metric.unwrap_or(curves[0].config.metric);
    let reports: Vec<SaturationReport> = curves
        .iter()
        .map(|c| saturation_report(c, threshold))
        .collect::<Result<_>>()?;
    let comparison = if curves.iter().any(|c| c.config.strategy == StrategySpec::Random) {
        Some(compare_strategies(&curves, metric, threshold)?)
    } else {
        None
    };
    match cli.format {
        Format::Json => print_json(
            out,
            &serde_json::json!({ "saturation": reports, "comparison": comparison }),
        )?,
        Format::Csv => match &comparison {
            Some(rows) => print_csv(out, rows, &[])?,
            None => print_csv(out, &summary_rows(&reports), &[])?,
        },
    }
    Ok(EXIT_OK)
}

fn generate(cli: &Cli, dir: &Path, contexts: Option<usize>, out: &mut dyn Write) -> Result<i32> {
    let n = contexts.unwrap_or(200);
    if n < 3 {
        return Err(Error::Config("--contexts must be at least 3".into()));
    }
    let bench = planted_benchmark_with(cli.seed, n)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::new();
    for (ds, file) in [
        (&bench.train, "planted-train.json"),
        (&bench.holdout, "planted-holdout.json"),
        (&bench.generalization, "planted-ood.json"),
    ] {
        save_squad_json(ds, dir.join(file))?;
        entries.push(serde_json::json!({ "path": file, "role": ds.role, "name": ds.name }));
    }
    let config = serde_json::json!({
        "datasets": entries,
        "output_dir": "out",
        "strategies": [{"kind": "random"}, {"kind": "uncertainty"}, {"kind": "difficulty"}],
        "batch_fraction": 0.05,
        "seeds": [0, 1, 2],
    });
    write_json_file(&dir.join("simulate.json"), &config)?;
    writeln!(out, "{}", dir.join("simulate.json").display()).map_err(stdout_io)?;
    Ok(EXIT_OK)
}

fn train(cli: &Cli, path: &Path, output: &Path, out: &mut dyn Write) -> Result<i32> {
    let ds = load_lenient(path, None, Role::Train)?;
    let trainer = Trainer::baseline(BaselineConfig::default(), &[&ds]);
    let ScorerHandle::Baseline(scorer) = trainer.fit(&ds, |_| true, derive_seed(cli.seed, stream::RETRAIN, 0))? else {
        unreachable!("baseline trainer yields a baseline scorer");
    };
    scorer.model.save(output)?;
    writeln!(out, "{}", output.display()).map_err(stdout_io)?;
    Ok(EXIT_OK)
}
