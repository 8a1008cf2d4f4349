use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use sentaug::augment::{augment_dataset, load_augmentation_dir, write_augmentation, AugmentConfig};
use sentaug::bench::{bench_csv, compare_bench, ranking_csv, run_bench_on, BenchConfig, BenchReport, CommandPredictor};
use sentaug::combine::{build_combination, CombinationName};
use sentaug::corpus::{
    class_distribution, corpus_stats, load_corpus, to_jsonl, write_corpus, Corpus, CorpusFormat, LabelSet, Split,
    TableFormat,
};
use sentaug::fixtures;
use sentaug::llm::{HttpBackend, LlmClient, ResponseCache, API_KEY_ENV};
use sentaug::metrics::{gain_csv, gain_report, report_csv};
use sentaug::profile::DatasetProfile;
use sentaug::prompt::{show_templates, PromptStrategy};
use sentaug::runner::{emit_report, run_grid, ExperimentGrid, ResultStore, RunOptions, STORE_FILE};
use sentaug::train::{evaluate_predictions, ingest_predictions, run_experiment, Predictor, ReferenceTrainer, Trainer};

use crate::config::{AppConfig, BackendChoice};
use crate::{
    AugmentArgs, BenchArgs, Cli, CombineArgs, Command, EvalArgs, FixtureArgs, FixtureKind, IngestArgs, PromptsCommand,
    ReportArgs, RunArgs, TrainArgs, UsageError,
};

pub fn dispatch(cli: &Cli) -> Result<()> {
    if let Command::Prompts(PromptsCommand::Show) = cli.command {
        print!("{}", show_templates());
        return Ok(());
    }
    let cfg = AppConfig::load(cli.config.as_deref())?;
    match &cli.command {
        Command::Prompts(_) => unreachable!(),
        Command::Ingest(a) => ingest(a, cfg),
        Command::Augment(a) => augment(a, cfg),
        Command::Combine(a) => combine(a, cfg),
        Command::Train(a) => train(a, cfg),
        Command::Eval(a) => eval(a, cfg),
        Command::Bench(a) => bench(a, cfg),
        Command::Run(a) => run(a, cfg),
        Command::Report(a) => report(a, cfg),
        Command::Fixture(a) => fixture(a, cfg),
    }
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn label_set(s: &str) -> Result<LabelSet> {
    s.parse().map_err(|e| usage(format!("--label-set: {e}")))
}

fn load_jsonl(path: &Path, labels: &str) -> Result<Corpus> {
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "corpus".into());
    load_corpus(path, &CorpusFormat::Jsonl, name, label_set(labels)?)
        .with_context(|| format!("loading {}", path.display()))
}

/// Refuses to overwrite an input file.
fn check_not_input(out: &Path, inputs: &[&Path]) -> Result<()> {
    let canon = |p: &Path| fs::canonicalize(p).ok();
    if let Some(o) = canon(out) {
        if inputs.iter().any(|i| canon(i).as_ref() == Some(&o)) {
            bail!("{} is an input; choose a different output path", out.display());
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct RunConfig<'a, T: Serialize> {
    command: &'a str,
    argv: Vec<String>,
    version: &'a str,
    config: &'a AppConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    inputs: Option<T>,
}

/// Writes the resolved settings and argv so the run can be replayed.
fn write_run_config<T: Serialize>(path: &Path, command: &str, cfg: &AppConfig, inputs: Option<T>) -> Result<()> {
    let rc = RunConfig {
        command,
        argv: std::env::args().skip(1).collect(),
        version: env!("CARGO_PKG_VERSION"),
        config: cfg,
        inputs,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, serde_json::to_string_pretty(&rc)? + "\n").with_context(|| format!("writing {}", path.display()))
}

fn out_dir(flag: &Option<PathBuf>, cfg: &AppConfig) -> PathBuf {
    flag.clone().unwrap_or_else(|| cfg.out_dir.clone())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n").with_context(|| format!("writing {}", path.display()))
}

#[derive(Serialize)]
struct SplitSummary {
    split: Split,
    documents: usize,
    mean_words: Option<f64>,
    percent: BTreeMap<String, f64>,
}

fn ingest(a: &IngestArgs, cfg: AppConfig) -> Result<()> {
    let format = match &a.table {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let t: TableFormat = toml::from_str(&text).with_context(|| format!("in {}", p.display()))?;
            CorpusFormat::Delimited(t)
        }
        None => CorpusFormat::Jsonl,
    };
    let name = a.name.clone().unwrap_or_else(|| {
        a.input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "corpus".into())
    });
    let profile = match &a.profile {
        Some(p) => Some(DatasetProfile::by_name(p).ok_or_else(|| usage(format!("unknown profile {p:?}")))?),
        None => None,
    };
    check_not_input(&a.out, &[&a.input])?;
    let corpus = load_corpus(&a.input, &format, name, label_set(&a.label_set)?)
        .with_context(|| format!("loading {}", a.input.display()))?;

    let stats = corpus_stats(&corpus);
    let splits: Vec<SplitSummary> = Split::ALL
        .into_iter()
        .map(|split| SplitSummary {
            split,
            documents: corpus.count(split),
            mean_words: stats.splits.iter().find(|s| s.split == split).map(|s| s.mean_words),
            percent: class_distribution(&corpus, split)
                .map(|d| {
                    d.fractions()
                        .into_iter()
                        .map(|(l, f)| (l.to_string(), f * 100.0))
                        .collect()
                })
                .unwrap_or_default(),
        })
        .collect();
    let check = profile.map(|p| p.check(&corpus, 0.05));
    let summary = serde_json::json!({
        "corpus": corpus.name(),
        "splits": splits,
        "profile_check": check,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);

    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    write_corpus(&a.out, &corpus)?;
    let mut rc = a.out.clone().into_os_string();
    rc.push(".run-config.json");
    write_run_config::<()>(Path::new(&rc), "ingest", &cfg, None)?;
    if let Some(check) = check.filter(|c| !c.passed()) {
        bail!(
            "corpus does not match the {} profile:\n  {}",
            a.profile.as_deref().unwrap_or_default(),
            check.problems.join("\n  ")
        );
    }
    Ok(())
}

fn build_client(cfg: &AppConfig) -> Result<LlmClient> {
    let client = match cfg.backend {
        BackendChoice::Mock => LlmClient::mock(),
        BackendChoice::Http => {
            if std::env::var(API_KEY_ENV).is_err() {
                log::warn!("{API_KEY_ENV} is not set; requests are sent without authorization");
            }
            if cfg.cache_dir.is_none() {
                log::warn!("no cache_dir configured; completions will not be reusable");
            }
            LlmClient::new(Arc::new(HttpBackend::from_env(&cfg.base_url, cfg.timeout())?))
        }
    };
    let mut client = client
        .with_retry(cfg.retry)
        .with_min_interval(Duration::from_millis(cfg.min_interval_ms));
    if let Some(dir) = &cfg.cache_dir {
        client = client.with_cache(ResponseCache::new(dir));
    }
    Ok(client)
}

fn augment(a: &AugmentArgs, mut cfg: AppConfig) -> Result<()> {
    if let Some(v) = a.backend {
        cfg.backend = v;
    }
    if let Some(v) = &a.model {
        cfg.model_id = v.clone();
    }
    if let Some(v) = &a.base_url {
        cfg.base_url = v.clone();
    }
    if let Some(v) = &a.cache_dir {
        cfg.cache_dir = Some(v.clone());
    }
    if let Some(v) = a.parallelism {
        cfg.parallelism = v;
    }
    if let Some(v) = a.failure_policy {
        cfg.failure_policy = v;
    }
    if let Some(v) = a.max_failure_rate {
        cfg.max_failure_rate = v;
    }
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let strategies = PromptStrategy::parse_list(&a.strategies).map_err(|e| usage(format!("--strategies: {e}")))?;
    let corpus = load_jsonl(&a.corpus.corpus, &a.corpus.label_set)?;
    let out = out_dir(&a.out, &cfg);
    check_not_input(&out, &[&a.corpus.corpus])?;

    let client = build_client(&cfg)?;
    let acfg = AugmentConfig {
        model_id: cfg.model_id.clone(),
        failure_policy: cfg.failure_policy,
        max_failure_rate: cfg.max_failure_rate,
        parallelism: cfg.parallelism,
    };
    let started = Instant::now();
    let output = augment_dataset(&corpus, &strategies, &client, &acfg)?;
    let wall = started.elapsed();

    write_augmentation(&out, &output)?;
    let mut records = String::new();
    for r in &output.records {
        records.push_str(&serde_json::to_string(r)?);
        records.push('\n');
    }
    fs::write(out.join("records.jsonl"), records)?;
    write_json(
        &out.join("timing.json"),
        &serde_json::json!({ "wall_seconds": wall.as_secs_f64() }),
    )?;
    write_run_config::<()>(&out.join("run-config.json"), "augment", &cfg, None)?;
    let m = &output.manifest;
    for (s, n) in &m.counts {
        log::info!("{s}: {n} documents");
    }
    eprintln!(
        "augmented {} parents into {} datasets in {:.1}s ({} failures) -> {}",
        m.original_train,
        output.datasets.len(),
        wall.as_secs_f64(),
        m.failures.len(),
        out.display()
    );
    Ok(())
}

/// `all` selects every combination (the `All` set included).
fn combination_names(spec: &str) -> Result<Vec<CombinationName>> {
    if spec.eq_ignore_ascii_case("all") {
        return Ok(CombinationName::ALL.to_vec());
    }
    spec.split(',')
        .map(|s| s.parse::<CombinationName>().map_err(|e| usage(e.to_string())))
        .collect()
}

fn combine(a: &CombineArgs, cfg: AppConfig) -> Result<()> {
    let names = combination_names(&a.spec)?;
    let corpus = load_jsonl(&a.original, &a.label_set)?;
    let augmented = load_augmentation_dir(&a.aug_dir, &corpus)?;
    let out = out_dir(&a.out, &cfg);
    check_not_input(&out, &[&a.original, &a.aug_dir])?;
    fs::create_dir_all(&out)?;
    let mut failed = Vec::new();
    for name in names {
        match build_combination(name, &corpus, &augmented) {
            Ok(docs) => {
                fs::write(out.join(format!("{}.jsonl", name.slug())), to_jsonl(&docs))?;
                eprintln!("{:<10} {:>7} documents", name.display_name(), docs.len());
            }
            Err(e) => {
                log::error!("{}: {e}", name.display_name());
                failed.push(name.display_name());
            }
        }
    }
    write_run_config::<()>(&out.join("run-config.json"), "combine", &cfg, None)?;
    if !failed.is_empty() {
        bail!("could not build: {}", failed.join(", "));
    }
    Ok(())
}

pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let bad = || usage(format!("--seeds: expected `a..b` or a comma list, got {s:?}"));
    let seeds: Vec<u64> = if let Some((lo, hi)) = s.split_once("..") {
        let lo: u64 = lo.trim().parse().map_err(|_| bad())?;
        let hi: u64 = hi.trim_start_matches('=').trim().parse().map_err(|_| bad())?;
        if hi < lo {
            return Err(bad());
        }
        (lo..=hi).collect()
    } else {
        s.split(',')
            .map(|x| x.trim().parse().map_err(|_| bad()))
            .collect::<Result<_>>()?
    };
    if seeds.is_empty() {
        return Err(bad());
    }
    Ok(seeds)
}

fn train(a: &TrainArgs, mut cfg: AppConfig) -> Result<()> {
    if a.trainer != "reference" {
        return Err(usage(format!(
            "trainer {:?} is external; train it elsewhere and score its predictions with `sentaug eval`",
            a.trainer
        )));
    }
    if let Some(v) = a.epochs {
        cfg.trainer.epochs = v;
    }
    if let Some(v) = a.learning_rate {
        cfg.trainer.learning_rate = v;
    }
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let seeds = parse_seeds(&a.seeds)?;
    let combination: CombinationName = a
        .combination
        .parse()
        .map_err(|e: sentaug::combine::CombineError| usage(e.to_string()))?;
    let corpus = load_jsonl(&a.corpus.corpus, &a.corpus.label_set)?;
    let augmented = match &a.aug_dir {
        Some(d) => load_augmentation_dir(d, &corpus)?,
        None if combination.sources().is_empty() => BTreeMap::new(),
        None => {
            return Err(usage(format!(
                "--aug-dir is required for {}",
                combination.display_name()
            )))
        }
    };
    let train_set = build_combination(combination, &corpus, &augmented)?;
    let trainer = ReferenceTrainer {
        config: cfg.trainer.clone(),
    };
    let report = run_experiment(combination, &train_set, &corpus, &trainer, &seeds)?;

    let out = out_dir(&a.out, &cfg);
    fs::create_dir_all(&out)?;
    write_json(&out.join(format!("experiment-{}.json", combination.slug())), &report)?;
    write_run_config::<()>(&out.join("run-config.json"), "train", &cfg, None)?;
    println!("seed,accuracy,macro_f1");
    for r in &report.runs {
        println!("{},{:.6},{:.6}", r.seed, r.report.accuracy, r.report.macro_f1);
    }
    let agg = &report.aggregate;
    println!("mean,{:.6},{:.6}", agg.accuracy.mean, agg.macro_f1.mean);
    println!("std,{:.6},{:.6}", agg.accuracy.std, agg.macro_f1.std);
    Ok(())
}

fn eval(a: &EvalArgs, cfg: AppConfig) -> Result<()> {
    let corpus = load_jsonl(&a.corpus.corpus, &a.corpus.label_set)?;
    let preds = ingest_predictions(&a.predictions, &corpus)?;
    let report = evaluate_predictions(&corpus, &preds)?;
    let gains = match &a.baseline {
        Some(b) => {
            let base = evaluate_predictions(&corpus, &ingest_predictions(b, &corpus)?)?;
            Some(gain_report(&base, &report)?)
        }
        None => None,
    };
    match &a.out {
        Some(out) => {
            fs::create_dir_all(out)?;
            fs::write(out.join("report.csv"), report_csv(&report))?;
            write_json(&out.join("report.json"), &report)?;
            if let Some(g) = &gains {
                fs::write(out.join("gain.csv"), gain_csv(g))?;
            }
            write_run_config::<()>(&out.join("run-config.json"), "eval", &cfg, None)?;
            eprintln!("wrote {}", out.display());
        }
        None => {
            print!("{}", report_csv(&report));
            if let Some(g) = &gains {
                print!("\n{}", gain_csv(g));
            }
        }
    }
    Ok(())
}

fn bench(a: &BenchArgs, cfg: AppConfig) -> Result<()> {
    let mut reports: Vec<BenchReport> = Vec::new();
    for p in &a.compare {
        let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        reports.push(serde_json::from_str(&text).with_context(|| format!("{} is not a bench report", p.display()))?);
    }
    if a.no_run {
        if reports.is_empty() {
            return Err(usage("--no-run needs --compare reports"));
        }
        print!("{}", ranking_csv(&compare_bench(&reports)));
        return Ok(());
    }
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let labels = label_set(&a.label_set)?;
    let corpus = match &a.corpus {
        Some(p) => load_jsonl(p, &a.label_set)?,
        None => {
            log::info!("no --corpus given; using a synthetic corpus");
            fixtures::synthetic_corpus("synthetic", labels.clone(), [400, 50, 200], 120, a.seed)
        }
    };
    let predictor: Box<dyn Predictor> = match a.trainer.as_str() {
        "reference" => {
            let trainer = ReferenceTrainer {
                config: cfg.trainer.clone(),
            };
            let train: Vec<_> = corpus.original_train().cloned().collect();
            trainer.fit(&train, corpus.label_set(), a.seed)?
        }
        "command" => {
            let Some((prog, args)) = a.command.split_first() else {
                return Err(usage("--trainer command needs --command <program> [args...]"));
            };
            let id = a.model_id.clone().unwrap_or_else(|| prog.clone());
            Box::new(CommandPredictor::new(prog, args, corpus.label_set().clone(), &id))
        }
        other => {
            return Err(usage(format!(
                "unknown bench trainer {other:?}; use reference or command"
            )))
        }
    };
    let bcfg = BenchConfig {
        batch_size: a.batch,
        iterations: a.iters,
        warmup_iterations: a.warmup,
        split: Split::Test,
    };
    bcfg.validate().map_err(|e| usage(e.to_string()))?;
    let report = run_bench_on(predictor.as_ref(), &corpus, &bcfg)?;

    let out = out_dir(&a.out, &cfg);
    fs::create_dir_all(&out)?;
    write_json(&out.join("bench.json"), &report)?;
    fs::write(out.join("bench.csv"), bench_csv(std::slice::from_ref(&report)))?;
    write_run_config::<()>(&out.join("run-config.json"), "bench", &cfg, None)?;
    eprintln!(
        "{} iterations of batch {}: {:.4} ms/sample",
        report.iterations_timed,
        bcfg.batch_size,
        report.mean_per_sample_ns / 1e6
    );
    if reports.is_empty() {
        print!("{}", bench_csv(std::slice::from_ref(&report)));
    } else {
        reports.push(report);
        let ranking = ranking_csv(&compare_bench(&reports));
        fs::write(out.join("ranking.csv"), &ranking)?;
        print!("{ranking}");
    }
    Ok(())
}

fn run(a: &RunArgs, cfg: AppConfig) -> Result<()> {
    let grid = ExperimentGrid::load(&a.grid).map_err(|e| match e {
        sentaug::runner::RunnerError::InvalidGrid(m) => usage(format!("{}: {m}", a.grid.display())),
        other => other.into(),
    })?;
    let out = out_dir(&a.out, &cfg);
    let store = ResultStore::open(&out)?;
    let options = RunOptions {
        force: a.force,
        stop_after: a.stop_after,
        jobs: a.jobs.unwrap_or(cfg.parallelism),
    };
    write_run_config(&out.join("run-config.json"), "run", &cfg, Some(&grid))?;
    let outcome = run_grid(&grid, &store, &options)?;
    eprintln!(
        "executed {} cells, skipped {} already complete, {} failed, {} remaining",
        outcome.executed.len(),
        outcome.skipped,
        outcome.failures.len(),
        outcome.remaining
    );
    if !outcome.failures.is_empty() {
        for (key, msg) in &outcome.failures {
            eprintln!("  {key}: {msg}");
        }
        bail!("{} cells failed; rerun to retry them", outcome.failures.len());
    }
    Ok(())
}

fn report(a: &ReportArgs, cfg: AppConfig) -> Result<()> {
    if !a.store.join(STORE_FILE).is_file() {
        bail!("no {STORE_FILE} in {}", a.store.display());
    }
    let store = ResultStore::open(&a.store)?;
    let (tables, gains) = if a.tables || a.gains {
        (a.tables, a.gains)
    } else {
        (true, true)
    };
    let emitted = emit_report(&store, tables, gains);
    for w in &emitted.warnings {
        log::warn!("{w}");
    }
    let out = a.out.clone().unwrap_or_else(|| a.store.clone());
    emitted.write(&out)?;
    write_run_config::<()>(&out.join("report-run-config.json"), "report", &cfg, None)?;
    for name in emitted.files.keys() {
        eprintln!("wrote {}", out.join(name).display());
    }
    Ok(())
}

fn fixture(a: &FixtureArgs, _cfg: AppConfig) -> Result<()> {
    let corpus = match a.kind {
        FixtureKind::Separable => fixtures::separable_corpus(a.sizes.first().copied().unwrap_or(60), a.seed),
        FixtureKind::Synthetic => {
            let [train, valid, test] = a.sizes[..] else {
                return Err(usage("--sizes needs three numbers: train,valid,test"));
            };
            fixtures::synthetic_corpus(
                "synthetic",
                label_set(&a.label_set)?,
                [train, valid, test],
                a.words,
                a.seed,
            )
        }
        FixtureKind::Persent => fixtures::profile_corpus(&sentaug::profile::PERSENT, a.seed),
        FixtureKind::Multiemo => fixtures::profile_corpus(&sentaug::profile::MULTIEMO, a.seed),
    };
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    write_corpus(&a.out, &corpus)?;
    eprintln!("wrote {} documents to {}", corpus.documents().len(), a.out.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_ranges_are_inclusive() {
        assert_eq!(parse_seeds("0..4").unwrap(), vec![0, 1, 2, 3, 4]);
        assert_eq!(parse_seeds("2..=3").unwrap(), vec![2, 3]);
        assert_eq!(parse_seeds("7, 9").unwrap(), vec![7, 9]);
        assert!(parse_seeds("4..1").is_err());
        assert!(parse_seeds("x").is_err());
    }

    #[test]
    fn combination_lists() {
        assert_eq!(combination_names("all").unwrap().len(), 8);
        assert_eq!(
            combination_names("baseline,both-para").unwrap(),
            vec![CombinationName::Baseline, CombinationName::BothPara]
        );
        assert!(combination_names("nope").is_err());
    }
}
