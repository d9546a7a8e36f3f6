//! The `lotto` command-line front end.
//!
//! Exit codes: 0 on success, 1 for configuration or input errors, 2 when the
//! scoring backend fails.

use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use crate::config::{PartialConfig, RunConfig, BACKEND_ENV};
use crate::ensemble::{
    evaluate_ensemble, sample_few_shot, transfer_eval, word_frequency, EnsembleStrategy, EvalReport, StrongPromptSet,
};
use crate::error::Error;
use crate::lexicon::{build_space, PromptSpace, WordLexicon};
use crate::report::{
    read_json, write_eval_csv, write_json, write_search_csv, write_stats_csv, ApiCallTotals, CacheFile, PromptsFile,
    RunManifest, SearchReport, SearchSummary, TransferReport,
};
use crate::scoring::{HttpBackend, Scorer, ScoringBackend, SyntheticOracle};
use crate::search::{
    self, evaluate_all, mean_cost, pruned_search, search_dataset, success_rate, top_k, PromptStats, PruneConfig,
};
use crate::task::{load_dataset, Instance, TaskSpec};

#[derive(Debug, Parser)]
#[command(name = "lotto", version, about = "Lottery-prompt search and prompt ensembling")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Search each training instance for a template that predicts its label.
    Search(CommonArgs),
    /// Evaluate every template on the training set and keep the top k.
    Rank(CommonArgs),
    /// Batched search that skips templates whose words score poorly.
    Prune(CommonArgs),
    /// Evaluate a strong-prompt set on a test set.
    Ensemble(CommonArgs),
    /// Evaluate a strong-prompt set found on another task.
    Transfer(CommonArgs),
    /// Rank on seeded few-shot samples and evaluate both strategies.
    FewShotSweep(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Key-value config file; flags take precedence over it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Task config (JSON).
    #[arg(long)]
    task: Option<PathBuf>,
    /// Lexicon file; the built-in lexicon is used when omitted.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Backend base URL, or `synthetic:<seed>`.
    #[arg(long)]
    backend: Option<String>,
    /// Planted rules for the synthetic backend (JSON array).
    #[arg(long)]
    oracle_rules: Option<PathBuf>,
    /// Training set (JSON Lines).
    #[arg(long)]
    train: Option<PathBuf>,
    /// Test set (JSON Lines).
    #[arg(long)]
    test: Option<PathBuf>,
    /// Strong prompts written by `rank` or `prune`.
    #[arg(long)]
    prompts: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Templates tried per instance; defaults to the whole space.
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, value_parser = parse_strategy)]
    strategy: Option<EnsembleStrategy>,
    /// Comma-separated shot counts per class.
    #[arg(long, value_delimiter = ',')]
    shots: Option<Vec<usize>>,
    /// Seeds per shot count.
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    max_concurrency: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Prior cache file, read before and written after the run.
    #[arg(long)]
    cache: Option<PathBuf>,
}

fn parse_strategy(s: &str) -> Result<EnsembleStrategy, String> {
    match s {
        "vote" => Ok(EnsembleStrategy::Vote),
        "mi" => Ok(EnsembleStrategy::Mi),
        other => Err(format!("unknown strategy `{other}` (expected vote or mi)")),
    }
}

impl CommonArgs {
    fn resolve(&self) -> anyhow::Result<RunConfig> {
        let flags = PartialConfig {
            task: self.task.clone(),
            lexicon: self.lexicon.clone(),
            backend: self.backend.clone(),
            oracle_rules: self.oracle_rules.clone(),
            train: self.train.clone(),
            test: self.test.clone(),
            prompts: self.prompts.clone(),
            seed: self.seed,
            budget: self.budget,
            k: self.k,
            strategy: self.strategy,
            shots: self.shots.clone(),
            runs: self.runs,
            batch_size: self.batch_size,
            threshold: self.threshold,
            max_concurrency: self.max_concurrency,
            out: self.out.clone(),
            cache: self.cache.clone(),
        };
        let file = match &self.config {
            Some(path) => PartialConfig::load(path)?,
            None => PartialConfig::default(),
        };
        let env = PartialConfig {
            backend: std::env::var(BACKEND_ENV).ok().filter(|s| !s.is_empty()),
            ..Default::default()
        };
        Ok(flags.or(file).or(env).resolve()?)
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(summary) => {
            print!("{summary}");
            0
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            exit_code(&err)
        }
    }
}

fn exit_code(err: &anyhow::Error) -> i32 {
    let backend = err
        .chain()
        .any(|e| e.downcast_ref::<Error>().is_some_and(Error::is_backend));
    if backend {
        2
    } else {
        1
    }
}

/// Runs a parsed command and returns its plain-text summary.
pub fn run(cli: &Cli) -> anyhow::Result<String> {
    let (name, args) = match &cli.command {
        Command::Search(a) => ("search", a),
        Command::Rank(a) => ("rank", a),
        Command::Prune(a) => ("prune", a),
        Command::Ensemble(a) => ("ensemble", a),
        Command::Transfer(a) => ("transfer", a),
        Command::FewShotSweep(a) => ("few-shot-sweep", a),
    };
    let cfg = args.resolve()?;
    let backend = open_backend(&cfg)?;
    let scorer = Scorer::with_concurrency(backend.as_ref(), cfg.max_concurrency);
    let mut run = Run::open(name, cfg, backend.identity())?;
    run.preload(&scorer);
    let summary = match &cli.command {
        Command::Search(_) => cmd_search(&mut run, &scorer)?,
        Command::Rank(_) => cmd_rank(&mut run, &scorer)?,
        Command::Prune(_) => cmd_prune(&mut run, &scorer)?,
        Command::Ensemble(_) => cmd_ensemble(&mut run, &scorer)?,
        Command::Transfer(_) => cmd_transfer(&mut run, &scorer)?,
        Command::FewShotSweep(_) => cmd_few_shot_sweep(&mut run, &scorer)?,
    };
    run.finish(&scorer, &summary)?;
    Ok(summary)
}

/// State shared by all commands: resolved inputs, backend and outputs.
struct Run {
    command: &'static str,
    cfg: RunConfig,
    task: TaskSpec,
    space: PromptSpace,
    identity: String,
    cache: Option<CacheFile>,
    priors_from_cache: usize,
    seeds: Vec<u64>,
    outputs: Vec<String>,
}

impl Run {
    fn open(command: &'static str, cfg: RunConfig, identity: &str) -> anyhow::Result<Self> {
        let task = TaskSpec::load(&cfg.task)?;
        let lexicon = match &cfg.lexicon {
            Some(path) => WordLexicon::load(path)?,
            None => WordLexicon::builtin(),
        };
        let space = build_space(lexicon)?;
        let cache = match &cfg.cache {
            Some(path) => Some(CacheFile::load(path)?.unwrap_or_default()),
            None => None,
        };
        std::fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
        Ok(Self {
            command,
            seeds: vec![cfg.seed],
            cfg,
            task,
            space,
            identity: identity.to_owned(),
            cache,
            priors_from_cache: 0,
            outputs: Vec::new(),
        })
    }

    fn lexicon_source(&self) -> &str {
        self.space.lexicon().source_id()
    }

    fn identity(&self) -> &str {
        &self.identity
    }

    /// Seeds `scorer` with cached priors of the run's task.
    fn preload(&mut self, scorer: &Scorer<'_>) {
        let Some(cache) = &self.cache else { return };
        let entries = cache.reusable(self.identity(), self.lexicon_source(), &self.task);
        self.priors_from_cache = entries.len();
        scorer.preload_priors(entries);
    }

    fn dataset(&self, path: &Option<PathBuf>, flag: &str, task: &TaskSpec) -> anyhow::Result<Vec<Instance>> {
        let path = self.cfg.require(path, flag)?;
        let data = load_dataset(path, task)?;
        if data.is_empty() {
            bail!("{}: dataset is empty", path.display());
        }
        Ok(data)
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.outputs.push(name.to_owned());
        self.cfg.out.join(name)
    }

    fn write_json<T: serde::Serialize>(&mut self, name: &str, value: &T) -> anyhow::Result<()> {
        let path = self.path(name);
        write_json(&path, value)?;
        Ok(())
    }

    /// Refreshes the cache file and writes the manifest and summary.
    fn finish(&mut self, scorer: &Scorer<'_>, summary: &str) -> anyhow::Result<()> {
        if let Some(path) = self.cfg.cache.clone() {
            let mut cache = match self.cache.take() {
                Some(c) if c.backend_identity == self.identity() && c.lexicon_source == self.lexicon_source() => c,
                _ => CacheFile {
                    backend_identity: self.identity().to_owned(),
                    lexicon_source: self.lexicon_source().to_owned(),
                    ..Default::default()
                },
            };
            cache.tasks.insert(self.task.name.clone(), self.task.clone());
            let mut merged: std::collections::BTreeMap<(String, usize), Vec<f64>> = cache
                .priors
                .into_iter()
                .map(|e| ((e.task, e.space_index), e.q))
                .collect();
            for e in scorer.export_priors() {
                merged.insert((e.task, e.space_index), e.q);
            }
            cache.priors = merged
                .into_iter()
                .map(|((task, space_index), q)| crate::scoring::PriorEntry { task, space_index, q })
                .collect();
            cache.save(&path)?;
            self.cache = Some(cache);
        }
        let manifest = RunManifest {
            command: self.command.to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            config: self.cfg.clone(),
            lexicon_source: self.lexicon_source().to_owned(),
            space_size: self.space.len(),
            backend_identity: self.identity().to_owned(),
            seeds: self.seeds.clone(),
            api_calls: ApiCallTotals::new(scorer.calls(), self.priors_from_cache),
            outputs: {
                let mut o = self.outputs.clone();
                o.push("summary.txt".into());
                o
            },
        };
        self.write_json("manifest.json", &manifest)?;
        let path = self.cfg.out.join("summary.txt");
        std::fs::write(&path, summary).map_err(|e| Error::io(&path, e))?;
        Ok(())
    }
}

fn open_backend(cfg: &RunConfig) -> anyhow::Result<Box<dyn ScoringBackend>> {
    if let Some(seed) = cfg.backend.strip_prefix("synthetic:") {
        let seed: u64 = seed
            .parse()
            .with_context(|| format!("bad synthetic backend seed in `{}`", cfg.backend))?;
        let mut oracle = SyntheticOracle::new(seed);
        if let Some(path) = &cfg.oracle_rules {
            oracle = oracle.with_rules(SyntheticOracle::load_rules(path)?);
        }
        return Ok(Box::new(oracle));
    }
    if cfg.backend.starts_with("http://") || cfg.backend.starts_with("https://") {
        return Ok(Box::new(HttpBackend::connect(&cfg.backend)?));
    }
    bail!(
        "unsupported backend `{}` (expected http(s)://... or synthetic:<seed>)",
        cfg.backend
    )
}

fn header(run: &Run) -> String {
    format!(
        "command:  {}\ntask:     {}\nlexicon:  {} ({} templates)\nbackend:  {}\n",
        run.command,
        run.task.name,
        run.lexicon_source(),
        run.space.len(),
        run.identity()
    )
}

fn cmd_search(run: &mut Run, scorer: &Scorer<'_>) -> anyhow::Result<String> {
    let train = run.dataset(&run.cfg.train.clone(), "train", &run.task)?;
    let budget = run.cfg.budget.unwrap_or(run.space.len()).min(run.space.len());
    let results = search_dataset(&train, &run.space, &run.task, scorer, budget)?;
    let summary = SearchSummary {
        success_rate: success_rate(&results)?,
        mean_cost: mean_cost(&results)?,
    };
    let report = SearchReport {
        lexicon_source: run.lexicon_source().to_owned(),
        task: run.task.name.clone(),
        backend_identity: run.identity().to_owned(),
        seed: run.cfg.seed,
        budget,
        results: results.clone(),
        summary,
    };
    run.write_json("search_report.json", &report)?;
    let csv = run.path("search_results.csv");
    write_search_csv(&csv, &results)?;

    let mut out = header(run);
    let _ = writeln!(out, "instances: {}\nbudget:   {budget}", results.len());
    let _ = writeln!(out, "success rate: {:.4}\nmean cost:    {:.3}", summary.success_rate, summary.mean_cost);
    let calls = scorer.calls();
    let _ = writeln!(out, "api calls:    {} ({} instance + {} prior)", calls.total(), calls.instance, calls.prior);
    let _ = writeln!(out, "hardest instances:");
    for r in search::hardest(&results, 10) {
        let found = r.found.map_or("not found".to_owned(), |i| format!("found #{i}"));
        let _ = writeln!(out, "  {:>6}  cost {:>6}  {found}", r.instance_id, r.cost);
    }
    Ok(out)
}

fn write_prompts(run: &mut Run, ranked: Vec<PromptStats>) -> anyhow::Result<PromptsFile> {
    let words = ranked
        .iter()
        .map(|s| run.space.prompt_text(s.space_index))
        .collect::<Result<Vec<_>, _>>()?;
    let file = PromptsFile {
        lexicon_source: run.lexicon_source().to_owned(),
        backend_identity: run.identity().to_owned(),
        task: run.task.clone(),
        k: run.cfg.k,
        prompts: StrongPromptSet::from_ranked(run.task.name.clone(), ranked)?,
        words,
    };
    run.write_json("strong_prompts.json", &file)?;
    Ok(file)
}

fn describe_top(out: &mut String, prompts: &PromptsFile) {
    let _ = writeln!(out, "top {} prompts:", prompts.prompts.len());
    for (s, w) in prompts.prompts.source_stats.iter().zip(&prompts.words) {
        let _ = writeln!(out, "  #{:<8} {:<28} {:.4}", s.space_index, w, s.metric_value);
    }
}

fn cmd_rank(run: &mut Run, scorer: &Scorer<'_>) -> anyhow::Result<String> {
    let train = run.dataset(&run.cfg.train.clone(), "train", &run.task)?;
    let ranked_all = top_k(evaluate_all(&run.space, &train, &run.task, scorer)?, usize::MAX);
    let csv = run.path("prompt_stats.csv");
    write_stats_csv(&csv, &ranked_all, &run.space)?;
    let top: Vec<_> = ranked_all.into_iter().take(run.cfg.k).collect();
    let prompts = write_prompts(run, top)?;

    let mut out = header(run);
    let _ = writeln!(out, "training instances: {}", train.len());
    describe_top(&mut out, &prompts);
    Ok(out)
}

fn cmd_prune(run: &mut Run, scorer: &Scorer<'_>) -> anyhow::Result<String> {
    let train = run.dataset(&run.cfg.train.clone(), "train", &run.task)?;
    let config = PruneConfig {
        batch_size: run.cfg.batch_size,
        threshold: run.cfg.threshold,
        seed: run.cfg.seed,
    };
    let outcome = pruned_search(&run.space, &train, &run.task, scorer, &config)?;
    let ranked = top_k(outcome.stats.clone(), usize::MAX);
    let csv = run.path("prompt_stats.csv");
    write_stats_csv(&csv, &ranked, &run.space)?;
    run.write_json("prune_outcome.json", &outcome)?;
    let top: Vec<_> = ranked.into_iter().take(run.cfg.k).collect();
    let prompts = write_prompts(run, top)?;

    let mut out = header(run);
    let _ = writeln!(
        out,
        "batch size: {}  threshold: {}  seed: {}",
        config.batch_size, config.threshold, config.seed
    );
    let _ = writeln!(
        out,
        "evaluated {} of {} templates in {} rounds",
        outcome.stats.len(),
        run.space.len(),
        outcome.rounds
    );
    describe_top(&mut out, &prompts);
    Ok(out)
}

fn load_prompts(run: &Run) -> anyhow::Result<PromptsFile> {
    let path = run.cfg.require(&run.cfg.prompts, "prompts")?;
    let prompts: PromptsFile = read_json(path)?;
    if prompts.lexicon_source != run.lexicon_source() {
        bail!(
            "{}: prompts were searched over lexicon `{}` but this run uses `{}`",
            path.display(),
            prompts.lexicon_source,
            run.lexicon_source()
        );
    }
    if let Some(&bad) = prompts.prompts.templates.iter().find(|&&i| i >= run.space.len()) {
        bail!("{}: template {bad} is outside the search space", path.display());
    }
    Ok(prompts)
}

fn summarize_eval(out: &mut String, report: &EvalReport) {
    let _ = writeln!(
        out,
        "strategy: {}  k: {}  instances: {}\n{:?}: {:.4}",
        report.strategy,
        report.k,
        report.per_instance.len(),
        report.metric,
        report.metric_value
    );
}

fn cmd_ensemble(run: &mut Run, scorer: &Scorer<'_>) -> anyhow::Result<String> {
    let prompts = load_prompts(run)?;
    let test = run.dataset(&run.cfg.test.clone(), "test", &run.task)?;
    let report = evaluate_ensemble(&test, &prompts.prompts, run.cfg.strategy, &run.task, &run.space, scorer)?;
    run.write_json("eval_report.json", &report)?;
    let csv = run.path("eval_rows.csv");
    write_eval_csv(&csv, &report, &run.space)?;
    let freq = word_frequency(&prompts.prompts, &run.space)?;
    run.write_json("word_frequency.json", &freq)?;

    let mut out = header(run);
    summarize_eval(&mut out, &report);
    Ok(out)
}

fn cmd_transfer(run: &mut Run, scorer: &Scorer<'_>) -> anyhow::Result<String> {
    let prompts = load_prompts(run)?;
    let test = run.dataset(&run.cfg.test.clone(), "test", &run.task)?;
    let report = transfer_eval(
        &prompts.prompts,
        &prompts.task,
        &test,
        &run.task,
        run.cfg.strategy,
        &run.space,
        scorer,
    )?;
    let wrapped = TransferReport {
        source_task: prompts.task.name.clone(),
        target_task: run.task.name.clone(),
        lexicon_source: run.lexicon_source().to_owned(),
        backend_identity: run.identity().to_owned(),
        report,
    };
    run.write_json("transfer_report.json", &wrapped)?;
    let csv = run.path("eval_rows.csv");
    write_eval_csv(&csv, &wrapped.report, &run.space)?;

    let mut out = header(run);
    let _ = writeln!(out, "source task: {}", wrapped.source_task);
    summarize_eval(&mut out, &wrapped.report);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
struct SweepCell {
    shots: usize,
    strategy: EnsembleStrategy,
    seeds: Vec<u64>,
    values: Vec<f64>,
    mean: f64,
    stdev: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
struct SweepReport {
    lexicon_source: String,
    task: String,
    backend_identity: String,
    k: usize,
    cells: Vec<SweepCell>,
}

fn mean_stdev(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn cmd_few_shot_sweep(run: &mut Run, scorer: &Scorer<'_>) -> anyhow::Result<String> {
    let train = run.dataset(&run.cfg.train.clone(), "train", &run.task)?;
    let test = run.dataset(&run.cfg.test.clone(), "test", &run.task)?;
    let seeds: Vec<u64> = (0..run.cfg.runs as u64).map(|r| run.cfg.seed + r).collect();
    let strategies = [EnsembleStrategy::Vote, EnsembleStrategy::Mi];

    let mut cells = Vec::new();
    for &shots in &run.cfg.shots {
        let mut values = vec![Vec::new(); strategies.len()];
        for &seed in &seeds {
            let sample = sample_few_shot(&train, run.task.num_classes(), shots, seed)?;
            let ranked = top_k(evaluate_all(&run.space, &sample, &run.task, scorer)?, run.cfg.k);
            let strong = StrongPromptSet::from_ranked(run.task.name.clone(), ranked)?;
            for (slot, &strategy) in values.iter_mut().zip(&strategies) {
                let report = evaluate_ensemble(&test, &strong, strategy, &run.task, &run.space, scorer)?;
                slot.push(report.metric_value);
            }
        }
        for (vals, &strategy) in values.into_iter().zip(&strategies) {
            let (mean, stdev) = mean_stdev(&vals);
            cells.push(SweepCell {
                shots,
                strategy,
                seeds: seeds.clone(),
                values: vals,
                mean,
                stdev,
            });
        }
    }
    run.seeds = seeds;
    let report = SweepReport {
        lexicon_source: run.lexicon_source().to_owned(),
        task: run.task.name.clone(),
        backend_identity: run.identity().to_owned(),
        k: run.cfg.k,
        cells: cells.clone(),
    };
    run.write_json("sweep_report.json", &report)?;

    let mut out = header(run);
    let _ = writeln!(out, "{:>6}  {:<5} {:>8} {:>8}", "shots", "strat", "mean", "stdev");
    for c in &cells {
        let _ = writeln!(out, "{:>6}  {:<5} {:>8.4} {:>8.4}", c.shots, c.strategy, c.mean, c.stdev);
    }
    Ok(out)
}
