//! Command-line front end. One binary, subcommand per pipeline stage;
//! machine-readable JSON on stdout by default, `--format table` for
//! humans. All randomness flows from `--seed` (or the `LEXORA_SEED`
//! environment variable), so any documented command sequence reruns to
//! byte-identical outputs.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::confgate::{apply_gate, calibrate_threshold, GateOutcome};
use crate::corpus::{
    generate_synthetic, load_corpus, save_corpus, split_dataset, Document, SynthConfig,
};
use crate::error::{Error, Result};
use crate::evalkit::{eval_dataset, render_table, EvalOptions, EvalReport};
use crate::extraction::{load_extractions, save_extractions, Extraction};
use crate::genix::{
    default_lr, extract_with_model, load_model, pretrain_span_corruption, save_model, Hyper,
    ModelParams, PretrainOpts, TrainOpts, TuneMode,
};
use crate::legalstats::{
    bac_histogram, build_records, ols_months_vs_log_loss, report::bac_csv, report::regime_csv,
    report::regression_svg, report::shares_csv, sentence_type_shares, yearly_means, BacBin,
    BucketRow, CaseRecord, OlsFit, RegimeRow,
};
use crate::rulex::{self, load_ruleset};
use crate::taskschema::{builtin_task, Task};

const DEFAULT_SEED: u64 = 42;

fn seed_default() -> u64 {
    std::env::var("LEXORA_SEED").ok().and_then(|s| s.parse().ok()).unwrap_or(DEFAULT_SEED)
}

fn parse_task(s: &str) -> std::result::Result<Task, String> {
    Task::from_id(s).map_err(|e| e.to_string())
}

fn parse_fraction(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("must be within [0, 1], got {v}"))
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Table,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Engine {
    Rule,
    Model,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    /// Update every parameter.
    Finetune,
    /// Update only the task's soft prompt; the shared weights stay frozen.
    Prompt,
    /// Span-corruption denoising on raw text; prompts stay frozen.
    Pretrain,
}

#[derive(Parser)]
#[command(
    name = "lexora",
    version,
    about = "Legal information extraction: synthetic corpora, rule and model extractors, \
             evaluation, confidence gating, and sentencing analytics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic labeled corpus.
    GenCorpus(GenCorpusArgs),
    /// Shuffle a corpus into train/valid/test files.
    Split(SplitArgs),
    /// Run one extraction task over a corpus.
    Extract(ExtractArgs),
    /// Train the generative extractor (or pretrain it on raw text).
    Train(TrainArgs),
    /// Score predictions against gold labels.
    Eval(EvalArgs),
    /// Choose the largest confidence threshold meeting a recall target.
    Calibrate(CalibrateArgs),
    /// Filter predictions by a calibrated confidence threshold.
    Gate(GateArgs),
    /// Sentencing statistics over extracted fields.
    Analyze(AnalyzeArgs),
    /// Detailed per-field evaluation report.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenCorpusArgs {
    /// Output corpus path (JSON lines).
    #[arg(long)]
    out: PathBuf,
    /// Documents per task category.
    #[arg(long, default_value_t = 100)]
    count: usize,
    /// Restrict generation to these tasks (repeatable; default: all five).
    #[arg(long = "task", value_parser = parse_task)]
    tasks: Vec<Task>,
    /// Probability of inserting distractor sentences per document.
    #[arg(long, default_value_t = 0.0, value_parser = parse_fraction)]
    noise_rate: f64,
    #[arg(long, default_value_t = seed_default())]
    seed: u64,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    docs: PathBuf,
    /// Directory receiving train.jsonl, valid.jsonl, and test.jsonl.
    #[arg(long)]
    out_dir: PathBuf,
    /// Training-pool size; a fifth of it is carved off for validation.
    #[arg(long)]
    n_train: usize,
    #[arg(long)]
    n_test: usize,
    #[arg(long, default_value_t = seed_default())]
    seed: u64,
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long)]
    docs: PathBuf,
    #[arg(long, value_parser = parse_task)]
    task: Task,
    #[arg(long, value_enum)]
    engine: Engine,
    /// Custom ruleset (TOML); rule engine only. Defaults to the built-ins.
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Model checkpoint; required for the model engine.
    #[arg(long, required_if_eq("engine", "model"))]
    ckpt: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads for per-document extraction.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct TrainArgs {
    /// Training documents (labels required except for pretraining).
    #[arg(long)]
    docs: PathBuf,
    /// Validation documents for per-epoch loss and early stopping.
    #[arg(long)]
    valid: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Mode,
    /// Starting checkpoint; omitted → fresh seeded initialization.
    #[arg(long)]
    ckpt_in: Option<PathBuf>,
    #[arg(long)]
    ckpt_out: PathBuf,
    /// Defaults: 10 for finetune/prompt, 3 for pretrain.
    #[arg(long)]
    epochs: Option<usize>,
    /// Defaults depend on mode: 1.0 for prompt tuning, 1e-4 otherwise.
    #[arg(long)]
    lr: Option<f64>,
    /// Examples per optimizer step.
    #[arg(long, default_value_t = 8)]
    batch: usize,
    /// Epochs between validation field-accuracy probes; 0 disables them.
    #[arg(long, default_value_t = 1)]
    eval_every: usize,
    /// Stop once validation field accuracy reaches this value.
    #[arg(long, value_parser = parse_fraction)]
    target_field_acc: Option<f64>,
    #[arg(long, default_value_t = seed_default())]
    seed: u64,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    pred: PathBuf,
    /// Evaluate only this task (default: every task present in the predictions).
    #[arg(long, value_parser = parse_task)]
    task: Option<Task>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Compare raw strings instead of whitespace/case-normalized ones.
    #[arg(long)]
    exact: bool,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    pred: PathBuf,
    #[arg(long, value_parser = parse_task)]
    task: Task,
    /// Minimum recall the gated predictions must keep, in [0, 1].
    #[arg(long, value_parser = parse_fraction)]
    target_recall: f64,
    /// Also write the gate configuration to this JSON file.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct GateArgs {
    #[arg(long)]
    pred: PathBuf,
    /// Gate configuration produced by `calibrate --out`.
    #[arg(long, conflicts_with = "threshold", required_unless_present = "threshold")]
    config: Option<PathBuf>,
    /// Explicit threshold, as an alternative to --config.
    #[arg(long)]
    threshold: Option<f64>,
    /// Retained predictions (confidence ≥ threshold).
    #[arg(long)]
    out: PathBuf,
    /// Optionally write the rejected remainder here.
    #[arg(long)]
    rejected: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    docs: PathBuf,
    /// Extractions for the task's facts fields.
    #[arg(long)]
    facts: PathBuf,
    /// Criminal-ruling extractions over the same documents.
    #[arg(long)]
    ruling: PathBuf,
    #[arg(long, value_parser = parse_task)]
    task: Task,
    /// Write CSV/SVG reports into this directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Year ranges for the imprisonment-mean table.
    #[arg(long, default_value = "2017-2018,2019-2022")]
    year_ranges: String,
    /// log10(loss) bucket edges for sentence-type shares.
    #[arg(long, default_value = "5,6,7,8,9")]
    bucket_edges: String,
    #[arg(long, default_value_t = 0.05)]
    bac_origin: f64,
    #[arg(long, default_value_t = 0.03)]
    bac_width: f64,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    pred: PathBuf,
    #[arg(long, value_parser = parse_task)]
    task: Option<Task>,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
    #[arg(long)]
    exact: bool,
}

/// Parse and dispatch `argv`, returning the process exit code: 0 on
/// success, 1 on domain errors, 2 on usage errors.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::GenCorpus(a) => cmd_gen_corpus(a),
        Command::Split(a) => cmd_split(a),
        Command::Extract(a) => cmd_extract(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Calibrate(a) => cmd_calibrate(a),
        Command::Gate(a) => cmd_gate(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Report(a) => cmd_report(a),
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Invalid(format!("serializing output: {e}")))?;
    println!("{text}");
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn cmd_gen_corpus(a: GenCorpusArgs) -> Result<()> {
    let tasks = if a.tasks.is_empty() { Task::ALL.to_vec() } else { a.tasks };
    let cfg = SynthConfig {
        counts: tasks.into_iter().map(|t| (t, a.count)).collect(),
        seed: a.seed,
        noise_rate: a.noise_rate,
        ..SynthConfig::default()
    };
    let docs = generate_synthetic(&cfg)?;
    save_corpus(&a.out, &docs)?;

    #[derive(Serialize)]
    struct Summary {
        documents: usize,
        path: PathBuf,
    }
    print_json(&Summary { documents: docs.len(), path: a.out })
}

fn cmd_split(a: SplitArgs) -> Result<()> {
    let docs = load_corpus(&a.docs)?;
    let split = split_dataset(&docs, a.n_train, a.n_test, a.seed)?;
    fs::create_dir_all(&a.out_dir).map_err(|e| Error::io(&a.out_dir, e))?;
    save_corpus(a.out_dir.join("train.jsonl"), &split.train)?;
    save_corpus(a.out_dir.join("valid.jsonl"), &split.valid)?;
    save_corpus(a.out_dir.join("test.jsonl"), &split.test)?;

    #[derive(Serialize)]
    struct Summary {
        train: usize,
        valid: usize,
        test: usize,
        out_dir: PathBuf,
    }
    print_json(&Summary {
        train: split.train.len(),
        valid: split.valid.len(),
        test: split.test.len(),
        out_dir: a.out_dir,
    })
}

/// Map `f` over `items` on `jobs` threads, preserving input order.
fn parallel_map<T, R, F>(items: &[T], jobs: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let jobs = jobs.clamp(1, items.len().max(1));
    if jobs == 1 {
        return items.iter().map(f).collect();
    }
    let chunk_len = items.len().div_ceil(jobs);
    let mut results: Vec<Vec<R>> = Vec::new();
    std::thread::scope(|scope| {
        let handles: Vec<_> = items
            .chunks(chunk_len)
            .map(|chunk| scope.spawn(|| chunk.iter().map(&f).collect::<Vec<R>>()))
            .collect();
        results = handles.into_iter().map(|h| h.join().expect("worker panicked")).collect();
    });
    results.into_iter().flatten().collect()
}

fn cmd_extract(a: ExtractArgs) -> Result<()> {
    let docs = load_corpus(&a.docs)?;
    let spec = builtin_task(a.task);
    let applicable: Vec<&Document> =
        docs.iter().filter(|d| a.task.applies_to(d.category)).collect();
    let skipped = docs.len() - applicable.len();

    let results: Vec<Result<Extraction>> = match a.engine {
        Engine::Rule => {
            let rules = load_ruleset(a.rules.as_deref())?;
            parallel_map(&applicable, a.jobs, |doc| rulex::extract(&spec, doc, &rules))
        }
        Engine::Model => {
            let params = load_model(a.ckpt.as_deref().expect("clap enforces --ckpt"))?;
            parallel_map(&applicable, a.jobs, |doc| extract_with_model(&params, &spec, doc))
        }
    };
    let preds = results.into_iter().collect::<Result<Vec<_>>>()?;
    save_extractions(&a.out, &preds)?;

    #[derive(Serialize)]
    struct Summary {
        task: Task,
        written: usize,
        skipped: usize,
        path: PathBuf,
    }
    print_json(&Summary { task: a.task, written: preds.len(), skipped, path: a.out })
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let docs = load_corpus(&a.docs)?;
    let mut params = match &a.ckpt_in {
        Some(path) => load_model(path)?,
        None => ModelParams::new(Hyper::toy(), a.seed),
    };

    let result = match a.mode {
        Mode::Pretrain => {
            let defaults = PretrainOpts::default();
            let opts = PretrainOpts {
                epochs: a.epochs.unwrap_or(defaults.epochs),
                lr: a.lr.unwrap_or(defaults.lr),
                seed: a.seed,
                batch: a.batch,
            };
            pretrain_span_corruption(&mut params, &docs, &opts)?
        }
        Mode::Finetune | Mode::Prompt => {
            let mode =
                if a.mode == Mode::Prompt { TuneMode::PromptOnly } else { TuneMode::Full };
            let valid = match &a.valid {
                Some(path) => load_corpus(path)?,
                None => Vec::new(),
            };
            let opts = TrainOpts {
                epochs: a.epochs.unwrap_or(10),
                lr: a.lr.unwrap_or_else(|| default_lr(mode)),
                seed: a.seed,
                batch: a.batch,
                mode,
                target_field_acc: a.target_field_acc,
                eval_every: a.eval_every,
            };
            crate::genix::train(&mut params, &docs, &valid, &opts)?
        }
    };
    save_model(&a.ckpt_out, &params)?;
    print_json(&result)
}

/// Pair a prediction file with the gold documents of one task: documents
/// of that category, and predictions for that task whose ids are present.
/// Predictions for other documents are dropped with a warning so a single
/// extraction file spanning several categories can be evaluated per task.
fn task_slice<'a>(
    docs: &'a [Document],
    preds: &'a [Extraction],
    task: Task,
) -> (Vec<Document>, Vec<Extraction>) {
    let docs_t: Vec<Document> =
        docs.iter().filter(|d| d.category == task).cloned().collect();
    let ids: std::collections::BTreeSet<&str> = docs_t.iter().map(|d| d.id.as_str()).collect();
    let mut preds_t = Vec::new();
    let mut dropped = 0usize;
    for p in preds.iter().filter(|p| p.task == task) {
        if ids.contains(p.id.as_str()) {
            preds_t.push(p.clone());
        } else {
            dropped += 1;
        }
    }
    if dropped > 0 {
        log::warn!("{dropped} {task} predictions match no gold document of that category");
    }
    (docs_t, preds_t)
}

fn eval_report(a_gold: &Path, a_pred: &Path, task: Option<Task>, exact: bool) -> Result<EvalReport> {
    let docs = load_corpus(a_gold)?;
    let preds = load_extractions(a_pred)?;
    let opts = EvalOptions { normalize: !exact };

    let tasks: Vec<Task> = match task {
        Some(t) => vec![t],
        None => {
            let mut seen: Vec<Task> = Vec::new();
            for p in &preds {
                if !seen.contains(&p.task) {
                    seen.push(p.task);
                }
            }
            seen.sort();
            seen
        }
    };
    if tasks.is_empty() {
        return Err(Error::Invalid("no predictions to evaluate".into()));
    }

    let mut evals = Vec::new();
    for t in tasks {
        let (docs_t, preds_t) = task_slice(&docs, &preds, t);
        if docs_t.is_empty() {
            return Err(Error::Invalid(format!("no gold documents with category {t}")));
        }
        evals.push(eval_dataset(&builtin_task(t), &docs_t, &preds_t, &opts)?);
    }
    Ok(EvalReport::from_tasks(evals))
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let report = eval_report(&a.gold, &a.pred, a.task, a.exact)?;
    match a.format {
        Format::Json => print_json(&report),
        Format::Table => {
            print!("{}", render_table(&report));
            Ok(())
        }
    }
}

fn cmd_report(a: ReportArgs) -> Result<()> {
    let report = eval_report(&a.gold, &a.pred, a.task, a.exact)?;
    match a.format {
        Format::Table => {
            print!("{}", render_table(&report));
            Ok(())
        }
        Format::Json => print_json(&report),
    }
}

fn cmd_calibrate(a: CalibrateArgs) -> Result<()> {
    let docs = load_corpus(&a.gold)?;
    let preds = load_extractions(&a.pred)?;
    let (docs_t, preds_t) = task_slice(&docs, &preds, a.task);
    if docs_t.is_empty() {
        return Err(Error::Invalid(format!("no gold documents with category {}", a.task)));
    }
    let outcome = calibrate_threshold(
        &builtin_task(a.task),
        &docs_t,
        &preds_t,
        a.target_recall,
        &EvalOptions::default(),
    )?;
    if let Some(path) = &a.out {
        let text = serde_json::to_string_pretty(&outcome)
            .map_err(|e| Error::Invalid(format!("serializing gate config: {e}")))?;
        write_text(path, &(text + "\n"))?;
    }
    match a.format {
        Format::Json => print_json(&outcome),
        Format::Table => {
            println!("task            {}", outcome.task);
            println!("target recall   {:.4}", outcome.target_recall);
            println!("threshold       {:.6}", outcome.threshold);
            println!("attainable      {}", outcome.attainable);
            println!("coverage        {:.4}", outcome.coverage);
            Ok(())
        }
    }
}

fn cmd_gate(a: GateArgs) -> Result<()> {
    let preds = load_extractions(&a.pred)?;
    let threshold = match (a.threshold, &a.config) {
        (Some(t), _) => t,
        (None, Some(path)) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let cfg: GateOutcome = serde_json::from_str(&text)
                .map_err(|e| Error::Invalid(format!("{}: not a gate config: {e}", path.display())))?;
            cfg.threshold
        }
        (None, None) => unreachable!("clap requires --config or --threshold"),
    };
    let retained = apply_gate(&preds, threshold);
    let rejected: Vec<Extraction> =
        preds.iter().filter(|p| p.confidence < threshold).cloned().collect();
    save_extractions(&a.out, &retained)?;
    if let Some(path) = &a.rejected {
        save_extractions(path, &rejected)?;
    }

    #[derive(Serialize)]
    struct Summary {
        threshold: f64,
        retained: usize,
        rejected: usize,
        path: PathBuf,
    }
    print_json(&Summary { threshold, retained: retained.len(), rejected: rejected.len(), path: a.out })
}

fn parse_year_ranges(s: &str) -> Result<Vec<(i32, i32)>> {
    let mut out = Vec::new();
    for part in s.split(',') {
        let (lo, hi) = part
            .split_once('-')
            .ok_or_else(|| Error::Invalid(format!("year range `{part}` is not `LO-HI`")))?;
        let lo: i32 =
            lo.trim().parse().map_err(|_| Error::Invalid(format!("bad year in `{part}`")))?;
        let hi: i32 =
            hi.trim().parse().map_err(|_| Error::Invalid(format!("bad year in `{part}`")))?;
        if lo > hi {
            return Err(Error::Invalid(format!("empty year range `{part}`")));
        }
        out.push((lo, hi));
    }
    Ok(out)
}

fn parse_edges(s: &str) -> Result<Vec<f64>> {
    let edges: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Invalid(format!("bad bucket edges `{s}`")))?;
    if edges.len() < 2 || edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Invalid("bucket edges must be at least two, strictly increasing".into()));
    }
    Ok(edges)
}

#[derive(Serialize)]
struct AnalysisSummary {
    task: Task,
    n_records: usize,
    regimes: Vec<RegimeRow>,
    fit: Option<OlsFit>,
    shares: Vec<BucketRow>,
    bac: Vec<BacBin>,
}

fn cmd_analyze(a: AnalyzeArgs) -> Result<()> {
    if !matches!(a.task, Task::DrunkDriving | Task::Embezzlement | Task::Fraud) {
        return Err(Error::Invalid(format!(
            "analysis covers the criminal fact categories, not {}",
            a.task
        )));
    }
    let docs = load_corpus(&a.docs)?;
    let facts = load_extractions(&a.facts)?;
    let rulings = load_extractions(&a.ruling)?;

    let docs_t: Vec<Document> = docs.iter().filter(|d| d.category == a.task).cloned().collect();
    if docs_t.is_empty() {
        return Err(Error::Invalid(format!("no documents with category {}", a.task)));
    }
    let ids: std::collections::BTreeSet<&str> = docs_t.iter().map(|d| d.id.as_str()).collect();
    let facts_t: Vec<Extraction> =
        facts.iter().filter(|p| p.task == a.task && ids.contains(p.id.as_str())).cloned().collect();
    let rulings_t: Vec<Extraction> = rulings
        .iter()
        .filter(|p| p.task == Task::RulingCriminal && ids.contains(p.id.as_str()))
        .cloned()
        .collect();
    let records: Vec<CaseRecord> = build_records(&docs_t, &facts_t, &rulings_t)?;

    let regimes = yearly_means(&records, &parse_year_ranges(&a.year_ranges)?);
    let fit = ols_months_vs_log_loss(&records);
    let shares = if fit.is_some() {
        sentence_type_shares(&records, &parse_edges(&a.bucket_edges)?)
    } else {
        Vec::new()
    };
    let bac = bac_histogram(&records, a.bac_origin, a.bac_width);

    if let Some(dir) = &a.out_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        if !regimes.is_empty() {
            write_text(&dir.join("regimes.csv"), &regime_csv(&regimes))?;
        }
        if !shares.is_empty() {
            write_text(&dir.join("shares.csv"), &shares_csv(&shares))?;
        }
        if fit.is_some() {
            write_text(&dir.join("regression.svg"), &regression_svg(&records)?)?;
        }
        if !bac.is_empty() {
            write_text(&dir.join("bac.csv"), &bac_csv(&bac))?;
        }
    }

    let summary =
        AnalysisSummary { task: a.task, n_records: records.len(), regimes, fit, shares, bac };
    match a.format {
        Format::Json => print_json(&summary),
        Format::Table => {
            if !summary.regimes.is_empty() {
                print!("{}", regime_csv(&summary.regimes));
            }
            if let Some(fit) = &summary.fit {
                println!(
                    "months ~ {:.3} x log10(loss) + {:.3}  (r2 {:.3}, n {})",
                    fit.slope, fit.intercept, fit.r2, fit.n
                );
            }
            if !summary.shares.is_empty() {
                print!("{}", shares_csv(&summary.shares));
            }
            if !summary.bac.is_empty() {
                print!("{}", bac_csv(&summary.bac));
            }
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run(["lexora", "no-such-command"]), 2);
        assert_eq!(run(["lexora", "calibrate", "--gold", "g", "--pred", "p", "--task",
            "drunk_driving", "--target-recall", "1.5"]), 2);
        assert_eq!(run(["lexora", "extract", "--docs", "d", "--task", "fraud",
            "--engine", "model", "--out", "o"]), 2, "model engine requires --ckpt");
    }

    #[test]
    fn help_exits_zero() {
        assert_eq!(run(["lexora", "--help"]), 0);
        assert_eq!(run(["lexora", "eval", "--help"]), 0);
    }

    #[test]
    fn missing_input_is_a_domain_error() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("absent.jsonl");
        let out = dir.path().join("out.jsonl");
        assert_eq!(
            run(["lexora".into(), "extract".into(), "--docs".into(),
                missing.display().to_string(), "--task".into(), "fraud".into(),
                "--engine".into(), "rule".into(), "--out".into(), out.display().to_string()]),
            1
        );
    }

    #[test]
    fn year_range_and_edge_parsers_reject_garbage() {
        assert_eq!(parse_year_ranges("2017-2018,2019-2022").unwrap().len(), 2);
        assert!(parse_year_ranges("2018-2017").is_err());
        assert!(parse_year_ranges("hello").is_err());
        assert_eq!(parse_edges("5,6,7").unwrap(), vec![5.0, 6.0, 7.0]);
        assert!(parse_edges("5").is_err());
        assert!(parse_edges("5,5").is_err());
    }

    #[test]
    fn parallel_map_preserves_order() {
        let items: Vec<usize> = (0..103).collect();
        let doubled = parallel_map(&items, 4, |&x| x * 2);
        assert_eq!(doubled, items.iter().map(|x| x * 2).collect::<Vec<_>>());
        assert_eq!(parallel_map(&items, 1, |&x| x + 1)[102], 103);
        assert!(parallel_map(&Vec::<usize>::new(), 4, |&x: &usize| x).is_empty());
    }
}
