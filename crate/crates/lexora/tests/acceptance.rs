//! The shipping gate. Each test is one release criterion and prints a
//! `ACCEPTANCE <n> <name>: PASS|FAIL` line with its wall time, so
//! `cargo test --test acceptance -- --nocapture` reads as a checklist.
//! Criteria carry their own time budgets, asserted here; the suite
//! serializes itself on a mutex so budgets are measured unshared.

use std::collections::BTreeMap;
use std::panic::AssertUnwindSafe;
use std::path::Path;
use std::process::Command;
use std::sync::Mutex;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lexora::confgate::calibrate_threshold;
use lexora::corpus::{generate_synthetic, Document, SynthConfig};
use lexora::evalkit::{eval_dataset, match_fields, Confusion, EvalOptions, EvalReport};
use lexora::extraction::{Extraction, Provenance};
use lexora::genix::{
    extract_with_model, grad_check, train, Hyper, ModelParams, TrainOpts, TuneMode,
};
use lexora::legalstats::{
    build_records, ols_months_vs_log_loss, sentence_type_shares, yearly_means,
};
use lexora::rulex::{self, RuleSet};
use lexora::taskschema::{
    builtin_task, delinearize, linearize, FieldKind, FieldMap, Task, TaskSpec,
};

static GATE: Mutex<()> = Mutex::new(());

/// Run one criterion body under the suite lock, print the checklist
/// line, and enforce the criterion's wall-time budget.
fn criterion(number: u32, name: &str, budget_secs: u64, body: impl FnOnce()) {
    let _guard = GATE.lock().unwrap_or_else(|poisoned| poisoned.into_inner());
    let start = Instant::now();
    let outcome = std::panic::catch_unwind(AssertUnwindSafe(body));
    let elapsed = start.elapsed().as_secs_f64();
    let ok = outcome.is_ok() && elapsed <= budget_secs as f64;
    println!(
        "ACCEPTANCE {number:2} {name}: {} ({elapsed:.1}s, budget {budget_secs}s)",
        if ok { "PASS" } else { "FAIL" }
    );
    if let Err(panic) = outcome {
        std::panic::resume_unwind(panic);
    }
    assert!(
        elapsed <= budget_secs as f64,
        "criterion {number} exceeded its {budget_secs}s budget: {elapsed:.1}s"
    );
}

fn synth(counts: &[(Task, usize)], seed: u64) -> Vec<Document> {
    let cfg = SynthConfig {
        counts: counts.iter().copied().collect(),
        seed,
        ..SynthConfig::default()
    };
    generate_synthetic(&cfg).expect("synthetic corpus generates")
}

fn rule_extract(task: Task, docs: &[Document], rules: &RuleSet) -> Vec<Extraction> {
    let spec = builtin_task(task);
    docs.iter()
        .filter(|d| task.applies_to(d.category))
        .map(|d| rulex::extract(&spec, d, rules).expect("rule extraction succeeds"))
        .collect()
}

// ---------------------------------------------------------------------------
// 1. The evaluator agrees with a brute-force confusion enumerator.
// ---------------------------------------------------------------------------

/// Independent re-statement of the matching definition. Scalars enumerate
/// the four presence cases directly; lists intersect value multisets by
/// per-value minimum counts.
fn oracle_confusion(spec: &TaskSpec, gold: &FieldMap, pred: &FieldMap) -> BTreeMap<String, Confusion> {
    let mut out = BTreeMap::new();
    for schema in &spec.fields {
        let g: &[String] = gold.get(&schema.name).map_or(&[], Vec::as_slice);
        let p: &[String] = pred.get(&schema.name).map_or(&[], Vec::as_slice);
        let mut c = Confusion::default();
        match schema.kind {
            FieldKind::Scalar => {
                if g.is_empty() && p.is_empty() {
                    c.tn = 1;
                } else if g.is_empty() {
                    c.fp = 1;
                } else if p.is_empty() {
                    c.r#fn = 1;
                } else if g[0] == p[0] {
                    c.tp = 1;
                } else {
                    c.fp = 1;
                }
            }
            FieldKind::List => {
                if g.is_empty() && p.is_empty() {
                    c.tn = 1;
                } else {
                    let mut matched = 0u64;
                    let distinct: std::collections::BTreeSet<&String> = g.iter().collect();
                    for value in distinct {
                        let in_gold = g.iter().filter(|v| *v == value).count() as u64;
                        let in_pred = p.iter().filter(|v| *v == value).count() as u64;
                        matched += in_gold.min(in_pred);
                    }
                    c.tp = matched;
                    c.fp = p.len() as u64 - matched;
                    c.r#fn = g.len() as u64 - matched;
                }
            }
        }
        out.insert(schema.name.clone(), c);
    }
    out
}

/// Random field-map over `spec` with at most `max_list` values per list
/// field, drawn from a small pool so collisions (and duplicates) happen.
fn random_fields(spec: &TaskSpec, rng: &mut ChaCha8Rng, max_list: usize) -> FieldMap {
    const POOL: [&str; 6] = ["alpha", "beta", "gamma", "delta", "42", "7 won"];
    let mut map = FieldMap::new();
    for schema in &spec.fields {
        let n = match schema.kind {
            FieldKind::Scalar => usize::from(rng.gen::<f64>() < 0.7),
            FieldKind::List => rng.gen_range(0..=max_list),
        };
        if n > 0 {
            let values =
                (0..n).map(|_| POOL[rng.gen_range(0..POOL.len())].to_string()).collect();
            map.insert(schema.name.clone(), values);
        }
    }
    map
}

#[test]
fn metric_agrees_with_bruteforce_oracle() {
    criterion(1, "metric-oracle-equivalence", 5, || {
        // Built-in specs with one to three fields, covering both kinds.
        let specs =
            [builtin_task(Task::Embezzlement), builtin_task(Task::Fraud), builtin_task(Task::RulingCivil)];
        let opts = EvalOptions { normalize: false };
        let mut rng = ChaCha8Rng::seed_from_u64(9001);
        let mut totals: Vec<BTreeMap<String, Confusion>> =
            vec![BTreeMap::new(), BTreeMap::new(), BTreeMap::new()];
        let mut datasets: Vec<(Vec<Document>, Vec<Extraction>)> =
            vec![(vec![], vec![]), (vec![], vec![]), (vec![], vec![])];

        for fixture in 0..500 {
            let which = fixture % specs.len();
            let spec = &specs[which];
            let gold = random_fields(spec, &mut rng, 4);
            // Half the predicted values copy gold so true positives occur.
            let pred = if rng.gen::<f64>() < 0.5 {
                gold.clone()
            } else {
                random_fields(spec, &mut rng, 4)
            };

            let doc = Document {
                id: format!("fx-{fixture}"),
                category: spec.task,
                facts: String::new(),
                ruling: String::new(),
                year: 2020,
                labels: gold.clone(),
            };
            let extraction = Extraction {
                id: doc.id.clone(),
                task: spec.task,
                fields: pred.clone(),
                confidence: 1.0,
                provenance: Provenance::Rule,
                malformed: false,
            };

            let eval = eval_dataset(spec, &[doc.clone()], &[extraction.clone()], &opts)
                .expect("single-fixture evaluation");
            let oracle = oracle_confusion(spec, &gold, &pred);
            for (field, expected) in &oracle {
                let got = &eval.fields[field];
                assert_eq!(
                    &got.confusion, expected,
                    "fixture {fixture} field {field}: evaluator {:?} vs oracle {expected:?}",
                    got.confusion
                );
                // F1 from the oracle counts must match the reported F1.
                let denom = 2 * expected.tp + expected.fp + expected.r#fn;
                let want_f1 =
                    (denom > 0).then(|| 2.0 * expected.tp as f64 / denom as f64);
                assert_eq!(got.f1, want_f1, "fixture {fixture} field {field} f1");
                let slot = totals[which].entry(field.clone()).or_default();
                slot.add(expected);
            }
            datasets[which].0.push(doc);
            datasets[which].1.push(extraction);
        }

        // Accumulation over a whole dataset equals the summed oracle.
        for (which, spec) in specs.iter().enumerate() {
            let (docs, preds) = &datasets[which];
            let eval = eval_dataset(spec, docs, preds, &opts).expect("batch evaluation");
            for (field, expected) in &totals[which] {
                assert_eq!(
                    &eval.fields[field].confusion, expected,
                    "accumulated counts for {field}"
                );
            }
        }
    });
}

// ---------------------------------------------------------------------------
// 2. Delinearize inverts linearize on well-formed field-maps.
// ---------------------------------------------------------------------------

/// A value that survives the segment syntax: nonempty, trimmed, free of
/// the `". "` and `", "` delimiters, and not the absent marker.
fn random_value(rng: &mut ChaCha8Rng) -> String {
    const CHARS: &[u8] = b"abcdefghijklmnopqrstuvwxyz0123456789 %-";
    loop {
        let len = rng.gen_range(1..=12);
        let raw: String =
            (0..len).map(|_| CHARS[rng.gen_range(0..CHARS.len())] as char).collect();
        let v = raw.trim().to_string();
        if !v.is_empty() && !v.eq_ignore_ascii_case("none") {
            return v;
        }
    }
}

#[test]
fn linearization_round_trips() {
    criterion(2, "linearize-round-trip", 5, || {
        let mut rng = ChaCha8Rng::seed_from_u64(777);
        for task in Task::ALL {
            let spec = builtin_task(task);
            for _ in 0..1000 {
                let mut fields = FieldMap::new();
                for schema in &spec.fields {
                    let n = match schema.kind {
                        FieldKind::Scalar => usize::from(rng.gen::<f64>() < 0.8),
                        FieldKind::List => {
                            if rng.gen::<f64>() < 0.8 {
                                rng.gen_range(1..=4)
                            } else {
                                0
                            }
                        }
                    };
                    if n > 0 {
                        let values = (0..n).map(|_| random_value(&mut rng)).collect();
                        fields.insert(schema.name.clone(), values);
                    }
                }
                let text = linearize(&spec, &fields).expect("well-formed map linearizes");
                let back = delinearize(&spec, &text);
                assert!(!back.malformed, "round-trip flagged malformed: {text:?}");
                assert_eq!(back.fields, fields, "round-trip mismatch on {text:?}");
            }
        }
    });
}

// ---------------------------------------------------------------------------
// 3. The rule engine is exact on clean text and robust to distractors.
// ---------------------------------------------------------------------------

#[test]
fn rules_are_exact_on_clean_text_and_survive_noise() {
    criterion(3, "rule-engine-f1", 30, || {
        let rule_tasks =
            [Task::DrunkDriving, Task::Embezzlement, Task::Fraud, Task::RulingCriminal];
        let counts: Vec<(Task, usize)> = rule_tasks.iter().map(|t| (*t, 100)).collect();
        let rules = RuleSet::builtin();
        let opts = EvalOptions::default();

        let clean = synth(&counts, 202);
        for task in rule_tasks {
            let spec = builtin_task(task);
            let docs: Vec<Document> =
                clean.iter().filter(|d| d.category == task).cloned().collect();
            let preds = rule_extract(task, &docs, &rules);
            let eval = eval_dataset(&spec, &docs, &preds, &opts).expect("clean evaluation");
            for (field, fe) in &eval.fields {
                assert_eq!(
                    fe.f1,
                    Some(1.0),
                    "{task} field {field} below 1.0 on clean text: {:?}",
                    fe.confusion
                );
            }
        }

        // Same seed with distractor clauses: planted labels are unchanged,
        // and the money heuristics must absorb the added decoy amounts.
        let noisy_cfg = SynthConfig {
            counts: counts.iter().copied().collect(),
            seed: 202,
            noise_rate: 0.1,
            ..SynthConfig::default()
        };
        let noisy = generate_synthetic(&noisy_cfg).expect("noisy corpus generates");
        let stressed: [(Task, &[&str]); 3] = [
            (Task::Embezzlement, &["embezzled_money"]),
            (Task::Fraud, &["loss", "loss_aiding"]),
            (Task::RulingCriminal, &["fine"]),
        ];
        for (task, fields) in stressed {
            let spec = builtin_task(task);
            let docs: Vec<Document> =
                noisy.iter().filter(|d| d.category == task).cloned().collect();
            let preds = rule_extract(task, &docs, &rules);
            let eval = eval_dataset(&spec, &docs, &preds, &opts).expect("noisy evaluation");
            for field in fields {
                let f1 = eval.fields[*field].f1.expect("stressed field observed");
                assert!(f1 >= 0.90, "{task} field {field} f1 {f1} under noise");
            }
        }
    });
}

// ---------------------------------------------------------------------------
// 4. Analytic gradients match central finite differences everywhere.
// ---------------------------------------------------------------------------

#[test]
fn gradients_match_finite_differences() {
    criterion(4, "gradient-check", 60, || {
        let report = grad_check(7, 200);
        assert!(report.n_checked >= 200, "only {} coordinates checked", report.n_checked);
        assert!(
            report.max_rel_err <= 1e-4,
            "max relative error {} at {}",
            report.max_rel_err,
            report.worst_tensor
        );
        // Every parameter group is sampled: embeddings, projection, each
        // encoder/decoder block, and every task's soft prompt.
        for tc in &report.tensors {
            assert!(tc.n_checked >= 1, "tensor {} unchecked", tc.tensor);
        }
        let names: Vec<&str> = report.tensors.iter().map(|t| t.tensor.as_str()).collect();
        for prefix in ["embed", "out_proj", "enc0.", "dec0.", "prompt."] {
            assert!(
                names.iter().any(|n| n.starts_with(prefix)),
                "no tensor under group {prefix}"
            );
        }
        let prompts = names.iter().filter(|n| n.starts_with("prompt.")).count();
        assert_eq!(prompts, Task::ALL.len(), "one prompt tensor per task");
    });
}

// ---------------------------------------------------------------------------
// 5. Prompt-tuning cannot touch the shared backbone.
// ---------------------------------------------------------------------------

#[test]
fn prompt_tuning_freezes_the_backbone() {
    criterion(5, "prompt-tune-freeze", 120, || {
        let docs = synth(&Task::ALL.iter().map(|t| (*t, 2)).collect::<Vec<_>>(), 13);
        let mut params = ModelParams::new(Hyper::toy(), 5);
        let base_before = serde_json::to_string(&params.base).expect("base serializes");
        let prompts_before = serde_json::to_string(&params.prompts).expect("prompts serialize");

        let opts = TrainOpts {
            epochs: 5,
            lr: lexora::genix::default_lr(TuneMode::PromptOnly),
            mode: TuneMode::PromptOnly,
            eval_every: 0,
            target_field_acc: None,
            seed: 5,
            ..TrainOpts::default()
        };
        let result = train(&mut params, &docs, &[], &opts).expect("prompt tuning runs");
        assert_eq!(result.epochs_run, 5);

        let base_after = serde_json::to_string(&params.base).expect("base serializes");
        let prompts_after = serde_json::to_string(&params.prompts).expect("prompts serialize");
        assert_eq!(base_before, base_after, "backbone bytes changed during prompt tuning");
        assert_ne!(prompts_before, prompts_after, "prompts never moved; tuning was a no-op");
    });
}

// ---------------------------------------------------------------------------
// 6. Fine-tuning memorizes a 50-example/task corpus inside 100 epochs.
// ---------------------------------------------------------------------------

const OVERFIT_LR: f64 = 3e-3;
const OVERFIT_BATCH: usize = 8;

#[test]
fn finetune_overfits_small_corpus() {
    criterion(6, "finetune-overfit", 600, || {
        let docs = synth(&Task::ALL.iter().map(|t| (*t, 50)).collect::<Vec<_>>(), 11);
        let mut params = ModelParams::new(Hyper::toy(), 11);
        let opts = TrainOpts {
            epochs: 100,
            lr: OVERFIT_LR,
            batch: OVERFIT_BATCH,
            mode: TuneMode::Full,
            target_field_acc: Some(0.95),
            eval_every: 10,
            seed: 11,
        };
        let result = train(&mut params, &docs, &docs, &opts).expect("fine-tuning runs");
        let acc = result.final_field_acc.expect("accuracy measured");
        assert!(
            result.reached_target,
            "train field accuracy {acc:.3} after {} epochs, needed 0.95",
            result.epochs_run
        );
    });
}

// ---------------------------------------------------------------------------
// 7. More training data does not hurt: 200/task beats (or ties) 50/task.
// ---------------------------------------------------------------------------

const SCALING_EPOCHS: usize = 10;

#[test]
fn more_training_data_scores_at_least_as_well() {
    criterion(7, "data-scaling-trend", 1800, || {
        let mut f1_small = 0.0;
        let mut f1_large = 0.0;
        for seed in [1u64, 2, 3] {
            let pool = synth(&Task::ALL.iter().map(|t| (*t, 200)).collect::<Vec<_>>(), seed);
            // The 50/task subset: generation is per-index seeded, so the
            // first 50 ids per task are the same documents.
            let small: Vec<Document> = Task::ALL
                .iter()
                .flat_map(|t| {
                    pool.iter().filter(|d| d.category == *t).take(50).cloned()
                })
                .collect();
            let test =
                synth(&Task::ALL.iter().map(|t| (*t, 25)).collect::<Vec<_>>(), seed + 1000);

            for (train_docs, total) in [(&small, &mut f1_small), (&pool, &mut f1_large)] {
                let mut params = ModelParams::new(Hyper::toy(), seed);
                let opts = TrainOpts {
                    epochs: SCALING_EPOCHS,
                    lr: OVERFIT_LR,
                    batch: OVERFIT_BATCH,
                    mode: TuneMode::Full,
                    target_field_acc: None,
                    eval_every: 0,
                    seed,
                };
                train(&mut params, train_docs, &[], &opts).expect("training runs");

                let mut tasks = Vec::new();
                for task in Task::ALL {
                    let spec = builtin_task(task);
                    let docs: Vec<Document> =
                        test.iter().filter(|d| d.category == task).cloned().collect();
                    let preds: Vec<Extraction> = docs
                        .iter()
                        .map(|d| extract_with_model(&params, &spec, d).expect("decode"))
                        .collect();
                    tasks.push(
                        eval_dataset(&spec, &docs, &preds, &EvalOptions::default())
                            .expect("test evaluation"),
                    );
                }
                let report = EvalReport::from_tasks(tasks);
                *total += report.mean_avg_f1.expect("test F1 defined");
            }
        }
        f1_small /= 3.0;
        f1_large /= 3.0;
        println!("  mean test F1: 50/task {f1_small:.4}, 200/task {f1_large:.4}");
        assert!(
            f1_large >= f1_small,
            "200/task scored {f1_large:.4}, below 50/task {f1_small:.4}"
        );
    });
}

// ---------------------------------------------------------------------------
// 8. Calibration picks the largest threshold meeting the recall target.
// ---------------------------------------------------------------------------

#[test]
fn calibration_matches_exhaustive_scan() {
    criterion(8, "calibration-scan", 10, || {
        let spec = builtin_task(Task::DrunkDriving);
        let docs = synth(&[(Task::DrunkDriving, 60)], 21);
        let rules = RuleSet::builtin();
        let mut preds = rule_extract(Task::DrunkDriving, &docs, &rules);

        // Grade the predictions: every fifth one is damaged and tends to
        // sit lower on the confidence scale, with deliberate overlap.
        let mut rng = ChaCha8Rng::seed_from_u64(88);
        for (i, p) in preds.iter_mut().enumerate() {
            let u: f64 = rng.gen();
            if i % 5 == 0 {
                p.fields.insert("bac".into(), vec!["9.999%".into()]);
                p.fields.remove("criminal_record");
                p.confidence = 0.30 + 0.40 * u;
            } else {
                p.confidence = 0.50 + 0.50 * u;
            }
        }

        let opts = EvalOptions::default();
        let gold_total: u64 = docs
            .iter()
            .flat_map(|d| spec.fields.iter().map(|f| d.labels.get(&f.name).map_or(0, |v| v.len() as u64)))
            .sum();
        let recall_at = |threshold: f64| -> f64 {
            let tp: u64 = docs
                .iter()
                .map(|d| {
                    let pred = preds.iter().find(|p| p.id == d.id).expect("prediction per doc");
                    if pred.confidence >= threshold {
                        match_fields(&spec, &d.labels, &pred.fields, true)
                            .values()
                            .map(|c| c.tp)
                            .sum()
                    } else {
                        0
                    }
                })
                .sum();
            tp as f64 / gold_total as f64
        };

        for target in [0.84, 0.81, 0.60] {
            let outcome = calibrate_threshold(&spec, &docs, &preds, target, &opts)
                .expect("calibration runs");

            // Exhaustive scan over every observed confidence plus zero.
            let mut candidates: Vec<f64> = preds.iter().map(|p| p.confidence).collect();
            candidates.push(0.0);
            candidates.sort_by(f64::total_cmp);
            let best = candidates
                .iter()
                .copied()
                .filter(|t| recall_at(*t) >= target)
                .fold(f64::NEG_INFINITY, f64::max);

            assert!(outcome.attainable, "target {target} should be attainable here");
            assert_eq!(
                outcome.threshold, best,
                "target {target}: calibrated {} vs scanned best {best}",
                outcome.threshold
            );
            let achieved = outcome.recall.expect("recall defined");
            assert!(achieved >= target, "achieved recall {achieved} under target {target}");
            // Maximality: every strictly larger candidate misses the target.
            for t in candidates.iter().filter(|t| **t > best) {
                assert!(
                    recall_at(*t) < target,
                    "candidate {t} above the chosen threshold also meets {target}"
                );
            }
        }
    });
}

// ---------------------------------------------------------------------------
// 9. The full pipeline recovers the planted sentencing means.
// ---------------------------------------------------------------------------

#[test]
fn pipeline_recovers_planted_means() {
    criterion(9, "planted-means", 60, || {
        let docs = synth(&[(Task::DrunkDriving, 2000)], 42);
        let rules = RuleSet::builtin();
        let facts = rule_extract(Task::DrunkDriving, &docs, &rules);
        let rulings = rule_extract(Task::RulingCriminal, &docs, &rules);
        let records = build_records(&docs, &facts, &rulings).expect("records build");

        let rows = yearly_means(&records, &[(2017, 2018), (2019, 2022)]);
        let planted = [
            (2017, false, 5.3),
            (2017, true, 7.7),
            (2019, false, 8.9),
            (2019, true, 11.9),
        ];
        assert_eq!(rows.len(), 4, "four regime cells expected: {rows:?}");
        for (year_min, prior, mean) in planted {
            let row = rows
                .iter()
                .find(|r| r.year_min == year_min && r.prior_record == prior)
                .unwrap_or_else(|| panic!("missing cell {year_min}/{prior}"));
            assert!(
                (row.mean_months - mean).abs() <= 0.3,
                "cell {year_min}/prior={prior}: recovered {:.2} vs planted {mean} (n={})",
                row.mean_months,
                row.n
            );
        }
    });
}

// ---------------------------------------------------------------------------
// 10. The planted loss/sentence regression and fine-share trend survive.
// ---------------------------------------------------------------------------

#[test]
fn pipeline_recovers_planted_regression() {
    criterion(10, "planted-regression", 60, || {
        let cfg = SynthConfig {
            counts: [(Task::Fraud, 2000)].into_iter().collect(),
            seed: 42,
            loss_sigma: 1.0,
            ..SynthConfig::default()
        };
        let docs = generate_synthetic(&cfg).expect("fraud corpus generates");
        let rules = RuleSet::builtin();
        let facts = rule_extract(Task::Fraud, &docs, &rules);
        let rulings = rule_extract(Task::RulingCriminal, &docs, &rules);
        let records = build_records(&docs, &facts, &rulings).expect("records build");

        let fit = ols_months_vs_log_loss(&records).expect("regression fits");
        assert!(
            (fit.slope - 4.0).abs() <= 0.2,
            "slope {:.3} more than 5% from 4.0 (n={})",
            fit.slope,
            fit.n
        );

        let shares = sentence_type_shares(&records, &[5.0, 6.0, 7.0, 8.0, 9.0]);
        assert!(shares.len() >= 2, "need both extreme buckets: {shares:?}");
        let bottom = shares.first().expect("bottom bucket");
        let top = shares.last().expect("top bucket");
        assert!(
            top.fine_share < bottom.fine_share,
            "fine share should fall with loss: bottom {:.3} vs top {:.3}",
            bottom.fine_share,
            top.fine_share
        );
    });
}

// ---------------------------------------------------------------------------
// 11. Identical CLI runs produce byte-identical artifacts.
// ---------------------------------------------------------------------------

fn run_in(dir: &Path, args: &[&str]) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_lexora"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "command {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out.stdout
}

#[test]
fn identical_runs_are_byte_identical() {
    criterion(11, "determinism", 120, || {
        let root = tempfile::tempdir().unwrap();
        let steps: Vec<Vec<&str>> = vec![
            vec!["gen-corpus", "--out", "docs.jsonl", "--count", "30", "--seed", "9", "--noise-rate", "0.1"],
            vec!["split", "--docs", "docs.jsonl", "--out-dir", "split", "--n-train", "100", "--n-test", "40", "--seed", "9"],
            vec!["extract", "--docs", "docs.jsonl", "--task", "fraud", "--engine", "rule", "--out", "fraud.jsonl", "--jobs", "2"],
            vec!["extract", "--docs", "docs.jsonl", "--task", "ruling_criminal", "--engine", "rule", "--out", "ruling.jsonl"],
            vec!["eval", "--gold", "docs.jsonl", "--pred", "fraud.jsonl"],
            vec!["calibrate", "--gold", "docs.jsonl", "--pred", "fraud.jsonl", "--task", "fraud", "--target-recall", "0.8", "--out", "gate.json"],
            vec!["analyze", "--docs", "docs.jsonl", "--facts", "fraud.jsonl", "--ruling", "ruling.jsonl", "--task", "fraud", "--out-dir", "analysis"],
        ];

        let mut stdouts: Vec<Vec<Vec<u8>>> = Vec::new();
        for run in 0..2 {
            let dir = root.path().join(format!("run{run}"));
            std::fs::create_dir(&dir).unwrap();
            stdouts.push(steps.iter().map(|s| run_in(&dir, s)).collect());
        }
        for (i, step) in steps.iter().enumerate() {
            assert_eq!(stdouts[0][i], stdouts[1][i], "stdout differs for {step:?}");
        }

        let artifacts = [
            "docs.jsonl",
            "split/train.jsonl",
            "split/valid.jsonl",
            "split/test.jsonl",
            "fraud.jsonl",
            "ruling.jsonl",
            "gate.json",
            "analysis/regimes.csv",
            "analysis/shares.csv",
            "analysis/regression.svg",
        ];
        for name in artifacts {
            let a = std::fs::read(root.path().join("run0").join(name))
                .unwrap_or_else(|e| panic!("missing {name} in run0: {e}"));
            let b = std::fs::read(root.path().join("run1").join(name))
                .unwrap_or_else(|e| panic!("missing {name} in run1: {e}"));
            assert_eq!(a, b, "artifact {name} differs between identical runs");
        }
    });
}
