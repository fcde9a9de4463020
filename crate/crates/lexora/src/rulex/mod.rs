//! Rule-based extraction engine.
//!
//! Each task owns a list of field rules. A rule pairs a trigger pattern
//! with a selection strategy; the first rule that yields a value wins for
//! its field. The built-in ruleset targets the synthetic grammar; real
//! corpora supply their own rules file (TOML, see [`load_ruleset`]).

mod duration;
mod money;
pub mod text;

pub use duration::{parse_duration, Duration, DurationKind};
pub use money::{parse_money, MoneyValue, MONEY_PATTERN};

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::extraction::{Extraction, Provenance};
use crate::taskschema::{builtin_task, FieldMap, FieldSchema, Task, TaskSpec, ValueClass};
use text::{sentence_at, sentences};

static TOTAL_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\btotal\b").unwrap());
static AID_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\baid\w*").unwrap());
static PERCENT_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\d+(?:\.\d+)?%").unwrap());
static COUNT_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\d+").unwrap());
static DISTANCE_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b\d+m\b").unwrap());
static MONEY_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(MONEY_PATTERN).unwrap());

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Value = capture group of the first trigger match.
    FirstMatch,
    /// Value = last monetary value in the text.
    LastMoney,
    /// Value = last total-marked monetary value, else the last one.
    TotalElseLast,
    /// Fraud money routing: the last money goes to the aiding field when
    /// its sentence mentions aiding; a total-marked money stays principal.
    AidingSplit,
    /// Value = first value of the field's class after the trigger, inside
    /// the first sentence that contains both.
    IndicatorSentence,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FieldRule {
    pub field: String,
    /// Regular expression source.
    pub trigger: String,
    /// Capture group holding the value (first_match only).
    #[serde(default)]
    pub capture: usize,
    pub strategy: Strategy,
    /// Constant emitted instead of the captured text, for triggers that
    /// imply a value (e.g. a repeat-offense phrase implying count "1").
    #[serde(default)]
    pub emit: Option<String>,
}

#[derive(Debug)]
struct CompiledRule {
    rule: FieldRule,
    re: Regex,
}

/// Validated, compiled rules grouped by task.
#[derive(Debug)]
pub struct RuleSet {
    tasks: BTreeMap<Task, Vec<CompiledRule>>,
}

impl RuleSet {
    /// The built-in ruleset covering the four criminal tasks.
    pub fn builtin() -> RuleSet {
        compile(builtin_rules()).expect("built-in rules compile")
    }

    pub fn has_task(&self, task: Task) -> bool {
        self.tasks.contains_key(&task)
    }

    fn rules_for<'a>(
        &'a self,
        task: Task,
        field: &'a str,
    ) -> impl Iterator<Item = &'a CompiledRule> + 'a {
        self.tasks
            .get(&task)
            .into_iter()
            .flatten()
            .filter(move |c| c.rule.field == field)
    }
}

fn rule(field: &str, trigger: &str, capture: usize, strategy: Strategy, emit: Option<&str>) -> FieldRule {
    FieldRule {
        field: field.to_string(),
        trigger: trigger.to_string(),
        capture,
        strategy,
        emit: emit.map(str::to_string),
    }
}

fn builtin_rules() -> BTreeMap<Task, Vec<FieldRule>> {
    use Strategy::*;
    BTreeMap::from([
        (
            Task::DrunkDriving,
            vec![
                rule("bac", r"(\d+\.\d+%)", 1, FirstMatch, None),
                rule("distance", r"\b(\d+m)\b", 1, FirstMatch, None),
                rule("vehicle", r"\bdrove an? ([a-z]+)", 1, FirstMatch, None),
                rule("criminal_record", r"\b(\d+) prior convictions?\b", 1, FirstMatch, None),
                rule("criminal_record", r"(?i)\bpreviously convicted\b", 0, FirstMatch, Some("1")),
            ],
        ),
        (
            Task::Embezzlement,
            vec![rule("embezzled_money", MONEY_PATTERN, 0, TotalElseLast, None)],
        ),
        (
            Task::Fraud,
            vec![
                rule("loss", MONEY_PATTERN, 0, AidingSplit, None),
                rule("loss_aiding", MONEY_PATTERN, 0, AidingSplit, None),
            ],
        ),
        (
            Task::RulingCriminal,
            vec![
                rule("fine", r"(?i)\bfine\b", 0, IndicatorSentence, None),
                rule("imprisonment", r"(?i)imprison", 0, IndicatorSentence, None),
                rule("suspension", r"(?i)suspen", 0, IndicatorSentence, None),
                rule("education", r"(?i)\beducation\b", 0, IndicatorSentence, None),
                rule("community_service", r"(?i)\bcommunity service\b", 0, IndicatorSentence, None),
            ],
        ),
    ])
}

fn compile(defs: BTreeMap<Task, Vec<FieldRule>>) -> Result<RuleSet> {
    let mut tasks = BTreeMap::new();
    for (task, list) in defs {
        let spec = builtin_task(task);
        let mut compiled = Vec::with_capacity(list.len());
        for def in list {
            if spec.field(&def.field).is_none() {
                return Err(Error::UnknownField { task: task.to_string(), field: def.field });
            }
            let re = Regex::new(&def.trigger).map_err(|e| Error::BadPattern {
                field: def.field.clone(),
                msg: e.to_string(),
            })?;
            if def.capture >= re.captures_len() {
                return Err(Error::BadPattern {
                    field: def.field.clone(),
                    msg: format!("capture group {} not present in pattern", def.capture),
                });
            }
            compiled.push(CompiledRule { rule: def, re });
        }
        for field in &spec.fields {
            if !compiled.iter().any(|c| c.rule.field == field.name) {
                return Err(Error::Config(format!(
                    "task {task} has no rule for field {:?}",
                    field.name
                )));
            }
        }
        tasks.insert(task, compiled);
    }
    Ok(RuleSet { tasks })
}

/// TOML rules file: `[[<task>.rules]]` tables override the built-in rules
/// of the named fields; everything else stays default.
#[derive(Debug, Deserialize)]
struct TaskRulesFile {
    rules: Vec<FieldRule>,
}

/// Load a ruleset. `None` returns the built-in set; a path merges the
/// file's per-field rules over the built-ins.
pub fn load_ruleset(path: Option<&Path>) -> Result<RuleSet> {
    let mut defs = builtin_rules();
    let Some(path) = path else {
        return compile(defs);
    };
    let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: BTreeMap<String, TaskRulesFile> =
        toml::from_str(&raw).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    for (task_id, table) in file {
        let task = Task::from_id(&task_id)?;
        let entry = defs.entry(task).or_default();
        // A field mentioned in the file loses all its built-in rules; the
        // file may still list several rules for that field itself.
        entry.retain(|builtin| !table.rules.iter().any(|def| def.field == builtin.field));
        entry.extend(table.rules);
    }
    compile(defs)
}

struct ScanContext {
    sentences: Vec<(usize, usize)>,
    moneys: Vec<MoneyValue>,
}

impl ScanContext {
    fn new(src: &str) -> ScanContext {
        ScanContext { sentences: sentences(src), moneys: parse_money(src) }
    }

    fn sentence_text<'a>(&self, src: &'a str, pos: usize) -> Option<(&'a str, usize)> {
        sentence_at(&self.sentences, pos).map(|(s, e)| (&src[s..e], s))
    }
}

/// The money announced by the word "total": for each "total" in the text,
/// the first money after it in the same sentence. With several markers the
/// last pairing wins, parallel to the last-money fallback.
fn total_marked<'a>(src: &str, ctx: &'a ScanContext) -> Option<&'a MoneyValue> {
    let mut picked = None;
    for t in TOTAL_RE.find_iter(src) {
        let Some((_, end)) = sentence_at(&ctx.sentences, t.start()) else { continue };
        if let Some(m) = ctx.moneys.iter().find(|m| m.start >= t.end() && m.start < end) {
            picked = Some(m);
        }
    }
    picked
}

fn total_else_last<'a>(src: &str, ctx: &'a ScanContext) -> Option<&'a MoneyValue> {
    total_marked(src, ctx).or_else(|| ctx.moneys.last())
}

/// Split the document's money between principal loss and aided loss.
fn aiding_split<'a>(src: &str, ctx: &'a ScanContext) -> (Option<&'a MoneyValue>, Option<&'a MoneyValue>) {
    let last = ctx.moneys.last();
    let total = total_marked(src, ctx);
    if let Some(last) = last {
        let in_aid_sentence = ctx
            .sentence_text(src, last.start)
            .is_some_and(|(sent, _)| AID_RE.is_match(sent));
        if in_aid_sentence {
            let main = total.filter(|t| t.start != last.start);
            return (main, Some(last));
        }
    }
    (total.or(last), None)
}

/// First value of `class` in `sent` starting at or after byte `from`.
fn class_value(class: ValueClass, sent: &str, from: usize) -> Option<String> {
    let by_regex = |re: &Regex| re.find_at(sent, from).map(|m| m.as_str().to_string());
    match class {
        ValueClass::Money => by_regex(&MONEY_RE),
        ValueClass::Percentage => by_regex(&PERCENT_RE),
        ValueClass::Count => by_regex(&COUNT_RE),
        ValueClass::Distance => by_regex(&DISTANCE_RE),
        ValueClass::Duration => parse_duration(sent)
            .into_iter()
            .find(|d| d.start >= from && matches!(d.value, DurationKind::Months(_)))
            .map(|d| d.raw),
        ValueClass::Hours => parse_duration(sent)
            .into_iter()
            .find(|d| d.start >= from && matches!(d.value, DurationKind::Hours(_)))
            .map(|d| d.raw),
        ValueClass::Vehicle => None,
    }
}

fn apply_indicator(
    schema: &FieldSchema,
    compiled: &CompiledRule,
    src: &str,
    ctx: &ScanContext,
    others: &[&CompiledRule],
    warnings: &mut Vec<String>,
) -> Option<String> {
    for (s, e) in &ctx.sentences {
        let sent = &src[*s..*e];
        let Some(trigger) = compiled.re.find(sent) else { continue };
        let Some(value) = class_value(schema.value_class, sent, trigger.end()) else { continue };
        for other in others {
            if other.rule.field != compiled.rule.field && other.re.is_match(sent) {
                warnings.push(format!(
                    "sentence matches indicators for both {:?} and {:?}: {sent:?}",
                    compiled.rule.field, other.rule.field
                ));
            }
        }
        return Some(value);
    }
    None
}

/// Extract all of `spec`'s fields from one document, collecting ambiguity
/// warnings instead of logging them.
pub fn extract_with_warnings(
    spec: &TaskSpec,
    doc: &Document,
    rules: &RuleSet,
) -> Result<(Extraction, Vec<String>)> {
    if !spec.task.applies_to(doc.category) {
        return Err(Error::TaskMismatch {
            task: spec.task.to_string(),
            category: doc.category.to_string(),
        });
    }
    if !rules.has_task(spec.task) {
        return Err(Error::Invalid(format!("ruleset has no rules for task {}", spec.task)));
    }
    let src = doc.source_for(spec.task);
    let ctx = ScanContext::new(src);
    let indicator_rules: Vec<&CompiledRule> = rules
        .tasks
        .get(&spec.task)
        .map(|list| list.iter().filter(|c| c.rule.strategy == Strategy::IndicatorSentence).collect())
        .unwrap_or_default();

    let mut warnings = Vec::new();
    let mut fields = FieldMap::new();
    for schema in &spec.fields {
        for compiled in rules.rules_for(spec.task, &schema.name) {
            let value: Option<Vec<String>> = match compiled.rule.strategy {
                Strategy::FirstMatch => compiled.re.captures(src).map(|caps| {
                    let text = caps.get(compiled.rule.capture).map_or("", |m| m.as_str());
                    vec![compiled.rule.emit.clone().unwrap_or_else(|| text.to_string())]
                }),
                Strategy::LastMoney => ctx.moneys.last().map(|m| vec![m.raw.clone()]),
                Strategy::TotalElseLast => {
                    total_else_last(src, &ctx).map(|m| vec![m.raw.clone()])
                }
                Strategy::AidingSplit => {
                    let (main, aiding) = aiding_split(src, &ctx);
                    let chosen = if schema.name.contains("aiding") { aiding } else { main };
                    chosen.map(|m| vec![m.raw.clone()])
                }
                Strategy::IndicatorSentence => {
                    apply_indicator(schema, compiled, src, &ctx, &indicator_rules, &mut warnings)
                        .map(|v| vec![v])
                }
            };
            if let Some(values) = value {
                fields.insert(schema.name.clone(), values);
                break;
            }
        }
    }
    let extraction = Extraction {
        id: doc.id.clone(),
        task: spec.task,
        fields,
        confidence: 1.0,
        provenance: Provenance::Rule,
        malformed: false,
    };
    Ok((extraction, warnings))
}

/// [`extract_with_warnings`], with warnings routed to the log.
pub fn extract(spec: &TaskSpec, doc: &Document, rules: &RuleSet) -> Result<Extraction> {
    let (extraction, warnings) = extract_with_warnings(spec, doc, rules)?;
    for w in warnings {
        log::warn!("{}: {w}", doc.id);
    }
    Ok(extraction)
}
