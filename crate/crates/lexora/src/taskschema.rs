//! Extraction task definitions and the linearized output format shared by
//! the generative model, the rule engine, and the evaluator.
//!
//! A task's output is a single string of `. `-separated segments, one per
//! field in schema order. A present field renders as `<phrase> <value>`
//! (list values joined by `, `); an absent field renders as the absent
//! token. The whole string ends with a period:
//!
//! ```text
//! fine 10,000 won. prison 6 months. suspension 12 months. none. none.
//! ```
//!
//! Field phrases are deliberately single words: the generative extractor
//! produces these strings character by character, so every phrase
//! character is decoding time and a chance to derail, while the phrase
//! itself only needs to keep segments readable.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The five built-in extraction tasks. The first three read a document's
/// facts section; the ruling tasks read the ruling section.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    DrunkDriving,
    Embezzlement,
    Fraud,
    RulingCriminal,
    RulingCivil,
}

impl Task {
    pub const ALL: [Task; 5] = [
        Task::DrunkDriving,
        Task::Embezzlement,
        Task::Fraud,
        Task::RulingCriminal,
        Task::RulingCivil,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Task::DrunkDriving => "drunk_driving",
            Task::Embezzlement => "embezzlement",
            Task::Fraud => "fraud",
            Task::RulingCriminal => "ruling_criminal",
            Task::RulingCivil => "ruling_civil",
        }
    }

    pub fn from_id(s: &str) -> Result<Task> {
        Task::ALL
            .into_iter()
            .find(|t| t.id() == s)
            .ok_or_else(|| Error::UnknownTask(s.to_string()))
    }

    /// Ruling tasks read `Document::ruling`; the rest read `Document::facts`.
    pub fn reads_ruling(self) -> bool {
        matches!(self, Task::RulingCriminal | Task::RulingCivil)
    }

    /// Whether this task can run on a document of the given category.
    /// Criminal-ruling extraction applies to every criminal document;
    /// everything else requires the matching category.
    pub fn applies_to(self, category: Task) -> bool {
        match self {
            Task::RulingCriminal => matches!(
                category,
                Task::DrunkDriving | Task::Embezzlement | Task::Fraud | Task::RulingCriminal
            ),
            t => category == t,
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Scalar,
    List,
}

/// What kind of value a field holds; drives value extraction inside
/// indicator sentences and unit conversion during analysis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueClass {
    Percentage,
    Distance,
    Vehicle,
    Count,
    Money,
    Duration,
    Hours,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldSchema {
    pub name: String,
    /// Phrase prefixed to the value inside a linearized segment.
    pub phrase: String,
    pub kind: FieldKind,
    pub value_class: ValueClass,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task: Task,
    pub fields: Vec<FieldSchema>,
    /// Declarative instruction whose characters seed the task's soft prompt.
    pub prompt_text: String,
    pub absent_token: String,
}

impl TaskSpec {
    pub fn field(&self, name: &str) -> Option<&FieldSchema> {
        self.fields.iter().find(|f| f.name == name)
    }
}

/// Field name → values. Scalar fields hold one value; an empty or missing
/// entry means the field is absent.
pub type FieldMap = BTreeMap<String, Vec<String>>;

fn field(name: &str, phrase: &str, kind: FieldKind, class: ValueClass) -> FieldSchema {
    FieldSchema { name: name.to_string(), phrase: phrase.to_string(), kind, value_class: class }
}

/// The five built-in task specs. Field names are unique across all tasks.
pub fn builtin_tasks() -> Vec<TaskSpec> {
    use FieldKind::{List, Scalar};
    use ValueClass::*;
    vec![
        TaskSpec {
            task: Task::DrunkDriving,
            fields: vec![
                field("bac", "bac", Scalar, Percentage),
                field("distance", "distance", Scalar, Distance),
                field("vehicle", "vehicle", Scalar, Vehicle),
                field("criminal_record", "record", Scalar, Count),
            ],
            prompt_text: "Extract blood alcohol level, distance, vehicle, and criminal record."
                .to_string(),
            absent_token: "none".to_string(),
        },
        TaskSpec {
            task: Task::Embezzlement,
            fields: vec![field("embezzled_money", "embezzled", List, Money)],
            prompt_text: "Extract embezzled money.".to_string(),
            absent_token: "none".to_string(),
        },
        TaskSpec {
            task: Task::Fraud,
            fields: vec![
                field("loss", "loss", List, Money),
                field("loss_aiding", "aiding", List, Money),
            ],
            prompt_text: "Extract loss and loss from aiding.".to_string(),
            absent_token: "none".to_string(),
        },
        TaskSpec {
            task: Task::RulingCriminal,
            fields: vec![
                field("fine", "fine", Scalar, Money),
                field("imprisonment", "prison", Scalar, Duration),
                field("suspension", "suspension", Scalar, Duration),
                field("education", "education", Scalar, Hours),
                field("community_service", "service", Scalar, Hours),
            ],
            prompt_text:
                "Write fine, imprisonment, suspension of execution, education, and community service in sequence."
                    .to_string(),
            absent_token: "none".to_string(),
        },
        TaskSpec {
            task: Task::RulingCivil,
            fields: vec![
                field("approved_money", "approved", Scalar, Money),
                field("litigation_cost_ratio", "ratio", Scalar, Percentage),
                field("claimed_money", "claimed", Scalar, Money),
            ],
            prompt_text: "Write approved money, litigation cost ratio, and claimed money in sequence."
                .to_string(),
            absent_token: "none".to_string(),
        },
    ]
}

/// The built-in spec for one task.
pub fn builtin_task(task: Task) -> TaskSpec {
    builtin_tasks().into_iter().find(|s| s.task == task).expect("all tasks are built in")
}

/// Render a field-map as the task's linearized output string.
///
/// Fields appear in schema order; an entry with an empty value list counts
/// as absent. Errors on label keys outside the spec.
pub fn linearize(spec: &TaskSpec, labels: &FieldMap) -> Result<String> {
    for name in labels.keys() {
        if spec.field(name).is_none() {
            return Err(Error::UnknownField {
                task: spec.task.to_string(),
                field: name.clone(),
            });
        }
    }
    let segments: Vec<String> = spec
        .fields
        .iter()
        .map(|f| match labels.get(&f.name).filter(|v| !v.is_empty()) {
            Some(values) => format!("{} {}", f.phrase, values.join(", ")),
            None => spec.absent_token.clone(),
        })
        .collect();
    Ok(format!("{}.", segments.join(". ")))
}

/// Result of parsing a (possibly malformed) linearized string.
#[derive(Clone, Debug, PartialEq)]
pub struct Delinearized {
    pub fields: FieldMap,
    /// True when the segment count does not match the schema.
    pub malformed: bool,
}

/// Parse a linearized string back into a field-map. Never fails: segments
/// are assigned positionally, the field phrase is stripped when present,
/// and a segment-count mismatch only sets the `malformed` flag.
pub fn delinearize(spec: &TaskSpec, text: &str) -> Delinearized {
    let trimmed = text.trim();
    let body = trimmed.strip_suffix('.').unwrap_or(trimmed);
    let segments: Vec<&str> =
        if body.is_empty() { Vec::new() } else { body.split(". ").collect() };
    let mut malformed = segments.len() != spec.fields.len();
    let mut fields = FieldMap::new();
    for (schema, seg) in spec.fields.iter().zip(&segments) {
        let seg = seg.trim();
        if seg == spec.absent_token {
            continue;
        }
        if seg.is_empty() {
            malformed = true;
            continue;
        }
        let value_part = strip_phrase(seg, &schema.phrase);
        let values = match schema.kind {
            FieldKind::List => value_part.split(", ").map(str::to_string).collect(),
            FieldKind::Scalar => vec![value_part.to_string()],
        };
        fields.insert(schema.name.clone(), values);
    }
    Delinearized { fields, malformed }
}

/// Strip one leading `<phrase> ` prefix, case-insensitively.
fn strip_phrase<'a>(segment: &'a str, phrase: &str) -> &'a str {
    let n = phrase.len();
    if segment.len() > n
        && segment.is_char_boundary(n)
        && segment[..n].eq_ignore_ascii_case(phrase)
        && segment.as_bytes()[n] == b' '
    {
        &segment[n + 1..]
    } else {
        segment
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ruling_spec() -> TaskSpec {
        builtin_task(Task::RulingCriminal)
    }

    fn map(entries: &[(&str, &[&str])]) -> FieldMap {
        entries
            .iter()
            .map(|(k, vs)| (k.to_string(), vs.iter().map(|v| v.to_string()).collect()))
            .collect()
    }

    #[test]
    fn builtin_has_five_tasks_with_expected_shapes() {
        let tasks = builtin_tasks();
        assert_eq!(tasks.len(), 5);
        let drunk = &tasks[0];
        assert_eq!(drunk.fields.len(), 4);
        assert!(drunk.fields.iter().all(|f| f.kind == FieldKind::Scalar));
        assert_eq!(drunk.fields[3].value_class, ValueClass::Count);
        let fraud = builtin_task(Task::Fraud);
        let names: Vec<&str> = fraud.fields.iter().map(|f| f.name.as_str()).collect();
        assert_eq!(names, ["loss", "loss_aiding"]);
        let ruling = ruling_spec();
        let names: Vec<&str> = ruling.fields.iter().map(|f| f.name.as_str()).collect();
        assert_eq!(names, ["fine", "imprisonment", "suspension", "education", "community_service"]);
    }

    #[test]
    fn field_names_unique_across_tasks() {
        let mut seen = std::collections::BTreeSet::new();
        for spec in builtin_tasks() {
            for f in &spec.fields {
                assert!(seen.insert(f.name.clone()), "field {} appears twice", f.name);
            }
        }
    }

    #[test]
    fn linearize_ruling_example() {
        let labels = map(&[
            ("fine", &["1,000,000 won"]),
            ("imprisonment", &["1 year"]),
            ("suspension", &["2 years"]),
        ]);
        let text = linearize(&ruling_spec(), &labels).unwrap();
        assert_eq!(
            text,
            "fine 1,000,000 won. prison 1 year. suspension 2 years. none. none."
        );
    }

    #[test]
    fn linearize_all_absent() {
        let text = linearize(&ruling_spec(), &FieldMap::new()).unwrap();
        assert_eq!(text, "none. none. none. none. none.");
    }

    #[test]
    fn linearize_list_values_comma_separated() {
        let spec = builtin_task(Task::Fraud);
        let labels = map(&[("loss", &["42 won", "1,926,934 won"])]);
        let text = linearize(&spec, &labels).unwrap();
        assert_eq!(text, "loss 42 won, 1,926,934 won. none.");
        let parsed = delinearize(&spec, &text);
        assert!(!parsed.malformed);
        assert_eq!(parsed.fields, labels);
    }

    #[test]
    fn linearize_rejects_unknown_field() {
        let labels = map(&[("verdict", &["guilty"])]);
        assert!(matches!(
            linearize(&ruling_spec(), &labels),
            Err(Error::UnknownField { .. })
        ));
    }

    #[test]
    fn delinearize_roundtrips_example() {
        let labels = map(&[
            ("fine", &["1,000,000 won"]),
            ("imprisonment", &["1 year"]),
            ("suspension", &["2 years"]),
        ]);
        let spec = ruling_spec();
        let parsed = delinearize(&spec, &linearize(&spec, &labels).unwrap());
        assert!(!parsed.malformed);
        assert_eq!(parsed.fields, labels);
    }

    #[test]
    fn delinearize_pads_short_output() {
        let parsed = delinearize(&ruling_spec(), "garbage");
        assert!(parsed.malformed);
        assert_eq!(parsed.fields, map(&[("fine", &["garbage"])]));
    }

    #[test]
    fn delinearize_all_absent_is_well_formed() {
        let parsed = delinearize(&ruling_spec(), "none. none. none. none. none.");
        assert!(!parsed.malformed);
        assert!(parsed.fields.is_empty());
    }

    #[test]
    fn delinearize_strips_phrase_case_insensitively() {
        let parsed = delinearize(&ruling_spec(), "Fine 500 won. none. none. none. none.");
        assert_eq!(parsed.fields, map(&[("fine", &["500 won"])]));
    }

    #[test]
    fn delinearize_ignores_extra_segments() {
        let spec = builtin_task(Task::Embezzlement);
        let parsed = delinearize(&spec, "embezzled 5 won. stray. stray.");
        assert!(parsed.malformed);
        assert_eq!(parsed.fields, map(&[("embezzled_money", &["5 won"])]));
    }

    /// A value usable in round-trip maps: no `. `, no leading/trailing
    /// whitespace, not the absent token. List values also exclude `, `.
    fn value_strategy(list: bool) -> impl Strategy<Value = String> {
        proptest::string::string_regex("[a-z0-9][a-z0-9,./%& -]{0,14}[a-z0-9%]")
            .unwrap()
            .prop_filter("no delimiter or absent token", move |s| {
                !s.contains(". ") && s != "none" && (!list || !s.contains(", "))
            })
    }

    fn fieldmap_strategy(spec: TaskSpec) -> impl Strategy<Value = FieldMap> {
        let per_field: Vec<_> = spec
            .fields
            .iter()
            .map(|f| {
                let name = f.name.clone();
                match f.kind {
                    FieldKind::Scalar => proptest::option::of(
                        value_strategy(false).prop_map(|v| vec![v]),
                    )
                    .prop_map(move |v| (name.clone(), v))
                    .boxed(),
                    FieldKind::List => proptest::option::of(
                        proptest::collection::vec(value_strategy(true), 1..4),
                    )
                    .prop_map(move |v| (name.clone(), v))
                    .boxed(),
                }
            })
            .collect();
        per_field.prop_map(|entries| {
            entries.into_iter().filter_map(|(k, v)| v.map(|v| (k, v))).collect()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn roundtrip_ruling(m in fieldmap_strategy(builtin_task(Task::RulingCriminal))) {
            let spec = builtin_task(Task::RulingCriminal);
            let parsed = delinearize(&spec, &linearize(&spec, &m).unwrap());
            prop_assert!(!parsed.malformed);
            prop_assert_eq!(parsed.fields, m);
        }

        #[test]
        fn roundtrip_fraud(m in fieldmap_strategy(builtin_task(Task::Fraud))) {
            let spec = builtin_task(Task::Fraud);
            let parsed = delinearize(&spec, &linearize(&spec, &m).unwrap());
            prop_assert!(!parsed.malformed);
            prop_assert_eq!(parsed.fields, m);
        }

        #[test]
        fn linearize_injective(
            a in fieldmap_strategy(builtin_task(Task::DrunkDriving)),
            b in fieldmap_strategy(builtin_task(Task::DrunkDriving)),
        ) {
            let spec = builtin_task(Task::DrunkDriving);
            let la = linearize(&spec, &a).unwrap();
            let lb = linearize(&spec, &b).unwrap();
            prop_assert_eq!(la == lb, a == b);
        }
    }
}
