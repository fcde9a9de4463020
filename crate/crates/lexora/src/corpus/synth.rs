//! Synthetic corpus generator with planted ground truth.
//!
//! The grammar is co-designed with the default ruleset: on noise-free
//! output, every label equals exactly what the rule engine extracts, so
//! the corpus doubles as an oracle for both extractors. Distractor
//! clauses (controlled by `noise_rate`) insert off-target monetary values
//! and filler sentences that stress the money heuristics without moving
//! the planted answers.
//!
//! Imprisonment durations, loss amounts, and sentence-type mixes are drawn
//! from distributions named in [`SynthConfig`], so the analytics stage can
//! be checked against known coefficients.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::taskschema::{builtin_task, linearize, FieldMap, Task};

use super::Document;

/// Imprisonment-month distribution for one span of years, split by the
/// prior-record flag.
#[derive(Clone, Debug, PartialEq)]
pub struct PrisonRegime {
    pub year_min: i32,
    pub year_max: i32,
    pub mean_no_record: f64,
    pub mean_with_record: f64,
    pub stddev: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    /// Documents to generate per task.
    pub counts: BTreeMap<Task, usize>,
    pub seed: u64,
    /// Share of documents that receive distractor clauses.
    pub noise_rate: f64,
    pub year_min: i32,
    pub year_max: i32,
    /// Drunk-driving imprisonment distributions; must cover the year range.
    pub prison: Vec<PrisonRegime>,
    /// Fraud sentencing: months = slope·log10(loss) + intercept + N(0, sigma).
    pub loss_slope: f64,
    pub loss_intercept: f64,
    pub loss_sigma: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            counts: Task::ALL.iter().map(|t| (*t, 100)).collect(),
            seed: 42,
            noise_rate: 0.0,
            year_min: 2017,
            year_max: 2022,
            prison: vec![
                PrisonRegime {
                    year_min: 2017,
                    year_max: 2018,
                    mean_no_record: 5.3,
                    mean_with_record: 7.7,
                    stddev: 2.0,
                },
                PrisonRegime {
                    year_min: 2019,
                    year_max: 2022,
                    mean_no_record: 8.9,
                    mean_with_record: 11.9,
                    stddev: 2.0,
                },
            ],
            loss_slope: 4.0,
            loss_intercept: -14.0,
            loss_sigma: 1.0,
        }
    }
}

impl SynthConfig {
    /// Default distributions with `n` documents for every task.
    pub fn with_counts(n: usize, seed: u64) -> SynthConfig {
        SynthConfig {
            counts: Task::ALL.iter().map(|t| (*t, n)).collect(),
            seed,
            ..SynthConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.noise_rate) {
            return Err(Error::Config(format!("noise_rate {} outside [0, 1]", self.noise_rate)));
        }
        if self.year_min > self.year_max {
            return Err(Error::Config("year_min exceeds year_max".to_string()));
        }
        if !(1990..=2100).contains(&self.year_min) || !(1990..=2100).contains(&self.year_max) {
            return Err(Error::Config("year range outside 1990..=2100".to_string()));
        }
        for r in &self.prison {
            if r.stddev <= 0.0 {
                return Err(Error::Config("prison regime stddev must be positive".to_string()));
            }
        }
        if self.counts.get(&Task::DrunkDriving).copied().unwrap_or(0) > 0 {
            for year in self.year_min..=self.year_max {
                if self.regime_for(year).is_none() {
                    return Err(Error::Config(format!("no prison regime covers year {year}")));
                }
            }
        }
        if self.loss_sigma <= 0.0 {
            return Err(Error::Config("loss_sigma must be positive".to_string()));
        }
        Ok(())
    }

    fn regime_for(&self, year: i32) -> Option<&PrisonRegime> {
        self.prison.iter().find(|r| (r.year_min..=r.year_max).contains(&year))
    }
}

/// Render an integer amount with thousands separators and the currency
/// unit, e.g. `1,234,567 won`.
pub fn fmt_money(amount: u64) -> String {
    let digits = amount.to_string();
    let bytes = digits.as_bytes();
    let mut out = String::with_capacity(digits.len() + digits.len() / 3 + 4);
    for (i, b) in bytes.iter().enumerate() {
        if i > 0 && (bytes.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(*b as char);
    }
    out.push_str(" won");
    out
}

fn unit(n: u32, name: &str) -> String {
    if n == 1 {
        format!("1 {name}")
    } else {
        format!("{n} {name}s")
    }
}

/// Standard normal draw (Box-Muller).
fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Per-document RNG, stable under changes to other tasks' counts.
fn doc_rng(seed: u64, task: Task, index: usize) -> ChaCha8Rng {
    let t = Task::ALL.iter().position(|x| *x == task).unwrap() as u64;
    ChaCha8Rng::seed_from_u64(splitmix(seed ^ splitmix(t.wrapping_mul(0x10001).wrapping_add(index as u64))))
}

/// Distractor sentences draw from their own stream so turning noise on or
/// off never shifts the draws behind the planted values.
fn noise_rng(seed: u64, task: Task, index: usize) -> ChaCha8Rng {
    doc_rng(seed ^ 0x4e4f_4953_45, task, index)
}

const VEHICLES: [&str; 6] = ["sedan", "truck", "van", "taxi", "motorcycle", "bus"];
const FINE_POOL: [u64; 5] = [500_000, 1_000_000, 2_000_000, 3_000_000, 5_000_000];
const HOURS_POOL: [u32; 10] = [8, 16, 24, 32, 40, 48, 56, 64, 72, 80];

/// Filler sentences free of digits, money, units, and every trigger word
/// used by the default ruleset.
const NEUTRAL_SENTENCES: [&str; 4] = [
    "The court examined the records of the case.",
    "The defendant expressed remorse at trial.",
    "The victim submitted a written statement.",
    "The proceedings were open to the public.",
];

#[derive(Clone, Copy, PartialEq)]
enum Sentence {
    Fine,
    Prison,
    Suspension,
}

/// Everything the ruling renderer needs for one document.
struct RulingPlan {
    fine: Option<u64>,
    months: Option<u32>,
    susp_years: Option<u32>,
    edu_hours: Option<u32>,
    comm_hours: Option<u32>,
    /// Allow `N years and M months` phrasing for the imprisonment value.
    mixed_ok: bool,
}

impl RulingPlan {
    fn present_fields(&self) -> usize {
        [
            self.fine.is_some(),
            self.months.is_some(),
            self.susp_years.is_some(),
            self.edu_hours.is_some(),
            self.comm_hours.is_some(),
        ]
        .iter()
        .filter(|p| **p)
        .count()
    }
}

fn render_duration(months: u32, mixed_ok: bool, rng: &mut ChaCha8Rng) -> String {
    if months >= 12 && months % 12 == 0 {
        unit(months / 12, "year")
    } else if months > 12 && mixed_ok && rng.gen_bool(0.5) {
        format!("{} and {}", unit(months / 12, "year"), unit(months % 12, "month"))
    } else {
        unit(months, "month")
    }
}

/// Render the ruling text and, in the same pass, the ruling-task labels.
/// Using one renderer for both keeps the planted labels equal to what the
/// indicator rules extract.
fn render_ruling(plan: &RulingPlan, rng: &mut ChaCha8Rng) -> (String, FieldMap) {
    let mut sentences = Vec::new();
    let mut labels = FieldMap::new();
    if let Some(amount) = plan.fine {
        let money = fmt_money(amount);
        sentences.push(format!("A fine of {money} is imposed."));
        labels.insert("fine".to_string(), vec![money]);
    }
    if let Some(months) = plan.months {
        let dur = render_duration(months, plan.mixed_ok, rng);
        sentences.push(format!("Imprisonment for {dur} is imposed."));
        labels.insert("imprisonment".to_string(), vec![dur]);
    }
    if let Some(years) = plan.susp_years {
        let dur = unit(years, "year");
        sentences.push(format!("The execution of the punishment is suspended for {dur}."));
        labels.insert("suspension".to_string(), vec![dur]);
    }
    if let Some(hours) = plan.edu_hours {
        sentences.push(format!("The defendant shall complete education for {hours} hours."));
        labels.insert("education".to_string(), vec![format!("{hours} hours")]);
    }
    if let Some(hours) = plan.comm_hours {
        sentences.push(format!("The defendant shall perform community service for {hours} hours."));
        labels.insert("community_service".to_string(), vec![format!("{hours} hours")]);
    }
    (sentences.join(" "), labels)
}

fn neutral(rng: &mut ChaCha8Rng) -> &'static str {
    NEUTRAL_SENTENCES[rng.gen_range(0..NEUTRAL_SENTENCES.len())]
}

fn log_uniform_amount(rng: &mut ChaCha8Rng, lo_exp: f64, hi_exp: f64) -> u64 {
    10f64.powf(rng.gen_range(lo_exp..hi_exp)).round() as u64
}

fn drunk_sentence_kind(rng: &mut ChaCha8Rng) -> Sentence {
    let r: f64 = rng.gen();
    if r < 0.60 {
        Sentence::Suspension
    } else if r < 0.85 {
        Sentence::Prison
    } else {
        Sentence::Fine
    }
}

/// Fraud sentence-type mix interpolated in log10(loss): the fine share
/// falls from 0.70 to 0.02 across the loss range while the prison share
/// rises, the monotone regime the bucket-ratio analysis looks for.
fn fraud_sentence_kind(log_loss: f64, rng: &mut ChaCha8Rng) -> Sentence {
    let x = ((log_loss - 5.0) / 4.0).clamp(0.0, 1.0);
    let p_fine = 0.70 + (0.02 - 0.70) * x;
    let p_prison = 0.05 + (0.75 - 0.05) * x;
    let r: f64 = rng.gen();
    if r < p_fine {
        Sentence::Fine
    } else if r < p_fine + p_prison {
        Sentence::Prison
    } else {
        Sentence::Suspension
    }
}

struct DocParts {
    facts: String,
    ruling: String,
    labels: FieldMap,
}

fn gen_drunk(
    cfg: &SynthConfig,
    year: i32,
    noisy: bool,
    rng: &mut ChaCha8Rng,
    noise: &mut ChaCha8Rng,
) -> DocParts {
    let mut labels = FieldMap::new();
    let bac = format!("0.{:03}%", rng.gen_range(30..350));
    let dist = format!("{}m", rng.gen_range(5..900));
    let vehicle = VEHICLES[rng.gen_range(0..VEHICLES.len())];
    let mut facts = format!(
        "The defendant drove a {vehicle} approximately {dist} with blood alcohol content {bac}."
    );
    labels.insert("bac".to_string(), vec![bac]);
    labels.insert("distance".to_string(), vec![dist]);
    labels.insert("vehicle".to_string(), vec![vehicle.to_string()]);

    let prior = rng.gen_bool(0.5);
    if prior {
        if rng.gen_bool(0.5) {
            facts.push_str(" The defendant was previously convicted of drunk driving.");
            labels.insert("criminal_record".to_string(), vec!["1".to_string()]);
        } else {
            let n = rng.gen_range(2..=4u32);
            facts.push_str(&format!(" The defendant has {n} prior convictions for drunk driving."));
            labels.insert("criminal_record".to_string(), vec![n.to_string()]);
        }
    }
    if noisy {
        facts.push(' ');
        facts.push_str(neutral(noise));
    }

    let regime = cfg.regime_for(year).expect("validated year coverage");
    let mean = if prior { regime.mean_with_record } else { regime.mean_no_record };
    let kind = drunk_sentence_kind(rng);
    let months = (mean + regime.stddev * gauss(rng)).round().max(1.0) as u32;
    let plan = RulingPlan {
        fine: (kind == Sentence::Fine).then(|| FINE_POOL[rng.gen_range(0..FINE_POOL.len())]),
        months: (kind != Sentence::Fine).then_some(months),
        susp_years: (kind == Sentence::Suspension).then(|| rng.gen_range(1..=4)),
        edu_hours: rng.gen_bool(0.15).then(|| HOURS_POOL[rng.gen_range(0..HOURS_POOL.len())]),
        comm_hours: rng.gen_bool(0.25).then(|| HOURS_POOL[rng.gen_range(0..HOURS_POOL.len())]),
        mixed_ok: true,
    };
    let (ruling, _) = render_ruling(&plan, rng);
    DocParts { facts, ruling, labels }
}

fn gen_embezzlement(noisy: bool, rng: &mut ChaCha8Rng, noise: &mut ChaCha8Rng) -> DocParts {
    let total = log_uniform_amount(rng, 5.0, 9.0);
    let mut labels = FieldMap::new();
    let mut facts = match rng.gen_range(0..10) {
        // Single amount; the last-money rule lands on it.
        0..=4 => {
            let money = fmt_money(total);
            labels.insert("embezzled_money".to_string(), vec![money.clone()]);
            format!(
                "The defendant, entrusted with funds of the victim company, embezzled {money} for personal use."
            )
        }
        // A "total" amount followed by its parts; the total marker must win
        // over the later amounts.
        5..=7 => {
            let part = (total as f64 * rng.gen_range(0.25..0.75)).round().max(1.0) as u64;
            let m1 = fmt_money(part);
            let m2 = fmt_money(total - part);
            let money = fmt_money(total);
            labels.insert("embezzled_money".to_string(), vec![money.clone()]);
            format!(
                "The defendant embezzled a total of {money} from the victim, taking {m1} and then {m2}."
            )
        }
        // Several amounts, no total: the last one is the planted answer.
        _ => {
            let part = (total as f64 * rng.gen_range(0.25..0.75)).round().max(1.0) as u64;
            let m1 = fmt_money(part);
            let m2 = fmt_money(total - part);
            labels.insert("embezzled_money".to_string(), vec![m2.clone()]);
            format!("The defendant embezzled {m1} in March and {m2} in April.")
        }
    };
    if noisy {
        let revenue = fmt_money(log_uniform_amount(noise, 4.0, 7.0));
        facts = format!("The company recorded revenue of {revenue} that year. {facts}");
        if noise.gen_bool(0.5) {
            facts.push(' ');
            facts.push_str(neutral(noise));
        }
    }

    let kind = match rng.gen_range(0..10) {
        0..=2 => Sentence::Fine,
        3..=6 => Sentence::Prison,
        _ => Sentence::Suspension,
    };
    let months = (10.0 + 3.0 * gauss(rng)).round().max(1.0) as u32;
    let plan = RulingPlan {
        fine: (kind == Sentence::Fine).then(|| FINE_POOL[rng.gen_range(0..FINE_POOL.len())]),
        months: (kind != Sentence::Fine).then_some(months),
        susp_years: (kind == Sentence::Suspension).then(|| rng.gen_range(1..=4)),
        edu_hours: None,
        comm_hours: None,
        mixed_ok: true,
    };
    let (ruling, _) = render_ruling(&plan, rng);
    DocParts { facts, ruling, labels }
}

fn gen_fraud(
    cfg: &SynthConfig,
    noisy: bool,
    rng: &mut ChaCha8Rng,
    noise: &mut ChaCha8Rng,
) -> DocParts {
    let total = log_uniform_amount(rng, 5.0, 9.0);
    let mut labels = FieldMap::new();
    let mut facts = match rng.gen_range(0..10) {
        0..=3 => {
            let money = fmt_money(total);
            labels.insert("loss".to_string(), vec![money.clone()]);
            format!("The defendant deceived the victim and obtained {money} by false pretenses.")
        }
        4..=5 => {
            let part = (total as f64 * rng.gen_range(0.25..0.75)).round().max(1.0) as u64;
            let m1 = fmt_money(part);
            let m2 = fmt_money(total - part);
            let money = fmt_money(total);
            labels.insert("loss".to_string(), vec![money.clone()]);
            format!(
                "By deception the defendant obtained a total of {money} from the victim, first {m1} and then {m2}."
            )
        }
        // Aiding only: the last money sits in an "aided" sentence.
        6..=7 => {
            let money = fmt_money(total);
            labels.insert("loss_aiding".to_string(), vec![money.clone()]);
            format!("The defendant aided an accomplice who defrauded the victim of {money}.")
        }
        // Both: a total-marked principal loss plus an aided amount.
        _ => {
            let part = (total as f64 * rng.gen_range(0.3..0.7)).round().max(1.0) as u64;
            let principal = fmt_money(part);
            let aided = fmt_money(total - part);
            labels.insert("loss".to_string(), vec![principal.clone()]);
            labels.insert("loss_aiding".to_string(), vec![aided.clone()]);
            format!(
                "The defendant obtained a total of {principal} from the victim by deception. The defendant also aided an accomplice who obtained {aided}."
            )
        }
    };
    if noisy {
        let revenue = fmt_money(log_uniform_amount(noise, 4.0, 7.0));
        facts = format!("The company recorded revenue of {revenue} that year. {facts}");
        if noise.gen_bool(0.5) {
            facts.push(' ');
            facts.push_str(neutral(noise));
        }
    }

    let log_loss = (total as f64).log10();
    let kind = fraud_sentence_kind(log_loss, rng);
    let months = (cfg.loss_slope * log_loss + cfg.loss_intercept + cfg.loss_sigma * gauss(rng))
        .round()
        .max(1.0) as u32;
    let plan = RulingPlan {
        fine: (kind == Sentence::Fine).then(|| ((total / 2).max(10_000) / 10_000) * 10_000),
        months: (kind != Sentence::Fine).then_some(months),
        susp_years: (kind == Sentence::Suspension).then(|| rng.gen_range(1..=4)),
        edu_hours: None,
        comm_hours: None,
        mixed_ok: true,
    };
    let (ruling, _) = render_ruling(&plan, rng);
    DocParts { facts, ruling, labels }
}

fn gen_ruling_criminal(noisy: bool, rng: &mut ChaCha8Rng, noise: &mut ChaCha8Rng) -> DocParts {
    let (fine, months, susp) = match rng.gen_range(0..10) {
        0..=1 => (true, false, false),
        2..=4 => (false, true, false),
        5..=7 => (false, true, true),
        _ => (true, true, true),
    };
    let mut plan = RulingPlan {
        fine: fine.then(|| FINE_POOL[rng.gen_range(0..FINE_POOL.len())]),
        months: months.then(|| (9.0 + 4.0 * gauss(rng)).round().max(1.0) as u32),
        susp_years: susp.then(|| rng.gen_range(1..=4)),
        edu_hours: rng.gen_bool(0.25).then(|| HOURS_POOL[rng.gen_range(0..HOURS_POOL.len())]),
        comm_hours: rng.gen_bool(0.35).then(|| HOURS_POOL[rng.gen_range(0..HOURS_POOL.len())]),
        mixed_ok: true,
    };
    // Keep the linearized target within the decoder budget when many
    // fields are present.
    plan.mixed_ok = plan.present_fields() <= 3;
    let (mut ruling, labels) = render_ruling(&plan, rng);
    if noisy {
        ruling.push(' ');
        ruling.push_str(neutral(noise));
    }
    DocParts { facts: String::new(), ruling, labels }
}

fn gen_ruling_civil(noisy: bool, rng: &mut ChaCha8Rng, noise: &mut ChaCha8Rng) -> DocParts {
    let approved = log_uniform_amount(rng, 5.0, 8.0);
    let claimed = (approved as f64 * rng.gen_range(1.2..3.0)).round() as u64;
    let ratio = rng.gen_range(1..=18) * 5;
    let approved_s = fmt_money(approved);
    let claimed_s = fmt_money(claimed);
    let mut ruling = format!(
        "The defendant shall pay the plaintiff {approved_s}. The litigation costs shall be borne at the ratio of {ratio}% by the plaintiff. The claimed amount was {claimed_s}."
    );
    if noisy {
        ruling.push(' ');
        ruling.push_str(neutral(noise));
    }
    let labels = FieldMap::from([
        ("approved_money".to_string(), vec![approved_s]),
        ("litigation_cost_ratio".to_string(), vec![format!("{ratio}%")]),
        ("claimed_money".to_string(), vec![claimed_s]),
    ]);
    DocParts { facts: String::new(), ruling, labels }
}

/// Generate a labeled corpus according to `cfg`. Deterministic given the
/// seed; each document's labels are exactly the values planted into its
/// text.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<Vec<Document>> {
    cfg.validate()?;
    let mut docs = Vec::new();
    for task in Task::ALL {
        let count = cfg.counts.get(&task).copied().unwrap_or(0);
        let spec = builtin_task(task);
        for i in 0..count {
            let mut rng = doc_rng(cfg.seed, task, i);
            let mut noise = noise_rng(cfg.seed, task, i);
            let year = rng.gen_range(cfg.year_min..=cfg.year_max);
            // One unconditional draw (gen_bool special-cases p = 1 and
            // would skip it) so the stream behind the planted values is
            // identical across noise settings for the same seed.
            let noisy = rng.gen::<f64>() < cfg.noise_rate;
            let parts = match task {
                Task::DrunkDriving => gen_drunk(cfg, year, noisy, &mut rng, &mut noise),
                Task::Embezzlement => gen_embezzlement(noisy, &mut rng, &mut noise),
                Task::Fraud => gen_fraud(cfg, noisy, &mut rng, &mut noise),
                Task::RulingCriminal => gen_ruling_criminal(noisy, &mut rng, &mut noise),
                Task::RulingCivil => gen_ruling_civil(noisy, &mut rng, &mut noise),
            };
            let target = linearize(&spec, &parts.labels).expect("planted labels match the spec");
            assert!(
                target.len() <= 127,
                "linearized target exceeds the decoder budget: {target:?}"
            );
            docs.push(Document {
                id: format!("{}-{i:05}", task.id()),
                category: task,
                facts: parts.facts,
                ruling: parts.ruling,
                year,
                labels: parts.labels,
            });
        }
    }
    Ok(docs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_counts_give_empty_corpus() {
        let cfg = SynthConfig { counts: BTreeMap::new(), ..SynthConfig::default() };
        assert!(generate_synthetic(&cfg).unwrap().is_empty());
    }

    #[test]
    fn planted_values_appear_in_text() {
        let mut cfg = SynthConfig::with_counts(0, 7);
        cfg.counts.insert(Task::DrunkDriving, 1);
        let docs = generate_synthetic(&cfg).unwrap();
        assert_eq!(docs.len(), 1);
        let doc = &docs[0];
        for values in doc.labels.values() {
            for v in values {
                assert!(
                    doc.facts.contains(v),
                    "label {v:?} missing from facts {:?}",
                    doc.facts
                );
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = SynthConfig::with_counts(20, 11);
        assert_eq!(generate_synthetic(&cfg).unwrap(), generate_synthetic(&cfg).unwrap());
    }

    #[test]
    fn noise_keeps_labels_intact() {
        let cfg = SynthConfig { noise_rate: 1.0, ..SynthConfig::with_counts(30, 5) };
        let clean = SynthConfig::with_counts(30, 5);
        let noisy_docs = generate_synthetic(&cfg).unwrap();
        let clean_docs = generate_synthetic(&clean).unwrap();
        for (n, c) in noisy_docs.iter().zip(&clean_docs) {
            assert_eq!(n.labels, c.labels);
        }
    }

    #[test]
    fn money_formatting_groups_digits() {
        assert_eq!(fmt_money(42), "42 won");
        assert_eq!(fmt_money(1_926_934), "1,926,934 won");
        assert_eq!(fmt_money(502_188_070), "502,188,070 won");
    }

    #[test]
    fn invalid_config_rejected() {
        let cfg = SynthConfig { noise_rate: 1.5, ..SynthConfig::default() };
        assert!(generate_synthetic(&cfg).is_err());
        let cfg = SynthConfig { year_min: 2010, ..SynthConfig::default() };
        assert!(generate_synthetic(&cfg).is_err(), "years outside the prison regimes");
    }

    #[test]
    fn labels_fit_task_schemas() {
        let docs = generate_synthetic(&SynthConfig::with_counts(25, 3)).unwrap();
        for doc in &docs {
            let spec = builtin_task(doc.category);
            for name in doc.labels.keys() {
                assert!(spec.field(name).is_some(), "{name} not in {}", doc.category);
            }
        }
    }
}
