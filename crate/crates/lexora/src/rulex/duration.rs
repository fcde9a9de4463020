//! Duration scanning with unit composition.

use std::sync::LazyLock;

use regex::Regex;

/// `1 year and 6 months` — composed into a single 18-month value.
static COMBINED_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\b(\d+) years? and (\d+) months?\b").unwrap());
static YEARS_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b(\d+) years?\b").unwrap());
static MONTHS_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b(\d+) months?\b").unwrap());
static HOURS_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b(\d+) hours?\b").unwrap());

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DurationKind {
    Months(f64),
    Hours(u64),
}

/// One duration found in text.
#[derive(Clone, Debug, PartialEq)]
pub struct Duration {
    pub value: DurationKind,
    /// The exact matched span.
    pub raw: String,
    /// Byte offset of the match in the scanned text.
    pub start: usize,
}

impl Duration {
    pub fn months(&self) -> Option<f64> {
        match self.value {
            DurationKind::Months(m) => Some(m),
            DurationKind::Hours(_) => None,
        }
    }
}

/// All year/month/hour spans in document order. Adjacent conjoined
/// year-and-month spans compose into one value.
pub fn parse_duration(text: &str) -> Vec<Duration> {
    let mut found: Vec<Duration> = Vec::new();
    let mut covered: Vec<(usize, usize)> = Vec::new();
    for m in COMBINED_RE.captures_iter(text) {
        let whole = m.get(0).unwrap();
        let years: f64 = m[1].parse().unwrap();
        let months: f64 = m[2].parse().unwrap();
        covered.push((whole.start(), whole.end()));
        found.push(Duration {
            value: DurationKind::Months(years * 12.0 + months),
            raw: whole.as_str().to_string(),
            start: whole.start(),
        });
    }
    let overlaps = |s: usize, e: usize, covered: &[(usize, usize)]| {
        covered.iter().any(|(cs, ce)| s < *ce && e > *cs)
    };
    for (re, to_value) in [
        (&*YEARS_RE, fn_months_from_years as fn(f64) -> DurationKind),
        (&*MONTHS_RE, fn_months),
        (&*HOURS_RE, fn_hours),
    ] {
        for m in re.captures_iter(text) {
            let whole = m.get(0).unwrap();
            if overlaps(whole.start(), whole.end(), &covered) {
                continue;
            }
            let n: f64 = m[1].parse().unwrap();
            found.push(Duration {
                value: to_value(n),
                raw: whole.as_str().to_string(),
                start: whole.start(),
            });
        }
    }
    found.sort_by_key(|d| d.start);
    found
}

fn fn_months_from_years(n: f64) -> DurationKind {
    DurationKind::Months(n * 12.0)
}

fn fn_months(n: f64) -> DurationKind {
    DurationKind::Months(n)
}

fn fn_hours(n: f64) -> DurationKind {
    DurationKind::Hours(n as u64)
}
