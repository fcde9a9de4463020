//! Monetary value scanning.

use std::sync::LazyLock;

use regex::Regex;

/// Pattern for one monetary amount with its unit word.
pub const MONEY_PATTERN: &str = r"\b(\d{1,3}(?:,\d{3})*|\d+) won\b";

static MONEY_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(MONEY_PATTERN).unwrap());

/// One monetary amount found in text.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MoneyValue {
    /// Amount in the smallest currency unit.
    pub amount: u64,
    /// The exact matched span, separators and unit included.
    pub raw: String,
    /// Byte offset of the match in the scanned text.
    pub start: usize,
}

/// All monetary values in document order, separators parsed away.
pub fn parse_money(text: &str) -> Vec<MoneyValue> {
    MONEY_RE
        .find_iter(text)
        .map(|m| {
            let digits: String = m.as_str().chars().filter(char::is_ascii_digit).collect();
            MoneyValue {
                amount: digits.parse().expect("digit run fits u64"),
                raw: m.as_str().to_string(),
                start: m.start(),
            }
        })
        .collect()
}
