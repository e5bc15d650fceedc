//! Transaction datasets and the three rule measures, computed exactly by
//! counting.
//!
//! Support, confidence and lift are ratios of transaction counts, so they are
//! kept as exact rationals ([`Rational`]); conversion to floating point is a
//! presentation concern that happens at the output boundary.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::BufRead;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Exact ratio of non-negative counts. Support and confidence lie in [0, 1];
/// lift may exceed 1.
pub type Rational = Ratio<u64>;

/// Characters a token may not contain: they would make the line-oriented
/// file formats (basket input, rule files) ambiguous.
const FORBIDDEN: [char; 5] = ['\n', '\r', ',', '&', ';'];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TokenError {
    #[error("attribute token is empty")]
    Empty,
    #[error("attribute token {0:?} contains a forbidden character (newline, ',', '&' or ';')")]
    ForbiddenChar(String),
    #[error("attribute token {0:?} has leading or trailing whitespace")]
    Untrimmed(String),
}

/// An interned categorical item of the form `<feature>_<value>`.
///
/// Tokens are opaque beyond equality and ordering; the feature prefix (text
/// before the last underscore) is only interpreted when class attributes are
/// grouped by feature.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct AttributeToken(String);

impl AttributeToken {
    pub fn new(text: impl Into<String>) -> Result<Self, TokenError> {
        let text = text.into();
        if text.is_empty() {
            return Err(TokenError::Empty);
        }
        if text.contains(FORBIDDEN) {
            return Err(TokenError::ForbiddenChar(text));
        }
        if text.trim() != text {
            return Err(TokenError::Untrimmed(text));
        }
        Ok(AttributeToken(text))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// The feature prefix: text before the last underscore, or the whole
    /// token when it contains none.
    pub fn feature(&self) -> &str {
        match self.0.rfind('_') {
            Some(idx) => &self.0[..idx],
            None => &self.0,
        }
    }
}

impl TryFrom<String> for AttributeToken {
    type Error = TokenError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        AttributeToken::new(value)
    }
}

impl From<AttributeToken> for String {
    fn from(token: AttributeToken) -> String {
        token.0
    }
}

impl fmt::Display for AttributeToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for AttributeToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

/// A set of distinct tokens; the unit the measures count over.
pub type Itemset = BTreeSet<AttributeToken>;

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("dataset contains no transactions")]
    EmptyDataset,
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("line {line}: empty token")]
    EmptyToken { line: usize },
    #[error("equal-width binning needs at least 2 bins, got {0}")]
    InvalidBinCount(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MeasureError {
    #[error("itemset is empty")]
    EmptyItemset,
    #[error("antecedent and consequent overlap")]
    OverlappingSides,
    #[error("antecedent occurs in no transaction; confidence is undefined")]
    AntecedentUnsupported,
    #[error("one side occurs in no transaction; lift is undefined")]
    ZeroMarginal,
}

/// Input layouts accepted by [`load_transactions`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputFormat {
    /// One transaction per line, tokens comma-separated.
    Basket,
    /// CSV with a header of feature names; cell `v` of feature `f` becomes
    /// the token `f_v`.
    Tabular,
}

/// An immutable transaction dataset with per-token transaction-id lists for
/// fast exact counting. All operations are pure and safe to share across
/// threads.
#[derive(Debug, Clone)]
pub struct TransactionDB {
    transactions: Vec<Itemset>,
    universe: Itemset,
    tid_lists: BTreeMap<AttributeToken, Vec<u32>>,
}

impl TransactionDB {
    /// Builds a database from explicit transactions.
    pub fn from_transactions(transactions: Vec<Itemset>) -> Result<Self, LoadError> {
        if transactions.is_empty() {
            return Err(LoadError::EmptyDataset);
        }
        let mut universe = Itemset::new();
        let mut tid_lists: BTreeMap<AttributeToken, Vec<u32>> = BTreeMap::new();
        for (tid, transaction) in transactions.iter().enumerate() {
            for token in transaction {
                universe.insert(token.clone());
                tid_lists.entry(token.clone()).or_default().push(tid as u32);
            }
        }
        Ok(TransactionDB {
            transactions,
            universe,
            tid_lists,
        })
    }

    /// Number of transactions (the denominator of support).
    pub fn count(&self) -> usize {
        self.transactions.len()
    }

    pub fn transactions(&self) -> &[Itemset] {
        &self.transactions
    }

    pub fn universe(&self) -> &Itemset {
        &self.universe
    }

    /// Sorted transaction ids containing the token; empty for unknown tokens.
    pub fn tid_list(&self, token: &AttributeToken) -> &[u32] {
        self.tid_lists.get(token).map(Vec::as_slice).unwrap_or(&[])
    }

    /// n(items): how many transactions contain every token of `items`.
    pub fn occurrence_count(&self, items: &Itemset) -> Result<u64, MeasureError> {
        if items.is_empty() {
            return Err(MeasureError::EmptyItemset);
        }
        let mut lists: Vec<&[u32]> = items.iter().map(|t| self.tid_list(t)).collect();
        lists.sort_by_key(|l| l.len());
        let mut current: Vec<u32> = lists[0].to_vec();
        for list in &lists[1..] {
            if current.is_empty() {
                break;
            }
            current = intersect_sorted(&current, list);
        }
        Ok(current.len() as u64)
    }

    /// Support: n(items) / N.
    pub fn support(&self, items: &Itemset) -> Result<Rational, MeasureError> {
        let n = self.occurrence_count(items)?;
        Ok(Rational::new(n, self.transactions.len() as u64))
    }

    /// Confidence: n(X ∪ Y) / n(X). The sides must be non-empty and disjoint;
    /// an antecedent that occurs nowhere is an error, not zero.
    pub fn confidence(
        &self,
        antecedent: &Itemset,
        consequent: &Itemset,
    ) -> Result<Rational, MeasureError> {
        if antecedent.is_empty() || consequent.is_empty() {
            return Err(MeasureError::EmptyItemset);
        }
        if !antecedent.is_disjoint(consequent) {
            return Err(MeasureError::OverlappingSides);
        }
        let n_ante = self.occurrence_count(antecedent)?;
        if n_ante == 0 {
            return Err(MeasureError::AntecedentUnsupported);
        }
        let union: Itemset = antecedent.union(consequent).cloned().collect();
        let n_union = self.occurrence_count(&union)?;
        Ok(Rational::new(n_union, n_ante))
    }

    /// Lift: supp(X ∪ Y) / (supp(X) · supp(Y)) = n(X ∪ Y) · N / (n(X) · n(Y)).
    pub fn lift(
        &self,
        antecedent: &Itemset,
        consequent: &Itemset,
    ) -> Result<Rational, MeasureError> {
        if antecedent.is_empty() || consequent.is_empty() {
            return Err(MeasureError::EmptyItemset);
        }
        if !antecedent.is_disjoint(consequent) {
            return Err(MeasureError::OverlappingSides);
        }
        let n_ante = self.occurrence_count(antecedent)?;
        let n_cons = self.occurrence_count(consequent)?;
        if n_ante == 0 || n_cons == 0 {
            return Err(MeasureError::ZeroMarginal);
        }
        let union: Itemset = antecedent.union(consequent).cloned().collect();
        let n_union = self.occurrence_count(&union)?;
        let n = self.transactions.len() as u64;
        Ok(Rational::new(n_union * n, n_ante * n_cons))
    }
}

fn intersect_sorted(a: &[u32], b: &[u32]) -> Vec<u32> {
    let mut out = Vec::with_capacity(a.len().min(b.len()));
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

/// Loads a transaction dataset from a UTF-8 stream.
///
/// Basket: one transaction per line, tokens comma-separated, whitespace
/// around each token trimmed, duplicates within a line collapsed. Blank
/// lines are skipped. Tabular: CSV with a header row of feature names.
pub fn load_transactions(
    reader: impl BufRead,
    format: InputFormat,
) -> Result<TransactionDB, LoadError> {
    match format {
        InputFormat::Basket => load_basket(reader),
        InputFormat::Tabular => load_tabular(reader),
    }
}

fn load_basket(reader: impl BufRead) -> Result<TransactionDB, LoadError> {
    let mut transactions = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut transaction = Itemset::new();
        for raw in line.split(',') {
            let text = raw.trim();
            if text.is_empty() {
                return Err(LoadError::EmptyToken { line: line_no });
            }
            let token = AttributeToken::new(text).map_err(|e| LoadError::MalformedLine {
                line: line_no,
                reason: e.to_string(),
            })?;
            transaction.insert(token);
        }
        transactions.push(transaction);
    }
    TransactionDB::from_transactions(transactions)
}

fn load_tabular(reader: impl BufRead) -> Result<TransactionDB, LoadError> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = csv_reader
        .headers()
        .map_err(|e| LoadError::MalformedLine {
            line: 1,
            reason: e.to_string(),
        })?
        .iter()
        .map(str::to_owned)
        .collect();
    if headers.iter().any(|h| h.is_empty()) {
        return Err(LoadError::MalformedLine {
            line: 1,
            reason: "empty feature name in header".into(),
        });
    }

    let mut transactions = Vec::new();
    for result in csv_reader.records() {
        let record = result.map_err(|e| {
            let line = e
                .position()
                .map(|p| p.line() as usize)
                .unwrap_or(transactions.len() + 2);
            LoadError::MalformedLine {
                line,
                reason: e.to_string(),
            }
        })?;
        let line_no = record
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or(transactions.len() + 2);
        if record.len() != headers.len() {
            return Err(LoadError::MalformedLine {
                line: line_no,
                reason: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        let mut transaction = Itemset::new();
        for (feature, cell) in headers.iter().zip(record.iter()) {
            let token = AttributeToken::new(format!("{feature}_{cell}")).map_err(|e| {
                LoadError::MalformedLine {
                    line: line_no,
                    reason: e.to_string(),
                }
            })?;
            transaction.insert(token);
        }
        transactions.push(transaction);
    }
    TransactionDB::from_transactions(transactions)
}

/// Rewrites every fully numeric column of a CSV (header included) into
/// equal-width interval labels: `(-inf-b1]`, `(b1-b2]`, ..., `(bk-inf)`.
///
/// A convenience for datasets that arrive with raw numeric columns; input is
/// otherwise expected pre-discretized. Columns with any non-numeric cell, and
/// constant columns, are left untouched.
pub fn discretize_equal_width(csv_text: &str, bins: usize) -> Result<String, LoadError> {
    if bins < 2 {
        return Err(LoadError::InvalidBinCount(bins));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(csv_text.as_bytes());
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| LoadError::MalformedLine {
            line: 1,
            reason: e.to_string(),
        })?
        .iter()
        .map(str::to_owned)
        .collect();
    let mut rows: Vec<Vec<String>> = Vec::new();
    for result in reader.records() {
        let record = result.map_err(|e| LoadError::MalformedLine {
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            reason: e.to_string(),
        })?;
        rows.push(record.iter().map(str::to_owned).collect());
    }
    if rows.is_empty() {
        return Err(LoadError::EmptyDataset);
    }

    for col in 0..headers.len() {
        let values: Option<Vec<f64>> = rows
            .iter()
            .map(|r| r.get(col).and_then(|c| c.parse::<f64>().ok()))
            .collect();
        let Some(values) = values else { continue };
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if min >= max || !min.is_finite() || !max.is_finite() {
            continue;
        }
        let width = (max - min) / bins as f64;
        let boundaries: Vec<f64> = (1..bins).map(|i| min + i as f64 * width).collect();
        for (row, value) in rows.iter_mut().zip(values.iter()) {
            let idx = boundaries.iter().take_while(|b| value > *b).count();
            row[col] = interval_label(&boundaries, idx);
        }
    }

    let mut out = String::new();
    out.push_str(&headers.join(","));
    out.push('\n');
    for row in &rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    Ok(out)
}

fn interval_label(boundaries: &[f64], idx: usize) -> String {
    let lo = if idx == 0 {
        "-inf".to_string()
    } else {
        format_boundary(boundaries[idx - 1])
    };
    if idx == boundaries.len() {
        format!("({lo}-inf)")
    } else {
        format!("({lo}-{}]", format_boundary(boundaries[idx]))
    }
}

fn format_boundary(value: f64) -> String {
    // Six decimals, trailing zeros trimmed: stable across runs and free of
    // float noise like 3.5150000000000006.
    let text = format!("{value:.6}");
    let text = text.trim_end_matches('0').trim_end_matches('.');
    text.to_string()
}

/// Parses a measure literal: a plain decimal like `0.5`, an integer, or a
/// fraction `a/b`. Decimals convert exactly (digits over a power of ten).
pub fn parse_rational(text: &str) -> Option<Rational> {
    let text = text.trim();
    if let Some((numer, denom)) = text.split_once('/') {
        let n: u64 = numer.trim().parse().ok()?;
        let d: u64 = denom.trim().parse().ok()?;
        if d == 0 {
            return None;
        }
        return Some(Rational::new(n, d));
    }
    match text.split_once('.') {
        None => text.parse::<u64>().ok().map(Rational::from_integer),
        Some((int_part, frac_part)) => {
            if frac_part.is_empty() || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
                return None;
            }
            let int: u64 = if int_part.is_empty() {
                0
            } else {
                int_part.parse().ok()?
            };
            let frac: u64 = frac_part.parse().ok()?;
            let scale = 10u64.checked_pow(frac_part.len() as u32)?;
            let numer = int.checked_mul(scale)?.checked_add(frac)?;
            Some(Rational::new(numer, scale))
        }
    }
}

/// Formats a rational as the shortest decimal that round-trips through f64.
pub fn format_rational_decimal(value: Rational) -> String {
    format!("{}", rational_to_f64(value))
}

/// Rational to f64, for presentation and objective arithmetic.
pub fn rational_to_f64(value: Rational) -> f64 {
    use num_traits::ToPrimitive;
    value
        .to_f64()
        .expect("ratio of u64 counts always converts to f64")
}
