//! Level-wise Apriori mining: frequent itemsets under a minimum support,
//! then all rules over them under a minimum confidence.
//!
//! The miner is a convenience — rule files written by any external miner can
//! be loaded instead, as long as they use the line format of
//! [`write_rules`]/[`parse_rules`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::transactions::{
    format_rational_decimal, parse_rational, AttributeToken, Itemset, Rational, TransactionDB,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ThresholdError {
    #[error("{0} must lie in (0, 1], got {1}")]
    OutOfRange(&'static str, Rational),
}

/// Minimum support and confidence, both in (0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MiningThresholds {
    min_support: Rational,
    min_confidence: Rational,
}

impl MiningThresholds {
    pub fn new(min_support: Rational, min_confidence: Rational) -> Result<Self, ThresholdError> {
        let one = Rational::from_integer(1);
        let zero = Rational::from_integer(0);
        if min_support <= zero || min_support > one {
            return Err(ThresholdError::OutOfRange("min_support", min_support));
        }
        if min_confidence <= zero || min_confidence > one {
            return Err(ThresholdError::OutOfRange("min_confidence", min_confidence));
        }
        Ok(MiningThresholds {
            min_support,
            min_confidence,
        })
    }

    pub fn min_support(&self) -> Rational {
        self.min_support
    }

    pub fn min_confidence(&self) -> Rational {
        self.min_confidence
    }
}

/// A mined implication X ⇒ Y with disjoint, non-empty sides.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct AssociationRule {
    pub antecedents: Itemset,
    pub consequents: Itemset,
    pub support: Rational,
    pub confidence: Rational,
}

impl fmt::Display for AssociationRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} => {} ; supp={} ; conf={}",
            join_tokens(&self.antecedents),
            join_tokens(&self.consequents),
            format_rational_decimal(self.support),
            format_rational_decimal(self.confidence),
        )
    }
}

fn join_tokens(items: &Itemset) -> String {
    items
        .iter()
        .map(AttributeToken::as_str)
        .collect::<Vec<_>>()
        .join("&")
}

/// All itemsets with support ≥ `min_support`, each with its exact support.
/// The result is closed under non-empty subsets.
pub fn mine_frequent_itemsets(
    db: &TransactionDB,
    min_support: Rational,
) -> BTreeMap<Itemset, Rational> {
    let n = db.count() as u64;
    let mut frequent: BTreeMap<Itemset, Rational> = BTreeMap::new();

    // Level 1: candidate tidlists come straight from the index.
    let mut level: Vec<(Vec<AttributeToken>, Vec<u32>)> = Vec::new();
    for token in db.universe() {
        let tids = db.tid_list(token).to_vec();
        let support = Rational::new(tids.len() as u64, n);
        if support >= min_support {
            frequent.insert([token.clone()].into_iter().collect(), support);
            level.push((vec![token.clone()], tids));
        }
    }

    while level.len() > 1 {
        let prev_sets: BTreeSet<&[AttributeToken]> =
            level.iter().map(|(items, _)| items.as_slice()).collect();
        let mut next: Vec<(Vec<AttributeToken>, Vec<u32>)> = Vec::new();
        for i in 0..level.len() {
            for j in (i + 1)..level.len() {
                let (a_items, a_tids) = &level[i];
                let (b_items, b_tids) = &level[j];
                let k = a_items.len();
                // Join step: equal prefixes, differing last items.
                if a_items[..k - 1] != b_items[..k - 1] {
                    break; // level is sorted, no further partner shares the prefix
                }
                let mut candidate = a_items.clone();
                candidate.push(b_items[k - 1].clone());
                if !all_subsets_frequent(&candidate, &prev_sets) {
                    continue;
                }
                let tids = intersect(a_tids, b_tids);
                let support = Rational::new(tids.len() as u64, n);
                if support >= min_support {
                    frequent.insert(candidate.iter().cloned().collect(), support);
                    next.push((candidate, tids));
                }
            }
        }
        next.sort_by(|a, b| a.0.cmp(&b.0));
        level = next;
    }

    frequent
}

fn all_subsets_frequent(candidate: &[AttributeToken], prev: &BTreeSet<&[AttributeToken]>) -> bool {
    // Every (k-1)-subset must be frequent; dropping the last two positions is
    // covered by the join itself.
    (0..candidate.len() - 2).all(|skip| {
        let subset: Vec<AttributeToken> = candidate
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != skip)
            .map(|(_, t)| t.clone())
            .collect();
        prev.contains(subset.as_slice())
    })
}

fn intersect(a: &[u32], b: &[u32]) -> Vec<u32> {
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

/// All rules X ⇒ Y with X ∪ Y frequent, both sides non-empty and disjoint,
/// and confidence ≥ the threshold, sorted lexicographically by antecedent
/// then consequent token lists.
///
/// `frequent` must have been mined with `thresholds.min_support()`.
pub fn generate_rules(
    frequent: &BTreeMap<Itemset, Rational>,
    db: &TransactionDB,
    thresholds: &MiningThresholds,
) -> Vec<AssociationRule> {
    let mut rules = Vec::new();
    for (itemset, &support) in frequent {
        if itemset.len() < 2 {
            continue;
        }
        let items: Vec<&AttributeToken> = itemset.iter().collect();
        // Every non-empty proper subset as antecedent, complement as consequent.
        for mask in 1..(1u32 << items.len()) - 1 {
            let mut antecedents = Itemset::new();
            let mut consequents = Itemset::new();
            for (pos, token) in items.iter().enumerate() {
                if mask & (1 << pos) != 0 {
                    antecedents.insert((*token).clone());
                } else {
                    consequents.insert((*token).clone());
                }
            }
            let confidence = db
                .confidence(&antecedents, &consequents)
                .expect("frequent itemsets occur in at least one transaction");
            if confidence >= thresholds.min_confidence() {
                rules.push(AssociationRule {
                    antecedents,
                    consequents,
                    support,
                    confidence,
                });
            }
        }
    }
    rules.sort();
    rules
}

/// Mines frequent itemsets and generates rules in one call.
pub fn mine_rules(db: &TransactionDB, thresholds: &MiningThresholds) -> Vec<AssociationRule> {
    let frequent = mine_frequent_itemsets(db, thresholds.min_support());
    generate_rules(&frequent, db, thresholds)
}

/// One rule per line: `ante1&ante2 => cons1&cons2 ; supp=<decimal> ; conf=<decimal>`,
/// tokens sorted lexicographically within each side.
pub fn write_rules(rules: &[AssociationRule]) -> String {
    let mut out = String::new();
    for rule in rules {
        out.push_str(&rule.to_string());
        out.push('\n');
    }
    out
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RuleParseError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("rule file contains no rules")]
    Empty,
}

/// Parses the [`write_rules`] line format. Blank lines and lines starting
/// with `#` are skipped.
pub fn parse_rules(text: &str) -> Result<Vec<AssociationRule>, RuleParseError> {
    let mut rules = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        rules.push(
            parse_rule_line(line).map_err(|reason| RuleParseError::Malformed {
                line: line_no,
                reason,
            })?,
        );
    }
    if rules.is_empty() {
        return Err(RuleParseError::Empty);
    }
    Ok(rules)
}

fn parse_rule_line(line: &str) -> Result<AssociationRule, String> {
    let (lhs, rest) = line
        .split_once(" => ")
        .ok_or_else(|| "missing ' => '".to_string())?;
    let mut segments = rest.split(" ; ");
    let rhs = segments
        .next()
        .ok_or_else(|| "missing consequent".to_string())?;
    let supp_part = segments
        .next()
        .ok_or_else(|| "missing 'supp=' segment".to_string())?;
    let conf_part = segments
        .next()
        .ok_or_else(|| "missing 'conf=' segment".to_string())?;
    if segments.next().is_some() {
        return Err("trailing segments after 'conf='".into());
    }

    let antecedents = parse_side(lhs)?;
    let consequents = parse_side(rhs)?;
    if !antecedents.is_disjoint(&consequents) {
        return Err("antecedent and consequent overlap".into());
    }
    let support = parse_measure(supp_part, "supp")?;
    let confidence = parse_measure(conf_part, "conf")?;
    Ok(AssociationRule {
        antecedents,
        consequents,
        support,
        confidence,
    })
}

fn parse_side(text: &str) -> Result<Itemset, String> {
    let mut side = Itemset::new();
    for raw in text.split('&') {
        let token = AttributeToken::new(raw.trim()).map_err(|e| e.to_string())?;
        side.insert(token);
    }
    if side.is_empty() {
        return Err("empty rule side".into());
    }
    Ok(side)
}

fn parse_measure(segment: &str, key: &str) -> Result<Rational, String> {
    let value = segment
        .trim()
        .strip_prefix(key)
        .and_then(|s| s.trim_start().strip_prefix('='))
        .ok_or_else(|| format!("expected '{key}=<decimal>'"))?;
    parse_rational(value).ok_or_else(|| format!("cannot parse {key} value {value:?}"))
}
