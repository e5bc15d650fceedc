//! Rule post-processing: keep class-like attributes out of antecedents,
//! pick the consequent attribute set when none is declared, and break broad
//! rules into their p×q single-antecedent/single-consequent pairs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::apriori::AssociationRule;
use crate::transactions::{rational_to_f64, AttributeToken, Itemset, MeasureError, TransactionDB};

/// A one-antecedent/one-consequent edge. The lift is the f64 image of the
/// exact rational lift computed on the originating transaction database.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimpleRule {
    #[serde(rename = "ante")]
    pub antecedent: AttributeToken,
    #[serde(rename = "cons")]
    pub consequent: AttributeToken,
    pub lift: f64,
}

impl SimpleRule {
    /// Endpoint pair, the identity used for deduplication and diversity
    /// counting (one database yields one lift per pair).
    pub fn endpoints(&self) -> (&AttributeToken, &AttributeToken) {
        (&self.antecedent, &self.consequent)
    }
}

impl fmt::Display for SimpleRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} => {}", self.antecedent, self.consequent)
    }
}

/// An antecedent/consequent pair before its lift has been computed.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RulePair {
    pub antecedent: AttributeToken,
    pub consequent: AttributeToken,
}

/// Breaks one broad rule into exactly |antecedents| × |consequents| pairs,
/// in lexicographic order. Pairs within one rule are necessarily distinct
/// because the sides are disjoint sets.
pub fn simplify(rule: &AssociationRule) -> Vec<RulePair> {
    let mut pairs = Vec::with_capacity(rule.antecedents.len() * rule.consequents.len());
    for antecedent in &rule.antecedents {
        for consequent in &rule.consequents {
            pairs.push(RulePair {
                antecedent: antecedent.clone(),
                consequent: consequent.clone(),
            });
        }
    }
    pairs
}

/// Simplifies every rule and deduplicates pairs globally, keeping the first
/// occurrence. The attribute graph's adjacency is 0/1, so one edge per pair.
pub fn simplify_all<'a>(rules: impl IntoIterator<Item = &'a AssociationRule>) -> Vec<RulePair> {
    let mut seen: BTreeSet<RulePair> = BTreeSet::new();
    let mut out = Vec::new();
    for rule in rules {
        for pair in simplify(rule) {
            if seen.insert(pair.clone()) {
                out.push(pair);
            }
        }
    }
    out
}

/// Scores each pair with its lift on the originating database.
pub fn attach_lift(
    pairs: &[RulePair],
    db: &TransactionDB,
) -> Result<Vec<SimpleRule>, MeasureError> {
    pairs
        .iter()
        .map(|pair| {
            let ante: Itemset = [pair.antecedent.clone()].into_iter().collect();
            let cons: Itemset = [pair.consequent.clone()].into_iter().collect();
            let lift = db.lift(&ante, &cons)?;
            Ok(SimpleRule {
                antecedent: pair.antecedent.clone(),
                consequent: pair.consequent.clone(),
                lift: rational_to_f64(lift),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassOrigin {
    Declared,
    Inferred,
}

/// The attribute tokens treated as classification results: they anchor the
/// filtering step and mark the intended final metro stops.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassAttributeSet {
    pub tokens: BTreeSet<AttributeToken>,
    pub origin: ClassOrigin,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RulesError {
    #[error("no attribute qualifies as a classification consequent")]
    NoConsequentCandidate,
    #[error("no rules survive class filtering")]
    EmptyAfterFilter,
    #[error("declared class feature {0:?} does not occur in any rule")]
    DeclaredClassMissing(String),
}

/// Picks the class feature by exact counting: among tokens that only ever
/// appear as consequents, the feature whose tokens appear as a consequent in
/// the maximum number of rules wins; ties go to the lexicographically
/// smaller feature name.
pub fn infer_class_attributes(rules: &[AssociationRule]) -> Result<ClassAttributeSet, RulesError> {
    let mut antecedent_tokens: BTreeSet<&AttributeToken> = BTreeSet::new();
    let mut consequent_tokens: BTreeSet<&AttributeToken> = BTreeSet::new();
    for rule in rules {
        antecedent_tokens.extend(rule.antecedents.iter());
        consequent_tokens.extend(rule.consequents.iter());
    }
    let candidates: BTreeSet<&AttributeToken> = consequent_tokens
        .difference(&antecedent_tokens)
        .copied()
        .collect();
    if candidates.is_empty() {
        return Err(RulesError::NoConsequentCandidate);
    }

    let mut feature_tokens: BTreeMap<&str, BTreeSet<&AttributeToken>> = BTreeMap::new();
    for token in &candidates {
        feature_tokens
            .entry(token.feature())
            .or_default()
            .insert(token);
    }
    let mut best: Option<(&str, usize)> = None;
    for (feature, tokens) in &feature_tokens {
        let count = rules
            .iter()
            .filter(|r| r.consequents.iter().any(|t| tokens.contains(t)))
            .count();
        // Strict comparison keeps the first (lexicographically smallest) on ties.
        if best.is_none_or(|(_, best_count)| count > best_count) {
            best = Some((feature, count));
        }
    }
    let (feature, _) = best.expect("candidates imply at least one feature");
    Ok(ClassAttributeSet {
        tokens: feature_tokens[feature]
            .iter()
            .map(|t| (*t).clone())
            .collect(),
        origin: ClassOrigin::Inferred,
    })
}

/// Removes every rule whose antecedent set intersects the given tokens;
/// retained rules keep their order.
pub fn filter_by_tokens(
    rules: &[AssociationRule],
    tokens: &BTreeSet<AttributeToken>,
) -> Result<Vec<AssociationRule>, RulesError> {
    let retained: Vec<AssociationRule> = rules
        .iter()
        .filter(|r| r.antecedents.is_disjoint(tokens))
        .cloned()
        .collect();
    if retained.is_empty() {
        return Err(RulesError::EmptyAfterFilter);
    }
    Ok(retained)
}

/// Removes every rule whose antecedent set intersects the class tokens.
pub fn filter_rules(
    rules: &[AssociationRule],
    classes: &ClassAttributeSet,
) -> Result<Vec<AssociationRule>, RulesError> {
    filter_by_tokens(rules, &classes.tokens)
}

/// Builds the class set for declared class features and filters in one step.
///
/// Filtering removes rules with any declared-feature token as antecedent.
/// The reported class set keeps only tokens that still appear as a
/// consequent afterwards — a declared value that never concludes a retained
/// rule is eliminated from observation.
pub fn declared_class_attributes(
    rules: &[AssociationRule],
    features: &[String],
) -> Result<(ClassAttributeSet, Vec<AssociationRule>), RulesError> {
    let mut declared_tokens: BTreeSet<AttributeToken> = BTreeSet::new();
    for feature in features {
        let matching: BTreeSet<AttributeToken> = rules
            .iter()
            .flat_map(|r| r.antecedents.iter().chain(r.consequents.iter()))
            .filter(|t| t.feature() == feature)
            .cloned()
            .collect();
        if matching.is_empty() {
            return Err(RulesError::DeclaredClassMissing(feature.clone()));
        }
        declared_tokens.extend(matching);
    }
    let filtered = filter_by_tokens(rules, &declared_tokens)?;
    let surviving: BTreeSet<AttributeToken> = declared_tokens
        .into_iter()
        .filter(|t| filtered.iter().any(|r| r.consequents.contains(t)))
        .collect();
    if surviving.is_empty() {
        return Err(RulesError::NoConsequentCandidate);
    }
    Ok((
        ClassAttributeSet {
            tokens: surviving,
            origin: ClassOrigin::Declared,
        },
        filtered,
    ))
}

/// Resolves the class attribute set (declared features override inference)
/// and filters the rules against it.
pub fn resolve_classes_and_filter(
    rules: &[AssociationRule],
    declared: Option<&[String]>,
) -> Result<(ClassAttributeSet, Vec<AssociationRule>), RulesError> {
    match declared {
        Some(features) if !features.is_empty() => declared_class_attributes(rules, features),
        _ => {
            let classes = infer_class_attributes(rules)?;
            let filtered = filter_rules(rules, &classes)?;
            Ok((classes, filtered))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transactions::Rational;

    fn token(text: &str) -> AttributeToken {
        AttributeToken::new(text).unwrap()
    }

    fn itemset(tokens: &[&str]) -> Itemset {
        tokens.iter().map(|t| token(t)).collect()
    }

    fn rule(antecedents: &[&str], consequents: &[&str]) -> AssociationRule {
        AssociationRule {
            antecedents: itemset(antecedents),
            consequents: itemset(consequents),
            support: Rational::new(1, 2),
            confidence: Rational::new(1, 2),
        }
    }

    #[test]
    fn simplify_pairs_each_antecedent_with_each_consequent() {
        let pairs = simplify(&rule(&["x1", "x2"], &["y1", "y2"]));
        let expected: Vec<RulePair> = [("x1", "y1"), ("x1", "y2"), ("x2", "y1"), ("x2", "y2")]
            .iter()
            .map(|(a, c)| RulePair {
                antecedent: token(a),
                consequent: token(c),
            })
            .collect();
        assert_eq!(pairs, expected);
    }

    #[test]
    fn simplify_degenerate_shapes() {
        assert_eq!(simplify(&rule(&["x"], &["y"])).len(), 1);
        assert_eq!(simplify(&rule(&["x1", "x2", "x3"], &["y1"])).len(), 3);
    }

    #[test]
    fn simplify_all_deduplicates_globally() {
        let rules = vec![rule(&["x"], &["y", "z"]), rule(&["x", "w"], &["y"])];
        let pairs = simplify_all(&rules);
        // x=>y appears in both broad rules but only once here.
        assert_eq!(pairs.len(), 3);
        assert_eq!(pairs[0].antecedent, token("x"));
        assert_eq!(pairs[0].consequent, token("y"));
    }

    #[test]
    fn infer_picks_feature_with_most_consequent_rules() {
        // Consequent-rule counts per class value: class_1 in 59, class_2 in
        // 71, class_3 in 48; a mixed feature appears on both sides.
        let mut rules = Vec::new();
        for (value, count) in [("class_1", 59), ("class_2", 71), ("class_3", 48)] {
            for i in 0..count {
                rules.push(rule(&[&format!("f{i}_v")], &[value]));
            }
        }
        rules.push(rule(&["mixed_m"], &["f0_v"]));
        let classes = infer_class_attributes(&rules).unwrap();
        assert_eq!(classes.origin, ClassOrigin::Inferred);
        assert_eq!(classes.tokens, itemset(&["class_1", "class_2", "class_3"]));
    }

    #[test]
    fn infer_single_candidate() {
        let rules = vec![rule(&["a_1"], &["goal_g"]), rule(&["b_1"], &["goal_g"])];
        let classes = infer_class_attributes(&rules).unwrap();
        assert_eq!(classes.tokens, itemset(&["goal_g"]));
    }

    #[test]
    fn infer_breaks_ties_lexicographically() {
        let mut rules = Vec::new();
        for i in 0..5 {
            rules.push(rule(&[&format!("x{i}_v")], &["beta_1"]));
            rules.push(rule(&[&format!("y{i}_v")], &["alpha_1"]));
        }
        let classes = infer_class_attributes(&rules).unwrap();
        assert_eq!(classes.tokens, itemset(&["alpha_1"]));
    }

    #[test]
    fn infer_errors_when_every_token_is_an_antecedent_somewhere() {
        let rules = vec![rule(&["a_1"], &["b_1"]), rule(&["b_1"], &["a_1"])];
        assert_eq!(
            infer_class_attributes(&rules),
            Err(RulesError::NoConsequentCandidate)
        );
    }

    #[test]
    fn filter_removes_class_antecedents_only() {
        let classes = ClassAttributeSet {
            tokens: itemset(&["class_1"]),
            origin: ClassOrigin::Declared,
        };
        let input = vec![
            rule(&["class_1", "a_1"], &["b_1"]),
            rule(&["a_1"], &["class_1"]),
            rule(&["a_1"], &["b_1"]),
        ];
        let filtered = filter_rules(&input, &classes).unwrap();
        assert_eq!(filtered, vec![input[1].clone(), input[2].clone()]);

        // No class antecedents anywhere: identity.
        let untouched = vec![rule(&["a_1"], &["b_1"])];
        assert_eq!(filter_rules(&untouched, &classes).unwrap(), untouched);

        // Everything removed: error.
        let all_class = vec![rule(&["class_1"], &["b_1"])];
        assert_eq!(
            filter_rules(&all_class, &classes),
            Err(RulesError::EmptyAfterFilter)
        );
    }

    #[test]
    fn declared_classes_prune_values_never_seen_as_consequent() {
        let rules = vec![
            rule(&["a_1"], &["rings_low"]),
            rule(&["rings_high", "b_1"], &["c_1"]),
            rule(&["b_1"], &["c_1"]),
        ];
        let (classes, filtered) =
            declared_class_attributes(&rules, &["rings".to_string()]).unwrap();
        // rings_high only ever occurs as an antecedent: filtered out of the
        // rule set and eliminated from the class set.
        assert_eq!(classes.tokens, itemset(&["rings_low"]));
        assert_eq!(classes.origin, ClassOrigin::Declared);
        assert_eq!(filtered.len(), 2);

        assert_eq!(
            declared_class_attributes(&rules, &["absent".to_string()]),
            Err(RulesError::DeclaredClassMissing("absent".into()))
        );
    }
}
