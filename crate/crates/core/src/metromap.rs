//! The metro-map model and its objective arithmetic: coverage, structure
//! quality, feasibility and the scalar fitness.
//!
//! A metro line is a chained sequence of simple rules forming a simple path;
//! a metro map is a bounded set of lines with pairwise distinct starting
//! stops. Structure quality sums over unordered line pairs and divides by
//! C = binom(|lines|, 2); an ordered double sum over i ≠ j against the same
//! normalizer would count every interaction twice, so unordered pairs are
//! the self-consistent reading and the one implemented here.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{AttributeGraph, NodeRole};
use crate::rules::SimpleRule;
use crate::transactions::AttributeToken;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LineError {
    #[error("a metro line needs at least one rule")]
    Empty,
    #[error("rule {position} does not chain: consequent of the previous rule differs from its antecedent")]
    BrokenChain { position: usize },
    #[error("stop {stop} repeats along the line")]
    RepeatedStop { stop: AttributeToken },
}

/// A non-empty chain of simple rules whose stops form a simple path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<SimpleRule>", into = "Vec<SimpleRule>")]
pub struct MetroLine {
    rules: Vec<SimpleRule>,
}

impl MetroLine {
    pub fn new(rules: Vec<SimpleRule>) -> Result<Self, LineError> {
        if rules.is_empty() {
            return Err(LineError::Empty);
        }
        for (idx, window) in rules.windows(2).enumerate() {
            if window[0].consequent != window[1].antecedent {
                return Err(LineError::BrokenChain { position: idx + 1 });
            }
        }
        let mut seen: BTreeSet<&AttributeToken> = BTreeSet::new();
        for stop in stops_of(&rules) {
            if !seen.insert(stop) {
                return Err(LineError::RepeatedStop { stop: stop.clone() });
            }
        }
        Ok(MetroLine { rules })
    }

    pub fn rules(&self) -> &[SimpleRule] {
        &self.rules
    }

    /// Number of rules, the line length L.
    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        false // the constructor rejects empty lines
    }

    /// The starting stop (first antecedent).
    pub fn start(&self) -> &AttributeToken {
        &self.rules[0].antecedent
    }

    /// The final stop (last consequent).
    pub fn end(&self) -> &AttributeToken {
        &self.rules[self.rules.len() - 1].consequent
    }

    /// Stops in order: [ante_1, cons_1 = ante_2, ..., cons_L].
    pub fn stops(&self) -> Vec<&AttributeToken> {
        stops_of(&self.rules)
    }
}

fn stops_of(rules: &[SimpleRule]) -> Vec<&AttributeToken> {
    let mut stops = Vec::with_capacity(rules.len() + 1);
    stops.push(&rules[0].antecedent);
    for rule in rules {
        stops.push(&rule.consequent);
    }
    stops
}

impl TryFrom<Vec<SimpleRule>> for MetroLine {
    type Error = LineError;

    fn try_from(rules: Vec<SimpleRule>) -> Result<Self, Self::Error> {
        MetroLine::new(rules)
    }
}

impl From<MetroLine> for Vec<SimpleRule> {
    fn from(line: MetroLine) -> Self {
        line.rules
    }
}

/// A variable-length individual: its line count is the control variable.
#[derive(Debug, Clone, PartialEq)]
pub struct MetroMap {
    pub lines: Vec<MetroLine>,
    pub fitness: Option<f64>,
}

impl MetroMap {
    pub fn new(lines: Vec<MetroLine>) -> Self {
        MetroMap {
            lines,
            fitness: None,
        }
    }
}

/// How the structure-quality term enters the fitness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QualityTerm {
    /// The default form, + w · (1 − sQuality). Note that it rewards
    /// similar lines.
    AsPrinted,
    /// The diversity-seeking alternative: + w · sQuality.
    Diversity,
}

/// Objective parameters: maximum line length τ, maximum map size K, and the
/// structure-quality weight w.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveConfig {
    pub tau: usize,
    pub k_max: usize,
    pub weight: f64,
    pub quality_term: QualityTerm,
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        ObjectiveConfig {
            tau: 10,
            k_max: 10,
            weight: 0.1,
            quality_term: QualityTerm::AsPrinted,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ObjectiveError {
    #[error("structure quality needs at least two lines")]
    TooFewLines,
    #[error("map is infeasible: {0}")]
    Infeasible(String),
}

/// Mean lift along the line.
pub fn coverage_line(line: &MetroLine) -> f64 {
    let total: f64 = line.rules().iter().map(|r| r.lift).sum();
    total / line.len() as f64
}

/// Mean of the per-line coverages.
pub fn coverage_map(map: &MetroMap) -> f64 {
    assert!(
        !map.lines.is_empty(),
        "coverage of an empty map is undefined"
    );
    let total: f64 = map.lines.iter().map(coverage_line).sum();
    total / map.lines.len() as f64
}

/// Mean fraction of distinct rule pairs over unordered line pairs; 1 when
/// every pair of lines is rule-disjoint, 0 when all lines coincide.
pub fn squality(map: &MetroMap) -> Result<f64, ObjectiveError> {
    let n = map.lines.len();
    if n < 2 {
        return Err(ObjectiveError::TooFewLines);
    }
    let rule_sets: Vec<BTreeSet<(&AttributeToken, &AttributeToken)>> = map
        .lines
        .iter()
        .map(|line| line.rules().iter().map(SimpleRule::endpoints).collect())
        .collect();
    let pair_count = (n * (n - 1) / 2) as f64;
    let mut total = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let len_i = map.lines[i].len() as f64;
            let len_j = map.lines[j].len() as f64;
            let shared = rule_sets[i].intersection(&rule_sets[j]).count() as f64;
            total += (len_i * len_j - shared) / (len_i * len_j);
        }
    }
    Ok(total / pair_count)
}

/// The scalar fitness: (coverage + w · (1 − sQuality)) · |lines| by
/// default, or + w · sQuality under [`QualityTerm::Diversity`].
///
/// The map must satisfy the graph-free feasibility constraints (line count,
/// line lengths, distinct starts); role checks against a graph belong to
/// [`is_feasible`].
pub fn fitness(map: &MetroMap, cfg: &ObjectiveConfig) -> Result<f64, ObjectiveError> {
    let structural = config_violations(map, cfg);
    if !structural.is_empty() {
        return Err(ObjectiveError::Infeasible(join_violations(&structural)));
    }
    let coverage = coverage_map(map);
    let quality = squality(map)?;
    let quality_term = match cfg.quality_term {
        QualityTerm::AsPrinted => 1.0 - quality,
        QualityTerm::Diversity => quality,
    };
    Ok((coverage + cfg.weight * quality_term) * map.lines.len() as f64)
}

/// One violated feasibility constraint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    TooFewLines { count: usize },
    TooManyLines { count: usize, k_max: usize },
    LineTooLong { line: usize, len: usize, tau: usize },
    DuplicateStart { stop: AttributeToken },
    NotASourceStart { line: usize, stop: AttributeToken },
    NotASinkEnd { line: usize, stop: AttributeToken },
    EdgeNotInGraph { line: usize, position: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TooFewLines { count } => {
                write!(f, "map has {count} line(s); at least 2 required")
            }
            Violation::TooManyLines { count, k_max } => {
                write!(f, "map has {count} lines; at most {k_max} allowed")
            }
            Violation::LineTooLong { line, len, tau } => {
                write!(f, "line {line} has {len} rules; coherence bound is {tau}")
            }
            Violation::DuplicateStart { stop } => {
                write!(f, "starting stop {stop} is used by more than one line")
            }
            Violation::NotASourceStart { line, stop } => {
                write!(
                    f,
                    "line {line} starts at {stop}, which is not a source node"
                )
            }
            Violation::NotASinkEnd { line, stop } => {
                write!(f, "line {line} ends at {stop}, which is not a sink node")
            }
            Violation::EdgeNotInGraph { line, position } => {
                write!(
                    f,
                    "line {line}, rule {position} is not an edge of the graph"
                )
            }
        }
    }
}

fn join_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(Violation::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

/// The outcome of a feasibility check; feasible iff no violations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeasibilityReport {
    pub violations: Vec<Violation>,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for FeasibilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_feasible() {
            f.write_str("feasible")
        } else {
            f.write_str(&join_violations(&self.violations))
        }
    }
}

fn config_violations(map: &MetroMap, cfg: &ObjectiveConfig) -> Vec<Violation> {
    let mut violations = Vec::new();
    let count = map.lines.len();
    if count < 2 {
        violations.push(Violation::TooFewLines { count });
    }
    if count > cfg.k_max {
        violations.push(Violation::TooManyLines {
            count,
            k_max: cfg.k_max,
        });
    }
    for (idx, line) in map.lines.iter().enumerate() {
        if line.len() > cfg.tau {
            violations.push(Violation::LineTooLong {
                line: idx,
                len: line.len(),
                tau: cfg.tau,
            });
        }
    }
    let mut starts: BTreeSet<&AttributeToken> = BTreeSet::new();
    for line in &map.lines {
        if !starts.insert(line.start()) {
            violations.push(Violation::DuplicateStart {
                stop: line.start().clone(),
            });
        }
    }
    violations
}

/// Full feasibility: the config-level constraints plus, against the graph,
/// source starts, sink ends and edge membership. Chaining and simple-path
/// structure are already guaranteed by [`MetroLine`].
pub fn is_feasible(
    map: &MetroMap,
    cfg: &ObjectiveConfig,
    graph: &AttributeGraph,
) -> FeasibilityReport {
    let mut violations = config_violations(map, cfg);
    for (idx, line) in map.lines.iter().enumerate() {
        if graph.role(line.start()) != Some(NodeRole::Source) {
            violations.push(Violation::NotASourceStart {
                line: idx,
                stop: line.start().clone(),
            });
        }
        if graph.role(line.end()) != Some(NodeRole::Sink) {
            violations.push(Violation::NotASinkEnd {
                line: idx,
                stop: line.end().clone(),
            });
        }
        for (pos, rule) in line.rules().iter().enumerate() {
            if !graph.has_edge(&rule.antecedent, &rule.consequent) {
                violations.push(Violation::EdgeNotInGraph {
                    line: idx,
                    position: pos,
                });
            }
        }
    }
    FeasibilityReport { violations }
}

#[derive(Serialize, Deserialize)]
struct LineDoc {
    stops: Vec<AttributeToken>,
    rules: Vec<SimpleRule>,
}

#[derive(Serialize, Deserialize)]
struct MapDoc {
    fitness: Option<f64>,
    lines: Vec<LineDoc>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MapDocError {
    #[error("map document is not valid JSON: {0}")]
    Json(String),
    #[error("line {line}: {source}")]
    InvalidLine { line: usize, source: LineError },
    #[error("line {line}: recorded stops do not match the rules")]
    StopsMismatch { line: usize },
}

/// Serializes a map as `{fitness, lines:[{stops, rules}]}`; the stop list of
/// a line is [ante_1, cons_1 = ante_2, ..., cons_L].
pub fn map_to_json(map: &MetroMap) -> String {
    let doc = MapDoc {
        fitness: map.fitness,
        lines: map
            .lines
            .iter()
            .map(|line| LineDoc {
                stops: line.stops().into_iter().cloned().collect(),
                rules: line.rules().to_vec(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("map document serializes")
}

/// Parses [`map_to_json`] output, revalidating chaining, simple-path
/// structure and the recorded stop lists.
pub fn map_from_json(text: &str) -> Result<MetroMap, MapDocError> {
    let doc: MapDoc = serde_json::from_str(text).map_err(|e| MapDocError::Json(e.to_string()))?;
    let mut lines = Vec::with_capacity(doc.lines.len());
    for (idx, line_doc) in doc.lines.into_iter().enumerate() {
        let line = MetroLine::new(line_doc.rules)
            .map_err(|source| MapDocError::InvalidLine { line: idx, source })?;
        let stops: Vec<AttributeToken> = line.stops().into_iter().cloned().collect();
        if stops != line_doc.stops {
            return Err(MapDocError::StopsMismatch { line: idx });
        }
        lines.push(line);
    }
    Ok(MetroMap {
        lines,
        fitness: doc.fitness,
    })
}
