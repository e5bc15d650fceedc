//! The evolutionary metro-map constructor: random path initialization,
//! line-level crossover with start-stop repair, suffix-regrowing mutation,
//! and one-to-one survivor selection per population slot.
//!
//! There is no constraint-handling mechanism: operators either repair a
//! trial or leave it infeasible, and infeasible trials simply lose survivor
//! selection. All randomness flows from one seed; every (generation, slot)
//! pair owns an independent counter-derived stream, so trial construction is
//! reproducible regardless of evaluation order.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{AttributeGraph, NodeRole};
use crate::metromap::{fitness, is_feasible, MetroLine, MetroMap, ObjectiveConfig};
use crate::rules::SimpleRule;
use crate::transactions::AttributeToken;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EaError {
    #[error("graph has {0} source node(s); population initialization needs at least 2")]
    InsufficientSources(usize),
    #[error(
        "no source-to-sink path of length <= {tau} found from {start} within {attempts} attempts"
    )]
    NoPathWithinTau {
        start: AttributeToken,
        tau: usize,
        attempts: usize,
    },
    #[error("invalid EA configuration: {0}")]
    InvalidConfig(String),
}

/// EA parameters. Defaults: Np = 100, MAX_GEN = 100, p_c = 0.5,
/// p_m = 0.01, plus the objective defaults (tau = 10, K = 10, w = 0.1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EAConfig {
    pub population_size: usize,
    pub max_generations: usize,
    pub p_crossover: f64,
    pub p_mutation: f64,
    pub objective: ObjectiveConfig,
    pub rng_seed: u64,
    /// Attempts per random source-to-sink walk before giving up.
    pub path_retry_budget: usize,
    /// Attempts to regrow a mutated line before leaving it unmutated.
    pub mutation_retry_budget: usize,
}

impl Default for EAConfig {
    fn default() -> Self {
        EAConfig {
            population_size: 100,
            max_generations: 100,
            p_crossover: 0.5,
            p_mutation: 0.01,
            objective: ObjectiveConfig::default(),
            rng_seed: 0,
            path_retry_budget: 50,
            mutation_retry_budget: 10,
        }
    }
}

impl EAConfig {
    pub fn validate(&self) -> Result<(), EaError> {
        if self.population_size < 2 {
            return Err(EaError::InvalidConfig(format!(
                "population_size must be at least 2, got {}",
                self.population_size
            )));
        }
        if self.max_generations < 1 {
            return Err(EaError::InvalidConfig(
                "max_generations must be at least 1".into(),
            ));
        }
        for (name, p) in [
            ("p_crossover", self.p_crossover),
            ("p_mutation", self.p_mutation),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(EaError::InvalidConfig(format!(
                    "{name} must lie in [0, 1], got {p}"
                )));
            }
        }
        if self.objective.tau < 1 {
            return Err(EaError::InvalidConfig("tau must be at least 1".into()));
        }
        if self.objective.k_max < 2 {
            return Err(EaError::InvalidConfig("k_max must be at least 2".into()));
        }
        if !(self.objective.weight >= 0.0 && self.objective.weight.is_finite()) {
            return Err(EaError::InvalidConfig(format!(
                "weight must be a finite non-negative number, got {}",
                self.objective.weight
            )));
        }
        if self.path_retry_budget < 1 || self.mutation_retry_budget < 1 {
            return Err(EaError::InvalidConfig(
                "retry budgets must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// All scored individuals of one generation.
#[derive(Debug, Clone)]
pub struct Population {
    pub individuals: Vec<MetroMap>,
    pub generation: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub generation: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
}

/// What a run produced: per-generation statistics, the best map ever seen,
/// and effort counters.
#[derive(Debug, Clone)]
pub struct RunTrace {
    pub rows: Vec<TraceRow>,
    pub best: MetroMap,
    /// Fitness evaluations performed (initial population plus feasible trials).
    pub evaluations: u64,
    /// Trials constructed, feasible or not.
    pub trials: u64,
}

/// `generation,best_fitness,mean_fitness` CSV, one row per generation
/// starting with the initial population.
pub fn write_trace_csv(trace: &RunTrace) -> String {
    let mut out = String::from("generation,best_fitness,mean_fitness\n");
    for row in &trace.rows {
        out.push_str(&format!(
            "{},{},{}\n",
            row.generation, row.best_fitness, row.mean_fitness
        ));
    }
    out
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Random walk from `start` to any sink, visiting only unvisited nodes and
/// appending at most `max_rules` rules. Each step chooses uniformly among
/// the admissible out-edges.
fn extend_walk(
    graph: &AttributeGraph,
    start: usize,
    visited: &mut HashSet<usize>,
    max_rules: usize,
    rng: &mut impl Rng,
) -> Option<Vec<SimpleRule>> {
    let mut rules = Vec::new();
    let mut current = start;
    loop {
        if graph.role_of_id(current) == NodeRole::Sink {
            return Some(rules);
        }
        if rules.len() == max_rules {
            return None;
        }
        let candidates: Vec<(usize, &SimpleRule)> = graph
            .out_edge_targets(current)
            .into_iter()
            .filter(|(to, _)| !visited.contains(to))
            .collect();
        let &(to, edge) = candidates.choose(rng)?;
        rules.push(edge.clone());
        visited.insert(to);
        current = to;
    }
}

/// A random simple path from a source to some sink with at most `tau` rules.
/// Walks that dead-end in a cycle or overrun `tau` are retried up to
/// `retry_budget` times.
pub fn random_path(
    graph: &AttributeGraph,
    source: &AttributeToken,
    tau: usize,
    retry_budget: usize,
    rng: &mut impl Rng,
) -> Result<MetroLine, EaError> {
    let source_id = graph
        .node_id(source)
        .filter(|&id| graph.role_of_id(id) == NodeRole::Source)
        .unwrap_or_else(|| panic!("random_path requires a source node, got {source}"));
    assert!(tau >= 1, "random_path requires tau >= 1");
    for _ in 0..retry_budget {
        let mut visited = HashSet::from([source_id]);
        if let Some(rules) = extend_walk(graph, source_id, &mut visited, tau, rng) {
            return Ok(MetroLine::new(rules).expect("a walk yields a chained simple path"));
        }
    }
    Err(EaError::NoPathWithinTau {
        start: source.clone(),
        tau,
        attempts: retry_budget,
    })
}

fn random_map(
    graph: &AttributeGraph,
    cfg: &EAConfig,
    source_ids: &[usize],
    rng: &mut impl Rng,
) -> Result<MetroMap, EaError> {
    let k_cap = cfg.objective.k_max.min(source_ids.len());
    let line_count = rng.gen_range(2..=k_cap);
    let chosen = rand::seq::index::sample(rng, source_ids.len(), line_count);
    let mut lines = Vec::with_capacity(line_count);
    for idx in chosen.iter() {
        let source = &graph.nodes()[source_ids[idx]];
        lines.push(random_path(
            graph,
            source,
            cfg.objective.tau,
            cfg.path_retry_budget,
            rng,
        )?);
    }
    let mut map = MetroMap::new(lines);
    map.fitness = Some(fitness(&map, &cfg.objective).expect("freshly drawn maps are feasible"));
    Ok(map)
}

/// Np feasible, scored individuals. Line counts are drawn uniformly from
/// [2, min(K, #sources)] and each line starts at a distinct source drawn
/// without replacement.
pub fn initialize_population(
    graph: &AttributeGraph,
    cfg: &EAConfig,
    rng: &mut impl Rng,
) -> Result<Population, EaError> {
    let source_ids: Vec<usize> = (0..graph.node_count())
        .filter(|&id| graph.role_of_id(id) == NodeRole::Source)
        .collect();
    if source_ids.len() < 2 {
        return Err(EaError::InsufficientSources(source_ids.len()));
    }
    let mut individuals = Vec::with_capacity(cfg.population_size);
    for _ in 0..cfg.population_size {
        let mut last_err = None;
        let mut drawn = None;
        for _ in 0..cfg.path_retry_budget {
            match random_map(graph, cfg, &source_ids, rng) {
                Ok(map) => {
                    drawn = Some(map);
                    break;
                }
                Err(e) => last_err = Some(e),
            }
        }
        match drawn {
            Some(map) => individuals.push(map),
            None => return Err(last_err.expect("failed attempts leave an error")),
        }
    }
    Ok(Population {
        individuals,
        generation: 0,
    })
}

#[derive(Clone, Copy, PartialEq)]
enum LineOrigin {
    Target,
    Parent,
}

/// Builds a trial by taking, per target line index, the parent's line with
/// probability `p_c` (deleting the slot when the parent has none) and the
/// target's line otherwise. When two picked lines share a starting stop the
/// parent-inherited one is preferred. The trial may shrink below two lines;
/// it is returned as-is and survivor selection will discard it.
pub fn crossover(target: &MetroMap, parent: &MetroMap, p_c: f64, rng: &mut impl Rng) -> MetroMap {
    let mut picked: Vec<(MetroLine, LineOrigin)> = Vec::new();
    for i in 0..target.lines.len() {
        if rng.gen::<f64>() < p_c {
            if let Some(line) = parent.lines.get(i) {
                picked.push((line.clone(), LineOrigin::Parent));
            }
        } else {
            picked.push((target.lines[i].clone(), LineOrigin::Target));
        }
    }
    let mut kept: Vec<(MetroLine, LineOrigin)> = Vec::new();
    for (line, origin) in picked {
        match kept.iter().position(|(k, _)| k.start() == line.start()) {
            None => kept.push((line, origin)),
            Some(pos) => {
                if kept[pos].1 == LineOrigin::Target && origin == LineOrigin::Parent {
                    kept[pos] = (line, origin);
                }
            }
        }
    }
    MetroMap::new(kept.into_iter().map(|(line, _)| line).collect())
}

fn mutate_line(
    line: &MetroLine,
    graph: &AttributeGraph,
    tau: usize,
    retry_budget: usize,
    rng: &mut impl Rng,
) -> Option<MetroLine> {
    let position = rng.gen_range(1..=line.len()); // mutation point, 1-based
    let prefix = &line.rules()[..position - 1];
    let anchor = &line.rules()[position - 1].antecedent;
    let anchor_id = graph
        .node_id(anchor)
        .expect("mutation operates on lines drawn from this graph");
    let mut prefix_stops: HashSet<usize> = prefix
        .iter()
        .map(|r| {
            graph
                .node_id(&r.antecedent)
                .expect("mutation operates on lines drawn from this graph")
        })
        .collect();
    prefix_stops.insert(anchor_id);

    // The new consequent must not revisit the kept prefix.
    let candidates: Vec<(usize, &SimpleRule)> = graph
        .out_edge_targets(anchor_id)
        .into_iter()
        .filter(|(to, _)| !prefix_stops.contains(to))
        .collect();
    if candidates.is_empty() {
        return None;
    }
    for _ in 0..retry_budget {
        let &(to, edge) = candidates.choose(rng).expect("candidates are non-empty");
        let mut visited = prefix_stops.clone();
        visited.insert(to);
        // position rules are fixed; the suffix may use the rest of tau.
        if let Some(suffix) = extend_walk(graph, to, &mut visited, tau - position, rng) {
            let mut rules = prefix.to_vec();
            rules.push(edge.clone());
            rules.extend(suffix);
            return Some(MetroLine::new(rules).expect("regrown line chains by construction"));
        }
    }
    None
}

/// Mutates each line independently with probability `p_m`: a position k is
/// drawn, rules before k and the antecedent X_k are kept, a new consequent
/// is drawn among X_k's out-neighbors off the prefix, and the remainder is
/// regrown towards a sink within the residual budget. A line that cannot be
/// regrown is left unmutated.
pub fn mutate(
    map: &MetroMap,
    graph: &AttributeGraph,
    p_m: f64,
    tau: usize,
    retry_budget: usize,
    rng: &mut impl Rng,
) -> MetroMap {
    let lines = map
        .lines
        .iter()
        .map(|line| {
            if rng.gen::<f64>() < p_m {
                match mutate_line(line, graph, tau, retry_budget, rng) {
                    Some(mutated) => mutated,
                    None => {
                        log::debug!("mutation could not regrow a line from {}", line.start());
                        line.clone()
                    }
                }
            } else {
                line.clone()
            }
        })
        .collect();
    MetroMap::new(lines)
}

/// One-to-one survivor selection: the trial replaces the target iff it is
/// feasible (scored) and its fitness is at least the target's. Ties go to
/// the trial.
pub fn select_survivor(target: MetroMap, trial: MetroMap) -> MetroMap {
    match (target.fitness, trial.fitness) {
        (Some(target_fit), Some(trial_fit)) if trial_fit >= target_fit => trial,
        (None, Some(_)) => trial,
        _ => target,
    }
}

/// Drives the generational loop; step-wise access for instrumented runs.
pub struct Evolver<'g> {
    graph: &'g AttributeGraph,
    cfg: EAConfig,
    population: Vec<MetroMap>,
    generation: usize,
    evaluations: u64,
    trials: u64,
    rows: Vec<TraceRow>,
    best: MetroMap,
}

impl<'g> Evolver<'g> {
    pub fn new(graph: &'g AttributeGraph, cfg: EAConfig) -> Result<Self, EaError> {
        cfg.validate()?;
        let mut rng = stream_rng(cfg.rng_seed, 0);
        let population = initialize_population(graph, &cfg, &mut rng)?;
        let evaluations = population.individuals.len() as u64;
        let best = best_of(&population.individuals).clone();
        let mut evolver = Evolver {
            graph,
            cfg,
            population: population.individuals,
            generation: 0,
            evaluations,
            trials: 0,
            rows: Vec::new(),
            best,
        };
        evolver.record_row();
        Ok(evolver)
    }

    pub fn individuals(&self) -> &[MetroMap] {
        &self.population
    }

    pub fn generation(&self) -> usize {
        self.generation
    }

    pub fn best(&self) -> &MetroMap {
        &self.best
    }

    pub fn rows(&self) -> &[TraceRow] {
        &self.rows
    }

    /// Runs one generation: per slot, a random distinct parent, crossover,
    /// mutation, scoring, and one-to-one survivor selection. Parents are
    /// drawn from the generation-start population and every slot owns a
    /// counter-derived random stream, so slots are order-independent.
    pub fn step(&mut self) {
        let np = self.cfg.population_size;
        let gen = self.generation + 1;
        let snapshot = self.population.clone();
        for slot in 0..np {
            let stream = (gen as u64) * (np as u64) + slot as u64 + 1;
            let mut rng = stream_rng(self.cfg.rng_seed, stream);
            let parent = {
                let other = rng.gen_range(0..np - 1);
                if other >= slot {
                    other + 1
                } else {
                    other
                }
            };
            let crossed = crossover(
                &snapshot[slot],
                &snapshot[parent],
                self.cfg.p_crossover,
                &mut rng,
            );
            let mut trial = mutate(
                &crossed,
                self.graph,
                self.cfg.p_mutation,
                self.cfg.objective.tau,
                self.cfg.mutation_retry_budget,
                &mut rng,
            );
            self.trials += 1;
            if is_feasible(&trial, &self.cfg.objective, self.graph).is_feasible() {
                trial.fitness =
                    Some(fitness(&trial, &self.cfg.objective).expect("feasible maps score"));
                self.evaluations += 1;
            }
            self.population[slot] = select_survivor(snapshot[slot].clone(), trial);
        }
        self.generation = gen;
        let generation_best = best_of(&self.population);
        if generation_best.fitness > self.best.fitness {
            self.best = generation_best.clone();
        }
        self.record_row();
    }

    fn record_row(&mut self) {
        let fitnesses: Vec<f64> = self
            .population
            .iter()
            .map(|m| m.fitness.expect("population individuals are scored"))
            .collect();
        let best = fitnesses.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mean = fitnesses.iter().sum::<f64>() / fitnesses.len() as f64;
        self.rows.push(TraceRow {
            generation: self.generation,
            best_fitness: best,
            mean_fitness: mean,
        });
    }

    pub fn into_trace(self) -> RunTrace {
        RunTrace {
            rows: self.rows,
            best: self.best,
            evaluations: self.evaluations,
            trials: self.trials,
        }
    }
}

fn best_of(individuals: &[MetroMap]) -> &MetroMap {
    individuals
        .iter()
        .max_by(|a, b| {
            a.fitness
                .partial_cmp(&b.fitness)
                .expect("fitness values are comparable")
        })
        .expect("population is non-empty")
}

/// Runs `max_generations` generations and returns the trace with the best
/// individual ever seen.
pub fn evolve(graph: &AttributeGraph, cfg: &EAConfig) -> Result<RunTrace, EaError> {
    let mut evolver = Evolver::new(graph, cfg.clone())?;
    for _ in 0..cfg.max_generations {
        evolver.step();
    }
    Ok(evolver.into_trace())
}
