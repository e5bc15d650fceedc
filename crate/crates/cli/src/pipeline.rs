//! The five pipeline stages as file-to-file functions, plus the full run.
//!
//! `run_pipeline` is literally the composition of the stage functions over
//! the artifact files in the output directory, so chained subcommands and a
//! full run produce byte-identical artifacts from the same inputs.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use rulemap_core::apriori::{self, MiningThresholds};
use rulemap_core::ea::{evolve, write_trace_csv, EAConfig, RunTrace};
use rulemap_core::graph::{build_attribute_graph, AttributeGraph};
use rulemap_core::metromap::{map_from_json, map_to_json};
use rulemap_core::render::{render_dot, render_svg};
use rulemap_core::rules::{attach_lift, resolve_classes_and_filter, simplify_all, ClassOrigin};
use rulemap_core::transactions::{
    discretize_equal_width, load_transactions, InputFormat, TransactionDB,
};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{PipelineConfig, PipelineMode, SeedSource};
use crate::error::StageError;

pub const RULES_FILE: &str = "rules.txt";
pub const FILTERED_FILE: &str = "filtered_rules.txt";
pub const GRAPH_FILE: &str = "graph.json";
pub const TRACE_FILE: &str = "trace.csv";
pub const MAP_JSON_FILE: &str = "map.json";
pub const MAP_DOT_FILE: &str = "map.dot";
pub const MAP_SVG_FILE: &str = "map.svg";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Loads the dataset, optionally running equal-width binning over numeric
/// columns of tabular input first.
pub fn load_dataset(
    input: &Path,
    format: InputFormat,
    bins: Option<usize>,
) -> Result<TransactionDB, StageError> {
    match (format, bins) {
        (InputFormat::Tabular, Some(bins)) => {
            let text = fs::read_to_string(input)?;
            let binned = discretize_equal_width(&text, bins)?;
            Ok(load_transactions(binned.as_bytes(), format)?)
        }
        (InputFormat::Basket, Some(_)) => Err(StageError::Config(
            "--bins applies to tabular input only".into(),
        )),
        _ => {
            let file = fs::File::open(input).map_err(|e| {
                StageError::Io(std::io::Error::new(
                    e.kind(),
                    format!("cannot open {}: {e}", input.display()),
                ))
            })?;
            Ok(load_transactions(BufReader::new(file), format)?)
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MineStats {
    pub transactions: usize,
    pub attributes: usize,
    pub rules_mined: usize,
}

/// Stage 1: mine rules from the dataset and write the rule file.
pub fn stage_mine(
    input: &Path,
    format: InputFormat,
    bins: Option<usize>,
    thresholds: &MiningThresholds,
    out_rules: &Path,
) -> Result<MineStats, StageError> {
    let db = load_dataset(input, format, bins)?;
    let rules = apriori::mine_rules(&db, thresholds);
    if rules.is_empty() {
        return Err(StageError::RuleInput(
            "no rules satisfy the thresholds; lower --min-supp or --min-conf".into(),
        ));
    }
    fs::write(out_rules, apriori::write_rules(&rules))?;
    Ok(MineStats {
        transactions: db.count(),
        attributes: db.universe().len(),
        rules_mined: rules.len(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct FilterStats {
    pub rules_total: usize,
    pub rules_filtered: usize,
    pub class_origin: ClassOrigin,
    pub class_tokens: Vec<String>,
}

/// Stage 2: filter rules so class attributes never appear as antecedents.
pub fn stage_filter(
    rules_path: &Path,
    declared_classes: Option<&[String]>,
    out_filtered: &Path,
) -> Result<FilterStats, StageError> {
    let text = fs::read_to_string(rules_path)?;
    let rules = apriori::parse_rules(&text).map_err(|e| StageError::RuleInput(e.to_string()))?;
    let (classes, filtered) = resolve_classes_and_filter(&rules, declared_classes)?;
    fs::write(out_filtered, apriori::write_rules(&filtered))?;
    Ok(FilterStats {
        rules_total: rules.len(),
        rules_filtered: filtered.len(),
        class_origin: classes.origin,
        class_tokens: classes.tokens.iter().map(|t| t.to_string()).collect(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct GraphStats {
    pub simple_rules: usize,
    pub nodes: usize,
    pub edges: usize,
    pub sources: usize,
    pub intern: usize,
    pub sinks: usize,
}

/// Stage 3: simplify the filtered rules, score each pair with its lift on
/// the dataset, and build the attribute graph.
pub fn stage_graph(
    filtered_path: &Path,
    input: &Path,
    format: InputFormat,
    bins: Option<usize>,
    out_graph: &Path,
) -> Result<GraphStats, StageError> {
    let text = fs::read_to_string(filtered_path)?;
    let rules = apriori::parse_rules(&text).map_err(|e| StageError::RuleInput(e.to_string()))?;
    let db = load_dataset(input, format, bins)?;
    let pairs = simplify_all(&rules);
    let simple = attach_lift(&pairs, &db).map_err(|e| {
        StageError::Graph(format!(
            "cannot score simple rules against the dataset: {e}"
        ))
    })?;
    let simple_count = simple.len();
    let graph = build_attribute_graph(simple).map_err(|e| StageError::Graph(e.to_string()))?;
    fs::write(out_graph, graph.to_json())?;
    let (sources, intern, sinks) = graph.role_counts();
    Ok(GraphStats {
        simple_rules: simple_count,
        nodes: graph.node_count(),
        edges: graph.edge_count(),
        sources,
        intern,
        sinks,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RepeatStats {
    pub seed: u64,
    pub best_fitness: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvolveStats {
    pub generations: usize,
    pub evaluations: u64,
    pub trials: u64,
    pub best_fitness: f64,
    pub repeats: Vec<RepeatStats>,
    pub chosen_repeat: usize,
}

/// Stage 4: run the EA `repeats` times (repeat r uses seed + r) and keep the
/// best run's trace and map.
pub fn stage_evolve(
    graph_path: &Path,
    ea: &EAConfig,
    repeats: usize,
    out_trace: &Path,
    out_map: &Path,
) -> Result<EvolveStats, StageError> {
    let text = fs::read_to_string(graph_path)?;
    let graph = AttributeGraph::from_json(&text).map_err(|e| StageError::Graph(e.to_string()))?;
    let mut runs: Vec<(u64, RunTrace)> = Vec::with_capacity(repeats);
    for repeat in 0..repeats {
        let seed = ea.rng_seed.wrapping_add(repeat as u64);
        let cfg = EAConfig {
            rng_seed: seed,
            ..ea.clone()
        };
        runs.push((seed, evolve(&graph, &cfg)?));
    }
    let chosen = runs
        .iter()
        .enumerate()
        .max_by(|(_, (_, a)), (_, (_, b))| {
            a.best
                .fitness
                .partial_cmp(&b.best.fitness)
                .expect("best fitness is comparable")
                .then(std::cmp::Ordering::Greater) // earliest run wins ties
        })
        .map(|(idx, _)| idx)
        .expect("at least one repeat");
    let repeat_stats: Vec<RepeatStats> = runs
        .iter()
        .map(|(seed, trace)| RepeatStats {
            seed: *seed,
            best_fitness: trace.best.fitness.expect("best maps are scored"),
        })
        .collect();
    let (_, trace) = &runs[chosen];
    fs::write(out_trace, write_trace_csv(trace))?;
    fs::write(out_map, map_to_json(&trace.best))?;
    Ok(EvolveStats {
        generations: ea.max_generations,
        evaluations: trace.evaluations,
        trials: trace.trials,
        best_fitness: trace.best.fitness.expect("best maps are scored"),
        repeats: repeat_stats,
        chosen_repeat: chosen,
    })
}

/// Stage 5: render a map document to DOT and SVG.
pub fn stage_render(map_path: &Path, out_dot: &Path, out_svg: &Path) -> Result<(), StageError> {
    let text = fs::read_to_string(map_path)?;
    let map = map_from_json(&text).map_err(|e| StageError::Render(e.to_string()))?;
    fs::write(out_dot, render_dot(&map))?;
    let svg = render_svg(&map).map_err(|e| StageError::Render(e.to_string()))?;
    fs::write(out_svg, svg)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub seed: u64,
    pub seed_source: SeedSource,
    pub config_hash: String,
    pub config: PipelineConfig,
    pub mine: Option<MineStats>,
    pub filter: FilterStats,
    pub graph: GraphStats,
    pub evolve: EvolveStats,
    pub artifacts: Vec<String>,
}

/// SHA-256 of the resolved configuration's canonical JSON form.
pub fn config_hash(cfg: &PipelineConfig) -> String {
    let canonical = serde_json::to_string(cfg).expect("config serializes");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

/// Runs all five stages over the output directory and writes the manifest.
pub fn run_pipeline(cfg: &PipelineConfig, seed_source: SeedSource) -> Result<Manifest, StageError> {
    fs::create_dir_all(&cfg.out)?;
    let path = |name: &str| -> PathBuf { cfg.out.join(name) };

    let (mine_stats, rules_path) = match &cfg.mode {
        PipelineMode::Mine => {
            let thresholds = cfg.thresholds()?;
            let stats = stage_mine(
                &cfg.input,
                cfg.format,
                cfg.bins,
                &thresholds,
                &path(RULES_FILE),
            )?;
            (Some(stats), path(RULES_FILE))
        }
        PipelineMode::LoadRules { rules } => (None, rules.clone()),
    };

    let filter_stats = stage_filter(&rules_path, cfg.classes.as_deref(), &path(FILTERED_FILE))?;
    let graph_stats = stage_graph(
        &path(FILTERED_FILE),
        &cfg.input,
        cfg.format,
        cfg.bins,
        &path(GRAPH_FILE),
    )?;
    let evolve_stats = stage_evolve(
        &path(GRAPH_FILE),
        &cfg.ea,
        cfg.repeats,
        &path(TRACE_FILE),
        &path(MAP_JSON_FILE),
    )?;
    stage_render(
        &path(MAP_JSON_FILE),
        &path(MAP_DOT_FILE),
        &path(MAP_SVG_FILE),
    )?;

    let mut artifacts: Vec<String> = Vec::new();
    if mine_stats.is_some() {
        artifacts.push(RULES_FILE.into());
    }
    artifacts.extend(
        [
            FILTERED_FILE,
            GRAPH_FILE,
            TRACE_FILE,
            MAP_JSON_FILE,
            MAP_DOT_FILE,
            MAP_SVG_FILE,
        ]
        .map(String::from),
    );

    let manifest = Manifest {
        seed: cfg.ea.rng_seed,
        seed_source,
        config_hash: config_hash(cfg),
        config: cfg.clone(),
        mine: mine_stats,
        filter: filter_stats,
        graph: graph_stats,
        evolve: evolve_stats,
        artifacts,
    };
    fs::write(
        path(MANIFEST_FILE),
        serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )?;
    Ok(manifest)
}
