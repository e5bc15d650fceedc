//! `rulemap` — metro maps of association-rule information.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rulemap_cli::config::{resolve, CliOverrides, FileConfig, SeedSource};
use rulemap_cli::error::StageError;
use rulemap_cli::pipeline::{
    self, stage_evolve, stage_filter, stage_graph, stage_mine, stage_render,
};
use rulemap_core::metromap::QualityTerm;
use rulemap_core::transactions::InputFormat;

#[derive(Parser)]
#[command(
    name = "rulemap",
    version,
    about = "Turn transaction datasets into metro maps of association-rule information",
    after_help = "Stage errors map to distinct exit codes: 10 dataset, 11 rule input, \
                  12 filtering, 13 graph, 14 evolution, 15 render, 16 i/o, 17 configuration."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Basket,
    Tabular,
}

impl From<FormatArg> for InputFormat {
    fn from(value: FormatArg) -> Self {
        match value {
            FormatArg::Basket => InputFormat::Basket,
            FormatArg::Tabular => InputFormat::Tabular,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum QualityTermArg {
    AsPrinted,
    Diversity,
}

impl From<QualityTermArg> for QualityTerm {
    fn from(value: QualityTermArg) -> Self {
        match value {
            QualityTermArg::AsPrinted => QualityTerm::AsPrinted,
            QualityTermArg::Diversity => QualityTerm::Diversity,
        }
    }
}

/// Options shared by `run` and the stage subcommands; every flag overrides
/// the same key of the config file.
#[derive(Args, Default)]
struct CommonOpts {
    /// TOML config file mirroring these flags
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Transaction dataset path
    #[arg(long)]
    input: Option<PathBuf>,
    /// Dataset layout
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Equal-width bins for numeric columns of tabular input
    #[arg(long)]
    bins: Option<usize>,
    /// Load rules from this file instead of mining
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Minimum support (decimal or a/b)
    #[arg(long = "min-supp")]
    min_supp: Option<String>,
    /// Minimum confidence (decimal or a/b)
    #[arg(long = "min-conf")]
    min_conf: Option<String>,
    /// Class features (comma-separated); overrides inference
    #[arg(long, value_delimiter = ',')]
    classes: Option<Vec<String>>,
    /// Maximum metro line length
    #[arg(long)]
    tau: Option<usize>,
    /// Maximum number of metro lines
    #[arg(long = "k-max")]
    k_max: Option<usize>,
    /// Population size
    #[arg(long)]
    np: Option<usize>,
    /// Number of generations
    #[arg(long)]
    generations: Option<usize>,
    /// Crossover probability
    #[arg(long)]
    pc: Option<f64>,
    /// Mutation probability
    #[arg(long)]
    pm: Option<f64>,
    /// Structure-quality weight
    #[arg(long)]
    weight: Option<f64>,
    /// RNG seed; drawn from entropy (and recorded) when absent
    #[arg(long)]
    seed: Option<u64>,
    /// Independent EA runs; the best one is kept
    #[arg(long)]
    repeats: Option<usize>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// How structure quality enters the fitness
    #[arg(long = "quality-term", value_enum)]
    quality_term: Option<QualityTermArg>,
    /// Map document to render (render subcommand only)
    #[arg(long)]
    map: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline: mine (or load rules), filter, graph, evolve, render
    Run(CommonOpts),
    /// Mine association rules from a dataset into OUT/rules.txt
    Mine(CommonOpts),
    /// Filter a rule file against class attributes into OUT/filtered_rules.txt
    Filter(CommonOpts),
    /// Build the attribute graph from filtered rules into OUT/graph.json
    Graph(CommonOpts),
    /// Evolve a metro map on a graph into OUT/trace.csv and OUT/map.json
    Evolve(CommonOpts),
    /// Render OUT/map.json (or --map) to OUT/map.dot and OUT/map.svg
    Render(CommonOpts),
}

fn overrides(opts: &CommonOpts) -> CliOverrides {
    CliOverrides {
        input: opts.input.clone(),
        format: opts.format.map(Into::into),
        rules: opts.rules.clone(),
        bins: opts.bins,
        min_supp: opts.min_supp.clone(),
        min_conf: opts.min_conf.clone(),
        classes: opts.classes.clone(),
        tau: opts.tau,
        k_max: opts.k_max,
        np: opts.np,
        generations: opts.generations,
        pc: opts.pc,
        pm: opts.pm,
        weight: opts.weight,
        seed: opts.seed,
        repeats: opts.repeats,
        out: opts.out.clone(),
        quality_term: opts.quality_term.map(Into::into),
    }
}

fn resolved(
    opts: &CommonOpts,
    needs_input: bool,
) -> Result<(rulemap_cli::PipelineConfig, SeedSource), StageError> {
    let file = match &opts.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let mut flags = overrides(opts);
    if !needs_input && flags.input.is_none() && file.input.is_none() {
        // Stages that never touch the dataset do not require --input.
        flags.input = Some(PathBuf::from("unused"));
    }
    resolve(flags, file)
}

fn execute(command: &Command) -> Result<(), StageError> {
    match command {
        Command::Run(opts) => {
            let (cfg, seed_source) = resolved(opts, true)?;
            let manifest = rulemap_cli::run_pipeline(&cfg, seed_source)?;
            println!(
                "wrote {} artifacts to {} (seed {}, best fitness {})",
                manifest.artifacts.len() + 1,
                cfg.out.display(),
                manifest.seed,
                manifest.evolve.best_fitness,
            );
            Ok(())
        }
        Command::Mine(opts) => {
            let (cfg, _) = resolved(opts, true)?;
            let thresholds = cfg.thresholds()?;
            std::fs::create_dir_all(&cfg.out)?;
            let stats = stage_mine(
                &cfg.input,
                cfg.format,
                cfg.bins,
                &thresholds,
                &cfg.out.join(pipeline::RULES_FILE),
            )?;
            println!(
                "mined {} rules from {} transactions over {} attributes",
                stats.rules_mined, stats.transactions, stats.attributes
            );
            Ok(())
        }
        Command::Filter(opts) => {
            let (cfg, _) = resolved(opts, false)?;
            let rules_path = match &cfg.mode {
                rulemap_cli::PipelineMode::LoadRules { rules } => rules.clone(),
                rulemap_cli::PipelineMode::Mine => cfg.out.join(pipeline::RULES_FILE),
            };
            std::fs::create_dir_all(&cfg.out)?;
            let stats = stage_filter(
                &rules_path,
                cfg.classes.as_deref(),
                &cfg.out.join(pipeline::FILTERED_FILE),
            )?;
            println!(
                "kept {} of {} rules; class tokens ({:?}): {}",
                stats.rules_filtered,
                stats.rules_total,
                stats.class_origin,
                stats.class_tokens.join(", ")
            );
            Ok(())
        }
        Command::Graph(opts) => {
            let (cfg, _) = resolved(opts, true)?;
            let filtered = match &cfg.mode {
                rulemap_cli::PipelineMode::LoadRules { rules } => rules.clone(),
                rulemap_cli::PipelineMode::Mine => cfg.out.join(pipeline::FILTERED_FILE),
            };
            std::fs::create_dir_all(&cfg.out)?;
            let stats = stage_graph(
                &filtered,
                &cfg.input,
                cfg.format,
                cfg.bins,
                &cfg.out.join(pipeline::GRAPH_FILE),
            )?;
            println!(
                "graph: {} nodes, {} edges ({} source / {} intern / {} sink)",
                stats.nodes, stats.edges, stats.sources, stats.intern, stats.sinks
            );
            Ok(())
        }
        Command::Evolve(opts) => {
            let (cfg, _) = resolved(opts, false)?;
            std::fs::create_dir_all(&cfg.out)?;
            let stats = stage_evolve(
                &cfg.out.join(pipeline::GRAPH_FILE),
                &cfg.ea,
                cfg.repeats,
                &cfg.out.join(pipeline::TRACE_FILE),
                &cfg.out.join(pipeline::MAP_JSON_FILE),
            )?;
            println!(
                "best fitness {} after {} generations ({} evaluations)",
                stats.best_fitness, stats.generations, stats.evaluations
            );
            Ok(())
        }
        Command::Render(opts) => {
            let (cfg, _) = resolved(opts, false)?;
            let map_path = opts
                .map
                .clone()
                .unwrap_or_else(|| cfg.out.join(pipeline::MAP_JSON_FILE));
            std::fs::create_dir_all(&cfg.out)?;
            stage_render(
                &map_path,
                &cfg.out.join(pipeline::MAP_DOT_FILE),
                &cfg.out.join(pipeline::MAP_SVG_FILE),
            )?;
            println!(
                "wrote {} and {}",
                pipeline::MAP_DOT_FILE,
                pipeline::MAP_SVG_FILE
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match execute(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("rulemap: {error}");
            ExitCode::from(error.exit_code() as u8)
        }
    }
}
