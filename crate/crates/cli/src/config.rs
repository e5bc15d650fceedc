//! Pipeline configuration: a TOML config file mirrors the flags, and flags
//! override the file.

use std::path::PathBuf;

use rulemap_core::apriori::MiningThresholds;
use rulemap_core::ea::EAConfig;
use rulemap_core::metromap::{ObjectiveConfig, QualityTerm};
use rulemap_core::transactions::{parse_rational, InputFormat};
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::StageError;

/// Where the mined rules come from.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum PipelineMode {
    /// Mine with the bundled Apriori implementation.
    Mine,
    /// Load a rule file produced by any external miner.
    LoadRules { rules: PathBuf },
}

/// A fully resolved pipeline configuration.
#[derive(Debug, Clone, Serialize)]
pub struct PipelineConfig {
    pub input: PathBuf,
    pub format: InputFormat,
    /// Equal-width bins to apply to numeric columns of tabular input.
    pub bins: Option<usize>,
    #[serde(flatten)]
    pub mode: PipelineMode,
    /// Mining thresholds as exact decimal strings; required in mine mode.
    pub min_supp: Option<String>,
    pub min_conf: Option<String>,
    pub classes: Option<Vec<String>>,
    pub ea: EAConfig,
    pub repeats: usize,
    pub out: PathBuf,
}

impl PipelineConfig {
    pub fn thresholds(&self) -> Result<MiningThresholds, StageError> {
        let supp = self
            .min_supp
            .as_deref()
            .ok_or_else(|| StageError::Config("mine mode requires --min-supp".into()))?;
        let conf = self
            .min_conf
            .as_deref()
            .ok_or_else(|| StageError::Config("mine mode requires --min-conf".into()))?;
        thresholds_from_strings(supp, conf)
    }
}

pub fn thresholds_from_strings(supp: &str, conf: &str) -> Result<MiningThresholds, StageError> {
    let min_support = parse_rational(supp)
        .ok_or_else(|| StageError::Config(format!("cannot parse min support {supp:?}")))?;
    let min_confidence = parse_rational(conf)
        .ok_or_else(|| StageError::Config(format!("cannot parse min confidence {conf:?}")))?;
    MiningThresholds::new(min_support, min_confidence)
        .map_err(|e| StageError::Config(e.to_string()))
}

/// Accepts a bare number or a string for threshold-like keys; numbers are
/// rendered with shortest round-trip formatting before exact parsing.
fn number_or_string<'de, D: Deserializer<'de>>(de: D) -> Result<Option<String>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Number(f64),
        Text(String),
    }
    Ok(Option::<Raw>::deserialize(de)?.map(|raw| match raw {
        Raw::Number(n) => format!("{n}"),
        Raw::Text(t) => t,
    }))
}

/// Accepts `classes = ["a", "b"]` or `classes = "a,b"`.
fn list_or_string<'de, D: Deserializer<'de>>(de: D) -> Result<Option<Vec<String>>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        List(Vec<String>),
        Text(String),
    }
    Ok(Option::<Raw>::deserialize(de)?.map(|raw| match raw {
        Raw::List(list) => list,
        Raw::Text(text) => text
            .split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect(),
    }))
}

/// The config-file counterpart of the flags; every key optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub input: Option<PathBuf>,
    pub format: Option<InputFormat>,
    pub rules: Option<PathBuf>,
    pub bins: Option<usize>,
    #[serde(default, deserialize_with = "number_or_string")]
    pub min_supp: Option<String>,
    #[serde(default, deserialize_with = "number_or_string")]
    pub min_conf: Option<String>,
    #[serde(default, deserialize_with = "list_or_string")]
    pub classes: Option<Vec<String>>,
    pub tau: Option<usize>,
    pub k_max: Option<usize>,
    pub np: Option<usize>,
    pub generations: Option<usize>,
    pub pc: Option<f64>,
    pub pm: Option<f64>,
    pub weight: Option<f64>,
    pub seed: Option<u64>,
    pub repeats: Option<usize>,
    pub out: Option<PathBuf>,
    pub quality_term: Option<QualityTerm>,
}

impl FileConfig {
    pub fn load(path: &std::path::Path) -> Result<Self, StageError> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text)
            .map_err(|e| StageError::Config(format!("config file {}: {e}", path.display())))
    }
}

/// Flag values as given on the command line; `None` means "not provided".
#[derive(Debug, Clone, Default)]
pub struct CliOverrides {
    pub input: Option<PathBuf>,
    pub format: Option<InputFormat>,
    pub rules: Option<PathBuf>,
    pub bins: Option<usize>,
    pub min_supp: Option<String>,
    pub min_conf: Option<String>,
    pub classes: Option<Vec<String>>,
    pub tau: Option<usize>,
    pub k_max: Option<usize>,
    pub np: Option<usize>,
    pub generations: Option<usize>,
    pub pc: Option<f64>,
    pub pm: Option<f64>,
    pub weight: Option<f64>,
    pub seed: Option<u64>,
    pub repeats: Option<usize>,
    pub out: Option<PathBuf>,
    pub quality_term: Option<QualityTerm>,
}

/// Where the run's seed came from, recorded in the manifest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedSource {
    Flag,
    ConfigFile,
    Entropy,
}

/// Merges flags over the config file and fills defaults. The seed is drawn
/// from system entropy when neither provides one.
pub fn resolve(
    flags: CliOverrides,
    file: FileConfig,
) -> Result<(PipelineConfig, SeedSource), StageError> {
    let input = flags
        .input
        .or(file.input)
        .ok_or_else(|| StageError::Config("--input is required".into()))?;
    let format = flags.format.or(file.format).unwrap_or(InputFormat::Basket);
    let rules = flags.rules.or(file.rules);
    let mode = match rules {
        Some(rules) => PipelineMode::LoadRules { rules },
        None => PipelineMode::Mine,
    };
    let (seed, seed_source) = match (flags.seed, file.seed) {
        (Some(seed), _) => (seed, SeedSource::Flag),
        (None, Some(seed)) => (seed, SeedSource::ConfigFile),
        (None, None) => (rand::random::<u64>(), SeedSource::Entropy),
    };
    let defaults = EAConfig::default();
    let objective_defaults = ObjectiveConfig::default();
    let ea = EAConfig {
        population_size: flags.np.or(file.np).unwrap_or(defaults.population_size),
        max_generations: flags
            .generations
            .or(file.generations)
            .unwrap_or(defaults.max_generations),
        p_crossover: flags.pc.or(file.pc).unwrap_or(defaults.p_crossover),
        p_mutation: flags.pm.or(file.pm).unwrap_or(defaults.p_mutation),
        objective: ObjectiveConfig {
            tau: flags.tau.or(file.tau).unwrap_or(objective_defaults.tau),
            k_max: flags
                .k_max
                .or(file.k_max)
                .unwrap_or(objective_defaults.k_max),
            weight: flags
                .weight
                .or(file.weight)
                .unwrap_or(objective_defaults.weight),
            quality_term: flags
                .quality_term
                .or(file.quality_term)
                .unwrap_or(objective_defaults.quality_term),
        },
        rng_seed: seed,
        ..defaults
    };
    ea.validate()
        .map_err(|e| StageError::Config(e.to_string()))?;
    let repeats = flags.repeats.or(file.repeats).unwrap_or(1);
    if repeats < 1 {
        return Err(StageError::Config("--repeats must be at least 1".into()));
    }
    let cfg = PipelineConfig {
        input,
        format,
        bins: flags.bins.or(file.bins),
        mode,
        min_supp: flags.min_supp.or(file.min_supp),
        min_conf: flags.min_conf.or(file.min_conf),
        classes: flags.classes.or(file.classes),
        ea,
        repeats,
        out: flags
            .out
            .or(file.out)
            .unwrap_or_else(|| PathBuf::from("out")),
    };
    Ok((cfg, seed_source))
}
