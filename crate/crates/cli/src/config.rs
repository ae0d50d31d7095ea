use std::path::{Path, PathBuf};

use physadv_core::harness::Pipeline;
use physadv_core::search::{GaParams, PsoParams};
use physadv_core::{
    load_dataset, Algorithm, AugmentationRule, Dataset, Envelope, FeatureMeta, FinetuneConfig, Schema, SearchParams,
    SensitivityRule, TrainConfig,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::decl::{read_toml, AugmentationFile, EnvelopeFile, Resolver, RulesFile};
use crate::error::{config_err, CliResult};

pub const DEFAULT_CONFIG: &str = "physadv.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    /// Master seed; every other seed derives from it.
    pub seed: u64,
    /// Artifacts land here; relative to the config file.
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub data: DataSection,
    pub files: FilesSection,
    pub network: NetworkSection,
    pub train: TrainSection,
    pub search: SearchSection,
    #[serde(default)]
    pub finetune: FinetuneSection,
    #[serde(default)]
    pub kfold: KfoldSection,
    #[serde(default)]
    pub tune: TuneSection,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    /// Label used in reports.
    pub system: String,
    pub path: PathBuf,
    pub targets: Vec<String>,
    pub features: Vec<FeatureMeta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilesSection {
    pub rules: PathBuf,
    pub envelope: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub augmentation: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    pub hidden: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    #[serde(default)]
    pub weight_decay: f64,
    /// Per-row augmentation probability; needs `files.augmentation`.
    #[serde(default)]
    pub augmentation_p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSection {
    #[serde(default = "all_engines")]
    pub engines: Vec<Algorithm>,
    /// Shared by every engine so budgets stay equal.
    pub population: usize,
    pub iterations: usize,
    #[serde(default)]
    pub pso: PsoParams,
    #[serde(default)]
    pub ga: GaParams,
}

fn all_engines() -> Vec<Algorithm> {
    vec![Algorithm::Pso, Algorithm::Ga, Algorithm::Rs]
}

/// Unset optimizer fields fall back to `[train]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FinetuneSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_decay: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub watch_tolerance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KfoldSection {
    pub k: usize,
    pub runs: usize,
}

impl Default for KfoldSection {
    fn default() -> Self {
        Self { k: 10, runs: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuneSection {
    pub budget: usize,
    /// Bootstrap repeats per network trial.
    pub repeats: usize,
    /// Anchors of the probe campaign scoring engine grids.
    pub probe_anchors: usize,
}

impl Default for TuneSection {
    fn default() -> Self {
        Self {
            budget: 20,
            repeats: 100,
            probe_anchors: 50,
        }
    }
}

impl Config {
    pub fn schema(&self) -> Schema {
        Schema {
            features: self.data.features.clone(),
            targets: self.data.targets.clone(),
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.train.epochs,
            batch_size: self.train.batch_size,
            learning_rate: self.train.learning_rate,
            weight_decay: self.train.weight_decay,
            seed: self.seed,
        }
    }

    pub fn finetune_config(&self) -> FinetuneConfig {
        let f = &self.finetune;
        let base = FinetuneConfig::from_train(&self.train_config(), f.beta.unwrap_or(1.0));
        FinetuneConfig {
            epochs: f.epochs.unwrap_or(base.epochs),
            batch_size: f.batch_size.unwrap_or(base.batch_size),
            learning_rate: f.learning_rate.unwrap_or(base.learning_rate),
            weight_decay: f.weight_decay.unwrap_or(base.weight_decay),
            watch_tolerance: f.watch_tolerance.unwrap_or(base.watch_tolerance),
            ..base
        }
    }

    pub fn search_params(&self, algorithm: Algorithm) -> SearchParams {
        SearchParams {
            pso: self.search.pso.clone(),
            ga: self.search.ga.clone(),
            ..SearchParams::new(algorithm, self.search.population, self.search.iterations, self.seed)
        }
    }

    pub fn pipeline(&self) -> Pipeline {
        Pipeline {
            hidden: self.network.hidden.clone(),
            train: self.train_config(),
            engines: self.search.engines.iter().map(|&a| self.search_params(a)).collect(),
            finetune: self.finetune_config(),
            augmentation_p: self.train.augmentation_p,
        }
    }

    fn validate(&self) -> CliResult<()> {
        let wrap = |what: &str, r: physadv_core::Result<()>| r.map_err(|e| config_err(format!("[{what}] {e}")));
        wrap("data", self.schema().validate())?;
        wrap("train", self.train_config().validate())?;
        wrap("finetune", self.finetune_config().validate())?;
        if self.network.hidden.is_empty() || self.network.hidden.contains(&0) {
            return Err(config_err("[network] hidden widths must be a non-empty list of positive sizes"));
        }
        if self.search.engines.is_empty() {
            return Err(config_err("[search] no engine selected"));
        }
        wrap("search", self.search_params(Algorithm::Pso).validate())?;
        if !(0.0..=1.0).contains(&self.train.augmentation_p) {
            return Err(config_err("[train] augmentation_p must lie in [0, 1]"));
        }
        if self.train.augmentation_p > 0.0 && self.files.augmentation.is_none() {
            return Err(config_err("[train] augmentation_p > 0 needs files.augmentation"));
        }
        if self.kfold.k < 2 || self.kfold.runs < 1 {
            return Err(config_err("[kfold] k must be >= 2 and runs >= 1"));
        }
        if self.tune.budget < 1 || self.tune.repeats < 1 || self.tune.probe_anchors < 1 {
            return Err(config_err("[tune] budget, repeats and probe_anchors must be >= 1"));
        }
        Ok(())
    }
}

/// Digests of the configuration parts each artifact depends on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Digests {
    pub model: String,
    pub campaign: String,
    pub finetune: String,
    pub full: String,
}

impl Digests {
    pub fn short(d: &str) -> &str {
        &d[..12]
    }
}

/// A configuration with every referenced file read and resolved.
pub struct Loaded {
    pub config: Config,
    pub output_dir: PathBuf,
    pub dataset: Dataset,
    pub rules: Vec<SensitivityRule>,
    pub envelope: Envelope,
    pub augmentation: Vec<AugmentationRule>,
    pub digests: Digests,
}

/// Parses `key.path=value`; the value is read as TOML and falls back to a string.
fn apply_override(root: &mut toml::Table, assignment: &str) -> CliResult<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| config_err(format!("override `{assignment}` is not of the form key.path=value")))?;
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(config_err(format!("override `{assignment}`: empty key segment")));
    }
    let mut table = root;
    for p in &parts[..parts.len() - 1] {
        let entry = table
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| config_err(format!("override `{assignment}`: `{p}` is not a section")))?;
    }
    table.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

pub fn parse_config(text: &str, origin: &str, overrides: &[String]) -> CliResult<Config> {
    let mut table: toml::Table = toml::from_str(text).map_err(|e| config_err(format!("{origin}: {e}")))?;
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    let config: Config = toml::Value::Table(table)
        .try_into()
        .map_err(|e| config_err(format!("{origin}: {e}")))?;
    config.validate().map_err(|e| config_err(format!("{origin}: {e}")))?;
    Ok(config)
}

fn canonical_digest(v: &Value) -> String {
    // serde_json maps are sorted by key, so the text is independent of key order
    hex::encode(Sha256::digest(v.to_string().as_bytes()))
}

fn file_sha(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn load(path: &Path, overrides: &[String]) -> CliResult<Loaded> {
    let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    let config = parse_config(&text, &path.display().to_string(), overrides)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };

    let schema = config.schema();
    let data_path = resolve(&config.data.path);
    let dataset =
        load_dataset(&data_path, &schema).map_err(|e| config_err(format!("{}: {e}", data_path.display())))?;

    let rules_path = resolve(&config.files.rules);
    let rules_file: RulesFile = read_toml(&rules_path)?;
    let rules_name = rules_path.display().to_string();
    let rules = Resolver {
        schema: &schema,
        file: &rules_name,
    }
    .rules(&rules_file)?;

    let env_path = resolve(&config.files.envelope);
    let env_file: EnvelopeFile = read_toml(&env_path)?;
    let env_name = env_path.display().to_string();
    let envelope = Resolver {
        schema: &schema,
        file: &env_name,
    }
    .envelope(&env_file)?;

    let aug_file: AugmentationFile = match &config.files.augmentation {
        Some(p) => read_toml(&resolve(p))?,
        None => AugmentationFile::default(),
    };
    let aug_name = config
        .files
        .augmentation
        .as_ref()
        .map_or_else(String::new, |p| resolve(p).display().to_string());
    let augmentation = Resolver {
        schema: &schema,
        file: &aug_name,
    }
    .augmentation(&aug_file)?;

    let cfg = serde_json::to_value(&config)?;
    let mut search = cfg["search"].clone();
    search.as_object_mut().map(|m| m.remove("engines"));
    let model = json!({
        "seed": config.seed,
        "schema": cfg["data"]["features"],
        "targets": cfg["data"]["targets"],
        "data_sha256": file_sha(&data_path)?,
        "network": cfg["network"],
        "train": cfg["train"],
        "augmentation": serde_json::to_value(&aug_file)?,
    });
    let campaign = json!({
        "model": model,
        "rules": serde_json::to_value(&rules_file)?,
        "envelope": serde_json::to_value(&env_file)?,
        "search": search,
    });
    let finetune = json!({ "campaign": campaign, "finetune": serde_json::to_value(config.finetune_config())? });
    let full = json!({
        "finetune": finetune,
        "system": cfg["data"]["system"],
        "engines": cfg["search"]["engines"],
        "kfold": cfg["kfold"],
        "tune": cfg["tune"],
    });
    let digests = Digests {
        model: canonical_digest(&model),
        campaign: canonical_digest(&campaign),
        finetune: canonical_digest(&finetune),
        full: canonical_digest(&full),
    };

    Ok(Loaded {
        output_dir: resolve(&config.output_dir),
        config,
        dataset,
        rules,
        envelope,
        augmentation,
        digests,
    })
}
