//! Campaign configuration: strict TOML with unknown keys rejected, relative
//! paths anchored at the config file, and a content-based fingerprint that
//! identifies the campaign semantics.
//!
//! The fingerprint hashes what the campaign *does*: dataset content and
//! labels, prompt, model parameters, method, constraints, budget, seed, and
//! sampling. It deliberately excludes where files live, how many workers run,
//! and where output goes, since none of those can change an outcome.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use ritfis_core::dataset::DatasetFormat;
use ritfis_core::search::presets::Preset;
use ritfis_core::transform::AppendPlacement;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("config key `{key}`: {message}")]
    Invalid { key: &'static str, message: String },
    #[error("config key `{key}`: file not found: {path}")]
    MissingFile { key: &'static str, path: PathBuf },
}

fn invalid(key: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key,
        message: message.into(),
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    /// When set and smaller than the dataset, a seeded reservoir sample of
    /// this many examples is tested; the chosen ids are recorded alongside
    /// the report.
    #[serde(default)]
    pub sample_size: Option<usize>,
    /// Search the full prompt+example input instead of the example alone.
    #[serde(default)]
    pub perturb_prompt: bool,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// Optional on-disk response cache shared across examples and runs.
    /// Reuse makes repeated campaigns cheaper but makes per-example query
    /// counts depend on what is already cached.
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    pub dataset: DatasetConfig,
    pub prompt: PromptConfig,
    pub model: ModelConfig,
    pub method: MethodConfig,
    #[serde(default)]
    pub constraints: ConstraintConfig,
    #[serde(default)]
    pub resources: ResourceConfig,
    #[serde(default)]
    pub budget: BudgetConfig,
}

fn default_workers() -> usize {
    1
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub path: PathBuf,
    pub format: DatasetFormat,
    /// Display name; defaults to the dataset file stem.
    #[serde(default)]
    pub name: Option<String>,
    pub labels: Vec<String>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PromptConfig {
    pub prefix: String,
    #[serde(default = "default_separator")]
    pub separator: String,
}

fn default_separator() -> String {
    " ".to_string()
}

#[derive(Clone, Copy, Debug, Deserialize, Eq, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AdapterKind {
    Surrogate,
    Http,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub adapter: AdapterKind,
    /// Surrogate adapter: path to the keyword-weight lexicon JSON.
    #[serde(default)]
    pub lexicon: Option<PathBuf>,
    /// HTTP adapter: chat-completion endpoint URL.
    #[serde(default)]
    pub url: Option<String>,
    /// HTTP adapter: model name sent in each request.
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub temperature: Option<f64>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    pub preset: Preset,
    #[serde(default)]
    pub synonym_limit: Option<usize>,
    #[serde(default)]
    pub beam_width: Option<usize>,
    #[serde(default)]
    pub fragments: Option<Vec<String>>,
    #[serde(default)]
    pub placement: Option<AppendPlacement>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
#[serde(default)]
pub struct ConstraintConfig {
    /// "bundled", "none", or a path to a one-word-per-line file.
    pub stop_words: String,
    /// Optional word→tag lexicon path; substitutions must preserve tags.
    pub pos_lexicon: Option<PathBuf>,
    pub max_change_rate: f64,
    pub blacklist: Vec<String>,
    pub max_edits: usize,
    pub forbid_re_edit: bool,
}

impl Default for ConstraintConfig {
    fn default() -> Self {
        ConstraintConfig {
            stop_words: "bundled".to_string(),
            pos_lexicon: None,
            max_change_rate: 0.2,
            blacklist: Vec::new(),
            max_edits: 20,
            forbid_re_edit: true,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
#[serde(default)]
pub struct ResourceConfig {
    /// "bundled" or a path to a TSV of word\tsynonym\tsimilarity rows.
    pub synonyms: String,
    /// Optional corpus file (one document per line) for the perplexity
    /// scorer; defaults to the sampled examples' original texts.
    pub ppl_corpus: Option<PathBuf>,
}

impl Default for ResourceConfig {
    fn default() -> Self {
        ResourceConfig {
            synonyms: "bundled".to_string(),
            ppl_corpus: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
#[serde(default)]
pub struct BudgetConfig {
    pub max_queries: u64,
    pub max_seconds: f64,
}

impl Default for BudgetConfig {
    fn default() -> Self {
        BudgetConfig {
            max_queries: 500,
            max_seconds: 3600.0,
        }
    }
}

/// Command-line overrides that take precedence over the file values.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub perturb_prompt: bool,
    pub out_dir: Option<PathBuf>,
}

impl CampaignConfig {
    /// Applies command-line overrides in place.
    pub fn apply(&mut self, overrides: &Overrides) {
        if let Some(seed) = overrides.seed {
            self.seed = seed;
        }
        if let Some(workers) = overrides.workers {
            self.workers = workers;
        }
        if overrides.perturb_prompt {
            self.perturb_prompt = true;
        }
        if let Some(out) = &overrides.out_dir {
            self.out_dir = Some(out.clone());
        }
    }

    /// The dataset's display name.
    pub fn dataset_name(&self) -> String {
        match &self.dataset.name {
            Some(name) => name.clone(),
            None => self
                .dataset
                .path
                .file_stem()
                .map(|s| s.to_string_lossy().to_string())
                .unwrap_or_else(|| "dataset".to_string()),
        }
    }
}

/// Loads, anchors, and validates a campaign config.
///
/// Relative paths are resolved against the config file's directory so a
/// campaign directory can be moved as a unit.
pub fn load_config(path: &Path) -> Result<CampaignConfig, ConfigError> {
    let raw = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut config: CampaignConfig =
        toml::from_str(&raw).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
    let base = path.parent().unwrap_or(Path::new("."));
    anchor_paths(&mut config, base);
    validate(&config)?;
    Ok(config)
}

fn anchor(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

fn anchor_paths(config: &mut CampaignConfig, base: &Path) {
    anchor(base, &mut config.dataset.path);
    if let Some(p) = &mut config.model.lexicon {
        anchor(base, p);
    }
    if let Some(p) = &mut config.constraints.pos_lexicon {
        anchor(base, p);
    }
    if let Some(p) = &mut config.resources.ppl_corpus {
        anchor(base, p);
    }
    if let Some(p) = &mut config.out_dir {
        anchor(base, p);
    }
    if let Some(p) = &mut config.cache_dir {
        anchor(base, p);
    }
    for source in [&mut config.constraints.stop_words, &mut config.resources.synonyms] {
        if source != "bundled" && source != "none" {
            let mut p = PathBuf::from(&*source);
            anchor(base, &mut p);
            *source = p.to_string_lossy().to_string();
        }
    }
}

fn require_file(key: &'static str, path: &Path) -> Result<(), ConfigError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(ConfigError::MissingFile {
            key,
            path: path.to_path_buf(),
        })
    }
}

fn validate(config: &CampaignConfig) -> Result<(), ConfigError> {
    if config.workers == 0 {
        return Err(invalid("workers", "must be at least 1"));
    }
    if config.sample_size == Some(0) {
        return Err(invalid("sample_size", "must be at least 1 when set"));
    }
    if config.dataset.labels.len() < 2 {
        return Err(invalid("dataset.labels", "need at least two labels"));
    }
    if !(config.constraints.max_change_rate > 0.0 && config.constraints.max_change_rate <= 1.0) {
        return Err(invalid(
            "constraints.max_change_rate",
            "must be in (0, 1]",
        ));
    }
    if config.prompt.prefix.trim().is_empty() {
        return Err(invalid("prompt.prefix", "must be non-empty"));
    }
    require_file("dataset.path", &config.dataset.path)?;
    match config.model.adapter {
        AdapterKind::Surrogate => match &config.model.lexicon {
            Some(p) => require_file("model.lexicon", p)?,
            None => {
                return Err(invalid(
                    "model.lexicon",
                    "required for the surrogate adapter",
                ))
            }
        },
        AdapterKind::Http => {
            if config.model.url.is_none() {
                return Err(invalid("model.url", "required for the http adapter"));
            }
            if config.model.name.is_none() {
                return Err(invalid("model.name", "required for the http adapter"));
            }
        }
    }
    if let Some(p) = &config.constraints.pos_lexicon {
        require_file("constraints.pos_lexicon", p)?;
    }
    if let Some(p) = &config.resources.ppl_corpus {
        require_file("resources.ppl_corpus", p)?;
    }
    if config.constraints.stop_words != "bundled" && config.constraints.stop_words != "none" {
        require_file(
            "constraints.stop_words",
            Path::new(&config.constraints.stop_words),
        )?;
    }
    if config.resources.synonyms != "bundled" && config.resources.synonyms != "none" {
        require_file("resources.synonyms", Path::new(&config.resources.synonyms))?;
    }
    Ok(())
}

fn file_digest(path: &Path) -> Result<String, ConfigError> {
    let bytes = fs::read(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(hex(&Sha256::digest(&bytes)))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn digest_source(source: &str) -> Result<String, ConfigError> {
    match source {
        "bundled" | "none" => Ok(source.to_string()),
        path => file_digest(Path::new(path)),
    }
}

/// Content hash identifying the campaign semantics.
///
/// Referenced files contribute their byte content, not their location, so
/// moving a campaign directory or changing worker count and output paths
/// leaves the fingerprint intact.
pub fn fingerprint(config: &CampaignConfig) -> Result<String, ConfigError> {
    let lexicon = match &config.model.lexicon {
        Some(p) => Some(file_digest(p)?),
        None => None,
    };
    let pos_lexicon = match &config.constraints.pos_lexicon {
        Some(p) => Some(file_digest(p)?),
        None => None,
    };
    let ppl_corpus = match &config.resources.ppl_corpus {
        Some(p) => Some(file_digest(p)?),
        None => None,
    };
    let view = serde_json::json!({
        "seed": config.seed,
        "sample_size": config.sample_size,
        "perturb_prompt": config.perturb_prompt,
        "dataset": {
            "name": config.dataset_name(),
            "format": config.dataset.format,
            "labels": config.dataset.labels,
            "content": file_digest(&config.dataset.path)?,
        },
        "prompt": config.prompt,
        "model": {
            "adapter": config.model.adapter,
            "name": config.model.name,
            "temperature": config.model.temperature,
            "lexicon": lexicon,
        },
        "method": config.method,
        "constraints": {
            "stop_words": digest_source(&config.constraints.stop_words)?,
            "pos_lexicon": pos_lexicon,
            "max_change_rate": config.constraints.max_change_rate,
            "blacklist": config.constraints.blacklist,
            "max_edits": config.constraints.max_edits,
            "forbid_re_edit": config.constraints.forbid_re_edit,
        },
        "resources": {
            "synonyms": digest_source(&config.resources.synonyms)?,
            "ppl_corpus": ppl_corpus,
        },
        "budget": {
            "max_queries": config.budget.max_queries,
            "max_seconds": config.budget.max_seconds,
        },
    });
    let canonical = serde_json::to_string(&view).expect("config view serializes");
    Ok(hex(&Sha256::digest(canonical.as_bytes())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    fn write_file(dir: &Path, name: &str, contents: &str) -> PathBuf {
        let path = dir.join(name);
        let mut f = fs::File::create(&path).unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        path
    }

    fn minimal_toml() -> &'static str {
        r#"
seed = 7

[dataset]
path = "data.jsonl"
format = "jsonl"
labels = ["positive", "negative"]

[prompt]
prefix = "Classify:"

[model]
adapter = "surrogate"
lexicon = "lexicon.json"

[method]
preset = "textfooler"
"#
    }

    fn lexicon_json() -> &'static str {
        r#"{"weights": {"positive": {"good": 1.0}, "negative": {"bad": 1.0}}}"#
    }

    fn dataset_jsonl() -> &'static str {
        "{\"text\": \"good film\", \"label\": \"positive\"}\n"
    }

    fn write_campaign(dir: &Path) -> PathBuf {
        write_file(dir, "data.jsonl", dataset_jsonl());
        write_file(dir, "lexicon.json", lexicon_json());
        write_file(dir, "campaign.toml", minimal_toml())
    }

    #[test]
    fn minimal_config_loads_with_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_campaign(dir.path());
        let config = load_config(&path).unwrap();
        assert_eq!(config.seed, 7);
        assert_eq!(config.workers, 1);
        assert_eq!(config.budget.max_queries, 500);
        assert_eq!(config.constraints.max_change_rate, 0.2);
        assert_eq!(config.dataset_name(), "data");
        assert!(config.dataset.path.is_absolute() || config.dataset.path.starts_with(dir.path()));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_file(dir.path(), "data.jsonl", dataset_jsonl());
        write_file(dir.path(), "lexicon.json", lexicon_json());
        let toml = minimal_toml().replace("seed = 7", "seed = 7\nturbo = true");
        let path = write_file(dir.path(), "campaign.toml", &toml);
        let err = load_config(&path).unwrap_err();
        assert!(err.to_string().contains("turbo"), "{err}");
    }

    #[test]
    fn preset_typo_lists_valid_presets() {
        let dir = tempfile::tempdir().unwrap();
        write_file(dir.path(), "data.jsonl", dataset_jsonl());
        write_file(dir.path(), "lexicon.json", lexicon_json());
        let toml = minimal_toml().replace("textfooler", "textfoolerr");
        let path = write_file(dir.path(), "campaign.toml", &toml);
        let err = load_config(&path).unwrap_err().to_string();
        assert!(err.contains("textfoolerr"), "{err}");
        assert!(err.contains("stresstest"), "{err}");
        assert!(err.contains("beam"), "{err}");
    }

    #[test]
    fn zero_workers_is_a_range_error() {
        let dir = tempfile::tempdir().unwrap();
        write_file(dir.path(), "data.jsonl", dataset_jsonl());
        write_file(dir.path(), "lexicon.json", lexicon_json());
        let toml = minimal_toml().replace("seed = 7", "seed = 7\nworkers = 0");
        let path = write_file(dir.path(), "campaign.toml", &toml);
        let err = load_config(&path).unwrap_err().to_string();
        assert!(err.contains("workers"), "{err}");
    }

    #[test]
    fn missing_dataset_file_names_the_key() {
        let dir = tempfile::tempdir().unwrap();
        write_file(dir.path(), "lexicon.json", lexicon_json());
        let path = write_file(dir.path(), "campaign.toml", minimal_toml());
        let err = load_config(&path).unwrap_err().to_string();
        assert!(err.contains("dataset.path"), "{err}");
    }

    #[test]
    fn fingerprint_tracks_content_not_location() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let config_a = load_config(&write_campaign(dir_a.path())).unwrap();
        let config_b = load_config(&write_campaign(dir_b.path())).unwrap();
        assert_eq!(
            fingerprint(&config_a).unwrap(),
            fingerprint(&config_b).unwrap()
        );

        let mut seeded = config_a.clone();
        seeded.seed = 8;
        assert_ne!(fingerprint(&config_a).unwrap(), fingerprint(&seeded).unwrap());

        let mut more_workers = config_a.clone();
        more_workers.workers = 4;
        more_workers.out_dir = Some(dir_b.path().join("elsewhere"));
        assert_eq!(
            fingerprint(&config_a).unwrap(),
            fingerprint(&more_workers).unwrap()
        );
    }

    #[test]
    fn overrides_take_precedence() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = load_config(&write_campaign(dir.path())).unwrap();
        config.apply(&Overrides {
            seed: Some(99),
            workers: Some(3),
            perturb_prompt: true,
            out_dir: Some(PathBuf::from("/tmp/out")),
        });
        assert_eq!(config.seed, 99);
        assert_eq!(config.workers, 3);
        assert!(config.perturb_prompt);
        assert_eq!(config.out_dir.as_deref(), Some(Path::new("/tmp/out")));
    }
}
