//! Campaign execution: resolve configured resources, fan examples out to a
//! worker pool, append outcomes to a resumable JSONL log, and emit reports.
//!
//! Every example gets its own ledger, cache, and RNG stream, so worker count
//! and scheduling order cannot change any outcome; the log is the single
//! source of truth and reports are always rebuilt from it.

use std::collections::{HashSet, VecDeque};
use std::fs::{self, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::thread;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use ritfis_core::dataset::{load_dataset, DatasetError, LabelSet, TextSample};
use ritfis_core::goal::Budget;
use ritfis_core::metrics::{MetricsError, NgramScorer};
use ritfis_core::model::surrogate::LexiconError;
use ritfis_core::model::{
    HttpChatModel, ModelError, QueryLedger, ResponseCache, SurrogateLexicon, SurrogateModel,
    ThreatModel, Verbalizer,
};
use ritfis_core::report::{build_report, CampaignInfo, CampaignReport, ReportFormat};
use ritfis_core::rng::derive_rng;
use ritfis_core::search::presets::{run_preset, PresetParams};
use ritfis_core::search::{OutcomeStatus, SearchContext, SearchOutcome, TargetInput};
use ritfis_core::text::{PromptTemplate, TextError};
use ritfis_core::transform::constraints::ConstraintSet;
use ritfis_core::transform::resources::{
    bundled_stop_words, load_pos_lexicon, load_word_list, ResourceError, SynonymTable,
};

use crate::config::{fingerprint, AdapterKind, CampaignConfig, ConfigError};

pub const OUTCOME_LOG: &str = "outcomes.jsonl";
pub const SIDECAR: &str = "campaign.json";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_MARKDOWN: &str = "report.md";

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("dataset: {0}")]
    Dataset(#[from] DatasetError),
    #[error("lexicon: {0}")]
    Lexicon(#[from] LexiconError),
    #[error("resource: {0}")]
    Resource(#[from] ResourceError),
    #[error("prompt: {0}")]
    Prompt(#[from] TextError),
    #[error("metrics: {0}")]
    Metrics(#[from] MetricsError),
    #[error("model endpoint failed preflight: {0}")]
    Unreachable(ModelError),
    #[error("no output directory: set `out_dir` in the config or pass --out")]
    NoOutputDir,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} line {line}: not a valid outcome record: {message}")]
    CorruptLog {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("missing campaign sidecar {path}; it is written next to the outcome log by `ritfis run`")]
    MissingSidecar { path: PathBuf },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CampaignError + '_ {
    move |source| CampaignError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Everything derived from the log that `ritfis report` needs to rebuild the
/// exact live report: campaign identity, the scorer corpus, and which sample
/// ids were drawn.
#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct CampaignSidecar {
    pub info: CampaignInfo,
    pub corpus: Vec<String>,
    pub sampled_ids: Vec<String>,
}

/// A validated campaign with every resource resolved and ready to run.
pub struct PreparedCampaign {
    pub config: CampaignConfig,
    pub samples: Vec<TextSample>,
    pub model: Box<dyn ThreatModel>,
    pub prompt: PromptTemplate,
    pub synonyms: SynonymTable,
    pub constraints: ConstraintSet,
    pub budget: Budget,
    pub corpus: Vec<String>,
    pub fingerprint: String,
}

fn build_model(
    config: &CampaignConfig,
    labels: &LabelSet,
) -> Result<Box<dyn ThreatModel>, CampaignError> {
    match config.model.adapter {
        AdapterKind::Surrogate => {
            let path = config.model.lexicon.as_deref().expect("validated");
            let lexicon = SurrogateLexicon::load(path)?;
            Ok(Box::new(SurrogateModel::new(lexicon, labels.clone())?))
        }
        AdapterKind::Http => {
            let url = config.model.url.as_deref().expect("validated");
            let name = config.model.name.as_deref().expect("validated");
            let verbalizer = Verbalizer::labels_as_triggers(labels);
            let mut model = HttpChatModel::new(url, name, labels.clone(), verbalizer);
            if let Some(t) = config.model.temperature {
                model = model.with_temperature(t);
            }
            Ok(Box::new(model))
        }
    }
}

fn build_constraints(config: &CampaignConfig) -> Result<ConstraintSet, CampaignError> {
    let stop_words = match config.constraints.stop_words.as_str() {
        "bundled" => bundled_stop_words(),
        "none" => HashSet::new(),
        path => load_word_list(Path::new(path))?,
    };
    let pos_lexicon = match &config.constraints.pos_lexicon {
        Some(path) => Some(load_pos_lexicon(path)?),
        None => None,
    };
    Ok(ConstraintSet {
        stop_words,
        pos_lexicon,
        max_change_rate: config.constraints.max_change_rate,
        blacklist: config
            .constraints
            .blacklist
            .iter()
            .map(|w| w.to_lowercase())
            .collect(),
        max_edits: config.constraints.max_edits,
        forbid_re_edit: config.constraints.forbid_re_edit,
    })
}

fn build_synonyms(config: &CampaignConfig) -> Result<SynonymTable, CampaignError> {
    match config.resources.synonyms.as_str() {
        "bundled" => Ok(SynonymTable::bundled()),
        "none" => Ok(SynonymTable::from_rows(&[])),
        path => Ok(SynonymTable::load(Path::new(path))?),
    }
}

/// Seeded reservoir sample of `k` items, returned in dataset order. The
/// stream name pins this draw independently of any per-example randomness.
fn sample_indices(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut rng = derive_rng(seed, "sampling");
    let mut reservoir: Vec<usize> = (0..k.min(n)).collect();
    for i in k..n {
        let j = rng.random_range(0..=i);
        if j < k {
            reservoir[j] = i;
        }
    }
    reservoir.sort_unstable();
    reservoir
}

impl PreparedCampaign {
    /// Resolves every configured resource and draws the example sample.
    /// Everything except the network preflight happens here, so `validate`
    /// can reuse it offline.
    pub fn prepare(config: CampaignConfig) -> Result<Self, CampaignError> {
        let label_set = LabelSet::new(config.dataset.labels.clone())
            .map_err(CampaignError::Dataset)?;
        let dataset = load_dataset(&config.dataset.path, config.dataset.format, &label_set)?;
        let model = build_model(&config, &label_set)?;
        let constraints = build_constraints(&config)?;
        let synonyms = build_synonyms(&config)?;
        let prompt = PromptTemplate::new(&config.prompt.prefix, &config.prompt.separator)?;
        let budget = Budget {
            max_queries: config.budget.max_queries,
            max_seconds: config.budget.max_seconds,
        };
        let fingerprint = fingerprint(&config)?;

        let samples = match config.sample_size {
            Some(k) if k < dataset.samples.len() => {
                sample_indices(dataset.samples.len(), k, config.seed)
                    .into_iter()
                    .map(|i| dataset.samples[i].clone())
                    .collect()
            }
            _ => dataset.samples.clone(),
        };

        let corpus = match &config.resources.ppl_corpus {
            Some(path) => fs::read_to_string(path)
                .map_err(io_err(path))?
                .lines()
                .filter(|l| !l.trim().is_empty())
                .map(str::to_string)
                .collect(),
            None => samples.iter().map(|s| s.text.clone()).collect(),
        };

        Ok(PreparedCampaign {
            config,
            samples,
            model,
            prompt,
            synonyms,
            constraints,
            budget,
            corpus,
            fingerprint,
        })
    }

    pub fn info(&self) -> CampaignInfo {
        CampaignInfo {
            dataset: self.config.dataset_name(),
            method: self.config.method.preset.name().to_string(),
            prompt: self.config.prompt.prefix.clone(),
            model: self.model.describe(),
            seed: self.config.seed,
            config_hash: self.fingerprint.clone(),
        }
    }

    fn preset_params(&self) -> PresetParams {
        let method = &self.config.method;
        let mut params = PresetParams::default();
        if let Some(limit) = method.synonym_limit {
            params.synonym_limit = limit;
        }
        if let Some(width) = method.beam_width {
            params.beam_width = width;
        }
        if let Some(fragments) = &method.fragments {
            params.fragments = Some(fragments.clone());
        }
        if let Some(placement) = method.placement {
            params.placement = placement;
        }
        params
    }

    fn run_example(&self, sample: &TextSample) -> SearchOutcome {
        let ledger = QueryLedger::new();
        let mut ctx = SearchContext::new(
            self.model.as_ref(),
            &ledger,
            &self.constraints,
            &self.synonyms,
            &sample.id,
            &sample.label,
            self.config.seed,
        )
        .with_budget(self.budget);
        if let Some(dir) = &self.config.cache_dir {
            match ResponseCache::with_disk(dir) {
                Ok(cache) => ctx = ctx.with_cache(cache),
                Err(e) => return abstain_outcome(sample, &ledger, &format!("cache: {e}")),
            }
        }
        let target = if self.config.perturb_prompt {
            TargetInput::full_input(&self.prompt, &sample.text)
        } else {
            TargetInput::example_only(self.prompt.clone(), &sample.text)
        };
        let params = self.preset_params();
        match run_preset(self.config.method.preset, &mut ctx, &target, &params) {
            Ok(outcome) => outcome,
            Err(e) => abstain_outcome(sample, &ledger, &e.to_string()),
        }
    }
}

/// Outcome for an example the engine could not process at all. The search
/// never produced a verdict, so the example abstains with the error recorded.
fn abstain_outcome(sample: &TextSample, ledger: &QueryLedger, message: &str) -> SearchOutcome {
    let (queries_used, elapsed_seconds) = ledger.finish_example(&sample.id);
    SearchOutcome {
        sample_id: sample.id.clone(),
        truth: sample.label.clone(),
        status: OutcomeStatus::Abstain,
        original_text: sample.text.clone(),
        final_text: sample.text.clone(),
        edits: Vec::new(),
        baseline_label: None,
        final_label: None,
        queries_used,
        elapsed_seconds,
        score_trace: Vec::new(),
        error: Some(message.to_string()),
    }
}

/// Parses the outcome log, tolerating one torn final line (a crash while
/// appending). Returns the valid outcomes plus whether the file needs to be
/// rewritten before further appends.
fn read_log(path: &Path) -> Result<(Vec<SearchOutcome>, bool), CampaignError> {
    if !path.exists() {
        return Ok((Vec::new(), false));
    }
    let raw = fs::read_to_string(path).map_err(io_err(path))?;
    let mut outcomes = Vec::new();
    let lines: Vec<&str> = raw.lines().collect();
    for (idx, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<SearchOutcome>(line) {
            Ok(outcome) => outcomes.push(outcome),
            Err(_) if idx + 1 == lines.len() => {
                // Torn tail from an interrupted append; drop it and redo
                // that example.
                return Ok((outcomes, true));
            }
            Err(e) => {
                return Err(CampaignError::CorruptLog {
                    path: path.to_path_buf(),
                    line: idx + 1,
                    message: e.to_string(),
                })
            }
        }
    }
    Ok((outcomes, false))
}

fn outcome_line(outcome: &SearchOutcome) -> String {
    let mut line = serde_json::to_string(outcome).expect("outcome serializes");
    line.push('\n');
    line
}

fn write_text(path: &Path, contents: &str) -> Result<(), CampaignError> {
    fs::write(path, contents).map_err(io_err(path))
}

/// Builds the report exactly as `ritfis run` does: scorer trained on the
/// sidecar corpus, examples sorted by id inside `build_report`.
pub fn report_from_parts(
    sidecar: &CampaignSidecar,
    outcomes: &[SearchOutcome],
) -> Result<CampaignReport, CampaignError> {
    let scorer = NgramScorer::train(sidecar.corpus.iter());
    Ok(build_report(sidecar.info.clone(), &scorer, outcomes)?)
}

/// Rebuilds a report from an outcome log and its sidecar.
pub fn report_from_log(log_path: &Path) -> Result<CampaignReport, CampaignError> {
    let (outcomes, torn) = read_log(log_path)?;
    if torn {
        return Err(CampaignError::CorruptLog {
            path: log_path.to_path_buf(),
            line: outcomes.len() + 1,
            message: "torn final line; resume the run to repair the log".to_string(),
        });
    }
    let sidecar_path = log_path
        .parent()
        .unwrap_or(Path::new("."))
        .join(SIDECAR);
    if !sidecar_path.is_file() {
        return Err(CampaignError::MissingSidecar { path: sidecar_path });
    }
    let raw = fs::read_to_string(&sidecar_path).map_err(io_err(&sidecar_path))?;
    let sidecar: CampaignSidecar =
        serde_json::from_str(&raw).map_err(|e| CampaignError::CorruptLog {
            path: sidecar_path.clone(),
            line: 1,
            message: e.to_string(),
        })?;
    report_from_parts(&sidecar, &outcomes)
}

/// Result of a campaign run: the report plus whether every sampled example
/// made it into the log.
pub struct RunSummary {
    pub report: CampaignReport,
    pub completed: bool,
    pub out_dir: PathBuf,
}

/// Runs the campaign into `out_dir`, resuming from any existing outcome log.
pub fn run_campaign(prepared: &PreparedCampaign) -> Result<RunSummary, CampaignError> {
    let out_dir = prepared
        .config
        .out_dir
        .clone()
        .ok_or(CampaignError::NoOutputDir)?;
    fs::create_dir_all(&out_dir).map_err(io_err(&out_dir))?;
    prepared
        .model
        .preflight()
        .map_err(CampaignError::Unreachable)?;

    let log_path = out_dir.join(OUTCOME_LOG);
    let (existing, torn) = read_log(&log_path)?;
    if torn {
        let repaired: String = existing.iter().map(outcome_line).collect();
        write_text(&log_path, &repaired)?;
    }
    let done: HashSet<String> = existing.iter().map(|o| o.sample_id.clone()).collect();

    let pending: VecDeque<&TextSample> = prepared
        .samples
        .iter()
        .filter(|s| !done.contains(&s.id))
        .collect();

    let sidecar = CampaignSidecar {
        info: prepared.info(),
        corpus: prepared.corpus.clone(),
        sampled_ids: prepared.samples.iter().map(|s| s.id.clone()).collect(),
    };
    let sidecar_path = out_dir.join(SIDECAR);
    let sidecar_json =
        serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    write_text(&sidecar_path, &format!("{sidecar_json}\n"))?;

    if !pending.is_empty() {
        let file = OpenOptions::new()
            .append(true)
            .create(true)
            .open(&log_path)
            .map_err(io_err(&log_path))?;
        let writer = Mutex::new(BufWriter::new(file));
        let queue = Mutex::new(pending);
        let errors: Mutex<Vec<CampaignError>> = Mutex::new(Vec::new());
        let workers = prepared.config.workers.min(prepared.samples.len()).max(1);

        thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let sample = match queue.lock().unwrap().pop_front() {
                        Some(sample) => sample,
                        None => break,
                    };
                    let outcome = prepared.run_example(sample);
                    let line = outcome_line(&outcome);
                    let mut guard = writer.lock().unwrap();
                    let written = guard
                        .write_all(line.as_bytes())
                        .and_then(|()| guard.flush());
                    if let Err(e) = written {
                        errors.lock().unwrap().push(CampaignError::Io {
                            path: log_path.clone(),
                            source: e,
                        });
                        break;
                    }
                });
            }
        });
        if let Some(err) = errors.into_inner().unwrap().into_iter().next() {
            return Err(err);
        }
    }

    let (outcomes, _) = read_log(&log_path)?;
    let completed = {
        let logged: HashSet<&str> = outcomes.iter().map(|o| o.sample_id.as_str()).collect();
        prepared.samples.iter().all(|s| logged.contains(s.id.as_str()))
    };
    let report = report_from_parts(&sidecar, &outcomes)?;
    write_text(
        &out_dir.join(REPORT_JSON),
        &ritfis_core::report::emit_report(&report, ReportFormat::Json),
    )?;
    write_text(
        &out_dir.join(REPORT_MARKDOWN),
        &ritfis_core::report::emit_report(&report, ReportFormat::Markdown),
    )?;
    Ok(RunSummary {
        report,
        completed,
        out_dir,
    })
}
