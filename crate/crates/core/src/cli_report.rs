//! Run configuration and the five pipeline verbs (`scan`, `build`,
//! `score-baseline`, `eval`, `sweep-report`) as library calls.
//!
//! Output tree under `output_dir`:
//!
//! ```text
//! manifest.jsonl
//! splits/<name>/{audio/, labels.jsonl, skipped.jsonl, plan.json}
//! models/<name>.json
//! scores/<name>.tsv
//! eval/<name>.{txt,jsonl,csv}
//! reports/pnoisy_sweep.csv
//! ```
//!
//! Every file except rendered WAVs records the config digest that produced
//! it. The digest covers the whole effective config except `output_dir`, so
//! identical runs into different directories agree.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::audio_io::AudioError;
use crate::baseline_features::{FeatureError, LfccConfig, ModelFile, TrainConfig};
use crate::condition_sampler::{
    self, Condition, ConditionPlan, MaterializeSummary, PlanError, SamplingPolicy, DEFAULT_P_TWO_NOISE,
    DEFAULT_SEGMENT_LEN_S, TRAINING_P_NOISY,
};
use crate::corpus_manifest::{self, CategoryAliases, ManifestError, ProtocolLayout, Split};
use crate::metrics::{self, EvalOptions, MetricReport, MetricsError, ScoreFile, Task};
use crate::pipeline::{self, PipelineError, RenderedSplit};
use crate::snr_mixer::{SnrDb, SNR_GRID_DB};

pub const ENV_SPEECH_ROOT: &str = "SNRBENCH_SPEECH_ROOT";
pub const ENV_NOISE_ROOT: &str = "SNRBENCH_NOISE_ROOT";

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const SPLITS_DIR: &str = "splits";
pub const MODELS_DIR: &str = "models";
pub const SCORES_DIR: &str = "scores";
pub const EVAL_DIR: &str = "eval";
pub const REPORTS_DIR: &str = "reports";
pub const SWEEP_REPORT_FILE: &str = "pnoisy_sweep.csv";
const SWEEP_PREFIX: &str = "pnoisy_";
pub const CLEAN_SPLIT: &str = "clean";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Internal(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Data(_) => "data",
            CliError::Internal(_) => "internal",
        }
    }

    /// One-line JSON for stderr.
    pub fn to_json(&self) -> String {
        serde_json::json!({
            "status": "error",
            "kind": self.kind(),
            "exit_code": self.exit_code(),
            "message": self.to_string(),
        })
        .to_string()
    }
}

impl From<AudioError> for CliError {
    fn from(e: AudioError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ManifestError> for CliError {
    fn from(e: ManifestError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<PlanError> for CliError {
    fn from(e: PlanError) -> Self {
        match e {
            PlanError::EmptySnrGrid
            | PlanError::SnrNotOnGrid(_)
            | PlanError::InvalidProbability { .. }
            | PlanError::InvalidSegmentLength(_) => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<FeatureError> for CliError {
    fn from(e: FeatureError) -> Self {
        match e {
            FeatureError::InvalidConfig(_) => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Manifest(e) => e.into(),
            PipelineError::Plan(e) => e.into(),
            PipelineError::Feature(e) => e.into(),
            PipelineError::Metrics(e) => e.into(),
            PipelineError::Audio(e) => e.into(),
            e @ PipelineError::TaskMismatch { .. } => CliError::Config(e.to_string()),
            e @ PipelineError::EmptySplit(_) => CliError::Data(e.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(parent) => {
            fs::create_dir_all(parent).map_err(|e| CliError::Data(format!("cannot create {}: {e}", parent.display())))
        }
        None => Ok(()),
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    ensure_parent(path)?;
    fs::write(path, contents).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub speech_root: Option<PathBuf>,
    pub noise_root: Option<PathBuf>,
    pub protocols: BTreeMap<Split, PathBuf>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    pub p_noisy: f64,
    pub p_two_noise: f64,
    pub snr_grid: Vec<f64>,
    /// Default SNR for `build fixed-snr` when none is given.
    pub fixed_snr: Option<f64>,
    pub segment_len_s: f64,
    pub holdout_categories: Vec<String>,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            p_noisy: TRAINING_P_NOISY,
            p_two_noise: DEFAULT_P_TWO_NOISE,
            snr_grid: SNR_GRID_DB.to_vec(),
            fixed_snr: None,
            segment_len_s: DEFAULT_SEGMENT_LEN_S,
            holdout_categories: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    pub key_col: i32,
    pub label_col: i32,
    pub expected_columns: Option<usize>,
    pub audio_ext: String,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        let d = ProtocolLayout::default();
        ProtocolConfig {
            key_col: d.key_col,
            label_col: d.label_col,
            expected_columns: d.expected_columns,
            audio_ext: d.audio_ext,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub epochs: usize,
    pub learning_rate: f64,
    pub class_weights: Option<[f64; 2]>,
    pub l2: f64,
    pub init_scale: f64,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let d = TrainConfig::default();
        TrainSettings {
            epochs: d.epochs,
            learning_rate: d.learning_rate,
            class_weights: d.class_weights,
            l2: d.l2,
            init_scale: d.init_scale,
        }
    }
}

/// TOML run configuration; command-line flags override individual fields.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub task: Task,
    pub paths: PathsConfig,
    pub policy: PolicyConfig,
    pub protocol: ProtocolConfig,
    pub noise_aliases: Option<CategoryAliases>,
    pub lfcc: LfccConfig,
    pub train: TrainSettings,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("bad config: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 over the canonical JSON form, ignoring `output_dir`.
    pub fn digest(&self) -> String {
        let mut c = self.clone();
        c.paths.output_dir = None;
        let json = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn output_dir(&self) -> Result<&Path> {
        self.paths
            .output_dir
            .as_deref()
            .ok_or_else(|| CliError::Config("output_dir is not set".into()))
    }

    pub fn require_seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| CliError::Config("seed is mandatory; set `seed` in the config or pass --seed".into()))
    }

    pub fn sampling_policy(&self) -> Result<SamplingPolicy> {
        let grid = self
            .policy
            .snr_grid
            .iter()
            .map(|&v| SnrDb::new(v).map_err(|e| CliError::Config(format!("snr_grid: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(SamplingPolicy {
            p_noisy: self.policy.p_noisy,
            p_noisy_by_split: BTreeMap::new(),
            p_two_noise: self.policy.p_two_noise,
            snr_grid: grid,
            fixed_snr: None,
            root_seed: self.require_seed()?,
            segment_len_s: self.policy.segment_len_s,
            holdout_categories: self.policy.holdout_categories.clone(),
        })
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        Ok(TrainConfig {
            epochs: self.train.epochs,
            learning_rate: self.train.learning_rate,
            class_weights: self.train.class_weights,
            l2: self.train.l2,
            seed: self.require_seed()?,
            init_scale: self.train.init_scale,
        })
    }

    pub fn protocol_layout(&self) -> ProtocolLayout {
        ProtocolLayout {
            key_col: self.protocol.key_col,
            label_col: self.protocol.label_col,
            expected_columns: self.protocol.expected_columns,
            audio_dir: PathBuf::new(),
            audio_ext: self.protocol.audio_ext.clone(),
        }
    }

    fn existing(&self, what: &str, p: Option<&Path>) -> Result<PathBuf> {
        let p = p.ok_or_else(|| CliError::Config(format!("{what} is not set")))?;
        if !p.exists() {
            return Err(CliError::Config(format!("{what} {} does not exist", p.display())));
        }
        Ok(p.to_path_buf())
    }
}

/// Individual overrides from flags or the environment; `Some` wins.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub task: Option<Task>,
    pub speech_root: Option<PathBuf>,
    pub noise_root: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub protocols: Vec<(Split, PathBuf)>,
    pub p_noisy: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(s) = self.seed {
            cfg.seed = Some(s);
        }
        if let Some(t) = self.task {
            cfg.task = t;
        }
        if let Some(p) = &self.speech_root {
            cfg.paths.speech_root = Some(p.clone());
        }
        if let Some(p) = &self.noise_root {
            cfg.paths.noise_root = Some(p.clone());
        }
        if let Some(p) = &self.output_dir {
            cfg.paths.output_dir = Some(p.clone());
        }
        for (split, p) in &self.protocols {
            cfg.paths.protocols.insert(*split, p.clone());
        }
        if let Some(p) = self.p_noisy {
            cfg.policy.p_noisy = p;
        }
    }
}

pub fn manifest_path(cfg: &RunConfig) -> Result<PathBuf> {
    Ok(cfg.output_dir()?.join(MANIFEST_FILE))
}

pub fn split_dir(cfg: &RunConfig, name: &str) -> Result<PathBuf> {
    Ok(cfg.output_dir()?.join(SPLITS_DIR).join(name))
}

/// Builds and writes `manifest.jsonl`.
pub fn cmd_scan(cfg: &RunConfig) -> Result<PathBuf> {
    cfg.require_seed()?;
    let speech = cfg.existing("speech_root", cfg.paths.speech_root.as_deref())?;
    let noise = cfg.existing("noise_root", cfg.paths.noise_root.as_deref())?;
    if cfg.paths.protocols.is_empty() {
        return Err(CliError::Config("no protocol files configured".into()));
    }
    let mut protocols = Vec::new();
    for (split, p) in &cfg.paths.protocols {
        protocols.push((*split, cfg.existing(&format!("{} protocol", split.as_str()), Some(p))?));
    }
    let aliases = cfg.noise_aliases.clone().unwrap_or_default();
    let mut manifest = pipeline::scan_corpus(&speech, &noise, &protocols, &cfg.protocol_layout(), &aliases)?;
    manifest.config_digest = Some(cfg.digest());
    let out = manifest_path(cfg)?;
    fs::create_dir_all(cfg.output_dir()?).map_err(|e| CliError::Data(format!("cannot create output dir: {e}")))?;
    corpus_manifest::write_manifest(&manifest, &out)?;
    log::info!(
        "scanned {} trials and {} noise clips into {}",
        manifest.trials.len(),
        manifest.noises.len(),
        out.display()
    );
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub enum BuildKind {
    Multicondition {
        splits: Vec<Split>,
    },
    /// Every trial clean; the reference condition next to fixed-SNR splits.
    Clean {
        splits: Vec<Split>,
    },
    FixedSnr {
        snr_db: Option<f64>,
        splits: Vec<Split>,
    },
    MixedTest,
    PnoisySweep {
        fractions: Vec<f64>,
        splits: Vec<Split>,
    },
}

impl BuildKind {
    fn default_splits(&self) -> &'static [Split] {
        match self {
            BuildKind::Multicondition { .. } | BuildKind::PnoisySweep { .. } => &[Split::Train],
            BuildKind::Clean { .. } | BuildKind::FixedSnr { .. } | BuildKind::MixedTest => &[Split::Test],
        }
    }
}

/// Split directory name of a fixed-SNR build, e.g. `fixed-snr_-5`.
pub fn fixed_snr_name(snr: SnrDb) -> String {
    format!("fixed-snr_{snr}")
}

pub fn sweep_member_name(index: usize) -> String {
    format!("{SWEEP_PREFIX}{index:02}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuiltSplit {
    pub name: String,
    pub dir: PathBuf,
    pub summary: MaterializeSummary,
    pub noisy_fraction: f64,
}

/// Plans and renders one or more splits from the scanned manifest.
pub fn cmd_build(cfg: &RunConfig, kind: &BuildKind) -> Result<Vec<BuiltSplit>> {
    let policy = cfg.sampling_policy()?;
    let manifest = corpus_manifest::read_manifest(manifest_path(cfg)?)?;
    let stale = manifest.verify_digests();
    if let Some(m) = stale.first() {
        return Err(CliError::Data(format!(
            "{} source file(s) changed since scan, first: {}",
            stale.len(),
            m.path
        )));
    }
    let pick = |splits: &[Split]| {
        let splits = if splits.is_empty() {
            kind.default_splits()
        } else {
            splits
        };
        manifest.with_splits(splits)
    };
    let plans: Vec<(String, ConditionPlan)> = match kind {
        BuildKind::Multicondition { splits } => {
            vec![(
                "multicondition".into(),
                condition_sampler::plan_multicondition(&pick(splits), &policy)?,
            )]
        }
        BuildKind::Clean { splits } => {
            let clean = SamplingPolicy {
                p_noisy: 0.0,
                ..policy.clone()
            };
            vec![(
                CLEAN_SPLIT.into(),
                condition_sampler::plan_multicondition(&pick(splits), &clean)?,
            )]
        }
        BuildKind::FixedSnr { snr_db, splits } => {
            let v = snr_db
                .or(cfg.policy.fixed_snr)
                .ok_or_else(|| CliError::Config("fixed-snr needs an SNR value".into()))?;
            let snr = SnrDb::new(v).map_err(|e| CliError::Config(e.to_string()))?;
            vec![(
                fixed_snr_name(snr),
                condition_sampler::plan_fixed_snr_with(&pick(splits), snr, &policy)?,
            )]
        }
        BuildKind::MixedTest => vec![(
            "mixed-test".into(),
            condition_sampler::plan_mixed_test_with(&manifest, &policy)?,
        )],
        BuildKind::PnoisySweep { fractions, splits } => {
            if fractions.is_empty() {
                return Err(CliError::Config("pnoisy-sweep needs at least one fraction".into()));
            }
            condition_sampler::plan_pnoisy_sweep(&pick(splits), fractions, &policy)?
                .into_iter()
                .enumerate()
                .map(|(i, p)| (sweep_member_name(i), p))
                .collect()
        }
    };
    let digest = cfg.digest();
    let mut built = Vec::new();
    for (name, mut plan) in plans {
        plan.config_digest = Some(digest.clone());
        let dir = split_dir(cfg, &name)?;
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| CliError::Data(format!("cannot clear {}: {e}", dir.display())))?;
        }
        let summary = condition_sampler::materialize(&plan, &manifest, &dir)?;
        log::info!(
            "{name}: rendered {} trials ({} skipped), noisy fraction {:.3}",
            summary.rendered,
            summary.skipped.len(),
            plan.noisy_fraction()
        );
        built.push(BuiltSplit {
            name,
            dir,
            summary,
            noisy_fraction: plan.noisy_fraction(),
        });
    }
    Ok(built)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreArgs {
    /// Split to score.
    pub split: String,
    /// Train a fresh scorer on this split ...
    pub train_split: Option<String>,
    /// ... or load an existing model file.
    pub model: Option<PathBuf>,
    /// Score file name (without extension); defaults to `<split>__<model>`.
    pub name: Option<String>,
}

/// Trains or loads the LFCC baseline and scores a rendered split.
pub fn cmd_score_baseline(cfg: &RunConfig, args: &ScoreArgs) -> Result<PathBuf> {
    let train = cfg.train_config()?;
    let digest = cfg.digest();
    let (model, model_name) = match (&args.train_split, &args.model) {
        (Some(t), None) => {
            let split = RenderedSplit::load(split_dir(cfg, t)?)?;
            let mut model = pipeline::train_baseline(&split, cfg.task, &cfg.lfcc, &train)?;
            model.config_digest = Some(digest.clone());
            let path = cfg.output_dir()?.join(MODELS_DIR).join(format!("{t}.json"));
            ensure_parent(&path)?;
            model.write(&path)?;
            (model, t.clone())
        }
        (None, Some(p)) => {
            let model = ModelFile::read(p)?;
            let stem = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "model".into());
            (model, stem)
        }
        _ => return Err(CliError::Config("pass exactly one of --train or --model".into())),
    };
    let split = RenderedSplit::load(split_dir(cfg, &args.split)?)?;
    let mut scores = pipeline::score_split(&model, &split, cfg.task)?;
    scores.config_digest = Some(digest);
    let name = args
        .name
        .clone()
        .unwrap_or_else(|| format!("{}__{model_name}", args.split));
    let path = cfg.output_dir()?.join(SCORES_DIR).join(format!("{name}.tsv"));
    write_file(&path, scores.to_tsv())?;
    Ok(path)
}

/// Evaluates one or more score files together and writes the text table,
/// JSONL and CSV forms under `eval/<name>`.
pub fn cmd_eval(
    cfg: &RunConfig,
    score_files: &[PathBuf],
    name: Option<&str>,
    opts: EvalOptions,
) -> Result<MetricReport> {
    if score_files.is_empty() {
        return Err(CliError::Config("eval needs at least one score file".into()));
    }
    let files = score_files
        .iter()
        .map(|p| {
            if !p.exists() {
                return Err(CliError::Config(format!("score file {} does not exist", p.display())));
            }
            Ok(ScoreFile::read(p)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let merged = ScoreFile::concat(&files)?;
    let mut report = metrics::per_condition_curves(&merged, opts)?;
    report.config_digest = Some(cfg.digest());
    let name = match name {
        Some(n) => n.to_string(),
        None if score_files.len() == 1 => score_files[0]
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "report".into()),
        None => "combined".into(),
    };
    let base = cfg.output_dir()?.join(EVAL_DIR);
    write_file(&base.join(format!("{name}.txt")), report.to_table())?;
    write_file(&base.join(format!("{name}.jsonl")), report.to_jsonl())?;
    write_file(&base.join(format!("{name}.csv")), report.to_csv())?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub member: String,
    pub p_noisy: f64,
    pub n_trials: usize,
    pub eer: Option<f64>,
    pub roc_auc: Option<f64>,
    pub accuracy: f64,
}

fn sweep_members(cfg: &RunConfig) -> Result<Vec<(String, f64)>> {
    let dir = cfg.output_dir()?.join(SPLITS_DIR);
    let entries = fs::read_dir(&dir).map_err(|e| CliError::Data(format!("cannot list {}: {e}", dir.display())))?;
    let mut names: Vec<String> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.starts_with(SWEEP_PREFIX))
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(CliError::Data(format!(
            "no {SWEEP_PREFIX}* splits under {}",
            dir.display()
        )));
    }
    names
        .into_iter()
        .map(|n| {
            let plan = ConditionPlan::read(dir.join(&n).join(condition_sampler::PLAN_FILE))?;
            Ok((n, plan.policy.p_noisy))
        })
        .collect()
}

/// Trains the baseline on every sweep member and evaluates it on
/// `test_split`, leaving `eval/pnoisy_<i>.jsonl` for [`cmd_sweep_report`].
pub fn run_sweep_baseline(cfg: &RunConfig, test_split: &str) -> Result<()> {
    for (member, _) in sweep_members(cfg)? {
        let scores = cmd_score_baseline(
            cfg,
            &ScoreArgs {
                split: test_split.to_string(),
                train_split: Some(member.clone()),
                model: None,
                name: Some(member.clone()),
            },
        )?;
        cmd_eval(cfg, &[scores], Some(&member), EvalOptions::default())?;
    }
    Ok(())
}

/// Joins sweep evaluations into `(p_noisy, metrics)` rows, one per member
/// in requested order. Uses the pooled metrics, or one condition's row.
pub fn cmd_sweep_report(cfg: &RunConfig, condition: Option<Condition>) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for (member, p_noisy) in sweep_members(cfg)? {
        let path = cfg.output_dir()?.join(EVAL_DIR).join(format!("{member}.jsonl"));
        let text = fs::read_to_string(&path).map_err(|e| {
            CliError::Data(format!(
                "missing evaluation {} for sweep member {member}: {e}",
                path.display()
            ))
        })?;
        let report = MetricReport::from_jsonl(&text)?;
        let m = match condition {
            None => report.pooled,
            Some(c) => report.rows.into_iter().find(|r| r.condition == c),
        }
        .ok_or_else(|| CliError::Data(format!("{} has no row for the requested condition", path.display())))?;
        rows.push(SweepRow {
            member,
            p_noisy,
            n_trials: m.n_trials,
            eer: m.eer,
            roc_auc: m.roc_auc,
            accuracy: m.accuracy,
        });
    }
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut csv = format!("# config_digest={}\n", cfg.digest());
    csv.push_str("member,p_noisy,condition,n_trials,eer,roc_auc,accuracy\n");
    let cond = condition.map(|c| c.to_string()).unwrap_or_else(|| "pooled".into());
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{cond},{},{},{},{}",
            r.member,
            r.p_noisy,
            r.n_trials,
            opt(r.eer),
            opt(r.roc_auc),
            r.accuracy
        );
    }
    write_file(&cfg.output_dir()?.join(REPORTS_DIR).join(SWEEP_REPORT_FILE), csv)?;
    Ok(rows)
}

/// Parses `train=path` style protocol overrides.
pub fn parse_protocol_arg(s: &str) -> Result<(Split, PathBuf)> {
    let (split, path) = s
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("expected <split>=<path>, got {s:?}")))?;
    let split: Split = split
        .parse()
        .map_err(|_| CliError::Config(format!("unknown split {split:?}")))?;
    Ok((split, PathBuf::from(path)))
}

/// Parses a comma-separated fraction list such as `0,0.25,0.5`.
pub fn parse_fractions(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .map_err(|e| CliError::Config(format!("bad fraction {x:?}: {e}")))
        })
        .collect()
}
