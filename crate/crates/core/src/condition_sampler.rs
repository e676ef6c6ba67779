//! Corruption planning and rendering of benchmark splits.
//!
//! Planning turns a manifest into a [`ConditionPlan`]: one
//! [`ConditionAssignment`] per trial saying whether it is corrupted, with
//! which noise clip(s), at which SNR and where its segment starts. Every draw
//! for a trial comes from a stream keyed by `(root_seed, utt_id)`, so an
//! assignment does not depend on manifest order, on which other trials are in
//! the plan, or on thread scheduling. The Bernoulli gate uses its own stream;
//! p_noisy sweeps re-key only the gate, so sweep plans share every other draw.
//!
//! [`materialize`] renders a plan to disk: one float WAV per rendered trial
//! plus a `labels.jsonl` sidecar sorted by `utt_id`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio_io::{self, AudioBuffer, AudioError, BitDepth};
use crate::corpus_manifest::{Authenticity, Manifest, NoiseClip, Split, TrialRecord};
use crate::keyed_rng::{self, KeyPart};
use crate::snr_mixer::{self, MixError, SnrDb};

pub const DEFAULT_P_TWO_NOISE: f64 = 0.1;
pub const DEFAULT_SEGMENT_LEN_S: f64 = 2.0;
pub const MIXED_TEST_P_NOISY: f64 = 0.8;
pub const MIXED_DEV_P_NOISY: f64 = 0.2;
pub const TRAINING_P_NOISY: f64 = 0.5;

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("noise catalog is empty but the policy requests noisy trials")]
    EmptyNoiseCatalog,
    #[error("SNR grid is empty")]
    EmptySnrGrid,
    #[error("SNR {0} dB is not on the grid")]
    SnrNotOnGrid(f64),
    #[error("probability {name} = {value} outside [0, 1]")]
    InvalidProbability { name: &'static str, value: f64 },
    #[error("segment length must be 2.0 or 4.0 s, got {0}")]
    InvalidSegmentLength(f64),
    #[error("plan references unknown {kind} {id:?}")]
    UnknownReference { kind: &'static str, id: String },
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Mix(#[from] MixError),
    #[error("plan file: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, PlanError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PlanError + '_ {
    move |source| PlanError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Corruption {
    Clean,
    Noisy,
}

/// Joint authenticity x corruption label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum FourClassLabel {
    RealClean = 0,
    RealNoisy = 1,
    SpoofClean = 2,
    SpoofNoisy = 3,
}

impl FourClassLabel {
    pub const ALL: [FourClassLabel; 4] = [
        FourClassLabel::RealClean,
        FourClassLabel::RealNoisy,
        FourClassLabel::SpoofClean,
        FourClassLabel::SpoofNoisy,
    ];

    pub fn encode(authenticity: Authenticity, corruption: Corruption) -> Self {
        match (authenticity, corruption) {
            (Authenticity::Bonafide, Corruption::Clean) => Self::RealClean,
            (Authenticity::Bonafide, Corruption::Noisy) => Self::RealNoisy,
            (Authenticity::Spoof, Corruption::Clean) => Self::SpoofClean,
            (Authenticity::Spoof, Corruption::Noisy) => Self::SpoofNoisy,
        }
    }

    pub fn decode(self) -> (Authenticity, Corruption) {
        match self {
            Self::RealClean => (Authenticity::Bonafide, Corruption::Clean),
            Self::RealNoisy => (Authenticity::Bonafide, Corruption::Noisy),
            Self::SpoofClean => (Authenticity::Spoof, Corruption::Clean),
            Self::SpoofNoisy => (Authenticity::Spoof, Corruption::Noisy),
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::RealClean => "real_clean",
            Self::RealNoisy => "real_noisy",
            Self::SpoofClean => "spoof_clean",
            Self::SpoofNoisy => "spoof_noisy",
        }
    }
}

impl From<FourClassLabel> for u8 {
    fn from(l: FourClassLabel) -> u8 {
        l as u8
    }
}

impl TryFrom<u8> for FourClassLabel {
    type Error = String;
    fn try_from(v: u8) -> std::result::Result<Self, String> {
        FourClassLabel::ALL
            .get(v as usize)
            .copied()
            .ok_or_else(|| format!("four-class label {v} out of range"))
    }
}

/// Evaluation condition of a trial: clean, or corrupted at one SNR.
///
/// Serialized as the string `"clean"` or a bare number of dB. Sorts clean
/// first, then by descending SNR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Condition {
    Clean,
    Snr(SnrDb),
}

impl Condition {
    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("clean") {
            return Some(Self::Clean);
        }
        let v: f64 = s.strip_suffix("dB").unwrap_or(s).trim().parse().ok()?;
        SnrDb::new(v).ok().map(Self::Snr)
    }
}

impl Eq for Condition {}

impl Ord for Condition {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        use std::cmp::Ordering;
        match (self, other) {
            (Self::Clean, Self::Clean) => Ordering::Equal,
            (Self::Clean, Self::Snr(_)) => Ordering::Less,
            (Self::Snr(_), Self::Clean) => Ordering::Greater,
            (Self::Snr(a), Self::Snr(b)) => b.value().total_cmp(&a.value()),
        }
    }
}

impl PartialOrd for Condition {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Clean => f.write_str("clean"),
            Self::Snr(s) => write!(f, "{s}"),
        }
    }
}

impl Serialize for Condition {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Self::Clean => s.serialize_str("clean"),
            Self::Snr(v) => s.serialize_f64(v.value()),
        }
    }
}

impl<'de> Deserialize<'de> for Condition {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => SnrDb::new(v).map(Condition::Snr).map_err(serde::de::Error::custom),
            Raw::Text(t) => {
                Condition::parse(&t).ok_or_else(|| serde::de::Error::custom(format!("bad condition {t:?}")))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start_s: f64,
    pub len_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionAssignment {
    pub utt_id: String,
    pub corruption: Corruption,
    pub noise_ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr: Option<SnrDb>,
    pub crop_offset_seed: u64,
    pub segment: Segment,
    pub four_class_label: FourClassLabel,
}

impl ConditionAssignment {
    pub fn condition(&self) -> Condition {
        match self.snr {
            Some(s) => Condition::Snr(s),
            None => Condition::Clean,
        }
    }

    /// Checks clean <=> no noise ids <=> no SNR, and label/corruption agreement.
    pub fn is_consistent(&self, authenticity: Authenticity) -> bool {
        let clean = self.corruption == Corruption::Clean;
        clean == self.noise_ids.is_empty()
            && clean == self.snr.is_none()
            && self.noise_ids.len() <= 2
            && self.four_class_label == FourClassLabel::encode(authenticity, self.corruption)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingPolicy {
    pub p_noisy: f64,
    /// Per-split overrides of `p_noisy`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub p_noisy_by_split: BTreeMap<Split, f64>,
    pub p_two_noise: f64,
    pub snr_grid: Vec<SnrDb>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_snr: Option<SnrDb>,
    pub root_seed: u64,
    pub segment_len_s: f64,
    /// Noise categories (display form, e.g. `office`, `other:Wind`) excluded
    /// from the catalog for this plan.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub holdout_categories: Vec<String>,
}

impl SamplingPolicy {
    /// On-the-fly training policy: p = 0.5 over the full grid.
    pub fn training(root_seed: u64) -> Self {
        Self {
            p_noisy: TRAINING_P_NOISY,
            p_noisy_by_split: BTreeMap::new(),
            p_two_noise: DEFAULT_P_TWO_NOISE,
            snr_grid: SnrDb::grid(),
            fixed_snr: None,
            root_seed,
            segment_len_s: DEFAULT_SEGMENT_LEN_S,
            holdout_categories: Vec::new(),
        }
    }

    pub fn with_p_noisy(mut self, p: f64) -> Self {
        self.p_noisy = p;
        self
    }

    fn p_for(&self, split: Split) -> f64 {
        self.p_noisy_by_split.get(&split).copied().unwrap_or(self.p_noisy)
    }

    fn validate(&self) -> Result<()> {
        let check = |name, value: f64| {
            if (0.0..=1.0).contains(&value) {
                Ok(())
            } else {
                Err(PlanError::InvalidProbability { name, value })
            }
        };
        check("p_noisy", self.p_noisy)?;
        check("p_two_noise", self.p_two_noise)?;
        for &p in self.p_noisy_by_split.values() {
            check("p_noisy_by_split", p)?;
        }
        if self.snr_grid.is_empty() && self.fixed_snr.is_none() {
            return Err(PlanError::EmptySnrGrid);
        }
        if self.segment_len_s != 2.0 && self.segment_len_s != 4.0 {
            return Err(PlanError::InvalidSegmentLength(self.segment_len_s));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionPlan {
    /// Free-form plan kind, e.g. `multicondition`, `fixed-snr:-5`.
    pub kind: String,
    pub policy: SamplingPolicy,
    /// Seed for the Bernoulli gate stream; differs from `root_seed` only for
    /// sweep members.
    pub gate_seed: u64,
    /// Per-class counts in four-class label order, for external class
    /// weighting.
    pub class_counts: [usize; 4],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_digest: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    pub assignments: Vec<ConditionAssignment>,
}

impl ConditionPlan {
    pub fn noisy_fraction(&self) -> f64 {
        if self.assignments.is_empty() {
            return 0.0;
        }
        let noisy = self
            .assignments
            .iter()
            .filter(|a| a.corruption == Corruption::Noisy)
            .count();
        noisy as f64 / self.assignments.len() as f64
    }

    pub fn get(&self, utt_id: &str) -> Option<&ConditionAssignment> {
        self.assignments.iter().find(|a| a.utt_id == utt_id)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text).map_err(io_err(path))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn gate_key(root_seed: u64) -> u64 {
    keyed_rng::derive_seed(root_seed, &[KeyPart::Str("gate-root")])
}

fn catalog<'a>(manifest: &'a Manifest, policy: &SamplingPolicy) -> Vec<&'a NoiseClip> {
    let mut clips: Vec<&NoiseClip> = manifest
        .noises
        .iter()
        .filter(|n| !policy.holdout_categories.contains(&n.category.to_string()))
        .collect();
    clips.sort_by(|a, b| a.clip_id.cmp(&b.clip_id));
    clips
}

fn assign(
    trial: &TrialRecord,
    p_noisy: f64,
    policy: &SamplingPolicy,
    gate_seed: u64,
    noises: &[&NoiseClip],
) -> ConditionAssignment {
    let utt = KeyPart::Str(&trial.utt_id);
    let gate: f64 = keyed_rng::stream(gate_seed, &[KeyPart::Str("gate"), utt]).gen();

    // Fixed draw order; every value is drawn whether or not the trial ends up
    // noisy, so the gate is the only thing a sweep changes.
    let mut rng = keyed_rng::stream(policy.root_seed, &[KeyPart::Str("draws"), utt]);
    let snr_idx = rng.gen_range(0..policy.snr_grid.len().max(1));
    let n = noises.len().max(1);
    let first = rng.gen_range(0..n);
    let two: f64 = rng.gen();
    let second_raw = rng.gen_range(0..n.saturating_sub(1).max(1));
    let crop_offset_seed: u64 = rng.gen();
    let seg_u: f64 = rng.gen();

    let noisy = gate < p_noisy && !noises.is_empty();
    let (noise_ids, snr) = if noisy {
        let mut ids = vec![noises[first].clip_id.clone()];
        if two < policy.p_two_noise && noises.len() >= 2 {
            // Second clip drawn from the remaining ones.
            let second = if second_raw >= first {
                second_raw + 1
            } else {
                second_raw
            };
            ids.push(noises[second].clip_id.clone());
        }
        let snr = policy.fixed_snr.unwrap_or_else(|| policy.snr_grid[snr_idx]);
        (ids, Some(snr))
    } else {
        (Vec::new(), None)
    };
    let corruption = if noisy { Corruption::Noisy } else { Corruption::Clean };
    let slack = trial
        .duration_s
        .map(|d| (d - policy.segment_len_s).max(0.0))
        .unwrap_or(0.0);
    ConditionAssignment {
        utt_id: trial.utt_id.clone(),
        corruption,
        noise_ids,
        snr,
        crop_offset_seed,
        segment: Segment {
            start_s: seg_u * slack,
            len_s: policy.segment_len_s,
        },
        four_class_label: FourClassLabel::encode(trial.authenticity, corruption),
    }
}

fn build_plan(manifest: &Manifest, policy: SamplingPolicy, gate_seed: u64, kind: String) -> Result<ConditionPlan> {
    policy.validate()?;
    let noises = catalog(manifest, &policy);
    let wants_noise = manifest.trials.iter().any(|t| policy.p_for(t.split) > 0.0);
    if wants_noise && noises.is_empty() {
        return Err(PlanError::EmptyNoiseCatalog);
    }
    let mut assignments: Vec<ConditionAssignment> = manifest
        .trials
        .par_iter()
        .map(|t| assign(t, policy.p_for(t.split), &policy, gate_seed, &noises))
        .collect();
    assignments.sort_by(|a, b| a.utt_id.cmp(&b.utt_id));
    let mut class_counts = [0usize; 4];
    for a in &assignments {
        class_counts[a.four_class_label.index()] += 1;
    }
    Ok(ConditionPlan {
        kind,
        policy,
        gate_seed,
        class_counts,
        config_digest: None,
        warnings: Vec::new(),
        assignments,
    })
}

/// Multi-condition plan: each trial is noisy with probability `p_noisy`.
pub fn plan_multicondition(manifest: &Manifest, policy: &SamplingPolicy) -> Result<ConditionPlan> {
    let mut policy = policy.clone();
    policy.fixed_snr = None;
    let gate = gate_key(policy.root_seed);
    build_plan(manifest, policy, gate, "multicondition".into())
}

/// Every trial corrupted at exactly `snr`, which must be on the grid.
pub fn plan_fixed_snr(manifest: &Manifest, snr: SnrDb, root_seed: u64) -> Result<ConditionPlan> {
    plan_fixed_snr_with(manifest, snr, &SamplingPolicy::training(root_seed))
}

pub fn plan_fixed_snr_with(manifest: &Manifest, snr: SnrDb, base: &SamplingPolicy) -> Result<ConditionPlan> {
    if !base.snr_grid.contains(&snr) {
        return Err(PlanError::SnrNotOnGrid(snr.value()));
    }
    let mut policy = base.clone();
    policy.p_noisy = 1.0;
    policy.p_noisy_by_split.clear();
    policy.fixed_snr = Some(snr);
    let gate = gate_key(policy.root_seed);
    build_plan(manifest, policy, gate, format!("fixed-snr:{snr}"))
}

/// Mixed evaluation plan: 80% noisy test trials, 20% noisy dev trials,
/// SNRs uniform over the grid. Training trials are left out.
pub fn plan_mixed_test(manifest: &Manifest, root_seed: u64) -> Result<ConditionPlan> {
    plan_mixed_test_with(manifest, &SamplingPolicy::training(root_seed))
}

pub fn plan_mixed_test_with(manifest: &Manifest, base: &SamplingPolicy) -> Result<ConditionPlan> {
    let eval = manifest.with_splits(&[Split::Test, Split::Dev]);
    let mut policy = base.clone();
    policy.fixed_snr = None;
    policy.p_noisy = MIXED_TEST_P_NOISY;
    policy.p_noisy_by_split = BTreeMap::from([(Split::Test, MIXED_TEST_P_NOISY), (Split::Dev, MIXED_DEV_P_NOISY)]);
    let gate = gate_key(policy.root_seed);
    let mut plan = build_plan(&eval, policy, gate, "mixed-test".into())?;
    if eval.trials_in(Split::Dev).next().is_none() {
        let msg = "dev split is empty; mixed-test plan covers test trials only".to_string();
        log::warn!("{msg}");
        plan.warnings.push(msg);
    }
    if eval.trials_in(Split::Test).next().is_none() {
        let msg = "test split is empty; mixed-test plan covers dev trials only".to_string();
        log::warn!("{msg}");
        plan.warnings.push(msg);
    }
    Ok(plan)
}

/// One multi-condition plan per fraction. Member `i` re-keys only the
/// Bernoulli gate with `(root_seed, i)`; noise, SNR and crop draws are
/// shared across members.
pub fn plan_pnoisy_sweep(manifest: &Manifest, fractions: &[f64], base: &SamplingPolicy) -> Result<Vec<ConditionPlan>> {
    fractions
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let mut policy = base.clone();
            policy.p_noisy = p;
            policy.p_noisy_by_split.clear();
            policy.fixed_snr = None;
            let gate = keyed_rng::derive_seed(policy.root_seed, &[KeyPart::Str("sweep-gate"), KeyPart::U64(i as u64)]);
            build_plan(manifest, policy, gate, format!("pnoisy-sweep:{i}:{p}"))
        })
        .collect()
}

/// Decoded noise clips at the working rate, keyed by clip id.
#[derive(Debug, Default)]
pub struct NoiseBank {
    clips: HashMap<String, AudioBuffer>,
}

impl NoiseBank {
    /// Loads every clip the plan references, resampled to `rate`.
    pub fn load(plan: &ConditionPlan, manifest: &Manifest, rate: u32) -> Result<Self> {
        let mut ids: Vec<&str> = plan
            .assignments
            .iter()
            .flat_map(|a| a.noise_ids.iter().map(String::as_str))
            .collect();
        ids.sort_unstable();
        ids.dedup();
        let clips = ids
            .par_iter()
            .map(|id| {
                let clip = manifest.find_noise(id).ok_or_else(|| PlanError::UnknownReference {
                    kind: "noise clip",
                    id: id.to_string(),
                })?;
                let buf = audio_io::resample(&audio_io::decode_wav(&clip.audio_path)?, rate)?;
                Ok((id.to_string(), buf))
            })
            .collect::<Result<HashMap<_, _>>>()?;
        Ok(Self { clips })
    }

    pub fn insert(&mut self, clip_id: impl Into<String>, buffer: AudioBuffer) {
        self.clips.insert(clip_id.into(), buffer);
    }

    pub fn get(&self, clip_id: &str) -> Option<&AudioBuffer> {
        self.clips.get(clip_id)
    }
}

/// Cuts `[start, start + len)` out of the speech, zero-padding past the end.
pub fn cut_segment(speech: &AudioBuffer, segment: Segment) -> Result<AudioBuffer> {
    let rate = speech.sample_rate() as f64;
    let start = (segment.start_s * rate).round() as usize;
    let len = (segment.len_s * rate).round() as usize;
    let src = speech.samples();
    let out: Vec<f64> = (start..start + len)
        .map(|i| src.get(i).copied().unwrap_or(0.0))
        .collect();
    Ok(AudioBuffer::new(out, speech.sample_rate())?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedTrial {
    pub audio: AudioBuffer,
    pub achieved_snr_db: Option<f64>,
    pub peak_rescale: f64,
}

/// Renders one assignment from already-decoded speech. Used both by
/// [`materialize`] and by in-memory (on-the-fly) consumers.
pub fn render_assignment(
    assignment: &ConditionAssignment,
    speech: &AudioBuffer,
    bank: &NoiseBank,
) -> Result<RenderedTrial> {
    let segment = cut_segment(speech, assignment.segment)?;
    let Some(snr) = assignment.snr else {
        return Ok(RenderedTrial {
            audio: segment,
            achieved_snr_db: None,
            peak_rescale: 1.0,
        });
    };
    let noises = assignment
        .noise_ids
        .iter()
        .map(|id| {
            bank.get(id).cloned().ok_or_else(|| PlanError::UnknownReference {
                kind: "noise clip",
                id: id.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mix = snr_mixer::mix_at_snr(&segment, &noises, snr, assignment.crop_offset_seed)?;
    Ok(RenderedTrial {
        audio: mix.mixed,
        achieved_snr_db: Some(mix.achieved_snr_db),
        peak_rescale: mix.peak_rescale,
    })
}

/// One line of the `labels.jsonl` sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub utt_id: String,
    pub split: Split,
    pub authenticity: Authenticity,
    pub corruption: Corruption,
    pub four_class_label: FourClassLabel,
    pub snr_db: Condition,
    pub achieved_snr_db: Option<f64>,
    pub peak_rescale: f64,
    pub noise_ids: Vec<String>,
    pub segment_start_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedTrial {
    pub utt_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MaterializeSummary {
    pub rendered: usize,
    pub skipped: Vec<SkippedTrial>,
}

pub const AUDIO_SUBDIR: &str = "audio";
pub const LABELS_FILE: &str = "labels.jsonl";
pub const PLAN_FILE: &str = "plan.json";
pub const SKIPPED_FILE: &str = "skipped.jsonl";

pub fn audio_path_for(out_dir: &Path, utt_id: &str) -> PathBuf {
    out_dir.join(AUDIO_SUBDIR).join(format!("{utt_id}.wav"))
}

enum Outcome {
    Rendered(LabelRecord),
    Skipped(SkippedTrial),
}

/// Renders every assignment to `out_dir`.
///
/// Writes `audio/<utt_id>.wav` (32-bit float), `labels.jsonl`, `plan.json`
/// and `skipped.jsonl`. Trials whose speech or noise turns out silent are
/// skipped with a logged reason rather than dropped.
pub fn materialize(plan: &ConditionPlan, manifest: &Manifest, out_dir: impl AsRef<Path>) -> Result<MaterializeSummary> {
    let out_dir = out_dir.as_ref();
    let rate = manifest.canonical_rate_hz;
    fs::create_dir_all(out_dir.join(AUDIO_SUBDIR)).map_err(io_err(out_dir))?;
    let bank = NoiseBank::load(plan, manifest, rate)?;

    let outcomes: Vec<Outcome> = plan
        .assignments
        .par_iter()
        .map(|a| -> Result<Outcome> {
            let trial = manifest
                .find_trial(&a.utt_id)
                .ok_or_else(|| PlanError::UnknownReference {
                    kind: "trial",
                    id: a.utt_id.clone(),
                })?;
            let speech = audio_io::resample(&audio_io::decode_wav(&trial.audio_path)?, rate)?;
            let rendered = match render_assignment(a, &speech, &bank) {
                Ok(r) => r,
                Err(PlanError::Mix(MixError::SilentInput(what))) => {
                    let reason = format!("silent {what} after segmenting");
                    log::warn!("skipping {}: {reason}", a.utt_id);
                    return Ok(Outcome::Skipped(SkippedTrial {
                        utt_id: a.utt_id.clone(),
                        reason,
                    }));
                }
                Err(e) => return Err(e),
            };
            audio_io::encode_wav(&rendered.audio, audio_path_for(out_dir, &a.utt_id), BitDepth::Float32)?;
            Ok(Outcome::Rendered(LabelRecord {
                utt_id: a.utt_id.clone(),
                split: trial.split,
                authenticity: trial.authenticity,
                corruption: a.corruption,
                four_class_label: a.four_class_label,
                snr_db: a.condition(),
                achieved_snr_db: rendered.achieved_snr_db,
                peak_rescale: rendered.peak_rescale,
                noise_ids: a.noise_ids.clone(),
                segment_start_s: a.segment.start_s,
            }))
        })
        .collect::<Result<_>>()?;

    let mut labels = Vec::new();
    let mut skipped = Vec::new();
    for o in outcomes {
        match o {
            Outcome::Rendered(l) => labels.push(l),
            Outcome::Skipped(s) => skipped.push(s),
        }
    }
    labels.sort_by(|a, b| a.utt_id.cmp(&b.utt_id));
    skipped.sort_by(|a, b| a.utt_id.cmp(&b.utt_id));
    let digest = plan.config_digest.as_deref();
    write_jsonl(&out_dir.join(LABELS_FILE), digest, &labels)?;
    write_jsonl(&out_dir.join(SKIPPED_FILE), digest, &skipped)?;
    plan.write(out_dir.join(PLAN_FILE))?;
    Ok(MaterializeSummary {
        rendered: labels.len(),
        skipped,
    })
}

/// Leading record of sidecar files that carry a config digest.
#[derive(Serialize, Deserialize)]
struct SidecarHeader {
    kind: String,
    config_digest: String,
}

fn write_jsonl<T: Serialize>(path: &Path, digest: Option<&str>, rows: &[T]) -> Result<()> {
    let mut buf = Vec::new();
    if let Some(d) = digest {
        serde_json::to_writer(
            &mut buf,
            &SidecarHeader {
                kind: "header".into(),
                config_digest: d.to_string(),
            },
        )?;
        buf.push(b'\n');
    }
    for r in rows {
        serde_json::to_writer(&mut buf, r)?;
        buf.push(b'\n');
    }
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(&buf).map_err(io_err(path))
}

/// Reads a `labels.jsonl` sidecar, skipping its optional header record.
pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<LabelRecord>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .filter(|l| serde_json::from_str::<SidecarHeader>(l).map_or(true, |h| h.kind != "header"))
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}

/// Config digest recorded in a sidecar header, if any.
pub fn sidecar_digest(path: impl AsRef<Path>) -> Result<Option<String>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(text
        .lines()
        .next()
        .and_then(|l| serde_json::from_str::<SidecarHeader>(l).ok())
        .filter(|h| h.kind == "header")
        .map(|h| h.config_digest))
}
