//! Library-level building blocks behind the CLI verbs: corpus scanning,
//! rendered-split loading, and the LFCC baseline's train/score loop.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::audio_io::{self, AudioError};
use crate::baseline_features::{self, FeatureError, LfccConfig, LfccExtractor, ModelFile, ScorerModel, TrainConfig};
use crate::condition_sampler::{self, Corruption, LabelRecord, PlanError};
use crate::corpus_manifest::{self, Authenticity, CategoryAliases, Manifest, ManifestError, ProtocolLayout, Split};
use crate::metrics::{MetricsError, ScoreFile, ScoreRow, Task, Truth};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error("model was trained for {model} but {requested} was requested")]
    TaskMismatch { model: &'static str, requested: Task },
    #[error("split directory {0} has no rendered trials")]
    EmptySplit(String),
}

pub type Result<T> = std::result::Result<T, PipelineError>;

/// Builds a manifest from protocol files and a noise tree. Trials and clips
/// are sorted by id so the result does not depend on input order.
pub fn scan_corpus(
    speech_root: &Path,
    noise_root: &Path,
    protocols: &[(Split, PathBuf)],
    layout: &ProtocolLayout,
    aliases: &CategoryAliases,
) -> Result<Manifest> {
    let layout = ProtocolLayout {
        audio_dir: speech_root.to_path_buf(),
        ..layout.clone()
    };
    let mut trials = Vec::new();
    for (split, path) in protocols {
        trials.extend(corpus_manifest::parse_protocol(path, *split, &layout)?);
    }
    trials.sort_by(|a, b| a.utt_id.cmp(&b.utt_id));
    if let Some(w) = trials.windows(2).find(|w| w[0].utt_id == w[1].utt_id) {
        return Err(ManifestError::DuplicateUttId {
            utt_id: w[0].utt_id.clone(),
            line: 0,
        }
        .into());
    }
    corpus_manifest::probe_trial_durations(&mut trials)?;
    let mut noises = corpus_manifest::scan_noise_catalog(noise_root, aliases)?;
    noises.sort_by(|a, b| a.clip_id.cmp(&b.clip_id));
    let mut manifest = Manifest::new(trials, noises);
    manifest.record_digests()?;
    Ok(manifest)
}

/// A materialized split: its directory and sorted label sidecar.
#[derive(Debug, Clone)]
pub struct RenderedSplit {
    pub dir: PathBuf,
    pub labels: Vec<LabelRecord>,
}

impl RenderedSplit {
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        let labels = condition_sampler::read_labels(dir.join(condition_sampler::LABELS_FILE))?;
        if labels.is_empty() {
            return Err(PipelineError::EmptySplit(dir.display().to_string()));
        }
        Ok(RenderedSplit { dir, labels })
    }

    pub fn audio_path(&self, utt_id: &str) -> PathBuf {
        condition_sampler::audio_path_for(&self.dir, utt_id)
    }

    /// Utterance summary vectors in label order, extracted in parallel.
    pub fn summaries(&self, lfcc: &LfccConfig) -> Result<Vec<Vec<f64>>> {
        self.labels
            .par_iter()
            .map_init(
                || None::<(u32, LfccExtractor)>,
                |cache, l| -> Result<Vec<f64>> {
                    let audio = audio_io::decode_wav(self.audio_path(&l.utt_id))?;
                    let rate = audio.sample_rate();
                    if cache.as_ref().is_none_or(|(r, _)| *r != rate) {
                        *cache = Some((rate, LfccExtractor::new(lfcc, rate)?));
                    }
                    let (_, ex) = cache.as_ref().expect("initialized above");
                    Ok(ex.extract(audio.samples())?.summary())
                },
            )
            .collect()
    }
}

/// Ground truth of a rendered trial under `task`.
pub fn truth_for(label: &LabelRecord, task: Task) -> Truth {
    match task {
        Task::BinarySpoof => Truth::Binary(label.authenticity == Authenticity::Bonafide),
        Task::BinaryNoise => Truth::Binary(label.corruption == Corruption::Clean),
        Task::FourClass => Truth::FourClass(label.four_class_label),
    }
}

/// Trains the LFCC baseline on a rendered split.
pub fn train_baseline(split: &RenderedSplit, task: Task, lfcc: &LfccConfig, train: &TrainConfig) -> Result<ModelFile> {
    let features = split.summaries(lfcc)?;
    let model = match task {
        Task::FourClass => {
            let labels: Vec<_> = split.labels.iter().map(|l| l.four_class_label).collect();
            ScorerModel::train_four_class(&features, &labels, train)?
        }
        Task::BinarySpoof | Task::BinaryNoise => {
            let labels: Vec<bool> = split
                .labels
                .iter()
                .map(|l| matches!(truth_for(l, task), Truth::Binary(true)))
                .collect();
            ScorerModel::Binary {
                scorer: baseline_features::train_scorer(&features, &labels, train)?,
            }
        }
    };
    Ok(ModelFile {
        config_digest: None,
        lfcc: lfcc.clone(),
        model,
    })
}

/// Scores every trial of a rendered split; rows follow label (utt_id) order.
pub fn score_split(model: &ModelFile, split: &RenderedSplit, task: Task) -> Result<ScoreFile> {
    let model_kind = match model.model {
        ScorerModel::Binary { .. } => "a binary task",
        ScorerModel::FourClass { .. } => "four_class",
    };
    if matches!(model.model, ScorerModel::FourClass { .. }) != (task == Task::FourClass) {
        return Err(PipelineError::TaskMismatch {
            model: model_kind,
            requested: task,
        });
    }
    let features = split.summaries(&model.lfcc)?;
    let rows = split
        .labels
        .iter()
        .zip(&features)
        .map(|(l, f)| {
            Ok(ScoreRow {
                utt_id: l.utt_id.clone(),
                task,
                condition: l.snr_db,
                truth: truth_for(l, task),
                scores: model.model.score(f)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScoreFile::new(rows)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::condition_sampler::{materialize, plan_fixed_snr, Condition};
    use crate::fixture::{write_fixture, FixtureSpec};
    use crate::snr_mixer::SnrDb;

    #[test]
    fn scan_then_score_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let spec = FixtureSpec {
            n_train: 6,
            n_dev: 0,
            n_test: 4,
            clips_per_category: 1,
            noise_duration_s: 3.0,
            ..FixtureSpec::default()
        };
        let fx = write_fixture(dir.path().join("corpus"), &spec).unwrap();
        let manifest = scan_corpus(
            &fx.speech_dir,
            &fx.noise_dir,
            &fx.protocols,
            &ProtocolLayout::default(),
            &CategoryAliases::default(),
        )
        .unwrap();
        assert_eq!(manifest.trials.len(), 10);
        assert_eq!(manifest.noises.len(), 4);
        assert!(manifest.trials.windows(2).all(|w| w[0].utt_id < w[1].utt_id));
        assert_eq!(manifest.trials[0].duration_s, Some(2.5));

        let plan = plan_fixed_snr(&manifest.with_splits(&[Split::Train]), SnrDb::new(0.0).unwrap(), 1).unwrap();
        let out = dir.path().join("split");
        materialize(&plan, &manifest, &out).unwrap();
        let split = RenderedSplit::load(&out).unwrap();
        assert_eq!(split.labels.len(), 6);
        let model = train_baseline(
            &split,
            Task::BinarySpoof,
            &LfccConfig::default(),
            &TrainConfig::default(),
        )
        .unwrap();
        let scores = score_split(&model, &split, Task::BinarySpoof).unwrap();
        assert_eq!(scores.rows.len(), 6);
        assert!(scores
            .rows
            .iter()
            .all(|r| r.condition == Condition::Snr(SnrDb::new(0.0).unwrap())));
        assert!(matches!(
            score_split(&model, &split, Task::FourClass),
            Err(PipelineError::TaskMismatch { .. })
        ));
    }
}
