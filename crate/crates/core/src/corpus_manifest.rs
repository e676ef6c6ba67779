//! Trial protocols, noise catalogs and the line-delimited manifest file.
//!
//! A manifest file starts with one header object followed by one JSON object
//! per record, discriminated by `kind` (`"trial"` or `"noise"`). Content
//! digests of every referenced audio file are stored in the header so a
//! changed file on disk can be detected later.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use walkdir::WalkDir;

use crate::audio_io::{self, AudioError, CANONICAL_RATE_HZ};

pub const MANIFEST_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("{path}:{line}: malformed protocol line: {reason}")]
    MalformedLine { path: String, line: usize, reason: String },
    #[error("{path}:{line}: unknown label {label:?}")]
    UnknownLabel { path: String, line: usize, label: String },
    #[error("duplicate utterance id {utt_id:?} (line {line})")]
    DuplicateUttId { utt_id: String, line: usize },
    #[error("no audio files found under {0}")]
    EmptyCatalog(String),
    #[error("manifest line {line}: {reason}")]
    SchemaViolation { line: usize, reason: String },
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Audio(#[from] AudioError),
}

pub type Result<T> = std::result::Result<T, ManifestError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ManifestError + '_ {
    move |source| ManifestError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Authenticity {
    Bonafide,
    Spoof,
}

impl Authenticity {
    pub fn parse_label(label: &str) -> Option<Self> {
        match label.to_ascii_lowercase().as_str() {
            "bonafide" | "bona-fide" => Some(Self::Bonafide),
            "spoof" => Some(Self::Spoof),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Bonafide => "bonafide",
            Self::Spoof => "spoof",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Train => "train",
            Self::Dev => "dev",
            Self::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "train" => Ok(Self::Train),
            "dev" => Ok(Self::Dev),
            "test" | "eval" => Ok(Self::Test),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub utt_id: String,
    pub audio_path: PathBuf,
    pub authenticity: Authenticity,
    pub split: Split,
    /// Filled in by [`probe_trial_durations`]; needed to place segments.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<f64>,
}

/// Ambient noise class. Directory names outside the alias table are kept
/// verbatim as `Other`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NoiseCategory {
    Domestic,
    Office,
    Outdoor,
    Transport,
    Other(String),
}

impl fmt::Display for NoiseCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Domestic => f.write_str("domestic"),
            Self::Office => f.write_str("office"),
            Self::Outdoor => f.write_str("outdoor"),
            Self::Transport => f.write_str("transport"),
            Self::Other(name) => write!(f, "other:{name}"),
        }
    }
}

impl From<&str> for NoiseCategory {
    fn from(s: &str) -> Self {
        match s {
            "domestic" => Self::Domestic,
            "office" => Self::Office,
            "outdoor" => Self::Outdoor,
            "transport" => Self::Transport,
            other => Self::Other(other.strip_prefix("other:").unwrap_or(other).to_string()),
        }
    }
}

impl Serialize for NoiseCategory {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for NoiseCategory {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(NoiseCategory::from(s.as_str()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseClip {
    pub clip_id: String,
    pub audio_path: PathBuf,
    pub category: NoiseCategory,
    pub duration_s: f64,
}

/// Maps case-folded directory names onto the four named noise classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryAliases {
    pub domestic: Vec<String>,
    pub office: Vec<String>,
    pub outdoor: Vec<String>,
    pub transport: Vec<String>,
}

impl Default for CategoryAliases {
    fn default() -> Self {
        let v = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect();
        Self {
            domestic: v(&[
                "domestic",
                "home",
                "household",
                "kitchen",
                "livingroom",
                "washer",
                "vacuumcleaner",
            ]),
            office: v(&["office", "typing", "copymachine", "meeting"]),
            outdoor: v(&["outdoor", "street", "park", "neighbor", "babble", "cafe", "restaurant"]),
            transport: v(&[
                "transport",
                "traffic",
                "car",
                "bus",
                "train",
                "metro",
                "airport",
                "station",
                "airconditioner",
            ]),
        }
    }
}

impl CategoryAliases {
    pub fn classify(&self, dir_name: &str) -> NoiseCategory {
        let folded = dir_name.to_lowercase();
        let hit = |list: &[String]| list.iter().any(|a| a.to_lowercase() == folded);
        if hit(&self.domestic) {
            NoiseCategory::Domestic
        } else if hit(&self.office) {
            NoiseCategory::Office
        } else if hit(&self.outdoor) {
            NoiseCategory::Outdoor
        } else if hit(&self.transport) {
            NoiseCategory::Transport
        } else {
            NoiseCategory::Other(dir_name.to_string())
        }
    }
}

/// Column layout of a whitespace-separated trial protocol.
///
/// Negative column indices count from the end of the line (`-1` is the last
/// column). Defaults follow the ASVspoof layout: speaker, utterance key, ...,
/// label last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProtocolLayout {
    pub key_col: i32,
    pub label_col: i32,
    /// When set, every line must have exactly this many columns.
    pub expected_columns: Option<usize>,
    pub audio_dir: PathBuf,
    pub audio_ext: String,
}

impl Default for ProtocolLayout {
    fn default() -> Self {
        Self {
            key_col: 1,
            label_col: -1,
            expected_columns: None,
            audio_dir: PathBuf::new(),
            audio_ext: "wav".into(),
        }
    }
}

fn resolve_col(col: i32, len: usize) -> Option<usize> {
    if col >= 0 {
        let c = col as usize;
        (c < len).then_some(c)
    } else {
        let back = col.unsigned_abs() as usize;
        (back <= len).then(|| len - back)
    }
}

/// Parses a protocol file into trial records, one per non-empty line.
pub fn parse_protocol(path: impl AsRef<Path>, split: Split, layout: &ProtocolLayout) -> Result<Vec<TrialRecord>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_protocol_str(&text, &path.display().to_string(), split, layout)
}

pub fn parse_protocol_str(text: &str, source: &str, split: Split, layout: &ProtocolLayout) -> Result<Vec<TrialRecord>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let cols: Vec<&str> = raw.split_whitespace().collect();
        if cols.is_empty() {
            continue;
        }
        let malformed = |reason: String| ManifestError::MalformedLine {
            path: source.to_string(),
            line: line_no,
            reason,
        };
        if let Some(n) = layout.expected_columns {
            if cols.len() != n {
                return Err(malformed(format!("expected {n} columns, found {}", cols.len())));
            }
        }
        let key = resolve_col(layout.key_col, cols.len())
            .ok_or_else(|| malformed(format!("no key column {} in {} columns", layout.key_col, cols.len())))?;
        let label = resolve_col(layout.label_col, cols.len()).ok_or_else(|| {
            malformed(format!(
                "no label column {} in {} columns",
                layout.label_col,
                cols.len()
            ))
        })?;
        if key == label {
            return Err(malformed("key and label resolve to the same column".into()));
        }
        let authenticity = Authenticity::parse_label(cols[label]).ok_or_else(|| ManifestError::UnknownLabel {
            path: source.to_string(),
            line: line_no,
            label: cols[label].to_string(),
        })?;
        let utt_id = cols[key].to_string();
        if !seen.insert(utt_id.clone()) {
            return Err(ManifestError::DuplicateUttId { utt_id, line: line_no });
        }
        let audio_path = layout.audio_dir.join(format!("{utt_id}.{}", layout.audio_ext));
        out.push(TrialRecord {
            utt_id,
            audio_path,
            authenticity,
            split,
            duration_s: None,
        });
    }
    Ok(out)
}

fn is_wav(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("wav"))
}

/// Lists every `.wav` under `root` in lexicographic order of relative path.
///
/// The category is taken from the immediate parent directory; files directly
/// under `root` are `other:uncategorized`.
pub fn scan_noise_catalog(root: impl AsRef<Path>, aliases: &CategoryAliases) -> Result<Vec<NoiseClip>> {
    let root = root.as_ref();
    let mut files: Vec<PathBuf> = Vec::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| {
            let path = e.path().unwrap_or(root).display().to_string();
            ManifestError::Io {
                path,
                source: e.into_io_error().unwrap_or_else(|| std::io::Error::other("walk error")),
            }
        })?;
        if entry.file_type().is_file() && is_wav(entry.path()) {
            files.push(entry.into_path());
        }
    }
    if files.is_empty() {
        return Err(ManifestError::EmptyCatalog(root.display().to_string()));
    }
    files.sort();
    files
        .par_iter()
        .map(|path| {
            let rel = path.strip_prefix(root).unwrap_or(path);
            let clip_id = rel
                .with_extension("")
                .components()
                .map(|c| c.as_os_str().to_string_lossy().into_owned())
                .collect::<Vec<_>>()
                .join("/");
            let category = match rel.parent().and_then(|p| p.file_name()) {
                Some(dir) => aliases.classify(&dir.to_string_lossy()),
                None => NoiseCategory::Other("uncategorized".into()),
            };
            let duration_s = audio_io::probe_duration(path)?;
            if duration_s <= 0.0 {
                return Err(AudioError::EmptyPayload(path.display().to_string()).into());
            }
            Ok(NoiseClip {
                clip_id,
                audio_path: path.clone(),
                category,
                duration_s,
            })
        })
        .collect()
}

/// Fills `duration_s` for every trial from its WAVE header.
pub fn probe_trial_durations(trials: &mut [TrialRecord]) -> Result<()> {
    trials.par_iter_mut().try_for_each(|t| {
        t.duration_s = Some(audio_io::probe_duration(&t.audio_path)?);
        Ok(())
    })
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Creation timestamp for output headers: `SOURCE_DATE_EPOCH` when set,
/// otherwise the Unix epoch, so repeated runs produce identical files.
pub fn reproducible_timestamp() -> String {
    let secs = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.trim().parse::<i64>().ok())
        .unwrap_or(0);
    chrono::DateTime::from_timestamp(secs, 0)
        .unwrap_or_default()
        .format("%Y-%m-%dT%H:%M:%SZ")
        .to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestHeader {
    pub format_version: u32,
    pub created_utc: String,
    pub canonical_rate_hz: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_digest: Option<String>,
    #[serde(default)]
    pub source_digests: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub trials: Vec<TrialRecord>,
    pub noises: Vec<NoiseClip>,
    pub source_digests: BTreeMap<String, String>,
    pub created_utc: String,
    pub canonical_rate_hz: u32,
    pub config_digest: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DigestMismatch {
    pub path: String,
    pub recorded: String,
    /// `None` when the file can no longer be read.
    pub current: Option<String>,
}

impl Manifest {
    pub fn new(trials: Vec<TrialRecord>, noises: Vec<NoiseClip>) -> Self {
        Self {
            trials,
            noises,
            source_digests: BTreeMap::new(),
            created_utc: reproducible_timestamp(),
            canonical_rate_hz: CANONICAL_RATE_HZ,
            config_digest: None,
        }
    }

    /// Hashes every referenced audio file (in parallel).
    pub fn record_digests(&mut self) -> Result<()> {
        let paths: Vec<PathBuf> = self
            .trials
            .iter()
            .map(|t| t.audio_path.clone())
            .chain(self.noises.iter().map(|n| n.audio_path.clone()))
            .collect();
        let digests: Vec<(String, String)> = paths
            .par_iter()
            .map(|p| Ok((p.display().to_string(), file_digest(p)?)))
            .collect::<Result<_>>()?;
        self.source_digests = digests.into_iter().collect();
        Ok(())
    }

    pub fn verify_digests(&self) -> Vec<DigestMismatch> {
        self.source_digests
            .iter()
            .filter_map(|(path, recorded)| {
                let current = file_digest(Path::new(path)).ok();
                (current.as_deref() != Some(recorded.as_str())).then(|| DigestMismatch {
                    path: path.clone(),
                    recorded: recorded.clone(),
                    current,
                })
            })
            .collect()
    }

    pub fn trials_in(&self, split: Split) -> impl Iterator<Item = &TrialRecord> {
        self.trials.iter().filter(move |t| t.split == split)
    }

    /// Copy restricted to the given splits; the noise catalog is kept whole.
    pub fn with_splits(&self, splits: &[Split]) -> Manifest {
        Manifest {
            trials: self
                .trials
                .iter()
                .filter(|t| splits.contains(&t.split))
                .cloned()
                .collect(),
            ..self.clone()
        }
    }

    pub fn find_trial(&self, utt_id: &str) -> Option<&TrialRecord> {
        self.trials.iter().find(|t| t.utt_id == utt_id)
    }

    pub fn find_noise(&self, clip_id: &str) -> Option<&NoiseClip> {
        self.noises.iter().find(|n| n.clip_id == clip_id)
    }

    pub fn header(&self) -> ManifestHeader {
        ManifestHeader {
            format_version: MANIFEST_FORMAT_VERSION,
            created_utc: self.created_utc.clone(),
            canonical_rate_hz: self.canonical_rate_hz,
            config_digest: self.config_digest.clone(),
            source_digests: self.source_digests.clone(),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum ManifestLine {
    Header(ManifestHeader),
    Trial(TrialRecord),
    Noise(NoiseClip),
}

pub fn write_manifest(manifest: &Manifest, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let mut emit = |line: &ManifestLine| -> Result<()> {
        let s = serde_json::to_string(line).expect("manifest records serialize");
        writeln!(w, "{s}").map_err(io_err(path))
    };
    emit(&ManifestLine::Header(manifest.header()))?;
    for t in &manifest.trials {
        emit(&ManifestLine::Trial(t.clone()))?;
    }
    for n in &manifest.noises {
        emit(&ManifestLine::Noise(n.clone()))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut header: Option<ManifestHeader> = None;
    let mut trials = Vec::new();
    let mut noises = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let violation = |reason: String| ManifestError::SchemaViolation { line: line_no, reason };
        let parsed: ManifestLine = serde_json::from_str(&line).map_err(|e| violation(e.to_string()))?;
        match (parsed, header.is_some()) {
            (ManifestLine::Header(h), false) => {
                if h.format_version != MANIFEST_FORMAT_VERSION {
                    return Err(violation(format!("unsupported format_version {}", h.format_version)));
                }
                header = Some(h);
            }
            (ManifestLine::Header(_), true) => return Err(violation("second header".into())),
            (_, false) => return Err(violation("first line must be the header".into())),
            (ManifestLine::Trial(t), true) => {
                if !seen.insert(t.utt_id.clone()) {
                    return Err(ManifestError::DuplicateUttId {
                        utt_id: t.utt_id,
                        line: line_no,
                    });
                }
                trials.push(t);
            }
            (ManifestLine::Noise(n), true) => {
                if n.duration_s.is_nan() || n.duration_s <= 0.0 {
                    return Err(violation(format!("noise {} has non-positive duration", n.clip_id)));
                }
                noises.push(n);
            }
        }
    }
    let h = header.ok_or(ManifestError::SchemaViolation {
        line: 1,
        reason: "missing header".into(),
    })?;
    Ok(Manifest {
        trials,
        noises,
        source_digests: h.source_digests,
        created_utc: h.created_utc,
        canonical_rate_hz: h.canonical_rate_hz,
        config_digest: h.config_digest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio_io::{encode_wav, AudioBuffer, BitDepth};

    fn layout0() -> ProtocolLayout {
        ProtocolLayout {
            key_col: 0,
            ..ProtocolLayout::default()
        }
    }

    #[test]
    fn protocol_field_mapping() {
        let recs = parse_protocol_str("LA_0001 x - A07 bonafide\n", "p", Split::Train, &layout0()).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].utt_id, "LA_0001");
        assert_eq!(recs[0].authenticity, Authenticity::Bonafide);
        assert_eq!(recs[0].audio_path, PathBuf::from("LA_0001.wav"));
    }

    #[test]
    fn protocol_rejections() {
        let e = parse_protocol_str("a genuine\n", "p", Split::Dev, &layout0()).unwrap_err();
        assert!(matches!(e, ManifestError::UnknownLabel { line: 1, .. }));
        let e = parse_protocol_str("a spoof\n\nb bonafide\na spoof\n", "p", Split::Dev, &layout0()).unwrap_err();
        assert!(matches!(e, ManifestError::DuplicateUttId { line: 4, .. }));
        let e = parse_protocol_str("a spoof\nlonely\n", "p", Split::Dev, &layout0()).unwrap_err();
        assert!(matches!(e, ManifestError::MalformedLine { line: 2, .. }));
        let strict = ProtocolLayout {
            expected_columns: Some(5),
            ..ProtocolLayout::default()
        };
        let e = parse_protocol_str("S LA_1 - - spoof\nS LA_2 - spoof\n", "p", Split::Dev, &strict).unwrap_err();
        assert!(matches!(e, ManifestError::MalformedLine { line: 2, .. }));
    }

    #[test]
    fn protocol_preserves_order() {
        let text: String = (0..50)
            .map(|i| {
                format!(
                    "SPK LA_{i:04} - A0{} {}\n",
                    i % 7,
                    if i % 3 == 0 { "bonafide" } else { "spoof" }
                )
            })
            .collect();
        let recs = parse_protocol_str(&text, "p", Split::Test, &ProtocolLayout::default()).unwrap();
        assert_eq!(recs.len(), 50);
        for (i, r) in recs.iter().enumerate() {
            assert_eq!(r.utt_id, format!("LA_{i:04}"));
        }
    }

    fn write_tone(path: &Path, len: usize) {
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        let b = AudioBuffer::new((0..len).map(|i| (i as f64 * 0.1).sin() * 0.1).collect(), 16000).unwrap();
        encode_wav(&b, path, BitDepth::Pcm16).unwrap();
    }

    #[test]
    fn catalog_scan() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path();
        write_tone(&root.join("Office/n1.wav"), 1600);
        write_tone(&root.join("Kitchen/k.wav"), 800);
        write_tone(&root.join("Wind/w.WAV"), 800);
        write_tone(&root.join("loose.wav"), 800);
        fs::write(root.join("Office/readme.txt"), "x").unwrap();
        let clips = scan_noise_catalog(root, &CategoryAliases::default()).unwrap();
        let ids: Vec<_> = clips.iter().map(|c| c.clip_id.as_str()).collect();
        assert_eq!(ids, ["Kitchen/k", "Office/n1", "Wind/w", "loose"]);
        assert_eq!(clips[1].category, NoiseCategory::Office);
        assert!((clips[1].duration_s - 0.1).abs() < 1e-12);
        assert_eq!(clips[0].category, NoiseCategory::Domestic);
        assert_eq!(clips[2].category, NoiseCategory::Other("Wind".into()));
        assert_eq!(clips[3].category, NoiseCategory::Other("uncategorized".into()));

        let again = scan_noise_catalog(root, &CategoryAliases::default()).unwrap();
        assert_eq!(clips, again);
    }

    #[test]
    fn empty_catalog() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir_all(dir.path().join("office")).unwrap();
        assert!(matches!(
            scan_noise_catalog(dir.path(), &CategoryAliases::default()),
            Err(ManifestError::EmptyCatalog(_))
        ));
    }

    fn sample_manifest() -> Manifest {
        let trials = (0..3)
            .map(|i| TrialRecord {
                utt_id: format!("U{i}"),
                audio_path: PathBuf::from(format!("speech/U{i}.wav")),
                authenticity: if i == 0 {
                    Authenticity::Bonafide
                } else {
                    Authenticity::Spoof
                },
                split: Split::Train,
                duration_s: (i == 1).then_some(2.5),
            })
            .collect();
        let noises = vec![
            NoiseClip {
                clip_id: "office/a".into(),
                audio_path: PathBuf::from("noise/office/a.wav"),
                category: NoiseCategory::Office,
                duration_s: 3.0,
            },
            NoiseClip {
                clip_id: "wind/b".into(),
                audio_path: PathBuf::from("noise/wind/b.wav"),
                category: NoiseCategory::Other("wind".into()),
                duration_s: 1.5,
            },
        ];
        let mut m = Manifest::new(trials, noises);
        m.source_digests.insert("speech/U0.wav".into(), "ab".into());
        m
    }

    #[test]
    fn manifest_round_trip_and_line_count() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.jsonl");
        let m = sample_manifest();
        write_manifest(&m, &p).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 6);
        assert!(text.lines().next().unwrap().contains("\"kind\":\"header\""));
        assert_eq!(read_manifest(&p).unwrap(), m);
    }

    #[test]
    fn schema_violation_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.jsonl");
        write_manifest(&sample_manifest(), &p).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        let broken: Vec<String> = text
            .lines()
            .enumerate()
            .map(|(i, l)| {
                if i == 2 {
                    l.replace("\"authenticity\":\"spoof\",", "")
                } else {
                    l.to_string()
                }
            })
            .collect();
        fs::write(&p, broken.join("\n")).unwrap();
        match read_manifest(&p) {
            Err(ManifestError::SchemaViolation { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn digest_mismatch_detected() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.wav");
        write_tone(&a, 100);
        let trial = TrialRecord {
            utt_id: "a".into(),
            audio_path: a.clone(),
            authenticity: Authenticity::Spoof,
            split: Split::Test,
            duration_s: None,
        };
        let mut m = Manifest::new(vec![trial], vec![]);
        m.record_digests().unwrap();
        assert!(m.verify_digests().is_empty());
        write_tone(&a, 120);
        let bad = m.verify_digests();
        assert_eq!(bad.len(), 1);
        assert!(bad[0].current.is_some());
    }

    #[test]
    fn category_serde() {
        let s = serde_json::to_string(&NoiseCategory::Other("Wind".into())).unwrap();
        assert_eq!(s, "\"other:Wind\"");
        let back: NoiseCategory = serde_json::from_str(&s).unwrap();
        assert_eq!(back, NoiseCategory::Other("Wind".into()));
        let t: NoiseCategory = serde_json::from_str("\"transport\"").unwrap();
        assert_eq!(t, NoiseCategory::Transport);
    }
}
