//! Detector scoring: ROC-AUC, EER, accuracy, confusion matrices and
//! macro-F1, aggregated per evaluation condition.
//!
//! Conventions:
//! - Binary scores are "higher = positive". Positive is `bonafide` for
//!   `binary_spoof` and `clean` for `binary_noise`.
//! - A trial is accepted at threshold `t` when `score >= t`.
//!   FAR(t) = fraction of negatives with score >= t,
//!   FRR(t) = fraction of positives with score < t.
//! - The EER sweep visits every distinct score plus `+inf` and linearly
//!   interpolates between the two sweep points where FAR - FRR changes sign.
//! - Binary accuracy uses the condition's own EER threshold unless a fixed
//!   threshold is supplied. Four-class decisions are argmax (lowest index wins
//!   ties).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::condition_sampler::{Condition, FourClassLabel};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("need both classes; got {positives} positive and {negatives} negative trials")]
    SingleClass { positives: usize, negatives: usize },
    #[error("score file line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("duplicate trial: utt_id {0:?} appears twice under one condition")]
    DuplicateUttId(String),
    #[error("score file mixes tasks {0} and {1}")]
    MixedTasks(Task, Task),
    #[error("operation needs {expected} rows, got {got}")]
    WrongTask { expected: Task, got: Task },
    #[error("no rows")]
    Empty,
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, MetricsError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    #[default]
    BinarySpoof,
    BinaryNoise,
    FourClass,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::BinarySpoof => "binary_spoof",
            Task::BinaryNoise => "binary_noise",
            Task::FourClass => "four_class",
        }
    }

    pub fn parse(s: &str) -> Option<Task> {
        match s {
            "binary_spoof" => Some(Task::BinarySpoof),
            "binary_noise" => Some(Task::BinaryNoise),
            "four_class" => Some(Task::FourClass),
            _ => None,
        }
    }

    pub fn n_scores(self) -> usize {
        match self {
            Task::FourClass => 4,
            _ => 1,
        }
    }
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Truth {
    /// `true` for the positive class (bonafide / clean).
    Binary(bool),
    FourClass(FourClassLabel),
}

impl Truth {
    pub fn parse(task: Task, s: &str) -> Option<Truth> {
        match task {
            Task::BinarySpoof => match s {
                "bonafide" => Some(Truth::Binary(true)),
                "spoof" => Some(Truth::Binary(false)),
                _ => None,
            },
            Task::BinaryNoise => match s {
                "clean" => Some(Truth::Binary(true)),
                "noisy" => Some(Truth::Binary(false)),
                _ => None,
            },
            Task::FourClass => FourClassLabel::ALL
                .iter()
                .copied()
                .find(|l| l.name() == s || l.index().to_string() == s)
                .map(Truth::FourClass),
        }
    }

    pub fn label(self, task: Task) -> &'static str {
        match (self, task) {
            (Truth::Binary(true), Task::BinaryNoise) => "clean",
            (Truth::Binary(false), Task::BinaryNoise) => "noisy",
            (Truth::Binary(true), _) => "bonafide",
            (Truth::Binary(false), _) => "spoof",
            (Truth::FourClass(l), _) => l.name(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub utt_id: String,
    pub task: Task,
    pub condition: Condition,
    pub truth: Truth,
    pub scores: Vec<f64>,
}

/// Detector output: one row per trial. A trial is an utterance under one
/// condition, so `(utt_id, condition)` is unique; the same utterance may
/// appear once per condition.
///
/// On disk: tab-separated with header `utt_id task condition truth score`.
/// Four-class rows carry four comma-separated scores in label order. Lines
/// starting with `#` are comments; `# config_digest=<hex>` is preserved.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreFile {
    pub rows: Vec<ScoreRow>,
    pub config_digest: Option<String>,
}

pub const SCORE_HEADER: &str = "utt_id\ttask\tcondition\ttruth\tscore";

impl ScoreFile {
    pub fn new(rows: Vec<ScoreRow>) -> Result<Self> {
        let f = ScoreFile {
            rows,
            config_digest: None,
        };
        f.validate()?;
        Ok(f)
    }

    fn validate(&self) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        let first = self.rows.first().map(|r| r.task);
        for (i, r) in self.rows.iter().enumerate() {
            if !seen.insert((r.utt_id.as_str(), r.condition)) {
                return Err(MetricsError::DuplicateUttId(r.utt_id.clone()));
            }
            if let Some(t) = first {
                if r.task != t {
                    return Err(MetricsError::MixedTasks(t, r.task));
                }
            }
            let bad = |reason: String| MetricsError::Parse { line: i + 2, reason };
            if r.scores.len() != r.task.n_scores() {
                return Err(bad(format!(
                    "{} expects {} score(s), got {}",
                    r.task,
                    r.task.n_scores(),
                    r.scores.len()
                )));
            }
            if r.scores.iter().any(|s| !s.is_finite()) {
                return Err(bad("non-finite score".into()));
            }
            let truth_ok = matches!(
                (r.task, r.truth),
                (Task::FourClass, Truth::FourClass(_)) | (Task::BinarySpoof | Task::BinaryNoise, Truth::Binary(_))
            );
            if !truth_ok {
                return Err(bad("truth label does not match task".into()));
            }
        }
        Ok(())
    }

    pub fn task(&self) -> Option<Task> {
        self.rows.first().map(|r| r.task)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        let mut config_digest = None;
        let mut header_seen = false;
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(d) = comment.trim().strip_prefix("config_digest=") {
                    config_digest = Some(d.trim().to_string());
                }
                continue;
            }
            let bad = |reason: String| MetricsError::Parse { line: line_no, reason };
            if !header_seen {
                if line.trim_end() != SCORE_HEADER {
                    return Err(bad(format!("expected header {SCORE_HEADER:?}")));
                }
                header_seen = true;
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 5 {
                return Err(bad(format!("expected 5 columns, got {}", cols.len())));
            }
            let task = Task::parse(cols[1]).ok_or_else(|| bad(format!("unknown task {:?}", cols[1])))?;
            let condition = Condition::parse(cols[2]).ok_or_else(|| bad(format!("bad condition {:?}", cols[2])))?;
            let truth =
                Truth::parse(task, cols[3]).ok_or_else(|| bad(format!("bad truth {:?} for {task}", cols[3])))?;
            let scores = cols[4]
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|e| bad(format!("bad score {s:?}: {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(ScoreRow {
                utt_id: cols[0].to_string(),
                task,
                condition,
                truth,
                scores,
            });
        }
        let f = ScoreFile { rows, config_digest };
        f.validate()?;
        Ok(f)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| MetricsError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        if let Some(d) = &self.config_digest {
            let _ = writeln!(out, "# config_digest={d}");
        }
        out.push_str(SCORE_HEADER);
        out.push('\n');
        for r in &self.rows {
            let scores: Vec<String> = r.scores.iter().map(|s| format!("{s}")).collect();
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                r.utt_id,
                r.task,
                r.condition,
                r.truth.label(r.task),
                scores.join(",")
            );
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_tsv()).map_err(|source| MetricsError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn concat(files: &[ScoreFile]) -> Result<Self> {
        Self::new(files.iter().flat_map(|f| f.rows.iter().cloned()).collect())
    }

    /// Splits binary rows into (positive, negative) score lists.
    pub fn binary_scores<'a>(rows: impl IntoIterator<Item = &'a ScoreRow>) -> (Vec<f64>, Vec<f64>) {
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for r in rows {
            if let Truth::Binary(p) = r.truth {
                if p {
                    pos.push(r.scores[0]);
                } else {
                    neg.push(r.scores[0]);
                }
            }
        }
        (pos, neg)
    }
}

fn require_both(pos: &[f64], neg: &[f64]) -> Result<()> {
    if pos.is_empty() || neg.is_empty() {
        return Err(MetricsError::SingleClass {
            positives: pos.len(),
            negatives: neg.len(),
        });
    }
    Ok(())
}

/// Tie-aware sorted view: (score, positives at score, negatives at score).
fn tie_groups(pos: &[f64], neg: &[f64]) -> Vec<(f64, u64, u64)> {
    let mut all: Vec<(f64, bool)> = pos
        .iter()
        .map(|&s| (s, true))
        .chain(neg.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut groups: Vec<(f64, u64, u64)> = Vec::new();
    for (s, is_pos) in all {
        match groups.last_mut() {
            Some(g) if g.0 == s => {
                if is_pos {
                    g.1 += 1
                } else {
                    g.2 += 1
                }
            }
            _ => groups.push((s, is_pos as u64, (!is_pos) as u64)),
        }
    }
    groups
}

/// Mann-Whitney ROC-AUC: P(positive outranks negative), ties count 1/2.
pub fn roc_auc(pos: &[f64], neg: &[f64]) -> Result<f64> {
    require_both(pos, neg)?;
    // Twice the U statistic, kept integral.
    let mut neg_below: u128 = 0;
    let mut u2: u128 = 0;
    for (_, p, n) in tie_groups(pos, neg) {
        u2 += p as u128 * (2 * neg_below + n as u128);
        neg_below += n as u128;
    }
    let denom = 2 * pos.len() as u128 * neg.len() as u128;
    Ok(u2 as f64 / denom as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    /// `+inf` for the closing sentinel; serialized as `null`.
    #[serde(with = "inf_as_null")]
    pub threshold: f64,
    pub far: f64,
    pub frr: f64,
}

mod inf_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EerResult {
    pub eer: f64,
    /// Interpolated threshold at the crossing. When the crossing falls
    /// between the highest score and the `+inf` sentinel, the highest score.
    pub threshold: f64,
    pub sweep: Vec<SweepPoint>,
}

/// FAR/FRR at every distinct score, ascending, plus the `+inf` sentinel.
pub fn far_frr_sweep(pos: &[f64], neg: &[f64]) -> Result<Vec<SweepPoint>> {
    require_both(pos, neg)?;
    let np = pos.len() as f64;
    let nn = neg.len() as f64;
    let mut pos_below = 0u64;
    let mut neg_below = 0u64;
    let total_neg = neg.len() as u64;
    let mut sweep = Vec::new();
    for (s, p, n) in tie_groups(pos, neg) {
        sweep.push(SweepPoint {
            threshold: s,
            far: (total_neg - neg_below) as f64 / nn,
            frr: pos_below as f64 / np,
        });
        pos_below += p;
        neg_below += n;
    }
    sweep.push(SweepPoint {
        threshold: f64::INFINITY,
        far: 0.0,
        frr: 1.0,
    });
    Ok(sweep)
}

/// Locates the FAR = FRR crossing on a sweep.
pub fn eer_from_sweep(sweep: &[SweepPoint]) -> (f64, f64) {
    let last_finite = sweep
        .iter()
        .rev()
        .find(|p| p.threshold.is_finite())
        .map(|p| p.threshold)
        .unwrap_or(0.0);
    for (i, cur) in sweep.iter().enumerate() {
        let d_cur = cur.far - cur.frr;
        if d_cur == 0.0 {
            let t = if cur.threshold.is_finite() {
                cur.threshold
            } else {
                last_finite
            };
            return (cur.far, t);
        }
        if d_cur < 0.0 {
            // sweep[0] has FRR = 0, so d > 0 there and i >= 1.
            let prev = &sweep[i - 1];
            let d_prev = prev.far - prev.frr;
            let alpha = d_prev / (d_prev - d_cur);
            let eer = prev.far + alpha * (cur.far - prev.far);
            let t = if cur.threshold.is_finite() {
                prev.threshold + alpha * (cur.threshold - prev.threshold)
            } else {
                prev.threshold
            };
            return (eer, t);
        }
    }
    unreachable!("sweep ends at FAR 0, FRR 1")
}

pub fn eer(pos: &[f64], neg: &[f64]) -> Result<EerResult> {
    let sweep = far_frr_sweep(pos, neg)?;
    let (eer, threshold) = eer_from_sweep(&sweep);
    Ok(EerResult { eer, threshold, sweep })
}

/// Binary confusion, rows = truth [positive, negative], cols = predicted.
pub fn binary_confusion(pos: &[f64], neg: &[f64], threshold: f64) -> [[usize; 2]; 2] {
    let tp = pos.iter().filter(|&&s| s >= threshold).count();
    let fp = neg.iter().filter(|&&s| s >= threshold).count();
    [[tp, pos.len() - tp], [fp, neg.len() - fp]]
}

pub fn binary_accuracy(pos: &[f64], neg: &[f64], threshold: f64) -> Result<f64> {
    let n = pos.len() + neg.len();
    if n == 0 {
        return Err(MetricsError::Empty);
    }
    let c = binary_confusion(pos, neg, threshold);
    Ok((c[0][0] + c[1][1]) as f64 / n as f64)
}

pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Rows = truth class, cols = predicted class.
pub fn multiclass_confusion(truth: &[usize], predicted: &[usize], n_classes: usize) -> Vec<Vec<usize>> {
    let mut m = vec![vec![0; n_classes]; n_classes];
    for (&t, &p) in truth.iter().zip(predicted) {
        m[t][p] += 1;
    }
    m
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroF1 {
    pub macro_f1: f64,
    pub per_class: Vec<f64>,
    /// Classes with no ground-truth rows; they contribute F1 = 0.
    pub absent_classes: Vec<usize>,
}

pub fn macro_f1(confusion: &[Vec<usize>]) -> MacroF1 {
    let k = confusion.len();
    let mut per_class = Vec::with_capacity(k);
    let mut absent_classes = Vec::new();
    for c in 0..k {
        let tp = confusion[c][c] as f64;
        let support: usize = confusion[c].iter().sum();
        let predicted: usize = confusion.iter().map(|row| row[c]).sum();
        if support == 0 {
            absent_classes.push(c);
        }
        let denom = support as f64 + predicted as f64;
        per_class.push(if denom == 0.0 { 0.0 } else { 2.0 * tp / denom });
    }
    MacroF1 {
        macro_f1: per_class.iter().sum::<f64>() / k as f64,
        per_class,
        absent_classes,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionMetrics {
    pub condition: Condition,
    pub n_trials: usize,
    pub accuracy: f64,
    pub roc_auc: Option<f64>,
    pub eer: Option<f64>,
    pub eer_threshold: Option<f64>,
    /// Threshold actually used for binary accuracy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision_threshold: Option<f64>,
    pub macro_f1: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_class_f1: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub absent_classes: Vec<usize>,
    pub confusion: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sweep: Vec<SweepPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub task: Task,
    /// `"eer"` or `"fixed:<t>"`.
    pub threshold_policy: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_digest: Option<String>,
    pub rows: Vec<ConditionMetrics>,
    /// All trials together.
    pub pooled: Option<ConditionMetrics>,
    pub warnings: Vec<String>,
}

/// Binary decision threshold for conditions without an EER (single class).
pub const SINGLE_CLASS_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EvalOptions {
    /// Fixed binary decision threshold; default is each condition's EER
    /// threshold, or [`SINGLE_CLASS_THRESHOLD`] when it has none.
    pub threshold: Option<f64>,
}

fn condition_metrics(
    condition: Condition,
    rows: &[&ScoreRow],
    task: Task,
    opts: EvalOptions,
    warnings: &mut Vec<String>,
) -> ConditionMetrics {
    let n_trials = rows.len();
    match task {
        Task::FourClass => {
            let truth: Vec<usize> = rows
                .iter()
                .map(|r| match r.truth {
                    Truth::FourClass(l) => l.index(),
                    Truth::Binary(_) => unreachable!("validated"),
                })
                .collect();
            let predicted: Vec<usize> = rows.iter().map(|r| argmax(&r.scores)).collect();
            let confusion = multiclass_confusion(&truth, &predicted, 4);
            let f1 = macro_f1(&confusion);
            let correct = (0..4).map(|c| confusion[c][c]).sum::<usize>();
            if !f1.absent_classes.is_empty() {
                warnings.push(format!(
                    "condition {condition}: classes {:?} absent from truth, scored as F1 = 0",
                    f1.absent_classes
                ));
            }
            ConditionMetrics {
                condition,
                n_trials,
                accuracy: correct as f64 / n_trials as f64,
                roc_auc: None,
                eer: None,
                eer_threshold: None,
                decision_threshold: None,
                macro_f1: Some(f1.macro_f1),
                per_class_f1: f1.per_class,
                absent_classes: f1.absent_classes,
                confusion,
                sweep: Vec::new(),
            }
        }
        Task::BinarySpoof | Task::BinaryNoise => {
            let (pos, neg) = ScoreFile::binary_scores(rows.iter().copied());
            let (roc_auc, eer_res) = match (roc_auc(&pos, &neg), eer(&pos, &neg)) {
                (Ok(a), Ok(e)) => (Some(a), Some(e)),
                _ => {
                    warnings.push(format!(
                        "condition {condition}: single class ({} positive, {} negative); AUC/EER undefined, accuracy at threshold {}",
                        pos.len(),
                        neg.len(),
                        opts.threshold.unwrap_or(SINGLE_CLASS_THRESHOLD)
                    ));
                    (None, None)
                }
            };
            let decision = opts
                .threshold
                .or(eer_res.as_ref().map(|e| e.threshold))
                .unwrap_or(SINGLE_CLASS_THRESHOLD);
            let confusion = binary_confusion(&pos, &neg, decision);
            ConditionMetrics {
                condition,
                n_trials,
                accuracy: (confusion[0][0] + confusion[1][1]) as f64 / n_trials as f64,
                roc_auc,
                eer: eer_res.as_ref().map(|e| e.eer),
                eer_threshold: eer_res.as_ref().map(|e| e.threshold),
                decision_threshold: Some(decision),
                macro_f1: None,
                per_class_f1: Vec::new(),
                absent_classes: Vec::new(),
                confusion: confusion.iter().map(|r| r.to_vec()).collect(),
                sweep: eer_res.map(|e| e.sweep).unwrap_or_default(),
            }
        }
    }
}

/// One metrics row per condition, clean first then descending SNR.
pub fn per_condition_curves(scores: &ScoreFile, opts: EvalOptions) -> Result<MetricReport> {
    let task = scores.task().ok_or(MetricsError::Empty)?;
    let mut groups: BTreeMap<Condition, Vec<&ScoreRow>> = BTreeMap::new();
    for r in &scores.rows {
        groups.entry(r.condition).or_default().push(r);
    }
    let mut warnings = Vec::new();
    let all: Vec<&ScoreRow> = scores.rows.iter().collect();
    let rows = groups
        .into_iter()
        .map(|(c, rows)| condition_metrics(c, &rows, task, opts, &mut warnings))
        .collect();
    // Condition label is dropped from the pooled record on output.
    let pooled = condition_metrics(Condition::Clean, &all, task, opts, &mut Vec::new());
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(MetricReport {
        task,
        threshold_policy: match opts.threshold {
            Some(t) => format!("fixed:{t}"),
            None => "eer".into(),
        },
        config_digest: scores.config_digest.clone(),
        rows,
        pooled: Some(pooled),
        warnings,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into())
}

impl MetricReport {
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "task: {}  threshold: {}", self.task, self.threshold_policy);
        if let Some(d) = &self.config_digest {
            let _ = writeln!(out, "config_digest: {d}");
        }
        let _ = writeln!(
            out,
            "{:>10} {:>8} {:>9} {:>8} {:>8} {:>10} {:>9}",
            "condition", "n", "accuracy", "auc", "eer", "eer_thr", "macro_f1"
        );
        let mut line = |label: String, r: &ConditionMetrics| {
            let _ = writeln!(
                out,
                "{:>10} {:>8} {:>9.4} {:>8} {:>8} {:>10} {:>9}",
                label,
                r.n_trials,
                r.accuracy,
                fmt_opt(r.roc_auc),
                fmt_opt(r.eer),
                fmt_opt(r.eer_threshold),
                fmt_opt(r.macro_f1)
            );
        };
        for r in &self.rows {
            line(r.condition.to_string(), r);
        }
        if let Some(p) = &self.pooled {
            line("pooled".into(), p);
        }
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        out
    }

    /// Header record followed by one record per condition.
    pub fn to_jsonl(&self) -> String {
        #[derive(Serialize)]
        struct Header<'a> {
            kind: &'static str,
            task: Task,
            threshold_policy: &'a str,
            #[serde(skip_serializing_if = "Option::is_none")]
            config_digest: &'a Option<String>,
            warnings: &'a [String],
        }
        #[derive(Serialize)]
        struct Row<'a> {
            kind: &'static str,
            #[serde(flatten)]
            metrics: &'a ConditionMetrics,
        }
        let mut out = serde_json::to_string(&Header {
            kind: "header",
            task: self.task,
            threshold_policy: &self.threshold_policy,
            config_digest: &self.config_digest,
            warnings: &self.warnings,
        })
        .expect("serializable");
        out.push('\n');
        for r in &self.rows {
            out.push_str(
                &serde_json::to_string(&Row {
                    kind: "condition",
                    metrics: r,
                })
                .expect("serializable"),
            );
            out.push('\n');
        }
        if let Some(p) = &self.pooled {
            let mut v = serde_json::to_value(Row {
                kind: "pooled",
                metrics: p,
            })
            .expect("serializable");
            v.as_object_mut().map(|o| o.remove("condition"));
            out.push_str(&v.to_string());
            out.push('\n');
        }
        out
    }

    /// Inverse of [`MetricReport::to_jsonl`].
    pub fn from_jsonl(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            task: Task,
            threshold_policy: String,
            #[serde(default)]
            config_digest: Option<String>,
            #[serde(default)]
            warnings: Vec<String>,
        }
        let mut header: Option<Header> = None;
        let mut rows = Vec::new();
        let mut pooled = None;
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |reason: String| MetricsError::Parse { line: idx + 1, reason };
            let mut v: serde_json::Value = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
            let obj = v.as_object_mut().ok_or_else(|| bad("expected an object".into()))?;
            let kind = obj
                .remove("kind")
                .and_then(|k| k.as_str().map(str::to_string))
                .unwrap_or_default();
            match kind.as_str() {
                "header" => header = Some(serde_json::from_value(v).map_err(|e| bad(e.to_string()))?),
                "condition" => rows.push(serde_json::from_value(v).map_err(|e| bad(e.to_string()))?),
                "pooled" => {
                    obj.insert("condition".into(), "clean".into());
                    pooled = Some(serde_json::from_value(v).map_err(|e| bad(e.to_string()))?);
                }
                other => return Err(bad(format!("unknown record kind {other:?}"))),
            }
        }
        let h = header.ok_or(MetricsError::Parse {
            line: 1,
            reason: "missing header record".into(),
        })?;
        Ok(MetricReport {
            task: h.task,
            threshold_policy: h.threshold_policy,
            config_digest: h.config_digest,
            rows,
            pooled,
            warnings: h.warnings,
        })
    }

    /// Long-format `condition,metric,value` rows for plotting.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        if let Some(d) = &self.config_digest {
            let _ = writeln!(out, "# config_digest={d}");
        }
        out.push_str("condition,metric,value\n");
        for r in &self.rows {
            let metrics = [
                ("n_trials", Some(r.n_trials as f64)),
                ("accuracy", Some(r.accuracy)),
                ("roc_auc", r.roc_auc),
                ("eer", r.eer),
                ("eer_threshold", r.eer_threshold),
                ("macro_f1", r.macro_f1),
            ];
            for (name, v) in metrics {
                if let Some(v) = v {
                    let _ = writeln!(out, "{},{name},{v}", r.condition);
                }
            }
        }
        out
    }
}
