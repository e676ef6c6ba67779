//! Reference detector: LFCC features pooled to per-utterance mean/std,
//! scored by class-weighted logistic regression.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio_io::AudioBuffer;
use crate::condition_sampler::FourClassLabel;
use crate::keyed_rng::{stream, KeyPart};

pub const LOG_FLOOR: f64 = 1e-10;
pub const PRE_EMPHASIS: f64 = 0.97;
const DELTA_WIDTH: usize = 2;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("signal of {samples} samples is shorter than one {frame}-sample frame")]
    TooShort { samples: usize, frame: usize },
    #[error("invalid feature config: {0}")]
    InvalidConfig(String),
    #[error("scorer expects {expected} features, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("training labels contain a single class")]
    DegenerateLabels,
    #[error("no training examples")]
    NoExamples,
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed scorer file {path}: {source}")]
    Serde {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T> = std::result::Result<T, FeatureError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LfccConfig {
    pub frame_len_ms: f64,
    pub frame_hop_ms: f64,
    /// `None` picks the smallest power of two holding one frame.
    pub fft_size: Option<usize>,
    pub n_filters: usize,
    pub n_ceps: usize,
    pub include_deltas: bool,
}

impl Default for LfccConfig {
    fn default() -> Self {
        LfccConfig {
            frame_len_ms: 25.0,
            frame_hop_ms: 10.0,
            fft_size: None,
            n_filters: 20,
            n_ceps: 20,
            include_deltas: false,
        }
    }
}

impl LfccConfig {
    pub fn frame_samples(&self, rate: u32) -> usize {
        (self.frame_len_ms * rate as f64 / 1000.0).round() as usize
    }

    pub fn hop_samples(&self, rate: u32) -> usize {
        (self.frame_hop_ms * rate as f64 / 1000.0).round() as usize
    }

    pub fn fft_len(&self, rate: u32) -> usize {
        self.fft_size
            .unwrap_or_else(|| self.frame_samples(rate).next_power_of_two())
    }

    pub fn dims(&self) -> usize {
        if self.include_deltas {
            2 * self.n_ceps
        } else {
            self.n_ceps
        }
    }

    pub fn validate(&self, rate: u32) -> Result<()> {
        let bad = |m: String| Err(FeatureError::InvalidConfig(m));
        let frame = self.frame_samples(rate);
        let fft = self.fft_len(rate);
        if frame == 0 || self.hop_samples(rate) == 0 {
            return bad("frame length and hop must cover at least one sample".into());
        }
        if !fft.is_power_of_two() || fft < frame {
            return bad(format!("fft_size {fft} must be a power of two >= {frame}"));
        }
        if self.n_filters == 0 || self.n_ceps == 0 || self.n_ceps > self.n_filters {
            return bad(format!(
                "need 0 < n_ceps ({}) <= n_filters ({})",
                self.n_ceps, self.n_filters
            ));
        }
        Ok(())
    }

    /// 1 + floor((n - frame) / hop), or 0 when shorter than a frame.
    pub fn frame_count(&self, n_samples: usize, rate: u32) -> usize {
        let frame = self.frame_samples(rate);
        if n_samples < frame {
            0
        } else {
            1 + (n_samples - frame) / self.hop_samples(rate)
        }
    }
}

/// Frames x dims, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    frames: usize,
    dims: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let frames = rows.len();
        let dims = rows.first().map_or(0, Vec::len);
        FeatureMatrix {
            frames,
            dims,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dims..(i + 1) * self.dims]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.dims.max(1)).take(self.frames)
    }

    /// Per-dimension mean followed by population std (length 2 * dims).
    pub fn summary(&self) -> Vec<f64> {
        let n = self.frames as f64;
        let mut mean = vec![0.0; self.dims];
        for r in self.rows() {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; self.dims];
        for r in self.rows() {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        mean.into_iter()
            .chain(var.into_iter().map(|s| (s / n).sqrt()))
            .collect()
    }
}

/// Triangular filters over [0, Nyquist] with equally spaced edges;
/// `weights[m][k]` is filter `m` at FFT bin `k`.
#[derive(Debug, Clone)]
pub struct LinearFilterbank {
    pub centers_hz: Vec<f64>,
    pub weights: Vec<Vec<f64>>,
}

impl LinearFilterbank {
    pub fn new(n_filters: usize, fft_len: usize, rate: u32) -> Self {
        let nyquist = rate as f64 / 2.0;
        let step = nyquist / (n_filters + 1) as f64;
        let edges: Vec<f64> = (0..n_filters + 2).map(|j| j as f64 * step).collect();
        let n_bins = fft_len / 2 + 1;
        let weights = (1..=n_filters)
            .map(|m| {
                let (lo, c, hi) = (edges[m - 1], edges[m], edges[m + 1]);
                (0..n_bins)
                    .map(|k| {
                        let f = k as f64 * rate as f64 / fft_len as f64;
                        ((f - lo) / (c - lo)).min((hi - f) / (hi - c)).max(0.0)
                    })
                    .collect()
            })
            .collect();
        LinearFilterbank {
            centers_hz: edges[1..=n_filters].to_vec(),
            weights,
        }
    }
}

/// Orthonormal DCT-II matrix, `n x n`, row `k` is basis function `k`.
pub fn dct_ii_matrix(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|k| {
            let scale = if k == 0 {
                (1.0 / n as f64).sqrt()
            } else {
                (2.0 / n as f64).sqrt()
            };
            (0..n)
                .map(|i| scale * (std::f64::consts::PI * k as f64 * (2 * i + 1) as f64 / (2 * n) as f64).cos())
                .collect()
        })
        .collect()
}

pub fn hamming(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos())
        .collect()
}

/// Reusable extractor; holds the FFT plan, window, filterbank and DCT.
pub struct LfccExtractor {
    cfg: LfccConfig,
    rate: u32,
    frame: usize,
    hop: usize,
    fft: Arc<dyn Fft<f64>>,
    fft_len: usize,
    window: Vec<f64>,
    filterbank: LinearFilterbank,
    dct: Vec<Vec<f64>>,
}

impl LfccExtractor {
    pub fn new(cfg: &LfccConfig, rate: u32) -> Result<Self> {
        cfg.validate(rate)?;
        let frame = cfg.frame_samples(rate);
        let fft_len = cfg.fft_len(rate);
        Ok(LfccExtractor {
            cfg: cfg.clone(),
            rate,
            frame,
            hop: cfg.hop_samples(rate),
            fft: FftPlanner::new().plan_fft_forward(fft_len),
            fft_len,
            window: hamming(frame),
            filterbank: LinearFilterbank::new(cfg.n_filters, fft_len, rate),
            dct: dct_ii_matrix(cfg.n_filters),
        })
    }

    pub fn filterbank(&self) -> &LinearFilterbank {
        &self.filterbank
    }

    /// Log filterbank energies per frame (before the DCT).
    pub fn log_energies(&self, samples: &[f64]) -> Result<Vec<Vec<f64>>> {
        if samples.len() < self.frame {
            return Err(FeatureError::TooShort {
                samples: samples.len(),
                frame: self.frame,
            });
        }
        let n_frames = self.cfg.frame_count(samples.len(), self.rate);
        let mut buf = vec![Complex::new(0.0, 0.0); self.fft_len];
        let mut power = vec![0.0; self.fft_len / 2 + 1];
        let mut out = Vec::with_capacity(n_frames);
        for t in 0..n_frames {
            let x = &samples[t * self.hop..t * self.hop + self.frame];
            buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
            for i in 0..self.frame {
                let emph = if i == 0 { x[0] } else { x[i] - PRE_EMPHASIS * x[i - 1] };
                buf[i].re = emph * self.window[i];
            }
            self.fft.process(&mut buf);
            for (p, c) in power.iter_mut().zip(&buf) {
                *p = c.norm_sqr();
            }
            out.push(
                self.filterbank
                    .weights
                    .iter()
                    .map(|w| {
                        w.iter()
                            .zip(&power)
                            .map(|(a, b)| a * b)
                            .sum::<f64>()
                            .max(LOG_FLOOR)
                            .ln()
                    })
                    .collect(),
            );
        }
        Ok(out)
    }

    pub fn extract(&self, samples: &[f64]) -> Result<FeatureMatrix> {
        let ceps: Vec<Vec<f64>> = self
            .log_energies(samples)?
            .into_iter()
            .map(|e| {
                self.dct[..self.cfg.n_ceps]
                    .iter()
                    .map(|basis| basis.iter().zip(&e).map(|(a, b)| a * b).sum())
                    .collect()
            })
            .collect();
        let rows = if self.cfg.include_deltas {
            let d = deltas(&ceps);
            ceps.into_iter()
                .zip(d)
                .map(|(mut c, d)| {
                    c.extend(d);
                    c
                })
                .collect()
        } else {
            ceps
        };
        Ok(FeatureMatrix::from_rows(rows))
    }
}

/// Regression deltas over +-2 frames with edge replication.
pub fn deltas(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.len() as isize;
    let denom: f64 = 2.0 * (1..=DELTA_WIDTH).map(|k| (k * k) as f64).sum::<f64>();
    let at = |t: isize| &rows[t.clamp(0, n - 1) as usize];
    (0..n)
        .map(|t| {
            (0..rows[0].len())
                .map(|d| {
                    (1..=DELTA_WIDTH as isize)
                        .map(|k| k as f64 * (at(t + k)[d] - at(t - k)[d]))
                        .sum::<f64>()
                        / denom
                })
                .collect()
        })
        .collect()
}

pub fn extract_lfcc(buffer: &AudioBuffer, cfg: &LfccConfig) -> Result<FeatureMatrix> {
    LfccExtractor::new(cfg, buffer.sample_rate())?.extract(buffer.samples())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Per-class example weights `[negative, positive]`; `None` balances
    /// classes to equal total weight.
    pub class_weights: Option<[f64; 2]>,
    pub l2: f64,
    pub seed: u64,
    /// Std of the random initial weights; 0 starts from all-zero weights.
    pub init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            learning_rate: 0.5,
            class_weights: None,
            l2: 1e-3,
            seed: 0,
            init_scale: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMeta {
    pub epochs: usize,
    pub learning_rate: f64,
    pub class_weights: [f64; 2],
    pub l2: f64,
    pub seed: u64,
    pub final_loss: f64,
}

/// Logistic scorer on standardized summary vectors. `weights` holds one
/// entry per feature followed by the bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearScorer {
    pub dims: usize,
    pub weights: Vec<f64>,
    pub feature_mean: Vec<f64>,
    pub feature_std: Vec<f64>,
    pub meta: TrainMeta,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^z) without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Class-weighted, L2-regularized mean logistic loss over standardized rows.
pub struct Objective<'a> {
    pub rows: &'a [Vec<f64>],
    pub labels: &'a [bool],
    pub example_weights: &'a [f64],
    pub l2: f64,
}

impl Objective<'_> {
    fn logit(w: &[f64], x: &[f64]) -> f64 {
        let (bias, coef) = w.split_last().expect("bias present");
        coef.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + bias
    }

    fn total_weight(&self) -> f64 {
        self.example_weights.iter().sum()
    }

    pub fn loss(&self, w: &[f64]) -> f64 {
        let data: f64 = self
            .rows
            .iter()
            .zip(self.labels)
            .zip(self.example_weights)
            .map(|((x, &y), &o)| {
                let z = Self::logit(w, x);
                o * (softplus(z) - if y { z } else { 0.0 })
            })
            .sum();
        let reg: f64 = w[..w.len() - 1].iter().map(|v| v * v).sum();
        data / self.total_weight() + 0.5 * self.l2 * reg
    }

    pub fn gradient(&self, w: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; w.len()];
        let dims = w.len() - 1;
        for ((x, &y), &o) in self.rows.iter().zip(self.labels).zip(self.example_weights) {
            let r = o * (sigmoid(Self::logit(w, x)) - if y { 1.0 } else { 0.0 });
            for (gi, xi) in g[..dims].iter_mut().zip(x) {
                *gi += r * xi;
            }
            g[dims] += r;
        }
        let tw = self.total_weight();
        for (i, gi) in g.iter_mut().enumerate() {
            *gi /= tw;
            if i < dims {
                *gi += self.l2 * w[i];
            }
        }
        g
    }
}

fn standardization(features: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = features.len() as f64;
    let dims = features[0].len();
    let mut mean = vec![0.0; dims];
    for f in features {
        for (m, v) in mean.iter_mut().zip(f) {
            *m += v / n;
        }
    }
    let mut std = vec![0.0; dims];
    for f in features {
        for ((s, v), m) in std.iter_mut().zip(f).zip(&mean) {
            *s += (v - m) * (v - m) / n;
        }
    }
    for s in &mut std {
        *s = if *s > 0.0 { s.sqrt() } else { 1.0 };
    }
    (mean, std)
}

fn standardize(x: &[f64], mean: &[f64], std: &[f64]) -> Vec<f64> {
    x.iter().zip(mean).zip(std).map(|((v, m), s)| (v - m) / s).collect()
}

/// Full-batch gradient descent with step halving, so the training loss
/// never increases. Returns the scorer and the loss after every epoch.
pub fn train_scorer_traced(
    features: &[Vec<f64>],
    labels: &[bool],
    cfg: &TrainConfig,
) -> Result<(LinearScorer, Vec<f64>)> {
    if features.is_empty() || features.len() != labels.len() {
        return Err(FeatureError::NoExamples);
    }
    let dims = features[0].len();
    if let Some(bad) = features.iter().find(|f| f.len() != dims) {
        return Err(FeatureError::DimMismatch {
            expected: dims,
            got: bad.len(),
        });
    }
    let n_pos = labels.iter().filter(|&&y| y).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(FeatureError::DegenerateLabels);
    }
    let class_weights = cfg.class_weights.unwrap_or_else(|| {
        let n = labels.len() as f64;
        [n / (2.0 * n_neg as f64), n / (2.0 * n_pos as f64)]
    });
    let (mean, std) = standardization(features);
    let rows: Vec<Vec<f64>> = features.iter().map(|f| standardize(f, &mean, &std)).collect();
    let example_weights: Vec<f64> = labels.iter().map(|&y| class_weights[y as usize]).collect();
    let obj = Objective {
        rows: &rows,
        labels,
        example_weights: &example_weights,
        l2: cfg.l2,
    };

    let mut w = vec![0.0; dims + 1];
    if cfg.init_scale > 0.0 {
        let mut rng = stream(cfg.seed, &[KeyPart::Str("scorer-init")]);
        for v in &mut w {
            *v = cfg.init_scale * (rng.gen::<f64>() * 2.0 - 1.0);
        }
    }
    let mut loss = obj.loss(&w);
    let mut history = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        let g = obj.gradient(&w);
        let mut step = cfg.learning_rate;
        let mut accepted = false;
        for _ in 0..40 {
            let cand: Vec<f64> = w.iter().zip(&g).map(|(wi, gi)| wi - step * gi).collect();
            let cand_loss = obj.loss(&cand);
            if cand_loss <= loss {
                w = cand;
                loss = cand_loss;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        history.push(loss);
        if !accepted {
            break;
        }
    }
    let scorer = LinearScorer {
        dims,
        weights: w,
        feature_mean: mean,
        feature_std: std,
        meta: TrainMeta {
            epochs: history.len(),
            learning_rate: cfg.learning_rate,
            class_weights,
            l2: cfg.l2,
            seed: cfg.seed,
            final_loss: loss,
        },
    };
    Ok((scorer, history))
}

pub fn train_scorer(features: &[Vec<f64>], labels: &[bool], cfg: &TrainConfig) -> Result<LinearScorer> {
    train_scorer_traced(features, labels, cfg).map(|(s, _)| s)
}

impl LinearScorer {
    /// Probability of the positive class, in (0, 1).
    pub fn score(&self, features: &[f64]) -> Result<f64> {
        if features.len() != self.dims {
            return Err(FeatureError::DimMismatch {
                expected: self.dims,
                got: features.len(),
            });
        }
        let x = standardize(features, &self.feature_mean, &self.feature_std);
        Ok(sigmoid(Objective::logit(&self.weights, &x)))
    }
}

/// Binary or one-vs-rest four-class model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScorerModel {
    Binary { scorer: LinearScorer },
    FourClass { scorers: Vec<LinearScorer> },
}

impl ScorerModel {
    pub fn train_four_class(features: &[Vec<f64>], labels: &[FourClassLabel], cfg: &TrainConfig) -> Result<Self> {
        let scorers = FourClassLabel::ALL
            .iter()
            .map(|&c| {
                let y: Vec<bool> = labels.iter().map(|&l| l == c).collect();
                train_scorer(features, &y, cfg)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ScorerModel::FourClass { scorers })
    }

    pub fn dims(&self) -> usize {
        match self {
            ScorerModel::Binary { scorer } => scorer.dims,
            ScorerModel::FourClass { scorers } => scorers[0].dims,
        }
    }

    /// One score for binary models, four (label order) otherwise.
    pub fn score(&self, features: &[f64]) -> Result<Vec<f64>> {
        match self {
            ScorerModel::Binary { scorer } => Ok(vec![scorer.score(features)?]),
            ScorerModel::FourClass { scorers } => scorers.iter().map(|s| s.score(features)).collect(),
        }
    }
}

/// On-disk scorer: the features it expects plus the trained weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_digest: Option<String>,
    pub lfcc: LfccConfig,
    pub model: ScorerModel,
}

impl ModelFile {
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = serde_json::to_string_pretty(self).expect("serializable");
        text.push('\n');
        fs::write(path, text).map_err(|source| FeatureError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let p = path.display().to_string();
        let text = fs::read_to_string(path).map_err(|source| FeatureError::Io {
            path: p.clone(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| FeatureError::Serde { path: p, source })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    const RATE: u32 = 16_000;

    fn sine(freq: f64, amp: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| amp * (2.0 * std::f64::consts::PI * freq * i as f64 / RATE as f64).sin())
            .collect()
    }

    #[test]
    fn default_geometry() {
        let cfg = LfccConfig::default();
        assert_eq!(cfg.frame_samples(RATE), 400);
        assert_eq!(cfg.hop_samples(RATE), 160);
        assert_eq!(cfg.fft_len(RATE), 512);
        assert!(LfccConfig {
            n_ceps: 21,
            ..cfg.clone()
        }
        .validate(RATE)
        .is_err());
        assert!(LfccConfig {
            fft_size: Some(256),
            ..cfg
        }
        .validate(RATE)
        .is_err());
    }

    #[test]
    fn frame_count_formula() {
        let cfg = LfccConfig::default();
        let ex = LfccExtractor::new(&cfg, RATE).unwrap();
        for n in [400, 401, 559, 560, 16_000, 16_123] {
            let m = ex.extract(&vec![0.1; n]).unwrap();
            assert_eq!(m.frames(), 1 + (n - 400) / 160, "n = {n}");
            assert_eq!(m.frames(), cfg.frame_count(n, RATE));
        }
        assert!(matches!(ex.extract(&[0.0; 399]), Err(FeatureError::TooShort { .. })));
    }

    #[test]
    fn filter_centers_and_partition_of_unity() {
        let fb = LinearFilterbank::new(20, 512, RATE);
        assert!(fb.centers_hz.windows(2).all(|w| w[1] > w[0]));
        let (lo, hi) = (fb.centers_hz[0], fb.centers_hz[19]);
        for k in 0..257 {
            let f = k as f64 * RATE as f64 / 512.0;
            if f >= lo && f <= hi {
                let s: f64 = fb.weights.iter().map(|w| w[k]).sum();
                assert!((s - 1.0).abs() < 1e-6, "bin {k}: {s}");
            }
        }
    }

    #[test]
    fn sine_peaks_in_nearest_filter() {
        let ex = LfccExtractor::new(&LfccConfig::default(), RATE).unwrap();
        for freq in [1000.0, 2500.0, 5200.0] {
            let nearest = ex
                .filterbank()
                .centers_hz
                .iter()
                .enumerate()
                .min_by(|a, b| (a.1 - freq).abs().total_cmp(&(b.1 - freq).abs()))
                .unwrap()
                .0;
            for e in ex.log_energies(&sine(freq, 0.5, 8000)).unwrap() {
                let argmax = e.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
                assert_eq!(argmax, nearest, "{freq} Hz");
            }
        }
    }

    #[test]
    fn zero_input_hits_floor() {
        let ex = LfccExtractor::new(&LfccConfig::default(), RATE).unwrap();
        let e = ex.log_energies(&vec![0.0; 4000]).unwrap();
        for row in &e {
            assert_eq!(row, &e[0]);
            assert!(row.iter().all(|&v| v == LOG_FLOOR.ln()));
        }
    }

    #[test]
    fn amplitude_doubling_moves_only_c0() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..4000).map(|_| rng.gen::<f64>() - 0.5).collect();
        let x2: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let ex = LfccExtractor::new(&LfccConfig::default(), RATE).unwrap();
        let (a, b) = (ex.extract(&x).unwrap(), ex.extract(&x2).unwrap());
        let shift = b.row(0)[0] - a.row(0)[0];
        assert!((shift - 4f64.ln() * 20f64.sqrt()).abs() < 1e-6);
        for (ra, rb) in a.rows().zip(b.rows()) {
            assert!((rb[0] - ra[0] - shift).abs() < 1e-6);
            for d in 1..20 {
                assert!((rb[d] - ra[d]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn deltas_extend_dims() {
        let cfg = LfccConfig {
            include_deltas: true,
            ..LfccConfig::default()
        };
        let m = LfccExtractor::new(&cfg, RATE)
            .unwrap()
            .extract(&sine(700.0, 0.3, 4000))
            .unwrap();
        assert_eq!(m.dims(), 40);
        assert_eq!(m.summary().len(), 80);
        // Ramp has unit slope.
        let ramp: Vec<Vec<f64>> = (0..6).map(|t| vec![t as f64]).collect();
        assert_eq!(deltas(&ramp)[2], vec![1.0]);
    }

    proptest! {
        #[test]
        fn dct_is_orthonormal(v in proptest::collection::vec(-10.0f64..10.0, 20)) {
            let m = dct_ii_matrix(20);
            let y: Vec<f64> = m.iter().map(|r| r.iter().zip(&v).map(|(a, b)| a * b).sum()).collect();
            let back: Vec<f64> = (0..20).map(|i| (0..20).map(|k| m[k][i] * y[k]).sum()).collect();
            for (a, b) in back.iter().zip(&v) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }

    fn toy() -> (Vec<Vec<f64>>, Vec<bool>) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..60 {
            let pos = i % 2 == 0;
            let c = if pos { 1.5 } else { -1.5 };
            x.push(vec![c + rng.gen::<f64>() - 0.5, rng.gen::<f64>() * 4.0 - 2.0]);
            y.push(pos);
        }
        (x, y)
    }

    #[test]
    fn separable_toy_is_learned() {
        let (x, y) = toy();
        let (s, hist) = train_scorer_traced(&x, &y, &TrainConfig::default()).unwrap();
        assert!(hist.windows(2).all(|w| w[1] <= w[0]));
        assert!(s.meta.epochs <= 200);
        let scores: Vec<f64> = x.iter().map(|f| s.score(f).unwrap()).collect();
        let correct = scores.iter().zip(&y).filter(|(&p, &t)| (p >= 0.5) == t).count();
        assert_eq!(correct, x.len());
        let pos: Vec<f64> = scores.iter().zip(&y).filter(|p| *p.1).map(|p| *p.0).collect();
        let neg: Vec<f64> = scores.iter().zip(&y).filter(|p| !*p.1).map(|p| *p.0).collect();
        assert_eq!(crate::metrics::roc_auc(&pos, &neg).unwrap(), 1.0);
    }

    #[test]
    fn flipped_labels_negate_weights() {
        let (x, y) = toy();
        let cfg = TrainConfig::default();
        let a = train_scorer(&x, &y, &cfg).unwrap();
        let flipped: Vec<bool> = y.iter().map(|v| !v).collect();
        let b = train_scorer(&x, &flipped, &cfg).unwrap();
        for (wa, wb) in a.weights.iter().zip(&b.weights) {
            assert!((wa + wb).abs() < 1e-4);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (x, y) = toy();
        let (mean, std) = standardization(&x);
        let rows: Vec<Vec<f64>> = x.iter().map(|f| standardize(f, &mean, &std)).collect();
        let ow: Vec<f64> = y.iter().map(|&p| if p { 0.7 } else { 1.3 }).collect();
        let obj = Objective {
            rows: &rows,
            labels: &y,
            example_weights: &ow,
            l2: 1e-2,
        };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let h = 1e-6;
        for _ in 0..10 {
            let w: Vec<f64> = (0..3).map(|_| rng.gen::<f64>() * 4.0 - 2.0).collect();
            let g = obj.gradient(&w);
            for i in 0..3 {
                let mut wp = w.clone();
                let mut wm = w.clone();
                wp[i] += h;
                wm[i] -= h;
                let fd = (obj.loss(&wp) - obj.loss(&wm)) / (2.0 * h);
                let rel = (fd - g[i]).abs() / g[i].abs().max(fd.abs()).max(1e-8);
                assert!(rel < 1e-4, "component {i}: {fd} vs {}", g[i]);
            }
        }
    }

    #[test]
    fn scoring_rules() {
        let (x, y) = toy();
        let mut s = train_scorer(&x, &y, &TrainConfig::default()).unwrap();
        assert!(matches!(
            s.score(&[1.0]),
            Err(FeatureError::DimMismatch { expected: 2, got: 1 })
        ));
        let top = if s.weights[0] > s.weights[1] { 0 } else { 1 };
        let mut f = vec![0.1, 0.1];
        let before = s.score(&f).unwrap();
        f[top] += 0.5;
        assert!(s.score(&f).unwrap() > before);
        s.weights.iter_mut().for_each(|w| *w = 0.0);
        assert_eq!(s.score(&[3.0, -7.0]).unwrap(), 0.5);
    }

    #[test]
    fn degenerate_labels_and_determinism() {
        let (x, _) = toy();
        assert!(matches!(
            train_scorer(&x, &vec![true; x.len()], &TrainConfig::default()),
            Err(FeatureError::DegenerateLabels)
        ));
        let (x, y) = toy();
        let cfg = TrainConfig {
            init_scale: 0.1,
            seed: 9,
            ..TrainConfig::default()
        };
        let a = train_scorer(&x, &y, &cfg).unwrap();
        let b = train_scorer(&x, &y, &cfg).unwrap();
        assert_eq!(a.weights, b.weights);
    }

    #[test]
    fn model_file_round_trip() {
        let (x, y) = toy();
        let labels: Vec<FourClassLabel> = y
            .iter()
            .enumerate()
            .map(|(i, &p)| FourClassLabel::ALL[(p as usize) * 2 + (i / 2) % 2])
            .collect();
        let model = ScorerModel::train_four_class(&x, &labels, &TrainConfig::default()).unwrap();
        assert_eq!(model.score(&x[0]).unwrap().len(), 4);
        let file = ModelFile {
            config_digest: Some("d".into()),
            lfcc: LfccConfig::default(),
            model,
        };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        file.write(&p).unwrap();
        assert_eq!(ModelFile::read(&p).unwrap(), file);
    }
}
