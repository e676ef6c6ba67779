//! Synthetic stand-in corpus: harmonic "bonafide" speech, ring-modulated
//! "spoof" speech, and four categories of ambient noise, laid out like a
//! real corpus (WAV tree, protocol files, categorized noise directories).

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::audio_io::{encode_wav, AudioBuffer, AudioError, BitDepth, CANONICAL_RATE_HZ};
use crate::corpus_manifest::{Authenticity, Split};
use crate::keyed_rng::{stream, KeyPart};

pub const NOISE_CATEGORIES: [&str; 4] = ["domestic", "office", "outdoor", "transport"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FixtureSpec {
    pub seed: u64,
    pub n_train: usize,
    pub n_dev: usize,
    pub n_test: usize,
    pub utt_duration_s: f64,
    pub clips_per_category: usize,
    pub noise_duration_s: f64,
    pub sample_rate: u32,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        FixtureSpec {
            seed: 0,
            n_train: 120,
            n_dev: 40,
            n_test: 120,
            utt_duration_s: 2.5,
            clips_per_category: 3,
            noise_duration_s: 6.0,
            sample_rate: CANONICAL_RATE_HZ,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureLayout {
    pub root: PathBuf,
    pub speech_dir: PathBuf,
    pub noise_dir: PathBuf,
    pub protocols: Vec<(Split, PathBuf)>,
}

impl FixtureLayout {
    pub fn protocol(&self, split: Split) -> Option<&Path> {
        self.protocols
            .iter()
            .find(|(s, _)| *s == split)
            .map(|(_, p)| p.as_path())
    }
}

fn normalize_peak(x: &mut [f64], peak: f64) {
    let m = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if m > 0.0 {
        x.iter_mut().for_each(|v| *v *= peak / m);
    }
}

/// Voiced-speech caricature: decaying harmonics of a drifting f0 under a
/// syllable-rate envelope.
pub fn synth_bonafide(rng: &mut ChaCha8Rng, n: usize, rate: u32) -> Vec<f64> {
    let fs = rate as f64;
    let f0 = rng.gen_range(100.0..220.0);
    let drift = rng.gen_range(-0.15..0.15);
    let syll = rng.gen_range(3.0..6.0);
    let tilt = rng.gen_range(0.8..1.4);
    let n_harm = ((4000.0 / f0) as usize).max(1);
    // Harmonic k contributes Im(c_k * z^k) with z = e^{i phase}.
    let coef: Vec<(f64, f64)> = (1..=n_harm)
        .map(|k| {
            let p: f64 = rng.gen_range(0.0..2.0 * PI);
            let a = 1.0 / (k as f64).powf(tilt);
            (a * p.cos(), a * p.sin())
        })
        .collect();
    let mut phase = 0.0;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / fs;
        let f = f0 * (1.0 + drift * (2.0 * PI * 0.4 * t).sin());
        phase += 2.0 * PI * f / fs;
        let env = 0.55 + 0.45 * (2.0 * PI * syll * t).sin();
        let (zs, zc) = phase.sin_cos();
        let (mut s, mut c) = (zs, zc);
        let mut v = 0.0;
        for &(ac, as_) in &coef {
            v += ac * s + as_ * c;
            (s, c) = (s * zc + c * zs, c * zc - s * zs);
        }
        out.push(env * v);
    }
    let peak = rng.gen_range(0.3..0.7);
    normalize_peak(&mut out, peak);
    out
}

/// Bonafide-like source partly ring-modulated by a high carrier, which adds
/// an inharmonic shifted copy of the spectrum.
pub fn synth_spoof(rng: &mut ChaCha8Rng, n: usize, rate: u32) -> Vec<f64> {
    let base = synth_bonafide(rng, n, rate);
    let fc = rng.gen_range(1500.0..3000.0);
    let mix = rng.gen_range(0.25..0.45);
    let fs = rate as f64;
    let mut out: Vec<f64> = base
        .iter()
        .enumerate()
        .map(|(i, &x)| (1.0 - mix) * x + mix * x * (2.0 * PI * fc * i as f64 / fs).cos())
        .collect();
    let peak = rng.gen_range(0.3..0.7);
    normalize_peak(&mut out, peak);
    out
}

fn one_pole(x: &mut [f64], a: f64) {
    let mut y = 0.0;
    for v in x.iter_mut() {
        y = a * y + (1.0 - a) * *v;
        *v = y;
    }
}

fn white(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Category-flavoured noise; unknown categories get plain white noise.
pub fn synth_noise(category: &str, rng: &mut ChaCha8Rng, n: usize, rate: u32) -> Vec<f64> {
    let fs = rate as f64;
    let mut x = white(rng, n);
    match category {
        "domestic" => {
            one_pole(&mut x, 0.97);
            let hum = rng.gen_range(48.0..62.0);
            for (i, v) in x.iter_mut().enumerate() {
                let t = i as f64 / fs;
                *v = 4.0 * *v
                    + 0.2
                        * (1..=4)
                            .map(|k| (2.0 * PI * hum * k as f64 * t).sin() / k as f64)
                            .sum::<f64>();
            }
        }
        "office" => {
            one_pole(&mut x, 0.6);
            let mut i = 0;
            while i < n {
                i += rng.gen_range(fs as usize / 20..fs as usize / 4);
                let amp = rng.gen_range(0.5..1.5);
                for (j, v) in x.iter_mut().skip(i).take(160).enumerate() {
                    *v += amp * (-(j as f64) / 20.0).exp() * if j % 2 == 0 { 1.0 } else { -1.0 };
                }
            }
        }
        "outdoor" => {
            let gust = rng.gen_range(0.1..0.5);
            for (i, v) in x.iter_mut().enumerate() {
                *v *= 0.6 + 0.4 * (2.0 * PI * gust * i as f64 / fs).sin();
            }
        }
        "transport" => {
            one_pole(&mut x, 0.99);
            let engine = rng.gen_range(25.0..70.0);
            for (i, v) in x.iter_mut().enumerate() {
                let t = i as f64 / fs;
                *v = 10.0 * *v
                    + 0.3
                        * (1..=6)
                            .map(|k| (2.0 * PI * engine * k as f64 * t).sin() / k as f64)
                            .sum::<f64>();
            }
        }
        _ => {}
    }
    normalize_peak(&mut x, 0.5);
    x
}

fn write(path: &Path, samples: Vec<f64>, rate: u32) -> Result<(), AudioError> {
    let buf = AudioBuffer::new(samples, rate)?;
    encode_wav(&buf, path, BitDepth::Pcm16)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> AudioError + '_ {
    move |source| AudioError::IoFailure {
        path: path.display().to_string(),
        source,
    }
}

/// Utterance id for trial `i` of `split`.
pub fn utt_id(split: Split, i: usize) -> String {
    format!("SYN_{}_{i:05}", split.as_str().to_uppercase())
}

/// Writes the corpus under `root`:
/// `speech/<utt>.wav`, `protocols/<split>.txt`, `noise/<category>/*.wav`.
/// Alternating trials are bonafide and spoof. Output is a pure function of
/// `spec`.
pub fn write_fixture(root: impl AsRef<Path>, spec: &FixtureSpec) -> Result<FixtureLayout, AudioError> {
    let root = root.as_ref().to_path_buf();
    let speech_dir = root.join("speech");
    let noise_dir = root.join("noise");
    let proto_dir = root.join("protocols");
    for d in [&speech_dir, &noise_dir, &proto_dir] {
        fs::create_dir_all(d).map_err(io_err(d))?;
    }
    let n_utt = (spec.utt_duration_s * spec.sample_rate as f64).round() as usize;
    let mut protocols = Vec::new();
    for (split, count) in [
        (Split::Train, spec.n_train),
        (Split::Dev, spec.n_dev),
        (Split::Test, spec.n_test),
    ] {
        let mut lines = String::new();
        for i in 0..count {
            let id = utt_id(split, i);
            let auth = if i % 2 == 0 {
                Authenticity::Bonafide
            } else {
                Authenticity::Spoof
            };
            let mut rng = stream(spec.seed, &[KeyPart::Str("fixture-speech"), KeyPart::Str(&id)]);
            let samples = match auth {
                Authenticity::Bonafide => synth_bonafide(&mut rng, n_utt, spec.sample_rate),
                Authenticity::Spoof => synth_spoof(&mut rng, n_utt, spec.sample_rate),
            };
            write(&speech_dir.join(format!("{id}.wav")), samples, spec.sample_rate)?;
            let attack = if auth == Authenticity::Bonafide { "-" } else { "A01" };
            lines.push_str(&format!("SPK{:03} {id} - {attack} {}\n", i % 7, auth.as_str()));
        }
        let p = proto_dir.join(format!("{}.txt", split.as_str()));
        fs::write(&p, lines).map_err(io_err(&p))?;
        protocols.push((split, p));
    }
    let n_noise = (spec.noise_duration_s * spec.sample_rate as f64).round() as usize;
    for cat in NOISE_CATEGORIES {
        let dir = noise_dir.join(cat);
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        for c in 0..spec.clips_per_category {
            let mut rng = stream(
                spec.seed,
                &[KeyPart::Str("fixture-noise"), KeyPart::Str(cat), KeyPart::U64(c as u64)],
            );
            write(
                &dir.join(format!("{cat}_{c:02}.wav")),
                synth_noise(cat, &mut rng, n_noise, spec.sample_rate),
                spec.sample_rate,
            )?;
        }
    }
    Ok(FixtureLayout {
        root,
        speech_dir,
        noise_dir,
        protocols,
    })
}
