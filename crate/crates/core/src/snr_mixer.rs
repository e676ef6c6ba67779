//! Signal power, SNR measurement and additive noise mixing at a target SNR.
//!
//! Power is the full-utterance mean square. When two noise clips are given
//! they are summed first and the target SNR holds against the sum. A mixture
//! whose peak exceeds full scale is rescaled as a whole, which leaves the
//! speech-to-noise ratio untouched.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio_io::{AudioBuffer, AudioError};
use crate::keyed_rng::{self, KeyPart};

/// The benchmark SNR grid in dB, from near-clean to very noisy.
pub const SNR_GRID_DB: [f64; 9] = [35.0, 30.0, 25.0, 20.0, 15.0, 10.0, 5.0, 0.0, -5.0];

#[derive(Debug, Error)]
pub enum MixError {
    #[error("silent input: {0} has zero power")]
    SilentInput(&'static str),
    #[error("length mismatch: speech {speech} samples, noise {noise} samples")]
    LengthMismatch { speech: usize, noise: usize },
    #[error("sample rate mismatch: speech {speech} Hz, noise {noise} Hz")]
    RateMismatch { speech: u32, noise: u32 },
    #[error("expected 1 or 2 noise clips, got {0}")]
    NoiseCount(usize),
    #[error("non-finite SNR value")]
    NonFiniteSnr,
    #[error(transparent)]
    Audio(#[from] AudioError),
}

pub type Result<T> = std::result::Result<T, MixError>;

/// Signal-to-noise ratio in decibels.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct SnrDb(f64);

impl SnrDb {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() {
            Ok(Self(value))
        } else {
            Err(MixError::NonFiniteSnr)
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_on_grid(self) -> bool {
        SNR_GRID_DB.contains(&self.0)
    }

    pub fn grid() -> Vec<SnrDb> {
        SNR_GRID_DB.iter().map(|&v| SnrDb(v)).collect()
    }
}

impl TryFrom<f64> for SnrDb {
    type Error = MixError;
    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<SnrDb> for f64 {
    fn from(s: SnrDb) -> f64 {
        s.0
    }
}

impl fmt::Display for SnrDb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixResult {
    pub mixed: AudioBuffer,
    /// Linear amplitude factor applied to the (summed) noise.
    pub noise_gain: f64,
    pub achieved_snr_db: f64,
    /// 1.0 unless the clipping guard fired.
    pub peak_rescale: f64,
}

fn power_of(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

/// Mean square of the buffer, `(1/N) Σ x²`.
pub fn mean_power(buffer: &AudioBuffer) -> f64 {
    let n = buffer.len() as f64;
    buffer.samples().iter().map(|s| s * s).sum::<f64>() / n
}

fn gain_from_powers(p_speech: f64, p_noise: f64, target: SnrDb) -> Result<f64> {
    if p_speech <= 0.0 {
        return Err(MixError::SilentInput("speech"));
    }
    if p_noise <= 0.0 {
        return Err(MixError::SilentInput("noise"));
    }
    Ok((p_speech / (p_noise * 10f64.powf(target.0 / 10.0))).sqrt())
}

fn check_pair(speech: &AudioBuffer, noise: &AudioBuffer) -> Result<()> {
    if speech.len() != noise.len() {
        return Err(MixError::LengthMismatch {
            speech: speech.len(),
            noise: noise.len(),
        });
    }
    Ok(())
}

/// Amplitude gain `g` such that `10·log10(P_speech / P_{g·noise}) = target`.
pub fn noise_gain_for_snr(speech: &AudioBuffer, noise: &AudioBuffer, target: SnrDb) -> Result<f64> {
    check_pair(speech, noise)?;
    gain_from_powers(mean_power(speech), mean_power(noise), target)
}

fn snr_from_powers(p_speech: f64, p_noise: f64) -> Result<f64> {
    if p_speech <= 0.0 {
        return Err(MixError::SilentInput("speech"));
    }
    if p_noise <= 0.0 {
        return Err(MixError::SilentInput("noise"));
    }
    Ok(10.0 * (p_speech / p_noise).log10())
}

pub fn measure_snr(speech: &AudioBuffer, scaled_noise: &AudioBuffer) -> Result<SnrDb> {
    check_pair(speech, scaled_noise)?;
    SnrDb::new(snr_from_powers(mean_power(speech), mean_power(scaled_noise))?)
}

/// SNR of two `f64` component signals.
pub fn measure_snr_f64(speech: &[f64], noise: &[f64]) -> Result<f64> {
    if speech.len() != noise.len() {
        return Err(MixError::LengthMismatch {
            speech: speech.len(),
            noise: noise.len(),
        });
    }
    snr_from_powers(power_of(speech), power_of(noise))
}

/// Fits a noise clip to `target_len` samples.
///
/// Longer clips yield a contiguous crop at a uniformly drawn offset; shorter
/// clips are tiled with wraparound from a drawn start. Equal lengths are
/// returned unchanged.
pub fn crop_or_tile(noise: &AudioBuffer, target_len: usize, offset_seed: u64) -> Result<AudioBuffer> {
    let src = noise.samples();
    let n = src.len();
    if target_len == 0 {
        return Err(AudioError::EmptyBuffer.into());
    }
    if n == target_len {
        return Ok(noise.clone());
    }
    let mut rng = keyed_rng::stream(offset_seed, &[KeyPart::Str("crop")]);
    let out = if n > target_len {
        let offset = rng.gen_range(0..=n - target_len);
        src[offset..offset + target_len].to_vec()
    } else {
        let offset = rng.gen_range(0..n);
        (0..target_len).map(|i| src[(offset + i) % n]).collect()
    };
    Ok(AudioBuffer::new(out, noise.sample_rate())?)
}

/// Mixes one or two noise clips into `speech` at `target` SNR.
///
/// Each clip is fitted to the speech length with [`crop_or_tile`] using a
/// sub-seed derived from `seed` and the clip's position.
pub fn mix_at_snr(speech: &AudioBuffer, noises: &[AudioBuffer], target: SnrDb, seed: u64) -> Result<MixResult> {
    if noises.is_empty() || noises.len() > 2 {
        return Err(MixError::NoiseCount(noises.len()));
    }
    let len = speech.len();
    let mut noise_sum = vec![0.0f64; len];
    for (i, noise) in noises.iter().enumerate() {
        if noise.sample_rate() != speech.sample_rate() {
            return Err(MixError::RateMismatch {
                speech: speech.sample_rate(),
                noise: noise.sample_rate(),
            });
        }
        let clip_seed = keyed_rng::derive_seed(seed, &[KeyPart::Str("noise"), KeyPart::U64(i as u64)]);
        let fitted = crop_or_tile(noise, len, clip_seed)?;
        if mean_power(&fitted) <= 0.0 {
            return Err(MixError::SilentInput("noise"));
        }
        for (acc, &s) in noise_sum.iter_mut().zip(fitted.samples()) {
            *acc += s;
        }
    }
    let speech_f64 = speech.samples();
    let gain = gain_from_powers(power_of(speech_f64), power_of(&noise_sum), target)?;
    let scaled_noise: Vec<f64> = noise_sum.iter().map(|&v| gain * v).collect();
    let mut mixed: Vec<f64> = speech_f64.iter().zip(&scaled_noise).map(|(s, n)| s + n).collect();
    let peak = mixed.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let peak_rescale = if peak > 1.0 { 1.0 / peak } else { 1.0 };
    let achieved_snr_db = if peak_rescale == 1.0 {
        measure_snr_f64(speech_f64, &scaled_noise)?
    } else {
        for v in mixed.iter_mut() {
            *v *= peak_rescale;
        }
        let s: Vec<f64> = speech_f64.iter().map(|v| v * peak_rescale).collect();
        let n: Vec<f64> = scaled_noise.iter().map(|v| v * peak_rescale).collect();
        measure_snr_f64(&s, &n)?
    };
    Ok(MixResult {
        mixed: AudioBuffer::new(mixed, speech.sample_rate())?,
        noise_gain: gain,
        achieved_snr_db,
        peak_rescale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn sine(amp: f64, freq: f64, len: usize, rate: u32) -> AudioBuffer {
        AudioBuffer::new(
            (0..len)
                .map(|n| amp * (2.0 * PI * freq * n as f64 / rate as f64).sin())
                .collect::<Vec<_>>(),
            rate,
        )
        .unwrap()
    }

    fn constant(v: f64, len: usize) -> AudioBuffer {
        AudioBuffer::new(vec![v; len], 16000).unwrap()
    }

    fn snr(v: f64) -> SnrDb {
        SnrDb::new(v).unwrap()
    }

    #[test]
    fn mean_power_examples() {
        assert_eq!(mean_power(&constant(0.5, 64)), 0.25);
        assert_eq!(mean_power(&constant(0.0, 64)), 0.0);
        // 16 whole periods of 1 kHz at 16 kHz.
        let p = mean_power(&sine(1.0, 1000.0, 256, 16000));
        assert!((p - 0.5).abs() < 1e-9, "{p}");
    }

    #[test]
    fn gain_examples() {
        let a = constant(0.3, 100);
        assert!((noise_gain_for_snr(&a, &a, snr(0.0)).unwrap() - 1.0).abs() < 1e-15);
        assert!((noise_gain_for_snr(&a, &a, snr(20.0)).unwrap() - 0.1).abs() < 1e-15);

        let s = sine(1.0, 1000.0, 1600, 16000);
        let n = constant(0.5, 1600);
        let g = noise_gain_for_snr(&s, &n, snr(10.0)).unwrap();
        let expected = (mean_power(&s) / (0.25 * 10.0)).sqrt();
        assert!((g - expected).abs() < 1e-12);
        assert!((g - 0.4472).abs() < 1e-4);
        // Independent check through the measured SNR of the scaled noise.
        let scaled: Vec<f64> = n.samples().iter().map(|&v| g * v).collect();
        let measured = measure_snr_f64(s.samples(), &scaled).unwrap();
        assert!((measured - 10.0).abs() < 1e-9);
    }

    #[test]
    fn silent_inputs_rejected() {
        let s = constant(0.3, 10);
        let z = constant(0.0, 10);
        assert!(matches!(
            noise_gain_for_snr(&s, &z, snr(0.0)),
            Err(MixError::SilentInput("noise"))
        ));
        assert!(matches!(
            noise_gain_for_snr(&z, &s, snr(0.0)),
            Err(MixError::SilentInput("speech"))
        ));
        assert!(matches!(measure_snr(&s, &z), Err(MixError::SilentInput(_))));
        assert!(matches!(
            mix_at_snr(&s, &[z], snr(0.0), 1),
            Err(MixError::SilentInput("noise"))
        ));
    }

    #[test]
    fn measure_snr_examples() {
        let a = constant(0.4, 50);
        assert_eq!(measure_snr(&a, &a).unwrap().value(), 0.0);
        let half = constant(0.2, 50);
        let d = measure_snr(&a, &half).unwrap().value();
        assert!((d - 20.0 * 2f64.log10()).abs() < 1e-9);
        assert!((d - 6.0206).abs() < 1e-4);
    }

    #[test]
    fn crop_or_tile_examples() {
        let noise = AudioBuffer::new((0..100).map(|i| i as f64 / 100.0 + 0.01).collect(), 16000).unwrap();
        assert_eq!(crop_or_tile(&noise, 100, 9).unwrap(), noise);

        let a = crop_or_tile(&noise, 250, 42).unwrap();
        let b = crop_or_tile(&noise, 250, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 250);
        // Wraparound: consecutive samples follow the source cyclically.
        let start = noise.samples().iter().position(|&v| v == a.samples()[0]).unwrap();
        for (i, &v) in a.samples().iter().enumerate() {
            assert_eq!(v, noise.samples()[(start + i) % 100]);
        }

        let long = AudioBuffer::new((0..1000).map(|i| (i as f64 * 0.37).sin()).collect(), 16000).unwrap();
        let crop = crop_or_tile(&long, 400, 5).unwrap();
        let found = long.samples().windows(400).any(|w| w == crop.samples());
        assert!(found, "crop is not a verbatim slice");
    }

    #[test]
    fn near_clean_mix() {
        let s = sine(0.5, 300.0, 4000, 16000);
        let n = constant(1e-3, 4000);
        let r = mix_at_snr(&s, &[n], snr(35.0), 3).unwrap();
        assert!((r.achieved_snr_db - 35.0).abs() < 0.1);
        assert_eq!(r.peak_rescale, 1.0);
        let diff: f64 = r
            .mixed
            .samples()
            .iter()
            .zip(s.samples())
            .map(|(m, s)| (m - s).abs())
            .fold(0.0, f64::max);
        assert!(diff < 0.02);
    }

    #[test]
    fn two_identical_noises_equal_doubled_noise() {
        let s = sine(0.3, 440.0, 2000, 16000);
        let n = AudioBuffer::new(
            (0..2000).map(|i| ((i * 7919) % 211) as f64 / 211.0 - 0.5).collect(),
            16000,
        )
        .unwrap();
        let doubled = AudioBuffer::new(n.samples().iter().map(|v| v * 2.0).collect(), 16000).unwrap();
        let two = mix_at_snr(&s, &[n.clone(), n], snr(0.0), 11).unwrap();
        let one = mix_at_snr(&s, &[doubled], snr(0.0), 11).unwrap();
        assert_eq!(two.mixed, one.mixed);
        assert_eq!(two.achieved_snr_db, one.achieved_snr_db);
        assert_eq!(two.peak_rescale, one.peak_rescale);
    }

    #[test]
    fn clipping_guard_rescales() {
        let s = sine(0.9, 250.0, 8000, 16000);
        let n = sine(0.5, 1733.0, 8000, 16000);
        let r = mix_at_snr(&s, &[n], snr(-5.0), 0).unwrap();
        assert!(r.peak_rescale < 1.0);
        assert!(r.mixed.peak() <= 1.0);
        assert!((r.achieved_snr_db + 5.0).abs() < 0.1);
        // Re-measure from the rendered mixture.
        let speech: Vec<f64> = s.samples().iter().map(|&v| v * r.peak_rescale).collect();
        let noise: Vec<f64> = r.mixed.samples().iter().zip(&speech).map(|(&m, s)| m - s).collect();
        assert!((measure_snr_f64(&speech, &noise).unwrap() + 5.0).abs() < 0.1);
    }

    #[test]
    fn rejects_bad_noise_lists() {
        let s = constant(0.1, 10);
        assert!(matches!(mix_at_snr(&s, &[], snr(0.0), 0), Err(MixError::NoiseCount(0))));
        let three = vec![s.clone(), s.clone(), s.clone()];
        assert!(matches!(
            mix_at_snr(&s, &three, snr(0.0), 0),
            Err(MixError::NoiseCount(3))
        ));
        let other_rate = AudioBuffer::new(vec![0.1; 10], 8000).unwrap();
        assert!(matches!(
            mix_at_snr(&s, &[other_rate], snr(0.0), 0),
            Err(MixError::RateMismatch { .. })
        ));
    }

    #[test]
    fn snr_serde_and_grid() {
        assert!(SnrDb::new(f64::NAN).is_err());
        assert!(snr(-5.0).is_on_grid());
        assert!(!snr(7.0).is_on_grid());
        let s: SnrDb = serde_json::from_str("-5.0").unwrap();
        assert_eq!(s, snr(-5.0));
        assert_eq!(SnrDb::grid().len(), 9);
    }

    fn buffer_strategy(len: usize) -> impl Strategy<Value = AudioBuffer> {
        proptest::collection::vec(-1.0f64..1.0, len)
            .prop_filter("non-silent", |v| v.iter().any(|x| x.abs() > 1e-3))
            .prop_map(|v| AudioBuffer::new(v, 16000).unwrap())
    }

    proptest! {
        #[test]
        fn snr_round_trip(s in buffer_strategy(256), n in buffer_strategy(256), idx in 0usize..9, seed in any::<u64>()) {
            let target = SnrDb::grid()[idx];
            let g = noise_gain_for_snr(&s, &n, target).unwrap();
            let scaled: Vec<f64> = n.samples().iter().map(|&v| g * v).collect();
            let m = measure_snr_f64(s.samples(), &scaled).unwrap();
            prop_assert!((m - target.value()).abs() < 1e-6);
            let r = mix_at_snr(&s, &[n], target, seed).unwrap();
            prop_assert!((r.achieved_snr_db - target.value()).abs() < 0.1);
            prop_assert!(r.mixed.peak() <= 1.0);
        }

        #[test]
        fn gain_strictly_decreasing(s in buffer_strategy(64), n in buffer_strategy(64)) {
            let gains: Vec<f64> = SNR_GRID_DB.iter().rev()
                .map(|&t| noise_gain_for_snr(&s, &n, snr(t)).unwrap())
                .collect();
            for w in gains.windows(2) {
                prop_assert!(w[1] < w[0]);
            }
        }

        #[test]
        fn mixing_is_additive(s in buffer_strategy(128), n in buffer_strategy(128)) {
            let r = mix_at_snr(&s, std::slice::from_ref(&n), snr(35.0), 1).unwrap();
            if r.peak_rescale == 1.0 {
                for ((m, sp), nz) in r.mixed.samples().iter().zip(s.samples()).zip(n.samples()) {
                    let expected = r.noise_gain * nz;
                    prop_assert!(((m - sp) - expected).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn mixing_is_deterministic(s in buffer_strategy(64), n in buffer_strategy(200), seed in any::<u64>()) {
            let a = mix_at_snr(&s, &[n.clone(), n.clone()], snr(10.0), seed).unwrap();
            let b = mix_at_snr(&s, &[n.clone(), n], snr(10.0), seed).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
