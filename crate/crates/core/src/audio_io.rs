//! Waveform container, RIFF/WAVE decode/encode and sample-rate conversion.
//!
//! Every waveform in the pipeline is an [`AudioBuffer`]: mono, finite `f64`
//! samples with a positive sample rate. Multi-channel files are downmixed by
//! the arithmetic mean of their channels on decode.

use std::f64::consts::PI;
use std::path::Path;

use thiserror::Error;

/// Working sample rate of the pipeline. Noise is resampled to the speech rate
/// before mixing.
pub const CANONICAL_RATE_HZ: u32 = 16_000;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("malformed RIFF/WAVE container in {path}: {reason}")]
    MalformedContainer { path: String, reason: String },
    #[error("unsupported encoding in {path}: {reason}")]
    UnsupportedEncoding { path: String, reason: String },
    #[error("empty audio payload in {0}")]
    EmptyPayload(String),
    #[error("non-finite sample at index {index}")]
    NonFiniteSample { index: usize },
    #[error("invalid sample rate {0}")]
    InvalidSampleRate(u32),
    #[error("empty buffer")]
    EmptyBuffer,
    #[error("sample {value} at index {index} exceeds 16-bit full scale")]
    ClippingDetected { index: usize, value: f64 },
    #[error("i/o failure on {path}: {source}")]
    IoFailure {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, AudioError>;

/// Mono waveform with its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(AudioError::InvalidSampleRate(sample_rate));
        }
        if samples.is_empty() {
            return Err(AudioError::EmptyBuffer);
        }
        if let Some(index) = samples.iter().position(|s| !s.is_finite()) {
            return Err(AudioError::NonFiniteSample { index });
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0f64, |m, s| m.max(s.abs()))
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}

/// On-disk sample format for [`encode_wav`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BitDepth {
    Pcm16,
    #[default]
    Float32,
}

fn path_str(path: &Path) -> String {
    path.display().to_string()
}

fn map_hound(path: &Path, err: hound::Error) -> AudioError {
    let p = path_str(path);
    match err {
        hound::Error::IoError(source) => {
            if source.kind() == std::io::ErrorKind::UnexpectedEof {
                AudioError::MalformedContainer {
                    path: p,
                    reason: "truncated file".into(),
                }
            } else {
                AudioError::IoFailure { path: p, source }
            }
        }
        hound::Error::FormatError(reason) => AudioError::MalformedContainer {
            path: p,
            reason: reason.to_string(),
        },
        hound::Error::Unsupported => AudioError::UnsupportedEncoding {
            path: p,
            reason: "unsupported fmt chunk".into(),
        },
        hound::Error::TooWide | hound::Error::InvalidSampleFormat => AudioError::UnsupportedEncoding {
            path: p,
            reason: "sample format not representable".into(),
        },
        hound::Error::UnfinishedSample => AudioError::MalformedContainer {
            path: p,
            reason: "payload ends mid-sample".into(),
        },
    }
}

/// Decodes a 16-bit integer or 32-bit float PCM WAVE file into a mono buffer.
///
/// 16-bit samples are scaled by 1/32768. Other bit depths (including 24-bit)
/// are rejected with [`AudioError::UnsupportedEncoding`].
pub fn decode_wav(path: impl AsRef<Path>) -> Result<AudioBuffer> {
    let path = path.as_ref();
    let reader = hound::WavReader::open(path).map_err(|e| map_hound(path, e))?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(AudioError::MalformedContainer {
            path: path_str(path),
            reason: "zero channels".into(),
        });
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| map_hound(path, e))?,
        (hound::SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| map_hound(path, e))?,
        (format, bits) => {
            return Err(AudioError::UnsupportedEncoding {
                path: path_str(path),
                reason: format!("{bits}-bit {format:?} PCM"),
            })
        }
    };
    if interleaved.len() < channels {
        return Err(AudioError::EmptyPayload(path_str(path)));
    }
    let samples = if channels == 1 {
        interleaved
    } else {
        downmix(&interleaved, channels)
    };
    AudioBuffer::new(samples, spec.sample_rate).map_err(|e| match e {
        AudioError::InvalidSampleRate(_) => AudioError::MalformedContainer {
            path: path_str(path),
            reason: "zero sample rate".into(),
        },
        other => other,
    })
}

/// Mean over interleaved channels. Trailing partial frames are dropped.
///
/// The running-mean form returns identical channels unchanged bit for bit.
pub fn downmix(interleaved: &[f64], channels: usize) -> Vec<f64> {
    interleaved
        .chunks_exact(channels)
        .map(|frame| {
            frame
                .iter()
                .enumerate()
                .fold(0.0, |mean, (k, &x)| mean + (x - mean) / (k + 1) as f64)
        })
        .collect()
}

/// Writes a mono WAVE file. 16-bit output requires every |sample| <= 1.
///
/// Float output stores `f32`; buffers that came from [`decode_wav`] round-trip
/// bit-exactly.
pub fn encode_wav(buffer: &AudioBuffer, path: impl AsRef<Path>, bit_depth: BitDepth) -> Result<()> {
    let path = path.as_ref();
    let spec = match bit_depth {
        BitDepth::Pcm16 => {
            if let Some((index, &value)) = buffer.samples.iter().enumerate().find(|(_, s)| s.abs() > 1.0) {
                return Err(AudioError::ClippingDetected { index, value });
            }
            hound::WavSpec {
                channels: 1,
                sample_rate: buffer.sample_rate,
                bits_per_sample: 16,
                sample_format: hound::SampleFormat::Int,
            }
        }
        BitDepth::Float32 => hound::WavSpec {
            channels: 1,
            sample_rate: buffer.sample_rate,
            bits_per_sample: 32,
            sample_format: hound::SampleFormat::Float,
        },
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(|e| map_hound(path, e))?;
    match bit_depth {
        BitDepth::Pcm16 => {
            for &s in &buffer.samples {
                let q = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                writer.write_sample(q).map_err(|e| map_hound(path, e))?;
            }
        }
        BitDepth::Float32 => {
            for &s in &buffer.samples {
                writer.write_sample(s as f32).map_err(|e| map_hound(path, e))?;
            }
        }
    }
    writer.finalize().map_err(|e| map_hound(path, e))
}

/// Reads only the header and returns the duration in seconds.
pub fn probe_duration(path: impl AsRef<Path>) -> Result<f64> {
    let path = path.as_ref();
    let reader = hound::WavReader::open(path).map_err(|e| map_hound(path, e))?;
    let spec = reader.spec();
    if spec.sample_rate == 0 {
        return Err(AudioError::MalformedContainer {
            path: path_str(path),
            reason: "zero sample rate".into(),
        });
    }
    Ok(reader.duration() as f64 / spec.sample_rate as f64)
}

// Kaiser-windowed sinc interpolator.
const SINC_ZERO_CROSSINGS: f64 = 32.0;
const KAISER_BETA: f64 = 8.0;
const ROLLOFF: f64 = 0.92;

fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let half = x / 2.0;
    for k in 1..64 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Output length for a rate change: `round(len * target / source)`.
pub fn resampled_len(len: usize, source_rate: u32, target_rate: u32) -> usize {
    let num = len as u128 * target_rate as u128 * 2 + source_rate as u128;
    (num / (2 * source_rate as u128)) as usize
}

/// Band-limited resampling to `target_rate`.
///
/// The anti-aliasing cutoff sits at 92% of the lower Nyquist frequency; the
/// Kaiser window (beta 8, 32 zero crossings) gives roughly 80 dB of stopband
/// attenuation. Resampling to the buffer's own rate returns it unchanged.
pub fn resample(buffer: &AudioBuffer, target_rate: u32) -> Result<AudioBuffer> {
    if target_rate == 0 {
        return Err(AudioError::InvalidSampleRate(target_rate));
    }
    let source_rate = buffer.sample_rate;
    if source_rate == target_rate {
        return Ok(buffer.clone());
    }
    let out_len = resampled_len(buffer.len(), source_rate, target_rate).max(1);
    let x = &buffer.samples;
    let n_in = x.len() as i64;

    // Cutoff expressed in cycles per input sample.
    let cutoff = ROLLOFF * 0.5 * (target_rate.min(source_rate) as f64 / source_rate as f64);
    let half_width = SINC_ZERO_CROSSINGS / (2.0 * cutoff);
    let i0_beta = bessel_i0(KAISER_BETA);
    let kernel = |t: f64| -> f64 {
        let r = t / half_width;
        if r.abs() >= 1.0 {
            return 0.0;
        }
        let window = bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / i0_beta;
        let arg = 2.0 * cutoff * t;
        let sinc = if arg.abs() < 1e-12 {
            1.0
        } else {
            (PI * arg).sin() / (PI * arg)
        };
        2.0 * cutoff * sinc * window
    };

    let step = source_rate as f64 / target_rate as f64;
    let out: Vec<f64> = (0..out_len)
        .map(|n| {
            let t = n as f64 * step;
            let lo = (t - half_width).ceil() as i64;
            let hi = (t + half_width).floor() as i64;
            let mut acc = 0.0f64;
            for k in lo.max(0)..=hi.min(n_in - 1) {
                acc += x[k as usize] * kernel(t - k as f64);
            }
            acc
        })
        .collect();
    AudioBuffer::new(out, target_rate)
}
