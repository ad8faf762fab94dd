//! Waveform primitives: clips, resampling, crop/pad, STFT and Mel projection.

mod mel;
mod resample;
mod stft;

pub use mel::{mel_filterbank, mel_project, hz_to_mel, mel_to_hz, MelFilterbank};
pub use resample::{resample, Resampler, ResamplerConfig};
pub use stft::{istft, stft, Spectrogram, StftConfig};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed;

/// Sample rate every source is brought to before mixing.
pub const SAMPLE_RATE: u32 = 16_000;
/// Conditioned clip duration in seconds.
pub const CLIP_SECONDS: f64 = 5.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DspError {
    #[error("clip has no samples")]
    EmptyClip,
    #[error("sample rate must be positive")]
    BadRate,
    #[error("sample {index} is not finite ({value})")]
    NonFinite { index: usize, value: f64 },
    #[error("window {window} with hop {hop} does not satisfy the overlap-add condition")]
    BadWindowConfig { window: usize, hop: usize },
    #[error("expected {expected} samples at {expected_rate} Hz, got {got} at {rate} Hz")]
    Mismatch { expected: usize, expected_rate: u32, got: usize, rate: u32 },
}

/// Mono waveform. Samples are nominally in [-1, 1].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Clip {
    samples: Vec<f64>,
    rate: u32,
}

impl Clip {
    pub fn new(samples: Vec<f64>, rate: u32) -> Result<Self, DspError> {
        if rate == 0 {
            return Err(DspError::BadRate);
        }
        if let Some((index, value)) = samples.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(DspError::NonFinite { index, value: *value });
        }
        Ok(Clip { samples, rate })
    }

    pub fn zeros(len: usize, rate: u32) -> Self {
        Clip { samples: vec![0.0; len], rate: rate.max(1) }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn rate(&self) -> u32 {
        self.rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.rate)
    }

    /// Mean-square energy; 0 for an empty clip.
    pub fn energy(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|x| x * x).sum::<f64>() / self.samples.len() as f64
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn scaled(&self, gain: f64) -> Clip {
        Clip { samples: self.samples.iter().map(|x| x * gain).collect(), rate: self.rate }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Clip {
        Clip { samples: self.samples.iter().map(|x| f(*x)).collect(), rate: self.rate }
    }

    /// Errors unless `other` has the same length and rate.
    pub fn check_compatible(&self, other: &Clip) -> Result<(), DspError> {
        if self.len() != other.len() || self.rate != other.rate {
            return Err(DspError::Mismatch {
                expected: self.len(),
                expected_rate: self.rate,
                got: other.len(),
                rate: other.rate,
            });
        }
        Ok(())
    }
}

/// Crops or zero-pads a 16 kHz clip to exactly `duration_s` seconds.
///
/// Longer clips keep a contiguous window whose start is drawn uniformly
/// from the seeded stream; shorter ones are padded with zeros at the end.
pub fn condition(clip: &Clip, duration_s: f64, seed: u64) -> Result<Clip, DspError> {
    if clip.is_empty() {
        return Err(DspError::EmptyClip);
    }
    let target = (duration_s * f64::from(clip.rate)).round() as usize;
    let samples = clip.samples();
    let out = if samples.len() > target {
        let start = seed::rng(seed).gen_range(0..=samples.len() - target);
        samples[start..start + target].to_vec()
    } else {
        let mut v = samples.to_vec();
        v.resize(target, 0.0);
        v
    };
    Ok(Clip { samples: out, rate: clip.rate })
}

/// Resamples to 16 kHz and conditions to the standard 5 s length.
pub fn prepare_source(clip: &Clip, seed: u64) -> Result<Clip, DspError> {
    if clip.is_empty() {
        return Err(DspError::EmptyClip);
    }
    let at_rate = resample(clip, SAMPLE_RATE);
    condition(&at_rate, CLIP_SECONDS, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clip_rejects_non_finite() {
        assert!(matches!(
            Clip::new(vec![0.0, f64::NAN], 16_000),
            Err(DspError::NonFinite { index: 1, .. })
        ));
        assert_eq!(Clip::new(vec![0.0], 0), Err(DspError::BadRate));
    }

    #[test]
    fn pads_short_clips_at_the_end() {
        let clip = Clip::new(vec![0.25; 3 * 16_000], 16_000).unwrap();
        let out = condition(&clip, 5.0, 1).unwrap();
        assert_eq!(out.len(), 80_000);
        assert!(out.samples()[..48_000].iter().all(|x| *x == 0.25));
        assert!(out.samples()[48_000..].iter().all(|x| *x == 0.0));
    }

    #[test]
    fn crops_long_clips_deterministically() {
        let clip = Clip::new((0..160_000).map(|i| i as f64 / 160_000.0).collect(), 16_000).unwrap();
        let a = condition(&clip, 5.0, 9).unwrap();
        let b = condition(&clip, 5.0, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 80_000);
        // contiguous window
        let start = (a.samples()[0] * 160_000.0).round() as usize;
        assert_eq!(a.samples(), &clip.samples()[start..start + 80_000]);
    }

    #[test]
    fn exact_length_is_unchanged_and_idempotent() {
        let clip = Clip::new((0..80_000).map(|i| (i as f64 * 0.01).sin()).collect(), 16_000).unwrap();
        let once = condition(&clip, 5.0, 3).unwrap();
        assert_eq!(once, clip);
        assert_eq!(condition(&once, 5.0, 77).unwrap(), once);
    }

    #[test]
    fn empty_clip_is_an_error() {
        assert_eq!(condition(&Clip::zeros(0, 16_000), 5.0, 0), Err(DspError::EmptyClip));
    }
}
