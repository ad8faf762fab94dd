//! SNR-controlled gain assignment and mixture synthesis.
//!
//! The reference source (first speech source, else the first source) keeps
//! unit gain. Every other source gets a relative level drawn per signature:
//! speech from a range picked by its `volume` attribute, audio uniformly
//! from [-3, 3] dB. Levels are ratios of mean-square energy over the whole
//! conditioned clip.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::Clip;
use crate::instruction::{Action, Level, Signature};
use crate::seed;

/// Relative level ranges in dB for speech by volume attribute.
pub const SPEECH_SNR_LOW: (f64, f64) = (-3.0, -2.0);
pub const SPEECH_SNR_NORMAL: (f64, f64) = (-1.0, 1.0);
pub const SPEECH_SNR_HIGH: (f64, f64) = (2.0, 3.0);
pub const AUDIO_SNR: (f64, f64) = (-3.0, 3.0);

/// Peak after rescaling a clipping mixture pair.
pub const PEAK_TARGET: f64 = 0.99;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MixError {
    #[error("no sources given")]
    NoSources,
    #[error("source {0} has zero energy")]
    SilentSource(usize),
    #[error("source {index} has {got} samples at {rate} Hz, expected {expected} at {expected_rate} Hz")]
    LengthMismatch { index: usize, expected: usize, expected_rate: u32, got: usize, rate: u32 },
    #[error("{actions} actions for {sources} sources")]
    ActionCount { actions: usize, sources: usize },
}

/// Per-source linear gains and the levels they realise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GainAssignment {
    pub gains: Vec<f64>,
    pub reference: usize,
    /// Level of each scaled source relative to the scaled reference, dB.
    /// The reference entry is 0.
    pub snr_db: Vec<f64>,
}

/// Level range a source's relative SNR is drawn from.
pub fn snr_range(signature: &Signature) -> (f64, f64) {
    match signature {
        Signature::Speech { style } => match style.volume {
            Level::Low => SPEECH_SNR_LOW,
            Level::Normal => SPEECH_SNR_NORMAL,
            Level::High => SPEECH_SNR_HIGH,
        },
        Signature::Audio { .. } => AUDIO_SNR,
    }
}

pub fn reference_index(signatures: &[Signature]) -> usize {
    signatures.iter().position(Signature::is_speech).unwrap_or(0)
}

/// Draws a relative level for every source. Each draw depends only on
/// `(seed, signature)`, so reordering the list does not change the level a
/// given source receives.
pub fn draw_snrs(signatures: &[Signature], seed: u64) -> Vec<f64> {
    let reference = reference_index(signatures);
    signatures
        .iter()
        .enumerate()
        .map(|(i, sig)| {
            if i == reference {
                return 0.0;
            }
            let (lo, hi) = snr_range(sig);
            seed::rng(seed::derive_named(seed, &sig.key())).gen_range(lo..=hi)
        })
        .collect()
}

/// Gains realising `snr_db` exactly relative to `reference`.
pub fn gains_for_snrs(clips: &[Clip], reference: usize, snr_db: &[f64]) -> Result<Vec<f64>, MixError> {
    if clips.is_empty() {
        return Err(MixError::NoSources);
    }
    check_lengths(clips)?;
    let energies: Vec<f64> = clips.iter().map(Clip::energy).collect();
    if let Some(i) = energies.iter().position(|e| *e <= 0.0) {
        return Err(MixError::SilentSource(i));
    }
    let e_ref = energies[reference];
    Ok(energies
        .iter()
        .zip(snr_db)
        .enumerate()
        .map(|(i, (e, snr))| {
            if i == reference {
                1.0
            } else {
                (e_ref * 10f64.powf(snr / 10.0) / e).sqrt()
            }
        })
        .collect())
}

/// Draws relative levels and converts them to gains.
pub fn assign_gains(sources: &[(Clip, Signature)], seed: u64) -> Result<GainAssignment, MixError> {
    if sources.is_empty() {
        return Err(MixError::NoSources);
    }
    let signatures: Vec<Signature> = sources.iter().map(|(_, s)| s.clone()).collect();
    let clips: Vec<Clip> = sources.iter().map(|(c, _)| c.clone()).collect();
    let reference = reference_index(&signatures);
    let snr_db = draw_snrs(&signatures, seed);
    let gains = gains_for_snrs(&clips, reference, &snr_db)?;
    Ok(GainAssignment { gains, reference, snr_db })
}

fn check_lengths(sources: &[Clip]) -> Result<(), MixError> {
    let first = sources.first().ok_or(MixError::NoSources)?;
    for (index, s) in sources.iter().enumerate() {
        if s.len() != first.len() || s.rate() != first.rate() {
            return Err(MixError::LengthMismatch {
                index,
                expected: first.len(),
                expected_rate: first.rate(),
                got: s.len(),
                rate: s.rate(),
            });
        }
    }
    Ok(())
}

/// Sample-wise weighted sum `Σ w_i s_i`.
pub fn weighted_sum(sources: &[Clip], weights: &[f64]) -> Result<Clip, MixError> {
    check_lengths(sources)?;
    if weights.len() != sources.len() {
        return Err(MixError::ActionCount { actions: weights.len(), sources: sources.len() });
    }
    let mut out = vec![0.0; sources[0].len()];
    for (s, w) in sources.iter().zip(weights) {
        for (o, x) in out.iter_mut().zip(s.samples()) {
            *o += w * x;
        }
    }
    Ok(Clip::new(out, sources[0].rate()).expect("sum of finite samples"))
}

/// `x = Σ s_i`.
pub fn mix(sources: &[Clip]) -> Result<Clip, MixError> {
    weighted_sum(sources, &vec![1.0; sources.len()])
}

/// `y = Σ α(a_i) s_i`.
pub fn target_mixture(sources: &[Clip], actions: &[Action]) -> Result<Clip, MixError> {
    let alphas: Vec<f64> = actions.iter().map(|a| a.alpha()).collect();
    weighted_sum(sources, &alphas)
}

/// Input, target and the scaled sources that produced them.
#[derive(Clone, Debug, PartialEq)]
pub struct MixturePair {
    pub input: Clip,
    pub target: Clip,
    pub sources: Vec<Clip>,
    pub actions: Vec<Action>,
    /// Common factor applied to avoid clipping (1.0 when untouched).
    pub normalization: f64,
}

impl MixturePair {
    /// Mixes already-scaled sources. If any sample of the input, target or a
    /// source exceeds 1.0 in magnitude, everything is rescaled by one common
    /// factor to peak at [`PEAK_TARGET`].
    pub fn build(sources: Vec<Clip>, actions: Vec<Action>) -> Result<Self, MixError> {
        if actions.len() != sources.len() {
            return Err(MixError::ActionCount { actions: actions.len(), sources: sources.len() });
        }
        let input = mix(&sources)?;
        let target = target_mixture(&sources, &actions)?;
        let peak = sources
            .iter()
            .map(Clip::peak)
            .fold(input.peak().max(target.peak()), f64::max);
        if peak <= 1.0 {
            return Ok(MixturePair { input, target, sources, actions, normalization: 1.0 });
        }
        let k = PEAK_TARGET / peak;
        let sources: Vec<Clip> = sources.iter().map(|s| s.scaled(k)).collect();
        let input = mix(&sources)?;
        let target = target_mixture(&sources, &actions)?;
        Ok(MixturePair { input, target, sources, actions, normalization: k })
    }
}
