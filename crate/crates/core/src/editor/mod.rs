//! Reference editors: the exact waveform oracle, ideal STFT masks, and a
//! small FiLM-conditioned mask network with hand-written gradients.

mod checkpoint;
mod embed;
mod export;
mod film;
mod train;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CheckpointError};
pub use embed::{embed_instruction, DEFAULT_EMBED_DIM};
pub use export::{mask_to_mel, to_csv, to_pgm};
pub use film::{
    snr_loss_grad, Conditioning, FilmConfig, FilmMaskNet, FilmOutput, Gradients, LossAndGrad,
};
pub use train::{pit_loss_grad, toy_dataset, train_toy, Optimizer, ToyExample, TrainConfig, TrainReport};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::{istft, stft, Clip, DspError, StftConfig};
use crate::instruction::Action;
use crate::mixer::{self, MixError};

/// Upper clamp for every editing mask.
pub const DEFAULT_M_MAX: f64 = 4.0;
/// Floor used in mask denominators.
pub const MASK_EPS: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EditorError {
    #[error(transparent)]
    Mix(#[from] MixError),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error("mask is {got_frames}x{got_bins}, spectrogram is {frames}x{bins}")]
    DimMismatch { frames: usize, bins: usize, got_frames: usize, got_bins: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("training diverged at step {step}")]
    Diverged { step: usize },
    #[error(transparent)]
    Metric(#[from] crate::metrics::MetricError),
}

/// Gains on a frame-major grid: `values[frame][band]`, where a band is an
/// STFT bin or a latent channel. Entries lie in `[0, m_max]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EditingMask {
    pub values: Vec<Vec<f64>>,
    pub m_max: f64,
}

impl EditingMask {
    pub fn constant(frames: usize, bands: usize, value: f64, m_max: f64) -> Self {
        EditingMask { values: vec![vec![value.clamp(0.0, m_max); bands]; frames], m_max }
    }

    pub fn n_frames(&self) -> usize {
        self.values.len()
    }

    pub fn n_bands(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    pub fn is_valid(&self) -> bool {
        self.values.iter().flatten().all(|v| v.is_finite() && (0.0..=self.m_max).contains(v))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskKind {
    /// Ideal ratio mask `|Y| / |X|`.
    Irm,
    /// Phase-sensitive mask `Re(Y X*) / |X|²`.
    Psm,
}

/// The ground-truth editor: `Σ α_i s_i`, identical to the mixer's target.
pub fn oracle_edit(sources: &[Clip], actions: &[Action]) -> Result<Clip, EditorError> {
    Ok(mixer::target_mixture(sources, actions)?)
}

fn mask_value(kind: MaskKind, x: Complex64, y: Complex64, m_max: f64) -> f64 {
    let v = match kind {
        MaskKind::Irm => y.norm() / x.norm().max(MASK_EPS),
        MaskKind::Psm => (y * x.conj()).re / x.norm_sqr().max(MASK_EPS),
    };
    v.clamp(0.0, m_max)
}

/// Oracle time-frequency mask turning `mixture` into `target`.
pub fn ideal_mask(mixture: &Clip, target: &Clip, kind: MaskKind, m_max: f64) -> Result<EditingMask, EditorError> {
    mixture.check_compatible(target)?;
    let cfg = StftConfig::default();
    let x = stft(mixture, cfg)?;
    let y = stft(target, cfg)?;
    let values = x
        .frames
        .iter()
        .zip(&y.frames)
        .map(|(xf, yf)| xf.iter().zip(yf).map(|(a, b)| mask_value(kind, *a, *b, m_max)).collect())
        .collect();
    Ok(EditingMask { values, m_max })
}

/// `istft(mask ⊙ stft(mixture))`, same length as the mixture.
pub fn mask_edit(mixture: &Clip, mask: &EditingMask) -> Result<Clip, EditorError> {
    let mut spec = stft(mixture, StftConfig::default())?;
    if mask.n_frames() != spec.n_frames() || mask.n_bands() != spec.n_bins() {
        return Err(EditorError::DimMismatch {
            frames: spec.n_frames(),
            bins: spec.n_bins(),
            got_frames: mask.n_frames(),
            got_bins: mask.n_bands(),
        });
    }
    for (frame, gains) in spec.frames.iter_mut().zip(&mask.values) {
        for (c, g) in frame.iter_mut().zip(gains) {
            *c *= *g;
        }
    }
    Ok(istft(&spec)?)
}
