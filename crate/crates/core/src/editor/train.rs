//! Full-batch training for the toy FiLM editor.

use serde::{Deserialize, Serialize};

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng;

use super::film::{neg_snr_grad, Conditioning, FilmMaskNet, Gradients};
use super::{embed_instruction, snr_loss_grad, EditorError};
use crate::dsp::{Clip, SAMPLE_RATE};
use itertools::Itertools;

use crate::metrics::{pit_snr, snr_samples, MetricValue, PitResult, CLAMP_DB};
use crate::prompt::{SimplifiedEdit, SimplifiedInstruction, Target};
use crate::seed;
use crate::taskspace::nontrivial_vectors;

/// One training tuple. `sources` holds the scaled references `α_i s_i`
/// and is only needed by the permutation-invariant loss.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToyExample {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub y: Vec<f64>,
    #[serde(default)]
    pub sources: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
#[derive(Default)]
pub enum Optimizer {
    /// Plain gradient descent.
    #[default]
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}


#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub steps: usize,
    pub lr: f64,
    pub optimizer: Optimizer,
    /// Use the multi-mask permutation-invariant objective.
    pub pit: bool,
    /// Stop as soon as the batch loss falls below this value (dB).
    pub stop_below: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { steps: 200, lr: 1e-3, optimizer: Optimizer::Sgd, pit: false, stop_below: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean loss (dB) over the batch before each update. With early
    /// stopping the last entry is the loss of the returned network.
    pub losses: Vec<f64>,
    /// Mean loss after the last update.
    pub final_loss: f64,
}

impl TrainReport {
    pub fn initial_loss(&self) -> f64 {
        self.losses.first().copied().unwrap_or(self.final_loss)
    }
}

impl ToyExample {
    /// A two-source tonal example: a harmonic "voice" (f0 150–300 Hz, four
    /// partials) and a pure tone at 2–5 kHz, edited by a random nontrivial
    /// action pair. `z` embeds the edit as group-level targets.
    pub fn tonal(len: usize, embed_dim: usize, seed_value: u64) -> Self {
        let mut rng = seed::rng(seed_value);
        let rate = f64::from(SAMPLE_RATE);
        let f0 = rng.gen_range(150.0..300.0);
        let phases: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
        let voice: Vec<f64> = (0..len)
            .map(|i| {
                let t = i as f64 / rate;
                (0..4).map(|h| 0.3 / (h + 1) as f64 * (2.0 * PI * f0 * (h + 1) as f64 * t + phases[h]).sin()).sum()
            })
            .collect();
        let f1 = rng.gen_range(2000.0..5000.0);
        let phase = rng.gen_range(0.0..2.0 * PI);
        let tone: Vec<f64> = (0..len).map(|i| 0.3 * (2.0 * PI * f1 * i as f64 / rate + phase).sin()).collect();
        let vectors = nontrivial_vectors(2);
        let actions = vectors.choose(&mut rng).cloned().unwrap_or_default();
        let scaled: Vec<Vec<f64>> = [&voice, &tone]
            .iter()
            .zip(&actions)
            .map(|(s, a)| s.iter().map(|v| a.alpha() * v).collect())
            .collect();
        let x = voice.iter().zip(&tone).map(|(a, b)| a + b).collect();
        let y = scaled[0].iter().zip(&scaled[1]).map(|(a, b)| a + b).collect();
        let edits = actions
            .iter()
            .zip([Target::AllSpeech, Target::AllAudio])
            .map(|(&action, target)| SimplifiedEdit { action, target })
            .collect();
        let z = embed_instruction(&SimplifiedInstruction::new(edits), embed_dim);
        ToyExample { x, z, y, sources: Some(scaled) }
    }
}

/// `count` tonal examples with per-example seeds derived from `seed_value`.
pub fn toy_dataset(count: usize, len: usize, embed_dim: usize, seed_value: u64) -> Vec<ToyExample> {
    (0..count).map(|i| ToyExample::tonal(len, embed_dim, seed::derive(seed_value, i as u64))).collect()
}

fn to_clip(v: &[f64]) -> Result<Clip, EditorError> {
    Ok(Clip::new(v.to_vec(), SAMPLE_RATE)?)
}

/// `−(1/N) Σ_i SNR(ŝ_π(i), s̄_i) − SNR(ŷ, y)` with the best permutation
/// `π`, and its gradient. Clamped terms contribute no gradient.
pub fn pit_loss_grad(net: &FilmMaskNet, ex: &ToyExample) -> Result<(f64, Gradients), EditorError> {
    let refs = ex
        .sources
        .as_ref()
        .ok_or_else(|| EditorError::ShapeMismatch("permutation-invariant loss needs per-source references".into()))?;
    let n = net.config().n_masks;
    if refs.len() != n {
        return Err(EditorError::ShapeMismatch(format!("{} references for {n} masks", refs.len())));
    }
    let out = net.forward(&ex.x, Conditioning::Embedding(&ex.z))?;
    let pit = if refs.iter().all(|r| r.iter().any(|v| *v != 0.0)) {
        let est: Vec<Clip> = out.sources.iter().map(|s| to_clip(s)).collect::<Result<_, _>>()?;
        let reference: Vec<Clip> = refs.iter().map(|s| to_clip(s)).collect::<Result<_, _>>()?;
        pit_snr(&est, &reference)?
    } else {
        pit_with_silent(&out.sources, refs)?
    };
    let total = snr_samples(&out.output, &ex.y)?;
    let loss = -pit.mean.value - total.value;

    let d_total = neg_snr_grad(&out.output, &ex.y, total);
    let mut d_sources = vec![d_total; n];
    for (r, &e) in pit.permutation.iter().enumerate() {
        let g = neg_snr_grad(&out.sources[e], &refs[r], pit.per_source[r]);
        for (d, v) in d_sources[e].iter_mut().zip(g) {
            *d += v / n as f64;
        }
    }
    let grads = net.backward(&out, &d_sources)?;
    Ok((loss, grads))
}

/// Permutation search when some references are silent (removed sources).
/// Their SNR is undefined; it is taken as the low clamp, a constant that
/// does not depend on the permutation and carries no gradient.
fn pit_with_silent(est: &[Vec<f64>], refs: &[Vec<f64>]) -> Result<PitResult, EditorError> {
    let silent = MetricValue { value: -CLAMP_DB, finite: false };
    let n = refs.len();
    let table: Vec<Vec<MetricValue>> = refs
        .iter()
        .map(|r| {
            if r.iter().all(|v| *v == 0.0) {
                Ok(vec![silent; n])
            } else {
                est.iter().map(|e| snr_samples(e, r)).collect()
            }
        })
        .collect::<Result<_, _>>()?;
    let mut best: Option<(f64, Vec<usize>)> = None;
    for perm in (0..n).permutations(n) {
        let total: f64 = perm.iter().enumerate().map(|(r, &e)| table[r][e].value).sum();
        if best.as_ref().is_none_or(|(b, _)| total > *b) {
            best = Some((total, perm));
        }
    }
    let (total, permutation) = best.unwrap_or((0.0, Vec::new()));
    let per_source: Vec<MetricValue> = permutation.iter().enumerate().map(|(r, &e)| table[r][e]).collect();
    let mean = MetricValue { value: total / n.max(1) as f64, finite: per_source.iter().all(|m| m.finite) };
    Ok(PitResult { permutation, mean, per_source })
}

fn batch(net: &FilmMaskNet, data: &[ToyExample], pit: bool) -> Result<(f64, Vec<f64>), EditorError> {
    let mut loss = 0.0;
    let mut grad = vec![0.0; net.params().len()];
    for ex in data {
        let (l, g) = if pit {
            pit_loss_grad(net, ex)?
        } else {
            let lg = snr_loss_grad(net, &ex.x, &ex.z, &ex.y)?;
            (lg.loss, lg.grads)
        };
        loss += l;
        for (a, b) in grad.iter_mut().zip(&g.params) {
            *a += b;
        }
    }
    let k = data.len().max(1) as f64;
    grad.iter_mut().for_each(|g| *g /= k);
    Ok((loss / k, grad))
}

/// Trains `net` in place with full-batch steps and returns the loss curve.
pub fn train_toy(net: &mut FilmMaskNet, data: &[ToyExample], cfg: &TrainConfig) -> Result<TrainReport, EditorError> {
    if data.is_empty() {
        return Err(EditorError::ShapeMismatch("empty training set".into()));
    }
    let mut losses = Vec::with_capacity(cfg.steps);
    let p = net.params().len();
    let (mut m, mut v) = (vec![0.0; p], vec![0.0; p]);
    for step in 0..cfg.steps {
        let (loss, grad) = batch(net, data, cfg.pit)?;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(EditorError::Diverged { step });
        }
        losses.push(loss);
        if cfg.stop_below.is_some_and(|t| loss < t) {
            return Ok(TrainReport { losses, final_loss: loss });
        }
        let params = net.params_mut();
        match cfg.optimizer {
            Optimizer::Sgd => {
                for (w, g) in params.iter_mut().zip(&grad) {
                    *w -= cfg.lr * g;
                }
            }
            Optimizer::Adam { beta1, beta2, eps } => {
                let t = (step + 1) as i32;
                let (c1, c2) = (1.0 - beta1.powi(t), 1.0 - beta2.powi(t));
                for i in 0..p {
                    m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
                    v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
                    params[i] -= cfg.lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
                }
            }
        }
        if params.iter().any(|w| !w.is_finite()) {
            return Err(EditorError::Diverged { step });
        }
    }
    let (final_loss, _) = batch(net, data, cfg.pit)?;
    if !final_loss.is_finite() {
        return Err(EditorError::Diverged { step: cfg.steps });
    }
    Ok(TrainReport { losses, final_loss })
}
