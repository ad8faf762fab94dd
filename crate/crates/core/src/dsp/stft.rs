use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{Clip, DspError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StftConfig {
    pub window: usize,
    pub hop: usize,
}

impl Default for StftConfig {
    fn default() -> Self {
        StftConfig { window: 512, hop: 128 }
    }
}

impl StftConfig {
    pub fn bins(&self) -> usize {
        self.window / 2 + 1
    }

    /// Periodic Hann window.
    pub fn hann(&self) -> Vec<f64> {
        let n = self.window as f64;
        (0..self.window)
            .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n).cos())
            .collect()
    }

    /// Constant value of the overlapped squared window, or an error if the
    /// overlap is not constant.
    pub fn overlap_gain(&self) -> Result<f64, DspError> {
        let bad = DspError::BadWindowConfig { window: self.window, hop: self.hop };
        if self.window < 2 || self.hop == 0 || self.hop > self.window || !self.window.is_multiple_of(self.hop) {
            return Err(bad);
        }
        let w = self.hann();
        let sums: Vec<f64> = (0..self.hop)
            .map(|n| w.iter().skip(n).step_by(self.hop).map(|v| v * v).sum())
            .collect();
        let first = sums[0];
        if first <= 0.0 || sums.iter().any(|s| (s - first).abs() > 1e-9 * first) {
            return Err(bad);
        }
        Ok(first)
    }

    fn front_pad(&self) -> usize {
        self.window - self.hop
    }
}

/// One-sided complex spectrogram, stored frame-major:
/// `frames[t][k]` for bin `k` of frame `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrogram {
    pub frames: Vec<Vec<Complex64>>,
    pub config: StftConfig,
    /// Length of the analysed signal, used to trim the inverse.
    pub signal_len: usize,
    pub rate: u32,
}

impl Spectrogram {
    pub fn n_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn n_bins(&self) -> usize {
        self.config.bins()
    }

    pub fn magnitudes(&self) -> Vec<Vec<f64>> {
        self.frames.iter().map(|f| f.iter().map(|c| c.norm()).collect()).collect()
    }

    /// Bin centre frequency in Hz.
    pub fn bin_hz(&self, k: usize) -> f64 {
        k as f64 * f64::from(self.rate) / self.config.window as f64
    }

    /// Sum of one-sided bin energies, compensated for window overlap so that
    /// it equals the waveform's sum of squares.
    pub fn energy(&self) -> Result<f64, DspError> {
        let gain = self.config.overlap_gain()?;
        let n = self.config.window;
        let last = n / 2;
        let total: f64 = self
            .frames
            .iter()
            .map(|f| {
                f.iter()
                    .enumerate()
                    .map(|(k, c)| {
                        let weight = if k == 0 || k == last { 1.0 } else { 2.0 };
                        weight * c.norm_sqr()
                    })
                    .sum::<f64>()
            })
            .sum();
        Ok(total / n as f64 / gain)
    }
}

struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

fn plans(n: usize) -> Plans {
    let mut planner = FftPlanner::new();
    Plans { forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n) }
}

/// Hann-windowed STFT. The signal is front-padded by `window - hop` zeros
/// and framed until the last sample is covered, so the inverse is exact
/// over the whole clip.
pub fn stft(clip: &Clip, config: StftConfig) -> Result<Spectrogram, DspError> {
    config.overlap_gain()?;
    let w = config.hann();
    let pad = config.front_pad();
    let len = clip.len();
    let n_frames = if len == 0 { 1 } else { (pad + len - 1) / config.hop + 1 };
    let fft = plans(config.window).forward;
    let x = clip.samples();
    let mut buf = vec![Complex64::new(0.0, 0.0); config.window];
    let frames = (0..n_frames)
        .map(|t| {
            let start = t * config.hop;
            for (i, b) in buf.iter_mut().enumerate() {
                let idx = start + i;
                let v = if idx >= pad && idx - pad < len { x[idx - pad] } else { 0.0 };
                *b = Complex64::new(v * w[i], 0.0);
            }
            fft.process(&mut buf);
            buf[..config.bins()].to_vec()
        })
        .collect();
    Ok(Spectrogram { frames, config, signal_len: len, rate: clip.rate() })
}

/// Weighted overlap-add inverse of [`stft`].
pub fn istft(spec: &Spectrogram) -> Result<Clip, DspError> {
    let config = spec.config;
    let gain = config.overlap_gain()?;
    let n = config.window;
    let w = config.hann();
    let pad = config.front_pad();
    let ifft = plans(n).inverse;
    let total = spec.frames.len().saturating_sub(1) * config.hop + n;
    let mut acc = vec![0.0; total.max(pad + spec.signal_len)];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for (t, frame) in spec.frames.iter().enumerate() {
        for k in 0..n {
            buf[k] = if k <= n / 2 { frame[k] } else { frame[n - k].conj() };
        }
        buf[0].im = 0.0;
        buf[n / 2].im = 0.0;
        ifft.process(&mut buf);
        let start = t * config.hop;
        for i in 0..n {
            acc[start + i] += buf[i].re / n as f64 * w[i];
        }
    }
    let samples = acc[pad..pad + spec.signal_len].iter().map(|v| v / gain).collect();
    Clip::new(samples, spec.rate)
}
