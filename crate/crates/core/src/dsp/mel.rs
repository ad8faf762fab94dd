/// Triangular Mel filterbank over one-sided STFT bins (HTK Mel formula).
#[derive(Clone, Debug, PartialEq)]
pub struct MelFilterbank {
    /// `weights[m][k]`: weight of bin `k` in band `m`.
    pub weights: Vec<Vec<f64>>,
    pub centers_hz: Vec<f64>,
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// `n_mels` triangles with edges equally spaced in Mel between `f_min` and
/// `f_max`, evaluated at the bin centre frequencies.
pub fn mel_filterbank(n_mels: usize, n_bins: usize, rate: u32, f_min: f64, f_max: f64) -> MelFilterbank {
    let lo = hz_to_mel(f_min);
    let hi = hz_to_mel(f_max);
    let edges: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (n_mels + 1) as f64))
        .collect();
    let window = 2 * (n_bins - 1);
    let bin_hz: Vec<f64> = (0..n_bins).map(|k| k as f64 * f64::from(rate) / window as f64).collect();
    let weights = (0..n_mels)
        .map(|m| {
            let (l, c, r) = (edges[m], edges[m + 1], edges[m + 2]);
            bin_hz
                .iter()
                .map(|&f| {
                    let up = (f - l) / (c - l);
                    let down = (r - f) / (r - c);
                    up.min(down).max(0.0)
                })
                .collect()
        })
        .collect();
    MelFilterbank { weights, centers_hz: edges[1..=n_mels].to_vec() }
}

/// Projects magnitude frames (`frames[t][k]`) onto a 0–8 kHz Mel scale,
/// returning `out[t][m]`.
pub fn mel_project(magnitudes: &[Vec<f64>], n_mels: usize, rate: u32) -> Vec<Vec<f64>> {
    let Some(first) = magnitudes.first() else {
        return Vec::new();
    };
    let fb = mel_filterbank(n_mels, first.len(), rate, 0.0, 8000.0_f64.min(f64::from(rate) / 2.0));
    apply(&fb, magnitudes)
}

pub(crate) fn apply(fb: &MelFilterbank, magnitudes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    magnitudes
        .iter()
        .map(|frame| {
            fb.weights
                .iter()
                .map(|row| row.iter().zip(frame).map(|(w, x)| w * x).sum())
                .collect()
        })
        .collect()
}
