use std::fmt::Write as _;

use super::EditingMask;
use crate::dsp::mel_filterbank;

/// Mel-band view of an STFT-domain mask: each output cell is the
/// triangle-weighted average of the bin gains in that band, so a constant
/// mask stays constant. Returns `out[band][frame]` with band 0 lowest.
pub fn mask_to_mel(mask: &EditingMask, n_mels: usize, rate: u32) -> Vec<Vec<f64>> {
    let bins = mask.n_bands();
    if bins < 2 || n_mels == 0 {
        return Vec::new();
    }
    let fb = mel_filterbank(n_mels, bins, rate, 0.0, 8000.0_f64.min(f64::from(rate) / 2.0));
    fb.weights
        .iter()
        .map(|row| {
            let total: f64 = row.iter().sum();
            mask.values
                .iter()
                .map(|frame| {
                    if total <= 0.0 {
                        0.0
                    } else {
                        row.iter().zip(frame).map(|(w, g)| w * g).sum::<f64>() / total
                    }
                })
                .collect()
        })
        .collect()
}

/// Comma-separated rows, one per grid row.
pub fn to_csv(grid: &[Vec<f64>]) -> String {
    let mut out = String::new();
    for row in grid {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
    out
}

/// Binary 8-bit greyscale PGM (`P5`). Rows are flipped so grid row 0 ends
/// up at the bottom of the image; values are scaled by `255 / max_value`.
pub fn to_pgm(grid: &[Vec<f64>], max_value: f64) -> Vec<u8> {
    let height = grid.len();
    let width = grid.first().map_or(0, Vec::len);
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    for row in grid.iter().rev() {
        for x in 0..width {
            let v = row.get(x).copied().unwrap_or(0.0);
            let scaled = if max_value > 0.0 { (v / max_value * 255.0).round() } else { 0.0 };
            out.push(scaled.clamp(0.0, 255.0) as u8);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_mask_stays_constant() {
        let m = EditingMask::constant(5, 257, 2.0, 4.0);
        let mel = mask_to_mel(&m, 80, 16_000);
        assert_eq!(mel.len(), 80);
        for row in &mel {
            assert_eq!(row.len(), 5);
            for v in row {
                assert!((v - 2.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn csv_and_pgm_layout() {
        let grid = vec![vec![0.0, 4.0], vec![2.0, 1.0]];
        assert_eq!(to_csv(&grid), "0,4\n2,1\n");
        let pgm = to_pgm(&grid, 4.0);
        let header = b"P5\n2 2\n255\n";
        assert_eq!(&pgm[..header.len()], header);
        assert_eq!(&pgm[header.len()..], &[128, 64, 0, 255]);
    }
}
