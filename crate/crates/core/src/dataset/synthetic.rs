//! A small fabricated catalog: harmonic "voices" whose pitch, syllable
//! rate, level and vibrato follow their style labels, and tonal / noisy
//! background sounds. Useful for tests and demos; no real recordings.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{io_err, write_wav, DatasetError, WavFormat};
use crate::dsp::{Clip, SAMPLE_RATE};
use crate::instruction::{Emotion, Gender, Level, StyleVector};
use crate::seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub speakers: usize,
    pub utterances_per_speaker: usize,
    pub audio_labels: Vec<String>,
    pub clips_per_label: usize,
    /// Clip lengths are drawn uniformly from this range, in seconds.
    pub min_seconds: f64,
    pub max_seconds: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            speakers: 40,
            utterances_per_speaker: 1,
            audio_labels: [
                "beep",
                "siren",
                "hum",
                "whistle",
                "bell",
                "chirp",
                "noise burst",
                "rain",
                "engine",
                "clock ticking",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
            clips_per_label: 4,
            min_seconds: 2.0,
            max_seconds: 4.0,
            seed: 2024,
        }
    }
}

fn level_index(l: Level) -> usize {
    match l {
        Level::Low => 0,
        Level::Normal => 1,
        Level::High => 2,
    }
}

/// Harmonic voice with syllable-rate amplitude modulation.
fn voice(style: &StyleVector, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let rate = f64::from(SAMPLE_RATE);
    let base = match style.gender {
        Gender::Male => 110.0,
        Gender::Female => 200.0,
    } * [0.8, 1.0, 1.25][level_index(style.pitch)]
        * rng.gen_range(0.95..1.05);
    let syllables = [3.0, 4.5, 6.0][level_index(style.tempo)];
    let amp = [0.15, 0.3, 0.5][level_index(style.volume)];
    let (vib_depth, tilt) = match style.emotion {
        Emotion::Angry => (0.02, 0.8),
        Emotion::Contempt => (0.005, 1.4),
        Emotion::Disgusted => (0.01, 1.3),
        Emotion::Fear => (0.04, 1.1),
        Emotion::Happy => (0.03, 1.0),
        Emotion::Sad => (0.01, 1.6),
        Emotion::Surprised => (0.05, 0.9),
        Emotion::Neutral => (0.0, 1.2),
    };
    let harmonics = ((3800.0 / base) as usize).min(24);
    let norm: f64 = (1..=harmonics).map(|h| (h as f64).powf(-tilt)).sum();
    let syl_phase = rng.gen_range(0.0..1.0);
    let mut phase = 0.0;
    (0..n)
        .map(|i| {
            let t = i as f64 / rate;
            let f0 = base * (1.0 + vib_depth * (2.0 * PI * 5.5 * t).sin() + 0.05 * (2.0 * PI * 0.3 * t).sin());
            phase += 2.0 * PI * f0 / rate;
            let s: f64 = (1..=harmonics).map(|h| (h as f64).powf(-tilt) * (h as f64 * phase).sin()).sum();
            let env = (PI * (syllables * t + syl_phase)).sin().abs().powf(0.7);
            amp * env * s / norm
        })
        .collect()
}

fn background(label: &str, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let rate = f64::from(SAMPLE_RATE);
    let t = |i: usize| i as f64 / rate;
    let amp = rng.gen_range(0.2..0.4);
    match label {
        "beep" => {
            let f = rng.gen_range(1000.0..2000.0);
            let period = rng.gen_range(0.4..0.8);
            (0..n).map(|i| if t(i) % period < 0.15 { amp * (2.0 * PI * f * t(i)).sin() } else { 0.0 }).collect()
        }
        "siren" => {
            let (lo, hi) = (rng.gen_range(500.0..700.0), rng.gen_range(1100.0..1500.0));
            let lfo = rng.gen_range(0.3..0.8);
            let mut ph = 0.0;
            (0..n)
                .map(|i| {
                    let f = lo + (hi - lo) * 0.5 * (1.0 + (2.0 * PI * lfo * t(i)).sin());
                    ph += 2.0 * PI * f / rate;
                    amp * ph.sin()
                })
                .collect()
        }
        "hum" => {
            let f = *[50.0, 60.0].choose(rng).unwrap_or(&50.0);
            (0..n).map(|i| amp * (1..=5).map(|h| (2.0 * PI * f * h as f64 * t(i)).sin() / h as f64).sum::<f64>() / 2.0).collect()
        }
        "whistle" => {
            let f = rng.gen_range(2500.0..3500.0);
            let mut ph = 0.0;
            (0..n)
                .map(|i| {
                    ph += 2.0 * PI * f * (1.0 + 0.01 * (2.0 * PI * 6.0 * t(i)).sin()) / rate;
                    amp * ph.sin()
                })
                .collect()
        }
        "bell" => {
            let f = rng.gen_range(400.0..900.0);
            let period = rng.gen_range(1.0..2.0);
            let ratios = [1.0, 2.76, 5.40, 8.93];
            (0..n)
                .map(|i| {
                    let tl = t(i) % period;
                    let e = (-3.0 * tl).exp();
                    amp * e * ratios.iter().enumerate().map(|(k, r)| (2.0 * PI * f * r * tl).sin() / (k + 1) as f64).sum::<f64>()
                })
                .collect()
        }
        "chirp" => {
            let period = rng.gen_range(0.3..0.6);
            let (f1, f2) = (rng.gen_range(1500.0..2500.0), rng.gen_range(4000.0..6000.0));
            (0..n)
                .map(|i| {
                    let tl = t(i) % period;
                    if tl > 0.1 {
                        return 0.0;
                    }
                    let k = (f2 - f1) / 0.1;
                    amp * (2.0 * PI * (f1 * tl + 0.5 * k * tl * tl)).sin() * (PI * tl / 0.1).sin()
                })
                .collect()
        }
        "noise burst" => {
            let period = rng.gen_range(0.5..1.0);
            (0..n).map(|i| if t(i) % period < 0.2 { amp * rng.gen_range(-1.0..1.0) } else { 0.0 }).collect()
        }
        "rain" => {
            let mut lp = 0.0;
            (0..n)
                .map(|_| {
                    let w: f64 = rng.gen_range(-1.0..1.0);
                    lp = 0.7 * lp + 0.3 * w;
                    let drop = if rng.gen_bool(0.002) { rng.gen_range(-1.0..1.0) } else { 0.0 };
                    amp * (0.8 * lp + drop)
                })
                .collect()
        }
        "engine" => {
            let f = rng.gen_range(30.0..80.0);
            (0..n)
                .map(|i| {
                    let x = (2.0 * PI * f * t(i)).sin();
                    amp * (x + 0.5 * (2.0 * x * x - 1.0) + 0.2 * rng.gen_range(-1.0..1.0)) / 1.7
                })
                .collect()
        }
        "clock ticking" => {
            let period = rng.gen_range(0.5..1.0);
            (0..n)
                .map(|i| {
                    let tl = t(i) % period;
                    amp * (-400.0 * tl).exp() * (2.0 * PI * 3000.0 * tl).sin()
                })
                .collect()
        }
        // unknown labels: a random steady tone
        _ => {
            let f = rng.gen_range(300.0..5000.0);
            (0..n).map(|i| amp * (2.0 * PI * f * t(i)).sin()).collect()
        }
    }
}

fn length(spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> usize {
    let (lo, hi) = (spec.min_seconds.min(spec.max_seconds), spec.max_seconds.max(spec.min_seconds));
    let secs = if hi > lo { rng.gen_range(lo..hi) } else { lo };
    ((secs * f64::from(SAMPLE_RATE)) as usize).max(1)
}

/// Writes 16-bit PCM WAVs under `dir/speech` and `dir/audio` plus
/// `dir/metadata.csv`; returns the metadata path. Speaker styles are all
/// distinct.
pub fn write_synthetic_catalog(dir: &Path, spec: &SyntheticSpec) -> Result<PathBuf, DatasetError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut rng = seed::rng(seed::derive_named(spec.seed, "styles"));
    let styles: Vec<StyleVector> = StyleVector::all().choose_multiple(&mut rng, spec.speakers).copied().collect();
    let mut csv = String::from("id,path,type,speaker,gender,pitch,tempo,volume,emotion,label,split\n");
    for (k, style) in styles.iter().enumerate() {
        for u in 0..spec.utterances_per_speaker.max(1) {
            let id = format!("spk{k:02}_u{u}");
            let path = format!("speech/{id}.wav");
            let mut r = seed::rng(seed::derive(seed::derive_named(spec.seed, "speech"), (k * 100 + u) as u64));
            let n = length(spec, &mut r);
            let clip = Clip::new(voice(style, n, &mut r), SAMPLE_RATE)?;
            write_wav(&dir.join(&path), &clip, WavFormat::Pcm16)?;
            let _ = writeln!(
                csv,
                "{id},{path},speech,spk{k:02},{},{},{},{},{},,",
                style.gender, style.pitch, style.tempo, style.volume, style.emotion
            );
        }
    }
    for (li, label) in spec.audio_labels.iter().enumerate() {
        for c in 0..spec.clips_per_label {
            let slug = label.replace(' ', "_");
            let id = format!("{slug}_{c}");
            let path = format!("audio/{id}.wav");
            let mut r = seed::rng(seed::derive(seed::derive_named(spec.seed, "audio"), (li * 100 + c) as u64));
            let n = length(spec, &mut r);
            let clip = Clip::new(background(label, n, &mut r), SAMPLE_RATE)?;
            write_wav(&dir.join(&path), &clip, WavFormat::Pcm16)?;
            let _ = writeln!(csv, "{id},{path},audio,,,,,,,{label},");
        }
    }
    let meta = dir.join("metadata.csv");
    std::fs::write(&meta, csv).map_err(io_err(&meta))?;
    Ok(meta)
}
