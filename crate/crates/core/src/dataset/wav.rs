use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use serde::{Deserialize, Serialize};

use super::DatasetError;
use crate::dsp::Clip;

/// Sample encoding used when writing WAV files.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WavFormat {
    /// IEEE 32-bit float.
    #[default]
    Float32,
    /// 16-bit signed PCM, clipped to [-1, 1].
    Pcm16,
}

fn wav_err(path: &Path) -> impl FnOnce(hound::Error) -> DatasetError + '_ {
    move |e| match e {
        hound::Error::IoError(io) if io.kind() == std::io::ErrorKind::NotFound => {
            DatasetError::MissingFile(path.to_path_buf())
        }
        other => DatasetError::Wav { path: path.to_path_buf(), message: other.to_string() },
    }
}

/// Reads any integer or float WAV; multichannel files are averaged to mono.
pub fn read_wav(path: &Path) -> Result<Clip, DatasetError> {
    let mut reader = WavReader::open(path).map_err(wav_err(path))?;
    let spec = reader.spec();
    let channels = usize::from(spec.channels.max(1));
    let interleaved: Vec<f64> = match spec.sample_format {
        SampleFormat::Float => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<Result<_, _>>()
            .map_err(wav_err(path))?,
        SampleFormat::Int => {
            let scale = 1.0 / f64::from(1u32 << (spec.bits_per_sample.clamp(1, 32) - 1));
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| f64::from(v) * scale))
                .collect::<Result<_, _>>()
                .map_err(wav_err(path))?
        }
    };
    let mono: Vec<f64> = if channels == 1 {
        interleaved
    } else {
        interleaved.chunks(channels).map(|f| f.iter().sum::<f64>() / channels as f64).collect()
    };
    Clip::new(mono, spec.sample_rate)
        .map_err(|e| DatasetError::Wav { path: path.to_path_buf(), message: e.to_string() })
}

pub fn write_wav(path: &Path, clip: &Clip, format: WavFormat) -> Result<(), DatasetError> {
    let spec = match format {
        WavFormat::Float32 => {
            WavSpec { channels: 1, sample_rate: clip.rate(), bits_per_sample: 32, sample_format: SampleFormat::Float }
        }
        WavFormat::Pcm16 => {
            WavSpec { channels: 1, sample_rate: clip.rate(), bits_per_sample: 16, sample_format: SampleFormat::Int }
        }
    };
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(super::io_err(parent))?;
    }
    let mut w = WavWriter::create(path, spec).map_err(wav_err(path))?;
    for &s in clip.samples() {
        match format {
            WavFormat::Float32 => w.write_sample(s as f32),
            WavFormat::Pcm16 => w.write_sample((s.clamp(-1.0, 1.0) * 32767.0).round() as i16),
        }
        .map_err(wav_err(path))?;
    }
    w.finalize().map_err(wav_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_and_pcm_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let clip = Clip::new(vec![0.0, 0.5, -0.25, 1.5, -1.0], 16_000).unwrap();
        let f = dir.path().join("f.wav");
        write_wav(&f, &clip, WavFormat::Float32).unwrap();
        let back = read_wav(&f).unwrap();
        assert_eq!(back.samples(), &[0.0, 0.5, -0.25, 1.5, -1.0]);
        let p = dir.path().join("sub/p.wav");
        write_wav(&p, &clip, WavFormat::Pcm16).unwrap();
        let back = read_wav(&p).unwrap();
        assert_eq!(back.rate(), 16_000);
        assert!((back.samples()[1] - 0.5).abs() < 1e-4);
        assert!((back.samples()[3] - 32767.0 / 32768.0).abs() < 1e-9);
    }

    #[test]
    fn stereo_is_averaged_and_missing_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.wav");
        let spec = WavSpec { channels: 2, sample_rate: 8000, bits_per_sample: 16, sample_format: SampleFormat::Int };
        let mut w = WavWriter::create(&p, spec).unwrap();
        for v in [16384i16, 0, -16384, -16384] {
            w.write_sample(v).unwrap();
        }
        w.finalize().unwrap();
        let c = read_wav(&p).unwrap();
        assert_eq!(c.samples(), &[0.25, -0.5]);
        assert!(matches!(read_wav(&dir.path().join("nope.wav")), Err(DatasetError::MissingFile(_))));
    }
}
