pub mod edit;
pub mod eval;
pub mod generate;
pub mod parse;
pub mod synth_catalog;
pub mod tasks;
pub mod train_toy;

use std::path::Path;

use anyhow::Context;
use mixedit::dataset::read_wav;
use mixedit::dsp::{resample, Clip, SAMPLE_RATE};
use mixedit::instruction::ClassLabel;

/// Reads a WAV file and brings it to the working sample rate.
pub fn load_clip(path: &Path) -> anyhow::Result<Clip> {
    let clip = read_wav(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(if clip.rate() == SAMPLE_RATE { clip } else { resample(&clip, SAMPLE_RATE) })
}

/// Comma-separated class labels; empty entries are ignored.
pub fn parse_labels(list: &str) -> anyhow::Result<Vec<ClassLabel>> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| ClassLabel::new(s).map_err(|e| crate::usage(e.to_string())))
        .collect()
}
