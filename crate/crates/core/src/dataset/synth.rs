use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{io_err, read_wav, write_wav, DatasetError, ManifestRecord, WavFormat};
use crate::dsp::prepare_source;
use crate::mixer::{gains_for_snrs, MixError, MixturePair};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthOptions {
    pub workers: usize,
    pub format: WavFormat,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions { workers: 1, format: WavFormat::Float32 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordFailure {
    pub id: String,
    pub reason: String,
}

/// Contents of `summary.json`; independent of the worker count.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SynthesisSummary {
    pub records: usize,
    pub written: usize,
    /// Records whose mixture pair was rescaled to avoid clipping.
    pub normalized: usize,
    pub failures: Vec<RecordFailure>,
    pub per_task: BTreeMap<String, usize>,
    pub per_split: BTreeMap<String, usize>,
    pub per_provenance: BTreeMap<String, usize>,
}

/// Replays a record: reads and conditions every source, applies the
/// recorded levels and mixes. Gains are recomputed from `snr_db` and must
/// equal the stored ones when present.
pub fn realize_record(record: &ManifestRecord) -> Result<(MixturePair, Vec<f64>), DatasetError> {
    let clips = record
        .sources
        .iter()
        .map(|s| Ok(prepare_source(&read_wav(&s.path)?, s.crop_seed)?))
        .collect::<Result<Vec<_>, DatasetError>>()?;
    let snr: Vec<f64> = record.sources.iter().map(|s| s.snr_db).collect();
    let gains = gains_for_snrs(&clips, record.reference, &snr).map_err(|e| match e {
        MixError::SilentSource(i) => DatasetError::SilentSource { record: record.id.clone(), source_index: i },
        other => other.into(),
    })?;
    if let Some(i) = record.sources.iter().zip(&gains).position(|(s, g)| s.gain.is_some_and(|sg| sg != *g)) {
        return Err(DatasetError::BadManifest {
            line: 0,
            message: format!("record {}: stored gain of source {i} does not match its level", record.id),
        });
    }
    let scaled = clips.iter().zip(&gains).map(|(c, g)| c.scaled(*g)).collect();
    Ok((MixturePair::build(scaled, record.actions.clone())?, gains))
}

fn write_one(record: &ManifestRecord, out: &Path, format: WavFormat) -> Result<ManifestRecord, DatasetError> {
    let (pair, gains) = realize_record(record)?;
    let mut done = record.clone();
    for (s, g) in done.sources.iter_mut().zip(gains) {
        s.gain = Some(g);
    }
    done.normalization = Some(pair.normalization);
    write_wav(&out.join(&done.outputs.input), &pair.input, format)?;
    write_wav(&out.join(&done.outputs.target), &pair.target, format)?;
    let prompt_path = out.join(&done.outputs.prompt);
    let record_path = out.join(&done.outputs.record);
    for p in [&prompt_path, &record_path] {
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
    }
    std::fs::write(&prompt_path, format!("{}\n", done.prompt.text)).map_err(io_err(&prompt_path))?;
    let json = serde_json::to_string_pretty(&done)
        .map_err(|e| DatasetError::Io { path: record_path.clone(), message: e.to_string() })?;
    std::fs::write(&record_path, json + "\n").map_err(io_err(&record_path))?;
    Ok(done)
}

/// Writes input/target WAVs, the prompt and the completed record for every
/// record, in parallel. Per-record failures are collected, not fatal.
/// Returns the completed records (failed ones omitted) and a summary.
pub fn synthesize(
    records: &[ManifestRecord],
    out: &Path,
    opts: SynthOptions,
) -> Result<(Vec<ManifestRecord>, SynthesisSummary), DatasetError> {
    std::fs::create_dir_all(out).map_err(io_err(out))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers.max(1))
        .build()
        .map_err(|e| DatasetError::Io { path: out.to_path_buf(), message: e.to_string() })?;
    let results: Vec<Result<ManifestRecord, DatasetError>> =
        pool.install(|| records.par_iter().map(|r| write_one(r, out, opts.format)).collect());

    let mut summary = SynthesisSummary { records: records.len(), ..Default::default() };
    let mut done = Vec::with_capacity(records.len());
    for (r, res) in records.iter().zip(results) {
        match res {
            Ok(rec) => {
                summary.written += 1;
                if rec.normalization.is_some_and(|k| k != 1.0) {
                    summary.normalized += 1;
                }
                *summary.per_task.entry(rec.task.code().to_string()).or_default() += 1;
                *summary.per_split.entry(rec.split.to_string()).or_default() += 1;
                let prov = serde_json::to_value(rec.prompt.provenance)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_string))
                    .unwrap_or_default();
                *summary.per_provenance.entry(prov).or_default() += 1;
                done.push(rec);
            }
            Err(e) => {
                log::warn!("record {} failed: {e}", r.id);
                summary.failures.push(RecordFailure { id: r.id.clone(), reason: e.to_string() });
            }
        }
    }
    Ok((done, summary))
}
