use std::path::PathBuf;

use rand::Rng;

use super::{
    generate_manifest, ingest, io_err, partition, rephrase_all, synthesize, write_manifest, DatasetError,
    GenerateSpec, IngestOptions, Rephraser, SplitAssignment, SplitRatios, SynthOptions, SynthesisSummary,
};
use crate::prompt::{Lexicon, Provenance};
use crate::seed;

/// Everything `generate` needs, from catalog to output tree.
pub struct GenerateRequest<'a> {
    pub catalog_dir: PathBuf,
    /// Defaults to `metadata.csv` (or `metadata.json`) inside the catalog.
    pub metadata: Option<PathBuf>,
    pub out: PathBuf,
    pub spec: GenerateSpec,
    pub ratios: SplitRatios,
    pub synth: SynthOptions,
    pub ingest: IngestOptions,
    pub lexicon: Lexicon,
    pub rephraser: Option<&'a dyn Rephraser>,
    pub rephrase_concurrency: usize,
}

impl GenerateRequest<'_> {
    pub fn new(catalog_dir: impl Into<PathBuf>, out: impl Into<PathBuf>, spec: GenerateSpec) -> Self {
        GenerateRequest {
            catalog_dir: catalog_dir.into(),
            metadata: None,
            out: out.into(),
            spec,
            ratios: SplitRatios::default(),
            synth: SynthOptions::default(),
            ingest: IngestOptions::default(),
            lexicon: Lexicon::builtin(),
            rephraser: None,
            rephrase_concurrency: 4,
        }
    }
}

fn write_json(path: &std::path::Path, value: &impl serde::Serialize) -> Result<(), DatasetError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| DatasetError::Io { path: path.to_path_buf(), message: e.to_string() })?;
    std::fs::write(path, text + "\n").map_err(io_err(path))
}

/// Ingest → split → manifest → optional rephrasing → synthesis. Writes
/// `splits.json`, `manifest.jsonl`, `summary.json` and the per-record files
/// under `out`. The tree is a pure function of the catalog and the `GenerateSpec`.
pub fn generate_dataset(req: &GenerateRequest<'_>) -> Result<SynthesisSummary, DatasetError> {
    let metadata = req.metadata.clone().unwrap_or_else(|| {
        let json = req.catalog_dir.join("metadata.json");
        if json.exists() {
            json
        } else {
            req.catalog_dir.join("metadata.csv")
        }
    });
    let ingested = ingest(&req.catalog_dir, &metadata, &req.ingest)?;
    let catalog = ingested.catalog;
    let splits = match SplitAssignment::from_hints(&catalog) {
        Some(s) => s,
        None => partition(&catalog, req.ratios, seed::derive_named(req.spec.seed, "split"))?,
    };
    std::fs::create_dir_all(&req.out).map_err(io_err(&req.out))?;
    write_json(&req.out.join("splits.json"), &splits)?;

    let mut records = generate_manifest(&catalog, &splits, &req.spec, &req.lexicon)?;

    if let Some(client) = req.rephraser {
        let targets: Vec<usize> =
            (0..records.len()).filter(|&i| records[i].prompt.provenance == Provenance::Template).collect();
        let prompts: Vec<_> = targets.iter().map(|&i| records[i].prompt.clone()).collect();
        let results = rephrase_all(client, &prompts, 5, req.rephrase_concurrency);
        for (&i, res) in targets.iter().zip(results) {
            match res {
                Ok(list) if !list.is_empty() => {
                    let r = &mut records[i];
                    let k = seed::rng(seed::derive_named(r.seed, "rephrase")).gen_range(0..list.len());
                    r.rephrased_from = Some(std::mem::replace(&mut r.prompt, list[k].clone()).text);
                }
                Ok(_) => {}
                Err(super::RephraseError::Disabled) => break,
                Err(e) => log::warn!("rephrasing {} failed, keeping the template prompt: {e}", records[i].id),
            }
        }
    }

    let (done, summary) = synthesize(&records, &req.out, req.synth)?;
    // completed records carry gains and normalisation; failed ones stay as planned
    let mut by_id: std::collections::HashMap<&str, &super::ManifestRecord> =
        done.iter().map(|r| (r.id.as_str(), r)).collect();
    let merged: Vec<super::ManifestRecord> =
        records.iter().map(|r| by_id.remove(r.id.as_str()).cloned().unwrap_or_else(|| r.clone())).collect();
    write_manifest(&req.out.join("manifest.jsonl"), &merged)?;
    write_json(&req.out.join("summary.json"), &summary)?;
    Ok(summary)
}
