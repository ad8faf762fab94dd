//! Manifest records: everything needed to re-synthesise one training
//! triple bit-for-bit.

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{io_err, Catalog, CatalogEntry, DatasetError, Split, SplitAssignment};
use crate::instruction::{Action, Instruction, Signature};
use crate::mixer::{draw_snrs, gains_for_snrs, reference_index, MixError};
use crate::prompt::{render, simplify, special_generic, Lexicon, Prompt, SimplifiedInstruction, TemplateId};
use crate::seed;
use crate::taskspace::{Composition, EditSampler, Task};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerateSpec {
    pub counts: BTreeMap<Split, usize>,
    pub composition: Composition,
    pub seed: u64,
    /// Chance of using a group-level prompt when one applies.
    pub special_probability: f64,
    pub max_retries: usize,
}

impl GenerateSpec {
    pub fn new(composition: Composition, seed: u64) -> Self {
        GenerateSpec { counts: BTreeMap::new(), composition, seed, special_probability: 0.5, max_retries: 200 }
    }

    pub fn with_count(mut self, split: Split, n: usize) -> Self {
        self.counts.insert(split, n);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceRef {
    pub entry: String,
    pub entity: String,
    pub path: PathBuf,
    pub signature: Signature,
    /// Seed of the crop window inside the source file.
    pub crop_seed: u64,
    /// Level relative to the reference source, dB.
    pub snr_db: f64,
    /// Linear gain realising `snr_db`; absent until audio has been read
    /// or when the source is silent.
    #[serde(default)]
    pub gain: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputPaths {
    pub input: String,
    pub target: String,
    pub prompt: String,
    pub record: String,
}

impl OutputPaths {
    fn for_id(id: &str) -> Self {
        OutputPaths {
            input: format!("input/{id}.wav"),
            target: format!("target/{id}.wav"),
            prompt: format!("prompt/{id}.txt"),
            record: format!("records/{id}.json"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub version: u32,
    pub id: String,
    pub split: Split,
    pub index: u64,
    pub composition: Composition,
    pub master_seed: u64,
    /// Per-record seed, `derive(derive_named(master, split), index)`.
    pub seed: u64,
    pub sources: Vec<SourceRef>,
    /// Index of the source every level is relative to.
    pub reference: usize,
    pub actions: Vec<Action>,
    pub task: Task,
    pub simplified: SimplifiedInstruction,
    pub prompt: Prompt,
    /// Template used for the prompt, if any.
    #[serde(default)]
    pub template: Option<TemplateId>,
    /// Template prompt a rephrasing replaced.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rephrased_from: Option<String>,
    /// Common anti-clipping factor; absent until audio has been read.
    #[serde(default)]
    pub normalization: Option<f64>,
    pub outputs: OutputPaths,
}

impl ManifestRecord {
    pub fn signatures(&self) -> Vec<Signature> {
        self.sources.iter().map(|s| s.signature.clone()).collect()
    }
}

fn pick_distinct<'a>(
    pool: &[&'a CatalogEntry],
    n: usize,
    rng: &mut impl Rng,
    max_retries: usize,
) -> Option<Vec<&'a CatalogEntry>> {
    if n == 0 {
        return Some(Vec::new());
    }
    for _ in 0..max_retries.max(1) {
        let picked: Vec<&CatalogEntry> = pool.choose_multiple(rng, n).copied().collect();
        if picked.len() < n {
            return None;
        }
        let sigs: HashSet<&Signature> = picked.iter().map(|e| &e.signature).collect();
        let ents: HashSet<&str> = picked.iter().map(|e| e.entity.as_str()).collect();
        if sigs.len() == n && ents.len() == n {
            return Some(picked);
        }
    }
    None
}

struct Planner<'a> {
    lexicon: &'a Lexicon,
    spec: &'a GenerateSpec,
    sampler: EditSampler,
    speech: BTreeMap<Split, Vec<&'a CatalogEntry>>,
    audio: BTreeMap<Split, Vec<&'a CatalogEntry>>,
}

impl Planner<'_> {
    fn record(&self, split: Split, index: u64) -> Result<ManifestRecord, DatasetError> {
        let spec = self.spec;
        let comp = spec.composition;
        let id = format!("{split}-{index:06}");
        let rec_seed = seed::derive(seed::derive_named(spec.seed, split.as_str()), index);
        let empty = Vec::new();
        let mut rng = seed::rng(seed::derive_named(rec_seed, "sources"));
        let exhausted = || DatasetError::ExhaustedRetries { record: id.clone() };
        let speech = pick_distinct(self.speech.get(&split).unwrap_or(&empty), comp.n_speech, &mut rng, spec.max_retries)
            .ok_or_else(exhausted)?;
        let audio = pick_distinct(self.audio.get(&split).unwrap_or(&empty), comp.n_audio, &mut rng, spec.max_retries)
            .ok_or_else(exhausted)?;
        let chosen: Vec<&CatalogEntry> = speech.into_iter().chain(audio).collect();
        let signatures: Vec<Signature> = chosen.iter().map(|e| e.signature.clone()).collect();

        let (task, actions) = self.sampler.sample(&mut seed::rng(seed::derive_named(rec_seed, "edit")));
        let instr = Instruction::new(actions.iter().copied().zip(signatures.iter().cloned()).collect())?;
        let simplified = simplify(&instr, rec_seed)?;

        let mut prng = seed::rng(seed::derive_named(rec_seed, "prompt"));
        let use_special = prng.gen_bool(spec.special_probability.clamp(0.0, 1.0));
        let special = if use_special { special_generic(self.lexicon, &actions, comp, rec_seed) } else { None };
        let (prompt, template) = match special {
            Some(p) => (p, None),
            None => {
                let t = TemplateId::ALL[prng.gen_range(0..TemplateId::ALL.len())];
                (render(&simplified, t, self.lexicon, rec_seed)?, Some(t))
            }
        };

        let snr = draw_snrs(&signatures, seed::derive_named(rec_seed, "snr"));
        let crop = seed::derive_named(rec_seed, "crop");
        let sources = chosen
            .iter()
            .zip(snr)
            .enumerate()
            .map(|(i, (e, snr_db))| SourceRef {
                entry: e.id.clone(),
                entity: e.entity.clone(),
                path: e.path.clone(),
                signature: e.signature.clone(),
                crop_seed: seed::derive(crop, i as u64),
                snr_db,
                gain: None,
            })
            .collect();
        Ok(ManifestRecord {
            version: MANIFEST_VERSION,
            outputs: OutputPaths::for_id(&id),
            id,
            split,
            index,
            composition: comp,
            master_seed: spec.seed,
            seed: rec_seed,
            sources,
            reference: reference_index(&signatures),
            actions,
            task,
            simplified,
            prompt,
            template,
            rephrased_from: None,
            normalization: None,
        })
    }
}

/// Draws sources, edits and prompts for every record without touching
/// audio. Gains are left empty.
pub fn plan_manifest(
    catalog: &Catalog,
    splits: &SplitAssignment,
    spec: &GenerateSpec,
    lexicon: &Lexicon,
) -> Result<Vec<ManifestRecord>, DatasetError> {
    let mut speech: BTreeMap<Split, Vec<&CatalogEntry>> = BTreeMap::new();
    let mut audio: BTreeMap<Split, Vec<&CatalogEntry>> = BTreeMap::new();
    for e in &catalog.entries {
        if let Some(s) = splits.of(&e.entity) {
            let pool = if e.signature.is_speech() { &mut speech } else { &mut audio };
            pool.entry(s).or_default().push(e);
        }
    }
    let planner = Planner { lexicon, spec, sampler: EditSampler::new(spec.composition), speech, audio };
    let jobs: Vec<(Split, u64)> =
        spec.counts.iter().flat_map(|(s, n)| (0..*n as u64).map(move |i| (*s, i))).collect();
    jobs.par_iter().map(|(s, i)| planner.record(*s, *i)).collect()
}

/// [`plan_manifest`] plus gains computed from the conditioned audio. A
/// record with a silent source keeps `gain: None` for every source; the
/// synthesiser reports it.
pub fn generate_manifest(
    catalog: &Catalog,
    splits: &SplitAssignment,
    spec: &GenerateSpec,
    lexicon: &Lexicon,
) -> Result<Vec<ManifestRecord>, DatasetError> {
    let mut records = plan_manifest(catalog, splits, spec, lexicon)?;
    records.par_iter_mut().try_for_each(|r| -> Result<(), DatasetError> {
        let clips = r
            .sources
            .iter()
            .map(|s| Ok(crate::dsp::prepare_source(&super::read_wav(&s.path)?, s.crop_seed)?))
            .collect::<Result<Vec<_>, DatasetError>>()?;
        let snr: Vec<f64> = r.sources.iter().map(|s| s.snr_db).collect();
        match gains_for_snrs(&clips, r.reference, &snr) {
            Ok(gains) => {
                for (s, g) in r.sources.iter_mut().zip(gains) {
                    s.gain = Some(g);
                }
                Ok(())
            }
            Err(MixError::SilentSource(_)) => Ok(()),
            Err(e) => Err(e.into()),
        }
    })?;
    Ok(records)
}

/// One JSON object per line.
pub fn write_manifest(path: &Path, records: &[ManifestRecord]) -> Result<(), DatasetError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    let mut w = BufWriter::new(std::fs::File::create(path).map_err(io_err(path))?);
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| DatasetError::Io { path: path.into(), message: e.to_string() })?;
        writeln!(w, "{line}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRecord>, DatasetError> {
    let f = std::fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(f).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ManifestRecord = serde_json::from_str(&line)
            .map_err(|e| DatasetError::BadManifest { line: i + 1, message: e.to_string() })?;
        if rec.version != MANIFEST_VERSION {
            return Err(DatasetError::BadManifest {
                line: i + 1,
                message: format!("schema version {} (expected {MANIFEST_VERSION})", rec.version),
            });
        }
        out.push(rec);
    }
    Ok(out)
}
