//! Source catalogs, split partitioning, manifest generation, parallel
//! synthesis of `(input, target, prompt)` triples, and an optional
//! external rephrasing client.
//!
//! Everything random is derived from a master seed through per-record
//! seeds, so the output of [`synthesize`] does not depend on the number of
//! worker threads.

mod catalog;
mod manifest;
mod pipeline;
mod rephrase;
mod split;
mod synth;
mod synthetic;
mod wav;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use catalog::{ingest, Catalog, CatalogEntry, IngestOptions, Ingested, MetadataRow, Rejection, DEFAULT_BLOCKLIST};
pub use manifest::{
    generate_manifest, plan_manifest, read_manifest, write_manifest, GenerateSpec, ManifestRecord, OutputPaths,
    SourceRef, MANIFEST_VERSION,
};
pub use pipeline::{generate_dataset, GenerateRequest};
pub use rephrase::{
    rephrase_all, HttpRephraser, MockRephraser, RephraseConfig, RephraseError, Rephraser, REPHRASE_WRAPPER,
};
pub use split::{partition, split_counts, SplitAssignment, SplitRatios};
pub use synth::{realize_record, synthesize, RecordFailure, SynthOptions, SynthesisSummary};
pub use synthetic::{write_synthetic_catalog, SyntheticSpec};
pub use wav::{read_wav, write_wav, WavFormat};

use crate::dsp::DspError;
use crate::instruction::InstructionError;
use crate::mixer::MixError;
use crate::prompt::PromptError;
use crate::taskspace::TaskError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "valid" | "validation" | "dev" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            _ => Err(DatasetError::BadSplit(s.to_string())),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatasetError {
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("missing audio file {0}")]
    MissingFile(PathBuf),
    #[error("metadata row {line}: {reason}")]
    BadMetadataRow { line: usize, reason: String },
    #[error("catalog has no usable entries")]
    EmptyCatalog,
    #[error("not enough {kind} entities: the {split} split would be empty")]
    TooFewEntities { kind: String, split: Split },
    #[error("record {record}: could not draw sources with distinct signatures")]
    ExhaustedRetries { record: String },
    #[error("{path}: bad WAV data: {message}")]
    Wav { path: PathBuf, message: String },
    #[error("unknown split {0:?}")]
    BadSplit(String),
    #[error("manifest line {line}: {message}")]
    BadManifest { line: usize, message: String },
    #[error("record {record}: source {source_index} is silent")]
    SilentSource { record: String, source_index: usize },
    #[error(transparent)]
    Mix(#[from] MixError),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Instruction(#[from] InstructionError),
    #[error(transparent)]
    Task(#[from] TaskError),
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |e| DatasetError::Io { path: path.to_path_buf(), message: e.to_string() }
}
