//! Catalog ingestion from delimited text or JSON metadata.
//!
//! Schema (CSV header or JSON object keys):
//!
//! | column  | speech            | audio              |
//! |---------|-------------------|--------------------|
//! | id      | unique entry id   | unique entry id    |
//! | path    | audio file, relative to the catalog root |  |
//! | type    | `speech`          | `audio`            |
//! | speaker | speaker id        | –                  |
//! | gender, pitch, tempo, volume, emotion | required | – |
//! | label   | –                 | exactly one label  |
//! | split   | optional `train` / `valid` / `test` hint |  |

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{io_err, DatasetError, Split};
use crate::dsp::{prepare_source, Clip};
use crate::instruction::{ClassLabel, Signature, SignatureError, StyleVector};

/// Labels rejected by default because they describe human voices.
pub const DEFAULT_BLOCKLIST: &[&str] = &[
    "people",
    "children",
    "human voice",
    "speech",
    "male speech",
    "female speech",
    "child speech",
    "conversation",
    "singing",
    "whispering",
    "shout",
    "laughter",
    "crying",
];

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetadataRow {
    pub id: String,
    pub path: String,
    #[serde(rename = "type")]
    pub kind: String,
    #[serde(default)]
    pub speaker: Option<String>,
    #[serde(default)]
    pub gender: Option<String>,
    #[serde(default)]
    pub pitch: Option<String>,
    #[serde(default)]
    pub tempo: Option<String>,
    #[serde(default)]
    pub volume: Option<String>,
    #[serde(default)]
    pub emotion: Option<String>,
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub split: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub id: String,
    /// Catalog root joined with the metadata path.
    pub path: PathBuf,
    /// Speaker id for speech, the entry id for audio. Splits are made over
    /// entities.
    pub entity: String,
    pub signature: Signature,
    /// Seconds, read from the file header.
    pub duration: f64,
    #[serde(default)]
    pub split: Option<Split>,
}

impl CatalogEntry {
    pub fn load(&self) -> Result<Clip, DatasetError> {
        super::read_wav(&self.path)
    }

    /// Resampled to 16 kHz and cropped or padded to 5 s.
    pub fn prepared(&self, crop_seed: u64) -> Result<Clip, DatasetError> {
        Ok(prepare_source(&self.load()?, crop_seed)?)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub entries: Vec<CatalogEntry>,
}

impl Catalog {
    pub fn speech(&self) -> impl Iterator<Item = &CatalogEntry> {
        self.entries.iter().filter(|e| e.signature.is_speech())
    }

    pub fn audio(&self) -> impl Iterator<Item = &CatalogEntry> {
        self.entries.iter().filter(|e| !e.signature.is_speech())
    }

    pub fn get(&self, id: &str) -> Option<&CatalogEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    /// Distinct audio labels, sorted.
    pub fn labels(&self) -> Vec<ClassLabel> {
        let mut v: Vec<ClassLabel> = self.audio().filter_map(|e| e.signature.label().cloned()).collect();
        v.sort();
        v.dedup();
        v
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IngestOptions {
    /// Lower-case labels rejected as human voice.
    pub blocklist: Vec<String>,
    /// Fail on the first rejected row instead of skipping it.
    pub strict: bool,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions { blocklist: DEFAULT_BLOCKLIST.iter().map(|s| s.to_string()).collect(), strict: false }
    }
}

/// A row that was filtered out, with the reason.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub line: usize,
    pub id: String,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ingested {
    pub catalog: Catalog,
    pub rejected: Vec<Rejection>,
}

fn read_rows(metadata: &Path) -> Result<Vec<(usize, MetadataRow)>, DatasetError> {
    let is_json = metadata.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        let text = std::fs::read_to_string(metadata).map_err(io_err(metadata))?;
        let rows: Vec<MetadataRow> = serde_json::from_str(&text)
            .map_err(|e| DatasetError::BadMetadataRow { line: e.line(), reason: e.to_string() })?;
        // JSON rows are numbered by position, starting at 1
        return Ok(rows.into_iter().enumerate().map(|(i, r)| (i + 1, r)).collect());
    }
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(metadata).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(io) if io.kind() == std::io::ErrorKind::NotFound => {
            DatasetError::MissingFile(metadata.to_path_buf())
        }
        _ => DatasetError::Io { path: metadata.to_path_buf(), message: e.to_string() },
    })?;
    let bad_csv = |e: csv::Error| {
        let line = e.position().map_or(0, |p| p.line() as usize);
        DatasetError::BadMetadataRow { line, reason: e.to_string() }
    };
    let headers = reader.headers().map_err(bad_csv)?.clone();
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(bad_csv)?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let row: MetadataRow = record
            .deserialize(Some(&headers))
            .map_err(|e| DatasetError::BadMetadataRow { line, reason: e.to_string() })?;
        out.push((line, row));
    }
    Ok(out)
}

enum RowOutcome {
    Entry(CatalogEntry),
    /// Well-formed but filtered out.
    Filtered(String),
}

fn required<'a>(v: &'a Option<String>, name: &str, line: usize) -> Result<&'a str, DatasetError> {
    v.as_deref()
        .filter(|s| !s.trim().is_empty())
        .ok_or_else(|| DatasetError::BadMetadataRow { line, reason: format!("missing {name}") })
}

fn attribute<T: FromStr<Err = SignatureError>>(v: &Option<String>, name: &str, line: usize) -> Result<T, DatasetError> {
    required(v, name, line)?.parse().map_err(|e: SignatureError| DatasetError::BadMetadataRow { line, reason: e.to_string() })
}

fn convert(root: &Path, line: usize, row: &MetadataRow, opts: &IngestOptions) -> Result<RowOutcome, DatasetError> {
    let bad = |reason: String| DatasetError::BadMetadataRow { line, reason };
    if row.id.trim().is_empty() {
        return Err(bad("missing id".into()));
    }
    let split = match row.split.as_deref().map(str::trim).filter(|s| !s.is_empty()) {
        Some(s) => Some(s.parse::<Split>().map_err(|e| bad(e.to_string()))?),
        None => None,
    };
    let (signature, entity) = match row.kind.trim().to_ascii_lowercase().as_str() {
        "speech" => {
            let style = StyleVector::new(
                attribute(&row.gender, "gender", line)?,
                attribute(&row.pitch, "pitch", line)?,
                attribute(&row.tempo, "tempo", line)?,
                attribute(&row.volume, "volume", line)?,
                attribute(&row.emotion, "emotion", line)?,
            );
            let speaker = required(&row.speaker, "speaker", line)?.trim().to_string();
            (Signature::speech(style), speaker)
        }
        "audio" => {
            let raw = required(&row.label, "label", line)?;
            if raw.contains([';', '|', ',']) {
                return Ok(RowOutcome::Filtered(format!("multiple labels {raw:?}")));
            }
            let label = ClassLabel::new(raw).map_err(|e| bad(e.to_string()))?;
            if opts.blocklist.iter().any(|b| b.trim().eq_ignore_ascii_case(label.as_str())) {
                return Ok(RowOutcome::Filtered(format!("blocklisted label {:?}", label.as_str())));
            }
            (Signature::Audio { label }, row.id.trim().to_string())
        }
        other => return Err(bad(format!("unknown type {other:?}"))),
    };
    let path = root.join(row.path.trim());
    let reader = hound::WavReader::open(&path).map_err(|e| match e {
        hound::Error::IoError(io) if io.kind() == std::io::ErrorKind::NotFound => DatasetError::MissingFile(path.clone()),
        other => DatasetError::Wav { path: path.clone(), message: other.to_string() },
    })?;
    let spec = reader.spec();
    let duration = f64::from(reader.duration()) / f64::from(spec.sample_rate.max(1));
    Ok(RowOutcome::Entry(CatalogEntry { id: row.id.trim().to_string(), path, entity, signature, duration, split }))
}

/// Reads and validates a catalog. Multi-label and blocklisted audio rows are
/// skipped (or rejected with `strict`); malformed rows and missing files
/// are always errors.
pub fn ingest(root: &Path, metadata: &Path, opts: &IngestOptions) -> Result<Ingested, DatasetError> {
    let rows = read_rows(metadata)?;
    let mut entries = Vec::new();
    let mut rejected = Vec::new();
    let mut seen = HashSet::new();
    let mut speaker_style: BTreeMap<String, Signature> = BTreeMap::new();
    for (line, row) in &rows {
        match convert(root, *line, row, opts)? {
            RowOutcome::Entry(e) => {
                if !seen.insert(e.id.clone()) {
                    return Err(DatasetError::BadMetadataRow { line: *line, reason: format!("duplicate id {:?}", e.id) });
                }
                if e.signature.is_speech() {
                    let prev = speaker_style.entry(e.entity.clone()).or_insert_with(|| e.signature.clone());
                    if *prev != e.signature {
                        return Err(DatasetError::BadMetadataRow {
                            line: *line,
                            reason: format!("speaker {:?} listed with two different styles", e.entity),
                        });
                    }
                }
                entries.push(e);
            }
            RowOutcome::Filtered(reason) => {
                if opts.strict {
                    return Err(DatasetError::BadMetadataRow { line: *line, reason });
                }
                log::warn!("metadata row {line} ({}) skipped: {reason}", row.id);
                rejected.push(Rejection { line: *line, id: row.id.clone(), reason });
            }
        }
    }
    if entries.is_empty() {
        return Err(DatasetError::EmptyCatalog);
    }
    Ok(Ingested { catalog: Catalog { entries }, rejected })
}
