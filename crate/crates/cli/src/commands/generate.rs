use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use mixedit::dataset::{
    generate_dataset, GenerateRequest, GenerateSpec, HttpRephraser, IngestOptions, MockRephraser, RephraseError,
    Rephraser, Split, SplitRatios, SynthOptions, WavFormat,
};
use mixedit::taskspace::Composition;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{echo, echo_line, set, Ctx};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum RephraseMode {
    /// Keep template prompts.
    Off,
    /// Offline stand-in rephraser.
    Mock,
    /// The configured HTTP endpoint.
    Http,
}

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Catalog directory holding `metadata.csv` (or `metadata.json`).
    #[arg(long)]
    catalog: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of training records.
    #[arg(long)]
    count: Option<usize>,
    /// Number of validation records.
    #[arg(long)]
    valid_count: Option<usize>,
    /// Number of test records.
    #[arg(long)]
    test_count: Option<usize>,
    /// Number of speech and audio sources per mixture, `S,A`.
    #[arg(long)]
    composition: Option<String>,
    /// Parallel synthesis workers; the output does not depend on this.
    #[arg(long)]
    workers: Option<usize>,
    /// Write 16-bit PCM instead of 32-bit float WAVs.
    #[arg(long)]
    pcm16: bool,
    /// Fail on filtered catalog rows instead of skipping them.
    #[arg(long)]
    strict: bool,
    #[arg(long, value_enum)]
    rephrase: Option<RephraseMode>,
    /// Rephrase endpoint URL (overrides the config file).
    #[arg(long)]
    rephrase_endpoint: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub catalog: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub train: usize,
    pub valid: usize,
    pub test: usize,
    pub composition: String,
    pub workers: usize,
    pub format: WavFormat,
    pub strict: bool,
    pub blocklist: Option<Vec<String>>,
    pub ratios: SplitRatios,
    pub special_probability: f64,
    pub rephrase: RephraseMode,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            catalog: None,
            out: None,
            train: 100,
            valid: 0,
            test: 0,
            composition: "2,2".into(),
            workers: 1,
            format: WavFormat::Float32,
            strict: false,
            blocklist: None,
            ratios: SplitRatios::default(),
            special_probability: 0.5,
            rephrase: RephraseMode::Off,
        }
    }
}

pub fn run(ctx: &Ctx, args: Args) -> anyhow::Result<ExitCode> {
    let mut s = ctx.file.generate.clone();
    set(&mut s.catalog, args.catalog.map(Some));
    set(&mut s.out, args.out.map(Some));
    set(&mut s.train, args.count);
    set(&mut s.valid, args.valid_count);
    set(&mut s.test, args.test_count);
    set(&mut s.composition, args.composition);
    set(&mut s.workers, args.workers);
    set(&mut s.rephrase, args.rephrase);
    if args.pcm16 {
        s.format = WavFormat::Pcm16;
    }
    s.strict |= args.strict;
    let mut rephrase_cfg = ctx.file.rephrase.clone();
    set(&mut rephrase_cfg.endpoint, args.rephrase_endpoint.map(Some));

    let catalog = s.catalog.clone().ok_or_else(|| crate::usage("--catalog is required"))?;
    let out = s.out.clone().ok_or_else(|| crate::usage("--out is required"))?;
    let comp: Composition = s.composition.parse().map_err(|e| crate::usage(format!("{e}")))?;
    let seed = ctx.seed_or(0);

    let mut spec = GenerateSpec::new(comp, seed);
    spec.special_probability = s.special_probability;
    for (split, n) in [(Split::Train, s.train), (Split::Valid, s.valid), (Split::Test, s.test)] {
        if n > 0 {
            spec = spec.with_count(split, n);
        }
    }
    let mock = MockRephraser;
    let http;
    let rephraser: Option<&dyn Rephraser> = match s.rephrase {
        RephraseMode::Off => None,
        RephraseMode::Mock => Some(&mock),
        RephraseMode::Http => match HttpRephraser::new(&rephrase_cfg) {
            Ok(client) => {
                http = client;
                Some(&http)
            }
            Err(RephraseError::Disabled) => {
                log::warn!("no rephrase endpoint configured; keeping template prompts");
                None
            }
            Err(e) => return Err(e.into()),
        },
    };

    let mut req = GenerateRequest::new(&catalog, &out, spec);
    req.ratios = s.ratios;
    req.synth = SynthOptions { workers: s.workers.max(1), format: s.format };
    req.ingest = IngestOptions { strict: s.strict, ..IngestOptions::default() };
    if let Some(list) = &s.blocklist {
        req.ingest.blocklist = list.clone();
    }
    req.rephraser = rephraser;
    req.rephrase_concurrency = rephrase_cfg.max_concurrency;
    let summary = generate_dataset(&req).with_context(|| format!("generating into {}", out.display()))?;

    let config = echo(&s, seed);
    let value = json!({ "config": config, "summary": summary });
    ctx.emit(&value, || {
        let mut text = echo_line(&config);
        text += &format!("records {}  written {}  normalized {}  failed {}\n", summary.records, summary.written,
            summary.normalized, summary.failures.len());
        for (task, n) in &summary.per_task {
            text += &format!("  {task:<5} {n:>6}\n");
        }
        for f in &summary.failures {
            text += &format!("failed {}: {}\n", f.id, f.reason);
        }
        text
    });
    Ok(if summary.failures.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
