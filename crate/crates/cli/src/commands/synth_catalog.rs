use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use mixedit::dataset::write_synthetic_catalog;
use serde_json::json;

use crate::config::{echo, echo_line, set, Ctx};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    speakers: Option<usize>,
    #[arg(long)]
    clips_per_label: Option<usize>,
}

pub fn run(ctx: &Ctx, args: Args) -> anyhow::Result<ExitCode> {
    let mut spec = ctx.file.synth_catalog.clone();
    set(&mut spec.speakers, args.speakers);
    set(&mut spec.clips_per_label, args.clips_per_label);
    set(&mut spec.seed, ctx.seed);
    let meta = write_synthetic_catalog(&args.out, &spec).with_context(|| format!("writing {}", args.out.display()))?;
    let config = echo(&spec, spec.seed);
    let entries = spec.speakers * spec.utterances_per_speaker.max(1) + spec.audio_labels.len() * spec.clips_per_label;
    let value = json!({ "config": config, "metadata": meta, "entries": entries });
    ctx.emit(&value, || format!("{}wrote {entries} entries; metadata in {}\n", echo_line(&config), meta.display()));
    Ok(ExitCode::SUCCESS)
}
