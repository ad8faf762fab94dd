use std::path::PathBuf;
use std::process::ExitCode;

use mixedit::dataset::{ingest, IngestOptions};
use mixedit::prompt::{parse, Lexicon};
use serde_json::json;

use super::parse_labels;
use crate::config::Ctx;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// The prompt text.
    prompt: String,
    /// Known audio class labels, comma-separated.
    #[arg(long, default_value = "")]
    labels: String,
    /// Take the label set from a catalog directory instead.
    #[arg(long)]
    catalog: Option<PathBuf>,
}

pub fn run(ctx: &Ctx, args: Args) -> anyhow::Result<ExitCode> {
    let mut labels = parse_labels(&args.labels)?;
    if let Some(dir) = &args.catalog {
        labels.extend(ingest(dir, &dir.join("metadata.csv"), &IngestOptions::default())?.catalog.labels());
    }
    let lexicon = Lexicon::builtin();
    match parse(&args.prompt, &lexicon, &labels) {
        Ok(si) => {
            let value = json!({ "prompt": args.prompt, "instruction": si });
            ctx.emit(&value, || format!("{si}\n"));
            Ok(ExitCode::SUCCESS)
        }
        Err(e) => {
            if ctx.json {
                let value = json!({ "prompt": args.prompt, "error": e.to_string(), "kind": e.kind.to_string(),
                    "span": [e.span.start, e.span.end] });
                println!("{}", serde_json::to_string_pretty(&value)?);
            }
            Err(crate::usage(format!("{e}\n{}", e.annotate(&args.prompt))))
        }
    }
}
