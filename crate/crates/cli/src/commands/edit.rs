use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use mixedit::dataset::{ingest, write_wav, IngestOptions, WavFormat};
use mixedit::dsp::{Clip, SAMPLE_RATE};
use mixedit::editor::{
    embed_instruction, ideal_mask, load_checkpoint, mask_edit, mask_to_mel, oracle_edit, to_csv, to_pgm,
    Conditioning, EditingMask, MaskKind, DEFAULT_M_MAX,
};
use mixedit::instruction::{format_actions, parse_actions, Action, Instruction, Signature};
use mixedit::metrics::{si_sdr, snr, snri, MetricValue};
use mixedit::mixer::{mix, target_mixture};
use mixedit::prompt::{parse, resolve, simplify, Lexicon, SimplifiedInstruction};
use mixedit::taskspace::{classify, Composition};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{load_clip, parse_labels};
use crate::config::{echo, echo_line, set, Ctx};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum EditorKind {
    /// Exact `Σ α_i s_i` from the sources.
    Oracle,
    /// Ideal phase-sensitive STFT mask.
    Psm,
    /// Ideal ratio STFT mask.
    Irm,
    /// Trained FiLM mask network (needs --checkpoint).
    Film,
}

#[derive(Debug, clap::Args)]
#[command(group(clap::ArgGroup::new("edit").required(true).args(["actions", "prompt"])))]
pub struct Args {
    /// Mixture WAV; defaults to the sum of the sources.
    #[arg(long)]
    mixture: Option<PathBuf>,
    /// Source WAVs, in the order the action vector refers to.
    #[arg(long, num_args = 1..)]
    sources: Vec<PathBuf>,
    /// Action vector such as "0,↓,↑,1" (ASCII aliases: u = ↑, d = ↓).
    #[arg(long, allow_hyphen_values = true)]
    actions: Option<String>,
    /// Text prompt; resolved against --signature when given.
    #[arg(long)]
    prompt: Option<String>,
    /// Signature of each source, e.g. "speech:male,low,normal,high,happy" or "audio:rain".
    #[arg(long = "signature")]
    signatures: Vec<String>,
    /// Extra class labels the prompt parser should know, comma-separated.
    #[arg(long)]
    labels: Option<String>,
    /// Catalog directory whose labels the prompt parser should know.
    #[arg(long)]
    catalog: Option<PathBuf>,
    #[arg(long, value_enum)]
    editor: Option<EditorKind>,
    /// FiLM checkpoint for --editor film.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Where to write the edited mixture.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the editing mask on a Mel grid to PREFIX.csv and PREFIX.pgm.
    #[arg(long, value_name = "PREFIX")]
    dump_mask: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub editor: EditorKind,
    pub checkpoint: Option<PathBuf>,
    pub m_max: f64,
    pub n_mels: usize,
    pub format: WavFormat,
}

impl Default for Settings {
    fn default() -> Self {
        Settings { editor: EditorKind::Oracle, checkpoint: None, m_max: DEFAULT_M_MAX, n_mels: 64, format: WavFormat::Float32 }
    }
}

fn metric(v: MetricValue) -> serde_json::Value {
    json!({ "value": v.value, "finite": v.finite })
}

fn write_mask(prefix: &Path, mask: &EditingMask, mel: bool, n_mels: usize) -> anyhow::Result<()> {
    // [band][frame], low bands first
    let grid: Vec<Vec<f64>> = if mel {
        mask_to_mel(mask, n_mels, SAMPLE_RATE)
    } else {
        (0..mask.n_bands()).map(|b| mask.values.iter().map(|f| f[b]).collect()).collect()
    };
    if let Some(parent) = prefix.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    let csv = prefix.with_extension("csv");
    let pgm = prefix.with_extension("pgm");
    std::fs::write(&csv, to_csv(&grid)).with_context(|| format!("writing {}", csv.display()))?;
    std::fs::write(&pgm, to_pgm(&grid, mask.m_max)).with_context(|| format!("writing {}", pgm.display()))?;
    Ok(())
}

/// Actions reordered speech-first, with the matching composition.
fn task_of(actions: &[Action], signatures: &[Signature]) -> Option<String> {
    let n_speech = signatures.iter().filter(|s| s.is_speech()).count();
    let comp = Composition::new(n_speech, signatures.len() - n_speech).ok()?;
    let ordered: Vec<Action> = signatures
        .iter()
        .zip(actions)
        .filter(|(s, _)| s.is_speech())
        .chain(signatures.iter().zip(actions).filter(|(s, _)| !s.is_speech()))
        .map(|(_, a)| *a)
        .collect();
    classify(&ordered, comp).ok().map(|t| t.code().to_string())
}

pub fn run(ctx: &Ctx, args: Args) -> anyhow::Result<ExitCode> {
    let mut s = ctx.file.edit.clone();
    set(&mut s.editor, args.editor);
    set(&mut s.checkpoint, args.checkpoint.clone().map(Some));
    let seed = ctx.seed_or(0);

    let signatures: Vec<Signature> = args
        .signatures
        .iter()
        .map(|t| t.parse().map_err(|e| crate::usage(format!("--signature {t:?}: {e}"))))
        .collect::<anyhow::Result<_>>()?;
    if !signatures.is_empty() && !args.sources.is_empty() && signatures.len() != args.sources.len() {
        return Err(crate::usage(format!("{} signatures for {} sources", signatures.len(), args.sources.len())));
    }

    // the edit: an explicit vector, or a prompt resolved against the signatures
    let mut simplified: Option<SimplifiedInstruction> = None;
    let actions: Option<Vec<Action>> = match (&args.actions, &args.prompt) {
        (Some(text), _) => Some(parse_actions(text).map_err(|e| crate::usage(e.to_string()))?),
        (None, Some(prompt)) => {
            let mut labels = parse_labels(args.labels.as_deref().unwrap_or(""))?;
            labels.extend(signatures.iter().filter_map(|s| s.label().cloned()));
            if let Some(dir) = &args.catalog {
                labels.extend(ingest(dir, &dir.join("metadata.csv"), &IngestOptions::default())?.catalog.labels());
            }
            let si = parse(prompt, &Lexicon::builtin(), &labels)
                .map_err(|e| crate::usage(format!("{e}\n{}", e.annotate(prompt))))?;
            let resolved = if signatures.is_empty() {
                None
            } else {
                Some(resolve(&si, &signatures).map_err(|e| crate::usage(format!("cannot apply prompt: {e}")))?)
            };
            simplified = Some(si);
            resolved
        }
        (None, None) => unreachable!("clap requires --actions or --prompt"),
    };
    if let (Some(a), false) = (&actions, args.sources.is_empty()) {
        if a.len() != args.sources.len() {
            return Err(crate::usage(format!("{} actions for {} sources", a.len(), args.sources.len())));
        }
    }

    // sources of unequal length are zero-padded at the end to the longest one
    let mut sources: Vec<Clip> = args.sources.iter().map(|p| load_clip(p)).collect::<anyhow::Result<_>>()?;
    let longest = sources.iter().map(Clip::len).max().unwrap_or(0);
    for c in &mut sources {
        if c.len() < longest {
            let mut v = c.samples().to_vec();
            v.resize(longest, 0.0);
            *c = Clip::new(v, SAMPLE_RATE)?;
        }
    }
    let mixture = match &args.mixture {
        Some(p) => load_clip(p)?,
        None if !sources.is_empty() => mix(&sources)?,
        None => return Err(crate::usage("give --mixture or --sources")),
    };
    let target = match (&actions, sources.is_empty()) {
        (Some(a), false) => Some(target_mixture(&sources, a)?),
        _ => None,
    };

    let (output, mask, mel) = match s.editor {
        EditorKind::Oracle => {
            let (Some(a), false) = (&actions, sources.is_empty()) else {
                return Err(crate::usage("the oracle editor needs --sources and an edit that resolves to actions"));
            };
            let y = oracle_edit(&sources, a)?;
            let mask = ideal_mask(&mixture, &y, MaskKind::Psm, s.m_max)?;
            (y, mask, true)
        }
        EditorKind::Psm | EditorKind::Irm => {
            let Some(y) = &target else {
                return Err(crate::usage("ideal-mask editors need --sources and an edit that resolves to actions"));
            };
            let kind = if s.editor == EditorKind::Psm { MaskKind::Psm } else { MaskKind::Irm };
            let mask = ideal_mask(&mixture, y, kind, s.m_max)?;
            (mask_edit(&mixture, &mask)?, mask, true)
        }
        EditorKind::Film => {
            let path = s.checkpoint.clone().ok_or_else(|| crate::usage("--editor film needs --checkpoint"))?;
            let net = load_checkpoint(&path).with_context(|| format!("loading {}", path.display()))?;
            let si = match (&simplified, &actions) {
                (Some(si), _) => si.clone(),
                (None, Some(a)) if signatures.len() == a.len() => {
                    let instr = Instruction::new(a.iter().copied().zip(signatures.iter().cloned()).collect())
                        .map_err(|e| crate::usage(e.to_string()))?;
                    simplify(&instr, seed)?
                }
                _ => return Err(crate::usage("--editor film with --actions needs one --signature per action")),
            };
            let z = embed_instruction(&si, net.config().embed_dim);
            let cfg = net.config();
            let n = mixture.len();
            let stride = cfg.stride();
            let padded_len = if n <= cfg.kernel { cfg.kernel } else { cfg.kernel + (n - cfg.kernel).div_ceil(stride) * stride };
            let mut x = mixture.samples().to_vec();
            x.resize(padded_len, 0.0);
            let out = net.forward(&x, Conditioning::Embedding(&z))?;
            let y = Clip::new(out.output[..n].to_vec(), SAMPLE_RATE)?;
            (y, out.mask, false)
        }
    };
    if s.editor != EditorKind::Film && simplified.is_none() {
        if let (Some(a), true) = (&actions, signatures.len() == args.sources.len() && !signatures.is_empty()) {
            let instr = Instruction::new(a.iter().copied().zip(signatures.iter().cloned()).collect());
            simplified = instr.ok().and_then(|i| simplify(&i, seed).ok());
        }
    }

    if let Some(path) = &args.out {
        write_wav(path, &output, s.format)?;
    }
    if let Some(prefix) = &args.dump_mask {
        write_mask(prefix, &mask, mel, s.n_mels)?;
    }

    let metrics = match &target {
        Some(y) => {
            if y.len() != output.len() {
                bail!("mixture and sources have different lengths");
            }
            Some(json!({
                "snr": metric(snr(&output, y)?),
                "snri": metric(snri(&mixture, &output, y)?),
                "si_sdr": metric(si_sdr(&output, y)?),
                "input_snr": metric(snr(&mixture, y)?),
            }))
        }
        None => None,
    };
    let task = actions.as_ref().filter(|a| a.len() == signatures.len()).and_then(|a| task_of(a, &signatures));
    let config = echo(&s, seed);
    let value = json!({
        "config": config,
        "editor": s.editor,
        "actions": actions.as_ref().map(|a| format_actions(a)),
        "task": task,
        "instruction": simplified,
        "output": args.out,
        "metrics": metrics,
    });
    ctx.emit(&value, || {
        let mut text = echo_line(&config);
        if let Some(a) = &actions {
            text += &format!("actions {}\n", format_actions(a));
        }
        if let Some(si) = &simplified {
            text += &format!("instruction {si}\n");
        }
        if let Some(t) = &task {
            text += &format!("task {t}\n");
        }
        if let Some(m) = &metrics {
            for key in ["snr", "snri", "si_sdr", "input_snr"] {
                let v = &m[key];
                let flag = if v["finite"].as_bool() == Some(false) { " (clamped)" } else { "" };
                text += &format!("{key:<10} {:>10.4} dB{flag}\n", v["value"].as_f64().unwrap_or(f64::NAN));
            }
        }
        if let Some(p) = &args.out {
            text += &format!("wrote {}\n", p.display());
        }
        text
    });
    Ok(ExitCode::SUCCESS)
}
