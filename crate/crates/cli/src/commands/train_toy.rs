use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use mixedit::dataset::{ingest, CatalogEntry, IngestOptions};
use mixedit::editor::{
    embed_instruction, save_checkpoint, toy_dataset, train_toy, FilmConfig, FilmMaskNet, Optimizer, ToyExample,
    TrainConfig,
};
use mixedit::prompt::{SimplifiedEdit, SimplifiedInstruction, Target};
use mixedit::seed;
use mixedit::taskspace::nontrivial_vectors;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{echo, echo_line, set, Ctx};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Directory for `film.ckpt`, `loss.csv` and `report.json`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Draw training pairs from this catalog instead of tonal toy signals.
    #[arg(long)]
    catalog: Option<PathBuf>,
    /// Full-batch optimisation steps.
    #[arg(long)]
    steps: Option<usize>,
    /// Learning rate.
    #[arg(long)]
    lr: Option<f64>,
    /// Number of training examples.
    #[arg(long)]
    examples: Option<usize>,
    /// Example length in samples.
    #[arg(long)]
    length: Option<usize>,
    /// Use the multi-mask permutation-invariant objective.
    #[arg(long)]
    pit: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub out: Option<PathBuf>,
    pub catalog: Option<PathBuf>,
    pub examples: usize,
    pub length: usize,
    pub steps: usize,
    pub lr: f64,
    pub optimizer: Optimizer,
    pub pit: bool,
    pub stop_below: Option<f64>,
    pub film: FilmConfig,
}

impl Default for Settings {
    fn default() -> Self {
        let t = TrainConfig::default();
        Settings {
            out: None,
            catalog: None,
            examples: 8,
            length: 1600,
            steps: t.steps,
            lr: t.lr,
            optimizer: t.optimizer,
            pit: t.pit,
            stop_below: t.stop_below,
            film: FilmConfig::toy(),
        }
    }
}

/// Speech + background pairs cut from catalog clips, edited by a random
/// nontrivial action pair and described at group level.
fn catalog_examples(
    entries: &[CatalogEntry],
    count: usize,
    len: usize,
    embed_dim: usize,
    seed_value: u64,
) -> anyhow::Result<Vec<ToyExample>> {
    let speech: Vec<&CatalogEntry> = entries.iter().filter(|e| e.signature.is_speech()).collect();
    let audio: Vec<&CatalogEntry> = entries.iter().filter(|e| !e.signature.is_speech()).collect();
    anyhow::ensure!(!speech.is_empty() && !audio.is_empty(), "the catalog needs speech and audio entries");
    let vectors = nontrivial_vectors(2);
    (0..count)
        .map(|i| {
            let mut rng = seed::rng(seed::derive(seed_value, i as u64));
            let cut = |e: &CatalogEntry, rng: &mut rand_chacha::ChaCha8Rng| -> anyhow::Result<Vec<f64>> {
                let clip = e.load()?;
                let s = clip.samples();
                anyhow::ensure!(s.len() >= len, "{} is shorter than {len} samples", e.id);
                // skip near-silent windows (pauses, gaps between beeps)
                for _ in 0..100 {
                    let start = rng.gen_range(0..=s.len() - len);
                    let w = &s[start..start + len];
                    if w.iter().map(|v| v * v).sum::<f64>() / len as f64 > 1e-5 {
                        return Ok(w.to_vec());
                    }
                }
                anyhow::bail!("no audible {len}-sample window in {}", e.id)
            };
            let (sp, au) = (speech.choose(&mut rng).copied(), audio.choose(&mut rng).copied());
            let voice = cut(sp.expect("non-empty"), &mut rng)?;
            let background = cut(au.expect("non-empty"), &mut rng)?;
            let actions = vectors.choose(&mut rng).cloned().unwrap_or_default();
            let scaled: Vec<Vec<f64>> = [&voice, &background]
                .iter()
                .zip(&actions)
                .map(|(s, a)| s.iter().map(|v| a.alpha() * v).collect())
                .collect();
            let x = voice.iter().zip(&background).map(|(a, b)| a + b).collect();
            let y = scaled[0].iter().zip(&scaled[1]).map(|(a, b)| a + b).collect();
            let edits = actions
                .iter()
                .zip([Target::AllSpeech, Target::AllAudio])
                .map(|(&action, target)| SimplifiedEdit { action, target })
                .collect();
            let z = embed_instruction(&SimplifiedInstruction::new(edits), embed_dim);
            Ok(ToyExample { x, z, y, sources: Some(scaled) })
        })
        .collect()
}

pub fn run(ctx: &Ctx, args: Args) -> anyhow::Result<ExitCode> {
    let mut s = ctx.file.train_toy.clone();
    set(&mut s.out, args.out.map(Some));
    set(&mut s.catalog, args.catalog.map(Some));
    set(&mut s.steps, args.steps);
    set(&mut s.lr, args.lr);
    set(&mut s.examples, args.examples);
    set(&mut s.length, args.length);
    s.pit |= args.pit;
    let out = s.out.clone().ok_or_else(|| crate::usage("--out is required"))?;
    s.film.validate().map_err(|e| crate::usage(format!("invalid film config: {e}")))?;
    if s.pit && s.film.n_masks < 2 {
        s.film.n_masks = 2;
    }
    let seed_value = ctx.seed_or(0);

    let data_seed = seed::derive_named(seed_value, "data");
    let data = match &s.catalog {
        Some(dir) => {
            let cat = ingest(dir, &dir.join("metadata.csv"), &IngestOptions::default())?.catalog;
            catalog_examples(&cat.entries, s.examples, s.length, s.film.embed_dim, data_seed)?
        }
        None => toy_dataset(s.examples, s.length, s.film.embed_dim, data_seed),
    };
    let mut net = FilmMaskNet::new(s.film, seed::derive_named(seed_value, "net"))?;
    let cfg = TrainConfig { steps: s.steps, lr: s.lr, optimizer: s.optimizer, pit: s.pit, stop_below: s.stop_below };
    let report = train_toy(&mut net, &data, &cfg)?;

    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let ckpt = out.join("film.ckpt");
    save_checkpoint(&net, &ckpt)?;
    let mut csv = String::from("step,loss_db\n");
    for (i, l) in report.losses.iter().enumerate() {
        let _ = writeln!(csv, "{i},{l}");
    }
    std::fs::write(out.join("loss.csv"), csv)?;

    let config = echo(&s, seed_value);
    let value = json!({
        "config": config,
        "checkpoint": ckpt,
        "steps": report.losses.len(),
        "initial_loss": report.initial_loss(),
        "final_loss": report.final_loss,
    });
    std::fs::write(out.join("report.json"), serde_json::to_string_pretty(&value)? + "\n")?;
    ctx.emit(&value, || {
        format!(
            "{}loss {:.3} dB -> {:.3} dB over {} steps\ncheckpoint {}\n",
            echo_line(&config),
            report.initial_loss(),
            report.final_loss,
            report.losses.len(),
            ckpt.display()
        )
    });
    Ok(ExitCode::SUCCESS)
}
