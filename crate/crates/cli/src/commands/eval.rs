use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use mixedit::dataset::read_manifest;
use mixedit::metrics::{snr, snri};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::load_clip;
use crate::config::{echo, echo_line, set, Ctx};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Directory of edited outputs.
    #[arg(long)]
    est: Option<PathBuf>,
    /// Directory of target mixtures.
    #[arg(long = "ref")]
    reference: Option<PathBuf>,
    /// Directory of unprocessed input mixtures.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Manifest used to group results by task (file stem = record id).
    #[arg(long)]
    per_task: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub est: Option<PathBuf>,
    #[serde(rename = "ref")]
    pub reference: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub per_task: Option<PathBuf>,
}

/// Summary of one group of SNRi values.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Stats {
    pub count: usize,
    pub mean: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    /// Fraction of items with SNRi > 0.
    pub improved: f64,
    /// Items where either SNR hit the ±300 dB clamp.
    pub clamped: usize,
}

/// Linear interpolation between closest ranks on sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn stats(items: &[(f64, bool)]) -> Stats {
    let mut v: Vec<f64> = items.iter().map(|i| i.0).collect();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Stats {
        count: n,
        mean: v.iter().sum::<f64>() / n as f64,
        q25: quantile(&v, 0.25),
        median: quantile(&v, 0.5),
        q75: quantile(&v, 0.75),
        improved: v.iter().filter(|x| **x > 0.0).count() as f64 / n as f64,
        clamped: items.iter().filter(|i| i.1).count(),
    }
}

fn wav_names(dir: &Path) -> anyhow::Result<Vec<String>> {
    let mut names = Vec::new();
    for e in std::fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let name = e?.file_name().to_string_lossy().to_string();
        if name.to_ascii_lowercase().ends_with(".wav") {
            names.push(name);
        }
    }
    names.sort();
    Ok(names)
}

pub fn run(ctx: &Ctx, args: Args) -> anyhow::Result<ExitCode> {
    let mut s = ctx.file.eval.clone();
    set(&mut s.est, args.est.map(Some));
    set(&mut s.reference, args.reference.map(Some));
    set(&mut s.input, args.input.map(Some));
    set(&mut s.per_task, args.per_task.map(Some));
    let need = |p: &Option<PathBuf>, flag: &str| p.clone().ok_or_else(|| crate::usage(format!("{flag} is required")));
    let (est, reference, input) = (need(&s.est, "--est")?, need(&s.reference, "--ref")?, need(&s.input, "--input")?);

    let tasks: BTreeMap<String, String> = match &s.per_task {
        Some(path) => read_manifest(path)?.into_iter().map(|r| (r.id, r.task.code().to_string())).collect(),
        None => BTreeMap::new(),
    };

    let names = wav_names(&reference)?;
    if names.is_empty() {
        bail!("no WAV files in {}", reference.display());
    }
    let mut files = Vec::new();
    let mut groups: BTreeMap<String, Vec<(f64, bool)>> = BTreeMap::new();
    let mut all = Vec::new();
    for name in &names {
        let (e, i) = (est.join(name), input.join(name));
        for p in [&e, &i] {
            if !p.exists() {
                bail!("missing pair: {} has no counterpart {}", name, p.display());
            }
        }
        let (y, yhat, x) = (load_clip(&reference.join(name))?, load_clip(&e)?, load_clip(&i)?);
        let v = snri(&x, &yhat, &y).with_context(|| name.clone())?;
        let (out, inp) = (snr(&yhat, &y)?, snr(&x, &y)?);
        let clamped = !(out.finite && inp.finite);
        let stem = name.rsplit_once('.').map_or(name.as_str(), |(a, _)| a).to_string();
        let task = tasks.get(&stem).cloned();
        if !tasks.is_empty() {
            groups.entry(task.clone().unwrap_or_else(|| "unknown".into())).or_default().push((v.value, clamped));
        }
        all.push((v.value, clamped));
        files.push(json!({ "name": name, "task": task, "snri": v.value, "snr": out.value, "input_snr": inp.value,
            "clamped": clamped }));
    }
    let overall = stats(&all);
    let per_task: BTreeMap<&String, Stats> = groups.iter().map(|(k, v)| (k, stats(v))).collect();

    let config = echo(&s, ctx.seed_or(0));
    let value = json!({ "config": config, "overall": overall, "per_task": per_task, "files": files });
    ctx.emit(&value, || {
        let mut out = echo_line(&config);
        let _ = writeln!(
            out,
            "{:<8} {:>6} {:>9} {:>9} {:>9} {:>9} {:>9} {:>8}",
            "group", "n", "mean", "q25", "median", "q75", "improved", "clamped"
        );
        let mut row = |name: &str, st: &Stats| {
            let _ = writeln!(
                out,
                "{:<8} {:>6} {:>9.3} {:>9.3} {:>9.3} {:>9.3} {:>8.1}% {:>8}",
                name,
                st.count,
                st.mean,
                st.q25,
                st.median,
                st.q75,
                100.0 * st.improved,
                st.clamped
            );
        };
        for (k, st) in &per_task {
            row(k, st);
        }
        row("all", &overall);
        out
    });
    Ok(ExitCode::SUCCESS)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_interpolate_between_ranks() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert_eq!(quantile(&v, 0.25), 1.75);
        assert_eq!(quantile(&[5.0], 0.75), 5.0);
        let st = stats(&[(-1.0, false), (2.0, true), (3.0, false)]);
        assert_eq!((st.count, st.clamped), (3, 1));
        assert!((st.improved - 2.0 / 3.0).abs() < 1e-15);
    }
}
