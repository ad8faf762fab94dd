use std::fmt::Write as _;
use std::process::ExitCode;

use mixedit::instruction::format_actions;
use mixedit::taskspace::{count_table, enumerate_edits, Composition, Task};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{echo, echo_line, set, Ctx};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Number of speech and audio sources, `S,A`.
    #[arg(long)]
    composition: Option<String>,
    /// Only the count table, without the enumerated action vectors.
    #[arg(long)]
    table: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub composition: String,
}

impl Default for Settings {
    fn default() -> Self {
        Settings { composition: "2,2".into() }
    }
}

pub fn run(ctx: &Ctx, args: Args) -> anyhow::Result<ExitCode> {
    let mut s = ctx.file.tasks.clone();
    set(&mut s.composition, args.composition);
    let comp: Composition = s.composition.parse().map_err(|e| crate::usage(format!("{e}")))?;
    let table = count_table(comp);
    let total: usize = table.values().sum();

    let rows: Vec<serde_json::Value> = Task::ALL
        .iter()
        .map(|t| {
            let n = table.get(t).copied().unwrap_or(0);
            let mut row = json!({ "code": t.code(), "name": t.name(), "count": (n > 0).then_some(n) });
            if !args.table && n > 0 {
                let edits: Vec<String> =
                    enumerate_edits(*t, comp).unwrap_or_default().iter().map(|v| format_actions(v)).collect();
                row["edits"] = json!(edits);
            }
            row
        })
        .collect();
    let config = echo(&s, ctx.seed_or(0));
    let value = json!({ "config": config, "composition": comp.to_string(), "tasks": rows, "total": total });

    ctx.emit(&value, || {
        let mut out = echo_line(&config);
        let _ = writeln!(out, "composition {comp} ({} speech, {} audio)", comp.n_speech, comp.n_audio);
        let _ = writeln!(out, "{:<5} {:<56} {:>6}", "code", "task", "edits");
        for t in Task::ALL {
            let n = table.get(&t).copied().unwrap_or(0);
            let count = if n > 0 { n.to_string() } else { "n/a".into() };
            let _ = writeln!(out, "{:<5} {:<56} {:>6}", t.code(), t.name(), count);
            if !args.table && n > 0 {
                for v in enumerate_edits(t, comp).unwrap_or_default() {
                    let _ = writeln!(out, "      {}", format_actions(&v));
                }
            }
        }
        let _ = writeln!(out, "{:<5} {:<56} {:>6}", "", "total", total);
        out
    });
    Ok(ExitCode::SUCCESS)
}
