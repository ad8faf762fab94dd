use rand::Rng;

use crate::instruction::Action;
use crate::prompt::{SimplifiedInstruction, Target};
use crate::seed;

pub const DEFAULT_EMBED_DIM: usize = 32;

fn features(target: &Target) -> Vec<String> {
    match target {
        Target::Speech { style } => {
            let mut f = vec!["speech".to_string()];
            if let Some(g) = style.gender {
                f.push(format!("gender={g}"));
            }
            if let Some(p) = style.pitch {
                f.push(format!("pitch={p}"));
            }
            if let Some(t) = style.tempo {
                f.push(format!("tempo={t}"));
            }
            if let Some(v) = style.volume {
                f.push(format!("volume={v}"));
            }
            if let Some(e) = style.emotion {
                f.push(format!("emotion={e}"));
            }
            f
        }
        Target::Audio { label } => vec!["audio".to_string(), format!("label={label}")],
        Target::AllSpeech => vec!["all-speech".to_string()],
        Target::AllAudio => vec!["all-audio".to_string()],
        Target::Everything => vec!["everything".to_string()],
    }
}

fn action_name(a: Action) -> &'static str {
    match a {
        Action::Remove => "remove",
        Action::Keep => "keep",
        Action::VolUp => "vol_up",
        Action::VolDown => "vol_down",
    }
}

/// Deterministic random direction for one `(action, feature)` pair.
fn feature_vector(action: Action, feature: &str, dim: usize) -> impl Iterator<Item = f64> {
    let key = format!("{}|{feature}", action_name(action));
    let mut rng = seed::rng(seed::fnv1a64(key.as_bytes()));
    (0..dim).map(move |_| rng.gen_range(-1.0..1.0))
}

/// Feature-hashed, unit-norm conditioning vector for an instruction.
///
/// Every edit contributes one pseudo-random vector per `(action, feature)`
/// pair, where features are the target kind and each retained attribute or
/// label. Equal instructions (up to edit order) give equal vectors.
pub fn embed_instruction(simplified: &SimplifiedInstruction, dim: usize) -> Vec<f64> {
    let mut z = vec![0.0; dim];
    for edit in simplified.canonical() {
        for f in features(&edit.target) {
            for (zi, v) in z.iter_mut().zip(feature_vector(edit.action, &f, dim)) {
                *zi += v;
            }
        }
    }
    let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        z.iter_mut().for_each(|v| *v /= norm);
    }
    z
}
