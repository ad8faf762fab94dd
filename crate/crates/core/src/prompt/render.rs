use rand::seq::SliceRandom;

use super::{Lexicon, Prompt, PromptError, Provenance, SimplifiedInstruction, Target, TemplateId};
use crate::instruction::StyleAttribute;
use crate::seed;

pub(crate) const ALL_SPEECH_PHRASE: &str = "all the speakers";
pub(crate) const ALL_AUDIO_PHRASE: &str = "all the background sounds";
pub(crate) const EVERYTHING_PHRASE: &str = "everything";

/// `a`, `a and b`, `a, b, and c`.
fn join_attributes(items: &[String]) -> String {
    match items {
        [] => String::new(),
        [one] => one.clone(),
        [a, b] => format!("{a} and {b}"),
        [init @ .., last] => format!("{}, and {last}", init.join(", ")),
    }
}

/// `a`, `a, and b`, `a, b, and c`. Clauses always get the serial comma so
/// the boundary between edits stays visible.
fn join_clauses(items: &[String]) -> String {
    match items {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{}, and {last}", init.join(", ")),
    }
}

/// Noun phrase for an edit target, e.g. "the happy male speaker
/// characterized by normal pitch and high energy" or "the dog sound".
pub fn describe(target: &Target, lexicon: &Lexicon) -> String {
    match target {
        Target::Audio { label } => format!("the {label} {}", lexicon.audio_suffix),
        Target::AllSpeech => ALL_SPEECH_PHRASE.to_string(),
        Target::AllAudio => ALL_AUDIO_PHRASE.to_string(),
        Target::Everything => EVERYTHING_PHRASE.to_string(),
        Target::Speech { style } => {
            let mut words = vec!["the".to_string()];
            if let Some(e) = style.emotion {
                words.push(lexicon.emotion_word(e).to_string());
            }
            if let Some(g) = style.gender {
                words.push(g.as_str().to_string());
            }
            words.push(lexicon.speaker_noun.clone());
            let levels: Vec<String> = [
                (StyleAttribute::Pitch, style.pitch),
                (StyleAttribute::Tempo, style.tempo),
                (StyleAttribute::Volume, style.volume),
            ]
            .into_iter()
            .filter_map(|(attr, lvl)| lvl.map(|l| format!("{l} {}", lexicon.attribute_noun(attr))))
            .collect();
            if !levels.is_empty() {
                words.push(lexicon.characterized_by.clone());
                words.push(join_attributes(&levels));
            }
            words.join(" ")
        }
    }
}

/// Fills a template with the shuffled edits of `simplified`.
pub fn render(
    simplified: &SimplifiedInstruction,
    template: TemplateId,
    lexicon: &Lexicon,
    seed_value: u64,
) -> Result<Prompt, PromptError> {
    if simplified.is_empty() {
        return Err(PromptError::EmptyInstruction);
    }
    let mut rng = seed::rng(seed::derive_named(seed_value, "render"));
    let mut edits = simplified.edits.clone();
    edits.shuffle(&mut rng);
    let clauses: Vec<String> = edits
        .iter()
        .map(|e| {
            let verb = lexicon
                .phrases(e.action)
                .choose(&mut rng)
                .expect("lexicon guarantees phrases for every action");
            format!("{verb} {}", describe(&e.target, lexicon))
        })
        .collect();
    let text = format!("{} {}{}", template.prefix(), join_clauses(&clauses), template.terminator());
    Prompt::new(text, Provenance::Template)
}
