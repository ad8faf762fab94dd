//! Instruction simplification, template prompts, group-level prompts and
//! the rule-based prompt parser.
//!
//! The pipeline is `Instruction → simplify → SimplifiedInstruction → render
//! → Prompt`, and `parse` maps template-grammar text back to a
//! [`SimplifiedInstruction`]. [`resolve`] turns a simplified instruction
//! into a full action vector against a concrete list of source signatures.

mod lexicon;
mod parse;
mod render;
mod simplify;
mod special;

pub use lexicon::{Lexicon, LexiconError, SpecialPattern};
pub use parse::{parse, ParseError, ParseErrorKind};
pub use render::{describe, render};
pub use simplify::{minimal_distinguishing_subset, resolve, simplify};
pub use special::{special_generic, special_pattern};

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instruction::{Action, ClassLabel, Emotion, Gender, Level, StyleAttribute, StyleVector};

/// A speaking style with some attributes left out. At least one attribute
/// is present in every well-formed value.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PartialStyle {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gender: Option<Gender>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pitch: Option<Level>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tempo: Option<Level>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub volume: Option<Level>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emotion: Option<Emotion>,
}

impl PartialStyle {
    /// Keeps only `attrs` of `style`.
    pub fn restrict(style: &StyleVector, attrs: &[StyleAttribute]) -> Self {
        let mut p = PartialStyle::default();
        for a in attrs {
            match a {
                StyleAttribute::Gender => p.gender = Some(style.gender),
                StyleAttribute::Pitch => p.pitch = Some(style.pitch),
                StyleAttribute::Tempo => p.tempo = Some(style.tempo),
                StyleAttribute::Volume => p.volume = Some(style.volume),
                StyleAttribute::Emotion => p.emotion = Some(style.emotion),
            }
        }
        p
    }

    pub fn full(style: &StyleVector) -> Self {
        Self::restrict(style, &StyleAttribute::ALL)
    }

    pub fn is_empty(&self) -> bool {
        self.attributes().is_empty()
    }

    /// Present attributes in style-vector order.
    pub fn attributes(&self) -> Vec<StyleAttribute> {
        let mut out = Vec::new();
        if self.gender.is_some() {
            out.push(StyleAttribute::Gender);
        }
        if self.pitch.is_some() {
            out.push(StyleAttribute::Pitch);
        }
        if self.tempo.is_some() {
            out.push(StyleAttribute::Tempo);
        }
        if self.volume.is_some() {
            out.push(StyleAttribute::Volume);
        }
        if self.emotion.is_some() {
            out.push(StyleAttribute::Emotion);
        }
        out
    }

    /// True when every present attribute agrees with `style`.
    pub fn matches(&self, style: &StyleVector) -> bool {
        self.gender.is_none_or(|g| g == style.gender)
            && self.pitch.is_none_or(|v| v == style.pitch)
            && self.tempo.is_none_or(|v| v == style.tempo)
            && self.volume.is_none_or(|v| v == style.volume)
            && self.emotion.is_none_or(|v| v == style.emotion)
    }
}

impl fmt::Display for PartialStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let field = |o: Option<&'static str>| o.unwrap_or("*");
        write!(
            f,
            "[{}, {}, {}, {}, {}]",
            field(self.gender.map(Gender::as_str)),
            field(self.pitch.map(Level::as_str)),
            field(self.tempo.map(Level::as_str)),
            field(self.volume.map(Level::as_str)),
            field(self.emotion.map(Emotion::as_str)),
        )
    }
}

/// What an edit in a simplified instruction refers to.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Target {
    Speech { style: PartialStyle },
    Audio { label: ClassLabel },
    AllSpeech,
    AllAudio,
    Everything,
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Speech { style } => write!(f, "speech{style}"),
            Target::Audio { label } => write!(f, "audio[{label}]"),
            Target::AllSpeech => f.write_str("all speech"),
            Target::AllAudio => f.write_str("all audio"),
            Target::Everything => f.write_str("everything"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SimplifiedEdit {
    pub action: Action,
    pub target: Target,
}

/// The edits a prompt actually mentions. When every action is keep, the
/// instruction is extraction-phrased and unmentioned sources are removed;
/// otherwise unmentioned sources are kept.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SimplifiedInstruction {
    pub edits: Vec<SimplifiedEdit>,
}

impl SimplifiedInstruction {
    pub fn new(edits: Vec<SimplifiedEdit>) -> Self {
        SimplifiedInstruction { edits }
    }

    pub fn is_extraction_phrased(&self) -> bool {
        !self.edits.is_empty() && self.edits.iter().all(|e| e.action == Action::Keep)
    }

    /// Edits in sorted order, for order-insensitive comparison.
    pub fn canonical(&self) -> Vec<SimplifiedEdit> {
        let mut v = self.edits.clone();
        v.sort();
        v
    }

    pub fn same_edits(&self, other: &SimplifiedInstruction) -> bool {
        self.canonical() == other.canonical()
    }

    pub fn len(&self) -> usize {
        self.edits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edits.is_empty()
    }
}

impl fmt::Display for SimplifiedInstruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> =
            self.edits.iter().map(|e| format!("({}, {})", e.action, e.target)).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TemplateId {
    Please,
    IWantTo,
    CanYou,
}

impl TemplateId {
    pub const ALL: [TemplateId; 3] = [TemplateId::Please, TemplateId::IWantTo, TemplateId::CanYou];

    pub fn prefix(self) -> &'static str {
        match self {
            TemplateId::Please => "Please",
            TemplateId::IWantTo => "I want to",
            TemplateId::CanYou => "Can you",
        }
    }

    pub fn terminator(self) -> char {
        match self {
            TemplateId::CanYou => '?',
            _ => '.',
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Template,
    SpecialGeneric,
    ExternalRephrase,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Prompt {
    pub text: String,
    pub provenance: Provenance,
}

impl Prompt {
    /// A single sentence ending in `.` or `?`.
    pub fn new(text: impl Into<String>, provenance: Provenance) -> Result<Self, PromptError> {
        let text = text.into().trim().to_string();
        if text.is_empty() || !(text.ends_with('.') || text.ends_with('?')) {
            return Err(PromptError::BadPromptText(text));
        }
        Ok(Prompt { text, provenance })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PromptError {
    #[error("speech sources {0} and {1} share all five style attributes")]
    CannotDistinguish(usize, usize),
    #[error("prompt text {0:?} must be a non-empty sentence ending in '.' or '?'")]
    BadPromptText(String),
    #[error("cannot render an empty instruction")]
    EmptyInstruction,
    #[error("no source matches {0}")]
    NoMatch(Target),
    #[error("{0} matches more than one source")]
    Ambiguous(Target),
    #[error("source {0} receives two different actions")]
    Conflict(usize),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_style_matching() {
        let s = StyleVector::new(Gender::Male, Level::Low, Level::High, Level::Normal, Emotion::Sad);
        let p = PartialStyle::restrict(&s, &[StyleAttribute::Tempo, StyleAttribute::Gender]);
        assert_eq!(p.attributes(), vec![StyleAttribute::Gender, StyleAttribute::Tempo]);
        assert!(p.matches(&s));
        let other = StyleVector { gender: Gender::Female, ..s };
        assert!(!p.matches(&other));
        assert!(PartialStyle::default().is_empty());
        assert_eq!(p.to_string(), "[male, *, high, *, *]");
    }

    #[test]
    fn prompt_text_rules() {
        assert!(Prompt::new("Please remove the dog sound.", Provenance::Template).is_ok());
        assert!(Prompt::new("Can you help?", Provenance::Template).is_ok());
        assert!(Prompt::new("", Provenance::Template).is_err());
        assert!(Prompt::new("no terminator", Provenance::Template).is_err());
    }

    #[test]
    fn canonical_comparison_ignores_order() {
        let a = SimplifiedEdit { action: Action::Remove, target: Target::AllAudio };
        let b = SimplifiedEdit { action: Action::VolUp, target: Target::AllSpeech };
        let x = SimplifiedInstruction::new(vec![a.clone(), b.clone()]);
        let y = SimplifiedInstruction::new(vec![b, a]);
        assert!(x.same_edits(&y));
        assert_ne!(x, y);
    }
}
