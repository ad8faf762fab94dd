//! Sources, actions and edit instructions.
//!
//! A source is identified by a [`Signature`]: a five-attribute speaking
//! style for speech or a class label for everything else. An
//! [`Instruction`] pairs one [`Action`] with every source of a mixture.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

macro_rules! attribute_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(rename_all = "lowercase")]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = SignatureError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                let t = s.trim().to_ascii_lowercase();
                $(if t == $text { return Ok($name::$variant); })+
                Err(SignatureError::BadAttribute {
                    attribute: stringify!($name),
                    value: s.to_string(),
                })
            }
        }
    };
}

attribute_enum!(Gender { Female => "female", Male => "male" });
attribute_enum!(
    /// Shared three-step scale for pitch, tempo and volume.
    Level { Low => "low", Normal => "normal", High => "high" }
);
attribute_enum!(Emotion {
    Angry => "angry",
    Contempt => "contempt",
    Disgusted => "disgusted",
    Fear => "fear",
    Happy => "happy",
    Sad => "sad",
    Surprised => "surprised",
    Neutral => "neutral",
});

/// The five speaking-style attributes, in style-vector order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StyleAttribute {
    Gender,
    Pitch,
    Tempo,
    Volume,
    Emotion,
}

impl StyleAttribute {
    pub const ALL: [StyleAttribute; 5] = [
        StyleAttribute::Gender,
        StyleAttribute::Pitch,
        StyleAttribute::Tempo,
        StyleAttribute::Volume,
        StyleAttribute::Emotion,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StyleAttribute::Gender => "gender",
            StyleAttribute::Pitch => "pitch",
            StyleAttribute::Tempo => "tempo",
            StyleAttribute::Volume => "volume",
            StyleAttribute::Emotion => "emotion",
        }
    }
}

/// `[gender, pitch, tempo, volume, emotion]`. The derived ordering is
/// lexicographic in that field order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StyleVector {
    pub gender: Gender,
    pub pitch: Level,
    pub tempo: Level,
    pub volume: Level,
    pub emotion: Emotion,
}

impl StyleVector {
    pub fn new(gender: Gender, pitch: Level, tempo: Level, volume: Level, emotion: Emotion) -> Self {
        StyleVector { gender, pitch, tempo, volume, emotion }
    }

    /// Attribute value rendered as its canonical keyword.
    pub fn value(&self, attr: StyleAttribute) -> &'static str {
        match attr {
            StyleAttribute::Gender => self.gender.as_str(),
            StyleAttribute::Pitch => self.pitch.as_str(),
            StyleAttribute::Tempo => self.tempo.as_str(),
            StyleAttribute::Volume => self.volume.as_str(),
            StyleAttribute::Emotion => self.emotion.as_str(),
        }
    }

    /// Every one of the 2·3·3·3·8 = 432 style vectors, in ascending order.
    pub fn all() -> Vec<StyleVector> {
        let mut out = Vec::with_capacity(432);
        for &g in Gender::ALL {
            for &p in Level::ALL {
                for &t in Level::ALL {
                    for &v in Level::ALL {
                        for &e in Emotion::ALL {
                            out.push(StyleVector::new(g, p, t, v, e));
                        }
                    }
                }
            }
        }
        out
    }
}

impl fmt::Display for StyleVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}, {}, {}, {}, {}]",
            self.gender, self.pitch, self.tempo, self.volume, self.emotion
        )
    }
}

/// Audio class label: lowercase, single-spaced, trimmed, non-empty.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ClassLabel(String);

impl ClassLabel {
    pub fn new(raw: &str) -> Result<Self, SignatureError> {
        let norm = raw
            .split_whitespace()
            .collect::<Vec<_>>()
            .join(" ")
            .to_lowercase();
        if norm.is_empty() {
            return Err(SignatureError::EmptyLabel);
        }
        Ok(ClassLabel(norm))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for ClassLabel {
    type Error = SignatureError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        ClassLabel::new(&value)
    }
}

impl From<ClassLabel> for String {
    fn from(l: ClassLabel) -> String {
        l.0
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Signature {
    Speech { style: StyleVector },
    Audio { label: ClassLabel },
}

impl Signature {
    pub fn speech(style: StyleVector) -> Self {
        Signature::Speech { style }
    }

    pub fn audio(label: &str) -> Result<Self, SignatureError> {
        Ok(Signature::Audio { label: ClassLabel::new(label)? })
    }

    pub fn is_speech(&self) -> bool {
        matches!(self, Signature::Speech { .. })
    }

    pub fn style(&self) -> Option<&StyleVector> {
        match self {
            Signature::Speech { style } => Some(style),
            Signature::Audio { .. } => None,
        }
    }

    pub fn label(&self) -> Option<&ClassLabel> {
        match self {
            Signature::Audio { label } => Some(label),
            Signature::Speech { .. } => None,
        }
    }

    /// Stable textual key, used for hashing and seeding.
    pub fn key(&self) -> String {
        match self {
            Signature::Speech { style } => format!(
                "speech:{},{},{},{},{}",
                style.gender, style.pitch, style.tempo, style.volume, style.emotion
            ),
            Signature::Audio { label } => format!("audio:{label}"),
        }
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Signature::Speech { style } => write!(f, "speech{style}"),
            Signature::Audio { label } => write!(f, "audio[{label}]"),
        }
    }
}

/// Parses `speech:female,high,normal,low,happy` or `audio:dog barking`.
impl FromStr for Signature {
    type Err = SignatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| SignatureError::BadSignature(s.to_string()))?;
        match kind.trim().to_ascii_lowercase().as_str() {
            "speech" => {
                let parts: Vec<&str> = rest.split(',').collect();
                if parts.len() != 5 {
                    return Err(SignatureError::BadSignature(s.to_string()));
                }
                Ok(Signature::speech(StyleVector::new(
                    parts[0].parse()?,
                    parts[1].parse()?,
                    parts[2].parse()?,
                    parts[3].parse()?,
                    parts[4].parse()?,
                )))
            }
            "audio" => Signature::audio(rest),
            _ => Err(SignatureError::BadSignature(s.to_string())),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SignatureError {
    #[error("class label is empty")]
    EmptyLabel,
    #[error("invalid {attribute} value {value:?}")]
    BadAttribute { attribute: &'static str, value: String },
    #[error("cannot parse signature {0:?}; expected speech:<g>,<p>,<t>,<v>,<e> or audio:<label>")]
    BadSignature(String),
}

/// One of the four editing actions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Remove,
    Keep,
    VolUp,
    VolDown,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::Remove, Action::Keep, Action::VolUp, Action::VolDown];

    /// Scaling factor applied to the source.
    pub fn alpha(self) -> f64 {
        match self {
            Action::Remove => 0.0,
            Action::Keep => 1.0,
            Action::VolUp => 2.0,
            Action::VolDown => 0.5,
        }
    }

    pub fn gain_db(self) -> f64 {
        20.0 * self.alpha().log10()
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Action::Remove => "0",
            Action::Keep => "1",
            Action::VolUp => "↑",
            Action::VolDown => "↓",
        }
    }

    pub fn is_volume(self) -> bool {
        matches!(self, Action::VolUp | Action::VolDown)
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Accepts `0 1 ↑ ↓`, the ASCII aliases `u d`, and the snake_case names.
impl FromStr for Action {
    type Err = ActionParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "0" | "remove" => Ok(Action::Remove),
            "1" | "keep" => Ok(Action::Keep),
            "↑" | "u" | "up" | "vol_up" => Ok(Action::VolUp),
            "↓" | "d" | "down" | "vol_down" => Ok(Action::VolDown),
            _ => Err(ActionParseError(s.to_string())),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown action {0:?}; expected one of 0, 1, ↑/u, ↓/d")]
pub struct ActionParseError(pub String);

/// Parses a comma-separated action vector such as `"0,↓,↑,1"`.
pub fn parse_actions(s: &str) -> Result<Vec<Action>, ActionParseError> {
    s.split(',').map(str::parse).collect()
}

pub fn format_actions(actions: &[Action]) -> String {
    let parts: Vec<&str> = actions.iter().map(|a| a.symbol()).collect();
    format!("[{}]", parts.join(", "))
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum InstructionError {
    #[error("an instruction needs at least 2 edits, got {0}")]
    TooFewEdits(usize),
    #[error("sources {0} and {1} share the same signature")]
    DuplicateSignature(usize, usize),
    #[error("every action is keep (identity edit)")]
    TrivialIdentity,
    #[error("every action is remove (silence edit)")]
    TrivialSilence,
}

/// A full edit instruction: one action per source, signatures pairwise distinct.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Instruction {
    edits: Vec<(Action, Signature)>,
}

impl Instruction {
    pub fn new(edits: Vec<(Action, Signature)>) -> Result<Self, InstructionError> {
        validate_instruction(edits)
    }

    pub fn edits(&self) -> &[(Action, Signature)] {
        &self.edits
    }

    pub fn actions(&self) -> Vec<Action> {
        self.edits.iter().map(|(a, _)| *a).collect()
    }

    pub fn signatures(&self) -> Vec<Signature> {
        self.edits.iter().map(|(_, s)| s.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.edits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edits.is_empty()
    }
}

/// Checks signature distinctness first, then rejects identity and silence.
pub fn validate_instruction(edits: Vec<(Action, Signature)>) -> Result<Instruction, InstructionError> {
    if edits.len() < 2 {
        return Err(InstructionError::TooFewEdits(edits.len()));
    }
    check_distinct(edits.iter().map(|(_, s)| s))?;
    if edits.iter().all(|(a, _)| *a == Action::Keep) {
        return Err(InstructionError::TrivialIdentity);
    }
    if edits.iter().all(|(a, _)| *a == Action::Remove) {
        return Err(InstructionError::TrivialSilence);
    }
    Ok(Instruction { edits })
}

/// Returns the first duplicated pair `(i, j)`, `i < j`.
pub fn check_distinct<'a>(
    signatures: impl IntoIterator<Item = &'a Signature>,
) -> Result<(), InstructionError> {
    let sigs: Vec<&Signature> = signatures.into_iter().collect();
    for j in 1..sigs.len() {
        for i in 0..j {
            if sigs[i] == sigs[j] {
                return Err(InstructionError::DuplicateSignature(i, j));
            }
        }
    }
    Ok(())
}
