use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;
use thiserror::Error;

use crate::instruction::{Action, Emotion, Gender, Level, StyleAttribute};

/// The lexicon shipped with the crate.
pub const DEFAULT_LEXICON: &str = include_str!("../../data/lexicon.toml");

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("lexicon is not valid TOML: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("cannot read lexicon: {0}")]
    Io(#[from] std::io::Error),
    #[error("unsupported lexicon version {0}")]
    Version(u32),
    #[error("action {0} has fewer than 3 phrases")]
    TooFewPhrases(Action),
    #[error("phrase {phrase:?} maps to both {first} and {second}")]
    AmbiguousPhrase { phrase: String, first: Action, second: Action },
    #[error("synonym {word:?} maps to unknown value {value:?}")]
    BadSynonym { word: String, value: String },
    #[error("bad special-prompt pattern {0:?}")]
    BadPattern(String),
    #[error("special pattern {0} needs exactly 5 prompts")]
    SpecialCount(String),
    #[error("special prompt {0:?} appears under two patterns")]
    DuplicateSpecial(String),
    #[error("special prompt {0:?} must end in '.' or '?'")]
    BadSpecialText(String),
    #[error("no special prompts for pattern {0}")]
    MissingPattern(String),
    #[error("unknown emotion key {0:?}")]
    BadEmotion(String),
}

/// Group-level edit shape that a special generic prompt expresses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SpecialPattern {
    /// One action for every speech source and another for every audio source.
    Groups { speech: Action, audio: Action },
    /// The same volume action on every source.
    All(Action),
}

fn action_key(a: Action) -> &'static str {
    match a {
        Action::Remove => "remove",
        Action::Keep => "keep",
        Action::VolUp => "vol_up",
        Action::VolDown => "vol_down",
    }
}

fn parse_action_key(s: &str) -> Option<Action> {
    Action::ALL.into_iter().find(|a| action_key(*a) == s)
}

impl fmt::Display for SpecialPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpecialPattern::Groups { speech, audio } => {
                write!(f, "{}/{}", action_key(*speech), action_key(*audio))
            }
            SpecialPattern::All(a) => write!(f, "all/{}", action_key(*a)),
        }
    }
}

impl FromStr for SpecialPattern {
    type Err = LexiconError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || LexiconError::BadPattern(s.to_string());
        let (l, r) = s.split_once('/').ok_or_else(bad)?;
        let right = parse_action_key(r.trim()).ok_or_else(bad)?;
        if l.trim() == "all" {
            if !right.is_volume() {
                return Err(bad());
            }
            return Ok(SpecialPattern::All(right));
        }
        let left = parse_action_key(l.trim()).ok_or_else(bad)?;
        if left == right {
            return Err(bad());
        }
        Ok(SpecialPattern::Groups { speech: left, audio: right })
    }
}

impl SpecialPattern {
    /// The twelve group patterns plus the two overall-volume ones.
    pub fn all() -> Vec<SpecialPattern> {
        let mut v = Vec::new();
        for s in Action::ALL {
            for a in Action::ALL {
                if s != a {
                    v.push(SpecialPattern::Groups { speech: s, audio: a });
                }
            }
        }
        v.push(SpecialPattern::All(Action::VolUp));
        v.push(SpecialPattern::All(Action::VolDown));
        v
    }
}

#[derive(Debug, Deserialize)]
struct RawActions {
    remove: Vec<String>,
    keep: Vec<String>,
    vol_up: Vec<String>,
    vol_down: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct RawRender {
    speaker_noun: String,
    audio_suffix: String,
    characterized_by: String,
    pitch: String,
    tempo: String,
    volume: String,
    emotion: BTreeMap<String, String>,
}

#[derive(Debug, Deserialize)]
struct RawLexicon {
    version: u32,
    actions: RawActions,
    render: RawRender,
    #[serde(default)]
    synonyms: BTreeMap<String, String>,
    special: BTreeMap<String, Vec<String>>,
}

/// Word classes the parser recognises.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Word {
    Gender(Gender),
    /// Gendered word that can also stand in for the speaker noun.
    GenderNoun(Gender),
    Noun,
    Emotion(Emotion),
    Level(Level),
    AttributeNoun(StyleAttribute),
    Compound(StyleAttribute, Level),
}

/// Verb phrases, rendering words and synonyms used by the prompt renderer
/// and parser.
#[derive(Clone, Debug)]
pub struct Lexicon {
    pub version: u32,
    phrases: BTreeMap<Action, Vec<String>>,
    pub speaker_noun: String,
    pub audio_suffix: String,
    pub characterized_by: String,
    characterized_by_words: Vec<String>,
    attribute_nouns: BTreeMap<StyleAttribute, String>,
    emotion_words: BTreeMap<Emotion, String>,
    special: BTreeMap<SpecialPattern, Vec<String>>,
    /// Parser-side verb table: token sequence → action, longest first.
    verbs: Vec<(Vec<String>, Action)>,
    words: HashMap<String, Word>,
    /// Normalized special prompt → pattern.
    special_lookup: HashMap<String, SpecialPattern>,
}

impl Lexicon {
    pub fn builtin() -> Self {
        Self::from_toml(DEFAULT_LEXICON).expect("bundled lexicon is valid")
    }

    pub fn from_path(path: &Path) -> Result<Self, LexiconError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn from_toml(text: &str) -> Result<Self, LexiconError> {
        let raw: RawLexicon = toml::from_str(text)?;
        if raw.version != 1 {
            return Err(LexiconError::Version(raw.version));
        }
        let norm = |s: &str| s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();

        let mut phrases = BTreeMap::new();
        phrases.insert(Action::Remove, raw.actions.remove.iter().map(|s| norm(s)).collect::<Vec<_>>());
        phrases.insert(Action::Keep, raw.actions.keep.iter().map(|s| norm(s)).collect());
        phrases.insert(Action::VolUp, raw.actions.vol_up.iter().map(|s| norm(s)).collect());
        phrases.insert(Action::VolDown, raw.actions.vol_down.iter().map(|s| norm(s)).collect());
        for (a, list) in &phrases {
            if list.iter().filter(|p| !p.is_empty()).count() < 3 {
                return Err(LexiconError::TooFewPhrases(*a));
            }
        }

        let mut verb_map: BTreeMap<String, Action> = BTreeMap::new();
        let mut add_verb = |phrase: String, action: Action| -> Result<(), LexiconError> {
            if let Some(prev) = verb_map.get(&phrase) {
                if *prev != action {
                    return Err(LexiconError::AmbiguousPhrase { phrase, first: *prev, second: action });
                }
            }
            verb_map.insert(phrase, action);
            Ok(())
        };
        for (a, list) in &phrases {
            for p in list {
                add_verb(p.clone(), *a)?;
            }
        }

        let mut attribute_nouns = BTreeMap::new();
        attribute_nouns.insert(StyleAttribute::Pitch, norm(&raw.render.pitch));
        attribute_nouns.insert(StyleAttribute::Tempo, norm(&raw.render.tempo));
        attribute_nouns.insert(StyleAttribute::Volume, norm(&raw.render.volume));

        let mut emotion_words = BTreeMap::new();
        for (k, v) in &raw.render.emotion {
            let e: Emotion = k.parse().map_err(|_| LexiconError::BadEmotion(k.clone()))?;
            emotion_words.insert(e, norm(v));
        }
        for e in Emotion::ALL {
            emotion_words.entry(*e).or_insert_with(|| e.as_str().to_string());
        }

        let mut words: HashMap<String, Word> = HashMap::new();
        for g in Gender::ALL {
            words.insert(g.as_str().to_string(), Word::Gender(*g));
        }
        for l in Level::ALL {
            words.insert(l.as_str().to_string(), Word::Level(*l));
        }
        for e in Emotion::ALL {
            words.insert(e.as_str().to_string(), Word::Emotion(*e));
        }
        for (e, w) in &emotion_words {
            words.insert(w.clone(), Word::Emotion(*e));
        }
        for (a, w) in &attribute_nouns {
            words.insert(w.clone(), Word::AttributeNoun(*a));
        }
        words.insert(norm(&raw.render.speaker_noun), Word::Noun);

        for (key, value) in &raw.synonyms {
            let key = norm(key);
            let value_n = norm(value);
            if let Some(action) = parse_action_key(&value_n) {
                add_verb(key, action)?;
                continue;
            }
            let bad = || LexiconError::BadSynonym { word: key.clone(), value: value.clone() };
            let word = match words.get(&value_n).copied() {
                Some(Word::Gender(g)) => Word::GenderNoun(g),
                Some(w) => w,
                None => {
                    let (lvl, attr) = value_n.split_once(' ').ok_or_else(bad)?;
                    match (words.get(lvl), words.get(attr)) {
                        (Some(Word::Level(l)), Some(Word::AttributeNoun(a))) => Word::Compound(*a, *l),
                        _ => return Err(bad()),
                    }
                }
            };
            words.insert(key, word);
        }

        let mut verbs: Vec<(Vec<String>, Action)> = verb_map
            .into_iter()
            .map(|(p, a)| (p.split(' ').map(str::to_string).collect(), a))
            .collect();
        verbs.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));

        let mut special = BTreeMap::new();
        let mut seen: HashMap<String, SpecialPattern> = HashMap::new();
        for (k, list) in &raw.special {
            let pattern: SpecialPattern = k.parse()?;
            if list.len() != 5 {
                return Err(LexiconError::SpecialCount(k.clone()));
            }
            for text in list {
                let t = text.trim();
                if !(t.ends_with('.') || t.ends_with('?')) {
                    return Err(LexiconError::BadSpecialText(text.clone()));
                }
                if seen.insert(super::parse::normalize_sentence(t), pattern).is_some() {
                    return Err(LexiconError::DuplicateSpecial(text.clone()));
                }
            }
            special.insert(pattern, list.iter().map(|s| s.trim().to_string()).collect());
        }
        for p in SpecialPattern::all() {
            if !special.contains_key(&p) {
                return Err(LexiconError::MissingPattern(p.to_string()));
            }
        }

        Ok(Lexicon {
            version: raw.version,
            phrases,
            speaker_noun: norm(&raw.render.speaker_noun),
            audio_suffix: norm(&raw.render.audio_suffix),
            characterized_by: norm(&raw.render.characterized_by),
            characterized_by_words: norm(&raw.render.characterized_by).split(' ').map(str::to_string).collect(),
            attribute_nouns,
            emotion_words,
            special,
            verbs,
            words,
            special_lookup: seen,
        })
    }

    /// Rendering phrases for an action.
    pub fn phrases(&self, action: Action) -> &[String] {
        &self.phrases[&action]
    }

    pub fn attribute_noun(&self, attr: StyleAttribute) -> &str {
        self.attribute_nouns.get(&attr).map(String::as_str).unwrap_or(attr.as_str())
    }

    pub fn emotion_word(&self, e: Emotion) -> &str {
        &self.emotion_words[&e]
    }

    pub fn special_prompts(&self, pattern: SpecialPattern) -> &[String] {
        self.special.get(&pattern).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Pattern of a special prompt, matched on normalized text.
    pub(crate) fn special_lookup(&self, normalized: &str) -> Option<SpecialPattern> {
        self.special_lookup.get(normalized).copied()
    }

    pub(crate) fn characterized_by_words(&self) -> &[String] {
        &self.characterized_by_words
    }

    pub(crate) fn verbs(&self) -> &[(Vec<String>, Action)] {
        &self.verbs
    }

    pub(crate) fn word(&self, w: &str) -> Option<Word> {
        self.words.get(w).copied()
    }

    /// Action a verb phrase denotes, if any.
    pub fn verb_action(&self, phrase: &str) -> Option<Action> {
        let toks: Vec<String> = phrase.split_whitespace().map(str::to_lowercase).collect();
        self.verbs.iter().find(|(p, _)| *p == toks).map(|(_, a)| *a)
    }
}

impl Default for Lexicon {
    fn default() -> Self {
        Lexicon::builtin()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_lexicon_is_valid() {
        let lex = Lexicon::builtin();
        for a in Action::ALL {
            assert!(lex.phrases(a).len() >= 3);
        }
        assert_eq!(lex.verb_action("get rid of"), Some(Action::Remove));
        assert_eq!(lex.verb_action("Turn Up"), Some(Action::VolUp));
        assert_eq!(lex.verb_action("mute"), Some(Action::Remove));
        assert_eq!(lex.verb_action("frobnicate"), None);
        for p in SpecialPattern::all() {
            assert_eq!(lex.special_prompts(p).len(), 5, "{p}");
        }
        assert_eq!(
            lex.special_prompts(SpecialPattern::Groups { speech: Action::Keep, audio: Action::Remove })[0],
            "Extract all speakers."
        );
    }

    #[test]
    fn verbs_are_unambiguous_and_longest_first() {
        let lex = Lexicon::builtin();
        let mut seen = std::collections::HashSet::new();
        for (p, _) in lex.verbs() {
            assert!(seen.insert(p.clone()), "duplicate {p:?}");
        }
        assert!(lex.verbs().windows(2).all(|w| w[0].0.len() >= w[1].0.len()));
    }

    #[test]
    fn ambiguous_phrase_is_rejected() {
        let text = DEFAULT_LEXICON.replace(
            "vol_up = [\"increase the volume of\"",
            "vol_up = [\"remove\", \"increase the volume of\"",
        );
        assert!(matches!(
            Lexicon::from_toml(&text),
            Err(LexiconError::AmbiguousPhrase { .. })
        ));
    }

    #[test]
    fn pattern_keys_round_trip() {
        for p in SpecialPattern::all() {
            assert_eq!(p.to_string().parse::<SpecialPattern>().unwrap(), p);
        }
        assert!("keep/keep".parse::<SpecialPattern>().is_err());
        assert!("all/remove".parse::<SpecialPattern>().is_err());
    }

    #[test]
    fn bad_synonym_is_rejected() {
        let text = DEFAULT_LEXICON.replace("woman = \"female\"", "woman = \"purple\"");
        assert!(matches!(Lexicon::from_toml(&text), Err(LexiconError::BadSynonym { .. })));
    }
}
