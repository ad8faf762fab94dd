//! Rule-based reader for template prompts and group-level prompts.
//!
//! Grammar, after an optional politeness prefix and before the final
//! punctuation:
//!
//! ```text
//! instruction := clause (sep clause)*
//! clause      := verb target | target            (bare target reuses the previous verb)
//! sep         := "," | "and" | ", and"
//! target      := group | ["the"] speech | ["the"] audio
//! speech      := adjective* noun [("characterized by" | "with") attributes]
//! audio       := <catalog label> ["sound" | "sounds" | "noise"]
//! ```
//!
//! Verbs are matched longest-first against the lexicon, so "keep only"
//! wins over "keep".

use std::fmt;
use std::ops::Range;
use std::sync::OnceLock;

use thiserror::Error;

use super::lexicon::Word;
use super::render::{ALL_AUDIO_PHRASE, ALL_SPEECH_PHRASE, EVERYTHING_PHRASE};
use super::{Lexicon, PartialStyle, SimplifiedEdit, SimplifiedInstruction, Target};
use crate::instruction::{Action, ClassLabel, Level, StyleAttribute};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ParseErrorKind {
    UnknownVerb,
    UnknownDescriptor,
    UnexpectedToken,
    /// One target was given two different actions.
    ConflictingEdits(Target),
    EmptyInstruction,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::UnknownVerb => f.write_str("unknown verb"),
            ParseErrorKind::UnknownDescriptor => f.write_str("unknown descriptor"),
            ParseErrorKind::UnexpectedToken => f.write_str("unexpected token"),
            ParseErrorKind::ConflictingEdits(t) => write!(f, "conflicting actions for {t}"),
            ParseErrorKind::EmptyInstruction => f.write_str("empty instruction"),
        }
    }
}

/// A parse failure with the byte span of the offending text.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub span: Range<usize>,
    pub fragment: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at bytes {}..{}", self.kind, self.span.start, self.span.end)?;
        if !self.fragment.is_empty() {
            write!(f, ": {:?}", self.fragment)?;
        }
        Ok(())
    }
}

impl ParseError {
    fn new(kind: ParseErrorKind, span: Range<usize>, text: &str) -> Self {
        let fragment = text.get(span.clone()).unwrap_or("").to_string();
        ParseError { kind, span, fragment }
    }

    /// The input line with the error span underlined.
    pub fn annotate(&self, text: &str) -> String {
        let pad = text.get(..self.span.start).map(|s| s.chars().count()).unwrap_or(0);
        let width = self.fragment.chars().count().max(1);
        format!("{text}\n{}{}", " ".repeat(pad), "^".repeat(width))
    }
}

#[derive(Clone, Debug)]
struct Token {
    text: String,
    span: Range<usize>,
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '-' || c == '\''
}

fn tokenize(s: &str) -> Vec<Token> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (i, c) in s.char_indices() {
        if is_word_char(c) {
            start.get_or_insert(i);
            continue;
        }
        if let Some(st) = start.take() {
            out.push(Token { text: s[st..i].to_lowercase(), span: st..i });
        }
        if !c.is_whitespace() {
            out.push(Token { text: c.to_string(), span: i..i + c.len_utf8() });
        }
    }
    if let Some(st) = start {
        out.push(Token { text: s[st..].to_lowercase(), span: st..s.len() });
    }
    out
}

fn words(s: &str) -> Vec<String> {
    tokenize(s).into_iter().map(|t| t.text).collect()
}

/// Lowercase, whitespace-collapsed, without trailing punctuation.
pub(crate) fn normalize_sentence(s: &str) -> String {
    let collapsed = s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
    collapsed.trim_end_matches(['.', '?', '!', ' ']).to_string()
}

const PREFIXES: &[&str] = &[
    "i would like to",
    "i want to",
    "i need to",
    "please",
    "can you",
    "could you",
    "would you",
];

const TERMINATORS: &[&str] = &[".", "?", "!"];

fn group_phrases() -> &'static [(Vec<String>, Target)] {
    static TABLE: OnceLock<Vec<(Vec<String>, Target)>> = OnceLock::new();
    TABLE.get_or_init(build_group_phrases)
}

fn prefixes() -> &'static [Vec<String>] {
    static TABLE: OnceLock<Vec<Vec<String>>> = OnceLock::new();
    TABLE.get_or_init(|| PREFIXES.iter().map(|p| words(p)).collect())
}

fn build_group_phrases() -> Vec<(Vec<String>, Target)> {
    let table: &[(&str, Target)] = &[
        (ALL_SPEECH_PHRASE, Target::AllSpeech),
        ("all speakers", Target::AllSpeech),
        ("every speaker", Target::AllSpeech),
        ("the speakers", Target::AllSpeech),
        ("all the speech", Target::AllSpeech),
        ("all speech", Target::AllSpeech),
        ("the speech", Target::AllSpeech),
        ("all the voices", Target::AllSpeech),
        ("all voices", Target::AllSpeech),
        ("the voices", Target::AllSpeech),
        (ALL_AUDIO_PHRASE, Target::AllAudio),
        ("all background sounds", Target::AllAudio),
        ("the background sounds", Target::AllAudio),
        ("the background noise", Target::AllAudio),
        ("all the background", Target::AllAudio),
        ("the background", Target::AllAudio),
        (EVERYTHING_PHRASE, Target::Everything),
        ("all the sounds", Target::Everything),
        ("all sounds", Target::Everything),
        ("the whole recording", Target::Everything),
    ];
    let mut v: Vec<(Vec<String>, Target)> = table.iter().map(|(p, t)| (words(p), t.clone())).collect();
    v.sort_by(|a, b| b.0.len().cmp(&a.0.len()));
    v
}

const AUDIO_SUFFIXES: &[&str] = &["sound", "sounds", "noise", "noises"];

struct Parser<'a> {
    text: &'a str,
    toks: Vec<Token>,
    pos: usize,
    lex: &'a Lexicon,
    labels: Vec<(Vec<String>, ClassLabel)>,
    groups: &'static [(Vec<String>, Target)],
    open_vocabulary: bool,
}

impl<'a> Parser<'a> {
    fn peek(&self, offset: usize) -> Option<&str> {
        self.toks.get(self.pos + offset).map(|t| t.text.as_str())
    }

    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn matches_seq(&self, seq: &[String]) -> bool {
        seq.iter().enumerate().all(|(i, w)| self.peek(i) == Some(w.as_str()))
    }

    fn eat(&mut self, word: &str) -> bool {
        if self.peek(0) == Some(word) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn span_here(&self) -> Range<usize> {
        match self.toks.get(self.pos) {
            Some(t) => t.span.clone(),
            None => self.text.len()..self.text.len(),
        }
    }

    /// Span from the current token to the end of the clause.
    fn clause_span(&self) -> Range<usize> {
        let start = self.span_here();
        let mut end = start.end;
        for t in &self.toks[self.pos.min(self.toks.len())..] {
            if t.text == "," {
                break;
            }
            end = t.span.end;
        }
        start.start..end
    }

    fn error(&self, kind: ParseErrorKind, span: Range<usize>) -> ParseError {
        ParseError::new(kind, span, self.text)
    }

    fn match_verb(&self) -> Option<(Action, usize)> {
        self.lex
            .verbs()
            .iter()
            .find(|(seq, _)| self.matches_seq(seq))
            .map(|(seq, a)| (*a, seq.len()))
    }

    fn parse_target(&mut self) -> Result<Target, ParseError> {
        if let Some((seq, t)) = self.groups.iter().find(|(seq, _)| self.matches_seq(seq)) {
            self.pos += seq.len();
            return Ok(t.clone());
        }
        let start = self.pos;
        let _ = self.eat("the") || self.eat("a") || self.eat("an");
        if let Some(t) = self.try_speech()? {
            return Ok(t);
        }
        if let Some(t) = self.try_audio() {
            return Ok(t);
        }
        self.pos = start;
        Err(self.error(ParseErrorKind::UnknownDescriptor, self.clause_span()))
    }

    fn set<T: PartialEq + Copy>(&self, slot: &mut Option<T>, value: T, at: usize) -> Result<(), ParseError> {
        match slot {
            Some(prev) if *prev != value => Err(self.error(ParseErrorKind::UnknownDescriptor, self.toks[at].span.clone())),
            _ => {
                *slot = Some(value);
                Ok(())
            }
        }
    }

    fn set_level(&self, style: &mut PartialStyle, attr: StyleAttribute, level: Level, at: usize) -> Result<(), ParseError> {
        match attr {
            StyleAttribute::Pitch => self.set(&mut style.pitch, level, at),
            StyleAttribute::Tempo => self.set(&mut style.tempo, level, at),
            StyleAttribute::Volume => self.set(&mut style.volume, level, at),
            // gender and emotion are never level-valued
            StyleAttribute::Gender | StyleAttribute::Emotion => Ok(()),
        }
    }

    /// `<level> <attribute>` or a compound such as "fast".
    fn attribute_item(&self) -> Option<(StyleAttribute, Level, usize)> {
        match self.peek(0).and_then(|w| self.lex.word(w))? {
            Word::Compound(a, l) => Some((a, l, 1)),
            Word::Level(l) => match self.peek(1).and_then(|w| self.lex.word(w))? {
                Word::AttributeNoun(a) => Some((a, l, 2)),
                _ => None,
            },
            _ => None,
        }
    }

    fn try_speech(&mut self) -> Result<Option<Target>, ParseError> {
        let start = self.pos;
        let mut style = PartialStyle::default();
        let mut saw_noun = false;
        while let Some(word) = self.peek(0).and_then(|w| self.lex.word(w)) {
            let at = self.pos;
            match word {
                Word::Emotion(e) => self.set(&mut style.emotion, e, at)?,
                Word::Gender(g) => self.set(&mut style.gender, g, at)?,
                Word::GenderNoun(g) => {
                    self.set(&mut style.gender, g, at)?;
                    let next_is_noun = matches!(self.peek(1).and_then(|w| self.lex.word(w)), Some(Word::Noun));
                    if !next_is_noun {
                        self.pos += 1;
                        saw_noun = true;
                        break;
                    }
                }
                Word::Compound(a, l) => self.set_level(&mut style, a, l, at)?,
                Word::Noun => {
                    self.pos += 1;
                    saw_noun = true;
                    break;
                }
                Word::Level(_) | Word::AttributeNoun(_) => break,
            }
            self.pos += 1;
        }
        if !saw_noun {
            self.pos = start;
            return Ok(None);
        }
        let cb = self.lex.characterized_by_words();
        let introduced = if self.matches_seq(cb) {
            self.pos += cb.len();
            true
        } else {
            self.eat("with")
        };
        if introduced {
            let Some((a, l, n)) = self.attribute_item() else {
                return Err(self.error(ParseErrorKind::UnknownDescriptor, self.clause_span()));
            };
            self.set_level(&mut style, a, l, self.pos)?;
            self.pos += n;
            loop {
                let save = self.pos;
                self.eat(",");
                self.eat("and");
                if self.pos == save {
                    break;
                }
                match self.attribute_item() {
                    Some((a, l, n)) => {
                        self.set_level(&mut style, a, l, self.pos)?;
                        self.pos += n;
                    }
                    None => {
                        self.pos = save;
                        break;
                    }
                }
            }
        }
        Ok(Some(Target::Speech { style }))
    }

    fn eat_audio_suffix(&mut self) {
        let suffix = self.lex.audio_suffix.clone();
        if !self.eat(&suffix) {
            for s in AUDIO_SUFFIXES {
                if self.eat(s) {
                    break;
                }
            }
        }
    }

    fn try_audio(&mut self) -> Option<Target> {
        if let Some((seq, label)) = self.labels.iter().find(|(seq, _)| self.matches_seq(seq)) {
            let label = label.clone();
            self.pos += seq.len();
            self.eat_audio_suffix();
            return Some(Target::Audio { label });
        }
        if !self.open_vocabulary {
            return None;
        }
        // no catalog: everything up to a sound noun is the label
        let end = (self.pos..self.toks.len())
            .take_while(|&i| self.toks[i].text != ",")
            .find(|&i| AUDIO_SUFFIXES.contains(&self.toks[i].text.as_str()) || self.toks[i].text == self.lex.audio_suffix)?;
        if end == self.pos {
            return None;
        }
        let raw = self.toks[self.pos..end].iter().map(|t| t.text.as_str()).collect::<Vec<_>>().join(" ");
        let label = ClassLabel::new(&raw).ok()?;
        self.pos = end + 1;
        Some(Target::Audio { label })
    }

    fn strip_frame(&mut self) {
        while self.toks.last().is_some_and(|t| TERMINATORS.contains(&t.text.as_str())) {
            self.toks.pop();
        }
        if let Some(p) = prefixes().iter().find(|p| self.matches_seq(p)) {
            self.pos += p.len();
            self.eat("please");
        }
    }

    fn run(&mut self) -> Result<Vec<SimplifiedEdit>, ParseError> {
        self.strip_frame();
        if self.at_end() {
            return Err(self.error(ParseErrorKind::EmptyInstruction, 0..self.text.len()));
        }
        let mut edits = Vec::new();
        let mut verb: Option<Action> = None;
        loop {
            let action = match self.match_verb() {
                Some((a, n)) => {
                    self.pos += n;
                    a
                }
                None => {
                    // a bare target continues the previous clause's verb
                    let save = self.pos;
                    match verb.map(|v| (v, self.parse_target())) {
                        Some((v, Ok(target))) => {
                            edits.push(SimplifiedEdit { action: v, target });
                            if self.finish_clause()? {
                                break;
                            }
                            continue;
                        }
                        _ => {
                            self.pos = save;
                            return Err(self.error(ParseErrorKind::UnknownVerb, self.span_here()));
                        }
                    }
                }
            };
            verb = Some(action);
            if self.at_end() {
                return Err(self.error(ParseErrorKind::UnknownDescriptor, self.span_here()));
            }
            let target = self.parse_target()?;
            edits.push(SimplifiedEdit { action, target });
            if self.finish_clause()? {
                break;
            }
        }
        Ok(edits)
    }

    /// Consumes a separator; returns true at the end of input.
    fn finish_clause(&mut self) -> Result<bool, ParseError> {
        if self.at_end() {
            return Ok(true);
        }
        let save = self.pos;
        self.eat(",");
        self.eat("and");
        if self.pos == save || self.at_end() {
            return Err(self.error(ParseErrorKind::UnexpectedToken, self.span_here()));
        }
        Ok(false)
    }
}

/// Parses a template or group-level prompt into a simplified instruction.
///
/// `labels` is the audio class vocabulary; labels are matched longest
/// first on normalized tokens. With an empty vocabulary any words followed
/// by "sound"/"noise" are taken as a label. Edits come back in textual
/// order; exact duplicates are merged.
pub fn parse(text: &str, lexicon: &Lexicon, labels: &[ClassLabel]) -> Result<SimplifiedInstruction, ParseError> {
    let norm = normalize_sentence(text);
    if norm.is_empty() {
        return Err(ParseError::new(ParseErrorKind::EmptyInstruction, 0..text.len(), text));
    }
    if let Some(pattern) = lexicon.special_lookup(&norm) {
        return Ok(pattern.simplified());
    }

    let mut label_seqs: Vec<(Vec<String>, ClassLabel)> =
        labels.iter().map(|l| (words(l.as_str()), l.clone())).filter(|(w, _)| !w.is_empty()).collect();
    label_seqs.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.1.cmp(&b.1)));
    let mut p = Parser {
        text,
        toks: tokenize(text),
        pos: 0,
        lex: lexicon,
        labels: label_seqs,
        groups: group_phrases(),
        open_vocabulary: labels.is_empty(),
    };
    let raw = p.run()?;

    let mut edits: Vec<SimplifiedEdit> = Vec::with_capacity(raw.len());
    for e in raw {
        match edits.iter().find(|x| x.target == e.target) {
            Some(prev) if prev.action == e.action => {}
            Some(_) => {
                return Err(ParseError::new(ParseErrorKind::ConflictingEdits(e.target), 0..text.len(), text));
            }
            None => edits.push(e),
        }
    }
    Ok(SimplifiedInstruction::new(edits))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instruction::{Emotion, Gender};

    fn labels(v: &[&str]) -> Vec<ClassLabel> {
        v.iter().map(|s| ClassLabel::new(s).unwrap()).collect()
    }

    fn audio(l: &str) -> Target {
        Target::Audio { label: ClassLabel::new(l).unwrap() }
    }

    #[test]
    fn tokenizer_keeps_spans() {
        let t = tokenize("Please, turn-up it!");
        let texts: Vec<&str> = t.iter().map(|t| t.text.as_str()).collect();
        assert_eq!(texts, ["please", ",", "turn-up", "it", "!"]);
        assert_eq!(t[2].span, 8..15);
    }

    #[test]
    fn parses_a_multi_clause_example() {
        let lex = Lexicon::builtin();
        let s = parse("Please remove the dog sound, and increase the volume of the female speaker.", &lex, &labels(&["dog"]))
            .unwrap();
        assert_eq!(
            s.edits,
            vec![
                SimplifiedEdit { action: Action::Remove, target: audio("dog") },
                SimplifiedEdit {
                    action: Action::VolUp,
                    target: Target::Speech { style: PartialStyle { gender: Some(Gender::Female), ..Default::default() } },
                },
            ]
        );
    }

    #[test]
    fn full_speech_descriptor() {
        let lex = Lexicon::builtin();
        let s = parse(
            "Can you turn down the happy male speaker characterized by normal pitch, high tempo, and high energy, and keep only the rain sound?",
            &lex,
            &labels(&["rain"]),
        );
        // keep + vol_down mixed; parser does not judge semantics
        let s = s.unwrap();
        assert_eq!(s.len(), 2);
        let Target::Speech { style } = &s.edits[0].target else { panic!() };
        assert_eq!(style.emotion, Some(Emotion::Happy));
        assert_eq!(style.tempo, Some(Level::High));
        assert_eq!(style.volume, Some(Level::High));
        assert_eq!(s.edits[1], SimplifiedEdit { action: Action::Keep, target: audio("rain") });
    }

    #[test]
    fn synonyms_and_multiword_labels() {
        let lex = Lexicon::builtin();
        let cat = labels(&["car", "car horn", "dog"]);
        let s = parse("I would like to mute the angry woman and the car horn noise.", &lex, &cat).unwrap();
        assert_eq!(s.edits[1].target, audio("car horn"));
        let Target::Speech { style } = &s.edits[0].target else { panic!() };
        assert_eq!(style.gender, Some(Gender::Female));
        assert_eq!(style.emotion, Some(Emotion::Angry));
        assert!(s.edits.iter().all(|e| e.action == Action::Remove));
        let fast = parse("Boost the fast speaker.", &lex, &cat).unwrap();
        let Target::Speech { style } = &fast.edits[0].target else { panic!() };
        assert_eq!(style.tempo, Some(Level::High));
    }

    #[test]
    fn special_prompts_parse_to_groups() {
        let lex = Lexicon::builtin();
        let s = parse("Extract all speakers.", &lex, &[]).unwrap();
        assert_eq!(s.edits, vec![SimplifiedEdit { action: Action::Keep, target: Target::AllSpeech }]);
        assert!(s.is_extraction_phrased());
        let quiet = parse("make everything QUIETER.", &lex, &[]).unwrap();
        assert_eq!(quiet.edits, vec![SimplifiedEdit { action: Action::VolDown, target: Target::Everything }]);
    }

    #[test]
    fn error_spans() {
        let lex = Lexicon::builtin();
        let text = "Frobnicate the dog.";
        let e = parse(text, &lex, &labels(&["dog"])).unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::UnknownVerb);
        assert_eq!(e.fragment, "Frobnicate");
        assert!(e.annotate(text).ends_with("^^^^^^^^^^"));

        let e = parse("Please remove the purple unicorn sound.", &lex, &labels(&["dog"])).unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::UnknownDescriptor);
        assert_eq!(e.fragment, "the purple unicorn sound");

        let e = parse("Please remove the dog sound, and boost the dog sound.", &lex, &labels(&["dog"])).unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::ConflictingEdits(audio("dog")));

        assert_eq!(parse("  ", &lex, &[]).unwrap_err().kind, ParseErrorKind::EmptyInstruction);
        assert_eq!(parse("Please.", &lex, &[]).unwrap_err().kind, ParseErrorKind::EmptyInstruction);
        let e = parse("Remove the dog sound the", &lex, &labels(&["dog"])).unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::UnexpectedToken);
    }

    #[test]
    fn duplicates_merge_and_bare_targets_reuse_verb() {
        let lex = Lexicon::builtin();
        let cat = labels(&["dog", "cat"]);
        let s = parse("Remove the dog sound, the cat sound, and remove the dog sound.", &lex, &cat).unwrap();
        assert_eq!(s.edits.len(), 2);
        assert_eq!(s.edits[1], SimplifiedEdit { action: Action::Remove, target: audio("cat") });
    }

    #[test]
    fn open_vocabulary_labels() {
        let lex = Lexicon::builtin();
        let s = parse("Please remove the church bell sound.", &lex, &[]).unwrap();
        assert_eq!(s.edits[0].target, audio("church bell"));
    }
}
