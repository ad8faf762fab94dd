use rand::seq::SliceRandom;

use super::{Lexicon, Prompt, Provenance, SimplifiedEdit, SimplifiedInstruction, SpecialPattern, Target};
use crate::instruction::Action;
use crate::seed;
use crate::taskspace::Composition;

fn uniform(actions: impl Iterator<Item = Action>) -> Option<Action> {
    let mut it = actions;
    let first = it.next()?;
    it.all(|a| a == first).then_some(first)
}

/// Group pattern of a speech-first action vector, when every speech source
/// shares one action and every audio source shares one action.
pub fn special_pattern(actions: &[Action], comp: Composition) -> Option<SpecialPattern> {
    if actions.len() != comp.total() {
        return None;
    }
    if let Some(a) = uniform(actions.iter().copied()) {
        return a.is_volume().then_some(SpecialPattern::All(a));
    }
    let speech = uniform(actions[..comp.n_speech].iter().copied())?;
    let audio = uniform(actions[comp.n_speech..].iter().copied())?;
    Some(SpecialPattern::Groups { speech, audio })
}

/// One of the stored group-level prompts for `actions`, or `None` when the
/// edit is not a group edit.
pub fn special_generic(lexicon: &Lexicon, actions: &[Action], comp: Composition, seed_value: u64) -> Option<Prompt> {
    let pattern = special_pattern(actions, comp)?;
    let mut rng = seed::rng(seed::derive_named(seed_value, "special"));
    let text = lexicon.special_prompts(pattern).choose(&mut rng)?;
    Prompt::new(text.clone(), Provenance::SpecialGeneric).ok()
}

impl SpecialPattern {
    /// Edits a group prompt stands for, in simplified form.
    pub fn simplified(self) -> SimplifiedInstruction {
        let edit = |action, target| SimplifiedEdit { action, target };
        let edits = match self {
            SpecialPattern::All(a) => vec![edit(a, Target::Everything)],
            SpecialPattern::Groups { speech: Action::Keep, audio: Action::Remove } => {
                vec![edit(Action::Keep, Target::AllSpeech)]
            }
            SpecialPattern::Groups { speech: Action::Remove, audio: Action::Keep } => {
                vec![edit(Action::Keep, Target::AllAudio)]
            }
            SpecialPattern::Groups { speech, audio } => {
                let mut v = Vec::new();
                if speech != Action::Keep {
                    v.push(edit(speech, Target::AllSpeech));
                }
                if audio != Action::Keep {
                    v.push(edit(audio, Target::AllAudio));
                }
                v
            }
        };
        SimplifiedInstruction::new(edits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instruction::Action::*;

    fn comp(s: usize, a: usize) -> Composition {
        Composition::new(s, a).unwrap()
    }

    #[test]
    fn applicability() {
        let c = comp(2, 2);
        assert_eq!(
            special_pattern(&[Keep, Keep, Remove, Remove], c),
            Some(SpecialPattern::Groups { speech: Keep, audio: Remove })
        );
        assert_eq!(special_pattern(&[Keep, Remove, Keep, Keep], c), None);
        assert_eq!(special_pattern(&[VolDown; 4], c), Some(SpecialPattern::All(VolDown)));
        assert_eq!(special_pattern(&[Keep; 4], c), None);
        assert_eq!(special_pattern(&[VolUp, VolUp], comp(2, 0)), Some(SpecialPattern::All(VolUp)));
        assert_eq!(special_pattern(&[VolUp, Keep], comp(2, 0)), None);
    }

    #[test]
    fn se_prompt_is_among_the_five() {
        let lex = Lexicon::builtin();
        let c = comp(2, 2);
        let mut seen = std::collections::BTreeSet::new();
        for seed in 0..200 {
            let p = special_generic(&lex, &[Keep, Keep, Remove, Remove], c, seed).unwrap();
            assert_eq!(p.provenance, Provenance::SpecialGeneric);
            seen.insert(p.text);
        }
        assert_eq!(seen.len(), 5);
        assert!(seen.contains("Extract all speakers."));
        assert!(special_generic(&lex, &[Keep, Remove, Keep, Keep], c, 0).is_none());
    }

    #[test]
    fn canonical_forms_resolve_to_the_pattern() {
        use crate::instruction::{Emotion, Gender, Level, Signature, StyleVector};
        let sigs = vec![
            Signature::speech(StyleVector::new(Gender::Male, Level::Low, Level::Low, Level::Low, Emotion::Sad)),
            Signature::speech(StyleVector::new(Gender::Female, Level::Low, Level::Low, Level::Low, Emotion::Sad)),
            Signature::audio("dog").unwrap(),
            Signature::audio("rain").unwrap(),
        ];
        for p in SpecialPattern::all() {
            let actions = match p {
                SpecialPattern::All(a) => vec![a; 4],
                SpecialPattern::Groups { speech, audio } => vec![speech, speech, audio, audio],
            };
            assert_eq!(special_pattern(&actions, comp(2, 2)), Some(p));
            assert_eq!(crate::prompt::resolve(&p.simplified(), &sigs).unwrap(), actions, "{p}");
        }
    }
}
