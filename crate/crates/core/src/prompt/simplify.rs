use itertools::Itertools;
use rand::Rng;

use super::{PartialStyle, PromptError, SimplifiedEdit, SimplifiedInstruction, Target};
use crate::instruction::{Action, Instruction, Signature, StyleAttribute, StyleVector};
use crate::seed;

/// Smallest attribute subset on which all `styles` are pairwise distinct.
///
/// Among subsets of equal size the first in lexicographic order of
/// attribute positions wins, so `{gender}` beats `{pitch}` and
/// `{gender, tempo}` beats `{pitch, tempo}`. With fewer than two styles the
/// empty set would do; `{gender}` is returned instead so that a lone
/// speaker is still described by something.
pub fn minimal_distinguishing_subset(styles: &[StyleVector]) -> Result<Vec<StyleAttribute>, PromptError> {
    for (i, a) in styles.iter().enumerate() {
        if let Some(j) = styles[i + 1..].iter().position(|b| a == b) {
            return Err(PromptError::CannotDistinguish(i, i + 1 + j));
        }
    }
    if styles.len() < 2 {
        return Ok(vec![StyleAttribute::Gender]);
    }
    for k in 1..=StyleAttribute::ALL.len() {
        for subset in StyleAttribute::ALL.iter().copied().combinations(k) {
            let restricted: Vec<PartialStyle> =
                styles.iter().map(|s| PartialStyle::restrict(s, &subset)).collect();
            if restricted.iter().all_unique() {
                return Ok(subset);
            }
        }
    }
    unreachable!("distinct styles differ on the full attribute set")
}

/// True for vectors made only of keep and remove. These are exactly the
/// extraction and removal tasks (target-speech/audio extraction and
/// removal, speech enhancement and removal, multi-source extraction).
fn is_extraction_family(actions: &[Action]) -> bool {
    actions.iter().all(|a| matches!(a, Action::Keep | Action::Remove))
}

/// Turns a full instruction into the edits a person would mention.
///
/// Extraction/removal edits are phrased either as "extract the kept
/// sources" or "remove the removed ones" with equal probability; every
/// other edit drops its keep entries. Speech sources are described by the
/// minimal attribute subset that tells the mixture's speakers apart.
pub fn simplify(instr: &Instruction, seed_value: u64) -> Result<SimplifiedInstruction, PromptError> {
    let actions = instr.actions();
    let styles: Vec<StyleVector> = instr.edits().iter().filter_map(|(_, s)| s.style().copied()).collect();
    let subset = minimal_distinguishing_subset(&styles)?;

    let mentioned = if is_extraction_family(&actions) {
        let mut rng = seed::rng(seed::derive_named(seed_value, "simplify"));
        if rng.gen_bool(0.5) {
            Action::Keep
        } else {
            Action::Remove
        }
    } else {
        // drop keeps; everything else is mentioned
        Action::Keep
    };
    let keep_filter = |a: Action| {
        if is_extraction_family(&actions) {
            a == mentioned
        } else {
            a != Action::Keep
        }
    };

    let edits: Vec<SimplifiedEdit> = instr
        .edits()
        .iter()
        .filter(|(a, _)| keep_filter(*a))
        .map(|(action, sig)| SimplifiedEdit {
            action: *action,
            target: match sig {
                Signature::Speech { style } => Target::Speech { style: PartialStyle::restrict(style, &subset) },
                Signature::Audio { label } => Target::Audio { label: label.clone() },
            },
        })
        .collect();
    debug_assert!(!edits.is_empty(), "nontrivial instruction simplifies to a non-empty set");
    Ok(SimplifiedInstruction::new(edits))
}

/// Expands a simplified instruction back to one action per source.
///
/// Unmentioned sources are removed when the instruction is
/// extraction-phrased and kept otherwise.
pub fn resolve(simplified: &SimplifiedInstruction, signatures: &[Signature]) -> Result<Vec<Action>, PromptError> {
    if simplified.is_empty() {
        return Err(PromptError::EmptyInstruction);
    }
    let default = if simplified.is_extraction_phrased() { Action::Remove } else { Action::Keep };
    let mut assigned: Vec<Option<Action>> = vec![None; signatures.len()];
    for edit in &simplified.edits {
        let hits: Vec<usize> = signatures
            .iter()
            .enumerate()
            .filter(|(_, s)| target_matches(&edit.target, s))
            .map(|(i, _)| i)
            .collect();
        if hits.is_empty() {
            return Err(PromptError::NoMatch(edit.target.clone()));
        }
        let single = matches!(edit.target, Target::Speech { .. } | Target::Audio { .. });
        if single && hits.len() > 1 {
            return Err(PromptError::Ambiguous(edit.target.clone()));
        }
        for i in hits {
            match assigned[i] {
                Some(prev) if prev != edit.action => return Err(PromptError::Conflict(i)),
                _ => assigned[i] = Some(edit.action),
            }
        }
    }
    Ok(assigned.into_iter().map(|a| a.unwrap_or(default)).collect())
}

fn target_matches(target: &Target, sig: &Signature) -> bool {
    match (target, sig) {
        (Target::Everything, _) => true,
        (Target::AllSpeech, s) => s.is_speech(),
        (Target::AllAudio, s) => !s.is_speech(),
        (Target::Speech { style }, Signature::Speech { style: full }) => style.matches(full),
        (Target::Audio { label }, Signature::Audio { label: l }) => label == l,
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instruction::{Emotion, Gender, Level};
    use crate::taskspace::{classify, defined_tasks, enumerate_edits, Composition, Task};

    fn spk(g: Gender, p: Level, t: Level, e: Emotion) -> StyleVector {
        StyleVector::new(g, p, t, Level::Normal, e)
    }

    fn mixture() -> Vec<Signature> {
        vec![
            Signature::speech(spk(Gender::Female, Level::Low, Level::High, Emotion::Happy)),
            Signature::speech(spk(Gender::Male, Level::Low, Level::High, Emotion::Happy)),
            Signature::audio("dog").unwrap(),
            Signature::audio("rain").unwrap(),
        ]
    }

    fn instr(actions: &[Action], sigs: &[Signature]) -> Instruction {
        Instruction::new(actions.iter().copied().zip(sigs.iter().cloned()).collect()).unwrap()
    }

    #[test]
    fn gender_only_difference_gives_gender_subset() {
        let sigs = mixture();
        let styles: Vec<_> = sigs.iter().filter_map(|s| s.style().copied()).collect();
        assert_eq!(minimal_distinguishing_subset(&styles).unwrap(), vec![StyleAttribute::Gender]);
    }

    #[test]
    fn ties_follow_attribute_order() {
        let a = spk(Gender::Male, Level::Low, Level::Low, Emotion::Sad);
        let b = spk(Gender::Male, Level::High, Level::High, Emotion::Sad);
        assert_eq!(minimal_distinguishing_subset(&[a, b]).unwrap(), vec![StyleAttribute::Pitch]);
        let c = spk(Gender::Male, Level::Low, Level::High, Emotion::Sad);
        // three speakers: pitch alone merges b/c, tempo alone merges a/b
        assert_eq!(
            minimal_distinguishing_subset(&[a, b, c]).unwrap(),
            vec![StyleAttribute::Pitch, StyleAttribute::Tempo]
        );
        assert_eq!(minimal_distinguishing_subset(&[a, a]), Err(PromptError::CannotDistinguish(0, 1)));
        assert_eq!(minimal_distinguishing_subset(&[a]).unwrap(), vec![StyleAttribute::Gender]);
    }

    #[test]
    fn extraction_phrasings_alternate() {
        let sigs = mixture();
        let i = instr(&[Action::Keep, Action::Remove, Action::Remove, Action::Remove], &sigs);
        let mut seen = [false, false];
        for seed in 0..64 {
            let s = simplify(&i, seed).unwrap();
            if s.is_extraction_phrased() {
                assert_eq!(s.len(), 1);
                seen[0] = true;
            } else {
                assert_eq!(s.len(), 3);
                assert!(s.edits.iter().all(|e| e.action == Action::Remove));
                seen[1] = true;
            }
            assert_eq!(resolve(&s, &sigs).unwrap(), i.actions());
        }
        assert_eq!(seen, [true, true]);
    }

    #[test]
    fn volume_edits_drop_keeps() {
        let sigs = mixture();
        let i = instr(&[Action::VolUp, Action::Keep, Action::VolDown, Action::Keep], &sigs);
        let s = simplify(&i, 3).unwrap();
        assert_eq!(s.len(), 2);
        assert!(s.edits.iter().all(|e| e.action != Action::Keep));
        assert_eq!(resolve(&s, &sigs).unwrap(), i.actions());
    }

    #[test]
    fn family_test_matches_task_classes() {
        let comp = Composition::new(2, 2).unwrap();
        for task in defined_tasks(comp) {
            let family = task.is_extraction_or_removal();
            for e in enumerate_edits(task, comp).unwrap() {
                assert_eq!(is_extraction_family(&e), family, "{task:?} {e:?}");
                assert_eq!(classify(&e, comp).unwrap(), task);
            }
        }
        assert!(Task::Se.is_extraction_or_removal());
    }

    #[test]
    fn resolve_errors() {
        let sigs = mixture();
        let cat = |l: &str| Target::Audio { label: crate::instruction::ClassLabel::new(l).unwrap() };
        let miss = SimplifiedInstruction::new(vec![SimplifiedEdit { action: Action::Remove, target: cat("bell") }]);
        assert!(matches!(resolve(&miss, &sigs), Err(PromptError::NoMatch(_))));
        let vague = SimplifiedInstruction::new(vec![SimplifiedEdit {
            action: Action::Remove,
            target: Target::Speech { style: PartialStyle { pitch: Some(Level::Low), ..Default::default() } },
        }]);
        assert!(matches!(resolve(&vague, &sigs), Err(PromptError::Ambiguous(_))));
        let clash = SimplifiedInstruction::new(vec![
            SimplifiedEdit { action: Action::Remove, target: cat("dog") },
            SimplifiedEdit { action: Action::VolUp, target: Target::AllAudio },
        ]);
        assert_eq!(resolve(&clash, &sigs), Err(PromptError::Conflict(2)));
        let all = SimplifiedInstruction::new(vec![SimplifiedEdit { action: Action::VolDown, target: Target::Everything }]);
        assert_eq!(resolve(&all, &sigs).unwrap(), vec![Action::VolDown; 4]);
    }
}
