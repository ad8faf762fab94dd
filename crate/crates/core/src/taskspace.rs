//! The 16-task taxonomy over action vectors.
//!
//! Positions `0..n_speech` of an action vector are speech sources and the
//! remaining `n_audio` positions are audio sources. Classification is purely
//! structural and applies the following precedence:
//!
//! 1. OVC: every action is the same volume change.
//! 2. SE / SR: all speech kept and all audio removed, or the reverse.
//! 3. S↑ / S↓: uniform volume moves per group (`[↑↑|11]`, `[11|↓↓]`, `[↑↑|↓↓]`
//!    and mirror images).
//! 4. Single-target tasks. Extraction leaves exactly one source kept and
//!    removes the rest; removal and volume tasks change exactly one source.
//!    Extraction is checked before removal, speech before audio.
//! 5. ME (only keep/remove), MVC (only keep/volume), MEVC (everything else).
//!
//! Group tasks (2, 3) need both groups to be non-empty. A group of size
//! one still counts as "all speech" or "all audio", so for one speech and
//! two audio sources `[1, 0, 0]` is SE rather than TSE.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instruction::Action;
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Task {
    #[serde(rename = "TSE")]
    Tse,
    #[serde(rename = "TSR")]
    Tsr,
    #[serde(rename = "TS↑")]
    TsUp,
    #[serde(rename = "TS↓")]
    TsDown,
    #[serde(rename = "TAE")]
    Tae,
    #[serde(rename = "TAR")]
    Tar,
    #[serde(rename = "TA↑")]
    TaUp,
    #[serde(rename = "TA↓")]
    TaDown,
    #[serde(rename = "SE")]
    Se,
    #[serde(rename = "SR")]
    Sr,
    #[serde(rename = "S↑")]
    SUp,
    #[serde(rename = "S↓")]
    SDown,
    #[serde(rename = "ME")]
    Me,
    #[serde(rename = "MVC")]
    Mvc,
    #[serde(rename = "MEVC")]
    Mevc,
    #[serde(rename = "OVC")]
    Ovc,
}

impl Task {
    pub const ALL: [Task; 16] = [
        Task::Tse,
        Task::Tsr,
        Task::TsUp,
        Task::TsDown,
        Task::Tae,
        Task::Tar,
        Task::TaUp,
        Task::TaDown,
        Task::Se,
        Task::Sr,
        Task::SUp,
        Task::SDown,
        Task::Me,
        Task::Mvc,
        Task::Mevc,
        Task::Ovc,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Task::Tse => "TSE",
            Task::Tsr => "TSR",
            Task::TsUp => "TS↑",
            Task::TsDown => "TS↓",
            Task::Tae => "TAE",
            Task::Tar => "TAR",
            Task::TaUp => "TA↑",
            Task::TaDown => "TA↓",
            Task::Se => "SE",
            Task::Sr => "SR",
            Task::SUp => "S↑",
            Task::SDown => "S↓",
            Task::Me => "ME",
            Task::Mvc => "MVC",
            Task::Mevc => "MEVC",
            Task::Ovc => "OVC",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Task::Tse => "Target Speech Extraction",
            Task::Tsr => "Target Speech Removal",
            Task::TsUp => "Target Speech Volume Up",
            Task::TsDown => "Target Speech Volume Down",
            Task::Tae => "Target Audio Extraction",
            Task::Tar => "Target Audio Removal",
            Task::TaUp => "Target Audio Volume Up",
            Task::TaDown => "Target Audio Volume Down",
            Task::Se => "Speech Enhancement",
            Task::Sr => "Speech Removal",
            Task::SUp => "Speech Volume Up",
            Task::SDown => "Speech Volume Down",
            Task::Me => "Multiple Sound Extraction or Removal",
            Task::Mvc => "Multiple Sound Volume Control",
            Task::Mevc => "Multiple Sound Extraction or Removal and Volume Control",
            Task::Ovc => "Overall Volume Control",
        }
    }

    /// Tasks whose edits use only keep and remove. Prompts for these may be
    /// phrased either as extraction or as removal.
    pub fn is_extraction_or_removal(self) -> bool {
        matches!(
            self,
            Task::Tse | Task::Tsr | Task::Tae | Task::Tar | Task::Se | Task::Sr | Task::Me
        )
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Task {
    type Err = TaskError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim().to_uppercase().replace("UP", "↑").replace("DOWN", "↓");
        Task::ALL
            .iter()
            .copied()
            .find(|task| task.code() == t)
            .ok_or_else(|| TaskError::UnknownTask(s.to_string()))
    }
}

/// Number of speech and audio sources in a mixture. Speech comes first in
/// every action vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Composition {
    pub n_speech: usize,
    pub n_audio: usize,
}

impl Composition {
    pub fn new(n_speech: usize, n_audio: usize) -> Result<Self, TaskError> {
        if n_speech + n_audio < 2 {
            return Err(TaskError::TooFewSources(n_speech + n_audio));
        }
        Ok(Composition { n_speech, n_audio })
    }

    pub fn total(&self) -> usize {
        self.n_speech + self.n_audio
    }

    pub fn is_speech(&self, position: usize) -> bool {
        position < self.n_speech
    }
}

impl fmt::Display for Composition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.n_speech, self.n_audio)
    }
}

/// Parses `"S,A"`, e.g. `"2,2"`.
impl FromStr for Composition {
    type Err = TaskError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || TaskError::BadComposition(s.to_string());
        let (a, b) = s.split_once(',').ok_or_else(bad)?;
        let ns = a.trim().parse().map_err(|_| bad())?;
        let na = b.trim().parse().map_err(|_| bad())?;
        Composition::new(ns, na)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TaskError {
    #[error("identity and silence edits are not tasks")]
    TrivialEdit,
    #[error("task {task} is not defined for composition ({comp})")]
    UndefinedTask { task: Task, comp: Composition },
    #[error("action vector has length {got}, composition needs {expected}")]
    LengthMismatch { got: usize, expected: usize },
    #[error("a composition needs at least 2 sources, got {0}")]
    TooFewSources(usize),
    #[error("cannot parse composition {0:?}; expected S,A")]
    BadComposition(String),
    #[error("unknown task {0:?}")]
    UnknownTask(String),
}

fn uniform(actions: &[Action]) -> Option<Action> {
    let first = *actions.first()?;
    actions.iter().all(|a| *a == first).then_some(first)
}

fn count(actions: &[Action], which: Action) -> usize {
    actions.iter().filter(|a| **a == which).count()
}

/// Assigns the unique task of a nontrivial action vector.
pub fn classify(actions: &[Action], comp: Composition) -> Result<Task, TaskError> {
    use Action::*;
    let n = comp.total();
    if actions.len() != n {
        return Err(TaskError::LengthMismatch { got: actions.len(), expected: n });
    }
    match uniform(actions) {
        Some(Keep) | Some(Remove) => return Err(TaskError::TrivialEdit),
        Some(VolUp) | Some(VolDown) => return Ok(Task::Ovc),
        None => {}
    }

    let (speech, audio) = actions.split_at(comp.n_speech);
    if let (Some(s), Some(a)) = (uniform(speech), uniform(audio)) {
        match (s, a) {
            (Keep, Remove) => return Ok(Task::Se),
            (Remove, Keep) => return Ok(Task::Sr),
            (VolUp, Keep) | (Keep, VolDown) | (VolUp, VolDown) => return Ok(Task::SUp),
            (Keep, VolUp) | (VolDown, Keep) | (VolDown, VolUp) => return Ok(Task::SDown),
            _ => {}
        }
    }

    let keeps = count(actions, Keep);
    let removes = count(actions, Remove);
    if keeps == 1 && removes == n - 1 {
        let pos = actions.iter().position(|a| *a == Keep).unwrap_or(0);
        return Ok(if comp.is_speech(pos) { Task::Tse } else { Task::Tae });
    }
    if keeps == n - 1 {
        let (pos, changed) = actions
            .iter()
            .enumerate()
            .find(|(_, a)| **a != Keep)
            .map(|(i, a)| (i, *a))
            .unwrap_or((0, Keep));
        let speech = comp.is_speech(pos);
        return Ok(match (changed, speech) {
            (Remove, true) => Task::Tsr,
            (Remove, false) => Task::Tar,
            (VolUp, true) => Task::TsUp,
            (VolUp, false) => Task::TaUp,
            (VolDown, true) => Task::TsDown,
            (VolDown, false) => Task::TaDown,
            (Keep, _) => return Err(TaskError::TrivialEdit),
        });
    }

    let has_volume = actions.iter().any(|a| a.is_volume());
    Ok(match (removes > 0, has_volume) {
        (true, false) => Task::Me,
        (false, true) => Task::Mvc,
        _ => Task::Mevc,
    })
}

/// Every action vector of length `n`, in base-4 order over [`Action::ALL`]
/// with position 0 varying slowest. The identity and silence vectors are
/// excluded.
pub fn nontrivial_vectors(n: usize) -> Vec<Vec<Action>> {
    let total = 4usize.pow(n as u32);
    (0..total)
        .map(|code| {
            (0..n)
                .map(|i| Action::ALL[(code / 4usize.pow((n - 1 - i) as u32)) % 4])
                .collect::<Vec<_>>()
        })
        .filter(|v| !matches!(uniform(v), Some(Action::Keep) | Some(Action::Remove)))
        .collect()
}

/// All action vectors of `task` for `comp`, in deterministic order.
pub fn enumerate_edits(task: Task, comp: Composition) -> Result<Vec<Vec<Action>>, TaskError> {
    let edits: Vec<Vec<Action>> = nontrivial_vectors(comp.total())
        .into_iter()
        .filter(|v| classify(v, comp) == Ok(task))
        .collect();
    if edits.is_empty() {
        return Err(TaskError::UndefinedTask { task, comp });
    }
    Ok(edits)
}

/// Number of edits per task; undefined tasks map to 0.
pub fn count_table(comp: Composition) -> BTreeMap<Task, usize> {
    let mut table: BTreeMap<Task, usize> = Task::ALL.iter().map(|t| (*t, 0)).collect();
    for v in nontrivial_vectors(comp.total()) {
        if let Ok(task) = classify(&v, comp) {
            *table.entry(task).or_default() += 1;
        }
    }
    table
}

/// Tasks with at least one edit for `comp`, in [`Task::ALL`] order.
pub fn defined_tasks(comp: Composition) -> Vec<Task> {
    count_table(comp)
        .into_iter()
        .filter(|(_, c)| *c > 0)
        .map(|(t, _)| t)
        .collect()
}

/// Precomputed per-task edit lists, for repeated sampling.
#[derive(Clone, Debug)]
pub struct EditSampler {
    comp: Composition,
    tasks: Vec<(Task, Vec<Vec<Action>>)>,
}

impl EditSampler {
    pub fn new(comp: Composition) -> Self {
        let mut by_task: BTreeMap<Task, Vec<Vec<Action>>> = BTreeMap::new();
        for v in nontrivial_vectors(comp.total()) {
            if let Ok(t) = classify(&v, comp) {
                by_task.entry(t).or_default().push(v);
            }
        }
        EditSampler { comp, tasks: by_task.into_iter().collect() }
    }

    pub fn composition(&self) -> Composition {
        self.comp
    }

    pub fn tasks(&self) -> impl Iterator<Item = Task> + '_ {
        self.tasks.iter().map(|(t, _)| *t)
    }

    /// Uniform over defined tasks, then uniform over that task's edits.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (Task, Vec<Action>) {
        let (task, edits) = &self.tasks[rng.gen_range(0..self.tasks.len())];
        (*task, edits[rng.gen_range(0..edits.len())].clone())
    }
}

pub fn sample_edit(comp: Composition, seed: u64) -> (Task, Vec<Action>) {
    EditSampler::new(comp).sample(&mut seed::rng(seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instruction::parse_actions;

    fn comp(s: usize, a: usize) -> Composition {
        Composition::new(s, a).unwrap()
    }

    fn v(s: &str) -> Vec<Action> {
        parse_actions(s).unwrap()
    }

    #[test]
    fn classify_examples() {
        let c = comp(2, 2);
        assert_eq!(classify(&v("0,d,u,1"), c), Ok(Task::Mevc));
        assert_eq!(classify(&v("1,1,0,0"), c), Ok(Task::Se));
        assert_eq!(classify(&v("u,u,u,u"), c), Ok(Task::Ovc));
        assert_eq!(classify(&v("u,u,d,d"), c), Ok(Task::SUp));
        assert_eq!(classify(&v("d,d,u,u"), c), Ok(Task::SDown));
        assert_eq!(classify(&v("1,0,0,0"), c), Ok(Task::Tse));
        assert_eq!(classify(&v("0,0,0,1"), c), Ok(Task::Tae));
        assert_eq!(classify(&v("1,1,1,0"), c), Ok(Task::Tar));
        assert_eq!(classify(&v("1,0,1,0"), c), Ok(Task::Me));
        assert_eq!(classify(&v("d,d,d,u"), c), Ok(Task::Mvc));
        assert_eq!(classify(&v("1,d,d,0"), c), Ok(Task::Mevc));
        assert_eq!(classify(&v("1,1,1,1"), c), Err(TaskError::TrivialEdit));
        assert_eq!(classify(&v("0,0,0,0"), c), Err(TaskError::TrivialEdit));
        assert!(matches!(classify(&v("1,0"), c), Err(TaskError::LengthMismatch { .. })));
    }

    #[test]
    fn count_table_two_plus_two() {
        let t = count_table(comp(2, 2));
        let expected = [
            (Task::Tse, 2),
            (Task::Tsr, 2),
            (Task::TsUp, 2),
            (Task::TsDown, 2),
            (Task::Se, 1),
            (Task::Sr, 1),
            (Task::SUp, 3),
            (Task::SDown, 3),
            (Task::Tae, 2),
            (Task::Tar, 2),
            (Task::TaUp, 2),
            (Task::TaDown, 2),
            (Task::Me, 4),
            (Task::Mvc, 64),
            (Task::Mevc, 160),
            (Task::Ovc, 2),
        ];
        for (task, n) in expected {
            assert_eq!(t[&task], n, "{task}");
        }
        assert_eq!(t.values().sum::<usize>(), 254);
    }

    #[test]
    fn totals_for_small_compositions() {
        for (s, a) in [(1, 1), (2, 0), (0, 2), (2, 1), (1, 2), (3, 1), (1, 3), (3, 2)] {
            let c = comp(s, a);
            let total: usize = count_table(c).values().sum();
            assert_eq!(total, 4usize.pow((s + a) as u32) - 2, "({s},{a})");
        }
    }

    // The n/a cells of the zero-shot composition tables.
    #[test]
    fn undefined_tasks_match_zero_shot_tables() {
        use Task::*;
        let cases: [((usize, usize), &[Task]); 4] = [
            ((2, 0), &[Tsr, Tae, Tar, TaUp, TaDown, Se, Sr, SUp, SDown, Me]),
            ((0, 2), &[Tse, Tsr, TsUp, TsDown, Tar, Se, Sr, SUp, SDown, Me]),
            ((2, 1), &[Tae, Tar, TaUp, TaDown, Me]),
            ((1, 2), &[Tse, Tsr, TsUp, TsDown, Me]),
        ];
        for ((s, a), undefined) in cases {
            let c = comp(s, a);
            let defined = defined_tasks(c);
            for t in Task::ALL {
                assert_eq!(
                    !defined.contains(&t),
                    undefined.contains(&t),
                    "({s},{a}) task {t}"
                );
            }
            assert!(matches!(
                enumerate_edits(undefined[0], c),
                Err(TaskError::UndefinedTask { .. })
            ));
        }
    }

    #[test]
    fn enumeration_round_trips() {
        for (s, a) in [(2, 2), (1, 1), (2, 1), (1, 2), (2, 0), (0, 2)] {
            let c = comp(s, a);
            let mut seen = std::collections::BTreeSet::new();
            for t in defined_tasks(c) {
                for e in enumerate_edits(t, c).unwrap() {
                    assert_eq!(classify(&e, c), Ok(t));
                    assert!(seen.insert(e));
                }
            }
            assert_eq!(seen.len(), 4usize.pow((s + a) as u32) - 2);
        }
    }

    #[test]
    fn sampling_is_deterministic_and_respects_definitions() {
        assert_eq!(sample_edit(comp(2, 2), 42), sample_edit(comp(2, 2), 42));
        let sampler = EditSampler::new(comp(2, 0));
        let mut rng = seed::rng(3);
        for _ in 0..2000 {
            let (t, e) = sampler.sample(&mut rng);
            assert!(!matches!(
                t,
                Task::Tae | Task::Tar | Task::TaUp | Task::TaDown | Task::Se | Task::Sr
            ));
            assert_eq!(classify(&e, comp(2, 0)), Ok(t));
        }
    }

    #[test]
    fn task_and_composition_parsing() {
        assert_eq!("ts↑".parse::<Task>(), Ok(Task::TsUp));
        assert_eq!("TSup".parse::<Task>(), Ok(Task::TsUp));
        assert_eq!("mevc".parse::<Task>(), Ok(Task::Mevc));
        assert_eq!("2,1".parse::<Composition>(), Ok(comp(2, 1)));
        assert!("1,0".parse::<Composition>().is_err());
        assert!("x".parse::<Composition>().is_err());
        assert_eq!(serde_json::to_string(&Task::SDown).unwrap(), "\"S↓\"");
    }
}
