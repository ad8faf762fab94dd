use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Catalog, DatasetError, Split};
use crate::seed;

/// Relative split sizes; the default is the speaker ratio 1177 : 50 : 100.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: u64,
    pub valid: u64,
    pub test: u64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios { train: 1177, valid: 50, test: 100 }
    }
}

impl SplitRatios {
    fn weights(&self) -> [u64; 3] {
        [self.train, self.valid, self.test]
    }
}

/// Largest-remainder apportionment of `n` items. Remainder ties go to the
/// earlier split (train, then valid, then test).
pub fn split_counts(n: usize, ratios: SplitRatios) -> [usize; 3] {
    let w = ratios.weights();
    let total: u64 = w.iter().sum();
    if total == 0 {
        return [n, 0, 0];
    }
    let n64 = n as u64;
    let mut counts = [0usize; 3];
    let mut rem = [(0u64, 0usize); 3];
    for i in 0..3 {
        counts[i] = (n64 * w[i] / total) as usize;
        rem[i] = (n64 * w[i] % total, i);
    }
    let leftover = n - counts.iter().sum::<usize>();
    rem.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, i) in rem.iter().take(leftover) {
        counts[i] += 1;
    }
    counts
}

/// Entity → split. Speakers (not utterances) and audio clips are the
/// entities.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub entities: BTreeMap<String, Split>,
}

impl SplitAssignment {
    pub fn of(&self, entity: &str) -> Option<Split> {
        self.entities.get(entity).copied()
    }

    /// Uses the catalog's own split hints when every entry carries one and
    /// all entries of an entity agree.
    pub fn from_hints(catalog: &Catalog) -> Option<SplitAssignment> {
        let mut entities = BTreeMap::new();
        for e in &catalog.entries {
            let s = e.split?;
            if *entities.entry(e.entity.clone()).or_insert(s) != s {
                return None;
            }
        }
        Some(SplitAssignment { entities })
    }

    pub fn count(&self, split: Split) -> usize {
        self.entities.values().filter(|s| **s == split).count()
    }
}

fn assign(
    kind: &str,
    entities: BTreeSet<String>,
    ratios: SplitRatios,
    seed_value: u64,
    out: &mut BTreeMap<String, Split>,
) -> Result<(), DatasetError> {
    if entities.is_empty() {
        return Ok(());
    }
    let counts = split_counts(entities.len(), ratios);
    for (split, c) in Split::ALL.iter().zip(counts) {
        if c == 0 {
            return Err(DatasetError::TooFewEntities { kind: kind.to_string(), split: *split });
        }
    }
    let mut order: Vec<String> = entities.into_iter().collect();
    order.shuffle(&mut seed::rng(seed::derive_named(seed_value, kind)));
    let mut it = order.into_iter();
    for (split, c) in Split::ALL.iter().zip(counts) {
        for entity in it.by_ref().take(c) {
            out.insert(entity, *split);
        }
    }
    Ok(())
}

/// Seeded partition of speakers and of audio clips, each by `ratios`.
pub fn partition(catalog: &Catalog, ratios: SplitRatios, seed_value: u64) -> Result<SplitAssignment, DatasetError> {
    if catalog.entries.is_empty() {
        return Err(DatasetError::EmptyCatalog);
    }
    let mut entities = BTreeMap::new();
    assign("speech", catalog.speech().map(|e| e.entity.clone()).collect(), ratios, seed_value, &mut entities)?;
    assign("audio", catalog.audio().map(|e| e.entity.clone()).collect(), ratios, seed_value, &mut entities)?;
    Ok(SplitAssignment { entities })
}
