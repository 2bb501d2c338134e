//! Synthetic benchmark alignments over two identical balanced trees.

use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{enumerate_worlds, Budget, EngineError};
use crate::model::{Alignment, ConceptRef, Side, Taxonomy};
use crate::relations::{BaseRelation, RelationMask};

/// Largest tree the generator will build.
pub const MAX_CONCEPTS: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pattern {
    /// Each leaf `<` its counterpart and `<` the counterpart's parent.
    Included,
    /// Each leaf `==` its counterpart.
    Congruent,
}

impl FromStr for Pattern {
    type Err = SynthError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "included" => Ok(Pattern::Included),
            "congruent" => Ok(Pattern::Congruent),
            other => Err(SynthError::UnknownPattern(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SynthError {
    #[error("depth must be at least 1 and branch at least 2 (got depth {depth}, branch {branch})")]
    Shape { depth: u32, branch: u32 },
    #[error("tree of depth {depth} and branch {branch} exceeds {MAX_CONCEPTS} concepts")]
    TooLarge { depth: u32, branch: u32 },
    #[error("unknown pattern `{0}`")]
    UnknownPattern(String),
    #[error("expected exactly one possible world, found {0}")]
    NotSingleWorld(usize),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Number of concepts in one tree.
pub fn tree_size(depth: u32, branch: u32) -> Option<usize> {
    let mut total: usize = 0;
    let mut level: usize = 1;
    for _ in 0..depth {
        total = total.checked_add(level)?;
        level = level.checked_mul(branch as usize)?;
    }
    Some(total)
}

fn balanced_tree(side: Side, depth: u32, branch: u32) -> (Taxonomy, Vec<String>) {
    let mut t = Taxonomy::new(side, format!("balanced_{depth}_{branch}"));
    t.ensure_concept("c");
    let mut frontier = vec!["c".to_string()];
    for _ in 1..depth {
        let mut next = Vec::new();
        for p in &frontier {
            let kids: Vec<String> = (0..branch).map(|k| format!("{p}_{k}")).collect();
            let refs: Vec<&str> = kids.iter().map(String::as_str).collect();
            t.add_children(p, &refs);
            next.extend(kids);
        }
        frontier = next;
    }
    (t, frontier)
}

/// Builds the alignment; the seed only permutes articulation order.
pub fn generate_synthetic(depth: u32, branch: u32, pattern: Pattern, seed: u64) -> Result<Alignment, SynthError> {
    if depth < 1 || branch < 2 {
        return Err(SynthError::Shape { depth, branch });
    }
    match tree_size(depth, branch) {
        Some(n) if n <= MAX_CONCEPTS => {}
        _ => return Err(SynthError::TooLarge { depth, branch }),
    }
    let (t1, leaves) = balanced_tree(Side::First, depth, branch);
    let (t2, _) = balanced_tree(Side::Second, depth, branch);
    let mut arts: Vec<(String, BaseRelation, String)> = Vec::new();
    for leaf in &leaves {
        match pattern {
            Pattern::Congruent => arts.push((leaf.clone(), BaseRelation::Equals, leaf.clone())),
            Pattern::Included => {
                arts.push((leaf.clone(), BaseRelation::IsIncludedIn, leaf.clone()));
                if let Some(p) = t2.index_of(leaf).and_then(|i| t2.parent(i)) {
                    arts.push((leaf.clone(), BaseRelation::IsIncludedIn, t2.name(p).to_string()));
                }
            }
        }
    }
    arts.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut a = Alignment::new(t1, t2);
    for (l, r, rr) in arts {
        a.articulate(
            ConceptRef::new(Side::First, l),
            RelationMask::single(r),
            ConceptRef::new(Side::Second, rr),
        );
    }
    Ok(a)
}

/// Fails unless the alignment has exactly one possible world.
pub fn verify_single_world(a: &Alignment, budget: &Budget) -> Result<(), SynthError> {
    let e = enumerate_worlds(a, &budget.with_max_worlds(1))?;
    let found = e.worlds.len() + usize::from(e.truncated);
    if found == 1 {
        Ok(())
    } else {
        Err(SynthError::NotSingleWorld(found))
    }
}
