//! Results computed over possible worlds and articulations.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{check_consistency, enumerate_worlds, Budget, EngineError};
use crate::model::{
    Alignment, ConceptRef, Diagnosis, IsaFact, MirEntry, MirTable, PairRelation, Repair, Side, World,
};
use crate::relations::{BaseRelation, RelationMask};

/// Above this many articulations, [`diagnose`] skips enumerating every
/// minimal conflict.
pub const ALL_CONFLICTS_LIMIT: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("no possible worlds")]
    NoWorlds,
    #[error("the alignment is consistent")]
    Consistent,
    #[error("the alignment is inconsistent")]
    Inconsistent,
    #[error("{left} {target} {right} is not entailed")]
    NotEntailed {
        left: String,
        right: String,
        target: RelationMask,
    },
    #[error("unknown concept pair ({0}, {1})")]
    UnknownPair(String, String),
    #[error("an answer must allow at least one relation")]
    EmptyAnswer,
    #[error("no possible world matches this answer")]
    NoMatchingWorld,
    #[error("worlds are defined over different concept pairs")]
    MismatchedWorlds,
}

pub fn mir(worlds: &[World]) -> Result<MirTable, AnalysisError> {
    let first = worlds.first().ok_or(AnalysisError::NoWorlds)?;
    let mut entries: Vec<MirEntry> = first
        .relations
        .iter()
        .map(|p| MirEntry {
            left: p.left.clone(),
            right: p.right.clone(),
            mask: RelationMask::EMPTY,
            counts: [0; 5],
        })
        .collect();
    for w in worlds {
        if w.relations.len() != entries.len() {
            return Err(AnalysisError::MismatchedWorlds);
        }
        for (e, p) in entries.iter_mut().zip(&w.relations) {
            e.mask.insert(p.relation);
            e.counts[p.relation.index()] += 1;
        }
    }
    Ok(MirTable {
        total_worlds: worlds.len(),
        entries,
    })
}

/// Pairs whose relation is the same in every world.
pub fn consensus(table: &MirTable) -> Vec<PairRelation> {
    table
        .entries
        .iter()
        .filter_map(|e| {
            e.mask.as_single().map(|relation| PairRelation {
                left: e.left.clone(),
                right: e.right.clone(),
                relation,
            })
        })
        .collect()
}

/// `left,right,mask,count_eq,count_lt,count_gt,count_ov,count_dj,total`
pub fn mir_to_csv(table: &MirTable) -> String {
    let mut out = String::from("left,right,mask,count_eq,count_lt,count_gt,count_ov,count_dj,total\n");
    for e in &table.entries {
        let symbols: Vec<&str> = e.mask.iter().map(BaseRelation::symbol).collect();
        let c = e.counts;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            e.left,
            e.right,
            symbols.join(" "),
            c[0],
            c[1],
            c[2],
            c[3],
            c[4],
            table.total_worlds
        ));
    }
    out
}

fn consistent(a: &Alignment, budget: &Budget) -> Result<bool, AnalysisError> {
    Ok(check_consistency(a, budget)?.consistent)
}

/// Minimal unsatisfiable subset by deletion, plus single-removal repairs.
/// Tree structure and covering constraints are background, never blamed.
pub fn diagnose(a: &Alignment, budget: &Budget) -> Result<Diagnosis, AnalysisError> {
    if consistent(a, budget)? {
        return Err(AnalysisError::Consistent);
    }
    let mut core: BTreeSet<usize> = a.articulation_indices().into_iter().collect();
    for i in a.articulation_indices() {
        let mut trial = core.clone();
        trial.remove(&i);
        if !consistent(&a.restricted_to(&trial), budget)? {
            core = trial;
        }
    }
    let mut repairs = Vec::new();
    for &m in &core {
        if consistent(&a.without(&BTreeSet::from([m])), budget)? {
            repairs.push(Repair { remove: vec![m] });
        }
    }
    let all_conflicts = if a.articulations.len() <= ALL_CONFLICTS_LIMIT {
        Some(all_minimal_conflicts(a, budget)?)
    } else {
        None
    };
    let mus: Vec<usize> = core.into_iter().collect();
    Ok(Diagnosis {
        consistent: false,
        structural_facts: structural_facts(a, &mus),
        mus,
        all_conflicts,
        repairs,
    })
}

/// Every inclusion-minimal inconsistent subset, smallest first.
fn all_minimal_conflicts(a: &Alignment, budget: &Budget) -> Result<Vec<Vec<usize>>, AnalysisError> {
    let indices = a.articulation_indices();
    let n = indices.len();
    let mut masks: Vec<u32> = (0..(1u32 << n)).collect();
    masks.sort_by_key(|m| (m.count_ones(), *m));
    let mut found: Vec<u32> = Vec::new();
    for m in masks {
        if found.iter().any(|f| f & m == *f) {
            continue;
        }
        let subset: BTreeSet<usize> = (0..n).filter(|b| m & (1 << b) != 0).map(|b| indices[b]).collect();
        if !consistent(&a.restricted_to(&subset), budget)? {
            found.push(m);
        }
    }
    let mut out: Vec<Vec<usize>> = found
        .into_iter()
        .map(|m| (0..n).filter(|b| m & (1 << b) != 0).map(|b| indices[b]).collect())
        .collect();
    out.sort_by(|x, y| (x.len(), x).cmp(&(y.len(), y)));
    Ok(out)
}

/// is_a chains between concepts that the given articulations mention and
/// that lie on one root path.
fn structural_facts(a: &Alignment, articulations: &[usize]) -> Vec<IsaFact> {
    let mut facts = BTreeSet::new();
    for side in [Side::First, Side::Second] {
        let t = a.taxonomy(side);
        let mentioned: BTreeSet<usize> = articulations
            .iter()
            .filter_map(|&i| a.articulation(i))
            .map(|art| if side == Side::First { &art.left } else { &art.right })
            .filter_map(|c| t.index_of(&c.name))
            .collect();
        for &x in &mentioned {
            for &y in &mentioned {
                if x != y && t.is_ancestor_or_self(y, x) {
                    for (child, parent) in t.chain_to(x, y) {
                        facts.insert((t.key(child), t.key(parent)));
                    }
                }
            }
        }
    }
    facts
        .into_iter()
        .map(|(child, parent)| IsaFact {
            child: ConceptRef::parse_key(&child).expect("taxonomy key"),
            parent: ConceptRef::parse_key(&parent).expect("taxonomy key"),
        })
        .collect()
}

/// Whether every world of `a` puts the pair inside `target`, decided as
/// inconsistency of `a` plus the complementary articulation.
pub fn entails(
    a: &Alignment,
    left: &ConceptRef,
    right: &ConceptRef,
    target: RelationMask,
    budget: &Budget,
) -> Result<bool, AnalysisError> {
    let rest = target.complement();
    if rest.is_empty() {
        return Ok(true);
    }
    let mut probe = a.clone();
    probe.articulate(left.clone(), rest, right.clone());
    Ok(!consistent(&probe, budget)?)
}

/// An inclusion-minimal set of articulations that still entails the pair's
/// relation lies in `target`.
pub fn mir_provenance(
    a: &Alignment,
    left: &ConceptRef,
    right: &ConceptRef,
    target: RelationMask,
    budget: &Budget,
) -> Result<Vec<usize>, AnalysisError> {
    if a.resolve(left).is_none() || a.resolve(right).is_none() || left.side != Side::First || right.side != Side::Second {
        return Err(AnalysisError::UnknownPair(left.key(), right.key()));
    }
    if !consistent(a, budget)? {
        return Err(AnalysisError::Inconsistent);
    }
    if !entails(a, left, right, target, budget)? {
        return Err(AnalysisError::NotEntailed {
            left: left.key(),
            right: right.key(),
            target,
        });
    }
    let mut kept: BTreeSet<usize> = a.articulation_indices().into_iter().collect();
    for i in a.articulation_indices() {
        let mut trial = kept.clone();
        trial.remove(&i);
        if entails(&a.restricted_to(&trial), left, right, target, budget)? {
            kept = trial;
        }
    }
    Ok(kept.into_iter().collect())
}

/// Number of pairs on which two worlds differ.
pub fn world_distance(w1: &World, w2: &World) -> Result<usize, AnalysisError> {
    if w1.relations.len() != w2.relations.len() {
        return Err(AnalysisError::MismatchedWorlds);
    }
    let mut d = 0;
    for (p, q) in w1.relations.iter().zip(&w2.relations) {
        if p.left != q.left || p.right != q.right {
            return Err(AnalysisError::MismatchedWorlds);
        }
        d += usize::from(p.relation != q.relation);
    }
    Ok(d)
}

pub fn distance_matrix(worlds: &[World]) -> Result<Vec<Vec<usize>>, AnalysisError> {
    let n = worlds.len();
    let mut m = vec![vec![0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = world_distance(&worlds[i], &worlds[j])?;
            m[i][j] = d;
            m[j][i] = d;
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub mask: RelationMask,
    pub surviving: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub left: ConceptRef,
    pub right: ConceptRef,
    pub candidates: Vec<Candidate>,
}

impl Question {
    pub fn worst_case(&self) -> usize {
        self.candidates.iter().map(|c| c.surviving).max().unwrap_or(0)
    }
}

/// Interactive filtering of a fixed world list by expert answers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReductionSession {
    pub worlds: Vec<World>,
    /// Keyed by (left key, right key).
    pub answers: BTreeMap<(String, String), RelationMask>,
    pub surviving: Vec<usize>,
}

impl ReductionSession {
    pub fn new(worlds: Vec<World>) -> Self {
        let surviving = (0..worlds.len()).collect();
        ReductionSession {
            worlds,
            answers: BTreeMap::new(),
            surviving,
        }
    }

    pub fn surviving_worlds(&self) -> impl Iterator<Item = &World> {
        self.surviving.iter().map(|&i| &self.worlds[i])
    }

    fn pair_position(&self, left: &ConceptRef, right: &ConceptRef) -> Option<usize> {
        self.worlds
            .first()?
            .relations
            .iter()
            .position(|p| &p.left == left && &p.right == right)
    }

    /// Filters surviving worlds; the session is left untouched on error.
    pub fn apply_answer(&mut self, left: &ConceptRef, right: &ConceptRef, mask: RelationMask) -> Result<(), AnalysisError> {
        if mask.is_empty() {
            return Err(AnalysisError::EmptyAnswer);
        }
        let pos = self
            .pair_position(left, right)
            .ok_or_else(|| AnalysisError::UnknownPair(left.key(), right.key()))?;
        let surviving: Vec<usize> = self
            .surviving
            .iter()
            .copied()
            .filter(|&w| mask.contains(self.worlds[w].relations[pos].relation))
            .collect();
        if surviving.is_empty() {
            return Err(AnalysisError::NoMatchingWorld);
        }
        let key = (left.key(), right.key());
        let combined = self.answers.get(&key).map_or(mask, |m| m.intersection(mask));
        self.answers.insert(key, combined);
        self.surviving = surviving;
        Ok(())
    }

    pub fn reset_answers(&mut self) {
        self.answers.clear();
        self.surviving = (0..self.worlds.len()).collect();
    }

    /// Candidate answers for one pair over the surviving worlds.
    pub fn candidates(&self, pos: usize) -> Vec<Candidate> {
        let mut counts = [0usize; 5];
        for w in self.surviving_worlds() {
            counts[w.relations[pos].relation.index()] += 1;
        }
        BaseRelation::ALL
            .into_iter()
            .filter(|r| counts[r.index()] > 0)
            .map(|r| Candidate {
                mask: r.into(),
                surviving: counts[r.index()],
            })
            .collect()
    }

    /// The varying pair whose worst-case answer leaves the fewest worlds;
    /// ties go to the first pair in key order.
    pub fn next_question(&self) -> Option<Question> {
        if self.surviving.len() <= 1 {
            return None;
        }
        let pairs = &self.worlds.first()?.relations;
        let mut best: Option<(usize, usize, Vec<Candidate>)> = None;
        for pos in 0..pairs.len() {
            let cands = self.candidates(pos);
            if cands.len() < 2 {
                continue;
            }
            let worst = cands.iter().map(|c| c.surviving).max().unwrap();
            if best.as_ref().is_none_or(|(w, _, _)| worst < *w) {
                best = Some((worst, pos, cands));
            }
        }
        best.map(|(_, pos, candidates)| Question {
            left: pairs[pos].left.clone(),
            right: pairs[pos].right.clone(),
            candidates,
        })
    }
}

/// Enumerates worlds and opens a reduction session over them.
pub fn start_reduction(a: &Alignment, budget: &Budget) -> Result<ReductionSession, AnalysisError> {
    let e = enumerate_worlds(a, budget)?;
    if e.worlds.is_empty() {
        return Err(AnalysisError::Inconsistent);
    }
    Ok(ReductionSession::new(e.worlds))
}
