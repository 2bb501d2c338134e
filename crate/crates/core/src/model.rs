//! Taxonomies, articulations, alignments and the results computed over them.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::parser::SourceSpan;
use crate::relations::{BaseRelation, RelationMask};

/// Which of the two aligned taxonomies a concept belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Side {
    First,
    Second,
}

impl Side {
    pub const fn id(self) -> u8 {
        match self {
            Side::First => 1,
            Side::Second => 2,
        }
    }

    pub fn from_id(id: u8) -> Option<Side> {
        match id {
            1 => Some(Side::First),
            2 => Some(Side::Second),
            _ => None,
        }
    }

    pub const fn slot(self) -> usize {
        self.id() as usize - 1
    }

    pub const fn other(self) -> Side {
        match self {
            Side::First => Side::Second,
            Side::Second => Side::First,
        }
    }
}

impl From<Side> for u8 {
    fn from(s: Side) -> u8 {
        s.id()
    }
}

impl TryFrom<u8> for Side {
    type Error = String;
    fn try_from(id: u8) -> Result<Self, String> {
        Side::from_id(id).ok_or_else(|| format!("taxonomy id must be 1 or 2, got {id}"))
    }
}

/// A concept named by taxonomy and local name; its key is `"1.A"`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConceptRef {
    pub side: Side,
    pub name: String,
}

impl ConceptRef {
    pub fn new(side: Side, name: impl Into<String>) -> Self {
        ConceptRef { side, name: name.into() }
    }

    pub fn key(&self) -> String {
        format!("{}.{}", self.side.id(), self.name)
    }

    /// Splits `"1.A"` at the first dot.
    pub fn parse_key(key: &str) -> Option<ConceptRef> {
        let (tid, name) = key.split_once('.')?;
        let side = Side::from_id(tid.parse().ok()?)?;
        if name.is_empty() {
            return None;
        }
        Some(ConceptRef::new(side, name))
    }
}

impl fmt::Display for ConceptRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.side.id(), self.name)
    }
}

impl Serialize for ConceptRef {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.key())
    }
}

impl<'de> Deserialize<'de> for ConceptRef {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let key = String::deserialize(d)?;
        ConceptRef::parse_key(&key)
            .ok_or_else(|| serde::de::Error::custom(format!("malformed concept key `{key}`")))
    }
}

/// A tree of concepts linked by is_a edges. Concepts are kept in insertion
/// order; `parents[i]` is the parent of concept `i`.
///
/// The structure may be malformed (several roots, cycles) until checked by
/// [`Alignment::validate`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(into = "TaxonomyRecord", try_from = "TaxonomyRecord")]
pub struct Taxonomy {
    side: Side,
    label: String,
    names: Vec<String>,
    parents: Vec<Option<usize>>,
    index: HashMap<String, usize>,
}

impl Taxonomy {
    pub fn new(side: Side, label: impl Into<String>) -> Self {
        Taxonomy {
            side,
            label: label.into(),
            names: Vec::new(),
            parents: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn key(&self, i: usize) -> String {
        format!("{}.{}", self.side.id(), self.names[i])
    }

    pub fn concept(&self, i: usize) -> ConceptRef {
        ConceptRef::new(self.side, self.names[i].clone())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    /// Returns the index of `name`, declaring it if new.
    pub fn ensure_concept(&mut self, name: &str) -> usize {
        if let Some(i) = self.index_of(name) {
            return i;
        }
        let i = self.names.len();
        self.names.push(name.to_string());
        self.parents.push(None);
        self.index.insert(name.to_string(), i);
        i
    }

    pub fn parent(&self, i: usize) -> Option<usize> {
        self.parents[i]
    }

    pub fn set_parent(&mut self, child: usize, parent: usize) {
        self.parents[child] = Some(parent);
    }

    /// Adds `parent is_a`-edges for each child, declaring names as needed.
    pub fn add_children(&mut self, parent: &str, children: &[&str]) -> &mut Self {
        let p = self.ensure_concept(parent);
        for c in children {
            let c = self.ensure_concept(c);
            self.set_parent(c, p);
        }
        self
    }

    pub fn children(&self, i: usize) -> Vec<usize> {
        (0..self.len()).filter(|&c| self.parents[c] == Some(i)).collect()
    }

    pub fn children_lists(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.len()];
        for (c, p) in self.parents.iter().enumerate() {
            if let Some(p) = p {
                out[*p].push(c);
            }
        }
        out
    }

    pub fn roots(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.parents[i].is_none()).collect()
    }

    /// The unique root of a well-formed taxonomy.
    pub fn root(&self) -> Option<usize> {
        match self.roots().as_slice() {
            [r] => Some(*r),
            _ => None,
        }
    }

    pub fn is_leaf(&self, i: usize) -> bool {
        !self.parents.contains(&Some(i))
    }

    /// Walks up from `node`; true if `ancestor` is met (including `node` itself).
    /// Assumes an acyclic parent map.
    pub fn is_ancestor_or_self(&self, ancestor: usize, node: usize) -> bool {
        let mut cur = Some(node);
        let mut steps = 0;
        while let Some(c) = cur {
            if c == ancestor {
                return true;
            }
            steps += 1;
            if steps > self.len() {
                return false;
            }
            cur = self.parents[c];
        }
        false
    }

    /// The is_a chain from `node` up to (and excluding) `ancestor`, as
    /// (child, parent) pairs.
    pub fn chain_to(&self, node: usize, ancestor: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut cur = node;
        while cur != ancestor {
            match self.parents[cur] {
                Some(p) => {
                    out.push((cur, p));
                    cur = p;
                }
                None => return Vec::new(),
            }
            if out.len() > self.len() {
                return Vec::new();
            }
        }
        out
    }
}

/// Structural equality: same concepts and same parent relation, regardless
/// of declaration order.
impl PartialEq for Taxonomy {
    fn eq(&self, other: &Self) -> bool {
        let edges = |t: &Taxonomy| -> BTreeMap<String, Option<String>> {
            (0..t.len())
                .map(|i| (t.names[i].clone(), t.parents[i].map(|p| t.names[p].clone())))
                .collect()
        };
        self.side == other.side && self.label == other.label && edges(self) == edges(other)
    }
}

impl Eq for Taxonomy {}

#[derive(Serialize, Deserialize)]
struct TaxonomyRecord {
    id: Side,
    label: String,
    concepts: Vec<String>,
    /// `[parent, child]` pairs.
    edges: Vec<[String; 2]>,
}

impl From<Taxonomy> for TaxonomyRecord {
    fn from(t: Taxonomy) -> Self {
        let edges = (0..t.len())
            .filter_map(|c| t.parents[c].map(|p| [t.names[p].clone(), t.names[c].clone()]))
            .collect();
        TaxonomyRecord {
            id: t.side,
            label: t.label,
            concepts: t.names,
            edges,
        }
    }
}

impl TryFrom<TaxonomyRecord> for Taxonomy {
    type Error = String;
    fn try_from(r: TaxonomyRecord) -> Result<Self, String> {
        let mut t = Taxonomy::new(r.id, r.label);
        for name in &r.concepts {
            if t.index_of(name).is_some() {
                return Err(format!("duplicate concept `{name}`"));
            }
            t.ensure_concept(name);
        }
        for [parent, child] in &r.edges {
            let p = t.index_of(parent).ok_or_else(|| format!("unknown concept `{parent}`"))?;
            let c = t.index_of(child).ok_or_else(|| format!("unknown concept `{child}`"))?;
            if t.parents[c].is_some() {
                return Err(format!("concept `{child}` has two parents"));
            }
            t.set_parent(c, p);
        }
        Ok(t)
    }
}

/// An expert-asserted relation between a concept of the first taxonomy
/// (`left`) and one of the second (`right`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Articulation {
    /// Position in the input; stable under removal of other articulations.
    pub index: usize,
    pub left: ConceptRef,
    pub right: ConceptRef,
    pub mask: RelationMask,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<SourceSpan>,
}

impl Articulation {
    pub fn new(index: usize, left: ConceptRef, mask: RelationMask, right: ConceptRef) -> Self {
        Articulation {
            index,
            left,
            right,
            mask,
            source: None,
        }
    }
}

impl PartialEq for Articulation {
    fn eq(&self, other: &Self) -> bool {
        self.index == other.index
            && self.left == other.left
            && self.right == other.right
            && self.mask == other.mask
    }
}

impl Eq for Articulation {}

/// Renders as `1.A {equals is_included_in} 2.A`.
impl fmt::Display for Articulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.left, self.mask.long_form(), self.right)
    }
}

/// Taxonomic covering constraints. Only coverage may be switched off.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintFlags {
    pub coverage: bool,
    pub sibling_disjointness: bool,
    pub non_emptiness: bool,
}

impl Default for ConstraintFlags {
    fn default() -> Self {
        ConstraintFlags {
            coverage: true,
            sibling_disjointness: true,
            non_emptiness: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alignment {
    pub taxonomies: [Taxonomy; 2],
    pub articulations: Vec<Articulation>,
    #[serde(default)]
    pub flags: ConstraintFlags,
}

/// A broken type invariant, reported by [`Alignment::validate`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    WrongTaxonomySlot { slot: usize, found: Side },
    EmptyTaxonomy { taxonomy: Side },
    NoRoot { taxonomy: Side },
    MultipleRoots { taxonomy: Side, roots: Vec<String> },
    Cycle { taxonomy: Side, concept: String },
    UnknownConcept { articulation: usize, concept: String },
    WrongSide { articulation: usize, concept: String, expected: Side },
    EmptyMask { articulation: usize },
    DuplicateArticulationIndex { articulation: usize },
    UnsupportedFlag { flag: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::WrongTaxonomySlot { slot, found } => {
                write!(f, "taxonomy slot {} holds taxonomy {}", slot + 1, found.id())
            }
            Violation::EmptyTaxonomy { taxonomy } => write!(f, "taxonomy {} has no concepts", taxonomy.id()),
            Violation::NoRoot { taxonomy } => write!(f, "taxonomy {} has no root", taxonomy.id()),
            Violation::MultipleRoots { taxonomy, roots } => {
                write!(f, "taxonomy {} has several roots: {}", taxonomy.id(), roots.join(", "))
            }
            Violation::Cycle { taxonomy, concept } => {
                write!(f, "taxonomy {} has an is_a cycle through {concept}", taxonomy.id())
            }
            Violation::UnknownConcept { articulation, concept } => {
                write!(f, "articulation {articulation} references unknown concept {concept}")
            }
            Violation::WrongSide { articulation, concept, expected } => write!(
                f,
                "articulation {articulation}: {concept} should belong to taxonomy {}",
                expected.id()
            ),
            Violation::EmptyMask { articulation } => write!(f, "articulation {articulation} has an empty relation set"),
            Violation::DuplicateArticulationIndex { articulation } => {
                write!(f, "articulation index {articulation} is used twice")
            }
            Violation::UnsupportedFlag { flag } => write!(f, "constraint `{flag}` cannot be disabled"),
        }
    }
}

impl Alignment {
    pub fn new(first: Taxonomy, second: Taxonomy) -> Self {
        Alignment {
            taxonomies: [first, second],
            articulations: Vec::new(),
            flags: ConstraintFlags::default(),
        }
    }

    pub fn taxonomy(&self, side: Side) -> &Taxonomy {
        &self.taxonomies[side.slot()]
    }

    /// Appends an articulation, normalizing a `2 → 1` orientation by converse.
    pub fn articulate(&mut self, a: ConceptRef, mask: RelationMask, b: ConceptRef) -> &mut Self {
        let index = self.articulations.iter().map(|a| a.index + 1).max().unwrap_or(0);
        let art = if a.side == Side::Second && b.side == Side::First {
            Articulation::new(index, b, mask.converse(), a)
        } else {
            Articulation::new(index, a, mask, b)
        };
        self.articulations.push(art);
        self
    }

    pub fn resolve(&self, c: &ConceptRef) -> Option<usize> {
        self.taxonomy(c.side).index_of(&c.name)
    }

    pub fn articulation(&self, index: usize) -> Option<&Articulation> {
        self.articulations.iter().find(|a| a.index == index)
    }

    /// Copy keeping only articulations whose index satisfies `keep`.
    pub fn filter_articulations(&self, mut keep: impl FnMut(usize) -> bool) -> Alignment {
        Alignment {
            taxonomies: self.taxonomies.clone(),
            articulations: self
                .articulations
                .iter()
                .filter(|a| keep(a.index))
                .cloned()
                .collect(),
            flags: self.flags,
        }
    }

    pub fn without(&self, removed: &BTreeSet<usize>) -> Alignment {
        self.filter_articulations(|i| !removed.contains(&i))
    }

    pub fn restricted_to(&self, kept: &BTreeSet<usize>) -> Alignment {
        self.filter_articulations(|i| kept.contains(&i))
    }

    pub fn articulation_indices(&self) -> Vec<usize> {
        self.articulations.iter().map(|a| a.index).collect()
    }

    /// Empty iff every structural invariant holds.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for (slot, t) in self.taxonomies.iter().enumerate() {
            if t.side.slot() != slot {
                out.push(Violation::WrongTaxonomySlot { slot, found: t.side });
                continue;
            }
            out.extend(validate_tree(t));
        }
        let mut seen = BTreeSet::new();
        for a in &self.articulations {
            if !seen.insert(a.index) {
                out.push(Violation::DuplicateArticulationIndex { articulation: a.index });
            }
            for (c, expected) in [(&a.left, Side::First), (&a.right, Side::Second)] {
                if c.side != expected {
                    out.push(Violation::WrongSide {
                        articulation: a.index,
                        concept: c.key(),
                        expected,
                    });
                } else if self.resolve(c).is_none() {
                    out.push(Violation::UnknownConcept {
                        articulation: a.index,
                        concept: c.key(),
                    });
                }
            }
            if a.mask.is_empty() {
                out.push(Violation::EmptyMask { articulation: a.index });
            }
        }
        if !self.flags.sibling_disjointness {
            out.push(Violation::UnsupportedFlag {
                flag: "sibling_disjointness".into(),
            });
        }
        if !self.flags.non_emptiness {
            out.push(Violation::UnsupportedFlag {
                flag: "non_emptiness".into(),
            });
        }
        out
    }

    /// Every cross-taxonomy pair in canonical order (by left key, then right key).
    pub fn pairs(&self) -> Vec<(ConceptRef, ConceptRef)> {
        let sorted = |t: &Taxonomy| {
            let mut v: Vec<ConceptRef> = (0..t.len()).map(|i| t.concept(i)).collect();
            v.sort_by_key(|c| c.key());
            v
        };
        let lefts = sorted(&self.taxonomies[0]);
        let rights = sorted(&self.taxonomies[1]);
        let mut out = Vec::with_capacity(lefts.len() * rights.len());
        for l in &lefts {
            for r in &rights {
                out.push((l.clone(), r.clone()));
            }
        }
        out
    }
}

fn validate_tree(t: &Taxonomy) -> Vec<Violation> {
    let side = t.side;
    if t.is_empty() {
        return vec![Violation::EmptyTaxonomy { taxonomy: side }];
    }
    let mut out = Vec::new();
    let roots = t.roots();
    match roots.len() {
        0 => out.push(Violation::NoRoot { taxonomy: side }),
        1 => {}
        _ => out.push(Violation::MultipleRoots {
            taxonomy: side,
            roots: roots.iter().map(|&r| t.key(r)).collect(),
        }),
    }
    // A node off every root path sits on a cycle (each node has one parent).
    let mut reported = BTreeSet::new();
    for start in 0..t.len() {
        let mut cur = start;
        let mut steps = 0;
        while let Some(p) = t.parent(cur) {
            cur = p;
            steps += 1;
            if steps > t.len() {
                // `cur` is on the cycle; report its smallest member once.
                let mut members = vec![cur];
                let mut n = t.parent(cur).unwrap();
                while n != cur {
                    members.push(n);
                    n = t.parent(n).unwrap();
                }
                let min = *members.iter().min().unwrap();
                if reported.insert(min) {
                    out.push(Violation::Cycle {
                        taxonomy: side,
                        concept: t.key(min),
                    });
                }
                break;
            }
        }
    }
    out
}

/// One cross-taxonomy pair and its relation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PairRelation {
    pub left: ConceptRef,
    pub right: ConceptRef,
    pub relation: BaseRelation,
}

/// One inhabited region of the canonical universe: the deepest concept
/// containing the elements in each taxonomy, `None` for "outside".
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridCell {
    pub left: Option<String>,
    pub right: Option<String>,
}

/// A possible world: one base relation for every cross-taxonomy pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct World {
    pub id: usize,
    /// Sorted by (left key, right key).
    pub relations: Vec<PairRelation>,
    /// Inhabited cells of one grid assignment realizing the relations.
    pub witness: Vec<GridCell>,
}

impl World {
    pub fn relation(&self, left: &ConceptRef, right: &ConceptRef) -> Option<BaseRelation> {
        self.relations
            .binary_search_by(|p| (p.left.key(), p.right.key()).cmp(&(left.key(), right.key())))
            .ok()
            .map(|i| self.relations[i].relation)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MirEntry {
    pub left: ConceptRef,
    pub right: ConceptRef,
    /// Union of the relations seen across all worlds.
    pub mask: RelationMask,
    /// Worlds per base relation, in canonical order `==, <, >, ><, !`.
    pub counts: [usize; 5],
}

impl MirEntry {
    pub fn count(&self, r: BaseRelation) -> usize {
        self.counts[r.index()]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MirTable {
    pub total_worlds: usize,
    pub entries: Vec<MirEntry>,
}

impl MirTable {
    pub fn entry(&self, left: &ConceptRef, right: &ConceptRef) -> Option<&MirEntry> {
        self.entries.iter().find(|e| &e.left == left && &e.right == right)
    }
}

/// An is_a edge shown alongside a conflict.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IsaFact {
    pub child: ConceptRef,
    pub parent: ConceptRef,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Repair {
    /// Articulation indices to remove.
    pub remove: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnosis {
    pub consistent: bool,
    /// One minimal unsatisfiable subset of articulation indices.
    pub mus: Vec<usize>,
    /// Every minimal conflict, computed for small inputs only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub all_conflicts: Option<Vec<Vec<usize>>>,
    pub repairs: Vec<Repair>,
    /// Tree edges linking the concepts the MUS mentions.
    pub structural_facts: Vec<IsaFact>,
}
