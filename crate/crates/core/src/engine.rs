//! Native reasoner over a finite region grid.
//!
//! Each grid cell stands for the elements whose deepest containing concept is
//! a given node (or "outside") in each taxonomy. With coverage on only leaves
//! are used as coordinates, so every parent is exactly the union of its
//! children; sibling disjointness holds by construction. A concept's
//! extension is the set of cells whose coordinate lies in its subtree.
//!
//! Every constraint is either `AllEmpty(cells)` or `SomeInhabited(cells)`.
//! For a fixed set of constraints the assignment that inhabits every cell not
//! forced empty is a model iff any model exists, since `SomeInhabited` is
//! monotone. Consistency branches over the disjuncts of disjunctive
//! articulations; world enumeration then walks the cross-taxonomy pairs in
//! canonical order, branching only on pairs that can still take more than one
//! relation.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitset::CellSet;
use crate::model::{Alignment, ConceptRef, GridCell, PairRelation, Side, Violation, World};
use crate::relations::{classify_counts, BaseRelation, RelationMask};

pub const DEFAULT_MAX_BRANCHES: u64 = 1_000_000;
pub const DEFAULT_MAX_WORLDS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    pub max_branches: u64,
    pub max_worlds: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_branches: DEFAULT_MAX_BRANCHES,
            max_worlds: DEFAULT_MAX_WORLDS,
        }
    }
}

impl Budget {
    pub fn with_max_worlds(mut self, n: usize) -> Self {
        self.max_worlds = n;
        self
    }

    pub fn with_max_branches(mut self, n: u64) -> Self {
        self.max_branches = n;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("invalid alignment: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("search budget exceeded after {limit} branches")]
    BudgetExceeded { limit: u64 },
    #[error("concept {0} is empty under the given witness")]
    EmptyConcept(String),
    #[error("cell {0:?} is not part of the grid")]
    UnknownCell(GridCell),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverStats {
    pub branches: u64,
    pub propagations: u64,
    pub realizability_checks: u64,
    pub wall_time_us: u64,
}

/// The canonical finite universe of an alignment.
#[derive(Debug, Clone)]
pub struct RegionGrid {
    /// Concepts of each side sorted by key; positions index `ext`.
    concepts: [Vec<ConceptRef>; 2],
    /// Coordinate values per side, `None` for outside (always last).
    axes: [Vec<Option<usize>>; 2],
    /// Axis positions of each cell.
    cells: Vec<[usize; 2]>,
    ext: [Vec<CellSet>; 2],
    lookup: HashMap<GridCell, usize>,
}

impl RegionGrid {
    pub fn build(a: &Alignment) -> Result<RegionGrid, EngineError> {
        let violations = a.validate();
        if !violations.is_empty() {
            return Err(EngineError::Invalid(violations));
        }
        let mut concepts: [Vec<ConceptRef>; 2] = [Vec::new(), Vec::new()];
        let mut tax_index: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
        let mut axes: [Vec<Option<usize>>; 2] = [Vec::new(), Vec::new()];
        for side in [Side::First, Side::Second] {
            let t = a.taxonomy(side);
            let mut order: Vec<usize> = (0..t.len()).collect();
            order.sort_by_key(|&i| t.key(i));
            concepts[side.slot()] = order.iter().map(|&i| t.concept(i)).collect();
            tax_index[side.slot()] = order.clone();
            let mut axis: Vec<Option<usize>> = (0..order.len())
                .filter(|&pos| !a.flags.coverage || t.is_leaf(order[pos]))
                .map(Some)
                .collect();
            axis.push(None);
            axes[side.slot()] = axis;
        }
        let mut cells = Vec::new();
        for (i, x) in axes[0].iter().enumerate() {
            for (j, y) in axes[1].iter().enumerate() {
                if x.is_none() && y.is_none() {
                    continue;
                }
                cells.push([i, j]);
            }
        }
        let mut ext: [Vec<CellSet>; 2] = [Vec::new(), Vec::new()];
        for side in [Side::First, Side::Second] {
            let s = side.slot();
            let t = a.taxonomy(side);
            ext[s] = (0..concepts[s].len())
                .map(|pos| {
                    let mut set = CellSet::empty(cells.len());
                    for (ci, cell) in cells.iter().enumerate() {
                        if let Some(coord) = axes[s][cell[s]] {
                            if t.is_ancestor_or_self(tax_index[s][pos], tax_index[s][coord]) {
                                set.insert(ci);
                            }
                        }
                    }
                    set
                })
                .collect();
        }
        let mut grid = RegionGrid {
            concepts,
            axes,
            cells,
            ext,
            lookup: HashMap::new(),
        };
        grid.lookup = (0..grid.cells.len()).map(|i| (grid.cell(i), i)).collect();
        Ok(grid)
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cell(&self, i: usize) -> GridCell {
        let [x, y] = self.cells[i];
        let name = |side: usize, v: Option<usize>| v.map(|p| self.concepts[side][p].name.clone());
        GridCell {
            left: name(0, self.axes[0][x]),
            right: name(1, self.axes[1][y]),
        }
    }

    pub fn cells(&self) -> Vec<GridCell> {
        (0..self.len()).map(|i| self.cell(i)).collect()
    }

    pub fn cell_index(&self, cell: &GridCell) -> Option<usize> {
        self.lookup.get(cell).copied()
    }

    /// Concepts of one side in canonical (key) order.
    pub fn concepts(&self, side: Side) -> &[ConceptRef] {
        &self.concepts[side.slot()]
    }

    pub fn position(&self, c: &ConceptRef) -> Option<usize> {
        self.concepts[c.side.slot()].binary_search_by_key(&c.key(), |x| x.key()).ok()
    }

    /// Cell indices making up a concept's extension.
    pub fn extension(&self, c: &ConceptRef) -> Option<Vec<usize>> {
        let pos = self.position(c)?;
        Some(self.ext[c.side.slot()][pos].iter().collect())
    }

    pub fn pair_count(&self) -> usize {
        self.concepts[0].len() * self.concepts[1].len()
    }

    fn pair_positions(&self, pair: usize) -> (usize, usize) {
        let n2 = self.concepts[1].len();
        (pair / n2, pair % n2)
    }

    fn pair_index(&self, left: usize, right: usize) -> usize {
        left * self.concepts[1].len() + right
    }

    fn to_set(&self, cells: &[usize]) -> CellSet {
        let mut s = CellSet::empty(self.len());
        for &c in cells {
            s.insert(c);
        }
        s
    }

    /// Relation of a pair given the inhabited cells. Both extensions must
    /// meet `live`.
    fn relation_under(&self, left: usize, right: usize, live: &CellSet) -> BaseRelation {
        let x = &self.ext[0][left];
        let y = &self.ext[1][right];
        let (mut lo, mut co, mut ro) = (0, 0, 0);
        for ((xw, yw), lw) in x.words().iter().zip(y.words()).zip(live.words()) {
            lo |= xw & !yw & lw;
            co |= xw & yw & lw;
            ro |= yw & !xw & lw;
        }
        classify_counts((lo != 0) as usize, (co != 0) as usize, (ro != 0) as usize)
    }

    /// Cells that must be empty and regions that must be inhabited for the
    /// pair to stand in relation `r`.
    fn relation_constraint(&self, left: usize, right: usize, r: BaseRelation) -> Constraint {
        let x = &self.ext[0][left];
        let y = &self.ext[1][right];
        let empty = CellSet::empty(self.len());
        match r {
            BaseRelation::Equals => Constraint {
                all_empty: x.and_not(y).or(&y.and_not(x)),
                some_inhabited: vec![],
            },
            BaseRelation::IsIncludedIn => Constraint {
                all_empty: x.and_not(y),
                some_inhabited: vec![y.and_not(x)],
            },
            BaseRelation::Includes => Constraint {
                all_empty: y.and_not(x),
                some_inhabited: vec![x.and_not(y)],
            },
            BaseRelation::Disjoint => Constraint {
                all_empty: x.and(y),
                some_inhabited: vec![],
            },
            BaseRelation::Overlaps => Constraint {
                all_empty: empty,
                some_inhabited: vec![x.and(y), x.and_not(y), y.and_not(x)],
            },
        }
    }
}

struct Constraint {
    all_empty: CellSet,
    some_inhabited: Vec<CellSet>,
}

/// A constraint primitive over grid cells (cell indices ascending).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "cells", rename_all = "snake_case")]
pub enum Primitive {
    AllEmpty(Vec<usize>),
    SomeInhabited(Vec<usize>),
}

impl Primitive {
    pub fn holds(&self, inhabited: &[bool]) -> bool {
        match self {
            Primitive::AllEmpty(cells) => cells.iter().all(|&c| !inhabited[c]),
            Primitive::SomeInhabited(cells) => cells.iter().any(|&c| inhabited[c]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Disjunct {
    pub relation: BaseRelation,
    pub primitives: Vec<Primitive>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Group {
    pub articulation: usize,
    pub disjuncts: Vec<Disjunct>,
}

/// Global primitives (non-emptiness) plus one disjunctive group per articulation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellConstraintSet {
    pub primitives: Vec<Primitive>,
    pub groups: Vec<Group>,
}

impl CellConstraintSet {
    /// Whether an inhabitation satisfies every primitive and some disjunct of every group.
    pub fn satisfied_by(&self, inhabited: &[bool]) -> bool {
        self.primitives.iter().all(|p| p.holds(inhabited))
            && self
                .groups
                .iter()
                .all(|g| g.disjuncts.iter().any(|d| d.primitives.iter().all(|p| p.holds(inhabited))))
    }
}

pub fn build_grid(a: &Alignment) -> Result<RegionGrid, EngineError> {
    RegionGrid::build(a)
}

pub fn encode(a: &Alignment, g: &RegionGrid) -> CellConstraintSet {
    let to_vec = |s: &CellSet| s.iter().collect::<Vec<_>>();
    let mut primitives = Vec::new();
    for side in [Side::First, Side::Second] {
        for ext in &g.ext[side.slot()] {
            primitives.push(Primitive::SomeInhabited(to_vec(ext)));
        }
    }
    let groups = a
        .articulations
        .iter()
        .map(|art| {
            let l = g.position(&art.left).expect("validated");
            let r = g.position(&art.right).expect("validated");
            let disjuncts = art
                .mask
                .iter()
                .map(|rel| {
                    let c = g.relation_constraint(l, r, rel);
                    let mut prims = Vec::new();
                    if !c.all_empty.is_empty() {
                        prims.push(Primitive::AllEmpty(to_vec(&c.all_empty)));
                    }
                    prims.extend(c.some_inhabited.iter().map(|s| Primitive::SomeInhabited(to_vec(s))));
                    Disjunct { relation: rel, primitives: prims }
                })
                .collect();
            Group {
                articulation: art.index,
                disjuncts,
            }
        })
        .collect();
    CellConstraintSet { primitives, groups }
}

/// Relation map induced by a set of inhabited cells.
pub fn relation_map_of(witness: &[GridCell], g: &RegionGrid) -> Result<Vec<PairRelation>, EngineError> {
    let mut live = CellSet::empty(g.len());
    for cell in witness {
        let i = g.cell_index(cell).ok_or_else(|| EngineError::UnknownCell(cell.clone()))?;
        live.insert(i);
    }
    for side in [Side::First, Side::Second] {
        for (pos, ext) in g.ext[side.slot()].iter().enumerate() {
            if !ext.intersects(&live) {
                return Err(EngineError::EmptyConcept(g.concepts[side.slot()][pos].key()));
            }
        }
    }
    Ok(relations_of(g, &live))
}

fn relations_of(g: &RegionGrid, live: &CellSet) -> Vec<PairRelation> {
    let mut out = Vec::with_capacity(g.pair_count());
    for (l, left) in g.concepts[0].iter().enumerate() {
        for (r, right) in g.concepts[1].iter().enumerate() {
            out.push(PairRelation {
                left: left.clone(),
                right: right.clone(),
                relation: g.relation_under(l, r, live),
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Consistency {
    pub consistent: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<GridCell>>,
    #[serde(skip)]
    pub stats: SolverStats,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Enumeration {
    pub worlds: Vec<World>,
    pub truncated: bool,
    #[serde(skip)]
    pub stats: SolverStats,
}

pub fn check_consistency(a: &Alignment, budget: &Budget) -> Result<Consistency, EngineError> {
    let solver = Solver::new(a)?;
    solver.check(budget)
}

pub fn enumerate_worlds(a: &Alignment, budget: &Budget) -> Result<Enumeration, EngineError> {
    let solver = Solver::new(a)?;
    solver.enumerate(budget)
}

#[derive(Clone)]
struct State {
    zeroed: CellSet,
    required: Vec<CellSet>,
}

impl State {
    fn live(&self, universe: &CellSet) -> CellSet {
        universe.and_not(&self.zeroed)
    }

    fn with(&self, c: &Constraint) -> State {
        let mut next = self.clone();
        next.zeroed.union_with(&c.all_empty);
        next.required.extend(c.some_inhabited.iter().cloned());
        next
    }
}

/// A required region restricted to the currently live cells.
struct LiveRegion {
    count: usize,
    words: Vec<(u32, u64)>,
}

struct Ctx {
    budget: Budget,
    stats: SolverStats,
}

impl Ctx {
    fn tick(&mut self) -> Result<(), EngineError> {
        self.stats.branches += 1;
        if self.stats.branches > self.budget.max_branches {
            return Err(EngineError::BudgetExceeded {
                limit: self.budget.max_branches,
            });
        }
        Ok(())
    }
}

struct DisjunctiveGroup {
    pair: usize,
    mask: RelationMask,
}

/// An alignment compiled against its grid.
pub struct Solver {
    grid: RegionGrid,
    universe: CellSet,
    pair_masks: Vec<RelationMask>,
    groups: Vec<DisjunctiveGroup>,
    /// `None` when two articulations on one pair share no relation.
    base: Option<State>,
    /// Position of each concept's parent, per side.
    parents: [Vec<Option<usize>>; 2],
}

impl Solver {
    pub fn new(a: &Alignment) -> Result<Solver, EngineError> {
        let grid = RegionGrid::build(a)?;
        let universe = CellSet::full(grid.len());
        let mut pair_masks = vec![RelationMask::FULL; grid.pair_count()];
        for art in &a.articulations {
            let l = grid.position(&art.left).expect("validated");
            let r = grid.position(&art.right).expect("validated");
            let p = grid.pair_index(l, r);
            pair_masks[p] = pair_masks[p].intersection(art.mask);
        }
        let mut parents: [Vec<Option<usize>>; 2] = [Vec::new(), Vec::new()];
        for side in [Side::First, Side::Second] {
            let t = a.taxonomy(side);
            parents[side.slot()] = grid.concepts[side.slot()]
                .iter()
                .map(|c| {
                    let i = t.index_of(&c.name).expect("grid concept");
                    t.parent(i).map(|p| grid.position(&t.concept(p)).expect("grid concept"))
                })
                .collect();
        }

        // Leaf extensions are minimal, so their non-emptiness implies every other concept's.
        let mut required = Vec::new();
        for side in [Side::First, Side::Second] {
            let s = side.slot();
            let t = a.taxonomy(side);
            for (pos, c) in grid.concepts[s].iter().enumerate() {
                if t.is_leaf(t.index_of(&c.name).expect("grid concept")) {
                    required.push(grid.ext[s][pos].clone());
                }
            }
        }
        let mut base = Some(State {
            zeroed: CellSet::empty(grid.len()),
            required,
        });
        let mut groups = Vec::new();
        for (p, mask) in pair_masks.iter().enumerate() {
            if mask.is_empty() {
                base = None;
            } else if let Some(r) = mask.as_single() {
                if let Some(state) = base.as_mut() {
                    let (l, rt) = grid.pair_positions(p);
                    let c = grid.relation_constraint(l, rt, r);
                    *state = state.with(&c);
                }
            } else if !mask.is_full() {
                groups.push(DisjunctiveGroup { pair: p, mask: *mask });
            }
        }
        Ok(Solver {
            grid,
            universe,
            pair_masks,
            groups,
            base,
            parents,
        })
    }

    pub fn grid(&self) -> &RegionGrid {
        &self.grid
    }

    pub fn check(&self, budget: &Budget) -> Result<Consistency, EngineError> {
        let start = Instant::now();
        let mut ctx = Ctx {
            budget: *budget,
            stats: SolverStats::default(),
        };
        let witness = match &self.base {
            Some(base) => self.satisfiable(base, &mut ctx)?,
            None => None,
        };
        ctx.stats.wall_time_us = micros(start.elapsed());
        Ok(Consistency {
            consistent: witness.is_some(),
            witness: witness.map(|w| w.iter().map(|i| self.grid.cell(i)).collect()),
            stats: ctx.stats,
        })
    }

    pub fn enumerate(&self, budget: &Budget) -> Result<Enumeration, EngineError> {
        let start = Instant::now();
        let mut ctx = Ctx {
            budget: *budget,
            stats: SolverStats::default(),
        };
        let mut out = Emitter {
            worlds: Vec::new(),
            truncated: false,
            limit: budget.max_worlds,
        };
        if let Some(base) = &self.base {
            if self.satisfiable(base, &mut ctx)?.is_some() {
                let mut fixed = vec![None; self.grid.pair_count()];
                self.enumerate_from(base.clone(), 0, &mut fixed, &mut out, &mut ctx)?;
            }
        }
        ctx.stats.wall_time_us = micros(start.elapsed());
        Ok(Enumeration {
            worlds: out.worlds,
            truncated: out.truncated,
            stats: ctx.stats,
        })
    }

    fn all_required_live(&self, state: &State, live: &CellSet, ctx: &mut Ctx) -> bool {
        ctx.stats.realizability_checks += 1;
        state.required.iter().all(|s| s.intersects(live))
    }

    /// Branches over disjunctive articulations violated by the maximal
    /// assignment; returns a model if one exists.
    fn satisfiable(&self, state: &State, ctx: &mut Ctx) -> Result<Option<CellSet>, EngineError> {
        ctx.tick()?;
        let live = state.live(&self.universe);
        if !self.all_required_live(state, &live, ctx) {
            return Ok(None);
        }
        for g in &self.groups {
            let (l, r) = self.grid.pair_positions(g.pair);
            let rel = self.grid.relation_under(l, r, &live);
            if g.mask.contains(rel) {
                continue;
            }
            for d in g.mask.iter() {
                let child = state.with(&self.grid.relation_constraint(l, r, d));
                if let Some(w) = self.satisfiable(&child, ctx)? {
                    return Ok(Some(w));
                }
            }
            return Ok(None);
        }
        Ok(Some(live))
    }

    fn live_regions(state: &State, live: &CellSet) -> Vec<LiveRegion> {
        let mut regions: Vec<LiveRegion> = state
            .required
            .iter()
            .map(|s| {
                let l = s.and(live);
                LiveRegion {
                    count: l.count(),
                    words: l.sparse(),
                }
            })
            .collect();
        regions.sort_by_key(|r| r.count);
        regions
    }

    /// Relations the pair can take ignoring disjunctive articulations not yet
    /// committed to the state. Always contains the maximal assignment's relation.
    fn relaxed_domain(
        &self,
        pair: usize,
        current: BaseRelation,
        live: &CellSet,
        regions: &[LiveRegion],
        fixed: &[Option<BaseRelation>],
        ctx: &mut Ctx,
    ) -> RelationMask {
        let (l, r) = self.grid.pair_positions(pair);
        let mut candidates = RelationMask::FULL;
        // x ⊆ parent(x): rel(x,y) ∈ {==,<} ∘ rel(parent(x), y)
        if let Some(pl) = self.parents[0][l] {
            if let Some(rel) = fixed.get(self.grid.pair_index(pl, r)).copied().flatten() {
                let contained = RelationMask::from_iter([BaseRelation::Equals, BaseRelation::IsIncludedIn]);
                candidates = candidates.intersection(contained.compose(rel.into()));
            }
        }
        // parent(y) ⊇ y: rel(x,y) ∈ rel(x, parent(y)) ∘ {==,>}
        if let Some(pr) = self.parents[1][r] {
            if let Some(rel) = fixed.get(self.grid.pair_index(l, pr)).copied().flatten() {
                let contains = RelationMask::from_iter([BaseRelation::Equals, BaseRelation::Includes]);
                candidates = candidates.intersection(RelationMask::from(rel).compose(contains));
            }
        }
        if !candidates.is_full() {
            ctx.stats.propagations += 1;
        }
        debug_assert!(candidates.contains(current));
        let mut domain = RelationMask::single(current);
        for rel in candidates.iter().filter(|x| *x != current) {
            ctx.stats.realizability_checks += 1;
            let c = self.grid.relation_constraint(l, r, rel);
            let killed = c.all_empty.and(live);
            let remaining = live.and_not(&killed);
            if !c.some_inhabited.iter().all(|s| s.intersects(&remaining)) {
                continue;
            }
            let budget = killed.count();
            let survives = regions.iter().all(|region| {
                region.count > budget
                    || region
                        .words
                        .iter()
                        .any(|&(w, bits)| bits & !killed.words()[w as usize] != 0)
            });
            if survives {
                domain.insert(rel);
            }
        }
        domain
    }

    fn enumerate_from(
        &self,
        mut state: State,
        start: usize,
        fixed: &mut Vec<Option<BaseRelation>>,
        out: &mut Emitter,
        ctx: &mut Ctx,
    ) -> Result<(), EngineError> {
        ctx.tick()?;
        let mut live = state.live(&self.universe);
        let mut regions = Self::live_regions(&state, &live);
        let mut pair = start;
        while pair < self.grid.pair_count() {
            let (l, r) = self.grid.pair_positions(pair);
            let current = self.grid.relation_under(l, r, &live);
            let relaxed = self.relaxed_domain(pair, current, &live, &regions, fixed, ctx);
            if relaxed.len() == 1 {
                // `state` is satisfiable, so a forced relation respects the pair's mask.
                debug_assert!(self.pair_masks[pair].contains(current));
                fixed[pair] = Some(current);
                pair += 1;
                continue;
            }
            let mut options = Vec::new();
            for rel in relaxed.intersection(self.pair_masks[pair]).iter() {
                let child = state.with(&self.grid.relation_constraint(l, r, rel));
                if self.satisfiable(&child, ctx)?.is_some() {
                    options.push((rel, child));
                }
            }
            match options.len() {
                0 => return Ok(()),
                1 => {
                    let (rel, child) = options.pop().unwrap();
                    fixed[pair] = Some(rel);
                    state = child;
                    live = state.live(&self.universe);
                    regions = Self::live_regions(&state, &live);
                    pair += 1;
                }
                _ => {
                    for (rel, child) in options {
                        fixed[pair] = Some(rel);
                        self.enumerate_from(child, pair + 1, fixed, out, ctx)?;
                        if out.truncated {
                            break;
                        }
                    }
                    return Ok(());
                }
            }
        }
        // The state is satisfiable and every pair is settled, so the maximal
        // assignment realizes this world.
        if out.worlds.len() == out.limit {
            out.truncated = true;
            return Ok(());
        }
        let id = out.worlds.len();
        out.worlds.push(World {
            id,
            relations: relations_of(&self.grid, &live),
            witness: live.iter().map(|i| self.grid.cell(i)).collect(),
        });
        Ok(())
    }
}

struct Emitter {
    worlds: Vec<World>,
    truncated: bool,
    limit: usize,
}

fn micros(d: Duration) -> u64 {
    d.as_micros().min(u64::MAX as u128) as u64
}

/// Convenience for tests and oracles: the cell-index form of a witness.
pub fn witness_indices(g: &RegionGrid, witness: &[GridCell]) -> Result<Vec<usize>, EngineError> {
    witness
        .iter()
        .map(|c| g.cell_index(c).ok_or_else(|| EngineError::UnknownCell(c.clone())))
        .collect()
}

impl RegionGrid {
    /// Inhabited-flag vector for a set of cell indices.
    pub fn inhabitation(&self, cells: &[usize]) -> Vec<bool> {
        let set = self.to_set(cells);
        (0..self.len()).map(|i| set.contains(i)).collect()
    }
}
