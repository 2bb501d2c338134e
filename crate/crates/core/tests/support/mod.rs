//! Brute-force reference implementations used by the integration tests.
//!
//! Nothing here goes through the engine: the grid is rebuilt from the tree
//! definitions and every inhabitation of it is tried.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use taxoalign::model::{Alignment, ConceptRef, Side, Taxonomy};
use taxoalign::relations::{BaseRelation, RelationMask};

pub type RelationMap = Vec<(String, String, BaseRelation)>;

/// Cells as (left coordinate, right coordinate); `None` is outside.
pub struct OracleGrid {
    pub cells: Vec<(Option<String>, Option<String>)>,
    /// Concept key -> cell indices of its extension.
    pub extensions: BTreeMap<String, BTreeSet<usize>>,
    pub lefts: Vec<String>,
    pub rights: Vec<String>,
}

fn descendant_or_self(t: &Taxonomy, ancestor: &str, node: &str) -> bool {
    let mut cur = t.index_of(node);
    while let Some(c) = cur {
        if t.name(c) == ancestor {
            return true;
        }
        cur = t.parent(c);
    }
    false
}

pub fn oracle_grid(a: &Alignment) -> OracleGrid {
    let coords = |t: &Taxonomy| -> Vec<Option<String>> {
        let mut v: Vec<Option<String>> = t
            .names()
            .iter()
            .filter(|n| !a.flags.coverage || t.children(t.index_of(n).unwrap()).is_empty())
            .cloned()
            .map(Some)
            .collect();
        v.push(None);
        v
    };
    let (t1, t2) = (&a.taxonomies[0], &a.taxonomies[1]);
    let mut cells = Vec::new();
    for x in coords(t1) {
        for y in coords(t2) {
            if x.is_some() || y.is_some() {
                cells.push((x.clone(), y));
            }
        }
    }
    let mut extensions = BTreeMap::new();
    for (t, first) in [(t1, true), (t2, false)] {
        for name in t.names() {
            let ext: BTreeSet<usize> = cells
                .iter()
                .enumerate()
                .filter(|(_, (x, y))| {
                    let coord = if first { x } else { y };
                    coord.as_ref().is_some_and(|c| descendant_or_self(t, name, c))
                })
                .map(|(i, _)| i)
                .collect();
            extensions.insert(format!("{}.{}", t.side().id(), name), ext);
        }
    }
    let keys = |t: &Taxonomy| {
        let mut v: Vec<String> = t.names().iter().map(|n| format!("{}.{}", t.side().id(), n)).collect();
        v.sort();
        v
    };
    OracleGrid {
        cells,
        lefts: keys(t1),
        rights: keys(t2),
        extensions,
    }
}

fn bits_relation(x: u32, y: u32) -> BaseRelation {
    let common = x & y;
    if common == 0 {
        BaseRelation::Disjoint
    } else if x == y {
        BaseRelation::Equals
    } else if x & !y == 0 {
        BaseRelation::IsIncludedIn
    } else if y & !x == 0 {
        BaseRelation::Includes
    } else {
        BaseRelation::Overlaps
    }
}

/// Relation map of an inhabitation (bit `i` set = cell `i` inhabited), or
/// `None` if some concept is empty or an articulation is violated.
pub fn classify(a: &Alignment, g: &OracleGrid, inhabited: u32) -> Option<RelationMap> {
    let masks: BTreeMap<&str, u32> = g
        .extensions
        .iter()
        .map(|(k, e)| (k.as_str(), e.iter().fold(0u32, |m, &i| m | (1 << i)) & inhabited))
        .collect();
    if masks.values().any(|m| *m == 0) {
        return None;
    }
    for art in &a.articulations {
        let r = bits_relation(masks[art.left.key().as_str()], masks[art.right.key().as_str()]);
        if !art.mask.contains(r) {
            return None;
        }
    }
    let mut map = Vec::new();
    for l in &g.lefts {
        for r in &g.rights {
            map.push((l.clone(), r.clone(), bits_relation(masks[l.as_str()], masks[r.as_str()])));
        }
    }
    Some(map)
}

/// Every distinct relation map realized by some inhabitation, sorted.
pub fn oracle_worlds(a: &Alignment) -> BTreeSet<RelationMap> {
    let g = oracle_grid(a);
    let n = g.cells.len();
    assert!(n <= 20, "oracle grid too large: {n} cells");
    let mut out = BTreeSet::new();
    for bits in 0u32..(1 << n) {
        if let Some(map) = classify(a, &g, bits) {
            out.insert(map);
        }
    }
    out
}

pub fn oracle_consistent(a: &Alignment) -> bool {
    !oracle_worlds(a).is_empty()
}

pub fn world_map(w: &taxoalign::World) -> RelationMap {
    w.relations
        .iter()
        .map(|p| (p.left.key(), p.right.key(), p.relation))
        .collect()
}

/// A random rooted tree with at most `max_leaves` leaves and `max_nodes` nodes.
pub fn random_tree<R: Rng>(rng: &mut R, side: Side, prefix: &str, max_leaves: usize, max_nodes: usize) -> Taxonomy {
    let mut t = Taxonomy::new(side, format!("t{}", side.id()));
    t.ensure_concept(&format!("{prefix}0"));
    let mut next = 1;
    loop {
        let leaves: Vec<usize> = (0..t.len()).filter(|&i| t.is_leaf(i)).collect();
        if t.len() >= max_nodes || rng.gen_bool(0.3) {
            break;
        }
        let leaf = leaves[rng.gen_range(0..leaves.len())];
        let room = max_leaves - leaves.len();
        let kids = if room >= 1 && rng.gen_bool(0.8) { 2 } else { 1 };
        if t.len() + kids > max_nodes {
            break;
        }
        let parent = t.name(leaf).to_string();
        let names: Vec<String> = (0..kids).map(|k| format!("{prefix}{}", next + k)).collect();
        next += kids;
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        t.add_children(&parent, &refs);
    }
    t
}

pub fn random_mask<R: Rng>(rng: &mut R) -> RelationMask {
    RelationMask::from_bits(rng.gen_range(1u8..32)).unwrap()
}

/// Small alignment: at most three leaves per tree and four articulations.
pub fn random_small_alignment<R: Rng>(rng: &mut R) -> Alignment {
    let coverage = rng.gen_bool(0.75);
    let max_nodes = if coverage { 5 } else { 3 };
    let t1 = random_tree(rng, Side::First, "A", 3, max_nodes);
    let t2 = random_tree(rng, Side::Second, "B", 3, max_nodes);
    let mut a = Alignment::new(t1, t2);
    a.flags.coverage = coverage;
    let n_arts = rng.gen_range(0..=4);
    for _ in 0..n_arts {
        let l = rng.gen_range(0..a.taxonomies[0].len());
        let r = rng.gen_range(0..a.taxonomies[1].len());
        let left = ConceptRef::new(Side::First, a.taxonomies[0].name(l));
        let right = ConceptRef::new(Side::Second, a.taxonomies[1].name(r));
        // Bias toward informative masks so inconsistency shows up regularly.
        let mask = if rng.gen_bool(0.6) {
            RelationMask::single(BaseRelation::ALL[rng.gen_range(0..5)])
        } else {
            random_mask(rng)
        };
        a.articulate(left, mask, right);
    }
    a
}

/// Same result as [`oracle_worlds`] with plain bit masks, for grids up to 26
/// cells.
pub fn oracle_worlds_wide(a: &Alignment) -> BTreeSet<RelationMap> {
    let g = oracle_grid(a);
    let n = g.cells.len();
    assert!(n <= 26, "oracle grid too large: {n} cells");
    let keys: Vec<&String> = g.extensions.keys().collect();
    let ext: Vec<u32> = g
        .extensions
        .values()
        .map(|e| e.iter().fold(0u32, |m, &i| m | (1 << i)))
        .collect();
    let pos = |k: &str| keys.iter().position(|x| x.as_str() == k).unwrap();
    let arts: Vec<(usize, usize, RelationMask)> = a
        .articulations
        .iter()
        .map(|art| (pos(&art.left.key()), pos(&art.right.key()), art.mask))
        .collect();
    let pairs: Vec<(usize, usize)> = g
        .lefts
        .iter()
        .flat_map(|l| g.rights.iter().map(move |r| (l, r)))
        .map(|(l, r)| (pos(l), pos(r)))
        .collect();
    let mut seen = BTreeSet::new();
    let mut masks = vec![0u32; ext.len()];
    'outer: for bits in 0u32..(1 << n) {
        for (m, e) in masks.iter_mut().zip(&ext) {
            *m = e & bits;
            if *m == 0 {
                continue 'outer;
            }
        }
        for &(l, r, mask) in &arts {
            if !mask.contains(bits_relation(masks[l], masks[r])) {
                continue 'outer;
            }
        }
        let code: Vec<BaseRelation> = pairs.iter().map(|&(l, r)| bits_relation(masks[l], masks[r])).collect();
        seen.insert(code);
    }
    let names: Vec<(String, String)> = g
        .lefts
        .iter()
        .flat_map(|l| g.rights.iter().map(move |r| (l.clone(), r.clone())))
        .collect();
    seen.into_iter()
        .map(|code| {
            names
                .iter()
                .zip(code)
                .map(|((l, r), rel)| (l.clone(), r.clone(), rel))
                .collect()
        })
        .collect()
}
