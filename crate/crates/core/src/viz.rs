//! Reduced containment graphs and world-distance networks as DOT text.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::analysis::{distance_matrix, AnalysisError};
use crate::bitset::CellSet;
use crate::engine::{build_grid, witness_indices, EngineError};
use crate::model::{Alignment, ConceptRef, Side, World};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Merged,
    UniqueFirst,
    UniqueSecond,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Input,
    Inferred,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RcgNode {
    pub id: String,
    /// Sorted concept keys.
    pub members: Vec<ConceptRef>,
    pub kind: NodeKind,
}

/// `from` properly contains `to`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RcgEdge {
    pub from: usize,
    pub to: usize,
    pub kind: EdgeKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rcg {
    pub world: usize,
    pub nodes: Vec<RcgNode>,
    pub edges: Vec<RcgEdge>,
}

impl Rcg {
    pub fn node_of(&self, c: &ConceptRef) -> Option<usize> {
        self.nodes.iter().position(|n| n.members.contains(c))
    }
}

/// Groups concepts by their extension under the world's witness and links
/// the groups by proper inclusion, transitively reduced.
pub fn build_rcg(w: &World, a: &Alignment) -> Result<Rcg, EngineError> {
    let grid = build_grid(a)?;
    let mut live = CellSet::empty(grid.len());
    for i in witness_indices(&grid, &w.witness)? {
        live.insert(i);
    }
    let mut groups: BTreeMap<CellSet, Vec<ConceptRef>> = BTreeMap::new();
    for side in [Side::First, Side::Second] {
        for c in grid.concepts(side) {
            let mut ext = CellSet::empty(grid.len());
            for i in grid.extension(c).unwrap_or_default() {
                ext.insert(i);
            }
            groups.entry(ext.and(&live)).or_default().push(c.clone());
        }
    }
    let mut grouped: Vec<(CellSet, Vec<ConceptRef>)> = groups
        .into_iter()
        .map(|(ext, mut members)| {
            members.sort_by_key(ConceptRef::key);
            (ext, members)
        })
        .collect();
    grouped.sort_by_key(|(_, m)| node_id(m));

    let n = grouped.len();
    // contains[i][j]: group i properly contains group j.
    let contains: Vec<Vec<bool>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| i != j && grouped[j].0.and_not(&grouped[i].0).is_empty())
                .collect()
        })
        .collect();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if contains[i][j] && !(0..n).any(|k| contains[i][k] && contains[k][j]) {
                let kind = if is_tree_edge(a, &grouped[i].1, &grouped[j].1) {
                    EdgeKind::Input
                } else {
                    EdgeKind::Inferred
                };
                edges.push(RcgEdge { from: i, to: j, kind });
            }
        }
    }
    let nodes = grouped
        .into_iter()
        .map(|(_, members)| {
            let first = members.iter().any(|m| m.side == Side::First);
            let second = members.iter().any(|m| m.side == Side::Second);
            let kind = match (first, second) {
                (true, true) => NodeKind::Merged,
                (true, false) => NodeKind::UniqueFirst,
                _ => NodeKind::UniqueSecond,
            };
            RcgNode {
                id: node_id(&members),
                members,
                kind,
            }
        })
        .collect();
    Ok(Rcg {
        world: w.id,
        nodes,
        edges,
    })
}

fn node_id(members: &[ConceptRef]) -> String {
    members.iter().map(ConceptRef::key).collect::<Vec<_>>().join("=")
}

fn is_tree_edge(a: &Alignment, container: &[ConceptRef], contained: &[ConceptRef]) -> bool {
    contained.iter().any(|c| {
        let t = a.taxonomy(c.side);
        let parent = t.index_of(&c.name).and_then(|i| t.parent(i));
        parent.is_some_and(|p| container.iter().any(|x| x.side == c.side && x.name == t.name(p)))
    })
}

/// Shapes and colors; the default follows the usual legend.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RcgStyle {
    pub merged: (String, String),
    pub unique_first: (String, String),
    pub unique_second: (String, String),
    pub input_edge: String,
    pub inferred_edge: String,
}

impl Default for RcgStyle {
    fn default() -> Self {
        RcgStyle {
            merged: ("box".into(), "grey".into()),
            unique_first: ("diamond".into(), "green".into()),
            unique_second: ("octagon".into(), "yellow".into()),
            input_edge: "black".into(),
            inferred_edge: "red".into(),
        }
    }
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

pub fn rcg_to_dot(r: &Rcg) -> String {
    rcg_to_dot_styled(r, &RcgStyle::default())
}

pub fn rcg_to_dot_styled(r: &Rcg, style: &RcgStyle) -> String {
    let mut out = format!("digraph world_{} {{\n  node [style=filled];\n", r.world);
    for n in &r.nodes {
        let (shape, color) = match n.kind {
            NodeKind::Merged => &style.merged,
            NodeKind::UniqueFirst => &style.unique_first,
            NodeKind::UniqueSecond => &style.unique_second,
        };
        let _ = writeln!(out, "  {} [shape={}, fillcolor={}];", quote(&n.id), quote(shape), quote(color));
    }
    for e in &r.edges {
        let color = match e.kind {
            EdgeKind::Input => &style.input_edge,
            EdgeKind::Inferred => &style.inferred_edge,
        };
        let _ = writeln!(
            out,
            "  {} -> {} [color={}];",
            quote(&r.nodes[e.from].id),
            quote(&r.nodes[e.to].id),
            quote(color)
        );
    }
    out.push_str("}\n");
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterArtifacts {
    pub matrix_csv: String,
    pub dot: String,
}

/// Minimum spanning tree plus every edge of minimal nonzero distance.
pub fn cluster_edges(distances: &[Vec<usize>]) -> Vec<(usize, usize, usize)> {
    let n = distances.len();
    let mut all: Vec<(usize, usize, usize)> = Vec::new();
    for (i, row) in distances.iter().enumerate() {
        for (j, &d) in row.iter().enumerate().skip(i + 1) {
            all.push((d, i, j));
        }
    }
    all.sort();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut chosen = BTreeSet::new();
    for &(d, i, j) in &all {
        let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
        if ri != rj {
            parent[ri] = rj;
            chosen.insert((i, j, d));
        }
    }
    if let Some(min) = all.iter().map(|e| e.0).filter(|d| *d > 0).min() {
        for &(d, i, j) in &all {
            if d == min {
                chosen.insert((i, j, d));
            }
        }
    }
    chosen.into_iter().collect()
}

pub fn cluster_to_dot(ids: &[usize], distances: &[Vec<usize>]) -> ClusterArtifacts {
    let mut csv = String::from("world");
    for id in ids {
        let _ = write!(csv, ",w{id}");
    }
    csv.push('\n');
    for (i, id) in ids.iter().enumerate() {
        let _ = write!(csv, "w{id}");
        for d in &distances[i] {
            let _ = write!(csv, ",{d}");
        }
        csv.push('\n');
    }
    let mut dot = String::from("graph worlds {\n  node [shape=circle];\n");
    for id in ids {
        let _ = writeln!(dot, "  \"w{id}\";");
    }
    for (i, j, d) in cluster_edges(distances) {
        let _ = writeln!(dot, "  \"w{}\" -- \"w{}\" [label=\"{d}\"];", ids[i], ids[j]);
    }
    dot.push_str("}\n");
    ClusterArtifacts { matrix_csv: csv, dot }
}

pub fn cluster_worlds(worlds: &[World]) -> Result<ClusterArtifacts, AnalysisError> {
    if worlds.is_empty() {
        return Err(AnalysisError::NoWorlds);
    }
    let d = distance_matrix(worlds)?;
    let ids: Vec<usize> = worlds.iter().map(|w| w.id).collect();
    Ok(cluster_to_dot(&ids, &d))
}
