//! Decoding graphs of a rotated patch and their window views.
//!
//! Detectors sit on cell corners `(col, row)`; the X graph takes those with
//! `col + row` even, the Z graph the odd ones. Each data qubit in each round
//! is one edge along the cell diagonal joining its two same-type corners, and
//! each detector is joined to itself one round later by a time edge. Corners
//! missing from the patch collapse into a single virtual boundary node.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::geometry::{BoundaryLabel, Cell, CutAxis, GraphType, LogicalCut, PatchShape, Side};
use crate::matcher::MatchingGraph;
use crate::Error;

mod window;

pub use window::{EdgeClass, Partition, ViewEdge, WindowGraph, extract_window};

/// Weights are `-ln(p/(1-p))` in units of `1/WEIGHT_SCALE`.
pub const WEIGHT_SCALE: f64 = 1000.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeCoord {
    pub col: i32,
    pub row: i32,
    pub round: u32,
}

impl fmt::Display for NodeCoord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.col, self.row, self.round)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EdgeId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    Space,
    Time,
    Boundary,
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EdgeKind::Space => "space",
            EdgeKind::Time => "time",
            EdgeKind::Boundary => "boundary",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub a: NodeId,
    /// `None` is the virtual boundary.
    pub b: Option<NodeId>,
    pub kind: EdgeKind,
    pub weight: u32,
    pub prob: f64,
    /// Data qubit of space and boundary edges.
    pub qubit: Option<Cell>,
    pub round: u32,
    /// Patch side crossed by a boundary edge.
    pub side: Option<Side>,
}

#[derive(Clone, Debug)]
pub struct CutEdges {
    pub cut: LogicalCut,
    pub edges: Vec<EdgeId>,
}

#[derive(Clone, Debug)]
pub struct DecodingGraph {
    pub graph_type: GraphType,
    pub rounds: u32,
    pub p: f64,
    pub nodes: Vec<NodeCoord>,
    pub edges: Vec<GraphEdge>,
    pub cuts: Vec<CutEdges>,
    pub patch: PatchShape,
    index: HashMap<NodeCoord, NodeId>,
    adjacency: Vec<Vec<EdgeId>>,
    cut_mask: Vec<u32>,
    matching: OnceLock<MatchingGraph>,
}

pub fn uniform_weight(p: f64) -> u32 {
    ((WEIGHT_SCALE * ((1.0 - p) / p).ln()).round() as i64).max(1) as u32
}

/// Whether a corner point of `patch` is a detector of graph `g`.
fn corner_exists(patch: &PatchShape, g: GraphType, i: i32, j: i32) -> bool {
    let Some((x0, y0, x1, y1)) = patch.bounds() else { return false };
    if (i + j).rem_euclid(2) != g.parity() || i < x0 || i > x1 + 1 || j < y0 || j > y1 + 1 {
        return false;
    }
    let smooth = |side: Side, pos: i32| {
        patch.labels.label_at(side, pos).map(|l| g.sees(l)) == Some(BoundaryLabel::Smooth)
    };
    let on_top = j == y0;
    let on_bottom = j == y1 + 1;
    let on_left = i == x0;
    let on_right = i == x1 + 1;
    let mut ok = true;
    let mut edges = 0;
    if on_top {
        ok &= smooth(Side::Top, (i - 1).max(x0));
        edges += 1;
    }
    if on_bottom {
        ok &= smooth(Side::Bottom, (i - 1).max(x0));
        edges += 1;
    }
    if on_left {
        ok &= smooth(Side::Left, (j - 1).max(y0));
        edges += 1;
    }
    if on_right {
        ok &= smooth(Side::Right, (j - 1).max(y0));
        edges += 1;
    }
    // Corners exist only where both sides are smooth.
    edges == 0 || ok
}

fn missing_side(patch: &PatchShape, g: GraphType, i: i32, j: i32) -> Side {
    let (x0, y0, x1, y1) = patch.bounds().expect("non-empty patch");
    let rough = |side: Side, pos: i32| {
        patch.labels.label_at(side, pos).map(|l| g.sees(l)) == Some(BoundaryLabel::Rough)
    };
    let candidates = [
        (j == y0, Side::Top, i - 1),
        (j == y1 + 1, Side::Bottom, i - 1),
        (i == x0, Side::Left, j - 1),
        (i == x1 + 1, Side::Right, j - 1),
    ];
    candidates
        .iter()
        .find(|(on, side, pos)| *on && rough(*side, *pos))
        .or_else(|| candidates.iter().find(|c| c.0))
        .map(|c| c.1)
        .expect("missing corner lies on a side")
}

/// The two corners of cell `c` forming the diagonal seen by graph `g`.
pub fn cell_diagonal(c: Cell, g: GraphType) -> ((i32, i32), (i32, i32)) {
    if (c.x + c.y).rem_euclid(2) == g.parity() {
        ((c.x, c.y), (c.x + 1, c.y + 1))
    } else {
        ((c.x + 1, c.y), (c.x, c.y + 1))
    }
}

/// Builds the `rounds`-round decoding graph of a rectangular patch with
/// uniform edge probability `p`. Cuts of the other graph type are ignored.
pub fn build_graph(
    patch: &PatchShape,
    cuts: &[LogicalCut],
    graph_type: GraphType,
    rounds: u32,
    p: f64,
) -> Result<DecodingGraph, Error> {
    if !(p > 0.0 && p < 0.5) {
        return Err(Error::InvalidConfig(format!("edge probability {p} outside (0, 0.5)")));
    }
    if rounds == 0 {
        return Err(Error::InvalidConfig("zero rounds".into()));
    }
    if !patch.is_rectangular() {
        return Err(Error::InvalidConfig("decoding graphs need a rectangular patch".into()));
    }
    let (x0, y0, x1, y1) = patch.bounds().expect("rectangular patch is non-empty");

    for cut in cuts.iter().filter(|c| c.graph_type == graph_type) {
        let (ends, range) = match cut.axis {
            CutAxis::Horizontal => ([Side::Left, Side::Right], y0..=y1),
            CutAxis::Vertical => ([Side::Top, Side::Bottom], x0..=x1),
        };
        if !range.contains(&cut.offset) {
            return Err(Error::InvalidConfig(format!("cut {} lies outside the patch", cut.label)));
        }
        for side in ends {
            let label = patch.labels.label_at(side, cut.offset).map(|l| graph_type.sees(l));
            if label != Some(BoundaryLabel::Smooth) {
                return Err(Error::InconsistentBoundaryLabels(format!(
                    "cut {} ends on a {:?} side that is not smooth for the {graph_type} graph",
                    cut.label, side
                )));
            }
        }
    }

    let mut plaquettes = Vec::new();
    for i in x0..=x1 + 1 {
        for j in y0..=y1 + 1 {
            if corner_exists(patch, graph_type, i, j) {
                plaquettes.push((i, j));
            }
        }
    }
    // Ids sorted by (col, row, round).
    let mut nodes = Vec::with_capacity(plaquettes.len() * rounds as usize);
    for &(i, j) in &plaquettes {
        for t in 0..rounds {
            nodes.push(NodeCoord { col: i, row: j, round: t });
        }
    }
    let index: HashMap<NodeCoord, NodeId> =
        nodes.iter().enumerate().map(|(k, &c)| (c, NodeId(k as u32))).collect();

    let weight = uniform_weight(p);
    let mut edges = Vec::new();
    for t in 0..rounds {
        for c in &patch.cells {
            let ((ai, aj), (bi, bj)) = cell_diagonal(*c, graph_type);
            let na = index.get(&NodeCoord { col: ai, row: aj, round: t }).copied();
            let nb = index.get(&NodeCoord { col: bi, row: bj, round: t }).copied();
            let (a, b, kind, side) = match (na, nb) {
                (Some(a), Some(b)) => (a.min(b), Some(a.max(b)), EdgeKind::Space, None),
                (Some(a), None) => (a, None, EdgeKind::Boundary, Some(missing_side(patch, graph_type, bi, bj))),
                (None, Some(b)) => (b, None, EdgeKind::Boundary, Some(missing_side(patch, graph_type, ai, aj))),
                (None, None) => continue,
            };
            edges.push(GraphEdge { a, b, kind, weight, prob: p, qubit: Some(*c), round: t, side });
        }
    }
    for &(i, j) in &plaquettes {
        for t in 0..rounds.saturating_sub(1) {
            let a = index[&NodeCoord { col: i, row: j, round: t }];
            let b = index[&NodeCoord { col: i, row: j, round: t + 1 }];
            edges.push(GraphEdge { a, b: Some(b), kind: EdgeKind::Time, weight, prob: p, qubit: None, round: t, side: None });
        }
    }

    let mut adjacency = vec![Vec::new(); nodes.len()];
    for (k, e) in edges.iter().enumerate() {
        adjacency[e.a.0 as usize].push(EdgeId(k as u32));
        if let Some(b) = e.b {
            adjacency[b.0 as usize].push(EdgeId(k as u32));
        }
    }
    for (n, list) in adjacency.iter_mut().enumerate() {
        list.sort_by_key(|&e| {
            let e = &edges[e.0 as usize];
            let other = if e.a.0 as usize == n { e.b } else { Some(e.a) };
            other.map_or(u32::MAX, |o| o.0)
        });
    }

    let mut cut_edges = Vec::new();
    let mut cut_mask = vec![0u32; edges.len()];
    for cut in cuts.iter().filter(|c| c.graph_type == graph_type) {
        let bit = cut_edges.len();
        if bit >= 32 {
            return Err(Error::InvalidConfig("at most 32 cuts per graph".into()));
        }
        let members: Vec<EdgeId> = edges
            .iter()
            .enumerate()
            .filter(|(_, e)| {
                e.qubit.is_some_and(|q| match cut.axis {
                    CutAxis::Horizontal => q.y == cut.offset,
                    CutAxis::Vertical => q.x == cut.offset,
                })
            })
            .map(|(k, _)| EdgeId(k as u32))
            .collect();
        for e in &members {
            cut_mask[e.0 as usize] |= 1 << bit;
        }
        cut_edges.push(CutEdges { cut: cut.clone(), edges: members });
    }

    Ok(DecodingGraph {
        graph_type,
        rounds,
        p,
        nodes,
        edges,
        cuts: cut_edges,
        patch: patch.clone(),
        index,
        adjacency,
        cut_mask,
        matching: OnceLock::new(),
    })
}

impl DecodingGraph {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn node(&self, id: NodeId) -> NodeCoord {
        self.nodes[id.0 as usize]
    }

    pub fn node_id(&self, c: NodeCoord) -> Option<NodeId> {
        self.index.get(&c).copied()
    }

    pub fn edge(&self, id: EdgeId) -> &GraphEdge {
        &self.edges[id.0 as usize]
    }

    /// Incident edges, ordered by the other endpoint with the boundary last.
    pub fn incident(&self, n: NodeId) -> &[EdgeId] {
        &self.adjacency[n.0 as usize]
    }

    pub fn find_edge(&self, a: NodeId, b: Option<NodeId>) -> Option<EdgeId> {
        self.incident(a).iter().copied().find(|&e| {
            let e = self.edge(e);
            match b {
                Some(b) => (e.a == a && e.b == Some(b)) || (e.a == b && e.b == Some(a)),
                None => e.b.is_none(),
            }
        })
    }

    /// Bit `k` set if the edge belongs to `self.cuts[k]`.
    pub fn cut_mask(&self, e: EdgeId) -> u32 {
        self.cut_mask[e.0 as usize]
    }

    pub fn cut_index(&self, label: &str) -> Option<usize> {
        self.cuts.iter().position(|c| c.cut.label == label)
    }

    /// Nodes with odd incidence in the edge multiset.
    pub fn syndrome_of(&self, edges: &[EdgeId]) -> Vec<bool> {
        let mut s = vec![false; self.nodes.len()];
        for &e in edges {
            let e = self.edge(e);
            s[e.a.0 as usize] ^= true;
            if let Some(b) = e.b {
                s[b.0 as usize] ^= true;
            }
        }
        s
    }

    /// Parity of each cut over the edge multiset, as a bitmask.
    pub fn cut_parity(&self, edges: &[EdgeId]) -> u32 {
        edges.iter().fold(0, |m, &e| m ^ self.cut_mask(e))
    }

    /// The whole graph as one matching view, built once.
    pub fn matching_graph_cached(&self) -> &MatchingGraph {
        self.matching.get_or_init(|| self.matching_graph())
    }

    pub fn matching_graph(&self) -> MatchingGraph {
        MatchingGraph::new(
            self.nodes.len(),
            self.edges
                .iter()
                .map(|e| (e.a.0, e.b.map(|b| b.0), e.weight, e.side.map_or(0, |s| s as u8)))
                .collect(),
        )
    }

    /// One line per edge: `u v weight kind`, nodes written `col,row,round`
    /// and the boundary as `B`.
    pub fn write_text(&self, out: &mut impl Write) -> std::io::Result<()> {
        for e in &self.edges {
            let b = e.b.map_or_else(|| "B".to_string(), |b| self.node(b).to_string());
            writeln!(out, "{} {} {} {}", self.node(e.a), b, e.weight, e.kind)?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut v = Vec::new();
        self.write_text(&mut v).expect("write to Vec");
        String::from_utf8(v).expect("ascii")
    }
}

/// Parses the text dump back into `(u, v, weight, kind)` rows. Lines
/// starting with `#` are comments.
pub fn parse_text(s: &str) -> Result<Vec<(NodeCoord, Option<NodeCoord>, u32, EdgeKind)>, Error> {
    let bad = |line: &str| Error::InvalidConfig(format!("bad graph line: {line}"));
    let node = |t: &str| -> Option<NodeCoord> {
        let mut it = t.split(',');
        let c = NodeCoord {
            col: it.next()?.parse().ok()?,
            row: it.next()?.parse().ok()?,
            round: it.next()?.parse().ok()?,
        };
        it.next().is_none().then_some(c)
    };
    s.lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|line| {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 4 {
                return Err(bad(line));
            }
            let u = node(f[0]).ok_or_else(|| bad(line))?;
            let v = if f[1] == "B" { None } else { Some(node(f[1]).ok_or_else(|| bad(line))?) };
            let w = f[2].parse().map_err(|_| bad(line))?;
            let kind = match f[3] {
                "space" => EdgeKind::Space,
                "time" => EdgeKind::Time,
                "boundary" => EdgeKind::Boundary,
                _ => return Err(bad(line)),
            };
            Ok((u, v, w, kind))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{rect_scenario, BoundaryLabel, PatchShape};

    fn rect_graph(w: i32, h: i32, g: GraphType, rounds: u32) -> DecodingGraph {
        build_graph(&PatchShape::rect(0, 0, w, h, BoundaryLabel::Rough), &[], g, rounds, 0.01).unwrap()
    }

    #[test]
    fn square_patch_has_half_the_plaquettes() {
        for d in [3, 5, 7, 9] {
            for g in [GraphType::X, GraphType::Z] {
                let gr = rect_graph(d, d, g, 1);
                assert_eq!(gr.num_nodes() as i32, (d * d - 1) / 2, "d={d} {g}");
                assert_eq!(gr.num_edges() as i32, d * d);
            }
        }
    }

    #[test]
    fn rect_30_by_15() {
        let g = rect_graph(30, 15, GraphType::X, 1);
        assert_eq!(g.num_nodes(), 217);
        assert_eq!(g.num_edges(), 450);
    }

    #[test]
    fn rounds_add_time_edges() {
        let g = rect_graph(5, 5, GraphType::X, 4);
        assert_eq!(g.num_nodes(), 12 * 4);
        assert_eq!(g.num_edges(), 25 * 4 + 12 * 3);
    }

    #[test]
    fn every_node_has_even_degree_except_at_boundary() {
        let g = rect_graph(7, 5, GraphType::Z, 2);
        for n in 0..g.num_nodes() {
            let deg = g.incident(NodeId(n as u32)).len();
            assert!((2..=6).contains(&deg));
        }
    }

    #[test]
    fn boundary_sides_follow_labels() {
        let g = rect_graph(5, 5, GraphType::X, 1);
        for e in &g.edges {
            if let Some(s) = e.side {
                assert!(matches!(s, Side::Top | Side::Bottom), "{e:?}");
            }
        }
        let g = rect_graph(5, 5, GraphType::Z, 1);
        for e in &g.edges {
            if let Some(s) = e.side {
                assert!(matches!(s, Side::Left | Side::Right), "{e:?}");
            }
        }
    }

    #[test]
    fn cut_with_wrong_ends_rejected() {
        let s = rect_scenario(5, 2, 5).unwrap();
        let mut cuts = s.cuts.clone();
        cuts[0].graph_type = GraphType::Z;
        let e = build_graph(&s.patch, &cuts, GraphType::Z, 1, 0.01).unwrap_err();
        assert!(matches!(e, Error::InconsistentBoundaryLabels(_)));
    }

    #[test]
    fn text_dump_round_trips() {
        let s = rect_scenario(3, 1, 3).unwrap();
        let g = build_graph(&s.patch, &s.cuts, GraphType::X, 2, 0.01).unwrap();
        let rows = parse_text(&g.to_text()).unwrap();
        assert_eq!(rows.len(), g.num_edges());
        for (e, (u, v, w, k)) in g.edges.iter().zip(rows) {
            assert_eq!(g.node(e.a), u);
            assert_eq!(e.b.map(|b| g.node(b)), v);
            assert_eq!((e.weight, e.kind), (w, k));
        }
    }

    #[test]
    fn stabilisers_commute_with_cuts() {
        // Every face (a detector of the other type) meets each cut evenly.
        let s = rect_scenario(5, 2, 5).unwrap();
        for g in [GraphType::X, GraphType::Z] {
            let gr = build_graph(&s.patch, &s.cuts, g, 1, 0.01).unwrap();
            let other = if g == GraphType::X { GraphType::Z } else { GraphType::X };
            let dual = build_graph(&s.patch, &[], other, 1, 0.01).unwrap();
            for n in &dual.nodes {
                let cells: Vec<Cell> = [(-1, -1), (0, -1), (-1, 0), (0, 0)]
                    .iter()
                    .map(|(dx, dy)| Cell::new(n.col + dx, n.row + dy))
                    .filter(|c| s.patch.cells.contains(c))
                    .collect();
                let face: Vec<EdgeId> = cells
                    .iter()
                    .map(|c| EdgeId(gr.edges.iter().position(|e| e.qubit == Some(*c)).unwrap() as u32))
                    .collect();
                assert_eq!(gr.cut_parity(&face), 0, "{g} face {n}");
            }
        }
    }
}
