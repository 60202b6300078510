//! Error strings that fool a two-window decoder but not the global one.
//!
//! Geometry: window A (layer 1) of width `a` commits first, window B of
//! width `b` sits to its right, both of height `h`. A's view reaches `w`
//! columns into B and ends in an artificial boundary one column further, so
//! A sees the seam-side boundary at distance `a + w + 1 - col`.

use serde::{Deserialize, Serialize};

use super::{min_confusable_l, wrong_matching_weight};
use crate::geometry::{linear_scenario, GraphType, MergeScenario};
use crate::graph::{build_graph, DecodingGraph, EdgeId, NodeCoord};
use crate::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseKind {
    /// Diagonal string on the X graph; flips the short-edge cut.
    Short,
    /// Horizontal zigzag on the Z graph; flips the long-edge cut.
    Long,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCase {
    pub kind: CaseKind,
    pub a: u32,
    pub b: u32,
    pub height: u32,
    pub w: u32,
    /// String length in edges.
    pub l: u32,
    /// What A pays for the wrong matching.
    pub wrong_weight: u32,
    /// Detector corners `(col, row)` along the string, left end first.
    pub path: Vec<(i32, i32)>,
    pub graph_type: GraphType,
    pub cut: String,
}

const CASE_P: f64 = 0.01;

impl ConfusionCase {
    pub fn left_end(&self) -> (i32, i32) {
        self.path[0]
    }

    pub fn right_end(&self) -> (i32, i32) {
        *self.path.last().expect("non-empty path")
    }

    /// The single-round scenario and graph the string lives in.
    pub fn build(&self) -> Result<(MergeScenario, DecodingGraph), Error> {
        let s = linear_scenario(self.a, self.b, self.height, self.w, 1)?;
        let g = build_graph(&s.patch, &s.cuts, self.graph_type, 1, CASE_P)?;
        Ok((s, g))
    }

    pub fn error_edges(&self, g: &DecodingGraph) -> Result<Vec<EdgeId>, Error> {
        let node = |(col, row): (i32, i32)| {
            g.node_id(NodeCoord { col, row, round: 0 })
                .ok_or_else(|| Error::InvalidConfig(format!("no detector at ({col}, {row})")))
        };
        let mut out = Vec::new();
        for pair in self.path.windows(2) {
            let (u, v) = (node(pair[0])?, node(pair[1])?);
            out.push(g.find_edge(u, Some(v)).ok_or_else(|| Error::InvalidConfig("string leaves the graph".into()))?);
        }
        out.sort_unstable();
        Ok(out)
    }
}

/// Cheapest confusion string on the `d x d` two-window layout, or
/// `Infeasible` if the buffer is too wide for one to exist.
pub fn generate_confusion_string(d: u32, w: u32, kind: CaseKind) -> Result<ConfusionCase, Error> {
    if d < 3 || w > d {
        return Err(Error::InvalidConfig(format!("need d >= 3 and w <= d, got d={d} w={w}")));
    }
    match kind {
        CaseKind::Short => short_case(d, w),
        CaseKind::Long => generate_long_edge_case(d, d, d, w),
    }
}

fn short_case(d: u32, w: u32) -> Result<ConfusionCase, Error> {
    let l = min_confusable_l(d, w).ok_or(Error::Infeasible { d, w })?;
    let (di, wi, li) = (d as i32, w as i32, l as i32);
    // Left end in A, as deep as the buffer allows; the right end lands on
    // the artificial boundary's side of A's view or beyond it.
    let il = di.min(di + wi + 1 - li);
    // Left end `(d+1)/2 - l` rows from its nearest boundary. Going up-right
    // from below the middle, or down-right from above it; only one of the
    // two has the X-graph parity.
    let down = (di - 1) / 2 + li;
    let up = (di + 1) / 2 - li;
    let (jl, step) = if (il + down).rem_euclid(2) == 0 { (down, -1) } else { (up, 1) };
    let path = (0..=li).map(|s| (il + s, jl + step * s)).collect();
    Ok(ConfusionCase {
        kind: CaseKind::Short,
        a: d,
        b: d,
        height: d,
        w,
        l,
        wrong_weight: wrong_matching_weight(d, w, l),
        path,
        graph_type: GraphType::X,
        cut: "short".into(),
    })
}

/// Long-edge string for windows of widths `a`, `b` and height `h`. A's graph
/// spans `a + w + 1` edges between its boundaries, so a string of half that
/// ending in the buffer costs A no more to mis-match than to pair.
pub fn generate_long_edge_case(a: u32, b: u32, h: u32, w: u32) -> Result<ConfusionCase, Error> {
    if h < 2 || a == 0 || w > b {
        return Err(Error::InvalidConfig("bad long-edge layout".into()));
    }
    let span = a + w + 1;
    let l = span.div_ceil(2);
    let ir = if w >= 1 { (a + w) as i32 } else { a as i32 + 1 };
    let il = ir - l as i32;
    // The global decoder must prefer pairing: l < a + b - l.
    if il < 1 || il > a as i32 || 2 * l >= a + b {
        return Err(Error::Infeasible { d: a, w });
    }
    let j0 = (h as i32) / 2;
    let j0 = if (il + j0).rem_euclid(2) == 1 { j0 } else { j0 - 1 };
    let path = (0..=l as i32).map(|s| (il + s, j0 + s % 2)).collect();
    Ok(ConfusionCase {
        kind: CaseKind::Long,
        a,
        b,
        height: h,
        w,
        l,
        wrong_weight: span - l,
        path,
        graph_type: GraphType::Z,
        cut: "long".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn short_case_examples() {
        let c = generate_confusion_string(15, 9, CaseKind::Short).unwrap();
        assert_eq!((c.l, c.wrong_weight), (6, 6));
        assert_eq!(c.left_end(), (15, 13));
        assert_eq!(c.right_end(), (21, 7));
        let c = generate_confusion_string(15, 3, CaseKind::Short).unwrap();
        assert_eq!((c.l, c.wrong_weight), (4, 4));
        assert!(matches!(
            generate_confusion_string(15, 13, CaseKind::Short),
            Err(Error::Infeasible { d: 15, w: 13 })
        ));
    }

    #[test]
    fn long_case_example() {
        let c = generate_long_edge_case(6, 7, 7, 2).unwrap();
        assert_eq!((c.l, c.wrong_weight), (5, 4));
        assert_eq!(c.right_end().0, 8);
    }

    #[test]
    fn strings_are_graph_paths() {
        for d in [3u32, 5, 7, 9, 15] {
            for w in 0..d {
                for kind in [CaseKind::Short, CaseKind::Long] {
                    let Ok(c) = generate_confusion_string(d, w, kind) else { continue };
                    let (_, g) = c.build().unwrap();
                    assert_eq!(c.error_edges(&g).unwrap().len() as u32, c.l, "{c:?}");
                }
            }
        }
    }

    #[test]
    fn wrong_weight_matches_view_distances() {
        // The wrong matching's cost measured on A's actual view.
        use crate::graph::Partition;
        for d in [5u32, 7, 9, 11] {
            for w in 0..d - 2 {
                let c = generate_confusion_string(d, w, CaseKind::Short).unwrap();
                let (s, g) = c.build().unwrap();
                let p = Partition::new(&g, &s.config).unwrap();
                let a = &p.windows[0];
                let m = &a.matching;
                let id = |(col, row)| g.node_id(NodeCoord { col, row, round: 0 }).unwrap();
                let left = a.local(id(c.left_end())).unwrap();
                let near = m.boundary_distance(left).unwrap() / g.edges[0].weight as u64;
                let far = match a.local(id(c.right_end())) {
                    Some(r) => m.boundary_distance(r).unwrap() / g.edges[0].weight as u64,
                    None => 0,
                };
                assert_eq!((near + far) as u32, c.wrong_weight, "d={d} w={w}");
            }
        }
    }
}
