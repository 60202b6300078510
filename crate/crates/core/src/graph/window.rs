//! Ownership of detectors and edges, and the per-window views.
//!
//! A detector belongs to the earliest `(layer, id)` window whose commit region
//! holds one of the cells around it. A window's view holds the detectors it
//! owns plus later-owned detectors touching its buffer. Edges leaving the view
//! towards an earlier window are dropped (that side is already decoded);
//! edges leaving towards a later window become artificial boundary edges.
//! Each edge is committed by the earliest owner of its endpoints, which
//! partitions the edge set.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{DecodingGraph, EdgeId, NodeId};
use crate::geometry::{Cell, Side, WindowConfig, WindowId};
use crate::matcher::{MatchingGraph, ARTIFICIAL_CLASS};
use crate::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EdgeClass {
    Internal,
    Natural(Side),
    Artificial,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewEdge {
    pub global: EdgeId,
    pub a: u32,
    /// `None` is the (natural or artificial) boundary.
    pub b: Option<u32>,
    pub class: EdgeClass,
    /// This window commits the edge.
    pub commit: bool,
}

#[derive(Clone, Debug)]
pub struct WindowGraph {
    pub window: WindowId,
    pub layer: u8,
    /// Global ids of the view, sorted; the local id is the position.
    pub nodes: Vec<NodeId>,
    pub edges: Vec<ViewEdge>,
    /// Per earlier window, the view detectors its committed edges touch.
    pub seam_nodes: BTreeMap<WindowId, Vec<NodeId>>,
    pub matching: MatchingGraph,
}

impl WindowGraph {
    pub fn local(&self, n: NodeId) -> Option<u32> {
        self.nodes.binary_search(&n).ok().map(|k| k as u32)
    }

    pub fn commit_edges(&self) -> impl Iterator<Item = EdgeId> + '_ {
        self.edges.iter().filter(|e| e.commit).map(|e| e.global)
    }

    pub fn has_rough_boundary(&self) -> bool {
        self.edges.iter().any(|e| e.b.is_none())
    }

    pub fn artificial_edges(&self) -> impl Iterator<Item = &ViewEdge> {
        self.edges.iter().filter(|e| e.class == EdgeClass::Artificial)
    }
}

/// Ownership and views for every window of a config on one graph.
#[derive(Clone, Debug)]
pub struct Partition {
    /// Window index (into `config.windows`) owning each detector.
    pub owner: Vec<u32>,
    /// Window index committing each edge.
    pub committer: Vec<u32>,
    pub windows: Vec<WindowGraph>,
    /// For each detector, the `(window index, local id)` views holding it.
    pub membership: Vec<Vec<(u32, u32)>>,
}

fn corner_cells(col: i32, row: i32) -> [Cell; 4] {
    [
        Cell::new(col - 1, row - 1),
        Cell::new(col, row - 1),
        Cell::new(col - 1, row),
        Cell::new(col, row),
    ]
}

impl Partition {
    pub fn new(graph: &DecodingGraph, config: &WindowConfig) -> Result<Self, Error> {
        let ws = &config.windows;
        let key = |k: usize| (ws[k].layer, ws[k].id);
        let cell_owner = config.cell_owner_map();

        // Spatial ownership is the same in every round.
        let mut owner = Vec::with_capacity(graph.num_nodes());
        let mut touches: Vec<Vec<Cell>> = Vec::with_capacity(graph.num_nodes());
        for n in &graph.nodes {
            let cells: Vec<Cell> =
                corner_cells(n.col, n.row).into_iter().filter(|c| graph.patch.cells.contains(c)).collect();
            let mut best: Option<usize> = None;
            for c in &cells {
                let Some(&k) = cell_owner.get(c) else {
                    return Err(Error::InvalidConfig(format!(
                        "patch cell ({}, {}) is in no commit region",
                        c.x, c.y
                    )));
                };
                if best.is_none_or(|b| key(k) < key(b)) {
                    best = Some(k);
                }
            }
            owner.push(best.expect("every detector touches a patch cell") as u32);
            touches.push(cells);
        }

        let buffers: Vec<BTreeSet<Cell>> = ws.iter().map(|w| config.buffer_cells(w.id)).collect();
        let mut views: Vec<Vec<NodeId>> = vec![Vec::new(); ws.len()];
        for (k, view) in views.iter_mut().enumerate() {
            for (n, &o) in owner.iter().enumerate() {
                let o = o as usize;
                let mine = o == k
                    || (ws[o].layer > ws[k].layer && touches[n].iter().any(|c| buffers[k].contains(c)));
                if mine {
                    view.push(NodeId(n as u32));
                }
            }
        }

        let committer: Vec<u32> = graph
            .edges
            .iter()
            .map(|e| {
                let a = owner[e.a.0 as usize] as usize;
                match e.b {
                    Some(b) => {
                        let b = owner[b.0 as usize] as usize;
                        if key(b) < key(a) { b as u32 } else { a as u32 }
                    }
                    None => a as u32,
                }
            })
            .collect();

        let mut membership = vec![Vec::new(); graph.num_nodes()];
        for (k, view) in views.iter().enumerate() {
            for (l, n) in view.iter().enumerate() {
                membership[n.0 as usize].push((k as u32, l as u32));
            }
        }

        let mut windows = Vec::with_capacity(ws.len());
        for (k, view) in views.iter().enumerate() {
            let local = |n: NodeId| view.binary_search(&n).ok().map(|x| x as u32);
            let mut seen = BTreeSet::new();
            let mut edges = Vec::new();
            for n in view {
                for &eid in graph.incident(*n) {
                    if !seen.insert(eid) {
                        continue;
                    }
                    let e = graph.edge(eid);
                    let commit = committer[eid.0 as usize] as usize == k;
                    let la = local(e.a);
                    let lb = e.b.and_then(local);
                    let ve = match (e.b, la, lb) {
                        (None, Some(a), _) => ViewEdge {
                            global: eid,
                            a,
                            b: None,
                            class: EdgeClass::Natural(e.side.expect("boundary edge has a side")),
                            commit,
                        },
                        (Some(_), Some(a), Some(b)) => ViewEdge { global: eid, a, b: Some(b), class: EdgeClass::Internal, commit },
                        (Some(b), la, lb) => {
                            let (inside, outside) = match (la, lb) {
                                (Some(a), None) => (a, b),
                                (None, Some(bl)) => (bl, e.a),
                                _ => unreachable!("edge touches the view"),
                            };
                            let o = owner[outside.0 as usize] as usize;
                            if ws[o].layer <= ws[k].layer {
                                continue;
                            }
                            ViewEdge { global: eid, a: inside, b: None, class: EdgeClass::Artificial, commit }
                        }
                        (None, None, _) => unreachable!("edge touches the view"),
                    };
                    edges.push(ve);
                }
            }
            edges.sort_by_key(|e| e.global);
            let matching = MatchingGraph::new(
                view.len(),
                edges
                    .iter()
                    .map(|e| {
                        let class = match e.class {
                            EdgeClass::Natural(s) => s as u8,
                            EdgeClass::Artificial => ARTIFICIAL_CLASS,
                            EdgeClass::Internal => 0,
                        };
                        (e.a, e.b, graph.edge(e.global).weight, class)
                    })
                    .collect(),
            );
            windows.push(WindowGraph {
                window: ws[k].id,
                layer: ws[k].layer,
                nodes: view.clone(),
                edges,
                seam_nodes: BTreeMap::new(),
                matching,
            });
        }

        // Every edge must be visible to the window committing it.
        for (eid, &c) in committer.iter().enumerate() {
            if windows[c as usize].edges.binary_search_by_key(&EdgeId(eid as u32), |e| e.global).is_err() {
                return Err(Error::InvalidConfig(format!(
                    "edge {eid} is committed by window {} but lies outside its view; \
                     same-layer windows probably touch",
                    ws[c as usize].id
                )));
            }
        }

        let mut seams: Vec<BTreeMap<WindowId, BTreeSet<NodeId>>> = vec![BTreeMap::new(); ws.len()];
        for (eid, e) in graph.edges.iter().enumerate() {
            let y = committer[eid] as usize;
            for n in std::iter::once(e.a).chain(e.b) {
                for &(x, _) in &membership[n.0 as usize] {
                    if ws[x as usize].layer > ws[y].layer {
                        seams[x as usize].entry(ws[y].id).or_default().insert(n);
                    }
                }
            }
        }
        for (w, s) in windows.iter_mut().zip(seams) {
            w.seam_nodes = s.into_iter().map(|(k, v)| (k, v.into_iter().collect())).collect();
        }

        Ok(Partition { owner, committer, windows, membership })
    }
}

/// The view of one window.
pub fn extract_window(graph: &DecodingGraph, config: &WindowConfig, id: WindowId) -> Result<WindowGraph, Error> {
    let k = config.windows.iter().position(|w| w.id == id).ok_or(Error::UnknownWindow(id.0))?;
    let mut p = Partition::new(graph, config)?;
    Ok(p.windows.swap_remove(k))
}
