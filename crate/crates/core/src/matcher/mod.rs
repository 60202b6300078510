//! Minimum-weight perfect matching of defects against a decoding view.
//!
//! Distances come from a per-view table (BFS when weights are uniform).
//! Defect pairs that are no closer to each other than both are to the
//! boundary are pruned, and the boundary is modelled by one twin per defect
//! (twins pair among themselves at zero cost), so graphs stay sparse.

use std::fmt;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{DecodingGraph, EdgeId, NodeId, WindowGraph};

pub mod blossom;
mod brute;

pub use brute::{brute_force_decode, BRUTE_FORCE_MAX_DEFECTS};

/// Boundary classes 0..=3 are the patch sides, in [`crate::geometry::Side`]
/// order; this one marks artificial (window seam) boundaries.
pub const ARTIFICIAL_CLASS: u8 = 4;
pub const NUM_CLASSES: usize = 5;

/// Co-minimal solutions are enumerated up to this many defects.
pub const ENUMERATE_MAX_DEFECTS: usize = 8;
const ENUMERATE_MAX_SOLUTIONS: usize = 4096;
/// Views up to this many nodes keep an all-pairs distance table.
const DENSE_TABLE_MAX_NODES: usize = 4096;

const INF: u64 = u64::MAX / 4;
const NONE: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum TieRule {
    /// Whatever the blossom returns; reproducible but not a lexicographic
    /// minimum.
    #[default]
    Deterministic,
    /// Uniform among co-minimal solutions.
    SeededRandom(u64),
    /// The k-th co-minimal solution in canonical order, modulo their count.
    Branch(u32),
}

/// Which tie option was used, when ties were enumerated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub struct TieToken {
    pub index: u32,
    /// Number of co-minimal solutions; 0 if not enumerated.
    pub count: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct CorrectionSet {
    pub edges: Vec<EdgeId>,
    pub weight: u64,
    pub tie_break_token: TieToken,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    LoneDefect,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeFailure {
    pub kind: FailureKind,
    /// The defect left over.
    pub witness: NodeId,
}

impl fmt::Display for DecodeFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "lone defect at node {} with no boundary to absorb it", self.witness.0)
    }
}

impl std::error::Error for DecodeFailure {}

#[derive(Clone, Copy, Debug)]
struct MEdge {
    a: u32,
    b: u32,
    w: u32,
    class: u8,
}

/// A view in local ids: nodes `0..n`, edges to other nodes or to a boundary
/// carrying a class tag.
#[derive(Debug)]
pub struct MatchingGraph {
    n: usize,
    edges: Vec<MEdge>,
    adj_start: Vec<u32>,
    /// `(neighbour or NONE, edge)`, neighbour ascending, boundary last.
    adj: Vec<(u32, u32)>,
    uniform: Option<u32>,
    classes: Vec<u8>,
    tables: OnceLock<Tables>,
}

impl Clone for MatchingGraph {
    fn clone(&self) -> Self {
        MatchingGraph {
            n: self.n,
            edges: self.edges.clone(),
            adj_start: self.adj_start.clone(),
            adj: self.adj.clone(),
            uniform: self.uniform,
            classes: self.classes.clone(),
            tables: OnceLock::new(),
        }
    }
}

#[derive(Debug)]
struct Tables {
    to_boundary: Vec<u64>,
    /// Indexed by class; empty if the class is absent.
    to_class: Vec<Vec<u64>>,
    dense: Option<Vec<u32>>,
}

impl MatchingGraph {
    /// `edges` are `(a, b or None for boundary, weight, class)`.
    pub fn new(n: usize, edges: Vec<(u32, Option<u32>, u32, u8)>) -> Self {
        let edges: Vec<MEdge> = edges
            .into_iter()
            .map(|(a, b, w, class)| MEdge { a, b: b.unwrap_or(NONE), w, class })
            .collect();
        let mut lists: Vec<Vec<(u32, u32)>> = vec![Vec::new(); n];
        for (k, e) in edges.iter().enumerate() {
            lists[e.a as usize].push((e.b, k as u32));
            if e.b != NONE {
                lists[e.b as usize].push((e.a, k as u32));
            }
        }
        let mut adj_start = Vec::with_capacity(n + 1);
        let mut adj = Vec::with_capacity(2 * edges.len());
        for mut l in lists {
            l.sort();
            adj_start.push(adj.len() as u32);
            adj.extend(l);
        }
        adj_start.push(adj.len() as u32);
        let uniform = match edges.first() {
            Some(f) if edges.iter().all(|e| e.w == f.w) => Some(f.w),
            _ => None,
        };
        let mut classes: Vec<u8> = edges.iter().filter(|e| e.b == NONE).map(|e| e.class).collect();
        classes.sort();
        classes.dedup();
        MatchingGraph { n, edges, adj_start, adj, uniform, classes, tables: OnceLock::new() }
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn has_boundary(&self) -> bool {
        !self.classes.is_empty()
    }

    pub fn boundary_classes(&self) -> &[u8] {
        &self.classes
    }

    pub fn edge_weight(&self, e: u32) -> u32 {
        self.edges[e as usize].w
    }

    /// `(a, b or None, weight, class)` of a local edge.
    pub fn edge(&self, e: u32) -> (u32, Option<u32>, u32, u8) {
        let x = self.edges[e as usize];
        (x.a, (x.b != NONE).then_some(x.b), x.w, x.class)
    }

    fn neighbors(&self, v: u32) -> &[(u32, u32)] {
        &self.adj[self.adj_start[v as usize] as usize..self.adj_start[v as usize + 1] as usize]
    }

    /// Single-source distances, `INF` where unreachable.
    fn sssp(&self, sources: &[u32], accept_boundary: impl Fn(u8) -> bool, from_boundary: bool) -> Vec<u64> {
        let mut dist = vec![INF; self.n];
        if from_boundary {
            // Boundary edges act as sources at their weight.
            let mut heap = std::collections::BinaryHeap::new();
            for e in &self.edges {
                if e.b == NONE && accept_boundary(e.class) && (e.w as u64) < dist[e.a as usize] {
                    dist[e.a as usize] = e.w as u64;
                    heap.push(std::cmp::Reverse((e.w as u64, e.a)));
                }
            }
            self.dijkstra(&mut dist, heap);
            return dist;
        }
        if let Some(w) = self.uniform {
            let mut q = std::collections::VecDeque::new();
            for &s in sources {
                dist[s as usize] = 0;
                q.push_back(s);
            }
            while let Some(u) = q.pop_front() {
                let du = dist[u as usize];
                for &(v, _) in self.neighbors(u) {
                    if v != NONE && dist[v as usize] == INF {
                        dist[v as usize] = du + w as u64;
                        q.push_back(v);
                    }
                }
            }
            return dist;
        }
        let mut heap = std::collections::BinaryHeap::new();
        for &s in sources {
            dist[s as usize] = 0;
            heap.push(std::cmp::Reverse((0, s)));
        }
        self.dijkstra(&mut dist, heap);
        dist
    }

    fn dijkstra(&self, dist: &mut [u64], mut heap: std::collections::BinaryHeap<std::cmp::Reverse<(u64, u32)>>) {
        while let Some(std::cmp::Reverse((d, u))) = heap.pop() {
            if d > dist[u as usize] {
                continue;
            }
            for &(v, e) in self.neighbors(u) {
                if v == NONE {
                    continue;
                }
                let nd = d + self.edges[e as usize].w as u64;
                if nd < dist[v as usize] {
                    dist[v as usize] = nd;
                    heap.push(std::cmp::Reverse((nd, v)));
                }
            }
        }
    }

    fn tables(&self) -> &Tables {
        self.tables.get_or_init(|| {
            let to_boundary = self.sssp(&[], |_| true, true);
            let mut to_class = vec![Vec::new(); NUM_CLASSES];
            for &c in &self.classes {
                to_class[c as usize] = self.sssp(&[], |x| x == c, true);
            }
            let dense = (self.n <= DENSE_TABLE_MAX_NODES).then(|| {
                let mut t = vec![u32::MAX; self.n * self.n];
                for s in 0..self.n {
                    let d = self.sssp(&[s as u32], |_| false, false);
                    for (v, &x) in d.iter().enumerate() {
                        if x < INF {
                            t[s * self.n + v] = x as u32;
                        }
                    }
                }
                t
            });
            Tables { to_boundary, to_class, dense }
        })
    }

    /// Builds the distance tables now instead of on first decode.
    pub fn precompute(&self) {
        self.tables();
    }

    pub fn distance(&self, a: u32, b: u32) -> Option<u64> {
        let t = self.tables();
        let d = match &t.dense {
            Some(m) => {
                let x = m[a as usize * self.n + b as usize];
                if x == u32::MAX { INF } else { x as u64 }
            }
            None => self.sssp(&[a], |_| false, false)[b as usize],
        };
        (d < INF).then_some(d)
    }

    pub fn boundary_distance(&self, a: u32) -> Option<u64> {
        let d = self.tables().to_boundary[a as usize];
        (d < INF).then_some(d)
    }

    /// Walks from `from` along a shortest path, taking the first neighbour
    /// (in adjacency order) that stays on one. `to_target[x]` is the
    /// distance from `x` to the target; `finish` accepts a boundary edge.
    fn walk(&self, mut cur: u32, to_target: impl Fn(u32) -> u64, finish: Option<&dyn Fn(u8) -> bool>, out: &mut Vec<u32>) {
        loop {
            let dc = to_target(cur);
            if dc == 0 {
                return;
            }
            let mut stepped = false;
            for &(v, e) in self.neighbors(cur) {
                let w = self.edges[e as usize].w as u64;
                if v == NONE {
                    if finish.is_some_and(|f| f(self.edges[e as usize].class)) && w == dc {
                        out.push(e);
                        return;
                    }
                } else if to_target(v) + w == dc {
                    out.push(e);
                    cur = v;
                    stepped = true;
                    break;
                }
            }
            assert!(stepped, "shortest path walk stuck at node {cur}");
        }
    }
}

enum Rows<'a> {
    Dense(&'a [u32], usize),
    PerDefect(Vec<Vec<u64>>),
}

impl Rows<'_> {
    /// Distance from node `x` to defect number `j` (node `dj`).
    fn get(&self, x: u32, j: usize, dj: u32) -> u64 {
        match self {
            Rows::Dense(m, n) => {
                let d = m[x as usize * n + dj as usize];
                if d == u32::MAX { INF } else { d as u64 }
            }
            Rows::PerDefect(r) => r[j][x as usize],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Assign {
    Pair(usize, usize),
    /// Defect to the boundary; `None` means any class.
    Boundary(usize, Option<u8>),
}

/// Local CorrectionSet: edge ids are local edge indices.
fn decode_local(g: &MatchingGraph, defects: &[u32], tie: TieRule) -> Result<CorrectionSet, u32> {
    let k = defects.len();
    if k == 0 {
        return Ok(CorrectionSet::default());
    }
    let t = g.tables();
    let rows = match &t.dense {
        Some(m) => Rows::Dense(m, g.n),
        None => Rows::PerDefect(defects.iter().map(|&d| g.sssp(&[d], |_| false, false)).collect()),
    };
    let pd = |i: usize, j: usize| rows.get(defects[i], j, defects[j]);
    let db = |i: usize| t.to_boundary[defects[i] as usize];

    let enumerate = !matches!(tie, TieRule::Deterministic) && k <= ENUMERATE_MAX_DEFECTS;
    let (assigns, token) = if enumerate {
        let sols = co_minimal(g, t, k, &pd, defects);
        match sols {
            Some(sols) => {
                let idx = match tie {
                    TieRule::SeededRandom(seed) => ChaCha8Rng::seed_from_u64(seed).random_range(0..sols.len()),
                    TieRule::Branch(b) => b as usize % sols.len(),
                    TieRule::Deterministic => 0,
                };
                let tok = TieToken { index: idx as u32, count: sols.len() as u32 };
                (sols[idx].clone(), tok)
            }
            None => return Err(lone_witness(k, &pd, defects)),
        }
    } else {
        (blossom_assign(g, k, &pd, &db, defects)?, TieToken::default())
    };

    let mut toggled = vec![false; g.edges.len()];
    let mut path = Vec::new();
    for a in assigns {
        path.clear();
        match a {
            Assign::Pair(i, j) => g.walk(defects[i], |x| rows.get(x, j, defects[j]), None, &mut path),
            Assign::Boundary(i, None) => g.walk(defects[i], |x| t.to_boundary[x as usize], Some(&|_| true), &mut path),
            Assign::Boundary(i, Some(c)) => {
                let tc = &t.to_class[c as usize];
                g.walk(defects[i], |x| tc[x as usize], Some(&|x| x == c), &mut path)
            }
        }
        for &e in &path {
            toggled[e as usize] ^= true;
        }
    }
    let edges: Vec<EdgeId> = toggled.iter().enumerate().filter(|(_, &t)| t).map(|(e, _)| EdgeId(e as u32)).collect();
    let weight = edges.iter().map(|e| g.edges[e.0 as usize].w as u64).sum();
    Ok(CorrectionSet { edges, weight, tie_break_token: token })
}

/// Witness of an unmatchable defect: the one a dummy vertex takes in a
/// minimum matching of the rest.
fn lone_witness(k: usize, pd: &dyn Fn(usize, usize) -> u64, defects: &[u32]) -> u32 {
    let mut edges = Vec::new();
    let mut maxw = 0;
    for i in 0..k {
        for j in i + 1..k {
            let d = pd(i, j);
            if d < INF {
                edges.push((i, j, d as i64));
                maxw = maxw.max(d as i64);
            }
        }
        edges.push((i, k, 0));
    }
    let big = maxw + 1;
    let edges: Vec<_> = edges.into_iter().map(|(i, j, w)| (i, j, big - w)).collect();
    let m = blossom::max_weight_matching(k + 1, &edges, true);
    let idx = m[k].unwrap_or(k - 1);
    defects[idx]
}

struct Dsu(Vec<usize>);

impl Dsu {
    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut x = x;
        while self.0[x] != r {
            let nx = self.0[x];
            self.0[x] = r;
            x = nx;
        }
        r
    }
    fn union(&mut self, a: usize, b: usize) {
        let (a, b) = (self.find(a), self.find(b));
        if a != b {
            self.0[a.max(b)] = a.min(b);
        }
    }
}

fn blossom_assign(
    g: &MatchingGraph,
    k: usize,
    pd: &dyn Fn(usize, usize) -> u64,
    db: &dyn Fn(usize) -> u64,
    defects: &[u32],
) -> Result<Vec<Assign>, u32> {
    let mut pairs = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            let d = pd(i, j);
            if d >= INF {
                continue;
            }
            if d < db(i).saturating_add(db(j)) {
                pairs.push((i, j, d));
            }
        }
    }
    let mut dsu = Dsu((0..k).collect());
    for &(i, j, _) in &pairs {
        dsu.union(i, j);
    }
    let mut comps: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..k {
        comps.entry(dsu.find(i)).or_default().push(i);
    }
    let mut comp_pairs: std::collections::BTreeMap<usize, Vec<(usize, usize, u64)>> = Default::default();
    for &p in &pairs {
        comp_pairs.entry(dsu.find(p.0)).or_default().push(p);
    }

    let mut out = Vec::new();
    for (root, members) in comps {
        let reach_b = members.iter().all(|&i| db(i) < INF);
        let local: std::collections::HashMap<usize, usize> = members.iter().enumerate().map(|(x, &i)| (i, x)).collect();
        let m = members.len();
        let cp = comp_pairs.remove(&root).unwrap_or_default();
        if m == 1 {
            if reach_b {
                out.push(Assign::Boundary(members[0], None));
                continue;
            }
            return Err(defects[members[0]]);
        }
        if g.has_boundary() && reach_b {
            // Two defects may also meet through the boundary, so every pair
            // costs at most db(i) + db(j). An odd count leaves one defect
            // on vertex m, which stands for the boundary alone.
            let cost = |a: usize, b: usize| pd(members[a], members[b]).min(db(members[a]) + db(members[b]));
            let odd = m % 2 == 1;
            let maxw = members.iter().map(|&i| 2 * db(i)).max().unwrap_or(0) as i64;
            let big = maxw + 1;
            let mut edges = Vec::with_capacity(m * (m + 1) / 2);
            for a in 0..m {
                for b in a + 1..m {
                    edges.push((a, b, big - cost(a, b) as i64));
                }
                if odd {
                    edges.push((a, m, big - db(members[a]) as i64));
                }
            }
            let mate = blossom::max_weight_matching(m + odd as usize, &edges, true);
            for a in 0..m {
                match mate[a] {
                    Some(b) if b == m => out.push(Assign::Boundary(members[a], None)),
                    Some(b) if a < b => {
                        let (i, j) = (members[a], members[b]);
                        if pd(i, j) < db(i) + db(j) {
                            out.push(Assign::Pair(i, j));
                        } else {
                            out.push(Assign::Boundary(i, None));
                            out.push(Assign::Boundary(j, None));
                        }
                    }
                    Some(_) => {}
                    None => unreachable!("complete graph has a perfect matching"),
                }
            }
        } else {
            if m % 2 == 1 {
                return Err(lone_witness(m, &|a, b| pd(members[a], members[b]), &members.iter().map(|&i| defects[i]).collect::<Vec<_>>()));
            }
            let maxw = cp.iter().map(|p| p.2).max().unwrap_or(0) as i64;
            let big = maxw + 1;
            let edges: Vec<_> = cp.iter().map(|&(i, j, d)| (local[&i], local[&j], big - d as i64)).collect();
            let mate = blossom::max_weight_matching(m, &edges, true);
            for x in 0..m {
                match mate[x] {
                    Some(y) if x < y => out.push(Assign::Pair(members[x], members[y])),
                    Some(_) => {}
                    None => return Err(defects[members[x]]),
                }
            }
        }
    }
    Ok(out)
}

/// All minimum-weight assignments in canonical order, with boundary matches
/// split by class; `None` if no perfect assignment exists.
fn co_minimal(g: &MatchingGraph, t: &Tables, k: usize, pd: &dyn Fn(usize, usize) -> u64, defects: &[u32]) -> Option<Vec<Vec<Assign>>> {
    let class_d = |i: usize, c: u8| t.to_class[c as usize][defects[i] as usize];
    let full = (1usize << k) - 1;
    let mut best = vec![INF; 1 << k];
    best[0] = 0;
    for mask in 1..=full {
        let i = mask.trailing_zeros() as usize;
        let rest = mask & !(1 << i);
        let mut b = INF;
        for &c in &g.classes {
            b = b.min(class_d(i, c).saturating_add(best[rest]));
        }
        let mut r = rest;
        while r != 0 {
            let j = r.trailing_zeros() as usize;
            r &= r - 1;
            b = b.min(pd(i, j).saturating_add(best[rest & !(1 << j)]));
        }
        best[mask] = b.min(INF);
    }
    if best[full] >= INF {
        return None;
    }

    fn rec(
        mask: usize,
        best: &[u64],
        g: &MatchingGraph,
        class_d: &dyn Fn(usize, u8) -> u64,
        pd: &dyn Fn(usize, usize) -> u64,
        cur: &mut Vec<Assign>,
        out: &mut Vec<Vec<Assign>>,
    ) {
        if out.len() >= ENUMERATE_MAX_SOLUTIONS {
            return;
        }
        if mask == 0 {
            out.push(cur.clone());
            return;
        }
        let i = mask.trailing_zeros() as usize;
        let rest = mask & !(1 << i);
        for &c in &g.classes {
            if class_d(i, c).saturating_add(best[rest]) == best[mask] {
                cur.push(Assign::Boundary(i, Some(c)));
                rec(rest, best, g, class_d, pd, cur, out);
                cur.pop();
            }
        }
        let mut r = rest;
        while r != 0 {
            let j = r.trailing_zeros() as usize;
            r &= r - 1;
            let rr = rest & !(1 << j);
            if pd(i, j).saturating_add(best[rr]) == best[mask] {
                cur.push(Assign::Pair(i, j));
                rec(rr, best, g, class_d, pd, cur, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    rec(full, &best, g, &class_d, pd, &mut Vec::new(), &mut out);
    Some(out)
}

/// Anything a defect set can be decoded against.
pub trait DecodeView {
    fn matching(&self) -> &MatchingGraph;
    fn local_node(&self, n: NodeId) -> Option<u32>;
    fn global_node(&self, l: u32) -> NodeId;
    fn global_edge(&self, l: EdgeId) -> EdgeId;
}

impl DecodeView for DecodingGraph {
    fn matching(&self) -> &MatchingGraph {
        self.matching_graph_cached()
    }
    fn local_node(&self, n: NodeId) -> Option<u32> {
        ((n.0 as usize) < self.num_nodes()).then_some(n.0)
    }
    fn global_node(&self, l: u32) -> NodeId {
        NodeId(l)
    }
    fn global_edge(&self, l: EdgeId) -> EdgeId {
        l
    }
}

impl DecodeView for WindowGraph {
    fn matching(&self) -> &MatchingGraph {
        &self.matching
    }
    fn local_node(&self, n: NodeId) -> Option<u32> {
        self.local(n)
    }
    fn global_node(&self, l: u32) -> NodeId {
        self.nodes[l as usize]
    }
    fn global_edge(&self, l: EdgeId) -> EdgeId {
        self.edges[l.0 as usize].global
    }
}

/// Minimum-weight correction for `defects` (global ids, each in the view).
/// The edge list is in global ids, sorted.
pub fn decode(view: &impl DecodeView, defects: &[NodeId], tie_rule: TieRule) -> Result<CorrectionSet, DecodeFailure> {
    let mut local: Vec<u32> = defects.iter().filter_map(|&n| view.local_node(n)).collect();
    debug_assert_eq!(local.len(), defects.len(), "defect outside the view");
    local.sort_unstable();
    local.dedup();
    decode_local_ids(view, &local, tie_rule)
}

/// As [`decode`], with defects already in local ids (sorted, distinct).
pub fn decode_local_ids(view: &impl DecodeView, local: &[u32], tie_rule: TieRule) -> Result<CorrectionSet, DecodeFailure> {
    match decode_local(view.matching(), local, tie_rule) {
        Ok(mut c) => {
            for e in &mut c.edges {
                *e = view.global_edge(*e);
            }
            c.edges.sort_unstable();
            Ok(c)
        }
        Err(w) => Err(DecodeFailure { kind: FailureKind::LoneDefect, witness: view.global_node(w) }),
    }
}
