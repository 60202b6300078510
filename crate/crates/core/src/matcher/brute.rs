//! Exhaustive oracle for small defect sets. Shares nothing with the fast
//! path beyond the view's edge list: its own O(V^2) Dijkstra, plain
//! recursion over all pairings and boundary choices.

use super::{CorrectionSet, DecodeFailure, DecodeView, FailureKind};
use crate::graph::{EdgeId, NodeId};
use crate::Error;

pub const BRUTE_FORCE_MAX_DEFECTS: usize = 10;

const UNREACHABLE: u64 = u64::MAX;

/// Distances and predecessor edges from `src`; node `n` is the boundary.
fn dijkstra(n: usize, adj: &[Vec<(usize, u32, u64)>], src: usize) -> (Vec<u64>, Vec<Option<(usize, u32)>>) {
    let mut dist = vec![UNREACHABLE; n + 1];
    let mut pred = vec![None; n + 1];
    let mut done = vec![false; n + 1];
    dist[src] = 0;
    loop {
        let mut u = None;
        for v in 0..=n {
            if !done[v] && dist[v] != UNREACHABLE && u.is_none_or(|x: usize| dist[v] < dist[x]) {
                u = Some(v);
            }
        }
        let Some(u) = u else { break };
        done[u] = true;
        // Paths do not pass through the boundary.
        if u == n && src != n {
            continue;
        }
        for &(v, e, w) in &adj[u] {
            if dist[u] + w < dist[v] {
                dist[v] = dist[u] + w;
                pred[v] = Some((u, e));
            }
        }
    }
    (dist, pred)
}

fn best(k: usize, used: &mut [bool], d: &dyn Fn(usize, usize) -> u64, db: &dyn Fn(usize) -> u64, bnd: bool) -> Option<(u64, Vec<(usize, Option<usize>)>)> {
    let Some(i) = (0..k).find(|&i| !used[i]) else {
        return Some((0, Vec::new()));
    };
    used[i] = true;
    let mut out: Option<(u64, Vec<(usize, Option<usize>)>)> = None;
    let mut consider = |cost: u64, pick: (usize, Option<usize>), used: &mut [bool]| {
        if let Some((c, mut rest)) = best(k, used, d, db, bnd) {
            let total = c + cost;
            if out.as_ref().is_none_or(|o| total < o.0) {
                rest.push(pick);
                out = Some((total, rest));
            }
        }
    };
    if bnd && db(i) != UNREACHABLE {
        consider(db(i), (i, None), used);
    }
    for j in i + 1..k {
        if !used[j] && d(i, j) != UNREACHABLE {
            used[j] = true;
            consider(d(i, j), (i, Some(j)), used);
            used[j] = false;
        }
    }
    used[i] = false;
    out
}

/// Minimum-weight correction by exhaustive search, up to
/// [`BRUTE_FORCE_MAX_DEFECTS`] defects.
pub fn brute_force_decode(view: &impl DecodeView, defects: &[NodeId]) -> Result<CorrectionSet, Error> {
    if defects.len() > BRUTE_FORCE_MAX_DEFECTS {
        return Err(Error::TooManyDefects(defects.len(), BRUTE_FORCE_MAX_DEFECTS));
    }
    let g = view.matching();
    let n = g.num_nodes();
    let mut adj = vec![Vec::new(); n + 1];
    let mut has_boundary = false;
    for e in 0..g.num_edges() as u32 {
        let (a, b, w, _) = g.edge(e);
        let b = match b {
            Some(b) => b as usize,
            None => {
                has_boundary = true;
                n
            }
        };
        adj[a as usize].push((b, e, w as u64));
        adj[b].push((a as usize, e, w as u64));
    }
    let mut local: Vec<usize> = defects.iter().filter_map(|&x| view.local_node(x)).map(|x| x as usize).collect();
    local.sort_unstable();
    local.dedup();
    let k = local.len();
    let runs: Vec<_> = local.iter().map(|&s| dijkstra(n, &adj, s)).collect();
    let d = |i: usize, j: usize| runs[i].0[local[j]];
    let db = |i: usize| runs[i].0[n];
    let Some((weight, picks)) = best(k, &mut vec![false; k], &d, &db, has_boundary) else {
        let witness = view.global_node(*local.last().expect("failure needs a defect") as u32);
        return Err(Error::InvalidConfig(DecodeFailure { kind: FailureKind::LoneDefect, witness }.to_string()));
    };
    let mut toggled = vec![false; g.num_edges()];
    for (i, j) in picks {
        let target = j.map_or(n, |j| local[j]);
        let pred = &runs[i].1;
        let mut cur = target;
        while cur != local[i] {
            let (p, e) = pred[cur].expect("reachable");
            toggled[e as usize] ^= true;
            cur = p;
        }
    }
    let mut edges: Vec<EdgeId> = (0..g.num_edges()).filter(|&e| toggled[e]).map(|e| view.global_edge(EdgeId(e as u32))).collect();
    edges.sort_unstable();
    Ok(CorrectionSet { edges, weight, tie_break_token: Default::default() })
}
