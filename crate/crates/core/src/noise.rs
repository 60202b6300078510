//! Phenomenological noise: each graph edge flips independently.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{DecodingGraph, EdgeId, NodeId};
use crate::Error;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyndromeSample {
    /// One flag per graph node.
    pub defects: Vec<bool>,
    /// Edges that actually flipped, sorted.
    pub truth: Vec<EdgeId>,
    pub seed: u64,
    pub shot: u64,
}

impl SyndromeSample {
    pub fn defect_nodes(&self) -> Vec<NodeId> {
        self.defects.iter().enumerate().filter(|(_, &d)| d).map(|(i, _)| NodeId(i as u32)).collect()
    }

    pub fn num_defects(&self) -> usize {
        self.defects.iter().filter(|&&d| d).count()
    }
}

/// RNG of one shot: the run seed picks the key, the shot index the stream,
/// so shots are independent of how they are split across workers.
pub fn shot_rng(seed: u64, shot: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(shot);
    r
}

pub fn sample(graph: &DecodingGraph, p: f64, seed: u64, shot: u64) -> SyndromeSample {
    let mut rng = shot_rng(seed, shot);
    let truth: Vec<EdgeId> = (0..graph.num_edges())
        .filter(|_| rng.random::<f64>() < p)
        .map(|e| EdgeId(e as u32))
        .collect();
    let defects = graph.syndrome_of(&truth);
    SyndromeSample { defects, truth, seed, shot }
}

/// Bitmask of the cuts flipped by `truth + correction`, or
/// `ResidualSyndrome` if the correction does not clear the syndrome.
pub fn logical_flips(graph: &DecodingGraph, truth: &[EdgeId], correction: &[EdgeId]) -> Result<u32, Error> {
    let mut all = truth.to_vec();
    all.extend_from_slice(correction);
    let residual = graph.syndrome_of(&all).into_iter().filter(|&x| x).count();
    if residual > 0 {
        return Err(Error::ResidualSyndrome(residual));
    }
    Ok(graph.cut_parity(&all))
}

/// Mean defect count per shot, exactly: a node lights with probability
/// `(1 - (1 - 2p)^deg) / 2`.
pub fn expected_defects(graph: &DecodingGraph, p: f64) -> f64 {
    (0..graph.num_nodes())
        .map(|n| {
            let deg = graph.incident(NodeId(n as u32)).len() as i32;
            (1.0 - (1.0 - 2.0 * p).powi(deg)) / 2.0
        })
        .sum()
}

/// First-order mean: `p` times the number of edge endpoints on nodes.
pub fn expected_defects_first_order(graph: &DecodingGraph, p: f64) -> f64 {
    let ends: usize = graph.edges.iter().map(|e| 1 + e.b.is_some() as usize).sum();
    p * ends as f64
}

/// One line per shot: the shot index, then the defect node ids.
pub fn write_syndromes<'a>(out: &mut impl Write, samples: impl IntoIterator<Item = &'a SyndromeSample>) -> std::io::Result<()> {
    for s in samples {
        write!(out, "{}", s.shot)?;
        for n in s.defect_nodes() {
            write!(out, " {}", n.0)?;
        }
        writeln!(out)?;
    }
    Ok(())
}
