//! Layered windowed decoding of one shot, and the global reference.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::analysis::confusion::ConfusionCase;
use crate::geometry::{Link, WindowConfig, WindowId};
use crate::graph::{DecodingGraph, EdgeId, NodeId, Partition};
use crate::matcher::{decode_local_ids, CorrectionSet, DecodeFailure, TieRule};
use crate::noise::{logical_flips, SyndromeSample};
use crate::Error;

/// Artificial defects handed from a window to a later one.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DefectMessage {
    pub from: WindowId,
    pub to: WindowId,
    /// `None` if the config has no link for this pair; the flips are still
    /// delivered.
    pub link: Option<Link>,
    pub positions: Vec<NodeId>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShotFailure {
    /// A window had a defect it could not pair; the shot is abandoned.
    LoneDefect { window: WindowId, failure: DecodeFailure },
    /// The committed corrections leave defects behind (only possible with
    /// message delivery disabled).
    ResidualSyndrome { nodes: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotOutcome {
    pub shot: u64,
    pub committed: Vec<(WindowId, CorrectionSet)>,
    pub messages: Vec<DefectMessage>,
    /// One flag per graph cut. A failed shot flips every cut.
    pub logical_flips: Vec<bool>,
    pub layers_used: u32,
    pub failure: Option<ShotFailure>,
}

impl ShotOutcome {
    pub fn correction(&self) -> Vec<EdgeId> {
        let mut v: Vec<EdgeId> = self.committed.iter().flat_map(|(_, c)| c.edges.iter().copied()).collect();
        v.sort_unstable();
        v
    }

    pub fn any_flip(&self) -> bool {
        self.logical_flips.iter().any(|&f| f)
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("outcome serialises")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EngineOptions {
    /// `SeededRandom(s)` is re-seeded per shot and window from `s`.
    pub tie_rule: TieRule,
    /// Per-window overrides of the tie rule.
    pub window_ties: BTreeMap<WindowId, TieRule>,
    pub deliver_messages: bool,
    /// Decode each layer in descending window id.
    pub reverse_within_layer: bool,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions {
            tie_rule: TieRule::Deterministic,
            window_ties: BTreeMap::new(),
            deliver_messages: true,
            reverse_within_layer: false,
        }
    }
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn shot_tie(rule: TieRule, sample: &SyndromeSample, salt: u64) -> TieRule {
    match rule {
        TieRule::SeededRandom(s) => {
            TieRule::SeededRandom(splitmix(s ^ splitmix(sample.seed ^ splitmix(sample.shot ^ splitmix(salt)))))
        }
        r => r,
    }
}

/// A windowed decoder for one graph and config, views precomputed.
#[derive(Clone, Debug)]
pub struct WindowedDecoder {
    graph: DecodingGraph,
    config: WindowConfig,
    part: Partition,
    /// Window indices per layer, ascending id.
    layers: Vec<Vec<usize>>,
}

impl WindowedDecoder {
    pub fn new(graph: &DecodingGraph, config: &WindowConfig) -> Result<Self, Error> {
        let part = Partition::new(graph, config)?;
        let mut by_layer: BTreeMap<u8, Vec<usize>> = BTreeMap::new();
        for (k, w) in config.windows.iter().enumerate() {
            by_layer.entry(w.layer).or_default().push(k);
        }
        let layers = by_layer
            .into_values()
            .map(|mut v| {
                v.sort_by_key(|&k| config.windows[k].id);
                v
            })
            .collect();
        Ok(WindowedDecoder { graph: graph.clone(), config: config.clone(), part, layers })
    }

    pub fn graph(&self) -> &DecodingGraph {
        &self.graph
    }

    pub fn config(&self) -> &WindowConfig {
        &self.config
    }

    pub fn partition(&self) -> &Partition {
        &self.part
    }

    /// Builds every view's distance table now.
    pub fn precompute(&self) {
        for w in &self.part.windows {
            w.matching.precompute();
        }
    }

    pub fn run(&self, sample: &SyndromeSample, opts: &EngineOptions) -> Result<ShotOutcome, Error> {
        let ws = &self.part.windows;
        let cfg_ws = &self.config.windows;
        let mut received: Vec<Vec<bool>> = ws.iter().map(|w| vec![false; w.nodes.len()]).collect();
        let mut parity = vec![false; self.graph.num_nodes()];
        let mut touched: Vec<NodeId> = Vec::new();
        let mut committed = Vec::new();
        let mut messages = Vec::new();
        let mut failure = None;
        let mut layers_used = 0;

        'layers: for group in &self.layers {
            layers_used += 1;
            let order: Vec<usize> =
                if opts.reverse_within_layer { group.iter().rev().copied().collect() } else { group.clone() };
            for k in order {
                let view = &ws[k];
                let id = cfg_ws[k].id;
                let local: Vec<u32> = (0..view.nodes.len() as u32)
                    .filter(|&l| sample.defects[view.nodes[l as usize].0 as usize] ^ received[k][l as usize])
                    .collect();
                let rule = opts.window_ties.get(&id).copied().unwrap_or(opts.tie_rule);
                let corr = match decode_local_ids(view, &local, shot_tie(rule, sample, id.0 as u64)) {
                    Ok(c) => c,
                    Err(f) => {
                        failure = Some(ShotFailure::LoneDefect { window: id, failure: f });
                        break 'layers;
                    }
                };
                let edges: Vec<EdgeId> =
                    corr.edges.iter().copied().filter(|e| self.part.committer[e.0 as usize] as usize == k).collect();
                for &e in &edges {
                    let ge = self.graph.edge(e);
                    for n in std::iter::once(ge.a).chain(ge.b) {
                        parity[n.0 as usize] ^= true;
                        touched.push(n);
                    }
                }
                touched.sort_unstable();
                touched.dedup();
                let mut per_dest: BTreeMap<usize, Vec<NodeId>> = BTreeMap::new();
                for &n in &touched {
                    if !parity[n.0 as usize] {
                        continue;
                    }
                    parity[n.0 as usize] = false;
                    for &(x, lx) in &self.part.membership[n.0 as usize] {
                        let x = x as usize;
                        if cfg_ws[x].layer > cfg_ws[k].layer {
                            if opts.deliver_messages {
                                received[x][lx as usize] ^= true;
                            }
                            per_dest.entry(x).or_default().push(n);
                        }
                    }
                }
                touched.clear();
                for (x, positions) in per_dest {
                    let to = cfg_ws[x].id;
                    let link = self.config.has_link(id, to).then_some(Link { from: id, to });
                    messages.push(DefectMessage { from: id, to, link, positions });
                }
                let weight = edges.iter().map(|&e| self.graph.edge(e).weight as u64).sum();
                committed.push((id, CorrectionSet { edges, weight, tie_break_token: corr.tie_break_token }));
            }
        }

        let ncuts = self.graph.cuts.len();
        let mut outcome = ShotOutcome {
            shot: sample.shot,
            committed,
            messages,
            logical_flips: vec![true; ncuts],
            layers_used,
            failure,
        };
        if outcome.failure.is_none() {
            match logical_flips(&self.graph, &sample.truth, &outcome.correction()) {
                Ok(mask) => outcome.logical_flips = (0..ncuts).map(|c| mask >> c & 1 == 1).collect(),
                Err(Error::ResidualSyndrome(nodes)) if !opts.deliver_messages => {
                    outcome.failure = Some(ShotFailure::ResidualSyndrome { nodes });
                }
                Err(e) => return Err(e),
            }
        }
        Ok(outcome)
    }
}

/// Decodes a shot windowed; builds the views on every call.
pub fn run_windowed(graph: &DecodingGraph, config: &WindowConfig, sample: &SyndromeSample) -> Result<ShotOutcome, Error> {
    WindowedDecoder::new(graph, config)?.run(sample, &EngineOptions::default())
}

/// Decodes a shot with the global decoder, as a one-window outcome.
pub fn run_global(graph: &DecodingGraph, sample: &SyndromeSample, tie_rule: TieRule) -> Result<ShotOutcome, Error> {
    let local: Vec<u32> = (0..graph.num_nodes() as u32).filter(|&n| sample.defects[n as usize]).collect();
    let ncuts = graph.cuts.len();
    let (committed, flips, failure) = match decode_local_ids(graph, &local, shot_tie(tie_rule, sample, u64::MAX)) {
        Ok(c) => {
            let mask = logical_flips(graph, &sample.truth, &c.edges)?;
            (vec![(WindowId(0), c)], (0..ncuts).map(|k| mask >> k & 1 == 1).collect(), None)
        }
        Err(f) => (Vec::new(), vec![true; ncuts], Some(ShotFailure::LoneDefect { window: WindowId(0), failure: f })),
    };
    Ok(ShotOutcome { shot: sample.shot, committed, messages: Vec::new(), logical_flips: flips, layers_used: 1, failure })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdversarialReport {
    /// Cut flips of the windowed decoder, per explored tie branch.
    pub windowed_flips: Vec<bool>,
    /// Tie choices per window in each explored branch.
    pub branches: Vec<BTreeMap<WindowId, u32>>,
    pub global_flips: Vec<bool>,
    /// The deterministic windowed run flipped.
    pub deterministic_windowed_flip: bool,
    pub wrong_weight: u64,
    pub correct_weight: u64,
}

impl AdversarialReport {
    pub fn windowed_can_fail(&self) -> bool {
        self.windowed_flips.iter().any(|&f| f)
    }

    pub fn global_never_fails(&self) -> bool {
        self.global_flips.iter().all(|&f| !f)
    }
}

const MAX_BRANCHES: usize = 256;

/// Injects the case's error string and decodes it windowed, over every
/// combination of co-minimal tie branches, and globally.
pub fn replay_adversarial(case: &ConfusionCase) -> Result<AdversarialReport, Error> {
    let (scenario, graph) = case.build()?;
    let cut = graph.cut_index(&case.cut).ok_or_else(|| Error::InvalidConfig(format!("no cut {}", case.cut)))?;
    let truth = case.error_edges(&graph)?;
    let sample = SyndromeSample { defects: graph.syndrome_of(&truth), truth, seed: 0, shot: 0 };
    let dec = WindowedDecoder::new(&graph, &scenario.config)?;

    // Depth-first over tie choices in decode order: a window's set of
    // co-minimal matchings depends on what earlier windows committed.
    let mut windowed_flips = Vec::new();
    let mut branches = Vec::new();
    let mut stack: Vec<BTreeMap<WindowId, u32>> = vec![BTreeMap::new()];
    while let Some(choice) = stack.pop() {
        if branches.len() >= MAX_BRANCHES {
            break;
        }
        let ties = choice.iter().map(|(&w, &b)| (w, TieRule::Branch(b))).collect();
        let out = dec.run(&sample, &EngineOptions { tie_rule: TieRule::Branch(0), window_ties: ties, ..Default::default() })?;
        match out.committed.iter().find(|(w, _)| !choice.contains_key(w)) {
            Some((w, c)) => {
                for b in (0..c.tie_break_token.count.max(1)).rev() {
                    let mut next = choice.clone();
                    next.insert(*w, b);
                    stack.push(next);
                }
            }
            None => {
                windowed_flips.push(out.logical_flips[cut]);
                branches.push(choice);
            }
        }
    }
    let det = dec.run(&sample, &EngineOptions::default())?;

    let g0 = run_global(&graph, &sample, TieRule::Branch(0))?;
    let gcount = g0.committed.first().map_or(1, |c| c.1.tie_break_token.count.max(1));
    let mut global_flips = Vec::new();
    for b in 0..gcount.min(64) {
        global_flips.push(run_global(&graph, &sample, TieRule::Branch(b))?.logical_flips[cut]);
    }
    Ok(AdversarialReport {
        windowed_flips,
        branches,
        global_flips,
        deterministic_windowed_flip: det.logical_flips[cut],
        wrong_weight: case.wrong_weight as u64,
        correct_weight: case.l as u64,
    })
}
