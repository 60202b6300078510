//! Monte Carlo runs: sample shots, decode them windowed and globally, count.
//!
//! Shots are cut into fixed chunks decoded on a rayon pool. Every shot's
//! randomness depends only on `(seed, shot)` and chunk counters are summed in
//! chunk order, so results do not depend on the worker count.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{fit_loglog_slope, LerEstimate, MIN_FIT_FAILURES};
use crate::engine::{run_global, EngineOptions, WindowedDecoder};
use crate::geometry::{WindowConfig, WindowId};
use crate::graph::DecodingGraph;
use crate::io::LerRow;
use crate::matcher::TieRule;
use crate::noise::sample;
use crate::Error;

pub const CHUNK_SHOTS: u64 = 512;

#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DecoderCounts {
    /// Failures per graph cut.
    pub failures: Vec<u64>,
    /// Shots abandoned on a lone defect or left with a residual syndrome.
    pub decode_failures: u64,
}

impl DecoderCounts {
    fn new(ncuts: usize) -> Self {
        DecoderCounts { failures: vec![0; ncuts], decode_failures: 0 }
    }

    fn add(&mut self, o: &DecoderCounts) {
        for (a, b) in self.failures.iter_mut().zip(&o.failures) {
            *a += b;
        }
        self.decode_failures += o.decode_failures;
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RunCounts {
    pub shots: u64,
    pub windowed: Option<DecoderCounts>,
    pub global: Option<DecoderCounts>,
    /// Per `(from, to)` pair: `hist[k]` shots carried `k` artificial defects.
    pub histograms: BTreeMap<(WindowId, WindowId), Vec<u64>>,
}

impl RunCounts {
    fn merge(&mut self, o: RunCounts) {
        self.shots += o.shots;
        for (mine, theirs) in [(&mut self.windowed, o.windowed), (&mut self.global, o.global)] {
            match (mine.as_mut(), theirs) {
                (Some(m), Some(t)) => m.add(&t),
                (None, Some(t)) => *mine = Some(t),
                _ => {}
            }
        }
        for (k, h) in o.histograms {
            let mine = self.histograms.entry(k).or_default();
            if mine.len() < h.len() {
                mine.resize(h.len(), 0);
            }
            for (a, b) in mine.iter_mut().zip(h) {
                *a += b;
            }
        }
    }

    /// Mean artificial defects per shot on a link.
    pub fn mean_defects(&self, link: (WindowId, WindowId)) -> f64 {
        let Some(h) = self.histograms.get(&link) else { return 0.0 };
        let n: u64 = h.iter().sum();
        if n == 0 {
            return 0.0;
        }
        h.iter().enumerate().map(|(k, &c)| k as f64 * c as f64).sum::<f64>() / n as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSpec {
    pub p: f64,
    pub shots: u64,
    pub seed: u64,
    /// 0 uses rayon's default.
    pub workers: usize,
    pub windowed: bool,
    pub global: bool,
    pub options: EngineOptions,
    pub global_tie: TieRule,
}

impl RunSpec {
    pub fn new(p: f64, shots: u64, seed: u64) -> Self {
        RunSpec {
            p,
            shots,
            seed,
            workers: 0,
            windowed: true,
            global: true,
            options: EngineOptions::default(),
            global_tie: TieRule::Deterministic,
        }
    }
}

/// Samples `spec.shots` shots on `graph` and decodes each with the requested
/// decoders. `config` is needed only for windowed decoding.
pub fn simulate(graph: &DecodingGraph, config: Option<&WindowConfig>, spec: &RunSpec) -> Result<RunCounts, Error> {
    if !(0.0..0.5).contains(&spec.p) {
        return Err(Error::InvalidConfig(format!("p must lie in [0, 0.5), got {}", spec.p)));
    }
    let decoder = match (spec.windowed, config) {
        (true, Some(c)) => Some(WindowedDecoder::new(graph, c)?),
        (true, None) => return Err(Error::InvalidConfig("windowed run needs a window config".into())),
        (false, _) => None,
    };
    if let Some(d) = &decoder {
        d.precompute();
    }
    graph.matching_graph_cached().precompute();
    let links: Vec<(WindowId, WindowId)> = config.map(|c| c.links.iter().map(|l| (l.from, l.to)).collect()).unwrap_or_default();
    let ncuts = graph.cuts.len();

    let run_chunk = |chunk: u64| -> Result<RunCounts, Error> {
        let lo = chunk * CHUNK_SHOTS;
        let hi = (lo + CHUNK_SHOTS).min(spec.shots);
        let mut out = RunCounts {
            shots: hi - lo,
            windowed: decoder.as_ref().map(|_| DecoderCounts::new(ncuts)),
            global: spec.global.then(|| DecoderCounts::new(ncuts)),
            histograms: links.iter().map(|&l| (l, Vec::new())).collect(),
        };
        for shot in lo..hi {
            let s = sample(graph, spec.p, spec.seed, shot);
            if let (Some(dec), Some(c)) = (&decoder, out.windowed.as_mut()) {
                let o = dec.run(&s, &spec.options)?;
                tally(c, &o.logical_flips, o.failure.is_some());
                let mut per: BTreeMap<(WindowId, WindowId), usize> = BTreeMap::new();
                for m in &o.messages {
                    *per.entry((m.from, m.to)).or_default() += m.positions.len();
                }
                for (l, h) in out.histograms.iter_mut() {
                    bump(h, per.remove(l).unwrap_or(0));
                }
                for (l, k) in per {
                    bump(out.histograms.entry(l).or_default(), k);
                }
            }
            if let Some(c) = out.global.as_mut() {
                let o = run_global(graph, &s, spec.global_tie)?;
                tally(c, &o.logical_flips, o.failure.is_some());
            }
        }
        Ok(out)
    };

    let chunks = spec.shots.div_ceil(CHUNK_SHOTS);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let parts: Vec<Result<RunCounts, Error>> = pool.install(|| (0..chunks).into_par_iter().map(run_chunk).collect());
    let mut total = RunCounts {
        windowed: decoder.as_ref().map(|_| DecoderCounts::new(ncuts)),
        global: spec.global.then(|| DecoderCounts::new(ncuts)),
        ..Default::default()
    };
    for part in parts {
        total.merge(part?);
    }
    Ok(total)
}

fn tally(c: &mut DecoderCounts, flips: &[bool], failed: bool) {
    for (n, &f) in c.failures.iter_mut().zip(flips) {
        *n += f as u64;
    }
    c.decode_failures += failed as u64;
}

fn bump(h: &mut Vec<u64>, k: usize) {
    if h.len() <= k {
        h.resize(k + 1, 0);
    }
    h[k] += 1;
}

/// One measured point of a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub decoder: String,
    pub d: u32,
    pub w: u32,
    pub p: f64,
    pub cut: String,
    pub estimate: LerEstimate,
}

/// LER rows with a log-log slope fitted across `p` for each
/// `(decoder, w, cut)` series. Rows keep the input order.
pub fn ler_rows(points: &[SweepPoint]) -> Vec<LerRow> {
    let mut series: BTreeMap<(String, u32, String), Vec<(f64, LerEstimate)>> = BTreeMap::new();
    for pt in points {
        series.entry((pt.decoder.clone(), pt.w, pt.cut.clone())).or_default().push((pt.p, pt.estimate));
    }
    let fits: BTreeMap<_, _> = series.into_iter().map(|(k, v)| (k, fit_loglog_slope(&v))).collect();
    points
        .iter()
        .map(|pt| {
            let fit = fits[&(pt.decoder.clone(), pt.w, pt.cut.clone())];
            LerRow {
                decoder: pt.decoder.clone(),
                d: pt.d,
                w: pt.w,
                p: pt.p,
                cut: pt.cut.clone(),
                shots: pt.estimate.shots,
                failures: pt.estimate.failures,
                rate: pt.estimate.rate,
                ci_lo: pt.estimate.ci_lo,
                ci_hi: pt.estimate.ci_hi,
                slope: fit.map(|f| f.slope),
                slope_stderr: fit.map(|f| f.stderr),
                low_failures: pt.estimate.failures < MIN_FIT_FAILURES,
            }
        })
        .collect()
}
