//! Closed-form quantities of the windowed scheme, plus statistics.

use serde::{Deserialize, Serialize};

pub mod confusion;
pub mod stats;

pub use confusion::{generate_confusion_string, generate_long_edge_case, CaseKind, ConfusionCase};
pub use stats::{
    fit_defect_poisson, fit_loglog_slope, wilson_interval, DefectStats, LerEstimate, SlopeFit, MIN_FIT_FAILURES,
};

/// Weight the first window pays for the wrong matching of a diagonal error
/// string of length `l` crossing the seam: the near end to its closest
/// natural boundary plus the far end to the artificial one.
pub fn wrong_matching_weight(d: u32, w: u32, l: u32) -> u32 {
    let near = ((d as i64 - 1) / 2 + 1 - l as i64).max(0);
    let far = (w as i64 + 1 - l as i64).max(0);
    (near + far) as u32
}

/// Shortest string the first window can mis-match at no extra cost, if
/// any string shorter than half the code distance does.
pub fn min_confusable_l(d: u32, w: u32) -> Option<u32> {
    let half = d.div_ceil(2);
    (1..half).find(|&l| wrong_matching_weight(d, w, l) <= l)
}

/// Bits addressing one defect position on a seam of a distance-`d` window.
pub fn bits_per_defect(d: u32) -> u32 {
    let target = d as u64 * d as u64;
    (0..64).find(|&k| 1u64 << (k + 1) >= target).unwrap_or(63)
}

/// Fixed link latency in cycles before the first payload word.
pub const LINK_BASE_CYCLES: u32 = 54;
pub const LINK_WORD_BITS: u32 = 64;
pub const DEFAULT_CLOCK_NS: f64 = 4.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommCostReport {
    pub d: u32,
    pub bits_per_defect: u32,
    pub message_bits: u32,
    pub cycles: u32,
    pub ns: f64,
    pub ns_per_round: f64,
}

/// Cost of sending `mean_defects` seam defects over one link, each defect
/// taking two words of `bits_per_defect(d)` bits.
pub fn comm_cost(d: u32, mean_defects: f64, clock_ns: f64) -> CommCostReport {
    let bpd = bits_per_defect(d);
    let bits = (2.0 * mean_defects * bpd as f64).ceil().max(0.0) as u32;
    comm_cost_bits(d, bits, clock_ns)
}

/// As [`comm_cost`] with the message size given directly.
pub fn comm_cost_bits(d: u32, message_bits: u32, clock_ns: f64) -> CommCostReport {
    let cycles = LINK_BASE_CYCLES + message_bits.div_ceil(LINK_WORD_BITS);
    let ns = cycles as f64 * clock_ns;
    CommCostReport {
        d,
        bits_per_defect: bits_per_defect(d),
        message_bits,
        cycles,
        ns,
        ns_per_round: ns / d as f64,
    }
}

/// Seam defects per block scale with the seam area: `lambda = c p d^2 / 2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefectScaling {
    pub c: f64,
}

impl DefectScaling {
    /// Calibrates `c` from measured means `lambda_hat` at edge probability
    /// `p` over seams of `seam_area` (columns times rounds).
    pub fn calibrate(points: &[(f64, f64, f64)]) -> Option<Self> {
        let cs: Vec<f64> =
            points.iter().filter(|(p, _, a)| *p > 0.0 && *a > 0.0).map(|(p, lam, a)| lam / (p * a)).collect();
        (!cs.is_empty()).then(|| DefectScaling { c: cs.iter().sum::<f64>() / cs.len() as f64 })
    }

    pub fn lambda(&self, d: u32, p: f64) -> f64 {
        self.c * p * (d as f64) * (d as f64) / 2.0
    }
}

/// Order-of-magnitude logical error rate per cycle, `(100 p)^((d+1)/2)`.
pub fn logical_rate_scaling(p: f64, d: u32) -> f64 {
    (100.0 * p).powf((d as f64 + 1.0) / 2.0)
}

/// Distance needed for a target logical rate under [`logical_rate_scaling`].
pub fn required_distance(p: f64, target: f64) -> Option<u32> {
    (1..=1001).step_by(2).find(|&d| logical_rate_scaling(p, d) <= target)
}
