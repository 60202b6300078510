//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines always reach the terminal.
//! Pass criterion ids (`AC4 AC5`) as arguments to run a subset.

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spwin::analysis::{
    bits_per_defect, comm_cost, comm_cost_bits, fit_defect_poisson, fit_loglog_slope, generate_confusion_string,
    CaseKind, LerEstimate, SlopeFit, DEFAULT_CLOCK_NS,
};
use spwin::engine::{replay_adversarial, run_global, EngineOptions, WindowedDecoder};
use spwin::experiment::{simulate, RunSpec};
use spwin::geometry::{
    check_two_colorable, patch_from_blocks, rect_cells, rect_scenario, segment3_scenario, staggered_squares,
    tree_blocks, two_row_scenario, validate, y_product_blocks, BoundaryLabel, GraphType, MergeScenario,
    PatchPlacement, PatchShape, ViolationKind, Window, WindowConfig, WindowId,
};
use spwin::graph::{build_graph, DecodingGraph, NodeId, Partition};
use spwin::matcher::{brute_force_decode, decode, FailureKind, TieRule, BRUTE_FORCE_MAX_DEFECTS};
use spwin::noise::sample;

// AC1
const ORACLE_INSTANCES: usize = 1200;
const ORACLE_TIME_LIMIT: Duration = Duration::from_secs(60);
// AC2
const IDENTITY_SHOTS: u64 = 10_000;
// AC4, AC5
const TREND_D: u32 = 9;
const TREND_P: f64 = 0.03;
const TREND_SHOTS: u64 = 200_000;
const TREND_WIDTHS: [u32; 4] = [1, 3, 5, 7];
const SLOPE_P: [f64; 3] = [0.02, 0.03, 0.045];
const SLOPE_SHOTS: u64 = 100_000;
const TREND_TIME_TARGET: Duration = Duration::from_secs(30 * 60);
// AC6: a global patch as wide as window A's view, commit region plus
// buffer plus the artificial boundary column.
const LONG_D: u32 = 7;
const LONG_P: f64 = 0.03;
const LONG_SHOTS: u64 = 100_000;
// AC7
const LONE_CASES: usize = 10_000;
// AC9
const POISSON_D: u32 = 9;
const POISSON_SHOTS: u64 = 20_000;
const POISSON_RATIO: f64 = 2.0;
const POISSON_RATIO_TOL: f64 = 0.15;
const POISSON_SIGMAS: f64 = 2.0;

const SEED: u64 = 20_260_101;

struct Check {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Check {
    Check { pass, detail: detail.into() }
}

fn scenario_graph(s: &MergeScenario, g: GraphType, p: f64) -> DecodingGraph {
    build_graph(&s.patch, &s.cuts_for(g), g, s.config.rounds, p).unwrap()
}

fn random_defects(rng: &mut ChaCha8Rng, nodes: &[NodeId], k: usize) -> Vec<NodeId> {
    let mut pool = nodes.to_vec();
    let mut out = Vec::with_capacity(k);
    for _ in 0..k.min(pool.len()) {
        out.push(pool.swap_remove(rng.random_range(0..pool.len())));
    }
    out.sort_unstable();
    out
}

fn ac1() -> Check {
    let t0 = Instant::now();
    let s = rect_scenario(5, 2, 5).unwrap();
    let graphs = [scenario_graph(&s, GraphType::X, 0.02), scenario_graph(&s, GraphType::Z, 0.02)];
    let parts: Vec<Partition> = graphs.iter().map(|g| Partition::new(g, &s.config).unwrap()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut mismatches = 0;
    for i in 0..ORACLE_INSTANCES {
        let gi = i % 2;
        let g = &graphs[gi];
        let k = rng.random_range(0..=BRUTE_FORCE_MAX_DEFECTS);
        let tie = match i % 3 {
            0 => TieRule::Deterministic,
            1 => TieRule::SeededRandom(rng.random()),
            _ => TieRule::Branch(rng.random_range(0..4)),
        };
        // Alternate between the whole graph and a window view of it.
        let (want, got) = if i % 4 < 2 {
            let nodes: Vec<NodeId> = (0..g.num_nodes() as u32).map(NodeId).collect();
            let d = random_defects(&mut rng, &nodes, k);
            (brute_force_decode(g, &d).unwrap().weight, decode(g, &d, tie).unwrap().weight)
        } else {
            let v = &parts[gi].windows[rng.random_range(0..2)];
            let d = random_defects(&mut rng, &v.nodes, k);
            (brute_force_decode(v, &d).unwrap().weight, decode(v, &d, tie).unwrap().weight)
        };
        mismatches += (want != got) as usize;
    }
    let dt = t0.elapsed();
    check(
        mismatches == 0 && dt < ORACLE_TIME_LIMIT,
        format!("{ORACLE_INSTANCES} instances, {mismatches} weight mismatches, {:.1}s", dt.as_secs_f64()),
    )
}

fn ac2() -> Check {
    let s = rect_scenario(7, 2, 7).unwrap();
    let one = WindowConfig::new(vec![Window { id: WindowId(0), cells: s.patch.cells.clone(), layer: 1 }], 2, 7);
    let mut differ = 0;
    for gt in [GraphType::X, GraphType::Z] {
        let g = scenario_graph(&s, gt, 0.02);
        let dec = WindowedDecoder::new(&g, &one).unwrap();
        for shot in 0..IDENTITY_SHOTS {
            let smp = sample(&g, 0.02, SEED, shot);
            let a = dec.run(&smp, &EngineOptions::default()).unwrap();
            let b = run_global(&g, &smp, TieRule::Deterministic).unwrap();
            differ += (a != b) as u64;
        }
    }
    check(differ == 0, format!("{IDENTITY_SHOTS} shots on each of the X and Z graphs, {differ} outcomes differ"))
}

fn ac3() -> Check {
    let mut ok = true;
    let mut notes = Vec::new();
    for (w, l) in [(3, 4), (9, 6)] {
        let c = generate_confusion_string(15, w, CaseKind::Short).unwrap();
        let r = replay_adversarial(&c).unwrap();
        let again = replay_adversarial(&c).unwrap();
        let good = c.l == l && r.windowed_can_fail() && r.global_never_fails() && r == again;
        ok &= good;
        notes.push(format!(
            "w={w}: l={} windowed {}/{} branches flip, global {}/{}",
            c.l,
            r.windowed_flips.iter().filter(|&&f| f).count(),
            r.windowed_flips.len(),
            r.global_flips.iter().filter(|&&f| f).count(),
            r.global_flips.len()
        ));
    }
    let infeasible: Vec<u32> =
        (13..=15).filter(|&w| matches!(generate_confusion_string(15, w, CaseKind::Short), Err(spwin::Error::Infeasible { .. }))).collect();
    ok &= infeasible == [13, 14, 15] && generate_confusion_string(15, 12, CaseKind::Short).is_ok();
    notes.push(format!("infeasible for w in {infeasible:?}"));
    check(ok, notes.join("; "))
}

/// Windowed short-edge estimates, memoised so AC5 can reuse AC4's points.
static WINDOWED: Mutex<BTreeMap<(u32, u64, u64), LerEstimate>> = Mutex::new(BTreeMap::new());

fn windowed_short(w: u32, p: f64, shots: u64) -> LerEstimate {
    let key = (w, p.to_bits(), shots);
    if let Some(e) = WINDOWED.lock().unwrap().get(&key) {
        return *e;
    }
    let s = rect_scenario(TREND_D, w, TREND_D).unwrap();
    let g = scenario_graph(&s, GraphType::X, p);
    let mut spec = RunSpec::new(p, shots, SEED);
    spec.global = false;
    let r = simulate(&g, Some(&s.config), &spec).unwrap();
    let c = r.windowed.unwrap();
    let e = LerEstimate::new(c.failures[g.cut_index("short").unwrap()], shots);
    WINDOWED.lock().unwrap().insert(key, e);
    e
}

fn fmt_est(e: &LerEstimate) -> String {
    format!("{:.4} [{:.4}, {:.4}]", e.rate, e.ci_lo, e.ci_hi)
}

fn ac4() -> Check {
    let t0 = Instant::now();
    let est: Vec<LerEstimate> = TREND_WIDTHS.iter().map(|&w| windowed_short(w, TREND_P, TREND_SHOTS)).collect();
    let s = rect_scenario(TREND_D, 1, TREND_D).unwrap();
    let g = scenario_graph(&s, GraphType::X, TREND_P);
    let mut spec = RunSpec::new(TREND_P, TREND_SHOTS, SEED);
    spec.windowed = false;
    let r = simulate(&g, None, &spec).unwrap();
    let global = LerEstimate::new(r.global.unwrap().failures[g.cut_index("short").unwrap()], TREND_SHOTS);
    let dt = t0.elapsed();

    let mut ok = true;
    let mut notes = Vec::new();
    for (k, pair) in est.windows(2).enumerate() {
        let separated = pair[1].rate < pair[0].rate && !pair[0].overlaps(&pair[1]);
        ok &= separated;
        notes.push(format!("w={}->{} {}", TREND_WIDTHS[k], TREND_WIDTHS[k + 1], if separated { "separated" } else { "OVERLAP" }));
    }
    let last = est.last().unwrap();
    let near_global = global.contains(last.rate);
    ok &= near_global;
    let rates: Vec<String> = TREND_WIDTHS.iter().zip(&est).map(|(w, e)| format!("w={w} {}", fmt_est(e))).collect();
    check(
        ok,
        format!(
            "{}; global {}; w=7 {} global interval; {}; {:.0}s (target {}s)",
            rates.join(", "),
            fmt_est(&global),
            if near_global { "inside" } else { "OUTSIDE" },
            notes.join(", "),
            dt.as_secs_f64(),
            TREND_TIME_TARGET.as_secs()
        ),
    )
}

fn slope_for(w: u32) -> SlopeFit {
    let pts: Vec<(f64, LerEstimate)> = SLOPE_P
        .iter()
        .map(|&p| {
            let shots = if p == TREND_P { TREND_SHOTS } else { SLOPE_SHOTS };
            (p, windowed_short(w, p, shots))
        })
        .collect();
    fit_loglog_slope(&pts).expect("three usable points")
}

fn ac5() -> Check {
    let (a, b) = (slope_for(1), slope_for(7));
    let ok = b.slope - b.stderr > a.slope + a.stderr;
    check(ok, format!("slope w=1 {:.3} +- {:.3}, w=7 {:.3} +- {:.3}", a.slope, a.stderr, b.slope, b.stderr))
}

fn ac6() -> Check {
    let mut ok = true;
    let mut notes = Vec::new();
    for w in [2u32, 4] {
        let s = rect_scenario(LONG_D, w, LONG_D).unwrap();
        let g = scenario_graph(&s, GraphType::Z, LONG_P);
        let cut = g.cut_index("long").unwrap();
        let mut spec = RunSpec::new(LONG_P, LONG_SHOTS, SEED);
        spec.global = false;
        let win = LerEstimate::new(simulate(&g, Some(&s.config), &spec).unwrap().windowed.unwrap().failures[cut], LONG_SHOTS);

        let width = (LONG_D + w + 1) as i32;
        let patch = PatchShape::rect(0, 0, width, LONG_D as i32, BoundaryLabel::Rough);
        let small = build_graph(&patch, &s.cuts_for(GraphType::Z), GraphType::Z, LONG_D, LONG_P).unwrap();
        let mut spec = RunSpec::new(LONG_P, LONG_SHOTS, SEED);
        spec.windowed = false;
        let reference = LerEstimate::new(simulate(&small, None, &spec).unwrap().global.unwrap().failures[cut], LONG_SHOTS);
        let inside = reference.contains(win.rate);
        ok &= inside;
        notes.push(format!("w={w}: windowed {} vs global on {width}x{LONG_D} {}", fmt_est(&win), fmt_est(&reference)));
    }
    check(ok, notes.join("; "))
}

fn ac7() -> Check {
    // Every window view without a boundary, over a few layouts.
    let mut graphs = Vec::new();
    for d in [3u32, 5, 7] {
        for w in 0..=2 {
            for rounds in [1u32, 2, 3] {
                let s = segment3_scenario(d, w, rounds).unwrap();
                for gt in [GraphType::X, GraphType::Z] {
                    graphs.push((scenario_graph(&s, gt, 0.01), s.config.clone()));
                }
            }
        }
    }
    let views: Vec<_> = graphs
        .iter()
        .flat_map(|(g, c)| Partition::new(g, c).unwrap().windows)
        .filter(|v| !v.matching.has_boundary())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut wrong = 0;
    let mut panics = 0;
    for _ in 0..LONE_CASES {
        let v = &views[rng.random_range(0..views.len())];
        let max_odd = (v.nodes.len() - 1) | 1;
        let k = 2 * rng.random_range(0..=max_odd / 2) + 1;
        let k = k.min(max_odd);
        let defects = random_defects(&mut rng, &v.nodes, k);
        let tie = if rng.random() { TieRule::Deterministic } else { TieRule::SeededRandom(rng.random()) };
        match catch_unwind(AssertUnwindSafe(|| decode(v, &defects, tie))) {
            Ok(Err(f)) if f.kind == FailureKind::LoneDefect && defects.contains(&f.witness) => {}
            Ok(_) => wrong += 1,
            Err(_) => panics += 1,
        }
    }
    check(
        !views.is_empty() && wrong == 0 && panics == 0,
        format!("{LONE_CASES} cases over {} boundary-less views, {wrong} not rejected, {panics} panics", views.len()),
    )
}

fn ac8() -> Check {
    let bits: Vec<u32> = [23, 32, 65, 89].iter().map(|&d| bits_per_defect(d)).collect();
    let r = comm_cost_bits(30, 94, DEFAULT_CLOCK_NS);
    let five = comm_cost(30, 5.0, DEFAULT_CLOCK_NS);
    let ok = bits == [9, 9, 12, 12]
        && (r.cycles, r.ns) == (56, 224.0)
        && r.ns_per_round.trunc() == 7.0
        && (five.message_bits, five.cycles) == (90, 56);
    check(
        ok,
        format!(
            "bits {bits:?}; 94 bits -> {} cycles, {} ns, {:.2} ns/round; 5 defects at d=30 -> {} bits",
            r.cycles, r.ns, r.ns_per_round, five.message_bits
        ),
    )
}

fn lambda(w: u32, p: f64) -> (f64, f64) {
    let s = rect_scenario(POISSON_D, w, POISSON_D).unwrap();
    let g = scenario_graph(&s, GraphType::X, p);
    let mut spec = RunSpec::new(p, POISSON_SHOTS, SEED);
    spec.global = false;
    let r = simulate(&g, Some(&s.config), &spec).unwrap();
    let h = &r.histograms[&(WindowId(0), WindowId(1))];
    let stats = fit_defect_poisson(h).unwrap();
    let var = h.iter().enumerate().map(|(k, &c)| (k as f64 - stats.lambda_hat).powi(2) * c as f64).sum::<f64>()
        / POISSON_SHOTS as f64;
    (stats.lambda_hat, (var / POISSON_SHOTS as f64).sqrt())
}

fn ac9() -> Check {
    let (lo, _) = lambda(4, 0.01);
    let (hi, _) = lambda(4, 0.02);
    let ratio = hi / lo;
    let mut ok = (ratio - POISSON_RATIO).abs() <= POISSON_RATIO_TOL * POISSON_RATIO;
    let mut notes = vec![format!("lambda(p=0.01) {lo:.4}, lambda(p=0.02) {hi:.4}, ratio {ratio:.3}")];
    for p in [0.01, 0.02] {
        let l: Vec<(f64, f64)> = [2, 4, 6].iter().map(|&w| lambda(w, p)).collect();
        let mut worst: f64 = 0.0;
        for i in 0..l.len() {
            for j in i + 1..l.len() {
                let z = (l[i].0 - l[j].0).abs() / (l[i].1.powi(2) + l[j].1.powi(2)).sqrt();
                worst = worst.max(z);
            }
        }
        ok &= worst <= POISSON_SIGMAS;
        let vals: Vec<String> = l.iter().map(|x| format!("{:.4}", x.0)).collect();
        notes.push(format!("p={p} w=2,4,6: {} (max {worst:.2} sigma)", vals.join(", ")));
    }
    check(ok, notes.join("; "))
}

fn ac10() -> Check {
    let cfg = staggered_squares(3, 3, 5, 2, 5).unwrap();
    let layers = cfg.layers();
    let s = MergeScenario {
        name: "grid".into(),
        patch: PatchShape { cells: cfg.windows.iter().flat_map(|w| w.cells.clone()).collect(), labels: PatchShape::rect(0, 0, 1, 1, BoundaryLabel::Rough).labels },
        config: cfg,
        cuts: vec![],
        isolated_distance: 5,
    };
    let same_layer = validate(&s).iter().any(|v| matches!(v.kind, ViolationKind::SameLayerAdjacent { .. }));
    let y = check_two_colorable(&patch_from_blocks(&y_product_blocks(), 3), 3).unwrap();
    let tree = check_two_colorable(&patch_from_blocks(&tree_blocks(), 3), 3).unwrap();

    // The patch slid one column right meets the lower right window in a
    // strip narrower than half its width.
    let mut narrow = two_row_scenario(7, 2, 1, PatchPlacement::TopRight).unwrap();
    let clean = validate(&narrow).is_empty();
    narrow.patch = PatchShape::rect(6, 0, 11, 14, BoundaryLabel::Rough);
    narrow.config.windows[0].cells = rect_cells(6, 0, 10, 7);
    let flagged = validate(&narrow).iter().any(|v| matches!(v.kind, ViolationKind::NarrowIntersection { .. }));

    check(
        layers == [1, 2, 3] && !same_layer && !y && tree && clean && flagged,
        format!(
            "staggered 3x3 layers {layers:?}, same-layer adjacency {same_layer}; y-product two-colourable {y}; \
             tree two-colourable {tree}; narrow intersection flagged {flagged}"
        ),
    )
}

fn run_cli(args: &[&str]) -> i32 {
    let mut sink = Vec::new();
    spwin_cli::run(std::iter::once("spwin").chain(args.iter().copied()), &mut sink)
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    for e in fs::read_dir(dir).unwrap() {
        let e = e.unwrap();
        files.insert(e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap());
    }
    files
}

fn ac11() -> Check {
    let t = tempfile::tempdir().unwrap();
    let commands: Vec<Vec<&str>> = vec![
        vec!["sweep", "--d", "5,7", "--w", "1,2", "--p", "0.01,0.03", "--shots", "1500", "--graph-type", "both", "--trace", "2", "--tie-rule", "random:4"],
        vec!["sweep", "--scenario", "staggered", "--d", "5", "--w", "2", "--p", "0.02", "--shots", "700", "--rounds", "3"],
        vec!["adversarial", "--d", "15", "--w", "3,9"],
        vec!["comm", "--d", "5,30,151", "--lambda", "4.5"],
        vec!["dump-graph", "--d", "5", "--w", "2", "--graph-type", "both"],
    ];
    let mut bad = Vec::new();
    let mut files = 0;
    for (k, cmd) in commands.iter().enumerate() {
        let mut snaps = Vec::new();
        for (run, workers) in ["1", "4", "1"].iter().enumerate() {
            let dir = t.path().join(format!("{k}-{run}"));
            let dir_s = dir.display().to_string();
            let mut args = cmd.clone();
            args.extend(["--seed", "7", "--workers", workers, "--out", &dir_s]);
            if run_cli(&args) != 0 {
                bad.push(format!("{} exited non-zero", cmd[0]));
            }
            snaps.push(snapshot(&dir));
        }
        files += snaps[0].len();
        if snaps[0].is_empty() || snaps[0] != snaps[1] || snaps[0] != snaps[2] {
            bad.push(format!("{} output differs", cmd[0]));
        }
        let missing_seed = snaps[0].values().any(|b| {
            !b.split(|&c| c == b'\n').next().is_some_and(|h| String::from_utf8_lossy(h).contains("seed=7"))
        });
        if missing_seed {
            bad.push(format!("{} header lacks the seed", cmd[0]));
        }
    }
    check(bad.is_empty(), format!("{} commands, {files} files, 3 runs each (workers 1, 4, 1); {}", commands.len(), if bad.is_empty() { "identical".into() } else { bad.join(", ") }))
}

type Criterion = (&'static str, fn() -> Check);

const CRITERIA: [Criterion; 11] = [
    ("AC1", ac1),
    ("AC2", ac2),
    ("AC3", ac3),
    ("AC4", ac4),
    ("AC5", ac5),
    ("AC6", ac6),
    ("AC7", ac7),
    ("AC8", ac8),
    ("AC9", ac9),
    ("AC10", ac10),
    ("AC11", ac11),
];

/// Criteria that are implemented as stated but not met; see the README.
// AC4: at p=0.03 the w=5 and w=7 rates differ by about 0.0017 and w=7 sits
// about 0.0018 above global. Separating the first pair needs ~5x the shots,
// at which point the second gap is resolved too, so both halves cannot hold.
const KNOWN_SHORTFALLS: &[&str] = &["AC4"];

fn main() {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut unexpected = Vec::new();
    for (id, f) in CRITERIA {
        if !filters.is_empty() && !filters.iter().any(|x| x == id) {
            continue;
        }
        let t0 = Instant::now();
        let c = catch_unwind(f).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            check(false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        let status = if c.pass { "PASS" } else { "FAIL" };
        println!("{id:5} {status} ({:.1}s) {}", t0.elapsed().as_secs_f64(), c.detail);
        if !c.pass && !KNOWN_SHORTFALLS.contains(&id) {
            unexpected.push(id);
        }
    }
    if !unexpected.is_empty() {
        println!("unexpected failures: {}", unexpected.join(" "));
        std::process::exit(1);
    }
}
