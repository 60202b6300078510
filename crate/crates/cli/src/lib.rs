//! The `spwin` command line: sweeps, adversarial replays, link cost tables,
//! layout checks and graph dumps.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use spwin::analysis::{
    comm_cost, comm_cost_bits, fit_defect_poisson, generate_confusion_string, generate_long_edge_case,
    CaseKind, DefectScaling, LerEstimate, DEFAULT_CLOCK_NS,
};
use spwin::engine::{replay_adversarial, EngineOptions, WindowedDecoder};
use spwin::experiment::{ler_rows, simulate, RunSpec, SweepPoint};
use spwin::geometry::{
    check_two_colorable, has_errors, rect_scenario, segment3_scenario, staggered_scenario, two_row_scenario,
    validate, GraphType, MergeScenario, PatchPlacement,
};
use spwin::graph::build_graph;
use spwin::io::{load_scenario, read_csv, write_csv, CommRow, DefectRow};
use spwin::matcher::TieRule;
use spwin::noise::sample;
use spwin::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "spwin", version, about = "Spatially parallel window decoding experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Windowed and global logical error rates over a (d, w, p) grid.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Drop the artificial-defect messages between windows.
        #[arg(long)]
        no_messages: bool,
        /// Also write the first N shots of every point as JSON lines.
        #[arg(long, default_value_t = 0)]
        trace: u64,
    },
    /// Build a confusion string and replay it on every tie branch.
    Adversarial {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = Edge::Short)]
        edge: Edge,
        /// Window widths `a,b` for a long-edge case (default `d,d`).
        #[arg(long, value_delimiter = ',')]
        widths: Option<Vec<u32>>,
        /// Patch height for a long-edge case (default `d`).
        #[arg(long)]
        height: Option<u32>,
    },
    /// Link latency per distance.
    Comm {
        #[command(flatten)]
        common: Common,
        /// Mean artificial defects per graph per block.
        #[arg(long)]
        lambda: Option<f64>,
        /// Message size in bits, overriding the defect model.
        #[arg(long)]
        bits: Option<u32>,
        /// A `defects.csv` from a sweep to calibrate the defect model.
        #[arg(long)]
        calibration: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_CLOCK_NS)]
        clock_ns: f64,
    },
    /// Validate a window layout.
    Check {
        #[command(flatten)]
        common: Common,
        /// Also decide whether the patch blocks can be split into two layers.
        #[arg(long)]
        two_color: bool,
        /// Block size for the two-colouring (default from the file, else d).
        #[arg(long)]
        tile: Option<u32>,
    },
    /// Print the decoding graph, one edge per line.
    DumpGraph {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Edge {
    Short,
    Long,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphArg {
    X,
    Z,
    Both,
}

impl GraphArg {
    fn types(self) -> Vec<GraphType> {
        match self {
            GraphArg::X => vec![GraphType::X],
            GraphArg::Z => vec![GraphType::Z],
            GraphArg::Both => vec![GraphType::X, GraphType::Z],
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// `rect`, `two-row-a`, `two-row-b`, `staggered`, `segment3`, or a JSON file.
    #[arg(long, default_value = "rect")]
    pub scenario: String,
    #[arg(long, value_delimiter = ',', default_value = "9")]
    pub d: Vec<u32>,
    #[arg(long, value_delimiter = ',', default_value = "2")]
    pub w: Vec<u32>,
    #[arg(long, value_delimiter = ',', default_value = "0.01")]
    pub p: Vec<f64>,
    /// Rounds per block (default d).
    #[arg(long)]
    pub rounds: Option<u32>,
    #[arg(long, default_value_t = 10_000)]
    pub shots: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// `deterministic`, `random[:seed]` or `branch:k`.
    #[arg(long, default_value = "deterministic", value_parser = parse_tie)]
    pub tie_rule: TieRule,
    #[arg(long, value_enum, default_value_t = GraphArg::X)]
    pub graph_type: GraphArg,
    /// Output directory (default: the current one; `dump-graph` prints
    /// to stdout unless given).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads, 0 for one per core. Does not change results.
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    /// Grid of the staggered preset, `ROWSxCOLS`.
    #[arg(long, default_value = "2x2", value_parser = parse_grid)]
    pub grid: (u32, u32),
}

fn parse_tie(s: &str) -> Result<TieRule, String> {
    let (name, arg) = s.split_once(':').map_or((s, None), |(a, b)| (a, Some(b)));
    let num = |a: Option<&str>| a.map(|x| x.parse::<u64>().map_err(|e| format!("{x}: {e}"))).transpose();
    match name {
        "deterministic" if arg.is_none() => Ok(TieRule::Deterministic),
        "random" => Ok(TieRule::SeededRandom(num(arg)?.unwrap_or(0))),
        "branch" => Ok(TieRule::Branch(num(arg)?.ok_or("branch needs an index")? as u32)),
        _ => Err(format!("unknown tie rule {s}")),
    }
}

fn parse_grid(s: &str) -> Result<(u32, u32), String> {
    let (r, c) = s.split_once('x').ok_or("expected ROWSxCOLS")?;
    Ok((r.parse().map_err(|e| format!("{e}"))?, c.parse().map_err(|e| format!("{e}"))?))
}

fn tie_name(t: TieRule) -> String {
    match t {
        TieRule::Deterministic => "deterministic".into(),
        TieRule::SeededRandom(s) => format!("random:{s}"),
        TieRule::Branch(k) => format!("branch:{k}"),
    }
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl Common {
    /// Parameter echo for output headers. Leaves out `--workers` and
    /// `--out`, which must not change the bytes written.
    fn echo(&self, cmd: &str) -> String {
        let mut s = format!(
            "spwin {cmd} scenario={} d={} w={} p={} rounds={} shots={} seed={} tie_rule={} graph_type={}",
            self.scenario,
            join(&self.d),
            join(&self.w),
            join(&self.p),
            self.rounds.map_or("d".into(), |r| r.to_string()),
            self.shots,
            self.seed,
            tie_name(self.tie_rule),
            serde_json::to_value(self.graph_type).unwrap().as_str().unwrap(),
        );
        if self.scenario == "staggered" {
            let _ = write!(s, " grid={}x{}", self.grid.0, self.grid.1);
        }
        s
    }

    fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    fn check(&self) -> Result<(), Error> {
        if self.d.is_empty() || self.w.is_empty() || self.p.is_empty() {
            return Err(Error::InvalidConfig("sweep lists must be non-empty".into()));
        }
        if self.shots == 0 {
            return Err(Error::InvalidConfig("shots must be at least 1".into()));
        }
        Ok(())
    }

    fn scenario(&self, d: u32, w: u32) -> Result<(MergeScenario, Option<u32>), Error> {
        let rounds = self.rounds.unwrap_or(d);
        let s = match self.scenario.as_str() {
            "rect" => rect_scenario(d, w, rounds)?,
            "two-row-a" => two_row_scenario(d, w, rounds, PatchPlacement::TopRight)?,
            "two-row-b" => two_row_scenario(d, w, rounds, PatchPlacement::TopLeft)?,
            "staggered" => staggered_scenario(self.grid.0, self.grid.1, d, w, rounds)?,
            "segment3" => segment3_scenario(d, w, rounds)?,
            path => return load_scenario(Path::new(path)),
        };
        Ok((s, None))
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Infeasible { .. } => EXIT_INFEASIBLE,
        Error::Io(_) | Error::ResidualSyndrome(_) | Error::TooManyDefects(..) => EXIT_FAILURE,
        _ => EXIT_INVALID,
    }
}

/// Parses `args` (program name first) and runs the command, printing a
/// summary to `out`. Returns the process exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(out, "{e}");
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    let res = match &cli.command {
        Command::Sweep { common, no_messages, trace } => sweep(common, *no_messages, *trace, out),
        Command::Adversarial { common, edge, widths, height } => adversarial(common, *edge, widths.as_deref(), *height, out),
        Command::Comm { common, lambda, bits, calibration, clock_ns } => {
            comm(common, *lambda, *bits, calibration.as_deref(), *clock_ns, out)
        }
        Command::Check { common, two_color, tile } => check(common, *two_color, *tile, out),
        Command::DumpGraph { common } => dump_graph(common, out),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(out, "error: {e}");
            exit_code(&e)
        }
    }
}

fn validated(common: &Common, d: u32, w: u32, out: &mut dyn Write) -> Result<Option<MergeScenario>, Error> {
    let (s, _) = common.scenario(d, w)?;
    let v = validate(&s);
    for x in &v {
        writeln!(out, "{x}")?;
    }
    Ok((!has_errors(&v)).then_some(s))
}

fn graph_label(g: GraphType) -> &'static str {
    match g {
        GraphType::X => "x",
        GraphType::Z => "z",
    }
}

fn sweep(c: &Common, no_messages: bool, trace: u64, out: &mut dyn Write) -> Result<i32, Error> {
    c.check()?;
    fs::create_dir_all(c.out_dir())?;
    let mut points = Vec::new();
    let mut defect_rows = Vec::new();
    let mut traces = format!("{}\n", serde_json::json!({"header": c.echo("sweep")}));
    for gt in c.graph_type.types() {
        for &d in &c.d {
            for &w in &c.w {
                let Some(s) = validated(c, d, w, out)? else { return Ok(EXIT_INVALID) };
                let cuts = s.cuts_for(gt);
                if cuts.is_empty() {
                    return Err(Error::InvalidConfig(format!("scenario tracks no cut on the {gt} graph")));
                }
                for &p in &c.p {
                    let g = build_graph(&s.patch, &cuts, gt, s.config.rounds, p)?;
                    let mut spec = RunSpec::new(p, c.shots, c.seed);
                    spec.workers = c.workers;
                    spec.options = EngineOptions { tie_rule: c.tie_rule, deliver_messages: !no_messages, ..Default::default() };
                    spec.global_tie = c.tie_rule;
                    let r = simulate(&g, Some(&s.config), &spec)?;
                    for (name, counts) in [("windowed", &r.windowed), ("global", &r.global)] {
                        let counts = counts.as_ref().expect("both decoders run");
                        for (k, cut) in g.cuts.iter().enumerate() {
                            let est = LerEstimate::new(counts.failures[k], r.shots);
                            writeln!(
                                out,
                                "{name:8} {gt} d={d} w={w} p={p} {}: {}/{} = {:.3e} [{:.3e}, {:.3e}]",
                                cut.cut.label, est.failures, est.shots, est.rate, est.ci_lo, est.ci_hi
                            )?;
                            points.push(SweepPoint { decoder: name.into(), d, w, p, cut: cut.cut.label.clone(), estimate: est });
                        }
                    }
                    for (&(from, to), h) in &r.histograms {
                        let lambda_hat = r.mean_defects((from, to));
                        for (k, &n) in h.iter().enumerate() {
                            defect_rows.push(DefectRow {
                                graph: graph_label(gt).into(),
                                d,
                                w,
                                p,
                                link: format!("{from}->{to}"),
                                count: k,
                                shots: n,
                                frequency: n as f64 / r.shots as f64,
                                lambda_hat,
                            });
                        }
                    }
                    if trace > 0 {
                        let dec = WindowedDecoder::new(&g, &s.config)?;
                        for shot in 0..trace.min(c.shots) {
                            let o = dec.run(&sample(&g, p, c.seed, shot), &spec.options)?;
                            let line = serde_json::json!({"graph": graph_label(gt), "d": d, "w": w, "p": p, "outcome": o});
                            traces.push_str(&line.to_string());
                            traces.push('\n');
                        }
                    }
                }
            }
        }
    }
    let header = c.echo("sweep") + if no_messages { " no_messages=true" } else { "" };
    write_csv(fs::File::create(c.out_dir().join("ler.csv"))?, &header, &ler_rows(&points))?;
    write_csv(fs::File::create(c.out_dir().join("defects.csv"))?, &header, &defect_rows)?;
    if trace > 0 {
        fs::write(c.out_dir().join("trace.jsonl"), traces)?;
    }
    Ok(EXIT_OK)
}

fn adversarial(c: &Common, edge: Edge, widths: Option<&[u32]>, height: Option<u32>, out: &mut dyn Write) -> Result<i32, Error> {
    let mut reports = Vec::new();
    for &d in &c.d {
        for &w in &c.w {
            let case = match (edge, widths, height) {
                (Edge::Short, _, _) => generate_confusion_string(d, w, CaseKind::Short)?,
                (Edge::Long, None, None) => generate_confusion_string(d, w, CaseKind::Long)?,
                (Edge::Long, wd, h) => {
                    let (a, b) = match wd {
                        Some([a, b]) => (*a, *b),
                        None => (d, d),
                        _ => return Err(Error::InvalidConfig("--widths takes two values".into())),
                    };
                    generate_long_edge_case(a, b, h.unwrap_or(d), w)?
                }
            };
            let r = replay_adversarial(&case)?;
            writeln!(out, "case: {}", serde_json::to_string(&case)?)?;
            writeln!(
                out,
                "d={d} w={w} l={} wrong_weight={}: windowed flips {}/{} branches (deterministic {}), global flips {}/{}",
                case.l,
                case.wrong_weight,
                r.windowed_flips.iter().filter(|&&f| f).count(),
                r.windowed_flips.len(),
                r.deterministic_windowed_flip as u8,
                r.global_flips.iter().filter(|&&f| f).count(),
                r.global_flips.len(),
            )?;
            reports.push(serde_json::json!({"case": case, "report": r}));
        }
    }
    fs::create_dir_all(c.out_dir())?;
    let mut text = format!("{}\n", serde_json::json!({"header": c.echo("adversarial")}));
    for r in reports {
        text.push_str(&r.to_string());
        text.push('\n');
    }
    fs::write(c.out_dir().join("adversarial.jsonl"), text)?;
    Ok(EXIT_OK)
}

/// Fits the defect model to a sweep's `defects.csv`.
pub fn calibrate(path: &Path) -> Result<DefectScaling, Error> {
    let rows: Vec<DefectRow> = read_csv(&fs::read_to_string(path)?)?;
    let mut points = Vec::new();
    // One fit per (graph, d, w, p, link) histogram.
    let mut groups: std::collections::BTreeMap<String, (f64, u32, Vec<u64>)> = Default::default();
    for r in &rows {
        let key = format!("{} {} {} {} {}", r.graph, r.d, r.w, r.p, r.link);
        let e = groups.entry(key).or_insert_with(|| (r.p, r.d, Vec::new()));
        if e.2.len() <= r.count {
            e.2.resize(r.count + 1, 0);
        }
        e.2[r.count] += r.shots;
    }
    for (p, d, h) in groups.into_values() {
        let stats = fit_defect_poisson(&h)?;
        points.push((p, stats.lambda_hat, d as f64 * d as f64 / 2.0));
    }
    DefectScaling::calibrate(&points).ok_or_else(|| Error::InvalidConfig("calibration file has no usable rows".into()))
}

fn comm(
    c: &Common,
    lambda: Option<f64>,
    bits: Option<u32>,
    calibration: Option<&Path>,
    clock_ns: f64,
    out: &mut dyn Write,
) -> Result<i32, Error> {
    if c.d.is_empty() || c.d.iter().any(|&d| d < 2) {
        return Err(Error::InvalidConfig("comm needs distances of at least 2".into()));
    }
    let scaling = calibration.map(calibrate).transpose()?;
    let p = c.p[0];
    let mut header = c.echo("comm") + &format!(" clock_ns={clock_ns}");
    let mut rows = Vec::new();
    for &d in &c.d {
        let r = match (bits, lambda, &scaling) {
            (Some(b), _, _) => comm_cost_bits(d, b, clock_ns),
            (None, Some(l), _) => comm_cost(d, l, clock_ns),
            (None, None, Some(s)) => comm_cost(d, s.lambda(d, p), clock_ns),
            _ => return Err(Error::InvalidConfig("comm needs --bits, --lambda or --calibration".into())),
        };
        let mean = match (bits, lambda, &scaling) {
            (Some(b), _, _) => b as f64 / (2.0 * r.bits_per_defect as f64),
            (None, Some(l), _) => l,
            (None, None, Some(s)) => s.lambda(d, p),
            _ => unreachable!(),
        };
        writeln!(
            out,
            "d={d} bits/defect={} message_bits={} cycles={} ns={} ns/round={:.2}",
            r.bits_per_defect, r.message_bits, r.cycles, r.ns, r.ns_per_round
        )?;
        rows.push(CommRow {
            d,
            mean_defects: mean,
            bits_per_defect: r.bits_per_defect,
            message_bits: r.message_bits,
            cycles: r.cycles,
            ns: r.ns,
            ns_per_round: r.ns_per_round,
        });
    }
    if let Some(b) = bits {
        let _ = write!(header, " bits={b}");
    }
    if let Some(l) = lambda {
        let _ = write!(header, " lambda={l}");
    }
    if let Some(s) = &scaling {
        let _ = write!(header, " calibrated_c={}", s.c);
    }
    fs::create_dir_all(c.out_dir())?;
    write_csv(fs::File::create(c.out_dir().join("comm.csv"))?, &header, &rows)?;
    Ok(EXIT_OK)
}

fn check(c: &Common, two_color: bool, tile: Option<u32>, out: &mut dyn Write) -> Result<i32, Error> {
    let d = c.d[0];
    let w = c.w[0];
    let (s, file_tile) = c.scenario(d, w)?;
    let mut bad = false;
    if s.config.windows.is_empty() {
        writeln!(out, "no windows given; layout rules skipped")?;
    } else {
        let v = validate(&s);
        for x in &v {
            writeln!(out, "{x}")?;
        }
        bad |= has_errors(&v);
        writeln!(out, "{} violation(s), {} layer(s)", v.len(), s.config.layers().len())?;
    }
    if two_color {
        let t = tile.or(file_tile).unwrap_or(s.isolated_distance.max(1));
        if check_two_colorable(&s.patch.cells, t)? {
            writeln!(out, "two-colorable with {t}x{t} blocks")?;
        } else {
            writeln!(out, "error: patch blocks cannot be split into two layers ({t}x{t} blocks)")?;
            bad = true;
        }
    }
    Ok(if bad { EXIT_INVALID } else { EXIT_OK })
}

fn dump_graph(c: &Common, out: &mut dyn Write) -> Result<i32, Error> {
    let gts = c.graph_type.types();
    let (s, _) = c.scenario(c.d[0], c.w[0])?;
    for gt in gts {
        let g = build_graph(&s.patch, &s.cuts_for(gt), gt, s.config.rounds, c.p[0])?;
        let text = format!("# {} graph={}\n{}", c.echo("dump-graph"), graph_label(gt), g.to_text());
        if let Some(dir) = &c.out {
            fs::create_dir_all(dir)?;
            fs::write(dir.join(format!("graph_{}.txt", graph_label(gt))), text)?;
            writeln!(out, "{gt} graph: {} nodes, {} edges", g.num_nodes(), g.num_edges())?;
        } else {
            out.write_all(text.as_bytes())?;
        }
    }
    Ok(EXIT_OK)
}
