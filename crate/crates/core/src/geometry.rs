//! Patches, windows, layers and the geometric checks on them.
//!
//! Cells are data qubits at integer `(x, y)`, `y` growing downwards.
//! Detectors live on cell corners; see [`crate::graph`].

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "(i32, i32)", into = "(i32, i32)")]
pub struct Cell {
    pub x: i32,
    pub y: i32,
}

impl Cell {
    pub const fn new(x: i32, y: i32) -> Self {
        Cell { x, y }
    }

    pub fn chebyshev(self, other: Cell) -> i32 {
        (self.x - other.x).abs().max((self.y - other.y).abs())
    }

    pub fn neighbors4(self) -> [Cell; 4] {
        [
            Cell::new(self.x - 1, self.y),
            Cell::new(self.x + 1, self.y),
            Cell::new(self.x, self.y - 1),
            Cell::new(self.x, self.y + 1),
        ]
    }
}

impl From<(i32, i32)> for Cell {
    fn from((x, y): (i32, i32)) -> Self {
        Cell { x, y }
    }
}

impl From<Cell> for (i32, i32) {
    fn from(c: Cell) -> Self {
        (c.x, c.y)
    }
}

pub type CellSet = BTreeSet<Cell>;

/// All cells of the half-open box `[x0, x1) x [y0, y1)`.
pub fn rect_cells(x0: i32, y0: i32, x1: i32, y1: i32) -> CellSet {
    let mut s = CellSet::new();
    for y in y0..y1 {
        for x in x0..x1 {
            s.insert(Cell::new(x, y));
        }
    }
    s
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Top,
    Bottom,
    Left,
    Right,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Top, Side::Bottom, Side::Left, Side::Right];
}

/// Surface-code boundary type of the X-type decoding graph. The Z-type graph
/// sees every label flipped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryLabel {
    Rough,
    Smooth,
}

impl BoundaryLabel {
    pub fn flipped(self) -> Self {
        match self {
            BoundaryLabel::Rough => BoundaryLabel::Smooth,
            BoundaryLabel::Smooth => BoundaryLabel::Rough,
        }
    }
}

/// A labelled run of cells along one side, `[start, end)` in the coordinate
/// running along that side (x for top/bottom, y for left/right).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub start: i32,
    pub end: i32,
    pub label: BoundaryLabel,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryLabels {
    pub top: Vec<Segment>,
    pub bottom: Vec<Segment>,
    pub left: Vec<Segment>,
    pub right: Vec<Segment>,
}

impl BoundaryLabels {
    pub fn side(&self, side: Side) -> &[Segment] {
        match side {
            Side::Top => &self.top,
            Side::Bottom => &self.bottom,
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    /// Label of the cell at `pos` along `side`. Positions outside every
    /// segment fall back to the nearest one.
    pub fn label_at(&self, side: Side, pos: i32) -> Option<BoundaryLabel> {
        let segs = self.side(side);
        if let Some(s) = segs.iter().find(|s| s.start <= pos && pos < s.end) {
            return Some(s.label);
        }
        segs.iter()
            .min_by_key(|s| if pos < s.start { s.start - pos } else { pos - s.end + 1 })
            .map(|s| s.label)
    }
}

/// A patch of data qubits together with its boundary labels.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchShape {
    pub cells: CellSet,
    pub labels: BoundaryLabels,
}

/// Inclusive cell bounds `(xmin, ymin, xmax, ymax)`.
pub fn bounds(cells: &CellSet) -> Option<(i32, i32, i32, i32)> {
    let mut it = cells.iter();
    let first = it.next()?;
    let mut b = (first.x, first.y, first.x, first.y);
    for c in it {
        b.0 = b.0.min(c.x);
        b.1 = b.1.min(c.y);
        b.2 = b.2.max(c.x);
        b.3 = b.3.max(c.y);
    }
    Some(b)
}

impl PatchShape {
    /// Rectangle `[x0, x0+width) x [y0, y0+height)` with uniform labels:
    /// top/bottom get `top_bottom`, left/right the opposite.
    pub fn rect(x0: i32, y0: i32, width: i32, height: i32, top_bottom: BoundaryLabel) -> Self {
        let seg = |start, len, label| vec![Segment { start, end: start + len, label }];
        PatchShape {
            cells: rect_cells(x0, y0, x0 + width, y0 + height),
            labels: BoundaryLabels {
                top: seg(x0, width, top_bottom),
                bottom: seg(x0, width, top_bottom),
                left: seg(y0, height, top_bottom.flipped()),
                right: seg(y0, height, top_bottom.flipped()),
            },
        }
    }

    pub fn bounds(&self) -> Option<(i32, i32, i32, i32)> {
        bounds(&self.cells)
    }

    pub fn is_rectangular(&self) -> bool {
        match self.bounds() {
            Some((x0, y0, x1, y1)) => {
                self.cells.len() as i64 == (x1 - x0 + 1) as i64 * (y1 - y0 + 1) as i64
            }
            None => false,
        }
    }

    pub fn is_connected(&self) -> bool {
        is_connected(&self.cells)
    }
}

pub fn is_connected(cells: &CellSet) -> bool {
    let Some(&start) = cells.iter().next() else {
        return false;
    };
    let mut seen = BTreeSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some(c) = queue.pop_front() {
        for n in c.neighbors4() {
            if cells.contains(&n) && seen.insert(n) {
                queue.push_back(n);
            }
        }
    }
    seen.len() == cells.len()
}

fn edge_adjacent(a: &CellSet, b: &CellSet) -> bool {
    a.iter().any(|c| c.neighbors4().iter().any(|n| b.contains(n)))
}

/// Cells within Chebyshev distance `r` of `set`, `set` included.
fn dilate(set: &CellSet, r: i32) -> CellSet {
    let mut out = CellSet::new();
    for c in set {
        for dy in -r..=r {
            for dx in -r..=r {
                out.insert(Cell::new(c.x + dx, c.y + dy));
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WindowId(pub u32);

impl fmt::Display for WindowId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub id: WindowId,
    /// The commit region.
    pub cells: CellSet,
    /// Decoding layer, starting at 1.
    pub layer: u8,
}

/// Directed communication link between edge-adjacent windows, earlier
/// layer first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Link {
    pub from: WindowId,
    pub to: WindowId,
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.from, self.to)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowConfig {
    pub windows: Vec<Window>,
    pub buffer_width: u32,
    pub links: Vec<Link>,
    /// Rounds per decoding block; the buffer never extends in time.
    pub rounds: u32,
}

impl WindowConfig {
    /// Builds a config and derives its links.
    pub fn new(windows: Vec<Window>, buffer_width: u32, rounds: u32) -> Self {
        let mut cfg = WindowConfig { windows, buffer_width, links: Vec::new(), rounds };
        cfg.links = cfg.derived_links();
        cfg
    }

    pub fn window(&self, id: WindowId) -> Option<&Window> {
        self.windows.iter().find(|w| w.id == id)
    }

    /// Distinct layers in ascending order.
    pub fn layers(&self) -> Vec<u8> {
        let s: BTreeSet<u8> = self.windows.iter().map(|w| w.layer).collect();
        s.into_iter().collect()
    }

    /// One link per edge-adjacent pair in different layers.
    pub fn derived_links(&self) -> Vec<Link> {
        let mut links = Vec::new();
        for a in &self.windows {
            for b in &self.windows {
                if a.layer < b.layer && edge_adjacent(&a.cells, &b.cells) {
                    links.push(Link { from: a.id, to: b.id });
                }
            }
        }
        links.sort();
        links
    }

    pub fn has_link(&self, from: WindowId, to: WindowId) -> bool {
        self.links.iter().any(|l| l.from == from && l.to == to)
    }

    /// Cells of later-layer, edge-adjacent neighbours within Chebyshev
    /// distance `buffer_width` of this window's commit region.
    pub fn buffer_cells(&self, id: WindowId) -> CellSet {
        let Some(x) = self.window(id) else {
            return CellSet::new();
        };
        let reach = dilate(&x.cells, self.buffer_width as i32);
        let mut out = CellSet::new();
        for y in &self.windows {
            if y.layer > x.layer && edge_adjacent(&x.cells, &y.cells) {
                out.extend(y.cells.intersection(&reach).copied());
            }
        }
        out
    }

    /// Index of the window whose commit region holds `cell`, preferring the
    /// smallest `(layer, id)` if regions overlap.
    pub fn cell_owner_map(&self) -> BTreeMap<Cell, usize> {
        let mut order: Vec<usize> = (0..self.windows.len()).collect();
        order.sort_by_key(|&i| (self.windows[i].layer, self.windows[i].id));
        let mut map = BTreeMap::new();
        for &i in order.iter().rev() {
            for &c in &self.windows[i].cells {
                map.insert(c, i);
            }
        }
        map
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphType {
    /// Uses the boundary labels as given.
    X,
    /// Uses the boundary labels flipped.
    Z,
}

impl GraphType {
    pub fn parity(self) -> i32 {
        match self {
            GraphType::X => 0,
            GraphType::Z => 1,
        }
    }

    pub fn sees(self, label: BoundaryLabel) -> BoundaryLabel {
        match self {
            GraphType::X => label,
            GraphType::Z => label.flipped(),
        }
    }
}

impl fmt::Display for GraphType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GraphType::X => "x",
            GraphType::Z => "z",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CutAxis {
    /// Row `y = offset` of data qubits, running left to right.
    Horizontal,
    /// Column `x = offset`, running top to bottom.
    Vertical,
}

/// A line of data qubits (repeated in every round) whose flipped-parity
/// signals a logical error on the given graph.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogicalCut {
    pub label: String,
    pub axis: CutAxis,
    pub offset: i32,
    pub graph_type: GraphType,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeScenario {
    pub name: String,
    pub patch: PatchShape,
    pub config: WindowConfig,
    pub cuts: Vec<LogicalCut>,
    /// Distance of an isolated window, the `d` of the layout.
    pub isolated_distance: u32,
}

impl MergeScenario {
    pub fn cut(&self, label: &str) -> Option<&LogicalCut> {
        self.cuts.iter().find(|c| c.label == label)
    }

    pub fn cuts_for(&self, g: GraphType) -> Vec<LogicalCut> {
        self.cuts.iter().filter(|c| c.graph_type == g).cloned().collect()
    }
}

fn check_dw(d: u32, w: u32) -> Result<(), Error> {
    if d < 2 {
        return Err(Error::InvalidConfig(format!("distance must be at least 2, got {d}")));
    }
    if w > d {
        return Err(Error::InvalidConfig(format!("buffer width {w} exceeds distance {d}")));
    }
    Ok(())
}

/// Two `d x d` windows side by side over a `2d x d` patch with rough
/// top/bottom; A (layer 1) on the left, B (layer 2) on the right.
pub fn rect_scenario(d: u32, w: u32, rounds: u32) -> Result<MergeScenario, Error> {
    check_dw(d, w)?;
    linear_scenario(d, d, d, w, rounds).map(|mut s| {
        s.name = "rect".into();
        s.isolated_distance = d;
        s
    })
}

/// Two windows of widths `a` and `b`, height `h`, in a line. Rough top and
/// bottom, so the X graph has a short edge of `h` and the Z graph a long
/// edge of `a + b`.
pub fn linear_scenario(a: u32, b: u32, h: u32, w: u32, rounds: u32) -> Result<MergeScenario, Error> {
    if a == 0 || b == 0 || h < 2 || rounds == 0 {
        return Err(Error::InvalidConfig("empty window or patch".into()));
    }
    if w > b {
        return Err(Error::InvalidConfig(format!("buffer width {w} exceeds window B width {b}")));
    }
    let (a, b, h) = (a as i32, b as i32, h as i32);
    let windows = vec![
        Window { id: WindowId(0), cells: rect_cells(0, 0, a, h), layer: 1 },
        Window { id: WindowId(1), cells: rect_cells(a, 0, a + b, h), layer: 2 },
    ];
    Ok(MergeScenario {
        name: "linear".into(),
        patch: PatchShape::rect(0, 0, a + b, h, BoundaryLabel::Rough),
        config: WindowConfig::new(windows, w, rounds),
        cuts: vec![
            LogicalCut { label: "short".into(), axis: CutAxis::Horizontal, offset: h / 2, graph_type: GraphType::X },
            LogicalCut { label: "long".into(), axis: CutAxis::Vertical, offset: 0, graph_type: GraphType::Z },
        ],
        isolated_distance: h as u32,
    })
}

/// Three `d`-wide windows in a line with layers 1, 2, 1. The middle window
/// decodes last and, on the Z graph, has no rough boundary at all.
pub fn segment3_scenario(d: u32, w: u32, rounds: u32) -> Result<MergeScenario, Error> {
    check_dw(d, w)?;
    let di = d as i32;
    let windows = (0..3)
        .map(|k| Window {
            id: WindowId(k as u32),
            cells: rect_cells(k * di, 0, (k + 1) * di, di),
            layer: if k == 1 { 2 } else { 1 },
        })
        .collect();
    Ok(MergeScenario {
        name: "segment3".into(),
        patch: PatchShape::rect(0, 0, 3 * di, di, BoundaryLabel::Rough),
        config: WindowConfig::new(windows, w, rounds),
        cuts: vec![
            LogicalCut { label: "short".into(), axis: CutAxis::Horizontal, offset: di / 2, graph_type: GraphType::X },
            LogicalCut { label: "long".into(), axis: CutAxis::Vertical, offset: 0, graph_type: GraphType::Z },
        ],
        isolated_distance: d,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatchPlacement {
    TopRight,
    TopLeft,
}

/// The two-row merge: an upper row of two windows offset by `ceil(d/2)`
/// against a lower row of three, and a `(d + ceil(d/2)) x 2d` patch placed
/// against the top-right or top-left of the upper row.
///
/// Top-right puts both narrow windows in layer 1 and the lower middle window
/// in layer 3. Top-left is the mirror image, coloured so that the lower
/// middle window is in layer 1.
pub fn two_row_scenario(d: u32, w: u32, rounds: u32, placement: PatchPlacement) -> Result<MergeScenario, Error> {
    check_dw(d, w)?;
    let di = d as i32;
    let h = (di + 1) / 2;
    // (x0, row, layer) for top-right; mirrored for top-left.
    let (layout, patch_x0): (Vec<(i32, i32, u8)>, i32) = match placement {
        PatchPlacement::TopRight => (
            vec![(h, 0, 1), (h + di, 0, 2), (0, 1, 2), (di, 1, 3), (2 * di, 1, 1)],
            di,
        ),
        PatchPlacement::TopLeft => (
            vec![(di - h, 0, 3), (2 * di - h, 0, 2), (0, 1, 2), (di, 1, 1), (2 * di, 1, 3)],
            di - h,
        ),
    };
    let windows = layout
        .iter()
        .enumerate()
        .map(|(k, &(x0, row, layer))| Window {
            id: WindowId(k as u32),
            cells: rect_cells(x0, row * di, x0 + di, (row + 1) * di),
            layer,
        })
        .collect();
    let pw = di + h;
    Ok(MergeScenario {
        name: match placement {
            PatchPlacement::TopRight => "two-row-a".into(),
            PatchPlacement::TopLeft => "two-row-b".into(),
        },
        patch: PatchShape::rect(patch_x0, 0, pw, 2 * di, BoundaryLabel::Rough),
        config: WindowConfig::new(windows, w, rounds),
        cuts: vec![
            LogicalCut { label: "horizontal".into(), axis: CutAxis::Horizontal, offset: di, graph_type: GraphType::X },
            LogicalCut { label: "vertical".into(), axis: CutAxis::Vertical, offset: patch_x0 + pw / 2, graph_type: GraphType::Z },
        ],
        isolated_distance: d,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridLayout {
    Staggered,
    Aligned,
}

/// `rows x cols` grid of `d x d` windows with odd rows shifted right by
/// `floor(d/2)`, in three layers.
pub fn staggered_squares(rows: u32, cols: u32, d: u32, w: u32, rounds: u32) -> Result<WindowConfig, Error> {
    grid_squares(rows, cols, d, w, rounds, GridLayout::Staggered)
}

pub fn grid_squares(rows: u32, cols: u32, d: u32, w: u32, rounds: u32, layout: GridLayout) -> Result<WindowConfig, Error> {
    check_dw(d, w)?;
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidConfig("empty grid".into()));
    }
    if layout == GridLayout::Aligned && rows >= 2 && cols >= 2 {
        return Err(Error::NonStaggeredGrid(format!(
            "an aligned {rows}x{cols} grid has four windows meeting at every interior corner and needs 4 layers; \
             stagger alternate rows to get by with 3"
        )));
    }
    let di = d as i32;
    let h = di / 2;
    let mut raw = Vec::new();
    for r in 0..rows as i32 {
        let shift = if layout == GridLayout::Staggered && r % 2 == 1 { h } else { 0 };
        for c in 0..cols as i32 {
            let color = (c + 1 - r % 2).rem_euclid(3) as u8;
            let x0 = c * di + shift;
            raw.push((rect_cells(x0, r * di, x0 + di, (r + 1) * di), color));
        }
    }
    // Compact the colours in use to layers 1..=k.
    let used: BTreeSet<u8> = raw.iter().map(|r| r.1).collect();
    let rank: BTreeMap<u8, u8> = used.iter().enumerate().map(|(i, &c)| (c, i as u8 + 1)).collect();
    let windows = raw
        .into_iter()
        .enumerate()
        .map(|(k, (cells, color))| Window { id: WindowId(k as u32), cells, layer: rank[&color] })
        .collect();
    Ok(WindowConfig::new(windows, w, rounds))
}

/// Staggered grid as a full scenario: the patch is the largest rectangle
/// inside the union of the windows.
pub fn staggered_scenario(rows: u32, cols: u32, d: u32, w: u32, rounds: u32) -> Result<MergeScenario, Error> {
    let config = staggered_squares(rows, cols, d, w, rounds)?;
    let di = d as i32;
    let h = di / 2;
    let x0 = if rows >= 2 { h } else { 0 };
    let x1 = cols as i32 * di;
    let y1 = rows as i32 * di;
    if x1 - x0 < 2 {
        return Err(Error::InvalidConfig("staggered patch too narrow".into()));
    }
    Ok(MergeScenario {
        name: "staggered".into(),
        patch: PatchShape::rect(x0, 0, x1 - x0, y1, BoundaryLabel::Rough),
        config,
        cuts: vec![
            LogicalCut { label: "horizontal".into(), axis: CutAxis::Horizontal, offset: y1 / 2, graph_type: GraphType::X },
            LogicalCut { label: "vertical".into(), axis: CutAxis::Vertical, offset: (x0 + x1) / 2, graph_type: GraphType::Z },
        ],
        isolated_distance: d,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ViolationKind {
    SameLayerAdjacent { a: WindowId, b: WindowId },
    WindowTooSmall { window: WindowId, width: i32, height: i32, d: u32 },
    NarrowIntersection { window: WindowId, width: i32, height: i32, min_width: i32, min_height: i32 },
    MissingLink { from: WindowId, to: WindowId },
    OverlappingWindows { a: WindowId, b: WindowId },
    UncoveredPatch { cells: usize },
    BufferTooWide { w: u32, d: u32 },
    NoBuffer,
    EmptyWindow { window: WindowId },
    DuplicateWindowId { window: WindowId },
    NotTwoColorable,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub severity: Severity,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{sev}: ")?;
        match &self.kind {
            ViolationKind::SameLayerAdjacent { a, b } => {
                write!(f, "windows {a} and {b} are edge-adjacent but share a layer")
            }
            ViolationKind::WindowTooSmall { window, width, height, d } => write!(
                f,
                "window {window} commit region is {width}x{height}, smaller than distance {d}"
            ),
            ViolationKind::NarrowIntersection { window, width, height, min_width, min_height } => write!(
                f,
                "patch meets window {window} in a {width}x{height} strip; needs at least {min_width}x{min_height}"
            ),
            ViolationKind::MissingLink { from, to } => {
                write!(f, "no link {from}->{to} between adjacent windows")
            }
            ViolationKind::OverlappingWindows { a, b } => {
                write!(f, "commit regions of {a} and {b} overlap")
            }
            ViolationKind::UncoveredPatch { cells } => {
                write!(f, "{cells} patch cells are in no commit region")
            }
            ViolationKind::BufferTooWide { w, d } => write!(f, "buffer width {w} exceeds distance {d}"),
            ViolationKind::NoBuffer => write!(f, "buffer width 0: seam-crossing chains are committed blind"),
            ViolationKind::EmptyWindow { window } => write!(f, "window {window} has no cells"),
            ViolationKind::DuplicateWindowId { window } => write!(f, "window id {window} used twice"),
            ViolationKind::NotTwoColorable => write!(f, "patch blocks cannot be split into two layers"),
        }
    }
}

fn err(kind: ViolationKind) -> Violation {
    Violation { severity: Severity::Error, kind }
}

/// Checks a scenario against the layout rules. An empty result means the
/// layout is valid.
pub fn validate(s: &MergeScenario) -> Vec<Violation> {
    let cfg = &s.config;
    let d = s.isolated_distance;
    let mut out = Vec::new();

    let mut ids = BTreeSet::new();
    for win in &cfg.windows {
        if !ids.insert(win.id) {
            out.push(err(ViolationKind::DuplicateWindowId { window: win.id }));
        }
        if win.cells.is_empty() {
            out.push(err(ViolationKind::EmptyWindow { window: win.id }));
        }
    }
    if cfg.buffer_width > d {
        out.push(err(ViolationKind::BufferTooWide { w: cfg.buffer_width, d }));
    }
    if cfg.buffer_width == 0 {
        out.push(Violation { severity: Severity::Warning, kind: ViolationKind::NoBuffer });
    }

    let ws = &cfg.windows;
    for (i, a) in ws.iter().enumerate() {
        for b in &ws[i + 1..] {
            if a.cells.intersection(&b.cells).next().is_some() {
                out.push(err(ViolationKind::OverlappingWindows { a: a.id, b: b.id }));
            } else if edge_adjacent(&a.cells, &b.cells) {
                if a.layer == b.layer {
                    out.push(err(ViolationKind::SameLayerAdjacent { a: a.id, b: b.id }));
                } else {
                    let (from, to) = if a.layer < b.layer { (a.id, b.id) } else { (b.id, a.id) };
                    if !cfg.has_link(from, to) {
                        out.push(err(ViolationKind::MissingLink { from, to }));
                    }
                }
            }
        }
    }

    for win in ws {
        let Some((x0, y0, x1, y1)) = bounds(&win.cells) else { continue };
        let (wd, ht) = (x1 - x0 + 1, y1 - y0 + 1);
        if wd < d as i32 || ht < d as i32 {
            out.push(err(ViolationKind::WindowTooSmall { window: win.id, width: wd, height: ht, d }));
        }
        let inter: CellSet = win.cells.intersection(&s.patch.cells).copied().collect();
        if let Some((ix0, iy0, ix1, iy1)) = bounds(&inter) {
            let (iw, ih) = (ix1 - ix0 + 1, iy1 - iy0 + 1);
            let (mw, mh) = ((wd + 1) / 2, (ht + 1) / 2);
            if iw < mw || ih < mh {
                out.push(err(ViolationKind::NarrowIntersection {
                    window: win.id,
                    width: iw,
                    height: ih,
                    min_width: mw,
                    min_height: mh,
                }));
            }
        }
    }

    let covered: CellSet = ws.iter().flat_map(|w| w.cells.iter().copied()).collect();
    let uncovered = s.patch.cells.difference(&covered).count();
    if uncovered > 0 {
        out.push(err(ViolationKind::UncoveredPatch { cells: uncovered }));
    }
    out
}

pub fn has_errors(v: &[Violation]) -> bool {
    v.iter().any(|v| v.severity == Severity::Error)
}

/// Splits `patch` into `tile x tile` blocks aligned with its bounding box
/// and decides whether two layers suffice.
///
/// Two blocks conflict if they share an edge, or share a corner at which all
/// four surrounding blocks belong to the patch (a buffer there would reach
/// into a same-layer neighbour).
pub fn check_two_colorable(patch: &CellSet, tile: u32) -> Result<bool, Error> {
    let blocks = tile_blocks(patch, tile)?;
    Ok(two_color(&block_conflicts(&blocks)).is_some())
}

/// Block coordinates of a tiling of `patch`.
pub fn tile_blocks(patch: &CellSet, tile: u32) -> Result<BTreeSet<(i32, i32)>, Error> {
    if tile == 0 {
        return Err(Error::NonTileable("tile size 0".into()));
    }
    let Some((x0, y0, _, _)) = bounds(patch) else {
        return Err(Error::NonTileable("empty patch".into()));
    };
    let t = tile as i32;
    let blocks: BTreeSet<(i32, i32)> = patch.iter().map(|c| ((c.x - x0).div_euclid(t), (c.y - y0).div_euclid(t))).collect();
    for &(bx, by) in &blocks {
        let full = rect_cells(x0 + bx * t, y0 + by * t, x0 + (bx + 1) * t, y0 + (by + 1) * t);
        if !full.is_subset(patch) {
            return Err(Error::NonTileable(format!("block ({bx}, {by}) is only partly inside the patch")));
        }
    }
    Ok(blocks)
}

/// Conflict edges between blocks, as index pairs into the sorted block list.
pub fn block_conflicts(blocks: &BTreeSet<(i32, i32)>) -> (usize, Vec<(usize, usize)>) {
    let list: Vec<(i32, i32)> = blocks.iter().copied().collect();
    let index: BTreeMap<(i32, i32), usize> = list.iter().enumerate().map(|(i, &b)| (b, i)).collect();
    let mut edges = Vec::new();
    for (i, &(x, y)) in list.iter().enumerate() {
        for (dx, dy) in [(1, 0), (0, 1)] {
            if let Some(&j) = index.get(&(x + dx, y + dy)) {
                edges.push((i, j));
            }
        }
        // Diagonal pairs meeting at the corner (x+1, y+1) or (x, y+1).
        for dx in [1, -1] {
            if let Some(&j) = index.get(&(x + dx, y + 1)) {
                if blocks.contains(&(x + dx, y)) && blocks.contains(&(x, y + 1)) {
                    edges.push((i, j));
                }
            }
        }
    }
    (list.len(), edges)
}

fn two_color((n, edges): &(usize, Vec<(usize, usize)>)) -> Option<Vec<u8>> {
    let mut adj = vec![Vec::new(); *n];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut color = vec![u8::MAX; *n];
    for s in 0..*n {
        if color[s] != u8::MAX {
            continue;
        }
        color[s] = 0;
        let mut q = VecDeque::from([s]);
        while let Some(u) = q.pop_front() {
            for &v in &adj[u] {
                if color[v] == u8::MAX {
                    color[v] = 1 - color[u];
                    q.push_back(v);
                } else if color[v] == color[u] {
                    return None;
                }
            }
        }
    }
    Some(color)
}

/// Patch made of `tile x tile` blocks at the given block coordinates.
pub fn patch_from_blocks(blocks: &[(i32, i32)], tile: u32) -> CellSet {
    let t = tile as i32;
    blocks
        .iter()
        .flat_map(|&(bx, by)| rect_cells(bx * t, by * t, (bx + 1) * t, (by + 1) * t))
        .collect()
}

/// A branched merge with no 2x2 block square: a horizontal bar with arms
/// going up and down. Two layers suffice.
pub fn tree_blocks() -> Vec<(i32, i32)> {
    vec![(0, 1), (1, 1), (2, 1), (3, 1), (4, 1), (1, 0), (3, 2), (3, 3), (4, 3)]
}

/// Product of two Y-shaped merges on a three-dimensional stack, projected:
/// contains a full 2x2 block square, so two layers do not suffice.
pub fn y_product_blocks() -> Vec<(i32, i32)> {
    vec![(0, 0), (1, 0), (2, 0), (0, 1), (1, 1), (2, 1), (1, 2)]
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exhaustive 2-colouring of a small conflict graph.
    fn brute_two_colorable(n: usize, edges: &[(usize, usize)]) -> bool {
        assert!(n <= 16);
        (0u32..1 << n).any(|mask| edges.iter().all(|&(a, b)| (mask >> a & 1) != (mask >> b & 1)))
    }

    #[test]
    fn rect_scenario_is_valid() {
        for (d, w) in [(3, 0), (3, 1), (9, 3), (15, 8)] {
            let s = rect_scenario(d, w, d).unwrap();
            let v = validate(&s);
            assert!(!has_errors(&v), "{d} {w}: {v:?}");
            assert_eq!(s.config.links, vec![Link { from: WindowId(0), to: WindowId(1) }]);
        }
    }

    #[test]
    fn zero_buffer_warns_only() {
        let v = validate(&rect_scenario(5, 0, 5).unwrap());
        assert_eq!(v, vec![Violation { severity: Severity::Warning, kind: ViolationKind::NoBuffer }]);
    }

    #[test]
    fn buffer_width_too_large_rejected() {
        assert!(rect_scenario(5, 6, 5).is_err());
    }

    #[test]
    fn buffer_is_w_columns_of_b() {
        let s = rect_scenario(7, 3, 7).unwrap();
        let buf = s.config.buffer_cells(WindowId(0));
        assert_eq!(buf, rect_cells(7, 0, 10, 7));
        assert!(s.config.buffer_cells(WindowId(1)).is_empty());
    }

    #[test]
    fn two_row_layers_and_widths() {
        let d = 15;
        let a = two_row_scenario(d, 8, d, PatchPlacement::TopRight).unwrap();
        assert!(!has_errors(&validate(&a)), "{:?}", validate(&a));
        let layers: Vec<u8> = a.config.windows.iter().map(|w| w.layer).collect();
        assert_eq!(layers, vec![1, 2, 2, 3, 1]);
        let narrow = a.config.window(WindowId(0)).unwrap();
        let inter: CellSet = narrow.cells.intersection(&a.patch.cells).copied().collect();
        let (x0, _, x1, _) = bounds(&inter).unwrap();
        assert_eq!(x1 - x0 + 1, 8);

        let b = two_row_scenario(d, 8, d, PatchPlacement::TopLeft).unwrap();
        assert!(!has_errors(&validate(&b)), "{:?}", validate(&b));
        let lower_middle = b.config.window(WindowId(3)).unwrap();
        let lower: Vec<u8> = b.config.windows[2..].iter().map(|w| w.layer).collect();
        assert_eq!(lower_middle.layer, *lower.iter().min().unwrap());
        assert_eq!(lower_middle.layer, 1);
    }

    #[test]
    fn two_row_variants_mirror() {
        for d in [5, 7, 15] {
            let a = two_row_scenario(d, 2, 1, PatchPlacement::TopRight).unwrap();
            let b = two_row_scenario(d, 2, 1, PatchPlacement::TopLeft).unwrap();
            let span = 3 * d as i32 - 1;
            let mirror = |s: &CellSet| s.iter().map(|c| Cell::new(span - c.x, c.y)).collect::<CellSet>();
            assert_eq!(mirror(&a.patch.cells), b.patch.cells);
            for (wa, wb) in [(0, 1), (1, 0), (2, 4), (3, 3), (4, 2)] {
                assert_eq!(mirror(&a.config.windows[wa].cells), b.config.windows[wb].cells);
            }
        }
    }

    #[test]
    fn staggered_uses_three_layers() {
        for rows in 2..5 {
            for cols in 2..5 {
                let cfg = staggered_squares(rows, cols, 5, 2, 1).unwrap();
                assert_eq!(cfg.layers(), vec![1, 2, 3]);
                let s = MergeScenario {
                    name: "t".into(),
                    patch: PatchShape { cells: cfg.windows.iter().flat_map(|w| w.cells.clone()).collect(), labels: PatchShape::rect(0, 0, 1, 1, BoundaryLabel::Rough).labels },
                    config: cfg,
                    cuts: vec![],
                    isolated_distance: 5,
                };
                let v = validate(&s);
                assert!(!v.iter().any(|v| matches!(v.kind, ViolationKind::SameLayerAdjacent { .. })));
            }
        }
    }

    #[test]
    fn staggered_preset_is_valid() {
        for (r, c, d, w) in [(2, 2, 15, 8), (2, 2, 5, 2), (3, 3, 7, 3), (2, 3, 4, 2)] {
            let s = staggered_scenario(r, c, d, w, 1).unwrap();
            assert_eq!(validate(&s), vec![], "{r}x{c} d={d}");
        }
    }

    #[test]
    fn aligned_grid_refused() {
        let e = grid_squares(2, 2, 5, 2, 1, GridLayout::Aligned).unwrap_err();
        assert!(matches!(e, Error::NonStaggeredGrid(ref m) if m.contains("4 layers")));
        assert!(grid_squares(1, 3, 5, 2, 1, GridLayout::Aligned).is_ok());
    }

    #[test]
    fn same_layer_adjacency_detected() {
        let mut s = rect_scenario(5, 2, 5).unwrap();
        s.config.windows[1].layer = 1;
        assert!(validate(&s).iter().any(|v| matches!(v.kind, ViolationKind::SameLayerAdjacent { .. })));
    }

    #[test]
    fn small_window_detected() {
        let mut s = rect_scenario(5, 2, 5).unwrap();
        s.isolated_distance = 6;
        s.config.buffer_width = 2;
        assert!(validate(&s).iter().any(|v| matches!(v.kind, ViolationKind::WindowTooSmall { .. })));
    }

    #[test]
    fn narrow_intersection_detected() {
        let mut s = two_row_scenario(7, 2, 1, PatchPlacement::TopRight).unwrap();
        // Shift the patch one column right: the lower right window is now
        // met in a strip one short of half its width.
        s.patch = PatchShape::rect(6, 0, 11, 14, BoundaryLabel::Rough);
        s.config.windows[0].cells = rect_cells(6, 0, 10, 7);
        let v = validate(&s);
        assert!(v.iter().any(|v| matches!(v.kind, ViolationKind::NarrowIntersection { .. })), "{v:?}");
    }

    #[test]
    fn missing_link_detected() {
        let mut s = rect_scenario(5, 2, 5).unwrap();
        s.config.links.clear();
        assert!(validate(&s).iter().any(|v| matches!(v.kind, ViolationKind::MissingLink { .. })));
    }

    #[test]
    fn fixtures_two_colorability() {
        let t = 3;
        assert!(check_two_colorable(&patch_from_blocks(&tree_blocks(), t), t).unwrap());
        assert!(!check_two_colorable(&patch_from_blocks(&y_product_blocks(), t), t).unwrap());
    }

    #[test]
    fn ragged_patch_not_tileable() {
        let mut p = patch_from_blocks(&tree_blocks(), 3);
        p.insert(Cell::new(100, 100));
        assert!(matches!(check_two_colorable(&p, 3), Err(Error::NonTileable(_))));
    }

    mod prop {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn bipartite_check_matches_brute_force(mask in 0u32..(1 << 12)) {
                let blocks: BTreeSet<(i32, i32)> = (0..12)
                    .filter(|i| mask >> i & 1 == 1)
                    .map(|i| (i % 4, i / 4))
                    .collect();
                let g = block_conflicts(&blocks);
                prop_assert_eq!(two_color(&g).is_some(), brute_two_colorable(g.0, &g.1));
            }

            #[test]
            fn two_row_both_variants_valid(d in 3u32..12, wfrac in 0u32..100) {
                let w = 1 + wfrac % d;
                for pl in [PatchPlacement::TopRight, PatchPlacement::TopLeft] {
                    let s = two_row_scenario(d, w, 1, pl).unwrap();
                    prop_assert!(!has_errors(&validate(&s)), "{:?}", validate(&s));
                }
            }
        }
    }
}
