//! Parametric antenna builders and their rasterization onto the Yee grid.
//!
//! All geometry is in millimetres in the domain frame (origin at the lower
//! corner of the simulation box). Traces are infinitely thin PEC sheets in
//! the plane `z = trace_z`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Axis, GridSpec};
use crate::material::{Material, MaterialGrid};

/// FR-4 as modelled here.
pub const FR4: Material = Material { eps_r: 4.4, mu_r: 1.0, sigma: 0.004 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Ifa,
    DualBandIfa,
    MultiBandDipole,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Ifa, Family::DualBandIfa, Family::MultiBandDipole];

    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            Family::Ifa => &["a1", "s1"],
            Family::DualBandIfa => &["a1", "a2", "s1", "s2"],
            Family::MultiBandDipole => &["a1", "a2", "a3", "a4"],
        }
    }

    pub fn param_count(self) -> usize {
        self.param_names().len()
    }

    /// The instance simulated in the reference study.
    pub fn default_params(self) -> Vec<f64> {
        match self {
            Family::Ifa => vec![30.0, 12.0],
            Family::DualBandIfa => vec![30.0, 46.0, 12.0, 8.0],
            Family::MultiBandDipole => vec![40.0, 25.0, 35.0, 15.0],
        }
    }

    pub fn id(self) -> u32 {
        match self {
            Family::Ifa => 0,
            Family::DualBandIfa => 1,
            Family::MultiBandDipole => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Ifa => "ifa",
            Family::DualBandIfa => "dual_band_ifa",
            Family::MultiBandDipole => "multi_band_dipole",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "ifa" => Ok(Family::Ifa),
            "dual_band_ifa" | "dualbandifa" => Ok(Family::DualBandIfa),
            "multi_band_dipole" | "multibanddipole" | "dipole" => Ok(Family::MultiBandDipole),
            other => Err(Error::Config(format!("unknown antenna family '{other}'"))),
        }
    }
}

/// Board and trace constants of the two IFA variants (mm).
///
/// Board-local coordinates put the ground plane along the bottom edge
/// (`y` from 0 to `ground_length`) with the antenna above it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IfaLayout {
    pub domain: [f64; 3],
    pub board: [f64; 2],
    pub substrate_thickness: f64,
    pub substrate: Material,
    pub ground_length: f64,
    /// Left edge of the shorting line.
    pub short_x: f64,
    pub short_width: f64,
    /// Left edge of the feed line.
    pub feed_x: f64,
    pub feed_width: f64,
    pub feed_gap: f64,
    pub arm_width: f64,
}

impl Default for IfaLayout {
    fn default() -> Self {
        IfaLayout {
            domain: [80.0, 80.0, 40.0],
            board: [50.0, 40.0],
            substrate_thickness: 1.0,
            substrate: FR4,
            ground_length: 22.0,
            short_x: 1.0,
            short_width: 1.0,
            feed_x: 3.0,
            feed_width: 2.0,
            feed_gap: 1.0,
            arm_width: 1.0,
        }
    }
}

/// Board and trace constants of the multi-band dipole (mm).
///
/// Arms run along `y`; the feed gap sits at the board centre and the four
/// arm pairs are spaced `pitch` apart along `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DipoleLayout {
    pub domain: [f64; 3],
    pub board: [f64; 2],
    pub substrate_thickness: f64,
    pub substrate: Material,
    pub trace_width: f64,
    pub pitch: f64,
    pub feed_gap: f64,
}

impl Default for DipoleLayout {
    fn default() -> Self {
        DipoleLayout {
            domain: [80.0, 140.0, 28.0],
            board: [40.0, 101.0],
            substrate_thickness: 1.0,
            substrate: FR4,
            trace_width: 1.0,
            pitch: 4.0,
            feed_gap: 1.0,
        }
    }
}

/// One antenna instance: family, shape parameters and layout constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AntennaSpec {
    pub family: Family,
    pub params: Vec<f64>,
    #[serde(default)]
    pub ifa: IfaLayout,
    #[serde(default)]
    pub dipole: DipoleLayout,
}

impl AntennaSpec {
    pub fn new(family: Family, params: Vec<f64>) -> Self {
        AntennaSpec { family, params, ifa: IfaLayout::default(), dipole: DipoleLayout::default() }
    }

    pub fn reference_design(family: Family) -> Self {
        Self::new(family, family.default_params())
    }

    pub fn domain(&self) -> [f64; 3] {
        match self.family {
            Family::Ifa | Family::DualBandIfa => self.ifa.domain,
            Family::MultiBandDipole => self.dipole.domain,
        }
    }

    pub fn build(&self) -> Result<GeometrySpec> {
        let n = self.family.param_count();
        if self.params.len() != n {
            return Err(Error::Build(format!(
                "{} takes {} parameters ({}), got {}",
                self.family,
                n,
                self.family.param_names().join(", "),
                self.params.len()
            )));
        }
        let p = &self.params;
        match self.family {
            Family::Ifa => build_ifa(p[0], p[1], &self.ifa),
            Family::DualBandIfa => build_dual_band_ifa(p[0], p[1], p[2], p[3], &self.ifa),
            Family::MultiBandDipole => build_multiband_dipole([p[0], p[1], p[2], p[3]], &self.dipole),
        }
    }
}

/// Axis-aligned PEC rectangle in the trace plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub name: String,
    pub x: [f64; 2],
    pub y: [f64; 2],
}

impl Rect {
    pub fn new(name: &str, x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Rect { name: name.into(), x: [x0.min(x1), x0.max(x1)], y: [y0.min(y1), y0.max(y1)] }
    }

    pub fn width(&self) -> f64 {
        self.x[1] - self.x[0]
    }

    pub fn height(&self) -> f64 {
        self.y[1] - self.y[0]
    }
}

/// Dielectric block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubstrateBox {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
    pub material: Material,
}

/// The feed gap: a segment of `length` mm from `start` along `axis`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedSegment {
    pub start: [f64; 3],
    pub axis: Axis,
    pub length: f64,
}

/// Geometry ready for rasterization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometrySpec {
    pub family: Option<Family>,
    pub params: Vec<f64>,
    pub domain: [f64; 3],
    pub substrate: Option<SubstrateBox>,
    pub trace_z: f64,
    pub traces: Vec<Rect>,
    pub feed: Option<FeedSegment>,
}

impl GeometrySpec {
    /// Free space, no traces, no feed.
    pub fn empty(domain: [f64; 3]) -> Self {
        GeometrySpec {
            family: None,
            params: Vec::new(),
            domain,
            substrate: None,
            trace_z: domain[2] / 2.0,
            traces: Vec::new(),
            feed: None,
        }
    }

    pub fn trace(&self, name: &str) -> Option<&Rect> {
        self.traces.iter().find(|r| r.name == name)
    }

    /// Bounding box `[x0, x1, y0, y1]` of the traces whose name starts with `prefix`.
    pub fn bbox(&self, prefix: &str) -> Option<[f64; 4]> {
        self.traces.iter().filter(|r| r.name.starts_with(prefix)).fold(None, |b, r| {
            Some(match b {
                None => [r.x[0], r.x[1], r.y[0], r.y[1]],
                Some(b) => [b[0].min(r.x[0]), b[1].max(r.x[1]), b[2].min(r.y[0]), b[3].max(r.y[1])],
            })
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::Build(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}

fn contain(what: &str, lo: f64, hi: f64, min: f64, max: f64) -> Result<()> {
    if lo < min - 1e-9 || hi > max + 1e-9 {
        return Err(Error::Build(format!(
            "{what} spans [{lo}, {hi}] mm, outside the substrate extent [{min}, {max}] mm"
        )));
    }
    Ok(())
}

/// Common IFA body: ground, shorting line, feed line and the top arm.
fn ifa_body(a1: f64, s1: f64, l: &IfaLayout) -> Result<(GeometrySpec, [f64; 2])> {
    positive("a1", a1)?;
    positive("s1", s1)?;
    for (n, v) in [
        ("board width", l.board[0]),
        ("board height", l.board[1]),
        ("substrate thickness", l.substrate_thickness),
        ("ground length", l.ground_length),
        ("short width", l.short_width),
        ("feed width", l.feed_width),
        ("feed gap", l.feed_gap),
        ("arm width", l.arm_width),
    ] {
        positive(n, v)?;
    }
    l.substrate.validate().map_err(|e| Error::Build(e.to_string()))?;
    let [bw, bh] = l.board;
    let g = l.ground_length;
    contain("arm a1", l.short_x, l.short_x + a1, 0.0, bw)?;
    contain("arm height s1", 0.0, g + s1, 0.0, bh)?;
    if l.feed_x < l.short_x + l.short_width {
        return Err(Error::Build("feed line overlaps the shorting line".into()));
    }
    if l.feed_x + l.feed_width > l.short_x + a1 {
        return Err(Error::Build(format!(
            "arm a1 = {a1} mm does not reach past the feed line (needs {} mm)",
            l.feed_x + l.feed_width - l.short_x
        )));
    }
    if s1 - l.arm_width < l.feed_gap {
        return Err(Error::Build(format!("s1 = {s1} mm leaves no room for the feed gap")));
    }
    let [dx, dy, dz] = l.domain;
    if bw > dx || bh > dy || l.substrate_thickness > dz / 2.0 {
        return Err(Error::Build("board does not fit the simulation domain".into()));
    }
    let ox = (dx - bw) / 2.0;
    let oy = (dy - bh) / 2.0;
    let zt = dz / 2.0;
    let r = |name: &str, x0: f64, x1: f64, y0: f64, y1: f64| Rect::new(name, ox + x0, ox + x1, oy + y0, oy + y1);
    let w = l.arm_width;
    let traces = vec![
        r("ground", 0.0, bw, 0.0, g),
        r("short", l.short_x, l.short_x + l.short_width, g, g + s1),
        r("feed_line", l.feed_x, l.feed_x + l.feed_width, g + l.feed_gap, g + s1),
        r("arm1", l.short_x, l.short_x + a1, g + s1 - w, g + s1),
    ];
    let geom = GeometrySpec {
        family: Some(Family::Ifa),
        params: vec![a1, s1],
        domain: l.domain,
        substrate: Some(SubstrateBox {
            lo: [ox, oy, zt - l.substrate_thickness],
            hi: [ox + bw, oy + bh, zt],
            material: l.substrate,
        }),
        trace_z: zt,
        traces,
        feed: Some(FeedSegment {
            start: [ox + l.feed_x + l.feed_width / 2.0, oy + g, zt],
            axis: Axis::Y,
            length: l.feed_gap,
        }),
    };
    Ok((geom, [ox, oy]))
}

/// Coplanar-fed inverted-F antenna with arm length `a1` at height `s1` above the ground edge.
pub fn build_ifa(a1: f64, s1: f64, layout: &IfaLayout) -> Result<GeometrySpec> {
    Ok(ifa_body(a1, s1, layout)?.0)
}

/// IFA plus a second arm of length `a2` at height `s2`, run from the feed line.
pub fn build_dual_band_ifa(a1: f64, a2: f64, s1: f64, s2: f64, layout: &IfaLayout) -> Result<GeometrySpec> {
    if !(a2 > 0.0 && a2.is_finite()) {
        return Err(Error::Build(format!("second arm a2 must be positive, got {a2}")));
    }
    positive("s2", s2)?;
    let (mut geom, [ox, oy]) = ifa_body(a1, s1, layout)?;
    let l = layout;
    let g = l.ground_length;
    let w = l.arm_width;
    contain("arm a2", l.feed_x, l.feed_x + a2, 0.0, l.board[0])?;
    if s2 - w < l.feed_gap {
        return Err(Error::Build(format!("s2 = {s2} mm leaves no room for the feed gap")));
    }
    if s2 > s1 - 2.0 * w {
        return Err(Error::Build(format!(
            "arm 2 at s2 = {s2} mm touches arm 1 at s1 = {s1} mm (need s2 <= s1 - {})",
            2.0 * w
        )));
    }
    geom.traces.push(Rect::new("arm2", ox + l.feed_x, ox + l.feed_x + a2, oy + g + s2 - w, oy + g + s2));
    geom.family = Some(Family::DualBandIfa);
    geom.params = vec![a1, a2, s1, s2];
    Ok(geom)
}

/// Four dipole pairs sharing a central feed; `a[p]` is the half-arm length of pair `p`.
pub fn build_multiband_dipole(a: [f64; 4], layout: &DipoleLayout) -> Result<GeometrySpec> {
    let l = layout;
    for (p, &v) in a.iter().enumerate() {
        positive(&format!("a{}", p + 1), v)?;
    }
    for (n, v) in [
        ("board width", l.board[0]),
        ("board height", l.board[1]),
        ("substrate thickness", l.substrate_thickness),
        ("trace width", l.trace_width),
        ("pitch", l.pitch),
        ("feed gap", l.feed_gap),
    ] {
        positive(n, v)?;
    }
    l.substrate.validate().map_err(|e| Error::Build(e.to_string()))?;
    if l.pitch <= l.trace_width {
        return Err(Error::Build("pitch must exceed the trace width".into()));
    }
    let [dx, dy, dz] = l.domain;
    let [bw, bh] = l.board;
    if bw > dx || bh > dy || l.substrate_thickness > dz / 2.0 {
        return Err(Error::Build("board does not fit the simulation domain".into()));
    }
    let xc = dx / 2.0;
    let yc = dy / 2.0;
    let zt = dz / 2.0;
    let (bx0, bx1) = (xc - bw / 2.0, xc + bw / 2.0);
    let (by0, by1) = (yc - bh / 2.0, yc + bh / 2.0);
    let w = l.trace_width;
    let gap_lo = yc - l.feed_gap / 2.0;
    let gap_hi = yc + l.feed_gap / 2.0;
    let span = 1.5 * l.pitch + w / 2.0;
    contain("feed bus", xc - span, xc + span, bx0, bx1)?;
    let mut traces = vec![
        Rect::new("bus_upper", xc - span, xc + span, gap_hi, gap_hi + w),
        Rect::new("bus_lower", xc - span, xc + span, gap_lo - w, gap_lo),
    ];
    for (p, &len) in a.iter().enumerate() {
        let cx = xc + (p as f64 - 1.5) * l.pitch;
        contain(&format!("arm a{}", p + 1), gap_lo - len, gap_hi + len, by0, by1)?;
        traces.push(Rect::new(&format!("arm{}_upper", p + 1), cx - w / 2.0, cx + w / 2.0, gap_hi, gap_hi + len));
        traces.push(Rect::new(&format!("arm{}_lower", p + 1), cx - w / 2.0, cx + w / 2.0, gap_lo - len, gap_lo));
    }
    Ok(GeometrySpec {
        family: Some(Family::MultiBandDipole),
        params: a.to_vec(),
        domain: l.domain,
        substrate: Some(SubstrateBox {
            lo: [bx0, by0, zt - l.substrate_thickness],
            hi: [bx1, by1, zt],
            material: l.substrate,
        }),
        trace_z: zt,
        traces,
        feed: Some(FeedSegment { start: [xc, gap_lo, zt], axis: Axis::Y, length: l.feed_gap }),
    })
}

/// Straight strip dipole in free space along `y`, centre-fed.
///
/// The domain adds `margin` mm of air plus `pml_cells` cells of `cell` mm on
/// every side, rounded up to whole cells.
pub fn build_strip_dipole(
    length: f64,
    width: f64,
    gap: f64,
    cell: f64,
    pml_cells: usize,
    margin: f64,
) -> Result<GeometrySpec> {
    positive("length", length)?;
    positive("width", width)?;
    positive("gap", gap)?;
    positive("cell", cell)?;
    if gap >= length {
        return Err(Error::Build("feed gap must be shorter than the dipole".into()));
    }
    let pad = margin + pml_cells as f64 * cell;
    let whole = |v: f64| (v / cell - 1e-9).ceil() * cell;
    let domain = [whole(width + 2.0 * pad), whole(length + 2.0 * pad), whole(2.0 * pad)];
    let xc = domain[0] / 2.0;
    let yc = domain[1] / 2.0;
    let zt = domain[2] / 2.0;
    let (gl, gh) = (yc - gap / 2.0, yc + gap / 2.0);
    Ok(GeometrySpec {
        family: None,
        params: vec![length, width, gap],
        domain,
        substrate: None,
        trace_z: zt,
        traces: vec![
            Rect::new("arm_upper", xc - width / 2.0, xc + width / 2.0, gh, yc + length / 2.0),
            Rect::new("arm_lower", xc - width / 2.0, xc + width / 2.0, yc - length / 2.0, gl),
        ],
        feed: Some(FeedSegment { start: [xc, gl, zt], axis: Axis::Y, length: gap }),
    })
}

/// One snapped coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapEntry {
    pub what: String,
    pub axis: Axis,
    pub requested_mm: f64,
    pub snapped_mm: f64,
}

/// Requested versus snapped coordinates of a rasterization.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SnapReport {
    pub entries: Vec<SnapEntry>,
    /// Largest snap error per axis (mm).
    pub max_error: [f64; 3],
}

impl SnapReport {
    pub fn max_error_mm(&self) -> f64 {
        self.max_error.iter().copied().fold(0.0, f64::max)
    }

    fn snap(&mut self, what: &str, axis: Axis, mm: f64, cell_mm: f64, n: usize) -> usize {
        let idx = ((mm / cell_mm).round().max(0.0) as usize).min(n);
        let snapped = idx as f64 * cell_mm;
        let err = (snapped - mm).abs();
        let err = if err < 1e-9 { 0.0 } else { err };
        let a = axis.index();
        self.max_error[a] = self.max_error[a].max(err);
        self.entries.push(SnapEntry { what: what.into(), axis, requested_mm: mm, snapped_mm: snapped });
        idx
    }
}

/// The feed edge selected by rasterization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedEdge {
    pub node: [usize; 3],
    pub axis: Axis,
}

#[derive(Debug, Clone)]
pub struct Rasterized {
    pub materials: MaterialGrid,
    pub feed: Option<FeedEdge>,
    pub snap: SnapReport,
}

/// Map `geom` onto `grid`: substrate cells, PEC edges and the feed edge.
///
/// Coordinates snap to the nearest node. A rectangle covering nodes
/// `i0..=i1, j0..=j1` flags the x-edges `i0..i1` and the y-edges `j0..j1`.
/// The feed gap becomes a line of edges along its axis: the middle edge is
/// the source, the others are PEC so the gap stays one conductor path.
pub fn rasterize(geom: &GeometrySpec, grid: &GridSpec) -> Result<Rasterized> {
    grid.validate()?;
    let cell = grid.spacing().map(|d| d * 1e3);
    let ext = grid.extent().map(|d| d * 1e3);
    for a in 0..3 {
        if (ext[a] - geom.domain[a]).abs() > 1e-6 * geom.domain[a].max(1.0) {
            return Err(Error::Rasterize(format!(
                "grid extent {:?} mm does not match the geometry domain {:?} mm",
                ext, geom.domain
            )));
        }
    }
    let n = grid.cells();
    let mut snap = SnapReport::default();
    let mut mg = MaterialGrid::vacuum(*grid);

    if let Some(s) = &geom.substrate {
        let id = mg.add_material(s.material)?;
        let mut lo = [0; 3];
        let mut hi = [0; 3];
        for a in Axis::ALL {
            let i = a.index();
            lo[i] = snap.snap("substrate", a, s.lo[i], cell[i], n[i]);
            hi[i] = snap.snap("substrate", a, s.hi[i], cell[i], n[i]);
        }
        mg.fill_cells(lo, hi, id);
    }

    let k = snap.snap("trace plane", Axis::Z, geom.trace_z, cell[2], n[2]);
    for r in &geom.traces {
        let i0 = snap.snap(&r.name, Axis::X, r.x[0], cell[0], n[0]);
        let i1 = snap.snap(&r.name, Axis::X, r.x[1], cell[0], n[0]);
        let j0 = snap.snap(&r.name, Axis::Y, r.y[0], cell[1], n[1]);
        let j1 = snap.snap(&r.name, Axis::Y, r.y[1], cell[1], n[1]);
        for i in i0..=i1 {
            for j in j0..=j1 {
                if i < i1 {
                    mg.set_pec(Axis::X, [i, j, k], true);
                }
                if j < j1 {
                    mg.set_pec(Axis::Y, [i, j, k], true);
                }
            }
        }
    }

    let mut feed = None;
    if let Some(f) = &geom.feed {
        let a = f.axis.index();
        let mut node = [0; 3];
        for b in Axis::ALL {
            node[b.index()] = snap.snap("feed", b, f.start[b.index()], cell[b.index()], n[b.index()]);
        }
        let end = snap.snap("feed", f.axis, f.start[a] + f.length, cell[a], n[a]);
        let count = end.saturating_sub(node[a]);
        if count == 0 {
            return Err(Error::Rasterize(format!(
                "feed gap of {} mm collapses to zero cells at {} mm; refine the grid",
                f.length, cell[a]
            )));
        }
        let mid = node[a] + (count - 1) / 2;
        for m in node[a]..end {
            let mut e = node;
            e[a] = m;
            mg.set_pec(f.axis, e, m != mid);
        }
        let mut e = node;
        e[a] = mid;
        feed = Some(FeedEdge { node: e, axis: f.axis });
    }
    Ok(Rasterized { materials: mg, feed, snap })
}

/// Number of connected PEC groups (edges joined through shared nodes),
/// optionally treating `extra` as a conductor too.
pub fn pec_components(mg: &MaterialGrid, extra: Option<FeedEdge>) -> usize {
    let g = *mg.grid();
    let n = g.node_count();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut touched = vec![false; n];
    let mut join = |a: usize, b: usize, parent: &mut Vec<usize>| {
        touched[a] = true;
        touched[b] = true;
        let (ra, rb) = (find(parent, a), find(parent, b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    };
    let step = [g.idx(1, 0, 0), g.idx(0, 1, 0), g.idx(0, 0, 1)];
    for a in Axis::ALL {
        for (idx, &on) in mg.pec_flags(a).iter().enumerate() {
            if on {
                join(idx, idx + step[a.index()], &mut parent);
            }
        }
    }
    if let Some(f) = extra {
        let idx = g.idx(f.node[0], f.node[1], f.node[2]);
        join(idx, idx + step[f.axis.index()], &mut parent);
    }
    let mut roots: Vec<usize> = (0..n).filter(|&i| touched[i]).map(|i| find(&mut parent, i)).collect();
    roots.sort_unstable();
    roots.dedup();
    roots.len()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_for(domain: [f64; 3], d: f64) -> GridSpec {
        GridSpec::from_extent(domain.map(|v| v * 1e-3), [d * 1e-3; 3]).unwrap()
    }

    #[test]
    fn ifa_default_arm_width() {
        let g = AntennaSpec::reference_design(Family::Ifa).build().unwrap();
        assert_eq!(g.trace("arm1").unwrap().width(), 30.0);
        assert_eq!(g.domain, [80.0, 80.0, 40.0]);
    }

    #[test]
    fn ifa_containment() {
        let l = IfaLayout::default();
        let e = build_ifa(l.board[0] + 1.0, 12.0, &l).unwrap_err();
        assert!(matches!(e, Error::Build(ref m) if m.contains("a1")));
        assert!(build_ifa(30.0, 30.0, &l).is_err());
        assert!(build_ifa(-1.0, 12.0, &l).is_err());
    }

    #[test]
    fn ifa_exact_snap_at_half_mm() {
        let geom = AntennaSpec::reference_design(Family::Ifa).build().unwrap();
        let r = rasterize(&geom, &grid_for(geom.domain, 0.5)).unwrap();
        assert_eq!(r.snap.max_error_mm(), 0.0);
        let f = r.feed.unwrap();
        assert!(!r.materials.is_pec(f.axis, f.node));
    }

    #[test]
    fn dual_band_arms() {
        let g = AntennaSpec::reference_design(Family::DualBandIfa).build().unwrap();
        assert_eq!(g.trace("arm2").unwrap().width(), 46.0);
        let l = IfaLayout::default();
        assert!(matches!(build_dual_band_ifa(30.0, 0.0, 12.0, 8.0, &l), Err(Error::Build(_))));
        assert!(build_dual_band_ifa(30.0, 46.0, 12.0, 11.5, &l).is_err());
    }

    #[test]
    fn longer_second_arm_adds_edges() {
        let l = IfaLayout::default();
        let grid = grid_for(l.domain, 1.0);
        let mut last = 0;
        for a2 in [20.0, 25.0, 30.0, 40.0, 46.0] {
            let g = build_dual_band_ifa(30.0, a2, 12.0, 8.0, &l).unwrap();
            let c = rasterize(&g, &grid).unwrap().materials.pec_edge_count();
            assert!(c > last);
            last = c;
        }
    }

    #[test]
    fn dipole_defaults_and_tiny() {
        let g = AntennaSpec::reference_design(Family::MultiBandDipole).build().unwrap();
        let longest = (1..=4).map(|p| g.trace(&format!("arm{p}_upper")).unwrap().height()).fold(0.0, f64::max);
        assert_eq!(longest, 40.0);
        let tiny = build_multiband_dipole([1.0; 4], &DipoleLayout::default()).unwrap();
        assert_eq!(tiny.traces.iter().filter(|r| r.name.starts_with("arm")).count(), 8);
        assert!(build_multiband_dipole([60.0, 1.0, 1.0, 1.0], &DipoleLayout::default()).is_err());
    }

    #[test]
    fn dipole_mirror_symmetry() {
        let geom = AntennaSpec::reference_design(Family::MultiBandDipole).build().unwrap();
        let grid = grid_for(geom.domain, 0.5);
        let r = rasterize(&geom, &grid).unwrap();
        let f = r.feed.unwrap();
        let m = &r.materials;
        let jn = grid.ny;
        for i in 0..=grid.nx {
            for j in 0..=grid.ny {
                let k = f.node[2];
                assert_eq!(m.is_pec(Axis::X, [i, j, k]), m.is_pec(Axis::X, [i, jn - j, k]));
                if j < grid.ny {
                    let in_gap = j >= f.node[1] - 1 && j <= f.node[1] + 1;
                    if !in_gap {
                        assert_eq!(m.is_pec(Axis::Y, [i, j, k]), m.is_pec(Axis::Y, [i, jn - 1 - j, k]));
                    }
                }
            }
        }
    }

    #[test]
    fn dipole_reversed_params_mirror_in_x() {
        let l = DipoleLayout::default();
        let a = build_multiband_dipole([40.0, 25.0, 35.0, 15.0], &l).unwrap();
        let b = build_multiband_dipole([15.0, 35.0, 25.0, 40.0], &l).unwrap();
        let xm = l.domain[0];
        for p in 1..=4 {
            let ra = a.trace(&format!("arm{p}_upper")).unwrap();
            let rb = b.trace(&format!("arm{}_upper", 5 - p)).unwrap();
            assert_eq!(ra.y, rb.y);
            assert_eq!([xm - ra.x[1], xm - ra.x[0]], rb.x);
        }
    }

    #[test]
    fn empty_geometry_is_vacuum() {
        let geom = GeometrySpec::empty([20.0, 20.0, 20.0]);
        let r = rasterize(&geom, &grid_for(geom.domain, 1.0)).unwrap();
        assert!(r.materials.is_vacuum());
        assert!(r.feed.is_none());
    }

    #[test]
    fn feed_collapse_rejected() {
        let l = IfaLayout { feed_gap: 0.4, ..Default::default() };
        let geom = build_ifa(30.0, 12.0, &l).unwrap();
        let e = rasterize(&geom, &grid_for(geom.domain, 1.0)).unwrap_err();
        assert!(matches!(e, Error::Rasterize(_)));
    }

    #[test]
    fn connected_groups() {
        for fam in Family::ALL {
            let geom = AntennaSpec::reference_design(fam).build().unwrap();
            let r = rasterize(&geom, &grid_for(geom.domain, 0.5)).unwrap();
            let expect = if fam == Family::MultiBandDipole { 2 } else { 1 };
            assert_eq!(pec_components(&r.materials, None), expect, "{fam}");
            assert_eq!(pec_components(&r.materials, r.feed), 1, "{fam}");
        }
    }

    #[test]
    fn strip_dipole_domain() {
        let g = build_strip_dipole(60.0, 1.0, 1.0, 0.5, 10, 10.0).unwrap();
        assert_eq!(g.domain, [31.0, 90.0, 30.0]);
        let r = rasterize(&g, &grid_for(g.domain, 0.5)).unwrap();
        assert_eq!(r.snap.max_error_mm(), 0.0);
        assert_eq!(pec_components(&r.materials, None), 2);
    }

    #[test]
    fn json_round_trip() {
        let g = AntennaSpec::reference_design(Family::DualBandIfa).build().unwrap();
        assert_eq!(GeometrySpec::from_json(&g.to_json().unwrap()).unwrap(), g);
    }

    #[test]
    fn family_parse() {
        assert_eq!("dual-band-ifa".parse::<Family>().unwrap(), Family::DualBandIfa);
        assert!("yagi".parse::<Family>().is_err());
    }
}
