//! Stage-n point clouds for the variable-dimensional Koch curve, gasket,
//! carpet and Vicsek tree, plus Euclidean grids used as calibration spaces.
//!
//! Each construction subdivides a cell into sub-cells whose ratio (or angle)
//! window is a slice of the parent's window, so the local scaling drifts
//! continuously across the set. Clouds are vertex/corner samples of the
//! stage-n pre-fractal; shared corners are merged on exact coordinate
//! equality.

use std::collections::HashSet;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PointCloud;

pub const KOCH_STAGE_CAP: u32 = 9;
pub const GASKET_STAGE_CAP: u32 = 10;
pub const CARPET_STAGE_CAP: u32 = 6;
pub const VICSEK_STAGE_CAP: u32 = 7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KochParams {
    pub theta1: f64,
    pub theta2: f64,
    pub stage: u32,
}

impl KochParams {
    /// Angles in degrees.
    pub fn degrees(theta1: f64, theta2: f64, stage: u32) -> Result<Self> {
        Self::new(theta1.to_radians(), theta2.to_radians(), stage)
    }

    pub fn new(theta1: f64, theta2: f64, stage: u32) -> Result<Self> {
        let p = KochParams { theta1, theta2, stage };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        // Equal angles give the self-similar curve and are accepted.
        if !(0.0 < self.theta1 && self.theta1 <= self.theta2 && self.theta2 < PI / 2.0) {
            return Err(Error::invalid(format!(
                "Koch angles must satisfy 0 < theta1 <= theta2 < pi/2, got {} and {}",
                self.theta1, self.theta2
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GasketParams {
    pub r1: f64,
    pub r2: f64,
    pub side: f64,
    pub stage: u32,
}

impl GasketParams {
    pub fn new(r1: f64, r2: f64, side: f64, stage: u32) -> Result<Self> {
        let p = GasketParams { r1, r2, side, stage };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_ratios(self.r1, self.r2, 0.5)?;
        check_positive("side", self.side)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarpetParams {
    pub base: f64,
    pub height: f64,
    pub r1: f64,
    pub r2: f64,
    pub stage: u32,
}

impl CarpetParams {
    pub fn new(base: f64, height: f64, r1: f64, r2: f64, stage: u32) -> Result<Self> {
        let p = CarpetParams { base, height, r1, r2, stage };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_ratios(self.r1, self.r2, 1.0)?;
        check_positive("base", self.base)?;
        check_positive("height", self.height)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VicsekParams {
    pub side: f64,
    pub r1: f64,
    pub r2: f64,
    pub stage: u32,
}

impl VicsekParams {
    pub fn new(side: f64, r1: f64, r2: f64, stage: u32) -> Result<Self> {
        let p = VicsekParams { side, r1, r2, stage };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_ratios(self.r1, self.r2, 1.0)?;
        check_positive("side", self.side)
    }
}

fn check_ratios(r1: f64, r2: f64, max: f64) -> Result<()> {
    if !(0.0 <= r1 && r1 <= r2 && r2 <= max) {
        return Err(Error::invalid(format!(
            "ratios must satisfy 0 <= r1 <= r2 <= {max}, got {r1} and {r2}"
        )));
    }
    Ok(())
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::invalid(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}

fn check_cap(stage: u32, cap: u32) -> Result<()> {
    if stage > cap {
        Err(Error::StageOverCap { stage, cap })
    } else {
        Ok(())
    }
}

/// Analytic local dimension of the Koch curve at curve parameter `t`.
pub fn koch_alpha(t: f64, theta1: f64, theta2: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::invalid(format!("curve parameter {t} outside [0, 1]")));
    }
    let theta = theta1 + t * (theta2 - theta1);
    Ok(2.0 * 2f64.ln() / (2.0 + 2.0 * theta.cos()).ln())
}

/// Generator length `L = 1/(2 + 2 cos theta)` relative to the parent segment.
pub fn koch_segment_ratio(theta: f64) -> f64 {
    1.0 / (2.0 + 2.0 * theta.cos())
}

pub fn koch_stage(p: &KochParams) -> Result<PointCloud> {
    koch_stage_with_cap(p, KOCH_STAGE_CAP)
}

pub fn koch_stage_with_cap(p: &KochParams, cap: u32) -> Result<PointCloud> {
    p.validate()?;
    check_cap(p.stage, cap)?;
    let segments = 4usize.pow(p.stage);
    let mut coords = Vec::with_capacity(2 * (segments + 1));
    koch_rec([0.0, 0.0], [1.0, 0.0], p.theta1, p.theta2, p.stage, &mut coords);
    coords.extend_from_slice(&[1.0, 0.0]);
    let params = (0..=segments).map(|k| k as f64 / segments as f64).collect();
    PointCloud::from_flat(coords, 2, params, format!("koch-n{}", p.stage))
}

fn koch_rec(p0: [f64; 2], p1: [f64; 2], th1: f64, th2: f64, depth: u32, out: &mut Vec<f64>) {
    if depth == 0 {
        out.extend_from_slice(&p0);
        return;
    }
    let theta = 0.5 * (th1 + th2);
    let l = koch_segment_ratio(theta);
    let (c, s) = (theta.cos(), theta.sin());
    let local = [(l, 0.0), (l + l * c, l * s), (l + 2.0 * l * c, 0.0)];
    let (dx, dy) = (p1[0] - p0[0], p1[1] - p0[1]);
    let map = |(u, v): (f64, f64)| [p0[0] + dx * u - dy * v, p0[1] + dy * u + dx * v];
    let verts = [p0, map(local[0]), map(local[1]), map(local[2]), p1];
    let step = (th2 - th1) / 4.0;
    for i in 0..4 {
        let lo = th1 + i as f64 * step;
        let hi = th1 + (i + 1) as f64 * step;
        koch_rec(verts[i], verts[i + 1], lo, hi, depth - 1, out);
    }
}

/// Vertex weights giving every stage-n segment the same mass `4^-n`
/// (endpoints carry half a segment).
pub fn koch_natural_weights(stage: u32) -> Vec<f64> {
    let segments = 4usize.pow(stage);
    let m = 1.0 / segments as f64;
    let mut w = vec![m; segments + 1];
    w[0] = 0.5 * m;
    w[segments] = 0.5 * m;
    w
}

/// Vertex weights from the gauge `|segment|^alpha(t_mid)` on each stage-n
/// segment, split evenly between its two endpoints.
pub fn koch_gauge_weights(cloud: &PointCloud, p: &KochParams) -> Result<Vec<f64>> {
    let n = cloud.len();
    let mut w = vec![0.0; n];
    for k in 0..n - 1 {
        let t = 0.5 * (cloud.params()[k] + cloud.params()[k + 1]);
        let mass = cloud.dist(k, k + 1).powf(koch_alpha(t, p.theta1, p.theta2)?);
        w[k] += 0.5 * mass;
        w[k + 1] += 0.5 * mass;
    }
    Ok(w)
}

/// A stage-n triangle of the gasket in the lattice basis
/// `e1 = (1, 0)`, `e2 = (1/2, sqrt(3)/2)`, relative to the unit side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GasketCell {
    pub a: f64,
    pub b: f64,
    pub size: f64,
    pub address: f64,
}

pub fn gasket_cells(p: &GasketParams) -> Result<Vec<GasketCell>> {
    gasket_cells_with_cap(p, GASKET_STAGE_CAP)
}

pub fn gasket_cells_with_cap(p: &GasketParams, cap: u32) -> Result<Vec<GasketCell>> {
    p.validate()?;
    check_cap(p.stage, cap)?;
    let mut out = Vec::with_capacity(3usize.pow(p.stage));
    gasket_rec(0.0, 0.0, 1.0, p.r1, p.r2, p.stage, 0.0, 1.0, &mut out);
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn gasket_rec(
    a: f64,
    b: f64,
    size: f64,
    r1: f64,
    r2: f64,
    depth: u32,
    address: f64,
    digit_scale: f64,
    out: &mut Vec<GasketCell>,
) {
    if depth == 0 {
        out.push(GasketCell { a, b, size, address });
        return;
    }
    let r = 0.5 * (r1 + r2);
    let child = size * r;
    let shift = size * (1.0 - r);
    let origins = [(a, b), (a + shift, b), (a, b + shift)];
    let step = (r2 - r1) / 3.0;
    let ds = digit_scale / 3.0;
    for (i, &(ca, cb)) in origins.iter().enumerate() {
        let lo = r1 + i as f64 * step;
        let hi = r1 + (i + 1) as f64 * step;
        gasket_rec(ca, cb, child, lo, hi, depth - 1, address + i as f64 * ds, ds, out);
    }
}

pub fn gasket_stage(p: &GasketParams) -> Result<PointCloud> {
    gasket_stage_with_cap(p, GASKET_STAGE_CAP)
}

pub fn gasket_stage_with_cap(p: &GasketParams, cap: u32) -> Result<PointCloud> {
    let cells = gasket_cells_with_cap(p, cap)?;
    let h = 3f64.sqrt() / 2.0;
    let to_xy = |a: f64, b: f64| [p.side * (a + 0.5 * b), p.side * b * h];
    let mut acc = Dedup::default();
    for c in &cells {
        acc.push(to_xy(c.a, c.b), c.address);
        acc.push(to_xy(c.a + c.size, c.b), c.address);
        acc.push(to_xy(c.a, c.b + c.size), c.address);
    }
    acc.finish(format!("gasket-n{}", p.stage))
}

/// Axis-aligned rectangle cell produced by the carpet and Vicsek recursions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RectCell {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
    pub address: f64,
}

impl RectCell {
    fn corners(&self) -> [[f64; 2]; 4] {
        [
            [self.x0, self.y0],
            [self.x1, self.y0],
            [self.x1, self.y1],
            [self.x0, self.y1],
        ]
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        self.x0 <= p[0] && p[0] <= self.x1 && self.y0 <= p[1] && p[1] <= self.y1
    }
}

fn splits(lo: f64, hi: f64, r: f64) -> [f64; 4] {
    let w = hi - lo;
    [lo, lo + w * (1.0 - r) / 2.0, lo + w * (1.0 + r) / 2.0, hi]
}

// Carpet sub-rectangles R1..R8 as (column, row), counter-clockwise from the
// bottom-left corner.
const CARPET_SLOTS: [(usize, usize); 8] =
    [(0, 0), (1, 0), (2, 0), (2, 1), (2, 2), (1, 2), (0, 2), (0, 1)];

pub fn carpet_cells(p: &CarpetParams) -> Result<Vec<RectCell>> {
    carpet_cells_with_cap(p, CARPET_STAGE_CAP)
}

pub fn carpet_cells_with_cap(p: &CarpetParams, cap: u32) -> Result<Vec<RectCell>> {
    p.validate()?;
    check_cap(p.stage, cap)?;
    let mut out = Vec::with_capacity(8usize.pow(p.stage));
    let root = RectCell { x0: 0.0, x1: p.base, y0: 0.0, y1: p.height, address: 0.0 };
    carpet_rec(root, p.r1, p.r2, p.stage, 1.0, &mut out);
    Ok(out)
}

fn carpet_rec(cell: RectCell, r1: f64, r2: f64, depth: u32, digit_scale: f64, out: &mut Vec<RectCell>) {
    if depth == 0 {
        out.push(cell);
        return;
    }
    let r = 0.5 * (r1 + r2);
    let xs = splits(cell.x0, cell.x1, r);
    let ys = splits(cell.y0, cell.y1, r);
    let step = (r2 - r1) / 8.0;
    let ds = digit_scale / 8.0;
    for (i, &(cx, cy)) in CARPET_SLOTS.iter().enumerate() {
        let child = RectCell {
            x0: xs[cx],
            x1: xs[cx + 1],
            y0: ys[cy],
            y1: ys[cy + 1],
            address: cell.address + i as f64 * ds,
        };
        let lo = r1 + i as f64 * step;
        let hi = r1 + (i + 1) as f64 * step;
        carpet_rec(child, lo, hi, depth - 1, ds, out);
    }
}

pub fn carpet_stage(p: &CarpetParams) -> Result<PointCloud> {
    carpet_stage_with_cap(p, CARPET_STAGE_CAP)
}

pub fn carpet_stage_with_cap(p: &CarpetParams, cap: u32) -> Result<PointCloud> {
    let cells = carpet_cells_with_cap(p, cap)?;
    rect_cloud(&cells, format!("carpet-n{}", p.stage))
}

// Vicsek squares R1, R3, R5, R7, R9 as (column, row) and the third of the
// ratio window each one inherits.
const VICSEK_SLOTS: [((usize, usize), usize); 5] =
    [((0, 0), 0), ((2, 0), 2), ((1, 1), 1), ((0, 2), 0), ((2, 2), 2)];

pub fn vicsek_cells(p: &VicsekParams) -> Result<Vec<RectCell>> {
    vicsek_cells_with_cap(p, VICSEK_STAGE_CAP)
}

pub fn vicsek_cells_with_cap(p: &VicsekParams, cap: u32) -> Result<Vec<RectCell>> {
    p.validate()?;
    check_cap(p.stage, cap)?;
    let mut out = Vec::with_capacity(5usize.pow(p.stage));
    let root = RectCell { x0: 0.0, x1: p.side, y0: 0.0, y1: p.side, address: 0.0 };
    vicsek_rec(root, p.r1, p.r2, p.stage, 1.0, &mut out);
    Ok(out)
}

fn vicsek_rec(cell: RectCell, r1: f64, r2: f64, depth: u32, digit_scale: f64, out: &mut Vec<RectCell>) {
    if depth == 0 {
        out.push(cell);
        return;
    }
    let r = 0.5 * (r1 + r2);
    let xs = splits(cell.x0, cell.x1, r);
    let ys = splits(cell.y0, cell.y1, r);
    let third = (r2 - r1) / 3.0;
    let ds = digit_scale / 5.0;
    for (i, &((cx, cy), window)) in VICSEK_SLOTS.iter().enumerate() {
        let child = RectCell {
            x0: xs[cx],
            x1: xs[cx + 1],
            y0: ys[cy],
            y1: ys[cy + 1],
            address: cell.address + i as f64 * ds,
        };
        let lo = r1 + window as f64 * third;
        let hi = if window == 2 { r2 } else { r1 + (window + 1) as f64 * third };
        vicsek_rec(child, lo, hi, depth - 1, ds, out);
    }
}

pub fn vicsek_stage(p: &VicsekParams) -> Result<PointCloud> {
    vicsek_stage_with_cap(p, VICSEK_STAGE_CAP)
}

pub fn vicsek_stage_with_cap(p: &VicsekParams, cap: u32) -> Result<PointCloud> {
    let cells = vicsek_cells_with_cap(p, cap)?;
    rect_cloud(&cells, format!("vicsek-n{}", p.stage))
}

fn rect_cloud(cells: &[RectCell], label: String) -> Result<PointCloud> {
    let mut acc = Dedup::default();
    for c in cells {
        for corner in c.corners() {
            acc.push(corner, c.address);
        }
    }
    acc.finish(label)
}

/// Collects planar points in insertion order, dropping exact duplicates.
#[derive(Default)]
struct Dedup {
    seen: HashSet<[u64; 2]>,
    coords: Vec<f64>,
    params: Vec<f64>,
}

impl Dedup {
    fn push(&mut self, p: [f64; 2], param: f64) {
        // Normalise -0.0 so that it merges with 0.0.
        let key = [(p[0] + 0.0).to_bits(), (p[1] + 0.0).to_bits()];
        if self.seen.insert(key) {
            self.coords.extend_from_slice(&p);
            self.params.push(param);
        }
    }

    fn finish(self, label: String) -> Result<PointCloud> {
        PointCloud::from_flat(self.coords, 2, self.params, label)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EuclideanKind {
    Interval,
    Disk,
    Square,
}

/// Uniform grid on `[-W, W]^n` (n = 1, 2) or its restriction to the disk
/// of radius `W`; spacing `2W/(resolution - 1)`.
pub fn euclidean_cloud(kind: EuclideanKind, resolution: usize, half_width: f64) -> Result<PointCloud> {
    if resolution < 2 {
        return Err(Error::invalid("resolution must be at least 2"));
    }
    check_positive("half_width", half_width)?;
    let m = (resolution - 1) as f64;
    // Integer numerators keep the grid exactly symmetric about the origin.
    let axis: Vec<f64> = (0..resolution)
        .map(|k| half_width * (2.0 * k as f64 - m) / m)
        .collect();
    let (coords, dim) = match kind {
        EuclideanKind::Interval => (axis, 1),
        EuclideanKind::Square | EuclideanKind::Disk => {
            let mut c = Vec::with_capacity(2 * resolution * resolution);
            for &y in &axis {
                for &x in &axis {
                    if kind == EuclideanKind::Square || (x * x + y * y).sqrt() <= half_width {
                        c.push(x);
                        c.push(y);
                    }
                }
            }
            (c, 2)
        }
    };
    let n = coords.len() / dim;
    let label = match kind {
        EuclideanKind::Interval => "interval",
        EuclideanKind::Disk => "disk",
        EuclideanKind::Square => "square",
    };
    PointCloud::from_flat(coords, dim, vec![0.0; n], format!("{label}-{resolution}"))
}
