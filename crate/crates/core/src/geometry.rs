//! Finite samples of compact metric spaces embedded in Euclidean space.
//!
//! A [`PointCloud`] is immutable once built. Ball queries go through a
//! uniform grid index that is built lazily on first use; its answers are
//! identical to the brute-force scan in [`PointCloud::ball_query_scan`],
//! which stays public as the oracle for tests.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::OnceLock;

use rstar::RTree;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grid indexing is used up to this ambient dimension; above it every
/// query is a linear scan.
const MAX_INDEXED_DIM: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub coords: Vec<f64>,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Point { coords }
    }
}

impl From<Vec<f64>> for Point {
    fn from(coords: Vec<f64>) -> Self {
        Point { coords }
    }
}

#[derive(Debug, Clone)]
pub struct PointCloud {
    coords: Vec<f64>,
    params: Vec<f64>,
    dim: usize,
    label: String,
    index: OnceLock<GridIndex>,
    resolution: OnceLock<f64>,
    diameter: OnceLock<f64>,
    nn_tree: OnceLock<NnTree>,
}

/// Euclidean distance between two coordinate slices of equal length.
#[inline]
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

impl PointCloud {
    pub fn new(points: Vec<Point>, params: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        let dim = points.first().map(|p| p.coords.len()).ok_or(Error::EmptyCloud)?;
        let mut coords = Vec::with_capacity(points.len() * dim);
        for (i, p) in points.iter().enumerate() {
            if p.coords.len() != dim {
                return Err(Error::invalid(format!(
                    "point {i} has {} coordinates, expected {dim}",
                    p.coords.len()
                )));
            }
            coords.extend_from_slice(&p.coords);
        }
        Self::from_flat(coords, dim, params, label)
    }

    /// Builds a cloud from row-major coordinates (`n * dim` values).
    pub fn from_flat(
        coords: Vec<f64>,
        dim: usize,
        params: Vec<f64>,
        label: impl Into<String>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("ambient dimension must be positive"));
        }
        if coords.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if coords.len() % dim != 0 {
            return Err(Error::invalid("coordinate buffer is not a multiple of the dimension"));
        }
        let n = coords.len() / dim;
        if params.len() != n {
            return Err(Error::invalid(format!(
                "{} params for {n} points",
                params.len()
            )));
        }
        if let Some(bad) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::invalid(format!("non-finite coordinate in point {}", bad / dim)));
        }
        Ok(PointCloud {
            coords,
            params,
            dim,
            label: label.into(),
            index: OnceLock::new(),
            resolution: OnceLock::new(),
            diameter: OnceLock::new(),
            nn_tree: OnceLock::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    /// Always false: empty clouds are rejected at construction.
    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn check_index(&self, i: usize) -> Result<()> {
        if i < self.len() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange { index: i, len: self.len() })
        }
    }

    pub fn distance(&self, i: usize, j: usize) -> Result<f64> {
        self.check_index(i)?;
        self.check_index(j)?;
        Ok(self.dist(i, j))
    }

    #[inline]
    pub(crate) fn dist(&self, i: usize, j: usize) -> f64 {
        euclidean(self.point(i), self.point(j))
    }

    /// Indices inside the ball, sorted ascending.
    pub fn ball_query(&self, ball: &BallSpec) -> Result<Vec<usize>> {
        self.check_index(ball.center_index)?;
        Ok(self.ball_around(self.point(ball.center_index), ball.radius, ball.closed))
    }

    /// Linear-scan reference implementation of [`PointCloud::ball_query`].
    pub fn ball_query_scan(&self, ball: &BallSpec) -> Result<Vec<usize>> {
        self.check_index(ball.center_index)?;
        let c = self.point(ball.center_index);
        Ok((0..self.len())
            .filter(|&j| inside(euclidean(c, self.point(j)), ball.radius, ball.closed))
            .collect())
    }

    /// Ball around an arbitrary position (not necessarily a cloud point).
    pub fn ball_around(&self, center: &[f64], radius: f64, closed: bool) -> Vec<usize> {
        self.grid().query(self, center, radius, closed)
    }

    pub(crate) fn grid(&self) -> &GridIndex {
        self.index.get_or_init(|| GridIndex::build(self, self.default_cell()))
    }

    fn default_cell(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        let extent = lo
            .iter()
            .zip(&hi)
            .map(|(a, b)| b - a)
            .fold(0.0_f64, f64::max);
        if extent == 0.0 {
            return 1.0;
        }
        let per_axis = (self.len() as f64 / 4.0).powf(1.0 / self.dim as f64).max(1.0);
        extent / per_axis
    }

    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for p in self.coords.chunks_exact(self.dim) {
            for k in 0..self.dim {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        (lo, hi)
    }

    /// Largest pairwise distance; 0 for a singleton.
    pub fn diameter(&self) -> f64 {
        *self.diameter.get_or_init(|| self.compute_diameter())
    }

    fn compute_diameter(&self) -> f64 {
        let candidates: Vec<usize> = match self.dim {
            1 => {
                let (mut lo, mut hi) = (0, 0);
                for i in 0..self.len() {
                    if self.point(i)[0] < self.point(lo)[0] {
                        lo = i;
                    }
                    if self.point(i)[0] > self.point(hi)[0] {
                        hi = i;
                    }
                }
                vec![lo, hi]
            }
            2 => convex_hull_2d(self),
            _ => (0..self.len()).collect(),
        };
        let mut best = 0.0_f64;
        for (a, &i) in candidates.iter().enumerate() {
            for &j in &candidates[a + 1..] {
                best = best.max(self.dist(i, j));
            }
        }
        best
    }

    /// Distance from point `i` to its nearest distinct cloud point, or
    /// `None` for a singleton cloud or when all points coincide.
    pub fn nearest_neighbor_distance(&self, i: usize) -> Option<f64> {
        let tree = self.nn_tree.get_or_init(|| NnTree::build(self));
        if let Some(d) = tree.nearest_distinct(self.point(i)) {
            return d;
        }
        let grid = self.grid();
        let mut radius = grid.cell;
        let diam_bound = {
            let (lo, hi) = self.bounding_box();
            euclidean(&lo, &hi)
        };
        loop {
            let best = self
                .ball_around(self.point(i), radius, true)
                .into_iter()
                .filter(|&j| j != i)
                .map(|j| self.dist(i, j))
                .filter(|&d| d > 0.0)
                .fold(f64::INFINITY, f64::min);
            if best.is_finite() {
                return Some(best);
            }
            if radius > diam_bound {
                return None;
            }
            radius *= 2.0;
        }
    }

    /// Fill resolution of the sample: the largest nearest-neighbour
    /// distance over all points. Scales below a small multiple of this
    /// value are not resolved by the cloud.
    pub fn resolution(&self) -> f64 {
        *self.resolution.get_or_init(|| {
            use rayon::prelude::*;
            (0..self.len())
                .into_par_iter()
                .filter_map(|i| self.nearest_neighbor_distance(i))
                .reduce(|| 0.0, f64::max)
        })
    }

    /// Index of the cloud point closest to `target` (lowest index on ties).
    pub fn nearest_to(&self, target: &[f64]) -> usize {
        let mut best = (f64::INFINITY, 0);
        for i in 0..self.len() {
            let d = euclidean(target, self.point(i));
            if d < best.0 {
                best = (d, i);
            }
        }
        best.1
    }

    /// Index of the point whose parameter is closest to `t`.
    pub fn nearest_param(&self, t: f64) -> usize {
        let mut best = (f64::INFINITY, 0);
        for (i, &p) in self.params.iter().enumerate() {
            let d = (p - t).abs();
            if d < best.0 {
                best = (d, i);
            }
        }
        best.1
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (0..self.dim).map(|k| format!("x{k}")).collect();
        header.push("param".into());
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut row: Vec<String> = self.point(i).iter().map(|c| fmt_f64(*c)).collect();
            row.push(fmt_f64(self.params[i]));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::io::write_atomic(path.as_ref(), |f| self.write_csv(f))
    }

    pub fn read_csv<R: Read>(input: R, label: impl Into<String>) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let header = rdr.headers()?.clone();
        let ncols = header.len();
        if ncols < 2 || &header[ncols - 1] != "param" {
            return Err(Error::invalid("cloud CSV must have header x0,...,x{n-1},param"));
        }
        for (k, name) in header.iter().take(ncols - 1).enumerate() {
            if name != format!("x{k}") {
                return Err(Error::invalid(format!("unexpected column `{name}`")));
            }
        }
        let dim = ncols - 1;
        let mut coords = Vec::new();
        let mut params = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            for k in 0..dim {
                coords.push(parse_f64(&rec[k])?);
            }
            params.push(parse_f64(&rec[dim])?);
        }
        PointCloud::from_flat(coords, dim, params, label)
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let label = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        PointCloud::read_csv(std::fs::File::open(path)?, label)
    }
}

#[inline]
pub(crate) fn inside(d: f64, radius: f64, closed: bool) -> bool {
    if closed {
        d <= radius
    } else {
        d < radius
    }
}

/// Shortest decimal representation that parses back to the same bits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| Error::invalid(format!("bad number `{s}`: {e}")))
}

fn convex_hull_2d(cloud: &PointCloud) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..cloud.len()).collect();
    idx.sort_by(|&a, &b| {
        let (pa, pb) = (cloud.point(a), cloud.point(b));
        pa[0].total_cmp(&pb[0]).then(pa[1].total_cmp(&pb[1]))
    });
    idx.dedup_by(|a, b| cloud.point(*a) == cloud.point(*b));
    if idx.len() < 3 {
        return idx;
    }
    let cross = |o: usize, a: usize, b: usize| {
        let (po, pa, pb) = (cloud.point(o), cloud.point(a), cloud.point(b));
        (pa[0] - po[0]) * (pb[1] - po[1]) - (pa[1] - po[1]) * (pb[0] - po[0])
    };
    let mut hull: Vec<usize> = Vec::with_capacity(2 * idx.len());
    for &p in idx.iter().chain(idx.iter().rev().skip(1)) {
        // Keep collinear points (strict turn test) so that rounding in the
        // cross product can never discard a true extreme point.
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) < 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.sort_unstable();
    hull.dedup();
    hull
}

/// R-trees for nearest-neighbour distances; the uniform grid degrades on
/// clouds whose density varies over several orders of magnitude.
#[derive(Debug, Clone)]
enum NnTree {
    /// Padded with a zero second coordinate; R-trees need two axes.
    D1(RTree<[f64; 2]>),
    D2(RTree<[f64; 2]>),
    D3(RTree<[f64; 3]>),
    Unsupported,
}

impl NnTree {
    fn build(cloud: &PointCloud) -> Self {
        fn rows<const K: usize>(cloud: &PointCloud) -> Vec<[f64; K]> {
            cloud
                .coords
                .chunks_exact(K)
                .map(|c| c.try_into().expect("chunk length equals K"))
                .collect()
        }
        match cloud.dim {
            1 => NnTree::D1(RTree::bulk_load(cloud.coords.iter().map(|&x| [x, 0.0]).collect())),
            2 => NnTree::D2(RTree::bulk_load(rows::<2>(cloud))),
            3 => NnTree::D3(RTree::bulk_load(rows::<3>(cloud))),
            _ => NnTree::Unsupported,
        }
    }

    /// `Some(result)` when the tree can answer, where the result is the
    /// smallest positive distance from `p` to the cloud.
    fn nearest_distinct(&self, p: &[f64]) -> Option<Option<f64>> {
        fn query<const K: usize>(t: &RTree<[f64; K]>, p: &[f64]) -> Option<f64>
        where
            [f64; K]: rstar::Point<Scalar = f64>,
        {
            let q: [f64; K] = p.try_into().expect("query has the cloud dimension");
            t.nearest_neighbor_iter_with_distance_2(&q)
                .map(|(_, d2)| d2)
                .find(|&d2| d2 > 0.0)
                .map(f64::sqrt)
        }
        match self {
            NnTree::D1(t) => Some(query(t, &[p[0], 0.0])),
            NnTree::D2(t) => Some(query(t, p)),
            NnTree::D3(t) => Some(query(t, p)),
            NnTree::Unsupported => None,
        }
    }
}

/// Uniform-grid spatial index over a cloud.
#[derive(Debug, Clone)]
pub(crate) struct GridIndex {
    pub(crate) cell: f64,
    dim: usize,
    origin: [f64; MAX_INDEXED_DIM],
    cells: HashMap<[i64; MAX_INDEXED_DIM], (u32, u32)>,
    order: Vec<u32>,
}

impl GridIndex {
    pub(crate) fn build(cloud: &PointCloud, cell: f64) -> Self {
        let dim = cloud.dim();
        let mut origin = [0.0; MAX_INDEXED_DIM];
        if dim <= MAX_INDEXED_DIM {
            let (lo, _) = cloud.bounding_box();
            origin[..dim].copy_from_slice(&lo);
        }
        let mut grid = GridIndex {
            cell,
            dim,
            origin,
            cells: HashMap::new(),
            order: Vec::new(),
        };
        if dim > MAX_INDEXED_DIM {
            return grid;
        }
        let mut keyed: Vec<([i64; MAX_INDEXED_DIM], u32)> = (0..cloud.len())
            .map(|i| (grid.key(cloud.point(i)), i as u32))
            .collect();
        keyed.sort_unstable();
        let mut start = 0;
        while start < keyed.len() {
            let key = keyed[start].0;
            let mut end = start;
            while end < keyed.len() && keyed[end].0 == key {
                end += 1;
            }
            grid.cells.insert(key, (start as u32, end as u32));
            start = end;
        }
        grid.order = keyed.into_iter().map(|(_, i)| i).collect();
        grid
    }

    fn coord_key(&self, x: f64, k: usize) -> i64 {
        ((x - self.origin[k]) / self.cell).floor() as i64
    }

    fn key(&self, p: &[f64]) -> [i64; MAX_INDEXED_DIM] {
        let mut key = [0; MAX_INDEXED_DIM];
        for k in 0..self.dim {
            key[k] = self.coord_key(p[k], k);
        }
        key
    }

    pub(crate) fn query(
        &self,
        cloud: &PointCloud,
        center: &[f64],
        radius: f64,
        closed: bool,
    ) -> Vec<usize> {
        let scan = |cloud: &PointCloud| -> Vec<usize> {
            (0..cloud.len())
                .filter(|&j| inside(euclidean(center, cloud.point(j)), radius, closed))
                .collect()
        };
        if self.dim > MAX_INDEXED_DIM || !radius.is_finite() {
            return scan(cloud);
        }
        let mut lo = [0i64; MAX_INDEXED_DIM];
        let mut hi = [0i64; MAX_INDEXED_DIM];
        let mut visits: f64 = 1.0;
        for k in 0..self.dim {
            // One extra cell on each side absorbs rounding at the cell edges.
            lo[k] = self.coord_key(center[k] - radius, k) - 1;
            hi[k] = self.coord_key(center[k] + radius, k) + 1;
            visits *= (hi[k] - lo[k] + 1) as f64;
        }
        if visits > self.cells.len() as f64 {
            return scan(cloud);
        }
        let mut out = Vec::new();
        let mut key = lo;
        'outer: loop {
            if let Some(&(s, e)) = self.cells.get(&key) {
                for &j in &self.order[s as usize..e as usize] {
                    let j = j as usize;
                    if inside(euclidean(center, cloud.point(j)), radius, closed) {
                        out.push(j);
                    }
                }
            }
            for k in 0..self.dim {
                if key[k] < hi[k] {
                    key[k] += 1;
                    continue 'outer;
                }
                key[k] = lo[k];
            }
            break;
        }
        out.sort_unstable();
        out
    }
}

/// Per-state neighbour lists for a fixed radius, stored row-compressed.
#[derive(Debug, Clone)]
pub struct Neighborhoods {
    pub(crate) rows: Vec<usize>,
    offsets: Vec<usize>,
    cols: Vec<u32>,
}

impl Neighborhoods {
    /// Ball of the given radius around each listed state.
    pub fn build(cloud: &PointCloud, rows: Vec<usize>, radius: f64, closed: bool) -> Self {
        let grid = GridIndex::build(cloud, radius.max(f64::MIN_POSITIVE));
        let mut offsets = Vec::with_capacity(rows.len() + 1);
        let mut cols = Vec::new();
        offsets.push(0);
        for &i in &rows {
            for j in grid.query(cloud, cloud.point(i), radius, closed) {
                cols.push(j as u32);
            }
            offsets.push(cols.len());
        }
        Neighborhoods { rows, offsets, cols }
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    /// Neighbours of the `k`-th listed state.
    #[inline]
    pub fn neighbors(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        self.cols[self.offsets[k]..self.offsets[k + 1]]
            .iter()
            .map(|&j| j as usize)
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallSpec {
    pub center_index: usize,
    pub radius: f64,
    pub closed: bool,
}

impl BallSpec {
    pub fn new(center_index: usize, radius: f64, closed: bool) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::invalid(format!("ball radius must be positive, got {radius}")));
        }
        Ok(BallSpec { center_index, radius, closed })
    }

    pub fn closed(center_index: usize, radius: f64) -> Result<Self> {
        Self::new(center_index, radius, true)
    }

    pub fn open(center_index: usize, radius: f64) -> Result<Self> {
        Self::new(center_index, radius, false)
    }

    pub fn contains(&self, cloud: &PointCloud, j: usize) -> bool {
        inside(cloud.dist(self.center_index, j), self.radius, self.closed)
    }

    pub fn with_radius(&self, radius: f64) -> Result<Self> {
        Self::new(self.center_index, radius, self.closed)
    }
}

/// Atomic measure on a cloud with full support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureWeights {
    weights: Vec<f64>,
    total: f64,
}

impl MeasureWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if let Some(i) = weights.iter().position(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::invalid(format!(
                "weight {i} is {}, measures must have full support",
                weights[i]
            )));
        }
        let total = weights.iter().sum();
        Ok(MeasureWeights { weights, total })
    }

    /// Equal atoms of mass `1/n`.
    pub fn uniform(n: usize) -> Result<Self> {
        Self::new(vec![1.0 / n as f64; n])
    }

    pub fn for_cloud(cloud: &PointCloud, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != cloud.len() {
            return Err(Error::invalid(format!(
                "{} weights for a cloud of {} points",
                weights.len(),
                cloud.len()
            )));
        }
        Self::new(weights)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn mass(&self, indices: &[usize]) -> f64 {
        indices.iter().map(|&i| self.weights[i]).sum()
    }

    /// Rescaled to total mass one.
    pub fn normalized(&self) -> Self {
        MeasureWeights {
            weights: self.weights.iter().map(|w| w / self.total).collect(),
            total: 1.0,
        }
    }

    pub fn check_cloud(&self, cloud: &PointCloud) -> Result<()> {
        if self.len() != cloud.len() {
            return Err(Error::invalid(format!(
                "measure has {} atoms but the cloud has {} points",
                self.len(),
                cloud.len()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line(xs: &[f64]) -> PointCloud {
        PointCloud::from_flat(xs.to_vec(), 1, vec![0.0; xs.len()], "line").unwrap()
    }

    fn brute_nn(c: &PointCloud, i: usize) -> Option<f64> {
        let d = (0..c.len())
            .map(|j| c.dist(i, j))
            .filter(|&d| d > 0.0)
            .fold(f64::INFINITY, f64::min);
        d.is_finite().then_some(d)
    }

    #[test]
    fn nearest_neighbour_matches_brute_force() {
        // Many points share each axis value, and two points are repeated.
        let mut flat = Vec::new();
        for y in 0..40 {
            for x in 0..40 {
                flat.extend_from_slice(&[x as f64 * 0.1, y as f64 * 0.1]);
            }
        }
        flat.extend_from_slice(&[0.0, 0.0, 0.05, 0.0]);
        let n = flat.len() / 2;
        let c = PointCloud::from_flat(flat, 2, vec![0.0; n], "grid").unwrap();
        for i in (0..n).step_by(37).chain([0, n - 2, n - 1]) {
            assert_eq!(c.nearest_neighbor_distance(i), brute_nn(&c, i));
        }
        let same = PointCloud::from_flat(vec![1.0; 6], 3, vec![0.0; 2], "same").unwrap();
        assert_eq!(same.nearest_neighbor_distance(0), None);
        assert_eq!(same.resolution(), 0.0);
    }

    #[test]
    fn distance_examples() {
        let c = PointCloud::from_flat(vec![0.0, 0.0, 3.0, 4.0], 2, vec![0.0; 2], "c").unwrap();
        assert_eq!(c.distance(0, 1).unwrap(), 5.0);
        assert_eq!(c.distance(1, 1).unwrap(), 0.0);
        assert_eq!(line(&[0.0, 1.0, 2.0]).distance(0, 2).unwrap(), 2.0);
        assert!(matches!(c.distance(0, 2), Err(Error::IndexOutOfRange { index: 2, len: 2 })));
    }

    #[test]
    fn ball_query_examples() {
        let c = line(&[0.0, 0.5, 1.0]);
        assert_eq!(c.ball_query(&BallSpec::open(0, 0.6).unwrap()).unwrap(), vec![0, 1]);
        assert_eq!(c.ball_query(&BallSpec::open(0, 0.5).unwrap()).unwrap(), vec![0]);
        assert_eq!(c.ball_query(&BallSpec::closed(0, 0.5).unwrap()).unwrap(), vec![0, 1]);
        assert_eq!(
            c.ball_query(&BallSpec::closed(1, c.diameter()).unwrap()).unwrap(),
            vec![0, 1, 2]
        );
        assert!(c.ball_query(&BallSpec { center_index: 7, radius: 1.0, closed: true }).is_err());
        assert!(BallSpec::open(0, 0.0).is_err());
    }

    #[test]
    fn diameter_examples() {
        let sq = PointCloud::from_flat(
            vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0],
            2,
            vec![0.0; 4],
            "sq",
        )
        .unwrap();
        assert_eq!(sq.diameter(), 2f64.sqrt());
        assert_eq!(line(&[3.0]).diameter(), 0.0);
        assert_eq!(line(&[0.0, 0.3, 1.0]).diameter(), 1.0);
    }

    #[test]
    fn rejects_bad_clouds() {
        assert!(matches!(PointCloud::from_flat(vec![], 1, vec![], "e"), Err(Error::EmptyCloud)));
        assert!(PointCloud::from_flat(vec![1.0, f64::NAN], 1, vec![0.0; 2], "n").is_err());
        assert!(PointCloud::from_flat(vec![1.0, 2.0], 1, vec![0.0], "p").is_err());
        assert!(MeasureWeights::new(vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let c = PointCloud::from_flat(
            vec![0.1, 1.0 / 3.0, -2.5e-17, 1e300, 5.0, 6.0],
            2,
            vec![0.0, 0.25, 1.0 / 7.0],
            "rt",
        )
        .unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x0,x1,param\n"));
        let back = PointCloud::read_csv(&buf[..], "rt").unwrap();
        assert_eq!(back.coords(), c.coords());
        assert_eq!(back.params(), c.params());
    }

    #[test]
    fn nearest_neighbor_and_resolution() {
        let c = line(&[0.0, 0.1, 0.3, 0.7]);
        assert_eq!(c.nearest_neighbor_distance(3), Some(0.7 - 0.3));
        assert!((c.resolution() - 0.4).abs() < 1e-15);
        assert_eq!(line(&[1.0]).nearest_neighbor_distance(0), None);
    }

    fn cloud_strategy() -> impl Strategy<Value = PointCloud> {
        (1usize..=3, 2usize..60).prop_flat_map(|(dim, n)| {
            proptest::collection::vec(-2.0f64..2.0, dim * n).prop_map(move |mut coords| {
                // Snap some coordinates to a coarse lattice to create exact
                // boundary ties.
                for c in coords.iter_mut().step_by(3) {
                    *c = (*c * 4.0).round() / 4.0;
                }
                PointCloud::from_flat(coords, dim, vec![0.0; n], "p").unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn triangle_inequality(c in cloud_strategy()) {
            let n = c.len();
            for i in 0..n.min(12) {
                for j in 0..n.min(12) {
                    for k in 0..n.min(12) {
                        let lhs = c.dist(i, k);
                        let rhs = c.dist(i, j) + c.dist(j, k);
                        prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-15);
                    }
                }
                prop_assert_eq!(c.dist(i, i), 0.0);
            }
        }

        #[test]
        fn indexed_query_matches_scan(c in cloud_strategy(), r in 0.01f64..3.0, center in 0usize..60, closed in any::<bool>()) {
            let center = center % c.len();
            let ball = BallSpec::new(center, r, closed).unwrap();
            prop_assert_eq!(c.ball_query(&ball).unwrap(), c.ball_query_scan(&ball).unwrap());
            // Exact boundary radii taken from actual distances.
            let d = c.dist(center, c.len() - 1);
            if d > 0.0 {
                let tie = BallSpec::new(center, d, closed).unwrap();
                prop_assert_eq!(c.ball_query(&tie).unwrap(), c.ball_query_scan(&tie).unwrap());
            }
        }

        #[test]
        fn ball_nesting(c in cloud_strategy(), r in 0.01f64..3.0, delta in 1e-9f64..0.5) {
            let open = c.ball_query(&BallSpec::open(0, r).unwrap()).unwrap();
            let closed = c.ball_query(&BallSpec::closed(0, r).unwrap()).unwrap();
            let wider = c.ball_query(&BallSpec::open(0, r + delta).unwrap()).unwrap();
            prop_assert!(open.iter().all(|i| closed.contains(i)));
            prop_assert!(closed.iter().all(|i| wider.contains(i)));
        }

        #[test]
        fn diameter_matches_brute_force(c in cloud_strategy()) {
            let mut brute = 0.0_f64;
            for i in 0..c.len() {
                for j in 0..c.len() {
                    brute = brute.max(c.dist(i, j));
                }
            }
            prop_assert_eq!(c.diameter(), brute);
            // Smallest closed radius whose ball at some point covers everything
            // is at most the diameter and the diameter ball always covers.
            for i in 0..c.len() {
                let all = c.ball_query(&BallSpec::closed(i, brute.max(1e-300)).unwrap()).unwrap();
                prop_assert_eq!(all.len(), c.len());
            }
        }
    }
}
