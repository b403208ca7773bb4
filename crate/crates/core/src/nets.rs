//! Greedy epsilon-nets and the covering / proximity graphs built on them.

use std::collections::{HashMap, VecDeque};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{euclidean, fmt_f64, PointCloud};
use crate::io;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonNet {
    pub epsilon: f64,
    /// Cloud indices of the net points, in insertion order.
    pub net_indices: Vec<usize>,
    /// For each cloud point, the position in `net_indices` of its nearest
    /// net point (lowest cloud index on ties).
    pub cover_of: Vec<usize>,
}

impl EpsilonNet {
    pub fn len(&self) -> usize {
        self.net_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.net_indices.is_empty()
    }

    /// Cloud index of the net point covering cloud point `i`.
    pub fn cover_point(&self, i: usize) -> usize {
        self.net_indices[self.cover_of[i]]
    }

    /// The net as its own point cloud (vertex `k` is `net_indices[k]`).
    pub fn subcloud(&self, cloud: &PointCloud) -> PointCloud {
        let mut coords = Vec::with_capacity(self.len() * cloud.dim());
        let mut params = Vec::with_capacity(self.len());
        for &i in &self.net_indices {
            coords.extend_from_slice(cloud.point(i));
            params.push(cloud.params()[i]);
        }
        PointCloud::from_flat(coords, cloud.dim(), params, format!("{}-net", cloud.label()))
            .expect("a net is a nonempty subset of a valid cloud")
    }
}

/// Insert-only hash grid over a growing subset of cloud points.
struct DynamicGrid<'a> {
    cloud: &'a PointCloud,
    cell: f64,
    cells: HashMap<[i64; 3], Vec<usize>>,
    all: Vec<usize>,
}

impl<'a> DynamicGrid<'a> {
    fn new(cloud: &'a PointCloud, cell: f64) -> Self {
        DynamicGrid { cloud, cell, cells: HashMap::new(), all: Vec::new() }
    }

    fn indexed(&self) -> bool {
        self.cloud.dim() <= 3 && self.cell.is_finite() && self.cell > 0.0
    }

    fn key(&self, p: &[f64]) -> [i64; 3] {
        let mut k = [0; 3];
        for (d, x) in p.iter().enumerate() {
            k[d] = (x / self.cell).floor() as i64;
        }
        k
    }

    fn insert(&mut self, i: usize) {
        if self.indexed() {
            let k = self.key(self.cloud.point(i));
            self.cells.entry(k).or_default().push(i);
        } else {
            self.all.push(i);
        }
    }

    /// Calls `f` on every stored point that may lie within one cell of `p`.
    fn for_near(&self, p: &[f64], mut f: impl FnMut(usize)) {
        if !self.indexed() {
            self.all.iter().for_each(|&j| f(j));
            return;
        }
        let dim = self.cloud.dim();
        let base = self.key(p);
        let span: i64 = 3_i64.pow(dim as u32);
        for code in 0..span {
            let mut k = base;
            let mut c = code;
            for d in 0..dim {
                k[d] += c % 3 - 1;
                c /= 3;
            }
            if let Some(v) = self.cells.get(&k) {
                v.iter().for_each(|&j| f(j));
            }
        }
    }
}

/// Greedy maximal epsilon-packing.
///
/// Points are visited in the order `seed, seed+1, ..., n-1, 0, ..., seed-1`;
/// a point joins when it is at distance at least `epsilon` from every net
/// point chosen so far.
pub fn build_epsilon_net(cloud: &PointCloud, epsilon: f64, seed_index: usize) -> Result<EpsilonNet> {
    cloud.check_index(seed_index)?;
    greedy(cloud, epsilon, &[], seed_index)
}

/// Extends an existing packing to an `epsilon`-net: the prior points are
/// kept and the scan continues from the first of them.
pub fn extend_epsilon_net(cloud: &PointCloud, prior: &[usize], epsilon: f64) -> Result<EpsilonNet> {
    let seed = *prior.first().ok_or_else(|| Error::invalid("cannot extend an empty net"))?;
    for &p in prior {
        cloud.check_index(p)?;
    }
    for (a, &p) in prior.iter().enumerate() {
        for &q in &prior[a + 1..] {
            if cloud.dist(p, q) < epsilon {
                return Err(Error::invalid(format!(
                    "prior points {p} and {q} are closer than epsilon={epsilon}"
                )));
            }
        }
    }
    greedy(cloud, epsilon, prior, seed)
}

fn greedy(cloud: &PointCloud, epsilon: f64, prior: &[usize], seed: usize) -> Result<EpsilonNet> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    let n = cloud.len();
    let mut grid = DynamicGrid::new(cloud, epsilon);
    let mut in_net = vec![false; n];
    let mut net = Vec::new();
    for &p in prior {
        grid.insert(p);
        in_net[p] = true;
        net.push(p);
    }
    for i in (seed..n).chain(0..seed) {
        if in_net[i] {
            continue;
        }
        let x = cloud.point(i);
        let mut free = true;
        grid.for_near(x, |j| free &= euclidean(x, cloud.point(j)) >= epsilon);
        if free {
            grid.insert(i);
            in_net[i] = true;
            net.push(i);
        }
    }

    let position: HashMap<usize, usize> = net.iter().enumerate().map(|(k, &i)| (i, k)).collect();
    let cover_of = (0..n)
        .into_par_iter()
        .map(|i| {
            let x = cloud.point(i);
            let mut best = (f64::INFINITY, usize::MAX);
            grid.for_near(x, |j| {
                let d = euclidean(x, cloud.point(j));
                if d < best.0 || (d == best.0 && j < best.1) {
                    best = (d, j);
                }
            });
            position[&best.1]
        })
        .collect();
    Ok(EpsilonNet { epsilon, net_indices: net, cover_of })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GraphKind {
    /// `x ~ y` when some cloud point lies within `eta * epsilon` of both.
    Covering { eta: f64 },
    /// `x ~ y` when `d(x, y) < rho * epsilon`.
    Proximity { rho: f64 },
}

impl GraphKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            GraphKind::Covering { eta } if !(eta >= 1.0) || !eta.is_finite() => {
                Err(Error::invalid(format!("covering graphs need eta >= 1, got {eta}")))
            }
            GraphKind::Proximity { rho } if !(rho >= 2.0) || !rho.is_finite() => {
                Err(Error::invalid(format!("proximity graphs need rho >= 2, got {rho}")))
            }
            _ => Ok(()),
        }
    }
}

impl Default for GraphKind {
    fn default() -> Self {
        GraphKind::Covering { eta: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkGraph {
    pub net: EpsilonNet,
    pub kind: GraphKind,
    /// Sorted neighbour lists over net vertices, self-loops included.
    pub adjacency: Vec<Vec<usize>>,
    pub degrees: Vec<usize>,
}

pub fn build_walk_graph(cloud: &PointCloud, net: &EpsilonNet, kind: GraphKind) -> Result<WalkGraph> {
    kind.validate()?;
    let sub = net.subcloud(cloud);
    let m = net.len();
    let mut adjacency: Vec<Vec<usize>> = match kind {
        GraphKind::Proximity { rho } => {
            let radius = rho * net.epsilon;
            (0..m).into_par_iter().map(|k| sub.ball_around(sub.point(k), radius, false)).collect()
        }
        GraphKind::Covering { eta } => {
            let radius = eta * net.epsilon;
            let near: Vec<Vec<usize>> = (0..cloud.len())
                .into_par_iter()
                .map(|z| sub.ball_around(cloud.point(z), radius, false))
                .collect();
            let mut adj: Vec<Vec<usize>> = vec![Vec::new(); m];
            for group in &near {
                for &a in group {
                    adj[a].extend_from_slice(group);
                }
            }
            adj
        }
    };
    for (k, row) in adjacency.iter_mut().enumerate() {
        row.push(k);
        row.sort_unstable();
        row.dedup();
    }
    let degrees = adjacency.iter().map(Vec::len).collect();
    Ok(WalkGraph { net: net.clone(), kind, adjacency, degrees })
}

pub fn graph_is_connected(g: &WalkGraph) -> bool {
    component_count(&g.adjacency) <= 1
}

pub fn component_count(adjacency: &[Vec<usize>]) -> usize {
    let n = adjacency.len();
    let mut seen = vec![false; n];
    let mut count = 0;
    let mut queue = VecDeque::new();
    for s in 0..n {
        if seen[s] {
            continue;
        }
        count += 1;
        seen[s] = true;
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            for &u in &adjacency[v] {
                if !seen[u] {
                    seen[u] = true;
                    queue.push_back(u);
                }
            }
        }
    }
    count
}

impl WalkGraph {
    pub fn vertex_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn max_degree(&self) -> usize {
        self.degrees.iter().copied().max().unwrap_or(0)
    }

    /// Edge list over cloud indices (`source <= target`, self-loops kept).
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (k, row) in self.adjacency.iter().enumerate() {
            for &l in row.iter().filter(|&&l| l >= k) {
                out.push((self.net.net_indices[k], self.net.net_indices[l]));
            }
        }
        out
    }

    /// Writes `<stem>_edges.csv` (`source,target`) and `<stem>_members.csv`
    /// (`index,net_member,cover`).
    pub fn save_csv(&self, dir: &Path, stem: &str) -> Result<()> {
        let edges: Vec<Vec<String>> =
            self.edges().into_iter().map(|(a, b)| vec![a.to_string(), b.to_string()]).collect();
        io::write_rows(&dir.join(format!("{stem}_edges.csv")), &["source", "target"], &edges)?;
        let mut member = vec![false; self.net.cover_of.len()];
        for &i in &self.net.net_indices {
            member[i] = true;
        }
        let rows: Vec<Vec<String>> = (0..member.len())
            .map(|i| {
                vec![
                    i.to_string(),
                    u8::from(member[i]).to_string(),
                    self.net.cover_point(i).to_string(),
                ]
            })
            .collect();
        io::write_rows(
            &dir.join(format!("{stem}_members.csv")),
            &["index", "net_member", "cover"],
            &rows,
        )?;
        io::write_rows(
            &dir.join(format!("{stem}_meta.csv")),
            &["epsilon", "vertices", "max_degree"],
            &[vec![fmt_f64(self.net.epsilon), self.vertex_count().to_string(), self.max_degree().to_string()]],
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tenths() -> PointCloud {
        let xs: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
        PointCloud::from_flat(xs, 1, vec![0.0; 11], "tenths").unwrap()
    }

    fn path_graph(n: usize) -> Vec<Vec<usize>> {
        (0..n)
            .map(|i| {
                let mut v = vec![i];
                if i > 0 {
                    v.insert(0, i - 1);
                }
                if i + 1 < n {
                    v.push(i + 1);
                }
                v
            })
            .collect()
    }

    #[test]
    fn greedy_net_on_tenths() {
        let c = tenths();
        let net = build_epsilon_net(&c, 0.25, 0).unwrap();
        assert_eq!(net.net_indices, vec![0, 3, 6, 9]);
        assert_eq!(net.cover_point(10), 9);
        // 0.1 and 0.2: 0.2 is 0.1 from 0.3 and 0.2 from 0.0.
        assert_eq!(net.cover_point(2), 3);
        assert_eq!(build_epsilon_net(&c, 5.0, 4).unwrap().net_indices, vec![4]);
        assert_eq!(build_epsilon_net(&c, 0.05, 0).unwrap().len(), 11);
    }

    #[test]
    fn graphs_on_tenths_net() {
        let c = tenths();
        let net = build_epsilon_net(&c, 0.25, 0).unwrap();
        let prox = build_walk_graph(&c, &net, GraphKind::Proximity { rho: 2.0 }).unwrap();
        assert_eq!(prox.adjacency, path_graph(4));
        let cov = build_walk_graph(&c, &net, GraphKind::Covering { eta: 1.0 }).unwrap();
        assert_eq!(cov.adjacency, path_graph(4));
        assert!(graph_is_connected(&cov));
        assert!(build_walk_graph(&c, &net, GraphKind::Proximity { rho: 1.5 }).is_err());
        assert!(build_walk_graph(&c, &net, GraphKind::Covering { eta: 0.5 }).is_err());
    }

    #[test]
    fn singleton_net_graph() {
        let c = tenths();
        let net = build_epsilon_net(&c, 10.0, 0).unwrap();
        let g = build_walk_graph(&c, &net, GraphKind::default()).unwrap();
        assert_eq!(g.adjacency, vec![vec![0]]);
        assert_eq!(g.degrees, vec![1]);
    }

    #[test]
    fn isolated_vertices_are_disconnected() {
        let c = PointCloud::from_flat(vec![0.0, 5.0], 1, vec![0.0; 2], "two").unwrap();
        let net = build_epsilon_net(&c, 1.0, 0).unwrap();
        let g = build_walk_graph(&c, &net, GraphKind::Proximity { rho: 2.0 }).unwrap();
        assert_eq!(g.adjacency, vec![vec![0], vec![1]]);
        assert!(!graph_is_connected(&g));
    }

    #[test]
    fn csv_output_lists_members_and_edges() {
        let dir = tempfile::tempdir().unwrap();
        let c = tenths();
        let net = build_epsilon_net(&c, 0.25, 0).unwrap();
        let g = build_walk_graph(&c, &net, GraphKind::default()).unwrap();
        g.save_csv(dir.path(), "g").unwrap();
        let edges = std::fs::read_to_string(dir.path().join("g_edges.csv")).unwrap();
        assert!(edges.starts_with("source,target\n0,0\n0,3\n"));
        let members = std::fs::read_to_string(dir.path().join("g_members.csv")).unwrap();
        assert!(members.contains("\n3,1,3\n"));
        assert!(members.contains("\n10,0,9\n"));
    }

    fn cloud_2d() -> impl Strategy<Value = PointCloud> {
        proptest::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 1..80).prop_map(|pts| {
            let n = pts.len();
            let flat = pts.into_iter().flat_map(|(x, y)| [x, y]).collect();
            PointCloud::from_flat(flat, 2, vec![0.0; n], "p").unwrap()
        })
    }

    proptest! {
        #[test]
        fn net_is_separated_and_covering(c in cloud_2d(), eps in 0.05..0.8f64, seed in 0usize..80) {
            let seed = seed % c.len();
            let net = build_epsilon_net(&c, eps, seed).unwrap();
            prop_assert_eq!(net.net_indices[0], seed);
            for (a, &p) in net.net_indices.iter().enumerate() {
                for &q in &net.net_indices[a + 1..] {
                    prop_assert!(c.distance(p, q).unwrap() >= eps);
                }
            }
            for i in 0..c.len() {
                let k = net.cover_point(i);
                let d = c.distance(i, k).unwrap();
                prop_assert!(d < eps);
                for &q in &net.net_indices {
                    let dq = c.distance(i, q).unwrap();
                    prop_assert!(dq > d || (dq == d && q >= k));
                }
            }
        }

        #[test]
        fn extension_is_superset(c in cloud_2d(), eps in 0.1..0.8f64, shrink in 0.2..0.9f64) {
            let coarse = build_epsilon_net(&c, eps, 0).unwrap();
            let fine = extend_epsilon_net(&c, &coarse.net_indices, eps * shrink).unwrap();
            prop_assert_eq!(&fine.net_indices[..coarse.len()], &coarse.net_indices[..]);
        }

        #[test]
        fn net_size_non_increasing(c in cloud_2d(), eps in 0.05..0.5f64) {
            let a = build_epsilon_net(&c, eps, 0).unwrap().len();
            let b = build_epsilon_net(&c, eps * 1.7, 0).unwrap().len();
            prop_assert!(b <= a);
        }

        #[test]
        fn graphs_symmetric_with_loops(c in cloud_2d(), eps in 0.05..0.5f64) {
            let net = build_epsilon_net(&c, eps, 0).unwrap();
            let own = net.subcloud(&c);
            let own_net = build_epsilon_net(&own, eps, 0).unwrap();
            prop_assert_eq!(own_net.len(), own.len());
            for kind in [GraphKind::Covering { eta: 1.0 }, GraphKind::Proximity { rho: 2.0 }] {
                let g = build_walk_graph(&c, &net, kind).unwrap();
                for (k, row) in g.adjacency.iter().enumerate() {
                    prop_assert!(row.binary_search(&k).is_ok());
                    for &l in row {
                        prop_assert!(g.adjacency[l].binary_search(&k).is_ok());
                    }
                }
            }
            // On the net itself, every covering edge is a proximity edge.
            let cov = build_walk_graph(&own, &own_net, GraphKind::Covering { eta: 1.0 }).unwrap();
            let prox = build_walk_graph(&own, &own_net, GraphKind::Proximity { rho: 2.0 }).unwrap();
            for (k, row) in cov.adjacency.iter().enumerate() {
                for l in row {
                    prop_assert!(prox.adjacency[k].binary_search(l).is_ok());
                }
            }
        }
    }
}
