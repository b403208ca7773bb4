//! Reversible chains killed on leaving a set of states.
//!
//! Both walk modes share one structure: a state `i` jumps to a neighbour `j`
//! with probability `w_j / v_i`, where `v_i` sums `w` over the neighbours of
//! `i`. For the measure walk `w` is the atom weight and neighbours are the
//! open `r`-ball; for the graph walk `w = 1` and `v` is the degree. The
//! stationary weight `m_i = v_i w_i` makes `m_i P_ij = w_i w_j` symmetric, so
//! `A = diag(m) (I - P_B)` is symmetric positive definite once every state
//! can leak out.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{MeasureWeights, Neighborhoods, PointCloud};
use crate::linalg::{self, CgReport};

/// Tolerances shared by every killed solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    /// Bound on `|x - f - P_B x|_inf / |x|_inf`.
    pub tol: f64,
    pub max_iter: usize,
    /// Systems with at most this many states are also solved densely and
    /// the two answers compared.
    pub dense_check_below: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tol: 1e-10, max_iter: 1_000_000, dense_check_below: 2000 }
    }
}

#[derive(Debug, Clone)]
pub struct KilledSystem {
    inside: Vec<usize>,
    offsets: Vec<usize>,
    cols: Vec<u32>,
    node_w: Vec<f64>,
    norm: Vec<f64>,
    /// Weight of the neighbours outside the set, summed directly.
    leak: Vec<f64>,
}

impl KilledSystem {
    /// Generic constructor. `rows[k]` lists every neighbour (global index,
    /// the state itself included) of `inside[k]`; `weight(j)` gives `w_j`.
    pub fn from_rows<F>(inside: Vec<usize>, rows: &[Vec<usize>], weight: F) -> Self
    where
        F: Fn(usize) -> f64,
    {
        debug_assert!(inside.windows(2).all(|p| p[0] < p[1]));
        let mut offsets = Vec::with_capacity(inside.len() + 1);
        let mut cols = Vec::new();
        let mut norm = Vec::with_capacity(inside.len());
        let mut leak = Vec::with_capacity(inside.len());
        offsets.push(0);
        for row in rows {
            let (mut v, mut out) = (0.0, 0.0);
            for &j in row {
                let w = weight(j);
                v += w;
                match inside.binary_search(&j) {
                    Ok(l) => cols.push(l as u32),
                    Err(_) => out += w,
                }
            }
            norm.push(v);
            leak.push(out);
            offsets.push(cols.len());
        }
        let node_w = inside.iter().map(|&i| weight(i)).collect();
        KilledSystem { inside, offsets, cols, node_w, norm, leak }
    }

    /// The measure walk with open jump balls of radius `r`, killed outside
    /// the (ascending) state list `inside`.
    pub fn measure(cloud: &PointCloud, mu: &MeasureWeights, r: f64, inside: Vec<usize>) -> Self {
        let nb = Neighborhoods::build(cloud, inside.clone(), r, false);
        let rows: Vec<Vec<usize>> = (0..nb.row_count()).map(|k| nb.neighbors(k).collect()).collect();
        Self::from_rows(inside, &rows, |j| mu.weight(j))
    }

    /// Uniform jumps over adjacency lists (self-loops expected in the lists).
    pub fn graph(adjacency: &[Vec<usize>], inside: Vec<usize>) -> Self {
        let rows: Vec<Vec<usize>> = inside.iter().map(|&i| adjacency[i].clone()).collect();
        Self::from_rows(inside, &rows, |_| 1.0)
    }

    pub fn len(&self) -> usize {
        self.inside.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inside.is_empty()
    }

    /// Global indices of the live states, ascending.
    pub fn inside(&self) -> &[usize] {
        &self.inside
    }

    pub fn local_of(&self, global: usize) -> Option<usize> {
        self.inside.binary_search(&global).ok()
    }

    #[inline]
    pub fn neighbors(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        self.cols[self.offsets[k]..self.offsets[k + 1]].iter().map(|&j| j as usize)
    }

    pub fn node_weights(&self) -> &[f64] {
        &self.node_w
    }

    /// Normaliser `v_i` (ball mass or degree) of each live state.
    pub fn normalizers(&self) -> &[f64] {
        &self.norm
    }

    /// Stationary weights `m_i = v_i w_i`.
    pub fn mass(&self) -> Vec<f64> {
        self.norm.iter().zip(&self.node_w).map(|(v, w)| v * w).collect()
    }

    #[inline]
    pub fn transition(&self, k: usize, l: usize) -> f64 {
        self.node_w[l] / self.norm[k]
    }

    /// Row sums of `P_B`; below one exactly where the walk can leave.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.len())
            .map(|k| self.neighbors(k).map(|l| self.node_w[l]).sum::<f64>() / self.norm[k])
            .collect()
    }

    /// `y = P_B x`.
    pub fn apply_p(&self, x: &[f64], y: &mut [f64]) {
        for k in 0..self.len() {
            let s: f64 = self.neighbors(k).map(|l| self.node_w[l] * x[l]).sum();
            y[k] = s / self.norm[k];
        }
    }

    /// `y = diag(m) (I - P_B) x`, the symmetric form. Written with
    /// differences `x_k - x_l` so smooth vectors do not cancel.
    pub fn apply_a(&self, x: &[f64], y: &mut [f64]) {
        for k in 0..self.len() {
            let s: f64 = self.neighbors(k).map(|l| self.node_w[l] * (x[k] - x[l])).sum();
            y[k] = self.node_w[k] * (s + self.leak[k] * x[k]);
        }
    }

    pub fn diag_a(&self) -> Vec<f64> {
        (0..self.len())
            .map(|k| self.node_w[k] * (self.norm[k] - self.node_w[k]))
            .map(|d| if d > 0.0 { d } else { f64::MIN_POSITIVE })
            .collect()
    }

    pub fn dense_p(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut p = DMatrix::zeros(n, n);
        for k in 0..n {
            for l in self.neighbors(k) {
                p[(k, l)] += self.transition(k, l);
            }
        }
        p
    }

    pub fn dense_a(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut a = DMatrix::zeros(n, n);
        for k in 0..n {
            a[(k, k)] += self.norm[k] * self.node_w[k];
            for l in self.neighbors(k) {
                a[(k, l)] -= self.node_w[k] * self.node_w[l];
            }
        }
        a
    }

    /// Errors with `NoExit` unless every live state can reach a state whose
    /// row leaks mass out of the set.
    pub fn check_exit(&self) -> Result<()> {
        let n = self.len();
        if n == 0 {
            return Ok(());
        }
        let sums = self.row_sums();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::new();
        for k in 0..n {
            if sums[k] < 1.0 - 1e-14 {
                seen[k] = true;
                queue.push_back(k);
            }
        }
        // Neighbour relations are symmetric, so forward search from the
        // leaking states finds everything that can reach them.
        while let Some(k) = queue.pop_front() {
            for l in self.neighbors(k) {
                if !seen[l] {
                    seen[l] = true;
                    queue.push_back(l);
                }
            }
        }
        if seen.iter().all(|&s| s) {
            Ok(())
        } else {
            Err(Error::NoExit)
        }
    }

    /// Solves `(I - P_B) x = f` and returns `x` with the achieved relative
    /// sup-norm residual.
    pub fn solve(&self, f: &[f64], opts: &SolveOptions) -> Result<(Vec<f64>, CgReport)> {
        let n = self.len();
        if n == 0 {
            return Ok((Vec::new(), CgReport { iterations: 0, residual: 0.0 }));
        }
        self.check_exit()?;
        let m = self.mass();
        let b: Vec<f64> = m.iter().zip(f).map(|(mi, fi)| mi * fi).collect();
        let mut px = vec![0.0; n];
        let mut last = f64::INFINITY;
        let (x, mut rep) = linalg::conjugate_gradient(
            |x, y| self.apply_a(x, y),
            &self.diag_a(),
            &b,
            None,
            opts.max_iter,
            |x| {
                last = self.relative_residual(x, f, &mut px);
                last <= opts.tol
            },
        )?;
        rep.residual = last;
        if n <= opts.dense_check_below {
            let dense = linalg::dense_spd_solve(self.dense_a(), &b)?;
            let scale = linalg::norm_inf(&dense).max(f64::MIN_POSITIVE);
            let gap = x.iter().zip(&dense).fold(0.0_f64, |g, (a, d)| g.max((a - d).abs()));
            if gap / scale > 1e-8 {
                return Err(Error::ConvergenceFailure {
                    what: "dense cross-check",
                    iterations: rep.iterations,
                    residual: gap / scale,
                });
            }
        }
        Ok((x, rep))
    }

    /// `|x - f - P_B x|_inf / |x|_inf`.
    pub fn relative_residual(&self, x: &[f64], f: &[f64], scratch: &mut [f64]) -> f64 {
        self.apply_p(x, scratch);
        let mut worst = 0.0_f64;
        for k in 0..x.len() {
            worst = worst.max((x[k] - f[k] - scratch[k]).abs());
        }
        let scale = linalg::norm_inf(x);
        if scale == 0.0 {
            worst
        } else {
            worst / scale
        }
    }
}

/// Ball masses `v(r, x) = mu(B_r(x))` for every cloud point (open balls).
pub fn ball_masses(cloud: &PointCloud, mu: &MeasureWeights, r: f64) -> Vec<f64> {
    use rayon::prelude::*;
    let nb = Neighborhoods::build(cloud, (0..cloud.len()).collect(), r, false);
    (0..cloud.len())
        .into_par_iter()
        .map(|i| nb.neighbors(i).map(|j| mu.weight(j)).sum())
        .collect()
}

/// Number of connected components of the open `r`-ball graph.
pub fn ball_graph_components(cloud: &PointCloud, r: f64) -> usize {
    let n = cloud.len();
    let nb = Neighborhoods::build(cloud, (0..n).collect(), r, false);
    let mut seen = vec![false; n];
    let mut components = 0;
    let mut stack = Vec::new();
    for s in 0..n {
        if seen[s] {
            continue;
        }
        components += 1;
        seen[s] = true;
        stack.push(s);
        while let Some(i) = stack.pop() {
            for j in nb.neighbors(i) {
                if !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    components
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: usize) -> Vec<Vec<usize>> {
        (0..n)
            .map(|i| {
                let mut v = vec![i];
                if i > 0 {
                    v.push(i - 1);
                }
                if i + 1 < n {
                    v.push(i + 1);
                }
                v.sort_unstable();
                v
            })
            .collect()
    }

    #[test]
    fn path_graph_exit_times() {
        let sys = KilledSystem::graph(&path(5), vec![1, 2, 3]);
        let (x, rep) = sys.solve(&[1.0; 3], &SolveOptions::default()).unwrap();
        assert!(rep.residual <= 1e-10);
        for (got, want) in x.iter().zip([4.5, 6.0, 4.5]) {
            assert!((got - want).abs() < 1e-9);
        }
    }

    #[test]
    fn single_state_with_two_exits() {
        let sys = KilledSystem::graph(&path(3), vec![1]);
        let (x, _) = sys.solve(&[1.0], &SolveOptions::default()).unwrap();
        assert!((x[0] - 1.5).abs() < 1e-12);
        assert!((sys.dense_p()[(0, 0)] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn weighted_form_is_symmetric() {
        let cloud = PointCloud::from_flat(
            vec![0.0, 0.1, 0.25, 0.3, 0.42, 0.5, 0.61],
            1,
            vec![0.0; 7],
            "l",
        )
        .unwrap();
        let mu = MeasureWeights::new(vec![1.0, 2.0, 0.5, 1.5, 1.0, 3.0, 0.7]).unwrap();
        let sys = KilledSystem::measure(&cloud, &mu, 0.16, vec![1, 2, 3, 4, 5]);
        let mp = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(sys.mass())) * sys.dense_p();
        assert!((mp.clone() - mp.transpose()).amax() < 1e-15);
        let a = sys.dense_a();
        assert!((a.clone() - a.transpose()).amax() < 1e-15);
        assert!(sys.row_sums().iter().all(|&s| s <= 1.0 + 1e-15));
    }

    #[test]
    fn trapped_state_reports_no_exit() {
        // State 3 is isolated apart from its self-loop.
        let mut adj = path(3);
        adj.push(vec![3]);
        let sys = KilledSystem::graph(&adj, vec![1, 3]);
        assert!(matches!(sys.solve(&[1.0, 1.0], &SolveOptions::default()), Err(Error::NoExit)));
    }

    #[test]
    fn components_of_ball_graph() {
        let cloud =
            PointCloud::from_flat(vec![0.0, 0.1, 0.2, 1.0, 1.1], 1, vec![0.0; 5], "g").unwrap();
        assert_eq!(ball_graph_components(&cloud, 0.15), 2);
        assert_eq!(ball_graph_components(&cloud, 0.9), 1);
    }
}
