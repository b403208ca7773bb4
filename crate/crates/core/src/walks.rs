//! Exit times of the graph walk and the measure walk, with Monte Carlo
//! estimators used as independent checks.

use std::collections::HashMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use crate::chain::SolveOptions;
use crate::chain::KilledSystem;
use crate::error::{Error, Result};
use crate::geometry::{fmt_f64, inside, BallSpec, MeasureWeights, Neighborhoods, PointCloud};
use crate::io;
use crate::nets::{GraphKind, WalkGraph};

/// Step cap for a single simulated path.
pub const DEFAULT_PATH_CAP: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum FieldMode {
    Graph { kind: GraphKind, vertices: usize },
    Measure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitTimeField {
    pub ball: BallSpec,
    /// `epsilon` for the graph walk, `r` for the measure walk.
    pub scale: f64,
    pub mode: FieldMode,
    /// Cloud index of each state (net points in graph mode).
    pub states: Vec<usize>,
    pub values: Vec<f64>,
    pub inside_ball: Vec<bool>,
    pub sup_value: f64,
    pub solver_residual: f64,
    pub iterations: usize,
    /// `false`: values count steps. `true`: values are times.
    pub renormalized: bool,
}

impl ExitTimeField {
    /// Value at a cloud index, if that index is a state of the field.
    pub fn value_at(&self, cloud_index: usize) -> Option<f64> {
        match self.mode {
            FieldMode::Measure => self.values.get(cloud_index).copied(),
            FieldMode::Graph { .. } => {
                self.states.iter().position(|&s| s == cloud_index).map(|k| self.values[k])
            }
        }
    }

    pub fn inside_count(&self) -> usize {
        self.inside_ball.iter().filter(|&&b| b).count()
    }

    /// Writes `state_index,value,inside_ball`.
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let rows: Vec<Vec<String>> = self
            .states
            .iter()
            .zip(&self.values)
            .zip(&self.inside_ball)
            .map(|((s, v), b)| vec![s.to_string(), fmt_f64(*v), u8::from(*b).to_string()])
            .collect();
        io::write_rows(path, &["state_index", "value", "inside_ball"], &rows)
    }
}

/// Per-point walk exponent used for the time change `r^beta(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaField {
    pub values: Vec<f64>,
    pub radii_used: Vec<f64>,
}

impl BetaField {
    /// Accepts any finite `beta >= 0`; `beta = 0` gives the step clock.
    pub fn new(values: Vec<f64>, radii_used: Vec<f64>) -> Result<Self> {
        if values.len() != radii_used.len() {
            return Err(Error::invalid("beta values and radii differ in length"));
        }
        if let Some(b) = values.iter().find(|b| !(**b >= 0.0) || !b.is_finite()) {
            return Err(Error::invalid(format!("beta must be finite and nonnegative, got {b}")));
        }
        Ok(BetaField { values, radii_used })
    }

    pub fn constant(n: usize, beta: f64) -> Result<Self> {
        Self::new(vec![beta; n], vec![0.0; n])
    }

    /// Whether every value respects the lower bound `beta >= 1` that holds
    /// for estimated walk exponents.
    pub fn is_admissible(&self) -> bool {
        self.values.iter().all(|&b| b >= 1.0)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Mean holding time `r^beta(x)`.
    #[inline]
    pub fn tau(&self, i: usize, r: f64) -> f64 {
        r.powf(self.values[i])
    }

    pub fn check_cloud(&self, cloud: &PointCloud) -> Result<()> {
        if self.len() != cloud.len() {
            return Err(Error::invalid(format!(
                "beta field has {} entries but the cloud has {} points",
                self.len(),
                cloud.len()
            )));
        }
        Ok(())
    }
}

fn check_scale(r: f64) -> Result<()> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::invalid(format!("walk scale must be positive, got {r}")));
    }
    Ok(())
}

/// Exit times of the uniform walk on a net graph from the ball (states are
/// the net points; membership uses the ball's metric on the cloud).
pub fn exit_time_graph(
    g: &WalkGraph,
    cloud: &PointCloud,
    ball: &BallSpec,
    opts: &SolveOptions,
) -> Result<ExitTimeField> {
    cloud.check_index(ball.center_index)?;
    let states = g.net.net_indices.clone();
    let inside_ball: Vec<bool> = states.iter().map(|&s| ball.contains(cloud, s)).collect();
    if inside_ball.iter().all(|&b| b) {
        return Err(Error::NoExit);
    }
    let live: Vec<usize> = (0..states.len()).filter(|&k| inside_ball[k]).collect();
    let sys = KilledSystem::graph(&g.adjacency, live);
    let (x, rep) = sys.solve(&vec![1.0; sys.len()], opts)?;
    let mut values = vec![0.0; states.len()];
    for (k, &v) in sys.inside().iter().enumerate() {
        values[v] = x[k];
    }
    Ok(finish(
        *ball,
        g.net.epsilon,
        FieldMode::Graph { kind: g.kind, vertices: states.len() },
        states,
        values,
        inside_ball,
        rep.residual,
        rep.iterations,
        false,
    ))
}

/// Exit times (in steps) of the measure walk with jump radius `r`.
pub fn exit_time_measure(
    cloud: &PointCloud,
    mu: &MeasureWeights,
    r: f64,
    ball: &BallSpec,
    opts: &SolveOptions,
) -> Result<ExitTimeField> {
    measure_field(cloud, mu, r, ball, None, opts)
}

/// Exit times in the renormalised clock: solves `(I - P_B) phi = r^beta`.
pub fn exit_time_renormalized(
    cloud: &PointCloud,
    mu: &MeasureWeights,
    r: f64,
    ball: &BallSpec,
    beta: &BetaField,
    opts: &SolveOptions,
) -> Result<ExitTimeField> {
    beta.check_cloud(cloud)?;
    measure_field(cloud, mu, r, ball, Some(beta), opts)
}

/// The killed measure-walk system for a ball; shared with the spectral code.
pub(crate) fn measure_system(
    cloud: &PointCloud,
    mu: &MeasureWeights,
    r: f64,
    ball: &BallSpec,
) -> Result<(KilledSystem, Vec<bool>)> {
    mu.check_cloud(cloud)?;
    check_scale(r)?;
    let live = cloud.ball_query(ball)?;
    if live.len() == cloud.len() {
        return Err(Error::NoExit);
    }
    let mut inside_ball = vec![false; cloud.len()];
    for &i in &live {
        inside_ball[i] = true;
    }
    Ok((KilledSystem::measure(cloud, mu, r, live), inside_ball))
}

fn measure_field(
    cloud: &PointCloud,
    mu: &MeasureWeights,
    r: f64,
    ball: &BallSpec,
    beta: Option<&BetaField>,
    opts: &SolveOptions,
) -> Result<ExitTimeField> {
    let (sys, inside_ball) = measure_system(cloud, mu, r, ball)?;
    let rhs: Vec<f64> = match beta {
        None => vec![1.0; sys.len()],
        Some(b) => sys.inside().iter().map(|&i| b.tau(i, r)).collect(),
    };
    let (x, rep) = sys.solve(&rhs, opts)?;
    let mut values = vec![0.0; cloud.len()];
    for (k, &i) in sys.inside().iter().enumerate() {
        values[i] = x[k];
    }
    Ok(finish(
        *ball,
        r,
        FieldMode::Measure,
        (0..cloud.len()).collect(),
        values,
        inside_ball,
        rep.residual,
        rep.iterations,
        beta.is_some(),
    ))
}

#[allow(clippy::too_many_arguments)]
fn finish(
    ball: BallSpec,
    scale: f64,
    mode: FieldMode,
    states: Vec<usize>,
    values: Vec<f64>,
    inside_ball: Vec<bool>,
    solver_residual: f64,
    iterations: usize,
    renormalized: bool,
) -> ExitTimeField {
    let sup_value = values.iter().fold(0.0_f64, |m, &v| m.max(v));
    ExitTimeField {
        ball,
        scale,
        mode,
        states,
        values,
        inside_ball,
        sup_value,
        solver_residual,
        iterations,
        renormalized,
    }
}

/// Which walk a Monte Carlo estimate simulates.
#[derive(Debug, Clone, Copy)]
pub enum WalkSpec<'a> {
    Graph(&'a WalkGraph),
    Measure { mu: &'a MeasureWeights, r: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    /// Half-width of the normal 95% confidence interval.
    pub ci95: f64,
    pub n_paths: usize,
}

impl McEstimate {
    pub fn covers(&self, value: f64) -> bool {
        (self.mean - value).abs() <= self.ci95
    }

    fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = if samples.len() > 1 {
            samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        McEstimate { mean, ci95: 1.96 * (var / n).sqrt(), n_paths: samples.len() }
    }
}

/// Jump tables of the live states: for each, the neighbour list and the
/// cumulative neighbour weights.
struct JumpTable {
    live: HashMap<usize, usize>,
    rows: Vec<(Vec<usize>, Vec<f64>)>,
}

impl JumpTable {
    fn measure(cloud: &PointCloud, mu: &MeasureWeights, r: f64, live: Vec<usize>) -> Self {
        let nb = Neighborhoods::build(cloud, live.clone(), r, false);
        let rows = (0..live.len())
            .map(|k| {
                let cols: Vec<usize> = nb.neighbors(k).collect();
                let mut acc = 0.0;
                let cum = cols
                    .iter()
                    .map(|&j| {
                        acc += mu.weight(j);
                        acc
                    })
                    .collect();
                (cols, cum)
            })
            .collect();
        JumpTable { live: live.into_iter().enumerate().map(|(k, i)| (i, k)).collect(), rows }
    }

    fn graph(g: &WalkGraph, live: Vec<usize>) -> Self {
        let rows = live
            .iter()
            .map(|&v| {
                let cols = g.adjacency[v].clone();
                let cum = (1..=cols.len()).map(|c| c as f64).collect();
                (cols, cum)
            })
            .collect();
        JumpTable { live: live.into_iter().enumerate().map(|(k, i)| (i, k)).collect(), rows }
    }

    fn row(&self, state: usize) -> Option<&(Vec<usize>, Vec<f64>)> {
        self.live.get(&state).map(|&k| &self.rows[k])
    }
}

#[inline]
fn sample_row<R: Rng>(rng: &mut R, row: &(Vec<usize>, Vec<f64>)) -> usize {
    let (cols, cum) = row;
    let total = *cum.last().expect("rows contain the state itself");
    let u = rng.gen::<f64>() * total;
    let k = cum.partition_point(|&c| c <= u).min(cols.len() - 1);
    cols[k]
}

fn path_rng(seed: u64, path_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_id);
    rng
}

/// Sample mean and 95% interval of the number of steps to leave the ball.
///
/// In graph mode `start` must be a net point. Paths use independent
/// streams keyed by path number, so the result does not depend on the
/// thread count.
pub fn mc_exit_time(
    cloud: &PointCloud,
    walk: WalkSpec<'_>,
    ball: &BallSpec,
    start: usize,
    n_paths: usize,
    seed: u64,
    path_cap: u64,
) -> Result<McEstimate> {
    if n_paths == 0 {
        return Err(Error::invalid("n_paths must be at least 1"));
    }
    cloud.check_index(start)?;
    cloud.check_index(ball.center_index)?;
    let (table, start_state) = match walk {
        WalkSpec::Measure { mu, r } => {
            mu.check_cloud(cloud)?;
            check_scale(r)?;
            (JumpTable::measure(cloud, mu, r, cloud.ball_query(ball)?), start)
        }
        WalkSpec::Graph(g) => {
            let v = g.net.net_indices.iter().position(|&s| s == start).ok_or_else(|| {
                Error::invalid(format!("start {start} is not a vertex of the net"))
            })?;
            let live = (0..g.net.len()).filter(|&k| ball.contains(cloud, g.net.net_indices[k])).collect();
            (JumpTable::graph(g, live), v)
        }
    };
    if table.row(start_state).is_none() {
        return Ok(McEstimate { mean: 0.0, ci95: 0.0, n_paths });
    }
    let samples: Vec<f64> = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(seed, p);
            let mut state = start_state;
            let mut steps = 0u64;
            while let Some(row) = table.row(state) {
                if steps >= path_cap {
                    return Err(Error::PathCap { cap: path_cap });
                }
                state = sample_row(&mut rng, row);
                steps += 1;
            }
            Ok(steps as f64)
        })
        .collect::<Result<_>>()?;
    Ok(McEstimate::from_samples(&samples))
}

/// A trajectory of the time-changed walk: `(jump time, new state)` pairs,
/// starting with `(0, start)`, up to time `t_max`.
pub fn simulate_ct_walk(
    cloud: &PointCloud,
    mu: &MeasureWeights,
    r: f64,
    beta: &BetaField,
    t_max: f64,
    start: usize,
    seed: u64,
) -> Result<Vec<(f64, usize)>> {
    mu.check_cloud(cloud)?;
    beta.check_cloud(cloud)?;
    check_scale(r)?;
    cloud.check_index(start)?;
    if !(t_max > 0.0) {
        return Err(Error::invalid(format!("t_max must be positive, got {t_max}")));
    }
    let mut rng = path_rng(seed, 0);
    let mut rows: HashMap<usize, (Vec<usize>, Vec<f64>)> = HashMap::new();
    let mut path = vec![(0.0, start)];
    let (mut t, mut x) = (0.0, start);
    loop {
        let hold = Exp::new(1.0 / beta.tau(x, r)).map_err(|e| Error::invalid(e.to_string()))?;
        t += hold.sample(&mut rng);
        if t >= t_max {
            return Ok(path);
        }
        let row = rows.entry(x).or_insert_with(|| {
            let cols = cloud.ball_around(cloud.point(x), r, false);
            let mut acc = 0.0;
            let cum = cols.iter().map(|&j| {
                acc += mu.weight(j);
                acc
            });
            let cum = cum.collect();
            (cols, cum)
        });
        x = sample_row(&mut rng, row);
        path.push((t, x));
    }
}

/// Monte Carlo estimate of the renormalised exit time: the total holding
/// time spent in the ball before the first jump out of it.
#[allow(clippy::too_many_arguments)]
pub fn mc_ct_exit_time(
    cloud: &PointCloud,
    mu: &MeasureWeights,
    r: f64,
    ball: &BallSpec,
    beta: &BetaField,
    start: usize,
    n_paths: usize,
    seed: u64,
) -> Result<McEstimate> {
    if n_paths == 0 {
        return Err(Error::invalid("n_paths must be at least 1"));
    }
    mu.check_cloud(cloud)?;
    beta.check_cloud(cloud)?;
    check_scale(r)?;
    cloud.check_index(start)?;
    if !inside(cloud.distance(ball.center_index, start)?, ball.radius, ball.closed) {
        return Ok(McEstimate { mean: 0.0, ci95: 0.0, n_paths });
    }
    let table = JumpTable::measure(cloud, mu, r, cloud.ball_query(ball)?);
    let samples: Vec<f64> = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(seed, p);
            let mut state = start;
            let mut t = 0.0;
            let mut steps = 0u64;
            while let Some(row) = table.row(state) {
                if steps >= DEFAULT_PATH_CAP {
                    return Err(Error::PathCap { cap: DEFAULT_PATH_CAP });
                }
                let hold = Exp::new(1.0 / beta.tau(state, r)).expect("positive rate");
                t += hold.sample(&mut rng);
                state = sample_row(&mut rng, row);
                steps += 1;
            }
            Ok(t)
        })
        .collect::<Result<_>>()?;
    Ok(McEstimate::from_samples(&samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fractal::{euclidean_cloud, EuclideanKind};
    use crate::nets::{build_epsilon_net, build_walk_graph};

    fn path_setup() -> (PointCloud, WalkGraph) {
        // Net points 0..4 at unit spacing; proximity with rho = 2 and
        // epsilon = 0.75 links exactly the consecutive ones.
        let cloud = PointCloud::from_flat((0..5).map(f64::from).collect(), 1, vec![0.0; 5], "p").unwrap();
        let net = build_epsilon_net(&cloud, 0.75, 0).unwrap();
        let g = build_walk_graph(&cloud, &net, GraphKind::Proximity { rho: 2.0 }).unwrap();
        (cloud, g)
    }

    /// Direct recurrence solve for the path: `(2/3) E(k) = 1 + (E(k-1) + E(k+1)) / 3`
    /// with zero boundary values, by Gaussian elimination on the tridiagonal system.
    fn path_oracle(n: usize) -> Vec<f64> {
        let m = n - 1;
        let (mut c, mut d) = (vec![0.0; m], vec![0.0; m]);
        for i in 0..m {
            let (a, b, cc, rhs) = (-1.0 / 3.0, 2.0 / 3.0, -1.0 / 3.0, 1.0);
            let denom = if i == 0 { b } else { b - a * c[i - 1] };
            c[i] = cc / denom;
            d[i] = if i == 0 { rhs / denom } else { (rhs - a * d[i - 1]) / denom };
        }
        let mut x = vec![0.0; m];
        for i in (0..m).rev() {
            x[i] = d[i] - if i + 1 < m { c[i] * x[i + 1] } else { 0.0 };
        }
        let mut out = vec![0.0];
        out.extend(x);
        out.push(0.0);
        out
    }

    #[test]
    fn graph_exit_times_on_path() {
        let (cloud, g) = path_setup();
        let ball = BallSpec::closed(2, 1.0).unwrap();
        let f = exit_time_graph(&g, &cloud, &ball, &SolveOptions::default()).unwrap();
        let oracle = path_oracle(4);
        for k in 0..5 {
            assert!((f.values[k] - oracle[k]).abs() < 1e-10);
            assert!((f.values[k] - 1.5 * (k * (4 - k)) as f64).abs() < 1e-10);
        }
        assert_eq!(f.sup_value, f.values[2]);
        assert!(f.solver_residual <= 1e-10);
        assert_eq!(f.value_at(0), Some(0.0));
    }

    #[test]
    fn no_exit_when_ball_is_everything() {
        let (cloud, g) = path_setup();
        let ball = BallSpec::closed(2, 10.0).unwrap();
        assert!(matches!(
            exit_time_graph(&g, &cloud, &ball, &SolveOptions::default()),
            Err(Error::NoExit)
        ));
    }

    #[test]
    fn measure_walk_single_state() {
        // Three equal atoms, jump radius covering neighbours, ball = middle.
        let cloud = PointCloud::from_flat(vec![0.0, 1.0, 2.0], 1, vec![0.0; 3], "t").unwrap();
        let mu = MeasureWeights::uniform(3).unwrap();
        let ball = BallSpec::closed(1, 0.5).unwrap();
        let f = exit_time_measure(&cloud, &mu, 1.5, &ball, &SolveOptions::default()).unwrap();
        assert!((f.values[1] - 1.5).abs() < 1e-14);
        assert_eq!(f.values[0], 0.0);
    }

    #[test]
    fn renormalized_reduces_and_scales() {
        let cloud = euclidean_cloud(EuclideanKind::Interval, 401, 2.0).unwrap();
        let mu = MeasureWeights::uniform(cloud.len()).unwrap();
        let ball = BallSpec::closed(200, 1.0).unwrap();
        let opts = SolveOptions::default();
        let e = exit_time_measure(&cloud, &mu, 0.1, &ball, &opts).unwrap();
        let zero = BetaField::constant(cloud.len(), 0.0).unwrap();
        let phi0 = exit_time_renormalized(&cloud, &mu, 0.1, &ball, &zero, &opts).unwrap();
        let two = BetaField::constant(cloud.len(), 2.0).unwrap();
        let phi2 = exit_time_renormalized(&cloud, &mu, 0.1, &ball, &two, &opts).unwrap();
        assert!(!zero.is_admissible() && two.is_admissible());
        for i in 0..cloud.len() {
            assert!((phi0.values[i] - e.values[i]).abs() <= 1e-9 * e.sup_value);
            assert!((phi2.values[i] - 0.01 * e.values[i]).abs() <= 1e-9 * phi2.sup_value);
        }
        assert!(phi2.renormalized && !e.renormalized);
    }

    #[test]
    fn domain_monotonicity_and_distance_bound() {
        let cloud = euclidean_cloud(EuclideanKind::Interval, 201, 2.0).unwrap();
        let mu = MeasureWeights::new((0..201).map(|i| 1.0 + (i % 7) as f64).collect()).unwrap();
        let opts = SolveOptions::default();
        let big = exit_time_measure(&cloud, &mu, 0.1, &BallSpec::closed(100, 1.0).unwrap(), &opts).unwrap();
        let small = exit_time_measure(&cloud, &mu, 0.1, &BallSpec::closed(100, 0.6).unwrap(), &opts).unwrap();
        for i in 0..cloud.len() {
            assert!(small.values[i] <= big.values[i] + 1e-9);
            if big.inside_ball[i] {
                assert!(big.values[i] >= 1.0);
                let gap = 1.0 - cloud.distance(100, i).unwrap();
                assert!(big.values[i] >= gap / 0.1 - 1e-9);
            }
        }
    }

    #[test]
    fn monte_carlo_matches_path_solve() {
        let (cloud, g) = path_setup();
        let ball = BallSpec::closed(2, 1.0).unwrap();
        let est = mc_exit_time(&cloud, WalkSpec::Graph(&g), &ball, 2, 20_000, 7, DEFAULT_PATH_CAP).unwrap();
        assert!(est.covers(6.0), "{est:?}");
        let again = mc_exit_time(&cloud, WalkSpec::Graph(&g), &ball, 2, 20_000, 7, DEFAULT_PATH_CAP).unwrap();
        assert_eq!(est, again);
        let outside = mc_exit_time(&cloud, WalkSpec::Graph(&g), &ball, 0, 10, 7, DEFAULT_PATH_CAP).unwrap();
        assert_eq!((outside.mean, outside.ci95), (0.0, 0.0));
        let capped = mc_exit_time(&cloud, WalkSpec::Graph(&g), &ball, 2, 10, 7, 1);
        assert!(matches!(capped, Err(Error::PathCap { cap: 1 })));
    }

    #[test]
    fn measure_monte_carlo_matches_solve() {
        let cloud = euclidean_cloud(EuclideanKind::Interval, 81, 2.0).unwrap();
        let mu = MeasureWeights::uniform(cloud.len()).unwrap();
        let ball = BallSpec::closed(40, 1.0).unwrap();
        let f = exit_time_measure(&cloud, &mu, 0.3, &ball, &SolveOptions::default()).unwrap();
        let est =
            mc_exit_time(&cloud, WalkSpec::Measure { mu: &mu, r: 0.3 }, &ball, 40, 20_000, 3, DEFAULT_PATH_CAP)
                .unwrap();
        assert!(est.covers(f.values[40]), "{est:?} vs {}", f.values[40]);
    }

    #[test]
    fn ct_walk_holding_times_and_exit() {
        let cloud = euclidean_cloud(EuclideanKind::Interval, 41, 1.0).unwrap();
        let mu = MeasureWeights::uniform(cloud.len()).unwrap();
        let beta = BetaField::constant(cloud.len(), 2.0).unwrap();
        let r = 0.3;
        let path = simulate_ct_walk(&cloud, &mu, r, &beta, 200.0, 20, 11).unwrap();
        assert_eq!(path[0], (0.0, 20));
        let holds: Vec<f64> = path.windows(2).map(|w| w[1].0 - w[0].0).collect();
        let n = holds.len() as f64;
        let mean = holds.iter().sum::<f64>() / n;
        // Exponential: standard deviation equals the mean.
        assert!((mean - r * r).abs() <= 3.0 * r * r / n.sqrt(), "{mean} over {n}");
        assert!(path.windows(2).all(|w| cloud.distance(w[0].1, w[1].1).unwrap() < r));

        let ball = BallSpec::closed(20, 0.5).unwrap();
        let phi = exit_time_renormalized(&cloud, &mu, r, &ball, &beta, &SolveOptions::default()).unwrap();
        let est = mc_ct_exit_time(&cloud, &mu, r, &ball, &beta, 20, 20_000, 5).unwrap();
        assert!(est.covers(phi.values[20]), "{est:?} vs {}", phi.values[20]);
    }

    #[test]
    fn ct_walk_without_time_change_has_unit_holds() {
        let cloud = euclidean_cloud(EuclideanKind::Interval, 5, 1.0).unwrap();
        let mu = MeasureWeights::uniform(5).unwrap();
        let beta = BetaField::constant(5, 0.0).unwrap();
        let path = simulate_ct_walk(&cloud, &mu, 10.0, &beta, 5000.0, 0, 1).unwrap();
        let n = (path.len() - 1) as f64;
        let mean = path.last().unwrap().0 / n;
        assert!((mean - 1.0).abs() < 0.1);
        let mut visits = [0usize; 5];
        path.iter().for_each(|&(_, s)| visits[s] += 1);
        assert!(visits.iter().all(|&v| (v as f64) > 0.15 * n));
    }
}
