//! Regression estimators for the local dimension and the walk exponent, and
//! the variable Ahlfors regularity check.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::SolveOptions;
use crate::error::{Error, Result};
use crate::geometry::{fmt_f64, BallSpec, MeasureWeights, PointCloud};
use crate::io;
use crate::nets::{build_epsilon_net, build_walk_graph, GraphKind};
use crate::walks::{exit_time_graph, exit_time_measure, exit_time_renormalized, BetaField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Envelope {
    Upper,
    Lower,
    Plain,
}

/// Least-squares power law fitted over a geometric scale grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub exponent: f64,
    pub intercept: f64,
    /// Strictly decreasing.
    pub scales: Vec<f64>,
    pub sup_values: Vec<f64>,
    pub envelope: Envelope,
    pub r_squared: f64,
    pub residuals: Vec<f64>,
    pub window: (f64, f64),
}

/// How the regressor depends on the scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Abscissa {
    /// `log value ~ exponent * log scale`
    LogScale,
    /// `log value ~ exponent * log(1 / scale)`
    LogInverseScale,
}

impl ScalingFit {
    pub fn regress(
        scales: Vec<f64>,
        values: Vec<f64>,
        envelope: Envelope,
        abscissa: Abscissa,
    ) -> Result<Self> {
        if scales.len() < 2 || scales.len() != values.len() {
            return Err(Error::WindowTooNarrow(format!(
                "need at least two matched scales, got {} scales and {} values",
                scales.len(),
                values.len()
            )));
        }
        if scales.windows(2).any(|w| !(w[1] < w[0])) || !(scales[scales.len() - 1] > 0.0) {
            return Err(Error::invalid("scales must be positive and strictly decreasing"));
        }
        if let Some(v) = values.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::invalid(format!("regression values must be positive, got {v}")));
        }
        let xs: Vec<f64> = scales
            .iter()
            .map(|s| match abscissa {
                Abscissa::LogScale => s.ln(),
                Abscissa::LogInverseScale => -s.ln(),
            })
            .collect();
        let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
        let exponent = sxy / sxx;
        let intercept = my - exponent * mx;
        let residuals: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| y - intercept - exponent * x).collect();
        let ss_res: f64 = residuals.iter().map(|r| r * r).sum();
        let r_squared = if syy > 0.0 { (1.0 - ss_res / syy).clamp(0.0, 1.0) } else { 1.0 };
        let window = (scales[scales.len() - 1], scales[0]);
        Ok(ScalingFit { exponent, intercept, scales, sup_values: values, envelope, r_squared, residuals, window })
    }
}

/// `count` scales `start * ratio^k`, decreasing for `ratio < 1`.
pub fn geometric_grid(start: f64, ratio: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| start * ratio.powi(k as i32)).collect()
}

/// Default grid ratio `2^(-1/2)`.
pub const GRID_RATIO: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Geometric grid from `hi` down to no less than `lo`.
pub fn grid_between(hi: f64, lo: f64, ratio: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut s = hi;
    while s >= lo * (1.0 - 1e-12) {
        out.push(s);
        s *= ratio;
    }
    out
}

/// Local dimension at `x`: slope of `log mu(B_r(x))` against `log r`.
pub fn estimate_alpha_local(
    cloud: &PointCloud,
    mu: &MeasureWeights,
    x: usize,
    r_grid: &[f64],
) -> Result<ScalingFit> {
    mu.check_cloud(cloud)?;
    cloud.check_index(x)?;
    check_alpha_window(cloud, r_grid)?;
    let masses = r_grid
        .iter()
        .map(|&r| {
            let m = mu.mass(&cloud.ball_around(cloud.point(x), r, false));
            if m > 0.0 {
                Ok(m)
            } else {
                Err(Error::EmptyBall(x))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    ScalingFit::regress(r_grid.to_vec(), masses, Envelope::Plain, Abscissa::LogScale)
}

fn check_alpha_window(cloud: &PointCloud, r_grid: &[f64]) -> Result<()> {
    if r_grid.len() < 4 {
        return Err(Error::WindowTooNarrow(format!("{} scales, need at least 4", r_grid.len())));
    }
    let lo = 3.0 * cloud.resolution();
    let hi = cloud.diameter() / 2.0;
    if let Some(r) = r_grid.iter().find(|&&r| !(r > lo && r < hi)) {
        return Err(Error::WindowTooNarrow(format!(
            "scale {r} outside the resolved window ({lo}, {hi})"
        )));
    }
    Ok(())
}

/// Walk used by the exponent estimators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum BetaMode {
    /// Fresh nets at every scale, one per seed (cloud indices).
    Graph { kind: GraphKind, seeds: Vec<usize> },
    /// Measure walk; scales are jump radii.
    Measure { weights: MeasureWeights },
}

/// Walk exponent of a ball: slope of `log E+` against `log(1/scale)`.
///
/// In graph mode each scale is solved for every seed and the per-scale
/// maximum (upper) or minimum (lower) is regressed.
pub fn estimate_beta_ball(
    cloud: &PointCloud,
    ball: &BallSpec,
    mode: &BetaMode,
    scale_grid: &[f64],
    envelope: Envelope,
    opts: &SolveOptions,
) -> Result<ScalingFit> {
    cloud.check_index(ball.center_index)?;
    if let Some(s) = scale_grid.iter().find(|&&s| !(s > 0.0 && s <= ball.radius / 4.0)) {
        return Err(Error::WindowTooNarrow(format!(
            "scale {s} exceeds a quarter of the ball radius {}",
            ball.radius
        )));
    }
    if scale_grid.len() < 2 {
        return Err(Error::WindowTooNarrow("need at least two scales".into()));
    }
    let sups = match mode {
        BetaMode::Measure { weights } => scale_grid
            .par_iter()
            .map(|&r| exit_time_measure(cloud, weights, r, ball, opts).map(|f| f.sup_value))
            .collect::<Result<Vec<f64>>>()?,
        BetaMode::Graph { kind, seeds } => {
            if seeds.is_empty() {
                return Err(Error::invalid("graph mode needs at least one net seed"));
            }
            for &s in seeds {
                cloud.check_index(s)?;
            }
            let reach = match *kind {
                GraphKind::Covering { eta } => 2.0 * eta,
                GraphKind::Proximity { rho } => rho,
            };
            scale_grid
                .iter()
                .map(|&eps| {
                    let per_seed = seeds
                        .par_iter()
                        .map(|&seed| graph_sup(cloud, ball, *kind, eps, seed, reach, opts))
                        .collect::<Result<Vec<f64>>>()?;
                    Ok(match envelope {
                        Envelope::Lower => per_seed.iter().copied().fold(f64::INFINITY, f64::min),
                        _ => per_seed.iter().copied().fold(0.0, f64::max),
                    })
                })
                .collect::<Result<Vec<f64>>>()?
        }
    };
    ScalingFit::regress(scale_grid.to_vec(), sups, envelope, Abscissa::LogInverseScale)
}

/// Sup of the graph exit time at one scale. Only the part of the cloud
/// that can influence the walk before it leaves the ball is kept; the net
/// scan still follows the global index order starting from `seed`.
fn graph_sup(
    cloud: &PointCloud,
    ball: &BallSpec,
    kind: GraphKind,
    eps: f64,
    seed: usize,
    reach: f64,
    opts: &SolveOptions,
) -> Result<f64> {
    let keep = cloud.ball_around(cloud.point(ball.center_index), ball.radius + 3.0 * reach * eps, true);
    let mut coords = Vec::with_capacity(keep.len() * cloud.dim());
    let mut params = Vec::with_capacity(keep.len());
    for &i in &keep {
        coords.extend_from_slice(cloud.point(i));
        params.push(cloud.params()[i]);
    }
    let local = PointCloud::from_flat(coords, cloud.dim(), params, cloud.label())?;
    let local_seed = keep.partition_point(|&i| i < seed) % keep.len();
    let local_center = keep.binary_search(&ball.center_index).expect("center lies in its own ball");
    let net = build_epsilon_net(&local, eps, local_seed)?;
    let g = build_walk_graph(&local, &net, kind)?;
    let local_ball = BallSpec { center_index: local_center, ..*ball };
    Ok(exit_time_graph(&g, &local, &local_ball, opts)?.sup_value)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalBeta {
    pub beta_x: f64,
    pub radii: Vec<f64>,
    pub per_radius: Vec<ScalingFit>,
    /// Pairs `(larger R index, smaller R index)` where the smaller ball's
    /// exponent exceeds the larger one's by more than the tolerance.
    pub monotonicity_flags: Vec<(usize, usize)>,
}

pub const MONOTONICITY_TOLERANCE: f64 = 0.1;

/// `beta(B_R(x))` along decreasing radii; the pointwise value is taken at
/// the smallest radius.
pub fn estimate_beta_local<F>(
    cloud: &PointCloud,
    x: usize,
    radii: &[f64],
    mode: &BetaMode,
    scale_grid_for: F,
    envelope: Envelope,
    opts: &SolveOptions,
) -> Result<LocalBeta>
where
    F: Fn(f64) -> Vec<f64>,
{
    if radii.is_empty() || radii.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::invalid("radii must be nonempty and strictly decreasing"));
    }
    let per_radius = radii
        .iter()
        .map(|&r| {
            let ball = BallSpec::closed(x, r)?;
            estimate_beta_ball(cloud, &ball, mode, &scale_grid_for(r), envelope, opts)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut flags = Vec::new();
    for a in 0..per_radius.len() {
        for b in a + 1..per_radius.len() {
            if per_radius[b].exponent > per_radius[a].exponent + MONOTONICITY_TOLERANCE {
                flags.push((a, b));
            }
        }
    }
    Ok(LocalBeta {
        beta_x: per_radius.last().expect("nonempty").exponent,
        radii: radii.to_vec(),
        per_radius,
        monotonicity_flags: flags,
    })
}

/// Renormalised sup exit times `phi+_{r,B}` along decreasing jump radii.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeConstant {
    pub radii: Vec<f64>,
    pub phi_plus: Vec<f64>,
    /// Largest `phi+` over the finer half of the radii, the finite-grid
    /// stand-in for `limsup_{r -> 0}`.
    pub limsup: f64,
}

/// The time constant `T(B) = limsup_{r -> 0} phi+_{r,B}` of a ball.
pub fn time_constant(
    cloud: &PointCloud,
    mu: &MeasureWeights,
    ball: &BallSpec,
    beta: &BetaField,
    radii: &[f64],
    opts: &SolveOptions,
) -> Result<TimeConstant> {
    if radii.len() < 2 || radii.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::invalid("need at least two strictly decreasing radii"));
    }
    let phi_plus = radii
        .iter()
        .map(|&r| exit_time_renormalized(cloud, mu, r, ball, beta, opts).map(|f| f.sup_value))
        .collect::<Result<Vec<_>>>()?;
    let limsup = phi_plus[radii.len() / 2..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(TimeConstant { radii: radii.to_vec(), phi_plus, limsup })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AhlforsReport {
    pub sample_points: Vec<usize>,
    #[serde(rename = "Q")]
    pub q: Vec<f64>,
    #[serde(rename = "C")]
    pub c: f64,
    pub pass: bool,
    pub threshold: f64,
    pub r_window: (f64, f64),
    pub worst_point: usize,
    pub log_holder_c: f64,
}

impl AhlforsReport {
    /// Smallest and largest fitted exponent.
    pub fn q_range(&self) -> (f64, f64) {
        let lo = self.q.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AhlforsOptions {
    pub threshold: f64,
    pub ratio: f64,
}

impl Default for AhlforsOptions {
    fn default() -> Self {
        AhlforsOptions { threshold: 50.0, ratio: GRID_RATIO }
    }
}

/// Fits `Q(x)` at each sample point and measures the uniform constant
/// `C = max max(r^Q / mu(B_r), mu(B_r) / r^Q)` over the window.
pub fn fit_ahlfors(
    cloud: &PointCloud,
    mu: &MeasureWeights,
    r_window: (f64, f64),
    sample_points: &[usize],
    opts: &AhlforsOptions,
) -> Result<AhlforsReport> {
    if sample_points.is_empty() {
        return Err(Error::invalid("fit_ahlfors needs at least one sample point"));
    }
    let (lo, hi) = r_window;
    let grid = grid_between(hi, lo, opts.ratio);
    check_alpha_window(cloud, &grid)?;
    let per_point = sample_points
        .par_iter()
        .map(|&x| {
            let fit = estimate_alpha_local(cloud, mu, x, &grid)?;
            let q = fit.exponent;
            let worst = fit
                .scales
                .iter()
                .zip(&fit.sup_values)
                .map(|(r, m)| {
                    let ratio = r.powf(q) / m;
                    ratio.max(1.0 / ratio)
                })
                .fold(1.0_f64, f64::max);
            Ok((q, worst))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let q: Vec<f64> = per_point.iter().map(|p| p.0).collect();
    let (mut c, mut worst_point) = (1.0_f64, sample_points[0]);
    for (k, &(_, w)) in per_point.iter().enumerate() {
        if w > c {
            c = w;
            worst_point = sample_points[k];
        }
    }
    let mut log_holder_c = 0.0_f64;
    for a in 0..sample_points.len() {
        for b in a + 1..sample_points.len() {
            let d = cloud.dist(sample_points[a], sample_points[b]);
            if d > 0.0 && d < 0.5 {
                log_holder_c = log_holder_c.max((q[a] - q[b]).abs() * -d.ln());
            }
        }
    }
    Ok(AhlforsReport {
        sample_points: sample_points.to_vec(),
        q,
        c,
        pass: c <= opts.threshold,
        threshold: opts.threshold,
        r_window,
        worst_point,
        log_holder_c,
    })
}

/// Finite-resolution local Hausdorff measure.
///
/// The cloud is partitioned into the cells of a greedy `delta`-net; each
/// cell `U` carries `|U|^alpha(center)` (with `0^0 = 1`), shared equally
/// among its points.
pub fn local_hausdorff_weights(cloud: &PointCloud, alpha: &[f64], delta: f64) -> Result<MeasureWeights> {
    if alpha.len() != cloud.len() {
        return Err(Error::invalid(format!(
            "alpha field has {} entries for {} points",
            alpha.len(),
            cloud.len()
        )));
    }
    let min = 3.0 * cloud.resolution();
    if !(delta >= min) {
        return Err(Error::DeltaTooSmall { delta, min });
    }
    let net = build_epsilon_net(cloud, delta, 0)?;
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); net.len()];
    for i in 0..cloud.len() {
        members[net.cover_of[i]].push(i);
    }
    let shares: Vec<f64> = members
        .par_iter()
        .enumerate()
        .map(|(k, m)| {
            let mut coords = Vec::with_capacity(m.len() * cloud.dim());
            for &i in m {
                coords.extend_from_slice(cloud.point(i));
            }
            let cell = PointCloud::from_flat(coords, cloud.dim(), vec![0.0; m.len()], "cell")
                .expect("cells are nonempty");
            let a = alpha[net.net_indices[k]];
            let gauge = if a == 0.0 { 1.0 } else { cell.diameter().powf(a) };
            gauge / m.len() as f64
        })
        .collect();
    let weights = (0..cloud.len()).map(|i| shares[net.cover_of[i]]).collect();
    MeasureWeights::new(weights)
}

/// Writes per-point exponents as `index,value,radius`.
pub fn save_point_field(path: &Path, indices: &[usize], values: &[f64], radii: &[f64]) -> Result<()> {
    let rows: Vec<Vec<String>> = indices
        .iter()
        .zip(values)
        .zip(radii)
        .map(|((i, v), r)| vec![i.to_string(), fmt_f64(*v), fmt_f64(*r)])
        .collect();
    io::write_rows(path, &["index", "value", "radius"], &rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fractal::{euclidean_cloud, EuclideanKind};
    use proptest::prelude::*;

    #[test]
    fn synthetic_power_law_is_exact() {
        let scales = geometric_grid(0.1, GRID_RATIO, 8);
        let values: Vec<f64> = scales.iter().map(|e| 7.0 * e.powf(-1.5)).collect();
        let fit = ScalingFit::regress(scales, values, Envelope::Upper, Abscissa::LogInverseScale).unwrap();
        assert!((fit.exponent - 1.5).abs() < 1e-9);
        assert!((fit.intercept - 7f64.ln()).abs() < 1e-9);
        assert!(fit.r_squared > 1.0 - 1e-12);
    }

    #[test]
    fn regression_rejects_bad_grids() {
        assert!(ScalingFit::regress(vec![1.0], vec![1.0], Envelope::Plain, Abscissa::LogScale).is_err());
        assert!(ScalingFit::regress(vec![1.0, 2.0], vec![1.0, 1.0], Envelope::Plain, Abscissa::LogScale).is_err());
        assert!(ScalingFit::regress(vec![2.0, 1.0], vec![1.0, 0.0], Envelope::Plain, Abscissa::LogScale).is_err());
    }

    #[test]
    fn alpha_on_uniform_interval() {
        let cloud = euclidean_cloud(EuclideanKind::Interval, 2001, 1.0).unwrap();
        let mu = MeasureWeights::uniform(cloud.len()).unwrap();
        let fit = estimate_alpha_local(&cloud, &mu, 1000, &geometric_grid(0.2, GRID_RATIO, 8)).unwrap();
        assert!((fit.exponent - 1.0).abs() < 0.05, "{}", fit.exponent);
        let narrow = estimate_alpha_local(&cloud, &mu, 1000, &geometric_grid(0.2, GRID_RATIO, 3));
        assert!(matches!(narrow, Err(Error::WindowTooNarrow(_))));
        let fine = estimate_alpha_local(&cloud, &mu, 1000, &geometric_grid(0.004, 0.5, 4));
        assert!(matches!(fine, Err(Error::WindowTooNarrow(_))));
    }

    #[test]
    fn beta_on_interval_measure_mode() {
        let cloud = euclidean_cloud(EuclideanKind::Interval, 801, 1.0).unwrap();
        let mu = MeasureWeights::uniform(cloud.len()).unwrap();
        let ball = BallSpec::closed(400, 0.5).unwrap();
        let mode = BetaMode::Measure { weights: mu };
        let grid = geometric_grid(0.12, GRID_RATIO, 6);
        let fit = estimate_beta_ball(&cloud, &ball, &mode, &grid, Envelope::Upper, &SolveOptions::default())
            .unwrap();
        assert!((fit.exponent - 2.0).abs() < 0.15, "{}", fit.exponent);
        let too_big = estimate_beta_ball(&cloud, &ball, &mode, &[0.2, 0.1], Envelope::Upper, &SolveOptions::default());
        assert!(matches!(too_big, Err(Error::WindowTooNarrow(_))));
    }

    #[test]
    fn time_constant_on_interval() {
        let cloud = euclidean_cloud(EuclideanKind::Interval, 3001, 1.5).unwrap();
        let mu = MeasureWeights::uniform(cloud.len()).unwrap();
        let ball = BallSpec::closed(1500, 1.0).unwrap();
        let beta = BetaField::constant(cloud.len(), 2.0).unwrap();
        let tc = time_constant(&cloud, &mu, &ball, &beta, &[0.08, 0.05, 0.03], &SolveOptions::default()).unwrap();
        // phi(0) = 3 (R^2 - 0) for uniform jumps on the line.
        assert!((tc.limsup - 3.0).abs() < 0.15, "{tc:?}");
        assert!(time_constant(&cloud, &mu, &ball, &beta, &[0.05, 0.08], &SolveOptions::default()).is_err());
    }

    #[test]
    fn graph_mode_envelopes_are_ordered() {
        let cloud = euclidean_cloud(EuclideanKind::Interval, 1201, 1.0).unwrap();
        let ball = BallSpec::closed(600, 0.6).unwrap();
        let mode = BetaMode::Graph { kind: GraphKind::Covering { eta: 1.0 }, seeds: vec![0, 7, 300, 911] };
        let grid = geometric_grid(0.15, GRID_RATIO, 6);
        let opts = SolveOptions::default();
        let up = estimate_beta_ball(&cloud, &ball, &mode, &grid, Envelope::Upper, &opts).unwrap();
        let low = estimate_beta_ball(&cloud, &ball, &mode, &grid, Envelope::Lower, &opts).unwrap();
        for (u, l) in up.sup_values.iter().zip(&low.sup_values) {
            assert!(l <= u);
        }
        assert!(low.exponent <= up.exponent + 0.05);
        assert!((up.exponent - 2.0).abs() < 0.3, "{}", up.exponent);
    }

    #[test]
    fn local_beta_tracks_radii() {
        let cloud = euclidean_cloud(EuclideanKind::Interval, 801, 1.0).unwrap();
        let mode = BetaMode::Measure { weights: MeasureWeights::uniform(cloud.len()).unwrap() };
        let lb = estimate_beta_local(
            &cloud,
            400,
            &[0.8, 0.4],
            &mode,
            |r| geometric_grid(r / 4.0, GRID_RATIO, 6),
            Envelope::Upper,
            &SolveOptions::default(),
        )
        .unwrap();
        assert_eq!(lb.per_radius.len(), 2);
        assert!((lb.beta_x - 2.0).abs() < 0.15);
        assert!(lb.monotonicity_flags.is_empty());
    }

    #[test]
    fn ahlfors_separates_uniform_from_exponential() {
        let cloud = euclidean_cloud(EuclideanKind::Interval, 4001, 1.0).unwrap();
        let uniform = MeasureWeights::uniform(cloud.len()).unwrap();
        let samples: Vec<usize> = (0..=20).map(|k| 200 + k * 180).collect();
        let opts = AhlforsOptions::default();
        let rep = fit_ahlfors(&cloud, &uniform, (0.002, 0.1), &samples, &opts).unwrap();
        assert!(rep.pass && rep.c <= 5.0, "{rep:?}");
        assert!(rep.q.iter().all(|q| (q - 1.0).abs() < 0.05));
        let expo = MeasureWeights::new((0..cloud.len()).map(|i| (20.0 * cloud.point(i)[0]).exp()).collect())
            .unwrap()
            .normalized();
        let rep = fit_ahlfors(&cloud, &expo, (0.002, 0.1), &samples, &opts).unwrap();
        assert!(!rep.pass, "{rep:?}");
    }

    #[test]
    fn hausdorff_weights_examples() {
        let cloud = euclidean_cloud(EuclideanKind::Interval, 1001, 0.5).unwrap();
        let ones = vec![1.0; cloud.len()];
        let w = local_hausdorff_weights(&cloud, &ones, 0.1).unwrap();
        assert!((w.total() - 1.0).abs() <= 0.3, "{}", w.total());
        let zeros = vec![0.0; cloud.len()];
        let w0 = local_hausdorff_weights(&cloud, &zeros, 0.1).unwrap();
        let cells = build_epsilon_net(&cloud, 0.1, 0).unwrap().len();
        assert!((w0.total() - cells as f64).abs() < 1e-9);
        assert!(matches!(
            local_hausdorff_weights(&cloud, &ones, 0.002),
            Err(Error::DeltaTooSmall { .. })
        ));
    }

    proptest! {
        #[test]
        fn power_law_recovered(c in 0.1..100.0f64, e in -3.0..3.0f64, start in 0.01..1.0f64, n in 2usize..12) {
            let scales = geometric_grid(start, GRID_RATIO, n);
            let values: Vec<f64> = scales.iter().map(|s| c * s.powf(e)).collect();
            let fit = ScalingFit::regress(scales, values, Envelope::Plain, Abscissa::LogScale).unwrap();
            prop_assert!((fit.exponent - e).abs() < 1e-9);
        }
    }
}
