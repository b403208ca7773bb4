//! Killed walk operators on a ball: spectral radius, Green kernels, the
//! bottom of the Dirichlet spectrum and Faber-Krahn sweeps.
//!
//! Everything is computed through the symmetric form `A = diag(m)(I - P_B)`
//! with `m = mu_r` restricted to the ball; the renormalised generator
//! corresponds to the pencil `(A, diag(m * tau))` with `tau = r^beta`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::chain::{ball_graph_components, ball_masses, KilledSystem, SolveOptions};
use crate::error::{Error, Result};
use crate::exponents::{AhlforsReport, Abscissa, Envelope, ScalingFit};
use crate::geometry::{BallSpec, MeasureWeights, PointCloud};
use crate::linalg::{self, dot};
use crate::walks::{measure_system, BetaField};

/// States at or below this count use dense factorizations.
pub const DENSE_LIMIT: usize = 2000;

/// Relative residual at which inverse iteration stops.
pub const EIGEN_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct KilledOperator {
    pub ball: BallSpec,
    pub r: f64,
    system: KilledSystem,
    /// `v(r, x) w(x)` on the inside states.
    pub mu_r: Vec<f64>,
    /// `r^beta(x) v(r, x) w(x) / Z_r` on the inside states.
    pub nu_r: Vec<f64>,
    /// `r^beta(x)` on the inside states.
    pub tau: Vec<f64>,
    pub z_r: f64,
    /// Whether the open `r`-ball graph over the whole cloud is connected.
    pub connected: bool,
}

pub fn build_killed_operator(
    cloud: &PointCloud,
    mu: &MeasureWeights,
    r: f64,
    ball: &BallSpec,
    beta: &BetaField,
) -> Result<KilledOperator> {
    beta.check_cloud(cloud)?;
    let (system, _) = match measure_system(cloud, mu, r, ball) {
        Err(Error::NoExit) => return Err(Error::EmptyComplement),
        other => other?,
    };
    let components = ball_graph_components(cloud, r);
    if components > 1 {
        log::warn!("the {r}-ball graph has {components} components; strict bounds are per component");
    }
    let v = ball_masses(cloud, mu, r);
    let z_r: f64 = (0..cloud.len()).map(|i| beta.tau(i, r) * v[i] * mu.weight(i)).sum();
    let mu_r = system.mass();
    let tau: Vec<f64> = system.inside().iter().map(|&i| beta.tau(i, r)).collect();
    let nu_r = mu_r.iter().zip(&tau).map(|(m, t)| m * t / z_r).collect();
    Ok(KilledOperator {
        ball: *ball,
        r,
        system,
        mu_r,
        nu_r,
        tau,
        z_r,
        connected: components == 1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Which {
    /// `L = I - P_B`, bottom eigenvalue `sigma`.
    L,
    /// `(I - P_B) / r^beta`, bottom eigenvalue `lambda`.
    ScriptL,
}

impl KilledOperator {
    pub fn len(&self) -> usize {
        self.system.len()
    }

    pub fn is_empty(&self) -> bool {
        self.system.is_empty()
    }

    /// Cloud indices of the inside states.
    pub fn inside(&self) -> &[usize] {
        self.system.inside()
    }

    pub fn system(&self) -> &KilledSystem {
        &self.system
    }

    pub fn dense_p(&self) -> DMatrix<f64> {
        self.system.dense_p()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.system.row_sums()
    }

    /// Largest relative entry of `diag(mu_r) P_B - (diag(mu_r) P_B)^T`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0_f64;
        let mut scale = 0.0_f64;
        for k in 0..self.len() {
            for l in self.system.neighbors(k) {
                let a = self.mu_r[k] * self.system.transition(k, l);
                let b = self.mu_r[l] * self.system.transition(l, k);
                worst = worst.max((a - b).abs());
                scale = scale.max(a.abs());
            }
        }
        if scale > 0.0 {
            worst / scale
        } else {
            0.0
        }
    }

    /// `L f = f - P_B f`.
    pub fn apply_l(&self, f: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; f.len()];
        self.system.apply_p(f, &mut y);
        f.iter().zip(&y).map(|(a, b)| a - b).collect()
    }

    /// `(f - P_B f) / r^beta`.
    pub fn apply_script_l(&self, f: &[f64]) -> Vec<f64> {
        self.apply_l(f).iter().zip(&self.tau).map(|(a, t)| a / t).collect()
    }

    /// Exit times in steps (`renormalized = false`) or in time units.
    pub fn exit_times(&self, renormalized: bool, opts: &SolveOptions) -> Result<Vec<f64>> {
        let rhs = if renormalized { self.tau.clone() } else { vec![1.0; self.len()] };
        Ok(self.system.solve(&rhs, opts)?.0)
    }

    fn pencil_mass(&self, which: Which) -> Vec<f64> {
        match which {
            Which::L => self.mu_r.clone(),
            Which::ScriptL => self.mu_r.iter().zip(&self.tau).map(|(m, t)| m * t).collect(),
        }
    }

    /// Connected components of the killed graph, as lists of local indices.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.len();
        let mut label = vec![usize::MAX; n];
        let mut out = Vec::new();
        for s in 0..n {
            if label[s] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut comp = vec![s];
            label[s] = id;
            let mut head = 0;
            while head < comp.len() {
                let k = comp[head];
                head += 1;
                for l in self.system.neighbors(k) {
                    if label[l] == usize::MAX {
                        label[l] = id;
                        comp.push(l);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusBound {
    /// Collatz-Wielandt upper bound on the spectral radius.
    pub value: f64,
    pub lower: f64,
    pub iterations: usize,
}

/// Spectral radius of `P_B` by power iteration on the symmetrised matrix
/// `S = D^{1/2} P_B D^{-1/2}`, run separately on each component of the
/// killed graph. `S` is nonnegative, so the min and max of `(Sx)_i / x_i`
/// over a positive iterate bracket the Perron root.
pub fn spectral_radius_bound(op: &KilledOperator) -> Result<RadiusBound> {
    const MAX_ITER: usize = 1_000_000;
    let sys = &op.system;
    let w = sys.node_weights();
    let v = sys.normalizers();
    let sq: Vec<f64> = w.iter().zip(v).map(|(w, v)| (w / v).sqrt()).collect();
    let mut best = RadiusBound { value: 0.0, lower: 0.0, iterations: 0 };
    for comp in op.components() {
        let mut x: Vec<f64> = vec![1.0; comp.len()];
        let mut full = vec![0.0; op.len()];
        let mut done = None;
        for it in 1..=MAX_ITER {
            for (a, &k) in comp.iter().enumerate() {
                full[k] = x[a];
            }
            // (S x)_k = sqrt(w_k / v_k) * sum_l sqrt(w_l / v_l) x_l
            let y: Vec<f64> = comp
                .iter()
                .map(|&k| sq[k] * sys.neighbors(k).map(|l| sq[l] * full[l]).sum::<f64>())
                .collect();
            let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
            for (a, b) in y.iter().zip(&x) {
                let q = a / b;
                lo = lo.min(q);
                hi = hi.max(q);
            }
            let scale = linalg::norm(&y);
            if !(scale > 0.0) {
                return Err(Error::ConvergenceFailure { what: "power iteration", iterations: it, residual: f64::NAN });
            }
            x = y.iter().map(|a| a / scale).collect();
            if hi - lo <= 1e-12 * hi.max(f64::MIN_POSITIVE) {
                done = Some(RadiusBound { value: hi, lower: lo, iterations: it });
                break;
            }
            if it == MAX_ITER {
                return Err(Error::ConvergenceFailure {
                    what: "power iteration",
                    iterations: it,
                    residual: hi - lo,
                });
            }
        }
        let b = done.expect("loop exits through break or return");
        if b.value > best.value {
            best = RadiusBound { iterations: best.iterations + b.iterations, ..b };
        } else {
            best.iterations += b.iterations;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    /// Integrate against `mu_r`; row integrals give step exit times.
    MuR,
    /// Integrate against `nu_r`; row integrals give renormalised exit times.
    NuR,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GreenMethod {
    Auto,
    Direct,
    Neumann,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreenKernel {
    pub matrix: DMatrix<f64>,
    /// `(I - P_B)^{-1}`.
    pub resolvent: DMatrix<f64>,
    pub convention: Convention,
    /// `None` for a direct solve.
    pub neumann_terms_used: Option<usize>,
}

impl GreenKernel {
    pub fn asymmetry(&self) -> f64 {
        let scale = self.matrix.amax();
        if scale == 0.0 {
            return 0.0;
        }
        (&self.matrix - self.matrix.transpose()).amax() / scale
    }

    pub fn min_entry(&self) -> f64 {
        self.matrix.min()
    }

    /// `sum_y g(x, y) m(y)` for each `x`.
    pub fn integrate(&self, measure: &[f64]) -> Vec<f64> {
        (0..self.matrix.nrows())
            .map(|x| (0..self.matrix.ncols()).map(|y| self.matrix[(x, y)] * measure[y]).sum())
            .collect()
    }
}

pub fn green_kernel(op: &KilledOperator, convention: Convention, method: GreenMethod) -> Result<GreenKernel> {
    let n = op.len();
    let use_direct = match method {
        GreenMethod::Direct => true,
        GreenMethod::Neumann => false,
        GreenMethod::Auto => n <= DENSE_LIMIT,
    };
    let (resolvent, terms) = if use_direct {
        let a = op.system.dense_a();
        let chol = a.cholesky().ok_or(Error::Singular { iterations: 0, residual: f64::INFINITY })?;
        let mut r = chol.inverse();
        for (col, m) in op.mu_r.iter().enumerate() {
            r.column_mut(col).scale_mut(*m);
        }
        (r, None)
    } else {
        neumann(op)?
    };
    let mut matrix = resolvent.clone();
    for y in 0..n {
        let factor = match convention {
            Convention::MuR => 1.0 / op.mu_r[y],
            Convention::NuR => op.z_r / op.mu_r[y],
        };
        matrix.column_mut(y).scale_mut(factor);
    }
    Ok(GreenKernel { matrix, resolvent, convention, neumann_terms_used: terms })
}

fn neumann(op: &KilledOperator) -> Result<(DMatrix<f64>, Option<usize>)> {
    const MAX_TERMS: usize = 1_000_000;
    let p = op.dense_p();
    let n = op.len();
    let mut term = DMatrix::<f64>::identity(n, n);
    let mut sum = term.clone();
    for j in 1..=MAX_TERMS {
        term = &p * &term;
        sum += &term;
        if term.amax() < 1e-12 {
            return Ok((sum, Some(j + 1)));
        }
    }
    Err(Error::ConvergenceFailure { what: "Neumann series", iterations: MAX_TERMS, residual: term.amax() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub lambda_1: f64,
    /// Normalised to unit norm in `L^2` of the pencil measure, nonnegative
    /// sum.
    pub eigvec: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub which: Which,
}

/// Bottom eigenvalue by inverse iteration with conjugate-gradient solves.
///
/// The residual is `|Op f - lambda f|_M / (lambda |f|_M)` in the pencil
/// measure `M`.
pub fn bottom_eigenvalue(op: &KilledOperator, which: Which) -> Result<SpectralReport> {
    const MAX_ITER: usize = 2000;
    const INNER_TOL: f64 = 1e-10;
    let n = op.len();
    if n == 0 {
        return Err(Error::invalid("the ball has no inside states"));
    }
    op.system.check_exit()?;
    let m = op.pencil_mass(which);
    let diag = op.system.diag_a();
    let apply = |x: &[f64], y: &mut [f64]| op.system.apply_a(x, y);
    let m_norm = |x: &[f64]| x.iter().zip(&m).map(|(a, w)| a * a * w).sum::<f64>().sqrt();

    let mut x = vec![1.0; n];
    let s = m_norm(&x);
    x.iter_mut().for_each(|a| *a /= s);
    let mut ax = vec![0.0; n];
    let mut residual = f64::INFINITY;
    let mut lambda_prev = 1.0;
    for it in 1..=MAX_ITER {
        let b: Vec<f64> = x.iter().zip(&m).map(|(a, w)| a * w).collect();
        let bnorm = linalg::norm(&b);
        let mut scratch = vec![0.0; n];
        // The solve lands near x / lambda; its accuracy bounds the outer residual.
        let x0 = x.iter().map(|a| a / lambda_prev).collect();
        let (y, _) = linalg::conjugate_gradient(apply, &diag, &b, Some(x0), 100 * n + 10_000, |y| {
            apply(y, &mut scratch);
            let r: f64 = scratch.iter().zip(&b).map(|(a, c)| (a - c) * (a - c)).sum::<f64>().sqrt();
            r <= INNER_TOL * bnorm
        })?;
        let s = m_norm(&y);
        x = y.iter().map(|a| a / s).collect();
        apply(&x, &mut ax);
        let lambda = dot(&x, &ax);
        // Residual of M^{-1} A x - lambda x in the M-norm.
        let r2: f64 = ax
            .iter()
            .zip(&x)
            .zip(&m)
            .map(|((a, v), w)| {
                let d = a / w - lambda * v;
                d * d * w
            })
            .sum();
        residual = r2.sqrt() / lambda;
        lambda_prev = lambda;
        if residual <= EIGEN_TOL {
            if x.iter().sum::<f64>() < 0.0 {
                x.iter_mut().for_each(|a| *a = -*a);
            }
            return Ok(SpectralReport { lambda_1: lambda, eigvec: x, iterations: it, residual, which });
        }
    }
    Err(Error::ConvergenceFailure { what: "inverse iteration", iterations: MAX_ITER, residual })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FkRow {
    #[serde(rename = "R")]
    pub radius: f64,
    pub lambda1: f64,
    pub product: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FkSweep {
    pub rows: Vec<FkRow>,
    /// Infimum of the products, the empirical constant.
    pub c_empirical: f64,
    pub beta_x0: f64,
}

pub fn faber_krahn_sweep(
    cloud: &PointCloud,
    mu: &MeasureWeights,
    beta: &BetaField,
    x0: usize,
    radii: &[f64],
    r: f64,
) -> Result<FkSweep> {
    beta.check_cloud(cloud)?;
    cloud.check_index(x0)?;
    let smallest = radii.iter().copied().fold(f64::INFINITY, f64::min);
    if radii.is_empty() || !(r <= smallest / 4.0) {
        return Err(Error::invalid(format!(
            "jump radius {r} must be at most a quarter of every ball radius"
        )));
    }
    let b0 = beta.values[x0];
    let rows = radii
        .iter()
        .map(|&radius| {
            let op = build_killed_operator(cloud, mu, r, &BallSpec::closed(x0, radius)?, beta)?;
            let rep = bottom_eigenvalue(&op, Which::ScriptL)?;
            Ok(FkRow { radius, lambda1: rep.lambda_1, product: rep.lambda_1 * radius.powf(b0) })
        })
        .collect::<Result<Vec<_>>>()?;
    let c_empirical = rows.iter().map(|r| r.product).fold(f64::INFINITY, f64::min);
    Ok(FkSweep { rows, c_empirical, beta_x0: b0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundRow {
    pub r: f64,
    pub sigma_r: f64,
    pub e_plus: f64,
    /// Rayleigh quotient of the tent function for `L`.
    pub rayleigh: f64,
    /// Largest `|psi(y) - psi(z)|` over pairs with `d(y, z) < r`.
    pub max_jump: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundCheck {
    pub rows: Vec<LowerBoundRow>,
    /// Slope of `log(1 / rayleigh)` against `log(1 / r)`.
    pub implied_exponent: f64,
    /// `2 - (alpha+ - alpha-)` from the regularity report.
    pub expected_floor: f64,
}

/// Tent test function `psi(y) = (R - d(x0, y)) / r` on `B_R[x0]` evaluated
/// against the bottom of the spectrum and the sup exit time at each `r`.
pub fn beta_lower_bound_check(
    cloud: &PointCloud,
    mu: &MeasureWeights,
    report: &AhlforsReport,
    x0: usize,
    radius: f64,
    r_grid: &[f64],
) -> Result<LowerBoundCheck> {
    if !report.pass {
        return Err(Error::invalid("the measure does not pass the Ahlfors check"));
    }
    let ball = BallSpec::closed(x0, radius)?;
    let steps = BetaField::constant(cloud.len(), 0.0)?;
    let rows = r_grid
        .iter()
        .map(|&r| {
            let op = build_killed_operator(cloud, mu, r, &ball, &steps)?;
            let sigma = bottom_eigenvalue(&op, Which::L)?;
            let e = op.exit_times(false, &SolveOptions::default())?;
            let e_plus = e.iter().copied().fold(0.0, f64::max);
            let psi: Vec<f64> =
                op.inside().iter().map(|&i| (radius - cloud.dist(x0, i)).max(0.0) / r).collect();
            let lpsi = op.apply_l(&psi);
            let num: f64 = psi.iter().zip(&lpsi).zip(&op.mu_r).map(|((a, b), m)| a * b * m).sum();
            let den: f64 = psi.iter().zip(&op.mu_r).map(|(a, m)| a * a * m).sum();
            let mut max_jump = 0.0_f64;
            for (k, &i) in op.inside().iter().enumerate() {
                for j in cloud.ball_around(cloud.point(i), r, false) {
                    let pj = op.system.local_of(j).map_or(0.0, |l| psi[l]);
                    max_jump = max_jump.max((psi[k] - pj).abs());
                }
            }
            Ok(LowerBoundRow { r, sigma_r: sigma.lambda_1, e_plus, rayleigh: num / den, max_jump })
        })
        .collect::<Result<Vec<_>>>()?;
    let fit = ScalingFit::regress(
        rows.iter().map(|r| r.r).collect(),
        rows.iter().map(|r| 1.0 / r.rayleigh).collect(),
        Envelope::Plain,
        Abscissa::LogInverseScale,
    )?;
    let (lo, hi) = report.q_range();
    Ok(LowerBoundCheck { rows, implied_exponent: fit.exponent, expected_floor: 2.0 - (hi - lo) })
}
