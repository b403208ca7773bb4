//! Iterative and dense solvers for the symmetric positive definite systems
//! that arise from killed reversible chains.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgReport {
    pub iterations: usize,
    /// Relative 2-norm residual `|b - Ax| / |b|`, recomputed from scratch.
    pub residual: f64,
}

/// Jacobi-preconditioned conjugate gradients for `A x = b`.
///
/// `apply(x, y)` must write `A x` into `y`. Iteration stops once the
/// recomputed residual satisfies `accept`, which receives the current
/// iterate; the recursive residual is only used to decide when to check.
pub fn conjugate_gradient<F, G>(
    apply: F,
    diag: &[f64],
    b: &[f64],
    x0: Option<Vec<f64>>,
    max_iter: usize,
    mut accept: G,
) -> Result<(Vec<f64>, CgReport)>
where
    F: Fn(&[f64], &mut [f64]),
    G: FnMut(&[f64]) -> bool,
{
    let n = b.len();
    let bnorm = norm(b);
    let mut x = x0.unwrap_or_else(|| vec![0.0; n]);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok((x, CgReport { iterations: 0, residual: 0.0 }));
    }
    let mut ax = vec![0.0; n];
    let mut r = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut ap = vec![0.0; n];
    let true_residual = |x: &[f64], ax: &mut [f64], r: &mut [f64]| {
        apply(x, ax);
        for i in 0..n {
            r[i] = b[i] - ax[i];
        }
        norm(r) / bnorm
    };

    let mut iterations = 0;
    // Each pass is a fresh CG run from the current iterate; a pass ends when
    // the recursive residual suggests convergence, then the true residual
    // decides whether to stop or restart with a tighter target.
    let mut target = 1e-13;
    loop {
        let res = true_residual(&x, &mut ax, &mut r);
        if accept(&x) {
            return Ok((x, CgReport { iterations, residual: res }));
        }
        if iterations >= max_iter || target < 1e-18 {
            return Err(Error::Singular { iterations, residual: res });
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        p.copy_from_slice(&z);
        let mut rz = dot(&r, &z);
        while iterations < max_iter {
            apply(&p, &mut ap);
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                return Err(Error::Singular { iterations, residual: norm(&r) / bnorm });
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            iterations += 1;
            if norm(&r) <= target * bnorm {
                break;
            }
            for i in 0..n {
                z[i] = r[i] / diag[i];
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        target *= 0.1;
    }
}

/// Dense Cholesky solve of an SPD system, used as a cross-check on small
/// instances.
pub fn dense_spd_solve(a: DMatrix<f64>, b: &[f64]) -> Result<Vec<f64>> {
    let n = b.len();
    let chol = a.cholesky().ok_or(Error::Singular { iterations: 0, residual: f64::INFINITY })?;
    let x = chol.solve(&DVector::from_column_slice(b));
    Ok((0..n).map(|i| x[i]).collect())
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cg_solves_tridiagonal_system() {
        // -x'' discretisation with Dirichlet ends.
        let n = 200;
        let apply = |x: &[f64], y: &mut [f64]| {
            for i in 0..n {
                let l = if i > 0 { x[i - 1] } else { 0.0 };
                let r = if i + 1 < n { x[i + 1] } else { 0.0 };
                y[i] = 2.0 * x[i] - l - r;
            }
        };
        let b = vec![1.0; n];
        let diag = vec![2.0; n];
        let mut y = vec![0.0; n];
        let (x, rep) = conjugate_gradient(apply, &diag, &b, None, 10_000, |x| {
            apply(x, &mut y);
            let r: Vec<f64> = y.iter().zip(&b).map(|(a, c)| a - c).collect();
            norm(&r) <= 1e-11 * norm(&b)
        })
        .unwrap();
        assert!(rep.residual <= 1e-11);
        // Exact solution x_i = (i+1)(n-i)/2.
        for i in 0..n {
            let exact = (i + 1) as f64 * (n - i) as f64 / 2.0;
            assert!((x[i] - exact).abs() <= 1e-8 * exact);
        }
    }

    #[test]
    fn cg_reports_failure_when_never_accepted() {
        let apply = |x: &[f64], y: &mut [f64]| y.copy_from_slice(x);
        let err = conjugate_gradient(apply, &[1.0], &[1.0], None, 50, |_| false).unwrap_err();
        assert!(matches!(err, Error::Singular { .. }));
    }

    #[test]
    fn dense_cholesky_matches_known_inverse() {
        let a = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let x = dense_spd_solve(a, &[1.0, 2.0]).unwrap();
        assert!((x[0] - 1.0 / 11.0).abs() < 1e-15);
        assert!((x[1] - 7.0 / 11.0).abs() < 1e-15);
    }
}
