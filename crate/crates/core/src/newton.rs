//! Damped Newton iteration for the implicit scheme steps.

use crate::band::BandedMatrix;
use crate::error::SolveError;

/// Stopping thresholds for [`newton_solve`].
///
/// Defaults keep the algebraic error far below the O(dt^3) local truncation
/// error the parameter optimization works on.
#[derive(Clone, Copy, Debug)]
pub struct NewtonConfig {
    /// Relative residual threshold: stop when
    /// `||r|| <= residual_tol * (1 + ||r0||)`.
    pub residual_tol: f64,
    /// Absolute threshold on the Newton step length.
    pub step_tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self { residual_tol: 1e-12, step_tol: 1e-13, max_iter: 50 }
    }
}

/// Converged state together with iteration statistics.
#[derive(Clone, Debug)]
pub struct NewtonOutcome {
    pub solution: Vec<f64>,
    pub iterations: usize,
    pub residual_norm: f64,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Solve `residual(u) = 0` by Newton's method with simple backtracking.
///
/// `jacobian(u)` must return the derivative of `residual` at `u`.
pub fn newton_solve(
    residual: impl Fn(&[f64]) -> Vec<f64>,
    jacobian: impl Fn(&[f64]) -> BandedMatrix,
    guess: &[f64],
    cfg: &NewtonConfig,
) -> Result<NewtonOutcome, SolveError> {
    let mut u = guess.to_vec();
    let mut r = residual(&u);
    let r0 = norm(&r);
    let target = cfg.residual_tol * (1.0 + r0);
    if r0 <= target {
        return Ok(NewtonOutcome { solution: u, iterations: 0, residual_norm: r0 });
    }

    let mut rnorm = r0;
    for it in 1..=cfg.max_iter {
        let j = jacobian(&u);
        let step = j.solve(&r)?;
        let step_len = norm(&step);

        // full step first, halve while the residual norm grows
        let mut lambda = 1.0;
        let mut best: Option<(Vec<f64>, Vec<f64>, f64)> = None;
        for _ in 0..8 {
            let cand: Vec<f64> = u.iter().zip(&step).map(|(ui, si)| ui - lambda * si).collect();
            let rc = residual(&cand);
            let rc_norm = norm(&rc);
            if rc_norm.is_finite() && rc_norm < rnorm {
                best = Some((cand, rc, rc_norm));
                break;
            }
            if rc_norm.is_finite() && best.as_ref().map_or(true, |(_, _, b)| rc_norm < *b) {
                best = Some((cand, rc, rc_norm));
            }
            lambda *= 0.5;
        }
        let (cand, rc, rc_norm) = best.ok_or(SolveError::NonConvergence {
            iterations: it,
            residual: rnorm,
        })?;
        u = cand;
        r = rc;
        rnorm = rc_norm;

        if rnorm <= target || lambda * step_len <= cfg.step_tol {
            return Ok(NewtonOutcome { solution: u, iterations: it, residual_norm: rnorm });
        }
    }
    Err(SolveError::NonConvergence { iterations: cfg.max_iter, residual: rnorm })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag_jac(f: impl Fn(&[f64]) -> Vec<f64> + Copy) -> impl Fn(&[f64]) -> BandedMatrix {
        move |u: &[f64]| {
            // forward-difference diagonal Jacobian for scalar-decoupled tests
            let n = u.len();
            let mut j = BandedMatrix::new(n, 0, 0, false);
            let h = 1e-7;
            let f0 = f(u);
            let mut up = u.to_vec();
            for i in 0..n {
                up[i] += h;
                let fi = f(&up);
                j.add(i, 0, (fi[i] - f0[i]) / h);
                up[i] = u[i];
            }
            j
        }
    }

    #[test]
    fn affine_converges_in_one_iteration() {
        let c = vec![1.0, -2.0, 0.5, 7.0, 0.0, 3.0, -1.0];
        let target = c.clone();
        let res = move |u: &[f64]| u.iter().zip(&target).map(|(a, b)| a - b).collect::<Vec<_>>();
        let jac = |u: &[f64]| {
            let mut j = BandedMatrix::new(u.len(), 0, 0, false);
            for i in 0..u.len() {
                j.add(i, 0, 1.0);
            }
            j
        };
        let out = newton_solve(res, jac, &vec![10.0; 7], &NewtonConfig::default()).unwrap();
        assert_eq!(out.iterations, 1);
        for (u, c) in out.solution.iter().zip(&c) {
            assert!((u - c).abs() < 1e-14);
        }
    }

    #[test]
    fn quadratic_scalar_root() {
        let res = |u: &[f64]| vec![u[0] * u[0] - 4.0, u[1] - 1.0, u[2] - 1.0, u[3] - 1.0,
                                    u[4] - 1.0, u[5] - 1.0, u[6] - 1.0];
        let out = newton_solve(res, diag_jac(res), &[3.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
                               &NewtonConfig::default())
            .unwrap();
        assert!(out.iterations <= 5 + 1);
        assert!((out.solution[0] - 2.0).abs() <= 1e-12);
    }

    #[test]
    fn quadratic_local_convergence_rate() {
        // track iterates of u^2 = 4 by hand to measure e_{k+1}/e_k^2
        let mut u = 3.0f64;
        let mut errs = vec![(u - 2.0f64).abs()];
        for _ in 0..5 {
            u -= (u * u - 4.0) / (2.0 * u);
            errs.push((u - 2.0).abs());
        }
        let mut ratios = Vec::new();
        for k in 0..errs.len() - 1 {
            if errs[k + 1] > 1e-15 {
                ratios.push(errs[k + 1] / (errs[k] * errs[k]));
            }
        }
        let last3 = &ratios[ratios.len().saturating_sub(3)..];
        for r in last3 {
            assert!(*r <= 1.0, "quadratic constant {r}");
        }
    }

    #[test]
    fn reports_nonconvergence() {
        // residual with no root: u^2 + 1
        let res = |u: &[f64]| u.iter().map(|x| x * x + 1.0).collect::<Vec<_>>();
        let cfg = NewtonConfig { max_iter: 5, ..NewtonConfig::default() };
        let out = newton_solve(res, diag_jac(res), &vec![1.0; 7], &cfg);
        assert!(matches!(out, Err(SolveError::NonConvergence { .. })));
    }
}
