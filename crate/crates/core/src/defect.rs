//! Defect of the numerical flow and the scaled local-error estimator.
//!
//! The defect `R(dt, u_n, chi) = D_dt Phi - A(Phi)` measures how far the
//! one-step map is from satisfying the semidiscrete system; for an order-p
//! method, `L = dt/(p+1) * R` estimates the local error to `O(dt^{p+2})`.

use crate::error::SchemeError;
use crate::grid::{lincomb, Field};
use crate::scheme::{ParamVector, Scheme};

/// Defect and estimator fields for one candidate parameter vector.
#[derive(Clone, Debug)]
pub struct DefectReport {
    /// The defect `R`.
    pub defect: Field,
    /// Estimator `L = dt/(p+1) * R`.
    pub estimator: Field,
    /// Discrete L2 norm of the defect.
    pub defect_norm: f64,
    /// Max norm of the defect (auxiliary diagnostic).
    pub defect_max_norm: f64,
    pub chi: ParamVector,
    /// The temporary solution `Phi(dt, u_n, chi)` computed along the way.
    pub u_next: Field,
}

/// Central-difference step for the parameter Jacobian.
pub fn default_fd_step(dt: f64) -> f64 {
    (1e-4 * dt * dt).max(1e-7)
}

/// Evaluate the defect at `chi`, recomputing the temporary step.
pub fn defect(
    scheme: &dyn Scheme,
    dt: f64,
    u_n: &Field,
    chi: &[f64],
    t_n: f64,
) -> Result<DefectReport, SchemeError> {
    let u_next = scheme.step(u_n, t_n, dt, chi)?;
    let dphi = scheme.dt_phi(u_n, &u_next, t_n, dt, chi)?;
    let a = scheme.semidiscrete_rhs(&u_next, t_n + dt)?;
    let defect = lincomb(1.0, &dphi, -1.0, &a).map_err(SchemeError::Grid)?;
    let scale = dt / (scheme.order() as f64 + 1.0);
    let estimator = lincomb(scale, &defect, 0.0, &defect).map_err(SchemeError::Grid)?;
    Ok(DefectReport {
        defect_norm: defect.l2_norm(),
        defect_max_norm: defect.max_norm(),
        chi: ParamVector::new(chi.to_vec()),
        u_next,
        estimator,
        defect,
    })
}

/// Central-difference Jacobian of the defect with respect to `chi`;
/// one column per parameter.
pub fn param_jacobian(
    scheme: &dyn Scheme,
    dt: f64,
    u_n: &Field,
    chi: &[f64],
    t_n: f64,
    fd_step: f64,
) -> Result<Vec<Vec<f64>>, SchemeError> {
    let mut cols = Vec::with_capacity(chi.len());
    let mut pert = chi.to_vec();
    for j in 0..chi.len() {
        pert[j] = chi[j] + fd_step;
        let plus = defect(scheme, dt, u_n, &pert, t_n)?;
        pert[j] = chi[j] - fd_step;
        let minus = defect(scheme, dt, u_n, &pert, t_n)?;
        pert[j] = chi[j];
        let col: Vec<f64> = plus
            .defect
            .values()
            .iter()
            .zip(minus.defect.values())
            .map(|(p, m)| (p - m) / (2.0 * fd_step))
            .collect();
        cols.push(col);
    }
    Ok(cols)
}
