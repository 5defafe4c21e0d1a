//! Single-step parametric scheme interface.
//!
//! A scheme exposes its step map `Phi(dt, u_n, chi)`, the analytic time
//! derivative `D_dt Phi` used by the defect estimator, the semidiscrete
//! operator `A` it approximates, and its discrete conservation laws.

use crate::error::SchemeError;
use crate::grid::{Field, Grid1D};

/// Componentwise bounds of the parameter search box.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl ParamBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert_eq!(lo.len(), hi.len());
        assert!(lo.iter().zip(&hi).all(|(l, h)| l <= h));
        Self { lo, hi }
    }

    /// Symmetric box `[-c, c]^k`, the `O(dt^2)` neighbourhood of zero the
    /// schemes' free parameters live in.
    pub fn symmetric(c: f64, k: usize) -> Self {
        Self::new(vec![-c; k], vec![c; k])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, chi: &[f64]) -> bool {
        chi.len() == self.dim()
            && chi.iter().zip(self.lo.iter().zip(&self.hi)).all(|(x, (l, h))| l <= x && x <= h)
    }

    /// Clamp `chi` into the box; returns whether anything moved.
    pub fn clamp(&self, chi: &mut [f64]) -> bool {
        let mut clamped = false;
        for (x, (l, h)) in chi.iter_mut().zip(self.lo.iter().zip(&self.hi)) {
            let c = x.clamp(*l, *h);
            if c != *x {
                *x = c;
                clamped = true;
            }
        }
        clamped
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }
}

/// A parameter vector together with a flag recording whether it was clamped
/// into the search box at any point.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector {
    pub values: Vec<f64>,
    pub clamped: bool,
}

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values, clamped: false }
    }

    pub fn zeros(k: usize) -> Self {
        Self::new(vec![0.0; k])
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Clamp into `omega`, accumulating the flag.
    pub fn clamp_to(&mut self, omega: &ParamBox) {
        let moved = omega.clamp(&mut self.values);
        self.clamped |= moved;
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(values: Vec<f64>) -> Self {
        Self::new(values)
    }
}

/// Endpoint fluxes and density pair of one discrete conservation law over a
/// single time-step, for the Dirichlet-form error metric.
#[derive(Clone, Debug)]
pub struct LocalLawTerms {
    /// Flux at the left edge index (m = 1).
    pub flux_left: f64,
    /// Flux at the right edge index (m = M + 1).
    pub flux_right: f64,
    pub density_n: Field,
    pub density_np1: Field,
}

/// Discrete conservation laws attached to a scheme, indexed `k = 1, 2, ...`
/// in the order mass, momentum/first moment, energy.
pub trait ConservationLaws {
    fn law_count(&self) -> usize;

    fn law_name(&self, k: usize) -> &'static str;

    /// Whether fixed-parameter runs of this scheme preserve law `k` exactly.
    fn preserves(&self, k: usize) -> bool;

    /// Density `G_k(x, u, chi)` for the global (periodic) drift metric.
    fn global_density(&self, k: usize, u: &Field, chi: &[f64]) -> Option<Field>;

    /// Flux endpoints and densities for the local (Dirichlet) metric.
    fn local_terms(
        &self,
        k: usize,
        u_n: &Field,
        u_np1: &Field,
        t: f64,
        dt: f64,
        chi: &[f64],
    ) -> Option<LocalLawTerms>;
}

/// A single-step implicit method with free parameters.
pub trait Scheme: ConservationLaws + Send + Sync {
    fn name(&self) -> String;

    fn grid(&self) -> &Grid1D;

    /// Consistency order `p` (all built-in families are second order).
    fn order(&self) -> u32 {
        2
    }

    /// Number of free parameters `K`.
    fn param_dim(&self) -> usize;

    /// Search box for time-step `dt`.
    fn param_box(&self, dt: f64) -> ParamBox;

    /// Advance one step: `u_{n+1} = Phi(dt, u_n, chi)`.
    fn step(&self, u_n: &Field, t: f64, dt: f64, chi: &[f64]) -> Result<Field, SchemeError>;

    /// Analytic `D_dt Phi(dt, u_n, chi)`, given the converged `u_{n+1}`.
    fn dt_phi(
        &self,
        u_n: &Field,
        u_np1: &Field,
        t: f64,
        dt: f64,
        chi: &[f64],
    ) -> Result<Field, SchemeError>;

    /// Semidiscrete operator `A(u, t)` of the method-of-lines system.
    fn semidiscrete_rhs(&self, u: &Field, t: f64) -> Result<Field, SchemeError>;

    /// The same scheme on the subgrid with spacing `r * dx`.
    fn coarsened(&self, r: usize) -> Result<Box<dyn Scheme>, SchemeError>;

    fn check_params(&self, chi: &[f64]) -> Result<(), SchemeError> {
        if chi.len() != self.param_dim() {
            return Err(SchemeError::ParamCount { expected: self.param_dim(), got: chi.len() });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamp_flags_and_projects() {
        let omega = ParamBox::symmetric(0.1, 2);
        let mut chi = ParamVector::new(vec![0.05, -0.3]);
        chi.clamp_to(&omega);
        assert!(chi.clamped);
        assert_eq!(chi.values, vec![0.05, -0.1]);

        let mut inside = ParamVector::new(vec![0.0, 0.1]);
        inside.clamp_to(&omega);
        assert!(!inside.clamped);
    }

    #[test]
    fn box_membership() {
        let omega = ParamBox::new(vec![-1.0], vec![2.0]);
        assert!(omega.contains(&[0.0]));
        assert!(omega.contains(&[2.0]));
        assert!(!omega.contains(&[2.1]));
        assert!(!omega.contains(&[0.0, 0.0]));
    }
}
