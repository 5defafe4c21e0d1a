//! Linearly implicit CS(lambda) schemes for the nonlinear heat equation
//! `u_t = (u^2/2)_xx` with Dirichlet boundary data.
//!
//! The unknown vector holds interior nodes only; boundary contributions
//! enter the semidiscrete operator and the step map through `e_1`/`e_M`
//! correction terms. One tridiagonal solve advances a step.

use std::sync::Arc;

use crate::band::BandedMatrix;
use crate::error::SchemeError;
use crate::grid::{BoundaryKind, Field, Grid1D};
use crate::scheme::{ConservationLaws, LocalLawTerms, ParamBox, Scheme};

/// Free parameter of the CS family; `lambda = O(dt^2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CsParams {
    pub lambda: f64,
}

type TimeFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Dirichlet boundary data `u(a,t) = phi_l(t)`, `u(b,t) = phi_r(t)` together
/// with the analytic time derivatives the defect formula needs.
#[derive(Clone)]
pub struct NlhBoundary {
    pub phi_l: TimeFn,
    pub phi_r: TimeFn,
    pub dphi_l: TimeFn,
    pub dphi_r: TimeFn,
}

impl NlhBoundary {
    pub fn new(phi_l: TimeFn, phi_r: TimeFn, dphi_l: TimeFn, dphi_r: TimeFn) -> Self {
        Self { phi_l, phi_r, dphi_l, dphi_r }
    }

    /// Homogeneous boundary conditions.
    pub fn zero() -> Self {
        let z: TimeFn = Arc::new(|_| 0.0);
        Self { phi_l: z.clone(), phi_r: z.clone(), dphi_l: z.clone(), dphi_r: z }
    }
}

impl std::fmt::Debug for NlhBoundary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("NlhBoundary { .. }")
    }
}

/// Homogeneous-boundary centred second difference on the interior vector.
fn d2hat(u: &[f64], dx: f64) -> Vec<f64> {
    let n = u.len();
    let dx2 = dx * dx;
    (0..n)
        .map(|i| {
            let left = if i > 0 { u[i - 1] } else { 0.0 };
            let right = if i + 1 < n { u[i + 1] } else { 0.0 };
            (right - 2.0 * u[i] + left) / dx2
        })
        .collect()
}

/// Semidiscrete operator
/// `A(u,t) = (1/2)(D2hat u^2 + (phi_l^2 e_1 + phi_r^2 e_M)/dx^2)`.
pub fn nlh_rhs(u: &Field, t: f64, bc: &NlhBoundary) -> Result<Field, SchemeError> {
    if u.grid().boundary == BoundaryKind::Periodic {
        return Err(SchemeError::UnsupportedBoundary { required: "Dirichlet" });
    }
    let dx = u.grid().dx;
    let sq: Vec<f64> = u.values().iter().map(|x| x * x).collect();
    let mut out = d2hat(&sq, dx);
    let n = out.len();
    let dx2 = dx * dx;
    out[0] += (bc.phi_l)(t).powi(2) / dx2;
    out[n - 1] += (bc.phi_r)(t).powi(2) / dx2;
    for v in out.iter_mut() {
        *v *= 0.5;
    }
    Ok(Field::new(out, *u.grid()).expect("rhs length"))
}

/// The CS(lambda) family bound to a Dirichlet grid.
#[derive(Clone, Debug)]
pub struct CsScheme {
    grid: Grid1D,
    bc: NlhBoundary,
    omega_scale: f64,
}

impl CsScheme {
    pub fn new(grid: Grid1D, bc: NlhBoundary) -> Result<Self, SchemeError> {
        match grid.boundary {
            BoundaryKind::Dirichlet | BoundaryKind::Zero => {}
            BoundaryKind::Periodic => {
                return Err(SchemeError::UnsupportedBoundary { required: "Dirichlet" })
            }
        }
        Ok(Self { grid, bc, omega_scale: 1.0 })
    }

    pub fn with_omega_scale(mut self, c: f64) -> Self {
        self.omega_scale = c;
        self
    }

    pub fn boundary(&self) -> &NlhBoundary {
        &self.bc
    }

    /// `dt*J = I + lambda*D2hat - (dt/2) D2hat diag(u_n)`, tridiagonal.
    fn system_matrix(&self, u: &[f64], dt: f64, lambda: f64) -> BandedMatrix {
        let n = u.len();
        let dx2 = self.grid.dx * self.grid.dx;
        let mut k = BandedMatrix::new(n, 1, 1, false);
        for i in 0..n {
            k.add(i, 0, 1.0 - 2.0 * lambda / dx2 + dt * u[i] / dx2);
            if i + 1 < n {
                k.add(i, 1, lambda / dx2 - 0.5 * dt * u[i + 1] / dx2);
            }
            if i > 0 {
                k.add(i, -1, lambda / dx2 - 0.5 * dt * u[i - 1] / dx2);
            }
        }
        k
    }

    fn edge_correction(&self, cl: f64, cr: f64, out: &mut [f64]) {
        let n = out.len();
        out[0] += cl;
        out[n - 1] += cr;
    }
}

impl Scheme for CsScheme {
    fn name(&self) -> String {
        "nlh-cs".to_string()
    }

    fn grid(&self) -> &Grid1D {
        &self.grid
    }

    fn param_dim(&self) -> usize {
        1
    }

    fn param_box(&self, dt: f64) -> ParamBox {
        ParamBox::symmetric(self.omega_scale * dt * dt, 1)
    }

    /// One tridiagonal solve: the closed-form step of the linearly implicit
    /// scheme `D_dt(u + lambda D2 u) = (1/2) D2 (u_n o u_{n+1})`, with all
    /// four boundary-correction terms.
    fn step(&self, u_n: &Field, t: f64, dt: f64, chi: &[f64]) -> Result<Field, SchemeError> {
        self.check_params(chi)?;
        let lambda = chi[0];
        let u = u_n.values();
        let dx2 = self.grid.dx * self.grid.dx;
        let (t0, t1) = (t, t + dt);

        let mut b: Vec<f64> = {
            let d2u = d2hat(u, self.grid.dx);
            u.iter().zip(&d2u).map(|(x, d)| x + lambda * d).collect()
        };
        let (pl0, pl1) = ((self.bc.phi_l)(t0), (self.bc.phi_l)(t1));
        let (pr0, pr1) = ((self.bc.phi_r)(t0), (self.bc.phi_r)(t1));
        self.edge_correction(
            dt / (2.0 * dx2) * pl1 * pl0 - lambda / dx2 * (pl1 - pl0),
            dt / (2.0 * dx2) * pr1 * pr0 - lambda / dx2 * (pr1 - pr0),
            &mut b,
        );

        let k = self.system_matrix(u, dt, lambda);
        let v = k.solve(&b)?;
        let f = Field::new(v, self.grid).expect("step length");
        if !f.is_finite() {
            return Err(SchemeError::NonFinite { context: "cs step" });
        }
        Ok(f)
    }

    /// Analytic time derivative of the step map (same tridiagonal matrix,
    /// boundary terms differentiated through `t_{n+1} = t_n + dt`).
    fn dt_phi(
        &self,
        u_n: &Field,
        u_np1: &Field,
        t: f64,
        dt: f64,
        chi: &[f64],
    ) -> Result<Field, SchemeError> {
        self.check_params(chi)?;
        let lambda = chi[0];
        let (u, v) = (u_n.values(), u_np1.values());
        let dx2 = self.grid.dx * self.grid.dx;
        let t1 = t + dt;

        let prod: Vec<f64> = u.iter().zip(v).map(|(a, b)| a * b).collect();
        let mut rhs: Vec<f64> = d2hat(&prod, self.grid.dx).iter().map(|x| 0.5 * x).collect();
        let (pl0, pl1, dpl1) = ((self.bc.phi_l)(t), (self.bc.phi_l)(t1), (self.bc.dphi_l)(t1));
        let (pr0, pr1, dpr1) = ((self.bc.phi_r)(t), (self.bc.phi_r)(t1), (self.bc.dphi_r)(t1));
        self.edge_correction(
            (pl1 + dt * dpl1) * pl0 / (2.0 * dx2) - lambda * dpl1 / dx2,
            (pr1 + dt * dpr1) * pr0 / (2.0 * dx2) - lambda * dpr1 / dx2,
            &mut rhs,
        );

        let k = self.system_matrix(u, dt, lambda);
        let y = k.solve(&rhs)?;
        Ok(Field::new(y, self.grid).expect("dtphi length"))
    }

    fn semidiscrete_rhs(&self, u: &Field, t: f64) -> Result<Field, SchemeError> {
        nlh_rhs(u, t, &self.bc)
    }

    fn coarsened(&self, r: usize) -> Result<Box<dyn Scheme>, SchemeError> {
        let grid = self.grid.coarsened(r).map_err(SchemeError::Grid)?;
        Ok(Box::new(CsScheme { grid, bc: self.bc.clone(), omega_scale: self.omega_scale }))
    }
}

// ---------------------------------------------------------------------------
// conservation laws
// ---------------------------------------------------------------------------

impl CsScheme {
    /// Value of `w = u_n o u_{n+1}/2 - lambda D_dt u_n` on the extended node
    /// range `m = 0..=M+1`, boundary nodes from the phi functions.
    fn w_extended(&self, u_n: &[f64], u_np1: &[f64], t: f64, dt: f64, lambda: f64) -> Vec<f64> {
        let m = u_n.len();
        let mut w = Vec::with_capacity(m + 2);
        let (pl0, pl1) = ((self.bc.phi_l)(t), (self.bc.phi_l)(t + dt));
        let (pr0, pr1) = ((self.bc.phi_r)(t), (self.bc.phi_r)(t + dt));
        w.push(0.5 * pl0 * pl1 - lambda * (pl1 - pl0) / dt);
        for i in 0..m {
            w.push(0.5 * u_n[i] * u_np1[i] - lambda * (u_np1[i] - u_n[i]) / dt);
        }
        w.push(0.5 * pr0 * pr1 - lambda * (pr1 - pr0) / dt);
        w
    }

    /// `q = u_n o u_{n+1}/2` on the extended range.
    fn q_extended(&self, u_n: &[f64], u_np1: &[f64], t: f64, dt: f64) -> Vec<f64> {
        self.w_extended(u_n, u_np1, t, dt, 0.0)
    }

    /// Density `G_2 = x o (u + lambda D2 u)`, with the true boundary values
    /// of time `t` as ghosts in `D2`.
    fn x_moment_density(&self, u: &[f64], t: f64, lambda: f64) -> Vec<f64> {
        let n = u.len();
        let dx2 = self.grid.dx * self.grid.dx;
        (0..n)
            .map(|i| {
                let x = self.grid.node(i);
                let left = if i > 0 { u[i - 1] } else { (self.bc.phi_l)(t) };
                let right = if i + 1 < n { u[i + 1] } else { (self.bc.phi_r)(t) };
                let d2 = (right - 2.0 * u[i] + left) / dx2;
                x * (u[i] + lambda * d2)
            })
            .collect()
    }

    /// Density/flux pairs of the two discrete conservation laws for the step
    /// `u_n -> u_np1` (flux vectors on the edge range `m = 1..=M+1`).
    pub fn densities_fluxes(
        &self,
        u_n: &Field,
        u_np1: &Field,
        t: f64,
        dt: f64,
        chi: &[f64],
    ) -> Result<[(Vec<f64>, Field); 2], SchemeError> {
        self.check_params(chi)?;
        let lambda = chi[0];
        let (u, v) = (u_n.values(), u_np1.values());
        let dx = self.grid.dx;

        let w = self.w_extended(u, v, t, dt, lambda);
        let f1: Vec<f64> = (1..w.len()).map(|m| -(w[m] - w[m - 1]) / dx).collect();

        let q = self.q_extended(u, v, t, dt);
        let x0 = self.grid.a;
        let f2: Vec<f64> = (1..q.len())
            .map(|m| {
                let xm = x0 + dx * m as f64;
                let xm1 = xm - dx;
                0.5 * (q[m] + q[m - 1]) - 0.5 * (xm + xm1) * (q[m] - q[m - 1]) / dx
            })
            .collect();

        let g1 = Field::new(u.to_vec(), self.grid).expect("density length");
        let g2 = Field::new(self.x_moment_density(u, t, lambda), self.grid)
            .expect("density length");
        Ok([(f1, g1), (f2, g2)])
    }
}

impl ConservationLaws for CsScheme {
    fn law_count(&self) -> usize {
        2
    }

    fn law_name(&self, k: usize) -> &'static str {
        match k {
            1 => "mass",
            2 => "x-moment",
            _ => "unknown",
        }
    }

    fn preserves(&self, k: usize) -> bool {
        k == 1 || k == 2
    }

    fn global_density(&self, k: usize, u: &Field, chi: &[f64]) -> Option<Field> {
        // global drift only meaningful for conservative (zero) boundaries,
        // where the D2 ghosts vanish
        let lambda = chi.first().copied().unwrap_or(0.0);
        let values = match k {
            1 => u.values().to_vec(),
            2 => {
                let d2u = d2hat(u.values(), self.grid.dx);
                u.values()
                    .iter()
                    .zip(&d2u)
                    .enumerate()
                    .map(|(i, (x, d))| self.grid.node(i) * (x + lambda * d))
                    .collect()
            }
            _ => return None,
        };
        Some(Field::new(values, self.grid).expect("density length"))
    }

    fn local_terms(
        &self,
        k: usize,
        u_n: &Field,
        u_np1: &Field,
        t: f64,
        dt: f64,
        chi: &[f64],
    ) -> Option<LocalLawTerms> {
        if !(1..=2).contains(&k) || chi.len() != 1 {
            return None;
        }
        let lambda = chi[0];
        let (u, v) = (u_n.values(), u_np1.values());
        let dx = self.grid.dx;
        match k {
            1 => {
                let w = self.w_extended(u, v, t, dt, lambda);
                let last = w.len() - 1;
                Some(LocalLawTerms {
                    flux_left: -(w[1] - w[0]) / dx,
                    flux_right: -(w[last] - w[last - 1]) / dx,
                    density_n: Field::new(u.to_vec(), self.grid).expect("len"),
                    density_np1: Field::new(v.to_vec(), self.grid).expect("len"),
                })
            }
            2 => {
                let q = self.q_extended(u, v, t, dt);
                let f2 = |m: usize| {
                    let xm = self.grid.a + dx * m as f64;
                    0.5 * (q[m] + q[m - 1]) - 0.5 * (2.0 * xm - dx) * (q[m] - q[m - 1]) / dx
                };
                Some(LocalLawTerms {
                    flux_left: f2(1),
                    flux_right: f2(q.len() - 1),
                    density_n: Field::new(self.x_moment_density(u, t, lambda), self.grid)
                        .expect("len"),
                    density_np1: Field::new(
                        self.x_moment_density(v, t + dt, lambda),
                        self.grid,
                    )
                    .expect("len"),
                })
            }
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wave_bc() -> NlhBoundary {
        NlhBoundary::new(
            Arc::new(|t| t),
            Arc::new(|_| 0.0),
            Arc::new(|_| 1.0),
            Arc::new(|_| 0.0),
        )
    }

    fn grid(m: usize) -> Grid1D {
        Grid1D::new(0.0, 6.0, m, BoundaryKind::Dirichlet).unwrap()
    }

    #[test]
    fn rhs_zero_state_zero_bc() {
        let g = grid(39);
        let u = Field::zeros(g);
        let r = nlh_rhs(&u, 0.3, &NlhBoundary::zero()).unwrap();
        assert_eq!(r.max_norm(), 0.0);
    }

    #[test]
    fn rhs_constant_state_matching_bc() {
        let g = grid(39);
        let c = 1.7;
        let u = Field::constant(c, g);
        let bc = NlhBoundary::new(
            Arc::new(move |_| c),
            Arc::new(move |_| c),
            Arc::new(|_| 0.0),
            Arc::new(|_| 0.0),
        );
        let r = nlh_rhs(&u, 0.0, &bc).unwrap();
        assert!(r.max_norm() < 1e-10, "{}", r.max_norm());
    }

    #[test]
    fn rhs_matches_symbolic_on_smooth_profile() {
        // u = sin(pi x / 6) + 2 with matching boundary data:
        // A(u) ~ (u^2/2)_xx = (u')^2 + u u''
        let erru = |m: usize| {
            let g = grid(m);
            let f = |x: f64| (std::f64::consts::PI * x / 6.0).sin() + 2.0;
            let fp = |x: f64| (std::f64::consts::PI / 6.0) * (std::f64::consts::PI * x / 6.0).cos();
            let fpp =
                |x: f64| -(std::f64::consts::PI / 6.0).powi(2) * (std::f64::consts::PI * x / 6.0).sin();
            let u = g.sample(f);
            let bc = NlhBoundary::new(
                Arc::new(move |_| f(0.0)),
                Arc::new(move |_| f(6.0)),
                Arc::new(|_| 0.0),
                Arc::new(|_| 0.0),
            );
            let r = nlh_rhs(&u, 0.0, &bc).unwrap();
            r.values()
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    let x = g.node(i);
                    (v - (fp(x) * fp(x) + f(x) * fpp(x))).abs()
                })
                .fold(0.0f64, f64::max)
        };
        let (e1, e2) = (erru(59), erru(119));
        let ratio = e1 / e2;
        assert!((3.0..5.0).contains(&ratio), "second order in dx: {ratio}");
    }

    #[test]
    fn zero_state_zero_bc_step_stays_zero() {
        let g = grid(39);
        let s = CsScheme::new(g, NlhBoundary::zero()).unwrap();
        let u = Field::zeros(g);
        for lambda in [0.0, 0.01, -0.01] {
            let v = s.step(&u, 0.0, 0.1, &[lambda]).unwrap();
            assert_eq!(v.max_norm(), 0.0);
        }
    }

    #[test]
    fn step_satisfies_scheme_equations() {
        // residual of (explNLH) with true boundary ghosts vanishes
        let g = grid(59);
        let s = CsScheme::new(g, wave_bc()).unwrap();
        let u = g.sample(|x| if x < 1.0 { 1.0 - x } else { 0.0 });
        let (t, dt, lambda) = (1.0, 0.12, -0.01);
        let v = s.step(&u, t, dt, &[lambda]).unwrap();

        let dx2 = g.dx * g.dx;
        let ghosts = |w: &[f64], tt: f64, i: isize| -> f64 {
            if i < 0 {
                (s.bc.phi_l)(tt)
            } else if i as usize >= w.len() {
                (s.bc.phi_r)(tt)
            } else {
                w[i as usize]
            }
        };
        let n = u.len();
        for i in 0..n as isize {
            let d2 = |w: &[f64], tt: f64| {
                (ghosts(w, tt, i + 1) - 2.0 * ghosts(w, tt, i) + ghosts(w, tt, i - 1)) / dx2
            };
            let lhs = (ghosts(v.values(), t + dt, i) - ghosts(u.values(), t, i)) / dt
                + lambda * (d2(v.values(), t + dt) - d2(u.values(), t)) / dt;
            let prod: Vec<f64> =
                u.values().iter().zip(v.values()).map(|(a, b)| a * b).collect();
            let pl = (s.bc.phi_l)(t) * (s.bc.phi_l)(t + dt);
            let pr = (s.bc.phi_r)(t) * (s.bc.phi_r)(t + dt);
            let rhs = 0.5
                * ((if i + 1 < n as isize { prod[(i + 1) as usize] } else { pr })
                    - 2.0 * prod[i as usize]
                    + (if i > 0 { prod[(i - 1) as usize] } else { pl }))
                / dx2;
            assert!((lhs - rhs).abs() < 1e-9, "node {i}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn dtphi_matches_time_finite_difference() {
        let g = grid(119);
        let s = CsScheme::new(g, wave_bc()).unwrap();
        // a developed wave state
        let u = g.sample(|x| if x < 1.5 { 1.5 - x } else { 0.0 });
        let (t, dt, lambda) = (1.5, 0.12, -0.009);
        let v = s.step(&u, t, dt, &[lambda]).unwrap();
        let dp = s.dt_phi(&u, &v, t, dt, &[lambda]).unwrap();
        let mut errs = Vec::new();
        for h in [1e-3, 5e-4] {
            let vp = s.step(&u, t, dt + h, &[lambda]).unwrap();
            let vm = s.step(&u, t, dt - h, &[lambda]).unwrap();
            let e = (0..u.len())
                .map(|i| {
                    let fd = (vp.values()[i] - vm.values()[i]) / (2.0 * h);
                    (dp.values()[i] - fd).abs()
                })
                .fold(0.0f64, f64::max);
            errs.push(e);
        }
        let ratio = errs[0] / errs[1];
        assert!(ratio > 3.0 && ratio < 5.0, "O(h^2): {errs:?}");
    }

    #[test]
    fn dtphi_against_dense_oracle_on_constant_state() {
        // constant state c with constant boundary c: assemble the dense
        // tridiagonal system by hand and compare solutions
        let g = grid(19);
        let c = 1.3;
        let bc = NlhBoundary::new(
            Arc::new(move |_| c),
            Arc::new(move |_| c),
            Arc::new(|_| 0.0),
            Arc::new(|_| 0.0),
        );
        let s = CsScheme::new(g, bc).unwrap();
        let u = Field::constant(c, g);
        let (t, dt, lambda) = (0.0, 0.1, 0.004);
        let v = s.step(&u, t, dt, &[lambda]).unwrap();
        let y = s.dt_phi(&u, &v, t, dt, &[lambda]).unwrap();

        let n = u.len();
        let dx2 = g.dx * g.dx;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            a[i * n + i] = 1.0 - 2.0 * lambda / dx2 + dt * c / dx2;
            if i + 1 < n {
                a[i * n + i + 1] = lambda / dx2 - 0.5 * dt * c / dx2;
                a[(i + 1) * n + i] = lambda / dx2 - 0.5 * dt * c / dx2;
            }
        }
        let prod: Vec<f64> = u.values().iter().zip(v.values()).map(|(x, w)| x * w).collect();
        let mut rhs = d2hat(&prod, g.dx).iter().map(|x| 0.5 * x).collect::<Vec<_>>();
        rhs[0] += c * c / (2.0 * dx2);
        rhs[n - 1] += c * c / (2.0 * dx2);
        let expect = crate::band::dense_solve(n, &mut a, &mut rhs).unwrap();
        for (a, b) in y.values().iter().zip(&expect) {
            assert!((a - b).abs() < 1e-11);
        }
    }

    #[test]
    fn local_laws_telescope_on_fixed_lambda_steps() {
        let g = grid(119);
        let s = CsScheme::new(g, wave_bc()).unwrap();
        let mut u = Field::zeros(g);
        let (dt, lambda) = (0.12, -0.0096);
        let mut worst = [0.0f64; 2];
        for n in 0..10 {
            let t = n as f64 * dt;
            let v = s.step(&u, t, dt, &[lambda]).unwrap();
            for k in 1..=2 {
                let lt = s.local_terms(k, &u, &v, t, dt, &[lambda]).unwrap();
                let dg: f64 = lt
                    .density_np1
                    .values()
                    .iter()
                    .zip(lt.density_n.values())
                    .map(|(b, a)| (b - a) / dt)
                    .sum();
                let resid = (lt.flux_right - lt.flux_left) + g.dx * dg;
                worst[k - 1] = worst[k - 1].max(resid.abs());
            }
            u = v;
        }
        assert!(worst[0] < 1e-10, "mass law residual {}", worst[0]);
        assert!(worst[1] < 1e-10, "x-moment law residual {}", worst[1]);
    }

    #[test]
    fn coarsened_scheme_shares_boundary_data() {
        let g = grid(119);
        let s = CsScheme::new(g, wave_bc()).unwrap();
        let c = s.coarsened(4).unwrap();
        assert_eq!(c.grid().m, 29);
        assert_eq!(c.grid().dx, 4.0 * g.dx);
        // boundary still drives the coarse step
        let u = Field::zeros(*c.grid());
        let v = c.step(&u, 1.0, 0.12, &[-0.01]).unwrap();
        assert!(v.max_norm() > 0.0);
    }
}
