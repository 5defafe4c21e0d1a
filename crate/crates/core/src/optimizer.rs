//! Gauss-Newton / trust-region minimization of the squared defect norm, and
//! the two driver algorithms: adaptive per-step parameters and averaged
//! fixed parameters.
//!
//! The optimization always runs on a coarse subgrid (factor `r`); only the
//! accepted parameters drive the full-grid step.

use std::time::{Duration, Instant};

use crate::band::dense_solve;
use crate::defect::{defect, default_fd_step, param_jacobian};
use crate::error::SchemeError;
use crate::grid::{project_coarse, Field, Grid1D};
use crate::scheme::{ParamBox, ParamVector, Scheme};

/// Settings of the per-step parameter search.
#[derive(Clone, Copy, Debug)]
pub struct OptimizerConfig {
    /// Stop when the parameter update drops below this (max norm).
    pub tol: f64,
    /// Optional secondary stop on the gradient norm; `0.0` disables it.
    pub grad_tol: f64,
    pub max_iter: usize,
    /// Coarsening factor of the optimization grid.
    pub r: usize,
    /// Initial trust radius; `None` picks `dt^2/10`.
    pub initial_radius: Option<f64>,
    /// Use the trust region on every step (it is always used at `n = 0`).
    pub use_trust_region: bool,
    /// Step of the central-difference parameter Jacobian;
    /// `None` picks `max(1e-7, 1e-4 dt^2)`.
    pub fd_step: Option<f64>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            grad_tol: 0.0,
            max_iter: 20,
            r: 1,
            initial_radius: None,
            use_trust_region: false,
            fd_step: None,
        }
    }
}

impl OptimizerConfig {
    pub fn with_r(mut self, r: usize) -> Self {
        self.r = r;
        self
    }

    fn radius0(&self, dt: f64) -> f64 {
        self.initial_radius.unwrap_or(dt * dt / 10.0)
    }

    fn h(&self, dt: f64) -> f64 {
        self.fd_step.unwrap_or_else(|| default_fd_step(dt))
    }
}

/// Outcome of one per-step parameter search.
#[derive(Clone, Debug)]
pub struct StepOptResult {
    pub chi_star: ParamVector,
    pub iterations: usize,
    /// Defect norm at the last evaluated iterate.
    pub final_defect_norm: f64,
    pub clamped: bool,
    pub converged: bool,
    /// Trust radius to carry into the next step.
    pub radius: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Gradient `g = J^T R` and Gauss-Newton Hessian `H = J^T J` (row-major).
fn grad_hessian(defect: &[f64], cols: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let k = cols.len();
    let g: Vec<f64> = cols.iter().map(|c| dot(c, defect)).collect();
    let mut h = vec![0.0; k * k];
    for i in 0..k {
        for j in i..k {
            let v = dot(&cols[i], &cols[j]);
            h[i * k + j] = v;
            h[j * k + i] = v;
        }
    }
    (g, h)
}

/// Condition number of the small symmetric `H` (K <= 2).
fn sym_condition(k: usize, h: &[f64]) -> f64 {
    match k {
        0 => 1.0,
        1 => {
            if h[0].abs() == 0.0 {
                f64::INFINITY
            } else {
                1.0
            }
        }
        2 => {
            let (a, b, d) = (h[0], h[1], h[3]);
            let tr = a + d;
            let disc = ((a - d) * (a - d) + 4.0 * b * b).sqrt();
            let l1 = 0.5 * (tr + disc);
            let l2 = 0.5 * (tr - disc);
            if l2.abs() == 0.0 {
                f64::INFINITY
            } else {
                (l1 / l2).abs()
            }
        }
        _ => {
            // generic bound via Gershgorin is enough here
            f64::INFINITY
        }
    }
}

/// One Gauss-Newton update `chi - H^{-1} g`, clamped into `omega`.
///
/// A near-singular Hessian (condition above 1e12) falls back to a gradient
/// step of length `fallback_radius`; `g = 0` leaves `chi` unchanged.
pub fn gn_step(
    defect: &[f64],
    jacobian_cols: &[Vec<f64>],
    chi: &[f64],
    omega: &ParamBox,
    fallback_radius: f64,
) -> ParamVector {
    let k = chi.len();
    let (g, mut h) = grad_hessian(defect, jacobian_cols);
    let gnorm = norm(&g);
    if gnorm == 0.0 {
        return ParamVector::new(chi.to_vec());
    }
    let step: Vec<f64> = if sym_condition(k, &h) > 1e12 {
        g.iter().map(|x| -x / gnorm * fallback_radius).collect()
    } else {
        let mut rhs = g.clone();
        match dense_solve(k, &mut h, &mut rhs) {
            Ok(d) => d.iter().map(|x| -x).collect(),
            Err(_) => g.iter().map(|x| -x / gnorm * fallback_radius).collect(),
        }
    };
    let mut out = ParamVector::new(chi.iter().zip(&step).map(|(c, s)| c + s).collect());
    out.clamp_to(omega);
    out
}

/// Dogleg step of the Gauss-Newton model within `radius`.
fn dogleg(g: &[f64], h: &[f64], radius: f64) -> Vec<f64> {
    let k = g.len();
    let gnorm = norm(g);
    if gnorm == 0.0 {
        return vec![0.0; k];
    }
    let ghg = {
        let mut acc = 0.0;
        for i in 0..k {
            for j in 0..k {
                acc += g[i] * h[i * k + j] * g[j];
            }
        }
        acc
    };
    // Cauchy point
    let pu: Vec<f64> = if ghg > 0.0 {
        let tau = gnorm * gnorm / ghg;
        g.iter().map(|x| -tau * x).collect()
    } else {
        g.iter().map(|x| -radius / gnorm * x).collect()
    };
    // Newton point, if available
    let pn: Option<Vec<f64>> = if sym_condition(k, h) <= 1e12 {
        let mut hm = h.to_vec();
        let mut rhs = g.to_vec();
        dense_solve(k, &mut hm, &mut rhs).ok().map(|d| d.iter().map(|x| -x).collect())
    } else {
        None
    };
    if let Some(pn) = pn {
        if norm(&pn) <= radius {
            return pn;
        }
        let pu_norm = norm(&pu);
        if pu_norm >= radius {
            return pu.iter().map(|x| x * radius / pu_norm).collect();
        }
        // walk the dogleg segment pu -> pn out to the radius
        let d: Vec<f64> = pn.iter().zip(&pu).map(|(a, b)| a - b).collect();
        let (aa, bb, cc) =
            (dot(&d, &d), 2.0 * dot(&pu, &d), dot(&pu, &pu) - radius * radius);
        let tau = (-bb + (bb * bb - 4.0 * aa * cc).max(0.0).sqrt()) / (2.0 * aa);
        pu.iter().zip(&d).map(|(b, dd)| b + tau.clamp(0.0, 1.0) * dd).collect()
    } else {
        let pu_norm = norm(&pu);
        if pu_norm > radius {
            pu.iter().map(|x| x * radius / pu_norm).collect()
        } else {
            pu
        }
    }
}

/// Trust-region Gauss-Newton search, used for the first time-step where the
/// initial guess may sit far from the optimum.
///
/// A candidate is accepted when the actual-to-predicted reduction ratio is
/// at least 0.1; the radius doubles after a ratio above 0.75 on a boundary
/// step and shrinks by 4 on rejection. Step-evaluation failures at a
/// candidate count as ratio zero.
pub fn trust_region_solve(
    scheme: &dyn Scheme,
    dt: f64,
    u_n: &Field,
    chi0: &ParamVector,
    radius0: f64,
    t_n: f64,
    cfg: &OptimizerConfig,
) -> StepOptResult {
    let omega = scheme.param_box(dt);
    let h = cfg.h(dt);
    let mut chi = chi0.clone();
    chi.clamp_to(&omega);
    let mut radius = radius0;
    let mut clamped = chi.clamped;

    let eval = |c: &[f64]| defect(scheme, dt, u_n, c, t_n);
    let mut current = match eval(&chi.values) {
        Ok(rep) => rep,
        Err(_) => {
            return StepOptResult {
                chi_star: chi,
                iterations: 0,
                final_defect_norm: f64::INFINITY,
                clamped,
                converged: false,
                radius,
            }
        }
    };

    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iter {
        iterations += 1;
        let cols = match param_jacobian(scheme, dt, u_n, &chi.values, t_n, h) {
            Ok(c) => c,
            Err(_) => {
                radius *= 0.25;
                continue;
            }
        };
        let (g, hmat) = grad_hessian(current.defect.values(), &cols);
        let gnorm = norm(&g);
        if gnorm == 0.0 || (cfg.grad_tol > 0.0 && gnorm < cfg.grad_tol) {
            converged = true;
            break;
        }

        let p = dogleg(&g, &hmat, radius);
        let mut cand = ParamVector::new(chi.values.iter().zip(&p).map(|(c, s)| c + s).collect());
        cand.clamp_to(&omega);
        let d: Vec<f64> = cand.values.iter().zip(&chi.values).map(|(a, b)| a - b).collect();
        let dnorm = norm(&d);
        let predicted = {
            let mut hd = vec![0.0; d.len()];
            for i in 0..d.len() {
                for j in 0..d.len() {
                    hd[i] += hmat[i * d.len() + j] * d[j];
                }
            }
            -(dot(&g, &d) + 0.5 * dot(&d, &hd))
        };

        let trial = eval(&cand.values);
        let f0 = 0.5 * current.defect_norm * current.defect_norm;
        let ratio = match &trial {
            Ok(rep) if predicted > 0.0 => {
                let f1 = 0.5 * rep.defect_norm * rep.defect_norm;
                (f0 - f1) / predicted
            }
            _ => 0.0,
        };

        let hit_boundary = dnorm >= 0.99 * radius;
        if ratio >= 0.1 {
            clamped |= cand.clamped;
            chi = ParamVector { values: cand.values, clamped };
            current = trial.expect("accepted candidate evaluated");
            if ratio >= 0.75 && hit_boundary {
                radius *= 2.0;
            }
            if dnorm < cfg.tol {
                converged = true;
                break;
            }
        } else {
            radius *= 0.25;
            if radius < 1e-15 * (1.0 + norm(&chi.values)) {
                converged = true;
                break;
            }
        }
    }

    StepOptResult {
        final_defect_norm: current.defect_norm,
        chi_star: chi,
        iterations: iterations.max(1),
        clamped,
        converged,
        radius,
    }
}

/// Warm-started plain Gauss-Newton iteration (no trust region), the cheap
/// path for steps after the first. Runs at least one iteration, then stops
/// when the update falls below `tol`. Non-convergence is non-fatal: the
/// best iterate found is returned flagged.
pub fn optimize_step(
    scheme: &dyn Scheme,
    dt: f64,
    u_n_coarse: &Field,
    chi_prev: &ParamVector,
    t_n: f64,
    cfg: &OptimizerConfig,
) -> StepOptResult {
    let omega = scheme.param_box(dt);
    let h = cfg.h(dt);
    let radius = cfg.radius0(dt);
    let mut chi = chi_prev.clone();
    chi.clamp_to(&omega);
    let mut clamped = chi.clamped;

    let mut best: Option<(ParamVector, f64)> = None;
    let mut last_norm = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < cfg.max_iter {
        iterations += 1;
        let rep = match defect(scheme, dt, u_n_coarse, &chi.values, t_n) {
            Ok(r) => r,
            Err(_) => break,
        };
        last_norm = rep.defect_norm;
        if best.as_ref().map_or(true, |(_, b)| rep.defect_norm < *b) {
            best = Some((chi.clone(), rep.defect_norm));
        }
        let cols = match param_jacobian(scheme, dt, u_n_coarse, &chi.values, t_n, h) {
            Ok(c) => c,
            Err(_) => break,
        };
        let (g, _) = grad_hessian(rep.defect.values(), &cols);
        if norm(&g) == 0.0 || (cfg.grad_tol > 0.0 && norm(&g) < cfg.grad_tol) {
            converged = true;
            break;
        }
        let next = gn_step(rep.defect.values(), &cols, &chi.values, &omega, radius);
        let delta = next
            .values
            .iter()
            .zip(&chi.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        clamped |= next.clamped;
        chi = ParamVector { values: next.values, clamped };
        if delta < cfg.tol {
            converged = true;
            break;
        }
    }

    if !converged {
        if let Some((best_chi, best_norm)) = best {
            return StepOptResult {
                chi_star: ParamVector { values: best_chi.values, clamped },
                iterations,
                final_defect_norm: best_norm,
                clamped,
                converged: false,
                radius,
            };
        }
    }
    StepOptResult {
        chi_star: chi,
        iterations: iterations.max(1),
        final_defect_norm: last_norm,
        clamped,
        converged,
        radius,
    }
}

/// Largest divisor `r` of `M + 1` with `r < dt/dx` that still leaves a
/// usable coarse grid.
pub fn suggest_r(grid: &Grid1D, dt: f64) -> usize {
    let nodes = grid.m + 1;
    let limit = dt / grid.dx;
    let mut best = 1;
    for r in 1..=nodes {
        if nodes % r == 0 && (r as f64) < limit && nodes / r >= 6 {
            best = r;
        }
    }
    best
}

/// Full record of one run: trajectory, parameter sequence, per-step defect
/// norms and timing split into total and optimizer-only parts.
#[derive(Clone, Debug)]
pub struct RunRecord {
    pub trajectory: Vec<Field>,
    pub dt: f64,
    pub chi_sequence: Vec<ParamVector>,
    /// Average parameters of the averaged algorithm.
    pub chi_bar: Option<ParamVector>,
    /// Parameters of a fixed-parameter run.
    pub fixed_chi: Option<ParamVector>,
    pub defect_norms: Vec<f64>,
    pub optimizer_iterations: Vec<usize>,
    pub clamp_events: usize,
    pub wall_time: Duration,
    pub optimizer_time: Duration,
}

impl RunRecord {
    fn empty(u0: &Field, dt: f64) -> Self {
        Self {
            trajectory: vec![u0.clone()],
            dt,
            chi_sequence: Vec::new(),
            chi_bar: None,
            fixed_chi: None,
            defect_norms: Vec::new(),
            optimizer_iterations: Vec::new(),
            clamp_events: 0,
            wall_time: Duration::ZERO,
            optimizer_time: Duration::ZERO,
        }
    }

    pub fn final_state(&self) -> &Field {
        self.trajectory.last().expect("trajectory never empty")
    }

    pub fn steps(&self) -> usize {
        self.trajectory.len() - 1
    }

    pub fn time_at(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }

    /// Parameters the conservation-law densities are evaluated with: the
    /// run's own fixed (or averaged) values, zeros for adaptive sequences.
    pub fn diagnostic_chi(&self, param_dim: usize) -> Vec<f64> {
        if let Some(chi) = &self.fixed_chi {
            chi.values.clone()
        } else if let Some(chi) = &self.chi_bar {
            chi.values.clone()
        } else {
            vec![0.0; param_dim]
        }
    }
}

/// A run that failed part-way, with everything computed so far.
#[derive(Debug)]
pub struct RunFailure {
    pub error: SchemeError,
    pub partial: RunRecord,
}

pub type RunResult = Result<RunRecord, Box<RunFailure>>;

fn fail(error: SchemeError, partial: RunRecord) -> RunResult {
    Err(Box::new(RunFailure { error, partial }))
}

/// Fixed-parameter time integration.
pub fn run_fixed(
    scheme: &dyn Scheme,
    u0: &Field,
    dt: f64,
    n_steps: usize,
    chi: &[f64],
) -> RunResult {
    let start = Instant::now();
    let mut record = RunRecord::empty(u0, dt);
    record.fixed_chi = Some(ParamVector::new(chi.to_vec()));
    let mut u = u0.clone();
    for n in 0..n_steps {
        let t = n as f64 * dt;
        match scheme.step(&u, t, dt, chi) {
            Ok(next) => {
                u = next;
                record.trajectory.push(u.clone());
            }
            Err(e) => {
                record.wall_time = start.elapsed();
                return fail(e, record);
            }
        }
    }
    record.wall_time = start.elapsed();
    Ok(record)
}

/// Algorithm: adaptive per-step parameters. At each step the state is
/// projected onto the coarse grid, the parameters are optimized there
/// (trust region at `n = 0`, warm-started Gauss-Newton afterwards), and the
/// full-grid step is taken with the result.
pub fn algorithm1_adaptive(
    scheme: &dyn Scheme,
    u0: &Field,
    dt: f64,
    n_steps: usize,
    cfg: &OptimizerConfig,
) -> RunResult {
    let start = Instant::now();
    let mut record = RunRecord::empty(u0, dt);
    let coarse = match scheme.coarsened(cfg.r) {
        Ok(c) => c,
        Err(e) => return fail(e, record),
    };
    let mut chi = ParamVector::zeros(scheme.param_dim());
    let mut radius = cfg.radius0(dt);
    let mut opt_time = Duration::ZERO;
    let mut u = u0.clone();

    for n in 0..n_steps {
        let t = n as f64 * dt;
        let u_coarse = match project_coarse(&u, cfg.r) {
            Ok(p) => p,
            Err(e) => {
                record.wall_time = start.elapsed();
                record.optimizer_time = opt_time;
                return fail(SchemeError::Grid(e), record);
            }
        };
        let t0 = Instant::now();
        let res = if n == 0 || cfg.use_trust_region {
            trust_region_solve(coarse.as_ref(), dt, &u_coarse, &chi, radius, t, cfg)
        } else {
            optimize_step(coarse.as_ref(), dt, &u_coarse, &chi, t, cfg)
        };
        opt_time += t0.elapsed();

        chi = res.chi_star.clone();
        radius = res.radius;
        record.clamp_events += res.clamped as usize;
        record.defect_norms.push(res.final_defect_norm);
        record.optimizer_iterations.push(res.iterations);
        record.chi_sequence.push(res.chi_star);

        match scheme.step(&u, t, dt, &chi.values) {
            Ok(next) => {
                u = next;
                record.trajectory.push(u.clone());
            }
            Err(e) => {
                record.wall_time = start.elapsed();
                record.optimizer_time = opt_time;
                return fail(e, record);
            }
        }
    }
    record.wall_time = start.elapsed();
    record.optimizer_time = opt_time;
    Ok(record)
}

/// Algorithm: averaged fixed parameters. Pass one evolves entirely on the
/// coarse grid collecting per-step optima; pass two reruns the full grid
/// with their average. The coarse trajectory is discarded.
pub fn algorithm2_fixed(
    scheme: &dyn Scheme,
    u0: &Field,
    dt: f64,
    n_steps: usize,
    cfg: &OptimizerConfig,
) -> RunResult {
    let start = Instant::now();
    let mut record = RunRecord::empty(u0, dt);
    let coarse = match scheme.coarsened(cfg.r) {
        Ok(c) => c,
        Err(e) => return fail(e, record),
    };
    let mut u_hat = match project_coarse(u0, cfg.r) {
        Ok(p) => p,
        Err(e) => return fail(SchemeError::Grid(e), record),
    };
    let mut chi = ParamVector::zeros(scheme.param_dim());
    let mut radius = cfg.radius0(dt);
    let mut opt_time = Duration::ZERO;

    for n in 0..n_steps {
        let t = n as f64 * dt;
        let t0 = Instant::now();
        let res = if n == 0 || cfg.use_trust_region {
            trust_region_solve(coarse.as_ref(), dt, &u_hat, &chi, radius, t, cfg)
        } else {
            optimize_step(coarse.as_ref(), dt, &u_hat, &chi, t, cfg)
        };
        opt_time += t0.elapsed();

        chi = res.chi_star.clone();
        radius = res.radius;
        record.clamp_events += res.clamped as usize;
        record.defect_norms.push(res.final_defect_norm);
        record.optimizer_iterations.push(res.iterations);
        record.chi_sequence.push(res.chi_star);

        match coarse.step(&u_hat, t, dt, &chi.values) {
            Ok(next) => u_hat = next,
            Err(e) => {
                record.wall_time = start.elapsed();
                record.optimizer_time = opt_time;
                return fail(e, record);
            }
        }
    }

    let k = scheme.param_dim();
    let mut bar = vec![0.0; k];
    for c in &record.chi_sequence {
        for (b, v) in bar.iter_mut().zip(&c.values) {
            *b += v;
        }
    }
    if n_steps > 0 {
        for b in bar.iter_mut() {
            *b /= n_steps as f64;
        }
    }
    record.chi_bar = Some(ParamVector::new(bar.clone()));

    let mut u = u0.clone();
    for n in 0..n_steps {
        let t = n as f64 * dt;
        match scheme.step(&u, t, dt, &bar) {
            Ok(next) => {
                u = next;
                record.trajectory.push(u.clone());
            }
            Err(e) => {
                record.wall_time = start.elapsed();
                record.optimizer_time = opt_time;
                return fail(e, record);
            }
        }
    }
    record.wall_time = start.elapsed();
    record.optimizer_time = opt_time;
    Ok(record)
}
