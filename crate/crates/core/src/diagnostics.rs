//! Error metrics: relative solution error, local conservation-law errors
//! (Dirichlet form) and global-invariant drift (periodic form).

use crate::grid::{BoundaryKind, Field};
use crate::optimizer::RunRecord;
use crate::scheme::Scheme;

/// Relative discrete-L2 error against a reference profile; falls back to
/// the absolute norm (flagged) when the reference vanishes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RelativeError {
    pub value: f64,
    pub absolute: bool,
}

pub fn relative_l2_error(u: &Field, exact: impl Fn(f64) -> f64) -> RelativeError {
    let grid = u.grid();
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, v) in u.values().iter().enumerate() {
        let e = exact(grid.node(i));
        num += (v - e) * (v - e);
        den += e * e;
    }
    if den == 0.0 {
        RelativeError { value: (grid.dx * num).sqrt(), absolute: true }
    } else {
        RelativeError { value: (num / den).sqrt(), absolute: false }
    }
}

/// One conservation-law error together with the step that attains it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LawError {
    pub value: f64,
    pub worst_step: usize,
}

/// Global-invariant drift (periodic form):
/// `Err_k = dx * max_n |1^T (G_k(u_n) - G_k(u_0))|`.
pub fn conservation_error_global(
    record: &RunRecord,
    k: usize,
    scheme: &dyn Scheme,
) -> Option<LawError> {
    let chi = record.diagnostic_chi(scheme.param_dim());
    let dx = scheme.grid().dx;
    let g0: f64 = scheme.global_density(k, &record.trajectory[0], &chi)?.iter().sum();
    let mut worst = LawError { value: 0.0, worst_step: 0 };
    for (n, u) in record.trajectory.iter().enumerate().skip(1) {
        let gn: f64 = scheme.global_density(k, u, &chi)?.iter().sum();
        let drift = dx * (gn - g0).abs();
        if drift > worst.value {
            worst = LawError { value: drift, worst_step: n };
        }
    }
    Some(worst)
}

/// Local conservation error (Dirichlet form): the worst over steps of the
/// telescoped law `|(F_{M+1} - F_1) + dx * 1^T D_dt G|`.
pub fn conservation_error_local(
    record: &RunRecord,
    k: usize,
    scheme: &dyn Scheme,
) -> Option<LawError> {
    let chi = record.diagnostic_chi(scheme.param_dim());
    let dx = scheme.grid().dx;
    let dt = record.dt;
    let mut worst = LawError { value: 0.0, worst_step: 0 };
    for n in 0..record.steps() {
        let terms = scheme.local_terms(
            k,
            &record.trajectory[n],
            &record.trajectory[n + 1],
            record.time_at(n),
            dt,
            &chi,
        )?;
        let dg: f64 = terms
            .density_np1
            .values()
            .iter()
            .zip(terms.density_n.values())
            .map(|(b, a)| (b - a) / dt)
            .sum();
        let resid = ((terms.flux_right - terms.flux_left) + dx * dg).abs();
        if resid > worst.value {
            worst = LawError { value: resid, worst_step: n + 1 };
        }
    }
    Some(worst)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConservationMode {
    LocalDirichlet,
    GlobalPeriodic,
}

/// Conservation errors of every law the scheme defines, in the metric
/// matching the grid's boundary kind.
#[derive(Clone, Debug)]
pub struct ConservationReport {
    pub mode: ConservationMode,
    /// `errors[k-1]` is law `k`; `None` when the scheme lacks the law.
    pub errors: Vec<Option<LawError>>,
}

pub fn conservation_report(record: &RunRecord, scheme: &dyn Scheme) -> ConservationReport {
    let mode = match scheme.grid().boundary {
        BoundaryKind::Periodic => ConservationMode::GlobalPeriodic,
        BoundaryKind::Dirichlet | BoundaryKind::Zero => ConservationMode::LocalDirichlet,
    };
    let errors = (1..=scheme.law_count())
        .map(|k| match mode {
            ConservationMode::GlobalPeriodic => conservation_error_global(record, k, scheme),
            ConservationMode::LocalDirichlet => conservation_error_local(record, k, scheme),
        })
        .collect();
    ConservationReport { mode, errors }
}
