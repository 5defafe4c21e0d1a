//! Uniform 1-D grid, nodal fields and the discrete operator algebra.
//!
//! Nodes are `x_m = a + m*dx` with `dx = (b - a)/(M + 1)`. Periodic fields
//! store the `M + 1` distinct nodes `m = 0..=M`; Dirichlet fields store the
//! interior nodes `m = 1..=M` only, with boundary values supplied through a
//! [`BoundaryContext`] at evaluation time.

use crate::error::GridError;

/// Boundary treatment of a grid.
///
/// `Zero` is Dirichlet with both boundary functions identically zero, so
/// operators never need an evaluation context for it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryKind {
    Periodic,
    Dirichlet,
    Zero,
}

/// Uniform 1-D grid on `[a, b]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid1D {
    pub a: f64,
    pub b: f64,
    /// Interior-node count parameter; `dx = (b - a)/(M + 1)`.
    pub m: usize,
    pub dx: f64,
    pub boundary: BoundaryKind,
}

impl Grid1D {
    /// Build a grid from its node-count parameter `M`.
    ///
    /// The widest stencil in use (`D_{4,dx}`) needs five points, so `M >= 4`.
    pub fn new(a: f64, b: f64, m: usize, boundary: BoundaryKind) -> Result<Self, GridError> {
        if !(b > a) {
            return Err(GridError::EmptyDomain { a, b });
        }
        if m < 4 {
            return Err(GridError::TooFewNodes { m });
        }
        let dx = (b - a) / (m as f64 + 1.0);
        Ok(Self { a, b, m, dx, boundary })
    }

    /// Grid with spacing (as close as representable to) `dx`.
    pub fn with_spacing(a: f64, b: f64, dx: f64, boundary: BoundaryKind) -> Result<Self, GridError> {
        let cells = ((b - a) / dx).round() as usize;
        if cells < 5 {
            return Err(GridError::TooFewNodes { m: cells.saturating_sub(1) });
        }
        Self::new(a, b, cells - 1, boundary)
    }

    /// Number of values a field on this grid stores.
    pub fn len(&self) -> usize {
        match self.boundary {
            BoundaryKind::Periodic => self.m + 1,
            BoundaryKind::Dirichlet | BoundaryKind::Zero => self.m,
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinate of the node backing entry `i` of a field.
    pub fn node(&self, i: usize) -> f64 {
        match self.boundary {
            BoundaryKind::Periodic => self.a + self.dx * i as f64,
            BoundaryKind::Dirichlet | BoundaryKind::Zero => self.a + self.dx * (i + 1) as f64,
        }
    }

    /// All node coordinates, in field order.
    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.node(i)).collect()
    }

    /// Subgrid with spacing `r*dx`; requires `r` to divide `M + 1`.
    pub fn coarsened(&self, r: usize) -> Result<Grid1D, GridError> {
        if r == 0 || (self.m + 1) % r != 0 {
            return Err(GridError::CoarseFactor { r, nodes: self.m + 1 });
        }
        Grid1D::new(self.a, self.b, (self.m + 1) / r - 1, self.boundary)
    }

    /// Sample a function of `x` at the grid nodes.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            values: (0..self.len()).map(|i| f(self.node(i))).collect(),
            grid: *self,
        }
    }
}

/// Ghost-value context for Dirichlet stencils: the boundary functions and the
/// time at which they are evaluated.
pub struct BoundaryContext<'a> {
    pub left: &'a dyn Fn(f64) -> f64,
    pub right: &'a dyn Fn(f64) -> f64,
    pub time: f64,
}

impl<'a> BoundaryContext<'a> {
    fn left_value(&self) -> f64 {
        (self.left)(self.time)
    }
    fn right_value(&self) -> f64 {
        (self.right)(self.time)
    }
}

/// Nodal values of a scalar field on a [`Grid1D`].
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    values: Vec<f64>,
    grid: Grid1D,
}

impl Field {
    pub fn new(values: Vec<f64>, grid: Grid1D) -> Result<Self, GridError> {
        if values.len() != grid.len() {
            return Err(GridError::LengthMismatch { expected: grid.len(), got: values.len() });
        }
        Ok(Self { values, grid })
    }

    pub fn zeros(grid: Grid1D) -> Self {
        Self { values: vec![0.0; grid.len()], grid }
    }

    pub fn constant(c: f64, grid: Grid1D) -> Self {
        Self { values: vec![c; grid.len()], grid }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.values.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Discrete L2 norm `sqrt(dx * sum v_m^2)`.
    pub fn l2_norm(&self) -> f64 {
        (self.grid.dx * self.values.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    pub fn max_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
    }

    /// Entry at signed index `i`, resolving out-of-range indices by the
    /// grid's boundary rule.
    fn entry(&self, i: isize, ctx: Option<&BoundaryContext>) -> Result<f64, GridError> {
        let n = self.values.len() as isize;
        if (0..n).contains(&i) {
            return Ok(self.values[i as usize]);
        }
        match self.grid.boundary {
            BoundaryKind::Periodic => Ok(self.values[i.rem_euclid(n) as usize]),
            BoundaryKind::Zero => Ok(0.0),
            BoundaryKind::Dirichlet => {
                let ctx = ctx.ok_or(GridError::MissingBoundaryContext)?;
                Ok(if i < 0 { ctx.left_value() } else { ctx.right_value() })
            }
        }
    }

    fn map_stencil(
        &self,
        ctx: Option<&BoundaryContext>,
        f: impl Fn(&dyn Fn(isize) -> f64, usize) -> f64,
    ) -> Result<Field, GridError> {
        let err = std::cell::Cell::new(None);
        let mut out = Vec::with_capacity(self.values.len());
        for m in 0..self.values.len() as isize {
            let get = |k: isize| match self.entry(m + k, ctx) {
                Ok(v) => v,
                Err(e) => {
                    err.set(Some(e));
                    f64::NAN
                }
            };
            let v = f(&get, m as usize);
            if let Some(e) = err.get() {
                return Err(e);
            }
            out.push(v);
        }
        Ok(Field { values: out, grid: self.grid })
    }
}

/// `(S^k f)_m = f_{m+k}`; periodic wrap or boundary substitution for
/// out-of-range indices. `|k| <= 3`.
pub fn shift(f: &Field, k: isize, ctx: Option<&BoundaryContext>) -> Result<Field, GridError> {
    if k.abs() > 3 {
        return Err(GridError::ShiftTooLarge { k });
    }
    f.map_stencil(ctx, |get, _| get(k))
}

/// Forward difference `D_dx f = (f_{m+1} - f_m)/dx`.
pub fn forward_diff(f: &Field, ctx: Option<&BoundaryContext>) -> Result<Field, GridError> {
    let dx = f.grid.dx;
    f.map_stencil(ctx, |get, _| (get(1) - get(0)) / dx)
}

/// Forward average `mu_dx f = (f_{m+1} + f_m)/2`.
pub fn average(f: &Field, ctx: Option<&BoundaryContext>) -> Result<Field, GridError> {
    f.map_stencil(ctx, |get, _| 0.5 * (get(1) + get(0)))
}

/// Centred second-order approximation of the `order`-th derivative:
/// `D_{2k,dx} = D^{2k} S^{-k}` and `D_{2k-1,dx} = D^{2k-1} S^{-k} mu`.
pub fn central_diff(
    f: &Field,
    order: u32,
    ctx: Option<&BoundaryContext>,
) -> Result<Field, GridError> {
    let dx = f.grid.dx;
    match order {
        1 => f.map_stencil(ctx, |g, _| (g(1) - g(-1)) / (2.0 * dx)),
        2 => f.map_stencil(ctx, |g, _| (g(1) - 2.0 * g(0) + g(-1)) / (dx * dx)),
        3 => f.map_stencil(ctx, |g, _| {
            (g(2) - 2.0 * g(1) + 2.0 * g(-1) - g(-2)) / (2.0 * dx * dx * dx)
        }),
        4 => f.map_stencil(ctx, |g, _| {
            (g(2) - 4.0 * g(1) + 6.0 * g(0) - 4.0 * g(-1) + g(-2)) / (dx * dx * dx * dx)
        }),
        _ => Err(GridError::UnsupportedOrder { order }),
    }
}

/// Entrywise (Hadamard) product.
pub fn hadamard(f: &Field, g: &Field) -> Result<Field, GridError> {
    if f.grid != g.grid {
        return Err(GridError::GridMismatch);
    }
    let values = f.values.iter().zip(&g.values).map(|(a, b)| a * b).collect();
    Ok(Field { values, grid: f.grid })
}

/// Entrywise linear combination `a*f + b*g` on a shared grid.
pub fn lincomb(a: f64, f: &Field, b: f64, g: &Field) -> Result<Field, GridError> {
    if f.grid != g.grid {
        return Err(GridError::GridMismatch);
    }
    let values = f.values.iter().zip(&g.values).map(|(x, y)| a * x + b * y).collect();
    Ok(Field { values, grid: f.grid })
}

/// Projection `P_r` onto the subgrid with spacing `r*dx`.
///
/// Periodic grids keep every `r`-th node starting at the first; Dirichlet
/// grids keep every `r`-th interior node (the endpoints stay boundary nodes).
pub fn project_coarse(f: &Field, r: usize) -> Result<Field, GridError> {
    let coarse = f.grid.coarsened(r)?;
    let values = match f.grid.boundary {
        BoundaryKind::Periodic => f.values.iter().step_by(r).copied().collect(),
        BoundaryKind::Dirichlet | BoundaryKind::Zero => (1..=coarse.m)
            .map(|j| f.values[r * j - 1])
            .collect(),
    };
    Field::new(values, coarse)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pgrid(n: usize) -> Grid1D {
        Grid1D::new(0.0, n as f64, n - 1, BoundaryKind::Periodic).unwrap()
    }

    #[test]
    fn shift_periodic_wraps() {
        let g = Grid1D::new(0.0, 5.0, 4, BoundaryKind::Periodic).unwrap();
        let f = Field::new(vec![1.0, 2.0, 3.0, 4.0, 5.0], g).unwrap();
        let s = shift(&f, 1, None).unwrap();
        assert_eq!(s.values(), &[2.0, 3.0, 4.0, 5.0, 1.0]);
        let s0 = shift(&f, 0, None).unwrap();
        assert_eq!(s0.values(), f.values());
    }

    #[test]
    fn shift_dirichlet_substitutes_boundary() {
        let g = Grid1D::new(0.0, 7.0, 6, BoundaryKind::Dirichlet).unwrap();
        let f = Field::new(vec![5.0, 6.0, 7.0, 8.0, 9.0, 10.0], g).unwrap();
        let left = |_: f64| 4.0;
        let right = |_: f64| 11.0;
        let ctx = BoundaryContext { left: &left, right: &right, time: 0.0 };
        let s = shift(&f, -1, Some(&ctx)).unwrap();
        assert_eq!(s.values(), &[4.0, 5.0, 6.0, 7.0, 8.0, 9.0]);
        assert!(shift(&f, -1, None).is_err());
        assert!(shift(&f, 4, Some(&ctx)).is_err());
    }

    #[test]
    fn zero_boundary_needs_no_context() {
        let g = Grid1D::new(0.0, 7.0, 6, BoundaryKind::Zero).unwrap();
        let f = Field::constant(3.0, g);
        let s = shift(&f, 1, None).unwrap();
        assert_eq!(s.values()[5], 0.0);
        assert_eq!(s.values()[0], 3.0);
    }

    #[test]
    fn diff_and_average_of_constant() {
        let g = pgrid(8);
        let f = Field::constant(2.5, g);
        assert!(forward_diff(&f, None).unwrap().values().iter().all(|&v| v == 0.0));
        assert!(average(&f, None).unwrap().values().iter().all(|&v| v == 2.5));
        for order in 1..=4 {
            assert!(central_diff(&f, order, None).unwrap().values().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn forward_diff_exact_on_linear() {
        // Dirichlet with matching ghost values recovers slope 1 exactly.
        let g = Grid1D::new(0.0, 7.0, 6, BoundaryKind::Dirichlet).unwrap();
        let f = g.sample(|x| x);
        let left = |_: f64| 0.0;
        let right = |_: f64| 7.0;
        let ctx = BoundaryContext { left: &left, right: &right, time: 0.0 };
        let d = forward_diff(&f, Some(&ctx)).unwrap();
        for v in d.values() {
            assert!((v - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn central_second_exact_on_quadratic() {
        let g = Grid1D::new(0.0, 10.0, 9, BoundaryKind::Dirichlet).unwrap();
        let f = g.sample(|x| x * x);
        let left = |_: f64| 0.0;
        let right = |_: f64| 100.0;
        let ctx = BoundaryContext { left: &left, right: &right, time: 0.0 };
        let d = central_diff(&f, 2, Some(&ctx)).unwrap();
        for v in d.values() {
            assert!((v - 2.0).abs() < 1e-11, "{v}");
        }
    }

    #[test]
    fn central_first_converges_at_second_order() {
        // error on sin over [0, 2pi) should drop ~4x when dx halves
        let err = |n: usize| {
            let g = Grid1D::new(0.0, std::f64::consts::TAU, n - 1, BoundaryKind::Periodic).unwrap();
            let f = g.sample(f64::sin);
            let d = central_diff(&f, 1, None).unwrap();
            d.values()
                .iter()
                .enumerate()
                .map(|(i, v)| (v - g.node(i).cos()).abs())
                .fold(0.0f64, f64::max)
        };
        let (e1, e2) = (err(64), err(128));
        let ratio = e1 / e2;
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn hadamard_basics() {
        let g = pgrid(5);
        let f = Field::new(vec![2.0, 3.0, -1.0, 0.5, 4.0], g).unwrap();
        let ones = Field::constant(1.0, g);
        assert_eq!(hadamard(&f, &ones).unwrap().values(), f.values());
        let sq = hadamard(&f, &f).unwrap();
        assert!(sq.values().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn project_coarse_periodic_subsamples() {
        let g = pgrid(16);
        let f = Field::new((0..16).map(|i| i as f64).collect(), g).unwrap();
        assert_eq!(project_coarse(&f, 1).unwrap().values(), f.values());
        let c = project_coarse(&f, 2).unwrap();
        assert_eq!(c.values(), &[0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 14.0]);
        assert_eq!(c.grid().dx, 2.0 * g.dx);
        assert!(project_coarse(&f, 3).is_err());
    }

    #[test]
    fn project_coarse_dirichlet_keeps_every_rth_interior() {
        // M = 15 interior nodes, M + 1 = 16 divisible by 2 -> coarse M = 7
        let g = Grid1D::new(0.0, 16.0, 15, BoundaryKind::Dirichlet).unwrap();
        let f = g.sample(|x| x);
        let c = project_coarse(&f, 2).unwrap();
        assert_eq!(c.values(), &[2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 14.0]);
        assert_eq!(c.grid().m, 7);
        for (i, v) in c.values().iter().enumerate() {
            assert_eq!(c.grid().node(i), *v);
        }
    }

    #[test]
    fn project_then_operate_commutes_on_smooth_data() {
        // D2 on the coarse projection vs projection of exact derivative,
        // both O((r dx)^2) accurate on a sine profile.
        let g = Grid1D::new(0.0, std::f64::consts::TAU, 255, BoundaryKind::Periodic).unwrap();
        let f = g.sample(f64::sin);
        let r = 4;
        let coarse = project_coarse(&f, r).unwrap();
        let d2c = central_diff(&coarse, 2, None).unwrap();
        let exact = coarse.grid().sample(|x| -x.sin());
        let err = d2c
            .values()
            .iter()
            .zip(exact.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        let hc = coarse.grid().dx;
        assert!(err < hc * hc, "err {err} vs (r dx)^2 {}", hc * hc);
    }
}
