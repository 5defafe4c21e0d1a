//! Banded and cyclic-banded linear systems.
//!
//! The implicit schemes produce Jacobians with bandwidths at most three;
//! periodic grids add wrap-around corner entries. Plain bands are solved by
//! LU with partial pivoting in band storage; cyclic systems by a low-rank
//! corner correction (Woodbury) on top of the banded factorization, keeping
//! the cost O(n) per solve.

use crate::error::SolveError;

const PIVOT_TINY: f64 = 1e-300;

/// Square matrix with dense band storage and optional periodic wrap-around.
///
/// Entry `(i, i+d)` for `d in -lower_bw..=upper_bw` lives at band slot
/// `d + lower_bw` of row `i`; when `cyclic` the column index wraps mod `n`.
#[derive(Clone, Debug)]
pub struct BandedMatrix {
    n: usize,
    lower_bw: usize,
    upper_bw: usize,
    cyclic: bool,
    bands: Vec<f64>,
}

impl BandedMatrix {
    pub fn new(n: usize, lower_bw: usize, upper_bw: usize, cyclic: bool) -> Self {
        assert!(
            n > lower_bw + upper_bw && n > 2 * lower_bw.max(upper_bw),
            "band too wide for dimension {n}"
        );
        let width = lower_bw + upper_bw + 1;
        Self { n, lower_bw, upper_bw, cyclic, bands: vec![0.0; n * width] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lower_bw(&self) -> usize {
        self.lower_bw
    }

    pub fn upper_bw(&self) -> usize {
        self.upper_bw
    }

    pub fn is_cyclic(&self) -> bool {
        self.cyclic
    }

    fn width(&self) -> usize {
        self.lower_bw + self.upper_bw + 1
    }

    /// Column hit by band offset `d` in row `i`, if any.
    fn column(&self, i: usize, d: isize) -> Option<usize> {
        let j = i as isize + d;
        if (0..self.n as isize).contains(&j) {
            Some(j as usize)
        } else if self.cyclic {
            Some(j.rem_euclid(self.n as isize) as usize)
        } else {
            None
        }
    }

    /// Add `v` to entry `(i, i+d)`.
    pub fn add(&mut self, i: usize, d: isize, v: f64) {
        debug_assert!(-(self.lower_bw as isize) <= d && d <= self.upper_bw as isize);
        if self.column(i, d).is_some() {
            let w = self.width();
            self.bands[i * w + (d + self.lower_bw as isize) as usize] += v;
        }
    }

    pub fn get(&self, i: usize, d: isize) -> f64 {
        if d < -(self.lower_bw as isize) || d > self.upper_bw as isize {
            return 0.0;
        }
        self.bands[i * self.width() + (d + self.lower_bw as isize) as usize]
    }

    /// Matrix-vector product, mostly used by tests and residual checks.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let mut acc = 0.0;
            for d in -(self.lower_bw as isize)..=(self.upper_bw as isize) {
                if let Some(j) = self.column(i, d) {
                    acc += self.get(i, d) * x[j];
                }
            }
            y[i] = acc;
        }
        y
    }

    /// Solve `A x = rhs`.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, SolveError> {
        if rhs.len() != self.n {
            return Err(SolveError::Dimension { n: self.n, got: rhs.len() });
        }
        if !self.cyclic {
            return BandLu::factor(self)?.solve(rhs);
        }
        self.solve_cyclic(rhs)
    }

    /// Cyclic solve by bordered low-rank correction: write `A = B + U V^T`
    /// with `B` the wrap-free band, then apply Woodbury's identity.
    fn solve_cyclic(&self, rhs: &[f64]) -> Result<Vec<f64>, SolveError> {
        let (bl, bu, n) = (self.lower_bw, self.upper_bw, self.n);
        // Rows 0..bl wrap to the right edge, rows n-bu..n to the left.
        let mut rows: Vec<usize> = (0..bl).collect();
        rows.extend(n - bu..n);
        let p = rows.len();
        if p == 0 {
            return BandLu::factor(self)?.solve(rhs);
        }

        let mut base = self.clone();
        base.cyclic = false;
        // v[t] holds the wrap entries of row rows[t], keyed by column.
        let mut v: Vec<Vec<(usize, f64)>> = vec![Vec::new(); p];
        for (t, &i) in rows.iter().enumerate() {
            for d in -(bl as isize)..=(bu as isize) {
                let j = i as isize + d;
                if !(0..n as isize).contains(&j) {
                    let col = j.rem_euclid(n as isize) as usize;
                    let val = self.get(i, d);
                    if val != 0.0 {
                        v[t].push((col, val));
                    }
                    let w = base.width();
                    base.bands[i * w + (d + bl as isize) as usize] = 0.0;
                }
            }
        }

        let lu = BandLu::factor(&base)?;
        let x0 = lu.solve(rhs)?;
        // Columns of B^-1 U, where U selects the wrapping rows.
        let mut binv_u = Vec::with_capacity(p);
        let mut e = vec![0.0; n];
        for &i in &rows {
            e[i] = 1.0;
            binv_u.push(lu.solve(&e)?);
            e[i] = 0.0;
        }
        // Capacitance S = I + V^T B^-1 U and reduced rhs V^T x0.
        let mut s = vec![0.0; p * p];
        let mut b_red = vec![0.0; p];
        for t in 0..p {
            for (col, val) in &v[t] {
                b_red[t] += val * x0[*col];
            }
            for q in 0..p {
                let mut acc = if t == q { 1.0 } else { 0.0 };
                for (col, val) in &v[t] {
                    acc += val * binv_u[q][*col];
                }
                s[t * p + q] = acc;
            }
        }
        let y = dense_solve(p, &mut s, &mut b_red)?;
        let mut x = x0;
        for q in 0..p {
            for i in 0..n {
                x[i] -= binv_u[q][i] * y[q];
            }
        }
        Ok(x)
    }
}

/// LU factorization of a (non-cyclic) banded matrix with partial pivoting.
///
/// Row storage carries `lower_bw` extra superdiagonals for pivoting fill.
pub struct BandLu {
    n: usize,
    lower_bw: usize,
    upper_bw: usize,
    /// Row `i` covers columns `i - lower_bw ..= i + upper_bw + lower_bw`.
    work: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandLu {
    fn width(&self) -> usize {
        2 * self.lower_bw + self.upper_bw + 1
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        i * self.width() + (j + self.lower_bw - i)
    }

    pub fn factor(a: &BandedMatrix) -> Result<Self, SolveError> {
        assert!(!a.cyclic, "cyclic systems go through solve_cyclic");
        let (n, bl, bu) = (a.n, a.lower_bw, a.upper_bw);
        let mut lu = BandLu {
            n,
            lower_bw: bl,
            upper_bw: bu,
            work: vec![0.0; n * (2 * bl + bu + 1)],
            pivots: vec![0; n],
        };
        for i in 0..n {
            for d in -(bl as isize)..=(bu as isize) {
                let j = i as isize + d;
                if (0..n as isize).contains(&j) {
                    let s = lu.slot(i, j as usize);
                    lu.work[s] = a.get(i, d);
                }
            }
        }

        let top = |k: usize| (k + bu + bl).min(n - 1);
        for k in 0..n {
            // pivot among rows k..=k+bl
            let rmax = (k + bl).min(n - 1);
            let mut piv = k;
            let mut best = lu.work[lu.slot(k, k)].abs();
            for r in (k + 1)..=rmax {
                let cand = lu.work[lu.slot(r, k)].abs();
                if cand > best {
                    best = cand;
                    piv = r;
                }
            }
            if best < PIVOT_TINY {
                return Err(SolveError::SingularJacobian { column: k });
            }
            lu.pivots[k] = piv;
            if piv != k {
                for j in k..=top(k) {
                    let (sk, sp) = (lu.slot(k, j), lu.slot(piv, j));
                    lu.work.swap(sk, sp);
                }
            }
            let pivot = lu.work[lu.slot(k, k)];
            for r in (k + 1)..=rmax {
                let s_rk = lu.slot(r, k);
                let mult = lu.work[s_rk] / pivot;
                lu.work[s_rk] = mult;
                if mult != 0.0 {
                    for j in (k + 1)..=top(k) {
                        let (s_rj, s_kj) = (lu.slot(r, j), lu.slot(k, j));
                        lu.work[s_rj] -= mult * lu.work[s_kj];
                    }
                }
            }
        }
        Ok(lu)
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, SolveError> {
        if rhs.len() != self.n {
            return Err(SolveError::Dimension { n: self.n, got: rhs.len() });
        }
        let (n, bl, bu) = (self.n, self.lower_bw, self.upper_bw);
        let mut x = rhs.to_vec();
        for k in 0..n {
            let piv = self.pivots[k];
            if piv != k {
                x.swap(k, piv);
            }
            let rmax = (k + bl).min(n - 1);
            for r in (k + 1)..=rmax {
                x[r] -= self.work[self.slot(r, k)] * x[k];
            }
        }
        for k in (0..n).rev() {
            let jmax = (k + bu + bl).min(n - 1);
            let mut acc = x[k];
            for j in (k + 1)..=jmax {
                acc -= self.work[self.slot(k, j)] * x[j];
            }
            x[k] = acc / self.work[self.slot(k, k)];
        }
        Ok(x)
    }
}

/// In-place dense LU solve for the small capacitance (and Gauss-Newton)
/// systems; `a` is row-major `n x n` and gets destroyed.
pub fn dense_solve(n: usize, a: &mut [f64], b: &mut [f64]) -> Result<Vec<f64>, SolveError> {
    debug_assert_eq!(a.len(), n * n);
    for k in 0..n {
        let mut piv = k;
        let mut best = a[k * n + k].abs();
        for r in (k + 1)..n {
            if a[r * n + k].abs() > best {
                best = a[r * n + k].abs();
                piv = r;
            }
        }
        if best < PIVOT_TINY {
            return Err(SolveError::SingularJacobian { column: k });
        }
        if piv != k {
            for j in 0..n {
                a.swap(k * n + j, piv * n + j);
            }
            b.swap(k, piv);
        }
        for r in (k + 1)..n {
            let m = a[r * n + k] / a[k * n + k];
            a[r * n + k] = 0.0;
            for j in (k + 1)..n {
                a[r * n + j] -= m * a[k * n + j];
            }
            b[r] -= m * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let mut acc = b[k];
        for j in (k + 1)..n {
            acc -= a[k * n + j] * x[j];
        }
        x[k] = acc / a[k * n + k];
    }
    Ok(x)
}
