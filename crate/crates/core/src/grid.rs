//! Staggered (MAC) grid on a rectangle and the fields that live on it.
//!
//! Layout: `u` sits on vertical faces `(i hx, (j+½) hy)` for `i ∈ 0..=nx`,
//! `j ∈ 0..ny`; `v` on horizontal faces `((i+½) hx, j hy)` for `i ∈ 0..nx`,
//! `j ∈ 0..=ny`; scalars at cell centers. Normal components on the boundary
//! faces are identically zero.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{domain, Result};
use crate::kernel::HistoryValue;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StaggeredGrid {
    pub lx: f64,
    pub ly: f64,
    pub nx: usize,
    pub ny: usize,
}

impl StaggeredGrid {
    pub fn new(lx: f64, ly: f64, nx: usize, ny: usize) -> Result<Self> {
        if nx < 4 || ny < 4 {
            return domain(format!(
                "grid needs at least 4 cells per direction, got {nx}x{ny}"
            ));
        }
        if !(lx > 0.0 && ly > 0.0) || !lx.is_finite() || !ly.is_finite() {
            return domain(format!("domain lengths must be positive, got {lx}x{ly}"));
        }
        Ok(Self { lx, ly, nx, ny })
    }

    pub fn unit_square(n: usize) -> Result<Self> {
        Self::new(1.0, 1.0, n, n)
    }

    pub fn hx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    pub fn h_min(&self) -> f64 {
        self.hx().min(self.hy())
    }

    pub fn cell_area(&self) -> f64 {
        self.hx() * self.hy()
    }

    pub(crate) fn n_u(&self) -> usize {
        (self.nx + 1) * self.ny
    }

    pub(crate) fn n_v(&self) -> usize {
        self.nx * (self.ny + 1)
    }

    pub(crate) fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub(crate) fn iu(&self, i: usize, j: usize) -> usize {
        i * self.ny + j
    }

    #[inline]
    pub(crate) fn iv(&self, i: usize, j: usize) -> usize {
        self.n_u() + i * (self.ny + 1) + j
    }

    #[inline]
    pub(crate) fn ic(&self, i: usize, j: usize) -> usize {
        i * self.ny + j
    }

    pub fn u_position(&self, i: usize, j: usize) -> (f64, f64) {
        (i as f64 * self.hx(), (j as f64 + 0.5) * self.hy())
    }

    pub fn v_position(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.hx(), j as f64 * self.hy())
    }

    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.hx(), (j as f64 + 0.5) * self.hy())
    }
}

/// Face-centered vector field (u on vertical faces, v on horizontal faces).
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityField {
    grid: StaggeredGrid,
    data: Vec<f64>,
}

impl VelocityField {
    pub fn zeros(grid: StaggeredGrid) -> Self {
        Self {
            grid,
            data: vec![0.0; grid.n_u() + grid.n_v()],
        }
    }

    /// Sample component functions at face positions; boundary normal faces are set to zero.
    pub fn from_fn(
        grid: StaggeredGrid,
        fu: impl Fn(f64, f64) -> f64,
        fv: impl Fn(f64, f64) -> f64,
    ) -> Self {
        let mut w = Self::zeros(grid);
        for i in 1..grid.nx {
            for j in 0..grid.ny {
                let (x, y) = grid.u_position(i, j);
                w.data[grid.iu(i, j)] = fu(x, y);
            }
        }
        for i in 0..grid.nx {
            for j in 1..grid.ny {
                let (x, y) = grid.v_position(i, j);
                w.data[grid.iv(i, j)] = fv(x, y);
            }
        }
        w
    }

    /// Independent standard-normal values on every interior face.
    pub fn random<R: Rng + ?Sized>(grid: StaggeredGrid, rng: &mut R) -> Self {
        let mut w = Self::zeros(grid);
        for x in w.data.iter_mut() {
            *x = StandardNormal.sample(rng);
        }
        w.enforce_boundary();
        w
    }

    /// Random combination of the lowest `modes × modes` sine modes per component.
    pub fn random_smooth<R: Rng + ?Sized>(grid: StaggeredGrid, modes: usize, rng: &mut R) -> Self {
        let mut cu = vec![0.0; modes * modes];
        let mut cv = vec![0.0; modes * modes];
        for c in cu.iter_mut().chain(cv.iter_mut()) {
            *c = StandardNormal.sample(rng);
        }
        let (lx, ly) = (grid.lx, grid.ly);
        let pi = std::f64::consts::PI;
        let eval = |c: &[f64], x: f64, y: f64| {
            let mut s = 0.0;
            for k in 0..modes {
                for m in 0..modes {
                    let damp = 1.0 / (1.0 + (k * k + m * m) as f64);
                    s += c[k * modes + m]
                        * damp
                        * ((k + 1) as f64 * pi * x / lx).sin()
                        * ((m + 1) as f64 * pi * y / ly).sin();
                }
            }
            s
        };
        Self::from_fn(grid, |x, y| eval(&cu, x, y), |x, y| eval(&cv, x, y))
    }

    /// Wrap raw storage (u block then v block); boundary normals are zeroed.
    pub fn from_raw(grid: StaggeredGrid, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.n_u() + grid.n_v() {
            return domain(format!(
                "velocity storage needs {} values, got {}",
                grid.n_u() + grid.n_v(),
                data.len()
            ));
        }
        let mut w = Self { grid, data };
        w.enforce_boundary();
        Ok(w)
    }

    pub fn into_raw(self) -> Vec<f64> {
        self.data
    }

    pub fn grid(&self) -> &StaggeredGrid {
        &self.grid
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn u(&self, i: usize, j: usize) -> f64 {
        self.data[self.grid.iu(i, j)]
    }

    #[inline]
    pub fn v(&self, i: usize, j: usize) -> f64 {
        self.data[self.grid.iv(i, j)]
    }

    #[inline]
    pub fn set_u(&mut self, i: usize, j: usize, val: f64) {
        let k = self.grid.iu(i, j);
        self.data[k] = val;
    }

    #[inline]
    pub fn set_v(&mut self, i: usize, j: usize, val: f64) {
        let k = self.grid.iv(i, j);
        self.data[k] = val;
    }

    /// Zero the normal components on the boundary faces.
    pub fn enforce_boundary(&mut self) {
        let g = self.grid;
        for j in 0..g.ny {
            self.data[g.iu(0, j)] = 0.0;
            self.data[g.iu(g.nx, j)] = 0.0;
        }
        for i in 0..g.nx {
            self.data[g.iv(i, 0)] = 0.0;
            self.data[g.iv(i, g.ny)] = 0.0;
        }
    }

    pub fn is_admissible(&self) -> bool {
        let g = self.grid;
        (0..g.ny).all(|j| self.u(0, j) == 0.0 && self.u(g.nx, j) == 0.0)
            && (0..g.nx).all(|i| self.v(i, 0) == 0.0 && self.v(i, g.ny) == 0.0)
    }

    /// Cell-area weighted inner product.
    pub fn dot(&self, other: &Self) -> f64 {
        let s: f64 = self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum();
        s * self.grid.cell_area()
    }

    /// Discrete L² norm ‖·‖₀.
    pub fn l2(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn add_scaled(&mut self, a: f64, x: &Self) {
        for (s, o) in self.data.iter_mut().zip(&x.data) {
            *s += a * o;
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|x| *x *= a);
        out
    }

    /// self − other
    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.add_scaled(-1.0, other);
        out
    }
}

impl HistoryValue for VelocityField {
    fn zeros_like(&self) -> Self {
        Self::zeros(self.grid)
    }

    fn axpy(&mut self, a: f64, x: &Self) {
        self.add_scaled(a, x);
    }

    fn scale(&mut self, a: f64) {
        self.data.iter_mut().for_each(|x| *x *= a);
    }
}

/// Cell-centered scalar field.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: StaggeredGrid,
    data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: StaggeredGrid) -> Self {
        Self {
            grid,
            data: vec![0.0; grid.n_cells()],
        }
    }

    pub fn from_fn(grid: StaggeredGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut q = Self::zeros(grid);
        for i in 0..grid.nx {
            for j in 0..grid.ny {
                let (x, y) = grid.cell_center(i, j);
                q.data[grid.ic(i, j)] = f(x, y);
            }
        }
        q
    }

    pub fn random<R: Rng + ?Sized>(grid: StaggeredGrid, rng: &mut R) -> Self {
        let mut q = Self::zeros(grid);
        for x in q.data.iter_mut() {
            *x = StandardNormal.sample(rng);
        }
        q
    }

    pub fn from_raw(grid: StaggeredGrid, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.n_cells() {
            return domain(format!(
                "scalar storage needs {} values, got {}",
                grid.n_cells(),
                data.len()
            ));
        }
        Ok(Self { grid, data })
    }

    pub fn into_raw(self) -> Vec<f64> {
        self.data
    }

    pub fn grid(&self) -> &StaggeredGrid {
        &self.grid
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[self.grid.ic(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, val: f64) {
        let k = self.grid.ic(i, j);
        self.data[k] = val;
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Remove the mean and return the amount removed.
    pub fn subtract_mean(&mut self) -> f64 {
        let m = self.mean();
        self.data.iter_mut().for_each(|x| *x -= m);
        m
    }

    pub fn dot(&self, other: &Self) -> f64 {
        let s: f64 = self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum();
        s * self.grid.cell_area()
    }

    pub fn l2(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn add_scaled(&mut self, a: f64, x: &Self) {
        for (s, o) in self.data.iter_mut().zip(&x.data) {
            *s += a * o;
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|x| *x *= a);
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.add_scaled(-1.0, other);
        out
    }
}
