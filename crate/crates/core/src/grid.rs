//! Uniform space-time grids and multi-component nodal fields.
//!
//! Nodes are stored time-major: the flat index of node `(it, ix, iy)` is
//! `(it * nx + ix) * ny + iy`, with `ny = 1` on one-dimensional grids. Field
//! values are row-major over nodes with the component index fastest.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Treatment of the spatial boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Dual fields vanish on the boundary nodes `x = x_min` and `x = x_max`.
    Dirichlet,
    /// The spatial axes wrap; nodes sit at `x_min + i dx`, `i < nx`, with
    /// `dx = (x_max - x_min) / nx`.
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    T,
    X,
    Y,
}

impl Axis {
    /// Spatial axis `k` (0 = x, 1 = y).
    pub fn space(k: usize) -> Axis {
        match k {
            0 => Axis::X,
            _ => Axis::Y,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceTimeGrid {
    space_dim: usize,
    nx: usize,
    nt: usize,
    x_min: f64,
    x_max: f64,
    t_max: f64,
    boundary: Boundary,
    dx: f64,
    dt: f64,
}

impl SpaceTimeGrid {
    pub fn new(
        space_dim: usize,
        nx: usize,
        nt: usize,
        x_min: f64,
        x_max: f64,
        t_max: f64,
        boundary: Boundary,
    ) -> Result<Self> {
        if !(1..=2).contains(&space_dim) {
            return Err(Error::InvalidGrid(alloc::format!(
                "space_dim must be 1 or 2, got {space_dim}"
            )));
        }
        if nx < 4 || nt < 4 {
            return Err(Error::InvalidGrid(alloc::format!(
                "need nx >= 4 and nt >= 4, got nx = {nx}, nt = {nt}"
            )));
        }
        if !(x_max > x_min) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::InvalidGrid(alloc::format!(
                "need x_min < x_max, got [{x_min}, {x_max}]"
            )));
        }
        if !(t_max > 0.0) || !t_max.is_finite() {
            return Err(Error::InvalidGrid(alloc::format!(
                "need t_max > 0, got {t_max}"
            )));
        }
        let cells = match boundary {
            Boundary::Dirichlet => nx - 1,
            Boundary::Periodic => nx,
        };
        Ok(SpaceTimeGrid {
            space_dim,
            nx,
            nt,
            x_min,
            x_max,
            t_max,
            boundary,
            dx: (x_max - x_min) / cells as f64,
            dt: t_max / (nt - 1) as f64,
        })
    }

    /// One space dimension with Dirichlet boundaries.
    pub fn new_1d(nx: usize, nt: usize, x_min: f64, x_max: f64, t_max: f64) -> Result<Self> {
        Self::new(1, nx, nt, x_min, x_max, t_max, Boundary::Dirichlet)
    }

    pub fn space_dim(&self) -> usize {
        self.space_dim
    }
    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        if self.space_dim == 2 {
            self.nx
        } else {
            1
        }
    }
    pub fn nt(&self) -> usize {
        self.nt
    }
    pub fn x_min(&self) -> f64 {
        self.x_min
    }
    pub fn x_max(&self) -> f64 {
        self.x_max
    }
    pub fn t_max(&self) -> f64 {
        self.t_max
    }
    pub fn dx(&self) -> f64 {
        self.dx
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn boundary(&self) -> Boundary {
        self.boundary
    }
    pub fn is_periodic(&self) -> bool {
        self.boundary == Boundary::Periodic
    }

    /// Nodes per time slice.
    pub fn space_nodes(&self) -> usize {
        self.nx * self.ny()
    }

    pub fn n_nodes(&self) -> usize {
        self.nt * self.space_nodes()
    }

    pub fn has_axis(&self, axis: Axis) -> bool {
        !(axis == Axis::Y && self.space_dim < 2)
    }

    pub fn axis_len(&self, axis: Axis) -> usize {
        match axis {
            Axis::T => self.nt,
            Axis::X => self.nx,
            Axis::Y => self.ny(),
        }
    }

    /// Distance in flat node index between neighbours along `axis`.
    pub fn axis_stride(&self, axis: Axis) -> usize {
        match axis {
            Axis::T => self.space_nodes(),
            Axis::X => self.ny(),
            Axis::Y => 1,
        }
    }

    pub fn spacing(&self, axis: Axis) -> f64 {
        match axis {
            Axis::T => self.dt,
            _ => self.dx,
        }
    }

    pub fn axis_periodic(&self, axis: Axis) -> bool {
        axis != Axis::T && self.is_periodic()
    }

    pub fn node_index(&self, it: usize, ix: usize, iy: usize) -> usize {
        (it * self.nx + ix) * self.ny() + iy
    }

    /// `(it, ix, iy)` of a flat node index.
    pub fn node_coords(&self, node: usize) -> (usize, usize, usize) {
        let ny = self.ny();
        let iy = node % ny;
        let rest = node / ny;
        (rest / self.nx, rest % self.nx, iy)
    }

    pub fn t(&self, it: usize) -> f64 {
        it as f64 * self.dt
    }

    pub fn x(&self, ix: usize) -> f64 {
        self.x_min + ix as f64 * self.dx
    }

    /// Physical `(t, x, y)` of a node; `y = 0` on 1-D grids.
    pub fn position(&self, node: usize) -> (f64, f64, f64) {
        let (it, ix, iy) = self.node_coords(node);
        let y = if self.space_dim == 2 { self.x(iy) } else { 0.0 };
        (self.t(it), self.x(ix), y)
    }

    pub fn is_spatial_boundary(&self, node: usize) -> bool {
        if self.is_periodic() {
            return false;
        }
        let (_, ix, iy) = self.node_coords(node);
        let last = self.nx - 1;
        ix == 0 || ix == last || (self.space_dim == 2 && (iy == 0 || iy == last))
    }

    pub fn is_terminal(&self, node: usize) -> bool {
        node / self.space_nodes() == self.nt - 1
    }

    /// Nodes where dual fields are pinned to zero: the spatial boundary (when
    /// Dirichlet) and the final time slice.
    pub fn is_constrained(&self, node: usize) -> bool {
        self.is_terminal(node) || self.is_spatial_boundary(node)
    }

    /// Nodes with at least `margin` nodes to every non-periodic boundary.
    pub fn is_interior(&self, node: usize, margin: usize) -> bool {
        let (it, ix, iy) = self.node_coords(node);
        let inside = |i: usize, n: usize| i >= margin && i + margin < n;
        if !inside(it, self.nt) {
            return false;
        }
        if self.is_periodic() {
            return true;
        }
        inside(ix, self.nx) && (self.space_dim < 2 || inside(iy, self.nx))
    }

    /// One-dimensional trapezoid weights along an axis.
    pub fn axis_weights(&self, axis: Axis) -> Vec<f64> {
        let n = self.axis_len(axis);
        if !self.has_axis(axis) {
            return vec![1.0; n];
        }
        let h = self.spacing(axis);
        let mut w = vec![h; n];
        if !self.axis_periodic(axis) {
            w[0] = 0.5 * h;
            w[n - 1] = 0.5 * h;
        }
        w
    }

    /// Space-time trapezoid weights, one per node.
    pub fn weights(&self) -> Vec<f64> {
        let wt = self.axis_weights(Axis::T);
        let ws = self.space_weights();
        let mut w = Vec::with_capacity(self.n_nodes());
        for &a in &wt {
            w.extend(ws.iter().map(|&b| a * b));
        }
        w
    }

    /// Spatial trapezoid weights for one time slice.
    pub fn space_weights(&self) -> Vec<f64> {
        let wx = self.axis_weights(Axis::X);
        let wy = self.axis_weights(Axis::Y);
        let mut w = Vec::with_capacity(self.space_nodes());
        for &a in &wx {
            w.extend(wy.iter().map(|&b| a * b));
        }
        w
    }
}

/// Multi-component real field sampled on grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: SpaceTimeGrid,
    components: usize,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: SpaceTimeGrid, components: usize) -> Self {
        assert!(components > 0, "a field needs at least one component");
        Field {
            grid,
            components,
            values: vec![0.0; grid.n_nodes() * components],
        }
    }

    pub fn from_values(grid: SpaceTimeGrid, components: usize, values: Vec<f64>) -> Result<Self> {
        if components == 0 {
            return Err(Error::InvalidArgument("field with zero components".into()));
        }
        let expected = grid.n_nodes() * components;
        if values.len() != expected {
            return Err(Error::DimensionMismatch {
                context: "field values",
                expected,
                found: values.len(),
            });
        }
        Ok(Field {
            grid,
            components,
            values,
        })
    }

    /// Samples `f(t, x, y, out)` at every node.
    pub fn from_fn(
        grid: SpaceTimeGrid,
        components: usize,
        mut f: impl FnMut(f64, f64, f64, &mut [f64]),
    ) -> Self {
        let mut field = Field::zeros(grid, components);
        for node in 0..grid.n_nodes() {
            let (t, x, y) = grid.position(node);
            f(
                t,
                x,
                y,
                &mut field.values[node * components..(node + 1) * components],
            );
        }
        field
    }

    /// Single-component convenience for [`Field::from_fn`].
    pub fn scalar_fn(grid: SpaceTimeGrid, f: impl Fn(f64, f64, f64) -> f64) -> Self {
        Field::from_fn(grid, 1, |t, x, y, out| out[0] = f(t, x, y))
    }

    pub fn grid(&self) -> &SpaceTimeGrid {
        &self.grid
    }
    pub fn components(&self) -> usize {
        self.components
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

    pub fn get(&self, node: usize, comp: usize) -> f64 {
        self.values[node * self.components + comp]
    }

    pub fn set(&mut self, node: usize, comp: usize, value: f64) {
        self.values[node * self.components + comp] = value;
    }

    pub fn node(&self, node: usize) -> &[f64] {
        &self.values[node * self.components..(node + 1) * self.components]
    }

    /// Copies out one component as a single-component field.
    pub fn component(&self, comp: usize) -> Result<Field> {
        self.check_component(comp)?;
        let values = self
            .values
            .chunks_exact(self.components)
            .map(|c| c[comp])
            .collect();
        Ok(Field {
            grid: self.grid,
            components: 1,
            values,
        })
    }

    /// One component as a plain nodal vector.
    pub fn component_values(&self, comp: usize) -> Vec<f64> {
        self.values
            .chunks_exact(self.components)
            .map(|c| c[comp])
            .collect()
    }

    /// Interleaves single-component nodal vectors into one field.
    pub fn from_components(grid: SpaceTimeGrid, parts: &[&[f64]]) -> Result<Field> {
        let n = grid.n_nodes();
        let components = parts.len();
        let mut values = Vec::with_capacity(n * components);
        for part in parts {
            if part.len() != n {
                return Err(Error::DimensionMismatch {
                    context: "field component",
                    expected: n,
                    found: part.len(),
                });
            }
        }
        for node in 0..n {
            values.extend(parts.iter().map(|p| p[node]));
        }
        Field::from_values(grid, components, values)
    }

    pub fn check_component(&self, comp: usize) -> Result<()> {
        if comp >= self.components {
            return Err(Error::ComponentOutOfRange {
                comp,
                components: self.components,
            });
        }
        Ok(())
    }

    pub fn check_finite(&self, what: &'static str) -> Result<()> {
        if self.values.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite(what))
        }
    }

    /// Zeroes every component on constrained nodes.
    pub fn project(&mut self) {
        project_constrained(&self.grid, self.components, &mut self.values);
    }

    pub fn scale(&mut self, a: f64) {
        self.values.iter_mut().for_each(|v| *v *= a);
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &Field) {
        debug_assert_eq!(self.values.len(), other.values.len());
        for (s, o) in self.values.iter_mut().zip(&other.values) {
            *s += a * o;
        }
    }
}

/// Zeroes the entries of an interleaved nodal vector on constrained nodes.
pub fn project_constrained(grid: &SpaceTimeGrid, components: usize, values: &mut [f64]) {
    for node in 0..grid.n_nodes() {
        if grid.is_constrained(node) {
            values[node * components..(node + 1) * components].fill(0.0);
        }
    }
}

/// Trapezoidal quadrature of a single-component field over the whole grid.
pub fn integrate(f: &Field) -> Result<f64> {
    if f.components() != 1 {
        return Err(Error::InvalidArgument(alloc::format!(
            "integrate expects a single-component field, got {} components",
            f.components()
        )));
    }
    Ok(f.grid()
        .weights()
        .iter()
        .zip(f.values())
        .map(|(w, v)| w * v)
        .sum())
}
