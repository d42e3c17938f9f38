//! Finite-difference operators along grid axes, with exact transposes.
//!
//! Each operator acts on a single-component nodal vector one grid line at a
//! time. Interior rows use second-order central stencils. On non-periodic axes
//! the first derivative closes with the two-point difference at each end, which
//! makes it summation-by-parts with the trapezoid weights:
//! `sum w (u D v + v D u) = u v |_end - u v |_start` holds exactly. Without
//! that pairing the transposed operator imposes an inconsistent discrete
//! condition at the end slices, and recovered primal fields pick up an O(1)
//! layer there. The second derivative closes with the four-point one-sided
//! second-order stencil, exact on cubics.
//!
//! Dual objectives are discretized first and differentiated afterwards: their
//! gradients are assembled with [`apply_transpose_add`], which applies the
//! exact transpose of the matrix that [`apply_add`] applies.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::{Axis, Field, SpaceTimeGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    First,
    Second,
}

#[derive(Debug, Clone, Copy)]
struct Stencil {
    cols: [usize; 4],
    coefs: [f64; 4],
    len: usize,
}

fn stencil(order: Order, i: usize, n: usize, h: f64, periodic: bool) -> Stencil {
    let mut s = Stencil {
        cols: [0; 4],
        coefs: [0.0; 4],
        len: 0,
    };
    let mut push = |c: usize, w: f64| {
        s.cols[s.len] = c;
        s.coefs[s.len] = w;
        s.len += 1;
    };
    match order {
        Order::First => {
            let a = 1.0 / (2.0 * h);
            if periodic {
                push((i + n - 1) % n, -a);
                push((i + 1) % n, a);
            } else if i == 0 {
                push(0, -2.0 * a);
                push(1, 2.0 * a);
            } else if i == n - 1 {
                push(n - 2, -2.0 * a);
                push(n - 1, 2.0 * a);
            } else {
                push(i - 1, -a);
                push(i + 1, a);
            }
        }
        Order::Second => {
            let a = 1.0 / (h * h);
            if periodic {
                push((i + n - 1) % n, a);
                push(i, -2.0 * a);
                push((i + 1) % n, a);
            } else if i == 0 {
                push(0, 2.0 * a);
                push(1, -5.0 * a);
                push(2, 4.0 * a);
                push(3, -a);
            } else if i == n - 1 {
                push(n - 4, -a);
                push(n - 3, 4.0 * a);
                push(n - 2, -5.0 * a);
                push(n - 1, 2.0 * a);
            } else {
                push(i - 1, a);
                push(i, -2.0 * a);
                push(i + 1, a);
            }
        }
    }
    s
}

fn line_geometry(grid: &SpaceTimeGrid, axis: Axis) -> (usize, usize, f64, bool) {
    (
        grid.axis_len(axis),
        grid.axis_stride(axis),
        grid.spacing(axis),
        grid.axis_periodic(axis),
    )
}

/// `dst += scale * D src` for the derivative of `order` along `axis`.
pub fn apply_add(
    grid: &SpaceTimeGrid,
    axis: Axis,
    order: Order,
    src: &[f64],
    dst: &mut [f64],
    scale: f64,
) {
    debug_assert!(grid.has_axis(axis));
    debug_assert_eq!(src.len(), grid.n_nodes());
    debug_assert_eq!(dst.len(), grid.n_nodes());
    let (n, stride, h, periodic) = line_geometry(grid, axis);
    for node in 0..src.len() {
        let i = (node / stride) % n;
        let base = node - i * stride;
        let s = stencil(order, i, n, h, periodic);
        let mut acc = 0.0;
        for k in 0..s.len {
            acc += s.coefs[k] * src[base + s.cols[k] * stride];
        }
        dst[node] += scale * acc;
    }
}

/// `dst += scale * D^T src`.
pub fn apply_transpose_add(
    grid: &SpaceTimeGrid,
    axis: Axis,
    order: Order,
    src: &[f64],
    dst: &mut [f64],
    scale: f64,
) {
    debug_assert!(grid.has_axis(axis));
    debug_assert_eq!(src.len(), grid.n_nodes());
    debug_assert_eq!(dst.len(), grid.n_nodes());
    let (n, stride, h, periodic) = line_geometry(grid, axis);
    for node in 0..src.len() {
        let v = scale * src[node];
        if v == 0.0 {
            continue;
        }
        let i = (node / stride) % n;
        let base = node - i * stride;
        let s = stencil(order, i, n, h, periodic);
        for k in 0..s.len {
            dst[base + s.cols[k] * stride] += s.coefs[k] * v;
        }
    }
}

/// `D src` as a fresh vector.
pub fn apply(grid: &SpaceTimeGrid, axis: Axis, order: Order, src: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; src.len()];
    apply_add(grid, axis, order, src, &mut out, 1.0);
    out
}

/// `D^T src` as a fresh vector.
pub fn apply_transpose(grid: &SpaceTimeGrid, axis: Axis, order: Order, src: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; src.len()];
    apply_transpose_add(grid, axis, order, src, &mut out, 1.0);
    out
}

/// Operator selector for [`apply_diff`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffKind {
    /// `d/dt`
    Dt,
    /// `d/dx`
    Dx,
    /// `d/dy`
    Dy,
    /// `d^2/dx^2`
    D2x,
    /// `d^2/dy^2`
    D2y,
    /// Spatial divergence of the `space_dim` components starting at `comp`.
    Div,
    /// Spatial gradient of component `comp`; one output component per axis.
    Grad,
}

impl core::str::FromStr for DiffKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "d_dt" => DiffKind::Dt,
            "d_dx" => DiffKind::Dx,
            "d_dy" => DiffKind::Dy,
            "d2_dx2" => DiffKind::D2x,
            "d2_dy2" => DiffKind::D2y,
            "div" => DiffKind::Div,
            "grad" => DiffKind::Grad,
            other => {
                return Err(Error::InvalidArgument(alloc::format!(
                    "unknown derivative kind '{other}'"
                )))
            }
        })
    }
}

/// Applies a derivative to a field component (or, for `Div`, to the vector
/// of components starting at `comp`).
pub fn apply_diff(f: &Field, kind: DiffKind, comp: usize) -> Result<Field> {
    let grid = *f.grid();
    f.check_component(comp)?;
    let single = |axis: Axis, order: Order| -> Result<Field> {
        if !grid.has_axis(axis) {
            return Err(Error::InvalidArgument(alloc::format!(
                "{kind:?} needs a two-dimensional grid"
            )));
        }
        let src = f.component_values(comp);
        Field::from_values(grid, 1, apply(&grid, axis, order, &src))
    };
    match kind {
        DiffKind::Dt => single(Axis::T, Order::First),
        DiffKind::Dx => single(Axis::X, Order::First),
        DiffKind::Dy => single(Axis::Y, Order::First),
        DiffKind::D2x => single(Axis::X, Order::Second),
        DiffKind::D2y => single(Axis::Y, Order::Second),
        DiffKind::Div => {
            let d = grid.space_dim();
            f.check_component(comp + d - 1)?;
            let mut out = vec![0.0; grid.n_nodes()];
            for k in 0..d {
                let src = f.component_values(comp + k);
                apply_add(&grid, Axis::space(k), Order::First, &src, &mut out, 1.0);
            }
            Field::from_values(grid, 1, out)
        }
        DiffKind::Grad => {
            let src = f.component_values(comp);
            let parts: Vec<Vec<f64>> = (0..grid.space_dim())
                .map(|k| apply(&grid, Axis::space(k), Order::First, &src))
                .collect();
            let refs: Vec<&[f64]> = parts.iter().map(|p| p.as_slice()).collect();
            Field::from_components(grid, &refs)
        }
    }
}
