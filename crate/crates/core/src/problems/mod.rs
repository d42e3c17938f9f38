//! Discrete dual variational problems.
//!
//! Every family assembles its `P`-fields (and parameter fields `L`) from the
//! dual fields with the operators in [`crate::diff`], evaluates the dual
//! objective `S = sum_nodes w * density + initial-condition term` with
//! trapezoid weights `w`, and returns the exact gradient of that discrete
//! objective. Dual fields vanish on constrained nodes (final time slice and,
//! for Dirichlet grids, the spatial boundary); objectives project their
//! input, so derivatives with respect to constrained entries are exactly
//! zero.
//!
//! The flattened state of a problem is the concatenation of its dual fields
//! in [`DualProblem::layout`] order, each stored node-major with the
//! component index fastest.

mod conservation;
mod heat;
mod hj;
mod ns_dual;
mod ns_mixed;

pub use conservation::ConservationLawProblem;
pub use heat::HeatProblem;
pub use hj::{HjProblem, HjResiduals};
pub use ns_dual::{LkFields, NsDualProblem, SINGULAR_DET};
pub use ns_mixed::{NsMixedGradient, NsMixedProblem, Sign};

use alloc::vec;
use alloc::vec::Vec;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{project_constrained, SpaceTimeGrid};
use crate::legendre::{MSpec, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::math::{sin, sqrt, PI};
use crate::rng::uniform;

/// One dual field of a problem's flattened state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FieldLayout {
    pub name: &'static str,
    pub components: usize,
    /// Whether the field is pinned to zero on constrained nodes.
    pub constrained: bool,
}

/// A discrete dual objective over a flattened multi-field state.
pub trait DualProblem {
    fn grid(&self) -> &SpaceTimeGrid;

    fn layout(&self) -> &[FieldLayout];

    /// Objective at the projection of `x`; when `grad` is given it receives
    /// the exact gradient, zero on constrained entries.
    fn evaluate(&self, x: &[f64], grad: Option<&mut [f64]>) -> Result<f64>;

    /// Norm of the primal PDE residual of the fields recovered from `x`.
    fn primal_residual(&self, x: &[f64]) -> Result<f64>;

    fn n_vars(&self) -> usize {
        let n = self.grid().n_nodes();
        self.layout().iter().map(|f| f.components * n).sum()
    }

    fn objective(&self, x: &[f64]) -> Result<f64> {
        self.evaluate(x, None)
    }

    /// Zeroes constrained entries in place.
    fn project(&self, x: &mut [f64]) {
        let grid = *self.grid();
        let mut offset = 0;
        for f in self.layout() {
            let len = f.components * grid.n_nodes();
            if f.constrained {
                project_constrained(&grid, f.components, &mut x[offset..offset + len]);
            }
            offset += len;
        }
    }

    /// `true` for entries that are free to vary.
    fn free_mask(&self) -> Vec<bool> {
        let grid = *self.grid();
        let mut mask = Vec::with_capacity(self.n_vars());
        for f in self.layout() {
            for node in 0..grid.n_nodes() {
                let free = !(f.constrained && grid.is_constrained(node));
                mask.extend(core::iter::repeat_n(free, f.components));
            }
        }
        mask
    }
}

/// Splits a flattened state into per-field slices.
pub fn split_state<'a>(layout: &[FieldLayout], n_nodes: usize, x: &'a [f64]) -> Vec<&'a [f64]> {
    let mut out = Vec::with_capacity(layout.len());
    let mut rest = x;
    for f in layout {
        let (head, tail) = rest.split_at(f.components * n_nodes);
        out.push(head);
        rest = tail;
    }
    out
}

pub(crate) fn split_state_mut<'a>(
    layout: &[FieldLayout],
    n_nodes: usize,
    x: &'a mut [f64],
) -> Vec<&'a mut [f64]> {
    let mut out = Vec::with_capacity(layout.len());
    let mut rest = x;
    for f in layout {
        let (head, tail) = core::mem::take(&mut rest).split_at_mut(f.components * n_nodes);
        out.push(head);
        rest = tail;
    }
    out
}

pub(crate) fn check_state_len(expected: usize, x: &[f64]) -> Result<()> {
    if x.len() != expected {
        return Err(Error::DimensionMismatch {
            context: "dual state",
            expected,
            found: x.len(),
        });
    }
    Ok(())
}

/// De-interleaves component `comp` of an interleaved nodal vector.
pub(crate) fn component(values: &[f64], components: usize, comp: usize) -> Vec<f64> {
    values
        .iter()
        .skip(comp)
        .step_by(components)
        .copied()
        .collect()
}

/// Nodewise Legendre solve over a whole grid.
pub(crate) struct ConjugateField {
    /// `M*(P, L)` per node.
    pub mstar: Vec<f64>,
    /// `U(P, L)` per node, interleaved `dim_u`.
    pub u: Vec<f64>,
    /// `F(U)` per node, interleaved `dim_l`.
    pub flux: Vec<f64>,
}

/// Solves `dM/dU (U, L) = P` at every node, seeding each Newton solve with
/// the previous node's solution. A failed warm-started solve is retried once
/// from `U = 0`. When `margin` is set, the smallest eigenvalue of
/// `d^2M/dU^2` at the solution must reach it.
pub(crate) fn conjugate_field(
    spec: &MSpec,
    p: &[f64],
    l: &[f64],
    n_nodes: usize,
    margin: Option<f64>,
) -> Result<ConjugateField> {
    let (n, m) = (spec.dim_u(), spec.dim_l());
    debug_assert_eq!(p.len(), n * n_nodes);
    debug_assert_eq!(l.len(), m * n_nodes);
    let mut ws = spec.workspace();
    let mut out = ConjugateField {
        mstar: vec![0.0; n_nodes],
        u: vec![0.0; n * n_nodes],
        flux: vec![0.0; m * n_nodes],
    };
    let mut guess = vec![0.0; n];
    for node in 0..n_nodes {
        let pn = &p[node * n..(node + 1) * n];
        let ln = &l[node * m..(node + 1) * m];
        let mut u = guess.clone();
        let flux = &mut out.flux[node * m..(node + 1) * m];
        let value =
            match spec.conjugate(pn, ln, &mut u, flux, DEFAULT_TOL, DEFAULT_MAX_ITER, &mut ws) {
                Ok((v, _)) => v,
                Err(_) => {
                    u.fill(0.0);
                    spec.conjugate(pn, ln, &mut u, flux, DEFAULT_TOL, DEFAULT_MAX_ITER, &mut ws)?
                        .0
                }
            };
        if let Some(margin) = margin {
            let eig = spec.monotonicity_certificate(&u, ln);
            if !(eig >= margin) {
                return Err(Error::InvertibilityMargin {
                    node,
                    value: eig,
                    margin,
                });
            }
        }
        out.mstar[node] = value;
        out.u[node * n..(node + 1) * n].copy_from_slice(&u);
        guess.copy_from_slice(&u);
    }
    Ok(out)
}

/// Root-mean-square of `r` over nodes at least one node away from every
/// non-periodic boundary, pooled over `components`.
pub(crate) fn interior_rms(grid: &SpaceTimeGrid, parts: &[&[f64]]) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for node in 0..grid.n_nodes() {
        if grid.is_interior(node, 1) {
            for r in parts {
                sum += r[node] * r[node];
                count += 1;
            }
        }
    }
    if count == 0 {
        0.0
    } else {
        sqrt(sum / count as f64)
    }
}

/// Initial-condition vector of length `space_nodes * components`, checked
/// against the grid.
pub(crate) fn check_initial(
    grid: &SpaceTimeGrid,
    components: usize,
    data: &[f64],
    what: &'static str,
) -> Result<()> {
    let expected = grid.space_nodes() * components;
    if data.len() != expected {
        return Err(Error::DimensionMismatch {
            context: what,
            expected,
            found: data.len(),
        });
    }
    if !data.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite(what));
    }
    Ok(())
}

/// `sign * sum_x w_x lambda(x, 0) . data(x)` and its gradient contribution
/// on the first time slice.
pub(crate) fn initial_term(
    grid: &SpaceTimeGrid,
    components: usize,
    lambda: &[f64],
    data: &[f64],
    sign: f64,
    grad: Option<&mut [f64]>,
) -> f64 {
    let ws = grid.space_weights();
    let mut value = crate::math::Sum::new();
    for (s, w) in ws.iter().enumerate() {
        for c in 0..components {
            value.add(w * lambda[s * components + c] * data[s * components + c]);
        }
    }
    let value = value.value();
    if let Some(g) = grad {
        for (s, w) in ws.iter().enumerate() {
            for c in 0..components {
                g[s * components + c] += sign * w * data[s * components + c];
            }
        }
    }
    sign * value
}

/// Smooth pseudo-random dual state: a few low spatial modes per component,
/// each with a random temporal profile, plus small nodal noise, then
/// projected. `amplitude` bounds the mode coefficients.
pub fn smooth_random_state(
    problem: &dyn DualProblem,
    amplitude: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let grid = *problem.grid();
    let n = grid.n_nodes();
    let len = grid.x_max() - grid.x_min();
    let mut x = Vec::with_capacity(problem.n_vars());
    for f in problem.layout() {
        let mut field = vec![0.0; n * f.components];
        for c in 0..f.components {
            for _ in 0..3 {
                let a = uniform(rng, -amplitude, amplitude);
                let kx = uniform(rng, 0.5, 2.5);
                let ky = uniform(rng, 0.5, 2.5);
                let phx = uniform(rng, 0.0, 2.0 * PI);
                let phy = uniform(rng, 0.0, 2.0 * PI);
                let om = uniform(rng, 0.0, 3.0);
                let pht = uniform(rng, 0.0, 2.0 * PI);
                for node in 0..n {
                    let (t, xx, yy) = grid.position(node);
                    let sx = (xx - grid.x_min()) / len;
                    let sy = (yy - grid.x_min()) / len;
                    let mut v =
                        a * sin(2.0 * PI * kx * sx + phx) * sin(om * t / grid.t_max() + pht);
                    if grid.space_dim() == 2 {
                        v *= sin(2.0 * PI * ky * sy + phy);
                    }
                    field[node * f.components + c] += v;
                }
            }
            for node in 0..n {
                field[node * f.components + c] += uniform(rng, -1e-2, 1e-2) * amplitude;
            }
        }
        x.extend(field);
    }
    problem.project(&mut x);
    x
}
