//! Dual of a scalar first-order system for Hamilton-Jacobi type equations
//! in one space dimension: `u_t = f(u, B, C)` with `B = u_x`, `C = u_xx`.

use alloc::vec;
use alloc::vec::Vec;

use super::{
    check_initial, check_state_len, component, conjugate_field, initial_term, interior_rms,
    split_state, split_state_mut, ConjugateField, DualProblem, FieldLayout,
};
use crate::diff::{apply, apply_add, apply_transpose_add, Order};
use crate::error::{Error, Result};
use crate::grid::{Axis, Field, SpaceTimeGrid};
use crate::legendre::{CouplingSpec, MSpec, PotentialSpec};
use crate::math::sqrt;

const LAYOUT: [FieldLayout; 3] = [
    FieldLayout {
        name: "lambda",
        components: 1,
        constrained: true,
    },
    FieldLayout {
        name: "gamma",
        components: 1,
        constrained: true,
    },
    FieldLayout {
        name: "rho",
        components: 1,
        constrained: true,
    },
];

/// Interior RMS of the three primal consistency equations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HjResiduals {
    /// `u_t - f(u, B, C)`.
    pub evolution: f64,
    /// `B - u_x`.
    pub gradient: f64,
    /// `C - u_xx`.
    pub hessian: f64,
}

impl HjResiduals {
    pub fn combined(&self) -> f64 {
        sqrt(
            self.evolution * self.evolution
                + self.gradient * self.gradient
                + self.hessian * self.hessian,
        )
    }
}

/// `S[lambda, gamma, rho] = -sum w M*(P, lambda) - sum_x w_x lambda(x, 0) u0(x)`
/// with `P = (lambda_t + gamma_x - rho_xx, gamma, rho)` and `U = (u, B, C)`.
#[derive(Debug, Clone)]
pub struct HjProblem {
    spec: MSpec,
    u0: Vec<f64>,
    grid: SpaceTimeGrid,
    margin: Option<f64>,
}

impl HjProblem {
    /// `f` is the right-hand side as a coupling from `U = (u, B, C)` to one
    /// value; `h` a potential over `U`.
    pub fn new(
        f: CouplingSpec,
        h: PotentialSpec,
        u0: Vec<f64>,
        grid: SpaceTimeGrid,
    ) -> Result<Self> {
        if grid.space_dim() != 1 {
            return Err(Error::InvalidGrid(
                "scalar HJ problem needs one space dimension".into(),
            ));
        }
        if h.dim() != 3 || f.dim_l() != 1 {
            return Err(Error::DimensionMismatch {
                context: "HJ potential/coupling over (u, B, C)",
                expected: 3,
                found: h.dim(),
            });
        }
        check_initial(&grid, 1, &u0, "u0")?;
        Ok(HjProblem {
            spec: MSpec::new(h, f)?,
            u0,
            grid,
            margin: None,
        })
    }

    /// Require `min eig d^2M/dU^2 >= margin` at every node. Without it the
    /// ascent can leave the region where `M` is convex in `U`, and there
    /// `-M*` is unbounded above.
    pub fn with_margin(mut self, margin: f64) -> Result<Self> {
        if !(margin > 0.0) {
            return Err(Error::InvalidArgument("margin must be positive".into()));
        }
        self.margin = Some(margin);
        Ok(self)
    }

    pub fn spec(&self) -> &MSpec {
        &self.spec
    }
    pub fn u0(&self) -> &[f64] {
        &self.u0
    }

    fn solve(&self, x: &[f64]) -> Result<(Vec<f64>, ConjugateField)> {
        let nn = self.grid.n_nodes();
        check_state_len(3 * nn, x)?;
        let mut x = x.to_vec();
        self.project(&mut x);
        let parts = split_state(&LAYOUT, nn, &x);
        let (lambda, gamma, rho) = (parts[0], parts[1], parts[2]);
        let g = &self.grid;
        let mut p1 = apply(g, Axis::T, Order::First, lambda);
        apply_add(g, Axis::X, Order::First, gamma, &mut p1, 1.0);
        apply_add(g, Axis::X, Order::Second, rho, &mut p1, -1.0);
        let mut p = vec![0.0; 3 * nn];
        for k in 0..nn {
            p[3 * k] = p1[k];
            p[3 * k + 1] = gamma[k];
            p[3 * k + 2] = rho[k];
        }
        let sol = conjugate_field(&self.spec, &p, lambda, nn, self.margin)?;
        Ok((x, sol))
    }

    fn eval(&self, x: &[f64], grad: Option<&mut [f64]>) -> Result<f64> {
        let (x, sol) = self.solve(x)?;
        let g = &self.grid;
        let nn = g.n_nodes();
        let lambda = &x[..nn];
        let w = g.weights();
        let mut s = -crate::math::sum(sol.mstar.iter().zip(&w).map(|(m, w)| m * w));
        let Some(out) = grad else {
            return Ok(s + initial_term(g, 1, lambda, &self.u0, -1.0, None));
        };
        out.fill(0.0);
        let mut parts = split_state_mut(&LAYOUT, nn, out);
        let [gl, gg, gr] = &mut parts[..] else {
            unreachable!()
        };
        s += initial_term(g, 1, lambda, &self.u0, -1.0, Some(gl));
        let wu: Vec<f64> = (0..nn).map(|k| w[k] * sol.u[3 * k]).collect();
        apply_transpose_add(g, Axis::T, Order::First, &wu, gl, -1.0);
        apply_transpose_add(g, Axis::X, Order::First, &wu, gg, -1.0);
        apply_transpose_add(g, Axis::X, Order::Second, &wu, gr, 1.0);
        for k in 0..nn {
            gl[k] -= w[k] * sol.flux[k];
            gg[k] -= w[k] * sol.u[3 * k + 1];
            gr[k] -= w[k] * sol.u[3 * k + 2];
        }
        self.project(out);
        Ok(s)
    }

    pub fn objective_and_gradient(
        &self,
        lambda: &Field,
        gamma: &Field,
        rho: &Field,
    ) -> Result<(f64, Field, Field, Field)> {
        let x = self.flatten(lambda, gamma, rho)?;
        let mut g = vec![0.0; x.len()];
        let s = self.eval(&x, Some(&mut g))?;
        let nn = self.grid.n_nodes();
        Ok((
            s,
            Field::from_values(self.grid, 1, g[..nn].to_vec())?,
            Field::from_values(self.grid, 1, g[nn..2 * nn].to_vec())?,
            Field::from_values(self.grid, 1, g[2 * nn..].to_vec())?,
        ))
    }

    /// Nodewise `U = (u, B, C)` as three fields.
    pub fn recover_primal(
        &self,
        lambda: &Field,
        gamma: &Field,
        rho: &Field,
    ) -> Result<(Field, Field, Field)> {
        let x = self.flatten(lambda, gamma, rho)?;
        self.recover_flat(&x)
    }

    /// [`Self::recover_primal`] on a flattened `(lambda, gamma, rho)` state.
    pub fn recover_flat(&self, x: &[f64]) -> Result<(Field, Field, Field)> {
        let (_, sol) = self.solve(x)?;
        Ok((
            Field::from_values(self.grid, 1, component(&sol.u, 3, 0))?,
            Field::from_values(self.grid, 1, component(&sol.u, 3, 1))?,
            Field::from_values(self.grid, 1, component(&sol.u, 3, 2))?,
        ))
    }

    /// Residuals of `u_t = f(u, B, C)`, `B = u_x`, `C = u_xx` for recovered
    /// fields.
    pub fn consistency_residuals(&self, u: &Field, b: &Field, c: &Field) -> Result<HjResiduals> {
        let g = &self.grid;
        let nn = g.n_nodes();
        let (u, b, c) = (u.values(), b.values(), c.values());
        let mut evo = apply(g, Axis::T, Order::First, u);
        let mut fval = [0.0];
        for k in 0..nn {
            self.spec.coupling().value(&[u[k], b[k], c[k]], &mut fval);
            evo[k] -= fval[0];
        }
        let mut grad = b.to_vec();
        apply_add(g, Axis::X, Order::First, u, &mut grad, -1.0);
        let mut hess = c.to_vec();
        apply_add(g, Axis::X, Order::Second, u, &mut hess, -1.0);
        Ok(HjResiduals {
            evolution: interior_rms(g, &[&evo]),
            gradient: interior_rms(g, &[&grad]),
            hessian: interior_rms(g, &[&hess]),
        })
    }

    pub fn residuals(&self, x: &[f64]) -> Result<HjResiduals> {
        let (u, b, c) = self.recover_flat(x)?;
        self.consistency_residuals(&u, &b, &c)
    }

    fn flatten(&self, lambda: &Field, gamma: &Field, rho: &Field) -> Result<Vec<f64>> {
        let mut x = Vec::with_capacity(3 * self.grid.n_nodes());
        for f in [lambda, gamma, rho] {
            if f.grid() != &self.grid || f.components() != 1 {
                return Err(Error::DimensionMismatch {
                    context: "HJ dual field",
                    expected: self.grid.n_nodes(),
                    found: f.values().len(),
                });
            }
            x.extend_from_slice(f.values());
        }
        Ok(x)
    }
}

impl DualProblem for HjProblem {
    fn grid(&self) -> &SpaceTimeGrid {
        &self.grid
    }
    fn layout(&self) -> &[FieldLayout] {
        &LAYOUT
    }
    fn evaluate(&self, x: &[f64], grad: Option<&mut [f64]>) -> Result<f64> {
        self.eval(x, grad)
    }
    fn primal_residual(&self, x: &[f64]) -> Result<f64> {
        Ok(self.residuals(x)?.combined())
    }
}
