//! Mixed dual action for two-dimensional Navier-Stokes with a stress-like
//! field `A` and a pressure multiplier `omega`. Evaluation and gradients
//! only; no ascent is attempted on it.

use alloc::vec;
use alloc::vec::Vec;

use super::ns_dual::{deinterleave2, interleave2, jacobian, lk_nodes, navier_stokes_residual};
use super::{
    check_initial, check_state_len, conjugate_field, initial_term, split_state, split_state_mut,
    DualProblem, FieldLayout,
};
use crate::diff::{apply_add, apply_transpose_add, Order};
use crate::error::{Error, Result};
use crate::grid::{Axis, Field, SpaceTimeGrid};
use crate::legendre::{MSpec, PotentialSpec};
use crate::math::{sqrt, SQRT_2};

const LAYOUT: [FieldLayout; 4] = [
    FieldLayout {
        name: "A",
        components: 3,
        constrained: true,
    },
    FieldLayout {
        name: "gamma",
        components: 1,
        constrained: true,
    },
    FieldLayout {
        name: "lambda",
        components: 2,
        constrained: true,
    },
    FieldLayout {
        name: "omega",
        components: 1,
        constrained: false,
    },
];

/// Branch of the sign pair in the mixed action: `Upper` gives
/// `tau = A + nu_hat E` and the density term `-R*(tau)`, `Lower` flips both.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Upper,
    Lower,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Upper => 1.0,
            Sign::Lower => -1.0,
        }
    }
    pub fn as_str(self) -> &'static str {
        match self {
            Sign::Upper => "upper",
            Sign::Lower => "lower",
        }
    }
}

impl core::str::FromStr for Sign {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "upper" => Ok(Sign::Upper),
            "lower" => Ok(Sign::Lower),
            other => Err(Error::InvalidArgument(alloc::format!(
                "unknown sign choice `{other}`"
            ))),
        }
    }
}

/// Gradients of the mixed action, one field per dual variable.
#[derive(Debug, Clone, PartialEq)]
pub struct NsMixedGradient {
    /// Components `xx, xy, yy` (the `xy` entry carries both off-diagonals).
    pub a: Field,
    pub gamma: Field,
    pub lambda: Field,
    pub omega: Field,
}

/// `S = sum w (-p.Kp / 2 - s R*(tau) + omega div lambda) + sum_x w_x lambda(x, 0) . v0(x)`
/// with `p_k = d_j A_kj + d_k gamma - d_t lambda_k`,
/// `tau = s (A + nu_hat (grad lambda + grad lambda^T))`, `s = ` [`Sign::factor`].
/// `R` acts on symmetric tensors in Mandel coordinates `(D11, sqrt2 D12, D22)`.
#[derive(Debug, Clone)]
pub struct NsMixedProblem {
    nu_hat: f64,
    rho0: f64,
    c: f64,
    r: MSpec,
    sign: Sign,
    v0: Option<Vec<f64>>,
    grid: SpaceTimeGrid,
}

struct Forward {
    lambda: Vec<f64>,
    div: Vec<f64>,
    omega: Vec<f64>,
    p: [Vec<f64>; 2],
    v: [Vec<f64>; 2],
    /// `D` as `xx, xy, yy` per node.
    d: Vec<[f64; 3]>,
    rstar: Vec<f64>,
}

impl NsMixedProblem {
    pub fn new(
        nu_hat: f64,
        rho0: f64,
        c: f64,
        r: PotentialSpec,
        sign: Sign,
        v0: Option<Vec<f64>>,
        grid: SpaceTimeGrid,
    ) -> Result<Self> {
        if grid.space_dim() != 2 {
            return Err(Error::InvalidGrid(
                "Navier-Stokes problems need two space dimensions".into(),
            ));
        }
        if !(c > 0.0) || !(rho0 > 0.0) || !(nu_hat >= 0.0) {
            return Err(Error::InvalidArgument(
                "need c > 0, rho0 > 0 and nu_hat >= 0".into(),
            ));
        }
        if r.dim() != 3 {
            return Err(Error::DimensionMismatch {
                context: "tensor potential R (Mandel coordinates)",
                expected: 3,
                found: r.dim(),
            });
        }
        if let Some(v0) = &v0 {
            check_initial(&grid, 2, v0, "v0")?;
        }
        Ok(NsMixedProblem {
            nu_hat,
            rho0,
            c,
            r: MSpec::uncoupled(r),
            sign,
            v0,
            grid,
        })
    }

    pub fn sign(&self) -> Sign {
        self.sign
    }

    fn forward(&self, x: &[f64]) -> Result<Forward> {
        let g = &self.grid;
        let nn = g.n_nodes();
        check_state_len(7 * nn, x)?;
        let mut x = x.to_vec();
        self.project(&mut x);
        let parts = split_state(&LAYOUT, nn, &x);
        let (a, gamma, omega) = (parts[0], parts[1], parts[3]);
        let lam = deinterleave2(parts[2]);
        let j = jacobian(g, &lam);
        let a_comp = |c: usize| -> Vec<f64> { a.iter().skip(c).step_by(3).copied().collect() };
        let (axx, axy, ayy) = (a_comp(0), a_comp(1), a_comp(2));
        let mut p = [vec![0.0; nn], vec![0.0; nn]];
        apply_add(g, Axis::X, Order::First, &axx, &mut p[0], 1.0);
        apply_add(g, Axis::Y, Order::First, &axy, &mut p[0], 1.0);
        apply_add(g, Axis::X, Order::First, &axy, &mut p[1], 1.0);
        apply_add(g, Axis::Y, Order::First, &ayy, &mut p[1], 1.0);
        for k in 0..2 {
            apply_add(g, Axis::space(k), Order::First, gamma, &mut p[k], 1.0);
            apply_add(g, Axis::T, Order::First, &lam[k], &mut p[k], -1.0);
        }
        let (_, ks) = lk_nodes(self.c, &j)?;
        let mut v = [vec![0.0; nn], vec![0.0; nn]];
        for n in 0..nn {
            let vn = ks[n].mul_vec([p[0][n], p[1][n]]);
            v[0][n] = vn[0];
            v[1][n] = vn[1];
        }
        let s = self.sign.factor();
        let nu = self.nu_hat;
        let mut tau = vec![0.0; 3 * nn];
        for n in 0..nn {
            tau[3 * n] = s * (axx[n] + 2.0 * nu * j[0][0][n]);
            tau[3 * n + 1] = SQRT_2 * s * (axy[n] + nu * (j[0][1][n] + j[1][0][n]));
            tau[3 * n + 2] = s * (ayy[n] + 2.0 * nu * j[1][1][n]);
        }
        let sol = conjugate_field(&self.r, &tau, &[], nn, None)?;
        let d = (0..nn)
            .map(|n| [sol.u[3 * n], sol.u[3 * n + 1] / SQRT_2, sol.u[3 * n + 2]])
            .collect();
        Ok(Forward {
            lambda: parts[2].to_vec(),
            div: (0..nn).map(|n| j[0][0][n] + j[1][1][n]).collect(),
            omega: omega.to_vec(),
            p,
            v,
            d,
            rstar: sol.mstar,
        })
    }

    fn eval(&self, x: &[f64], grad: Option<&mut [f64]>) -> Result<f64> {
        let f = self.forward(x)?;
        let g = &self.grid;
        let nn = g.n_nodes();
        let w = g.weights();
        let sgn = self.sign.factor();
        let mut acc = crate::math::Sum::new();
        for n in 0..nn {
            let pv = f.p[0][n] * f.v[0][n] + f.p[1][n] * f.v[1][n];
            acc.add(w[n] * (-0.5 * pv - sgn * f.rstar[n] + f.omega[n] * f.div[n]));
        }
        let mut s = acc.value();
        let Some(out) = grad else {
            if let Some(v0) = &self.v0 {
                s += initial_term(g, 2, &f.lambda, v0, 1.0, None);
            }
            return Ok(s);
        };
        out.fill(0.0);
        let a: [Vec<f64>; 2] = [
            (0..nn).map(|n| -w[n] * f.v[0][n]).collect(),
            (0..nn).map(|n| -w[n] * f.v[1][n]).collect(),
        ];
        let mut ga = [vec![0.0; nn], vec![0.0; nn], vec![0.0; nn]];
        let mut gl = [vec![0.0; nn], vec![0.0; nn]];
        let mut parts = split_state_mut(&LAYOUT, nn, out);
        apply_transpose_add(g, Axis::X, Order::First, &a[0], &mut ga[0], 1.0);
        apply_transpose_add(g, Axis::Y, Order::First, &a[0], &mut ga[1], 1.0);
        apply_transpose_add(g, Axis::X, Order::First, &a[1], &mut ga[1], 1.0);
        apply_transpose_add(g, Axis::Y, Order::First, &a[1], &mut ga[2], 1.0);
        for n in 0..nn {
            ga[0][n] -= w[n] * f.d[n][0];
            ga[1][n] -= 2.0 * w[n] * f.d[n][1];
            ga[2][n] -= w[n] * f.d[n][2];
        }
        for k in 0..2 {
            apply_transpose_add(g, Axis::space(k), Order::First, &a[k], parts[1], 1.0);
            apply_transpose_add(g, Axis::T, Order::First, &a[k], &mut gl[k], -1.0);
        }
        let dij = |n: usize, i: usize, j: usize| f.d[n][i + j];
        for i in 0..2 {
            for j in 0..2 {
                let cij: Vec<f64> = (0..nn)
                    .map(|n| {
                        let diag = if i == j { f.omega[n] } else { 0.0 };
                        w[n] * (f.v[i][n] * f.v[j][n] - 2.0 * self.nu_hat * dij(n, i, j) + diag)
                    })
                    .collect();
                apply_transpose_add(g, Axis::space(j), Order::First, &cij, &mut gl[i], 1.0);
            }
        }
        for n in 0..nn {
            for c in 0..3 {
                parts[0][3 * n + c] = ga[c][n];
            }
            parts[3][n] = w[n] * f.div[n];
        }
        parts[2].copy_from_slice(&interleave2(&gl[0], &gl[1]));
        if let Some(v0) = &self.v0 {
            s += initial_term(g, 2, &f.lambda, v0, 1.0, Some(parts[2]));
        }
        self.project(out);
        Ok(s)
    }

    /// Objective and gradients with respect to all four fields.
    pub fn objective(
        &self,
        a: &Field,
        gamma: &Field,
        lambda: &Field,
        omega: &Field,
    ) -> Result<(f64, NsMixedGradient)> {
        let x = self.flatten(a, gamma, lambda, omega)?;
        let mut g = vec![0.0; x.len()];
        let s = self.eval(&x, Some(&mut g))?;
        let nn = self.grid.n_nodes();
        let f = |range: core::ops::Range<usize>, comps| {
            Field::from_values(self.grid, comps, g[range].to_vec())
        };
        Ok((
            s,
            NsMixedGradient {
                a: f(0..3 * nn, 3)?,
                gamma: f(3 * nn..4 * nn, 1)?,
                lambda: f(4 * nn..6 * nn, 2)?,
                omega: f(6 * nn..7 * nn, 1)?,
            },
        ))
    }

    /// Discrete `div lambda` of the projected dual field, nodewise.
    pub fn divergence(&self, lambda: &Field) -> Result<Field> {
        let nn = self.grid.n_nodes();
        let mut x = vec![0.0; 7 * nn];
        x[4 * nn..6 * nn].copy_from_slice(lambda.values());
        self.project(&mut x);
        let lam = deinterleave2(&x[4 * nn..6 * nn]);
        let j = jacobian(&self.grid, &lam);
        Field::from_values(
            self.grid,
            1,
            (0..nn).map(|n| j[0][0][n] + j[1][1][n]).collect(),
        )
    }

    /// `v = K p` and `P = rho0 omega`.
    pub fn recover_velocity_pressure(
        &self,
        a: &Field,
        gamma: &Field,
        lambda: &Field,
        omega: &Field,
    ) -> Result<(Field, Field)> {
        let f = self.forward(&self.flatten(a, gamma, lambda, omega)?)?;
        Ok((
            Field::from_values(self.grid, 2, interleave2(&f.v[0], &f.v[1]))?,
            Field::from_values(
                self.grid,
                1,
                f.omega.iter().map(|o| self.rho0 * o).collect(),
            )?,
        ))
    }

    fn flatten(&self, a: &Field, gamma: &Field, lambda: &Field, omega: &Field) -> Result<Vec<f64>> {
        let mut x = Vec::with_capacity(7 * self.grid.n_nodes());
        for (f, comps) in [(a, 3), (gamma, 1), (lambda, 2), (omega, 1)] {
            if f.grid() != &self.grid || f.components() != comps {
                return Err(Error::DimensionMismatch {
                    context: "mixed Navier-Stokes field components",
                    expected: comps,
                    found: f.components(),
                });
            }
            x.extend_from_slice(f.values());
        }
        Ok(x)
    }
}

impl DualProblem for NsMixedProblem {
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
        let f = self.forward(x)?;
        let (m, d) = navier_stokes_residual(&self.grid, self.nu_hat, &f.v, &f.omega);
        Ok(sqrt(m * m + d * d))
    }
}
