//! Dual of the two-dimensional incompressible Navier-Stokes equations.

use alloc::vec;
use alloc::vec::Vec;

use super::{
    check_initial, check_state_len, conjugate_field, initial_term, interior_rms, split_state,
    split_state_mut, DualProblem, FieldLayout,
};
use crate::diff::{apply, apply_add, apply_transpose_add, Order};
use crate::error::{Error, Result};
use crate::grid::{project_constrained, Axis, Field, SpaceTimeGrid};
use crate::legendre::{MSpec, PotentialSpec};
use crate::linalg::Sym2;

/// Nodes with `|det L|` below this are reported as singular.
pub const SINGULAR_DET: f64 = 1e-10;

const LAYOUT: [FieldLayout; 2] = [
    FieldLayout {
        name: "lambda",
        components: 2,
        constrained: true,
    },
    FieldLayout {
        name: "gamma",
        components: 1,
        constrained: true,
    },
];

/// Nodal `L = cI + J + J^T`, `K = L^-1` (stored `xx, xy, yy`) and `det L`.
#[derive(Debug, Clone, PartialEq)]
pub struct LkFields {
    pub l: Field,
    pub k: Field,
    pub det: Field,
}

/// `J[i][j] = d_j lambda_i` for the two de-interleaved components.
pub(crate) fn jacobian(grid: &SpaceTimeGrid, lambda: &[Vec<f64>; 2]) -> [[Vec<f64>; 2]; 2] {
    let d = |i: usize, j: usize| apply(grid, Axis::space(j), Order::First, &lambda[i]);
    [[d(0, 0), d(0, 1)], [d(1, 0), d(1, 1)]]
}

/// Nodal `L` and `K`, failing with the list of singular nodes.
pub(crate) fn lk_nodes(c: f64, j: &[[Vec<f64>; 2]; 2]) -> Result<(Vec<Sym2>, Vec<Sym2>)> {
    let nn = j[0][0].len();
    let mut ls = Vec::with_capacity(nn);
    let mut ks = Vec::with_capacity(nn);
    let mut singular = Vec::new();
    let mut min_abs_det = f64::INFINITY;
    for n in 0..nn {
        let l = Sym2 {
            xx: c + 2.0 * j[0][0][n],
            xy: j[0][1][n] + j[1][0][n],
            yy: c + 2.0 * j[1][1][n],
        };
        let det = l.det();
        min_abs_det = min_abs_det.min(det.abs());
        if !(det.abs() >= SINGULAR_DET) {
            singular.push(n);
        }
        ls.push(l);
        ks.push(l.inverse());
    }
    if !singular.is_empty() {
        return Err(Error::SingularL {
            nodes: singular,
            min_abs_det,
        });
    }
    Ok((ls, ks))
}

pub(crate) fn deinterleave2(x: &[f64]) -> [Vec<f64>; 2] {
    [
        x.iter().step_by(2).copied().collect(),
        x.iter().skip(1).step_by(2).copied().collect(),
    ]
}

pub(crate) fn interleave2(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).flat_map(|(&x, &y)| [x, y]).collect()
}

/// Interior RMS of the momentum and continuity residuals of `(v, omega)`,
/// where `omega` is the kinematic pressure `P / rho0`.
pub(crate) fn navier_stokes_residual(
    grid: &SpaceTimeGrid,
    nu_hat: f64,
    v: &[Vec<f64>; 2],
    omega: &[f64],
) -> (f64, f64) {
    let nn = grid.n_nodes();
    let dv = jacobian(grid, v);
    let mut mom = [vec![0.0; nn], vec![0.0; nn]];
    for k in 0..2 {
        apply_add(grid, Axis::T, Order::First, &v[k], &mut mom[k], -1.0);
        for j in 0..2 {
            let conv: Vec<f64> = (0..nn).map(|n| v[k][n] * v[j][n]).collect();
            apply_add(grid, Axis::space(j), Order::First, &conv, &mut mom[k], -1.0);
            let visc: Vec<f64> = (0..nn)
                .map(|n| nu_hat * (dv[k][j][n] + dv[j][k][n]))
                .collect();
            apply_add(grid, Axis::space(j), Order::First, &visc, &mut mom[k], 1.0);
        }
        apply_add(grid, Axis::space(k), Order::First, omega, &mut mom[k], -1.0);
    }
    let div: Vec<f64> = (0..nn).map(|n| dv[0][0][n] + dv[1][1][n]).collect();
    (
        interior_rms(grid, &[&mom[0], &mom[1]]),
        interior_rms(grid, &[&div]),
    )
}

/// Everything the objective, its gradient and the recovery share.
struct Forward {
    lambda: Vec<f64>,
    ls: Vec<Sym2>,
    p: [Vec<f64>; 2],
    v: [Vec<f64>; 2],
    omega: Vec<f64>,
    gstar: Vec<f64>,
}

/// `S[lambda, gamma] = sum w (-p.Kp / 2 - G*(xi)) + sum_x w_x lambda(x, 0) . v0(x)`
/// with `p_k = -nu_hat (lap lambda_k + d_k div lambda) + d_k gamma - d_t lambda_k`,
/// `xi = -div lambda` and `L = cI + grad lambda + grad lambda^T`.
#[derive(Debug, Clone)]
pub struct NsDualProblem {
    nu_hat: f64,
    rho0: f64,
    c: f64,
    g: MSpec,
    v0: Option<Vec<f64>>,
    grid: SpaceTimeGrid,
}

impl NsDualProblem {
    /// `g` is the scalar pressure potential; `v0`, when given, is the initial
    /// velocity interleaved per space node.
    pub fn new(
        nu_hat: f64,
        rho0: f64,
        c: f64,
        g: PotentialSpec,
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
        if g.dim() != 1 {
            return Err(Error::DimensionMismatch {
                context: "pressure potential G",
                expected: 1,
                found: g.dim(),
            });
        }
        if let Some(v0) = &v0 {
            check_initial(&grid, 2, v0, "v0")?;
        }
        Ok(NsDualProblem {
            nu_hat,
            rho0,
            c,
            g: MSpec::uncoupled(g),
            v0,
            grid,
        })
    }

    pub fn nu_hat(&self) -> f64 {
        self.nu_hat
    }
    pub fn rho0(&self) -> f64 {
        self.rho0
    }
    pub fn c(&self) -> f64 {
        self.c
    }

    /// Nodal `L`, `K` and `det L` of a dual field (projected first).
    pub fn assemble_lk(&self, lambda: &Field) -> Result<LkFields> {
        self.check_field(lambda, 2)?;
        let mut lam = lambda.values().to_vec();
        project_constrained(&self.grid, 2, &mut lam);
        let j = jacobian(&self.grid, &deinterleave2(&lam));
        let (ls, ks) = lk_nodes(self.c, &j)?;
        let flat = |m: &[Sym2]| {
            m.iter()
                .flat_map(|s| [s.xx, s.xy, s.yy])
                .collect::<Vec<_>>()
        };
        Ok(LkFields {
            l: Field::from_values(self.grid, 3, flat(&ls))?,
            k: Field::from_values(self.grid, 3, flat(&ks))?,
            det: Field::from_values(self.grid, 1, ls.iter().map(|l| l.det()).collect())?,
        })
    }

    fn forward(&self, x: &[f64]) -> Result<Forward> {
        let g = &self.grid;
        let nn = g.n_nodes();
        check_state_len(3 * nn, x)?;
        let mut x = x.to_vec();
        self.project(&mut x);
        let parts = split_state(&LAYOUT, nn, &x);
        let gamma = parts[1];
        let lam = deinterleave2(parts[0]);
        let j = jacobian(g, &lam);
        let div: Vec<f64> = (0..nn).map(|n| j[0][0][n] + j[1][1][n]).collect();
        let mut p = [vec![0.0; nn], vec![0.0; nn]];
        for k in 0..2 {
            let pk = &mut p[k];
            apply_add(g, Axis::X, Order::Second, &lam[k], pk, -self.nu_hat);
            apply_add(g, Axis::Y, Order::Second, &lam[k], pk, -self.nu_hat);
            apply_add(g, Axis::space(k), Order::First, &div, pk, -self.nu_hat);
            apply_add(g, Axis::space(k), Order::First, gamma, pk, 1.0);
            apply_add(g, Axis::T, Order::First, &lam[k], pk, -1.0);
        }
        let (ls, ks) = lk_nodes(self.c, &j)?;
        let mut v = [vec![0.0; nn], vec![0.0; nn]];
        for n in 0..nn {
            let vn = ks[n].mul_vec([p[0][n], p[1][n]]);
            v[0][n] = vn[0];
            v[1][n] = vn[1];
        }
        let xi: Vec<f64> = div.iter().map(|d| -d).collect();
        let sol = conjugate_field(&self.g, &xi, &[], nn, None)?;
        Ok(Forward {
            lambda: parts[0].to_vec(),
            ls,
            p,
            v,
            omega: sol.u,
            gstar: sol.mstar,
        })
    }

    fn eval(&self, x: &[f64], grad: Option<&mut [f64]>) -> Result<f64> {
        let f = self.forward(x)?;
        let g = &self.grid;
        let nn = g.n_nodes();
        let w = g.weights();
        let mut acc = crate::math::Sum::new();
        for n in 0..nn {
            let pv = f.p[0][n] * f.v[0][n] + f.p[1][n] * f.v[1][n];
            acc.add(w[n] * (-0.5 * pv - f.gstar[n]));
        }
        let mut s = acc.value();
        let Some(out) = grad else {
            if let Some(v0) = &self.v0 {
                s += initial_term(g, 2, &f.lambda, v0, 1.0, None);
            }
            return Ok(s);
        };
        out.fill(0.0);
        let mut gl = [vec![0.0; nn], vec![0.0; nn]];
        let mut q: Vec<f64> = (0..nn).map(|n| w[n] * f.omega[n]).collect();
        let mut parts = split_state_mut(&LAYOUT, nn, out);
        let a: [Vec<f64>; 2] = [
            (0..nn).map(|n| -w[n] * f.v[0][n]).collect(),
            (0..nn).map(|n| -w[n] * f.v[1][n]).collect(),
        ];
        for k in 0..2 {
            apply_transpose_add(g, Axis::T, Order::First, &a[k], &mut gl[k], -1.0);
            apply_transpose_add(g, Axis::X, Order::Second, &a[k], &mut gl[k], -self.nu_hat);
            apply_transpose_add(g, Axis::Y, Order::Second, &a[k], &mut gl[k], -self.nu_hat);
            apply_transpose_add(g, Axis::space(k), Order::First, &a[k], &mut q, -self.nu_hat);
            apply_transpose_add(g, Axis::space(k), Order::First, &a[k], parts[1], 1.0);
        }
        for i in 0..2 {
            for jx in 0..2 {
                let mut cij: Vec<f64> = (0..nn).map(|n| w[n] * f.v[i][n] * f.v[jx][n]).collect();
                if i == jx {
                    cij.iter_mut().zip(&q).for_each(|(c, q)| *c += q);
                }
                apply_transpose_add(g, Axis::space(jx), Order::First, &cij, &mut gl[i], 1.0);
            }
        }
        parts[0].copy_from_slice(&interleave2(&gl[0], &gl[1]));
        if let Some(v0) = &self.v0 {
            s += initial_term(g, 2, &f.lambda, v0, 1.0, Some(parts[0]));
        }
        self.project(out);
        Ok(s)
    }

    pub fn objective_and_gradient(
        &self,
        lambda: &Field,
        gamma: &Field,
    ) -> Result<(f64, Field, Field)> {
        let x = self.flatten(lambda, gamma)?;
        let mut g = vec![0.0; x.len()];
        let s = self.eval(&x, Some(&mut g))?;
        let nn = self.grid.n_nodes();
        Ok((
            s,
            Field::from_values(self.grid, 2, g[..2 * nn].to_vec())?,
            Field::from_values(self.grid, 1, g[2 * nn..].to_vec())?,
        ))
    }

    /// `v = K p` and `P = rho0 omega` with `G'(omega) = xi`.
    pub fn recover_velocity_pressure(
        &self,
        lambda: &Field,
        gamma: &Field,
    ) -> Result<(Field, Field)> {
        let f = self.forward(&self.flatten(lambda, gamma)?)?;
        self.fields_from(&f)
    }

    fn fields_from(&self, f: &Forward) -> Result<(Field, Field)> {
        let v = Field::from_values(self.grid, 2, interleave2(&f.v[0], &f.v[1]))?;
        let p = Field::from_values(
            self.grid,
            1,
            f.omega.iter().map(|o| self.rho0 * o).collect(),
        )?;
        Ok((v, p))
    }

    /// `(momentum, divergence)` interior RMS residuals of the recovered
    /// velocity and pressure.
    pub fn el_residual(&self, lambda: &Field, gamma: &Field) -> Result<(f64, f64)> {
        self.el_residual_flat(&self.flatten(lambda, gamma)?)
    }

    fn el_residual_flat(&self, x: &[f64]) -> Result<(f64, f64)> {
        let f = self.forward(x)?;
        Ok(navier_stokes_residual(
            &self.grid,
            self.nu_hat,
            &f.v,
            &f.omega,
        ))
    }

    /// Weak continuity residual `-sum_k D_k^T (w v_k)`, zero on constrained
    /// nodes.
    pub fn weak_divergence(&self, v: &Field) -> Result<Field> {
        self.check_field(v, 2)?;
        let g = &self.grid;
        let w = g.weights();
        let mut out = vec![0.0; g.n_nodes()];
        for k in 0..2 {
            let wv: Vec<f64> = v
                .component_values(k)
                .iter()
                .zip(&w)
                .map(|(v, w)| v * w)
                .collect();
            apply_transpose_add(g, Axis::space(k), Order::First, &wv, &mut out, -1.0);
        }
        project_constrained(g, 1, &mut out);
        Field::from_values(*g, 1, out)
    }

    /// Nodal `v.p - v.Lv / 2 - p.Kp / 2`, zero in exact arithmetic.
    pub fn vp_identity_defect(&self, lambda: &Field, gamma: &Field) -> Result<Vec<f64>> {
        let f = self.forward(&self.flatten(lambda, gamma)?)?;
        Ok((0..self.grid.n_nodes())
            .map(|n| {
                let (p, v) = ([f.p[0][n], f.p[1][n]], [f.v[0][n], f.v[1][n]]);
                let k = f.ls[n].inverse();
                (v[0] * p[0] + v[1] * p[1]) - 0.5 * f.ls[n].quad(v) - 0.5 * k.quad(p)
            })
            .collect())
    }

    fn check_field(&self, f: &Field, comps: usize) -> Result<()> {
        if f.grid() != &self.grid || f.components() != comps {
            return Err(Error::DimensionMismatch {
                context: "Navier-Stokes field components",
                expected: comps,
                found: f.components(),
            });
        }
        Ok(())
    }

    fn flatten(&self, lambda: &Field, gamma: &Field) -> Result<Vec<f64>> {
        self.check_field(lambda, 2)?;
        self.check_field(gamma, 1)?;
        let mut x = lambda.values().to_vec();
        x.extend_from_slice(gamma.values());
        Ok(x)
    }
}

impl DualProblem for NsDualProblem {
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
        let (m, d) = self.el_residual_flat(x)?;
        Ok(crate::math::sqrt(m * m + d * d))
    }
}
