//! Dual of a system of conservation laws `d_t u_I + d_j f_Ij(u) = 0`.

use alloc::vec;
use alloc::vec::Vec;

use super::{
    check_initial, check_state_len, component, conjugate_field, initial_term, interior_rms,
    ConjugateField, DualProblem, FieldLayout,
};
use crate::diff::{apply_add, apply_transpose_add, Order};
use crate::error::{Error, Result};
use crate::grid::{project_constrained, Axis, Field, SpaceTimeGrid};
use crate::legendre::{CouplingSpec, MSpec, PotentialSpec};

/// `S[lambda] = -sum w M*(p, grad lambda) - sum_x w_x lambda(x, 0) . u0(x)`
/// with `p_I = d_t lambda_I` and `L_(I d + j) = d_j lambda_I`.
#[derive(Debug, Clone)]
pub struct ConservationLawProblem {
    spec: MSpec,
    u0: Vec<f64>,
    grid: SpaceTimeGrid,
    margin: Option<f64>,
    layout: [FieldLayout; 1],
}

impl ConservationLawProblem {
    /// `flux` maps `n = h.dim()` conserved components to `n * d` fluxes. When
    /// `margin` is set, every nodal solve must certify
    /// `min eig d^2M/dU^2 >= margin`, otherwise evaluation fails with
    /// [`Error::InvertibilityMargin`].
    pub fn new(
        flux: CouplingSpec,
        h: PotentialSpec,
        u0: Vec<f64>,
        grid: SpaceTimeGrid,
        margin: Option<f64>,
    ) -> Result<Self> {
        let n = h.dim();
        let d = grid.space_dim();
        if flux.dim_l() != n * d {
            return Err(Error::DimensionMismatch {
                context: "flux dim_l vs n_components * space_dim",
                expected: n * d,
                found: flux.dim_l(),
            });
        }
        if let Some(m) = margin {
            if !(m > 0.0) {
                return Err(Error::InvalidArgument("margin must be positive".into()));
            }
        }
        check_initial(&grid, n, &u0, "u0")?;
        Ok(ConservationLawProblem {
            spec: MSpec::new(h, flux)?,
            u0,
            grid,
            margin,
            layout: [FieldLayout {
                name: "lambda",
                components: n,
                constrained: true,
            }],
        })
    }

    pub fn n_components(&self) -> usize {
        self.spec.dim_u()
    }
    pub fn spec(&self) -> &MSpec {
        &self.spec
    }
    pub fn u0(&self) -> &[f64] {
        &self.u0
    }

    /// `(p, L)` interleaved per node from a projected dual field.
    fn assemble(&self, lambda: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let g = &self.grid;
        let (n, d, nn) = (self.n_components(), g.space_dim(), g.n_nodes());
        let mut p = vec![0.0; n * nn];
        let mut l = vec![0.0; n * d * nn];
        for i in 0..n {
            let li = component(lambda, n, i);
            let pi = crate::diff::apply(g, Axis::T, Order::First, &li);
            for node in 0..nn {
                p[node * n + i] = pi[node];
            }
            for j in 0..d {
                let gj = crate::diff::apply(g, Axis::space(j), Order::First, &li);
                for node in 0..nn {
                    l[node * n * d + i * d + j] = gj[node];
                }
            }
        }
        (p, l)
    }

    fn solve(&self, lambda: &[f64]) -> Result<(Vec<f64>, ConjugateField)> {
        check_state_len(self.n_components() * self.grid.n_nodes(), lambda)?;
        let mut lambda = lambda.to_vec();
        project_constrained(&self.grid, self.n_components(), &mut lambda);
        let (p, l) = self.assemble(&lambda);
        let sol = conjugate_field(&self.spec, &p, &l, self.grid.n_nodes(), self.margin)?;
        Ok((lambda, sol))
    }

    fn eval(&self, lambda: &[f64], grad: Option<&mut [f64]>) -> Result<f64> {
        let (lambda, sol) = self.solve(lambda)?;
        let g = &self.grid;
        let (n, d, nn) = (self.n_components(), g.space_dim(), g.n_nodes());
        let w = g.weights();
        let mut s = -crate::math::sum(sol.mstar.iter().zip(&w).map(|(m, w)| m * w));
        let Some(out) = grad else {
            return Ok(s + initial_term(g, n, &lambda, &self.u0, -1.0, None));
        };
        out.fill(0.0);
        s += initial_term(g, n, &lambda, &self.u0, -1.0, Some(out));
        let mut gi = vec![0.0; nn];
        for i in 0..n {
            gi.fill(0.0);
            let wu: Vec<f64> = (0..nn).map(|k| w[k] * sol.u[k * n + i]).collect();
            apply_transpose_add(g, Axis::T, Order::First, &wu, &mut gi, -1.0);
            for j in 0..d {
                let wf: Vec<f64> = (0..nn)
                    .map(|k| w[k] * sol.flux[k * n * d + i * d + j])
                    .collect();
                apply_transpose_add(g, Axis::space(j), Order::First, &wf, &mut gi, -1.0);
            }
            for node in 0..nn {
                out[node * n + i] += gi[node];
            }
        }
        project_constrained(g, n, out);
        Ok(s)
    }

    pub fn objective_and_gradient(&self, lambda: &Field) -> Result<(f64, Field)> {
        self.check_field(lambda)?;
        let mut g = vec![0.0; lambda.values().len()];
        let s = self.eval(lambda.values(), Some(&mut g))?;
        Ok((s, Field::from_values(self.grid, self.n_components(), g)?))
    }

    /// `u = U(p, grad lambda)` nodewise.
    pub fn recover_primal(&self, lambda: &Field) -> Result<Field> {
        self.check_field(lambda)?;
        let (_, sol) = self.solve(lambda.values())?;
        Field::from_values(self.grid, self.n_components(), sol.u)
    }

    /// Interior RMS of `d_t a_I + d_j b_Ij` with `a = dM*/dP = u` and
    /// `b = dM*/dL = f(u)`: the discrete primal residual of the recovered
    /// field.
    pub fn conservation_residual(&self, lambda: &Field) -> Result<f64> {
        self.check_field(lambda)?;
        let (_, sol) = self.solve(lambda.values())?;
        Ok(self.residual_of(&sol.u, &sol.flux))
    }

    /// The same residual for an arbitrary primal field `u`, e.g. a reference
    /// solution sampled on the grid.
    pub fn primal_residual_of(&self, u: &Field) -> Result<f64> {
        self.check_field(u)?;
        let (n, nl) = (self.n_components(), self.spec.dim_l());
        let nn = self.grid.n_nodes();
        let mut flux = vec![0.0; nl * nn];
        for node in 0..nn {
            self.spec.coupling().value(
                &u.values()[node * n..(node + 1) * n],
                &mut flux[node * nl..(node + 1) * nl],
            );
        }
        Ok(self.residual_of(u.values(), &flux))
    }

    fn residual_of(&self, u: &[f64], flux: &[f64]) -> f64 {
        let g = &self.grid;
        let (n, d, nn) = (self.n_components(), g.space_dim(), g.n_nodes());
        let mut parts = Vec::with_capacity(n);
        for i in 0..n {
            let a = component(u, n, i);
            let mut r = crate::diff::apply(g, Axis::T, Order::First, &a);
            for j in 0..d {
                let b: Vec<f64> = (0..nn).map(|k| flux[k * n * d + i * d + j]).collect();
                apply_add(g, Axis::space(j), Order::First, &b, &mut r, 1.0);
            }
            parts.push(r);
        }
        let refs: Vec<&[f64]> = parts.iter().map(|r| r.as_slice()).collect();
        interior_rms(g, &refs)
    }

    fn check_field(&self, f: &Field) -> Result<()> {
        if f.grid() != &self.grid || f.components() != self.n_components() {
            return Err(Error::DimensionMismatch {
                context: "conservation-law dual field components",
                expected: self.n_components(),
                found: f.components(),
            });
        }
        Ok(())
    }
}

impl DualProblem for ConservationLawProblem {
    fn grid(&self) -> &SpaceTimeGrid {
        &self.grid
    }
    fn layout(&self) -> &[FieldLayout] {
        &self.layout
    }
    fn evaluate(&self, x: &[f64], grad: Option<&mut [f64]>) -> Result<f64> {
        self.eval(x, grad)
    }
    fn primal_residual(&self, x: &[f64]) -> Result<f64> {
        let lambda = Field::from_values(self.grid, self.n_components(), x.to_vec())?;
        self.conservation_residual(&lambda)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::fd_gradient_check;
    use crate::grid::Boundary;
    use crate::legendre::{BurgersFlux, LinearFlux, Quadratic};
    use crate::math::{sin, PI};
    use crate::problems::smooth_random_state;
    use crate::rng;

    fn burgers(grid: SpaceTimeGrid, u0: Vec<f64>, margin: Option<f64>) -> ConservationLawProblem {
        ConservationLawProblem::new(
            CouplingSpec::new(BurgersFlux {
                space_dim: grid.space_dim(),
            })
            .unwrap(),
            PotentialSpec::new(Quadratic { dim: 1, scale: 2.0 }).unwrap(),
            u0,
            grid,
            margin,
        )
        .unwrap()
    }

    #[test]
    fn zero_field_gives_zero() {
        let g = SpaceTimeGrid::new_1d(8, 8, 0.0, 1.0, 1.0).unwrap();
        let prob = burgers(g, vec![0.0; 8], Some(0.5));
        let z = Field::zeros(g, 1);
        let (s, grad) = prob.objective_and_gradient(&z).unwrap();
        assert_eq!(s, 0.0);
        assert!(grad.values().iter().all(|&v| v == 0.0));
        assert!(prob
            .recover_primal(&z)
            .unwrap()
            .values()
            .iter()
            .all(|&v| v == 0.0));
        assert_eq!(prob.conservation_residual(&z).unwrap(), 0.0);
    }

    #[test]
    fn burgers_objective_matches_closed_form_quadrature() {
        // lambda quadratic in x and linear in t: every stencil is exact, so
        // the discrete objective equals the quadrature of the closed form.
        let g = SpaceTimeGrid::new_1d(16, 16, 0.0, 1.0, 1.0).unwrap();
        let u0: Vec<f64> = (0..16).map(|i| sin(PI * g.x(i))).collect();
        let prob = burgers(g, u0.clone(), Some(0.5));
        let lambda = Field::scalar_fn(g, |t, x, _| x * (1.0 - x) * (1.0 - t));
        let (s, _) = prob.objective_and_gradient(&lambda).unwrap();
        let w = g.weights();
        let mut expect = 0.0;
        for node in 0..g.n_nodes() {
            let (t, x, _) = g.position(node);
            let p = -x * (1.0 - x);
            let gx = (1.0 - 2.0 * x) * (1.0 - t);
            expect -= w[node] * p * p / (2.0 * (2.0 - gx));
        }
        let ws = g.space_weights();
        for ix in 0..16 {
            let x = g.x(ix);
            expect -= ws[ix] * x * (1.0 - x) * u0[ix];
        }
        assert!(
            (s - expect).abs() <= 1e-12 * expect.abs(),
            "{s} vs {expect}"
        );
    }

    #[test]
    fn burgers_gradient_matches_finite_differences() {
        for boundary in [Boundary::Dirichlet, Boundary::Periodic] {
            let g = SpaceTimeGrid::new(1, 14, 12, 0.0, 1.0, 0.5, boundary).unwrap();
            let u0 = (0..14).map(|i| 0.3 * sin(2.0 * PI * g.x(i))).collect();
            let prob = burgers(g, u0, Some(0.5));
            let mut r = rng::stream(3, rng::streams::RANDOM_STATES);
            let at = Field::from_values(g, 1, smooth_random_state(&prob, 0.05, &mut r)).unwrap();
            let mut probes = rng::stream(3, rng::streams::GRADIENT_PROBES);
            let err = fd_gradient_check(
                |f| prob.objective_and_gradient(f).map(|r| r.0),
                |f| prob.objective_and_gradient(f).map(|r| r.1),
                &at,
                60,
                1e-5,
                &mut probes,
            )
            .unwrap();
            assert!(err <= 1e-6, "{boundary:?}: {err}");
        }
    }

    #[test]
    fn burgers_recovery_closed_form() {
        let spec = crate::legendre::presets::burgers(2.0, 1).unwrap();
        let sol = spec.solve_u(&[1.0], &[1.0], &[0.0], 1e-12, 50).unwrap();
        assert!((sol.u[0] - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn linear_flux_recovery() {
        // u - a g = p with a = 3, g = 2, p = 1.
        let spec = MSpec::new(
            PotentialSpec::new(Quadratic { dim: 1, scale: 1.0 }).unwrap(),
            CouplingSpec::new(LinearFlux { speeds: vec![3.0] }).unwrap(),
        )
        .unwrap();
        let sol = spec.solve_u(&[1.0], &[2.0], &[0.0], 1e-12, 50).unwrap();
        assert!((sol.u[0] - 7.0).abs() <= 1e-12);
    }

    #[test]
    fn margin_violation_names_a_node() {
        let g = SpaceTimeGrid::new_1d(10, 10, 0.0, 1.0, 1.0).unwrap();
        let prob = burgers(g, vec![0.0; 10], Some(0.5));
        let lambda = Field::scalar_fn(g, |t, x, _| 4.0 * x * (1.0 - x) * (1.0 - t));
        match prob.objective_and_gradient(&lambda) {
            Err(Error::InvertibilityMargin { value, margin, .. }) => {
                assert!(value < margin);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn random_state_has_positive_residual() {
        let g = SpaceTimeGrid::new(1, 16, 16, 0.0, 1.0, 0.5, Boundary::Periodic).unwrap();
        let prob = burgers(g, vec![0.0; 16], Some(0.5));
        let mut r = rng::stream(9, rng::streams::RANDOM_STATES);
        let x = smooth_random_state(&prob, 0.05, &mut r);
        assert!(prob.primal_residual(&x).unwrap() > 1e-3);
    }
}
