//! Dual of the linear heat equation `theta_t = k theta_xx`.

use alloc::vec;
use alloc::vec::Vec;

use super::{
    check_initial, check_state_len, conjugate_field, initial_term, interior_rms, DualProblem,
    FieldLayout,
};
use crate::diff::{apply_add, apply_transpose_add, Order};
use crate::error::{Error, Result};
use crate::grid::{project_constrained, Axis, Field, SpaceTimeGrid};
use crate::legendre::{MSpec, PotentialSpec};

const LAYOUT: [FieldLayout; 1] = [FieldLayout {
    name: "lambda",
    components: 1,
    constrained: true,
}];

/// `S[lambda] = -sum w M*(p) - sum_x w_x lambda(x, 0) theta0(x)` with
/// `p = lambda_t + k lambda_xx`. One space dimension.
#[derive(Debug, Clone)]
pub struct HeatProblem {
    k: f64,
    theta0: Vec<f64>,
    spec: MSpec,
    grid: SpaceTimeGrid,
}

impl HeatProblem {
    pub fn new(k: f64, theta0: Vec<f64>, h: PotentialSpec, grid: SpaceTimeGrid) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::InvalidArgument(
                "conductivity k must be positive".into(),
            ));
        }
        if grid.space_dim() != 1 {
            return Err(Error::InvalidGrid(
                "heat problem needs one space dimension".into(),
            ));
        }
        if h.dim() != 1 {
            return Err(Error::DimensionMismatch {
                context: "heat potential",
                expected: 1,
                found: h.dim(),
            });
        }
        check_initial(&grid, 1, &theta0, "theta0")?;
        Ok(HeatProblem {
            k,
            theta0,
            spec: MSpec::uncoupled(h),
            grid,
        })
    }

    pub fn k(&self) -> f64 {
        self.k
    }
    pub fn theta0(&self) -> &[f64] {
        &self.theta0
    }
    pub fn spec(&self) -> &MSpec {
        &self.spec
    }

    /// `p = d_dt(lambda) + k d2_dx2(lambda)` on the projected field.
    pub fn assemble_p(&self, lambda: &[f64]) -> Vec<f64> {
        let g = &self.grid;
        let mut p = vec![0.0; g.n_nodes()];
        apply_add(g, Axis::T, Order::First, lambda, &mut p, 1.0);
        apply_add(g, Axis::X, Order::Second, lambda, &mut p, self.k);
        p
    }

    fn projected(&self, lambda: &[f64]) -> Vec<f64> {
        let mut l = lambda.to_vec();
        project_constrained(&self.grid, 1, &mut l);
        l
    }

    fn eval(&self, lambda: &[f64], grad: Option<&mut [f64]>) -> Result<f64> {
        check_state_len(self.grid.n_nodes(), lambda)?;
        let lambda = self.projected(lambda);
        let p = self.assemble_p(&lambda);
        let sol = conjugate_field(&self.spec, &p, &[], p.len(), None)?;
        let w = self.grid.weights();
        let mut s = -crate::math::sum(sol.mstar.iter().zip(&w).map(|(m, w)| m * w));
        match grad {
            None => s += initial_term(&self.grid, 1, &lambda, &self.theta0, -1.0, None),
            Some(g) => {
                g.fill(0.0);
                s += initial_term(&self.grid, 1, &lambda, &self.theta0, -1.0, Some(g));
                let wt: Vec<f64> = sol.u.iter().zip(&w).map(|(u, w)| u * w).collect();
                apply_transpose_add(&self.grid, Axis::T, Order::First, &wt, g, -1.0);
                apply_transpose_add(&self.grid, Axis::X, Order::Second, &wt, g, -self.k);
                project_constrained(&self.grid, 1, g);
            }
        }
        Ok(s)
    }

    /// Objective and its exact discrete gradient (zero on constrained nodes).
    pub fn objective_and_gradient(&self, lambda: &Field) -> Result<(f64, Field)> {
        self.check_field(lambda)?;
        let mut g = vec![0.0; self.grid.n_nodes()];
        let s = self.eval(lambda.values(), Some(&mut g))?;
        Ok((s, Field::from_values(self.grid, 1, g)?))
    }

    /// `theta = U(p)` nodewise.
    pub fn recover_primal(&self, lambda: &Field) -> Result<Field> {
        self.check_field(lambda)?;
        let p = self.assemble_p(&self.projected(lambda.values()));
        let sol = conjugate_field(&self.spec, &p, &[], p.len(), None)?;
        Field::from_values(self.grid, 1, sol.u)
    }

    /// Interior RMS of `theta_t - k theta_xx`.
    pub fn heat_residual(&self, theta: &Field) -> Result<f64> {
        self.check_field(theta)?;
        let mut r = vec![0.0; self.grid.n_nodes()];
        apply_add(
            &self.grid,
            Axis::T,
            Order::First,
            theta.values(),
            &mut r,
            1.0,
        );
        apply_add(
            &self.grid,
            Axis::X,
            Order::Second,
            theta.values(),
            &mut r,
            -self.k,
        );
        Ok(interior_rms(&self.grid, &[&r]))
    }

    fn check_field(&self, f: &Field) -> Result<()> {
        if f.grid() != &self.grid || f.components() != 1 {
            return Err(Error::DimensionMismatch {
                context: "heat dual field",
                expected: self.grid.n_nodes(),
                found: f.values().len() / f.components().max(1),
            });
        }
        Ok(())
    }
}

impl DualProblem for HeatProblem {
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
        let lambda = Field::from_values(self.grid, 1, x.to_vec())?;
        self.heat_residual(&self.recover_primal(&lambda)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::fd_gradient_check;
    use crate::legendre::{Quadratic, Quartic};
    use crate::math::{sin, PI};
    use crate::problems::smooth_random_state;
    use crate::rng;

    fn quadratic() -> PotentialSpec {
        PotentialSpec::new(Quadratic { dim: 1, scale: 1.0 }).unwrap()
    }

    fn sine_problem(nx: usize, nt: usize, k: f64, h: PotentialSpec) -> HeatProblem {
        let g = SpaceTimeGrid::new_1d(nx, nt, 0.0, 1.0, 0.5).unwrap();
        let theta0 = (0..nx).map(|i| sin(PI * g.x(i))).collect();
        HeatProblem::new(k, theta0, h, g).unwrap()
    }

    #[test]
    fn zero_field_gives_zero() {
        let g = SpaceTimeGrid::new_1d(8, 8, 0.0, 1.0, 1.0).unwrap();
        let prob = HeatProblem::new(0.1, vec![0.0; 8], quadratic(), g).unwrap();
        let (s, grad) = prob.objective_and_gradient(&Field::zeros(g, 1)).unwrap();
        assert_eq!(s, 0.0);
        assert!(grad.values().iter().all(|&v| v == 0.0));
        let theta = prob.recover_primal(&Field::zeros(g, 1)).unwrap();
        assert!(theta.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn objective_matches_quadrature_of_closed_form() {
        let prob = sine_problem(16, 16, 0.1, quadratic());
        let g = *prob.grid();
        let tm = g.t_max();
        let lambda = Field::scalar_fn(g, |t, x, _| sin(PI * x) * (tm - t));
        let (s, _) = prob.objective_and_gradient(&lambda).unwrap();
        // Independent quadrature of the exact p; differs from the discrete
        // objective by the O(dx^2) stencil error.
        let w = g.weights();
        let mut expect = 0.0;
        for node in 0..g.n_nodes() {
            let (t, x, _) = g.position(node);
            let p = -sin(PI * x) - 0.1 * PI * PI * sin(PI * x) * (tm - t);
            expect -= 0.5 * w[node] * p * p;
        }
        for ix in 0..16 {
            let x = g.x(ix);
            expect -= g.space_weights()[ix] * sin(PI * x) * tm * sin(PI * x);
        }
        assert!((s - expect).abs() <= 2e-2 * expect.abs(), "{s} vs {expect}");
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for (i, h) in [
            quadratic(),
            PotentialSpec::new(Quartic {
                dim: 1,
                a: 1.0,
                b: 1.0,
            })
            .unwrap(),
        ]
        .into_iter()
        .enumerate()
        {
            let prob = sine_problem(12, 10, 0.1, h);
            let mut r = rng::stream(7 + i as u64, rng::streams::RANDOM_STATES);
            let x = smooth_random_state(&prob, 1.0, &mut r);
            let at = Field::from_values(*prob.grid(), 1, x).unwrap();
            let mut probes = rng::stream(7, rng::streams::GRADIENT_PROBES);
            let err = fd_gradient_check(
                |f| prob.objective_and_gradient(f).map(|r| r.0),
                |f| prob.objective_and_gradient(f).map(|r| r.1),
                &at,
                60,
                1e-5,
                &mut probes,
            )
            .unwrap();
            assert!(err <= 1e-6, "{err}");
        }
    }

    #[test]
    fn quadratic_recovery_is_p() {
        let prob = sine_problem(10, 10, 0.2, quadratic());
        let g = *prob.grid();
        let lambda = Field::scalar_fn(g, |t, x, _| x * (1.0 - x) * (0.5 - t) * (1.0 + t));
        let theta = prob.recover_primal(&lambda).unwrap();
        let mut lp = lambda.clone();
        lp.project();
        let p = prob.assemble_p(lp.values());
        for (a, b) in theta.values().iter().zip(&p) {
            assert!((a - b).abs() <= 1e-14 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn quartic_recovery_solves_cubic() {
        let spec = MSpec::uncoupled(
            PotentialSpec::new(Quartic {
                dim: 1,
                a: 1.0,
                b: 1.0,
            })
            .unwrap(),
        );
        let sol = spec.solve_u(&[2.0], &[], &[0.0], 1e-12, 50).unwrap();
        assert!((sol.u[0] - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn time_channel_derivative_is_minus_weighted_theta() {
        // dS/dp at fixed lambda(., 0) equals -w theta(p).
        let prob = sine_problem(
            10,
            10,
            0.1,
            PotentialSpec::new(Quartic {
                dim: 1,
                a: 1.0,
                b: 0.5,
            })
            .unwrap(),
        );
        let g = *prob.grid();
        let lambda = Field::scalar_fn(g, |t, x, _| sin(PI * x) * (0.5 - t));
        let theta = prob.recover_primal(&lambda).unwrap();
        let mut lp = lambda.clone();
        lp.project();
        let p = prob.assemble_p(lp.values());
        let w = g.weights();
        let s_of_p = |p: &[f64]| {
            let sol = conjugate_field(prob.spec(), p, &[], p.len(), None).unwrap();
            -crate::math::sum(sol.mstar.iter().zip(&w).map(|(m, w)| m * w))
        };
        for node in [3usize, 27, 55, 71] {
            let h = 1e-5;
            let mut pp = p.clone();
            pp[node] += h;
            let sp = s_of_p(&pp);
            pp[node] -= 2.0 * h;
            let sm = s_of_p(&pp);
            let fd = (sp - sm) / (2.0 * h);
            let expect = -w[node] * theta.values()[node];
            assert!((fd - expect).abs() <= 1e-10, "{fd} vs {expect}");
        }
    }

    #[test]
    fn dual_euler_lagrange_operator_on_polynomials() {
        // Unprojected gradient / w at deep interior nodes equals
        // lambda_tt - k^2 lambda_xxxx, exactly for polynomials the stencils
        // differentiate without error.
        use crate::math::powi;
        let k = 0.3;
        let g = SpaceTimeGrid::new_1d(20, 20, 0.0, 1.0, 1.0).unwrap();
        let prob = HeatProblem::new(k, vec![0.0; 20], quadratic(), g).unwrap();
        let w = g.weights();
        for (a, b) in [(2, 2), (4, 1), (3, 2), (4, 2)] {
            let lambda = Field::scalar_fn(g, |t, x, _| powi(x, a) * powi(t, b));
            let p = prob.assemble_p(lambda.values());
            let wp: Vec<f64> = p.iter().zip(&w).map(|(p, w)| p * w).collect();
            let mut grad = vec![0.0; g.n_nodes()];
            apply_transpose_add(&g, Axis::T, Order::First, &wp, &mut grad, -1.0);
            apply_transpose_add(&g, Axis::X, Order::Second, &wp, &mut grad, -k);
            for node in (0..g.n_nodes()).filter(|&n| g.is_interior(n, 4)) {
                let (t, x, _) = g.position(node);
                let ltt = (b * (b - 1)) as f64 * powi(t, b - 2) * powi(x, a);
                let lxxxx = if a == 4 { 24.0 * powi(t, b) } else { 0.0 };
                let expect = ltt - k * k * lxxxx;
                let got = grad[node] / w[node];
                assert!(
                    (got - expect).abs() <= 1e-8 * (1.0 + expect.abs()),
                    "a={a} b={b}: {got} vs {expect}"
                );
            }
        }
    }
}
