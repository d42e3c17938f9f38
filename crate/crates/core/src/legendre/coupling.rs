use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::math::norm2;
use crate::rng;

use super::potential::GRADIENT_RTOL;

/// The coupling `F: R^dim_u -> R^dim_l` paired with the parameter `L` in
/// `M(U, L) = H(U) - L . F(U)`. For conservation laws this is the flux.
pub trait Coupling: Send + Sync {
    fn name(&self) -> &str;
    fn dim_u(&self) -> usize;
    fn dim_l(&self) -> usize;
    fn value(&self, u: &[f64], out: &mut [f64]);
    /// Row-major `dim_l x dim_u` Jacobian.
    fn jacobian(&self, u: &[f64], out: &mut [f64]);
    /// `sum_a l_a d^2 F_a / dU^2`, row-major `dim_u x dim_u`.
    fn weighted_hessian(&self, u: &[f64], l: &[f64], out: &mut [f64]);
}

/// A validated, shareable coupling. Construction checks the Jacobian and the
/// weighted Hessian against central differences.
#[derive(Clone)]
pub struct CouplingSpec {
    inner: Arc<dyn Coupling>,
}

impl fmt::Debug for CouplingSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CouplingSpec")
            .field("name", &self.inner.name())
            .field("dim_u", &self.inner.dim_u())
            .field("dim_l", &self.inner.dim_l())
            .finish()
    }
}

impl CouplingSpec {
    pub fn new(coupling: impl Coupling + 'static) -> Result<Self> {
        let inner: Arc<dyn Coupling> = Arc::new(coupling);
        let (n, m) = (inner.dim_u(), inner.dim_l());
        if n == 0 {
            return Err(Error::InvalidSpec("coupling with dim_u = 0".into()));
        }
        if m == 0 {
            return Ok(CouplingSpec { inner });
        }
        let h = 1e-5;
        let mut rng = rng::stream(rng::DEFAULT_SEED, rng::streams::SPEC_VALIDATION);
        let mut jac = vec![0.0; m * n];
        let mut fp = vec![0.0; m];
        let mut fm = vec![0.0; m];
        let mut hw = vec![0.0; n * n];
        for _ in 0..8 {
            let mut u: Vec<f64> = (0..n).map(|_| rng::uniform(&mut rng, -2.0, 2.0)).collect();
            let l: Vec<f64> = (0..m).map(|_| rng::uniform(&mut rng, -2.0, 2.0)).collect();
            inner.jacobian(&u, &mut jac);
            inner.weighted_hessian(&u, &l, &mut hw);
            let mut jac_fd = vec![0.0; m * n];
            let mut hw_fd = vec![0.0; n * n];
            let mut jp = vec![0.0; m * n];
            let mut jm = vec![0.0; m * n];
            for i in 0..n {
                let base = u[i];
                u[i] = base + h;
                inner.value(&u, &mut fp);
                inner.jacobian(&u, &mut jp);
                u[i] = base - h;
                inner.value(&u, &mut fm);
                inner.jacobian(&u, &mut jm);
                u[i] = base;
                for a in 0..m {
                    jac_fd[a * n + i] = (fp[a] - fm[a]) / (2.0 * h);
                }
                // column i of sum_a l_a d(grad F_a)/du_i
                for j in 0..n {
                    hw_fd[j * n + i] = (0..m)
                        .map(|a| l[a] * (jp[a * n + j] - jm[a * n + j]) / (2.0 * h))
                        .sum();
                }
            }
            let rel = |exact: &[f64], fd: &[f64]| {
                let d: Vec<f64> = exact.iter().zip(fd).map(|(a, b)| a - b).collect();
                norm2(&d) / norm2(exact).max(1.0)
            };
            if !(rel(&jac, &jac_fd) <= GRADIENT_RTOL) {
                return Err(Error::InvalidSpec(alloc::format!(
                    "{}: Jacobian disagrees with finite differences at {u:?}",
                    inner.name()
                )));
            }
            if !(rel(&hw, &hw_fd) <= 1e-5) {
                return Err(Error::InvalidSpec(alloc::format!(
                    "{}: weighted Hessian disagrees with finite differences at {u:?}",
                    inner.name()
                )));
            }
        }
        Ok(CouplingSpec { inner })
    }

    /// `F = 0` with no parameter (`dim_l = 0`): the classical transform.
    pub fn none(dim_u: usize) -> Self {
        CouplingSpec {
            inner: Arc::new(NoCoupling { dim_u }),
        }
    }

    pub fn name(&self) -> &str {
        self.inner.name()
    }
    pub fn dim_u(&self) -> usize {
        self.inner.dim_u()
    }
    pub fn dim_l(&self) -> usize {
        self.inner.dim_l()
    }
    pub fn value(&self, u: &[f64], out: &mut [f64]) {
        self.inner.value(u, out)
    }
    pub fn jacobian(&self, u: &[f64], out: &mut [f64]) {
        self.inner.jacobian(u, out)
    }
    pub fn weighted_hessian(&self, u: &[f64], l: &[f64], out: &mut [f64]) {
        self.inner.weighted_hessian(u, l, out)
    }
}

#[derive(Debug, Clone)]
pub struct NoCoupling {
    pub dim_u: usize,
}

impl Coupling for NoCoupling {
    fn name(&self) -> &str {
        "none"
    }
    fn dim_u(&self) -> usize {
        self.dim_u
    }
    fn dim_l(&self) -> usize {
        0
    }
    fn value(&self, _u: &[f64], _out: &mut [f64]) {}
    fn jacobian(&self, _u: &[f64], _out: &mut [f64]) {}
    fn weighted_hessian(&self, _u: &[f64], _l: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
}

/// Scalar Burgers flux `f_i(u) = u^2 / 2` in each of `space_dim` directions.
#[derive(Debug, Clone)]
pub struct BurgersFlux {
    pub space_dim: usize,
}

impl Coupling for BurgersFlux {
    fn name(&self) -> &str {
        "burgers"
    }
    fn dim_u(&self) -> usize {
        1
    }
    fn dim_l(&self) -> usize {
        self.space_dim
    }
    fn value(&self, u: &[f64], out: &mut [f64]) {
        out.fill(0.5 * u[0] * u[0]);
    }
    fn jacobian(&self, u: &[f64], out: &mut [f64]) {
        out.fill(u[0]);
    }
    fn weighted_hessian(&self, _u: &[f64], l: &[f64], out: &mut [f64]) {
        out[0] = l.iter().sum();
    }
}

/// Scalar linear flux `f_i(u) = a_i u`.
#[derive(Debug, Clone)]
pub struct LinearFlux {
    pub speeds: Vec<f64>,
}

impl Coupling for LinearFlux {
    fn name(&self) -> &str {
        "linear"
    }
    fn dim_u(&self) -> usize {
        1
    }
    fn dim_l(&self) -> usize {
        self.speeds.len()
    }
    fn value(&self, u: &[f64], out: &mut [f64]) {
        for (o, a) in out.iter_mut().zip(&self.speeds) {
            *o = a * u[0];
        }
    }
    fn jacobian(&self, _u: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.speeds);
    }
    fn weighted_hessian(&self, _u: &[f64], _l: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
    }
}

/// Right-hand side of the one-dimensional viscous Hamilton-Jacobi equation
/// `u_t = -B^2 / 2 + nu_hat C` over `U = (u, B, C)`.
#[derive(Debug, Clone)]
pub struct ViscousHjRhs {
    pub nu_hat: f64,
}

impl Coupling for ViscousHjRhs {
    fn name(&self) -> &str {
        "viscous-hj"
    }
    fn dim_u(&self) -> usize {
        3
    }
    fn dim_l(&self) -> usize {
        1
    }
    fn value(&self, u: &[f64], out: &mut [f64]) {
        out[0] = -0.5 * u[1] * u[1] + self.nu_hat * u[2];
    }
    fn jacobian(&self, u: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
        out[1] = -u[1];
        out[2] = self.nu_hat;
    }
    fn weighted_hessian(&self, _u: &[f64], l: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        out[4] = -l[0];
    }
}
