use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::math::norm2;
use crate::rng;

/// A smooth scalar function of `dim` variables with its first two
/// derivatives. Houses the auxiliary potential `H` as well as `G` and `R` of
/// the Navier-Stokes actions.
pub trait Potential: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn value(&self, u: &[f64]) -> f64;
    fn gradient(&self, u: &[f64], out: &mut [f64]);
    /// Row-major `dim x dim` Hessian.
    fn hessian(&self, u: &[f64], out: &mut [f64]);
}

/// A validated, shareable potential.
///
/// Construction probes the potential at pseudo-random points and rejects it
/// unless the gradient matches central differences of the value, the Hessian
/// matches central differences of the gradient, and the Hessian is
/// symmetric.
#[derive(Clone)]
pub struct PotentialSpec {
    inner: Arc<dyn Potential>,
}

impl fmt::Debug for PotentialSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PotentialSpec")
            .field("name", &self.inner.name())
            .field("dim", &self.inner.dim())
            .finish()
    }
}

const PROBES: usize = 8;
const PROBE_BOX: f64 = 2.0;
const FD_STEP: f64 = 1e-5;
pub(crate) const GRADIENT_RTOL: f64 = 1e-6;
const SYMMETRY_TOL: f64 = 1e-12;
const HESSIAN_RTOL: f64 = 1e-5;

impl PotentialSpec {
    pub fn new(potential: impl Potential + 'static) -> Result<Self> {
        Self::from_arc(Arc::new(potential))
    }

    pub fn from_arc(inner: Arc<dyn Potential>) -> Result<Self> {
        let n = inner.dim();
        if n == 0 {
            return Err(Error::InvalidSpec("potential of dimension zero".into()));
        }
        let mut rng = rng::stream(rng::DEFAULT_SEED, rng::streams::SPEC_VALIDATION);
        let mut g = vec![0.0; n];
        let mut hess = vec![0.0; n * n];
        let mut gp = vec![0.0; n];
        let mut gm = vec![0.0; n];
        for _ in 0..PROBES {
            let mut u: Vec<f64> = (0..n)
                .map(|_| rng::uniform(&mut rng, -PROBE_BOX, PROBE_BOX))
                .collect();
            inner.gradient(&u, &mut g);
            inner.hessian(&u, &mut hess);
            for i in 0..n {
                for j in i + 1..n {
                    let (a, b) = (hess[i * n + j], hess[j * n + i]);
                    if (a - b).abs() > SYMMETRY_TOL * a.abs().max(b.abs()).max(1.0) {
                        return Err(Error::InvalidSpec(alloc::format!(
                            "{}: Hessian not symmetric at {u:?}",
                            inner.name()
                        )));
                    }
                }
            }
            let mut fd = vec![0.0; n];
            let mut hess_err: f64 = 0.0;
            for i in 0..n {
                let base = u[i];
                u[i] = base + FD_STEP;
                let vp = inner.value(&u);
                inner.gradient(&u, &mut gp);
                u[i] = base - FD_STEP;
                let vm = inner.value(&u);
                inner.gradient(&u, &mut gm);
                u[i] = base;
                fd[i] = (vp - vm) / (2.0 * FD_STEP);
                for j in 0..n {
                    let col = (gp[j] - gm[j]) / (2.0 * FD_STEP);
                    hess_err = hess_err.max((col - hess[j * n + i]).abs());
                }
            }
            let diff: Vec<f64> = fd.iter().zip(&g).map(|(a, b)| a - b).collect();
            let rel = norm2(&diff) / norm2(&g).max(1.0);
            if !(rel <= GRADIENT_RTOL) {
                return Err(Error::InvalidSpec(alloc::format!(
                    "{}: gradient disagrees with finite differences (relative error {rel:e}) at {u:?}",
                    inner.name()
                )));
            }
            let hscale = hess.iter().fold(1.0f64, |m, x| m.max(x.abs()));
            if !(hess_err <= HESSIAN_RTOL * hscale) {
                return Err(Error::InvalidSpec(alloc::format!(
                    "{}: Hessian disagrees with finite differences of the gradient at {u:?}",
                    inner.name()
                )));
            }
        }
        Ok(PotentialSpec { inner })
    }

    pub fn name(&self) -> &str {
        self.inner.name()
    }
    pub fn dim(&self) -> usize {
        self.inner.dim()
    }
    pub fn value(&self, u: &[f64]) -> f64 {
        self.inner.value(u)
    }
    pub fn gradient(&self, u: &[f64], out: &mut [f64]) {
        self.inner.gradient(u, out)
    }
    pub fn hessian(&self, u: &[f64], out: &mut [f64]) {
        self.inner.hessian(u, out)
    }
}

/// `scale * |u|^2 / 2`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    pub dim: usize,
    pub scale: f64,
}

impl Potential for Quadratic {
    fn name(&self) -> &str {
        "quadratic"
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, u: &[f64]) -> f64 {
        0.5 * self.scale * u.iter().map(|x| x * x).sum::<f64>()
    }
    fn gradient(&self, u: &[f64], out: &mut [f64]) {
        for (o, x) in out.iter_mut().zip(u) {
            *o = self.scale * x;
        }
    }
    fn hessian(&self, _u: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for i in 0..self.dim {
            out[i * self.dim + i] = self.scale;
        }
    }
}

/// `sum_i w_i u_i^2 / 2`.
#[derive(Debug, Clone)]
pub struct DiagonalQuadratic {
    pub weights: Vec<f64>,
}

impl Potential for DiagonalQuadratic {
    fn name(&self) -> &str {
        "diagonal-quadratic"
    }
    fn dim(&self) -> usize {
        self.weights.len()
    }
    fn value(&self, u: &[f64]) -> f64 {
        0.5 * self
            .weights
            .iter()
            .zip(u)
            .map(|(w, x)| w * x * x)
            .sum::<f64>()
    }
    fn gradient(&self, u: &[f64], out: &mut [f64]) {
        for ((o, w), x) in out.iter_mut().zip(&self.weights).zip(u) {
            *o = w * x;
        }
    }
    fn hessian(&self, _u: &[f64], out: &mut [f64]) {
        let n = self.weights.len();
        out.fill(0.0);
        for i in 0..n {
            out[i * n + i] = self.weights[i];
        }
    }
}

/// Separable `sum_i (a u_i^2 / 2 + b u_i^4 / 4)`.
#[derive(Debug, Clone)]
pub struct Quartic {
    pub dim: usize,
    pub a: f64,
    pub b: f64,
}

impl Potential for Quartic {
    fn name(&self) -> &str {
        "quartic"
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, u: &[f64]) -> f64 {
        u.iter()
            .map(|x| {
                let x2 = x * x;
                0.5 * self.a * x2 + 0.25 * self.b * x2 * x2
            })
            .sum()
    }
    fn gradient(&self, u: &[f64], out: &mut [f64]) {
        for (o, x) in out.iter_mut().zip(u) {
            *o = self.a * x + self.b * x * x * x;
        }
    }
    fn hessian(&self, u: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for i in 0..self.dim {
            out[i * self.dim + i] = self.a + 3.0 * self.b * u[i] * u[i];
        }
    }
}

/// Potential assembled from plain function pointers, for ad-hoc choices.
#[derive(Clone)]
pub struct FnPotential {
    pub name: String,
    pub dim: usize,
    pub value: fn(&[f64]) -> f64,
    pub gradient: fn(&[f64], &mut [f64]),
    pub hessian: fn(&[f64], &mut [f64]),
}

impl Potential for FnPotential {
    fn name(&self) -> &str {
        &self.name
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, u: &[f64]) -> f64 {
        (self.value)(u)
    }
    fn gradient(&self, u: &[f64], out: &mut [f64]) {
        (self.gradient)(u, out)
    }
    fn hessian(&self, u: &[f64], out: &mut [f64]) {
        (self.hessian)(u, out)
    }
}
