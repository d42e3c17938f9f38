//! Parametric Legendre transform.
//!
//! For a potential `H` and coupling `F`, `M(U, L) = H(U) - L . F(U)`. When
//! `P = dM/dU (U, L)` is uniquely solvable for `U(P, L)`, the transform
//!
//! ```text
//! M*(P, L) = U(P, L) . P - M(U(P, L), L)
//! ```
//!
//! has the envelope derivatives `dM*/dP = U(P, L)` and
//! `dM*/dL = F(U(P, L))`, which is what turns every dual objective in
//! [`crate::problems`] into one whose Euler-Lagrange equations are the primal
//! system. Solvability is certified pointwise (smallest eigenvalue of
//! `d^2M/dU^2` at the solve point), never assumed globally.

mod coupling;
mod potential;

pub use coupling::{BurgersFlux, Coupling, CouplingSpec, LinearFlux, NoCoupling, ViscousHjRhs};
pub use potential::{DiagonalQuadratic, FnPotential, Potential, PotentialSpec, Quadratic, Quartic};

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{lu_solve_in_place, symmetric_eigenvalues};
use crate::math::{dot, norm2};

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 50;
const MAX_HALVINGS: usize = 30;

/// `M(U, L) = H(U) - L . F(U)`.
#[derive(Debug, Clone)]
pub struct MSpec {
    h: PotentialSpec,
    f: CouplingSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImplicitSolveResult {
    pub u: Vec<f64>,
    pub iterations: usize,
    pub residual_norm: f64,
    pub converged: bool,
}

/// Envelope derivatives of `M*`.
#[derive(Debug, Clone, PartialEq)]
pub struct MstarGradient {
    /// `dM*/dP = U(P, L)`.
    pub dp: Vec<f64>,
    /// `dM*/dL = F(U(P, L))`.
    pub dl: Vec<f64>,
}

/// Scratch buffers for allocation-free nodal solves.
#[derive(Debug, Clone)]
pub struct Workspace {
    r: Vec<f64>,
    trial: Vec<f64>,
    r_trial: Vec<f64>,
    delta: Vec<f64>,
    hess: Vec<f64>,
    hw: Vec<f64>,
    jac: Vec<f64>,
    fval: Vec<f64>,
}

/// Outcome of [`MSpec::conjugate`] at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodalSolve {
    pub iterations: usize,
    pub residual_norm: f64,
}

impl MSpec {
    pub fn new(h: PotentialSpec, f: CouplingSpec) -> Result<Self> {
        if h.dim() != f.dim_u() {
            return Err(Error::DimensionMismatch {
                context: "coupling dim_u vs potential dim",
                expected: h.dim(),
                found: f.dim_u(),
            });
        }
        Ok(MSpec { h, f })
    }

    /// Classical transform of `H` (no parameter).
    pub fn uncoupled(h: PotentialSpec) -> Self {
        let f = CouplingSpec::none(h.dim());
        MSpec { h, f }
    }

    pub fn potential(&self) -> &PotentialSpec {
        &self.h
    }
    pub fn coupling(&self) -> &CouplingSpec {
        &self.f
    }
    pub fn dim_u(&self) -> usize {
        self.h.dim()
    }
    pub fn dim_l(&self) -> usize {
        self.f.dim_l()
    }

    pub fn workspace(&self) -> Workspace {
        let (n, m) = (self.dim_u(), self.dim_l());
        Workspace {
            r: vec![0.0; n],
            trial: vec![0.0; n],
            r_trial: vec![0.0; n],
            delta: vec![0.0; n],
            hess: vec![0.0; n * n],
            hw: vec![0.0; n * n],
            jac: vec![0.0; m * n],
            fval: vec![0.0; m],
        }
    }

    fn check_dims(&self, u_or_p: &[f64], l: &[f64], context: &'static str) -> Result<()> {
        if u_or_p.len() != self.dim_u() {
            return Err(Error::DimensionMismatch {
                context,
                expected: self.dim_u(),
                found: u_or_p.len(),
            });
        }
        if l.len() != self.dim_l() {
            return Err(Error::DimensionMismatch {
                context,
                expected: self.dim_l(),
                found: l.len(),
            });
        }
        Ok(())
    }

    pub fn eval_m(&self, u: &[f64], l: &[f64]) -> Result<f64> {
        self.check_dims(u, l, "eval_M")?;
        let mut fv = vec![0.0; self.dim_l()];
        self.f.value(u, &mut fv);
        Ok(self.h.value(u) - dot(l, &fv))
    }

    fn m_value(&self, u: &[f64], l: &[f64], ws: &mut Workspace) -> f64 {
        self.f.value(u, &mut ws.fval);
        self.h.value(u) - dot(l, &ws.fval)
    }

    /// `dM/dU = grad H(U) - J_F(U)^T L` into `out`.
    fn grad_u(&self, u: &[f64], l: &[f64], out: &mut [f64], jac: &mut [f64]) {
        self.h.gradient(u, out);
        let n = self.dim_u();
        if self.dim_l() > 0 {
            self.f.jacobian(u, jac);
            for (a, la) in l.iter().enumerate() {
                for i in 0..n {
                    out[i] -= la * jac[a * n + i];
                }
            }
        }
    }

    /// `d^2M/dU^2 = hess H(U) - sum_a L_a hess F_a(U)`, row-major.
    pub fn hessian_u(&self, u: &[f64], l: &[f64], out: &mut [f64]) {
        self.h.hessian(u, out);
        if self.dim_l() > 0 {
            let n = self.dim_u();
            let mut hw = vec![0.0; n * n];
            self.f.weighted_hessian(u, l, &mut hw);
            for (o, w) in out.iter_mut().zip(&hw) {
                *o -= w;
            }
        }
    }

    fn residual(&self, u: &[f64], p: &[f64], l: &[f64], r: &mut [f64], jac: &mut [f64]) -> f64 {
        self.grad_u(u, l, r, jac);
        for (ri, pi) in r.iter_mut().zip(p) {
            *ri -= pi;
        }
        norm2(r)
    }

    /// Newton solve of `dM/dU (U, L) = P`, starting from (and overwriting)
    /// `u`. Steps are halved while they increase the residual.
    pub fn solve_in_place(
        &self,
        p: &[f64],
        l: &[f64],
        u: &mut [f64],
        tol: f64,
        max_iter: usize,
        ws: &mut Workspace,
    ) -> Result<NodalSolve> {
        let n = self.dim_u();
        let mut rnorm = self.residual(u, p, l, &mut ws.r, &mut ws.jac);
        if !rnorm.is_finite() {
            return Err(Error::NonFinite("implicit-solve residual"));
        }
        if rnorm <= tol {
            return Ok(NodalSolve {
                iterations: 0,
                residual_norm: rnorm,
            });
        }
        let mut best = u.to_vec();
        let mut best_norm = rnorm;
        for iter in 1..=max_iter {
            self.h.hessian(u, &mut ws.hess);
            if self.dim_l() > 0 {
                self.f.weighted_hessian(u, l, &mut ws.hw);
                for (o, w) in ws.hess.iter_mut().zip(&ws.hw) {
                    *o -= w;
                }
            }
            for i in 0..n {
                ws.delta[i] = -ws.r[i];
            }
            if !lu_solve_in_place(&mut ws.hess, &mut ws.delta, n) {
                return Err(Error::SingularHessian {
                    u: u.to_vec(),
                    l: l.to_vec(),
                });
            }
            let mut step = 1.0;
            let mut trial_norm = f64::INFINITY;
            for _ in 0..=MAX_HALVINGS {
                for i in 0..n {
                    ws.trial[i] = u[i] + step * ws.delta[i];
                }
                trial_norm = self.residual(&ws.trial, p, l, &mut ws.r_trial, &mut ws.jac);
                if trial_norm <= rnorm {
                    break;
                }
                step *= 0.5;
            }
            u.copy_from_slice(&ws.trial);
            ws.r.copy_from_slice(&ws.r_trial);
            rnorm = trial_norm;
            if !rnorm.is_finite() {
                return Err(Error::NonFinite("implicit-solve residual"));
            }
            if rnorm < best_norm {
                best_norm = rnorm;
                best.copy_from_slice(u);
            }
            if rnorm <= tol {
                return Ok(NodalSolve {
                    iterations: iter,
                    residual_norm: rnorm,
                });
            }
        }
        Err(Error::NotConverged {
            best,
            residual_norm: best_norm,
            iterations: max_iter,
        })
    }

    pub fn solve_u(
        &self,
        p: &[f64],
        l: &[f64],
        guess: &[f64],
        tol: f64,
        max_iter: usize,
    ) -> Result<ImplicitSolveResult> {
        self.check_dims(p, l, "solve_U")?;
        if guess.len() != self.dim_u() {
            return Err(Error::DimensionMismatch {
                context: "solve_U guess",
                expected: self.dim_u(),
                found: guess.len(),
            });
        }
        let mut u = guess.to_vec();
        let mut ws = self.workspace();
        let s = self.solve_in_place(p, l, &mut u, tol, max_iter, &mut ws)?;
        Ok(ImplicitSolveResult {
            u,
            iterations: s.iterations,
            residual_norm: s.residual_norm,
            converged: true,
        })
    }

    /// Solves for `U(P, L)` in place and returns `M*(P, L)`; on return
    /// `flux` holds `F(U)`. This is the hot path used by the dual objectives.
    pub fn conjugate(
        &self,
        p: &[f64],
        l: &[f64],
        u: &mut [f64],
        flux: &mut [f64],
        tol: f64,
        max_iter: usize,
        ws: &mut Workspace,
    ) -> Result<(f64, NodalSolve)> {
        let s = self.solve_in_place(p, l, u, tol, max_iter, ws)?;
        let m = self.m_value(u, l, ws);
        flux.copy_from_slice(&ws.fval);
        Ok((dot(u, p) - m, s))
    }

    pub fn eval_mstar(&self, p: &[f64], l: &[f64], guess: &[f64], tol: f64) -> Result<f64> {
        let sol = self.solve_u(p, l, guess, tol, DEFAULT_MAX_ITER)?;
        Ok(dot(&sol.u, p) - self.eval_m(&sol.u, l)?)
    }

    pub fn grad_mstar(
        &self,
        p: &[f64],
        l: &[f64],
        guess: &[f64],
        tol: f64,
    ) -> Result<MstarGradient> {
        let sol = self.solve_u(p, l, guess, tol, DEFAULT_MAX_ITER)?;
        let mut dl = vec![0.0; self.dim_l()];
        self.f.value(&sol.u, &mut dl);
        Ok(MstarGradient { dp: sol.u, dl })
    }

    /// Smallest eigenvalue of `d^2M/dU^2 (U, L)`: positive means `dM/dU` is
    /// locally strictly monotone at `U`.
    pub fn monotonicity_certificate(&self, u: &[f64], l: &[f64]) -> f64 {
        let n = self.dim_u();
        let mut hess = vec![0.0; n * n];
        self.hessian_u(u, l, &mut hess);
        symmetric_eigenvalues(&hess, n)[0]
    }
}

/// Threshold on the envelope-identity relative errors.
pub const IDENTITY_RTOL: f64 = 1e-5;

/// Pointwise check of the identities the dual scheme rests on.
#[derive(Debug, Clone, PartialEq)]
pub struct LegendreReport {
    /// `|dM*/dP - U| / max(|fd|, 1)` with `fd` the central difference in `P`.
    pub dp_rel_error: f64,
    /// Same for `dM*/dL` against `F(U)`.
    pub dl_rel_error: f64,
    /// Smallest eigenvalue of `d^2M/dU^2` at the solve point.
    pub min_eigenvalue: f64,
    /// `M*(P, L) + M(U, L) - P . U`.
    pub fenchel_gap: f64,
    pub dp_pass: bool,
    pub dl_pass: bool,
    pub monotone_pass: bool,
    /// Set when the solve itself failed (e.g. singular Hessian); all pass
    /// flags are then false.
    pub solve_error: Option<Error>,
}

impl LegendreReport {
    pub fn passed(&self) -> bool {
        self.dp_pass && self.dl_pass && self.monotone_pass && self.solve_error.is_none()
    }

    fn failed(err: Error) -> Self {
        LegendreReport {
            dp_rel_error: f64::NAN,
            dl_rel_error: f64::NAN,
            min_eigenvalue: f64::NAN,
            fenchel_gap: f64::NAN,
            dp_pass: false,
            dl_pass: false,
            monotone_pass: false,
            solve_error: Some(err),
        }
    }
}

/// Compares the envelope derivatives of `M*` with central differences of
/// step `h` in every component of `P` and `L`, and reports the local
/// monotonicity certificate. Failures are reported, never returned as errors.
pub fn check_legendre_identities(spec: &MSpec, p: &[f64], l: &[f64], h: f64) -> LegendreReport {
    match identities(spec, p, l, h) {
        Ok(r) => r,
        Err(e) => LegendreReport::failed(e),
    }
}

fn identities(spec: &MSpec, p: &[f64], l: &[f64], h: f64) -> Result<LegendreReport> {
    let zero = vec![0.0; spec.dim_u()];
    let sol = spec.solve_u(p, l, &zero, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    let grad = spec.grad_mstar(p, l, &sol.u, DEFAULT_TOL)?;
    let mstar = dot(&sol.u, p) - spec.eval_m(&sol.u, l)?;
    let fenchel_gap = mstar + spec.eval_m(&sol.u, l)? - dot(p, &sol.u);

    let central = |pp: &[f64], ll: &[f64]| spec.eval_mstar(pp, ll, &sol.u, DEFAULT_TOL);
    let mut fd_p = vec![0.0; p.len()];
    let mut pp = p.to_vec();
    for i in 0..p.len() {
        pp[i] = p[i] + h;
        let a = central(&pp, l)?;
        pp[i] = p[i] - h;
        let b = central(&pp, l)?;
        pp[i] = p[i];
        fd_p[i] = (a - b) / (2.0 * h);
    }
    let mut fd_l = vec![0.0; l.len()];
    let mut ll = l.to_vec();
    for i in 0..l.len() {
        ll[i] = l[i] + h;
        let a = central(p, &ll)?;
        ll[i] = l[i] - h;
        let b = central(p, &ll)?;
        ll[i] = l[i];
        fd_l[i] = (a - b) / (2.0 * h);
    }
    let rel = |exact: &[f64], fd: &[f64]| {
        let d: Vec<f64> = exact.iter().zip(fd).map(|(a, b)| a - b).collect();
        norm2(&d) / norm2(fd).max(1.0)
    };
    let dp_rel_error = rel(&grad.dp, &fd_p);
    let dl_rel_error = rel(&grad.dl, &fd_l);
    let min_eigenvalue = spec.monotonicity_certificate(&sol.u, l);
    Ok(LegendreReport {
        dp_rel_error,
        dl_rel_error,
        min_eigenvalue,
        fenchel_gap,
        dp_pass: dp_rel_error <= IDENTITY_RTOL,
        dl_pass: dl_rel_error <= IDENTITY_RTOL,
        monotone_pass: min_eigenvalue > 0.0,
        solve_error: None,
    })
}

/// Ready-made specs used by the problem families and the tests.
pub mod presets {
    use super::*;

    /// `H(theta) = theta^2 / 2`, no coupling: `M*(p) = p^2 / 2`.
    pub fn heat_quadratic() -> MSpec {
        MSpec::uncoupled(PotentialSpec::new(Quadratic { dim: 1, scale: 1.0 }).expect("valid"))
    }

    /// `H(theta) = a theta^2 / 2 + b theta^4 / 4`, no coupling.
    pub fn heat_quartic(a: f64, b: f64) -> Result<MSpec> {
        Ok(MSpec::uncoupled(PotentialSpec::new(Quartic {
            dim: 1,
            a,
            b,
        })?))
    }

    /// `H(u) = c u^2 / 2` with the Burgers flux: `M = (c - g) u^2 / 2`.
    pub fn burgers(c: f64, space_dim: usize) -> Result<MSpec> {
        MSpec::new(
            PotentialSpec::new(Quadratic { dim: 1, scale: c })?,
            CouplingSpec::new(BurgersFlux { space_dim })?,
        )
    }
}
