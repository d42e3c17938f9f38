//! Fake-time gradient ascent on a [`DualProblem`].
//!
//! Each iteration moves along the gradient (or a Polak-Ribiere direction)
//! with a step chosen by a secant estimate of the maximizer of
//! `phi(a) = S(x + a d)`, falling back to backtracking. For concave quadratic
//! objectives the secant estimate is the exact line maximizer, so the CG
//! variant reduces to linear conjugate gradients.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{dot, norm_inf};
use crate::problems::DualProblem;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Steepest,
    Cg,
}

impl core::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "steepest" => Ok(Method::Steepest),
            "cg" => Ok(Method::Cg),
            other => Err(Error::InvalidArgument(alloc::format!(
                "unknown method `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AscentConfig {
    /// First trial step along the first direction.
    pub step0: f64,
    pub max_iter: usize,
    /// Stop when the sup-norm of the gradient is at most this.
    pub grad_tol: f64,
    pub backtrack_factor: f64,
    pub max_backtracks: usize,
    pub method: Method,
}

impl Default for AscentConfig {
    fn default() -> Self {
        AscentConfig {
            step0: 1.0,
            max_iter: 5000,
            grad_tol: 1e-8,
            backtrack_factor: 0.5,
            max_backtracks: 40,
            method: Method::Steepest,
        }
    }
}

impl AscentConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.step0 > 0.0
            && self.step0.is_finite()
            && self.max_iter > 0
            && self.grad_tol > 0.0
            && self.backtrack_factor > 0.0
            && self.backtrack_factor < 1.0
            && self.max_backtracks > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(
                "ascent config needs positive step0, max_iter, grad_tol, max_backtracks and backtrack_factor in (0, 1)".into(),
            ))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub objective: f64,
    pub grad_norm: f64,
    pub primal_residual: f64,
}

/// Callback seeing each iterate and its record.
pub type Observer<'a> = dyn FnMut(&IterationRecord, &[f64]) + 'a;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    /// `max_iter` accepted steps without reaching `grad_tol`.
    BudgetExhausted,
    /// No trial step increased the objective.
    Stalled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    /// Accepted steps.
    pub iterations: usize,
    /// Entry `i` belongs to the iterate after `i` accepted steps.
    pub objective_trace: Vec<f64>,
    pub grad_norm_trace: Vec<f64>,
    pub residual_trace: Vec<f64>,
    pub converged: bool,
    pub termination: Termination,
    /// Final flattened dual state.
    pub final_state: Vec<f64>,
}

impl SolveReport {
    pub fn records(&self) -> impl Iterator<Item = IterationRecord> + '_ {
        (0..self.objective_trace.len()).map(|i| IterationRecord {
            iter: i,
            objective: self.objective_trace[i],
            grad_norm: self.grad_norm_trace[i],
            primal_residual: self.residual_trace[i],
        })
    }
}

struct Trial {
    x: Vec<f64>,
    s: f64,
    g: Vec<f64>,
}

fn trial(problem: &dyn DualProblem, x: &[f64], d: &[f64], a: f64) -> Result<Trial> {
    let mut y: Vec<f64> = x.iter().zip(d).map(|(x, d)| x + a * d).collect();
    problem.project(&mut y);
    let mut g = vec![0.0; y.len()];
    let s = problem.evaluate(&y, Some(&mut g))?;
    if !s.is_finite() {
        return Err(Error::NonFinite("objective at a trial step"));
    }
    Ok(Trial { x: y, s, g })
}

/// Maximizes `problem` from `initial` (projected first). `observer` sees one
/// record per iterate, starting with the initial state, together with the
/// iterate itself.
///
/// An objective error at every trial step down to the backtracking floor
/// aborts with that error; a floor reached without error but also without
/// increase ends the run as [`Termination::Stalled`].
pub fn ascend(
    problem: &dyn DualProblem,
    initial: &[f64],
    config: &AscentConfig,
    mut observer: Option<&mut Observer<'_>>,
) -> Result<SolveReport> {
    config.validate()?;
    if initial.len() != problem.n_vars() {
        return Err(Error::DimensionMismatch {
            context: "initial dual state",
            expected: problem.n_vars(),
            found: initial.len(),
        });
    }
    let mut x = initial.to_vec();
    problem.project(&mut x);
    let mut g = vec![0.0; x.len()];
    let mut s = problem.evaluate(&x, Some(&mut g))?;
    let mut report = SolveReport {
        iterations: 0,
        objective_trace: Vec::new(),
        grad_norm_trace: Vec::new(),
        residual_trace: Vec::new(),
        converged: false,
        termination: Termination::BudgetExhausted,
        final_state: Vec::new(),
    };
    let mut record = |report: &mut SolveReport, x: &[f64], s: f64, gn: f64| -> Result<()> {
        let r = problem.primal_residual(x)?;
        let rec = IterationRecord {
            iter: report.objective_trace.len(),
            objective: s,
            grad_norm: gn,
            primal_residual: r,
        };
        report.objective_trace.push(s);
        report.grad_norm_trace.push(gn);
        report.residual_trace.push(r);
        if let Some(obs) = observer.as_mut() {
            obs(&rec, x);
        }
        Ok(())
    };

    let mut gn = norm_inf(&g);
    record(&mut report, &x, s, gn)?;
    let mut d = g.clone();
    let mut step = config.step0;
    let mut prev_slope = dot(&g, &d);

    while gn > config.grad_tol {
        if report.iterations >= config.max_iter {
            report.termination = Termination::BudgetExhausted;
            report.final_state = x;
            return Ok(report);
        }
        let mut slope = dot(&g, &d);
        if !(slope > 0.0) {
            d.copy_from_slice(&g);
            slope = dot(&g, &g);
        }
        let mut a = step;
        let mut accepted: Option<(Trial, f64)> = None;
        let mut last_err: Option<Error> = None;
        for _ in 0..=config.max_backtracks {
            let t = match trial(problem, &x, &d, a) {
                Ok(t) => t,
                Err(e) => {
                    last_err = Some(e);
                    a *= config.backtrack_factor;
                    continue;
                }
            };
            last_err = None;
            // Secant estimate of the zero of phi'(a) = g(x + a d) . d.
            let slope_a = dot(&t.g, &d);
            let mut best = (t, a);
            if slope > slope_a {
                let a_star = a * slope / (slope - slope_a);
                if a_star.is_finite() && a_star > 0.0 && (a_star - a).abs() > 1e-12 * a {
                    if let Ok(t2) = trial(problem, &x, &d, a_star) {
                        if t2.s >= best.0.s {
                            best = (t2, a_star);
                        }
                    }
                }
            }
            if best.0.s > s {
                accepted = Some(best);
                break;
            }
            a = a.min(best.1) * config.backtrack_factor;
        }
        let Some((t, a)) = accepted else {
            report.final_state = x;
            return match last_err {
                Some(e) => Err(e),
                None => {
                    report.termination = Termination::Stalled;
                    Ok(report)
                }
            };
        };
        let g_old = core::mem::replace(&mut g, t.g);
        x = t.x;
        s = t.s;
        gn = norm_inf(&g);
        report.iterations += 1;
        record(&mut report, &x, s, gn)?;

        match config.method {
            Method::Steepest => {
                d.copy_from_slice(&g);
                step = a;
            }
            Method::Cg => {
                let gg_old = dot(&g_old, &g_old);
                let beta = if gg_old > 0.0 {
                    ((dot(&g, &g) - dot(&g, &g_old)) / gg_old).max(0.0)
                } else {
                    0.0
                };
                for (di, gi) in d.iter_mut().zip(&g) {
                    *di = gi + beta * *di;
                }
                let new_slope = dot(&g, &d);
                // Carry the step length over in proportion to the slopes.
                step = if new_slope > 0.0 && prev_slope > 0.0 {
                    a * slope / new_slope
                } else {
                    a
                };
                prev_slope = new_slope;
            }
        }
        if !(step > 0.0 && step.is_finite()) {
            step = config.step0;
        }
    }
    report.converged = true;
    report.termination = Termination::Converged;
    report.final_state = x;
    Ok(report)
}
