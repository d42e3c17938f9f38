//! Independent reference solutions and field comparison.
//!
//! Nothing here uses [`crate::diff`] or [`crate::problems`]: the classical
//! solvers carry their own stencils and time steppers.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::{Boundary, Field, SpaceTimeGrid};
use crate::math::{ceil, exp, sin, sqrt, PI};

/// Floor on the reference norm in [`compare_fields`], so that a zero
/// reference gives a huge but finite relative error.
pub const NORM_FLOOR: f64 = 1e-300;

/// Nodes a comparison runs over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mask {
    All,
    /// At least one node away from every non-periodic boundary, in space and
    /// time.
    Interior,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    /// `||a - b||_2 / max(||b||_2, NORM_FLOOR)` over the masked nodes.
    pub l2_rel: f64,
    /// `max |a - b|` over the masked nodes.
    pub linf: f64,
    /// `a - b` everywhere (unmasked).
    pub field_diff: Field,
}

pub fn compare_fields(a: &Field, b: &Field, mask: Mask) -> Result<ErrorReport> {
    if a.grid() != b.grid() {
        return Err(Error::InvalidGrid(
            "compared fields live on different grids".into(),
        ));
    }
    if a.components() != b.components() {
        return Err(Error::DimensionMismatch {
            context: "compared field components",
            expected: b.components(),
            found: a.components(),
        });
    }
    let grid = a.grid();
    let c = a.components();
    let mut diff = vec![0.0; a.values().len()];
    let (mut num, mut den, mut linf) = (0.0, 0.0, 0.0f64);
    for node in 0..grid.n_nodes() {
        let used = match mask {
            Mask::All => true,
            Mask::Interior => grid.is_interior(node, 1),
        };
        for k in 0..c {
            let i = node * c + k;
            let d = a.values()[i] - b.values()[i];
            diff[i] = d;
            if used {
                num += d * d;
                den += b.values()[i] * b.values()[i];
                linf = linf.max(d.abs());
            }
        }
    }
    Ok(ErrorReport {
        l2_rel: sqrt(num) / sqrt(den).max(NORM_FLOOR),
        linf,
        field_diff: Field::from_values(*grid, c, diff)?,
    })
}

fn check_unit_dirichlet(grid: &SpaceTimeGrid) -> Result<()> {
    if grid.space_dim() != 1 || grid.boundary() != Boundary::Dirichlet {
        return Err(Error::InvalidGrid(
            "heat oracles need a 1-D Dirichlet grid".into(),
        ));
    }
    if grid.x_min() != 0.0 || grid.x_max() != 1.0 {
        return Err(Error::InvalidGrid(
            "heat oracles need the domain [0, 1]".into(),
        ));
    }
    Ok(())
}

/// `sin(m pi x) exp(-k m^2 pi^2 t)` on a 1-D grid over `[0, 1]`.
pub fn heat_exact_oracle(k: f64, m: u32, grid: &SpaceTimeGrid) -> Result<Field> {
    check_unit_dirichlet(grid)?;
    let mf = m as f64;
    let mut f = Field::scalar_fn(*grid, |t, x, _| {
        sin(mf * PI * x) * exp(-k * mf * mf * PI * PI * t)
    });
    // Pin the boundary exactly; sin(m pi) is only zero to rounding.
    for node in 0..grid.n_nodes() {
        if grid.is_spatial_boundary(node) {
            f.set(node, 0, 0.0);
        }
    }
    Ok(f)
}

/// Primal problems the classical solvers handle.
#[derive(Debug, Clone, PartialEq)]
pub enum FdOracle {
    /// `theta_t = k theta_xx` on `[0, 1]` with zero boundary values.
    Heat { k: f64, theta0: Vec<f64> },
    /// `u_t = -u_x^2 / 2 + nu_hat u_xx` on a periodic grid.
    ViscousHj { nu_hat: f64, u0: Vec<f64> },
}

/// Explicit time marching sampled on the grid. Each grid step is split
/// into an integer number of stable substeps, so no interpolation is needed.
pub fn classical_fd_oracle(problem: &FdOracle, grid: &SpaceTimeGrid) -> Result<Field> {
    match problem {
        FdOracle::Heat { k, theta0 } => heat_fd(*k, theta0, grid),
        FdOracle::ViscousHj { nu_hat, u0 } => viscous_hj_fd(*nu_hat, u0, grid),
    }
}

fn check_data(grid: &SpaceTimeGrid, data: &[f64]) -> Result<()> {
    if data.len() != grid.nx() {
        return Err(Error::DimensionMismatch {
            context: "oracle initial data",
            expected: grid.nx(),
            found: data.len(),
        });
    }
    Ok(())
}

fn march(
    grid: &SpaceTimeGrid,
    init: &[f64],
    substeps: usize,
    mut step: impl FnMut(&[f64], &mut [f64], f64),
) -> Result<Field> {
    let nx = grid.nx();
    let h = grid.dt() / substeps as f64;
    let mut values = Vec::with_capacity(grid.n_nodes());
    let mut u = init.to_vec();
    let mut next = vec![0.0; nx];
    values.extend_from_slice(&u);
    for _ in 1..grid.nt() {
        for _ in 0..substeps {
            step(&u, &mut next, h);
            core::mem::swap(&mut u, &mut next);
        }
        values.extend_from_slice(&u);
    }
    Field::from_values(*grid, 1, values)
}

fn heat_fd(k: f64, theta0: &[f64], grid: &SpaceTimeGrid) -> Result<Field> {
    check_unit_dirichlet(grid)?;
    check_data(grid, theta0)?;
    let dx = grid.dx();
    let substeps = ceil(grid.dt() * k / (0.4 * dx * dx)).max(1.0) as usize;
    let nx = grid.nx();
    let mut init = theta0.to_vec();
    init[0] = 0.0;
    init[nx - 1] = 0.0;
    march(grid, &init, substeps, |u, out, h| {
        let r = k * h / (dx * dx);
        out[0] = 0.0;
        out[nx - 1] = 0.0;
        for i in 1..nx - 1 {
            out[i] = u[i] + r * (u[i + 1] - 2.0 * u[i] + u[i - 1]);
        }
    })
}

fn viscous_hj_fd(nu_hat: f64, u0: &[f64], grid: &SpaceTimeGrid) -> Result<Field> {
    if grid.space_dim() != 1 || grid.boundary() != Boundary::Periodic {
        return Err(Error::InvalidGrid(
            "the viscous HJ oracle needs a 1-D periodic grid".into(),
        ));
    }
    check_data(grid, u0)?;
    let nx = grid.nx();
    let dx = grid.dx();
    let slope = (0..nx)
        .map(|i| ((u0[(i + 1) % nx] - u0[(i + nx - 1) % nx]) / (2.0 * dx)).abs())
        .fold(0.0, f64::max);
    // Diffusive and advective limits, with headroom for slope growth.
    let mut h_max = 0.25 * dx / slope.max(1e-12);
    if nu_hat > 0.0 {
        h_max = h_max.min(0.4 * dx * dx / nu_hat);
    }
    let substeps = ceil(grid.dt() / h_max).max(1.0) as usize;
    let rhs = move |u: &[f64], out: &mut [f64]| {
        for i in 0..nx {
            let (l, r) = (u[(i + nx - 1) % nx], u[(i + 1) % nx]);
            let ux = (r - l) / (2.0 * dx);
            let uxx = (r - 2.0 * u[i] + l) / (dx * dx);
            out[i] = -0.5 * ux * ux + nu_hat * uxx;
        }
    };
    let mut k1 = vec![0.0; nx];
    let mut k2 = vec![0.0; nx];
    let mut mid = vec![0.0; nx];
    // Heun's method.
    march(grid, u0, substeps, |u, out, h| {
        rhs(u, &mut k1);
        for i in 0..nx {
            mid[i] = u[i] + h * k1[i];
        }
        rhs(&mid, &mut k2);
        for i in 0..nx {
            out[i] = u[i] + 0.5 * h * (k1[i] + k2[i]);
        }
    })
}

/// Samples used to locate the steepest descent of `u0`.
const SHOCK_SAMPLES: usize = 20_000;

/// Default margin between the final time and the first characteristic
/// crossing.
pub const DEFAULT_SHOCK_GUARD: f64 = 0.08;

/// First crossing time `-1 / min u0'` over `[x_min, x_max]`, infinite when
/// `u0` is nowhere decreasing.
pub fn shock_time(u0: &dyn Fn(f64) -> f64, x_min: f64, x_max: f64) -> f64 {
    let h = (x_max - x_min) / SHOCK_SAMPLES as f64;
    let mut min_slope = f64::INFINITY;
    for i in 0..=SHOCK_SAMPLES {
        let x = x_min + i as f64 * h;
        let s = (u0(x + 1e-6) - u0(x - 1e-6)) / 2e-6;
        min_slope = min_slope.min(s);
    }
    if min_slope < 0.0 {
        -1.0 / min_slope
    } else {
        f64::INFINITY
    }
}

/// Pre-shock Burgers solution `u(x, t) = u0(x - u t)` by safeguarded
/// bisection and secant-Newton at every node. `u0` is evaluated off the
/// grid, so it must be defined (e.g. periodic) everywhere along the
/// characteristics.
pub fn burgers_characteristics_oracle(
    u0: &dyn Fn(f64) -> f64,
    grid: &SpaceTimeGrid,
    guard: f64,
) -> Result<Field> {
    if grid.space_dim() != 1 {
        return Err(Error::InvalidGrid(
            "the characteristics oracle is one-dimensional".into(),
        ));
    }
    let t_shock = shock_time(u0, grid.x_min(), grid.x_max());
    if grid.t_max() >= t_shock - guard {
        return Err(Error::ShockGuard {
            t_max: grid.t_max(),
            t_shock,
            guard,
        });
    }
    let (lo, hi) = (0..=SHOCK_SAMPLES).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), i| {
        let x = grid.x_min() + (grid.x_max() - grid.x_min()) * i as f64 / SHOCK_SAMPLES as f64;
        let v = u0(x);
        (lo.min(v), hi.max(v))
    });
    let pad = 1e-9 * (1.0 + hi.abs().max(lo.abs()));
    let mut values = Vec::with_capacity(grid.n_nodes());
    for node in 0..grid.n_nodes() {
        let (t, x, _) = grid.position(node);
        values.push(solve_characteristic(u0, x, t, lo - pad, hi + pad));
    }
    Field::from_values(*grid, 1, values)
}

/// Root of `F(u) = u - u0(x - u t)`, increasing in `u` before the shock.
fn solve_characteristic(u0: &dyn Fn(f64) -> f64, x: f64, t: f64, mut lo: f64, mut hi: f64) -> f64 {
    if t == 0.0 {
        return u0(x);
    }
    let f = |u: f64| u - u0(x - u * t);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    // Secant steps kept inside the bracket.
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..30 {
        if fb == fa {
            break;
        }
        let c = b - fb * (b - a) / (fb - fa);
        let c = if c > lo && c < hi { c } else { 0.5 * (lo + hi) };
        let fc = f(c);
        if fc == 0.0 {
            return c;
        }
        if fc > 0.0 {
            hi = c;
        } else {
            lo = c;
        }
        a = b;
        fa = fb;
        b = c;
        fb = fc;
        if (hi - lo).abs() <= 4.0 * f64::EPSILON * (1.0 + c.abs()) {
            break;
        }
    }
    if fa.abs() < fb.abs() {
        a
    } else {
        b
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Boundary;
    use crate::math::cos;

    #[test]
    fn exact_heat_mode() {
        let g = SpaceTimeGrid::new_1d(11, 11, 0.0, 1.0, 1.0).unwrap();
        let f = heat_exact_oracle(0.1, 1, &g).unwrap();
        for ix in 0..11 {
            assert_eq!(
                f.get(g.node_index(0, ix, 0), 0),
                if ix == 0 || ix == 10 {
                    0.0
                } else {
                    sin(PI * g.x(ix))
                }
            );
        }
        let mid = f.get(g.node_index(10, 5, 0), 0);
        assert!((mid - 0.372_708).abs() <= 1e-6, "{mid}");
        assert!((mid - exp(-0.1 * PI * PI)).abs() <= 1e-15);
    }

    #[test]
    fn fd_heat_agrees_with_exact_mode() {
        let g = SpaceTimeGrid::new_1d(64, 64, 0.0, 1.0, 0.1).unwrap();
        let theta0: Vec<f64> = (0..64).map(|i| sin(PI * g.x(i))).collect();
        let fd = classical_fd_oracle(&FdOracle::Heat { k: 0.1, theta0 }, &g).unwrap();
        let ex = heat_exact_oracle(0.1, 1, &g).unwrap();
        let rep = compare_fields(&fd, &ex, Mask::All).unwrap();
        assert!(rep.l2_rel <= 1e-3, "{}", rep.l2_rel);
    }

    #[test]
    fn fd_heat_of_zero_is_zero() {
        let g = SpaceTimeGrid::new_1d(16, 8, 0.0, 1.0, 0.5).unwrap();
        let fd = classical_fd_oracle(
            &FdOracle::Heat {
                k: 0.3,
                theta0: vec![0.0; 16],
            },
            &g,
        )
        .unwrap();
        assert!(fd.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn viscous_hj_self_convergence() {
        // Errors against a fine run shrink by about 4x per refinement.
        let run = |n: usize| {
            let g = SpaceTimeGrid::new(1, n, 9, 0.0, 1.0, 0.1, Boundary::Periodic).unwrap();
            let u0 = (0..n).map(|i| cos(2.0 * PI * g.x(i))).collect();
            classical_fd_oracle(&FdOracle::ViscousHj { nu_hat: 0.05, u0 }, &g).unwrap()
        };
        let fine = run(256);
        let at_final = |f: &Field, n: usize| -> Vec<f64> {
            let stride = 256 / n;
            (0..n)
                .map(|i| {
                    f.get(f.grid().node_index(8, i, 0), 0)
                        - fine.get(fine.grid().node_index(8, i * stride, 0), 0)
                })
                .collect()
        };
        let e32 = at_final(&run(32), 32)
            .iter()
            .map(|d| d.abs())
            .fold(0.0, f64::max);
        let e64 = at_final(&run(64), 64)
            .iter()
            .map(|d| d.abs())
            .fold(0.0, f64::max);
        let rate = e32 / e64;
        assert!(rate > 3.0 && rate < 6.0, "{e32} {e64} {rate}");
    }

    #[test]
    fn characteristics_constant_state() {
        let g = SpaceTimeGrid::new(1, 16, 8, 0.0, 1.0, 1.0, Boundary::Periodic).unwrap();
        let f = burgers_characteristics_oracle(&|_| 0.7, &g, DEFAULT_SHOCK_GUARD).unwrap();
        assert!(f.values().iter().all(|&v| v == 0.7));
    }

    #[test]
    fn characteristics_shock_guard_and_residual() {
        let u0 = |x: f64| 0.5 + 0.25 * sin(2.0 * PI * x);
        let ts = shock_time(&u0, 0.0, 1.0);
        assert!((ts - 1.0 / (0.5 * PI)).abs() <= 1e-6, "{ts}");
        // Refusal starts at t* - guard = 0.5566.
        let late = SpaceTimeGrid::new(1, 16, 8, 0.0, 1.0, 0.56, Boundary::Periodic).unwrap();
        match burgers_characteristics_oracle(&u0, &late, DEFAULT_SHOCK_GUARD) {
            Err(Error::ShockGuard { t_shock, .. }) => {
                assert!((t_shock - core::f64::consts::FRAC_2_PI).abs() < 1e-4)
            }
            other => panic!("{other:?}"),
        }
        let early = SpaceTimeGrid::new(1, 16, 8, 0.0, 1.0, 0.55, Boundary::Periodic).unwrap();
        assert!(burgers_characteristics_oracle(&u0, &early, DEFAULT_SHOCK_GUARD).is_ok());
        let g = SpaceTimeGrid::new(1, 32, 16, 0.0, 1.0, 0.4, Boundary::Periodic).unwrap();
        let f = burgers_characteristics_oracle(&u0, &g, DEFAULT_SHOCK_GUARD).unwrap();
        for node in 0..g.n_nodes() {
            let (t, x, _) = g.position(node);
            let u = f.get(node, 0);
            assert!((u - u0(x - u * t)).abs() <= 1e-12);
            if t == 0.0 {
                assert_eq!(u, u0(x));
            }
        }
    }

    #[test]
    fn compare_conventions() {
        let g = SpaceTimeGrid::new_1d(8, 8, 0.0, 1.0, 1.0).unwrap();
        let b = Field::scalar_fn(g, |t, x, _| x + t);
        assert_eq!(compare_fields(&b, &b, Mask::All).unwrap().l2_rel, 0.0);
        let z = Field::zeros(g, 1);
        let rep = compare_fields(&b, &z, Mask::All).unwrap();
        assert!(rep.l2_rel > 1e290);
        let mut a = b.clone();
        let mut r = crate::rng::stream(1, 0);
        a.values_mut()
            .iter_mut()
            .for_each(|v| *v += 1e-3 * crate::rng::uniform(&mut r, -1.0, 1.0));
        let rep = compare_fields(&a, &b, Mask::All).unwrap();
        let noise = sqrt(rep.field_diff.values().iter().map(|d| d * d).sum::<f64>());
        let bn = sqrt(b.values().iter().map(|d| d * d).sum::<f64>());
        assert!((rep.l2_rel - noise / bn).abs() <= 1e-15);
        assert!(rep.linf <= 1e-3);
        let other = SpaceTimeGrid::new_1d(9, 8, 0.0, 1.0, 1.0).unwrap();
        assert!(compare_fields(&b, &Field::zeros(other, 1), Mask::All).is_err());
    }
}
