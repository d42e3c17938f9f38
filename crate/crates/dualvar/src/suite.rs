//! Structural checks behind `dualvar verify`.

use dualvar_core::diff::{apply_transpose, Order};
use dualvar_core::gradcheck::fd_gradient_check_slice;
use dualvar_core::grid::{Axis, Field};
use dualvar_core::legendre::{check_legendre_identities, PotentialSpec, Quadratic};
use dualvar_core::problems::{smooth_random_state, NsDualProblem};
use dualvar_core::rng::{self, uniform};
use dualvar_core::Error;

use crate::config::{Family, RunConfig};
use crate::error::Result;
use crate::family::Built;
use crate::output::CheckRow;

pub const LEGENDRE_PROBES: usize = 100;
pub const LEGENDRE_STEP: f64 = 1e-5;
pub const IDENTITY_TOL: f64 = 1e-5;
pub const FENCHEL_TOL: f64 = 1e-10;
pub const GRADIENT_STATES: usize = 5;
pub const GRADIENT_PROBES: usize = 40;
pub const GRADIENT_STEP: f64 = 1e-6;
pub const GRADIENT_TOL: f64 = 1e-6;
pub const STATE_AMPLITUDE: f64 = 0.05;
pub const STRUCTURE_TOL: f64 = 1e-12;
pub const EL_TOL: f64 = 1e-8;
pub const SINGULAR_DET: f64 = dualvar_core::problems::SINGULAR_DET;

/// Larger of two errors, with NaN winning so that failures stay visible.
fn worse(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

fn row(name: &str, value: f64, threshold: f64, pass: bool) -> CheckRow {
    CheckRow {
        name: name.to_string(),
        value,
        threshold,
        pass,
    }
}

fn at_most(name: &str, value: f64, threshold: f64) -> CheckRow {
    row(name, value, threshold, value <= threshold)
}

/// Runs every check that applies to the configured family.
pub fn verify_suite(cfg: &RunConfig, corrupt_gradient: bool) -> Result<Vec<CheckRow>> {
    let built = Built::new(cfg)?;
    let mut rows = legendre_rows(&built, cfg)?;

    if matches!(cfg.family, Family::NsDual | Family::NsMixed) {
        let (min_det, singular) = min_det_l(&built, cfg)?;
        let pass = singular == cfg.expect_singular_l;
        rows.push(row("l_invertible", min_det, SINGULAR_DET, pass));
        if singular {
            return Ok(rows);
        }
    }

    rows.push(at_most(
        "gradient_check",
        gradient_error(&built, cfg, corrupt_gradient)?,
        GRADIENT_TOL,
    ));

    match &built {
        Built::Heat(p) => {
            if let Some(e) = heat_el_error(p.k(), &built) {
                rows.push(at_most("heat_el_polynomials", e, EL_TOL));
            }
        }
        Built::NsDual(p) => rows.extend(ns_dual_rows(p, &built, cfg)?),
        Built::NsMixed(p) => {
            let x = random_states(&built, cfg).remove(0);
            let nn = built.grid().n_nodes();
            let f = built.dual_fields(&x)?;
            let (_, grad) = p.objective(&f[0].1, &f[1].1, &f[2].1, &f[3].1)?;
            let div = p.divergence(&f[2].1)?;
            let w = built.grid().weights();
            let e = (0..nn).fold(0.0, |m, n| {
                worse(m, (grad.omega.get(n, 0) / w[n] - div.get(n, 0)).abs())
            });
            rows.push(at_most("omega_gradient_is_divergence", e, STRUCTURE_TOL));
        }
        _ => {}
    }
    Ok(rows)
}

fn legendre_rows(built: &Built, cfg: &RunConfig) -> Result<Vec<CheckRow>> {
    let spec = built.legendre_spec(cfg)?;
    // parameters stay where the transform is defined: inside the Burgers
    // margin, and away from the HJ convexity wall at lambda = -1
    let l_range = match cfg.family {
        Family::Burgers => (cfg.c - cfg.margin.unwrap_or(0.0)).min(1.0),
        Family::Hj => 0.5,
        _ => 1.0,
    };
    let mut r = rng::stream(cfg.seed, rng::streams::LEGENDRE_PROBES);
    let (mut dp, mut dl, mut gap) = (0.0f64, 0.0f64, 0.0f64);
    let mut min_eig = f64::INFINITY;
    for _ in 0..LEGENDRE_PROBES {
        let p: Vec<f64> = (0..spec.dim_u())
            .map(|_| uniform(&mut r, -2.0, 2.0))
            .collect();
        let l: Vec<f64> = (0..spec.dim_l())
            .map(|_| uniform(&mut r, -l_range, l_range))
            .collect();
        let rep = check_legendre_identities(&spec, &p, &l, LEGENDRE_STEP);
        dp = worse(dp, rep.dp_rel_error);
        dl = worse(dl, rep.dl_rel_error);
        gap = worse(gap, rep.fenchel_gap.abs());
        min_eig = if rep.min_eigenvalue.is_nan() || min_eig.is_nan() {
            f64::NAN
        } else {
            min_eig.min(rep.min_eigenvalue)
        };
    }
    let mut rows = vec![at_most("legendre_dmstar_dp", dp, IDENTITY_TOL)];
    if spec.dim_l() > 0 {
        rows.push(at_most("legendre_dmstar_dl", dl, IDENTITY_TOL));
    }
    rows.push(at_most("legendre_fenchel_gap", gap, FENCHEL_TOL));
    rows.push(row("legendre_min_eigenvalue", min_eig, 0.0, min_eig > 0.0));
    Ok(rows)
}

pub fn random_states(built: &Built, cfg: &RunConfig) -> Vec<Vec<f64>> {
    let mut r = rng::stream(cfg.seed, rng::streams::RANDOM_STATES);
    (0..GRADIENT_STATES)
        .map(|_| smooth_random_state(built.problem(), STATE_AMPLITUDE, &mut r))
        .collect()
}

/// Worst probe error over the random states. `corrupt` scales the analytic
/// gradient by 1.01 before comparing, as a negative control.
pub fn gradient_error(built: &Built, cfg: &RunConfig, corrupt: bool) -> Result<f64> {
    let p = built.problem();
    let free = p.free_mask();
    let mut probes = rng::stream(cfg.seed, rng::streams::GRADIENT_PROBES);
    let mut worst = 0.0f64;
    for x in random_states(built, cfg) {
        let mut g = vec![0.0; x.len()];
        p.evaluate(&x, Some(&mut g))?;
        if corrupt {
            g.iter_mut().for_each(|v| *v *= 1.01);
        }
        let e = fd_gradient_check_slice(
            |y| p.evaluate(y, None),
            &x,
            &g,
            &free,
            GRADIENT_PROBES,
            GRADIENT_STEP,
            &mut probes,
        )?;
        worst = worse(worst, e);
    }
    Ok(worst)
}

/// Smallest `|det L|` over the zero state and the random states, and
/// whether the invertibility test rejected any of them.
fn min_det_l(built: &Built, cfg: &RunConfig) -> Result<(f64, bool)> {
    let g = built.grid();
    let nn = g.n_nodes();
    let probe = NsDualProblem::new(
        cfg.nu_hat,
        cfg.rho0,
        cfg.c,
        PotentialSpec::new(Quadratic { dim: 1, scale: 1.0 })?,
        None,
        g,
    )?;
    let lambda_offset = match cfg.family {
        Family::NsMixed => 4 * nn,
        _ => 0,
    };
    let mut states = vec![vec![0.0; built.problem().n_vars()]];
    states.extend(random_states(built, cfg));
    let mut min_det = f64::INFINITY;
    for x in states {
        let lambda = Field::from_values(g, 2, x[lambda_offset..lambda_offset + 2 * nn].to_vec())?;
        match probe.assemble_lk(&lambda) {
            Ok(lk) => {
                min_det = lk.det.values().iter().fold(min_det, |m, d| m.min(d.abs()));
            }
            Err(Error::SingularL { min_abs_det, .. }) => return Ok((min_abs_det, true)),
            Err(e) => return Err(e.into()),
        }
    }
    Ok((min_det, false))
}

fn ns_dual_rows(p: &NsDualProblem, built: &Built, cfg: &RunConfig) -> Result<Vec<CheckRow>> {
    let (mut lk_err, mut vp_err, mut div_err) = (0.0f64, 0.0f64, 0.0f64);
    for x in random_states(built, cfg) {
        let f = built.dual_fields(&x)?;
        let (lam, gam) = (&f[0].1, &f[1].1);
        let lk = p.assemble_lk(lam)?;
        for n in 0..built.grid().n_nodes() {
            let (l, k) = (lk.l.node(n), lk.k.node(n));
            let prod = [
                l[0] * k[0] + l[1] * k[1] - 1.0,
                l[0] * k[1] + l[1] * k[2],
                l[1] * k[0] + l[2] * k[1],
                l[1] * k[1] + l[2] * k[2] - 1.0,
            ];
            lk_err = prod.iter().fold(lk_err, |m, e| worse(m, e.abs()));
        }
        vp_err = p
            .vp_identity_defect(lam, gam)?
            .iter()
            .fold(vp_err, |m, d| worse(m, d.abs()));
        let (_, _, g_gamma) = p.objective_and_gradient(lam, gam)?;
        let (v, _) = p.recover_velocity_pressure(lam, gam)?;
        let wd = p.weak_divergence(&v)?;
        div_err = g_gamma
            .values()
            .iter()
            .zip(wd.values())
            .fold(div_err, |m, (a, b)| worse(m, (a - b).abs()));
    }
    Ok(vec![
        at_most("lk_identity", lk_err, STRUCTURE_TOL),
        at_most("vp_identity", vp_err, STRUCTURE_TOL),
        at_most("gamma_gradient_is_weak_divergence", div_err, STRUCTURE_TOL),
    ])
}

/// Largest relative deviation of the unprojected heat gradient, divided by
/// the weights, from `lambda_tt - k^2 lambda_xxxx` at deep interior nodes,
/// over polynomials the stencils differentiate exactly. `None` when the
/// grid has no node four steps from every boundary.
pub fn heat_el_error(k: f64, built: &Built) -> Option<f64> {
    let Built::Heat(prob) = built else {
        return None;
    };
    let g = built.grid();
    let w = g.weights();
    let nodes: Vec<usize> = (0..g.n_nodes()).filter(|&n| g.is_interior(n, 4)).collect();
    if nodes.is_empty() {
        return None;
    }
    let mut worst = 0.0f64;
    for (a, b) in [(2, 2), (4, 1), (3, 2), (4, 2)] {
        let lambda = Field::scalar_fn(g, |t, x, _| x.powi(a) * t.powi(b));
        let p = prob.assemble_p(lambda.values());
        let wp: Vec<f64> = p.iter().zip(&w).map(|(p, w)| p * w).collect();
        let gt = apply_transpose(&g, Axis::T, Order::First, &wp);
        let gx = apply_transpose(&g, Axis::X, Order::Second, &wp);
        for &n in &nodes {
            let (t, x, _) = g.position(n);
            let ltt = (b * (b - 1)) as f64 * t.powi(b - 2) * x.powi(a);
            let lxxxx = if a == 4 { 24.0 * t.powi(b) } else { 0.0 };
            let expect = ltt - k * k * lxxxx;
            let got = -(gt[n] + k * gx[n]) / w[n];
            worst = worse(worst, (got - expect).abs() / (1.0 + expect.abs()));
        }
    }
    Some(worst)
}
