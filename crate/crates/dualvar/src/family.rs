//! Problem construction from a [`RunConfig`], plus the per-family pieces the
//! commands need: initial states, named output fields and reference errors.

use dualvar_core::grid::{Boundary, Field, SpaceTimeGrid};
use dualvar_core::legendre::{BurgersFlux, CouplingSpec, MSpec, ViscousHjRhs};
use dualvar_core::problems::{
    smooth_random_state, split_state, ConservationLawProblem, DualProblem, HeatProblem, HjProblem,
    NsDualProblem, NsMixedProblem,
};
use dualvar_core::rng;
use dualvar_core::verify::{
    burgers_characteristics_oracle, classical_fd_oracle, compare_fields, heat_exact_oracle,
    FdOracle, Mask, DEFAULT_SHOCK_GUARD,
};

use crate::config::{Family, InitialState, RunConfig};
use crate::error::Result;

pub enum Built {
    Heat(HeatProblem),
    Burgers(ConservationLawProblem),
    Hj(HjProblem),
    NsDual(NsDualProblem),
    NsMixed(NsMixedProblem),
}

/// Initial data sampled on the spatial nodes of `grid`.
pub fn initial_data(cfg: &RunConfig) -> Vec<f64> {
    let g = &cfg.grid;
    let len = g.x_max() - g.x_min();
    let s = |i: usize| (g.x(i) - g.x_min()) / len;
    match g.space_dim() {
        1 => (0..g.nx()).map(|i| cfg.initial.eval(s(i))).collect(),
        _ => {
            let p = &cfg.initial;
            let mut v = Vec::with_capacity(2 * g.space_nodes());
            for ix in 0..g.nx() {
                for iy in 0..g.ny() {
                    let (sx, sy) = (s(ix), s(iy));
                    let bump = p.amplitude
                        * (p.wavenumber * std::f64::consts::PI * sx).sin()
                        * (p.wavenumber * std::f64::consts::PI * sy).sin();
                    v.push(p.offset + bump);
                    v.push(p.offset - bump);
                }
            }
            v
        }
    }
}

impl Built {
    pub fn new(cfg: &RunConfig) -> Result<Built> {
        let g = cfg.grid;
        let data = initial_data(cfg);
        let dim = cfg.potential_dim();
        Ok(match cfg.family {
            Family::Heat => Built::Heat(HeatProblem::new(
                cfg.k,
                data,
                cfg.potential.build(dim, 1.0)?,
                g,
            )?),
            Family::Burgers => Built::Burgers(ConservationLawProblem::new(
                CouplingSpec::new(BurgersFlux { space_dim: 1 })?,
                cfg.potential.build(dim, cfg.c)?,
                data,
                g,
                cfg.margin,
            )?),
            Family::Hj => {
                let p = HjProblem::new(
                    CouplingSpec::new(ViscousHjRhs { nu_hat: cfg.nu_hat })?,
                    cfg.potential.build(dim, 1.0)?,
                    data,
                    g,
                )?;
                Built::Hj(match cfg.margin {
                    Some(m) => p.with_margin(m)?,
                    None => p,
                })
            }
            Family::NsDual => Built::NsDual(NsDualProblem::new(
                cfg.nu_hat,
                cfg.rho0,
                cfg.c,
                cfg.potential.build(dim, 1.0)?,
                velocity_data(data),
                g,
            )?),
            Family::NsMixed => Built::NsMixed(NsMixedProblem::new(
                cfg.nu_hat,
                cfg.rho0,
                cfg.c,
                cfg.potential.build(dim, 1.0)?,
                cfg.sign,
                velocity_data(data),
                g,
            )?),
        })
    }

    pub fn problem(&self) -> &dyn DualProblem {
        match self {
            Built::Heat(p) => p,
            Built::Burgers(p) => p,
            Built::Hj(p) => p,
            Built::NsDual(p) => p,
            Built::NsMixed(p) => p,
        }
    }

    pub fn grid(&self) -> SpaceTimeGrid {
        *self.problem().grid()
    }

    /// The parametric transform whose identities the verify suite checks.
    /// For the Navier-Stokes families this is the uncoupled potential.
    pub fn legendre_spec(&self, cfg: &RunConfig) -> Result<MSpec> {
        Ok(match self {
            Built::Heat(p) => p.spec().clone(),
            Built::Burgers(p) => p.spec().clone(),
            Built::Hj(p) => p.spec().clone(),
            Built::NsDual(_) | Built::NsMixed(_) => {
                MSpec::uncoupled(cfg.potential.build(cfg.potential_dim(), 1.0)?)
            }
        })
    }

    pub fn initial_state(&self, cfg: &RunConfig) -> Vec<f64> {
        let p = self.problem();
        match cfg.initial_state {
            InitialState::Zero => vec![0.0; p.n_vars()],
            InitialState::Random { amplitude } => {
                let mut r = rng::stream(cfg.seed, rng::streams::INITIAL_FIELDS);
                smooth_random_state(p, amplitude, &mut r)
            }
        }
    }

    /// The dual fields of a flattened state, by layout name.
    pub fn dual_fields(&self, x: &[f64]) -> Result<Vec<(String, Field)>> {
        let p = self.problem();
        let g = self.grid();
        let parts = split_state(p.layout(), g.n_nodes(), x);
        p.layout()
            .iter()
            .zip(parts)
            .map(|(f, v)| {
                Ok((
                    f.name.to_string(),
                    Field::from_values(g, f.components, v.to_vec())?,
                ))
            })
            .collect()
    }

    /// Recovered primal fields, by output name.
    pub fn primal_fields(&self, x: &[f64]) -> Result<Vec<(String, Field)>> {
        let g = self.grid();
        Ok(match self {
            Built::Heat(p) => {
                let lambda = Field::from_values(g, 1, x.to_vec())?;
                vec![("theta".into(), p.recover_primal(&lambda)?)]
            }
            Built::Burgers(p) => {
                let lambda = Field::from_values(g, 1, x.to_vec())?;
                vec![("u".into(), p.recover_primal(&lambda)?)]
            }
            Built::Hj(p) => {
                let (u, b, c) = p.recover_flat(x)?;
                vec![("u".into(), u), ("u_x".into(), b), ("u_xx".into(), c)]
            }
            Built::NsDual(p) => {
                let f = self.dual_fields(x)?;
                let (v, pr) = p.recover_velocity_pressure(&f[0].1, &f[1].1)?;
                vec![("velocity".into(), v), ("pressure".into(), pr)]
            }
            Built::NsMixed(p) => {
                let f = self.dual_fields(x)?;
                let (v, pr) = p.recover_velocity_pressure(&f[0].1, &f[1].1, &f[2].1, &f[3].1)?;
                vec![("velocity".into(), v), ("pressure".into(), pr)]
            }
        })
    }

    /// Relative L2 error of the recovered primal field against an independent
    /// reference solution, when one exists for this configuration.
    pub fn oracle_error(&self, cfg: &RunConfig, x: &[f64]) -> Option<f64> {
        let primal = self.primal_fields(x).ok()?;
        let reference = reference_solution(cfg)?;
        compare_fields(&primal[0].1, &reference, Mask::All)
            .ok()
            .map(|r| r.l2_rel)
    }
}

fn velocity_data(v: Vec<f64>) -> Option<Vec<f64>> {
    if v.iter().all(|&x| x == 0.0) {
        None
    } else {
        Some(v)
    }
}

/// Heat: the separable exact solution for a pure sine mode on `[0, 1]`, else
/// explicit time marching. Burgers: characteristics. HJ: explicit marching
/// on periodic grids.
pub fn reference_solution(cfg: &RunConfig) -> Option<Field> {
    let g = &cfg.grid;
    let p = &cfg.initial;
    match cfg.family {
        Family::Heat => {
            let m = p.wavenumber;
            let pure_mode = p.offset == 0.0 && m >= 1.0 && m.fract() == 0.0;
            if pure_mode {
                if let Ok(mut f) = heat_exact_oracle(cfg.k, m as u32, g) {
                    f.scale(p.amplitude);
                    return Some(f);
                }
            }
            classical_fd_oracle(
                &FdOracle::Heat {
                    k: cfg.k,
                    theta0: initial_data(cfg),
                },
                g,
            )
            .ok()
        }
        Family::Burgers => {
            let len = g.x_max() - g.x_min();
            let (x0, prof) = (g.x_min(), cfg.initial);
            let u0 = move |x: f64| prof.eval((x - x0) / len);
            burgers_characteristics_oracle(&u0, g, DEFAULT_SHOCK_GUARD).ok()
        }
        Family::Hj if g.boundary() == Boundary::Periodic => classical_fd_oracle(
            &FdOracle::ViscousHj {
                nu_hat: cfg.nu_hat,
                u0: initial_data(cfg),
            },
            g,
        )
        .ok(),
        _ => None,
    }
}
