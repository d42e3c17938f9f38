//! Central-difference validation of discrete gradients.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::Field;

/// Relative error of one probe. The denominator is floored at `scale`, the
/// sup-norm of the analytic gradient: a central difference of an objective
/// `S` cannot resolve derivatives below roughly `eps |S| / h`, so entries
/// near a zero crossing are judged against the gradient's overall size
/// rather than their own. An absolute floor of 1e-14 covers `scale = 0`.
pub fn probe_relative_error(fd: f64, analytic: f64, scale: f64) -> f64 {
    let denom = fd.abs().max(analytic.abs()).max(scale).max(1e-14);
    (fd - analytic).abs() / denom
}

fn sup_norm(values: &[f64], free: impl Fn(usize) -> bool) -> f64 {
    values
        .iter()
        .enumerate()
        .filter(|(i, _)| free(*i))
        .fold(0.0, |m, (_, v)| m.max(v.abs()))
}

/// Compares `gradient(at)` against central differences of `objective` along
/// `n_probe` random single-entry perturbations of size `h`; returns the
/// largest relative error.
///
/// Entries are drawn uniformly over all nodes and components. Objectives that
/// pin constrained nodes should project their input so that the derivative
/// there is exactly zero.
pub fn fd_gradient_check<O, G>(
    objective: O,
    gradient: G,
    at: &Field,
    n_probe: usize,
    h: f64,
    rng: &mut ChaCha8Rng,
) -> Result<f64>
where
    O: Fn(&Field) -> Result<f64>,
    G: Fn(&Field) -> Result<Field>,
{
    let s0 = objective(at)?;
    if !s0.is_finite() {
        return Err(Error::NonFinite("objective at the check point"));
    }
    let g = gradient(at)?;
    if g.values().len() != at.values().len() {
        return Err(Error::DimensionMismatch {
            context: "gradient",
            expected: at.values().len(),
            found: g.values().len(),
        });
    }
    let scale = sup_norm(g.values(), |_| true);
    let mut probe = at.clone();
    let mut worst: f64 = 0.0;
    for _ in 0..n_probe {
        let idx = rng.gen_range(0..at.values().len());
        let base = at.values()[idx];
        probe.values_mut()[idx] = base + h;
        let sp = objective(&probe)?;
        probe.values_mut()[idx] = base - h;
        let sm = objective(&probe)?;
        probe.values_mut()[idx] = base;
        if !sp.is_finite() || !sm.is_finite() {
            return Err(Error::NonFinite("objective during probing"));
        }
        let fd = (sp - sm) / (2.0 * h);
        worst = worst.max(probe_relative_error(fd, g.values()[idx], scale));
    }
    Ok(worst)
}

/// Slice-level variant used by objectives over flattened multi-field state.
/// Probes are restricted to entries where `free` is true.
pub fn fd_gradient_check_slice<O>(
    objective: O,
    at: &[f64],
    gradient: &[f64],
    free: &[bool],
    n_probe: usize,
    h: f64,
    rng: &mut ChaCha8Rng,
) -> Result<f64>
where
    O: Fn(&[f64]) -> Result<f64>,
{
    let candidates: alloc::vec::Vec<usize> = (0..at.len()).filter(|&i| free[i]).collect();
    if candidates.is_empty() {
        return Ok(0.0);
    }
    let scale = sup_norm(gradient, |i| free[i]);
    let mut probe = at.to_vec();
    let mut worst: f64 = 0.0;
    for _ in 0..n_probe {
        let idx = candidates[rng.gen_range(0..candidates.len())];
        let base = at[idx];
        probe[idx] = base + h;
        let sp = objective(&probe)?;
        probe[idx] = base - h;
        let sm = objective(&probe)?;
        probe[idx] = base;
        if !sp.is_finite() || !sm.is_finite() {
            return Err(Error::NonFinite("objective during probing"));
        }
        let fd = (sp - sm) / (2.0 * h);
        worst = worst.max(probe_relative_error(fd, gradient[idx], scale));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{integrate, SpaceTimeGrid};
    use crate::math::sin;
    use crate::rng;

    fn setup() -> (
        Field,
        impl Fn(&Field) -> Result<f64>,
        impl Fn(&Field) -> Result<Field>,
    ) {
        let g = SpaceTimeGrid::new_1d(16, 16, 0.0, 1.0, 1.0).unwrap();
        let at = Field::scalar_fn(g, |t, x, _| sin(3.0 * x + t) + 0.2);
        let obj = |f: &Field| {
            let mut sq = f.clone();
            sq.values_mut().iter_mut().for_each(|v| *v *= *v);
            integrate(&sq)
        };
        let grad = |f: &Field| {
            let w = f.grid().weights();
            let vals = f
                .values()
                .iter()
                .zip(&w)
                .map(|(v, w)| 2.0 * v * w)
                .collect();
            Field::from_values(*f.grid(), 1, vals)
        };
        (at, obj, grad)
    }

    #[test]
    fn quadratic_objective_passes() {
        let (at, obj, grad) = setup();
        let mut r = rng::stream(1, rng::streams::GRADIENT_PROBES);
        let err = fd_gradient_check(&obj, &grad, &at, 40, 1e-3, &mut r).unwrap();
        assert!(err <= 1e-9, "{err}");
    }

    #[test]
    fn scaled_gradient_fails() {
        let (at, obj, grad) = setup();
        let bad = |f: &Field| {
            let mut g = grad(f)?;
            g.scale(1.01);
            Ok(g)
        };
        let mut r = rng::stream(1, rng::streams::GRADIENT_PROBES);
        let err = fd_gradient_check(&obj, bad, &at, 40, 1e-4, &mut r).unwrap();
        assert!(err > 5e-3 && err < 2e-2, "{err}");
    }

    #[test]
    fn non_finite_objective_is_an_error() {
        let (at, _, grad) = setup();
        let obj = |_: &Field| Ok(f64::NAN);
        let mut r = rng::stream(1, 0);
        assert!(matches!(
            fd_gradient_check(obj, grad, &at, 3, 1e-4, &mut r),
            Err(Error::NonFinite(_))
        ));
    }
}
