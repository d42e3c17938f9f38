use dualvar_core::diff::{apply, apply_transpose, Order};
use dualvar_core::grid::{integrate, Axis, Boundary, Field, SpaceTimeGrid};
use dualvar_core::legendre::{
    check_legendre_identities, presets, BurgersFlux, CouplingSpec, MSpec, PotentialSpec, Quadratic,
    Quartic,
};
use proptest::prelude::*;

fn grid_2d(nx: usize, nt: usize, boundary: Boundary) -> SpaceTimeGrid {
    SpaceTimeGrid::new(2, nx, nt, 0.0, 1.0, 0.7, boundary).unwrap()
}

fn boundary_strategy() -> impl Strategy<Value = Boundary> {
    prop_oneof![Just(Boundary::Dirichlet), Just(Boundary::Periodic)]
}

fn values(n: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-1.0f64..1.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn operators_are_linear(
        boundary in boundary_strategy(),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
        (u, v) in (values(5 * 6 * 6), values(5 * 6 * 6)),
    ) {
        let g = grid_2d(6, 5, boundary);
        let mix: Vec<f64> = u.iter().zip(&v).map(|(x, y)| a * x + b * y).collect();
        for axis in [Axis::T, Axis::X, Axis::Y] {
            for order in [Order::First, Order::Second] {
                let lhs = apply(&g, axis, order, &mix);
                let du = apply(&g, axis, order, &u);
                let dv = apply(&g, axis, order, &v);
                let scale = lhs.iter().fold(1.0f64, |m, x| m.max(x.abs()));
                for i in 0..lhs.len() {
                    prop_assert!((lhs[i] - (a * du[i] + b * dv[i])).abs() <= 1e-12 * scale);
                }
            }
        }
    }

    #[test]
    fn transpose_is_adjoint(
        boundary in boundary_strategy(),
        (u, v) in (values(4 * 5 * 5), values(4 * 5 * 5)),
    ) {
        let g = grid_2d(5, 4, boundary);
        for axis in [Axis::T, Axis::X, Axis::Y] {
            for order in [Order::First, Order::Second] {
                let du = apply(&g, axis, order, &u);
                let dtv = apply_transpose(&g, axis, order, &v);
                let lhs: f64 = du.iter().zip(&v).map(|(a, b)| a * b).sum();
                let rhs: f64 = u.iter().zip(&dtv).map(|(a, b)| a * b).sum();
                prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
            }
        }
    }

    /// With `v` vanishing on the boundary of the differentiated axis, the
    /// discrete integral of `u v' + u' v` is zero.
    #[test]
    fn integration_by_parts(
        nx in 5usize..12,
        modes in proptest::collection::vec((-1.0f64..1.0, 1u32..4), 1..4),
        seed in 0.0f64..6.0,
    ) {
        let g = SpaceTimeGrid::new_1d(nx, 6, 0.0, 1.0, 1.0).unwrap();
        let u = Field::scalar_fn(g, |t, x, _| (seed + 3.0 * x).cos() + t * x);
        let v = Field::scalar_fn(g, |t, x, _| {
            modes
                .iter()
                .map(|&(a, k)| a * (k as f64 * std::f64::consts::PI * x).sin() * (1.0 + t))
                .sum::<f64>()
        });
        let mut v = v;
        for node in 0..g.n_nodes() {
            if g.is_spatial_boundary(node) {
                v.set(node, 0, 0.0);
            }
        }
        let du = apply(&g, Axis::X, Order::First, u.values());
        let dv = apply(&g, Axis::X, Order::First, v.values());
        let prod: Vec<f64> = (0..g.n_nodes())
            .map(|n| u.values()[n] * dv[n] + du[n] * v.values()[n])
            .collect();
        let total = integrate(&Field::from_values(g, 1, prod).unwrap()).unwrap();
        prop_assert!(total.abs() <= 1e-12, "{total}");
    }

    #[test]
    fn quartic_heat_identities(p in -4.0f64..4.0) {
        let spec = presets::heat_quartic(1.0, 1.0).unwrap();
        let r = check_legendre_identities(&spec, &[p], &[], 1e-5);
        prop_assert!(r.passed(), "{r:?}");
        prop_assert!(r.fenchel_gap.abs() <= 1e-10);
        // theta solves theta + theta^3 = p
        let sol = spec.solve_u(&[p], &[], &[0.0], 1e-12, 50).unwrap();
        let th = sol.u[0];
        prop_assert!((th + th * th * th - p).abs() <= 1e-12 * p.abs().max(1.0));
    }

    #[test]
    fn burgers_identities(p in -3.0f64..3.0, l in -1.0f64..1.0) {
        let spec = presets::burgers(2.0, 1).unwrap();
        let r = check_legendre_identities(&spec, &[p], &[l], 1e-5);
        prop_assert!(r.passed(), "{r:?}");
        prop_assert!(r.fenchel_gap.abs() <= 1e-10);
        // M = (c - l) u^2 / 2, so U = p / (c - l)
        let sol = spec.solve_u(&[p], &[l], &[0.0], 1e-12, 50).unwrap();
        prop_assert!((sol.u[0] - p / (2.0 - l)).abs() <= 1e-12);
    }

    /// `M*` is convex in `P`: midpoint value below the chord.
    #[test]
    fn conjugate_is_convex_in_p(
        p1 in -2.0f64..2.0,
        p2 in -2.0f64..2.0,
        l in proptest::collection::vec(-0.5f64..0.5, 2),
    ) {
        let spec = MSpec::new(
            PotentialSpec::new(Quartic { dim: 1, a: 1.5, b: 0.5 }).unwrap(),
            CouplingSpec::new(BurgersFlux { space_dim: 2 }).unwrap(),
        )
        .unwrap();
        let f = |p: f64| spec.eval_mstar(&[p], &l, &[0.0], 1e-12).unwrap();
        prop_assert!(f(0.5 * (p1 + p2)) <= 0.5 * (f(p1) + f(p2)) + 1e-12);
    }

    #[test]
    fn quadratic_conjugate_closed_form(scale in 0.2f64..5.0, p in proptest::collection::vec(-3.0f64..3.0, 3)) {
        let spec = MSpec::uncoupled(PotentialSpec::new(Quadratic { dim: 3, scale }).unwrap());
        let m = spec.eval_mstar(&p, &[], &[0.0; 3], 1e-12).unwrap();
        let exact = p.iter().map(|x| x * x).sum::<f64>() / (2.0 * scale);
        prop_assert!((m - exact).abs() <= 1e-12 * exact.max(1.0));
    }
}
