mod common;

use common::{free_gaussian, gaussian, random_potential};
use obslab_core::grid::{make_grid, WaveField};
use obslab_core::propagator::{
    equation_residual, free_propagate, nls_difference_potential, solve, solve_nls, step_strang, SolveOptions,
    SpaceTimeSpec,
};
use obslab_core::C64;
use proptest::prelude::*;

/// Direct trapezoidal quadrature of `(4 pi i t)^(-1/2) int exp(i |x-y|^2 / 4t) u0(y) dy`
/// for `u0 = exp(-y^2/4)` in one dimension.
fn kernel_quadrature(x: f64, t: f64) -> C64 {
    let h = 0.004;
    let n = (80.0 / h) as i64;
    let mut acc = C64::new(0.0, 0.0);
    for j in 0..=n {
        let y = -40.0 + j as f64 * h;
        let w = if j == 0 || j == n { 0.5 } else { 1.0 };
        acc += C64::from_polar((-y * y / 4.0).exp(), (x - y) * (x - y) / (4.0 * t)) * w;
    }
    let pref = (C64::new(0.0, 4.0 * std::f64::consts::PI * t)).sqrt();
    acc * h / pref
}

#[test]
fn closed_form_agrees_with_kernel_quadrature() {
    for &t in &[0.3, 1.0] {
        for k in 0..=16 {
            let x = -8.0 + k as f64;
            let q = kernel_quadrature(x, t);
            let c = free_gaussian(&[x], t);
            assert!((q - c).norm() < 1e-11, "x={x} t={t}: {q} vs {c}");
        }
    }
}

#[test]
fn free_propagate_matches_closed_form_pointwise() {
    let g = make_grid(1, 20.0, 512).unwrap();
    let u0 = gaussian(&g, 1.0, 0.0, 0.0);
    let u = free_propagate(&u0, 1.0);
    for i in 0..g.len() {
        let x = g.point(i)[0];
        assert!((u.values()[i] - free_gaussian(&[x], 1.0)).norm() <= 1e-10, "x={x}");
    }
    assert!(free_propagate(&u0, 0.0).max_abs_diff(&u0) == 0.0);
}

#[test]
fn free_propagate_two_dimensions() {
    let g = make_grid(2, 12.0, 128).unwrap();
    let u0 = gaussian(&g, 1.0, 0.0, 0.0);
    let u = free_propagate(&u0, 0.7);
    let worst = (0..g.len())
        .map(|i| (u.values()[i] - free_gaussian(&g.point(i), 0.7)).norm())
        .fold(0.0, f64::max);
    assert!(worst <= 1e-10, "{worst}");
}

#[test]
fn free_propagate_group_law_and_unitarity() {
    let g = make_grid(1, 16.0, 256).unwrap();
    let u0 = gaussian(&g, 0.7, 1.0, 1.5);
    let a = free_propagate(&free_propagate(&u0, 0.3), 0.45);
    let b = free_propagate(&u0, 0.75);
    assert!(a.max_abs_diff(&b) <= 1e-12);
    assert!((b.norm() / u0.norm() - 1.0).abs() <= 1e-12);
}

#[test]
fn solve_matches_closed_form() {
    let g = make_grid(1, 20.0, 512).unwrap();
    let u0 = gaussian(&g, 1.0, 0.0, 0.0);
    let z = SpaceTimeSpec::zero();
    let traj = solve(&u0, &z, &z, 1.0, 1e-3).unwrap();
    assert_eq!(traj.len(), 1001);
    let exact = WaveField::from_fn(g.clone(), 1.0, |x| free_gaussian(x, 1.0)).unwrap();
    let err = traj.last().distance(&exact);
    assert!(err <= 1e-8, "{err}");
}

#[test]
fn real_potential_conserves_mass() {
    let g = make_grid(1, 24.0, 512).unwrap();
    let u0 = gaussian(&g, 1.0, 0.5, 1.0);
    let v = SpaceTimeSpec::sum(vec![
        SpaceTimeSpec::gaussian_well(C64::new(1.5, 0.0), 2.0, 3.0),
        SpaceTimeSpec::gaussian_well_at(C64::new(-0.7, 0.0), 1.0, 0.0, [2.0, 0.0]),
    ]);
    let traj = solve(&u0, &v, &SpaceTimeSpec::zero(), 1.0, 1e-3).unwrap();
    let m0 = u0.mass();
    for f in traj.fields() {
        assert!((f.mass() / m0 - 1.0).abs() <= 1e-8);
    }
}

fn error_at(dt: f64, reference: &WaveField, u0: &WaveField, v: &SpaceTimeSpec) -> f64 {
    let traj = solve(u0, v, &SpaceTimeSpec::zero(), 0.5, dt).unwrap();
    traj.last().distance(reference)
}

#[test]
fn strang_is_second_order_with_complex_potential() {
    let g = make_grid(1, 20.0, 256).unwrap();
    let u0 = gaussian(&g, 1.0, 0.0, 0.5);
    let v = random_potential(11, 1.5);
    let reference = solve(&u0, &v, &SpaceTimeSpec::zero(), 0.5, 1.25e-4).unwrap().last().clone();
    let e: Vec<f64> = [4e-3, 2e-3, 1e-3].iter().map(|&dt| error_at(dt, &reference, &u0, &v)).collect();
    for w in e.windows(2) {
        let ratio = w[0] / w[1];
        assert!((3.4..=4.6).contains(&ratio), "{e:?}");
    }
}

#[test]
fn forced_problem_is_second_order() {
    let g = make_grid(1, 20.0, 256).unwrap();
    let u0 = gaussian(&g, 1.0, 0.0, 0.0);
    let v = random_potential(3, 1.0);
    let f = SpaceTimeSpec::gaussian_well(C64::new(0.4, 0.3), 1.5, 2.0);
    let run = |dt: f64| solve(&u0, &v, &f, 0.5, dt).unwrap().last().clone();
    let reference = run(1.25e-4);
    let e: Vec<f64> = [4e-3, 2e-3, 1e-3].iter().map(|&dt| run(dt).distance(&reference)).collect();
    for w in e.windows(2) {
        assert!((3.4..=4.6).contains(&(w[0] / w[1])), "{e:?}");
    }
}

#[test]
fn nls_difference_residual_shrinks_with_dt() {
    let g = make_grid(1, 20.0, 256).unwrap();
    let f = |r: f64| r * r;
    let a = gaussian(&g, 1.0, 0.0, 0.0);
    let b = gaussian(&g, 1.1, 0.2, 0.3).scaled(C64::new(0.9, 0.0));
    let floor = 1e-6;
    let residual = |dt: f64| {
        let opts = SolveOptions::new(0.4, dt);
        let u1 = solve_nls(&a, &f, opts).unwrap();
        let u2 = solve_nls(&b, &f, opts).unwrap();
        let w: Vec<Vec<C64>> = (0..u1.len())
            .map(|k| u1.field(k).values().iter().zip(u2.field(k).values()).map(|(p, q)| p - q).collect())
            .collect();
        let omega = obslab_core::grid::Trajectory::new(g.clone(), 0.0, dt, w).unwrap();
        let d = nls_difference_potential(&u1, &u2, &f, floor).unwrap();
        let r = equation_residual(&omega, &d.potential, &SpaceTimeSpec::zero(), Some(&d.floor_mask)).unwrap();
        (r.l2, d.floor_measure)
    };
    let (r1, m1) = residual(4e-3);
    let (r2, _) = residual(2e-3);
    let ratio = r1 / r2;
    assert!(ratio > 3.0, "residuals {r1} {r2}, floor measure {m1}");
}

#[test]
fn zero_initial_data_gives_zero_trajectory() {
    let g = make_grid(2, 6.0, 32).unwrap();
    let u0 = WaveField::zeros(g, 0.0);
    let traj = solve(&u0, &random_potential(5, 1.0), &SpaceTimeSpec::zero(), 0.05, 0.01).unwrap();
    assert!(traj.is_identically_zero());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn free_step_round_trip(a in 0.5f64..2.0, c in -2.0f64..2.0, p in -2.0f64..2.0, dt in 1e-3f64..0.1) {
        let g = make_grid(1, 20.0, 256).unwrap();
        let u0 = gaussian(&g, a, c, p);
        let z = SpaceTimeSpec::zero();
        let fwd = step_strang(&u0, &z, &z, 0.0, dt).unwrap();
        let rev = free_propagate(&fwd, -dt);
        prop_assert!(rev.max_abs_diff(&u0) <= 1e-12);
        prop_assert!((fwd.norm() / u0.norm() - 1.0).abs() <= 1e-12);
    }
}
