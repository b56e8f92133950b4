mod common;

use std::f64::consts::PI;
use std::sync::Arc;

use obslab_core::grid::{make_grid, Grid, Trajectory};
use obslab_core::observability::{
    compute_constants, decay_fit, lower_bound_check, observability_functional, observability_parts, region_measure,
    t_star, uniqueness_probe, LimitClass, ObservabilityQuery, ProbeMode,
};
use obslab_core::propagator::{solve, PotentialSpec};
use obslab_core::{Error, C64};
use proptest::prelude::*;

fn free_run(grid: &Arc<Grid>, t_end: f64, dt: f64) -> Trajectory {
    let u0 = common::gaussian(grid, 1.0, 0.0, 0.0);
    let z = PotentialSpec::zero();
    solve(&u0, &z, &z, t_end, dt).unwrap()
}

/// Sampled closed form, used where a trajectory needs no solver.
fn sampled(grid: &Arc<Grid>, t0: f64, dt: f64, len: usize, f: impl Fn(f64, f64) -> C64) -> Trajectory {
    let slices = (0..len)
        .map(|k| (0..grid.len()).map(|i| f(grid.coord(i), t0 + k as f64 * dt)).collect())
        .collect();
    Trajectory::new(grid.clone(), t0, dt, slices).unwrap()
}

#[test]
fn free_gaussian_decay_and_held_out_grid() {
    let grid = make_grid(1, 32.0, 8192).unwrap();
    let dt = 1e-6;
    let traj = free_run(&grid, 1.2e-4, dt);
    let k = compute_constants(&traj, &PotentialSpec::zero(), 4.0, Some(17.0)).unwrap();
    let ts = t_star(&k).unwrap();
    // free flow: L = 0 leaves 2^-14 (c0 / A)^4 as the binding term
    assert!((ts - (k.c0 / k.a).powi(4) / 16384.0).abs() < 1e-15);

    let t_fit = (0.9 * ts / dt).floor() * dt;
    let samples: Vec<(f64, f64, f64)> = (0..7)
        .map(|j| {
            let rho = 4.0 + 0.5 * j as f64;
            (rho, t_fit, observability_functional(&traj, &ObservabilityQuery::new(rho, t_fit).unwrap()).unwrap())
        })
        .collect();
    let fit = decay_fit(&samples).unwrap();
    println!("fit {fit:?}");
    assert!(fit.r2 >= 0.99 && fit.slope < 0.0);

    let mut worst = f64::INFINITY;
    for frac in [0.3, 0.4, 0.5, 0.6] {
        for rho in [4.25, 4.75, 5.25, 5.75, 6.25] {
            let q = ObservabilityQuery::new(rho, frac * t_fit).unwrap();
            let r = lower_bound_check(&traj, &q, &k, fit.c_emp()).unwrap();
            assert!(r.pass, "rho {rho} t {}: margin {}", q.t, r.log_margin);
            worst = worst.min(r.log_margin);
        }
    }
    println!("worst held-out log margin {worst:.3}");

    // a vanishing constant cannot compensate the decay
    let q = ObservabilityQuery::new(5.0, 0.5 * t_fit).unwrap();
    let r = lower_bound_check(&traj, &q, &k, 0.0).unwrap();
    assert!(!r.pass && r.log_margin < 0.0);

    // preconditions of the check
    let late = ObservabilityQuery::new(5.0, 1.01 * ts).unwrap();
    assert!(matches!(lower_bound_check(&traj, &late, &k, fit.c_emp()), Err(Error::Domain(_))));
    let inner = ObservabilityQuery::new(3.5, 0.5 * t_fit).unwrap();
    assert!(matches!(lower_bound_check(&traj, &inner, &k, fit.c_emp()), Err(Error::Domain(_))));

    // probes
    let times: Vec<f64> = (0..6).map(|j| t_fit * 0.8f64.powi(j)).collect();
    let up = uniqueness_probe(&traj, 2.0 * fit.c_emp(), ProbeMode::TToZero { rho: 4.0 }, &times).unwrap();
    assert_eq!(up.class, LimitClass::ToInfinity);
    let radii = [4.0, 4.5, 5.0, 5.5, 6.0];
    let up = uniqueness_probe(&traj, 2.0 * fit.c_emp(), ProbeMode::RhoToInf { t: t_fit }, &radii).unwrap();
    assert_eq!(up.class, LimitClass::ToInfinity);
    let down = uniqueness_probe(&traj, 0.25 * fit.c_emp(), ProbeMode::RhoToInf { t: t_fit }, &radii).unwrap();
    assert_eq!(down.class, LimitClass::ToZero);
}

#[test]
fn j_decreases_with_rho_and_is_resolved() {
    let t = 0.01;
    let fine = make_grid(1, 32.0, 4096).unwrap();
    let traj = free_run(&fine, 0.032, 0.001);
    let js: Vec<f64> = [1.0, 2.0, 4.0]
        .iter()
        .map(|&rho| observability_functional(&traj, &ObservabilityQuery::new(rho, t).unwrap()).unwrap())
        .collect();
    assert!(js[0] > js[1] && js[1] > js[2] && js[2] > 0.0, "{js:?}");

    let coarse = make_grid(1, 32.0, 2048).unwrap();
    let traj_c = free_run(&coarse, 0.032, 0.001);
    for rho in [1.0, 2.0] {
        let q = ObservabilityQuery::new(rho, t).unwrap();
        let a = observability_functional(&traj_c, &q).unwrap();
        let b = observability_functional(&traj, &q).unwrap();
        assert!((a - b).abs() <= 0.01 * b, "rho {rho}: {a} vs {b}");
    }
}

#[test]
fn parts_are_non_negative_and_add_up() {
    let grid = make_grid(1, 32.0, 4096).unwrap();
    let traj = free_run(&grid, 0.032, 0.001);
    let q = ObservabilityQuery::new(1.5, 0.01).unwrap();
    let p = observability_parts(&traj, &q).unwrap();
    assert!(p.mass > 0.0 && p.gradient > 0.0);
    assert_eq!(p.total(), observability_functional(&traj, &q).unwrap());
}

#[test]
fn uniform_annulus_in_two_dimensions() {
    // |u| = 1, no gradient: J = (1/t) int 4 pi rho (1 + s/t) h ds over [t/4, 3t]
    let grid = make_grid(2, 8.0, 256).unwrap();
    let (rho, t) = (1.0, 0.01);
    let dt = 0.0015;
    let slices = vec![vec![C64::new(0.0, 1.0); grid.len()]; 21];
    let traj = Trajectory::new(grid.clone(), 0.0, dt, slices).unwrap();
    let q = ObservabilityQuery::new(rho, t).unwrap();
    let h = q.half_width();
    let exact = 4.0 * PI * rho * h * (2.75 + (9.0 - 1.0 / 16.0) / 2.0);
    let j = observability_functional(&traj, &q).unwrap();
    assert!((j - exact).abs() < 2e-3 * exact, "{j} vs {exact}");
    assert!((region_measure(&q, &grid, t).unwrap() - 4.0 * PI * 2.0 * h).abs() < 1e-12);
}

/// Measure of `{y in torus : dist(y, +-c) < h}` by dense sampling.
fn torus_measure(c: f64, h: f64, length: f64) -> f64 {
    let n = 200_000;
    let dist = |y: f64, z: f64| {
        let d = (y - z).rem_euclid(length);
        d.min(length - d)
    };
    let hits = (0..n)
        .filter(|&j| {
            let y = (j as f64 + 0.5) / n as f64 * length;
            dist(y, c) < h || dist(y, -c) < h
        })
        .count();
    hits as f64 / n as f64 * length
}

#[test]
fn periodic_band_on_the_circle() {
    // torus of length 2 pi with rho = 2 pi; the plane wave e^{i(2x - 4t)} has
    // |u|^2 = 1 and |u_x|^2 = 4
    let grid = make_grid(1, PI, 1024).unwrap();
    let rho = 2.0 * PI;
    let t = 1e-3;
    let dt = 2.5e-5;
    let traj = sampled(&grid, 0.0, dt, 125, |x, s| C64::from_polar(1.0, 2.0 * x - 4.0 * s));
    let q = ObservabilityQuery::new(rho, t).unwrap().periodic();
    let j = observability_functional(&traj, &q).unwrap();

    // composite Simpson of the measure-weighted integrand
    let (a, b) = q.time_window();
    let n = 400;
    let step = (b - a) / n as f64;
    let integrand = |s: f64| torus_measure(q.center(s), q.half_width(), 2.0 * PI) * (1.0 + 4.0 * s);
    let mut acc = integrand(a) + integrand(b);
    for m in 1..n {
        acc += if m % 2 == 1 { 4.0 } else { 2.0 } * integrand(a + m as f64 * step);
    }
    let oracle = acc * step / 3.0 / t;
    assert!((j - oracle).abs() < 2e-3 * oracle, "{j} vs {oracle}");

    let zero = sampled(&grid, 0.0, dt, 125, |_, _| C64::new(0.0, 0.0));
    assert_eq!(observability_functional(&zero, &q).unwrap(), 0.0);
}

#[test]
fn zero_solution_probes_vanish() {
    let grid = make_grid(1, 32.0, 4096).unwrap();
    let zero = sampled(&grid, 0.0, 0.001, 40, |_, _| C64::new(0.0, 0.0));
    let k = compute_constants(&zero, &PotentialSpec::zero(), 1.0, None).unwrap();
    assert!(k.is_degenerate());
    let q = ObservabilityQuery::new(1.0, 0.01).unwrap();
    assert!(lower_bound_check(&zero, &q, &k, 1.0).unwrap().skipped);
    let p = uniqueness_probe(&zero, 1.0, ProbeMode::TToZero { rho: 1.0 }, &[0.012, 0.01, 0.009, 0.008]).unwrap();
    assert_eq!(p.class, LimitClass::ToZero);
    let p = uniqueness_probe(&zero, 1.0, ProbeMode::RhoToInf { t: 0.01 }, &[1.0, 2.0, 3.0, 4.0]).unwrap();
    assert_eq!(p.class, LimitClass::ToZero);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn quadratic_in_amplitude(lambda in 0.1f64..10.0, rho in 1.0f64..3.0) {
        let grid = make_grid(1, 16.0, 1024).unwrap();
        let base = sampled(&grid, 0.0, 0.001, 32, |x, s| common::free_gaussian(&[x], s));
        let scaled = base.scaled(C64::new(lambda, 0.0));
        let q = ObservabilityQuery::new(rho, 0.01).unwrap();
        let j = observability_parts(&base, &q).unwrap();
        let js = observability_parts(&scaled, &q).unwrap();
        prop_assert!(j.mass >= 0.0 && j.gradient >= 0.0);
        prop_assert!((js.total() - lambda * lambda * j.total()).abs() <= 1e-12 * js.total());
    }

    #[test]
    fn one_dimensional_measure_is_four_half_widths(rho in 0.2f64..2.0, t in 1e-3f64..0.05, frac in 0.25f64..3.0) {
        let grid = make_grid(1, 40.0, 4096).unwrap();
        let q = ObservabilityQuery::new(rho, t).unwrap();
        prop_assume!(q.validate(&grid).is_ok());
        let s = frac * t;
        prop_assume!(q.center(s) > q.half_width());
        let m = region_measure(&q, &grid, s).unwrap();
        // equal up to the rounding of (c + h) - (c - h)
        prop_assert!((m - 4.0 * q.half_width()).abs() <= 1e-12 * m);
    }
}
