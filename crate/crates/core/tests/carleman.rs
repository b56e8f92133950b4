mod common;

use std::sync::Arc;

use obslab_core::carleman::{
    apply_a, apply_s, bump_member, build_cutoffs, calibrate_constant, commutator_check, conjugation_residual,
    standard_suite, weight_exponent, BumpSpec, CarlemanConfig, CarlemanProbe, CutoffSet, SpaceTimeField,
    SIGMA_MULTIPLIERS,
};
use obslab_core::grid::{make_grid, Grid};
use rand::Rng;

fn random_spec(r: &mut impl Rng, side: f64, plateau: bool) -> BumpSpec {
    BumpSpec {
        side,
        radius: r.random_range(0.6..1.2),
        time_half_width: if plateau { r.random_range(0.05..0.12) } else { r.random_range(0.15..0.23) },
        momentum: r.random_range(-2.0..2.0),
    }
}

// the weight is static on this window
const PLATEAU: (f64, f64) = (0.375, 0.625);
// spans both ramps of phi
const CROSSING: (f64, f64) = (0.26, 0.74);

fn setup(n: usize) -> (Arc<Grid>, CutoffSet) {
    (make_grid(1, 8.0, n).unwrap(), build_cutoffs(2.0, 4).unwrap())
}

fn cfg(c: &CutoffSet, sigma: f64) -> CarlemanConfig {
    CarlemanConfig::new(c.clone(), sigma, 1.0).unwrap()
}

#[test]
fn s_symmetric_and_a_antisymmetric() {
    let (grid, cut) = setup(1024);
    let mut r = common::rng(7);
    let mut worst: (f64, f64) = (0.0, 0.0);
    for _ in 0..20 {
        let side = if r.random_bool(0.5) { 1.0 } else { -1.0 };
        let (pf, ph) = (r.random_bool(0.5), r.random_bool(0.5));
        let f = bump_member(&grid, &cut, CROSSING, 192, random_spec(&mut r, side, pf)).unwrap();
        let h = bump_member(&grid, &cut, CROSSING, 192, random_spec(&mut r, side, ph)).unwrap();
        let c = cfg(&cut, r.random_range(0.05..1.0));
        let (sf, sh) = (apply_s(&f, &c).unwrap(), apply_s(&h, &c).unwrap());
        let a = sf.inner(&h).unwrap();
        let b = f.inner(&sh).unwrap();
        worst.0 = worst.0.max((a - b).norm() / (sf.norm() * h.norm()));
        let (af, ah) = (apply_a(&f, &c).unwrap(), apply_a(&h, &c).unwrap());
        let a = af.inner(&h).unwrap();
        let b = f.inner(&ah).unwrap();
        worst.1 = worst.1.max((a + b).norm() / (af.norm() * h.norm()));
    }
    println!("symmetry {:.3e} antisymmetry {:.3e}", worst.0, worst.1);
    assert!(worst.0 <= 1e-8 && worst.1 <= 1e-8);
}

#[test]
fn conjugation_identity_on_plateau_fields() {
    let (grid, cut) = setup(4096);
    let mut r = common::rng(11);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let side = if r.random_bool(0.5) { 1.0 } else { -1.0 };
        let g = bump_member(&grid, &cut, PLATEAU, 96, random_spec(&mut r, side, true)).unwrap();
        let rep = conjugation_residual(&g, &cfg(&cut, r.random_range(0.05..0.5))).unwrap();
        worst = worst.max(rep.relative());
    }
    println!("conjugation worst relative {worst:.3e}");
    assert!(worst <= 1e-8);
}

#[test]
fn conjugation_residual_converges_across_transitions() {
    let spec = BumpSpec { side: 1.0, radius: 1.2, time_half_width: 0.22, momentum: 0.5 };
    let res: Vec<f64> = [192usize, 384, 768]
        .iter()
        .map(|&steps| {
            let (grid, cut) = setup(1024);
            let g = bump_member(&grid, &cut, CROSSING, steps, spec).unwrap();
            conjugation_residual(&g, &cfg(&cut, 0.1)).unwrap().relative()
        })
        .collect();
    println!("conjugation refinement {res:?}");
    assert!(res[0] / res[1] > 12.0 && res[1] / res[2] > 12.0);
}

#[test]
fn commutator_static_window() {
    let (grid, cut) = setup(4096);
    let spec = BumpSpec { side: -1.0, radius: 1.0, time_half_width: 0.1, momentum: 1.0 };
    let g = bump_member(&grid, &cut, PLATEAU, 64, spec).unwrap();
    let rep = commutator_check(&g, &cfg(&cut, 0.3)).unwrap();
    println!("static: {rep:?}");
    assert_eq!(rep.terms.time_profile, 0.0);
    assert_eq!(rep.terms.drift, 0.0);
    assert!(rep.relative_derived() < 1e-8);
    assert!(rep.flagged);
}

#[test]
fn commutator_refinement_study() {
    let spec = BumpSpec { side: 1.0, radius: 1.2, time_half_width: 0.22, momentum: 0.5 };
    let mut rows = Vec::new();
    for steps in [192usize, 384, 768] {
        let (grid, cut) = setup(1024);
        let g = bump_member(&grid, &cut, CROSSING, steps, spec).unwrap();
        let rep = commutator_check(&g, &cfg(&cut, 1.0)).unwrap();
        println!("steps {steps}: stated {:.3e} derived {:.3e} flagged {}", rep.relative_stated(), rep.relative_derived(), rep.flagged);
        rows.push(rep);
    }
    assert!(rows[0].relative_derived() / rows[2].relative_derived() > 16.0);
    // the stated coefficient does not converge
    assert!(rows[2].relative_stated() > 0.9 * rows[0].relative_stated());
    assert!(rows[1].flagged && rows[2].flagged);
}

#[test]
fn zero_field_commutator_is_zero() {
    let (grid, cut) = setup(64);
    let f = SpaceTimeField::compact(grid, 0.0, 0.1, vec![vec![Default::default(); 64]; 11]).unwrap();
    let rep = commutator_check(&f, &cfg(&cut, 1.0)).unwrap();
    assert_eq!(rep.discrepancy_stated, 0.0);
    assert_eq!(rep.direct, 0.0);
}

#[test]
fn calibration_on_standard_suite() {
    let (grid, cut) = setup(1024);
    let suite = standard_suite(&grid, &cut, 512).unwrap();
    assert_eq!(suite.len(), 10);
    let cal = calibrate_constant(&suite, &cut, 1.0, &SIGMA_MULTIPLIERS).unwrap();
    println!("c_n = {} all_pass {} monotone {}", cal.c_n, cal.all_pass, cal.monotone);
    assert_eq!(cal.records.len(), 30);
    assert!(cal.all_pass && cal.monotone && cal.admissible);
    // the calibrated constant is tight: some check needs all of it
    let tight = cal.records.iter().map(|r| r.required_constant()).fold(0.0, f64::max);
    assert!((tight / cal.c_n - 1.0).abs() < 1e-9);
    // and below it at least one check fails
    let probe = CarlemanProbe::new(&suite[1].g, &cut).unwrap();
    let below = cal.c_n * 0.5;
    let any_fail = cal.records.iter().any(|r| r.required_constant() > below);
    assert!(any_fail);
    let _ = probe.check(4.0, below);
}

#[test]
fn weight_at_least_one_on_admissible_support() {
    let (grid, cut) = setup(1024);
    for m in standard_suite(&grid, &cut, 256).unwrap() {
        for k in 0..m.g.len() {
            for (i, v) in m.g.slice(k).iter().enumerate() {
                if v.norm() > 0.0 {
                    assert!(weight_exponent(&cut, &[grid.coord(i)], m.g.time(k)) >= 1.0 - 1e-12, "{}", m.name);
                }
            }
        }
    }
}
