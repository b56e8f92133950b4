#![allow(dead_code)]

use std::sync::Arc;

use obslab_core::grid::{Grid, WaveField};
use obslab_core::propagator::SpaceTimeSpec;
use obslab_core::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `exp(-|x - c|^2 / (4 a)) exp(i p x_1)`
pub fn gaussian(grid: &Arc<Grid>, a: f64, center: f64, momentum: f64) -> WaveField {
    WaveField::from_fn(grid.clone(), 0.0, |x| {
        let r2: f64 = x.iter().enumerate().map(|(k, v)| if k == 0 { (v - center).powi(2) } else { v * v }).sum();
        C64::from_polar((-r2 / (4.0 * a)).exp(), momentum * x[0])
    })
    .unwrap()
}

/// Closed-form free evolution of `exp(-|x|^2 / 4)` in dimension `n`.
pub fn free_gaussian(x: &[f64], t: f64) -> C64 {
    let z = C64::new(1.0, t);
    let r2: f64 = x.iter().map(|v| v * v).sum();
    z.powf(-(x.len() as f64) / 2.0) * (-r2 / (4.0 * z)).exp()
}

/// A smooth bounded complex potential made of a few modulated wells.
pub fn random_potential(seed: u64, scale: f64) -> SpaceTimeSpec {
    let mut r = rng(seed);
    let parts = (0..3)
        .map(|_| {
            let amp = C64::new(r.random_range(-1.0..1.0), r.random_range(-0.5..0.5)) * scale;
            let width = r.random_range(1.0..3.0);
            let freq = r.random_range(0.0..4.0);
            let c = r.random_range(-2.0..2.0);
            SpaceTimeSpec::gaussian_well_at(amp, width, freq, [c, 0.0])
        })
        .collect();
    SpaceTimeSpec::sum(parts)
}

pub fn l2_distance(a: &WaveField, b: &WaveField) -> f64 {
    a.distance(b)
}
