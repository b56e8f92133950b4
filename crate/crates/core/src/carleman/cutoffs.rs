use crate::error::{Error, Result};

/// Generalized smoothstep of order `k`: a polynomial of degree `2k + 1` rising
/// from 0 at `z = 0` to 1 at `z = 1`, with `k` vanishing derivatives at both
/// ends. Constant outside `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Smoothstep {
    order: usize,
    // coefficients of z^0 .. z^(2k+1)
    coeffs: Vec<f64>,
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

fn horner(coeffs: &[f64], z: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * z + c)
}

fn differentiate(coeffs: &[f64]) -> Vec<f64> {
    coeffs.iter().enumerate().skip(1).map(|(j, c)| j as f64 * c).collect()
}

impl Smoothstep {
    pub fn new(order: usize) -> Self {
        let k = order;
        let mut coeffs = vec![0.0; 2 * k + 2];
        for j in 0..=k {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            coeffs[k + 1 + j] = sign * binomial(k + j, j) * binomial(2 * k + 1, k - j);
        }
        Smoothstep { order, coeffs }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn value(&self, z: f64) -> f64 {
        if z <= 0.0 {
            0.0
        } else if z >= 1.0 {
            1.0
        } else {
            horner(&self.coeffs, z)
        }
    }

    /// `m`-th derivative; zero outside the open unit interval.
    pub fn derivative(&self, z: f64, m: usize) -> f64 {
        if m == 0 {
            return self.value(z);
        }
        if z <= 0.0 || z >= 1.0 {
            return 0.0;
        }
        let mut c = self.coeffs.clone();
        for _ in 0..m {
            c = differentiate(&c);
        }
        horner(&c, z)
    }

    /// Maximum of `|S^(m)|` on `[0, 1]`, sampled on a fine uniform mesh.
    pub fn sup_derivative(&self, m: usize) -> f64 {
        let mut c = self.coeffs.clone();
        for _ in 0..m {
            c = differentiate(&c);
        }
        (0..=20_000).map(|j| horner(&c, j as f64 / 20_000.0).abs()).fold(0.0, f64::max)
    }
}

/// Spatial cutoffs `theta_R`, `eta` and the time profile `phi`.
///
/// `theta_R = 1` on `|x| <= R`, `0` on `|x| >= R + 1`; `eta = 0` on `|y| <= 3/2`,
/// `1` on `|y| >= 2`; `phi = 0` on `[0, 1/4] u [3/4, 1]`, `4` on `[3/8, 5/8]`.
#[derive(Clone, Debug, PartialEq)]
pub struct CutoffSet {
    r: f64,
    step: Smoothstep,
    sup_dphi: f64,
    sup_ddphi: f64,
}

pub const PHI_PLATEAU: f64 = 4.0;
const PHI_RAMP: f64 = 8.0; // 1 / (3/8 - 1/4)

pub fn build_cutoffs(r: f64, smoothness_order: usize) -> Result<CutoffSet> {
    if !(r >= 2.0) || !r.is_finite() {
        return Err(Error::Domain(format!("cutoff radius R must be at least 2, got {r}")));
    }
    if smoothness_order < 4 {
        return Err(Error::Domain(format!("smoothness order must be at least 4, got {smoothness_order}")));
    }
    let step = Smoothstep::new(smoothness_order);
    let sup_dphi = PHI_PLATEAU * PHI_RAMP * step.sup_derivative(1);
    let sup_ddphi = PHI_PLATEAU * PHI_RAMP * PHI_RAMP * step.sup_derivative(2);
    Ok(CutoffSet { r, step, sup_dphi, sup_ddphi })
}

impl CutoffSet {
    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn smoothness_order(&self) -> usize {
        self.step.order()
    }

    pub fn step(&self) -> &Smoothstep {
        &self.step
    }

    /// `theta_R` as a function of `|x|`.
    pub fn theta(&self, radius: f64) -> f64 {
        1.0 - self.step.value(radius - self.r)
    }

    /// Radial derivative of `theta_R`.
    pub fn theta_prime(&self, radius: f64) -> f64 {
        -self.step.derivative(radius - self.r, 1)
    }

    /// `eta` as a function of `|y|`.
    pub fn eta(&self, radius: f64) -> f64 {
        self.step.value(2.0 * (radius - 1.5))
    }

    pub fn phi(&self, t: f64) -> f64 {
        self.phi_derivative(t, 0)
    }

    pub fn dphi(&self, t: f64) -> f64 {
        self.phi_derivative(t, 1)
    }

    pub fn ddphi(&self, t: f64) -> f64 {
        self.phi_derivative(t, 2)
    }

    fn phi_derivative(&self, t: f64, m: usize) -> f64 {
        let scale = PHI_PLATEAU * PHI_RAMP.powi(m as i32);
        if t <= 0.5 {
            scale * self.step.derivative(PHI_RAMP * (t - 0.25), m)
        } else {
            let base = if m == 0 { PHI_PLATEAU } else { 0.0 };
            base - scale * self.step.derivative(PHI_RAMP * (t - 0.625), m)
        }
    }

    pub fn sup_dphi(&self) -> f64 {
        self.sup_dphi
    }

    pub fn sup_ddphi(&self) -> f64 {
        self.sup_ddphi
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smoothstep_endpoint_derivatives_vanish() {
        for k in 4..=6 {
            let s = Smoothstep::new(k);
            assert!(s.value(0.0) == 0.0 && s.value(1.0) == 1.0);
            assert!((horner(&s.coeffs, 1.0) - 1.0).abs() < 1e-12);
            assert!((s.value(0.5) - 0.5).abs() < 1e-12);
            let mut c = s.coeffs.clone();
            for _ in 1..=k {
                c = differentiate(&c);
                assert!(horner(&c, 0.0).abs() < 1e-9);
                assert!(horner(&c, 1.0).abs() < 1e-9 * binomial(2 * k + 1, k).powi(2));
            }
        }
    }

    #[test]
    fn smoothstep_is_monotone() {
        let s = Smoothstep::new(4);
        let mut prev = 0.0;
        for j in 1..=1000 {
            let v = s.value(j as f64 / 1000.0);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn plateau_values() {
        let c = build_cutoffs(3.0, 4).unwrap();
        assert_eq!(c.theta(0.0), 1.0);
        assert_eq!(c.theta(4.0), 0.0);
        let mid = c.theta(3.5);
        assert!(mid > 0.0 && mid < 1.0);
        assert_eq!(c.phi(0.5), 4.0);
        assert_eq!(c.phi(0.2), 0.0);
        assert_eq!(c.phi(0.9), 0.0);
        assert_eq!(c.phi(0.375), 4.0);
        assert_eq!(c.phi(0.625), 4.0);
        assert_eq!(c.eta(3.0), 1.0);
        assert_eq!(c.eta(1.0), 0.0);
    }

    #[test]
    fn phi_derivatives_match_differences() {
        let c = build_cutoffs(2.0, 4).unwrap();
        let h = 1e-6;
        for &t in &[0.27, 0.3, 0.33, 0.66, 0.7, 0.73] {
            let d1 = (c.phi(t + h) - c.phi(t - h)) / (2.0 * h);
            assert!((d1 - c.dphi(t)).abs() < 1e-5 * c.sup_dphi(), "t={t}");
            let d2 = (c.dphi(t + h) - c.dphi(t - h)) / (2.0 * h);
            assert!((d2 - c.ddphi(t)).abs() < 1e-5 * c.sup_ddphi(), "t={t}");
        }
        assert!(c.dphi(0.3) > 0.0 && c.dphi(0.7) < 0.0);
        assert!(c.sup_dphi().is_finite() && c.sup_ddphi().is_finite());
        // order 4 smoothstep has degree 9 and peak slope 9! / (4!^2 4^4) = 315/128
        assert!((c.sup_dphi() - 315.0 / 128.0 * 4.0 * 8.0).abs() < 1e-6);
    }

    #[test]
    fn rejects_small_radius_and_low_order() {
        assert!(build_cutoffs(1.9, 4).is_err());
        assert!(build_cutoffs(2.0, 3).is_err());
    }
}
