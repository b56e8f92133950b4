//! Interpolation helpers: band-limited resampling on dilated grids and cubic
//! Lagrange interpolation in time.

use crate::error::{Error, Result};
use crate::grid::{Grid, Trajectory};
use crate::C64;

/// Evaluates the trigonometric interpolant of one periodic line at `targets`.
///
/// `coeffs` are unnormalised DFT coefficients (FFT order) of samples taken at
/// `-half_width + j * h`. The Nyquist mode is split symmetrically so a real
/// line interpolates to a real function.
fn eval_line(coeffs: &[C64], half_width: f64, targets: &[f64], out: &mut [C64]) {
    let n = coeffs.len();
    let half = n / 2;
    let dk = std::f64::consts::PI / half_width;
    let inv_n = 1.0 / n as f64;
    for (o, &y) in out.iter_mut().zip(targets) {
        let theta = dk * (y + half_width);
        let step = C64::from_polar(1.0, theta);
        let mut zp = C64::new(1.0, 0.0);
        let mut acc = coeffs[0];
        for m in 1..half {
            zp *= step;
            acc += coeffs[m] * zp + coeffs[n - m] * zp.conj();
        }
        acc += coeffs[half] * (half as f64 * theta).cos();
        *o = acc * inv_n;
    }
}

/// Resamples `values` (on `source`) at the points `scale * x` for every `x`
/// of `target`, using the band-limited interpolant.
///
/// Fails when a dilated point leaves the source box, where the periodic
/// interpolant would alias mass from the opposite edge.
pub fn resample_dilated(source: &Grid, values: &[C64], scale: f64, target: &Grid) -> Result<Vec<C64>> {
    if source.dim() != target.dim() {
        return Err(Error::Mismatch("resampling across dimensions".into()));
    }
    let m = target.points_per_axis();
    let pts: Vec<f64> = (0..m).map(|i| scale * target.coord(i)).collect();
    let reach = pts.iter().fold(0.0_f64, |a, y| a.max(y.abs()));
    if reach > source.half_width() * (1.0 + 1e-12) {
        return Err(Error::Domain(format!(
            "dilated argument reaches |y| = {reach:.6}, outside the box of half-width {}",
            source.half_width()
        )));
    }
    let coeffs = source.spectrum(values);
    let n = source.points_per_axis();
    let h = source.half_width();
    if source.dim() == 1 {
        let mut out = vec![C64::new(0.0, 0.0); m];
        eval_line(&coeffs, h, &pts, &mut out);
        return Ok(out);
    }
    // axis 1 first: each coefficient row becomes values at the target axis-1 points
    let mut partial = vec![C64::new(0.0, 0.0); n * m];
    for r in 0..n {
        // each axis contributes its own 1/n
        eval_line(&coeffs[r * n..(r + 1) * n], h, &pts, &mut partial[r * m..(r + 1) * m]);
    }
    let mut out = vec![C64::new(0.0, 0.0); m * m];
    let mut column = vec![C64::new(0.0, 0.0); n];
    let mut evaluated = vec![C64::new(0.0, 0.0); m];
    for c in 0..m {
        for r in 0..n {
            column[r] = partial[r * m + c];
        }
        eval_line(&column, h, &pts, &mut evaluated);
        for r in 0..m {
            out[r * m + c] = evaluated[r];
        }
    }
    Ok(out)
}

/// Cubic Lagrange stencil for time `s` on a uniform trajectory: returns the
/// first slice index and four weights.
pub fn cubic_stencil(t0: f64, dt: f64, len: usize, s: f64) -> Result<(usize, [f64; 4])> {
    if len < 4 {
        return Err(Error::Coverage(format!("cubic interpolation needs 4 slices, have {len}")));
    }
    let t_end = t0 + (len - 1) as f64 * dt;
    let tol = 1e-9 * dt;
    if s < t0 - tol || s > t_end + tol {
        return Err(Error::Coverage(format!("time {s} outside stored range [{t0}, {t_end}]")));
    }
    let pos = (s - t0) / dt;
    let k = (pos.floor() as isize).clamp(0, len as isize - 1) as usize;
    let first = k.saturating_sub(1).min(len - 4);
    let mut w = [0.0; 4];
    for (a, wa) in w.iter_mut().enumerate() {
        let xa = (first + a) as f64;
        let mut p = 1.0;
        for b in 0..4 {
            if a != b {
                let xb = (first + b) as f64;
                p *= (pos - xb) / (xa - xb);
            }
        }
        *wa = p;
    }
    Ok((first, w))
}

/// Cubic interpolation of a whole slice at time `s`.
pub fn interpolate_slice(traj: &Trajectory, s: f64) -> Result<Vec<C64>> {
    let (first, w) = cubic_stencil(traj.t_start(), traj.dt(), traj.len(), s)?;
    let n = traj.grid().len();
    let mut out = vec![C64::new(0.0, 0.0); n];
    for (a, wa) in w.iter().enumerate() {
        if *wa == 0.0 {
            continue;
        }
        for (o, v) in out.iter_mut().zip(traj.field(first + a).values()) {
            *o += v * *wa;
        }
    }
    Ok(out)
}

/// Quadrature node on a uniform trajectory: the integrand at `s` is the
/// combination `sum lambda * f(slice)` over `slices`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeNode {
    pub s: f64,
    pub weight: f64,
    pub slices: Vec<(usize, f64)>,
}

/// Composite trapezoid over `[a, b]` on the stored slices, closed at
/// off-lattice endpoints by linear interpolation between the two
/// neighbouring slices. `a == b` gives no nodes.
pub fn trapezoid_nodes(traj: &Trajectory, a: f64, b: f64) -> Result<Vec<TimeNode>> {
    if !(b >= a) {
        return Err(Error::Domain(format!("empty interval [{a}, {b}]")));
    }
    if !traj.covers(a, b) {
        return Err(Error::Coverage(format!(
            "[{a}, {b}] not inside the stored range [{}, {}]",
            traj.t_start(),
            traj.t_end()
        )));
    }
    if b == a {
        return Ok(Vec::new());
    }
    let dt = traj.dt();
    let pos = |s: f64| (s - traj.t_start()) / dt;
    let snap = |s: f64| -> Option<usize> {
        let x = pos(s);
        let k = x.round();
        ((x - k).abs() <= 1e-9 && k >= 0.0 && (k as usize) < traj.len()).then_some(k as usize)
    };
    let at = |s: f64| -> Vec<(usize, f64)> {
        if let Some(k) = snap(s) {
            return vec![(k, 1.0)];
        }
        let x = pos(s);
        let k = (x.floor().max(0.0) as usize).min(traj.len().saturating_sub(2));
        let frac = x - k as f64;
        vec![(k, 1.0 - frac), (k + 1, frac)]
    };
    let first = (pos(a) - 1e-9).ceil().max(0.0) as usize;
    let last = ((pos(b) + 1e-9).floor().max(0.0) as usize).min(traj.len() - 1);
    let mut times = Vec::new();
    if snap(a).is_none() {
        times.push(a);
    }
    if last >= first {
        times.extend((first..=last).map(|k| traj.time(k)));
    }
    if snap(b).is_none() {
        times.push(b);
    }
    times.dedup_by(|x, y| (*x - *y).abs() <= 1e-9 * dt);
    let n = times.len();
    Ok(times
        .iter()
        .enumerate()
        .map(|(j, &s)| {
            let left = if j > 0 { s - times[j - 1] } else { 0.0 };
            let right = if j + 1 < n { times[j + 1] - s } else { 0.0 };
            TimeNode { s, weight: 0.5 * (left + right), slices: at(s) }
        })
        .collect())
}

/// Stored slices with times inside `[a, b]`.
pub fn slices_within(traj: &Trajectory, a: f64, b: f64) -> usize {
    let pos = |s: f64| (s - traj.t_start()) / traj.dt();
    let first = (pos(a) - 1e-9).ceil().max(0.0);
    let last = (pos(b) + 1e-9).floor().min((traj.len() - 1) as f64);
    if last >= first {
        (last - first) as usize + 1
    } else {
        0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    #[test]
    fn trapezoid_nodes_integrate_linear_functions() {
        let g = make_grid(1, 1.0, 8).unwrap();
        let traj = Trajectory::new(g, 0.5, 0.1, vec![vec![C64::new(0.0, 0.0); 8]; 11]).unwrap();
        let f = |s: f64| 3.0 * s - 1.0;
        let slice_f = |k: usize| f(0.5 + 0.1 * k as f64);
        for (a, b) in [(0.5, 1.5), (0.53, 1.27), (0.6, 0.65), (0.6, 0.7)] {
            let nodes = trapezoid_nodes(&traj, a, b).unwrap();
            let q: f64 = nodes
                .iter()
                .map(|n| n.weight * n.slices.iter().map(|(k, l)| l * slice_f(*k)).sum::<f64>())
                .sum();
            let exact = 1.5 * (b * b - a * a) - (b - a);
            assert!((q - exact).abs() < 1e-13, "[{a}, {b}]: {q} vs {exact}");
        }
        assert!(trapezoid_nodes(&traj, 0.6, 0.6).unwrap().is_empty());
        assert!(trapezoid_nodes(&traj, 0.4, 0.6).is_err());
        assert_eq!(slices_within(&traj, 0.53, 1.27), 7);
    }

    #[test]
    fn identity_resample_reproduces_samples() {
        let g = make_grid(1, 6.0, 64).unwrap();
        let v: Vec<C64> = (0..64).map(|i| {
            let x = g.coord(i);
            C64::new((-x * x).exp(), 0.5 * (-x * x / 2.0).exp() * x)
        }).collect();
        let r = resample_dilated(&g, &v, 1.0, &g).unwrap();
        for (a, b) in r.iter().zip(&v) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn dilated_gaussian_is_spectrally_accurate() {
        let src = make_grid(1, 12.0, 256).unwrap();
        let dst = make_grid(1, 6.0, 100).unwrap();
        let v: Vec<C64> = (0..256).map(|i| C64::new((-src.coord(i).powi(2) / 2.0).exp(), 0.0)).collect();
        let r = resample_dilated(&src, &v, 1.7, &dst).unwrap();
        for (i, ri) in r.iter().enumerate() {
            let y = 1.7 * dst.coord(i);
            assert!((ri.re - (-y * y / 2.0).exp()).abs() < 1e-12, "{i}");
            assert!(ri.im.abs() < 1e-12);
        }
    }

    #[test]
    fn two_dimensional_resample() {
        let src = make_grid(2, 8.0, 64).unwrap();
        let dst = make_grid(2, 4.0, 24).unwrap();
        let f = |x: f64, y: f64| C64::new((-(x * x + 2.0 * y * y) / 2.0).exp(), (-(x - 0.5).powi(2) - y * y).exp());
        let v: Vec<C64> = (0..src.len()).map(|i| { let p = src.point(i); f(p[0], p[1]) }).collect();
        let r = resample_dilated(&src, &v, 1.3, &dst).unwrap();
        for (i, ri) in r.iter().enumerate() {
            let p = dst.point(i);
            assert!((ri - f(1.3 * p[0], 1.3 * p[1])).norm() < 1e-10, "{i}");
        }
    }

    #[test]
    fn resample_rejects_points_outside_box() {
        let src = make_grid(1, 4.0, 32).unwrap();
        let dst = make_grid(1, 4.0, 32).unwrap();
        let v = vec![C64::new(0.0, 0.0); 32];
        assert!(matches!(resample_dilated(&src, &v, 1.5, &dst), Err(Error::Domain(_))));
    }

    #[test]
    fn cubic_stencil_exact_for_cubics() {
        let f = |t: f64| 1.0 - 2.0 * t + 0.5 * t * t - 3.0 * t * t * t;
        for &s in &[0.0, 0.013, 0.25, 0.4999, 0.5] {
            let (first, w) = cubic_stencil(0.0, 0.05, 11, s).unwrap();
            let approx: f64 = (0..4).map(|a| w[a] * f((first + a) as f64 * 0.05)).sum();
            assert!((approx - f(s)).abs() < 1e-13, "{s}");
        }
        assert!(cubic_stencil(0.0, 0.05, 11, 0.6).is_err());
        assert!(cubic_stencil(0.0, 0.05, 3, 0.01).is_err());
    }
}
