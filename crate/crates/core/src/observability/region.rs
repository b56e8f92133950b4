//! Cell weights for balls and annuli on the lattice.
//!
//! In one dimension a region is a finite union of intervals and each cell
//! `[x - h/2, x + h/2]` gets its exact covered fraction, so integrals vary
//! continuously with the region. In two dimensions the fraction is estimated
//! from a fixed sub-lattice of sample points per cell.

use crate::error::{Error, Result};
use crate::grid::Grid;

const SUBSAMPLES: usize = 4;

/// Radial shell `inner <= |y| < outer`, optionally wrapped on the torus.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Shell {
    pub inner: f64,
    pub outer: f64,
    pub periodic: bool,
}

impl Shell {
    pub fn ball(radius: f64) -> Self {
        Shell { inner: 0.0, outer: radius, periodic: false }
    }

    /// `||y| - center| < half_width`
    pub fn band(center: f64, half_width: f64, periodic: bool) -> Self {
        Shell { inner: (center - half_width).max(0.0), outer: center + half_width, periodic }
    }
}

/// Sorted, disjoint intervals.
fn merge(mut parts: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    parts.retain(|(a, b)| b > a);
    parts.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(parts.len());
    for (a, b) in parts {
        match out.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}

/// The shell as intervals on the line. Periodic shells are unrolled over
/// enough images to cover the box.
fn intervals_1d(shell: Shell, box_length: f64) -> Vec<(f64, f64)> {
    let (a, b) = (shell.inner, shell.outer);
    let base = if a > 0.0 { vec![(a, b), (-b, -a)] } else { vec![(-b, b)] };
    if !shell.periodic {
        return merge(base);
    }
    let reach = (b / box_length).ceil() as i64 + 1;
    let mut parts = Vec::new();
    for k in -reach..=reach {
        let shift = k as f64 * box_length;
        parts.extend(base.iter().map(|(lo, hi)| (lo + shift, hi + shift)));
    }
    merge(parts)
}

fn covered(intervals: &[(f64, f64)], lo: f64, hi: f64) -> f64 {
    intervals.iter().map(|&(a, b)| (b.min(hi) - a.max(lo)).max(0.0)).sum()
}

/// Fraction of each cell inside `shell`.
pub(crate) fn cell_weights(grid: &Grid, shell: Shell) -> Result<Vec<f64>> {
    let h = grid.spacing();
    match grid.dim() {
        1 => {
            let iv = intervals_1d(shell, grid.box_length());
            Ok((0..grid.len())
                .map(|i| {
                    let x = grid.coord(i);
                    covered(&iv, x - 0.5 * h, x + 0.5 * h) / h
                })
                .collect())
        }
        _ => {
            if shell.periodic {
                return Err(Error::Domain("periodic regions are one-dimensional".into()));
            }
            let offsets: Vec<f64> = (0..SUBSAMPLES).map(|j| ((j as f64 + 0.5) / SUBSAMPLES as f64 - 0.5) * h).collect();
            let per_cell = (SUBSAMPLES * SUBSAMPLES) as f64;
            Ok((0..grid.len())
                .map(|i| {
                    let p = grid.point(i);
                    let mut hits = 0usize;
                    for dx in &offsets {
                        for dy in &offsets {
                            let r = ((p[0] + dx).powi(2) + (p[1] + dy).powi(2)).sqrt();
                            if r >= shell.inner && r < shell.outer {
                                hits += 1;
                            }
                        }
                    }
                    hits as f64 / per_cell
                })
                .collect())
        }
    }
}

/// Exact Lebesgue measure of the shell (wrapped on the torus when periodic).
pub(crate) fn shell_measure(grid: &Grid, shell: Shell) -> Result<f64> {
    match grid.dim() {
        1 => {
            let iv = intervals_1d(shell, grid.box_length());
            if shell.periodic {
                let lo = -grid.half_width();
                Ok(covered(&iv, lo, lo + grid.box_length()))
            } else {
                Ok(iv.iter().map(|(a, b)| b - a).sum())
            }
        }
        _ => {
            if shell.periodic {
                return Err(Error::Domain("periodic regions are one-dimensional".into()));
            }
            Ok(std::f64::consts::PI * (shell.outer.powi(2) - shell.inner.powi(2)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    #[test]
    fn merge_joins_overlaps() {
        assert_eq!(merge(vec![(2.0, 3.0), (0.0, 1.0), (0.5, 2.0)]), vec![(0.0, 3.0)]);
        assert_eq!(merge(vec![(0.0, 1.0), (2.0, 3.0)]), vec![(0.0, 1.0), (2.0, 3.0)]);
    }

    #[test]
    fn weights_sum_to_measure_in_1d() {
        let g = make_grid(1, 8.0, 256).unwrap();
        for shell in [Shell::band(2.0, 0.4, false), Shell::band(0.3, 0.4, false), Shell::ball(3.17)] {
            let w = cell_weights(&g, shell).unwrap();
            let total: f64 = w.iter().sum::<f64>() * g.spacing();
            assert!((total - shell_measure(&g, shell).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn periodic_band_wraps() {
        let g = make_grid(1, std::f64::consts::PI, 128).unwrap();
        let l = g.box_length();
        // centered at +-(l + 0.2): images at +-0.2 overlap near the origin
        let shell = Shell::band(l + 0.2, 0.5, true);
        let m = shell_measure(&g, shell).unwrap();
        assert!((m - 1.4).abs() < 1e-12, "{m}");
        let total: f64 = cell_weights(&g, shell).unwrap().iter().sum::<f64>() * g.spacing();
        assert!((total - m).abs() < 1e-12);
        // a band wider than the torus covers all of it
        assert!((shell_measure(&g, Shell::band(1.0, l, true)).unwrap() - l).abs() < 1e-12);
    }

    #[test]
    fn annulus_weights_in_2d() {
        let g = make_grid(2, 4.0, 128).unwrap();
        let shell = Shell::band(2.0, 0.4, false);
        let total: f64 = cell_weights(&g, shell).unwrap().iter().sum::<f64>() * g.cell_volume();
        let exact = shell_measure(&g, shell).unwrap();
        assert!((total - exact).abs() < 2e-3 * exact);
    }
}
