//! Residual summaries with boundary margins and pole windows.

use serde::{Deserialize, Serialize};

use crate::grid::{Grid, GridFunction};

/// Summary of a pointwise residual over the admitted grid points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub max_abs: f64,
    pub mean_abs: f64,
    pub argmax_x: f64,
    /// Boundary points skipped at each end.
    pub excluded_margin: usize,
    /// Interior points skipped because they sit in a pole window or an
    /// unresolved tail.
    pub excluded_flagged: usize,
    pub points: usize,
}

impl ResidualReport {
    pub fn zero(grid: &Grid) -> Self {
        Self {
            max_abs: 0.0,
            mean_abs: 0.0,
            argmax_x: grid.a(),
            excluded_margin: 0,
            excluded_flagged: 0,
            points: 0,
        }
    }

    pub fn within(&self, tol: f64) -> bool {
        self.max_abs <= tol
    }
}

/// Which points of a grid enter a residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualScope {
    /// Points dropped at each end.
    pub margin: usize,
    /// Half-width of the window around each flagged pole, in units of `h`.
    pub pole_window: f64,
    /// Optional coordinate window; points outside are dropped.
    pub window: Option<(f64, f64)>,
}

impl Default for ResidualScope {
    fn default() -> Self {
        Self {
            margin: 2,
            pole_window: 5.0,
            window: None,
        }
    }
}

impl ResidualScope {
    pub fn with_margin(mut self, margin: usize) -> Self {
        self.margin = margin;
        self
    }

    pub fn with_pole_window(mut self, pole_window: f64) -> Self {
        self.pole_window = pole_window;
        self
    }

    pub fn with_window(mut self, lo: f64, hi: f64) -> Self {
        self.window = Some((lo, hi));
        self
    }

    /// Admission mask: `true` where a point enters the residual. The second
    /// value counts interior points removed by flags.
    pub fn mask(&self, grid: &Grid, sources: &[&GridFunction]) -> (Vec<bool>, usize) {
        let n = grid.n();
        let h = grid.h();
        let mut keep = vec![true; n];
        for (i, k) in keep.iter_mut().enumerate() {
            if i < self.margin || i + self.margin >= n {
                *k = false;
            }
        }
        let mut flagged = 0;
        for i in 0..n {
            if !keep[i] {
                continue;
            }
            let x = grid.x(i);
            let outside = self.window.is_some_and(|(lo, hi)| x < lo || x > hi);
            let near_pole = sources
                .iter()
                .flat_map(|s| s.poles())
                .any(|&p| (x - p).abs() <= self.pole_window * h);
            let tail = sources.iter().any(|s| s.is_unresolved(i));
            if outside || near_pole || tail {
                keep[i] = false;
                if !outside {
                    flagged += 1;
                }
            }
        }
        (keep, flagged)
    }

    pub fn report(&self, grid: &Grid, residual: &[f64], sources: &[&GridFunction]) -> ResidualReport {
        let (keep, flagged) = self.mask(grid, sources);
        summarize(grid, residual, &keep, self.margin, flagged)
    }

    /// Deviation of `d` from its mean over the admitted points. Returns the
    /// report together with the mean.
    pub fn constancy(&self, grid: &Grid, d: &[f64], sources: &[&GridFunction]) -> (ResidualReport, f64) {
        let (keep, flagged) = self.mask(grid, sources);
        let (sum, count) = d
            .iter()
            .zip(&keep)
            .filter(|(_, &k)| k)
            .fold((0.0, 0usize), |(s, c), (v, _)| (s + v, c + 1));
        let mean = if count > 0 { sum / count as f64 } else { 0.0 };
        let dev: Vec<f64> = d.iter().map(|v| v - mean).collect();
        (summarize(grid, &dev, &keep, self.margin, flagged), mean)
    }
}

fn summarize(grid: &Grid, residual: &[f64], keep: &[bool], margin: usize, flagged: usize) -> ResidualReport {
    let mut max_abs = 0.0_f64;
    let mut argmax = None;
    let mut sum = 0.0;
    let mut points = 0;
    for (i, (&r, &k)) in residual.iter().zip(keep).enumerate() {
        if !k {
            continue;
        }
        let a = if r.is_finite() { r.abs() } else { f64::INFINITY };
        points += 1;
        sum += a;
        if argmax.is_none() || a > max_abs {
            max_abs = a;
            argmax = Some(i);
        }
    }
    let mean_abs = if points > 0 { sum / points as f64 } else { 0.0 };
    ResidualReport {
        max_abs,
        mean_abs: mean_abs.min(max_abs),
        argmax_x: argmax.map_or(grid.a(), |i| grid.x(i)),
        excluded_margin: margin,
        excluded_flagged: flagged,
        points,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn margin_and_pole_window_are_dropped() {
        let g = Grid::new(-1.0, 1.0, 21).unwrap();
        let f = GridFunction::constant(g, 1.0).with_poles(vec![0.0]);
        let scope = ResidualScope::default().with_pole_window(1.0);
        let (keep, flagged) = scope.mask(&g, &[&f]);
        assert!(!keep[0] && !keep[1] && !keep[19] && !keep[20]);
        assert!(!keep[9] && !keep[10] && !keep[11]);
        assert!(keep[8] && keep[12]);
        assert_eq!(flagged, 3);
    }

    #[test]
    fn report_finds_worst_point() {
        let g = Grid::new(0.0, 1.0, 11).unwrap();
        let r: Vec<f64> = (0..11).map(|i| if i == 6 { -3.0 } else { 1.0 }).collect();
        let rep = ResidualScope::default().report(&g, &r, &[]);
        assert_eq!(rep.max_abs, 3.0);
        assert!((rep.argmax_x - 0.6).abs() < 1e-15);
        assert_eq!(rep.points, 7);
        assert!(rep.mean_abs <= rep.max_abs);
    }

    #[test]
    fn non_finite_residual_is_reported_as_infinite() {
        let g = Grid::new(0.0, 1.0, 11).unwrap();
        let mut r = vec![0.0; 11];
        r[5] = f64::NAN;
        let rep = ResidualScope::default().report(&g, &r, &[]);
        assert!(rep.max_abs.is_infinite());
    }

    #[test]
    fn constancy_of_shifted_constant_is_zero() {
        let g = Grid::new(0.0, 1.0, 11).unwrap();
        let (rep, c) = ResidualScope::default().constancy(&g, &[-2.0; 11], &[]);
        assert_eq!(rep.max_abs, 0.0);
        assert_eq!(c, -2.0);
    }
}
