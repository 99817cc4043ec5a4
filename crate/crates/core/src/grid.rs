//! Uniform grids and sampled functions.
//!
//! Every function that appears in the construction (superpotentials, weights,
//! eigenfunctions, log-derivatives, potentials) is carried as a
//! [`GridFunction`]: samples on a uniform [`Grid`], an optional analytic
//! derivative, the locations of flagged poles, and an optional mask of points
//! that are numerically unresolved (eigenfunction tails).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform sampling of `[a, b]` with `n` points, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    a: f64,
    b: f64,
    n: usize,
}

impl Grid {
    pub fn new(a: f64, b: f64, n: usize) -> Result<Self> {
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidGrid(format!("endpoints must be finite, got [{a}, {b}]")));
        }
        if b <= a {
            return Err(Error::InvalidGrid(format!("need b > a, got [{a}, {b}]")));
        }
        if n < 3 {
            return Err(Error::InvalidGrid(format!("grid.n must be >= 3, got {n}")));
        }
        Ok(Self { a, b, n })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        (self.b - self.a) / (self.n - 1) as f64
    }

    pub fn len(&self) -> f64 {
        self.b - self.a
    }

    /// Coordinate of point `i`. Written as a convex combination so that
    /// symmetric grids hit `x = 0` exactly.
    pub fn x(&self, i: usize) -> f64 {
        let m = (self.n - 1) as f64;
        let t = i as f64;
        (self.a * (m - t) + self.b * t) / m
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    /// Every other point; defined when `n` is odd.
    pub fn coarsened(&self) -> Option<Grid> {
        if self.n % 2 == 1 && self.n >= 5 {
            Some(Grid {
                a: self.a,
                b: self.b,
                n: (self.n + 1) / 2,
            })
        } else {
            None
        }
    }

    /// Grid in the coordinate `x = xi / alpha`. Negative `alpha` reverses the
    /// orientation, so callers must also reverse their samples.
    pub fn rescaled(&self, alpha: f64) -> Grid {
        if alpha > 0.0 {
            Grid {
                a: self.a / alpha,
                b: self.b / alpha,
                n: self.n,
            }
        } else {
            Grid {
                a: self.b / alpha,
                b: self.a / alpha,
                n: self.n,
            }
        }
    }

    /// Index of a grid point within `1e-9 h` of `x`.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        let t = (x - self.a) / self.h();
        let i = t.round();
        if i < 0.0 || i > (self.n - 1) as f64 {
            return None;
        }
        let i = i as usize;
        ((self.x(i) - x).abs() <= 1e-9 * self.h()).then_some(i)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.a && x <= self.b
    }
}

/// Samples of a real function on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
    slope: Option<Vec<f64>>,
    poles: Vec<f64>,
    unresolved: Option<Vec<bool>>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::InvalidGrid(format!(
                "expected {} samples, got {}",
                grid.n(),
                values.len()
            )));
        }
        Ok(Self {
            grid,
            values,
            slope: None,
            poles: Vec::new(),
            unresolved: None,
        })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..grid.n()).map(|i| f(grid.x(i))).collect();
        Self {
            grid,
            values,
            slope: None,
            poles: Vec::new(),
            unresolved: None,
        }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self::from_fn(grid, |_| c)
    }

    /// Attach analytic derivative samples.
    pub fn with_slope(mut self, slope: Vec<f64>) -> Result<Self> {
        if slope.len() != self.grid.n() {
            return Err(Error::InvalidGrid("slope length does not match grid".into()));
        }
        self.slope = Some(slope);
        Ok(self)
    }

    pub fn with_slope_fn(self, f: impl Fn(f64) -> f64) -> Self {
        let grid = self.grid;
        let slope = (0..grid.n()).map(|i| f(grid.x(i))).collect();
        Self {
            slope: Some(slope),
            ..self
        }
    }

    pub fn without_slope(mut self) -> Self {
        self.slope = None;
        self
    }

    pub fn with_poles(mut self, mut poles: Vec<f64>) -> Self {
        poles.sort_by(f64::total_cmp);
        poles.dedup();
        self.poles = poles;
        self
    }

    pub fn with_unresolved(mut self, mask: Option<Vec<bool>>) -> Self {
        self.unresolved = mask.filter(|m| m.iter().any(|&u| u));
        self
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn slope(&self) -> Option<&[f64]> {
        self.slope.as_deref()
    }

    pub fn poles(&self) -> &[f64] {
        &self.poles
    }

    pub fn unresolved(&self) -> Option<&[bool]> {
        self.unresolved.as_deref()
    }

    pub fn is_unresolved(&self, i: usize) -> bool {
        self.unresolved.as_ref().is_some_and(|m| m[i])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn same_grid(&self, other: &GridFunction) -> bool {
        self.grid == other.grid
    }

    pub fn ensure_same_grid(&self, other: &GridFunction) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::MismatchedGrids)
        }
    }

    /// Derivative samples: the analytic slope when attached, otherwise
    /// centered differences.
    pub fn derivative(&self) -> Vec<f64> {
        match &self.slope {
            Some(s) => s.clone(),
            None => centered_difference(&self.values, self.grid.h()),
        }
    }

    /// Pointwise map that keeps poles and the unresolved mask.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
            slope: None,
            poles: self.poles.clone(),
            unresolved: self.unresolved.clone(),
        }
    }

    /// Combine flags (poles, unresolved points) of `self` and `others` into a
    /// fresh function with the given values.
    pub fn derived(&self, values: Vec<f64>, others: &[&GridFunction]) -> GridFunction {
        let mut poles = self.poles.clone();
        let mut mask = self.unresolved.clone();
        for o in others {
            poles.extend_from_slice(&o.poles);
            if let Some(m) = &o.unresolved {
                let dst = mask.get_or_insert_with(|| vec![false; m.len()]);
                for (d, &s) in dst.iter_mut().zip(m) {
                    *d |= s;
                }
            }
        }
        GridFunction {
            grid: self.grid,
            values,
            slope: None,
            poles: Vec::new(),
            unresolved: None,
        }
        .with_poles(poles)
        .with_unresolved(mask)
    }

    /// Cubic (four-point Lagrange) interpolation. Exact at grid points.
    pub fn interpolate(&self, x: f64) -> f64 {
        cubic_interpolate(&self.grid, &self.values, x)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Centered three-point first difference; second-order one-sided at the ends.
pub fn centered_difference(u: &[f64], h: f64) -> Vec<f64> {
    let n = u.len();
    let mut d = vec![0.0; n];
    if n < 3 {
        return d;
    }
    for i in 1..n - 1 {
        d[i] = (u[i + 1] - u[i - 1]) / (2.0 * h);
    }
    d[0] = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h);
    d[n - 1] = (3.0 * u[n - 1] - 4.0 * u[n - 2] + u[n - 3]) / (2.0 * h);
    d
}

/// Trapezoidal quadrature of uniformly spaced samples.
pub fn trapezoid(u: &[f64], h: f64) -> f64 {
    match u.len() {
        0 => 0.0,
        1 => 0.0,
        n => h * (u.iter().sum::<f64>() - 0.5 * (u[0] + u[n - 1])),
    }
}

pub fn cubic_interpolate(grid: &Grid, values: &[f64], x: f64) -> f64 {
    let n = grid.n();
    let h = grid.h();
    let t = (x - grid.a()) / h;
    let near = t.round();
    if (t - near).abs() <= 1e-9 && near >= 0.0 && near <= (n - 1) as f64 {
        return values[near as usize];
    }
    let base = (t.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
    let mut acc = 0.0;
    for j in 0..4 {
        let tj = (base + j) as f64;
        let mut w = 1.0;
        for m in 0..4 {
            if m != j {
                let tm = (base + m) as f64;
                w *= (t - tm) / (tj - tm);
            }
        }
        acc += w * values[base + j];
    }
    acc
}

/// Sign changes and exact interior zeros of `u`, located by linear
/// interpolation between neighbouring samples. Points flagged in `skip` are
/// ignored.
pub fn zero_crossings(grid: &Grid, u: &[f64], skip: Option<&[bool]>) -> Vec<f64> {
    let n = u.len();
    let skipped = |i: usize| skip.is_some_and(|s| s[i]);
    let mut zeros = Vec::new();
    for i in 1..n - 1 {
        if skipped(i) {
            continue;
        }
        if u[i] == 0.0 {
            zeros.push(grid.x(i));
        } else if i + 1 < n - 1 && !skipped(i + 1) && u[i + 1] != 0.0 && u[i] * u[i + 1] < 0.0 {
            let t = u[i] / (u[i] - u[i + 1]);
            zeros.push(grid.x(i) + t * grid.h());
        }
    }
    zeros
}
