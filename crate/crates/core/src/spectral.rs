//! Bound states of `-d² + V` and of `L = -(1/g) d g d + Ṽ`.
//!
//! Both problems reduce to the symmetric tridiagonal matrix of the
//! three-point Laplacian with Dirichlet ends. The lowest levels come from
//! Sturm-count bisection, the vectors from inverse iteration. A weighted
//! problem is first mapped to Schrödinger form with `w = √g ψ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{centered_difference, trapezoid, zero_crossings, Grid, GridFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMethod {
    /// Three-point finite differences, bisection and inverse iteration.
    TridiagonalFd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverMeta {
    pub grid: Grid,
    pub method: SolverMethod,
    pub tolerance: f64,
    pub richardson: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumResult {
    /// Reported levels: Richardson-extrapolated when enabled.
    pub eigenvalues: Vec<f64>,
    /// Levels of the fine-grid matrix itself.
    pub raw_eigenvalues: Vec<f64>,
    /// `|E_h - E_2h| / 3` per level; empty without Richardson.
    pub error_estimates: Vec<f64>,
    /// ψ, unit norm under the relevant inner product.
    pub eigenfunctions: Option<Vec<GridFunction>>,
    /// `w = √g ψ`, unit norm in the plain inner product.
    pub amplitudes: Option<Vec<GridFunction>>,
    pub sign_changes: Vec<usize>,
    /// Edge-to-peak ratios `(left, right)` of each amplitude.
    pub edge_ratios: Vec<(f64, f64)>,
    pub meta: SolverMeta,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub richardson: bool,
    pub want_vectors: bool,
    pub leakage_tol: f64,
    /// Skip the decay check at an end that sits on a natural wall.
    pub natural_walls: (bool, bool),
    /// Points with `|w| < tail_cutoff · max|w|` are marked unresolved.
    pub tail_cutoff: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            richardson: true,
            want_vectors: true,
            leakage_tol: 1e-6,
            natural_walls: (false, false),
            tail_cutoff: 1e-4,
        }
    }
}

/// Weight of `L1`. Analytic log-slopes `S' = g'/2g`, `S''` may be supplied;
/// otherwise the exact discrete similarity on `√g` is used.
#[derive(Debug, Clone, PartialEq)]
pub struct Weight {
    pub g: GridFunction,
    pub log_slopes: Option<(Vec<f64>, Vec<f64>)>,
}

impl Weight {
    pub fn numeric(g: GridFunction) -> Self {
        Self { g, log_slopes: None }
    }

    pub fn analytic(g: GridFunction, s1: Vec<f64>, s2: Vec<f64>) -> Result<Self> {
        if s1.len() != g.len() || s2.len() != g.len() {
            return Err(Error::InvalidGrid("log-slope length does not match grid".into()));
        }
        Ok(Self {
            g,
            log_slopes: Some((s1, s2)),
        })
    }

    pub fn unit(grid: Grid) -> Self {
        let n = grid.n();
        Self {
            g: GridFunction::constant(grid, 1.0),
            log_slopes: Some((vec![0.0; n], vec![0.0; n])),
        }
    }

    pub fn grid(&self) -> &Grid {
        self.g.grid()
    }

    /// Every other point, for Richardson's coarse grid.
    fn coarsened(&self) -> Option<Weight> {
        let grid = self.grid().coarsened()?;
        let take = |v: &[f64]| v.iter().step_by(2).copied().collect::<Vec<_>>();
        Some(Weight {
            g: GridFunction::new(grid, take(self.g.values())).ok()?,
            log_slopes: self.log_slopes.as_ref().map(|(a, b)| (take(a), take(b))),
        })
    }

    /// `Ṽ + S'² + S''` (analytic) or the discrete equivalent.
    fn effective(&self, v_tilde: &[f64]) -> Result<Vec<f64>> {
        let g = self.g.values();
        let n = g.len();
        let grid = self.grid();
        for i in 1..n - 1 {
            if !(g[i] > 0.0) || !g[i].is_finite() {
                return Err(Error::NonPositive {
                    what: "g",
                    x: grid.x(i),
                    value: g[i],
                });
            }
        }
        match &self.log_slopes {
            Some((s1, s2)) => Ok((0..n).map(|i| (v_tilde[i] + s1[i] * s1[i]) + s2[i]).collect()),
            None => {
                let h = grid.h();
                let r: Vec<f64> = g.iter().map(|v| v.max(0.0).sqrt()).collect();
                let mut out = v_tilde.to_vec();
                for i in 1..n - 1 {
                    out[i] += (r[i + 1] + r[i - 1] - 2.0 * r[i]) / (h * h * r[i]);
                }
                Ok(out)
            }
        }
    }
}

/// Symmetric tridiagonal matrix with constant off-diagonal.
struct Tridiagonal {
    diag: Vec<f64>,
    off: f64,
}

impl Tridiagonal {
    /// Interior-point matrix of `-d² + V` with Dirichlet ends.
    fn schrodinger(v: &[f64], h: f64) -> Self {
        let n = v.len();
        let c = 1.0 / (h * h);
        Self {
            diag: v[1..n - 1].iter().map(|vi| 2.0 * c + vi).collect(),
            off: -c,
        }
    }

    fn size(&self) -> usize {
        self.diag.len()
    }

    /// Number of eigenvalues strictly below `x`.
    fn count_below(&self, x: f64) -> usize {
        let b2 = self.off * self.off;
        let tiny = f64::MIN_POSITIVE.sqrt();
        let mut count = 0;
        let mut d = 1.0;
        for (i, &a) in self.diag.iter().enumerate() {
            d = if i == 0 { a - x } else { (a - x) - b2 / d };
            if d == 0.0 {
                d = -tiny;
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn gershgorin(&self) -> (f64, f64) {
        let r = 2.0 * self.off.abs();
        let lo = self.diag.iter().fold(f64::INFINITY, |m, &a| m.min(a)) - r;
        let hi = self.diag.iter().fold(f64::NEG_INFINITY, |m, &a| m.max(a)) + r;
        (lo, hi)
    }

    /// `j`-th eigenvalue (0-based) by bisection.
    fn eigenvalue(&self, j: usize) -> f64 {
        let (mut lo, mut hi) = self.gershgorin();
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > j {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Solve `(T - μ) y = rhs` by Gaussian elimination with partial pivoting.
    fn shifted_solve(&self, mu: f64, rhs: &[f64]) -> Vec<f64> {
        let n = self.size();
        let b = self.off;
        let eps = f64::EPSILON * (self.diag.iter().fold(0.0_f64, |m, a| m.max(a.abs())) + 2.0 * b.abs());
        // Rows hold (sub, diag, sup, sup2) after pivoting.
        let mut d: Vec<f64> = self.diag.iter().map(|a| a - mu).collect();
        let mut up = vec![b; n];
        let mut up2 = vec![0.0; n];
        let mut sub = vec![b; n];
        let mut y = rhs.to_vec();
        for i in 0..n.saturating_sub(1) {
            if sub[i + 1].abs() > d[i].abs() {
                // Swap rows i and i+1.
                let (d_i, up_i, up2_i, y_i) = (d[i], up[i], up2[i], y[i]);
                d[i] = sub[i + 1];
                up[i] = d[i + 1];
                up2[i] = if i + 1 < n - 1 { up[i + 1] } else { 0.0 };
                y[i] = y[i + 1];
                sub[i + 1] = d_i;
                d[i + 1] = up_i;
                up[i + 1] = up2_i;
                y[i + 1] = y_i;
            }
            if d[i] == 0.0 {
                d[i] = eps;
            }
            let m = sub[i + 1] / d[i];
            d[i + 1] -= m * up[i];
            if i + 1 < n - 1 {
                up[i + 1] -= m * up2[i];
            }
            y[i + 1] -= m * y[i];
        }
        if d[n - 1] == 0.0 {
            d[n - 1] = eps;
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = y[i];
            if i + 1 < n {
                s -= up[i] * x[i + 1];
            }
            if i + 2 < n {
                s -= up2[i] * x[i + 2];
            }
            x[i] = s / d[i];
        }
        x
    }

    /// Unit eigenvector for `mu`, orthogonalized against `previous`.
    fn eigenvector(&self, mu: f64, seed: usize, previous: &[Vec<f64>]) -> Vec<f64> {
        let n = self.size();
        let mut v: Vec<f64> = (0..n)
            .map(|i| 1.0 + 0.5 * ((0.754_877_666 * i as f64 + 0.569_840_29 * seed as f64).fract() - 0.5))
            .collect();
        normalize(&mut v);
        for _ in 0..4 {
            v = self.shifted_solve(mu, &v);
            for p in previous {
                let c = dot(&v, p);
                for (vi, pi) in v.iter_mut().zip(p) {
                    *vi -= c * pi;
                }
            }
            normalize(&mut v);
        }
        v
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) {
    let m = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if m > 0.0 {
        v.iter_mut().for_each(|x| *x /= m);
    }
    let s = dot(v, v).sqrt();
    if s > 0.0 {
        v.iter_mut().for_each(|x| *x /= s);
    }
}

fn lowest_levels(v_eff: &[f64], h: f64, k: usize) -> Vec<f64> {
    let t = Tridiagonal::schrodinger(v_eff, h);
    (0..k).map(|j| t.eigenvalue(j)).collect()
}

/// Lowest `k` eigenvalues of the fine matrix and their unit eigenvectors on
/// the full grid (zeros at the ends).
fn levels_and_vectors(v_eff: &[f64], h: f64, k: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let t = Tridiagonal::schrodinger(v_eff, h);
    let mut values = Vec::with_capacity(k);
    let mut vecs: Vec<Vec<f64>> = Vec::with_capacity(k);
    for j in 0..k {
        let mu = t.eigenvalue(j);
        let v = t.eigenvector(mu, j, &vecs);
        values.push(mu);
        vecs.push(v);
    }
    let full = vecs
        .into_iter()
        .map(|v| {
            let mut f = Vec::with_capacity(v.len() + 2);
            f.push(0.0);
            f.extend(v);
            f.push(0.0);
            f
        })
        .collect();
    (values, full)
}

/// Quadratic extrapolation to an end point from its three neighbours.
fn extrapolate(a: f64, b: f64, c: f64) -> f64 {
    3.0 * a - 3.0 * b + c
}

fn count_sign_changes(w: &[f64], floor: f64) -> usize {
    let mut last = 0.0_f64;
    let mut changes = 0;
    for &x in &w[1..w.len() - 1] {
        if x.abs() <= floor {
            continue;
        }
        if last != 0.0 && x.signum() != last.signum() {
            changes += 1;
        }
        last = x;
    }
    changes
}

/// Points outside the outermost samples with `|w| >= floor`.
fn tail_mask(w: &[f64], floor: f64) -> Vec<bool> {
    let first = w.iter().position(|x| x.abs() >= floor).unwrap_or(0);
    let last = w.iter().rposition(|x| x.abs() >= floor).unwrap_or(w.len() - 1);
    (0..w.len()).map(|i| i < first || i > last).collect()
}

fn capacity(grid: &Grid, richardson: bool) -> usize {
    if richardson {
        grid.coarsened().map_or(0, |c| c.n() - 2)
    } else {
        grid.n() - 2
    }
}

fn solve(weight: &Weight, v_tilde: &GridFunction, k: usize, opts: &SolveOptions) -> Result<SpectrumResult> {
    weight.g.ensure_same_grid(v_tilde)?;
    let grid = *weight.grid();
    if k == 0 {
        return Err(Error::CapacityExceeded {
            requested: 0,
            capacity: capacity(&grid, opts.richardson),
        });
    }
    if opts.richardson && grid.coarsened().is_none() {
        return Err(Error::InvalidGrid(format!(
            "Richardson extrapolation needs an odd number of points (n >= 5), got {}",
            grid.n()
        )));
    }
    let cap = capacity(&grid, opts.richardson);
    if k > cap {
        return Err(Error::CapacityExceeded { requested: k, capacity: cap });
    }
    if let Some(i) = v_tilde.values()[1..grid.n() - 1].iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "potential is not finite at x = {}",
            grid.x(i + 1)
        )));
    }

    let h = grid.h();
    let v_eff = weight.effective(v_tilde.values())?;
    let (raw, vecs) = levels_and_vectors(&v_eff, h, k);

    let (eigenvalues, error_estimates) = if opts.richardson {
        let cw = weight.coarsened().expect("checked odd n");
        let cv: Vec<f64> = v_tilde.values().iter().step_by(2).copied().collect();
        let coarse = lowest_levels(&cw.effective(&cv)?, cw.grid().h(), k);
        let ext = raw.iter().zip(&coarse).map(|(f, c)| (4.0 * f - c) / 3.0).collect();
        let est = raw.iter().zip(&coarse).map(|(f, c)| (f - c).abs() / 3.0).collect();
        (ext, est)
    } else {
        (raw.clone(), Vec::new())
    };

    let sqrt_g: Vec<f64> = weight.g.values().iter().map(|v| v.max(0.0).sqrt()).collect();
    let n = grid.n();
    let mut amplitudes = Vec::with_capacity(k);
    let mut functions = Vec::with_capacity(k);
    let mut sign_changes = Vec::with_capacity(k);
    let mut edge_ratios = Vec::with_capacity(k);
    for (level, mut w) in vecs.into_iter().enumerate() {
        // Unit norm under the trapezoid rule (ends are zero).
        let s = trapezoid(&w.iter().map(|x| x * x).collect::<Vec<_>>(), h).sqrt();
        w.iter_mut().for_each(|x| *x /= s);
        let peak = w.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        let first = w.iter().find(|x| x.abs() >= 1e-6 * peak).copied().unwrap_or(1.0);
        if first < 0.0 {
            w.iter_mut().for_each(|x| *x = -*x);
        }
        let left = w[1].abs() / peak;
        let right = w[n - 2].abs() / peak;
        if !opts.natural_walls.0 && left >= opts.leakage_tol {
            return Err(Error::BoundaryLeakage {
                level,
                side: "left",
                ratio: left,
            });
        }
        if !opts.natural_walls.1 && right >= opts.leakage_tol {
            return Err(Error::BoundaryLeakage {
                level,
                side: "right",
                ratio: right,
            });
        }
        edge_ratios.push((left, right));
        sign_changes.push(count_sign_changes(&w, 1e-10 * peak));

        let tails = tail_mask(&w, opts.tail_cutoff * peak);
        let mut psi: Vec<f64> = w.iter().zip(&sqrt_g).map(|(w, r)| if *r > 0.0 { w / r } else { 0.0 }).collect();
        if sqrt_g[0] == 0.0 {
            psi[0] = extrapolate(psi[1], psi[2], psi[3]);
        }
        if sqrt_g[n - 1] == 0.0 {
            psi[n - 1] = extrapolate(psi[n - 2], psi[n - 3], psi[n - 4]);
        }
        functions.push(
            GridFunction::new(grid, psi)
                .expect("grid length")
                .with_unresolved(Some(tails.clone())),
        );
        amplitudes.push(GridFunction::new(grid, w).expect("grid length").with_unresolved(Some(tails)));
    }

    Ok(SpectrumResult {
        eigenvalues,
        raw_eigenvalues: raw,
        error_estimates,
        eigenfunctions: opts.want_vectors.then_some(functions),
        amplitudes: opts.want_vectors.then_some(amplitudes),
        sign_changes,
        edge_ratios,
        meta: SolverMeta {
            grid,
            method: SolverMethod::TridiagonalFd,
            tolerance: f64::EPSILON,
            richardson: opts.richardson,
        },
    })
}

/// Lowest `k` levels of `-d² + V`.
pub fn solve_schrodinger(v: &GridFunction, k: usize, opts: &SolveOptions) -> Result<SpectrumResult> {
    solve(&Weight::unit(*v.grid()), v, k, opts)
}

/// Lowest `k` levels of `-(1/g) d g d + Ṽ`.
pub fn solve_weighted(weight: &Weight, v_tilde: &GridFunction, k: usize, opts: &SolveOptions) -> Result<SpectrumResult> {
    solve(weight, v_tilde, k, opts)
}

/// `F = ψ'/ψ`. Interior zeros of ψ are recorded as poles; an exact zero
/// sample yields `F = 0` there.
pub fn eigenfunction_logderivative(psi: &GridFunction) -> GridFunction {
    let grid = *psi.grid();
    let v = psi.values();
    let dv = match psi.slope() {
        Some(s) => s.to_vec(),
        None => centered_difference(v, grid.h()),
    };
    let f: Vec<f64> = v.iter().zip(&dv).map(|(p, d)| if *p == 0.0 { 0.0 } else { d / p }).collect();
    let mut poles = zero_crossings(&grid, v, None);
    poles.extend_from_slice(psi.poles());
    psi.derived(f, &[]).with_poles(poles)
}
