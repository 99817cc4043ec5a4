//! Partner potentials and the factorized / weighted second-order operators.
//!
//! Operators are applied in nested form, one centered difference per
//! derivative, so that each similarity identity compares two genuinely
//! different discrete expressions.

use crate::catalog::{sample_superpotential, sample_weight, ParameterPoint, SuperpotentialFamily};
use crate::error::{Error, Result};
use crate::grid::{centered_difference, Grid, GridFunction};
use crate::residual::{ResidualReport, ResidualScope};

/// `V_± = W² ∓ W'` together with `f` and `g = f²` for one parameter point.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorizationBundle {
    pub w: GridFunction,
    pub v_plus: GridFunction,
    pub v_minus: GridFunction,
    pub f: GridFunction,
    pub g: GridFunction,
    pub lambda: ParameterPoint,
}

pub fn partner_potentials(
    family: &SuperpotentialFamily,
    p: &ParameterPoint,
    grid: &Grid,
    exponent_bound: f64,
) -> Result<FactorizationBundle> {
    let w = sample_superpotential(family, p, grid)?;
    let (f, g) = sample_weight(family, p, grid, exponent_bound)?;
    let v = p.values();
    let v_plus = GridFunction::from_fn(*grid, |x| family.v_plus(x, v));
    let v_minus = GridFunction::from_fn(*grid, |x| family.v_minus(x, v));
    Ok(FactorizationBundle {
        w,
        v_plus,
        v_minus,
        f,
        g,
        lambda: p.clone(),
    })
}

fn check_positive(what: &'static str, w: &GridFunction) -> Result<()> {
    for (i, &v) in w.values().iter().enumerate() {
        if !(v > 0.0) {
            return Err(Error::NonPositive {
                what,
                x: w.grid().x(i),
                value: v,
            });
        }
    }
    Ok(())
}

fn d(u: &[f64], grid: &Grid) -> Vec<f64> {
    centered_difference(u, grid.h())
}

fn zip_map(a: &[f64], b: &[f64], op: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    a.iter().zip(b).map(|(&x, &y)| op(x, y)).collect()
}

fn wrap(like: &GridFunction, values: Vec<f64>) -> GridFunction {
    GridFunction::new(*like.grid(), values).expect("length preserved")
}

/// `-(1/f) D[f² D[u/f]]`.
pub fn apply_h_plus(f: &GridFunction, u: &GridFunction) -> Result<GridFunction> {
    f.ensure_same_grid(u)?;
    check_positive("f", f)?;
    let g = f.grid();
    let fv = f.values();
    let inner = d(&zip_map(u.values(), fv, |u, f| u / f), g);
    let outer = d(&zip_map(&inner, fv, |du, f| f * f * du), g);
    Ok(wrap(f, zip_map(&outer, fv, |o, f| -o / f)))
}

/// `-f D[(1/f²) D[f u]]`.
pub fn apply_h_minus(f: &GridFunction, u: &GridFunction) -> Result<GridFunction> {
    f.ensure_same_grid(u)?;
    check_positive("f", f)?;
    let g = f.grid();
    let fv = f.values();
    let inner = d(&zip_map(u.values(), fv, |u, f| f * u), g);
    let outer = d(&zip_map(&inner, fv, |du, f| du / (f * f)), g);
    Ok(wrap(f, zip_map(&outer, fv, |o, f| -f * o)))
}

/// `-(1/g) D[g D u]`.
pub fn apply_l1(g: &GridFunction, u: &GridFunction) -> Result<GridFunction> {
    g.ensure_same_grid(u)?;
    check_positive("g", g)?;
    let gr = g.grid();
    let gv = g.values();
    let inner = d(u.values(), gr);
    let outer = d(&zip_map(&inner, gv, |du, g| g * du), gr);
    Ok(wrap(g, zip_map(&outer, gv, |o, g| -o / g)))
}

/// `-g D[(1/g) D u]`.
pub fn apply_l2(g: &GridFunction, u: &GridFunction) -> Result<GridFunction> {
    g.ensure_same_grid(u)?;
    check_positive("g", g)?;
    let gr = g.grid();
    let gv = g.values();
    let inner = d(u.values(), gr);
    let outer = d(&zip_map(&inner, gv, |du, g| du / g), gr);
    Ok(wrap(g, zip_map(&outer, gv, |o, g| -g * o)))
}

/// `L = L1[g] + Ṽ`.
pub fn apply_l(g: &GridFunction, v_tilde: &GridFunction, u: &GridFunction) -> Result<GridFunction> {
    g.ensure_same_grid(v_tilde)?;
    let l1 = apply_l1(g, u)?;
    let vals = l1
        .values()
        .iter()
        .zip(v_tilde.values())
        .zip(u.values())
        .map(|((l, v), u)| l + v * u)
        .collect();
    Ok(wrap(g, vals))
}

/// Pointwise residuals of `L1 = f⁻¹ H_+ f` and `L2 = f H_- f⁻¹` with `g = f²`.
pub fn similarity_residuals(f: &GridFunction, u: &GridFunction) -> Result<(Vec<f64>, Vec<f64>)> {
    f.ensure_same_grid(u)?;
    let g = f.map(|v| v * v);
    let fu = wrap(f, zip_map(f.values(), u.values(), |f, u| f * u));
    let u_over_f = wrap(f, zip_map(u.values(), f.values(), |u, f| u / f));

    let l1 = apply_l1(&g, u)?;
    let hp = apply_h_plus(f, &fu)?;
    let r1 = zip_map(
        l1.values(),
        &zip_map(hp.values(), f.values(), |h, f| h / f),
        |a, b| a - b,
    );

    let l2 = apply_l2(&g, u)?;
    let hm = apply_h_minus(f, &u_over_f)?;
    let r2 = zip_map(
        l2.values(),
        &zip_map(hm.values(), f.values(), |h, f| h * f),
        |a, b| a - b,
    );
    Ok((r1, r2))
}

/// Worst of the two similarity residuals at each point.
pub fn similarity_residual(f: &GridFunction, u: &GridFunction, scope: &ResidualScope) -> Result<ResidualReport> {
    let (r1, r2) = similarity_residuals(f, u)?;
    let r = zip_map(&r1, &r2, |a, b| a.abs().max(b.abs()));
    Ok(scope.report(f.grid(), &r, &[]))
}

/// Standard three-point second difference; zero at the two ends.
pub fn second_difference(u: &[f64], h: f64) -> Vec<f64> {
    let n = u.len();
    let mut out = vec![0.0; n];
    for i in 1..n - 1 {
        out[i] = (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (h * h);
    }
    out
}

/// Nested `apply_h_plus` against the expanded form `-u'' + (W² - W')u`.
pub fn h_plus_consistency(bundle: &FactorizationBundle, u: &GridFunction, scope: &ResidualScope) -> Result<ResidualReport> {
    let nested = apply_h_plus(&bundle.f, u)?;
    let grid = u.grid();
    let d2 = second_difference(u.values(), grid.h());
    let r: Vec<f64> = (0..grid.n())
        .map(|i| nested.values()[i] - (-d2[i] + bundle.v_plus.values()[i] * u.values()[i]))
        .collect();
    Ok(scope.report(grid, &r, &[]))
}

/// Nested `apply_h_minus` against `-u'' + (W² + W')u`.
pub fn h_minus_consistency(bundle: &FactorizationBundle, u: &GridFunction, scope: &ResidualScope) -> Result<ResidualReport> {
    let nested = apply_h_minus(&bundle.f, u)?;
    let grid = u.grid();
    let d2 = second_difference(u.values(), grid.h());
    let r: Vec<f64> = (0..grid.n())
        .map(|i| nested.values()[i] - (-d2[i] + bundle.v_minus.values()[i] * u.values()[i]))
        .collect();
    Ok(scope.report(grid, &r, &[]))
}

/// Constancy of `V_-(x, λ) - V_+(x, μ)` for an explicit `μ`.
pub fn shape_invariance_with(
    family: &SuperpotentialFamily,
    lambda: &ParameterPoint,
    mu: &[f64],
    grid: &Grid,
    scope: &ResidualScope,
) -> Result<(ResidualReport, f64)> {
    family.check_params(lambda.values())?;
    family.check_params(mu)?;
    family.check_grid(grid)?;
    let l = lambda.values();
    let d: Vec<f64> = (0..grid.n())
        .map(|i| {
            let x = grid.x(i);
            family.v_minus(x, l) - family.v_plus(x, mu)
        })
        .collect();
    Ok(scope.constancy(grid, &d, &[]))
}

/// Base shape invariance with the catalog's own shift rule.
pub fn base_shape_invariance_residual(
    family: &SuperpotentialFamily,
    lambda: &ParameterPoint,
    grid: &Grid,
    scope: &ResidualScope,
) -> Result<(ResidualReport, f64)> {
    let mu = family.shift(lambda.values());
    shape_invariance_with(family, lambda, &mu, grid, scope)
}
