//! Gen-next extension of a shape-invariant base.
//!
//! A node carries a weight `g` and two potentials `Ṽ±` on its grid, defining
//! `L1[g] + Ṽ±`. Extending a node along a branch picks the operator with
//! `Ṽ₊` (branch L1) or `Ṽ₋` (branch L2), takes its ground state `ψ₀` and
//! the excited state `ψ_k`, and forms
//!
//! * `ψ̃ = ψ_k / ψ₀`, `K = E_k - E₀`, `ḡ = g ψ₀²`, so that
//!   `F̃ = ψ̃'/ψ̃` obeys `F̃² + (1/ḡ)(ḡ F̃)' + K = 0` in the coordinate ξ;
//! * the child coordinate `x = ξ/α` with `α = λ - μ`, where `F(x) = F̃(αx)`
//!   and `g(x) = ḡ(αx)`;
//! * `W = λF` and `Ṽ± = W² ± (1/g)(gW)'`.
//!
//! The root is the base pair: `g = 1`, `Ṽ₊ = V₊`, `Ṽ₋ = V₋`. From the root
//! the closed forms of the catalog are used unless a numeric build is asked
//! for; deeper stages are always numeric.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{isospectral_compare, MatchOptions, SpectralMatch};
use crate::catalog::{sample_weight, ParameterPoint, SuperpotentialFamily, DEFAULT_EXPONENT_BOUND};
use crate::error::{Error, Result};
use crate::grid::{centered_difference, Grid, GridFunction};
use crate::operators::{base_shape_invariance_residual, partner_potentials};
use crate::residual::{ResidualReport, ResidualScope};
use crate::spectral::{eigenfunction_logderivative, solve_schrodinger, solve_weighted, SolveOptions, Weight};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    L1,
    L2,
}

impl std::fmt::Display for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Branch::L1 => "L1",
            Branch::L2 => "L2",
        })
    }
}

/// How the stage-0 → 1 step is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathMode {
    /// Closed forms from the catalog where available.
    #[default]
    Auto,
    /// Eigen-solve every step.
    Numeric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Construction {
    Base,
    Analytic,
    Numeric,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtensionConfig {
    pub family: SuperpotentialFamily,
    pub family_params: ParameterPoint,
    pub lambda: f64,
    /// Parameter step `α = λ - μ`.
    pub alpha: f64,
    pub eigenindex: usize,
    pub branch: Branch,
}

impl ExtensionConfig {
    pub fn validate(&self) -> Result<()> {
        self.family.check_params(self.family_params.values())?;
        if !self.lambda.is_finite() {
            return Err(Error::InvalidParameter(format!("lambda must be finite, got {}", self.lambda)));
        }
        if !self.alpha.is_finite() || self.alpha == 0.0 {
            return Err(Error::InvalidParameter(format!(
                "alpha = {} gives mu = lambda; the parameter step must be non-zero (mu != lambda)",
                self.alpha
            )));
        }
        Ok(())
    }

    pub fn mu(&self) -> f64 {
        self.lambda - self.alpha
    }

    pub fn with_branch(&self, branch: Branch) -> Self {
        Self {
            branch,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineSettings {
    pub path: PathMode,
    pub solve: SolveOptions,
    pub scope: ResidualScope,
    pub exponent_bound: f64,
    /// Levels compared in the per-node isospectrality observation; 0 skips it.
    pub observe_levels: usize,
    pub spectral_tol: f64,
}

impl Default for PipelineSettings {
    fn default() -> Self {
        Self {
            path: PathMode::Auto,
            solve: SolveOptions::default(),
            scope: ResidualScope::default(),
            exponent_bound: DEFAULT_EXPONENT_BOUND,
            observe_levels: 4,
            spectral_tol: 1e-2,
        }
    }
}

/// Spectra of `L1[g] + Ṽ₊` and `L1[g] + Ṽ₋` on one node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsospectralObservation {
    pub plus: Vec<f64>,
    pub minus: Vec<f64>,
    /// Which side lost a level, if any: "plus", "minus" or "none".
    pub dropped: String,
    pub matched: usize,
    pub max_gap: f64,
    pub shift: f64,
    pub holds: bool,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtensionNode {
    pub stage: usize,
    pub branches: Vec<Branch>,
    pub construction: Construction,
    pub params: ParameterPoint,
    pub lambda: f64,
    pub mu: f64,
    pub alpha: f64,
    pub eigenindex: usize,
    pub k: f64,
    /// Coordinate ξ of the seed problem (the parent's grid).
    pub xi_grid: Grid,
    /// ψ̃ up to a positive factor; its zeros are the poles of F.
    pub psi_xi: GridFunction,
    pub f_xi: GridFunction,
    pub g_bar: Weight,
    pub grid: Grid,
    pub f: GridFunction,
    pub weight: Weight,
    pub v_tilde_plus: GridFunction,
    pub v_tilde_minus: GridFunction,
    pub constraint: ResidualReport,
    pub shape_invariance: ResidualReport,
    pub si_constant: f64,
    pub isospectral: Option<IsospectralObservation>,
    pub natural_walls: (bool, bool),
    pub parent: Option<usize>,
}

impl ExtensionNode {
    pub fn path_label(&self) -> String {
        if self.branches.is_empty() {
            "root".to_string()
        } else {
            self.branches.iter().map(|b| b.to_string()).collect::<Vec<_>>().join("/")
        }
    }

    pub fn poles(&self) -> &[f64] {
        self.f.poles()
    }
}

/// `(1/g)(g u)'`: analytic when both carry slopes, else `(1/g) D(g u)`.
pub fn weighted_divergence(g: &GridFunction, u: &GridFunction) -> Result<Vec<f64>> {
    g.ensure_same_grid(u)?;
    let (gv, uv) = (g.values(), u.values());
    if let (Some(gs), Some(us)) = (g.slope(), u.slope()) {
        return Ok((0..gv.len()).map(|i| us[i] + gs[i] / gv[i] * uv[i]).collect());
    }
    let gu: Vec<f64> = gv.iter().zip(uv).map(|(g, u)| g * u).collect();
    let d = centered_difference(&gu, g.grid().h());
    Ok(d.iter().zip(gv).map(|(d, g)| d / g).collect())
}

/// The eigenindex-th state of `H₊` (branch L1) or `H₋` (branch L2) on the
/// ξ grid, with `K` its gap to the ground level of the same operator.
pub fn build_phi(config: &ExtensionConfig, grid_xi: &Grid, settings: &PipelineSettings) -> Result<(GridFunction, f64)> {
    config.validate()?;
    let fam = &config.family;
    let p = config.family_params.values();
    let seed_params = match config.branch {
        Branch::L1 => p.to_vec(),
        Branch::L2 => fam.shift(p),
    };
    fam.check_params(&seed_params)?;
    fam.check_grid(grid_xi)?;
    let k = config.eigenindex;
    if let Some(c) = fam.bound_count(&seed_params) {
        if k >= c {
            return Err(Error::EigenindexOutOfRange { index: k, available: c });
        }
    }

    match settings.path {
        PathMode::Auto => {
            let mut values = Vec::with_capacity(grid_xi.n());
            let mut slopes = Vec::with_capacity(grid_xi.n());
            for i in 0..grid_xi.n() {
                let x = grid_xi.x(i);
                let r = fam.ratio(&seed_params, k, x).expect("index checked");
                let scale = (r.log_scale + fam.log_f(x, &seed_params)).exp();
                values.push(r.value * scale);
                slopes.push((r.slope - fam.w(x, &seed_params) * r.value) * scale);
            }
            let norm = crate::grid::trapezoid(&values.iter().map(|v| v * v).collect::<Vec<_>>(), grid_xi.h()).sqrt();
            let peak = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            let first = values.iter().find(|v| v.abs() >= 1e-6 * peak).copied().unwrap_or(1.0);
            let c = first.signum() / norm;
            let phi = GridFunction::new(*grid_xi, values.iter().map(|v| v * c).collect())?
                .with_slope(slopes.iter().map(|v| v * c).collect())?;
            let big_k = fam.level(&seed_params, k).expect("index checked");
            Ok((phi, big_k))
        }
        PathMode::Numeric => {
            let v = match config.branch {
                Branch::L1 => GridFunction::from_fn(*grid_xi, |x| fam.v_plus(x, p)),
                Branch::L2 => GridFunction::from_fn(*grid_xi, |x| fam.v_minus(x, p)),
            };
            let opts = SolveOptions {
                natural_walls: (fam.has_natural_wall(), false),
                ..settings.solve
            };
            let spec = solve_schrodinger(&v, k + 1, &opts)?;
            let phi = spec.eigenfunctions.expect("vectors requested")[k].clone();
            Ok((phi, spec.raw_eigenvalues[k] - spec.raw_eigenvalues[0]))
        }
    }
}

/// `ψ = φ/f` and `F = ψ'/ψ` with interior zeros of ψ as poles.
pub fn build_f(phi: &GridFunction, f: &GridFunction) -> Result<GridFunction> {
    phi.ensure_same_grid(f)?;
    let psi_vals: Vec<f64> = phi.values().iter().zip(f.values()).map(|(p, f)| p / f).collect();
    let mut psi = phi.derived(psi_vals, &[f]);
    if let (Some(ps), Some(fs)) = (phi.slope(), f.slope()) {
        // ψ' = (φ' f - φ f') / f²
        let slope = (0..phi.len())
            .map(|i| {
                let (p, fv) = (phi.values()[i], f.values()[i]);
                (ps[i] * fv - p * fs[i]) / (fv * fv)
            })
            .collect();
        psi = psi.with_slope(slope)?;
    }
    Ok(eigenfunction_logderivative(&psi))
}

/// `F² + (1/ḡ)(ḡ F)' + K` away from poles.
pub fn constraint_residual_f(f: &GridFunction, g_bar: &GridFunction, k: f64, scope: &ResidualScope) -> Result<ResidualReport> {
    let div = weighted_divergence(g_bar, f)?;
    let r: Vec<f64> = f.values().iter().zip(&div).map(|(f, d)| f * f + d + k).collect();
    Ok(scope.report(f.grid(), &r, &[f, g_bar]))
}

/// `W = λF`, `Ṽ± = W² ± (1/g)(gW)'`.
pub fn nextgen_partners(f: &GridFunction, g: &GridFunction, lambda: f64) -> Result<(GridFunction, GridFunction)> {
    let mut w = f.map(|v| lambda * v);
    if let Some(s) = f.slope() {
        w = w.with_slope(s.iter().map(|v| lambda * v).collect())?;
    }
    let div = weighted_divergence(g, &w)?;
    let plus = w.values().iter().zip(&div).map(|(w, d)| w * w + d).collect();
    let minus = w.values().iter().zip(&div).map(|(w, d)| w * w - d).collect();
    Ok((f.derived(plus, &[g]), f.derived(minus, &[g])))
}

/// Constancy of `[λ²F² + (1/g)(gλF)'] - [μ²F² - (1/g)(gμF)']` without
/// checking the pair against the step used to build F.
pub fn gennext_si_constancy(
    f: &GridFunction,
    g: &GridFunction,
    lambda: f64,
    mu: f64,
    scope: &ResidualScope,
) -> Result<(ResidualReport, f64)> {
    let div = weighted_divergence(g, f)?;
    let d: Vec<f64> = f
        .values()
        .iter()
        .zip(&div)
        .map(|(f, dv)| (lambda * lambda * f * f + lambda * dv) - (mu * mu * f * f - mu * dv))
        .collect();
    Ok(scope.constancy(f.grid(), &d, &[f, g]))
}

/// As [`gennext_si_constancy`], but rejects a `(λ, μ)` pair whose step
/// differs from the `α` that F was built with.
pub fn gennext_si_residual(
    f: &GridFunction,
    g: &GridFunction,
    lambda: f64,
    mu: f64,
    built_alpha: f64,
    scope: &ResidualScope,
) -> Result<(ResidualReport, f64)> {
    let requested = lambda - mu;
    if (requested - built_alpha).abs() > 1e-12 * built_alpha.abs().max(1.0) {
        return Err(Error::AlphaMismatch {
            built: built_alpha,
            requested,
        });
    }
    gennext_si_constancy(f, g, lambda, mu, scope)
}

/// `(Ω')² + (1/g)(gΩ')' + E - V` for `ψ = exp Ω` solving `(L1[g] + V)ψ = Eψ`.
pub fn qhj_residual(
    omega_prime: &GridFunction,
    g: &GridFunction,
    e: f64,
    potential: Option<&GridFunction>,
    scope: &ResidualScope,
) -> Result<ResidualReport> {
    let div = weighted_divergence(g, omega_prime)?;
    if let Some(v) = potential {
        omega_prime.ensure_same_grid(v)?;
    }
    let r: Vec<f64> = (0..omega_prime.len())
        .map(|i| {
            let w = omega_prime.values()[i];
            let v = potential.map_or(0.0, |p| p.values()[i]);
            w * w + div[i] + e - v
        })
        .collect();
    Ok(scope.report(omega_prime.grid(), &r, &[omega_prime, g]))
}

/// Samples on `x = ξ/α`. Negative `α` reverses the order; derivatives
/// pick up `α` per order.
fn rescale(fun: &GridFunction, alpha: f64, slope_scale: Option<f64>) -> GridFunction {
    let grid = fun.grid().rescaled(alpha);
    let flip = |v: &[f64]| -> Vec<f64> {
        if alpha > 0.0 {
            v.to_vec()
        } else {
            v.iter().rev().copied().collect()
        }
    };
    let mut out = GridFunction::new(grid, flip(fun.values())).expect("same length");
    if let (Some(s), Some(c)) = (fun.slope(), slope_scale) {
        out = out
            .with_slope(flip(s).into_iter().map(|v| v * c).collect())
            .expect("same length");
    }
    let poles = fun.poles().iter().map(|p| p / alpha).collect();
    let mask = fun.unresolved().map(|m| {
        if alpha > 0.0 {
            m.to_vec()
        } else {
            m.iter().rev().copied().collect()
        }
    });
    out.with_poles(poles).with_unresolved(mask)
}

fn rescale_weight(w: &Weight, alpha: f64) -> Weight {
    let g = rescale(&w.g, alpha, Some(alpha));
    let flip = |v: &[f64], c: f64| -> Vec<f64> {
        let it = v.iter().map(|x| x * c);
        if alpha > 0.0 {
            it.collect()
        } else {
            it.rev().collect()
        }
    };
    Weight {
        g,
        log_slopes: w
            .log_slopes
            .as_ref()
            .map(|(s1, s2)| (flip(s1, alpha), flip(s2, alpha * alpha))),
    }
}

/// Seed data of one extension step in the coordinate ξ.
struct Seed {
    psi: GridFunction,
    f: GridFunction,
    g_bar: Weight,
    k: f64,
    construction: Construction,
}

fn analytic_seed(parent: &ExtensionNode, config: &ExtensionConfig, branch: Branch, settings: &PipelineSettings) -> Result<Seed> {
    let fam = &config.family;
    let p = config.family_params.values();
    let sp = match branch {
        Branch::L1 => p.to_vec(),
        Branch::L2 => fam.shift(p),
    };
    fam.check_params(&sp)?;
    let k = config.eigenindex;
    if let Some(c) = fam.bound_count(&sp) {
        if k >= c {
            return Err(Error::EigenindexOutOfRange { index: k, available: c });
        }
    }
    let grid = parent.grid;
    let n = grid.n();
    let (mut value, mut f, mut fp) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for i in 0..n {
        let r = fam.ratio(&sp, k, grid.x(i)).expect("index checked");
        let (fv, dfv) = if r.value == 0.0 {
            (0.0, 0.0)
        } else {
            let fv = r.slope / r.value;
            (fv, r.curvature / r.value - fv * fv)
        };
        value.push(r.value * r.log_scale.exp());
        f.push(fv);
        fp.push(dfv);
    }
    let psi = GridFunction::new(grid, value)?;
    let poles = crate::grid::zero_crossings(&grid, psi.values(), None);
    let psi = psi.with_poles(poles.clone());
    let f = GridFunction::new(grid, f)?.with_slope(fp)?.with_poles(poles);
    let sp_point = ParameterPoint::new(sp.clone())?;
    let (_, g) = sample_weight(fam, &sp_point, &grid, settings.exponent_bound)?;
    let s1 = (0..n).map(|i| -fam.w(grid.x(i), &sp)).collect();
    let s2 = (0..n).map(|i| -fam.dw(grid.x(i), &sp)).collect();
    Ok(Seed {
        psi,
        f,
        g_bar: Weight::analytic(g, s1, s2)?,
        k: fam.level(&sp, k).expect("index checked"),
        construction: Construction::Analytic,
    })
}

fn numeric_seed(parent: &ExtensionNode, config: &ExtensionConfig, branch: Branch, settings: &PipelineSettings) -> Result<Seed> {
    let v = match branch {
        Branch::L1 => &parent.v_tilde_plus,
        Branch::L2 => &parent.v_tilde_minus,
    };
    let k = config.eigenindex;
    let opts = SolveOptions {
        richardson: false,
        want_vectors: true,
        natural_walls: parent.natural_walls,
        ..settings.solve
    };
    let spec = solve_weighted(&parent.weight, v, k + 1, &opts)?;
    let amps = spec.amplitudes.expect("vectors requested");
    let (w0, wk) = (&amps[0], &amps[k]);
    let grid = parent.grid;
    let n = grid.n();
    let mut ratio: Vec<f64> = (0..n)
        .map(|i| if w0.values()[i] != 0.0 { wk.values()[i] / w0.values()[i] } else { 0.0 })
        .collect();
    // Dirichlet ends: continue the ratio from the interior.
    ratio[0] = 3.0 * ratio[1] - 3.0 * ratio[2] + ratio[3];
    ratio[n - 1] = 3.0 * ratio[n - 2] - 3.0 * ratio[n - 3] + ratio[n - 4];
    let psi = GridFunction::new(grid, ratio)?.with_unresolved(w0.unresolved().map(|m| m.to_vec()));
    let f = eigenfunction_logderivative(&psi);
    // Sign changes of the ratio where ψ₀ is negligible are noise.
    let poles: Vec<f64> = f
        .poles()
        .iter()
        .copied()
        .filter(|&p| !psi.is_unresolved((((p - grid.a()) / grid.h()).round() as usize).min(n - 1)))
        .collect();
    let f = f.with_poles(poles.clone());
    let psi = psi.with_poles(poles);
    let g_bar = GridFunction::new(grid, w0.values().iter().map(|w| w * w).collect())?
        .with_unresolved(w0.unresolved().map(|m| m.to_vec()));
    Ok(Seed {
        psi,
        f,
        g_bar: Weight::numeric(g_bar),
        k: spec.raw_eigenvalues[k] - spec.raw_eigenvalues[0],
        construction: Construction::Numeric,
    })
}

/// Stage-0 node: the base partner pair on `grid`.
pub fn root_node(config: &ExtensionConfig, grid: &Grid, settings: &PipelineSettings) -> Result<ExtensionNode> {
    config.validate()?;
    let fam = &config.family;
    let bundle = partner_potentials(fam, &config.family_params, grid, settings.exponent_bound)?;
    let (si, c) = base_shape_invariance_residual(fam, &config.family_params, grid, &settings.scope)?;
    let zero = GridFunction::constant(*grid, 0.0).with_slope_fn(|_| 0.0);
    let unit = Weight::unit(*grid);
    let constraint = constraint_residual_f(&zero, &unit.g.clone().with_slope_fn(|_| 0.0), 0.0, &settings.scope)?;
    Ok(ExtensionNode {
        stage: 0,
        branches: Vec::new(),
        construction: Construction::Base,
        params: ParameterPoint::for_stage(vec![config.lambda], 0)?,
        lambda: config.lambda,
        mu: config.lambda,
        alpha: 0.0,
        eigenindex: config.eigenindex,
        k: 0.0,
        xi_grid: *grid,
        psi_xi: GridFunction::constant(*grid, 1.0),
        f_xi: zero.clone(),
        g_bar: unit.clone(),
        grid: *grid,
        f: zero,
        weight: unit,
        v_tilde_plus: bundle.v_plus,
        v_tilde_minus: bundle.v_minus,
        constraint,
        shape_invariance: si,
        si_constant: c,
        isospectral: None,
        natural_walls: (fam.has_natural_wall(), false),
        parent: None,
    })
}

/// Spectra of `L1[g] + Ṽ±` compared up to one level and a constant shift.
pub fn observe_isospectrality(
    weight: &Weight,
    plus: &GridFunction,
    minus: &GridFunction,
    levels: usize,
    natural_walls: (bool, bool),
    settings: &PipelineSettings,
) -> IsospectralObservation {
    let opts = SolveOptions {
        want_vectors: false,
        natural_walls,
        richardson: settings.solve.richardson && weight.grid().coarsened().is_some(),
        ..settings.solve
    };
    let sp = solve_weighted(weight, plus, levels + 1, &opts);
    let sm = solve_weighted(weight, minus, levels + 1, &opts);
    let (sp, sm) = match (sp, sm) {
        (Ok(a), Ok(b)) => (a, b),
        (a, b) => {
            let note = [a.err(), b.err()]
                .into_iter()
                .flatten()
                .map(|e| e.to_string())
                .collect::<Vec<_>>()
                .join("; ");
            return IsospectralObservation {
                plus: Vec::new(),
                minus: Vec::new(),
                dropped: "none".into(),
                matched: 0,
                max_gap: f64::INFINITY,
                shift: 0.0,
                holds: false,
                note: Some(note),
            };
        }
    };
    let tol = settings.spectral_tol;
    let candidates = [
        ("none", isospectral_compare(&sp.eigenvalues, &sm.eigenvalues, &MatchOptions::shifted(false, tol))),
        ("plus", isospectral_compare(&sp.eigenvalues, &sm.eigenvalues, &MatchOptions::shifted(true, tol))),
        ("minus", isospectral_compare(&sm.eigenvalues, &sp.eigenvalues, &MatchOptions::shifted(true, tol))),
    ];
    let score = |m: &SpectralMatch| (m.pairs.len(), -m.pairs.iter().map(|p| p.2).sum::<f64>());
    let (dropped, best) = candidates
        .into_iter()
        .max_by(|a, b| {
            let (sa, sb) = (score(&a.1), score(&b.1));
            sa.0.cmp(&sb.0).then(sa.1.total_cmp(&sb.1))
        })
        .expect("three candidates");
    let matched = best.pairs.len();
    let max_gap = best.pairs.iter().map(|p| p.2).fold(0.0, f64::max);
    IsospectralObservation {
        plus: sp.eigenvalues,
        minus: sm.eigenvalues,
        dropped: dropped.to_string(),
        matched,
        max_gap,
        shift: best.shift,
        holds: matched >= levels,
        note: None,
    }
}

/// Child of `parent` along `branch`.
pub fn extend_branch(
    parent: &ExtensionNode,
    config: &ExtensionConfig,
    branch: Branch,
    settings: &PipelineSettings,
) -> Result<ExtensionNode> {
    config.validate()?;
    let seed = if parent.stage == 0 && settings.path == PathMode::Auto {
        analytic_seed(parent, config, branch, settings)?
    } else {
        numeric_seed(parent, config, branch, settings)?
    };
    let alpha = config.alpha;
    let lambda = config.lambda;
    let mu = config.mu();

    let constraint = constraint_residual_f(&seed.f, &seed.g_bar.g, seed.k, &settings.scope)?;

    let f_x = rescale(&seed.f, alpha, Some(alpha));
    let weight = rescale_weight(&seed.g_bar, alpha);
    let (v_plus, v_minus) = nextgen_partners(&f_x, &weight.g, lambda)?;
    let (si, si_constant) = gennext_si_residual(&f_x, &weight.g, lambda, mu, alpha, &settings.scope)?;
    let natural_walls = if alpha > 0.0 {
        parent.natural_walls
    } else {
        (parent.natural_walls.1, parent.natural_walls.0)
    };
    let isospectral = (settings.observe_levels > 0).then(|| {
        observe_isospectrality(&weight, &v_plus, &v_minus, settings.observe_levels, natural_walls, settings)
    });
    let mut branches = parent.branches.clone();
    branches.push(branch);
    Ok(ExtensionNode {
        stage: parent.stage + 1,
        branches,
        construction: seed.construction,
        params: parent.params.doubled(alpha),
        lambda,
        mu,
        alpha,
        eigenindex: config.eigenindex,
        k: seed.k,
        xi_grid: parent.grid,
        psi_xi: seed.psi,
        f_xi: seed.f,
        g_bar: seed.g_bar,
        grid: *f_x.grid(),
        f: f_x,
        weight,
        v_tilde_plus: v_plus,
        v_tilde_minus: v_minus,
        constraint,
        shape_invariance: si,
        si_constant,
        isospectral,
        natural_walls,
        parent: None,
    })
}

/// Both children of a node; a failing branch reports its own error.
pub fn extend_stage(
    node: &ExtensionNode,
    config: &ExtensionConfig,
    settings: &PipelineSettings,
) -> (Result<ExtensionNode>, Result<ExtensionNode>) {
    rayon::join(
        || extend_branch(node, config, Branch::L1, settings),
        || extend_branch(node, config, Branch::L2, settings),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchFailure {
    pub path: String,
    pub error: Error,
}

/// Append-only tree of nodes; children refer to parents by index.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtensionTree {
    pub nodes: Vec<ExtensionNode>,
    pub failures: Vec<BranchFailure>,
}

impl ExtensionTree {
    pub fn grow(config: &ExtensionConfig, grid: &Grid, stages: usize, settings: &PipelineSettings) -> Result<Self> {
        let root = root_node(config, grid, settings)?;
        let mut tree = Self {
            nodes: vec![root],
            failures: Vec::new(),
        };
        let mut frontier = vec![0usize];
        for _ in 0..stages {
            let results: Vec<(usize, Result<ExtensionNode>, Result<ExtensionNode>)> = frontier
                .par_iter()
                .map(|&i| {
                    let (a, b) = extend_stage(&tree.nodes[i], config, settings);
                    (i, a, b)
                })
                .collect();
            let mut next = Vec::new();
            for (parent, a, b) in results {
                for (branch, r) in [(Branch::L1, a), (Branch::L2, b)] {
                    match r {
                        Ok(mut node) => {
                            node.parent = Some(parent);
                            next.push(tree.nodes.len());
                            tree.nodes.push(node);
                        }
                        Err(error) => {
                            let mut path = tree.nodes[parent].branches.clone();
                            path.push(branch);
                            tree.failures.push(BranchFailure {
                                path: path.iter().map(|b| b.to_string()).collect::<Vec<_>>().join("/"),
                                error,
                            });
                        }
                    }
                }
            }
            frontier = next;
        }
        Ok(tree)
    }

    pub fn max_stage(&self) -> usize {
        self.nodes.iter().map(|n| n.stage).max().unwrap_or(0)
    }

    /// Nodes of the deepest stage reached.
    pub fn leaves(&self) -> Vec<&ExtensionNode> {
        let s = self.max_stage();
        self.nodes.iter().filter(|n| n.stage == s).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::lookup_family;

    fn ho_config(k: usize, lambda: f64, alpha: f64) -> ExtensionConfig {
        ExtensionConfig {
            family: lookup_family("harmonic_oscillator").unwrap(),
            family_params: ParameterPoint::new(vec![1.0]).unwrap(),
            lambda,
            alpha,
            eigenindex: k,
            branch: Branch::L1,
        }
    }

    fn ho_grid() -> Grid {
        Grid::new(-8.0, 8.0, 2001).unwrap()
    }

    fn numeric() -> PipelineSettings {
        PipelineSettings {
            path: PathMode::Numeric,
            ..Default::default()
        }
    }

    #[test]
    fn build_phi_oscillator_states() {
        let grid = ho_grid();
        let (phi0, k0) = build_phi(&ho_config(0, 2.0, 1.0), &grid, &PipelineSettings::default()).unwrap();
        assert_eq!(k0, 0.0);
        let c = phi0.values()[1000];
        for i in (0..2001).step_by(50) {
            let x = grid.x(i);
            assert!((phi0.values()[i] - c * (-0.5 * x * x).exp()).abs() < 1e-12);
        }
        let (phi1, k1) = build_phi(&ho_config(1, 2.0, 1.0), &grid, &PipelineSettings::default()).unwrap();
        assert_eq!(k1, 2.0);
        let c = phi1.values()[1250] / (2.0 * (-2.0f64).exp());
        for i in (0..2001).step_by(50) {
            let x = grid.x(i);
            assert!((phi1.values()[i] - c * x * (-0.5 * x * x).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn numeric_phi_overlaps_closed_form() {
        let grid = ho_grid();
        for k in 0..=3 {
            let (a, ka) = build_phi(&ho_config(k, 2.0, 1.0), &grid, &PipelineSettings::default()).unwrap();
            let (b, kb) = build_phi(&ho_config(k, 2.0, 1.0), &grid, &numeric()).unwrap();
            let prod: Vec<f64> = a.values().iter().zip(b.values()).map(|(x, y)| x * y).collect();
            let ov = crate::grid::trapezoid(&prod, grid.h());
            assert!(ov >= 1.0 - 1e-6, "k={k} overlap {ov}");
            assert!((ka - kb).abs() < 1e-3, "k={k}: {ka} vs {kb}");
        }
    }

    #[test]
    fn build_f_examples() {
        let grid = ho_grid();
        let f = GridFunction::from_fn(grid, |x| (-0.5 * x * x).exp()).with_slope_fn(|x| -x * (-0.5 * x * x).exp());
        let phi0 = f.map(|v| 3.0 * v);
        let f0 = build_f(&phi0, &f).unwrap();
        assert!(f0.max_abs() <= 1e-12);
        assert!(f0.poles().is_empty());

        let (phi1, _) = build_phi(&ho_config(1, 2.0, 1.0), &grid, &PipelineSettings::default()).unwrap();
        let f1 = build_f(&phi1, &f).unwrap();
        assert_eq!(f1.poles(), &[0.0]);
        for i in (0..2001).filter(|&i| grid.x(i).abs() > 0.01) {
            let x = grid.x(i);
            assert!((f1.values()[i] - 1.0 / x).abs() < 1e-10 * (1.0 + 1.0 / x.abs()), "x={x}");
        }

        let (phin, _) = build_phi(&ho_config(1, 2.0, 1.0), &grid, &numeric()).unwrap();
        let fnum = build_f(&phin, &f.clone().without_slope()).unwrap();
        for i in (0..2001).filter(|&i| (0.5..=4.0).contains(&grid.x(i).abs())) {
            let x = grid.x(i);
            assert!((fnum.values()[i] - 1.0 / x).abs() < 1e-4, "x={x}: {}", fnum.values()[i]);
        }
    }

    #[test]
    fn constraint_residual_examples() {
        let grid = ho_grid();
        let zero = GridFunction::constant(grid, 0.0);
        let g = GridFunction::from_fn(grid, |x| (-x * x).exp());
        let rep = constraint_residual_f(&zero, &g, 2.5, &ResidualScope::default()).unwrap();
        assert_eq!(rep.max_abs, 2.5);
        assert_eq!(rep.mean_abs, 2.5);

        let f = GridFunction::from_fn(grid, |x| if x == 0.0 { 0.0 } else { 1.0 / x })
            .with_slope_fn(|x| if x == 0.0 { 0.0 } else { -1.0 / (x * x) })
            .with_poles(vec![0.0]);
        let g = g.with_slope_fn(|x| -2.0 * x * (-x * x).exp());
        let rep = constraint_residual_f(&f, &g, 2.0, &ResidualScope::default()).unwrap();
        assert!(rep.max_abs <= 1e-8, "{}", rep.max_abs);
    }

    #[test]
    fn partners_vanish_for_zero_superpotential() {
        let grid = ho_grid();
        let g = GridFunction::from_fn(grid, |x| (-x * x).exp());
        let zero = GridFunction::constant(grid, 0.0);
        let (p, m) = nextgen_partners(&zero, &g, 3.0).unwrap();
        assert!(p.values().iter().chain(m.values()).all(|v| *v == 0.0));
        let f = GridFunction::from_fn(grid, |x| x.sin());
        let (p, m) = nextgen_partners(&f, &g, 0.0).unwrap();
        assert!(p.values().iter().chain(m.values()).all(|v| *v == 0.0));
    }

    #[test]
    fn half_line_partners_match_closed_form() {
        // k = 1 on x >= 0.5 with α = 1: F = 1/x, g = exp(-x²), so
        // (1/g)(g λ/x)' = λ(-1/x² - 2).
        let grid = Grid::new(0.5, 6.0, 1101).unwrap();
        let s = PipelineSettings {
            observe_levels: 0,
            ..Default::default()
        };
        let cfg = ho_config(1, 1.5, 1.0);
        let root = root_node(&cfg, &grid, &s).unwrap();
        let child = extend_branch(&root, &cfg, Branch::L1, &s).unwrap();
        assert!(child.poles().is_empty());
        let lambda = 1.5;
        for i in 0..1101 {
            let x = grid.x(i);
            let div = lambda * (-1.0 / (x * x) - 2.0);
            let w2 = lambda * lambda / (x * x);
            assert!((child.v_tilde_plus.values()[i] - (w2 + div)).abs() < 1e-4);
            assert!((child.v_tilde_minus.values()[i] - (w2 - div)).abs() < 1e-4);
        }
    }

    #[test]
    fn qhj_examples() {
        let grid = ho_grid();
        let one = GridFunction::constant(grid, 1.0).with_slope_fn(|_| 0.0);
        let omega = GridFunction::from_fn(grid, |x| -x).with_slope_fn(|_| -1.0);
        let v = GridFunction::from_fn(grid, |x| x * x - 1.0);
        let rep = qhj_residual(&omega, &one, 0.0, Some(&v), &ResidualScope::default()).unwrap();
        assert!(rep.max_abs <= 1e-8);
        let zero = GridFunction::constant(grid, 0.0);
        let g = GridFunction::from_fn(grid, |x| (-x * x).exp());
        assert_eq!(qhj_residual(&zero, &g, 0.0, None, &ResidualScope::default()).unwrap().max_abs, 0.0);
    }

    #[test]
    fn qhj_numeric_second_excited_state() {
        let grid = Grid::new(-8.0, 8.0, 4001).unwrap();
        let v = GridFunction::from_fn(grid, |x| x * x);
        let spec = solve_schrodinger(&v, 3, &SolveOptions::default()).unwrap();
        let psi = &spec.eigenfunctions.as_ref().unwrap()[2];
        let omega = eigenfunction_logderivative(psi);
        assert_eq!(omega.poles().len(), 2);
        let one = GridFunction::constant(grid, 1.0);
        let scope = ResidualScope::default().with_pole_window(0.5 / grid.h()).with_window(-4.0, 4.0);
        let rep = qhj_residual(&omega, &one, spec.raw_eigenvalues[2], Some(&v), &scope).unwrap();
        assert!(rep.max_abs <= 1e-3, "{}", rep.max_abs);
    }

    #[test]
    fn analytic_chain_oscillator() {
        let grid = ho_grid();
        let s = PipelineSettings::default();
        let cfg = ho_config(1, 2.0, 1.0);
        let root = root_node(&cfg, &grid, &s).unwrap();
        assert!((root.si_constant - 2.0).abs() < 1e-12);
        let child = extend_branch(&root, &cfg, Branch::L1, &s).unwrap();
        assert_eq!(child.construction, Construction::Analytic);
        assert_eq!(child.k, 2.0);
        assert!(child.constraint.max_abs <= 1e-8, "{}", child.constraint.max_abs);
        assert!(child.shape_invariance.max_abs <= 1e-6, "{}", child.shape_invariance.max_abs);
        // d = -(λ + μ) α K.
        assert!((child.si_constant + (2.0 + 1.0) * 1.0 * 2.0).abs() < 1e-6);
        assert_eq!(child.params.values(), &[2.0, 1.0]);
        assert_eq!(child.poles(), &[0.0]);
    }

    #[test]
    fn numeric_chain_oscillator() {
        // Near a pole the difference error of (ḡF)' is about h²/ξ⁴, so the
        // 0.5 window needs h below ~0.006.
        let grid = Grid::new(-8.0, 8.0, 4001).unwrap();
        let s = numeric();
        let cfg = ho_config(1, 2.0, 1.0);
        let root = root_node(&cfg, &grid, &s).unwrap();
        let child = extend_branch(&root, &cfg, Branch::L1, &s).unwrap();
        assert_eq!(child.construction, Construction::Numeric);
        assert!((child.k - 2.0).abs() < 1e-3, "{}", child.k);
        let scope = ResidualScope::default().with_pole_window(0.5 / grid.h());
        let rep = constraint_residual_f(&child.f_xi, &child.g_bar.g, child.k, &scope).unwrap();
        assert!(rep.max_abs <= 1e-3, "{rep:?}");
    }

    #[test]
    fn rescaling_matches_direct_evaluation() {
        let grid = ho_grid();
        let s = PipelineSettings::default();
        for alpha in [0.5, -0.75, 2.0] {
            let cfg = ho_config(2, 1.0, alpha);
            let root = root_node(&cfg, &grid, &s).unwrap();
            let child = extend_branch(&root, &cfg, Branch::L1, &s).unwrap();
            // F̃ for k = 2 is H₂'/H₂ = 8ξ / (4ξ² - 2).
            let direct = |x: f64| {
                let xi = alpha * x;
                8.0 * xi / (4.0 * xi * xi - 2.0)
            };
            for i in (0..2001).step_by(37) {
                let x = child.grid.x(i);
                if child.poles().iter().any(|p| (x - p).abs() < 0.2) {
                    continue;
                }
                assert!((child.f.values()[i] - direct(x)).abs() < 1e-10 * (1.0 + direct(x).abs()));
            }
            // Off-grid: cubic interpolation on ξ against the closed form.
            for j in 0..40 {
                let x = child.grid.a() + (j as f64 + 0.37) * child.grid.len() / 40.0;
                if child.poles().iter().any(|p| (alpha * (x - p)).abs() < 0.5) {
                    continue;
                }
                let interp = child.f_xi.interpolate(alpha * x);
                assert!((interp - direct(x)).abs() < 1e-6, "alpha={alpha} x={x}");
            }
        }
    }

    #[test]
    fn si_guard_rejects_stale_step() {
        let grid = ho_grid();
        let s = PipelineSettings::default();
        let cfg = ho_config(1, 2.0, 1.0);
        let root = root_node(&cfg, &grid, &s).unwrap();
        let child = extend_branch(&root, &cfg, Branch::L1, &s).unwrap();
        let shifted = gennext_si_residual(&child.f, &child.weight.g, 2.5, 1.5, 1.0, &s.scope).unwrap();
        assert!(shifted.0.max_abs <= 1e-6);
        assert!(matches!(
            gennext_si_residual(&child.f, &child.weight.g, 2.0, 0.0, 1.0, &s.scope),
            Err(Error::AlphaMismatch { .. })
        ));
        let (bad, _) = gennext_si_constancy(&child.f, &child.weight.g, 2.0, 0.0, &s.scope).unwrap();
        assert!(bad.max_abs > 1e-2);
        let zero = GridFunction::constant(grid, 0.0);
        let (z, c) = gennext_si_constancy(&zero, &root.weight.g, 2.0, 1.0, &s.scope).unwrap();
        assert_eq!((z.max_abs, c), (0.0, 0.0));
    }

    #[test]
    fn ground_state_choice_is_inert() {
        let grid = ho_grid();
        let s = PipelineSettings {
            observe_levels: 0,
            ..Default::default()
        };
        let tree = ExtensionTree::grow(&ho_config(0, 2.0, 1.0), &grid, 2, &s).unwrap();
        assert!(tree.failures.is_empty());
        assert_eq!(tree.leaves().len(), 4);
        for node in tree.nodes.iter().skip(1) {
            assert!(node.f.max_abs() <= 1e-6);
            assert!(node.v_tilde_plus.max_abs() <= 1e-5);
            assert!(node.v_tilde_minus.max_abs() <= 1e-5);
        }
    }

    #[test]
    fn alpha_zero_rejected() {
        let cfg = ho_config(1, 2.0, 0.0);
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("mu != lambda"));
    }
}
