//! Isospectral deformation `W -> W + χ` through the Riccati constraint
//! `χ² ± 2Wχ + χ' + K = 0`, solved by linearizing with `χ = u'/u`:
//! `u'' ± 2W u' + K u = 0`.
//!
//! With `f = exp(-∫W)` the minus sign is the constraint on F from the
//! gen-next construction (`ḡ = f²`, so `ḡ'/ḡ = -2W`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::pipeline::ExtensionNode;
use crate::residual::{ResidualReport, ResidualScope};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Plus,
    /// The sign matching the gen-next constraint on F.
    #[default]
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Seed {
    pub x0: f64,
    pub u0: f64,
    pub du0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeformationProblem {
    pub w: GridFunction,
    pub k: f64,
    pub sign: Sign,
    pub seed: Seed,
}

impl DeformationProblem {
    pub fn new(w: GridFunction, k: f64, sign: Sign, seed: Seed) -> Result<Self> {
        if !w.grid().contains(seed.x0) {
            return Err(Error::InvalidParameter(format!(
                "seed x0 = {} lies outside [{}, {}]",
                seed.x0,
                w.grid().a(),
                w.grid().b()
            )));
        }
        if seed.u0 == 0.0 && seed.du0 == 0.0 {
            return Err(Error::InvalidParameter("seed (u0, du0) must not be (0, 0)".into()));
        }
        if !k.is_finite() || !seed.u0.is_finite() || !seed.du0.is_finite() {
            return Err(Error::InvalidParameter("non-finite deformation data".into()));
        }
        Ok(Self { w, k, sign, seed })
    }

    /// The constraint met by a node's F, moved to the node's own
    /// coordinate: `W(x) = α W₀(αx)` and `K → α² K`, where `W₀ = -½ ḡ'/ḡ`.
    pub fn for_node(node: &ExtensionNode, seed: Seed) -> Result<Self> {
        if node.alpha == 0.0 {
            return Err(Error::InvalidParameter("the root node carries no constraint".into()));
        }
        let grid = node.grid;
        let w = match &node.weight.log_slopes {
            Some((s1, _)) => GridFunction::new(grid, s1.iter().map(|s| -s).collect())?,
            None => {
                let g = node.weight.g.values();
                let d = crate::grid::centered_difference(g, grid.h());
                GridFunction::new(grid, d.iter().zip(g).map(|(d, g)| -0.5 * d / g).collect())?
            }
        };
        Self::new(w, node.alpha * node.alpha * node.k, Sign::Minus, seed)
    }

    fn w_at(&self, x: f64) -> f64 {
        self.w.interpolate(x)
    }

    /// `(u, u')' = (u', ∓2W u' - K u)`.
    fn rhs(&self, x: f64, u: f64, du: f64) -> (f64, f64) {
        (du, -2.0 * self.sign.value() * self.w_at(x) * du - self.k * u)
    }

    fn rk4(&self, x: f64, s: (f64, f64), h: f64) -> (f64, f64) {
        let k1 = self.rhs(x, s.0, s.1);
        let k2 = self.rhs(x + 0.5 * h, s.0 + 0.5 * h * k1.0, s.1 + 0.5 * h * k1.1);
        let k3 = self.rhs(x + 0.5 * h, s.0 + 0.5 * h * k2.0, s.1 + 0.5 * h * k2.1);
        let k4 = self.rhs(x + h, s.0 + h * k3.0, s.1 + h * k3.1);
        (
            s.0 + h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
            s.1 + h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
        )
    }
}

/// `χ² ± 2Wχ + χ' + K`, with χ' from χ's slope when attached.
pub fn chi_residual(chi: &GridFunction, problem: &DeformationProblem, scope: &ResidualScope) -> Result<ResidualReport> {
    chi.ensure_same_grid(&problem.w)?;
    let dchi = chi.derivative();
    let s = problem.sign.value();
    let r: Vec<f64> = (0..chi.len())
        .map(|i| {
            let c = chi.values()[i];
            c * c + 2.0 * s * problem.w.values()[i] * c + dchi[i] + problem.k
        })
        .collect();
    Ok(scope.report(chi.grid(), &r, &[chi, &problem.w]))
}

/// State normalized to unit size, with the dropped log-scale.
#[derive(Clone, Copy)]
struct Sample {
    u: f64,
    du: f64,
    log_scale: f64,
}

fn normalized(s: (f64, f64), log_scale: f64) -> Sample {
    let m = s.0.abs().max(s.1.abs());
    if m == 0.0 || !m.is_finite() {
        return Sample {
            u: s.0,
            du: s.1,
            log_scale,
        };
    }
    Sample {
        u: s.0 / m,
        du: s.1 / m,
        log_scale: log_scale + m.ln(),
    }
}

/// Integrates the linear equation across `grid` from the seed by classical
/// RK4 with `substeps` steps per grid spacing, and returns `χ = u'/u` with
/// the zeros of u as poles. W is interpolated when it lives on another grid.
pub fn solve_chi(problem: &DeformationProblem, grid: &Grid, substeps: usize) -> Result<GridFunction> {
    let substeps = substeps.max(1);
    let n = grid.n();
    let h = grid.h();
    let x0 = problem.seed.x0;
    if !grid.contains(x0) {
        return Err(Error::InvalidParameter(format!("seed x0 = {x0} lies outside the integration grid")));
    }
    let i0 = (((x0 - grid.a()) / h).round() as usize).min(n - 1);

    let advance = |from: f64, to: f64, s: Sample| -> Result<Sample> {
        let step = (to - from) / substeps as f64;
        let mut st = (s.u, s.du);
        for j in 0..substeps {
            st = problem.rk4(from + j as f64 * step, st, step);
        }
        if !st.0.is_finite() || !st.1.is_finite() {
            return Err(Error::IntegrationBlowUp { last_x: from });
        }
        Ok(normalized(st, s.log_scale))
    };

    let mut samples = vec![
        Sample {
            u: 0.0,
            du: 0.0,
            log_scale: 0.0
        };
        n
    ];
    let start = normalized((problem.seed.u0, problem.seed.du0), 0.0);
    samples[i0] = if grid.x(i0) == x0 {
        start
    } else {
        advance(x0, grid.x(i0), start)?
    };
    for i in i0 + 1..n {
        samples[i] = advance(grid.x(i - 1), grid.x(i), samples[i - 1])?;
    }
    for i in (0..i0).rev() {
        samples[i] = advance(grid.x(i + 1), grid.x(i), samples[i + 1])?;
    }

    let chi: Vec<f64> = samples
        .iter()
        .map(|s| if s.u == 0.0 { 0.0 } else { s.du / s.u })
        .collect();
    let mut poles = Vec::new();
    for i in 0..n {
        let s = samples[i];
        if s.u == 0.0 {
            poles.push(grid.x(i));
        } else if i + 1 < n {
            let t = samples[i + 1];
            if t.u != 0.0 && (s.u > 0.0) != (t.u > 0.0) {
                let ut = t.u * (t.log_scale - s.log_scale).exp();
                poles.push(grid.x(i) + s.u / (s.u - ut) * h);
            }
        }
    }
    Ok(GridFunction::new(*grid, chi)?.with_poles(poles))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteReport {
    pub difference: ResidualReport,
    /// Factor applied to `F(αx)`: `d/dx = α d/dξ`.
    pub scale: f64,
}

/// `χ(x)` against `α F(αx)` with F on its ξ grid. Points whose image lies
/// outside the ξ grid are excluded.
pub fn route_equivalence(chi: &GridFunction, f_xi: &GridFunction, alpha: f64, scope: &ResidualScope) -> Result<RouteReport> {
    if alpha == 0.0 || !alpha.is_finite() {
        return Err(Error::InvalidParameter(format!("route scale alpha = {alpha} must be finite and non-zero")));
    }
    let grid = *chi.grid();
    let xi = *f_xi.grid();
    let d: Vec<f64> = (0..grid.n())
        .map(|i| {
            let t = alpha * grid.x(i);
            if xi.contains(t) {
                chi.values()[i] - alpha * f_xi.interpolate(t)
            } else {
                0.0
            }
        })
        .collect();
    let mapped = GridFunction::constant(grid, 0.0).with_poles(f_xi.poles().iter().map(|p| p / alpha).collect());
    let mut scope = scope.clone();
    let (lo, hi) = {
        let (p, q) = (xi.a() / alpha, xi.b() / alpha);
        (p.min(q), p.max(q))
    };
    scope.window = Some(match scope.window {
        Some((a, b)) => (a.max(lo), b.min(hi)),
        None => (lo, hi),
    });
    Ok(RouteReport {
        difference: scope.report(&grid, &d, &[chi, &mapped]),
        scale: alpha,
    })
}

/// [`route_equivalence`] for a node, after checking that the problem
/// carries the node's constant in the node's coordinate.
pub fn route_equivalence_for_node(
    chi: &GridFunction,
    problem: &DeformationProblem,
    node: &ExtensionNode,
    scope: &ResidualScope,
) -> Result<RouteReport> {
    let expected = node.alpha * node.alpha * node.k;
    if (problem.k - expected).abs() > 1e-9 * expected.abs().max(1.0) {
        return Err(Error::ConstantMismatch(format!(
            "deformation K = {} but the node gives alpha^2 K = {expected}",
            problem.k
        )));
    }
    route_equivalence(chi, &node.f_xi, node.alpha, scope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{lookup_family, ParameterPoint};
    use crate::pipeline::{extend_branch, root_node, Branch, ExtensionConfig, PipelineSettings};
    use proptest::prelude::*;

    fn linear_w(grid: Grid) -> GridFunction {
        GridFunction::from_fn(grid, |x| x).with_slope_fn(|_| 1.0)
    }

    fn seed(x0: f64, u0: f64, du0: f64) -> Seed {
        Seed { x0, u0, du0 }
    }

    #[test]
    fn residual_examples() {
        let grid = Grid::new(0.5, 4.0, 701).unwrap();
        let scope = ResidualScope::default();
        let zero = GridFunction::constant(grid, 0.0).with_slope_fn(|_| 0.0);
        let p = DeformationProblem::new(linear_w(grid), -2.0, Sign::Plus, seed(1.0, 1.0, 1.0)).unwrap();
        assert_eq!(chi_residual(&zero, &p, &scope).unwrap().max_abs, 2.0);

        let chi = GridFunction::from_fn(grid, |x| 1.0 / x).with_slope_fn(|x| -1.0 / (x * x));
        assert!(chi_residual(&chi, &p, &scope).unwrap().max_abs < 1e-12);
        let p0 = DeformationProblem { k: 0.0, ..p };
        let r = chi_residual(&chi, &p0, &scope).unwrap();
        assert!((r.max_abs - 2.0).abs() < 1e-12 && (r.mean_abs - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_seed() {
        let grid = Grid::new(0.0, 1.0, 11).unwrap();
        assert!(DeformationProblem::new(linear_w(grid), 0.0, Sign::Plus, seed(2.0, 1.0, 0.0)).is_err());
        assert!(DeformationProblem::new(linear_w(grid), 0.0, Sign::Plus, seed(0.5, 0.0, 0.0)).is_err());
    }

    #[test]
    fn linear_solution_recovered() {
        let grid = Grid::new(0.5, 4.0, 701).unwrap();
        let p = DeformationProblem::new(linear_w(grid), -2.0, Sign::Plus, seed(1.0, 1.0, 1.0)).unwrap();
        let chi = solve_chi(&p, &grid, 1).unwrap();
        for i in 0..grid.n() {
            let x = grid.x(i);
            assert!((chi.values()[i] - 1.0 / x).abs() < 1e-10, "x={x}");
        }
        assert!(chi.poles().is_empty());
    }

    #[test]
    fn constant_solution_for_zero_k() {
        let grid = Grid::new(-2.0, 2.0, 401).unwrap();
        let w = GridFunction::from_fn(grid, |x| x.sin() + 0.3);
        let p = DeformationProblem::new(w, 0.0, Sign::Minus, seed(0.13, 2.0, 0.0)).unwrap();
        let chi = solve_chi(&p, &grid, 2).unwrap();
        assert_eq!(chi.max_abs(), 0.0);
    }

    #[test]
    fn generic_seed_self_check() {
        // χ stays smooth here, so the difference error of χ' is below 1e-7.
        let grid = Grid::new(1.0, 5.0, 4001).unwrap();
        let w = GridFunction::from_fn(grid, |x| 0.5 * x.cos());
        let p = DeformationProblem::new(w, -0.7, Sign::Plus, seed(1.0, 1.0, 0.25)).unwrap();
        let chi = solve_chi(&p, &grid, 1).unwrap();
        assert!(chi.poles().is_empty());
        let r = chi_residual(&chi, &p, &ResidualScope::default()).unwrap();
        assert!(r.max_abs <= 1e-6, "{}", r.max_abs);
    }

    #[test]
    fn blow_up_reports_position() {
        let grid = Grid::new(0.0, 1.0, 101).unwrap();
        let w = GridFunction::from_fn(grid, |x| if x > 0.5 { f64::NAN } else { 0.0 });
        let p = DeformationProblem::new(w, 1.0, Sign::Plus, seed(0.0, 1.0, 0.0)).unwrap();
        match solve_chi(&p, &grid, 1) {
            Err(Error::IntegrationBlowUp { last_x }) => assert!(last_x > 0.4 && last_x < 0.55, "{last_x}"),
            other => panic!("{other:?}"),
        }
    }

    fn ho_node() -> ExtensionNode {
        let cfg = ExtensionConfig {
            family: lookup_family("harmonic_oscillator").unwrap(),
            family_params: ParameterPoint::new(vec![1.0]).unwrap(),
            lambda: 2.0,
            alpha: 1.0,
            eigenindex: 1,
            branch: Branch::L1,
        };
        let s = PipelineSettings {
            observe_levels: 0,
            ..Default::default()
        };
        let grid = Grid::new(-8.0, 8.0, 2001).unwrap();
        let root = root_node(&cfg, &grid, &s).unwrap();
        extend_branch(&root, &cfg, Branch::L1, &s).unwrap()
    }

    #[test]
    fn route_matches_construction() {
        let node = ho_node();
        let p = DeformationProblem::for_node(&node, seed(1.0, 1.0, 1.0)).unwrap();
        assert_eq!(p.k, 2.0);
        let chi = solve_chi(&p, &node.grid, 4).unwrap();
        let scope = ResidualScope::default().with_window(-4.0, 4.0).with_pole_window(0.5 / node.grid.h());
        let r = route_equivalence_for_node(&chi, &p, &node, &scope).unwrap();
        assert_eq!(r.scale, 1.0);
        assert!(r.difference.max_abs <= 1e-4, "{:?}", r.difference);

        let wrong = DeformationProblem {
            sign: Sign::Plus,
            ..p.clone()
        };
        let chi = solve_chi(&wrong, &node.grid, 4).unwrap();
        let r = route_equivalence_for_node(&chi, &wrong, &node, &scope).unwrap();
        assert!(r.difference.max_abs > 0.1);

        let stale = DeformationProblem { k: 3.0, ..p };
        assert!(matches!(
            route_equivalence_for_node(&chi, &stale, &node, &scope),
            Err(Error::ConstantMismatch(_))
        ));
    }

    #[test]
    fn zero_routes_agree() {
        let grid = Grid::new(-3.0, 3.0, 301).unwrap();
        let z = GridFunction::constant(grid, 0.0);
        let p = DeformationProblem::new(linear_w(grid), 0.0, Sign::Minus, seed(0.0, 1.0, 0.0)).unwrap();
        let chi = solve_chi(&p, &grid, 1).unwrap();
        let r = route_equivalence(&chi, &z, 1.0, &ResidualScope::default()).unwrap();
        assert_eq!(r.difference.max_abs, 0.0);
    }

    fn count_in(p: &[f64], lo: f64, hi: f64) -> i64 {
        p.iter().filter(|&&x| x >= lo && x <= hi).count() as i64
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn sign_duality(c in -2.0f64..2.0, k in -3.0f64..3.0, a in -1.0f64..1.0) {
            let grid = Grid::new(-2.0, 2.0, 201).unwrap();
            let w = GridFunction::from_fn(grid, |x| c * x + a * x.sin());
            let chi = GridFunction::from_fn(grid, |x| (a * x).cos() + c);
            let p = DeformationProblem::new(w.clone(), k, Sign::Plus, seed(0.0, 1.0, 0.0)).unwrap();
            let q = DeformationProblem::new(w.map(|v| -v), k, Sign::Minus, seed(0.0, 1.0, 0.0)).unwrap();
            let scope = ResidualScope::default();
            prop_assert_eq!(chi_residual(&chi, &p, &scope).unwrap(), chi_residual(&chi, &q, &scope).unwrap());
        }

        #[test]
        fn riccati_equivalence(k in -4.0f64..4.0, du in -2.0f64..2.0, sgn in prop::bool::ANY) {
            let grid = Grid::new(-1.0, 1.0, 2001).unwrap();
            let w = GridFunction::from_fn(grid, |x| 0.5 * x);
            let sign = if sgn { Sign::Plus } else { Sign::Minus };
            let p = DeformationProblem::new(w, k, sign, seed(0.0, 1.0, du)).unwrap();
            let chi = solve_chi(&p, &grid, 1).unwrap();
            prop_assume!(chi.poles().is_empty());
            prop_assume!(chi.max_abs() < 5.0);
            let r = chi_residual(&chi, &p, &ResidualScope::default()).unwrap();
            prop_assert!(r.max_abs <= 1e-4, "{}", r.max_abs);
        }

        #[test]
        fn pole_sets_interlace(t1 in 0.0f64..3.1, t2 in 0.0f64..3.1, lo in -3.0f64..0.0, len in 0.5f64..3.0) {
            prop_assume!((t1 - t2).abs() > 0.05);
            let grid = Grid::new(-3.0, 3.0, 1201).unwrap();
            let w = GridFunction::from_fn(grid, |x| 0.3 * x);
            let mk = |t: f64| {
                let p = DeformationProblem::new(w.clone(), 12.0, Sign::Plus, seed(0.0, t.cos(), t.sin())).unwrap();
                solve_chi(&p, &grid, 2).unwrap()
            };
            let (a, b) = (mk(t1), mk(t2));
            let hi = (lo + len).min(3.0);
            let d = count_in(a.poles(), lo, hi) - count_in(b.poles(), lo, hi);
            prop_assert!(d.abs() <= 1, "{:?} {:?}", a.poles(), b.poles());
        }
    }
}
