//! Translationally shape-invariant base families.
//!
//! Every family supplies analytic `W`, `W'`, `ln f` with `f = exp(-∫W)`, the
//! parameter shift that maps `V_-` onto `V_+`, the level formula of
//! `H_+ = -d² + W² - W'`, and closed-form excited states in the ratio form
//! `ψ_k = φ_k / f` (a polynomial times an elementary factor).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::poly;

/// Default bound on `|ln g|` before a weight is rejected.
pub const DEFAULT_EXPONENT_BOUND: f64 = 700.0;

/// Ordered list of real parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParameterPoint(Vec<f64>);

impl ParameterPoint {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("parameter list is empty".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite parameter {v}")));
        }
        Ok(Self(values))
    }

    /// Parameters of a stage-`n` node, which must number `2^n`.
    pub fn for_stage(values: Vec<f64>, stage: usize) -> Result<Self> {
        let expected = 1usize << stage;
        if values.len() != expected {
            return Err(Error::InvalidParameter(format!(
                "stage {stage} needs {expected} parameters, got {}",
                values.len()
            )));
        }
        Self::new(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Parent parameters followed by each of them stepped by `-alpha`.
    pub fn doubled(&self, alpha: f64) -> Self {
        let mut v = self.0.clone();
        v.extend(self.0.iter().map(|p| p - alpha));
        Self(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    HarmonicOscillator,
    RadialOscillator,
    Coulomb,
    Morse,
    PoschlTeller,
}

/// Open interval of definition. `lo_singular` marks a finite left end where
/// the potential blows up.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub lo: f64,
    pub hi: f64,
    pub lo_singular: bool,
}

impl std::fmt::Display for Domain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let lo = if self.lo.is_infinite() { "-inf".to_string() } else { self.lo.to_string() };
        let hi = if self.hi.is_infinite() { "inf".to_string() } else { self.hi.to_string() };
        write!(f, "({lo}, {hi})")
    }
}

/// Catalog entry. All data is static; the struct is `Copy`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuperpotentialFamily {
    pub kind: FamilyKind,
    pub name: &'static str,
    pub domain: Domain,
    pub param_names: &'static [&'static str],
    pub default_params: &'static [f64],
    pub default_interval: (f64, f64),
    pub superpotential_text: &'static str,
    pub shift_text: &'static str,
    pub spectrum_text: &'static str,
}

const FULL_LINE: Domain = Domain {
    lo: f64::NEG_INFINITY,
    hi: f64::INFINITY,
    lo_singular: false,
};

const HALF_LINE: Domain = Domain {
    lo: 0.0,
    hi: f64::INFINITY,
    lo_singular: true,
};

pub const CATALOG: [SuperpotentialFamily; 5] = [
    SuperpotentialFamily {
        kind: FamilyKind::HarmonicOscillator,
        name: "harmonic_oscillator",
        domain: FULL_LINE,
        param_names: &["omega"],
        default_params: &[1.0],
        default_interval: (-8.0, 8.0),
        superpotential_text: "W = omega*x",
        shift_text: "omega -> omega",
        spectrum_text: "E_k = 2*omega*k",
    },
    SuperpotentialFamily {
        kind: FamilyKind::RadialOscillator,
        name: "radial_oscillator",
        domain: HALF_LINE,
        param_names: &["omega", "l"],
        default_params: &[1.0, 0.0],
        default_interval: (0.0, 8.0),
        superpotential_text: "W = omega*x - (l+1)/x",
        shift_text: "l -> l+1",
        spectrum_text: "E_k = 4*omega*k",
    },
    SuperpotentialFamily {
        kind: FamilyKind::Coulomb,
        name: "coulomb",
        domain: HALF_LINE,
        param_names: &["q", "l"],
        default_params: &[8.0, 0.0],
        default_interval: (0.0, 50.0),
        superpotential_text: "W = q/(2(l+1)) - (l+1)/x",
        shift_text: "l -> l+1",
        spectrum_text: "E_k = q^2/4 * (1/(l+1)^2 - 1/(l+1+k)^2)",
    },
    SuperpotentialFamily {
        kind: FamilyKind::Morse,
        name: "morse",
        domain: FULL_LINE,
        param_names: &["A", "B"],
        default_params: &[5.0, 1.0],
        default_interval: (-3.0, 25.0),
        superpotential_text: "W = A - B*exp(-x)",
        shift_text: "A -> A-1",
        spectrum_text: "E_k = A^2 - (A-k)^2, k < A",
    },
    SuperpotentialFamily {
        kind: FamilyKind::PoschlTeller,
        name: "poschl_teller",
        domain: FULL_LINE,
        param_names: &["A"],
        default_params: &[6.0],
        default_interval: (-20.0, 20.0),
        superpotential_text: "W = A*tanh(x)",
        shift_text: "A -> A-1",
        spectrum_text: "E_k = A^2 - (A-k)^2, k < A",
    },
];

pub fn family_names() -> Vec<String> {
    CATALOG.iter().map(|f| f.name.to_string()).collect()
}

pub fn lookup_family(name: &str) -> Result<SuperpotentialFamily> {
    CATALOG
        .iter()
        .find(|f| f.name == name)
        .copied()
        .ok_or_else(|| Error::UnknownFamily {
            name: name.to_string(),
            available: family_names(),
        })
}

/// `ln cosh x` without overflow.
fn ln_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// Closed-form excited state written as `ψ_k = φ_k / f`. The first three
/// fields are ψ, ψ', ψ'' divided by `exp(log_scale)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioSample {
    pub value: f64,
    pub slope: f64,
    pub curvature: f64,
    pub log_scale: f64,
}

impl SuperpotentialFamily {
    pub fn check_params(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.param_names.len() {
            return Err(Error::InvalidParameter(format!(
                "{} takes {} parameter(s) ({}), got {}",
                self.name,
                self.param_names.len(),
                self.param_names.join(", "),
                p.len()
            )));
        }
        if let Some(v) = p.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite parameter {v}")));
        }
        let bad = |msg: &str| Err(Error::InvalidParameter(format!("{}: {msg}", self.name)));
        match self.kind {
            FamilyKind::HarmonicOscillator if p[0] <= 0.0 => bad("omega must be positive"),
            FamilyKind::RadialOscillator if p[0] <= 0.0 => bad("omega must be positive"),
            FamilyKind::RadialOscillator | FamilyKind::Coulomb if p[1] <= -1.0 => bad("l must exceed -1"),
            FamilyKind::Coulomb if p[0] <= 0.0 => bad("q must be positive"),
            FamilyKind::Morse if p[0] <= 0.0 || p[1] <= 0.0 => bad("A and B must be positive"),
            FamilyKind::PoschlTeller if p[0] <= 0.0 => bad("A must be positive"),
            _ => Ok(()),
        }
    }

    pub fn w(&self, x: f64, p: &[f64]) -> f64 {
        match self.kind {
            FamilyKind::HarmonicOscillator => p[0] * x,
            FamilyKind::RadialOscillator => p[0] * x - (p[1] + 1.0) / x,
            FamilyKind::Coulomb => p[0] / (2.0 * (p[1] + 1.0)) - (p[1] + 1.0) / x,
            FamilyKind::Morse => p[0] - p[1] * (-x).exp(),
            FamilyKind::PoschlTeller => p[0] * x.tanh(),
        }
    }

    pub fn dw(&self, x: f64, p: &[f64]) -> f64 {
        match self.kind {
            FamilyKind::HarmonicOscillator => p[0],
            FamilyKind::RadialOscillator => p[0] + (p[1] + 1.0) / (x * x),
            FamilyKind::Coulomb => (p[1] + 1.0) / (x * x),
            FamilyKind::Morse => p[1] * (-x).exp(),
            FamilyKind::PoschlTeller => {
                let s = 1.0 / x.cosh();
                p[0] * s * s
            }
        }
    }

    /// `ln f` with the integration constant fixed so that the expression is
    /// elementary.
    pub fn log_f(&self, x: f64, p: &[f64]) -> f64 {
        match self.kind {
            FamilyKind::HarmonicOscillator => -0.5 * p[0] * x * x,
            FamilyKind::RadialOscillator => (p[1] + 1.0) * x.ln() - 0.5 * p[0] * x * x,
            FamilyKind::Coulomb => (p[1] + 1.0) * x.ln() - p[0] * x / (2.0 * (p[1] + 1.0)),
            FamilyKind::Morse => -p[0] * x - p[1] * (-x).exp(),
            FamilyKind::PoschlTeller => -p[0] * ln_cosh(x),
        }
    }

    pub fn v_plus(&self, x: f64, p: &[f64]) -> f64 {
        let w = self.w(x, p);
        w * w - self.dw(x, p)
    }

    pub fn v_minus(&self, x: f64, p: &[f64]) -> f64 {
        let w = self.w(x, p);
        w * w + self.dw(x, p)
    }

    /// Translational step `λ -> μ`.
    pub fn shift(&self, p: &[f64]) -> Vec<f64> {
        match self.kind {
            FamilyKind::HarmonicOscillator => p.to_vec(),
            FamilyKind::RadialOscillator | FamilyKind::Coulomb => vec![p[0], p[1] + 1.0],
            FamilyKind::Morse => vec![p[0] - 1.0, p[1]],
            FamilyKind::PoschlTeller => vec![p[0] - 1.0],
        }
    }

    /// Number of bound states of `H_+`, when finite.
    pub fn bound_count(&self, p: &[f64]) -> Option<usize> {
        match self.kind {
            FamilyKind::Morse | FamilyKind::PoschlTeller => Some(p[0].ceil().max(0.0) as usize),
            _ => None,
        }
    }

    /// `k`-th eigenvalue of `H_+`.
    pub fn level(&self, p: &[f64], k: usize) -> Option<f64> {
        if self.bound_count(p).is_some_and(|c| k >= c) {
            return None;
        }
        let kf = k as f64;
        Some(match self.kind {
            FamilyKind::HarmonicOscillator => 2.0 * p[0] * kf,
            FamilyKind::RadialOscillator => 4.0 * p[0] * kf,
            FamilyKind::Coulomb => {
                let n0 = p[1] + 1.0;
                let n = n0 + kf;
                0.25 * p[0] * p[0] * (1.0 / (n0 * n0) - 1.0 / (n * n))
            }
            FamilyKind::Morse | FamilyKind::PoschlTeller => p[0] * p[0] - (p[0] - kf) * (p[0] - kf),
        })
    }

    /// The `k`-th eigenfunction of `H_+` divided by `f`, at a single point.
    pub fn ratio(&self, p: &[f64], k: usize, x: f64) -> Option<RatioSample> {
        self.bound_count(p).is_none_or(|c| k < c).then(|| self.ratio_unchecked(p, k, x))
    }

    fn ratio_unchecked(&self, p: &[f64], k: usize, x: f64) -> RatioSample {
        let kf = k as f64;
        match self.kind {
            FamilyKind::HarmonicOscillator => {
                let s = p[0].sqrt();
                let (h, dh, d2h) = poly::hermite_triple(k, s * x);
                RatioSample {
                    value: h,
                    slope: s * dh,
                    curvature: p[0] * d2h,
                    log_scale: 0.0,
                }
            }
            FamilyKind::RadialOscillator => {
                let om = p[0];
                let y = om * x * x;
                let (l, dl, d2l) = poly::laguerre_triple(k, p[1] + 0.5, y);
                RatioSample {
                    value: l,
                    slope: 2.0 * om * x * dl,
                    curvature: 2.0 * om * dl + 4.0 * om * om * x * x * d2l,
                    log_scale: 0.0,
                }
            }
            FamilyKind::Coulomb => {
                let n0 = p[1] + 1.0;
                let k0 = p[0] / (2.0 * n0);
                let kap = p[0] / (2.0 * (n0 + kf));
                let c = k0 - kap;
                let (l, dl, d2l) = poly::laguerre_triple(k, 2.0 * p[1] + 1.0, 2.0 * kap * x);
                RatioSample {
                    value: l,
                    slope: c * l + 2.0 * kap * dl,
                    curvature: c * c * l + 4.0 * c * kap * dl + 4.0 * kap * kap * d2l,
                    log_scale: c * x,
                }
            }
            FamilyKind::Morse => {
                let y = 2.0 * p[1] * (-x).exp();
                let (l, dl, d2l) = poly::laguerre_triple(k, 2.0 * (p[0] - kf), y);
                RatioSample {
                    value: l,
                    slope: kf * l - y * dl,
                    curvature: kf * kf * l - (2.0 * kf - 1.0) * y * dl + y * y * d2l,
                    log_scale: kf * x,
                }
            }
            FamilyKind::PoschlTeller => {
                let a = p[0] - kf;
                let t = x.tanh();
                let s2 = 1.0 - t * t;
                let (pp, dp, d2p) = poly::jacobi_triple(k, a, a, t);
                let q = kf * t * pp + s2 * dp;
                let curvature =
                    kf * t * q + kf * s2 * pp + kf * t * s2 * dp - 2.0 * t * s2 * dp + s2 * s2 * d2p;
                RatioSample {
                    value: pp,
                    slope: q,
                    curvature,
                    log_scale: kf * ln_cosh(x),
                }
            }
        }
    }

    /// `k`-th eigenfunction of `H_+`, unnormalized.
    pub fn eigenfunction(&self, p: &[f64], k: usize, x: f64) -> Option<f64> {
        self.ratio(p, k, x)
            .map(|r| r.value * (r.log_scale + self.log_f(x, p)).exp())
    }

    pub fn check_grid(&self, grid: &Grid) -> Result<()> {
        let d = self.domain;
        let lo_ok = if d.lo_singular { grid.a() > d.lo } else { grid.a() >= d.lo };
        if !lo_ok || grid.b() > d.hi {
            return Err(Error::OutsideDomain {
                family: self.name.to_string(),
                domain: d.to_string(),
                a: grid.a(),
                b: grid.b(),
            });
        }
        Ok(())
    }

    /// Grid on `[a, b]`, with the left end lifted to `epsilon` on half-line
    /// families when it would touch the singular origin.
    pub fn clamped_grid(&self, a: f64, b: f64, n: usize, epsilon: Option<f64>) -> Result<Grid> {
        let a = if self.domain.lo_singular && a <= self.domain.lo {
            self.domain.lo + epsilon.unwrap_or(1e-3 * (b - a))
        } else {
            a
        };
        let grid = Grid::new(a, b, n)?;
        self.check_grid(&grid)?;
        Ok(grid)
    }

    /// Whether the finite left end of `grid` sits at a natural wall of the
    /// potential, where eigenfunctions need not be small.
    pub fn has_natural_wall(&self) -> bool {
        self.domain.lo_singular
    }
}

/// `W` with its analytic derivative attached.
pub fn sample_superpotential(family: &SuperpotentialFamily, p: &ParameterPoint, grid: &Grid) -> Result<GridFunction> {
    family.check_params(p.values())?;
    family.check_grid(grid)?;
    let v = p.values();
    Ok(GridFunction::from_fn(*grid, |x| family.w(x, v)).with_slope_fn(|x| family.dw(x, v)))
}

/// `f = exp(-∫W)` and `g = f²`, each with analytic slope. Rejects points
/// where `|ln g|` exceeds `exponent_bound`.
pub fn sample_weight(
    family: &SuperpotentialFamily,
    p: &ParameterPoint,
    grid: &Grid,
    exponent_bound: f64,
) -> Result<(GridFunction, GridFunction)> {
    family.check_params(p.values())?;
    family.check_grid(grid)?;
    let v = p.values();
    for i in 0..grid.n() {
        let x = grid.x(i);
        let e = 2.0 * family.log_f(x, v);
        if !e.is_finite() || e.abs() > exponent_bound {
            return Err(Error::WeightOverflow {
                x,
                exponent: e,
                bound: exponent_bound,
            });
        }
    }
    let f = GridFunction::from_fn(*grid, |x| family.log_f(x, v).exp())
        .with_slope_fn(|x| -family.w(x, v) * family.log_f(x, v).exp());
    let g = GridFunction::from_fn(*grid, |x| (2.0 * family.log_f(x, v)).exp())
        .with_slope_fn(|x| -2.0 * family.w(x, v) * (2.0 * family.log_f(x, v)).exp());
    Ok((f, g))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_grid(f: &SuperpotentialFamily, n: usize) -> Grid {
        f.clamped_grid(f.default_interval.0, f.default_interval.1, n, None).unwrap()
    }

    #[test]
    fn lookup_known_and_unknown() {
        let ho = lookup_family("harmonic_oscillator").unwrap();
        assert_eq!(ho.w(2.0, &[1.0]), 2.0);
        assert_eq!(ho.w(0.0, &[1.0]), 0.0);
        let rad = lookup_family("radial_oscillator").unwrap();
        assert_eq!(rad.w(1.0, &[1.0, 0.0]), 0.0);
        match lookup_family("bogus") {
            Err(Error::UnknownFamily { available, .. }) => assert_eq!(available.len(), 5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn weight_values() {
        let ho = lookup_family("harmonic_oscillator").unwrap();
        let g = Grid::new(-1.0, 1.0, 3).unwrap();
        let p = ParameterPoint::new(vec![1.0]).unwrap();
        let (f, gg) = sample_weight(&ho, &p, &g, DEFAULT_EXPONENT_BOUND).unwrap();
        assert_eq!(f.values()[1], 1.0);
        assert_eq!(gg.values()[1], 1.0);
        assert!((f.values()[2] - (-0.5f64).exp()).abs() < 1e-15);
        assert!((gg.values()[2] - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn weight_overflow_guard() {
        let ho = lookup_family("harmonic_oscillator").unwrap();
        let g = Grid::new(-30.0, 30.0, 11).unwrap();
        let p = ParameterPoint::new(vec![1.0]).unwrap();
        assert!(matches!(
            sample_weight(&ho, &p, &g, DEFAULT_EXPONENT_BOUND),
            Err(Error::WeightOverflow { .. })
        ));
    }

    #[test]
    fn half_line_rejects_origin() {
        let rad = lookup_family("radial_oscillator").unwrap();
        let p = ParameterPoint::new(vec![1.0, 0.0]).unwrap();
        let g = Grid::new(0.0, 8.0, 11).unwrap();
        assert!(matches!(
            sample_superpotential(&rad, &p, &g),
            Err(Error::OutsideDomain { .. })
        ));
        let c = rad.clamped_grid(0.0, 8.0, 11, None).unwrap();
        assert!((c.a() - 8e-3).abs() < 1e-15);
    }

    #[test]
    fn g_is_f_squared() {
        for fam in CATALOG {
            let grid = default_grid(&fam, 301);
            let p = ParameterPoint::new(fam.default_params.to_vec()).unwrap();
            let (f, g) = sample_weight(&fam, &p, &grid, DEFAULT_EXPONENT_BOUND).unwrap();
            for (fi, gi) in f.values().iter().zip(g.values()) {
                assert!(*fi > 0.0);
                assert!((gi - fi * fi).abs() <= 1e-14 * gi.max(1e-300));
            }
        }
    }

    #[test]
    fn dw_matches_difference() {
        for fam in CATALOG {
            let p = fam.default_params;
            let (a, b) = fam.default_interval;
            let a = a.max(0.5);
            let h = 1e-5;
            for i in 0..9 {
                let x = a + (b - a) * (i as f64 + 0.5) / 9.0;
                let fd = (fam.w(x + h, p) - fam.w(x - h, p)) / (2.0 * h);
                assert!((fd - fam.dw(x, p)).abs() < 1e-6 * (1.0 + fd.abs()), "{}", fam.name);
            }
        }
    }

    #[test]
    fn log_f_derivative_is_minus_w() {
        for fam in CATALOG {
            let p = fam.default_params;
            let h = 1e-5;
            for &x in &[0.3, 1.1, 2.7] {
                let fd = (fam.log_f(x + h, p) - fam.log_f(x - h, p)) / (2.0 * h);
                assert!((fd + fam.w(x, p)).abs() < 1e-6 * (1.0 + fd.abs()), "{}", fam.name);
            }
        }
    }

    #[test]
    fn base_shape_invariance_constant() {
        for fam in CATALOG {
            let p = fam.default_params;
            let mu = fam.shift(p);
            let d: Vec<f64> = [0.4, 1.3, 2.2, 3.9]
                .iter()
                .map(|&x| fam.v_minus(x, p) - fam.v_plus(x, &mu))
                .collect();
            for di in &d {
                assert!((di - d[0]).abs() < 1e-9 * (1.0 + d[0].abs()), "{}", fam.name);
            }
            // The constant is the first excited level, since H_- drops the ground state.
            assert!((d[0] - fam.level(p, 1).unwrap()).abs() < 1e-9 * (1.0 + d[0]), "{}", fam.name);
        }
    }

    #[test]
    fn levels_strictly_increase() {
        for fam in CATALOG {
            let p = fam.default_params;
            let lv: Vec<f64> = (0..8).map_while(|k| fam.level(p, k)).collect();
            assert!(lv.len() >= 4);
            assert_eq!(lv[0], 0.0);
            assert!(lv.windows(2).all(|w| w[1] > w[0]));
        }
    }

    /// Closed-form states satisfy `-φ'' + V_+ φ = E φ` at sample points,
    /// checked by second differences of φ itself.
    #[test]
    fn closed_forms_solve_h_plus() {
        for fam in CATALOG {
            let p = fam.default_params;
            let (a, b) = fam.default_interval;
            let a = a.max(0.3);
            let b = b.min(a + 4.0);
            let h = 1e-4;
            for k in 0..4 {
                let e = fam.level(p, k).unwrap();
                for i in 0..5 {
                    let x = a + (b - a) * (i as f64 + 0.5) / 5.0;
                    let phi = |x: f64| fam.eigenfunction(p, k, x).unwrap();
                    let d2 = (phi(x + h) - 2.0 * phi(x) + phi(x - h)) / (h * h);
                    let r = -d2 + (fam.v_plus(x, p) - e) * phi(x);
                    let scale = phi(x).abs() + d2.abs() + 1e-12;
                    assert!(r.abs() < 1e-4 * scale.max(1.0) * (1.0 + e), "{} k={k} x={x} r={r}", fam.name);
                }
            }
        }
    }

    /// Slope and curvature of the ratio form agree with differences of
    /// `exp(log_scale) * value`.
    #[test]
    fn ratio_derivatives_consistent() {
        for fam in CATALOG {
            let p = fam.default_params;
            let h = 1e-5;
            for k in 0..4 {
                for &x in &[0.4, 1.2, 2.5] {
                    let full = |x: f64| {
                        let r = fam.ratio(p, k, x).unwrap();
                        r.value * r.log_scale.exp()
                    };
                    let r = fam.ratio(p, k, x).unwrap();
                    let s = r.log_scale.exp();
                    let d1 = (full(x + h) - full(x - h)) / (2.0 * h);
                    let d2 = (full(x + h) - 2.0 * full(x) + full(x - h)) / (h * h);
                    assert!((d1 - r.slope * s).abs() < 1e-6 * (1.0 + d1.abs()), "{} k={k}", fam.name);
                    assert!((d2 - r.curvature * s).abs() < 1e-3 * (1.0 + d2.abs()), "{} k={k}", fam.name);
                }
            }
        }
    }

    #[test]
    fn parameter_point_doubling() {
        let p = ParameterPoint::new(vec![2.0]).unwrap();
        let c = p.doubled(1.0);
        assert_eq!(c.values(), &[2.0, 1.0]);
        assert!(ParameterPoint::for_stage(c.values().to_vec(), 1).is_ok());
        assert!(ParameterPoint::for_stage(c.values().to_vec(), 2).is_err());
        assert!(ParameterPoint::new(vec![]).is_err());
    }
}
