//! Run configuration: a TOML document with flat keys and one level of
//! sections for `[grid]`, `[solver]` and `[tolerances]`.

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sigen_core::catalog::{lookup_family, SuperpotentialFamily};
use sigen_core::deformation::Sign;
use sigen_core::grid::Grid;
use sigen_core::pipeline::{Branch, PathMode};

pub const MAX_STAGES: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Catalog,
    Factorize,
    Spectrum,
    Extend,
    Deform,
    Verify,
    Scan,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Command::Catalog => "catalog",
            Command::Factorize => "factorize",
            Command::Spectrum => "spectrum",
            Command::Extend => "extend",
            Command::Deform => "deform",
            Command::Verify => "verify",
            Command::Scan => "scan",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default = "GridConfig::default_n")]
    pub n: usize,
    /// Offset of the first point from a singular origin.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

impl GridConfig {
    fn default_n() -> usize {
        2001
    }
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            a: None,
            b: None,
            n: Self::default_n(),
            epsilon: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub k_levels: usize,
    pub richardson: bool,
    pub tail_cutoff: f64,
    pub leakage: f64,
    /// RK4 steps per grid spacing in `deform`.
    pub substeps: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            k_levels: 5,
            richardson: true,
            tail_cutoff: 1e-4,
            leakage: 1e-6,
            substeps: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToleranceConfig {
    pub residual: f64,
    pub spectral: f64,
    pub route: f64,
    /// Boundary points dropped from every residual.
    pub margin: usize,
    /// Half-width of the exclusion around each pole, in grid steps.
    pub pole_window: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self {
            residual: 1e-6,
            spectral: 1e-4,
            route: 1e-4,
            margin: 2,
            pole_window: 5.0,
        }
    }
}

fn default_lambda() -> f64 {
    2.0
}

fn default_alpha() -> f64 {
    1.0
}

fn default_one() -> usize {
    1
}

fn default_seed() -> [f64; 3] {
    [1.0, 1.0, 1.0]
}

fn default_branch() -> Branch {
    Branch::L1
}

fn default_output() -> PathBuf {
    PathBuf::from("sigen-out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    pub family: String,
    /// Family parameters; the catalog defaults when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<Vec<f64>>,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// Parameter step; `mu = lambda - alpha`.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_one")]
    pub eigenindex: usize,
    #[serde(default = "default_one")]
    pub stages: usize,
    #[serde(default)]
    pub path: PathMode,
    /// Node used by `deform`.
    #[serde(default = "default_branch")]
    pub branch: Branch,
    /// `[x0, u0, du0]` for `deform`.
    #[serde(default = "default_seed")]
    pub seed: [f64; 3],
    #[serde(default)]
    pub sign: Sign,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub route_window: Option<[f64; 2]>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub tolerances: ToleranceConfig,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConfigError {
    Syntax { line: Option<usize>, message: String },
    Invalid(Vec<String>),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Syntax { line: Some(l), message } => write!(f, "syntax error at line {l}: {message}"),
            ConfigError::Syntax { line: None, message } => write!(f, "syntax error: {message}"),
            ConfigError::Invalid(errs) => {
                writeln!(f, "{} validation error(s):", errs.len())?;
                for e in errs {
                    writeln!(f, "  - {e}")?;
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for ConfigError {}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Parses and validates, reporting every semantic problem at once.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let config: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Syntax {
        line: e.span().map(|s| line_of(text, s.start)),
        message: e.message().trim().to_string(),
    })?;
    let errors = config.validate();
    if errors.is_empty() {
        Ok(config)
    } else {
        Err(ConfigError::Invalid(errors))
    }
}

impl RunConfig {
    pub fn minimal(family: &str) -> Self {
        toml::from_str(&format!("family = {family:?}")).expect("minimal document")
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn family(&self) -> Option<SuperpotentialFamily> {
        lookup_family(&self.family).ok()
    }

    pub fn family_params(&self) -> Option<Vec<f64>> {
        let fam = self.family()?;
        Some(self.params.clone().unwrap_or_else(|| fam.default_params.to_vec()))
    }

    /// The grid after defaults and clamping at a singular origin.
    pub fn grid(&self) -> Result<Grid, String> {
        let fam = self.family().ok_or_else(|| format!("unknown family {:?}", self.family))?;
        let a = self.grid.a.unwrap_or(fam.default_interval.0);
        let b = self.grid.b.unwrap_or(fam.default_interval.1);
        if self.grid.n < 3 {
            return Err(format!("grid.n must be >= 3, got {}", self.grid.n));
        }
        fam.clamped_grid(a, b, self.grid.n, self.grid.epsilon).map_err(|e| e.to_string())
    }

    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let fam = match lookup_family(&self.family) {
            Ok(f) => Some(f),
            Err(e) => {
                errs.push(e.to_string());
                None
            }
        };
        if self.grid.n < 3 {
            errs.push(format!("grid.n must be >= 3, got {}", self.grid.n));
        }
        if let (Some(a), Some(b)) = (self.grid.a, self.grid.b) {
            if !(a.is_finite() && b.is_finite() && b > a) {
                errs.push(format!("grid.b must exceed grid.a and both be finite (a = {a}, b = {b})"));
            }
        }
        if let Some(e) = self.grid.epsilon {
            if !(e > 0.0 && e.is_finite()) {
                errs.push(format!("grid.epsilon must be positive, got {e}"));
            }
        }
        if let Some(fam) = &fam {
            if let Some(p) = self.family_params() {
                if let Err(e) = fam.check_params(&p) {
                    errs.push(e.to_string());
                }
                if let Some(c) = fam.bound_count(&p) {
                    if self.eigenindex >= c {
                        errs.push(format!(
                            "eigenindex {} exceeds the {} bound state(s) of {}",
                            self.eigenindex, c, fam.name
                        ));
                    }
                }
            }
            if self.grid.n >= 3 && errs.is_empty() {
                if let Err(e) = self.grid() {
                    errs.push(e);
                }
            }
        }
        if !self.lambda.is_finite() {
            errs.push(format!("lambda must be finite, got {}", self.lambda));
        }
        if !self.alpha.is_finite() || self.alpha == 0.0 {
            errs.push(format!(
                "alpha = {} gives mu = lambda; the parameter step must be non-zero (mu != lambda)",
                self.alpha
            ));
        }
        if self.stages > MAX_STAGES {
            errs.push(format!("stages must be at most {MAX_STAGES}, got {}", self.stages));
        }
        if self.solver.k_levels == 0 {
            errs.push("solver.k_levels must be at least 1".into());
        }
        if self.solver.richardson && self.grid.n % 2 == 0 {
            errs.push(format!("solver.richardson needs an odd grid.n, got {}", self.grid.n));
        }
        if self.solver.substeps == 0 {
            errs.push("solver.substeps must be at least 1".into());
        }
        for (name, v) in [
            ("solver.tail_cutoff", self.solver.tail_cutoff),
            ("solver.leakage", self.solver.leakage),
            ("tolerances.residual", self.tolerances.residual),
            ("tolerances.spectral", self.tolerances.spectral),
            ("tolerances.route", self.tolerances.route),
        ] {
            if !(v > 0.0) || v.is_nan() {
                errs.push(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.tolerances.pole_window >= 0.0) {
            errs.push(format!("tolerances.pole_window must be non-negative, got {}", self.tolerances.pole_window));
        }
        if self.seed[1] == 0.0 && self.seed[2] == 0.0 {
            errs.push("seed must not have u0 = du0 = 0".into());
        }
        if self.seed.iter().any(|v| !v.is_finite()) {
            errs.push("seed values must be finite".into());
        }
        if let Some([lo, hi]) = self.route_window {
            if !(hi > lo) {
                errs.push(format!("route_window must be increasing, got [{lo}, {hi}]"));
            }
        }
        errs
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_document_fills_defaults() {
        let c = parse_config("family = \"harmonic_oscillator\"\n").unwrap();
        assert_eq!(c.eigenindex, 1);
        assert!(c.solver.richardson);
        assert_eq!(c.tolerances.margin, 2);
        assert_eq!(c.tolerances.pole_window, 5.0);
        assert_eq!(c.grid().unwrap(), Grid::new(-8.0, 8.0, 2001).unwrap());
        assert_eq!(c, RunConfig::minimal("harmonic_oscillator"));
    }

    #[test]
    fn small_grid_rejected() {
        let err = parse_config("family = \"harmonic_oscillator\"\n[grid]\nn = 2\n").unwrap_err();
        let ConfigError::Invalid(errs) = err else { panic!() };
        assert!(errs.iter().any(|e| e.contains("grid.n must be >= 3")));
    }

    #[test]
    fn zero_alpha_cites_mu() {
        let err = parse_config("family = \"harmonic_oscillator\"\nalpha = 0.0\n").unwrap_err();
        assert!(err.to_string().contains("mu != lambda"));
    }

    #[test]
    fn errors_are_aggregated() {
        let text = "family = \"harmonic_oscillator\"\nalpha = 0.0\n[grid]\nn = 2\n[tolerances]\nresidual = -1.0\n";
        let ConfigError::Invalid(errs) = parse_config(text).unwrap_err() else { panic!() };
        assert!(errs.len() >= 3, "{errs:?}");
    }

    #[test]
    fn syntax_errors_have_lines() {
        let err = parse_config("family = \"harmonic_oscillator\"\nlambda = = 2\n").unwrap_err();
        assert!(matches!(err, ConfigError::Syntax { line: Some(2), .. }), "{err:?}");
        let err = parse_config("family = \"harmonic_oscillator\"\n\nbogus = 1\n").unwrap_err();
        assert!(matches!(err, ConfigError::Syntax { line: Some(3), .. }), "{err:?}");
    }

    #[test]
    fn unknown_family_lists_choices() {
        let err = parse_config("family = \"square_well\"\n").unwrap_err();
        assert!(err.to_string().contains("harmonic_oscillator"));
    }

    #[test]
    fn half_line_origin_is_clamped() {
        let c = parse_config("family = \"radial_oscillator\"\n[grid]\na = 0.0\nb = 8.0\n").unwrap();
        assert!((c.grid().unwrap().a() - 0.008).abs() < 1e-15);
    }

    #[test]
    fn round_trip() {
        let text = r#"
command = "extend"
family = "morse"
params = [4.5, 1.2]
lambda = 1.5
alpha = -0.5
eigenindex = 2
stages = 2
path = "numeric"
branch = "L2"
seed = [0.5, 1.0, -0.25]
sign = "plus"
route_window = [-1.0, 3.0]
output_dir = "runs/morse"

[grid]
a = -2.0
b = 20.0
n = 1001

[solver]
k_levels = 4
richardson = false

[tolerances]
residual = 1e-5
pole_window = 12.5
"#;
        let c = parse_config(text).unwrap();
        let again = parse_config(&c.to_toml()).unwrap();
        assert_eq!(c, again);
        let minimal = RunConfig::minimal("coulomb");
        assert_eq!(parse_config(&minimal.to_toml()).unwrap(), minimal);
    }
}
