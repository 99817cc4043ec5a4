//! Executes one command of a validated [`RunConfig`] and writes
//! `report.toml` plus `*.table` files.

use std::fs;
use std::path::Path;

use serde::Serialize;
use sigen_core::analysis::{isospectral_compare, singularity_scan, MatchOptions, PoleKind, PoleRecord, SpectralMatch, Verdict};
use sigen_core::catalog::{ParameterPoint, SuperpotentialFamily, CATALOG};
use sigen_core::deformation::{chi_residual, route_equivalence_for_node, solve_chi, DeformationProblem, RouteReport, Seed};
use sigen_core::grid::{Grid, GridFunction};
use sigen_core::operators::{base_shape_invariance_residual, partner_potentials, similarity_residual};
use sigen_core::pipeline::{
    extend_branch, root_node, Construction, ExtensionConfig, ExtensionNode, ExtensionTree, IsospectralObservation,
    PipelineSettings,
};
use sigen_core::residual::{ResidualReport, ResidualScope};
use sigen_core::spectral::{solve_schrodinger, solve_weighted, SolveOptions, SpectrumResult, Weight};
use sigen_core::Error;

use crate::config::{Command, RunConfig};
use crate::table::Table;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_TOLERANCE: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn new(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            passed: value <= tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub path: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSummary {
    pub a: f64,
    pub b: f64,
    pub n: usize,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilyEntry {
    pub name: String,
    pub domain: String,
    pub params: Vec<String>,
    pub defaults: Vec<f64>,
    pub interval: [f64; 2],
    pub superpotential: String,
    pub shift: String,
    pub spectrum: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorSection {
    pub shifted_params: Vec<f64>,
    pub shape_invariance: ResidualReport,
    pub constant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectraSection {
    pub plus: Vec<f64>,
    pub plus_errors: Vec<f64>,
    pub minus: Vec<f64>,
    pub minus_errors: Vec<f64>,
    pub matching: SpectralMatch,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeSummary {
    pub path: String,
    pub stage: usize,
    pub construction: Construction,
    pub params: Vec<f64>,
    pub lambda: f64,
    pub mu: f64,
    pub alpha: f64,
    pub eigenindex: usize,
    pub k: f64,
    pub poles: Vec<f64>,
    pub si_constant: f64,
    pub table: String,
    pub constraint: ResidualReport,
    pub shape_invariance: ResidualReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub isospectral: Option<IsospectralObservation>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeformSection {
    pub node: String,
    pub k: f64,
    pub seed: [f64; 3],
    pub substeps: usize,
    pub poles: Vec<f64>,
    pub chi_residual: ResidualReport,
    pub route: RouteReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanEntry {
    pub path: String,
    pub verdict: Verdict,
    pub poles: Vec<PoleRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub command: String,
    pub family: String,
    pub params: Vec<f64>,
    pub exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub tables: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSummary>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<Failure>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub catalog: Vec<FamilyEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub factorization: Option<FactorSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectra: Option<SpectraSection>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub nodes: Vec<NodeSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deformation: Option<DeformSection>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub scans: Vec<ScanEntry>,
    pub config: RunConfig,
}

/// Report and tables of one run, before anything touches the disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Execution {
    pub report: Report,
    pub tables: Vec<(String, Table)>,
}

impl Execution {
    pub fn exit_code(&self) -> i32 {
        self.report.exit_code
    }
}

fn exit_for(e: &Error) -> i32 {
    match e {
        Error::BoundaryLeakage { .. }
        | Error::CapacityExceeded { .. }
        | Error::IntegrationBlowUp { .. }
        | Error::NonPositive { .. }
        | Error::WeightOverflow { .. }
        | Error::AlphaMismatch { .. }
        | Error::ConstantMismatch(_)
        | Error::MismatchedGrids => EXIT_SOLVER,
        _ => EXIT_INVALID,
    }
}

struct Ctx {
    family: SuperpotentialFamily,
    params: ParameterPoint,
    grid: Grid,
    settings: PipelineSettings,
    ext: ExtensionConfig,
}

impl Ctx {
    fn new(config: &RunConfig) -> Result<Self, String> {
        let family = config.family().ok_or_else(|| format!("unknown family {:?}", config.family))?;
        let params = ParameterPoint::new(config.family_params().expect("family known")).map_err(|e| e.to_string())?;
        let grid = config.grid()?;
        let solve = SolveOptions {
            richardson: config.solver.richardson,
            want_vectors: true,
            leakage_tol: config.solver.leakage,
            natural_walls: (family.has_natural_wall(), false),
            tail_cutoff: config.solver.tail_cutoff,
        };
        let settings = PipelineSettings {
            path: config.path,
            solve,
            scope: ResidualScope::default()
                .with_margin(config.tolerances.margin)
                .with_pole_window(config.tolerances.pole_window),
            observe_levels: config.solver.k_levels.saturating_sub(1).max(1),
            spectral_tol: config.tolerances.spectral,
            ..Default::default()
        };
        let ext = ExtensionConfig {
            family,
            family_params: params.clone(),
            lambda: config.lambda,
            alpha: config.alpha,
            eigenindex: config.eigenindex,
            branch: config.branch,
        };
        Ok(Self {
            family,
            params,
            grid,
            settings,
            ext,
        })
    }
}

fn label(node: &ExtensionNode) -> String {
    node.path_label().replace('/', "_")
}

fn node_table(node: &ExtensionNode) -> Table {
    let mut t = Table::new(["x", "F", "g", "V_plus", "V_minus"]);
    for i in 0..node.grid.n() {
        t.push(vec![
            node.grid.x(i),
            node.f.values()[i],
            node.weight.g.values()[i],
            node.v_tilde_plus.values()[i],
            node.v_tilde_minus.values()[i],
        ]);
    }
    t
}

fn node_summary(node: &ExtensionNode) -> NodeSummary {
    NodeSummary {
        path: node.path_label(),
        stage: node.stage,
        construction: node.construction,
        params: node.params.values().to_vec(),
        lambda: node.lambda,
        mu: node.mu,
        alpha: node.alpha,
        eigenindex: node.eigenindex,
        k: node.k,
        poles: node.poles().to_vec(),
        si_constant: node.si_constant,
        table: format!("node_{}.table", label(node)),
        constraint: node.constraint.clone(),
        shape_invariance: node.shape_invariance.clone(),
        isospectral: node.isospectral.clone(),
    }
}

fn spectrum_table(s: &SpectrumResult) -> Table {
    let mut t = Table::new(["index", "eigenvalue", "error_estimate"]);
    for (i, e) in s.eigenvalues.iter().enumerate() {
        t.push(vec![i as f64, *e, s.error_estimates.get(i).copied().unwrap_or(f64::NAN)]);
    }
    t
}

/// Lowest V₊ level dropped, then paired in order with V₋; the largest gap.
fn partner_match(plus: &SpectrumResult, minus: &SpectrumResult) -> (SpectralMatch, f64) {
    let m = isospectral_compare(
        &plus.eigenvalues,
        &minus.eigenvalues,
        &MatchOptions {
            drop_lowest_a: true,
            allow_shift: false,
            tol: f64::INFINITY,
        },
    );
    let expected = plus.eigenvalues.len().saturating_sub(1).min(minus.eigenvalues.len());
    let gap = if m.pairs.len() < expected { f64::INFINITY } else { m.max_gap() };
    (m, gap)
}

struct Builder {
    report: Report,
    tables: Vec<(String, Table)>,
}

impl Builder {
    fn table(&mut self, name: String, t: Table) {
        self.report.tables.push(name.clone());
        self.tables.push((name, t));
    }

    fn check(&mut self, name: impl Into<String>, value: f64, tol: f64) {
        self.report.checks.push(Check::new(name, value, tol));
    }

    fn fail(mut self, e: &Error) -> Execution {
        self.report.exit_code = exit_for(e);
        self.report.error = Some(e.to_string());
        self.finish_raw()
    }

    fn finish_raw(self) -> Execution {
        Execution {
            report: self.report,
            tables: self.tables,
        }
    }

    fn finish(mut self) -> Execution {
        self.report.exit_code = if !self.report.failures.is_empty() {
            EXIT_SOLVER
        } else if self.report.checks.iter().any(|c| !c.passed) {
            EXIT_TOLERANCE
        } else {
            EXIT_OK
        };
        self.finish_raw()
    }
}

/// Runs `command` without writing anything. The config must have passed
/// validation.
pub fn execute(config: &RunConfig, command: Command) -> Execution {
    let mut b = Builder {
        report: Report {
            command: command.to_string(),
            family: config.family.clone(),
            params: config.family_params().unwrap_or_default(),
            exit_code: EXIT_OK,
            error: None,
            tables: Vec::new(),
            grid: None,
            checks: Vec::new(),
            failures: Vec::new(),
            catalog: Vec::new(),
            factorization: None,
            spectra: None,
            nodes: Vec::new(),
            deformation: None,
            scans: Vec::new(),
            config: RunConfig {
                command: Some(command),
                ..config.clone()
            },
        },
        tables: Vec::new(),
    };
    if command == Command::Catalog {
        b.report.catalog = CATALOG
            .iter()
            .map(|f| FamilyEntry {
                name: f.name.to_string(),
                domain: f.domain.to_string(),
                params: f.param_names.iter().map(|s| s.to_string()).collect(),
                defaults: f.default_params.to_vec(),
                interval: [f.default_interval.0, f.default_interval.1],
                superpotential: f.superpotential_text.to_string(),
                shift: f.shift_text.to_string(),
                spectrum: f.spectrum_text.to_string(),
            })
            .collect();
        return b.finish();
    }
    let ctx = match Ctx::new(config) {
        Ok(c) => c,
        Err(msg) => {
            b.report.exit_code = EXIT_INVALID;
            b.report.error = Some(msg);
            return b.finish_raw();
        }
    };
    b.report.grid = Some(GridSummary {
        a: ctx.grid.a(),
        b: ctx.grid.b(),
        n: ctx.grid.n(),
        h: ctx.grid.h(),
    });
    let result = match command {
        Command::Catalog => unreachable!(),
        Command::Factorize => factorize(&mut b, config, &ctx),
        Command::Spectrum => spectrum(&mut b, config, &ctx),
        Command::Extend => extend(&mut b, config, &ctx, false),
        Command::Scan => extend(&mut b, config, &ctx, true),
        Command::Deform => deform(&mut b, config, &ctx),
        Command::Verify => verify(&mut b, config, &ctx),
    };
    match result {
        Ok(()) => b.finish(),
        Err(e) => b.fail(&e),
    }
}

fn factorize(b: &mut Builder, config: &RunConfig, ctx: &Ctx) -> Result<(), Error> {
    let bundle = partner_potentials(&ctx.family, &ctx.params, &ctx.grid, ctx.settings.exponent_bound)?;
    let (si, c) = base_shape_invariance_residual(&ctx.family, &ctx.params, &ctx.grid, &ctx.settings.scope)?;
    let mut t = Table::new(["x", "W", "V_plus", "V_minus", "f", "g"]);
    for i in 0..ctx.grid.n() {
        t.push(vec![
            ctx.grid.x(i),
            bundle.w.values()[i],
            bundle.v_plus.values()[i],
            bundle.v_minus.values()[i],
            bundle.f.values()[i],
            bundle.g.values()[i],
        ]);
    }
    b.table("potentials.table".into(), t);
    b.check("base_shape_invariance", si.max_abs, config.tolerances.residual);
    b.report.factorization = Some(FactorSection {
        shifted_params: ctx.family.shift(ctx.params.values()),
        shape_invariance: si,
        constant: c,
    });
    Ok(())
}

fn partner_spectra(config: &RunConfig, ctx: &Ctx) -> Result<(SpectrumResult, SpectrumResult), Error> {
    let p = ctx.params.values();
    let vp = GridFunction::from_fn(ctx.grid, |x| ctx.family.v_plus(x, p));
    let vm = GridFunction::from_fn(ctx.grid, |x| ctx.family.v_minus(x, p));
    let k = config.solver.k_levels;
    let (a, b) = rayon::join(
        || solve_schrodinger(&vp, k, &ctx.settings.solve),
        || solve_schrodinger(&vm, k, &ctx.settings.solve),
    );
    Ok((a?, b?))
}

fn spectrum(b: &mut Builder, config: &RunConfig, ctx: &Ctx) -> Result<(), Error> {
    let (plus, minus) = partner_spectra(config, ctx)?;
    b.table("spectrum_plus.table".into(), spectrum_table(&plus));
    b.table("spectrum_minus.table".into(), spectrum_table(&minus));
    if let Some(psi) = &plus.eigenfunctions {
        let mut cols = vec!["x".to_string()];
        cols.extend((0..psi.len()).map(|k| format!("psi_{k}")));
        let mut t = Table::new(cols);
        for i in 0..ctx.grid.n() {
            let mut row = vec![ctx.grid.x(i)];
            row.extend(psi.iter().map(|p| p.values()[i]));
            t.push(row);
        }
        b.table("eigenfunctions_plus.table".into(), t);
    }
    let (m, gap) = partner_match(&plus, &minus);
    b.check("partner_isospectrality", gap, config.tolerances.spectral);
    b.report.spectra = Some(SpectraSection {
        plus: plus.eigenvalues,
        plus_errors: plus.error_estimates,
        minus: minus.eigenvalues,
        minus_errors: minus.error_estimates,
        matching: m,
    });
    Ok(())
}

fn extend(b: &mut Builder, config: &RunConfig, ctx: &Ctx, scan: bool) -> Result<(), Error> {
    let tree = ExtensionTree::grow(&ctx.ext, &ctx.grid, config.stages, &ctx.settings)?;
    let tol = config.tolerances.residual;
    for node in &tree.nodes {
        let name = label(node);
        if scan {
            let r = singularity_scan(node);
            let mut t = Table::new(["x", "kind", "interior"]);
            for p in &r.poles {
                let kind = match p.kind {
                    PoleKind::NodeOfPsi => 0.0,
                    PoleKind::WeightZero => 1.0,
                    PoleKind::PotentialPole => 2.0,
                };
                t.push(vec![p.x, kind, f64::from(u8::from(p.interior))]);
            }
            b.table(format!("poles_{name}.table"), t);
            b.report.scans.push(ScanEntry {
                path: node.path_label(),
                verdict: r.verdict,
                poles: r.poles,
            });
        } else {
            b.table(format!("node_{name}.table"), node_table(node));
            if node.stage == 0 {
                b.check("base_shape_invariance", node.shape_invariance.max_abs, tol);
            } else {
                let path = node.path_label();
                b.check(format!("constraint[{path}]"), node.constraint.max_abs, tol);
                b.check(format!("gennext_shape_invariance[{path}]"), node.shape_invariance.max_abs, tol);
            }
        }
        b.report.nodes.push(node_summary(node));
    }
    b.report.failures = tree
        .failures
        .iter()
        .map(|f| Failure {
            path: f.path.clone(),
            error: f.error.to_string(),
        })
        .collect();
    Ok(())
}

fn deform(b: &mut Builder, config: &RunConfig, ctx: &Ctx) -> Result<(), Error> {
    let root = root_node(&ctx.ext, &ctx.grid, &ctx.settings)?;
    let node = extend_branch(&root, &ctx.ext, config.branch, &ctx.settings)?;
    let [x0, u0, du0] = config.seed;
    let mut problem = DeformationProblem::for_node(&node, Seed { x0, u0, du0 })?;
    problem.sign = config.sign;
    let chi = solve_chi(&problem, &node.grid, config.solver.substeps)?;
    let mut scope = ctx.settings.scope.clone();
    if let Some([lo, hi]) = config.route_window {
        scope = scope.with_window(lo, hi);
    }
    let residual = chi_residual(&chi, &problem, &scope)?;
    let route = route_equivalence_for_node(&chi, &problem, &node, &scope)?;
    let mut t = Table::new(["x", "chi", "scaled_F", "W"]);
    let xi = node.f_xi.grid();
    for i in 0..node.grid.n() {
        let x = node.grid.x(i);
        let s = node.alpha * x;
        let mapped = if xi.contains(s) { node.alpha * node.f_xi.interpolate(s) } else { f64::NAN };
        t.push(vec![x, chi.values()[i], mapped, problem.w.values()[i]]);
    }
    b.table("chi.table".into(), t);
    b.check("route_equivalence", route.difference.max_abs, config.tolerances.route);
    b.report.nodes.push(node_summary(&node));
    b.report.deformation = Some(DeformSection {
        node: node.path_label(),
        k: problem.k,
        seed: config.seed,
        substeps: config.solver.substeps,
        poles: chi.poles().to_vec(),
        chi_residual: residual,
        route,
    });
    Ok(())
}

fn verify(b: &mut Builder, config: &RunConfig, ctx: &Ctx) -> Result<(), Error> {
    let tol = config.tolerances.residual;
    let (si, _) = base_shape_invariance_residual(&ctx.family, &ctx.params, &ctx.grid, &ctx.settings.scope)?;
    b.check("base_shape_invariance", si.max_abs, tol);

    let bundle = partner_potentials(&ctx.family, &ctx.params, &ctx.grid, ctx.settings.exponent_bound)?;
    let probes: [(&str, fn(f64) -> f64); 3] = [
        ("cos", f64::cos),
        ("square", |x| x * x),
        ("gaussian", |x| (-0.25 * x * x).exp()),
    ];
    for (name, p) in probes {
        let u = GridFunction::from_fn(ctx.grid, p);
        let r = similarity_residual(&bundle.f, &u, &ctx.settings.scope)?;
        b.check(format!("similarity[{name}]"), r.max_abs, tol);
    }

    let k = config.solver.k_levels;
    let p = ctx.params.values();
    let s1 = (0..ctx.grid.n()).map(|i| -ctx.family.w(ctx.grid.x(i), p)).collect();
    let s2 = (0..ctx.grid.n()).map(|i| -ctx.family.dw(ctx.grid.x(i), p)).collect();
    let weight = Weight::analytic(bundle.g.clone(), s1, s2)?;
    let zero = GridFunction::constant(ctx.grid, 0.0);
    let weighted = solve_weighted(&weight, &zero, k, &ctx.settings.solve)?;
    let (plus, minus) = partner_spectra(config, ctx)?;
    let rel = weighted
        .eigenvalues
        .iter()
        .zip(&plus.eigenvalues)
        .map(|(a, b)| (a - b).abs() / b.abs().max(1.0))
        .fold(0.0, f64::max);
    b.check("weighted_equivalence", rel, config.tolerances.spectral);

    let (m, gap) = partner_match(&plus, &minus);
    b.check("partner_isospectrality", gap, config.tolerances.spectral);
    b.report.spectra = Some(SpectraSection {
        plus: plus.eigenvalues,
        plus_errors: plus.error_estimates,
        minus: minus.eigenvalues,
        minus_errors: minus.error_estimates,
        matching: m,
    });

    let root = root_node(&ctx.ext, &ctx.grid, &ctx.settings)?;
    let node = extend_branch(&root, &ctx.ext, config.branch, &ctx.settings)?;
    let path = node.path_label();
    b.check(format!("constraint[{path}]"), node.constraint.max_abs, tol);
    b.check(format!("gennext_shape_invariance[{path}]"), node.shape_invariance.max_abs, tol);
    b.report.nodes.push(node_summary(&node));
    Ok(())
}

#[derive(Debug)]
pub enum WriteError {
    Io { path: String, message: String },
}

impl std::fmt::Display for WriteError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            WriteError::Io { path, message } => write!(f, "cannot write {path}: {message}"),
        }
    }
}

impl std::error::Error for WriteError {}

/// Writes the report and tables into `dir`, creating it if needed.
pub fn write_outputs(exec: &Execution, dir: &Path) -> Result<(), WriteError> {
    let io = |p: &Path, e: std::io::Error| WriteError::Io {
        path: p.display().to_string(),
        message: e.to_string(),
    };
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    for (name, t) in &exec.tables {
        let p = dir.join(name);
        fs::write(&p, t.to_string()).map_err(|e| io(&p, e))?;
    }
    let p = dir.join("report.toml");
    let text = toml::to_string(&exec.report).map_err(|e| WriteError::Io {
        path: p.display().to_string(),
        message: e.to_string(),
    })?;
    fs::write(&p, text).map_err(|e| io(&p, e))
}
