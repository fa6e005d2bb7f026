//! Batch front end behind the `gqfn` binary.
//!
//! A spec file declares a space, named SLH components, a pipeline, an
//! optional Gaussian noise state and one experiment. The pipeline `[A, B]`
//! means the field passes `A` first: the composite is `series(B, A)`.
//!
//! Exit codes: 0 success, 1 validation failure, 2 runtime or numerical
//! failure. Failures print `{"errors": [...]}` on stderr.

pub mod spec_file;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::dpa::{self, ConvergenceSetup, DpaParams};
use crate::dynamics::{self, Backend, DensityOperator, EvolveOptions};
use crate::error::Error;
use crate::expr::{self, ExprError};
use crate::gaussian::{self, GaussianNoiseSpec};
use crate::generators::LindbladForm;
use crate::linalg::{self, ComplexMatrix};
use crate::operator::{HilbertSpec, Operator};
use crate::par::{self, Parallelism};
use crate::slh::{self, SlhModel};

use spec_file::{
    BackendSpec, ComponentSpec, Experiment, NetworkSpecFile, ObservableSpec, OperatorSource, Provenance, StateSpec,
};

pub const DEFAULT_TOL: f64 = 1e-9;
pub const THREADS_ENV: &str = "GQFN_THREADS";
pub const COMPOSITE: &str = "composite";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Diagnostic {
    pub kind: &'static str,
    pub location: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub offset: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
}

impl Diagnostic {
    fn new(kind: &'static str, location: impl Into<String>, message: impl Into<String>) -> Self {
        Self { kind, location: location.into(), message: message.into(), offset: None, residual: None }
    }

    fn with_residual(mut self, r: f64) -> Self {
        self.residual = Some(r);
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum CliError {
    Invalid(Vec<Diagnostic>),
    Runtime(String),
    /// The command produced output but its check failed.
    Failed { output: String, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => 1,
            CliError::Runtime(_) | CliError::Failed { .. } => 2,
        }
    }

    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        match self {
            CliError::Invalid(d) => d.clone(),
            CliError::Runtime(m) | CliError::Failed { message: m, .. } => {
                vec![Diagnostic::new("runtime", "", m.clone())]
            }
        }
    }

    /// The stderr payload.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Errors {
            errors: Vec<Diagnostic>,
        }
        let mut s = serde_json::to_string_pretty(&Errors { errors: self.diagnostics() }).expect("serializable");
        s.push('\n');
        s
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Reads the thread cap from the value of `GQFN_THREADS`.
pub fn configure_threads(value: Option<&str>) -> CliResult<()> {
    let Some(v) = value else { return Ok(()) };
    match v.trim().parse::<usize>() {
        Ok(n) if n > 0 => {
            par::limit_threads(n);
            Ok(())
        }
        _ => Err(CliError::Invalid(vec![Diagnostic::new(
            "environment",
            THREADS_ENV,
            format!("expected a positive integer, got '{v}'"),
        )])),
    }
}

/// `series(C, series(B, A))` for `[A, B, C]`.
pub fn order_expression(pipeline: &[String]) -> String {
    let mut it = pipeline.iter();
    let Some(first) = it.next() else { return String::new() };
    it.fold(first.clone(), |acc, name| format!("series({name}, {acc})"))
}

pub fn order_description(pipeline: &[String]) -> String {
    let list = pipeline.join(", ");
    match pipeline.first() {
        Some(first) => format!(
            "pipeline [{list}] = {}; the input field enters {first} first\n",
            order_expression(pipeline)
        ),
        None => "pipeline is empty\n".into(),
    }
}

pub fn parse_spec(text: &str) -> CliResult<NetworkSpecFile> {
    serde_json::from_str(text).map_err(|e| {
        let mut d = Diagnostic::new("json", format!("line {} column {}", e.line(), e.column()), e.to_string());
        if e.is_syntax() || e.is_eof() {
            d.kind = "json-syntax";
        }
        CliError::Invalid(vec![d])
    })
}

pub fn load(path: &Path) -> CliResult<NetworkSpecFile> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Invalid(vec![Diagnostic::new("io", path.display().to_string(), e.to_string())]))?;
    parse_spec(&text)
}

pub struct Observables(pub Vec<(String, Operator)>);

pub enum Prepared {
    Evolve { times: Vec<f64>, observables: Observables, rho0: DensityOperator, options: EvolveOptions },
    Steady { observables: Observables },
    DpaLimit(Box<ConvergenceSetup>),
    ComposeOnly,
}

/// A spec that passed every check.
pub struct Network {
    pub file: NetworkSpecFile,
    pub space: HilbertSpec,
    pub components: BTreeMap<String, SlhModel>,
    pub composite: SlhModel,
    pub noise: GaussianNoiseSpec,
    pub experiment: Prepared,
}

impl Network {
    /// Lindbladian of the composite under the noise given in the file.
    pub fn lindblad_form(&self) -> CliResult<LindbladForm> {
        let rotated = slh::rotate_out_scattering(&self.composite)?;
        Ok(LindbladForm::gaussian(&rotated.l_ops(), rotated.h(), &self.noise)?)
    }
}

fn expr_offset(e: &ExprError) -> Option<usize> {
    match e {
        ExprError::Syntax { offset, .. }
        | ExprError::UnknownIdentifier { offset, .. }
        | ExprError::NegativeIndex { offset }
        | ExprError::SqrtOfOperator { offset } => Some(*offset),
        _ => None,
    }
}

fn expression(src: &str, space: &HilbertSpec, location: String, diags: &mut Vec<Diagnostic>) -> Option<Operator> {
    match expr::evaluate_str(src, space) {
        Ok(op) => Some(op),
        Err(e) => {
            let kind = if expr_offset(&e).is_some() { "parse" } else { "expression" };
            let mut d = Diagnostic::new(kind, location, e.to_string());
            d.offset = expr_offset(&e);
            diags.push(d);
            None
        }
    }
}

fn matrix(rows: &spec_file::MatrixRows, shape: (usize, usize), location: &str, diags: &mut Vec<Diagnostic>) -> Option<ComplexMatrix> {
    match spec_file::to_matrix(rows) {
        Ok(m) if m.shape() == shape => Some(m),
        Ok(m) => {
            diags.push(Diagnostic::new(
                "shape",
                location,
                format!("matrix is {}x{}, expected {}x{}", m.nrows(), m.ncols(), shape.0, shape.1),
            ));
            None
        }
        Err(msg) => {
            diags.push(Diagnostic::new("shape", location, msg));
            None
        }
    }
}

fn operator(src: &OperatorSource, space: &HilbertSpec, location: String, diags: &mut Vec<Diagnostic>) -> Option<Operator> {
    match src {
        OperatorSource::Expr(s) => expression(s, space, location, diags),
        OperatorSource::Matrix(rows) => {
            let d = space.total_dim();
            let m = matrix(rows, (d, d), &location, diags)?;
            Some(Operator::new(space.clone(), m).expect("shape checked"))
        }
    }
}

fn component(name: &str, c: &ComponentSpec, space: &HilbertSpec, tol: f64, diags: &mut Vec<Diagnostic>) -> Option<SlhModel> {
    let before = diags.len();
    let at = |field: &str| format!("components.{name}.{field}");
    let l: Vec<Option<Operator>> =
        c.l.iter().enumerate().map(|(j, src)| operator(src, space, at(&format!("l[{j}]")), diags)).collect();
    let h = match &c.h {
        Some(src) => operator(src, space, at("h"), diags),
        None => Some(Operator::zero(space)),
    };
    if let Some(h) = &h {
        let r = h.hermitian_residual();
        if r > tol {
            diags.push(
                Diagnostic::new("h-self-adjoint", at("h"), format!("H is not self-adjoint: max |H - H*| = {r:.3e}"))
                    .with_residual(r),
            );
        }
    }
    let n = c.l.len();
    let s = match &c.s {
        Some(rows) => matrix(rows, (n, n), &at("s"), diags),
        None => Some(ComplexMatrix::identity(n, n)),
    };
    if let Some(s) = &s {
        let r = linalg::unitary_residual(s);
        if r > tol {
            diags.push(
                Diagnostic::new("s-unitarity", at("s"), format!("S is not unitary: max |S*S - I| = {r:.3e}"))
                    .with_residual(r),
            );
        }
    }
    if diags.len() > before {
        return None;
    }
    let s = s?;
    let rows = (0..n)
        .map(|j| (0..n).map(|k| Operator::scalar(space, s[(j, k)])).collect())
        .collect();
    let l = l.into_iter().collect::<Option<Vec<_>>>()?;
    match SlhModel::from_parts_unchecked(rows, l, h?) {
        Ok(g) => Some(g),
        Err(e) => {
            diags.push(Diagnostic::new("component", format!("components.{name}"), e.to_string()));
            None
        }
    }
}

fn noise(file: &NetworkSpecFile, channels: usize, tol: f64, diags: &mut Vec<Diagnostic>) -> Option<GaussianNoiseSpec> {
    let Some(spec) = &file.noise else { return Some(GaussianNoiseSpec::vacuum(channels)) };
    let n = matrix(&spec.n, (channels, channels), "noise.n", diags);
    let m = match &spec.m {
        Some(rows) => matrix(rows, (channels, channels), "noise.m", diags),
        None => Some(ComplexMatrix::zeros(channels, channels)),
    };
    let spec = GaussianNoiseSpec::new(n?, m?).ok()?;
    let report = gaussian::validate_noise(&spec, tol);
    if report.is_valid() {
        return Some(spec);
    }
    for check in report.checks.iter().filter(|c| !c.passed) {
        let kind = if check.name == gaussian::CHECK_SCHUR { "noise-schur" } else { "noise" };
        diags.push(
            Diagnostic::new(kind, "noise", format!("{} fails (residual {:.3e})", check.name, check.residual))
                .with_residual(check.residual),
        );
    }
    None
}

fn observables(list: &[ObservableSpec], space: &HilbertSpec, at: &str, diags: &mut Vec<Diagnostic>) -> Option<Observables> {
    let before = diags.len();
    let mut out = Vec::with_capacity(list.len());
    for (j, o) in list.iter().enumerate() {
        let loc = format!("{at}[{j}]");
        if o.label.is_empty() || o.label.contains([',', '\n', '\r', '"']) {
            diags.push(Diagnostic::new("label", loc.clone(), format!("label '{}' is empty or contains , \" or a newline", o.label)));
        } else if list[..j].iter().any(|p| p.label == o.label) {
            diags.push(Diagnostic::new("label", loc.clone(), format!("duplicate label '{}'", o.label)));
        }
        if let Some(op) = expression(&o.expr, space, format!("{loc}.expr"), diags) {
            out.push((o.label.clone(), op));
        }
    }
    (diags.len() == before).then_some(Observables(out))
}

fn state(spec: &StateSpec, space: &HilbertSpec, at: &str, diags: &mut Vec<Diagnostic>) -> Option<DensityOperator> {
    let r = match spec {
        StateSpec::Basis(levels) => DensityOperator::basis(space, levels),
        StateSpec::Matrix(rows) => {
            let d = space.total_dim();
            let m = matrix(rows, (d, d), at, diags)?;
            DensityOperator::new(space.clone(), m)
        }
    };
    r.map_err(|e| diags.push(Diagnostic::new("rho0", at, e.to_string()))).ok()
}

fn times(grid: &spec_file::TimeGrid, at: &str, diags: &mut Vec<Diagnostic>) -> Option<Vec<f64>> {
    let t = match grid.times() {
        Ok(t) => t,
        Err(msg) => {
            diags.push(Diagnostic::new("t-grid", at, msg));
            return None;
        }
    };
    let ok = !t.is_empty() && t[0] >= 0.0 && t.iter().all(|x| x.is_finite()) && t.windows(2).all(|w| w[1] > w[0]);
    if !ok {
        diags.push(Diagnostic::new("t-grid", at, "time grid must be nonempty, start at t >= 0 and increase strictly"));
        return None;
    }
    Some(t)
}

fn experiment(
    file: &NetworkSpecFile,
    space: &HilbertSpec,
    composite: Option<&SlhModel>,
    diags: &mut Vec<Diagnostic>,
) -> Option<Prepared> {
    match &file.experiment {
        Experiment::ComposeOnly => Some(Prepared::ComposeOnly),
        Experiment::Steady(s) => {
            let observables = observables(&s.observables, space, "experiment.steady.observables", diags)?;
            Some(Prepared::Steady { observables })
        }
        Experiment::Evolve(e) => {
            let at = "experiment.evolve";
            let t = times(&e.t_grid, &format!("{at}.t_grid"), diags);
            let obs = observables(&e.observables, space, &format!("{at}.observables"), diags);
            let rho0 = state(&e.rho0, space, &format!("{at}.rho0"), diags);
            if let Some(&f) = e.truncated_factors.iter().find(|&&f| f >= space.num_factors()) {
                diags.push(Diagnostic::new(
                    "truncated-factors",
                    format!("{at}.truncated_factors"),
                    format!("factor {f} out of range for {} factors", space.num_factors()),
                ));
                return None;
            }
            let backend = match e.backend {
                None | Some(BackendSpec::Exact) => Backend::Exact,
                Some(BackendSpec::Rk4) => Backend::Rk4 { step: None },
            };
            Some(Prepared::Evolve {
                times: t?,
                observables: obs?,
                rho0: rho0?,
                options: EvolveOptions { backend, truncated_factors: e.truncated_factors.clone() },
            })
        }
        Experiment::DpaLimit(d) => {
            let at = "experiment.dpa-limit";
            let t = times(&d.t_grid, &format!("{at}.t_grid"), diags);
            let obs = observables(std::slice::from_ref(&d.observable), space, &format!("{at}.observable"), diags);
            let rho0 = state(&d.rho0, space, &format!("{at}.rho0"), diags);
            let params = if d.below_threshold {
                DpaParams::below_threshold(d.eps, d.kappa, d.k_list.first().copied().unwrap_or(1.0), d.truncation)
            } else {
                DpaParams::new(d.eps, d.kappa, d.k_list.first().copied().unwrap_or(1.0), d.truncation)
            };
            let params = params.map_err(|e| diags.push(Diagnostic::new("dpa-parameters", at, e.to_string()))).ok();
            if d.k_list.is_empty()
                || d.k_list.iter().any(|&k| !(k > 0.0) || !k.is_finite())
                || d.k_list.windows(2).any(|w| !(w[1] > w[0]))
            {
                diags.push(Diagnostic::new("dpa-parameters", format!("{at}.k_list"), "k_list must be positive and strictly increasing"));
                return None;
            }
            let system = composite?;
            if system.channels() != 1 || !slh::is_static(system, slh::MODEL_TOL) {
                diags.push(Diagnostic::new(
                    "dpa-system",
                    "pipeline",
                    format!("the amplifier drives a single-channel static-S system, composite has {} channels", system.channels()),
                ));
                return None;
            }
            let observable = obs?.0.pop()?.1;
            Some(Prepared::DpaLimit(Box::new(ConvergenceSetup {
                system: system.clone(),
                params: params?,
                k_list: d.k_list.clone(),
                observable,
                times: t?,
                rho0: rho0?,
            })))
        }
    }
}

/// Runs every check on a parsed spec and returns all diagnostics on failure.
pub fn check(file: &NetworkSpecFile, tol: f64) -> std::result::Result<Network, Vec<Diagnostic>> {
    let mut diags = Vec::new();
    if file.version != spec_file::VERSION {
        diags.push(Diagnostic::new(
            "version",
            "version",
            format!("unsupported version {}, expected {}", file.version, spec_file::VERSION),
        ));
    }
    let space = match HilbertSpec::new(file.space.dims.clone()) {
        Ok(s) => s,
        Err(e) => {
            diags.push(Diagnostic::new("space", "space.dims", e.to_string()));
            return Err(diags);
        }
    };
    let mut components = BTreeMap::new();
    for (name, c) in &file.components {
        if let Some(g) = component(name, c, &space, tol, &mut diags) {
            components.insert(name.clone(), g);
        }
    }

    let mut composite: Option<SlhModel> = None;
    let mut resolved = true;
    if file.pipeline.is_empty() {
        diags.push(Diagnostic::new("pipeline", "pipeline", "pipeline is empty"));
        resolved = false;
    }
    for (j, name) in file.pipeline.iter().enumerate() {
        if !file.components.contains_key(name) {
            diags.push(Diagnostic::new("pipeline", format!("pipeline[{j}]"), format!("unknown component '{name}'")));
            resolved = false;
        }
    }
    if resolved {
        let parts: Option<Vec<&SlhModel>> = file.pipeline.iter().map(|n| components.get(n)).collect();
        if let Some(parts) = parts {
            let mut acc = parts[0].clone();
            let mut ok = true;
            for (j, g) in parts.iter().enumerate().skip(1) {
                match slh::series(g, &acc) {
                    Ok(next) => acc = next,
                    Err(e) => {
                        diags.push(Diagnostic::new("composition", format!("pipeline[{j}]"), e.to_string()));
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                composite = Some(acc);
            }
        }
    }

    let noise = match &composite {
        Some(g) => noise(file, g.channels(), tol, &mut diags),
        None => None,
    };
    let experiment = experiment(file, &space, composite.as_ref(), &mut diags);
    if !diags.is_empty() {
        return Err(diags);
    }
    Ok(Network {
        file: file.clone(),
        space,
        components,
        composite: composite.expect("no diagnostics"),
        noise: noise.expect("no diagnostics"),
        experiment: experiment.expect("no diagnostics"),
    })
}

pub fn load_network(path: &Path, tol: f64) -> CliResult<Network> {
    check(&load(path)?, tol).map_err(CliError::Invalid)
}

pub fn cmd_validate(path: &Path, tol: f64) -> CliResult<String> {
    load_network(path, tol).map(|_| "valid\n".to_string())
}

/// The composite as a spec file with a single component, re-ingestible by
/// every command.
pub fn compose_file(net: &Network) -> CliResult<NetworkSpecFile> {
    let g = &net.composite;
    let s = g.scalar_s(slh::MODEL_TOL).ok_or(Error::NotStatic)?;
    let component = ComponentSpec {
        s: Some(spec_file::from_matrix(&s)),
        l: g.l_ops().iter().map(|l| OperatorSource::Matrix(spec_file::from_matrix(l.matrix()))).collect(),
        h: Some(OperatorSource::Matrix(spec_file::from_matrix(g.h().matrix()))),
    };
    Ok(NetworkSpecFile {
        version: spec_file::VERSION,
        space: net.file.space.clone(),
        components: BTreeMap::from([(COMPOSITE.to_string(), component)]),
        noise: net.file.noise.clone(),
        pipeline: vec![COMPOSITE.into()],
        experiment: net.file.experiment.clone(),
        provenance: Some(Provenance {
            pipeline: net.file.pipeline.clone(),
            order: order_expression(&net.file.pipeline),
        }),
    })
}

pub fn cmd_compose(path: &Path, tol: f64) -> CliResult<String> {
    let net = load_network(path, tol)?;
    let mut s = serde_json::to_string_pretty(&compose_file(&net)?).map_err(|e| CliError::Runtime(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn steady_csv(net: &Network, observables: &Observables) -> CliResult<String> {
    let lind = net.lindblad_form()?.superoperator(Parallelism::default());
    let rho = dynamics::steady_state(&lind)?;
    let mut out = String::from("label,re,im\n");
    for (label, op) in &observables.0 {
        let z = rho.expectation(op)?;
        let _ = writeln!(out, "{label},{},{}", dynamics::format_float(z.re), dynamics::format_float(z.im));
    }
    Ok(out)
}

/// Trajectory CSV for `evolve` experiments, `label,re,im` rows for `steady`.
pub fn cmd_evolve(path: &Path, tol: f64) -> CliResult<String> {
    let net = load_network(path, tol)?;
    match &net.experiment {
        Prepared::Evolve { times, observables, rho0, options } => {
            let traj = dynamics::evolve(&net.lindblad_form()?, rho0, times, options)?;
            Ok(traj.expectations(&observables.0)?.to_csv())
        }
        Prepared::Steady { observables } => steady_csv(&net, observables),
        _ => Err(wrong_experiment(&net, "evolve", "evolve or steady")),
    }
}

fn wrong_experiment(net: &Network, command: &str, wanted: &str) -> CliError {
    CliError::Invalid(vec![Diagnostic::new(
        "experiment",
        "experiment",
        format!("'{command}' needs a {wanted} experiment, spec has {}", net.file.experiment.name()),
    )])
}

/// Convergence CSV; fails after producing output when the final-time error
/// neither strictly decreases along `k_list` nor sits at [`dpa::ERROR_FLOOR`].
pub fn cmd_dpa_limit(path: &Path, tol: f64) -> CliResult<String> {
    let net = load_network(path, tol)?;
    let Prepared::DpaLimit(setup) = &net.experiment else {
        return Err(wrong_experiment(&net, "dpa-limit", "dpa-limit"));
    };
    let table = dpa::convergence_experiment(setup, Parallelism::default())?;
    let csv = table.to_csv();
    if !table.converging() {
        let errs: Vec<String> = table.final_errors().iter().map(|(k, e)| format!("k={k}: {e:.3e}")).collect();
        return Err(CliError::Failed {
            output: csv,
            message: format!("final-time errors do not strictly decrease along k_list ({})", errs.join(", ")),
        });
    }
    Ok(csv)
}
