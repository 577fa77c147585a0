//! Command-line front end: problem-spec files in, machine-readable
//! artifacts out.
//!
//! Four subcommands share the flags `--spec`, `--out`, `--seed`, and
//! repeatable `--override key=value`:
//!
//! - `eig`    — principal eigenpair; writes `summary.json` + `profile.csv`.
//! - `solve`  — full existence search; writes `summary.json`, plus
//!   `profile.csv` when a solution is found.
//! - `degree` — slope verdicts and the annulus conclusion; `summary.json`.
//! - `check`  — seeded self-check suite; `summary.json` + `check_report.txt`
//!   (no wall time in either, so two runs with one seed are byte-identical).
//!
//! Exit codes: 0 for status ok / found / no_certificate / properties_pass;
//! 1 when a run completes with any other status; 2 for spec, expression, or
//! parameter errors; 3 for violated problem hypotheses; 4 for solver hard
//! errors and io failures.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::check::{run_all, CheckConfig, CheckReport};
use crate::degree::{assess_problem, existence_search, DegreeVerdict, SearchOptions, SearchStatus};
use crate::eig::EigOptions;
use crate::error::{Error, Result};
use crate::mesh::{GridFunction, Mesh, MeshKind};
use crate::problem::{ProblemSpec, Tolerances};
use crate::resolvent::ResolveOptions;

#[derive(Debug, Parser)]
#[command(name = "plap", version, about = "p-Laplacian eigenvalues, resolvents, and existence searches on tensor grids")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute the principal eigenpair of the problem's domain
    Eig(RunArgs),
    /// Search for a nonnegative solution of grad_a(u) = f(x, u)
    Solve(RunArgs),
    /// Report slope verdicts and the annulus conclusion without searching
    Degree(RunArgs),
    /// Run the seeded self-check property suite
    Check(CheckArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Problem-spec file
    #[arg(long)]
    pub spec: PathBuf,
    /// Directory receiving summary.json and profile.csv
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Replaces the seed from the spec file
    #[arg(long)]
    pub seed: Option<u64>,
    /// key=value replacing one spec entry (repeatable)
    #[arg(long = "override", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// Optional problem-spec file supplying tolerances and the seed
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Directory receiving summary.json and check_report.txt
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Replaces the seed from the spec file (default 0)
    #[arg(long)]
    pub seed: Option<u64>,
    /// key=value overriding a tolerance or the seed (repeatable)
    #[arg(long = "override", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

/// Closed status enumeration shared by every summary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Found,
    NoCertificate,
    CertificateButNotFound,
    NotConverged,
    PropertiesPass,
    PropertiesFail,
    Error,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Ok => "ok",
            RunStatus::Found => "found",
            RunStatus::NoCertificate => "no_certificate",
            RunStatus::CertificateButNotFound => "certificate_but_not_found",
            RunStatus::NotConverged => "not_converged",
            RunStatus::PropertiesPass => "properties_pass",
            RunStatus::PropertiesFail => "properties_fail",
            RunStatus::Error => "error",
        }
    }

    /// Exit code of a run that produced a summary with this status.
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Ok
            | RunStatus::Found
            | RunStatus::NoCertificate
            | RunStatus::PropertiesPass => 0,
            RunStatus::CertificateButNotFound
            | RunStatus::NotConverged
            | RunStatus::PropertiesFail
            | RunStatus::Error => 1,
        }
    }
}

/// One summary object per run; fields keep declaration order in the JSON
/// and absent stages are omitted entirely, never null.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub command: String,
    pub status: RunStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spec: Option<String>,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub domain_kind: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda1_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda1_iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_inf: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slope0_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slope0_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slope0_stable: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slope_inf_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slope_inf_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slope_inf_stable: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict_zero: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict_infinity: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conclusion: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solution_norm_p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solution_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solution_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub starts_tried: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_used: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub properties_passed: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub properties_failed: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<u64>,
}

impl RunSummary {
    fn new(command: &str, status: RunStatus, seed: u64) -> RunSummary {
        RunSummary {
            command: command.to_string(),
            status,
            error: None,
            spec: None,
            seed,
            p: None,
            domain_kind: None,
            lambda1: None,
            lambda1_residual: None,
            lambda1_iterations: None,
            rho0: None,
            rho_inf: None,
            slope0_min: None,
            slope0_max: None,
            slope0_stable: None,
            slope_inf_min: None,
            slope_inf_max: None,
            slope_inf_stable: None,
            verdict_zero: None,
            verdict_infinity: None,
            certificate: None,
            conclusion: None,
            solution_norm_p: None,
            solution_max: None,
            solution_residual: None,
            starts_tried: None,
            alpha_used: None,
            properties_passed: None,
            properties_failed: None,
            wall_time_ms: None,
        }
    }

    fn with_spec(command: &str, status: RunStatus, spec: &ProblemSpec) -> RunSummary {
        let mut s = RunSummary::new(command, status, spec.seed);
        s.spec = Some(spec.canonical_text());
        s.p = Some(spec.p);
        s.domain_kind = Some(
            match spec.domain.kind {
                MeshKind::Interval => "interval",
                MeshKind::Rectangle => "rectangle",
            }
            .to_string(),
        );
        s
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("summary serializes");
        text.push('\n');
        text
    }
}

fn eig_options(tol: &Tolerances) -> EigOptions {
    EigOptions {
        rel_tol: tol.rel_tol,
        res_tol: tol.res_tol,
        resolve: ResolveOptions {
            grad_tol: tol.grad_tol,
            max_iters: 20_000,
            ..ResolveOptions::default()
        },
        ..EigOptions::default()
    }
}

fn search_options(spec: &ProblemSpec) -> SearchOptions {
    SearchOptions {
        fp_tol: spec.tol.fp_tol,
        res_tol: spec.tol.res_tol,
        seed: spec.seed,
        eig: eig_options(&spec.tol),
        resolve: ResolveOptions {
            grad_tol: spec.tol.grad_tol,
            max_iters: 20_000,
            ..ResolveOptions::default()
        },
        ..SearchOptions::default()
    }
}

/// Principal eigenpair; the returned profile is the eigenfunction.
pub fn cmd_eig(spec: &ProblemSpec) -> Result<(RunSummary, GridFunction)> {
    let mesh = spec.build_mesh()?;
    let r = crate::eig::principal_eig(&mesh, spec.p, &eig_options(&spec.tol))?;
    let status = if r.converged {
        RunStatus::Ok
    } else {
        RunStatus::NotConverged
    };
    let mut s = RunSummary::with_spec("eig", status, spec);
    s.lambda1 = Some(r.lambda);
    s.lambda1_residual = Some(r.residual);
    s.lambda1_iterations = Some(r.iterations);
    Ok((s, r.phi))
}

fn fill_verdicts(
    s: &mut RunSummary,
    rho0: Option<f64>,
    rho_inf: Option<f64>,
    slope0: &crate::degree::SlopeEstimate,
    slope_inf: &crate::degree::SlopeEstimate,
    verdict_zero: DegreeVerdict,
    verdict_infinity: DegreeVerdict,
    certificate: bool,
) {
    s.rho0 = rho0;
    s.rho_inf = rho_inf;
    if slope0.stable {
        s.slope0_min = Some(slope0.min);
        s.slope0_max = Some(slope0.max);
    }
    s.slope0_stable = Some(slope0.stable);
    if slope_inf.stable {
        s.slope_inf_min = Some(slope_inf.min);
        s.slope_inf_max = Some(slope_inf.max);
    }
    s.slope_inf_stable = Some(slope_inf.stable);
    s.verdict_zero = Some(verdict_zero.to_string());
    s.verdict_infinity = Some(verdict_infinity.to_string());
    s.certificate = Some(certificate);
    s.conclusion = Some(
        if certificate {
            "nontrivial solution certified"
        } else {
            "no certificate"
        }
        .to_string(),
    );
}

/// Full existence search; the returned profile is the solution when found.
pub fn cmd_solve(spec: &ProblemSpec) -> Result<(RunSummary, Option<GridFunction>)> {
    let mesh = spec.build_mesh()?;
    let report = existence_search(
        &mesh,
        spec.p,
        &spec.f,
        spec.rho0.as_ref(),
        spec.rho_inf.as_ref(),
        &search_options(spec),
    )?;
    let status = match report.status {
        SearchStatus::Found => RunStatus::Found,
        SearchStatus::NoCertificate => RunStatus::NoCertificate,
        SearchStatus::CertificateButNotFound => RunStatus::CertificateButNotFound,
        SearchStatus::NotConverged => RunStatus::NotConverged,
    };
    let mut s = RunSummary::with_spec("solve", status, spec);
    s.lambda1 = Some(report.lambda1);
    fill_verdicts(
        &mut s,
        report.rho0,
        report.rho_inf,
        &report.slope0,
        &report.slope_inf,
        report.verdict_zero,
        report.verdict_infinity,
        report.certificate,
    );
    s.starts_tried = Some(report.starts_tried);
    s.alpha_used = report.alpha_used;
    s.solution_norm_p = report.solution_norm;
    s.solution_residual = report.residual;
    s.solution_max = report
        .solution
        .as_ref()
        .map(|u| u.values().iter().cloned().fold(0.0f64, f64::max));
    Ok((s, report.solution))
}

/// Verdict stage only: eigenvalue, slopes, verdicts, annulus conclusion.
pub fn cmd_degree(spec: &ProblemSpec) -> Result<RunSummary> {
    let mesh = spec.build_mesh()?;
    let a = assess_problem(
        &mesh,
        spec.p,
        &spec.f,
        spec.rho0.as_ref(),
        spec.rho_inf.as_ref(),
        &eig_options(&spec.tol),
    )?;
    let status = if a.eig_converged {
        RunStatus::Ok
    } else {
        RunStatus::NotConverged
    };
    let mut s = RunSummary::with_spec("degree", status, spec);
    s.lambda1 = Some(a.lambda1);
    s.lambda1_residual = Some(a.eig_residual);
    s.lambda1_iterations = Some(a.eig_iterations);
    fill_verdicts(
        &mut s,
        a.rho0,
        a.rho_inf,
        &a.slope0,
        &a.slope_inf,
        a.verdict_zero,
        a.verdict_infinity,
        a.certificate,
    );
    Ok(s)
}

/// Self-check suite; the summary carries the counts, the report the lines.
pub fn cmd_check(cfg: &CheckConfig) -> (RunSummary, CheckReport) {
    let report = run_all(cfg);
    let status = if report.all_passed() {
        RunStatus::PropertiesPass
    } else {
        RunStatus::PropertiesFail
    };
    let mut s = RunSummary::new("check", status, cfg.seed);
    s.properties_passed = Some(report.passed());
    s.properties_failed = Some(report.failed());
    (s, report)
}

fn load_spec(args: &RunArgs) -> Result<ProblemSpec> {
    let mut spec = ProblemSpec::from_file(&args.spec)?;
    apply_overrides(&mut spec, &args.overrides)?;
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    Ok(spec)
}

fn apply_overrides(spec: &mut ProblemSpec, overrides: &[String]) -> Result<()> {
    for o in overrides {
        let (key, value) = o.split_once('=').ok_or_else(|| {
            Error::Spec(format!("--override expects key=value, got {o:?}"))
        })?;
        spec.apply_override(key, value)?;
    }
    Ok(())
}

/// Tolerances and seed for `check` runs without a spec file.
fn check_config(args: &CheckArgs) -> Result<CheckConfig> {
    let (mut tol, mut seed) = match &args.spec {
        Some(path) => {
            let mut spec = ProblemSpec::from_file(path)?;
            apply_overrides(&mut spec, &args.overrides)?;
            (spec.tol, spec.seed)
        }
        None => {
            let mut tol = Tolerances::default();
            let mut seed = 0u64;
            for o in &args.overrides {
                let (key, value) = o.split_once('=').ok_or_else(|| {
                    Error::Spec(format!("--override expects key=value, got {o:?}"))
                })?;
                let (key, value) = (key.trim(), value.trim());
                let num = |what: &str| -> Result<f64> {
                    let v: f64 = value.parse().map_err(|_| {
                        Error::Spec(format!("{what}: expected a number, got {value:?}"))
                    })?;
                    if !(v.is_finite() && v > 0.0) {
                        return Err(Error::Spec(format!("{what} must be positive, got {v}")));
                    }
                    Ok(v)
                };
                match key {
                    "grad_tol" => tol.grad_tol = num("grad_tol")?,
                    "res_tol" => tol.res_tol = num("res_tol")?,
                    "fp_tol" => tol.fp_tol = num("fp_tol")?,
                    "rel_tol" => tol.rel_tol = num("rel_tol")?,
                    "seed" => {
                        seed = value.parse().map_err(|_| {
                            Error::Spec(format!("seed: expected an unsigned integer, got {value:?}"))
                        })?
                    }
                    other => {
                        return Err(Error::Spec(format!(
                            "check accepts overrides of tolerances and seed only, got {other:?}"
                        )))
                    }
                }
            }
            (tol, seed)
        }
    };
    if let Some(s) = args.seed {
        seed = s;
    }
    // reserved for future keys; keeps the two arms symmetric
    let _ = &mut tol;
    Ok(CheckConfig { seed, tol })
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, contents)?;
    Ok(path)
}

/// Node-by-node CSV of a grid function, boundary rows included (value 0).
/// Intervals get `x,value`; rectangles `x,y,value`.  Row order is x fastest.
pub fn profile_csv(u: &GridFunction) -> String {
    let mesh: &Arc<Mesh> = u.mesh();
    let [nx, ny] = mesh.nodes_per_axis();
    let [hx, hy] = mesh.spacing();
    let mut out = String::new();
    match mesh.kind() {
        MeshKind::Interval => {
            out.push_str("x,value\n");
            for ix in 0..nx {
                let x = ix as f64 * hx;
                let v = mesh.value_at(u.values(), ix, 0);
                out.push_str(&format!("{x},{v}\n"));
            }
        }
        MeshKind::Rectangle => {
            out.push_str("x,y,value\n");
            for iy in 0..ny {
                for ix in 0..nx {
                    let x = ix as f64 * hx;
                    let y = iy as f64 * hy;
                    let v = mesh.value_at(u.values(), ix, iy);
                    out.push_str(&format!("{x},{y},{v}\n"));
                }
            }
        }
    }
    out
}

fn finish(
    out_dir: &Path,
    mut summary: RunSummary,
    profile: Option<&GridFunction>,
    started: Instant,
) -> Result<i32> {
    summary.wall_time_ms = Some(started.elapsed().as_millis() as u64);
    write_file(out_dir, "summary.json", &summary.to_json())?;
    if let Some(u) = profile {
        write_file(out_dir, "profile.csv", &profile_csv(u))?;
    }
    println!("{}: status {}", summary.command, summary.status.as_str());
    if let Some(l) = summary.lambda1 {
        println!("lambda1 = {l}");
    }
    if let Some(r) = summary.rho0 {
        println!("rho0 = {r}");
    } else if let (Some(lo), Some(hi)) = (summary.slope0_min, summary.slope0_max) {
        println!("rho0 in [{lo}, {hi}] (measured)");
    }
    if let Some(r) = summary.rho_inf {
        println!("rho_inf = {r}");
    } else if let (Some(lo), Some(hi)) = (summary.slope_inf_min, summary.slope_inf_max) {
        println!("rho_inf in [{lo}, {hi}] (measured)");
    }
    if let (Some(vz), Some(vi)) = (&summary.verdict_zero, &summary.verdict_infinity) {
        println!("verdict at zero: {vz}");
        println!("verdict at infinity: {vi}");
    }
    if let Some(c) = &summary.conclusion {
        println!("conclusion: {c}");
    }
    if let Some(n) = summary.solution_norm_p {
        println!("solution p-norm = {n}");
    }
    Ok(summary.status.exit_code())
}

/// On failure at any stage: record the error in a summary so the artifact
/// trail is never silently empty, then surface the error code.
fn write_error_summary(out_dir: &Path, command: &str, seed: u64, err: &Error) {
    let mut s = RunSummary::new(command, RunStatus::Error, seed);
    s.error = Some(err.to_string());
    let _ = write_file(out_dir, "summary.json", &s.to_json());
}

/// Shared spec -> command -> artifacts pipeline for the run subcommands.
fn run_spec_command(
    args: &RunArgs,
    command: &str,
    cmd: impl FnOnce(&ProblemSpec) -> Result<(RunSummary, Option<GridFunction>)>,
) -> Result<i32> {
    let started = Instant::now();
    let (seed, result) = match load_spec(args) {
        Ok(spec) => (spec.seed, cmd(&spec)),
        Err(e) => (args.seed.unwrap_or(0), Err(e)),
    };
    match result {
        Ok((summary, profile)) => finish(&args.out, summary, profile.as_ref(), started),
        Err(e) => {
            write_error_summary(&args.out, command, seed, &e);
            Err(e)
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Eig(args) => run_spec_command(&args, "eig", |spec| {
            cmd_eig(spec).map(|(summary, phi)| (summary, Some(phi)))
        }),
        Command::Solve(args) => run_spec_command(&args, "solve", cmd_solve),
        Command::Degree(args) => run_spec_command(&args, "degree", |spec| {
            cmd_degree(spec).map(|summary| (summary, None))
        }),
        Command::Check(args) => match check_config(&args) {
            Ok(cfg) => {
                let (summary, report) = cmd_check(&cfg);
                let text = report.render();
                write_file(&args.out, "summary.json", &summary.to_json())?;
                write_file(&args.out, "check_report.txt", &text)?;
                print!("{text}");
                Ok(summary.status.exit_code())
            }
            Err(e) => {
                write_error_summary(&args.out, "check", args.seed.unwrap_or(0), &e);
                Err(e)
            }
        },
    }
}

/// Entry point for the binary; returns the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
