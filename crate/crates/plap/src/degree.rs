//! Existence certificates and fixed-point search for the coincidence
//! problem grad_a(u) = f(x, u) on the nonnegative cone.
//!
//! The certificate side is closed-form: when f(x, s)/s^(p-1) approaches a
//! linear slope rho as s -> 0+ (resp. s -> infinity), the fixed-point index
//! of the associated compact map on a small (resp. large) ball is 1 if
//! rho < lambda_1 everywhere and 0 if rho > lambda_1 everywhere, lambda_1
//! being the principal eigenvalue.  Differing indices on the two balls
//! certify a solution in the annulus between them.
//!
//! The search side iterates the damped fixed-point map
//! `u <- (1-theta) u + theta * J_alpha(retract(duality_map(u) + alpha F(u)))`
//! from a ladder of starts c * phi_1.  A fixed point with the retraction
//! inactive satisfies grad_a(u) = f(x, u) exactly, up to the inner solver
//! tolerance.  When the certified solution repels radially (index -1 at the
//! crossing), plain iteration collapses below it and blows up above it; the
//! search then bisects geometrically on c between a collapsing and a blowing
//! start, which walks the start onto the basin boundary where the iteration
//! tracks the solution long enough to converge.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::eig::{principal_eig, EigOptions};
use crate::error::{Error, Result};
use crate::expr::{Bindings, Expr, Var};
use crate::mesh::{GridFunction, Mesh};
use crate::operators::{
    self, dual_norm_q, duality_map, grad_a, nemytskii, norm_p, norm_p_slice, retract_dual,
    DualDensity,
};
use crate::resolvent::{resolve, ResolveOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DegreeVerdict {
    /// Index 1: the slope stays strictly below lambda_1.
    One,
    /// Index 0: the slope stays strictly above lambda_1.
    Zero,
    /// The slope straddles or touches lambda_1, or could not be measured.
    Undetermined,
}

impl std::fmt::Display for DegreeVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DegreeVerdict::One => "one",
            DegreeVerdict::Zero => "zero",
            DegreeVerdict::Undetermined => "undetermined",
        })
    }
}

/// Closed-form index of the linearised map for a slope field with range
/// [rho_min, rho_max].  Strict inequalities: touching lambda_1 is
/// undetermined.
pub fn degree_linear(rho_min: f64, rho_max: f64, lambda1: f64) -> DegreeVerdict {
    if !(rho_min.is_finite() && rho_max.is_finite() && lambda1.is_finite()) {
        return DegreeVerdict::Undetermined;
    }
    if rho_max < lambda1 {
        DegreeVerdict::One
    } else if rho_min > lambda1 {
        DegreeVerdict::Zero
    } else {
        DegreeVerdict::Undetermined
    }
}

/// Range of f(x, s)/s^(p-1) over the interior nodes, sampled at three
/// decades of s.  `stable` means every node's samples had settled (relative
/// changes below 1e-3) and none of the evaluations failed.
#[derive(Debug, Clone, Copy)]
pub struct SlopeEstimate {
    pub min: f64,
    pub max: f64,
    pub stable: bool,
}

pub fn estimate_slope(mesh: &Arc<Mesh>, f: &Expr, p: f64, at_infinity: bool) -> SlopeEstimate {
    let samples: [f64; 3] = if at_infinity {
        [1e4, 1e5, 1e6]
    } else {
        [1e-4, 1e-5, 1e-6]
    };
    let two_d = mesh.ndim() == 2;
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let mut stable = true;
    for i in 0..mesh.interior_count() {
        let [x1, x2] = mesh.interior_coord(i);
        let mut vals = [f64::NAN; 3];
        for (k, &s) in samples.iter().enumerate() {
            let b = Bindings {
                x1: Some(x1),
                x2: if two_d { Some(x2) } else { None },
                s: Some(s),
                ..Default::default()
            };
            match f.eval(&b) {
                Ok(v) => vals[k] = v / s.powf(p - 1.0),
                Err(_) => stable = false,
            }
        }
        for w in vals.windows(2) {
            let scale = w[0].abs().max(w[1].abs()).max(1e-12);
            if !((w[1] - w[0]).abs() <= 1e-3 * scale) {
                stable = false;
            }
        }
        let v = vals[2];
        if v.is_finite() {
            min = min.min(v);
            max = max.max(v);
        } else {
            stable = false;
        }
    }
    if !(min.is_finite() && max.is_finite()) {
        return SlopeEstimate {
            min: f64::NAN,
            max: f64::NAN,
            stable: false,
        };
    }
    SlopeEstimate { min, max, stable }
}

/// One application of the damped-iteration target
/// `J_alpha(retract(duality_map(u) + alpha * f(x, u)))`.
pub fn phi_alpha(
    u: &GridFunction,
    f: &Expr,
    alpha: f64,
    p: f64,
    opts: &ResolveOptions,
) -> Result<GridFunction> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::Param(format!(
            "fixed-point map needs alpha > 0, got {alpha}"
        )));
    }
    let nu = duality_map(u, p)?;
    let fu = nemytskii(u, f)?;
    let vals: Vec<f64> = nu
        .values()
        .iter()
        .zip(fu.values())
        .map(|(ni, fi)| ni + alpha * fi)
        .collect();
    let tau = retract_dual(&DualDensity::new(u.mesh().clone(), vals)?);
    let r = resolve(&tau, alpha, p, opts)?;
    if !r.converged {
        return Err(Error::Solver(format!(
            "inner resolve stalled inside the fixed-point map (residual {:.3e})",
            r.residual
        )));
    }
    Ok(r.u)
}

/// Dual q-norm of grad_a(u) - f(x, u): zero exactly at a coincidence.
pub fn coincidence_residual(u: &GridFunction, f: &Expr, p: f64) -> Result<f64> {
    let a = grad_a(u, p)?;
    let fu = nemytskii(u, f)?;
    let vals: Vec<f64> = a
        .values()
        .iter()
        .zip(fu.values())
        .map(|(ai, fi)| ai - fi)
        .collect();
    Ok(dual_norm_q(&DualDensity::new(u.mesh().clone(), vals)?, p))
}

#[derive(Debug, Clone)]
pub struct FixedPointOptions {
    pub alpha: f64,
    /// Damping weight of the update u <- (1-theta) u + theta Phi(u).
    pub theta: f64,
    /// Accept when |u - Phi(u)|_p stays below this...
    pub fp_tol: f64,
    /// ...and |grad_a(u) - f(x, u)|_q below this.
    pub res_tol: f64,
    pub max_iters: usize,
    /// Below this p-norm the run is classified as collapsed to zero.  The
    /// zero function is always a trivial coincidence when f(x, 0) = 0, so
    /// this has to sit well above the norm at which fp_tol becomes
    /// trivially satisfiable.
    pub min_norm: f64,
    /// Above this p-norm the run is classified as blown up.
    pub max_norm: f64,
    pub resolve: ResolveOptions,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        FixedPointOptions {
            alpha: 0.1,
            theta: 0.5,
            fp_tol: 1e-7,
            res_tol: 1e-6,
            max_iters: 400,
            min_norm: 1e-3,
            max_norm: 1e6,
            resolve: ResolveOptions {
                max_iters: 20_000,
                ..ResolveOptions::default()
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct FixedPoint {
    pub u: GridFunction,
    /// Final |u - Phi(u)|_p.
    pub fp_dist: f64,
    /// Final coincidence residual |grad_a(u) - f(x, u)|_q.
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Debug)]
enum PicardOutcome {
    Converged(FixedPoint),
    Collapsed,
    BlewUp,
    /// Budget ran out, or the iteration settled on a fixed point of the
    /// truncated map that is not a coincidence (active retraction).
    Stalled { final_norm: f64, start_norm: f64 },
}

fn picard_run(
    start: &GridFunction,
    f: &Expr,
    p: f64,
    opts: &FixedPointOptions,
) -> Result<PicardOutcome> {
    let mesh = start.mesh().clone();
    let mut u_vals: Vec<f64> = start.values().iter().map(|v| v.max(0.0)).collect();
    let start_norm = norm_p_slice(&mesh, &u_vals, p);
    let mut warm: Option<GridFunction> = None;
    let mut norm = start_norm;
    for it in 0..opts.max_iters {
        if !norm.is_finite() || norm >= opts.max_norm {
            return Ok(PicardOutcome::BlewUp);
        }
        if norm <= opts.min_norm {
            return Ok(PicardOutcome::Collapsed);
        }
        let u = GridFunction::new(mesh.clone(), u_vals.clone())?;
        let mut ropts = opts.resolve.clone();
        ropts.warm_start = Some(warm.take().unwrap_or_else(|| u.clone()));
        let phi_u = phi_alpha(&u, f, opts.alpha, p, &ropts)?;
        let diff: Vec<f64> = u
            .values()
            .iter()
            .zip(phi_u.values())
            .map(|(a, b)| a - b)
            .collect();
        let dist = norm_p_slice(&mesh, &diff, p);
        if dist <= opts.fp_tol {
            let residual = coincidence_residual(&u, f, p)?;
            if residual <= opts.res_tol {
                return Ok(PicardOutcome::Converged(FixedPoint {
                    u,
                    fp_dist: dist,
                    residual,
                    iterations: it,
                }));
            }
            if dist <= 0.01 * opts.fp_tol {
                // a genuine fixed point of the truncated map that is not a
                // coincidence; iterating further cannot change it
                return Ok(PicardOutcome::Stalled {
                    final_norm: norm,
                    start_norm,
                });
            }
        }
        for (uv, pv) in u_vals.iter_mut().zip(phi_u.values()) {
            *uv = (1.0 - opts.theta) * *uv + opts.theta * pv;
        }
        norm = norm_p_slice(&mesh, &u_vals, p);
        warm = Some(phi_u);
    }
    Ok(PicardOutcome::Stalled {
        final_norm: norm,
        start_norm,
    })
}

/// Damped fixed-point iteration from `start`; `Some` only when both the
/// fixed-point distance and the coincidence residual pass their tolerances.
pub fn find_fixed_point(
    start: &GridFunction,
    f: &Expr,
    p: f64,
    opts: &FixedPointOptions,
) -> Result<Option<FixedPoint>> {
    operators::check_p(p)?;
    match picard_run(start, f, p, opts)? {
        PicardOutcome::Converged(fp) => Ok(Some(fp)),
        _ => Ok(None),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchStatus {
    /// A certificate exists and a solution passing both tolerances was found.
    Found,
    /// A certificate exists but every start and bisection ran out.
    CertificateButNotFound,
    /// The slope verdicts do not certify a solution; no search was run.
    NoCertificate,
    /// The eigenvalue pass did not converge, so no verdict was possible.
    NotConverged,
}

#[derive(Debug, Clone)]
pub struct SearchOptions {
    /// Regularisation ladder, tried in order until a solution is found.
    pub alphas: Vec<f64>,
    pub theta: f64,
    pub fp_tol: f64,
    pub res_tol: f64,
    pub max_picard_iters: usize,
    /// Geometric bisection budget on the start amplitude.
    pub bisect_steps: usize,
    /// Drives the order in which start amplitudes are visited.
    pub seed: u64,
    pub eig: EigOptions,
    pub resolve: ResolveOptions,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            alphas: vec![1e-1, 1e-2, 1e-3],
            theta: 0.5,
            fp_tol: 1e-7,
            res_tol: 1e-6,
            max_picard_iters: 400,
            bisect_steps: 60,
            seed: 0,
            eig: EigOptions::default(),
            resolve: ResolveOptions {
                max_iters: 20_000,
                ..ResolveOptions::default()
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct SearchReport {
    pub lambda1: f64,
    /// Declared slopes, evaluated with L bound to lambda1 (when given).
    pub rho0: Option<f64>,
    pub rho_inf: Option<f64>,
    /// Slopes measured by sampling f.
    pub slope0: SlopeEstimate,
    pub slope_inf: SlopeEstimate,
    pub verdict_zero: DegreeVerdict,
    pub verdict_infinity: DegreeVerdict,
    /// True when the two verdicts differ and are both determined.
    pub certificate: bool,
    pub status: SearchStatus,
    pub solution: Option<GridFunction>,
    pub residual: Option<f64>,
    pub solution_norm: Option<f64>,
    pub starts_tried: usize,
    pub alpha_used: Option<f64>,
}

fn eval_rho(expr: &Expr, lambda1: f64, p: f64, what: &str) -> Result<f64> {
    let b = Bindings {
        l: Some(lambda1),
        p: Some(p),
        ..Default::default()
    };
    let v = expr.eval(&b).map_err(|e| match e {
        Error::Eval { offset, msg } => Error::Eval {
            offset,
            msg: format!("{msg} (while evaluating {what})"),
        },
        other => other,
    })?;
    if !v.is_finite() {
        return Err(Error::Param(format!("{what} evaluated to a non-finite value")));
    }
    Ok(v)
}

fn check_declared_matches_measured(
    what: &str,
    declared: f64,
    measured: &SlopeEstimate,
) -> Result<()> {
    if !measured.stable {
        return Ok(());
    }
    let tol = 0.05 * declared.abs().max(measured.max.abs()).max(1e-9);
    if declared < measured.min - tol || declared > measured.max + tol {
        return Err(Error::Hypothesis(format!(
            "declared {what} = {declared} does not match the measured slope range \
             [{}, {}]",
            measured.min, measured.max
        )));
    }
    Ok(())
}

/// Everything the certificate stage derives before any fixed-point work:
/// the eigenpair, the nonlinearity with p and L substituted, the slopes,
/// and both index verdicts.
#[derive(Debug, Clone)]
pub struct Assessment {
    pub lambda1: f64,
    /// Principal eigenfunction (unit p-norm); the search starts on its ray.
    pub phi: GridFunction,
    pub eig_iterations: usize,
    pub eig_residual: f64,
    pub eig_converged: bool,
    /// f with p and L bound to their numeric values.
    pub f: Expr,
    /// Declared slopes, evaluated with L bound to lambda1 (when given).
    pub rho0: Option<f64>,
    pub rho_inf: Option<f64>,
    pub slope0: SlopeEstimate,
    pub slope_inf: SlopeEstimate,
    pub verdict_zero: DegreeVerdict,
    pub verdict_infinity: DegreeVerdict,
    /// True when the two verdicts differ and are both determined.
    pub certificate: bool,
}

/// Certificate stage on its own: eigenvalue pass, L/P substitution, the
/// cone hypothesis f(x, 0) >= 0, slope measurement, declared-slope
/// cross-check, and the two verdicts.  When the eigenvalue pass does not
/// converge the verdicts are undetermined and no hypothesis is checked.
pub fn assess_problem(
    mesh: &Arc<Mesh>,
    p: f64,
    f_raw: &Expr,
    rho0_expr: Option<&Expr>,
    rho_inf_expr: Option<&Expr>,
    eig_opts: &EigOptions,
) -> Result<Assessment> {
    operators::check_p(p)?;
    let eig = principal_eig(mesh, p, eig_opts)?;
    let lambda1 = eig.lambda;
    let f = f_raw.substitute(Var::L, lambda1).substitute(Var::P, p);

    let rho0 = rho0_expr.map(|e| eval_rho(e, lambda1, p, "rho0")).transpose()?;
    let rho_inf = rho_inf_expr
        .map(|e| eval_rho(e, lambda1, p, "rho_inf"))
        .transpose()?;

    if !eig.converged {
        let unstable = SlopeEstimate {
            min: f64::NAN,
            max: f64::NAN,
            stable: false,
        };
        return Ok(Assessment {
            lambda1,
            phi: eig.phi,
            eig_iterations: eig.iterations,
            eig_residual: eig.residual,
            eig_converged: false,
            f,
            rho0,
            rho_inf,
            slope0: unstable,
            slope_inf: unstable,
            verdict_zero: DegreeVerdict::Undetermined,
            verdict_infinity: DegreeVerdict::Undetermined,
            certificate: false,
        });
    }

    // cone hypothesis: f may not point out of the cone on the boundary ray
    let two_d = mesh.ndim() == 2;
    for i in 0..mesh.interior_count() {
        let [x1, x2] = mesh.interior_coord(i);
        let b = Bindings {
            x1: Some(x1),
            x2: if two_d { Some(x2) } else { None },
            s: Some(0.0),
            ..Default::default()
        };
        let v = f.eval(&b)?;
        if v < 0.0 {
            return Err(Error::Hypothesis(format!(
                "f(x, 0) = {v} < 0 at x = ({x1}, {x2}); the iteration cannot stay \
                 in the nonnegative cone"
            )));
        }
    }

    let slope0 = estimate_slope(mesh, &f, p, false);
    let slope_inf = estimate_slope(mesh, &f, p, true);
    if let Some(r) = rho0 {
        check_declared_matches_measured("rho0", r, &slope0)?;
    }
    if let Some(r) = rho_inf {
        check_declared_matches_measured("rho_inf", r, &slope_inf)?;
    }

    let verdict_of = |declared: Option<f64>, measured: &SlopeEstimate| match declared {
        Some(r) => degree_linear(r, r, lambda1),
        None if measured.stable => degree_linear(measured.min, measured.max, lambda1),
        None => DegreeVerdict::Undetermined,
    };
    let verdict_zero = verdict_of(rho0, &slope0);
    let verdict_infinity = verdict_of(rho_inf, &slope_inf);
    let certificate = matches!(
        (verdict_zero, verdict_infinity),
        (DegreeVerdict::One, DegreeVerdict::Zero) | (DegreeVerdict::Zero, DegreeVerdict::One)
    );

    Ok(Assessment {
        lambda1,
        phi: eig.phi,
        eig_iterations: eig.iterations,
        eig_residual: eig.residual,
        eig_converged: true,
        f,
        rho0,
        rho_inf,
        slope0,
        slope_inf,
        verdict_zero,
        verdict_infinity,
        certificate,
    })
}

/// Certificate-then-search driver.
///
/// Runs the eigenvalue pass, substitutes L = lambda_1 into f and the
/// declared slopes, checks the cone hypothesis f(x, 0) >= 0, measures the
/// asymptotic slopes, and forms the two index verdicts.  Only when the
/// verdicts certify a solution does it iterate the damped fixed-point map
/// from a ladder of starts c * phi_1, bisecting on c between a collapsing
/// and a blowing-up start when the solution repels radially.
pub fn existence_search(
    mesh: &Arc<Mesh>,
    p: f64,
    f_raw: &Expr,
    rho0_expr: Option<&Expr>,
    rho_inf_expr: Option<&Expr>,
    opts: &SearchOptions,
) -> Result<SearchReport> {
    let a = assess_problem(mesh, p, f_raw, rho0_expr, rho_inf_expr, &opts.eig)?;
    let lambda1 = a.lambda1;
    let f = a.f.clone();

    let mut report = SearchReport {
        lambda1,
        rho0: a.rho0,
        rho_inf: a.rho_inf,
        slope0: a.slope0,
        slope_inf: a.slope_inf,
        verdict_zero: a.verdict_zero,
        verdict_infinity: a.verdict_infinity,
        certificate: a.certificate,
        status: if a.eig_converged {
            SearchStatus::NoCertificate
        } else {
            SearchStatus::NotConverged
        },
        solution: None,
        residual: None,
        solution_norm: None,
        starts_tried: 0,
        alpha_used: None,
    };
    if !a.eig_converged || !a.certificate {
        return Ok(report);
    }

    // amplitude ladder of starts c * phi_1, exponents -2..2
    let amplitudes: Vec<f64> = (0..9).map(|k| 10f64.powf(-2.0 + 0.5 * k as f64)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let scaled = |c: f64| -> Result<GridFunction> {
        let vals: Vec<f64> = a.phi.values().iter().map(|v| c * v).collect();
        GridFunction::new(mesh.clone(), vals)
    };

    for &alpha in &opts.alphas {
        let fp_opts = FixedPointOptions {
            alpha,
            theta: opts.theta,
            fp_tol: opts.fp_tol,
            res_tol: opts.res_tol,
            max_iters: opts.max_picard_iters,
            min_norm: 1e-3,
            max_norm: 1e6,
            resolve: opts.resolve.clone(),
        };

        let mut order = amplitudes.clone();
        order.shuffle(&mut rng);
        let mut outcomes: Vec<(f64, PicardOutcome)> = Vec::new();
        let mut found: Option<FixedPoint> = None;
        for &c in &order {
            report.starts_tried += 1;
            let out = picard_run(&scaled(c)?, &f, p, &fp_opts)?;
            if let PicardOutcome::Converged(fp) = out {
                found = Some(fp);
                break;
            }
            outcomes.push((c, out));
        }

        if found.is_none() {
            // classify each amplitude as drifting down or up, then bisect on
            // the leftmost adjacent pair with opposite fates: the basin
            // boundary between them holds the radially repelling solution
            outcomes.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            let drift_up = |o: &PicardOutcome| match o {
                PicardOutcome::BlewUp => true,
                PicardOutcome::Collapsed => false,
                PicardOutcome::Stalled {
                    final_norm,
                    start_norm,
                } => final_norm > start_norm,
                PicardOutcome::Converged(_) => unreachable!(),
            };
            let mut bracket: Option<(f64, f64)> = None;
            for w in outcomes.windows(2) {
                if !drift_up(&w[0].1) && drift_up(&w[1].1) {
                    bracket = Some((w[0].0, w[1].0));
                    break;
                }
            }
            if let Some((mut lo, mut hi)) = bracket {
                for _ in 0..opts.bisect_steps {
                    let mid = (lo * hi).sqrt();
                    if !(mid > lo && mid < hi) {
                        break; // amplitudes no longer separable in f64
                    }
                    report.starts_tried += 1;
                    match picard_run(&scaled(mid)?, &f, p, &fp_opts)? {
                        PicardOutcome::Converged(fp) => {
                            found = Some(fp);
                            break;
                        }
                        out => {
                            if drift_up(&out) {
                                hi = mid;
                            } else {
                                lo = mid;
                            }
                        }
                    }
                }
            }
        }

        if let Some(fp) = found {
            report.status = SearchStatus::Found;
            report.residual = Some(fp.residual);
            report.solution_norm = Some(norm_p(&fp.u, p));
            report.solution = Some(fp.u);
            report.alpha_used = Some(alpha);
            return Ok(report);
        }
    }

    report.status = SearchStatus::CertificateButNotFound;
    Ok(report)
}
