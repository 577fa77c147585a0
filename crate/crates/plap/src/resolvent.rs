//! Resolvent of the discrete p-Laplacian relative to the duality map:
//! given a density tau and alpha >= 0, find the unique u with
//! `duality_map(u) + alpha * grad_a(u) = tau`.
//!
//! The equation is the stationarity condition of the strongly convex
//! `Phi(u) = energy_n(u) + alpha * energy_a(u) - <tau, u>`,
//! which we minimise by gradient descent with a Barzilai-Borwein trial step
//! and Armijo backtracking.  The backtracking is nonmonotone in the sense of
//! Grippo-Lampariello-Lucidi: sufficient decrease is measured against the
//! largest objective value over the last few accepted steps, with a slack of
//! a few ulps so that steps remain acceptable once the per-step decrease
//! drops below what f64 subtraction of objective values can represent.  (On
//! stiff systems that regime is reached long before the gradient tolerance:
//! a strictly monotone method stalls there, while Barzilai-Borwein steps
//! keep converging R-linearly as long as transient objective growth is
//! tolerated.)  The best iterate seen is tracked as the incumbent and is
//! what the solver reports, so recorded objective values are nonincreasing
//! even though raw iterates are free to oscillate.  For alpha = 0 the
//! solution is duality_inverse(tau), returned directly.
//!
//! Nonnegative tau yields nonnegative u up to solver tolerance: the cone is
//! invariant under the resolvent.

use crate::error::{Error, Result};
use crate::mesh::GridFunction;
use crate::operators::{
    self, dual_norm_q_slice, duality_inverse, duality_map_slice, energy_a_slice, energy_n_slice,
    grad_a_slice, DualDensity,
};

#[derive(Debug, Clone)]
pub struct ResolveOptions {
    pub max_iters: usize,
    /// Stop when the dual-norm residual drops below grad_tol * (|tau|_q + 1).
    pub grad_tol: f64,
    /// First trial step before any curvature information exists.
    pub initial_step: f64,
    /// Backtracking shrink factor.
    pub shrink: f64,
    /// Armijo sufficient-decrease constant.
    pub armijo: f64,
    pub warm_start: Option<GridFunction>,
    /// Record the objective value at every iterate (for descent diagnostics).
    pub track_energy: bool,
}

impl Default for ResolveOptions {
    fn default() -> Self {
        ResolveOptions {
            max_iters: 5000,
            grad_tol: 1e-10,
            initial_step: 1.0,
            shrink: 0.5,
            armijo: 1e-4,
            warm_start: None,
            track_energy: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ResolveResult {
    pub u: GridFunction,
    /// Dual q-norm of duality_map(u) + alpha grad_a(u) - tau at the returned point.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective values per iterate when track_energy was set.
    pub energy_history: Vec<f64>,
}

pub fn resolve(tau: &DualDensity, alpha: f64, p: f64, opts: &ResolveOptions) -> Result<ResolveResult> {
    operators::check_p(p)?;
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(Error::Param(format!("alpha must be >= 0, got {alpha}")));
    }
    let mesh = tau.mesh().clone();

    if alpha == 0.0 {
        let u = duality_inverse(tau, p)?;
        let mut r = vec![0.0; u.values().len()];
        duality_map_slice(u.values(), p, &mut r);
        for (ri, ti) in r.iter_mut().zip(tau.values()) {
            *ri -= ti;
        }
        let residual = dual_norm_q_slice(&mesh, &r, p);
        return Ok(ResolveResult {
            u,
            residual,
            iterations: 0,
            converged: true,
            energy_history: Vec::new(),
        });
    }

    let n = mesh.interior_count();
    let w = mesh.quad_weight();
    let tau_norm = dual_norm_q_slice(&mesh, tau.values(), p);
    let tol = opts.grad_tol * (tau_norm + 1.0);

    let u: Vec<f64> = match &opts.warm_start {
        Some(g) => {
            if g.values().len() != n {
                return Err(Error::Mesh("warm start has wrong length".into()));
            }
            g.values().to_vec()
        }
        None => duality_inverse(tau, p)?.into_values(),
    };

    let phi = |vals: &[f64]| -> f64 {
        energy_n_slice(&mesh, vals, p) + alpha * energy_a_slice(&mesh, vals, p)
            - w * vals.iter().zip(tau.values()).map(|(a, b)| a * b).sum::<f64>()
    };
    // density residual r = N(u) + alpha A(u) - tau; nodal gradient of Phi is w * r
    let residual_into = |vals: &[f64], r: &mut [f64], scratch: &mut [f64]| {
        grad_a_slice(&mesh, vals, p, scratch);
        duality_map_slice(vals, p, r);
        for ((ri, si), ti) in r.iter_mut().zip(scratch.iter()).zip(tau.values()) {
            *ri += alpha * si - ti;
        }
    };

    // Barzilai-Borwein descent with a nonmonotone (GLL) Armijo backtrack:
    // sufficient decrease is required against the largest of the last few
    // accepted objective values, plus a few ulps of slack.  The incumbent
    // (lowest objective so far) and the best-residual iterate are tracked
    // separately from the raw iterate.
    let mut x = u;
    let mut phi_x = phi(&x);
    if !phi_x.is_finite() {
        return Err(Error::Solver("objective is not finite at the start point".into()));
    }
    let mut z = vec![0.0; n];
    let mut r = vec![0.0; n];
    let mut grad = vec![0.0; n];
    let mut prev_x = vec![0.0; n];
    let mut prev_grad = vec![0.0; n];
    let mut prev_valid = false;
    let mut scratch = vec![0.0; n];

    const WINDOW: usize = 10;
    let mut window = [phi_x; WINDOW];
    let mut window_len = 1usize;
    let mut window_pos = 1usize;

    let mut best_x = x.clone();
    let mut best_res = f64::INFINITY;
    let mut phi_best = phi_x;

    let mut history = Vec::new();
    if opts.track_energy {
        history.push(phi_best);
    }

    let mut step = opts.initial_step;
    let mut iterations = 0;
    let mut converged = false;
    let mut res_norm;

    loop {
        residual_into(&x, &mut r, &mut scratch);
        res_norm = dual_norm_q_slice(&mesh, &r, p);
        if !res_norm.is_finite() {
            return Err(Error::Solver("residual became non-finite".into()));
        }
        if res_norm < best_res {
            best_res = res_norm;
            best_x.copy_from_slice(&x);
        }
        if res_norm <= tol {
            converged = true;
            break;
        }
        if iterations >= opts.max_iters {
            break;
        }
        iterations += 1;

        let mut gg = 0.0;
        for i in 0..n {
            grad[i] = w * r[i];
            gg += grad[i] * grad[i];
        }
        if gg == 0.0 || !gg.is_finite() {
            break;
        }

        if prev_valid {
            let mut ss = 0.0;
            let mut sy = 0.0;
            for i in 0..n {
                let s = x[i] - prev_x[i];
                let dg = grad[i] - prev_grad[i];
                ss += s * s;
                sy += s * dg;
            }
            let bb = if sy > 0.0 && ss > 0.0 { ss / sy } else { 0.0 };
            if bb.is_finite() && bb > 0.0 {
                step = bb;
            } else {
                // the last step was too small to move x in f64, or the
                // curvature pair was pure round-off; grow until x moves
                step *= 2.0;
            }
        }
        if !step.is_finite() || step <= 0.0 {
            step = opts.initial_step;
        }

        let phi_ref = window[..window_len]
            .iter()
            .fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let noise = 16.0 * f64::EPSILON * (phi_ref.abs() + phi_x.abs() + 1e-300);
        let mut t = step;
        let mut accepted = false;
        let mut phi_z = f64::INFINITY;
        for _ in 0..120 {
            for i in 0..n {
                z[i] = x[i] - t * grad[i];
            }
            phi_z = phi(&z);
            if phi_z.is_finite()
                && (phi_z <= phi_ref - opts.armijo * t * gg || phi_z <= phi_ref + noise)
            {
                accepted = true;
                step = t;
                break;
            }
            t *= opts.shrink;
            if t < 1e-300 {
                break;
            }
        }
        if !accepted {
            // only reachable through non-finite trial values; the incumbent
            // is still valid, so stop here rather than loop on NaNs
            break;
        }

        prev_x.copy_from_slice(&x);
        prev_grad.copy_from_slice(&grad);
        prev_valid = true;
        x.copy_from_slice(&z);
        phi_x = phi_z;
        window[window_pos % WINDOW] = phi_x;
        window_pos += 1;
        window_len = window_len.max(window_pos.min(WINDOW));
        if phi_x < phi_best {
            phi_best = phi_x;
        }
        if opts.track_energy {
            history.push(phi_best);
        }
    }

    if !converged || res_norm > best_res {
        x = best_x;
        res_norm = best_res;
    }

    Ok(ResolveResult {
        u: GridFunction::new(mesh, x)?,
        residual: res_norm,
        iterations,
        converged,
        energy_history: history,
    })
}

/// Resolvents along a ladder of alphas, warm-starting each from the previous
/// solution. Results are returned in the order of `alphas`.
pub fn resolve_family(
    tau: &DualDensity,
    alphas: &[f64],
    p: f64,
    opts: &ResolveOptions,
) -> Result<Vec<ResolveResult>> {
    let mut out = Vec::with_capacity(alphas.len());
    let mut current = opts.clone();
    for &a in alphas {
        let res = resolve(tau, a, p, &current)?;
        current.warm_start = Some(res.u.clone());
        out.push(res);
    }
    Ok(out)
}
