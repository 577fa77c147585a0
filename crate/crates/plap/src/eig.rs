//! Principal Dirichlet eigenvalue of the discrete p-Laplacian by
//! resolvent-based inverse iteration on the nonnegative cone.
//!
//! The pair (lambda, phi) solves `grad_a(phi) = lambda * duality_map(phi)`
//! with phi >= 0 and unit p-norm.  Each outer iteration resolves
//! `duality_map(v) + alpha * grad_a(v) = duality_map(u)`, clips the tiny
//! negative undershoots left by the inner solver, and renormalises.  On an
//! eigendirection the resolve rescales the function by
//! (1 + alpha * lambda)^(-1/(p-1)), so higher modes decay geometrically and
//! the Rayleigh quotient energy_a / energy_n tracks the principal eigenvalue
//! from above.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::{GridFunction, Mesh};
use crate::operators::{
    self, dual_norm_q, duality_map, energy_a, energy_n, grad_a, norm_p_slice, DualDensity,
};
use crate::resolvent::{resolve, ResolveOptions};

#[derive(Debug, Clone)]
pub struct EigOptions {
    /// Regularisation weight of the inner resolves.
    pub alpha: f64,
    /// Stop once successive Rayleigh quotients agree to this relative tolerance...
    pub rel_tol: f64,
    /// ...and the eigen-residual in the dual norm is below this.
    pub res_tol: f64,
    pub max_iters: usize,
    /// Start shape; interior-constant one when absent.
    pub start: Option<GridFunction>,
    pub resolve: ResolveOptions,
}

impl Default for EigOptions {
    fn default() -> Self {
        EigOptions {
            alpha: 1.0,
            rel_tol: 1e-8,
            res_tol: 1e-6,
            max_iters: 200,
            start: None,
            resolve: ResolveOptions {
                // the outer iteration needs more headroom than a one-off solve
                max_iters: 20_000,
                ..ResolveOptions::default()
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigResult {
    pub lambda: f64,
    /// Nonnegative eigenfunction with unit p-norm.
    pub phi: GridFunction,
    /// Dual q-norm of grad_a(phi) - lambda * duality_map(phi).
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Rayleigh quotient energy_a(u) / energy_n(u).
pub fn rayleigh(u: &GridFunction, p: f64) -> Result<f64> {
    let num = energy_a(u, p)?;
    let den = energy_n(u, p)?;
    if den == 0.0 {
        return Err(Error::Solver("Rayleigh quotient of the zero function".into()));
    }
    Ok(num / den)
}

/// Dual q-norm of grad_a(u) - lambda * duality_map(u).
pub fn eig_residual(u: &GridFunction, lambda: f64, p: f64) -> Result<f64> {
    let a = grad_a(u, p)?;
    let d = duality_map(u, p)?;
    let vals: Vec<f64> = a
        .values()
        .iter()
        .zip(d.values())
        .map(|(ai, di)| ai - lambda * di)
        .collect();
    Ok(dual_norm_q(&DualDensity::new(u.mesh().clone(), vals)?, p))
}

fn clamp_and_normalise(mesh: &Arc<Mesh>, mut vals: Vec<f64>, p: f64) -> Result<GridFunction> {
    for v in vals.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let norm = norm_p_slice(mesh, &vals, p);
    if !(norm.is_finite() && norm > 1e-200) {
        return Err(Error::Solver(
            "inverse iteration collapsed to the zero function".into(),
        ));
    }
    for v in vals.iter_mut() {
        *v /= norm;
    }
    GridFunction::new(mesh.clone(), vals)
}

pub fn principal_eig(mesh: &Arc<Mesh>, p: f64, opts: &EigOptions) -> Result<EigResult> {
    operators::check_p(p)?;
    if !(opts.alpha.is_finite() && opts.alpha > 0.0) {
        return Err(Error::Param(format!(
            "eigen iteration needs alpha > 0, got {}",
            opts.alpha
        )));
    }
    let start = match &opts.start {
        Some(g) => {
            if g.values().len() != mesh.interior_count() {
                return Err(Error::Mesh("start function has wrong length".into()));
            }
            g.values().to_vec()
        }
        None => vec![1.0; mesh.interior_count()],
    };
    let mut u = clamp_and_normalise(mesh, start, p)?;
    let mut lambda = rayleigh(&u, p)?;

    let mut iterations = 0;
    let mut converged = false;
    let mut residual = f64::INFINITY;
    while iterations < opts.max_iters {
        iterations += 1;
        let tau = duality_map(&u, p)?;
        let mut inner_opts = opts.resolve.clone();
        // on an eigendirection the resolve is exactly this rescaling, so it
        // makes a cheap and increasingly accurate warm start
        let scale = (1.0 + opts.alpha * lambda).powf(-1.0 / (p - 1.0));
        let warm: Vec<f64> = u.values().iter().map(|v| v * scale).collect();
        inner_opts.warm_start = Some(GridFunction::new(mesh.clone(), warm)?);
        let inner = resolve(&tau, opts.alpha, p, &inner_opts)?;
        if !inner.converged {
            return Err(Error::Solver(format!(
                "inner resolve stalled at outer iteration {iterations} (residual {:.3e})",
                inner.residual
            )));
        }
        u = clamp_and_normalise(mesh, inner.u.into_values(), p)?;
        let next = rayleigh(&u, p)?;
        let stagnated = (next - lambda).abs() <= opts.rel_tol * next.abs();
        lambda = next;
        residual = eig_residual(&u, lambda, p)?;
        if stagnated && residual <= opts.res_tol {
            converged = true;
            break;
        }
    }

    Ok(EigResult {
        lambda,
        phi: u,
        residual,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn discrete_lambda1(h: f64) -> f64 {
        let s = (PI * h / 2.0).sin();
        4.0 / (h * h) * s * s
    }

    #[test]
    fn linear_interval_matches_the_stencil_eigenvalue() {
        let m = Arc::new(Mesh::interval(1.0, 33).unwrap());
        let r = principal_eig(&m, 2.0, &EigOptions::default()).unwrap();
        assert!(r.converged, "{} iterations", r.iterations);
        let exact = discrete_lambda1(m.spacing()[0]);
        assert!(
            (r.lambda - exact).abs() <= 1e-6 * exact,
            "{} vs {exact}",
            r.lambda
        );
        assert!(r.residual <= 1e-6);
        assert!(r.phi.min_value() >= 0.0);
        let norm = operators::norm_p(&r.phi, 2.0);
        assert!((norm - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn linear_rectangle_eigenvalue_adds_axiswise() {
        let m = Arc::new(Mesh::rectangle(1.0, 1.0, 11, 9).unwrap());
        let r = principal_eig(&m, 2.0, &EigOptions::default()).unwrap();
        assert!(r.converged);
        let exact = discrete_lambda1(m.spacing()[0]) + discrete_lambda1(m.spacing()[1]);
        assert!(
            (r.lambda - exact).abs() <= 1e-6 * exact,
            "{} vs {exact}",
            r.lambda
        );
    }

    #[test]
    fn nonlinear_eigenpair_is_start_independent() {
        let m = Arc::new(Mesh::interval(1.0, 17).unwrap());
        let a = principal_eig(&m, 3.0, &EigOptions::default()).unwrap();
        assert!(a.converged);
        assert!(a.residual <= 1e-6);

        let mut opts = EigOptions::default();
        opts.start = Some(
            GridFunction::from_fn(m.clone(), |x| (PI * x[0]).sin() * (1.0 + 0.5 * x[0])).unwrap(),
        );
        let b = principal_eig(&m, 3.0, &opts).unwrap();
        assert!(b.converged);
        assert!(
            (a.lambda - b.lambda).abs() <= 1e-6 * a.lambda,
            "{} vs {}",
            a.lambda,
            b.lambda
        );
        for (x, y) in a.phi.values().iter().zip(b.phi.values()) {
            assert!((x - y).abs() <= 1e-5, "{x} vs {y}");
        }
    }

    #[test]
    fn eigen_relation_holds_componentwise() {
        let m = Arc::new(Mesh::interval(1.0, 17).unwrap());
        let r = principal_eig(&m, 3.0, &EigOptions::default()).unwrap();
        let a = grad_a(&r.phi, 3.0).unwrap();
        let d = duality_map(&r.phi, 3.0).unwrap();
        for (ai, di) in a.values().iter().zip(d.values()) {
            assert!((ai - r.lambda * di).abs() <= 1e-5 * (1.0 + ai.abs()));
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        let m = Arc::new(Mesh::interval(1.0, 9).unwrap());
        assert!(principal_eig(&m, 1.5, &EigOptions::default()).is_err());
        let mut opts = EigOptions::default();
        opts.alpha = 0.0;
        assert!(principal_eig(&m, 2.0, &opts).is_err());
        let mut opts = EigOptions::default();
        opts.start = Some(GridFunction::zeros(m.clone()));
        assert!(principal_eig(&m, 2.0, &opts).is_err());
    }
}
