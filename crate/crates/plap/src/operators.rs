//! Discrete energies and the operator pair driving everything else.
//!
//! For a grid function u with interior values u_i and exponent p >= 2:
//!
//!   energy_a(u) = (1/p) * sum_cells measure * |grad u|^p     (gradient energy)
//!   energy_n(u) = (1/p) * sum_nodes  w * |u_i|^p             (value energy)
//!
//! Their derivatives are returned as dual densities t, paired with nodal
//! vectors through <t, v> = sum_i w * t_i * v_i, so that
//! d/de energy(u + e v) = <grad, v> exactly:
//!
//!   duality_map(u)_i = |u_i|^{p-2} u_i                       (d energy_n)
//!   grad_a(u)        = discrete p-Laplacian of u             (d energy_a)
//!
//! with the inverse of the duality map given pointwise by the conjugate
//! exponent q = p/(p-1): duality_inverse(t)_i = |t_i|^{q-2} t_i.
//!
//! The cone is the nonnegative orthant of nodal values.  Its dual cone (in
//! density coordinates) is again the nonnegative orthant; the retraction is
//! the pointwise positive part, which is the exact metric projection in every
//! weighted q-norm and has Lipschitz constant 1.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expr::{Bindings, Expr};
use crate::mesh::{GridFunction, Mesh};

/// Dual-side nodal density; pairs with grid functions through the quadrature
/// weights. Same storage contract as GridFunction (interior nodes, finite).
#[derive(Debug, Clone, PartialEq)]
pub struct DualDensity {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
}

impl DualDensity {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<DualDensity> {
        if values.len() != mesh.interior_count() {
            return Err(Error::Mesh(format!(
                "dual density needs {} interior values, got {}",
                mesh.interior_count(),
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Mesh(format!("dual density value {bad} is not finite")));
        }
        Ok(DualDensity { mesh, values })
    }

    pub fn zeros(mesh: Arc<Mesh>) -> DualDensity {
        let n = mesh.interior_count();
        DualDensity {
            mesh,
            values: vec![0.0; n],
        }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

pub(crate) fn check_p(p: f64) -> Result<()> {
    if !p.is_finite() || p < 2.0 {
        return Err(Error::Param(format!("p must satisfy p >= 2, got {p}")));
    }
    Ok(())
}

/// Conjugate exponent q = p/(p-1).
pub fn conjugate(p: f64) -> f64 {
    p / (p - 1.0)
}

/// sign(s)|s|^gamma with 0 mapped to 0 (safe for gamma < 1).
#[inline]
pub(crate) fn odd_pow(s: f64, gamma: f64) -> f64 {
    if s == 0.0 {
        0.0
    } else {
        s.signum() * s.abs().powf(gamma)
    }
}

// ---- slice-level kernels (also used by the iterative solvers) ----

pub(crate) fn energy_a_slice(mesh: &Mesh, vals: &[f64], p: f64) -> f64 {
    let measure = mesh.cell_measure();
    let sum = mesh.fold_cells(vals, 0.0, |acc, g| {
        let gn = (g[0] * g[0] + g[1] * g[1]).sqrt();
        *acc += gn.powf(p);
    });
    measure * sum / p
}

pub(crate) fn energy_n_slice(mesh: &Mesh, vals: &[f64], p: f64) -> f64 {
    let w = mesh.quad_weight();
    let sum: f64 = vals.iter().map(|v| v.abs().powf(p)).sum();
    w * sum / p
}

/// Writes the density of d energy_a(u) into `out`.
pub(crate) fn grad_a_slice(mesh: &Mesh, vals: &[f64], p: f64, out: &mut [f64]) {
    debug_assert_eq!(out.len(), mesh.interior_count());
    out.fill(0.0);
    let [hx, hy] = mesh.spacing();
    match mesh.ndim() {
        1 => {
            let n = mesh.nodes_per_axis()[0];
            // flux through each segment: |g|^{p-2} g
            for c in 0..n - 1 {
                let a = mesh.value_at(vals, c, 0);
                let e = mesh.value_at(vals, c + 1, 0);
                let g = (e - a) / hx;
                let flux = g.abs().powf(p - 2.0) * g;
                if let Some(i) = mesh.interior_index(c, 0) {
                    out[i] -= flux;
                }
                if let Some(i) = mesh.interior_index(c + 1, 0) {
                    out[i] += flux;
                }
            }
            // partial = flux difference, density = partial / w with w = hx
            for v in out.iter_mut() {
                *v /= hx;
            }
        }
        _ => {
            let [nx, ny] = mesh.nodes_per_axis();
            for cy in 0..ny - 1 {
                for cx in 0..nx - 1 {
                    let a = mesh.value_at(vals, cx, cy);
                    let e = mesh.value_at(vals, cx + 1, cy);
                    let n = mesh.value_at(vals, cx, cy + 1);
                    let gx = (e - a) / hx;
                    let gy = (n - a) / hy;
                    let gn = (gx * gx + gy * gy).sqrt();
                    let fac = gn.powf(p - 2.0);
                    // cell measure times d g / d u, with density scaling folded
                    // in afterwards: partial/(hx hy) leaves fx/hx and fy/hy.
                    let fx = fac * gx / hx;
                    let fy = fac * gy / hy;
                    if let Some(i) = mesh.interior_index(cx, cy) {
                        out[i] -= fx + fy;
                    }
                    if let Some(i) = mesh.interior_index(cx + 1, cy) {
                        out[i] += fx;
                    }
                    if let Some(i) = mesh.interior_index(cx, cy + 1) {
                        out[i] += fy;
                    }
                }
            }
        }
    }
}

pub(crate) fn duality_map_slice(vals: &[f64], p: f64, out: &mut [f64]) {
    for (o, &v) in out.iter_mut().zip(vals) {
        *o = odd_pow(v, p - 1.0);
    }
}

/// Weighted q-norm of a density slice (q conjugate to p).
pub(crate) fn dual_norm_q_slice(mesh: &Mesh, vals: &[f64], p: f64) -> f64 {
    let q = conjugate(p);
    let w = mesh.quad_weight();
    let sum: f64 = vals.iter().map(|v| v.abs().powf(q)).sum();
    (w * sum).powf(1.0 / q)
}

pub(crate) fn norm_p_slice(mesh: &Mesh, vals: &[f64], p: f64) -> f64 {
    let w = mesh.quad_weight();
    let sum: f64 = vals.iter().map(|v| v.abs().powf(p)).sum();
    (w * sum).powf(1.0 / p)
}

pub(crate) fn pairing_slice(mesh: &Mesh, density: &[f64], vals: &[f64]) -> f64 {
    let w = mesh.quad_weight();
    let sum: f64 = density.iter().zip(vals).map(|(t, u)| t * u).sum();
    w * sum
}

// ---- public operations ----

/// Gradient energy (1/p) integral |grad u|^p over the staggered cells.
pub fn energy_a(u: &GridFunction, p: f64) -> Result<f64> {
    check_p(p)?;
    Ok(energy_a_slice(u.mesh(), u.values(), p))
}

/// Value energy (1/p) integral |u|^p over the interior nodes.
pub fn energy_n(u: &GridFunction, p: f64) -> Result<f64> {
    check_p(p)?;
    Ok(energy_n_slice(u.mesh(), u.values(), p))
}

/// Derivative of energy_a as a dual density: the discrete p-Laplacian.
/// For p = 2 this is the classic second-difference stencil scaled by 1/h^2.
pub fn grad_a(u: &GridFunction, p: f64) -> Result<DualDensity> {
    check_p(p)?;
    let mut out = vec![0.0; u.mesh().interior_count()];
    grad_a_slice(u.mesh(), u.values(), p, &mut out);
    DualDensity::new(u.mesh().clone(), out)
}

/// Derivative of energy_n: the pointwise map u -> |u|^{p-2} u.
pub fn duality_map(u: &GridFunction, p: f64) -> Result<DualDensity> {
    check_p(p)?;
    let mut out = vec![0.0; u.values().len()];
    duality_map_slice(u.values(), p, &mut out);
    DualDensity::new(u.mesh().clone(), out)
}

/// Pointwise inverse of the duality map: t -> |t|^{q-2} t, q = p/(p-1).
pub fn duality_inverse(t: &DualDensity, p: f64) -> Result<GridFunction> {
    check_p(p)?;
    let q = conjugate(p);
    let vals = t.values().iter().map(|&v| odd_pow(v, q - 1.0)).collect();
    GridFunction::new(t.mesh().clone(), vals)
}

/// Superposition density F(u)_i = f(x_i, u_i), with u clamped to the cone
/// before substitution. Evaluation errors carry the node coordinates.
pub fn nemytskii(u: &GridFunction, f: &Expr) -> Result<DualDensity> {
    let mesh = u.mesh();
    let two_d = mesh.ndim() == 2;
    let mut out = vec![0.0; u.values().len()];
    for (i, (&ui, o)) in u.values().iter().zip(out.iter_mut()).enumerate() {
        let [x1, x2] = mesh.interior_coord(i);
        let b = Bindings {
            x1: Some(x1),
            x2: if two_d { Some(x2) } else { None },
            s: Some(ui.max(0.0)),
            ..Default::default()
        };
        *o = f.eval(&b).map_err(|e| match e {
            Error::Eval { offset, msg } => Error::Eval {
                offset,
                msg: format!("{msg} (at node x = ({x1}, {x2}))"),
            },
            other => other,
        })?;
    }
    DualDensity::new(mesh.clone(), out)
}

/// Retraction of a density onto the dual cone: pointwise positive part.
/// Exact metric projection in the weighted q-norm, Lipschitz constant 1.
pub fn retract_dual(t: &DualDensity) -> DualDensity {
    let vals = t.values().iter().map(|v| v.max(0.0)).collect();
    DualDensity {
        mesh: t.mesh().clone(),
        values: vals,
    }
}

/// Distance of a density to the dual cone in the weighted q-norm:
/// the q-norm of the negative part.
pub fn dual_cone_distance(t: &DualDensity, p: f64) -> Result<f64> {
    check_p(p)?;
    let neg: Vec<f64> = t.values().iter().map(|&v| (-v).max(0.0)).collect();
    Ok(dual_norm_q_slice(t.mesh(), &neg, p))
}

/// Membership of v in the tangent cone of the nonnegative orthant at u:
/// v_i >= 0 (up to zero_tol) at every node where u_i vanishes (up to zero_tol).
pub fn tangent_cone_member(u: &GridFunction, v: &GridFunction, zero_tol: f64) -> bool {
    u.values()
        .iter()
        .zip(v.values())
        .all(|(&ui, &vi)| ui.abs() > zero_tol || vi >= -zero_tol)
}

/// Duality pairing <t, u> = sum_i w t_i u_i.
pub fn pairing(t: &DualDensity, u: &GridFunction) -> f64 {
    pairing_slice(u.mesh(), t.values(), u.values())
}

/// Weighted p-norm of a grid function (= (p * energy_n)^{1/p}).
pub fn norm_p(u: &GridFunction, p: f64) -> f64 {
    norm_p_slice(u.mesh(), u.values(), p)
}

/// Weighted q-norm of a density, q conjugate to p.
pub fn dual_norm_q(t: &DualDensity, p: f64) -> f64 {
    dual_norm_q_slice(t.mesh(), t.values(), p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Mesh;

    fn interval(nodes: usize) -> Arc<Mesh> {
        Arc::new(Mesh::interval(1.0, nodes).unwrap())
    }

    fn gf(mesh: &Arc<Mesh>, vals: &[f64]) -> GridFunction {
        GridFunction::new(mesh.clone(), vals.to_vec()).unwrap()
    }

    fn dd(mesh: &Arc<Mesh>, vals: &[f64]) -> DualDensity {
        DualDensity::new(mesh.clone(), vals.to_vec()).unwrap()
    }

    #[test]
    fn energy_values_on_worked_example() {
        let m = interval(5);
        let u = gf(&m, &[0.1, 0.2, 0.1]);
        // four segments with |slope| 0.4: 0.5 * 0.25 * 4 * 0.16 = 0.08
        assert!((energy_a(&u, 2.0).unwrap() - 0.08).abs() < 1e-15);
        let one = gf(&m, &[1.0, 1.0, 1.0]);
        assert!((energy_n(&one, 2.0).unwrap() - 0.375).abs() < 1e-15);
    }

    #[test]
    fn p_below_two_rejected() {
        let m = interval(5);
        let u = gf(&m, &[0.1, 0.2, 0.1]);
        assert!(energy_a(&u, 1.5).is_err());
        assert!(energy_n(&u, f64::NAN).is_err());
        assert!(grad_a(&u, 1.0).is_err());
    }

    #[test]
    fn grad_a_is_the_second_difference_stencil_for_p2() {
        let m = interval(9);
        let h = m.spacing()[0];
        let vals = [0.3, -0.1, 0.7, 0.2, 0.0, -0.4, 0.25];
        let u = gf(&m, &vals);
        let g = grad_a(&u, 2.0).unwrap();
        for i in 0..vals.len() {
            let left = if i == 0 { 0.0 } else { vals[i - 1] };
            let right = if i + 1 == vals.len() { 0.0 } else { vals[i + 1] };
            let stencil = (2.0 * vals[i] - left - right) / (h * h);
            assert!(
                (g.values()[i] - stencil).abs() < 1e-12,
                "node {i}: {} vs {stencil}",
                g.values()[i]
            );
        }
    }

    #[test]
    fn grad_a_is_the_five_point_stencil_for_p2_in_2d() {
        let m = Arc::new(Mesh::rectangle(1.0, 1.0, 6, 5).unwrap());
        let [hx, hy] = m.spacing();
        let n = m.interior_count();
        let vals: Vec<f64> = (0..n).map(|i| ((i * 7 + 3) % 11) as f64 / 11.0 - 0.4).collect();
        let u = gf(&m, &vals);
        let g = grad_a(&u, 2.0).unwrap();
        let [nx, ny] = m.nodes_per_axis();
        for iy in 1..ny - 1 {
            for ix in 1..nx - 1 {
                let c = m.value_at(&vals, ix, iy);
                let e = m.value_at(&vals, ix + 1, iy);
                let wv = m.value_at(&vals, ix - 1, iy);
                let nv = m.value_at(&vals, ix, iy + 1);
                let sv = m.value_at(&vals, ix, iy - 1);
                let stencil = (2.0 * c - e - wv) / (hx * hx) + (2.0 * c - nv - sv) / (hy * hy);
                let got = g.values()[m.interior_index(ix, iy).unwrap()];
                assert!((got - stencil).abs() < 1e-12, "({ix},{iy}): {got} vs {stencil}");
            }
        }
    }

    #[test]
    fn duality_map_and_inverse_worked_example() {
        let m = interval(4);
        let u = gf(&m, &[2.0, -1.0]);
        let t = duality_map(&u, 3.0).unwrap();
        assert_eq!(t.values(), &[4.0, -1.0]);
        let back = duality_inverse(&t, 3.0).unwrap();
        assert!((back.values()[0] - 2.0).abs() < 1e-14);
        assert!((back.values()[1] + 1.0).abs() < 1e-14);
        // q-exponent branch: density 4 -> |4|^{q-2} 4 = 2 for p = 3
        let d = dd(&m, &[4.0, 0.0]);
        assert!((duality_inverse(&d, 3.0).unwrap().values()[0] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn duality_round_trip_for_p2_is_identity() {
        let m = interval(6);
        let u = gf(&m, &[0.5, -0.25, 0.0, 1.5]);
        let back = duality_inverse(&duality_map(&u, 2.0).unwrap(), 2.0).unwrap();
        for (a, b) in back.values().iter().zip(u.values()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn retraction_and_distance_worked_examples() {
        let m = interval(5);
        let t = dd(&m, &[-1.0, 2.0, 0.0]);
        let r = retract_dual(&t);
        assert_eq!(r.values(), &[0.0, 2.0, 0.0]);
        // distance of the single node value -1 with weight 0.25 at q = 2
        let s = dd(&m, &[-1.0, 0.0, 0.0]);
        assert!((dual_cone_distance(&s, 2.0).unwrap() - 0.5).abs() < 1e-15);
        // retracted densities are at distance zero
        assert_eq!(dual_cone_distance(&r, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn retraction_is_nonexpansive() {
        let m = interval(7);
        let a = dd(&m, &[0.4, -1.2, 0.0, 3.0, -0.1]);
        let b = dd(&m, &[-0.4, 0.7, 0.2, -3.0, -0.1]);
        for p in [2.0, 3.0] {
            let ra = retract_dual(&a);
            let rb = retract_dual(&b);
            let dr: Vec<f64> = ra
                .values()
                .iter()
                .zip(rb.values())
                .map(|(x, y)| x - y)
                .collect();
            let d: Vec<f64> = a.values().iter().zip(b.values()).map(|(x, y)| x - y).collect();
            let n_r = dual_norm_q_slice(&m, &dr, p);
            let n_d = dual_norm_q_slice(&m, &d, p);
            assert!(n_r <= n_d + 1e-15, "p={p}: {n_r} > {n_d}");
        }
    }

    #[test]
    fn tangent_cone_worked_example() {
        let m = interval(5);
        let u = gf(&m, &[0.0, 1.0, 0.0]);
        let v_in = gf(&m, &[1.0, -1.0, 0.0]);
        let v_out = gf(&m, &[-1.0, 0.0, 0.0]);
        assert!(tangent_cone_member(&u, &v_in, 1e-12));
        assert!(!tangent_cone_member(&u, &v_out, 1e-12));
    }

    #[test]
    fn nemytskii_binds_coordinates_and_clamps() {
        let m = interval(5);
        let f = Expr::parse("s^2 + x1").unwrap();
        let u = gf(&m, &[1.0, -2.0, 3.0]);
        let t = nemytskii(&u, &f).unwrap();
        // negative value clamped to zero before substitution
        assert!((t.values()[0] - 1.25).abs() < 1e-15);
        assert!((t.values()[1] - 0.5).abs() < 1e-15);
        assert!((t.values()[2] - 9.75).abs() < 1e-15);
        // domain errors surface as eval errors
        let bad = Expr::parse("1/(s - 3)").unwrap();
        assert!(nemytskii(&u, &bad).is_err());
    }

    #[test]
    fn pairing_is_the_directional_derivative_pairing() {
        let m = interval(5);
        let t = dd(&m, &[1.0, 2.0, -1.0]);
        let u = gf(&m, &[0.5, 0.5, 0.5]);
        assert!((pairing(&t, &u) - 0.25 * (0.5 + 1.0 - 0.5)).abs() < 1e-15);
    }

    #[test]
    fn truncation_never_increases_either_energy() {
        let m = Arc::new(Mesh::rectangle(1.0, 1.0, 5, 5).unwrap());
        let vals: Vec<f64> = (0..m.interior_count())
            .map(|i| ((i * 5 + 2) % 7) as f64 / 3.5 - 1.0)
            .collect();
        let u = GridFunction::new(m.clone(), vals.clone()).unwrap();
        let plus = GridFunction::new(m.clone(), vals.iter().map(|v| v.max(0.0)).collect()).unwrap();
        let minus = GridFunction::new(m, vals.iter().map(|v| (-v).max(0.0)).collect()).unwrap();
        for p in [2.0, 3.0, 4.0] {
            assert!(energy_a(&plus, p).unwrap() <= energy_a(&u, p).unwrap() + 1e-15);
            assert!(energy_n(&plus, p).unwrap() <= energy_n(&u, p).unwrap() + 1e-15);
            // disjoint supports: value energies add up exactly
            let sum = energy_n(&plus, p).unwrap() + energy_n(&minus, p).unwrap();
            assert!((sum - energy_n(&u, p).unwrap()).abs() < 1e-14);
        }
    }
}
