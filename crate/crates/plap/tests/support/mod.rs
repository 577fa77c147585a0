//! Shared numerical oracles for the integration tests.
//!
//! Everything here is deliberately independent of the library's own solvers:
//! direct linear algebra for the p = 2 cases, a classical shooting method for
//! the one-dimensional eigenvalue, and textbook finite-difference stencils
//! assembled by hand.  The iterative code in the crate is checked against
//! answers produced by a different route.

#![allow(dead_code)] // each integration-test binary uses a different subset

/// Solve a tridiagonal system by the Thomas algorithm.
/// `sub` and `sup` have length n-1, `diag` and `rhs` length n.
pub fn thomas_solve(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    assert_eq!(sub.len() + 1, n);
    assert_eq!(sup.len() + 1, n);
    assert_eq!(rhs.len(), n);
    let mut c = vec![0.0; n.saturating_sub(1)];
    let mut d = vec![0.0; n];
    let mut beta = diag[0];
    assert!(beta != 0.0, "zero pivot");
    d[0] = rhs[0] / beta;
    for i in 1..n {
        c[i - 1] = sup[i - 1] / beta;
        beta = diag[i] - sub[i - 1] * c[i - 1];
        assert!(beta != 0.0, "zero pivot");
        d[i] = (rhs[i] - sub[i - 1] * d[i - 1]) / beta;
    }
    let mut x = d;
    for i in (0..n.saturating_sub(1)).rev() {
        let next = x[i + 1];
        x[i] -= c[i] * next;
    }
    x
}

/// Solve a dense system by Gaussian elimination with partial pivoting.
pub fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    assert_eq!(a.len(), n);
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(row, &bi)| {
            assert_eq!(row.len(), n);
            let mut r = row.clone();
            r.push(bi);
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())
            .unwrap();
        assert!(m[piv][col] != 0.0, "singular matrix");
        m.swap(col, piv);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..=n {
                let v = m[col][k];
                m[row][k] -= f * v;
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut s = m[row][n];
        for k in row + 1..n {
            s -= m[row][k] * x[k];
        }
        x[row] = s / m[row][row];
    }
    x
}

/// All eigenvalues of a symmetric matrix, ascending, by cyclic Jacobi sweeps.
pub fn jacobi_eigenvalues(a: &[Vec<f64>]) -> Vec<f64> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let scale: f64 = m
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0_f64, |acc, v| acc.max(v.abs()))
        .max(1e-300);
    for _sweep in 0..200 {
        let mut off = 0.0_f64;
        for i in 0..n {
            for j in i + 1..n {
                off = off.max(m[i][j].abs());
            }
        }
        if off <= 1e-13 * scale {
            break;
        }
        for i in 0..n {
            for j in i + 1..n {
                let aij = m[i][j];
                if aij.abs() <= 1e-300 {
                    continue;
                }
                let theta = (m[j][j] - m[i][i]) / (2.0 * aij);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mik = m[i][k];
                    let mjk = m[j][k];
                    m[i][k] = c * mik - s * mjk;
                    m[j][k] = s * mik + c * mjk;
                }
                for k in 0..n {
                    let mki = m[k][i];
                    let mkj = m[k][j];
                    m[k][i] = c * mki - s * mkj;
                    m[k][j] = s * mki + c * mkj;
                }
            }
        }
    }
    let mut evs: Vec<f64> = (0..n).map(|i| m[i][i]).collect();
    evs.sort_by(|x, y| x.partial_cmp(y).unwrap());
    evs
}

fn odd_root(s: f64, g: f64) -> f64 {
    if s == 0.0 {
        0.0
    } else {
        s.signum() * s.abs().powf(g)
    }
}

/// First Dirichlet eigenvalue of -(|u'|^{p-2} u')' = lambda |u|^{p-2} u on
/// (0, 1), by shooting.  The flux formulation
///
///     u' = sign(v) |v|^{1/(p-1)},    v' = -lambda sign(u) |u|^{p-1},
///
/// with u(0) = 0, v(0) = 1 is integrated by RK4; u(1) is positive for
/// lambda below the eigenvalue and negative just above it, and stays
/// negative until the second eigenvalue 2^p lambda_1, so a ratio-1.5
/// geometric scan cannot step over the sign change.  Bisection finishes.
pub fn shooting_lambda1(p: f64, steps: usize) -> f64 {
    let endpoint = |lam: f64| -> f64 {
        let h = 1.0 / steps as f64;
        let q = 1.0 / (p - 1.0);
        let f = |u: f64, v: f64| (odd_root(v, q), -lam * odd_root(u, p - 1.0));
        let (mut u, mut v) = (0.0_f64, 1.0_f64);
        for _ in 0..steps {
            let k1 = f(u, v);
            let k2 = f(u + 0.5 * h * k1.0, v + 0.5 * h * k1.1);
            let k3 = f(u + 0.5 * h * k2.0, v + 0.5 * h * k2.1);
            let k4 = f(u + h * k3.0, v + h * k3.1);
            u += h * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0) / 6.0;
            v += h * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1) / 6.0;
        }
        u
    };
    let mut lo = 1.0_f64;
    assert!(endpoint(lo) > 0.0, "scan must start below the first eigenvalue");
    let mut hi = lo;
    loop {
        hi *= 1.5;
        assert!(hi < 1e6, "no sign change found while scanning");
        if endpoint(hi) <= 0.0 {
            break;
        }
        lo = hi;
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if endpoint(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Tridiagonal bands of I + alpha L for the 1D Dirichlet Laplacian stencil
/// (2, -1)/h^2 on n interior nodes: (sub, diag, sup).
pub fn p2_resolvent_bands_1d(n: usize, h: f64, alpha: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let off = -alpha / (h * h);
    let d = 1.0 + 2.0 * alpha / (h * h);
    (vec![off; n - 1], vec![d; n], vec![off; n - 1])
}

/// Dense 1D Dirichlet Laplacian stencil matrix (2, -1)/h^2 on n interior nodes.
pub fn p2_stencil_dense_1d(n: usize, h: f64) -> Vec<Vec<f64>> {
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        m[i][i] = 2.0 / (h * h);
        if i > 0 {
            m[i][i - 1] = -1.0 / (h * h);
        }
        if i + 1 < n {
            m[i][i + 1] = -1.0 / (h * h);
        }
    }
    m
}

/// Dense 2D five-point Dirichlet Laplacian on an nx-by-ny interior grid,
/// x-fastest ordering, spacings hx and hy.
pub fn p2_stencil_dense_2d(nx: usize, ny: usize, hx: f64, hy: f64) -> Vec<Vec<f64>> {
    let n = nx * ny;
    let mut m = vec![vec![0.0; n]; n];
    let cx = 1.0 / (hx * hx);
    let cy = 1.0 / (hy * hy);
    for iy in 0..ny {
        for ix in 0..nx {
            let k = iy * nx + ix;
            m[k][k] = 2.0 * cx + 2.0 * cy;
            if ix > 0 {
                m[k][k - 1] = -cx;
            }
            if ix + 1 < nx {
                m[k][k + 1] = -cx;
            }
            if iy > 0 {
                m[k][k - nx] = -cy;
            }
            if iy + 1 < ny {
                m[k][k + nx] = -cy;
            }
        }
    }
    m
}

/// Exact smallest eigenvalue of the discrete 1D stencil on a uniform grid
/// with n interior nodes and spacing h: (4/h^2) sin^2(pi h / 2).
pub fn discrete_lambda1_1d(h: f64) -> f64 {
    let s = (std::f64::consts::PI * h / 2.0).sin();
    4.0 / (h * h) * s * s
}

/// Exact smallest eigenvalue of the five-point stencil on a uniform tensor
/// grid: the 1D values along each axis add.
pub fn discrete_lambda1_2d(hx: f64, hy: f64) -> f64 {
    discrete_lambda1_1d(hx) + discrete_lambda1_1d(hy)
}
