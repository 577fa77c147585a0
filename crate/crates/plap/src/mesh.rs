//! Uniform tensor grids on an interval (0, a) or rectangle (0, a) x (0, b),
//! with homogeneous Dirichlet boundary: grid functions store interior nodal
//! values only, boundary values are implicitly zero.
//!
//! Quadrature is the rectangle rule over interior nodes (every interior node
//! carries the product of the axis spacings as its weight).  Gradients live
//! on staggered cells: one forward difference per segment in 1-D, and the two
//! axis-aligned forward differences anchored at the lower-left corner of each
//! grid cell in 2-D.  Segments and cells touching the boundary use the
//! implicit zero.

use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshKind {
    Interval,
    Rectangle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    kind: MeshKind,
    /// Domain extent per axis; extent[1] is 0 for intervals.
    extent: [f64; 2],
    /// Node count per axis including both boundary nodes; nodes[1] is 0 for intervals.
    nodes: [usize; 2],
    spacing: [f64; 2],
}

fn check_axis(extent: f64, nodes: usize, axis: &str) -> Result<()> {
    if !extent.is_finite() || extent <= 0.0 {
        return Err(Error::Mesh(format!(
            "extent_{axis} must be a positive finite real, got {extent}"
        )));
    }
    if nodes < 3 {
        return Err(Error::Mesh(format!(
            "nodes_{axis} must be at least 3 (including boundary nodes), got {nodes}"
        )));
    }
    Ok(())
}

impl Mesh {
    pub fn interval(extent: f64, nodes: usize) -> Result<Mesh> {
        check_axis(extent, nodes, "x")?;
        Ok(Mesh {
            kind: MeshKind::Interval,
            extent: [extent, 0.0],
            nodes: [nodes, 0],
            spacing: [extent / (nodes - 1) as f64, 0.0],
        })
    }

    pub fn rectangle(extent_x: f64, extent_y: f64, nodes_x: usize, nodes_y: usize) -> Result<Mesh> {
        check_axis(extent_x, nodes_x, "x")?;
        check_axis(extent_y, nodes_y, "y")?;
        Ok(Mesh {
            kind: MeshKind::Rectangle,
            extent: [extent_x, extent_y],
            nodes: [nodes_x, nodes_y],
            spacing: [
                extent_x / (nodes_x - 1) as f64,
                extent_y / (nodes_y - 1) as f64,
            ],
        })
    }

    pub fn kind(&self) -> MeshKind {
        self.kind
    }

    pub fn ndim(&self) -> usize {
        match self.kind {
            MeshKind::Interval => 1,
            MeshKind::Rectangle => 2,
        }
    }

    pub fn extent(&self) -> [f64; 2] {
        self.extent
    }

    pub fn nodes_per_axis(&self) -> [usize; 2] {
        self.nodes
    }

    pub fn spacing(&self) -> [f64; 2] {
        self.spacing
    }

    /// Interior nodes per axis.
    pub fn interior_per_axis(&self) -> [usize; 2] {
        match self.kind {
            MeshKind::Interval => [self.nodes[0] - 2, 1],
            MeshKind::Rectangle => [self.nodes[0] - 2, self.nodes[1] - 2],
        }
    }

    /// Total number of interior nodes (= length of nodal value vectors).
    pub fn interior_count(&self) -> usize {
        let [ix, iy] = self.interior_per_axis();
        ix * iy
    }

    /// Number of gradient cells (segments in 1-D, grid cells in 2-D).
    pub fn cell_count(&self) -> usize {
        match self.kind {
            MeshKind::Interval => self.nodes[0] - 1,
            MeshKind::Rectangle => (self.nodes[0] - 1) * (self.nodes[1] - 1),
        }
    }

    /// Quadrature weight shared by every interior node (product of spacings).
    pub fn quad_weight(&self) -> f64 {
        match self.kind {
            MeshKind::Interval => self.spacing[0],
            MeshKind::Rectangle => self.spacing[0] * self.spacing[1],
        }
    }

    /// Measure of one gradient cell.
    pub fn cell_measure(&self) -> f64 {
        self.quad_weight()
    }

    /// Coordinates of interior node `idx` (y component is 0 for intervals).
    /// Interior nodes are numbered row-major with x fastest.
    pub fn interior_coord(&self, idx: usize) -> [f64; 2] {
        match self.kind {
            MeshKind::Interval => [(idx + 1) as f64 * self.spacing[0], 0.0],
            MeshKind::Rectangle => {
                let inx = self.nodes[0] - 2;
                let ix = idx % inx;
                let iy = idx / inx;
                [
                    (ix + 1) as f64 * self.spacing[0],
                    (iy + 1) as f64 * self.spacing[1],
                ]
            }
        }
    }

    /// Interior index of the global node (ix, iy), or None on the boundary.
    /// Global node indices run 0..nodes_x (and 0..nodes_y) per axis.
    #[inline]
    pub fn interior_index(&self, ix: usize, iy: usize) -> Option<usize> {
        match self.kind {
            MeshKind::Interval => {
                if ix == 0 || ix + 1 >= self.nodes[0] {
                    None
                } else {
                    Some(ix - 1)
                }
            }
            MeshKind::Rectangle => {
                if ix == 0 || ix + 1 >= self.nodes[0] || iy == 0 || iy + 1 >= self.nodes[1] {
                    None
                } else {
                    Some((iy - 1) * (self.nodes[0] - 2) + (ix - 1))
                }
            }
        }
    }

    /// Nodal value at global node (ix, iy): stored value inside, zero on the boundary.
    #[inline]
    pub fn value_at(&self, values: &[f64], ix: usize, iy: usize) -> f64 {
        match self.interior_index(ix, iy) {
            Some(i) => values[i],
            None => 0.0,
        }
    }

    /// Rectangle-rule integral of a nodal vector over the domain.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.interior_count());
        let w = self.quad_weight();
        values.iter().sum::<f64>() * w
    }

    /// Per-cell gradient vectors ([g, 0] in 1-D).
    pub fn cell_gradients(&self, values: &[f64]) -> Vec<[f64; 2]> {
        let mut out = Vec::with_capacity(self.cell_count());
        self.fold_cells(values, (), |_, g| out.push(g));
        out
    }

    /// Streams the per-cell gradients without materialising them.
    #[inline]
    pub fn fold_cells<F: FnMut(&mut T, [f64; 2]), T>(&self, values: &[f64], mut acc: T, mut f: F) -> T {
        debug_assert_eq!(values.len(), self.interior_count());
        match self.kind {
            MeshKind::Interval => {
                let n = self.nodes[0];
                let h = self.spacing[0];
                for c in 0..n - 1 {
                    let a = self.value_at(values, c, 0);
                    let e = self.value_at(values, c + 1, 0);
                    f(&mut acc, [(e - a) / h, 0.0]);
                }
            }
            MeshKind::Rectangle => {
                let [nx, ny] = self.nodes;
                let [hx, hy] = self.spacing;
                for cy in 0..ny - 1 {
                    for cx in 0..nx - 1 {
                        let a = self.value_at(values, cx, cy);
                        let e = self.value_at(values, cx + 1, cy);
                        let n = self.value_at(values, cx, cy + 1);
                        f(&mut acc, [(e - a) / hx, (n - a) / hy]);
                    }
                }
            }
        }
        acc
    }
}

/// Interior nodal values of a function vanishing on the boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<GridFunction> {
        if values.len() != mesh.interior_count() {
            return Err(Error::Mesh(format!(
                "grid function needs {} interior values, got {}",
                mesh.interior_count(),
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Mesh(format!("grid function value {bad} is not finite")));
        }
        Ok(GridFunction { mesh, values })
    }

    pub fn zeros(mesh: Arc<Mesh>) -> GridFunction {
        let n = mesh.interior_count();
        GridFunction {
            mesh,
            values: vec![0.0; n],
        }
    }

    pub fn constant(mesh: Arc<Mesh>, c: f64) -> Result<GridFunction> {
        let n = mesh.interior_count();
        GridFunction::new(mesh, vec![c; n])
    }

    /// Builds from a pointwise function of the node coordinates.
    pub fn from_fn(mesh: Arc<Mesh>, mut f: impl FnMut([f64; 2]) -> f64) -> Result<GridFunction> {
        let vals = (0..mesh.interior_count())
            .map(|i| f(mesh.interior_coord(i)))
            .collect();
        GridFunction::new(mesh, vals)
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_interval5() -> Arc<Mesh> {
        Arc::new(Mesh::interval(1.0, 5).unwrap())
    }

    #[test]
    fn interval_geometry() {
        let m = unit_interval5();
        assert_eq!(m.ndim(), 1);
        assert_eq!(m.spacing()[0], 0.25);
        assert_eq!(m.interior_count(), 3);
        assert_eq!(m.cell_count(), 4);
        assert_eq!(m.quad_weight(), 0.25);
        assert_eq!(m.interior_coord(0), [0.25, 0.0]);
        assert_eq!(m.interior_coord(2), [0.75, 0.0]);
    }

    #[test]
    fn rectangle_geometry() {
        let m = Mesh::rectangle(1.0, 2.0, 5, 9).unwrap();
        assert_eq!(m.ndim(), 2);
        assert_eq!(m.spacing(), [0.25, 0.25]);
        assert_eq!(m.interior_count(), 3 * 7);
        assert_eq!(m.cell_count(), 4 * 8);
        assert!((m.quad_weight() - 0.0625).abs() < 1e-15);
        // interior node numbering: x fastest
        assert_eq!(m.interior_coord(0), [0.25, 0.25]);
        assert_eq!(m.interior_coord(3), [0.25, 0.5]);
    }

    #[test]
    fn degenerate_meshes_rejected() {
        assert!(Mesh::interval(1.0, 2).is_err());
        assert!(Mesh::interval(0.0, 5).is_err());
        assert!(Mesh::interval(-1.0, 5).is_err());
        assert!(Mesh::interval(f64::NAN, 5).is_err());
        assert!(Mesh::rectangle(1.0, 1.0, 5, 2).is_err());
    }

    #[test]
    fn integrate_constant_one() {
        // 3 interior nodes, weight 0.25 each: boundary strips are not counted.
        let m = unit_interval5();
        let u = GridFunction::constant(m.clone(), 1.0).unwrap();
        assert!((m.integrate(u.values()) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn segment_slopes_include_boundary_segments() {
        let m = unit_interval5();
        let g = m.cell_gradients(&[0.1, 0.2, 0.1]);
        let slopes: Vec<f64> = g.iter().map(|v| v[0]).collect();
        let expect = [0.4, 0.4, -0.4, -0.4];
        for (a, b) in slopes.iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-14, "slopes {slopes:?}");
        }
    }

    #[test]
    fn rectangle_cell_has_two_forward_differences() {
        let m = Arc::new(Mesh::rectangle(1.0, 1.0, 3, 3).unwrap());
        // single interior node (1,1) with value 1; cells are anchored at their
        // lower-left corner, so the origin cell sees only boundary zeros
        let g = m.cell_gradients(&[1.0]);
        assert_eq!(g.len(), 4);
        let h = 0.5;
        assert_eq!(g[0], [0.0, 0.0]); // anchor (0,0)
        assert_eq!(g[1], [0.0, 1.0 / h]); // anchor (1,0): node is its north neighbour
        assert_eq!(g[2], [1.0 / h, 0.0]); // anchor (0,1): node is its east neighbour
        assert_eq!(g[3], [-1.0 / h, -1.0 / h]); // anchor (1,1): node is the anchor
    }

    #[test]
    fn grid_function_validation() {
        let m = unit_interval5();
        assert!(GridFunction::new(m.clone(), vec![0.0; 2]).is_err());
        assert!(GridFunction::new(m.clone(), vec![f64::NAN, 0.0, 0.0]).is_err());
        assert!(GridFunction::new(m.clone(), vec![0.0; 3]).is_ok());
    }

    #[test]
    fn integrate_is_monotone() {
        let m = unit_interval5();
        let lo = [0.1, -0.5, 0.3];
        let hi = [0.2, -0.1, 0.3];
        assert!(m.integrate(&lo) <= m.integrate(&hi));
    }
}
