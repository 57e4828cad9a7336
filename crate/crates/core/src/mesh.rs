//! Uniform periodic meshes of an interval or a rectangle.
//!
//! Vertices are stored on the full closed grid (including the right/top
//! boundary copies); `periodic_map` sends every vertex to its master copy in
//! `[0, L)`. Cells keep the raw vertex indices so that geometry is computed
//! from unwrapped coordinates, while degrees of freedom are identified later
//! through the periodic map.

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    dim: usize,
    extents: Vec<f64>,
    divisions: Vec<usize>,
    vertices: Vec<[f64; 2]>,
    cells: Vec<Vec<usize>>,
    periodic_map: Vec<usize>,
    h: f64,
}

impl Mesh {
    /// `n` equal cells on `[0, L]` with `x = L` identified with `x = 0`.
    pub fn interval(length: f64, n: usize) -> Result<Self> {
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::invalid(format!("interval length must be positive, got {length}")));
        }
        if n < 2 {
            return Err(Error::invalid(format!("interval mesh needs at least 2 cells, got {n}")));
        }
        let dx = length / n as f64;
        let vertices = (0..=n).map(|i| [i as f64 * dx, 0.0]).collect();
        let cells = (0..n).map(|i| vec![i, i + 1]).collect();
        let periodic_map = (0..=n).map(|i| i % n).collect();
        Ok(Self {
            dim: 1,
            extents: vec![length],
            divisions: vec![n],
            vertices,
            cells,
            periodic_map,
            h: dx,
        })
    }

    /// `nx × ny` grid on `[0, Lx] × [0, Ly]`, each grid cell split along its
    /// lower-left to upper-right diagonal into two counter-clockwise triangles.
    pub fn rectangle(lx: f64, ly: f64, nx: usize, ny: usize) -> Result<Self> {
        for (name, v) in [("Lx", lx), ("Ly", ly)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if nx < 2 || ny < 2 {
            return Err(Error::invalid(format!(
                "rectangle mesh needs at least 2 divisions per direction, got {nx}x{ny}"
            )));
        }
        let (dx, dy) = (lx / nx as f64, ly / ny as f64);
        let vid = |i: usize, j: usize| j * (nx + 1) + i;
        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
        let mut periodic_map = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                vertices.push([i as f64 * dx, j as f64 * dy]);
                periodic_map.push(vid(i % nx, j % ny));
            }
        }
        let mut cells = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let (v00, v10, v11, v01) = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1));
                cells.push(vec![v00, v10, v11]);
                cells.push(vec![v00, v11, v01]);
            }
        }
        Ok(Self {
            dim: 2,
            extents: vec![lx, ly],
            divisions: vec![nx, ny],
            vertices,
            cells,
            periodic_map,
            h: dx.hypot(dy),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn extents(&self) -> &[f64] {
        &self.extents
    }

    /// Number of grid divisions per direction.
    pub fn divisions(&self) -> &[usize] {
        &self.divisions
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn periodic_map(&self) -> &[usize] {
        &self.periodic_map
    }

    /// Number of distinct vertices once periodic copies are identified.
    pub fn num_master_vertices(&self) -> usize {
        self.divisions.iter().product()
    }

    /// Maximum cell diameter.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Grid spacing along axis `axis`.
    pub fn spacing(&self, axis: usize) -> f64 {
        self.extents[axis] / self.divisions[axis] as f64
    }

    pub fn domain_measure(&self) -> f64 {
        self.extents.iter().product()
    }

    /// Length (1D) or area (2D) of a cell.
    pub fn cell_measure(&self, cell: usize) -> f64 {
        let c = &self.cells[cell];
        let p = |k: usize| self.vertices[c[k]];
        match self.dim {
            1 => p(1)[0] - p(0)[0],
            _ => {
                let (a, b, d) = (p(0), p(1), p(2));
                0.5 * ((b[0] - a[0]) * (d[1] - a[1]) - (d[0] - a[0]) * (b[1] - a[1]))
            }
        }
    }

    /// Diameter of a cell (longest edge).
    pub fn cell_diameter(&self, cell: usize) -> f64 {
        let c = &self.cells[cell];
        let mut diam: f64 = 0.0;
        for a in 0..c.len() {
            for b in a + 1..c.len() {
                let (p, q) = (self.vertices[c[a]], self.vertices[c[b]]);
                diam = diam.max((p[0] - q[0]).hypot(p[1] - q[1]));
            }
        }
        diam
    }
}
