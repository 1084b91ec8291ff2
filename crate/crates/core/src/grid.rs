//! Uniform periodic lattices truncating R^N and real fields sampled on them.
//!
//! Nodes sit at `x_j = -L + j h` with `h = 2L / M`, so the origin is a node
//! whenever `M` is even. Multi-dimensional fields are stored row-major with
//! the first axis varying slowest.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_POINTS_PER_AXIS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridRaw", into = "GridRaw")]
pub struct Grid {
    dim: usize,
    half_extent: f64,
    points_per_axis: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridRaw {
    dim: usize,
    half_extent: f64,
    points_per_axis: usize,
}

impl TryFrom<GridRaw> for Grid {
    type Error = Error;
    fn try_from(raw: GridRaw) -> Result<Self> {
        Grid::new(raw.dim, raw.half_extent, raw.points_per_axis)
    }
}

impl From<Grid> for GridRaw {
    fn from(g: Grid) -> Self {
        GridRaw {
            dim: g.dim,
            half_extent: g.half_extent,
            points_per_axis: g.points_per_axis,
        }
    }
}

impl Grid {
    pub fn new(dim: usize, half_extent: f64, points_per_axis: usize) -> Result<Self> {
        if !(dim == 1 || dim == 2) {
            return Err(Error::Config(format!("grid.dim must be 1 or 2, got {dim}")));
        }
        if !(half_extent.is_finite() && half_extent > 0.0) {
            return Err(Error::Config(format!(
                "grid.half_extent must be positive and finite, got {half_extent}"
            )));
        }
        if points_per_axis < MIN_POINTS_PER_AXIS || points_per_axis % 2 != 0 {
            return Err(Error::Config(format!(
                "grid.points_per_axis must be even and >= {MIN_POINTS_PER_AXIS}, got {points_per_axis}"
            )));
        }
        let total = points_per_axis.checked_pow(dim as u32);
        if total.map_or(true, |t| t > (1usize << 32)) {
            return Err(Error::Config(format!(
                "grid with {points_per_axis}^{dim} points is too large"
            )));
        }
        Ok(Grid {
            dim,
            half_extent,
            points_per_axis,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_extent(&self) -> f64 {
        self.half_extent
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_extent / self.points_per_axis as f64
    }

    pub fn len(&self) -> usize {
        self.points_per_axis.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight of a single node (`h^N`).
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn axis_coord(&self, j: usize) -> f64 {
        -self.half_extent + j as f64 * self.spacing()
    }

    /// Multi-index of a flat index.
    pub fn unravel(&self, idx: usize) -> [usize; 2] {
        let m = self.points_per_axis;
        match self.dim {
            1 => [idx, 0],
            _ => [idx / m, idx % m],
        }
    }

    pub fn ravel(&self, ij: [usize; 2]) -> usize {
        match self.dim {
            1 => ij[0],
            _ => ij[0] * self.points_per_axis + ij[1],
        }
    }

    /// Coordinates of node `idx`, padded with zero beyond `dim`.
    pub fn point(&self, idx: usize) -> [f64; 2] {
        let ij = self.unravel(idx);
        match self.dim {
            1 => [self.axis_coord(ij[0]), 0.0],
            _ => [self.axis_coord(ij[0]), self.axis_coord(ij[1])],
        }
    }

    pub fn points(&self) -> impl Iterator<Item = [f64; 2]> + '_ {
        (0..self.len()).map(move |i| self.point(i))
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim && x.iter().all(|c| c.abs() <= self.half_extent)
    }

    /// Flat index of the node nearest to `x` (periodic wrap is not applied).
    pub fn nearest_node(&self, x: &[f64]) -> Result<usize> {
        if !self.contains(x) {
            return Err(Error::Domain {
                point: x.to_vec(),
                half_extent: self.half_extent,
            });
        }
        let h = self.spacing();
        let m = self.points_per_axis;
        let mut ij = [0usize; 2];
        for (a, c) in x.iter().enumerate() {
            let j = ((c + self.half_extent) / h).round() as usize;
            ij[a] = j.min(m - 1);
        }
        Ok(self.ravel(ij))
    }

    /// True when node `idx` touches the outer face of the box.
    pub fn is_boundary_node(&self, idx: usize, layers: usize) -> bool {
        let ij = self.unravel(idx);
        let m = self.points_per_axis;
        ij.iter()
            .take(self.dim)
            .any(|&j| j < layers || j + layers >= m)
    }
}

/// Real samples over a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Input(format!(
                "field has {} values, grid expects {}",
                values.len(),
                grid.len()
            )));
        }
        Ok(Field { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Field {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Field {
            grid,
            values: vec![c; grid.len()],
        }
    }

    /// Samples `f` at every node.
    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> f64) -> Self {
        let d = grid.dim();
        let values = grid.points().map(|p| f(&p[..d])).collect();
        Field { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> Field {
        self.map(|v| c * v)
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: f64, other: &Field) -> Field {
        debug_assert_eq!(self.grid, other.grid);
        Field {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + c * b)
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn ensure_finite(&self, what: &str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::Input(format!("{what} contains non-finite values")))
        }
    }

    /// Quadrature inner product `h^N Σ u v`.
    pub fn dot(&self, other: &Field) -> f64 {
        self.grid.cell_volume()
            * self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .sum::<f64>()
    }

    pub fn norm_l2(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn norm_lq(&self, q: f64) -> f64 {
        (self.grid.cell_volume() * self.values.iter().map(|v| v.abs().powf(q)).sum::<f64>())
            .powf(1.0 / q)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest |u| over the outermost `layers` rings of nodes.
    pub fn boundary_max_abs(&self, layers: usize) -> f64 {
        self.values
            .iter()
            .enumerate()
            .filter(|(i, _)| self.grid.is_boundary_node(*i, layers))
            .fold(0.0, |m, (_, v)| m.max(v.abs()))
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        best
    }
}
