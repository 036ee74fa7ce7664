//! Uniform grids on the computational box and grid-sampled value fields.

use serde::Serialize;

use crate::scenario::Region;
use crate::Error;

/// Default width of the band near the box edge excluded from comparisons.
pub const BOX_MARGIN: f64 = 0.1;

/// Uniform grid on [-L, L]^dim with the normal axis last.
///
/// Nodes are numbered with the tangential index fastest: in 2-D node
/// `k = j * n + i` has coordinates `(x_i, x_j)` and `x_j` is normal.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub dim: usize,
    pub halfwidth: f64,
    pub h: f64,
    /// Nodes per axis.
    pub n: usize,
    /// Axis index of the coordinate 0.
    pub mid: usize,
}

impl Grid {
    pub fn new(dim: usize, halfwidth: f64, h: f64) -> Result<Grid, Error> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidGrid(format!("dim must be 1 or 2, got {dim}")));
        }
        if !(h > 0.0 && h.is_finite() && halfwidth > 0.0 && halfwidth.is_finite()) {
            return Err(Error::InvalidGrid(format!("need h > 0 and L > 0, got h={h}, L={halfwidth}")));
        }
        let ratio = halfwidth / h;
        let cells = ratio.round();
        if (ratio - cells).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::InvalidGrid(format!("L/h = {ratio} is not an integer")));
        }
        if cells < 3.0 {
            return Err(Error::InvalidGrid(format!(
                "need at least 3 nodes on each side of the interface, L/h = {cells}"
            )));
        }
        if cells > 1e6 {
            return Err(Error::InvalidGrid(format!("L/h = {cells} is too large")));
        }
        let mid = cells as usize;
        Ok(Grid {
            dim,
            halfwidth,
            h,
            n: 2 * mid + 1,
            mid,
        })
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinate of axis index `i`.
    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        (i as f64 - self.mid as f64) * self.h
    }

    /// Axis indices (tangential, normal); in 1-D the tangential index is 0.
    #[inline]
    pub fn split(&self, k: usize) -> (usize, usize) {
        if self.dim == 1 {
            (0, k)
        } else {
            (k % self.n, k / self.n)
        }
    }

    #[inline]
    pub fn index(&self, i_tan: usize, i_norm: usize) -> usize {
        if self.dim == 1 {
            i_norm
        } else {
            i_norm * self.n + i_tan
        }
    }

    /// Coordinates of node `k`, normal component last.
    pub fn point(&self, k: usize) -> Vec<f64> {
        let (i, j) = self.split(k);
        if self.dim == 1 {
            vec![self.coord(j)]
        } else {
            vec![self.coord(i), self.coord(j)]
        }
    }

    pub fn region(&self, k: usize) -> Region {
        let j = self.split(k).1;
        match j.cmp(&self.mid) {
            std::cmp::Ordering::Greater => Region::One,
            std::cmp::Ordering::Less => Region::Two,
            std::cmp::Ordering::Equal => Region::Interface,
        }
    }

    pub fn interface_nodes(&self) -> Vec<usize> {
        (0..self.len()).filter(|&k| self.split(k).1 == self.mid).collect()
    }

    /// Whether every coordinate of node `k` is at distance ≥ `margin` from
    /// the box edge.
    pub fn inside_margin(&self, k: usize, margin: f64) -> bool {
        let limit = self.halfwidth - margin + 1e-12;
        self.point(k).iter().all(|c| c.abs() <= limit)
    }

    /// Node closest to `x`, if `x` lies in the box.
    pub fn nearest(&self, x: &[f64]) -> Option<usize> {
        if x.len() != self.dim || x.iter().any(|c| !(c.abs() <= self.halfwidth * (1.0 + 1e-12))) {
            return None;
        }
        let axis = |c: f64| (((c / self.h) + self.mid as f64).round() as usize).min(self.n - 1);
        Some(if self.dim == 1 {
            axis(x[0])
        } else {
            self.index(axis(x[0]), axis(x[1]))
        })
    }

    /// Linear interpolation weights along one axis: cell start and weight of
    /// the right node. Coordinates outside the box are clamped.
    #[inline]
    pub fn axis_cell(&self, c: f64) -> (usize, f64) {
        let r = (c / self.h + self.mid as f64).clamp(0.0, (self.n - 1) as f64);
        let mut i = r.floor() as usize;
        if i >= self.n - 1 {
            i = self.n - 2;
        }
        let t = (r - i as f64).clamp(0.0, 1.0);
        (i, t)
    }

    /// Interpolation stencil at `x` (linear in 1-D, bilinear in 2-D);
    /// zero weights are dropped.
    pub fn stencil(&self, x: &[f64]) -> Vec<(usize, f64)> {
        let mut out = Vec::with_capacity(4);
        if self.dim == 1 {
            let (i, t) = self.axis_cell(x[0]);
            for (k, w) in [(i, 1.0 - t), (i + 1, t)] {
                if w != 0.0 {
                    out.push((k, w));
                }
            }
        } else {
            let (i, s) = self.axis_cell(x[0]);
            let (j, t) = self.axis_cell(x[1]);
            for (di, wi) in [(0, 1.0 - s), (1, s)] {
                for (dj, wj) in [(0, 1.0 - t), (1, t)] {
                    let w = wi * wj;
                    if w != 0.0 {
                        out.push((self.index(i + di, j + dj), w));
                    }
                }
            }
        }
        out
    }
}

/// Solver metadata attached to a field.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Meta {
    pub iterations: usize,
    pub final_residual: f64,
    pub scheme_tag: String,
    pub limiter_spec: Option<String>,
    pub runtime_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueField {
    pub grid: Grid,
    pub values: Vec<f64>,
    /// Residual of the discrete equation at each node.
    pub local_residual: Vec<f64>,
    pub meta: Meta,
}

impl ValueField {
    pub fn value_at_node(&self, x: &[f64]) -> Option<f64> {
        self.grid.nearest(x).map(|k| self.values[k])
    }

    /// Value at the interface node with tangential coordinate 0.
    pub fn at_origin(&self) -> f64 {
        let mid = self.grid.mid;
        self.values[self.grid.index(mid, mid)]
    }

    /// max |self - other| over nodes inside the margin.
    pub fn sup_distance(&self, other: &ValueField, margin: f64) -> f64 {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
        (0..self.grid.len())
            .filter(|&k| self.grid.inside_margin(k, margin))
            .map(|k| (self.values[k] - other.values[k]).abs())
            .fold(0.0, f64::max)
    }

    /// max |u(x) - f(x)| over nodes inside the margin.
    pub fn sup_error(&self, f: impl Fn(&[f64]) -> f64, margin: f64) -> f64 {
        (0..self.grid.len())
            .filter(|&k| self.grid.inside_margin(k, margin))
            .map(|k| (self.values[k] - f(&self.grid.point(k))).abs())
            .fold(0.0, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Largest |Δu|/h over pairs of adjacent nodes.
pub fn discrete_lipschitz(field: &ValueField) -> f64 {
    let g = &field.grid;
    let u = &field.values;
    let mut best: f64 = 0.0;
    for k in 0..g.len() {
        let (i, j) = g.split(k);
        if j + 1 < g.n {
            best = best.max((u[g.index(i, j + 1)] - u[k]).abs() / g.h);
        }
        if g.dim == 2 && i + 1 < g.n {
            best = best.max((u[g.index(i + 1, j)] - u[k]).abs() / g.h);
        }
    }
    best
}
