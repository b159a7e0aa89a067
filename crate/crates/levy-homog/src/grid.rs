//! Uniform grids: the periodic unit torus for cell problems and a bounded box
//! with an exterior collar for Dirichlet problems.

use crate::error::{Error, Result};

/// Uniform grid on the unit torus, `n` points per dimension, spacing `1/n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TorusGrid {
    pub dim: usize,
    pub n: usize,
}

impl TorusGrid {
    pub fn new(dim: usize, n: usize) -> Result<TorusGrid> {
        if dim == 0 || dim > 4 {
            return Err(Error::config(format!("torus dimension {dim} unsupported")));
        }
        if n < 2 {
            return Err(Error::config("torus grid needs at least 2 points per dim"));
        }
        let len = (n as u128).pow(dim as u32);
        if len > 4_000_000 {
            return Err(Error::config(format!(
                "torus grid with {len} points is beyond the dense assembly this crate targets"
            )));
        }
        Ok(TorusGrid { dim, n })
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Multi-index of a flat index, row-major with the last dim fastest.
    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim];
        let mut rem = flat;
        for d in (0..self.dim).rev() {
            idx[d] = rem % self.n;
            rem /= self.n;
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        let mut flat = 0;
        for d in 0..self.dim {
            flat = flat * self.n + (idx[d] % self.n);
        }
        flat
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        let h = self.spacing();
        self.multi_index(flat).iter().map(|&k| k as f64 * h).collect()
    }

    /// Toroidal shift of a flat index by a signed multi-offset.
    pub fn shift(&self, flat: usize, offset: &[isize]) -> usize {
        let n = self.n as isize;
        let idx = self.multi_index(flat);
        let mut out = 0usize;
        for d in 0..self.dim {
            let k = (idx[d] as isize + offset[d]).rem_euclid(n) as usize;
            out = out * self.n + k;
        }
        out
    }

    /// Periodic distance between two grid points.
    pub fn periodic_distance(&self, a: usize, b: usize) -> f64 {
        let pa = self.point(a);
        let pb = self.point(b);
        periodic_dist(&pa, &pb)
    }
}

/// Periodic Euclidean distance on the unit torus.
pub fn periodic_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = (x - y).rem_euclid(1.0);
            d.min(1.0 - d)
        })
        .map(|d| d * d)
        .sum::<f64>()
        .sqrt()
}

/// Values on a torus grid.
#[derive(Debug, Clone)]
pub struct PeriodicField {
    pub grid: TorusGrid,
    pub values: Vec<f64>,
}

impl PeriodicField {
    pub fn new(grid: TorusGrid, values: Vec<f64>) -> Result<PeriodicField> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "field has {} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::ShapeMismatch("field contains non-finite values".into()));
        }
        Ok(PeriodicField { grid, values })
    }

    pub fn from_fn(grid: &TorusGrid, f: impl Fn(&[f64]) -> f64) -> PeriodicField {
        let values = (0..grid.len()).map(|i| f(&grid.point(i))).collect();
        PeriodicField {
            grid: grid.clone(),
            values,
        }
    }

    pub fn constant(grid: &TorusGrid, value: f64) -> PeriodicField {
        PeriodicField {
            grid: grid.clone(),
            values: vec![value; grid.len()],
        }
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn inf(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn oscillation(&self) -> f64 {
        self.sup() - self.inf()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Bounded box grid with `n` cells per dimension plus `collar` exterior
/// layers on each side. Vertex-centered: extended index `k` in
/// `[0, n + 2 collar]` maps to `lo + (k - collar) h`. Interior unknowns are
/// the strictly inside vertices; the boundary itself carries Dirichlet data.
#[derive(Debug, Clone)]
pub struct DomainGrid {
    pub dim: usize,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub n: usize,
    pub collar: usize,
    interior: Vec<usize>,
    interior_rank: Vec<Option<usize>>,
}

impl DomainGrid {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, n: usize, collar: usize) -> Result<DomainGrid> {
        let dim = lo.len();
        if dim == 0 || dim != hi.len() {
            return Err(Error::config("domain box dimensions are inconsistent"));
        }
        if n < 4 {
            return Err(Error::config("domain grid needs at least 4 cells per dim"));
        }
        if collar < 1 {
            return Err(Error::config("domain grid needs at least one collar layer"));
        }
        let width = hi[0] - lo[0];
        if width <= 0.0 {
            return Err(Error::config("domain box must have positive width"));
        }
        for d in 1..dim {
            if ((hi[d] - lo[d]) - width).abs() > 1e-12 * width {
                return Err(Error::config(
                    "domain box must have equal widths per dimension (uniform spacing)",
                ));
            }
        }
        let ext = n + 2 * collar + 1;
        let ext_len = (ext as u128).pow(dim as u32);
        if ext_len > 40_000_000 {
            return Err(Error::config(format!(
                "extended grid with {ext_len} points is too large"
            )));
        }
        let mut grid = DomainGrid {
            dim,
            lo,
            hi,
            n,
            collar,
            interior: Vec::new(),
            interior_rank: Vec::new(),
        };
        let ext_len = grid.ext_len();
        let mut interior = Vec::new();
        let mut rank = vec![None; ext_len];
        for flat in 0..ext_len {
            if grid.is_interior_flat(flat) {
                rank[flat] = Some(interior.len());
                interior.push(flat);
            }
        }
        grid.interior = interior;
        grid.interior_rank = rank;
        Ok(grid)
    }

    pub fn spacing(&self) -> f64 {
        (self.hi[0] - self.lo[0]) / self.n as f64
    }

    /// Points per dimension of the extended grid.
    pub fn ext_per_dim(&self) -> usize {
        self.n + 2 * self.collar + 1
    }

    pub fn ext_len(&self) -> usize {
        self.ext_per_dim().pow(self.dim as u32)
    }

    pub fn ext_multi_index(&self, flat: usize) -> Vec<usize> {
        let e = self.ext_per_dim();
        let mut idx = vec![0; self.dim];
        let mut rem = flat;
        for d in (0..self.dim).rev() {
            idx[d] = rem % e;
            rem /= e;
        }
        idx
    }

    pub fn ext_flat_index(&self, idx: &[usize]) -> usize {
        let e = self.ext_per_dim();
        let mut flat = 0;
        for d in 0..self.dim {
            debug_assert!(idx[d] < e);
            flat = flat * e + idx[d];
        }
        flat
    }

    pub fn ext_point(&self, flat: usize) -> Vec<f64> {
        let h = self.spacing();
        self.ext_multi_index(flat)
            .iter()
            .enumerate()
            .map(|(d, &k)| self.lo[d] + (k as f64 - self.collar as f64) * h)
            .collect()
    }

    fn is_interior_flat(&self, flat: usize) -> bool {
        let idx = self.ext_multi_index(flat);
        idx.iter()
            .all(|&k| k > self.collar && k < self.collar + self.n)
    }

    /// Extended flat indices of the interior unknowns, in rank order.
    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    pub fn interior_len(&self) -> usize {
        self.interior.len()
    }

    /// Rank of an extended flat index among the unknowns, if interior.
    pub fn rank_of(&self, ext_flat: usize) -> Option<usize> {
        self.interior_rank[ext_flat]
    }

    /// Distance from an interior point to the box boundary.
    pub fn boundary_distance(&self, ext_flat: usize) -> f64 {
        let p = self.ext_point(ext_flat);
        let mut dist = f64::INFINITY;
        for d in 0..self.dim {
            dist = dist.min(p[d] - self.lo[d]).min(self.hi[d] - p[d]);
        }
        dist
    }
}

/// Values on the extended grid of a [`DomainGrid`]: the solution on interior
/// points, Dirichlet data on the collar.
#[derive(Debug, Clone)]
pub struct DomainField {
    pub grid: DomainGrid,
    pub values: Vec<f64>,
}

impl DomainField {
    pub fn new(grid: DomainGrid, values: Vec<f64>) -> Result<DomainField> {
        if values.len() != grid.ext_len() {
            return Err(Error::ShapeMismatch(format!(
                "domain field has {} values for an extended grid of {} points",
                values.len(),
                grid.ext_len()
            )));
        }
        Ok(DomainField { grid, values })
    }

    /// Assemble from exterior data and the solved interior vector.
    pub fn from_parts(
        grid: &DomainGrid,
        exterior: impl Fn(&[f64]) -> f64,
        interior: &[f64],
    ) -> Result<DomainField> {
        if interior.len() != grid.interior_len() {
            return Err(Error::ShapeMismatch(
                "interior vector length does not match grid".into(),
            ));
        }
        let mut values = vec![0.0; grid.ext_len()];
        for flat in 0..grid.ext_len() {
            values[flat] = match grid.rank_of(flat) {
                Some(r) => interior[r],
                None => exterior(&grid.ext_point(flat)),
            };
        }
        DomainField::new(grid.clone(), values)
    }

    pub fn interior_values(&self) -> Vec<f64> {
        self.grid.interior().iter().map(|&f| self.values[f]).collect()
    }

    pub fn interior_sup_norm(&self) -> f64 {
        self.grid
            .interior()
            .iter()
            .fold(0.0f64, |m, &f| m.max(self.values[f].abs()))
    }

    /// Sup difference over interior points at boundary distance > margin.
    pub fn interior_sup_difference(&self, other: &DomainField, margin: f64) -> f64 {
        self.grid
            .interior()
            .iter()
            .filter(|&&f| self.grid.boundary_distance(f) > margin)
            .fold(0.0f64, |m, &f| {
                m.max((self.values[f] - other.values[f]).abs())
            })
    }
}
